//! Randomized property tests for the structural identities the library
//! relies on: equilibrium consistency, weight cancellation, operator
//! linearity and exactness, and invariances of the monitored ratios.

use crosstaxis::functionals::{cancellation_residuals, weights_for_regime};
use crosstaxis::grid::{
    cosine_mode, grad_inner, inner, taxis_divergence, Field, Grid,
};
use crosstaxis::inequalities::{gn_ratios, poincare_ratios};
use crosstaxis::model::{classify_regime, reaction, steady_state, Parameters};
use proptest::prelude::*;

fn admissible_params() -> impl Strategy<Value = Parameters> {
    (
        (0.1f64..2.0, 0.1f64..2.0),
        (0.1f64..2.0, 0.1f64..2.0),
        (0.1f64..2.0, 0.1f64..2.0),
        (0.1f64..2.0, 0.1f64..2.0),
        (0.1f64..2.0, 0.1f64..2.0),
    )
        .prop_map(|(d, chi, lambda, mu, a)| Parameters {
            d1: d.0,
            d2: d.1,
            chi1: chi.0,
            chi2: chi.1,
            lambda1: lambda.0,
            lambda2: lambda.1,
            mu1: mu.0,
            mu2: mu.1,
            a1: a.0,
            a2: a.1,
            m1: 0.0,
            m2: 0.0,
        })
}

fn build_field(grid: &Grid, amps: &[f64]) -> Field {
    let mut f = Field::zeros(grid);
    for (k, &a) in amps.iter().enumerate() {
        let mode = cosine_mode(grid, &[k + 1]).unwrap();
        f.axpy(a / (k + 1) as f64, &mode);
    }
    // guarantee nonconstant fields
    let lead = cosine_mode(grid, &[1]).unwrap();
    f.axpy(0.1, &lead);
    f
}

/// Random nonconstant smooth field on a small 1D grid: a few cosine modes
/// with bounded amplitudes.
fn random_field() -> impl Strategy<Value = Field> {
    (16usize..48, prop::collection::vec(-1.0f64..1.0, 3)).prop_map(|(n, amps)| {
        build_field(&Grid::line(n, 1.0).unwrap(), &amps)
    })
}

/// Two independent random fields sharing one grid.
fn field_pair() -> impl Strategy<Value = (Field, Field)> {
    (
        16usize..48,
        prop::collection::vec(-1.0f64..1.0, 3),
        prop::collection::vec(-1.0f64..1.0, 3),
    )
        .prop_map(|(n, a, b)| {
            let grid = Grid::line(n, 1.0).unwrap();
            (build_field(&grid, &a), build_field(&grid, &b))
        })
}

proptest! {
    #[test]
    fn equilibria_zero_the_kinetics(p in admissible_params()) {
        let s = steady_state(&p, 1.0).unwrap();
        let (f, g) = reaction(&p, s.u_star, s.v_star);
        let scale = 1.0 + s.u_star + s.v_star;
        prop_assert!(f.abs() <= 1e-12 * scale);
        prop_assert!(g.abs() <= 1e-12 * scale);
    }

    #[test]
    fn regime_ignores_transport_coefficients(
        p in admissible_params(),
        fac in 0.2f64..5.0,
    ) {
        let scaled = Parameters {
            d1: fac * p.d1,
            d2: fac * p.d2,
            chi1: fac * p.chi1,
            chi2: fac * p.chi2,
            ..p
        };
        let a = classify_regime(&p).unwrap();
        let b = classify_regime(&scaled).unwrap();
        prop_assert_eq!(a.tag, b.tag);
        prop_assert_eq!(
            steady_state(&p, 1.0).unwrap(),
            steady_state(&scaled, 1.0).unwrap()
        );
    }

    #[test]
    fn coexistence_weights_cancel(p in admissible_params()) {
        let regime = classify_regime(&p).unwrap();
        prop_assume!(regime.tag == crosstaxis::model::RegimeTag::CoexistenceH2);
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &regime, 0.1).unwrap();
        let scale = w.l2_u * p.a1 * s.u_star
            + w.grad_u * p.chi1 * s.u_star
            + w.lap_u * p.chi1 * s.u_star
            + 1.0;
        for r in cancellation_residuals(&w, &p, &s) {
            prop_assert!(r.abs() <= 1e-12 * scale, "residual {r}");
        }
    }

    #[test]
    fn laplacian_is_linear(
        (f, g) in field_pair(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut combo = f.scale(a);
        combo.axpy(b, &g);
        let lhs = combo.laplacian();
        let mut rhs = f.laplacian().scale(a);
        rhs.axpy(b, &g.laplacian());
        let mut diff = lhs;
        diff.axpy(-1.0, &rhs);
        let scale = f.laplacian().linf() * a.abs()
            + g.laplacian().linf() * b.abs()
            + 1.0;
        prop_assert!(diff.linf() <= 1e-12 * scale);
    }

    #[test]
    fn summation_by_parts_is_exact((f, g) in field_pair()) {
        let ibp = inner(&f, &g.laplacian());
        let gi = grad_inner(&f, &g);
        prop_assert!((ibp + gi).abs() <= 1e-12 * (ibp.abs() + gi.abs() + 1.0));
    }

    #[test]
    fn transport_flux_integrates_to_zero((f, g) in field_pair()) {
        let c = f.shifted(1.5); // keep the carried species positive
        let flux = taxis_divergence(&c, &g).unwrap();
        let scale = flux.linf() + 1.0;
        prop_assert!(flux.integrate().abs() <= 1e-12 * scale);
    }

    #[test]
    fn monitored_ratios_are_scale_and_shift_invariant(
        f in random_field(),
        alpha in prop::sample::select(vec![-4.0f64, -0.5, 0.25, 2.0, 8.0]),
        shift in -2.0f64..2.0,
    ) {
        // powers of two and their negatives make the invariance exact in
        // floating point up to the mean subtraction
        let g = {
            let mut g = f.scale(alpha);
            g.axpy(shift, &Field::constant(f.grid(), 1.0));
            g
        };
        let pf = poincare_ratios(&f).unwrap();
        let pg = poincare_ratios(&g).unwrap();
        for (a, b) in pf.iter().zip(&pg) {
            prop_assert!(((a - b) / a).abs() <= 1e-10);
        }
        let gf = gn_ratios(&f).unwrap();
        let gg = gn_ratios(&g).unwrap();
        for (a, b) in gf.iter().zip(&gg) {
            prop_assert!(((a - b) / a).abs() <= 1e-10);
        }
    }
}
