//! Energy functionals, the regime-specific weight tables with their
//! cancellation identities, the composite Lyapunov value y(t), mass
//! functionals and the differential-inequality residual monitors.

use crate::error::{Error, Result};
use crate::grid::{grad_inner, inner};
use crate::model::{
    jacobian_at_steady_state, Parameters, Regime, RegimeTag, SteadyState,
};
use crate::solver::SimState;
use serde::{Deserialize, Serialize};

/// Weights of the composite functional
/// y = Σ (w/2)·(L², gradient, Laplacian) energies of (u − u⋆) and (v − v⋆).
/// `mass_v` is the extra weight on ∫v used only in the degenerate regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub l2_u: f64,
    pub l2_v: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub lap_u: f64,
    pub lap_v: f64,
    pub mass_v: Option<f64>,
    /// False in the exclusion regimes, where the gradient-energy pair is not
    /// part of the decay argument and both gradient weights are zero.
    pub grad_terms_active: bool,
}

/// One sampled row of every monitored functional. The first twelve fields
/// are the serialized CSV schema; the rest are in-memory diagnostics for the
/// residual monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalRecord {
    pub t: f64,
    pub e_u0: f64,
    pub e_v0: f64,
    pub e_u1: f64,
    pub e_v1: f64,
    pub e_u2: f64,
    pub e_v2: f64,
    pub y: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub w22_u: f64,
    pub w22_v: f64,
    pub e_u3: f64,
    pub e_v3: f64,
    pub cross_l2: f64,
    pub cross_grad: f64,
    pub cross_lap: f64,
    pub cross_gradlap: f64,
    pub int_u2: f64,
    pub int_v2: f64,
    pub int_uv: f64,
    pub linf_u: f64,
    pub linf_v: f64,
}

impl FunctionalRecord {
    pub const CSV_HEADER: &'static str =
        "t,e_u0,e_v0,e_u1,e_v1,e_u2,e_v2,y,mass_u,mass_v,w22_u,w22_v";

    pub fn csv_row(&self) -> String {
        [
            self.t, self.e_u0, self.e_v0, self.e_u1, self.e_v1, self.e_u2,
            self.e_v2, self.y, self.mass_u, self.mass_v, self.w22_u, self.w22_v,
        ]
        .iter()
        .map(|x| format!("{:.16e}", x))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// The weight table per regime. `poincare_constant` is the measured discrete
/// constant of the active grid; it enters only the exclusion-regime
/// Laplacian-energy weight.
pub fn weights_for_regime(
    p: &Parameters,
    s: &SteadyState,
    r: &Regime,
    poincare_constant: f64,
) -> Result<WeightSet> {
    let exclusion = matches!(
        r.tag,
        RegimeTag::StrictExclusionH2 | RegimeTag::DegenerateExclusionH2
    );
    if exclusion && s.v_star > 0.0 {
        return Err(Error::InvalidParameters(
            "exclusion regime requires v_star = 0".into(),
        ));
    }
    if !exclusion && r.tag != RegimeTag::H1 && s.v_star <= 0.0 {
        return Err(Error::InvalidParameters(
            "coexistence regime requires v_star > 0".into(),
        ));
    }
    let w = match r.tag {
        RegimeTag::H1 => {
            let wu = p.chi2 * s.v_star;
            let wv = p.chi1 * s.u_star;
            WeightSet {
                l2_u: wu,
                l2_v: wv,
                grad_u: wu,
                grad_v: wv,
                lap_u: wu,
                lap_v: wv,
                mass_v: None,
                grad_terms_active: true,
            }
        }
        RegimeTag::CoexistenceH2 => WeightSet {
            l2_u: p.a2 * s.v_star,
            l2_v: p.a1 * s.u_star,
            grad_u: (p.a2 + p.chi2) * s.v_star,
            grad_v: (p.a1 + p.chi1) * s.u_star,
            lap_u: p.chi2 * s.v_star,
            lap_v: p.chi1 * s.u_star,
            mass_v: None,
            grad_terms_active: true,
        },
        RegimeTag::StrictExclusionH2 | RegimeTag::DegenerateExclusionH2 => {
            if !(poincare_constant > 0.0) {
                return Err(Error::InvalidParameters(
                    "exclusion weights need a positive measured Poincare constant"
                        .into(),
                ));
            }
            let lap_v = 16.0
                * (poincare_constant * poincare_constant * p.a1 * p.a1)
                    .max(p.chi1 * p.chi1)
                * (s.u_star + 1.0)
                * (s.u_star + 1.0)
                / (p.d1 * p.d2);
            let l2_v = if r.tag == RegimeTag::StrictExclusionH2 {
                let j = jacobian_at_steady_state(p, s)?;
                let k = 0.5 * (-j.fu).min(-j.gv);
                (p.a1 * p.a1 / (k * k))
                    .max(p.chi1 * p.chi1 / (p.d1 * p.d2))
                    * s.u_star
                    * s.u_star
            } else {
                p.chi1 * p.chi1 * s.u_star * s.u_star / (p.d1 * p.d2)
            };
            WeightSet {
                l2_u: 1.0,
                l2_v,
                grad_u: 0.0,
                grad_v: 0.0,
                lap_u: 1.0,
                lap_v,
                mass_v: (r.tag == RegimeTag::DegenerateExclusionH2)
                    .then(|| p.a1 * s.u_star / p.a2),
                grad_terms_active: false,
            }
        }
    };
    Ok(w)
}

/// The four cross-term coefficients of the combined decay inequality. With
/// cancellation weights all four vanish identically.
pub fn cancellation_residuals(
    w: &WeightSet,
    p: &Parameters,
    s: &SteadyState,
) -> [f64; 4] {
    let (u, v) = (s.u_star, s.v_star);
    [
        w.l2_u * p.a1 * u - w.l2_v * p.a2 * v,
        (w.l2_u * p.chi1 + w.grad_u * p.a1) * u
            - (w.l2_v * p.chi2 + w.grad_v * p.a2) * v,
        (w.grad_u * p.chi1 + w.lap_u * p.a1) * u
            - (w.grad_v * p.chi2 + w.lap_v * p.a2) * v,
        w.lap_u * p.chi1 * u - w.lap_v * p.chi2 * v,
    ]
}

/// Samples every monitored functional of the state.
pub fn record(state: &SimState, s: &SteadyState, w: &WeightSet) -> FunctionalRecord {
    let du = state.u.shifted(-s.u_star);
    let dv = state.v.shifted(-s.v_star);
    let lap_u = du.laplacian();
    let lap_v = dv.laplacian();

    let e_u0 = inner(&du, &du);
    let e_v0 = inner(&dv, &dv);
    let e_u1 = grad_inner(&du, &du);
    let e_v1 = grad_inner(&dv, &dv);
    let e_u2 = inner(&lap_u, &lap_u);
    let e_v2 = inner(&lap_v, &lap_v);
    let e_u3 = grad_inner(&lap_u, &lap_u);
    let e_v3 = grad_inner(&lap_v, &lap_v);

    let y = 0.5
        * (w.l2_u * e_u0
            + w.grad_u * e_u1
            + w.lap_u * e_u2
            + w.l2_v * e_v0
            + w.grad_v * e_v1
            + w.lap_v * e_v2);

    FunctionalRecord {
        t: state.t,
        e_u0,
        e_v0,
        e_u1,
        e_v1,
        e_u2,
        e_v2,
        y,
        mass_u: state.u.integrate(),
        mass_v: state.v.integrate(),
        w22_u: (e_u0 + e_u1 + e_u2).sqrt(),
        w22_v: (e_v0 + e_v1 + e_v2).sqrt(),
        e_u3,
        e_v3,
        cross_l2: inner(&du, &dv),
        cross_grad: grad_inner(&du, &dv),
        cross_lap: inner(&lap_u, &lap_v),
        cross_gradlap: grad_inner(&lap_u, &lap_v),
        int_u2: inner(&state.u, &state.u),
        int_v2: inner(&state.v, &state.v),
        int_uv: inner(&state.u, &state.v),
        linf_u: du.linf(),
        linf_v: dv.linf(),
    }
}

/// Which species-mass balance to monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassOde {
    /// d/dt ∫u = −μ₁∫u² + a₁∫uv, valid only when λ₁ = 0.
    PredatorNoGrowth,
    /// d/dt ∫v = −μ₂∫v² − a₂∫(u−u⋆)v, valid only on the degenerate line.
    PreyDegenerate,
}

/// Central-difference residual of the selected mass balance at each interior
/// sample; O(dt²) for a sufficiently accurate trajectory.
pub fn mass_ode_residual(
    series: &[FunctionalRecord],
    p: &Parameters,
    s: &SteadyState,
    r: &Regime,
    which: MassOde,
) -> Result<Vec<(f64, f64)>> {
    match which {
        MassOde::PredatorNoGrowth if p.lambda1 != 0.0 => {
            return Err(Error::NotApplicable(
                "predator mass balance holds only when lambda1 = 0".into(),
            ));
        }
        MassOde::PreyDegenerate if r.tag != RegimeTag::DegenerateExclusionH2 => {
            return Err(Error::NotApplicable(
                "prey mass balance holds only in the degenerate exclusion regime"
                    .into(),
            ));
        }
        _ => {}
    }
    if series.len() < 3 {
        return Err(Error::NotApplicable(
            "mass residual needs at least three samples".into(),
        ));
    }
    let mut out = Vec::with_capacity(series.len() - 2);
    for i in 1..series.len() - 1 {
        let (prev, cur, next) = (&series[i - 1], &series[i], &series[i + 1]);
        let span = next.t - prev.t;
        let (dm, rhs) = match which {
            MassOde::PredatorNoGrowth => (
                (next.mass_u - prev.mass_u) / span,
                -p.mu1 * cur.int_u2 + p.a1 * cur.int_uv,
            ),
            MassOde::PreyDegenerate => (
                (next.mass_v - prev.mass_v) / span,
                -p.mu2 * cur.int_v2 - p.a2 * (cur.int_uv - s.u_star * cur.mass_v),
            ),
        };
        out.push((cur.t, dm - rhs));
    }
    Ok(out)
}

/// Signed slack of the monitored decay inequalities at one interior sample:
/// left-hand side minus right-hand side, nonpositive when the inequality
/// holds. `None` when the stencil leaves the η-tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalitySlack {
    pub t: f64,
    pub in_tube: bool,
    pub combined: Option<f64>,
    pub single_u: Option<f64>,
    pub single_v: Option<f64>,
}

/// Evaluates the combined composite-functional inequality and the two
/// single-species L² inequalities on every interior sample, with central
/// time differences for the d/dt terms.
pub fn differential_inequality_residuals(
    series: &[FunctionalRecord],
    p: &Parameters,
    s: &SteadyState,
    w: &WeightSet,
    eta: f64,
) -> Result<Vec<InequalitySlack>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameters("eta must be positive".into()));
    }
    if series.len() < 3 {
        return Err(Error::NotApplicable(
            "inequality monitor needs at least three samples".into(),
        ));
    }
    let j = jacobian_at_steady_state(p, s)?;
    let residuals = cancellation_residuals(w, p, s);
    let damp_u = -j.fu - eta * (p.a1 + p.mu1);
    let damp_v = -j.gv - eta * (p.a2 + p.mu2);

    let in_tube = |rec: &FunctionalRecord| rec.linf_u + rec.linf_v < eta;

    let mut out = Vec::with_capacity(series.len() - 2);
    for i in 1..series.len() - 1 {
        let (prev, cur, next) = (&series[i - 1], &series[i], &series[i + 1]);
        let tube = in_tube(prev) && in_tube(cur) && in_tube(next);
        if !tube {
            out.push(InequalitySlack {
                t: cur.t,
                in_tube: false,
                combined: None,
                single_u: None,
                single_v: None,
            });
            continue;
        }
        let span = next.t - prev.t;
        let dy = (next.y - prev.y) / span;
        let de_u0 = (next.e_u0 - prev.e_u0) / span;
        let de_v0 = (next.e_v0 - prev.e_v0) / span;

        let combined_lhs = dy
            + 0.5
                * (w.l2_u * p.d1 * cur.e_u1
                    + w.l2_v * p.d2 * cur.e_v1
                    + w.grad_u * p.d1 * cur.e_u2
                    + w.grad_v * p.d2 * cur.e_v2
                    + w.lap_u * p.d1 * cur.e_u3
                    + w.lap_v * p.d2 * cur.e_v3)
            + w.l2_u * damp_u * cur.e_u0
            + w.l2_v * damp_v * cur.e_v0;
        let combined_rhs = residuals[0] * cur.cross_l2
            + residuals[1] * cur.cross_grad
            + residuals[2] * cur.cross_lap
            + residuals[3] * cur.cross_gradlap;

        let single_u_lhs =
            0.5 * de_u0 + 0.75 * p.d1 * cur.e_u1 + damp_u * cur.e_u0;
        let single_u_rhs = p.a1 * s.u_star * cur.cross_l2
            + p.chi1 * s.u_star * cur.cross_grad
            + 0.5 * eta * p.chi1 * cur.e_v1;

        let single_v_lhs =
            0.5 * de_v0 + 0.75 * p.d2 * cur.e_v1 + damp_v * cur.e_v0;
        let single_v_rhs = -p.a2 * s.v_star * cur.cross_l2
            - p.chi2 * s.v_star * cur.cross_grad
            + 0.5 * eta * p.chi2 * cur.e_u1;

        out.push(InequalitySlack {
            t: cur.t,
            in_tube: true,
            combined: Some(combined_lhs - combined_rhs),
            single_u: Some(single_u_lhs - single_u_rhs),
            single_v: Some(single_v_lhs - single_v_rhs),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cosine_mode, Field, Grid};
    use crate::model::{classify_regime, steady_state};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn coexistence() -> Parameters {
        Parameters {
            d1: 1.0,
            d2: 1.0,
            chi1: 1.0,
            chi2: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            a1: 1.0,
            a2: 0.5,
            m1: 0.0,
            m2: 0.0,
        }
    }

    #[test]
    fn coexistence_weight_table() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        assert_relative_eq!(w.l2_u, 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(w.l2_v, 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(w.grad_u, 1.0 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(w.grad_v, 8.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(w.lap_u, 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(w.lap_v, 4.0 / 3.0, max_relative = 1e-14);
        assert!(w.grad_terms_active && w.mass_v.is_none());
    }

    #[test]
    fn conserved_case_weight_table() {
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (1.0, 1.0));
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        for weight in [w.l2_u, w.l2_v, w.grad_u, w.grad_v, w.lap_u, w.lap_v] {
            assert_eq!(weight, 1.0);
        }
    }

    #[test]
    fn degenerate_mass_weight() {
        let mut p = coexistence();
        p.lambda2 = 0.5;
        let r = classify_regime(&p).unwrap();
        assert_eq!(r.tag, RegimeTag::DegenerateExclusionH2);
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        assert_eq!(w.mass_v, Some(2.0));
        assert_eq!(w.l2_u, 1.0);
        assert_relative_eq!(w.l2_v, 1.0, max_relative = 1e-14);
        assert!(!w.grad_terms_active && w.grad_u == 0.0 && w.grad_v == 0.0);
    }

    #[test]
    fn cancellation_vanishes_for_coexistence_weights() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let scale = s.u_star.max(s.v_star);
        for r in cancellation_residuals(&w, &p, &s) {
            assert!(r.abs() <= 1e-12 * scale, "residual {r}");
        }
    }

    #[test]
    fn cancellation_perturbation_is_linear() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let mut w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let delta = 0.37;
        w.l2_u += delta;
        let res = cancellation_residuals(&w, &p, &s);
        assert_relative_eq!(res[0], delta * p.a1 * s.u_star, max_relative = 1e-12);
    }

    #[test]
    fn cancellation_under_zero_kinetics() {
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (1.0, 1.0));
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let res = cancellation_residuals(&w, &p, &s);
        // the first and last coefficients vanish with a1 = a2 = 0, and here
        // the symmetric weights kill the middle two as well
        for r in res {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn weights_reject_mismatched_state() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = SteadyState {
            u_star: 4.0 / 3.0,
            v_star: 0.0,
        };
        assert!(weights_for_regime(&p, &s, &r, 0.1).is_err());
    }

    fn unit_weights() -> WeightSet {
        WeightSet {
            l2_u: 1.0,
            l2_v: 1.0,
            grad_u: 1.0,
            grad_v: 1.0,
            lap_u: 1.0,
            lap_v: 1.0,
            mass_v: None,
            grad_terms_active: true,
        }
    }

    #[test]
    fn record_at_steady_state_is_null() {
        let grid = Grid::line(64, 1.0).unwrap();
        let s = SteadyState {
            u_star: 2.0,
            v_star: 3.0,
        };
        let state = SimState {
            u: Field::constant(&grid, 2.0),
            v: Field::constant(&grid, 3.0),
            t: 0.0,
        };
        let rec = record(&state, &s, &unit_weights());
        assert_eq!(rec.y, 0.0);
        assert_eq!(rec.e_u0 + rec.e_v0 + rec.e_u1 + rec.e_v1, 0.0);
        assert_relative_eq!(rec.mass_u, 2.0);
        assert_relative_eq!(rec.mass_v, 3.0);
    }

    #[test]
    fn record_cosine_mode_energies() {
        let grid = Grid::line(512, 1.0).unwrap();
        let s = SteadyState {
            u_star: 1.0,
            v_star: 1.0,
        };
        let eps = 1e-2;
        let mode = cosine_mode(&grid, &[1]).unwrap().scale(eps);
        let state = SimState {
            u: Field::constant(&grid, 1.0).add(&mode),
            v: Field::constant(&grid, 1.0),
            t: 0.0,
        };
        let rec = record(&state, &s, &unit_weights());
        assert_relative_eq!(rec.e_u0, eps * eps / 2.0, max_relative = 1e-10);
        assert_relative_eq!(rec.e_u1, eps * eps * PI * PI / 2.0, max_relative = 1e-4);
        assert_relative_eq!(
            rec.e_u2,
            eps * eps * PI.powi(4) / 2.0,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            rec.y,
            eps * eps / 4.0 * (1.0 + PI * PI + PI.powi(4)),
            max_relative = 1e-4
        );
        // y recomputed from the raw energies agrees identically
        assert_eq!(
            rec.y,
            0.5 * (rec.e_u0 + rec.e_u1 + rec.e_u2 + rec.e_v0 + rec.e_v1 + rec.e_v2)
        );
    }

    #[test]
    fn mass_residual_vanishes_on_frozen_state() {
        let grid = Grid::line(16, 1.0).unwrap();
        let mut p = coexistence();
        p.lambda2 = 0.5;
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let series: Vec<_> = (0..5)
            .map(|i| {
                let state = SimState {
                    u: Field::constant(&grid, s.u_star),
                    v: Field::constant(&grid, s.v_star),
                    t: i as f64 * 0.1,
                };
                record(&state, &s, &w)
            })
            .collect();
        for (_, res) in
            mass_ode_residual(&series, &p, &s, &r, MassOde::PreyDegenerate).unwrap()
        {
            assert!(res.abs() < 1e-14);
        }
    }

    #[test]
    fn mass_residual_rejects_inapplicable_regimes() {
        let grid = Grid::line(8, 1.0).unwrap();
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let state = SimState {
            u: Field::constant(&grid, s.u_star),
            v: Field::constant(&grid, s.v_star),
            t: 0.0,
        };
        let series = vec![record(&state, &s, &w); 3];
        assert!(matches!(
            mass_ode_residual(&series, &p, &s, &r, MassOde::PredatorNoGrowth),
            Err(Error::NotApplicable(_))
        ));
        assert!(matches!(
            mass_ode_residual(&series, &p, &s, &r, MassOde::PreyDegenerate),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn increasing_composite_yields_positive_slack() {
        // hand-built series with rising y and zero dissipation terms
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let grid = Grid::line(8, 1.0).unwrap();
        let base = record(
            &SimState {
                u: Field::constant(&grid, s.u_star),
                v: Field::constant(&grid, s.v_star),
                t: 0.0,
            },
            &s,
            &w,
        );
        let series: Vec<_> = (0..5)
            .map(|i| {
                let mut rec = base;
                rec.t = i as f64 * 0.1;
                rec.y = 1.0 + i as f64;
                rec
            })
            .collect();
        let slacks =
            differential_inequality_residuals(&series, &p, &s, &w, 0.1).unwrap();
        assert!(slacks.iter().all(|s| s.combined.unwrap() > 0.0));
    }

    #[test]
    fn slack_zero_at_steady_state() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let grid = Grid::line(8, 1.0).unwrap();
        let series: Vec<_> = (0..4)
            .map(|i| {
                record(
                    &SimState {
                        u: Field::constant(&grid, s.u_star),
                        v: Field::constant(&grid, s.v_star),
                        t: i as f64 * 0.1,
                    },
                    &s,
                    &w,
                )
            })
            .collect();
        for slack in
            differential_inequality_residuals(&series, &p, &s, &w, 0.1).unwrap()
        {
            assert!(slack.in_tube);
            assert_eq!(slack.combined, Some(0.0));
            assert_eq!(slack.single_u, Some(0.0));
            assert_eq!(slack.single_v, Some(0.0));
        }
    }

    #[test]
    fn out_of_tube_samples_are_flagged() {
        let p = coexistence();
        let r = classify_regime(&p).unwrap();
        let s = steady_state(&p, 1.0).unwrap();
        let w = weights_for_regime(&p, &s, &r, 0.1).unwrap();
        let grid = Grid::line(8, 1.0).unwrap();
        let series: Vec<_> = (0..4)
            .map(|i| {
                let mut rec = record(
                    &SimState {
                        u: Field::constant(&grid, s.u_star),
                        v: Field::constant(&grid, s.v_star),
                        t: i as f64 * 0.1,
                    },
                    &s,
                    &w,
                );
                rec.linf_u = 10.0;
                rec
            })
            .collect();
        for slack in
            differential_inequality_residuals(&series, &p, &s, &w, 0.1).unwrap()
        {
            assert!(!slack.in_tube && slack.combined.is_none());
        }
    }
}
