//! Model coefficients, reaction kinetics, the regime trichotomy, closed-form
//! homogeneous steady states and the Jacobian sign conditions at those states.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance at which the regime discriminant λ₂μ₁ - λ₁a₂ is
/// treated as zero. The dichotomy is structurally discontinuous, so
/// classification stays deterministic: experiments targeting the degenerate
/// regime must construct parameters whose discriminant is exactly zero in
/// floating point, and this tolerance only absorbs last-bit noise.
pub const DISCRIMINANT_REL_TOL: f64 = 1e-12;

/// The ten model coefficients plus the prescribed masses (used only under
/// (H1)). Immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parameters {
    pub d1: f64,
    pub d2: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub a1: f64,
    pub a2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl Default for Parameters {
    /// Baseline coexistence parameter set with unit transport coefficients.
    fn default() -> Self {
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
}

impl Parameters {
    /// Validates positivity of the diffusion and taxis coefficients and the
    /// (H1)/(H2) admissibility of the kinetic block.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("D1", self.d1),
            ("D2", self.d2),
            ("chi1", self.chi1),
            ("chi2", self.chi2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        let kin = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("a1", self.a1),
            ("a2", self.a2),
        ];
        for (name, v) in kin {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let all_zero = kin.iter().all(|&(_, v)| v == 0.0);
        let h2 = self.a1 > 0.0 && self.a2 > 0.0 && self.mu1 > 0.0 && self.mu2 > 0.0;
        if !all_zero && !h2 {
            return Err(Error::InvalidParameters(
                "kinetics must either vanish entirely (H1) or have a1, a2, mu1, mu2 > 0 (H2)"
                    .into(),
            ));
        }
        if all_zero && (self.m1 < 0.0 || self.m2 < 0.0) {
            return Err(Error::InvalidParameters(
                "prescribed masses must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_h1(&self) -> bool {
        self.lambda1 == 0.0
            && self.lambda2 == 0.0
            && self.mu1 == 0.0
            && self.mu2 == 0.0
            && self.a1 == 0.0
            && self.a2 == 0.0
    }

    /// Under (H1) with a vanishing prescribed mass, that component stays
    /// identically zero along the flow; callers may assert it.
    pub fn trivial_component(&self) -> Option<TrivialComponent> {
        if !self.is_h1() {
            return None;
        }
        match (self.m1 == 0.0, self.m2 == 0.0) {
            (true, true) => Some(TrivialComponent::Both),
            (true, false) => Some(TrivialComponent::Predator),
            (false, true) => Some(TrivialComponent::Prey),
            (false, false) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrivialComponent {
    Predator,
    Prey,
    Both,
}

/// The four stability regimes of the homogeneous steady state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    H1,
    CoexistenceH2,
    StrictExclusionH2,
    DegenerateExclusionH2,
}

impl std::fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegimeTag::H1 => "H1",
            RegimeTag::CoexistenceH2 => "coexistence",
            RegimeTag::StrictExclusionH2 => "strict-exclusion",
            RegimeTag::DegenerateExclusionH2 => "degenerate-exclusion",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// λ₂μ₁ - λ₁a₂ (units of rate²); zero under (H1) by convention.
    pub discriminant: f64,
}

/// Homogeneous steady state (u⋆, v⋆).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub u_star: f64,
    pub v_star: f64,
}

/// Partial derivatives of (f, g) at the steady state with the sign flags
/// f_u ≤ 0, g_v ≤ 0 (strict off the degenerate line under (H2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianAtSteadyState {
    pub fu: f64,
    pub fv: f64,
    pub gu: f64,
    pub gv: f64,
    pub fu_strictly_negative: bool,
    pub gv_strictly_negative: bool,
}

/// Classifies the parameter set into its regime; the trichotomy under (H2)
/// is decided by the sign of λ₂μ₁ - λ₁a₂.
pub fn classify_regime(p: &Parameters) -> Result<Regime> {
    p.validate()?;
    if p.is_h1() {
        return Ok(Regime {
            tag: RegimeTag::H1,
            discriminant: 0.0,
        });
    }
    let pos = p.lambda2 * p.mu1;
    let neg = p.lambda1 * p.a2;
    let disc = pos - neg;
    let tag = if disc == 0.0 || disc.abs() <= DISCRIMINANT_REL_TOL * (pos + neg) {
        RegimeTag::DegenerateExclusionH2
    } else if disc > 0.0 {
        RegimeTag::CoexistenceH2
    } else {
        RegimeTag::StrictExclusionH2
    };
    Ok(Regime {
        tag,
        discriminant: disc,
    })
}

/// Closed-form steady state: prescribed means under (H1), the coexistence
/// pair for positive discriminant, (λ₁/μ₁, 0) otherwise.
pub fn steady_state(p: &Parameters, domain_volume: f64) -> Result<SteadyState> {
    if !(domain_volume > 0.0) {
        return Err(Error::InvalidParameters(
            "domain volume must be positive".into(),
        ));
    }
    let regime = classify_regime(p)?;
    let s = match regime.tag {
        RegimeTag::H1 => SteadyState {
            u_star: p.m1 / domain_volume,
            v_star: p.m2 / domain_volume,
        },
        RegimeTag::CoexistenceH2 => {
            let den = p.mu1 * p.mu2 + p.a1 * p.a2;
            SteadyState {
                u_star: (p.lambda1 * p.mu2 + p.lambda2 * p.a1) / den,
                v_star: (p.lambda2 * p.mu1 - p.lambda1 * p.a2) / den,
            }
        }
        RegimeTag::StrictExclusionH2 | RegimeTag::DegenerateExclusionH2 => SteadyState {
            u_star: p.lambda1 / p.mu1,
            v_star: 0.0,
        },
    };
    Ok(s)
}

/// f(u,v) = u(λ₁ - μ₁u + a₁v), g(u,v) = v(λ₂ - μ₂v - a₂u).
pub fn reaction(p: &Parameters, u: f64, v: f64) -> (f64, f64) {
    (
        u * (p.lambda1 - p.mu1 * u + p.a1 * v),
        v * (p.lambda2 - p.mu2 * v - p.a2 * u),
    )
}

/// Jacobian of (f, g) at the given steady state; rejects states whose
/// reaction residual shows they do not belong to `p`.
pub fn jacobian_at_steady_state(
    p: &Parameters,
    s: &SteadyState,
) -> Result<JacobianAtSteadyState> {
    let regime = classify_regime(p)?;
    let (f, g) = reaction(p, s.u_star, s.v_star);
    let scale = 1.0
        + s.u_star.abs().max(s.v_star.abs())
            * (p.lambda1 + p.lambda2 + p.mu1 + p.mu2 + p.a1 + p.a2);
    let residual = f.abs().max(g.abs());
    if residual > 1e-10 * scale {
        return Err(Error::InconsistentSteadyState { residual });
    }
    let fu = p.lambda1 - 2.0 * p.mu1 * s.u_star + p.a1 * s.v_star;
    let fv = p.a1 * s.u_star;
    let gu = -p.a2 * s.v_star;
    let gv = p.lambda2 - 2.0 * p.mu2 * s.v_star - p.a2 * s.u_star;
    let strict = regime.tag == RegimeTag::CoexistenceH2
        || regime.tag == RegimeTag::StrictExclusionH2;
    Ok(JacobianAtSteadyState {
        fu,
        fv,
        gu,
        gv,
        fu_strictly_negative: strict && p.lambda1 > 0.0 || regime.tag == RegimeTag::CoexistenceH2,
        gv_strictly_negative: strict,
    })
}

impl Parameters {
    /// All-zero kinetics with unit transport coefficients; handy baseline.
    pub fn h1(d: (f64, f64), chi: (f64, f64), m: (f64, f64)) -> Parameters {
        Parameters {
            d1: d.0,
            d2: d.1,
            chi1: chi.0,
            chi2: chi.1,
            lambda1: 0.0,
            lambda2: 0.0,
            mu1: 0.0,
            mu2: 0.0,
            a1: 0.0,
            a2: 0.0,
            m1: m.0,
            m2: m.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h2(lambda: (f64, f64), mu: (f64, f64), a: (f64, f64)) -> Parameters {
        Parameters {
            d1: 1.0,
            d2: 1.0,
            chi1: 1.0,
            chi2: 1.0,
            lambda1: lambda.0,
            lambda2: lambda.1,
            mu1: mu.0,
            mu2: mu.1,
            a1: a.0,
            a2: a.1,
            m1: 0.0,
            m2: 0.0,
        }
    }

    #[test]
    fn classify_examples() {
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (2.0, 3.0));
        assert_eq!(classify_regime(&p).unwrap().tag, RegimeTag::H1);

        let p = h2((1.0, 1.0), (1.0, 1.0), (1.0, 0.5));
        let r = classify_regime(&p).unwrap();
        assert_eq!(r.tag, RegimeTag::CoexistenceH2);
        assert_relative_eq!(r.discriminant, 0.5);

        let p = h2((1.0, 0.5), (1.0, 1.0), (1.0, 0.5));
        let r = classify_regime(&p).unwrap();
        assert_eq!(r.tag, RegimeTag::DegenerateExclusionH2);
        assert_eq!(r.discriminant, 0.0);

        let p = h2((1.0, 0.2), (1.0, 1.0), (1.0, 0.5));
        let r = classify_regime(&p).unwrap();
        assert_eq!(r.tag, RegimeTag::StrictExclusionH2);
        assert_relative_eq!(r.discriminant, -0.3);
    }

    #[test]
    fn rejects_inadmissible_kinetics() {
        // lambda1 > 0 but mu1 = 0 is neither (H1) nor (H2)
        let mut p = h2((1.0, 1.0), (0.0, 1.0), (1.0, 1.0));
        assert!(p.validate().is_err());
        p.mu1 = 1.0;
        p.chi1 = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn steady_state_examples() {
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (2.0, 3.0));
        let s = steady_state(&p, 1.0).unwrap();
        assert_eq!((s.u_star, s.v_star), (2.0, 3.0));

        let p = h2((1.0, 1.0), (1.0, 1.0), (1.0, 0.5));
        let s = steady_state(&p, 1.0).unwrap();
        assert_relative_eq!(s.u_star, 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(s.v_star, 1.0 / 3.0, max_relative = 1e-14);

        let p = h2((1.0, 0.5), (1.0, 1.0), (1.0, 0.5));
        let s = steady_state(&p, 1.0).unwrap();
        assert_eq!((s.u_star, s.v_star), (1.0, 0.0));
    }

    #[test]
    fn reaction_examples() {
        let p = h2((1.0, 1.0), (1.0, 1.0), (1.0, 0.5));
        let s = steady_state(&p, 1.0).unwrap();
        let (f, g) = reaction(&p, s.u_star, s.v_star);
        assert!(f.abs() < 1e-14 && g.abs() < 1e-14);
        assert_eq!(reaction(&p, 1.0, 1.0), (1.0, -0.5));
        assert_eq!(reaction(&p, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn jacobian_examples() {
        let p = h2((1.0, 1.0), (1.0, 1.0), (1.0, 0.5));
        let s = steady_state(&p, 1.0).unwrap();
        let j = jacobian_at_steady_state(&p, &s).unwrap();
        assert_relative_eq!(j.fu, -4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(j.fv, 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(j.gu, -1.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(j.gv, -1.0 / 3.0, max_relative = 1e-12);
        assert!(j.fu_strictly_negative && j.gv_strictly_negative);

        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (1.0, 1.0));
        let s = steady_state(&p, 1.0).unwrap();
        let j = jacobian_at_steady_state(&p, &s).unwrap();
        assert_eq!((j.fu, j.fv, j.gu, j.gv), (0.0, 0.0, 0.0, 0.0));

        let p = h2((1.0, 0.5), (1.0, 1.0), (1.0, 0.5));
        let s = steady_state(&p, 1.0).unwrap();
        let j = jacobian_at_steady_state(&p, &s).unwrap();
        assert_relative_eq!(j.gv, 0.0);
        assert!(!j.gv_strictly_negative);
    }

    #[test]
    fn jacobian_rejects_inconsistent_state() {
        let p = h2((1.0, 1.0), (1.0, 1.0), (1.0, 0.5));
        let s = SteadyState {
            u_star: 1.0,
            v_star: 1.0,
        };
        assert!(jacobian_at_steady_state(&p, &s).is_err());
    }

    #[test]
    fn classification_ignores_transport_rescaling() {
        let mut p = h2((1.0, 0.7), (0.9, 1.1), (1.3, 0.4));
        let before = classify_regime(&p).unwrap();
        for scale in [0.01, 7.0, 1e3] {
            p.d1 *= scale;
            p.d2 *= scale;
            p.chi1 *= scale;
            p.chi2 *= scale;
            let after = classify_regime(&p).unwrap();
            assert_eq!(before.tag, after.tag);
            assert_eq!(before.discriminant, after.discriminant);
        }
    }

    #[test]
    fn trivial_component_flags() {
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (0.0, 2.0));
        assert_eq!(p.trivial_component(), Some(TrivialComponent::Predator));
        let p = Parameters::h1((1.0, 1.0), (1.0, 1.0), (1.0, 2.0));
        assert_eq!(p.trivial_component(), None);
    }
}
