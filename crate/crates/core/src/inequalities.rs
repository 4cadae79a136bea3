//! Discrete verification laboratory for the functional inequalities behind
//! the decay estimates: best-constant ratios for the Poincare chain, the
//! W22-Laplacian equivalence and the Gagliardo-Nirenberg variants, sampled
//! over randomized zero-flux cosine spectra.

use crate::error::{Error, Result};
use crate::grid::{
    cosine_mode, grad_inner, inner, lowest_nonzero_eigenvalue, Field, Grid,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// The five monitored inequality families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InequalityId {
    /// ∫(φ−φ̄)² ≤ C ∫|∇φ|², plus the two chained forms.
    Poincare,
    /// W²²-equivalent norm of φ−φ̄ against ‖Δφ‖.
    W22Equivalence,
    /// ∫|∇φ|⁴ ≤ C ‖φ−φ̄‖∞² ∫|Δφ|².
    GnGrad4,
    /// ∫|∇φ|⁶ ≤ C ‖φ−φ̄‖∞⁴ ∫|∇Δφ|².
    GnGrad6,
    /// ∫|Δφ|³ ≤ C ‖φ−φ̄‖∞ ∫|∇Δφ|².
    GnLap3,
}

impl InequalityId {
    pub const ALL: [InequalityId; 5] = [
        InequalityId::Poincare,
        InequalityId::W22Equivalence,
        InequalityId::GnGrad4,
        InequalityId::GnGrad6,
        InequalityId::GnLap3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            InequalityId::Poincare => "poincare",
            InequalityId::W22Equivalence => "w22_equivalence",
            InequalityId::GnGrad4 => "gn_grad4",
            InequalityId::GnGrad6 => "gn_grad6",
            InequalityId::GnLap3 => "gn_lap3",
        }
    }
}

/// Randomized test-field family: seeded cosine spectra with power-law
/// amplitude decay so the fields stay grid-resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestFieldSpec {
    pub seed: u64,
    pub max_mode: usize,
    pub decay: f64,
    pub count: usize,
}

impl Default for TestFieldSpec {
    fn default() -> Self {
        TestFieldSpec {
            seed: 0,
            max_mode: 8,
            decay: 2.0,
            count: 100,
        }
    }
}

impl TestFieldSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.max_mode < 1 {
            return Err(Error::InvalidConfig("max_mode must be at least 1".into()));
        }
        if self.decay < 0.0 {
            return Err(Error::InvalidConfig("decay must be nonnegative".into()));
        }
        if self.count == 0 {
            return Err(Error::InvalidConfig("sample count must be positive".into()));
        }
        for (axis, &n) in grid.shape().iter().enumerate() {
            if self.max_mode >= n {
                return Err(Error::ModeAboveNyquist {
                    axis,
                    index: self.max_mode,
                    points: n,
                });
            }
        }
        Ok(())
    }
}

/// Ratio statistics of one inequality over a sample set, with the doubled
/// -grid value as a stability trend. The maxima are empirical lower bounds
/// on the best discrete constants; the trend column is the upper-bound
/// evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub id: InequalityId,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax_sample: usize,
    pub max_ratio_refined: f64,
}

/// Sharp Poincare constant of the discrete zero-flux Laplacian on the grid,
/// the reciprocal of its lowest nonzero eigenvalue.
pub fn poincare_constant(grid: &Grid) -> f64 {
    1.0 / lowest_nonzero_eigenvalue(grid)
}

fn reject_constant(denoms: &[f64]) -> Result<()> {
    if denoms.iter().any(|&d| d == 0.0) {
        Err(Error::ConstantField)
    } else {
        Ok(())
    }
}

/// The chained Poincare quotients
/// (∫(f−f̄)²/∫|∇f|², ∫|∇f|²/∫|Δf|², ∫|Δf|²/∫|∇Δf|²).
pub fn poincare_ratios(f: &Field) -> Result<[f64; 3]> {
    let zf = f.shifted(-f.mean());
    let l2 = inner(&zf, &zf);
    let h1 = grad_inner(&zf, &zf);
    let lap = zf.laplacian();
    let lap2 = inner(&lap, &lap);
    let gradlap = grad_inner(&lap, &lap);
    reject_constant(&[h1, lap2, gradlap])?;
    Ok([l2 / h1, h1 / lap2, lap2 / gradlap])
}

/// W²²-equivalent norm of f − f̄ over ‖Δf‖; always at least 1.
pub fn w22_equivalence_ratio(f: &Field) -> Result<f64> {
    let zf = f.shifted(-f.mean());
    let n = zf.norms();
    reject_constant(&[n.laplacian_l2])?;
    Ok(n.w22_equiv / n.laplacian_l2)
}

/// The three Gagliardo-Nirenberg quotients with the discrete L∞ norm on the
/// right-hand sides.
pub fn gn_ratios(f: &Field) -> Result<[f64; 3]> {
    let zf = f.shifted(-f.mean());
    let linf = zf.linf();
    let lap = zf.laplacian();
    let lap2 = inner(&lap, &lap);
    let gradlap = grad_inner(&lap, &lap);
    reject_constant(&[lap2, gradlap])?;

    let grads = zf.gradient();
    let grid = zf.grid();
    let vol = grid.cell_volume();
    let mut grad4 = 0.0;
    let mut grad6 = 0.0;
    for i in 0..grid.num_cells() {
        let g2: f64 = grads.iter().map(|g| g.values()[i] * g.values()[i]).sum();
        grad4 += g2 * g2;
        grad6 += g2 * g2 * g2;
    }
    grad4 *= vol;
    grad6 *= vol;
    let lap3 = lap.values().iter().map(|&x| x.abs().powi(3)).sum::<f64>() * vol;

    Ok([
        grad4 / (linf * linf * lap2),
        grad6 / (linf.powi(4) * gradlap),
        lap3 / (linf * gradlap),
    ])
}

/// One seeded random cosine field on the grid.
fn sample_field(grid: &Grid, spec: &TestFieldSpec, rng: &mut ChaCha20Rng) -> Field {
    let dim = grid.dim();
    let mut f = Field::zeros(grid);
    let mut k = vec![0usize; dim];
    loop {
        // iterate over all mode tuples with entries in 0..=max_mode
        let order: usize = k.iter().sum();
        if order >= 1 {
            let amp: f64 = rng.random_range(-1.0..1.0);
            let decay = (1.0 + order as f64).powf(-spec.decay);
            let mode = cosine_mode(grid, &k).expect("validated spec stays below Nyquist");
            f.axpy(amp * decay, &mode);
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return f;
            }
            if k[axis] < spec.max_mode {
                k[axis] += 1;
                break;
            }
            k[axis] = 0;
            axis += 1;
        }
    }
}

fn max_with_argmax(ratios: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &r) in ratios.iter().enumerate() {
        if r > best.0 {
            best = (r, i);
        }
    }
    best
}

/// Runs every ratio family over the seeded sample set, then repeats on the
/// doubled grid for the refinement-trend column. The per-family maxima of
/// the Poincare report use the first chained quotient.
pub fn estimate_constants(
    spec: &TestFieldSpec,
    grid: &Grid,
) -> Result<Vec<RatioReport>> {
    spec.validate(grid)?;
    spec.validate(&grid.refined())?;

    let run = |g: &Grid| -> Result<[Vec<f64>; 5]> {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        let mut out: [Vec<f64>; 5] = Default::default();
        for _ in 0..spec.count {
            let f = sample_field(g, spec, &mut rng);
            let p = poincare_ratios(&f)?;
            let w = w22_equivalence_ratio(&f)?;
            let gn = gn_ratios(&f)?;
            out[0].push(p[0]);
            out[1].push(w);
            out[2].push(gn[0]);
            out[3].push(gn[1]);
            out[4].push(gn[2]);
        }
        Ok(out)
    };

    let coarse = run(grid)?;
    let fine = run(&grid.refined())?;

    Ok(InequalityId::ALL
        .iter()
        .zip(coarse)
        .zip(fine)
        .map(|((&id, ratios), refined)| {
            let (max_ratio, argmax_sample) = max_with_argmax(&ratios);
            let (max_ratio_refined, _) = max_with_argmax(&refined);
            RatioReport {
                id,
                ratios,
                max_ratio,
                argmax_sample,
                max_ratio_refined,
            }
        })
        .collect())
}
