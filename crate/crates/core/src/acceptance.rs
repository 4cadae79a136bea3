//! The full acceptance suite: nine quantitative checks covering the closed
//! forms, the cancellation weights, the decay behavior in every regime, the
//! discrete inequality constants, the solver convergence orders and run
//! determinism. Each criterion returns a one-line verdict; the `accept` CLI
//! subcommand and the integration suite both run these.

use crate::analysis::{
    check_monotone_decay, fit_exponential, reciprocal_affinity_r2,
    select_rate_model, tail_window, RateModel,
};
use crate::config::parse_config;
use crate::experiment::{distance_series, run_simulate};
use crate::functionals::{
    cancellation_residuals, mass_ode_residual, weights_for_regime, MassOde,
    WeightSet,
};
use crate::grid::{cosine_mode, Field, Grid};
use crate::inequalities::{
    estimate_constants, gn_ratios, poincare_ratios, w22_equivalence_ratio,
    InequalityId, TestFieldSpec,
};
use crate::model::{
    classify_regime, jacobian_at_steady_state, reaction, steady_state, Parameters,
    RegimeTag,
};
use crate::solver::{
    perturb_steady_state, simulate, step_with_forcing, Forcing, ModeSpec,
    PerturbOptions, Sampling, Scheme, SimState, StepControl, TimeSeries,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::fmt;

/// Verdict of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} ({}): {} - {}",
            self.index,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

pub fn all_passed(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        steady_state_closed_form_matches_newton(),
        cancellation_weights_annihilate_cross_terms(),
        conserved_masses_and_monotone_decay_without_kinetics(),
        coexistence_decays_exponentially(),
        degenerate_regime_decays_algebraically(),
        strict_exclusion_decays_exponentially(),
        discrete_inequality_constants(),
        solver_convergence_orders(),
        reruns_are_byte_identical(),
    ]
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !($cond) {
            return Err(format!($($arg)*));
        }
    };
}

fn check(
    index: usize,
    name: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) -> CriterionResult {
    match body() {
        Ok(details) => CriterionResult {
            index,
            name,
            passed: true,
            details,
        },
        Err(details) => CriterionResult {
            index,
            name,
            passed: false,
            details,
        },
    }
}

/// Damped Newton iteration on the kinetic system f = g = 0 from the given
/// start; the independent oracle for the closed-form equilibria.
fn newton_root(p: &Parameters, start: (f64, f64)) -> (f64, f64) {
    let fnorm = |u: f64, v: f64| {
        let (f, g) = reaction(p, u, v);
        f.abs().max(g.abs())
    };
    let (mut u, mut v) = start;
    for _ in 0..200 {
        let (f, g) = reaction(p, u, v);
        let j11 = p.lambda1 - 2.0 * p.mu1 * u + p.a1 * v;
        let j12 = p.a1 * u;
        let j21 = -p.a2 * v;
        let j22 = p.lambda2 - 2.0 * p.mu2 * v - p.a2 * u;
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            break;
        }
        let du = (f * j22 - g * j12) / det;
        let dv = (g * j11 - f * j21) / det;
        let base = fnorm(u, v);
        if base == 0.0 {
            break;
        }
        let mut step = 1.0;
        while step > 1e-10 && fnorm(u - step * du, v - step * dv) >= base {
            step *= 0.5;
        }
        u -= step * du;
        v -= step * dv;
        if fnorm(u, v) <= 1e-15 * (1.0 + u.abs() + v.abs()) {
            break;
        }
    }
    (u, v)
}

pub fn steady_state_closed_form_matches_newton() -> CriterionResult {
    check(1, "closed-form equilibria vs damped Newton", || {
        let mut rng = ChaCha20Rng::seed_from_u64(101);
        let mut worst = 0.0f64;
        for i in 0..1000usize {
            let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
            let p = if i % 10 == 9 {
                // zero-kinetics draws: the equilibrium is set by the masses
                Parameters::h1(
                    (draw(0.1, 2.0), draw(0.1, 2.0)),
                    (draw(0.1, 2.0), draw(0.1, 2.0)),
                    (draw(0.1, 2.0), draw(0.1, 2.0)),
                )
            } else {
                Parameters {
                    d1: draw(0.1, 2.0),
                    d2: draw(0.1, 2.0),
                    chi1: draw(0.1, 2.0),
                    chi2: draw(0.1, 2.0),
                    lambda1: draw(0.1, 2.0),
                    lambda2: draw(0.1, 2.0),
                    mu1: draw(0.1, 2.0),
                    mu2: draw(0.1, 2.0),
                    a1: draw(0.1, 2.0),
                    a2: draw(0.1, 2.0),
                    m1: 0.0,
                    m2: 0.0,
                }
            };
            p.validate().map_err(|e| format!("draw {i} invalid: {e}"))?;
            let regime = classify_regime(&p).map_err(|e| e.to_string())?;
            let s = steady_state(&p, 1.0).map_err(|e| e.to_string())?;

            if regime.tag == RegimeTag::H1 {
                ensure!(
                    (s.u_star - p.m1).abs() <= 1e-14 * p.m1
                        && (s.v_star - p.m2).abs() <= 1e-14 * p.m2,
                    "draw {i}: zero-kinetics equilibrium disagrees with the masses"
                );
                continue;
            }

            // nearby roots can capture the iteration from a 5% start, so
            // shrink the offset until Newton settles in the local basin
            let sign = |b: bool| if b { 1.0 } else { -1.0 };
            let (su, sv) = (sign(rng.random()), sign(rng.random()));
            let mut gap = f64::INFINITY;
            let mut found = (f64::NAN, f64::NAN);
            for delta in [0.05, 0.01, 0.001] {
                let start = (
                    s.u_star * (1.0 + delta * su),
                    if s.v_star > 0.0 {
                        s.v_star * (1.0 + delta * sv)
                    } else {
                        0.0
                    },
                );
                found = newton_root(&p, start);
                let du = (found.0 - s.u_star).abs() / (1.0 + s.u_star);
                let dv = (found.1 - s.v_star).abs() / (1.0 + s.v_star);
                gap = du.max(dv);
                if gap <= 1e-10 {
                    break;
                }
            }
            worst = worst.max(gap);
            ensure!(
                gap <= 1e-10,
                "draw {i}: Newton root ({}, {}) disagrees with closed form \
                 ({}, {})",
                found.0,
                found.1,
                s.u_star,
                s.v_star
            );

            let jac =
                jacobian_at_steady_state(&p, &s).map_err(|e| e.to_string())?;
            let scale = 1.0 + jac.fu.abs() + jac.gv.abs();
            ensure!(
                jac.fu <= 1e-12 * scale && jac.gv <= 1e-12 * scale,
                "draw {i}: diagonal kinetic derivatives are not nonpositive"
            );
            match regime.tag {
                RegimeTag::CoexistenceH2 | RegimeTag::StrictExclusionH2 => {
                    ensure!(
                        jac.fu_strictly_negative && jac.gv_strictly_negative,
                        "draw {i}: strict negativity fails in regime {}",
                        regime.tag
                    );
                }
                _ => {}
            }
        }
        Ok(format!(
            "1000 draws, worst closed-form/Newton gap {worst:.2e}, all sign \
             conditions hold"
        ))
    })
}

pub fn cancellation_weights_annihilate_cross_terms() -> CriterionResult {
    check(2, "cross-term cancellation of the coexistence weights", || {
        let mut rng = ChaCha20Rng::seed_from_u64(202);
        let mut done = 0usize;
        let mut worst = 0.0f64;
        while done < 1000 {
            let mut draw = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
            let p = Parameters {
                d1: draw(0.1, 2.0),
                d2: draw(0.1, 2.0),
                chi1: draw(0.1, 2.0),
                chi2: draw(0.1, 2.0),
                lambda1: draw(0.1, 2.0),
                lambda2: draw(0.1, 2.0),
                mu1: draw(0.1, 2.0),
                mu2: draw(0.1, 2.0),
                a1: draw(0.1, 2.0),
                a2: draw(0.1, 2.0),
                m1: 0.0,
                m2: 0.0,
            };
            let regime = classify_regime(&p).map_err(|e| e.to_string())?;
            if regime.tag != RegimeTag::CoexistenceH2 {
                continue;
            }
            done += 1;
            let s = steady_state(&p, 1.0).map_err(|e| e.to_string())?;
            let w = weights_for_regime(&p, &s, &regime, 0.1)
                .map_err(|e| e.to_string())?;
            let r = cancellation_residuals(&w, &p, &s);
            let scales = [
                w.l2_u * p.a1 * s.u_star + w.l2_v * p.a2 * s.v_star,
                (w.l2_u * p.chi1 + w.grad_u * p.a1) * s.u_star
                    + (w.l2_v * p.chi2 + w.grad_v * p.a2) * s.v_star,
                (w.grad_u * p.chi1 + w.lap_u * p.a1) * s.u_star
                    + (w.grad_v * p.chi2 + w.lap_v * p.a2) * s.v_star,
                w.lap_u * p.chi1 * s.u_star + w.lap_v * p.chi2 * s.v_star,
            ];
            for (k, (&res, &scale)) in r.iter().zip(&scales).enumerate() {
                let rel = res.abs() / scale;
                worst = worst.max(rel);
                ensure!(
                    rel <= 1e-12,
                    "draw {done}: residual {k} is {rel:.2e} relative"
                );
            }
        }
        Ok(format!(
            "1000 coexistence draws, worst relative residual {worst:.1e}"
        ))
    })
}

struct RunSetup {
    p: Parameters,
    grid: Grid,
    scheme: Scheme,
    dt: f64,
    t_end: f64,
    every: usize,
    fold: bool,
}

fn run_perturbed(setup: &RunSetup) -> Result<(TimeSeries, WeightSet, f64), String> {
    let s = steady_state(&setup.p, setup.grid.volume()).map_err(|e| e.to_string())?;
    let regime = classify_regime(&setup.p).map_err(|e| e.to_string())?;
    let cp = crate::inequalities::poincare_constant(&setup.grid);
    let w = weights_for_regime(&setup.p, &s, &regime, cp).map_err(|e| e.to_string())?;
    let modes = [
        ModeSpec {
            k: vec![1],
            rel_amp: 1.0,
        },
        ModeSpec {
            k: vec![2],
            rel_amp: 0.5,
        },
    ];
    let opts = PerturbOptions {
        fold_nonnegative: setup.fold,
        allow_mean_shift: false,
    };
    let initial = perturb_steady_state(&s, &setup.grid, 1e-2, &modes, 7, &opts)
        .map_err(|e| e.to_string())?;
    let ctl = StepControl {
        dt: setup.dt,
        scheme: setup.scheme,
        clip_negative: true,
        stability_guard: 0.25,
    };
    let sampling = Sampling {
        every_steps: setup.every,
        snapshot_times: vec![],
    };
    let eta = 0.1 * (s.u_star + s.v_star).min(1.0);
    let series = simulate(&initial, &setup.p, &ctl, setup.t_end, &sampling, eta, &w)
        .map_err(|e| e.to_string())?;
    Ok((series, w, eta))
}

pub fn conserved_masses_and_monotone_decay_without_kinetics() -> CriterionResult {
    check(3, "zero-kinetics conservation and monotone decay", || {
        let setup = RunSetup {
            p: Parameters::h1((1.0, 1.0), (1.0, 1.0), (1.0, 1.0)),
            grid: Grid::line(256, 1.0).map_err(|e| e.to_string())?,
            scheme: Scheme::ImexEuler,
            dt: 0.02,
            t_end: 50.0,
            every: 5,
            fold: false,
        };
        let (series, _, _) = run_perturbed(&setup)?;
        let recs = &series.records;
        let (mu0, mv0) = (recs[0].mass_u, recs[0].mass_v);
        let mass_dev = recs
            .iter()
            .map(|r| {
                ((r.mass_u - mu0) / mu0)
                    .abs()
                    .max(((r.mass_v - mv0) / mv0).abs())
            })
            .fold(0.0, f64::max);
        ensure!(
            mass_dev <= 1e-10,
            "mass drifts by {mass_dev:.2e} relative"
        );
        let ys: Vec<(f64, f64)> = recs.iter().map(|r| (r.t, r.y)).collect();
        let mono = check_monotone_decay(&ys, 1e-10);
        ensure!(
            mono.passed,
            "composite functional rises by {:.2e} at sample {:?}",
            mono.max_rise,
            mono.first_violation
        );
        let sel = select_rate_model(&distance_series(recs), RegimeTag::H1)
            .map_err(|e| e.to_string())?;
        ensure!(
            sel.winner == RateModel::Exponential,
            "exponential law does not win the fit"
        );
        let fit = sel.exponential.ok_or("exponential fit missing")?;
        ensure!(fit.k2 > 0.0, "fitted decay rate {} not positive", fit.k2);
        ensure!(
            fit.residual <= 0.05,
            "log-space fit residual {:.3} exceeds 5%",
            fit.residual
        );
        Ok(format!(
            "mass drift {mass_dev:.1e}, y monotone, exponential rate \
             {:.3} with residual {:.4}",
            fit.k2, fit.residual
        ))
    })
}

pub fn coexistence_decays_exponentially() -> CriterionResult {
    check(4, "exponential convergence in the coexistence regime", || {
        let setup = RunSetup {
            p: Parameters::default(),
            grid: Grid::line(256, 1.0).map_err(|e| e.to_string())?,
            scheme: Scheme::ImexEuler,
            dt: 0.02,
            t_end: 50.0,
            every: 5,
            fold: false,
        };
        let (series, _, _) = run_perturbed(&setup)?;
        ensure!(
            series.exit_time.is_none(),
            "trajectory left the eta-tube at t = {:?}",
            series.exit_time
        );
        let sel = select_rate_model(
            &distance_series(&series.records),
            RegimeTag::CoexistenceH2,
        )
        .map_err(|e| e.to_string())?;
        let exp = sel.exponential.ok_or("exponential fit missing")?;
        let alg = sel.algebraic.ok_or("algebraic fit missing")?;
        ensure!(
            sel.winner == RateModel::Exponential && sel.matches_prediction,
            "winner {:?} does not match the predicted exponential law",
            sel.winner
        );
        ensure!(
            alg.residual >= 5.0 * exp.residual,
            "residual separation {:.1}x below the required 5x",
            alg.residual / exp.residual
        );
        // monotone decay of y above its quadratic noise floor
        let y0 = series.records[0].y;
        let ys: Vec<(f64, f64)> = series
            .records
            .iter()
            .filter(|r| r.y >= 1e-12 * y0)
            .map(|r| (r.t, r.y))
            .collect();
        let mono = check_monotone_decay(&ys, 1e-10);
        ensure!(
            mono.passed,
            "composite functional rises by {:.2e} relative",
            mono.max_rise / y0
        );
        Ok(format!(
            "no tube exit, exponential rate {:.3}, residual separation {:.0}x, \
             y monotone",
            exp.k2,
            alg.residual / exp.residual
        ))
    })
}

pub fn degenerate_regime_decays_algebraically() -> CriterionResult {
    check(5, "algebraic convergence in the degenerate regime", || {
        let p = Parameters {
            lambda2: 0.5,
            a1: 1.0,
            a2: 0.5,
            ..Parameters::default()
        };
        let regime = classify_regime(&p).map_err(|e| e.to_string())?;
        ensure!(
            regime.tag == RegimeTag::DegenerateExclusionH2,
            "parameter set is not degenerate"
        );
        let grid = Grid::line(256, 1.0).map_err(|e| e.to_string())?;
        let setup = RunSetup {
            p,
            grid: grid.clone(),
            scheme: Scheme::StrangImex,
            dt: 0.05,
            t_end: 400.0,
            every: 10,
            fold: true,
        };
        let (series, _, _) = run_perturbed(&setup)?;
        let sel = select_rate_model(
            &distance_series(&series.records),
            RegimeTag::DegenerateExclusionH2,
        )
        .map_err(|e| e.to_string())?;
        let exp = sel.exponential.ok_or("exponential fit missing")?;
        let alg = sel.algebraic.ok_or("algebraic fit missing")?;
        ensure!(
            sel.winner == RateModel::Algebraic && sel.matches_prediction,
            "winner {:?} does not match the predicted algebraic law",
            sel.winner
        );
        ensure!(
            exp.residual >= 5.0 * alg.residual,
            "residual separation {:.1}x below the required 5x",
            exp.residual / alg.residual
        );

        // the reciprocal prey mass is affine in t
        let skip = series.records.len() / 5;
        let vmass: Vec<(f64, f64)> = series.records[skip..]
            .iter()
            .map(|r| (r.t, r.mass_v))
            .collect();
        let r2 = reciprocal_affinity_r2(&vmass).map_err(|e| e.to_string())?;
        ensure!(r2 >= 0.99, "reciprocal prey-mass R^2 = {r2:.4} below 0.99");

        // mass-balance residual halves twice when dt does
        let s = steady_state(&setup.p, grid.volume()).map_err(|e| e.to_string())?;
        let max_res = |dt: f64, every: usize| -> Result<f64, String> {
            let short = RunSetup {
                p: setup.p,
                grid: grid.clone(),
                scheme: Scheme::StrangImex,
                dt,
                t_end: 20.0,
                every,
                fold: true,
            };
            let (srs, _, _) = run_perturbed(&short)?;
            let res =
                mass_ode_residual(&srs.records, &setup.p, &s, &regime, MassOde::PreyDegenerate)
                    .map_err(|e| e.to_string())?;
            // skip the fast spatial transient, where the mass's higher time
            // derivatives dominate the central-difference error
            Ok(res
                .iter()
                .filter(|&&(t, _)| t >= 1.0)
                .map(|&(_, r)| r.abs())
                .fold(0.0, f64::max))
        };
        // sample spacing halves with dt so both the scheme error and the
        // central-difference error of the residual shrink quadratically
        let coarse = max_res(0.05, 4)?;
        let fine = max_res(0.025, 4)?;
        let ratio = coarse / fine;
        ensure!(
            (3.5..=4.5).contains(&ratio),
            "mass-balance residual ratio {ratio:.2} outside [3.5, 4.5]"
        );
        Ok(format!(
            "algebraic wins {:.0}x, reciprocal-mass R^2 = {r2:.5}, residual \
             halving ratio {ratio:.2}",
            exp.residual / alg.residual
        ))
    })
}

pub fn strict_exclusion_decays_exponentially() -> CriterionResult {
    check(6, "exponential convergence in the strict exclusion regime", || {
        let p = Parameters {
            lambda2: 0.2,
            a1: 1.0,
            a2: 0.5,
            ..Parameters::default()
        };
        let regime = classify_regime(&p).map_err(|e| e.to_string())?;
        ensure!(
            regime.tag == RegimeTag::StrictExclusionH2,
            "parameter set is not strict exclusion"
        );
        let setup = RunSetup {
            p,
            grid: Grid::line(256, 1.0).map_err(|e| e.to_string())?,
            scheme: Scheme::StrangImex,
            dt: 0.02,
            t_end: 40.0,
            every: 5,
            fold: true,
        };
        let (series, _, _) = run_perturbed(&setup)?;
        let v_l2: Vec<(f64, f64)> = series
            .records
            .iter()
            .map(|r| (r.t, r.e_v0.sqrt()))
            .collect();
        let fit_v = fit_exponential(&tail_window(&v_l2)).map_err(|e| e.to_string())?;
        ensure!(
            fit_v.residual <= 0.05,
            "prey L2 fit residual {:.3} exceeds 5%",
            fit_v.residual
        );
        ensure!(
            (0.25..=0.35).contains(&fit_v.k2),
            "prey L2 decay rate {:.3} far from the kinetic eigenvalue 0.3",
            fit_v.k2
        );
        let d = distance_series(&series.records);
        let fit_d = fit_exponential(&tail_window(&d)).map_err(|e| e.to_string())?;
        ensure!(
            fit_d.residual <= 0.05,
            "distance fit residual {:.3} exceeds 5%",
            fit_d.residual
        );
        Ok(format!(
            "prey L2 rate {:.3} (residual {:.4}), distance rate {:.3} \
             (residual {:.4})",
            fit_v.k2, fit_v.residual, fit_d.k2, fit_d.residual
        ))
    })
}

pub fn discrete_inequality_constants() -> CriterionResult {
    check(7, "discrete functional-inequality constants", || {
        let grid = Grid::line(128, 1.0).map_err(|e| e.to_string())?;
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let spec = TestFieldSpec {
            seed: 1,
            max_mode: 8,
            decay: 2.0,
            count: 100,
        };
        let reports = estimate_constants(&spec, &grid).map_err(|e| e.to_string())?;

        let poincare = reports
            .iter()
            .find(|r| r.id == InequalityId::Poincare)
            .ok_or("missing report")?;
        ensure!(
            poincare.max_ratio <= (1.0 / pi2) * 1.05,
            "max Poincare ratio {:.5} exceeds (1/pi^2)(1+5%)",
            poincare.max_ratio
        );
        // the lowest cosine mode attains the sharp discrete constant and
        // dominates every random sample
        let mode1 = cosine_mode(&grid, &[1]).map_err(|e| e.to_string())?;
        let sharp = poincare_ratios(&mode1).map_err(|e| e.to_string())?[0];
        ensure!(
            poincare.max_ratio <= sharp * (1.0 + 1e-12),
            "a random sample beats the lowest-mode ratio"
        );
        for r in &reports {
            let trend = r.max_ratio_refined / r.max_ratio;
            ensure!(
                (0.5..=2.0).contains(&trend),
                "{} max ratio moves by {trend:.2}x under refinement",
                r.id.name()
            );
        }

        // single-mode saturation against the closed-form limits
        for (k, limit) in [(1usize, 1.0 / pi2), (2, 1.0 / (4.0 * pi2))] {
            let f = cosine_mode(&grid, &[k]).map_err(|e| e.to_string())?;
            for ratio in poincare_ratios(&f).map_err(|e| e.to_string())? {
                ensure!(
                    (ratio / limit - 1.0).abs() <= 0.02,
                    "mode-{k} chained ratio {ratio:.5} off the limit {limit:.5}"
                );
            }
        }
        let w22_limit = (1.0 + 1.0 / pi2 + 1.0 / (pi2 * pi2)).sqrt();
        let w22 = w22_equivalence_ratio(&mode1).map_err(|e| e.to_string())?;
        ensure!(
            (w22 / w22_limit - 1.0).abs() <= 0.02,
            "norm-equivalence ratio {w22:.5} off the limit {w22_limit:.5}"
        );

        // the interpolation quotients are invariant under amplitude scaling
        let base = gn_ratios(&mode1).map_err(|e| e.to_string())?;
        for amp in [0.37, 8.5, 1e-3] {
            let scaled =
                gn_ratios(&mode1.scale(amp)).map_err(|e| e.to_string())?;
            for (b, s) in base.iter().zip(&scaled) {
                ensure!(
                    ((s - b) / b).abs() <= 1e-12,
                    "interpolation ratio drifts under amplitude {amp}"
                );
            }
        }
        Ok(format!(
            "Poincare max {:.5} <= sharp {:.5}, all maxima refinement-stable, \
             saturation limits within 2%",
            poincare.max_ratio, sharp
        ))
    })
}

/// L2 distance between two states, both species.
fn state_gap(a: &SimState, b: &SimState) -> f64 {
    let mut du = a.u.clone();
    du.axpy(-1.0, &b.u);
    let mut dv = a.v.clone();
    dv.axpy(-1.0, &b.v);
    du.norms().l2 + dv.norms().l2
}

fn march(
    initial: &SimState,
    p: &Parameters,
    scheme: Scheme,
    dt: f64,
    t_end: f64,
    forcing: Option<Forcing>,
) -> Result<SimState, String> {
    let ctl = StepControl {
        dt,
        scheme,
        clip_negative: false,
        stability_guard: 0.25,
    };
    let n = (t_end / dt).round() as usize;
    let mut state = initial.clone();
    for _ in 0..n {
        state = step_with_forcing(&state, p, &ctl, forcing)
            .map_err(|e| e.to_string())?
            .state;
    }
    Ok(state)
}

fn temporal_order(
    p: &Parameters,
    scheme: Scheme,
    dts: [f64; 3],
) -> Result<f64, String> {
    let grid = Grid::line(64, 1.0).map_err(|e| e.to_string())?;
    let s = steady_state(p, grid.volume()).map_err(|e| e.to_string())?;
    let pi = std::f64::consts::PI;
    let initial = SimState {
        u: Field::from_fn(&grid, |x| s.u_star + 1e-2 * (pi * x[0]).cos()),
        v: Field::from_fn(&grid, |x| s.v_star - 5e-3 * (pi * x[0]).cos()),
        t: 0.0,
    };
    let t_end = 0.5;
    let reference = march(&initial, p, scheme, dts[2] / 64.0, t_end, None)?;
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            march(&initial, p, scheme, dt, t_end, None)
                .map(|st| state_gap(&st, &reference))
        })
        .collect::<Result<_, _>>()?;
    let orders: Vec<f64> = errs
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect();
    Ok(orders.iter().sum::<f64>() / orders.len() as f64)
}

fn spatial_order(p: &Parameters) -> Result<Vec<f64>, String> {
    // manufactured solution: steady state plus a decaying lowest cosine mode
    let pi = std::f64::consts::PI;
    let (b, c) = (0.1, 0.05);
    let s = steady_state(p, 1.0).map_err(|e| e.to_string())?;
    let um = move |x: f64, t: f64| s.u_star + b * (pi * x).cos() * (-t).exp();
    let vm = move |x: f64, t: f64| s.v_star + c * (pi * x).cos() * (-t).exp();
    let t_end = 0.25;
    let dt = 5e-4;
    let p = *p;

    let mut errs = Vec::new();
    for n in [32usize, 64, 128] {
        let grid = Grid::line(n, 1.0).map_err(|e| e.to_string())?;
        let g2 = grid.clone();
        let forcing_fn = move |t: f64| -> (Field, Field) {
            let fu = Field::from_fn(&g2, |x| {
                let x = x[0];
                let (u, v) = (um(x, t), vm(x, t));
                let cospx = (pi * x).cos();
                let sinpx = (pi * x).sin();
                let dudt = -b * cospx * (-t).exp();
                let lap_u = -pi * pi * b * cospx * (-t).exp();
                let lap_v = -pi * pi * c * cospx * (-t).exp();
                let grad_dot =
                    b * c * pi * pi * sinpx * sinpx * (-2.0 * t).exp();
                let taxis_u = grad_dot + u * lap_v;
                let f = u * (p.lambda1 - p.mu1 * u + p.a1 * v);
                dudt - p.d1 * lap_u + p.chi1 * taxis_u - f
            });
            let fv = Field::from_fn(&g2, |x| {
                let x = x[0];
                let (u, v) = (um(x, t), vm(x, t));
                let cospx = (pi * x).cos();
                let sinpx = (pi * x).sin();
                let dvdt = -c * cospx * (-t).exp();
                let lap_u = -pi * pi * b * cospx * (-t).exp();
                let lap_v = -pi * pi * c * cospx * (-t).exp();
                let grad_dot =
                    b * c * pi * pi * sinpx * sinpx * (-2.0 * t).exp();
                let taxis_v = grad_dot + v * lap_u;
                let g = v * (p.lambda2 - p.mu2 * v - p.a2 * u);
                dvdt - p.d2 * lap_v - p.chi2 * taxis_v - g
            });
            (fu, fv)
        };
        let initial = SimState {
            u: Field::from_fn(&grid, |x| um(x[0], 0.0)),
            v: Field::from_fn(&grid, |x| vm(x[0], 0.0)),
            t: 0.0,
        };
        let state = march(
            &initial,
            &p,
            Scheme::StrangImex,
            dt,
            t_end,
            Some(&forcing_fn),
        )?;
        let exact = SimState {
            u: Field::from_fn(&grid, |x| um(x[0], t_end)),
            v: Field::from_fn(&grid, |x| vm(x[0], t_end)),
            t: t_end,
        };
        errs.push(state_gap(&state, &exact));
    }
    Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

pub fn solver_convergence_orders() -> CriterionResult {
    check(8, "temporal and spatial convergence orders", || {
        let p1 = Parameters::default();
        let euler = temporal_order(&p1, Scheme::ImexEuler, [0.01, 0.005, 0.0025])?;
        ensure!(
            (euler - 1.0).abs() <= 0.15,
            "first-order scheme measures order {euler:.3}"
        );
        // weak cross coupling keeps the two-stage pass in its stability
        // region at large dt * eigenvalue
        let p2 = Parameters {
            chi1: 0.3,
            chi2: 0.1,
            ..Parameters::default()
        };
        let strang = temporal_order(&p2, Scheme::StrangImex, [0.02, 0.01, 0.005])?;
        ensure!(
            (strang - 2.0).abs() <= 0.2,
            "second-order scheme measures order {strang:.3}"
        );
        let spatial = spatial_order(&p2)?;
        for o in &spatial {
            ensure!(
                (o - 2.0).abs() <= 0.1,
                "spatial order {o:.3} outside 2.0 +/- 0.1"
            );
        }
        Ok(format!(
            "temporal orders {euler:.3} (first-order pass) and {strang:.3} \
             (second-order pass), spatial orders {spatial:.3?}"
        ))
    })
}

pub fn reruns_are_byte_identical() -> CriterionResult {
    check(9, "identical seeds give byte-identical outputs", || {
        let cfg = parse_config("", &[]).map_err(|e| e.to_string())?;
        let base = std::env::temp_dir().join(format!(
            "crosstaxis-accept-{}",
            std::process::id()
        ));
        let mut bytes = Vec::new();
        for run in 0..2 {
            let dir = base.join(format!("run_{run}"));
            run_simulate(&cfg, &dir).map_err(|e| e.to_string())?;
            bytes.push(
                std::fs::read(dir.join("series.csv")).map_err(|e| e.to_string())?,
            );
        }
        let identical = bytes[0] == bytes[1];
        let _ = std::fs::remove_dir_all(&base);
        ensure!(identical, "repeated runs differ byte-wise");
        Ok(format!(
            "two identical runs produced byte-identical series files \
             ({} bytes)",
            bytes[0].len()
        ))
    })
}
