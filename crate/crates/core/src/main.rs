use clap::{Args, Parser, Subcommand};
use crosstaxis::config::{load_config, parse_config, ExperimentConfig};
use crosstaxis::model::{classify_regime, jacobian_at_steady_state, steady_state};
use crosstaxis::{acceptance, experiment, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "crosstaxis",
    about = "Numerical laboratory for a cross-diffusive predator-prey system",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment configuration file (TOML); defaults apply when omitted
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Perturbation seed, overriding the configured one
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Dotted-path config overrides, e.g. parameters.lambda2=0.5
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl CommonOpts {
    fn load(&self) -> crosstaxis::Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("perturbation.seed={seed}"));
        }
        match &self.config {
            Some(path) => load_config(path, &overrides),
            None => parse_config("", &overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify the parameter regime and report the steady state
    Classify {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run one perturbed simulation and write its artifacts
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the base config across a range of one parameter
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Parameter to vary (bare kinetic name or dotted config path)
        #[arg(long, value_name = "NAME")]
        axis: String,
        /// Comma-separated values for the axis
        #[arg(long, value_name = "V1,V2,...", value_delimiter = ',')]
        values: Vec<f64>,
        /// Concurrent sweep points
        #[arg(long, value_name = "N", default_value_t = 1)]
        workers: usize,
    },
    /// Estimate the discrete functional-inequality constants
    Inequalities {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit both decay laws to an existing series file
    Fit {
        /// Series CSV produced by `simulate`
        #[arg(long, value_name = "PATH")]
        series: PathBuf,
    },
    /// Run the full acceptance suite
    Accept,
}

fn run(cli: Cli) -> crosstaxis::Result<ExitCode> {
    match cli.command {
        Command::Classify { common } => {
            let cfg = common.load()?;
            let regime = classify_regime(&cfg.parameters)?;
            let grid = cfg.grid.build()?;
            let s = steady_state(&cfg.parameters, grid.volume())?;
            let jac = jacobian_at_steady_state(&cfg.parameters, &s)?;
            println!("regime: {}", regime.tag);
            println!("discriminant: {:.16e}", regime.discriminant);
            println!("steady state: ({:.16e}, {:.16e})", s.u_star, s.v_star);
            println!(
                "kinetic jacobian: fu={:.6e} fv={:.6e} gu={:.6e} gv={:.6e}",
                jac.fu, jac.fv, jac.gu, jac.gv
            );
        }
        Command::Simulate { common } => {
            let cfg = common.load()?;
            let res = experiment::run_simulate(&cfg, &common.out)?;
            println!("regime: {}", res.summary.regime.tag);
            println!("samples: {}", res.series.records.len());
            match res.summary.exit_time {
                Some(t) => println!("tube exit at t = {t:.6}"),
                None => println!("trajectory stayed in the eta-tube"),
            }
            if let Some(sel) = &res.summary.selection {
                println!(
                    "decay law: {:?} (predicted {:?})",
                    sel.winner, sel.predicted
                );
            }
            for f in &res.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep {
            common,
            axis,
            values,
            workers,
        } => {
            let cfg = common.load()?;
            let rows =
                experiment::run_sweep(&cfg, &axis, &values, workers, &common.out)?;
            for row in &rows {
                match &row.error {
                    Some(e) => println!("{} = {:.6}: failed ({e})", axis, row.value),
                    None => println!(
                        "{} = {:.6}: {} / {}",
                        axis,
                        row.value,
                        row.regime.as_deref().unwrap_or("?"),
                        row.winner.as_deref().unwrap_or("no fit"),
                    ),
                }
            }
            println!("wrote {}", common.out.join("sweep.csv").display());
        }
        Command::Inequalities { common } => {
            let cfg = common.load()?;
            let reports = experiment::run_inequalities(&cfg, &common.out)?;
            for r in &reports {
                println!(
                    "{}: max ratio {:.6e} (refined {:.6e})",
                    r.id.name(),
                    r.max_ratio,
                    r.max_ratio_refined
                );
            }
        }
        Command::Fit { series } => {
            let report = experiment::run_fit(&series)?;
            if let Some(f) = &report.exponential {
                println!(
                    "exponential: k1={:.6e} k2={:.6e} residual={:.4e}",
                    f.k1, f.k2, f.residual
                );
            }
            if let Some(f) = &report.algebraic {
                println!(
                    "algebraic: k1={:.6e} k2={:.6e} residual={:.4e}",
                    f.k1, f.k2, f.residual
                );
            }
            match &report.winner {
                Some(w) => println!("winner: {w}"),
                None => println!("winner: none (no law admits a fit)"),
            }
        }
        Command::Accept => {
            let results = acceptance::run_all();
            for r in &results {
                println!("{r}");
            }
            if !acceptance::all_passed(&results) {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Error::exit_code(&e) as u8)
        }
    }
}
