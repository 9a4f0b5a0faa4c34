//! Command-line driver.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ppos_core::dataset::Dataset;
use ppos_core::model::fit_model;
use ppos_core::ppos::{fit_prediction_model, run_scenarios, simulate_replicates, PposConfig, PposResult};
use ppos_core::rng::{derive_seed, Domain};
use ppos_core::sampler::SamplerConfig;
use ppos_core::synthetic::generate_synthetic;
use ppos_core::Error;

use crate::config::{LoadedConfig, SyntheticConfig};
use crate::error::{AppError, AppResult};
use crate::exec::Pool;
use crate::figures::{histogram, sample_curves, write_histogram};
use crate::io::{load_dataset, save_dataset};
use crate::report::{write_curves, write_draws, write_fit_summary, write_replicates, write_scenario_table, Report};

#[derive(Debug, Parser)]
#[command(name = "ppos", version, about = "Predictive probability of success for competing-event trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, default_value = "ppos-out")]
    pub out: PathBuf,
    /// Overrides the number of replicates.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the prediction-phase model and write posterior summaries.
    Fit {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every posterior draw.
        #[arg(long)]
        draws: bool,
    },
    /// Compute the PPoS.
    Ppos(RunArgs),
    /// Compute the PPoS for every cell of the config's scenario grid.
    Scenarios(RunArgs),
    /// Generate a synthetic dataset.
    Simulate {
        /// Synthetic trial specification (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "ppos-out")]
        out: PathBuf,
        /// File name inside the output directory.
        #[arg(long, default_value = "dataset.csv")]
        file: String,
    },
    /// Turn run reports into histogram and curve-sample CSVs.
    EmitFigures {
        /// Run directory holding `report.json` (and `curves.csv`); repeatable.
        #[arg(long, required = true)]
        report: Vec<PathBuf>,
        #[arg(long, default_value = "ppos-figures")]
        out: PathBuf,
        /// Statistic to histogram (default: the first rule statistic).
        #[arg(long)]
        statistic: Option<String>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Number of replicate curves to keep.
        #[arg(long, default_value_t = 500)]
        sample: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Plain-text log written next to the outputs.
struct RunLog {
    file: File,
    start: Instant,
}

impl RunLog {
    fn create(dir: &Path) -> AppResult<Self> {
        let path = dir.join("run.log");
        let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
        Ok(RunLog {
            file,
            start: Instant::now(),
        })
    }

    fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.file, "[{:>9.2}s] {}", self.start.elapsed().as_secs_f64(), text.as_ref());
    }
}

fn create_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

/// Config with CLI overrides, its dataset and engine config.
struct Prepared {
    loaded: LoadedConfig,
    data: Dataset,
    config: PposConfig,
    pool: Pool,
}

fn prepare(args: &RunArgs) -> AppResult<Prepared> {
    let mut loaded = LoadedConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        loaded.config.seed = seed;
    }
    if let Some(k) = args.k {
        loaded.config.k = k;
    }
    let data = load_dataset(
        &loaded.dataset_path(),
        loaded.config.covariates.as_deref(),
        &loaded.config.time_unit,
    )?;
    let config = loaded.to_ppos_config()?;
    config.validate(data.covariate_names())?;
    let pool = Pool::new(args.workers)?;
    Ok(Prepared {
        loaded,
        data,
        config,
        pool,
    })
}

fn describe(log: &mut RunLog, p: &Prepared) {
    let counts = p.data.event_counts();
    log.line(format!("dataset {}: {} subjects", p.loaded.dataset_path().display(), p.data.len()));
    for (arm, c) in counts.iter().enumerate() {
        log.line(format!(
            "  arm {}: {} censored, {} cause 1, {} cause 2",
            arm, c[0], c[1], c[2]
        ));
    }
    log.line(format!("seed {}, K {}, workers {}", p.config.master_seed, p.config.k, p.pool.workers()));
}

fn write_run(dir: &Path, loaded: &LoadedConfig, config: &PposConfig, result: &PposResult) -> AppResult<()> {
    create_dir(dir)?;
    let rule = config.analysis.rule.criteria.iter().map(|c| c.statistic().to_string()).collect();
    Report::new(result, config.master_seed, rule, loaded.echo()).save(&dir.join("report.json"))?;
    write_replicates(&dir.join("replicates.csv"), result)?;
    if let Some(grid) = &config.curve_grid {
        write_curves(&dir.join("curves.csv"), result, grid)?;
    }
    Ok(())
}

fn check_invalid(config: &PposConfig, result: &PposResult) -> AppResult<()> {
    let limit = config.invalid_limit();
    if result.n_invalid > limit {
        return Err(Error::TooManyInvalid {
            invalid: result.n_invalid,
            total: result.k,
            limit,
        }
        .into());
    }
    Ok(())
}

fn cmd_fit(args: &RunArgs, draws: bool) -> AppResult<()> {
    let p = prepare(args)?;
    create_dir(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    describe(&mut log, &p);
    let sampler = SamplerConfig {
        seed: derive_seed(p.config.master_seed, Domain::Fit, 0),
        ..p.config.sampler.clone()
    };
    let fit = fit_model(&p.config.model, &p.data, &sampler, &p.pool)?;
    write_fit_summary(&args.out.join("summary.csv"), &fit)?;
    if draws || p.loaded.config.output.write_draws {
        for (i, s) in fit.strata.iter().enumerate() {
            write_draws(&args.out.join(format!("draws_{}.csv", s.spec.label())), &fit, i)?;
        }
    }
    fs::write(args.out.join("config.toml"), p.loaded.echo()).map_err(|e| AppError::io(&args.out, e))?;
    log.line("fit finished");
    if !fit.converged() {
        let problems = fit.problems().join("; ");
        log.line(format!("not converged: {}", problems));
        return Err(Error::NonConvergence(problems).into());
    }
    println!("fit converged: {} draws per stratum", fit.n_draws());
    Ok(())
}

fn cmd_ppos(args: &RunArgs) -> AppResult<()> {
    let p = prepare(args)?;
    create_dir(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    describe(&mut log, &p);
    let fit = fit_prediction_model(&p.data, &p.config, &p.pool).inspect_err(|e| log.line(format!("fit failed: {}", e)))?;
    log.line(format!("posterior fitted, {} pooled draws", fit.n_draws()));
    let result = simulate_replicates(&p.data, &p.config, &fit, &p.pool)?;
    log.line(format!("{} replicates done, {} invalid", result.k, result.n_invalid));
    for r in result.replicates.iter().filter(|r| !r.valid) {
        log.line(format!("  replicate {} invalid: {}", r.index, r.problems.join("; ")));
    }
    write_run(&args.out, &p.loaded, &p.config, &result)?;
    let line = format!("PPoS = {:.3} (MC SE = {:.5}, K = {})", result.ppos, result.mc_se, result.k_effective);
    log.line(&line);
    check_invalid(&p.config, &result)?;
    println!("{}", line);
    Ok(())
}

fn cmd_scenarios(args: &RunArgs) -> AppResult<()> {
    let p = prepare(args)?;
    let (grid, seeding) = p
        .loaded
        .config
        .scenarios
        .as_ref()
        .ok_or_else(|| AppError::Config("config has no [scenarios] section".into()))?
        .to_core();
    create_dir(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    describe(&mut log, &p);
    let outcomes = run_scenarios(&p.data, &p.config, &grid, seeding, &p.pool)?;
    write_scenario_table(&args.out.join("scenarios.csv"), &outcomes)?;
    let mut first_error = None;
    for o in &outcomes {
        let axes: Vec<String> = o.scenario.axes.iter().map(|(n, v)| format!("{} = {}", n, v)).collect();
        match &o.result {
            Ok(r) => {
                let loaded = p.loaded.for_scenario(&o.scenario);
                let config = loaded.to_ppos_config()?;
                write_run(&args.out.join(format!("scenario_{:02}", o.scenario.index)), &loaded, &config, r)?;
                let line = format!(
                    "scenario {} ({}): PPoS = {:.3} (MC SE = {:.5}, K = {})",
                    o.scenario.index,
                    axes.join(", "),
                    r.ppos,
                    r.mc_se,
                    r.k_effective
                );
                log.line(&line);
                println!("{}", line);
            }
            Err(e) => {
                log.line(format!("scenario {} ({}) failed: {}", o.scenario.index, axes.join(", "), e));
                first_error.get_or_insert_with(|| e.clone());
            }
        }
    }
    match first_error {
        Some(e) if outcomes.iter().all(|o| o.result.is_err()) => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_simulate(config: &Path, seed: Option<u64>, out: &Path, file: &str) -> AppResult<()> {
    let mut spec = SyntheticConfig::load(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = generate_synthetic(&spec.to_core()?)?;
    create_dir(out)?;
    let path = out.join(file);
    save_dataset(&path, &data)?;
    let c = data.event_counts();
    println!(
        "wrote {} subjects to {} (arm 0: {:?}, arm 1: {:?} as censored/cause 1/cause 2)",
        data.len(),
        path.display(),
        c[0],
        c[1]
    );
    Ok(())
}

fn cmd_emit_figures(
    reports: &[PathBuf],
    out: &Path,
    statistic: Option<&str>,
    bins: usize,
    sample: usize,
    seed: u64,
) -> AppResult<()> {
    create_dir(out)?;
    for (i, dir) in reports.iter().enumerate() {
        let report = Report::load(&dir.join("report.json"))?;
        if report.per_replicate.is_empty() {
            return Err(AppError::Config(format!("{}: report has no replicates", dir.display())));
        }
        let stat = match statistic {
            Some(s) => s.to_string(),
            None => report
                .rule_statistics
                .first()
                .cloned()
                .ok_or_else(|| AppError::Config("report names no rule statistic; pass --statistic".into()))?,
        };
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("report{}", i));
        let h = histogram(&report, &stat, bins, None)?;
        write_histogram(&out.join(format!("{}_histogram.csv", name)), &h)?;
        let curves = dir.join("curves.csv");
        if curves.exists() {
            let ids = sample_curves(&curves, &out.join(format!("{}_curves.csv", name)), sample, seed)?;
            println!("{}: histogram of {} ({} bins), {} curves", name, stat, bins, ids.len());
        } else {
            println!("{}: histogram of {} ({} bins)", name, stat, bins);
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> AppResult<()> {
    match &cli.command {
        Command::Fit { run, draws } => cmd_fit(run, *draws),
        Command::Ppos(run) => cmd_ppos(run),
        Command::Scenarios(run) => cmd_scenarios(run),
        Command::Simulate {
            config,
            seed,
            out,
            file,
        } => cmd_simulate(config, *seed, out, file),
        Command::EmitFigures {
            report,
            out,
            statistic,
            bins,
            sample,
            seed,
        } => cmd_emit_figures(report, out, statistic.as_deref(), *bins, *sample, *seed),
    }
}
