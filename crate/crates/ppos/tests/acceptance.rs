//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.
//!
//! Runs under `cargo test` (`harness = false`). Criterion 10 runs both bundled
//! scenario grids at K = 500 and dominates the runtime.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::Rng;

use ppos_core::analysis::{
    aalen_johansen, analyse, evaluate_rule, risk_ratio_test, AnalysisMethod, AnalysisSpec, CifVariance, Criterion,
    DecisionRule, EvalTime,
};
use ppos_core::dataset::{Arm, Cause, CensoringRule, Dataset, Event, Horizon, SubjectRecord};
use ppos_core::exec::Sequential;
use ppos_core::hazard::{ArmMode, CauseHazard, CausePair, PiecewiseHazard, WeibullHazard};
use ppos_core::model::{fit_stratum, FamilySpec, ModelSpec, StratumSpec};
use ppos_core::ppos::{mc_standard_error, run_ppos, PposConfig};
use ppos_core::prior::{LevelPrior, Prior};
use ppos_core::rng::{stream, Domain};
use ppos_core::sampler::{effective_sample_size, quantile, SamplerConfig};
use ppos_core::simulate::{draw_event_time, invert_cum_hazard};
use ppos_core::synthetic::{generate_synthetic, SyntheticSpec, TruthHazard, TruthStratum};

use ppos::cli::{run, Cli};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const U1: f64 = 0.3;
const NU1: f64 = 1.2;
const U2: f64 = 0.1;
const NU2: f64 = 0.8;

fn weibull(u: f64, nu: f64) -> CauseHazard {
    CauseHazard::Weibull(WeibullHazard::new(u.ln(), vec![], nu).unwrap())
}

fn truth(cause: Cause, scale: f64, shape: f64) -> TruthStratum {
    TruthStratum {
        cause,
        arm: None,
        covariates: vec![],
        coefficients: vec![],
        hazard: TruthHazard::Weibull { scale, shape },
    }
}

fn weibull_trial(seed: u64, arm_sizes: [usize; 2]) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        time_unit: "years".into(),
        arm_sizes,
        covariates: vec![],
        truth: vec![truth(Cause::Primary, U1, NU1), truth(Cause::Competing, U2, NU2)],
        entry_span: 0.0,
        interim_cutoff: None,
        max_follow_up: None,
    }
}

/// `F_i(t)` by composite Simpson in `x = s^ν_i`, where the integrand
/// `u_i exp(-u₁ s^ν₁ - u₂ s^ν₂)` is smooth.
fn weibull_cif_oracle(cause: Cause, t: f64) -> f64 {
    let (u, nu) = match cause {
        Cause::Primary => (U1, NU1),
        Cause::Competing => (U2, NU2),
    };
    let f = |x: f64| {
        let s = x.powf(1.0 / nu);
        u * (-U1 * s.powf(NU1) - U2 * s.powf(NU2)).exp()
    };
    let b = t.powf(nu);
    let n = 20_000;
    let h = b / n as f64;
    let mut sum = f(0.0) + f(b);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let data = generate_synthetic(&weibull_trial(101, [25_000, 25_000])).unwrap();
    let est = aalen_johansen(&data, None);
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        for cause in [Cause::Primary, Cause::Competing] {
            worst = worst.max((est.value_at(cause, t) - weibull_cif_oracle(cause, t)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 0.01 && secs < 120.0,
        format!("max |AJ - quadrature| = {:.5} (< 0.01), {:.2} s single-threaded (< 120 s)", worst, secs),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = stream(202, Domain::Replicate, 0);
    let mut worst = [0.0f64; 2];
    for case in 0..1000 {
        let target = -rng.random::<f64>().ln() * 10f64.powf(rng.random_range(-2.0..2.0));
        let w = (
            weibull(rng.random_range(0.01..5.0), rng.random_range(0.3..3.0)),
            weibull(rng.random_range(0.01..5.0), rng.random_range(0.3..3.0)),
        );
        let mut knots = [rng.random_range(0.1..2.0), 0.0, 0.0];
        knots[1] = knots[0] + rng.random_range(0.1..2.0);
        knots[2] = knots[1] + rng.random_range(0.1..2.0);
        let levels: Vec<f64> = (0..7).map(|_| rng.random_range(-4.0..1.5)).collect();
        let p = (
            CauseHazard::Piecewise(PiecewiseHazard::new(knots.to_vec(), levels[..4].to_vec(), vec![]).unwrap()),
            CauseHazard::Piecewise(PiecewiseHazard::new(knots[..2].to_vec(), levels[4..].to_vec(), vec![]).unwrap()),
        );
        for (slot, (a, b)) in [(0, &w), (1, &p)] {
            let pair = CausePair::new(a, &[], b, &[]);
            let s = invert_cum_hazard(&pair, target).unwrap_or_else(|e| panic!("case {}: {}", case, e));
            worst[slot] = worst[slot].max((pair.cum_hazard(s) - target).abs());
        }
    }
    outcome(
        worst[0] < 1e-8 && worst[1] < 1e-8,
        format!("max |Λ(inverse) - target| over 1000 cases: Weibull {:.2e}, PCH {:.2e} (< 1e-8)", worst[0], worst[1]),
    )
}

fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn criterion_3() -> Outcome {
    let (a, b) = (weibull(U1, NU1), weibull(U2, NU2));
    let pair = CausePair::new(&a, &[], &b, &[]);
    let c = 2.0;
    let n = 20_000;
    let mut rng = stream(303, Domain::Replicate, 0);
    let mut conditional: Vec<f64> = (0..n).map(|_| draw_event_time(&pair, c, &mut rng).unwrap()).collect();
    // Unconditional draws by bisection on Λ(t) = E, E ~ Exp(1), kept when beyond c.
    let mut rng = stream(303, Domain::Replicate, 1);
    let mut filtered = Vec::with_capacity(n);
    while filtered.len() < n {
        let e = -rng.random::<f64>().ln();
        let (mut lo, mut hi) = (0.0, 1.0);
        while pair.cum_hazard(hi) < e {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if pair.cum_hazard(mid) < e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        if t > c {
            filtered.push(t);
        }
    }
    let d = ks_distance(&mut conditional, &mut filtered);
    outcome(d < 0.02, format!("KS distance {:.4} (< 0.02), 20000 draws each at c = 2", d))
}

fn criterion_4() -> Outcome {
    let spec = StratumSpec {
        cause: Cause::Primary,
        arm: Some(Arm::Control),
        covariates: vec![],
        coefficient_priors: vec![],
        arm_prior: None,
        family: FamilySpec::Piecewise {
            knots: vec![],
            levels: LevelPrior::Independent(Prior::Flat),
        },
    };
    let mut rng = stream(404, Domain::Synthetic, 0);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for set in 0..10u64 {
        let n = rng.random_range(20..300);
        let rate = rng.random_range(0.2..2.0);
        let cutoff = rng.random_range(0.5..4.0);
        let records: Vec<SubjectRecord> = (0..n)
            .map(|i| {
                let t = -rng.random::<f64>().ln() / rate;
                let c = rng.random::<f64>() * cutoff;
                let (time, event) = if t <= c {
                    (t, if rng.random::<f64>() < 0.7 { Event::Failure(Cause::Primary) } else { Event::Failure(Cause::Competing) })
                } else {
                    (c, Event::Censored)
                };
                SubjectRecord::new(&format!("s{}", i), time, event, Arm::Control, vec![])
            })
            .collect();
        let data = Dataset::new(vec![], "years", records).unwrap();
        let d = data.records().iter().filter(|r| r.event == Event::Failure(Cause::Primary)).count() as f64;
        let exposure: f64 = data.records().iter().map(|r| r.time).sum();
        let config = SamplerConfig {
            seed: 4040 + set,
            ..SamplerConfig::default()
        };
        let post = fit_stratum(&spec, &data, &config, &Sequential).unwrap();
        let chains: Vec<Vec<f64>> = (0..post.draws.n_chains)
            .map(|c| post.draws.chain_column(c, 0).iter().map(|b| b.exp()).collect())
            .collect();
        let all: Vec<f64> = chains.concat();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
        let ess = effective_sample_size(&chains.iter().map(Vec::as_slice).collect::<Vec<_>>());
        let se = (var / ess).sqrt();
        let z = (mean - d / exposure).abs() / se;
        worst = worst.max(z);
        pass &= z <= 3.0;
    }
    outcome(pass, format!("largest |mean - d/E| / MC SE over 10 datasets = {:.2} (<= 3)", worst))
}

fn criterion_5() -> Outcome {
    let stratum = |cause| StratumSpec {
        cause,
        arm: Some(Arm::Control),
        covariates: vec![],
        coefficient_priors: vec![],
        arm_prior: None,
        family: FamilySpec::Weibull {
            intercept: Prior::Normal { mean: 0.0, sd: 20.0 },
            shape: Prior::Exponential { rate: 1.0 },
        },
    };
    let truths = [(Cause::Primary, U1, NU1), (Cause::Competing, U2, NU2)];
    // Covered counts for alpha and nu of each cause.
    let mut covered = [[0usize; 2]; 2];
    for rep in 0..50u64 {
        let mut spec = weibull_trial(5000 + rep, [2000, 0]);
        spec.max_follow_up = Some(3.0);
        let data = generate_synthetic(&spec).unwrap();
        for (c, &(cause, u, nu)) in truths.iter().enumerate() {
            let config = SamplerConfig {
                seed: 50_000 + 2 * rep + c as u64,
                ..SamplerConfig::default()
            };
            let post = fit_stratum(&stratum(cause), &data, &config, &Sequential).unwrap();
            for (j, value) in [u.ln(), nu].into_iter().enumerate() {
                let col = if j == 0 { 0 } else { post.draws.dim() - 1 };
                let mut draws = post.draws.column(col);
                draws.sort_by(f64::total_cmp);
                if quantile(&draws, 0.05) <= value && value <= quantile(&draws, 0.95) {
                    covered[c][j] += 1;
                }
            }
        }
    }
    let min = covered.iter().flatten().copied().min().unwrap();
    outcome(
        min >= 39,
        format!(
            "90% intervals covering over 50 reps: cause 1 alpha {} nu {}, cause 2 alpha {} nu {} (each >= 39)",
            covered[0][0], covered[0][1], covered[1][0], covered[1][1]
        ),
    )
}

fn criterion_6() -> Outcome {
    let trials = 2000;
    let alpha = 0.035;
    let mut rejections = 0;
    for trial in 0..trials {
        let mut spec = weibull_trial(60_000 + trial, [400, 400]);
        spec.entry_span = 1.0;
        spec.interim_cutoff = Some(3.0);
        let data = generate_synthetic(&spec).unwrap();
        let exposed = aalen_johansen(&data, Some(Arm::Treatment));
        let referent = aalen_johansen(&data, Some(Arm::Control));
        if risk_ratio_test(&exposed, &referent, 1.5, alpha).success {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    outcome(
        (0.025..=0.046).contains(&rate),
        format!("null rejection rate {:.4} at alpha 0.035 over {} trials (in [0.025, 0.046])", rate, trials),
    )
}

fn criterion_7() -> Outcome {
    let exact = mc_standard_error(0.5, 2500) == 0.01;
    let mut worst: f64 = 0.0;
    for k in [2500, 2501, 3000, 5000, 10_000, 100_000] {
        for i in 0..=1000 {
            worst = worst.max(mc_standard_error(i as f64 / 1000.0, k));
        }
    }
    outcome(
        exact && worst <= 0.01,
        format!("mc_se(0.5, 2500) == 0.01: {}; max mc_se over p grid, K >= 2500: {}", exact, worst),
    )
}

fn criterion_8() -> Outcome {
    let mut spec = weibull_trial(808, [60, 60]);
    spec.truth[0].arm = Some(Arm::Control);
    spec.truth.push(TruthStratum {
        arm: Some(Arm::Treatment),
        ..truth(Cause::Primary, 3.0 * U1, NU1)
    });
    let data = generate_synthetic(&spec).unwrap();
    let stratum = |cause| StratumSpec {
        cause,
        arm: None,
        covariates: vec![],
        coefficient_priors: vec![],
        arm_prior: Some(Prior::Normal { mean: 0.0, sd: 0.5f64.sqrt() }),
        family: FamilySpec::Weibull {
            intercept: Prior::Normal { mean: 0.0, sd: 20.0 },
            shape: Prior::Exponential { rate: 1.0 },
        },
    };
    let model = ModelSpec {
        arm_mode: ArmMode::Covariate,
        strata: vec![stratum(Cause::Primary), stratum(Cause::Competing)],
    };
    let mut pass = true;
    let mut seen = Vec::new();
    for alpha in [0.5, 0.035, 1e-3, 1e-9] {
        let analysis = AnalysisSpec {
            methods: vec![AnalysisMethod::RiskRatio {
                name: "rr".into(),
                eval_time: EvalTime::Horizon,
                variance: CifVariance::Aalen,
            }],
            rule: DecisionRule::single(Criterion::PValue {
                statistic: "rr.p_value".into(),
                alpha,
            }),
        };
        let mut config = PposConfig::new(model.clone(), analysis.clone());
        config.k = 25;
        config.master_seed = 88;
        config.censoring = CensoringRule::Administrative(Horizon::Scalar(1e6));
        let result = run_ppos(&data, &config, &Sequential).unwrap();
        let horizon = data.records().iter().map(|r| r.time).fold(0.0, f64::max);
        let observed = analyse(&data, &analysis, Some(horizon), 0, &Sequential).unwrap();
        let direct = evaluate_rule(&observed.statistics, &analysis.rule).unwrap();
        pass &= (result.ppos == 0.0 || result.ppos == 1.0) && result.ppos == direct as u8 as f64;
        seen.push(format!("alpha {}: PPoS {} rule {}", alpha, result.ppos, direct));
    }
    pass &= seen.iter().any(|s| s.ends_with("true")) && seen.iter().any(|s| s.ends_with("false"));
    outcome(pass, seen.join("; "))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["ppos"];
    argv.extend_from_slice(args);
    run(Cli::try_parse_from(argv).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (name, k) in [("ispy_like.toml", "60"), ("sthlm3_like.toml", "40")] {
        let config = data_dir().join(name);
        let mut reports = Vec::new();
        for (i, workers) in ["1", "1", "4", "8"].iter().enumerate() {
            let out = tmp.path().join(format!("{}-{}", name, i));
            let args = ["ppos", "--config", config.to_str().unwrap(), "--k", k, "--workers", workers, "--out", out.to_str().unwrap()];
            if let Err(e) = cli(&args) {
                return outcome(false, format!("{}: {}", name, e));
            }
            reports.push(std::fs::read(out.join("report.json")).unwrap());
        }
        let same = reports.windows(2).all(|w| w[0] == w[1]);
        pass &= same;
        details.push(format!("{} (K {}): {}", name, k, if same { "identical" } else { "differ" }));
    }
    outcome(pass, format!("report.json across two runs and workers 1/4/8: {}", details.join(", ")))
}

/// Runs the config's scenario grid at K = 500 and returns the `(axes, ppos)`
/// rows and the elapsed seconds.
fn scenario_sweep(name: &str, out: &Path) -> Result<(Vec<(Vec<f64>, f64)>, f64), String> {
    let start = Instant::now();
    let config = data_dir().join(name);
    cli(&["scenarios", "--config", config.to_str().unwrap(), "--k", "500", "--out", out.to_str().unwrap()])?;
    let secs = start.elapsed().as_secs_f64();
    let mut reader = csv::Reader::from_path(out.join("scenarios.csv")).map_err(|e| e.to_string())?;
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    let ppos_col = header.iter().position(|h| h == "ppos").unwrap();
    let mut rows = Vec::new();
    for r in reader.records() {
        let r = r.map_err(|e| e.to_string())?;
        let axes = (1..ppos_col).map(|j| r[j].parse::<f64>().unwrap()).collect();
        let ppos = r[ppos_col].parse::<f64>().map_err(|_| format!("failed cell: {:?}", r))?;
        rows.push((axes, ppos));
    }
    Ok((rows, secs))
}

fn nondecreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0])
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (grid, grid_secs) = match scenario_sweep("ispy_like.toml", &tmp.path().join("grid")) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("prior grid: {}", e)),
    };
    // Axes are (mu, sigma); check mu-monotonicity at each sigma.
    let mut sigmas: Vec<f64> = grid.iter().map(|(a, _)| a[1]).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut by_sigma = Vec::new();
    let mut a_pass = grid.len() == 15;
    for s in &sigmas {
        let mut cells: Vec<(f64, f64)> = grid.iter().filter(|(a, _)| a[1] == *s).map(|(a, p)| (a[0], *p)).collect();
        cells.sort_by(|x, y| x.0.total_cmp(&y.0));
        let values: Vec<f64> = cells.iter().map(|c| c.1).collect();
        a_pass &= nondecreasing(&values);
        by_sigma.push(format!("sd {:.3}: {:?}", s, values));
    }
    let (sweep, sweep_secs) = match scenario_sweep("sthlm3_like.toml", &tmp.path().join("horizons")) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("horizon sweep: {}", e)),
    };
    let values: Vec<f64> = sweep.iter().map(|(_, p)| *p).collect();
    let b_pass = sweep.len() == 6 && nondecreasing(&values);
    let fast = grid_secs < 900.0 && sweep_secs < 900.0;
    outcome(
        a_pass && b_pass && fast,
        format!(
            "(a) {} [{}]; (b) {} {:?}; K=500 sweeps took {:.0} s and {:.0} s on {} core(s) (each < 900 s)",
            if a_pass { "nondecreasing in mu" } else { "NOT nondecreasing in mu" },
            by_sigma.join(", "),
            if b_pass { "nondecreasing in horizon" } else { "NOT nondecreasing in horizon" },
            values,
            grid_secs,
            sweep_secs,
            cores
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("simulated vs analytic CIF", criterion_1),
        ("cumulative-hazard inversion", criterion_2),
        ("left-truncated draws", criterion_3),
        ("conjugate PCH posterior", criterion_4),
        ("Weibull posterior recovery", criterion_5),
        ("risk-ratio test calibration", criterion_6),
        ("Monte Carlo SE bound", criterion_7),
        ("degenerate prediction identity", criterion_8),
        ("determinism across workers", criterion_9),
        ("synthetic pattern reproduction", criterion_10),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        println!(
            "criterion {:>2} {} {}: {} [{:.1} s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += !o.pass as usize;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criterion(s) failed", failed);
        ExitCode::FAILURE
    }
}
