//! Adaptive random-walk Metropolis on an unconstrained parameter vector.
//!
//! Each chain proposes `x' = x + s L z` with `z` standard normal. During
//! warmup the global scale `s` follows a Robbins–Monro recursion towards the
//! target acceptance rate, and `L` (a Cholesky factor) is re-estimated at the
//! end of doubling windows: the first window sets per-parameter variances,
//! later ones the full covariance, shrunk towards its diagonal. Adaptation
//! stops when warmup ends and warmup draws are discarded.
//!
//! After warmup a fraction `independence_prob` of the proposals are
//! independence proposals from a multivariate t (5 degrees of freedom)
//! centred on the start point with the start covariance (typically the
//! posterior mode and its Laplace covariance), or on the mean and covariance
//! of the last adaptation window when no start covariance is given.
//! Both kernels leave the target invariant, so the mixture does too.
//!
//! [`Kernel::Hmc`] replaces both with Hamiltonian Monte Carlo on the target's
//! gradient. The same windows estimate the metric (the inverse mass matrix),
//! pooling the positions of all chains, and dual averaging tunes each
//! chain's leapfrog step towards acceptance [`HMC_TARGET_ACCEPT`].
//! Integration times are drawn uniformly on `(0, 2 path_length]` in whitened
//! units.

pub mod diagnostics;
pub mod linalg;
pub mod mode;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::prior::Prior;
use crate::rng::{stream, Domain, StreamRng};

pub use diagnostics::{diagnose_parameter, effective_sample_size, quantile, split_rhat, ParameterDiagnostics};
pub use mode::{find_mode, Mode};

/// A log density, up to an additive constant, on `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// `-inf` outside the support.
    fn log_density(&self, x: &[f64]) -> f64;

    /// Log density with its gradient written to `grad`. The default uses
    /// central differences.
    fn log_density_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let up = self.log_density(&probe);
            probe[i] = x[i] - h;
            let down = self.log_density(&probe);
            probe[i] = x[i];
            grad[i] = (up - down) / (2.0 * h);
        }
        self.log_density(x)
    }
}

/// Adapts a closure to [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDensity { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// Adaptive random-walk Metropolis, mixed with independence proposals
    /// after warmup.
    RandomWalk,
    /// Hamiltonian Monte Carlo with a dense adapted metric.
    Hmc { path_length: f64 },
}

/// Acceptance rate the HMC step size is tuned to.
pub const HMC_TARGET_ACCEPT: f64 = 0.9;

/// Leapfrog steps per HMC iteration are capped at this.
const MAX_LEAPFROG: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kernel: Kernel,
    pub chains: usize,
    pub warmup: usize,
    /// Retained draws per chain.
    pub draws: usize,
    /// Iterations per retained draw.
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    /// Minimum total ESS per parameter.
    pub ess_min: f64,
    pub rhat_max: f64,
    /// Consecutive rejections after which a chain is declared stuck.
    pub stuck_window: usize,
    /// Start-point jitter (sd on the unconstrained scale) when no covariance is known.
    pub init_jitter: f64,
    /// Post-warmup probability of an independence proposal instead of a
    /// random-walk step.
    pub independence_prob: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kernel: Kernel::RandomWalk,
            chains: 4,
            warmup: 1000,
            draws: 1000,
            thin: 1,
            seed: 1,
            target_accept: 0.30,
            ess_min: 400.0,
            rhat_max: 1.01,
            stuck_window: 1000,
            init_jitter: 0.1,
            independence_prob: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSamplerConfig(m.into()));
        if self.chains == 0 || self.draws == 0 || self.thin == 0 {
            return bad("chains, draws and thin must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target acceptance must be in (0, 1)");
        }
        if !(self.ess_min > 0.0) {
            return bad("ess_min must be positive");
        }
        if !(self.rhat_max > 1.0) {
            return bad("rhat_max must exceed 1");
        }
        if self.stuck_window == 0 || !(self.init_jitter >= 0.0) {
            return bad("stuck_window must be positive and init_jitter nonnegative");
        }
        if let Kernel::Hmc { path_length } = self.kernel {
            if !(path_length > 0.0 && path_length.is_finite()) {
                return bad("HMC path length must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.independence_prob) {
            return bad("independence_prob must be in [0, 1]");
        }
        Ok(())
    }
}

/// Where chains start and, optionally, an initial proposal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStart {
    pub point: Vec<f64>,
    /// Row-major `dim × dim`; when present chains start from
    /// `point + N(0, covariance)` draws.
    pub covariance: Option<Vec<f64>>,
}

impl ChainStart {
    pub fn at(point: Vec<f64>) -> Self {
        ChainStart { point, covariance: None }
    }
}

/// Post-warmup draws of all chains.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub n_chains: usize,
    /// Draws per chain.
    pub n_draws: usize,
    // Row `c * n_draws + i` holds draw `i` of chain `c`.
    values: Vec<f64>,
    /// Post-warmup acceptance rate per chain.
    pub acceptance: Vec<f64>,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, n_chains: usize, n_draws: usize, values: Vec<f64>, seed: u64) -> Self {
        assert_eq!(values.len(), names.len() * n_chains * n_draws);
        PosteriorDraws {
            names,
            n_chains,
            n_draws,
            values,
            acceptance: vec![f64::NAN; n_chains],
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Total draws over chains.
    pub fn len(&self) -> usize {
        self.n_chains * self.n_draws
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Draw `k` of the pooled matrix (chain-major order).
    pub fn row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.values[k * d..(k + 1) * d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.row(k)[j]).collect()
    }

    pub fn chain_column(&self, chain: usize, j: usize) -> Vec<f64> {
        (0..self.n_draws).map(|i| self.row(chain * self.n_draws + i)[j]).collect()
    }

    /// Applies `f` to every draw, e.g. to return to the natural scale.
    pub fn map_rows<F: Fn(&[f64]) -> Vec<f64>>(&self, names: Vec<String>, f: F) -> PosteriorDraws {
        let mut values = Vec::with_capacity(names.len() * self.len());
        for k in 0..self.len() {
            let r = f(self.row(k));
            debug_assert_eq!(r.len(), names.len());
            values.extend(r);
        }
        PosteriorDraws {
            names,
            n_chains: self.n_chains,
            n_draws: self.n_draws,
            values,
            acceptance: self.acceptance.clone(),
            seed: self.seed,
        }
    }

    /// Per-parameter summaries, ESS and split R-hat.
    pub fn diagnostics(&self) -> Result<Vec<ParameterDiagnostics>> {
        (0..self.dim())
            .map(|j| {
                let cols: Vec<Vec<f64>> = (0..self.n_chains).map(|c| self.chain_column(c, j)).collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                diagnose_parameter(&self.names[j], &refs)
            })
            .collect()
    }

    /// Reasons the draws fail `config`'s thresholds; empty when converged.
    pub fn convergence_problems(&self, config: &SamplerConfig) -> Vec<String> {
        let mut problems = Vec::new();
        if self.n_draws < diagnostics::MIN_DRAWS {
            problems.push(format!(
                "{} draws per chain, at least {} needed for diagnostics",
                self.n_draws,
                diagnostics::MIN_DRAWS
            ));
        }
        match self.diagnostics() {
            Ok(d) => problems.extend(d.iter().filter_map(|p| p.problem(config.ess_min, config.rhat_max))),
            Err(e) => problems.push(format!("{}", e)),
        }
        problems
    }
}

/// Runs `config.chains` chains of `config.kernel` on `target`.
///
/// Chain `c` uses the stream `(config.seed, Chain, c)`, so the output does not
/// depend on the executor.
pub fn sample_posterior<T, E>(target: &T, start: &ChainStart, config: &SamplerConfig, exec: &E) -> Result<PosteriorDraws>
where
    T: LogDensity + ?Sized,
    E: Executor,
{
    config.validate()?;
    let d = target.dim();
    if start.point.len() != d {
        return Err(Error::InvalidSamplerConfig(format!(
            "initial point has {} coordinates, target has {}",
            start.point.len(),
            d
        )));
    }
    if !target.log_density(&start.point).is_finite() {
        return Err(Error::NonFiniteInit);
    }
    let chol = start.covariance.as_ref().and_then(|c| linalg::cholesky(c, d));
    let results = match config.kernel {
        Kernel::RandomWalk => exec.map(config.chains, |c| run_chain(target, &start.point, chol.as_deref(), config, c)),
        Kernel::Hmc { path_length } => match sample_hmc(target, &start.point, chol.as_deref(), config, path_length, exec) {
            Ok(chains) => chains.into_iter().map(Ok).collect(),
            Err(e) => alloc::vec![Err(e)],
        },
    };
    let mut values = Vec::with_capacity(d * config.chains * config.draws);
    let mut acceptance = Vec::with_capacity(config.chains);
    for r in results {
        let (v, a) = r?;
        values.extend(v);
        acceptance.push(a);
    }
    let names = (0..d).map(|i| format!("x[{}]", i)).collect();
    let mut draws = PosteriorDraws::new(names, config.chains, config.draws, values, config.seed);
    draws.acceptance = acceptance;
    Ok(draws)
}

/// Degrees of freedom of the independence proposal.
const T_DOF: f64 = 5.0;

fn standard_normals(rng: &mut StreamRng, z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Doubling adaptation windows inside `warmup`, as `(start, end)` iteration ranges.
fn adaptation_windows(warmup: usize) -> Vec<(usize, usize)> {
    if warmup < 20 {
        return Vec::new();
    }
    let (init, term) = if warmup >= 150 {
        (75, 50)
    } else {
        (warmup * 15 / 100, warmup / 10)
    };
    let end = warmup - term;
    let mut windows = Vec::new();
    let mut s = init;
    let mut len = if warmup >= 150 { 25 } else { end - init };
    while s < end {
        let mut e = s + len;
        // Stretch the last window to the end of the adaptive phase.
        if e + 2 * len > end {
            e = end;
        }
        windows.push((s, e));
        s = e;
        len *= 2;
    }
    windows
}

struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Welford {
            n: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        let d = x.len();
        self.n += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += after * delta[j];
            }
        }
    }

    /// Regularised covariance; `None` if some coordinate never moved.
    fn covariance(&self, full: bool) -> Option<Vec<f64>> {
        let d = self.mean.len();
        if self.n < 3.0 {
            return None;
        }
        let mut c: Vec<f64> = self.m2.iter().map(|v| v / (self.n - 1.0)).collect();
        let w = self.n / (self.n + 5.0);
        for i in 0..d {
            let vi = c[i * d + i];
            if !(vi > 0.0) || !vi.is_finite() {
                return None;
            }
            for j in 0..d {
                if i != j {
                    c[i * d + j] = if full { w * c[i * d + j] } else { 0.0 };
                }
            }
            c[i * d + i] = vi * (1.0 + 1e-8);
        }
        Some(c)
    }
}

/// A draw around `init`, falling back to `init` itself.
fn jittered_start<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    start_chol: Option<&[f64]>,
    config: &SamplerConfig,
    rng: &mut StreamRng,
) -> (Vec<f64>, f64) {
    let d = init.len();
    let mut z = vec![0.0; d];
    let mut step = vec![0.0; d];
    for _ in 0..50 {
        standard_normals(rng, &mut z);
        match start_chol {
            Some(l) => linalg::lower_mul(l, &z, &mut step),
            None => step.iter_mut().zip(&z).for_each(|(s, v)| *s = config.init_jitter * v),
        }
        let cand: Vec<f64> = init.iter().zip(&step).map(|(a, b)| a + b).collect();
        let lc = target.log_density(&cand);
        if lc.is_finite() {
            return (cand, lc);
        }
    }
    (init.to_vec(), target.log_density(init))
}

fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    start_chol: Option<&[f64]>,
    config: &SamplerConfig,
    chain: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = init.len();
    let mut rng = stream(config.seed, Domain::Chain, chain as u64);
    let mut z = vec![0.0; d];
    let mut step = vec![0.0; d];

    let (mut x, mut lp) = jittered_start(target, init, start_chol, config, &mut rng);

    let mut chol = match start_chol {
        Some(l) => l.to_vec(),
        None => linalg::diagonal(&vec![config.init_jitter.max(1e-3); d]),
    };
    let base_scale = 2.38 / (d as f64).sqrt();
    let mut log_scale = base_scale.ln();
    let windows = adaptation_windows(config.warmup);
    let mut window = 0;
    let mut welford = Welford::new(d);
    let mut rm_count = 0.0;
    let mut rejected_run = 0;

    // Independence proposal: centre and Cholesky factor, refreshed by each
    // adaptation window and fixed after warmup.
    let mut indep: Option<(Vec<f64>, Vec<f64>)> = start_chol.map(|l| (init.to_vec(), l.to_vec()));
    let chi2 = ChiSquared::new(T_DOF).expect("positive degrees of freedom");
    let log_q = |m2: f64| -0.5 * (T_DOF + d as f64) * (m2 / T_DOF).ln_1p();
    let mut white = vec![0.0; d];
    let mut m2_current = f64::NAN;

    let total = config.warmup + config.draws * config.thin;
    let mut out = Vec::with_capacity(config.draws * d);
    let mut accepted = 0usize;
    let mut cand = vec![0.0; d];
    for it in 0..total {
        let independent = it >= config.warmup
            && config.independence_prob > 0.0
            && indep.is_some()
            && rng.random::<f64>() < config.independence_prob;
        standard_normals(&mut rng, &mut z);
        let mut log_correction = 0.0;
        let mut m2_cand = f64::NAN;
        if independent {
            let (mu, l) = indep.as_ref().unwrap();
            let k = (T_DOF / chi2.sample(&mut rng)).sqrt();
            z.iter_mut().for_each(|v| *v *= k);
            linalg::lower_mul(l, &z, &mut step);
            for i in 0..d {
                cand[i] = mu[i] + step[i];
            }
            if m2_current.is_nan() {
                for i in 0..d {
                    step[i] = x[i] - mu[i];
                }
                linalg::forward_solve(l, &step, &mut white);
                m2_current = white.iter().map(|v| v * v).sum();
            }
            m2_cand = z.iter().map(|v| v * v).sum();
            log_correction = log_q(m2_current) - log_q(m2_cand);
        } else {
            linalg::lower_mul(&chol, &z, &mut step);
            let s = log_scale.exp();
            for i in 0..d {
                cand[i] = x[i] + s * step[i];
            }
        }
        let lc = target.log_density(&cand);
        let log_ratio = lc - lp + log_correction;
        let u: f64 = rng.random();
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.exp().min(1.0) };
        if u < accept_prob {
            x.copy_from_slice(&cand);
            lp = lc;
            // Only known for independence moves; recomputed lazily otherwise.
            m2_current = m2_cand;
            rejected_run = 0;
            if it >= config.warmup {
                accepted += 1;
            }
        } else {
            rejected_run += 1;
            if rejected_run >= config.stuck_window {
                return Err(Error::SamplerStuck {
                    chain,
                    window: config.stuck_window,
                });
            }
        }

        if it < config.warmup {
            rm_count += 1.0;
            log_scale += (accept_prob - config.target_accept) / rm_count.powf(0.6);
            if let Some(&(ws, we)) = windows.get(window) {
                if it >= ws {
                    welford.push(&x);
                }
                if it + 1 == we {
                    if let Some(cov) = welford.covariance(window > 0 || start_chol.is_some()) {
                        if let Some(l) = linalg::cholesky(&cov, d) {
                            indep = Some((welford.mean.clone(), l.clone()));
                            chol = l;
                            log_scale = base_scale.ln();
                            rm_count = 0.0;
                        }
                    }
                    welford = Welford::new(d);
                    window += 1;
                }
            }
        } else if (it - config.warmup + 1) % config.thin == 0 {
            out.extend_from_slice(&x);
        }
    }
    let rate = accepted as f64 / (config.draws * config.thin) as f64;
    Ok((out, rate))
}

/// Dual averaging of the log step size.
#[derive(Debug, Clone)]
struct StepSize {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: f64,
}

impl StepSize {
    fn new(eps: f64) -> Self {
        StepSize {
            mu: (10.0 * eps).ln(),
            log_eps: eps.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            t: 0.0,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.t += 1.0;
        let w = 1.0 / (self.t + T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (HMC_TARGET_ACCEPT - accept_prob);
        self.log_eps = self.mu - self.t.sqrt() / GAMMA * self.h_bar;
        let eta = self.t.powf(-KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn adapted(&self) -> f64 {
        if self.t > 0.0 {
            self.log_eps_bar.exp()
        } else {
            self.current()
        }
    }
}

/// One HMC chain between synchronisation points.
#[derive(Clone)]
struct HmcChain {
    rng: StreamRng,
    x: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
    step_size: StepSize,
    /// Step size used after warmup.
    eps: f64,
    rejected_run: usize,
    accept_sum: f64,
    out: Vec<f64>,
}

impl HmcChain {
    fn start<T: LogDensity + ?Sized>(
        target: &T,
        init: &[f64],
        start_chol: Option<&[f64]>,
        config: &SamplerConfig,
        chain: usize,
    ) -> Self {
        let d = init.len();
        let mut rng = stream(config.seed, Domain::Chain, chain as u64);
        let (x, _) = jittered_start(target, init, start_chol, config, &mut rng);
        let mut grad = vec![0.0; d];
        let lp = target.log_density_gradient(&x, &mut grad);
        let step_size = StepSize::new(1.0 / (d as f64).powf(0.25));
        let eps = step_size.current();
        HmcChain {
            rng,
            x,
            grad,
            lp,
            step_size,
            eps,
            rejected_run: 0,
            accept_sum: 0.0,
            out: Vec::new(),
        }
    }

    /// Runs iterations `range` of the chain. Warmup iterations adapt the step
    /// size; iterations at or after `window_start` are returned.
    #[allow(clippy::too_many_arguments)]
    fn advance<T: LogDensity + ?Sized>(
        &mut self,
        target: &T,
        chol: &[f64],
        config: &SamplerConfig,
        path_length: f64,
        range: core::ops::Range<usize>,
        window_start: usize,
        chain: usize,
    ) -> Result<Vec<f64>> {
        let d = self.x.len();
        let mut r = vec![0.0; d];
        let mut kick = vec![0.0; d];
        let mut drift = vec![0.0; d];
        let mut xc = vec![0.0; d];
        let mut gc = vec![0.0; d];
        let mut window = Vec::new();
        for it in range {
            let warmup = it < config.warmup;
            let eps = if warmup { self.step_size.current() } else { self.eps };
            // Jittered step size, integration time uniform on (0, 2 path_length].
            let e = eps * (0.9 + 0.2 * self.rng.random::<f64>());
            let time = 2.0 * path_length * (1.0 - self.rng.random::<f64>());
            let n_steps = ((time / e).ceil() as usize).clamp(1, MAX_LEAPFROG);
            standard_normals(&mut self.rng, &mut r);
            let h0 = self.lp - 0.5 * r.iter().map(|v| v * v).sum::<f64>();
            xc.copy_from_slice(&self.x);
            gc.copy_from_slice(&self.grad);
            let mut lc = self.lp;
            for _ in 0..n_steps {
                linalg::lower_t_mul(chol, &gc, &mut kick);
                r.iter_mut().zip(&kick).for_each(|(p, k)| *p += 0.5 * e * k);
                linalg::lower_mul(chol, &r, &mut drift);
                xc.iter_mut().zip(&drift).for_each(|(q, v)| *q += e * v);
                lc = target.log_density_gradient(&xc, &mut gc);
                if !lc.is_finite() {
                    break;
                }
                linalg::lower_t_mul(chol, &gc, &mut kick);
                r.iter_mut().zip(&kick).for_each(|(p, k)| *p += 0.5 * e * k);
            }
            let h1 = lc - 0.5 * r.iter().map(|v| v * v).sum::<f64>();
            let log_ratio = h1 - h0;
            let accept_prob = if log_ratio.is_nan() || !lc.is_finite() {
                0.0
            } else {
                log_ratio.exp().min(1.0)
            };
            if self.rng.random::<f64>() < accept_prob {
                self.x.copy_from_slice(&xc);
                self.grad.copy_from_slice(&gc);
                self.lp = lc;
                self.rejected_run = 0;
            } else {
                self.rejected_run += 1;
                if self.rejected_run >= config.stuck_window {
                    return Err(Error::SamplerStuck {
                        chain,
                        window: config.stuck_window,
                    });
                }
            }
            if warmup {
                self.step_size.update(accept_prob);
                if it + 1 == config.warmup {
                    self.eps = self.step_size.adapted();
                }
                if it >= window_start {
                    window.extend_from_slice(&self.x);
                }
            } else {
                self.accept_sum += accept_prob;
                if (it - config.warmup + 1) % config.thin == 0 {
                    self.out.extend_from_slice(&self.x);
                }
            }
        }
        Ok(window)
    }
}

/// HMC for all chains. Warmup runs window by window in lockstep: the
/// positions of every chain in a window are pooled into one metric, so a
/// chain that strays during warmup still gets a metric fitted to the bulk.
fn sample_hmc<T, E>(
    target: &T,
    init: &[f64],
    start_chol: Option<&[f64]>,
    config: &SamplerConfig,
    path_length: f64,
    exec: &E,
) -> Result<Vec<(Vec<f64>, f64)>>
where
    T: LogDensity + ?Sized,
    E: Executor,
{
    let d = init.len();
    let mut chains: Vec<HmcChain> = exec.map(config.chains, |c| HmcChain::start(target, init, start_chol, config, c));
    let mut chol = match start_chol {
        Some(l) => l.to_vec(),
        None => linalg::diagonal(&vec![config.init_jitter.max(1e-3); d]),
    };
    // Segment boundaries: window ends, warmup end, sampling end.
    let windows = adaptation_windows(config.warmup);
    let total = config.warmup + config.draws * config.thin;
    let mut segments: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut at = 0;
    for (k, &(_, we)) in windows.iter().enumerate() {
        segments.push((at, we, Some(k)));
        at = we;
    }
    if at < config.warmup {
        segments.push((at, config.warmup, None));
        at = config.warmup;
    }
    segments.push((at, total, None));

    for (lo, hi, window) in segments {
        let window_start = window.map_or(usize::MAX, |k| windows[k].0);
        let chol_ref = &chol;
        let results = exec.map(config.chains, |c| {
            let mut chain = chains[c].clone();
            let w = chain.advance(target, chol_ref, config, path_length, lo..hi, window_start, c);
            w.map(|w| (chain, w))
        });
        let mut pooled = Welford::new(d);
        let mut next = Vec::with_capacity(config.chains);
        for r in results {
            let (chain, w) = r?;
            for row in w.chunks(d) {
                pooled.push(row);
            }
            next.push(chain);
        }
        chains = next;
        if let Some(k) = window {
            if let Some(cov) = pooled.covariance(k > 0 || start_chol.is_some()) {
                if let Some(l) = linalg::cholesky(&cov, d) {
                    chol = l;
                    for chain in &mut chains {
                        chain.step_size = StepSize::new(chain.step_size.current());
                    }
                }
            }
        }
    }
    let n = (config.draws * config.thin) as f64;
    Ok(chains.into_iter().map(|c| (c.out, c.accept_sum / n)).collect())
}

/// Conjugate update of a `Beta(a, b)` prior after `successes` in `trials`.
pub fn beta_conjugate_update(prior: Prior, successes: u64, trials: u64) -> Result<Prior> {
    let Prior::Beta { a, b } = prior else {
        return Err(Error::InvalidPrior(format!("conjugate update needs a Beta prior, got {:?}", prior)));
    };
    prior.validate()?;
    if successes > trials {
        return Err(Error::InvalidCounts { successes, trials });
    }
    Ok(Prior::Beta {
        a: a + successes as f64,
        b: b + (trials - successes) as f64,
    })
}
