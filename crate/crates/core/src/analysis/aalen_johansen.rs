//! Aalen-Johansen estimator of the cumulative incidence functions.
//!
//! At each distinct event time `t_j` with `n_j` at risk and `d_ij` events of
//! cause `i`, the event-free survival and the incidences update as
//!
//! ```text
//! F_i(t_j) = F_i(t_{j-1}) + S(t_{j-1}) d_ij / n_j
//! S(t_j)   = S(t_{j-1}) (1 - (d_1j + d_2j) / n_j)
//! ```
//!
//! Pointwise variances come from the delta method applied to the
//! cause-specific hazard increments. Writing, for cause 1 and time `t`,
//! `a_j = S(t_{j-1})`, `b_j = (F_1(t) - F_1(t_j)) / (1 - h_j)` with
//! `h_j = (d_1j + d_2j) / n_j` (`b_j = 0` when `h_j = 1`):
//!
//! ```text
//! Var F_1(t) = Σ_{t_j ≤ t} a_j² V11 - 2 a_j b_j (V11 + V12) + b_j² (V11 + V22 + 2 V12)
//! ```
//!
//! where `V` is the covariance of the two hazard increments at `t_j`
//! ([`CifVariance`]). Cause 2 swaps the roles of the indices.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Arm, Cause, Dataset, Event};

/// Covariance model of the hazard increments `(d_1/n, d_2/n)` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CifVariance {
    /// Counting-process (Aalen) plug-in: `V_ii = d_i / n²`, `V_12 = 0`.
    #[default]
    Aalen,
    /// Multinomial (Greenwood-type): `V_ii = d_i (n - d_i) / n³`,
    /// `V_12 = -d_1 d_2 / n³`.
    Delta,
}

impl CifVariance {
    fn increments(self, d1: f64, d2: f64, n: f64) -> (f64, f64, f64) {
        match self {
            CifVariance::Aalen => (d1 / (n * n), d2 / (n * n), 0.0),
            CifVariance::Delta => {
                let n3 = n * n * n;
                (d1 * (n - d1) / n3, d2 * (n - d2) / n3, -d1 * d2 / n3)
            }
        }
    }
}

/// Step functions evaluated at the distinct event times.
#[derive(Debug, Clone, PartialEq)]
pub struct CifEstimate {
    pub times: Vec<f64>,
    /// `cif[i][j]`: cumulative incidence of cause `i + 1` at `times[j]`.
    pub cif: [Vec<f64>; 2],
    pub survival: Vec<f64>,
    pub variance: [Vec<f64>; 2],
    pub at_risk: Vec<usize>,
    pub events: [Vec<usize>; 2],
}

impl CifEstimate {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last jump at or before `t`.
    fn step(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&s| s <= t).checked_sub(1)
    }

    pub fn value_at(&self, cause: Cause, t: f64) -> f64 {
        self.step(t).map_or(0.0, |j| self.cif[cause.index()][j])
    }

    pub fn variance_at(&self, cause: Cause, t: f64) -> f64 {
        self.step(t).map_or(0.0, |j| self.variance[cause.index()][j])
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        self.step(t).map_or(1.0, |j| self.survival[j])
    }
}

/// Aalen-Johansen estimate for the records of `arm` (all records when `None`),
/// with the counting-process variance.
pub fn aalen_johansen(data: &Dataset, arm: Option<Arm>) -> CifEstimate {
    aalen_johansen_with(data, arm, CifVariance::Aalen)
}

pub fn aalen_johansen_with(data: &Dataset, arm: Option<Arm>, variance: CifVariance) -> CifEstimate {
    let mut obs: Vec<(f64, Event)> = data
        .records()
        .iter()
        .filter(|r| arm.is_none_or(|a| r.arm == a))
        .map(|r| (r.time, r.event))
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut est = CifEstimate {
        times: Vec::new(),
        cif: [Vec::new(), Vec::new()],
        survival: Vec::new(),
        variance: [Vec::new(), Vec::new()],
        at_risk: Vec::new(),
        events: [Vec::new(), Vec::new()],
    };
    // Per-jump quantities for the variance sums.
    let mut s_prev_list = Vec::new();
    let mut inv_list = Vec::new();
    let mut v_list = Vec::new();

    let (mut f1, mut f2, mut s) = (0.0, 0.0, 1.0);
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let n = obs.len() - i;
        let (mut d1, mut d2) = (0usize, 0usize);
        while i < obs.len() && obs[i].0 == t {
            match obs[i].1 {
                Event::Failure(Cause::Primary) => d1 += 1,
                Event::Failure(Cause::Competing) => d2 += 1,
                Event::Censored => {}
            }
            i += 1;
        }
        if d1 + d2 == 0 {
            continue;
        }
        let nf = n as f64;
        let h = (d1 + d2) as f64 / nf;
        s_prev_list.push(s);
        f1 += s * d1 as f64 / nf;
        f2 += s * d2 as f64 / nf;
        s = if d1 + d2 == n { 0.0 } else { s * (1.0 - h) };
        inv_list.push(if d1 + d2 == n { 0.0 } else { 1.0 / (1.0 - h) });
        v_list.push(variance.increments(d1 as f64, d2 as f64, nf));
        est.times.push(t);
        est.cif[0].push(f1);
        est.cif[1].push(f2);
        est.survival.push(s);
        est.at_risk.push(n);
        est.events[0].push(d1);
        est.events[1].push(d2);
    }

    for cause in 0..2 {
        est.variance[cause] = curve_variance(&est.cif[cause], &s_prev_list, &inv_list, &v_list, cause);
    }
    est
}

/// Variance of the whole curve of one cause in a single pass.
///
/// With `X = F(t)`, `b_j = c_j X - c_j F_j` (`c_j = 1 / (1 - h_j)`), so the sum
/// expands into running sums that are independent of `t`.
fn curve_variance(f: &[f64], s_prev: &[f64], inv: &[f64], v: &[(f64, f64, f64)], cause: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    let (mut a0, mut a1, mut a2, mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..f.len() {
        let (v11, v22, v12) = if cause == 0 { v[j] } else { (v[j].1, v[j].0, v[j].2) };
        let own = v11 + v12;
        let both = v11 + v22 + 2.0 * v12;
        let (a, c, fj) = (s_prev[j], inv[j], f[j]);
        a0 += a * a * v11;
        a1 += a * c * own;
        a2 += a * c * fj * own;
        b0 += both * c * c;
        b1 += both * c * c * fj;
        b2 += both * c * c * fj * fj;
        let x = fj;
        let var = a0 - 2.0 * (x * a1 - a2) + x * x * b0 - 2.0 * x * b1 + b2;
        out[j] = var.max(0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SubjectRecord;
    use alloc::format;
    use alloc::string::String;

    fn data(rows: &[(f64, i64)]) -> Dataset {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, e))| SubjectRecord::new(&format!("s{}", i), t, Event::from_code(e).unwrap(), Arm::Control, vec![]))
            .collect();
        Dataset::new(Vec::<String>::new(), "years", records).unwrap()
    }

    /// Direct evaluation of the variance sum at every jump.
    fn direct_variance(est: &CifEstimate, kind: CifVariance, cause: usize) -> Vec<f64> {
        (0..est.len())
            .map(|k| {
                let ft = est.cif[cause][k];
                let mut s_prev = 1.0;
                let mut total = 0.0;
                for j in 0..=k {
                    let n = est.at_risk[j] as f64;
                    let (d1, d2) = (est.events[0][j] as f64, est.events[1][j] as f64);
                    let (mut v11, mut v22, v12) = kind.increments(d1, d2, n);
                    if cause == 1 {
                        core::mem::swap(&mut v11, &mut v22);
                    }
                    let h = (d1 + d2) / n;
                    let b = if h == 1.0 { 0.0 } else { (ft - est.cif[cause][j]) / (1.0 - h) };
                    let a = s_prev;
                    total += a * a * v11 - 2.0 * a * b * (v11 + v12) + b * b * (v11 + v22 + 2.0 * v12);
                    s_prev = est.survival[j];
                }
                total
            })
            .collect()
    }

    #[test]
    fn four_subject_example() {
        let est = aalen_johansen(&data(&[(1.0, 1), (2.0, 2), (3.0, 0), (4.0, 1)]), None);
        assert_eq!(est.times, [1.0, 2.0, 4.0]);
        assert!((est.value_at(Cause::Primary, 1.0) - 0.25).abs() < 1e-15);
        assert!((est.value_at(Cause::Competing, 2.0) - 0.25).abs() < 1e-15);
        assert!((est.value_at(Cause::Primary, 4.0) - 0.75).abs() < 1e-15);
        assert!((est.value_at(Cause::Primary, 4.0) + est.value_at(Cause::Competing, 4.0) - 1.0).abs() < 1e-15);
        assert_eq!(est.value_at(Cause::Primary, 0.5), 0.0);
        assert_eq!(est.survival_at(4.0), 0.0);
    }

    #[test]
    fn no_primary_events_means_zero_incidence() {
        let est = aalen_johansen(&data(&[(1.0, 2), (2.0, 0), (3.0, 2)]), None);
        assert!(est.cif[0].iter().all(|&v| v == 0.0));
        assert!(est.variance[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cause_without_censoring_is_the_ecdf() {
        let times = [0.3, 1.2, 1.2, 2.5, 3.0, 3.0, 3.0, 4.4];
        let est = aalen_johansen(&data(&times.iter().map(|&t| (t, 1)).collect::<Vec<_>>()), None);
        for (j, &t) in est.times.iter().enumerate() {
            let ecdf = times.iter().filter(|&&s| s <= t).count() as f64 / times.len() as f64;
            assert!((est.cif[0][j] - ecdf).abs() < 1e-15);
            assert!((1.0 - est.survival[j] - ecdf).abs() < 1e-15);
        }
    }

    #[test]
    fn greenwood_reduction_for_a_single_cause() {
        // One cause, delta variance: Var F = S(t)² Σ d / (n (n - d)) (Greenwood).
        let rows = [(1.0, 1), (2.0, 0), (2.5, 1), (3.0, 1), (3.0, 1), (4.0, 0), (5.0, 1), (6.0, 0)];
        let est = aalen_johansen_with(&data(&rows), None, CifVariance::Delta);
        let mut sum = 0.0;
        for j in 0..est.len() {
            let (n, d) = (est.at_risk[j] as f64, est.events[0][j] as f64);
            sum += d / (n * (n - d));
            let expected = est.survival[j] * est.survival[j] * sum;
            assert!((est.variance[0][j] - expected).abs() < 1e-14, "{} vs {}", est.variance[0][j], expected);
        }
    }

    #[test]
    fn exhaustive_small_datasets_match_hand_recursion() {
        // Every dataset of up to 5 subjects with times from {1, 2, 3} and
        // outcomes {0, 1, 2}.
        for n in 1..=5u32 {
            let cells = 9usize.pow(n);
            for code in 0..cells {
                let mut c = code;
                let rows: Vec<(f64, i64)> = (0..n)
                    .map(|_| {
                        let v = c % 9;
                        c /= 9;
                        ((v / 3 + 1) as f64, (v % 3) as i64)
                    })
                    .collect();
                let est = aalen_johansen_with(&data(&rows), None, CifVariance::Delta);
                let (mut s, mut f) = (1.0, [0.0, 0.0]);
                let mut j = 0;
                for t in [1.0, 2.0, 3.0] {
                    let n_risk = rows.iter().filter(|r| r.0 >= t).count() as f64;
                    let d = [1, 2].map(|e| rows.iter().filter(|r| r.0 == t && r.1 == e).count() as f64);
                    if d[0] + d[1] == 0.0 {
                        continue;
                    }
                    f[0] += s * d[0] / n_risk;
                    f[1] += s * d[1] / n_risk;
                    s *= 1.0 - (d[0] + d[1]) / n_risk;
                    assert_eq!(est.times[j], t);
                    assert!((est.cif[0][j] - f[0]).abs() < 1e-12);
                    assert!((est.cif[1][j] - f[1]).abs() < 1e-12);
                    assert!((est.cif[0][j] + est.cif[1][j] + est.survival[j] - 1.0).abs() < 1e-12);
                    j += 1;
                }
                assert_eq!(j, est.len());
                for kind in [CifVariance::Aalen, CifVariance::Delta] {
                    let est = aalen_johansen_with(&data(&rows), None, kind);
                    for cause in 0..2 {
                        let direct = direct_variance(&est, kind, cause);
                        for (a, b) in est.variance[cause].iter().zip(&direct) {
                            assert!((a - b.max(0.0)).abs() < 1e-12, "{:?}: {} vs {}", rows, a, b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn arm_filter_and_ties() {
        let mut records = vec![];
        for (i, (t, e, a)) in [(1.0, 1, 0), (1.0, 2, 0), (1.0, 0, 0), (2.0, 1, 1)].into_iter().enumerate() {
            records.push(SubjectRecord::new(
                &format!("s{}", i),
                t,
                Event::from_code(e).unwrap(),
                Arm::from_code(a).unwrap(),
                vec![],
            ));
        }
        let d = Dataset::new(Vec::<String>::new(), "days", records).unwrap();
        let est = aalen_johansen(&d, Some(Arm::Control));
        // Tied events share the risk set of 3, the censored subject included.
        assert_eq!(est.at_risk, [3]);
        assert!((est.cif[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((est.cif[1][0] - 1.0 / 3.0).abs() < 1e-15);
        let est = aalen_johansen(&d, Some(Arm::Treatment));
        assert_eq!(est.cif[0], [1.0]);
    }
}
