//! Risk-ratio test on cumulative incidences of the primary cause.

use num_traits::Float;

use super::aalen_johansen::CifEstimate;
use crate::dataset::Cause;
use crate::special::two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRatioResult {
    pub rr: f64,
    pub log_rr: f64,
    /// Asymptotic standard error of `log_rr`.
    pub ase_log_rr: f64,
    /// `2 Φ(-|log_rr / ase_log_rr|)`.
    pub p_value: f64,
    pub eval_time: f64,
    pub success: bool,
    /// A zero incidence (or zero variance) left the ratio undefined; the
    /// result counts as a failure with `p_value = 1`.
    pub degenerate: bool,
}

/// Compares `F₁` of the exposed and referent groups at `t_eval`.
///
/// `Var(log RR) = Var F₁ᵉ / (F₁ᵉ)² + Var F₁ʳ / (F₁ʳ)²`, the groups being
/// independent; success is `p ≤ alpha`.
pub fn risk_ratio_test(exposed: &CifEstimate, referent: &CifEstimate, t_eval: f64, alpha: f64) -> RiskRatioResult {
    let fe = exposed.value_at(Cause::Primary, t_eval);
    let fr = referent.value_at(Cause::Primary, t_eval);
    let var = exposed.variance_at(Cause::Primary, t_eval) / (fe * fe)
        + referent.variance_at(Cause::Primary, t_eval) / (fr * fr);
    from_estimates(fe, fr, var.sqrt(), t_eval, alpha)
}

/// The test from the two incidences and the standard error of their log ratio.
pub fn from_estimates(f_exposed: f64, f_referent: f64, ase_log_rr: f64, eval_time: f64, alpha: f64) -> RiskRatioResult {
    let rr = f_exposed / f_referent;
    let log_rr = rr.ln();
    let degenerate = !(f_exposed > 0.0 && f_referent > 0.0) || !(ase_log_rr > 0.0 && ase_log_rr.is_finite());
    let p_value = if degenerate { 1.0 } else { two_sided_p(log_rr / ase_log_rr) };
    RiskRatioResult {
        rr,
        log_rr,
        ase_log_rr,
        p_value,
        eval_time,
        success: !degenerate && p_value <= alpha,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interim_risks_give_the_reported_ratio() {
        let r = from_estimates(8.6e-4, 13.2e-4, 0.2, 6.7, 0.035);
        assert!((r.rr - 0.6515).abs() < 1e-4);
        assert!((r.rr - 0.66).abs() < 0.01);
    }

    #[test]
    fn null_ratio_has_unit_p_value() {
        for ase in [1e-3, 0.2, 5.0] {
            let r = from_estimates(0.1, 0.1, ase, 1.0, 0.035);
            assert_eq!(r.p_value, 1.0);
            assert!(!r.success);
        }
    }

    #[test]
    fn p_value_from_log_ratio_and_ase() {
        let f_r = 0.01;
        let f_e = f_r * (-0.4155f64).exp();
        let r = from_estimates(f_e, f_r, 0.2023, 1.0, 0.035);
        // Oracle: 2 (1 - Φ(2.0539)) ≈ 0.03999.
        assert!((r.p_value - 0.040).abs() < 5e-4, "{}", r.p_value);
        assert!(!r.success);
        assert!(from_estimates(f_e, f_r, 0.2023, 1.0, 0.045).success);
    }

    #[test]
    fn zero_incidence_is_degenerate() {
        let r = from_estimates(0.0, 0.1, f64::INFINITY, 1.0, 0.035);
        assert!(r.degenerate && !r.success && r.p_value == 1.0);
        let r = from_estimates(0.1, 0.0, f64::INFINITY, 1.0, 0.035);
        assert!(r.degenerate && !r.success);
    }
}
