use proptest::prelude::*;

use ppos_core::analysis::{
    aalen_johansen, aalen_johansen_with, AnalysisMethod, AnalysisSpec, CifVariance, Criterion, DecisionRule, EvalTime,
};
use ppos_core::dataset::{Arm, Cause, CensoringRule, Dataset, Event, Horizon, SubjectRecord};
use ppos_core::exec::{Executor, Sequential};
use ppos_core::hazard::ArmMode;
use ppos_core::model::{FamilySpec, ModelSpec, StratumSpec};
use ppos_core::ppos::{run_ppos, PposConfig};
use ppos_core::prior::{LevelPrior, Prior};
use ppos_core::sampler::Kernel;
use ppos_core::synthetic::{generate_synthetic, SyntheticSpec, TruthHazard, TruthStratum};

/// Evaluates the work items last to first.
struct Reversed;

impl Executor for Reversed {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<(usize, T)> = (0..n).rev().map(|i| (i, f(i))).collect();
        out.reverse();
        out.into_iter().map(|(_, t)| t).collect()
    }
}

fn interim() -> Dataset {
    let truth = |cause, rates: Vec<f64>| TruthStratum {
        cause,
        arm: None,
        covariates: vec![],
        coefficients: vec![],
        hazard: TruthHazard::Piecewise { knots: vec![1.0], rates },
    };
    generate_synthetic(&SyntheticSpec {
        seed: 31,
        time_unit: "years".into(),
        arm_sizes: [150, 150],
        covariates: vec![],
        truth: vec![truth(Cause::Primary, vec![0.2, 0.3]), truth(Cause::Competing, vec![0.1, 0.1])],
        entry_span: 2.0,
        interim_cutoff: Some(2.5),
        max_follow_up: None,
    })
    .unwrap()
}

fn pch(cause: Cause, arm: Arm) -> StratumSpec {
    StratumSpec {
        cause,
        arm: Some(arm),
        covariates: vec![],
        coefficient_priors: vec![],
        arm_prior: None,
        family: FamilySpec::Piecewise {
            knots: vec![1.0],
            levels: LevelPrior::RandomWalk {
                first: Prior::Normal { mean: 0.0, sd: 10.0 },
                tau_prior: Prior::Exponential { rate: 1.0 },
            },
        },
    }
}

fn config() -> PposConfig {
    let model = ModelSpec {
        arm_mode: ArmMode::Stratified,
        strata: [Cause::Primary, Cause::Competing]
            .into_iter()
            .flat_map(|c| Arm::BOTH.map(|a| pch(c, a)))
            .collect(),
    };
    let analysis = AnalysisSpec {
        methods: vec![AnalysisMethod::RiskRatio {
            name: "rr".into(),
            eval_time: EvalTime::Horizon,
            variance: CifVariance::Aalen,
        }],
        rule: DecisionRule::single(Criterion::PValue {
            statistic: "rr.p_value".into(),
            alpha: 0.2,
        }),
    };
    let mut c = PposConfig::new(model, analysis);
    c.k = 30;
    c.master_seed = 5;
    c.sampler.kernel = Kernel::Hmc { path_length: 1.5 };
    c.censoring = CensoringRule::Administrative(Horizon::Calendar(4.0));
    c.curve_grid = Some(vec![1.0, 2.0, 3.0]);
    c
}

#[test]
fn ppos_does_not_depend_on_evaluation_order() {
    let data = interim();
    let a = run_ppos(&data, &config(), &Sequential).unwrap();
    let b = run_ppos(&data, &config(), &Reversed).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.k_effective + a.n_invalid, 30);
    let successes = a.replicates.iter().filter(|r| r.valid && r.success).count();
    assert_eq!(a.ppos, successes as f64 / a.k_effective as f64);
}

#[test]
fn predicted_trials_extend_the_interim_follow_up() {
    let data = interim();
    let r = run_ppos(&data, &config(), &Sequential).unwrap();
    for rep in &r.replicates {
        let curves = rep.curves.as_ref().unwrap();
        for arm in curves {
            assert!(arm.windows(2).all(|w| w[1] >= w[0]));
            assert!(arm.iter().all(|f| (0.0..=1.0).contains(f)));
        }
    }
}

fn dataset(rows: &[(f64, u8, bool)]) -> Dataset {
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, &(t, e, arm))| {
            let arm = if arm { Arm::Treatment } else { Arm::Control };
            SubjectRecord::new(&format!("s{}", i), t, Event::from_code(e as i64).unwrap(), arm, vec![])
        })
        .collect();
    Dataset::new(vec![], "days", records).unwrap()
}

proptest! {
    #[test]
    fn aalen_johansen_is_a_distribution(rows in proptest::collection::vec((0.0f64..10.0, 0u8..3, any::<bool>()), 1..80)) {
        let data = dataset(&rows);
        for variance in [CifVariance::Aalen, CifVariance::Delta] {
            let est = aalen_johansen_with(&data, None, variance);
            for j in 0..est.len() {
                let total = est.cif[0][j] + est.cif[1][j] + est.survival[j];
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(est.variance[0][j] >= -1e-15 && est.variance[1][j] >= -1e-15);
                if j > 0 {
                    prop_assert!(est.cif[0][j] >= est.cif[0][j - 1]);
                    prop_assert!(est.cif[1][j] >= est.cif[1][j - 1]);
                }
            }
        }
    }

    #[test]
    fn arm_estimates_use_only_their_arm(rows in proptest::collection::vec((0.0f64..10.0, 0u8..3, any::<bool>()), 1..60)) {
        let data = dataset(&rows);
        for arm in Arm::BOTH {
            prop_assert_eq!(aalen_johansen(&data, Some(arm)), aalen_johansen(&data.filter_arm(arm), None));
        }
    }
}
