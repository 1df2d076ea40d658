mod common;

use proptest::prelude::*;

use surromip::formulator::{embed_predictor, EmbedOptions};
use surromip::mip::{MipModel, ObjSense, Sense};
use surromip::predictor::{Core, Head};
use surromip::solve::{bb_solve, SolveLimits, SolveStatus};
use surromip::verify::{check_exactness, oracle_enumerate, EmbeddedPredictor};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exactness_holds_for_regression((p, bx, kind) in common::predictor(Head::Regression), seed in any::<u64>()) {
        let opts = EmbedOptions::default().with_formulation(kind.relu_formulation()).with_box(bx);
        let r = check_exactness(&p, &opts, 10, seed).unwrap();
        prop_assert!(r.passed(), "{}", r);
    }

    #[test]
    fn exactness_holds_for_argmax((p, bx, kind) in common::predictor(Head::Argmax), seed in any::<u64>()) {
        let opts = EmbedOptions::default().with_formulation(kind.relu_formulation()).with_box(bx);
        let r = check_exactness(&p, &opts, 10, seed).unwrap();
        prop_assert!(r.passed(), "{}", r);
    }

    #[test]
    fn oracle_agrees_with_branch_and_bound(
        (p, bx, kind) in common::predictor(Head::Regression),
        cut in prop::collection::vec(-1.0f64..1.0, 3),
        rhs in -1.0f64..1.0,
        maximize in any::<bool>(),
    ) {
        let small = match p.core() {
            Core::Net(n) => n.hidden_neurons() <= 8,
            Core::Ensemble(e) => e.trees.iter().map(|t| t.num_leaves()).product::<usize>() <= 512,
            _ => true,
        };
        prop_assume!(small);
        let mut m = MipModel::new();
        let xs: Vec<_> = bx.iter().enumerate().map(|(i, &(lo, hi))| m.add_continuous(lo, hi, format!("x{i}")).unwrap()).collect();
        let e = embed_predictor(&mut m, &p, &xs, None, &EmbedOptions::default().with_formulation(kind.relu_formulation()).with_box(bx.clone())).unwrap();
        let terms: Vec<_> = xs.iter().copied().zip(cut.iter().copied()).collect();
        m.add_linear("cut", &terms, Sense::Le, rhs).unwrap();
        let sense = if maximize { ObjSense::Maximize } else { ObjSense::Minimize };
        let mut obj = vec![(e.output_vars[0], 1.0)];
        obj.push((xs[0], 0.25));
        m.set_objective(sense, &obj, 0.0).unwrap();
        let blocks = [EmbeddedPredictor { predictor: &p, embedding: &e, epsilon: 0.0 }];
        let oracle = oracle_enumerate(&m, &blocks, 1 << 16).unwrap();
        let bb = bb_solve(&m, &SolveLimits::default());
        prop_assert_eq!(oracle.status, bb.status);
        if bb.status == SolveStatus::Optimal {
            prop_assert!((oracle.objective - bb.objective).abs() <= 1e-6 * bb.objective.abs().max(1.0), "oracle {} bb {}", oracle.objective, bb.objective);
        }
    }
}
