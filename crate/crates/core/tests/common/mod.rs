#![allow(dead_code)]

use proptest::prelude::*;

use surromip::predictor::{Head, Predictor};
use surromip::surrogatelib::{fabricate_predictor, FabricateSpec, PredictorKind};

pub fn kind() -> impl Strategy<Value = PredictorKind> {
    prop::sample::select(PredictorKind::ALL.to_vec())
}

pub fn params_for(kind: PredictorKind, a: usize, b: usize) -> Vec<usize> {
    match kind {
        PredictorKind::Linear => vec![],
        PredictorKind::Dt => vec![1 + a % 4],
        PredictorKind::Rf | PredictorKind::Gbdt => vec![1 + a % 4, 1 + b % 3],
        PredictorKind::MlpSos | PredictorKind::MlpBigm => vec![1 + a % 2, 1 + b % 6],
    }
}

/// A fabricated predictor together with its input box.
pub fn predictor(head: Head) -> impl Strategy<Value = (Predictor, Vec<(f64, f64)>, PredictorKind)> {
    (kind(), 0usize..12, 0usize..12, 1usize..=3, any::<u64>(), -2.0f64..1.0, 0.5f64..3.0).prop_map(
        move |(k, a, b, n, seed, lo, w)| {
            let bx: Vec<(f64, f64)> = (0..n).map(|i| (lo + 0.1 * i as f64, lo + 0.1 * i as f64 + w)).collect();
            let mut spec = FabricateSpec::regression(bx.clone(), (-3.0, 3.0));
            if head == Head::Argmax {
                spec.outputs = 3;
                spec.head = Head::Argmax;
            }
            let p = fabricate_predictor(k, &params_for(k, a, b), &spec, seed).expect("valid fabrication");
            (p, bx, k)
        },
    )
}

/// Point inside `bx` from unit-interval coordinates.
pub fn point_in(bx: &[(f64, f64)], t: &[f64]) -> Vec<f64> {
    bx.iter().zip(t.iter().cycle()).map(|(&(lo, hi), &u)| lo + (hi - lo) * u).collect()
}
