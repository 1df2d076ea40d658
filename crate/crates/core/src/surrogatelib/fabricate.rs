//! Seeded synthetic predictors standing in for trained ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formulator::{propagate_bounds, FormulationError};
use crate::predictor::{
    Activation, AffineLayer, Combine, Core, Ensemble, Head, LinearModel, NeuralNet, Predictor, TreeNode,
};

use super::{PredictorKind, SurrogateError};

/// Shape of a predictor to fabricate.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricateSpec {
    /// Raw feature box. Thresholds are drawn inside it and nets see it rescaled to `[-1, 1]`.
    pub input_box: Vec<(f64, f64)>,
    pub outputs: usize,
    /// Leaf values are drawn from here; affine outputs are centred on it.
    pub output_range: (f64, f64),
    pub head: Head,
}

impl FabricateSpec {
    pub fn regression(input_box: Vec<(f64, f64)>, output_range: (f64, f64)) -> Self {
        FabricateSpec { input_box, outputs: 1, output_range, head: Head::Regression }
    }
}

pub fn fabricate_predictor(
    kind: PredictorKind,
    params: &[usize],
    spec: &FabricateSpec,
    seed: u64,
) -> Result<Predictor, SurrogateError> {
    fabricate_with(kind, params, spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn fabricate_with(
    kind: PredictorKind,
    params: &[usize],
    spec: &FabricateSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Predictor, SurrogateError> {
    kind.check_params(params)?;
    let n = spec.input_box.len();
    if n == 0 || spec.outputs == 0 {
        return Err(SurrogateError::InvalidRecipe("predictor needs inputs and outputs".into()));
    }
    let (lo, hi) = spec.output_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SurrogateError::InvalidRecipe(format!("bad output range [{lo}, {hi}]")));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let core = match kind {
        PredictorKind::Linear => {
            let layer = unit_layer(rng, n, spec.outputs, Activation::Identity);
            let layer = scale_output(fold_input(layer, &spec.input_box), mid, half);
            Core::Linear(LinearModel { weights: layer.weights, bias: layer.bias })
        }
        PredictorKind::Dt => Core::Tree(grow(rng, &spec.input_box, params[0], spec.outputs, (lo, hi))),
        PredictorKind::Rf => Core::Ensemble(Ensemble {
            trees: (0..params[0])
                .map(|_| grow(rng, &spec.input_box, params[1], spec.outputs, (lo, hi)))
                .collect(),
            combine: Combine::Mean,
            base_offset: vec![0.0; spec.outputs],
        }),
        PredictorKind::Gbdt => {
            let t = params[0].max(1) as f64;
            let step = (-half / t, half / t);
            Core::Ensemble(Ensemble {
                trees: (0..params[0]).map(|_| grow(rng, &spec.input_box, params[1], spec.outputs, step)).collect(),
                combine: Combine::Sum,
                base_offset: vec![mid; spec.outputs],
            })
        }
        PredictorKind::MlpSos | PredictorKind::MlpBigm => {
            let (depth, width) = (params[0], params[1]);
            let mut layers = Vec::with_capacity(depth + 1);
            let mut fan_in = n;
            for _ in 0..depth {
                layers.push(unit_layer(rng, fan_in, width, Activation::Relu));
                fan_in = width;
            }
            layers.push(unit_layer(rng, fan_in, spec.outputs, Activation::Identity));
            let first = layers.remove(0);
            layers.insert(0, fold_input(first, &spec.input_box));
            let last = layers.pop().expect("output layer");
            layers.push(scale_output(last, mid, half));
            Core::Net(NeuralNet { layers })
        }
    };
    Ok(Predictor::new(core, spec.head, n)?)
}

/// Weights and biases uniform in `[-1, 1] / sqrt(fan_in)`.
fn unit_layer(rng: &mut ChaCha8Rng, fan_in: usize, out: usize, activation: Activation) -> AffineLayer {
    let s = 1.0 / (fan_in as f64).sqrt();
    let weights = (0..out)
        .map(|_| (0..fan_in).map(|_| rng.gen_range(-s..=s)).collect())
        .collect();
    let bias = (0..out).map(|_| rng.gen_range(-s..=s)).collect();
    AffineLayer { weights, bias, activation }
}

/// Rewrite a layer acting on `t = 2 (x - lo) / (hi - lo) - 1` as one acting on `x`.
fn fold_input(mut layer: AffineLayer, input_box: &[(f64, f64)]) -> AffineLayer {
    for (row, b) in layer.weights.iter_mut().zip(layer.bias.iter_mut()) {
        for (w, &(lo, hi)) in row.iter_mut().zip(input_box) {
            let width = hi - lo;
            if width > 0.0 {
                *b -= *w * (2.0 * lo / width + 1.0);
                *w *= 2.0 / width;
            } else {
                *w = 0.0;
            }
        }
    }
    layer
}

fn scale_output(mut layer: AffineLayer, mid: f64, half: f64) -> AffineLayer {
    for (row, b) in layer.weights.iter_mut().zip(layer.bias.iter_mut()) {
        row.iter_mut().for_each(|w| *w *= half);
        *b = *b * half + mid;
    }
    layer
}

/// Full tree of the given depth; thresholds split the current cell, so every leaf is reachable.
fn grow(rng: &mut ChaCha8Rng, cell: &[(f64, f64)], depth: usize, outputs: usize, range: (f64, f64)) -> TreeNode {
    let open: Vec<usize> = (0..cell.len()).filter(|&i| cell[i].1 > cell[i].0).collect();
    if depth == 0 || open.is_empty() {
        let values = (0..outputs)
            .map(|_| if range.1 > range.0 { rng.gen_range(range.0..=range.1) } else { range.0 })
            .collect();
        return TreeNode::leaf(values);
    }
    let f = open[rng.gen_range(0..open.len())];
    let (lo, hi) = cell[f];
    let theta = lo + (hi - lo) * rng.gen_range(0.1..0.9);
    let mut left = cell.to_vec();
    left[f].1 = theta;
    let mut right = cell.to_vec();
    right[f].0 = theta;
    TreeNode::split(
        f,
        theta,
        grow(rng, &left, depth - 1, outputs, range),
        grow(rng, &right, depth - 1, outputs, range),
    )
}

/// Outer bounds on every score of `p` over `input_box`.
pub fn score_bounds(p: &Predictor, input_box: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, FormulationError> {
    fn tree_range(t: &TreeNode) -> Vec<(f64, f64)> {
        let leaves = t.leaves();
        let dim = leaves.first().map(|l| l.len()).unwrap_or(0);
        (0..dim)
            .map(|j| {
                leaves
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l[j]), b.max(l[j])))
            })
            .collect()
    }
    Ok(match p.core() {
        Core::Linear(lm) => {
            let net = NeuralNet {
                layers: vec![AffineLayer {
                    weights: lm.weights.clone(),
                    bias: lm.bias.clone(),
                    activation: Activation::Identity,
                }],
            };
            propagate_bounds(&net, input_box)?.layers.pop().unwrap_or_default()
        }
        Core::Tree(t) => tree_range(t),
        Core::Ensemble(e) => {
            let w = e.tree_weight();
            let mut out: Vec<(f64, f64)> = e.base_offset.iter().map(|&b| (b, b)).collect();
            for t in &e.trees {
                for (o, (a, b)) in out.iter_mut().zip(tree_range(t)) {
                    o.0 += w * a;
                    o.1 += w * b;
                }
            }
            out
        }
        Core::Net(net) => propagate_bounds(net, input_box)?.layers.pop().unwrap_or_default(),
    })
}
