use crate::mip::{MipModel, Sense, VarId, VarKind};
use crate::predictor::{Activation, NeuralNet};

use super::{make_outputs, EmbedOptions, FormulationError, Recorder, ReluFormulation};

/// Per-layer pre-activation intervals, including the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub layers: Vec<Vec<(f64, f64)>>,
}

/// Variables of one hidden neuron. `z` is the big-M binary, `s` the SOS1 slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronVars {
    pub y: VarId,
    pub z: Option<VarId>,
    pub s: Option<VarId>,
}

fn interval_affine(weights: &[Vec<f64>], bias: &[f64], boxes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    weights
        .iter()
        .zip(bias)
        .map(|(row, &b)| {
            let mut lo = b;
            let mut hi = b;
            for (&w, &(l, u)) in row.iter().zip(boxes) {
                let (a, c) = (w * l, w * u);
                lo += a.min(c);
                hi += a.max(c);
            }
            (lo, hi)
        })
        .collect()
}

/// One forward pass of interval arithmetic through `net`.
pub fn propagate_bounds(net: &NeuralNet, input_box: &[(f64, f64)]) -> Result<NeuronBounds, FormulationError> {
    for (i, &(l, u)) in input_box.iter().enumerate() {
        if !l.is_finite() || !u.is_finite() {
            return Err(FormulationError::UnboundedInput { index: i, lb: l, ub: u });
        }
    }
    let mut layers = Vec::with_capacity(net.layers.len());
    let mut cur: Vec<(f64, f64)> = input_box.to_vec();
    for layer in &net.layers {
        let pre = interval_affine(&layer.weights, &layer.bias, &cur);
        cur = match layer.activation {
            Activation::Relu => pre.iter().map(|&(l, u)| (l.max(0.0), u.max(0.0))).collect(),
            Activation::Identity => pre.clone(),
        };
        layers.push(pre);
    }
    Ok(NeuronBounds { layers })
}

fn affine_terms(lead: &[(VarId, f64)], weights: &[f64], inputs: &[VarId]) -> Vec<(VarId, f64)> {
    let mut terms = lead.to_vec();
    terms.extend(inputs.iter().zip(weights).map(|(&v, &w)| (v, -w)));
    terms
}

pub(crate) fn relu_bigm_rec(
    rec: &mut Recorder<'_>,
    pre_terms: &[(VarId, f64)],
    bias: f64,
    l: f64,
    u: f64,
    name: &str,
    shortcuts: bool,
) -> Result<NeuronVars, FormulationError> {
    if !l.is_finite() || !u.is_finite() {
        return Err(FormulationError::NonFiniteBound(format!("{name}: [{l}, {u}]")));
    }
    if l > u {
        return Err(FormulationError::InvalidOption(format!("{name}: crossed bounds [{l}, {u}]")));
    }
    let neg: Vec<(VarId, f64)> = pre_terms.iter().map(|&(v, w)| (v, -w)).collect();
    if shortcuts && u <= 0.0 {
        let y = rec.var(VarKind::Continuous, 0.0, 0.0, format!("{name}_y"))?;
        return Ok(NeuronVars { y, z: None, s: None });
    }
    if shortcuts && l >= 0.0 {
        let y = rec.var(VarKind::Continuous, l, u, format!("{name}_y"))?;
        let mut t = vec![(y, 1.0)];
        t.extend_from_slice(&neg);
        rec.linear(format!("{name}_lin"), &t, Sense::Eq, bias)?;
        return Ok(NeuronVars { y, z: None, s: None });
    }
    let (l, u) = (l.min(0.0), u.max(0.0));
    let y = rec.var(VarKind::Continuous, 0.0, u, format!("{name}_y"))?;
    let z = rec.var(VarKind::Binary, 0.0, 1.0, format!("{name}_z"))?;
    rec.linear(format!("{name}_nonneg"), &[(y, 1.0)], Sense::Ge, 0.0)?;
    let mut t = vec![(y, 1.0)];
    t.extend_from_slice(&neg);
    rec.linear(format!("{name}_ge"), &t, Sense::Ge, bias)?;
    t.push((z, -l));
    rec.linear(format!("{name}_le"), &t, Sense::Le, bias - l)?;
    rec.linear(format!("{name}_on"), &[(y, 1.0), (z, -u)], Sense::Le, 0.0)?;
    Ok(NeuronVars { y, z: Some(z), s: None })
}

pub(crate) fn relu_sos1_rec(
    rec: &mut Recorder<'_>,
    pre_terms: &[(VarId, f64)],
    bias: f64,
    name: &str,
) -> Result<NeuronVars, FormulationError> {
    let y = rec.var(VarKind::Continuous, 0.0, f64::INFINITY, format!("{name}_y"))?;
    let s = rec.var(VarKind::Continuous, 0.0, f64::INFINITY, format!("{name}_s"))?;
    let mut t = vec![(y, 1.0), (s, -1.0)];
    t.extend(pre_terms.iter().map(|&(v, w)| (v, -w)));
    rec.linear(format!("{name}_lin"), &t, Sense::Eq, bias)?;
    rec.sos1(format!("{name}_sos"), &[s, y], &[1.0, 2.0])?;
    Ok(NeuronVars { y, z: None, s: Some(s) })
}

/// Big-M ReLU `y = max(0, Σ w x + b)` for pre-activation bounds `[l, u]`.
///
/// With `shortcuts`, `u <= 0` fixes `y = 0` and `l >= 0` emits the single
/// equality. Otherwise the bounds are clamped to contain 0 and all four rows
/// are emitted.
pub fn embed_relu_bigm(
    model: &mut MipModel,
    pre_terms: &[(VarId, f64)],
    bias: f64,
    l: f64,
    u: f64,
    name: &str,
    shortcuts: bool,
) -> Result<NeuronVars, FormulationError> {
    relu_bigm_rec(&mut Recorder::new(model), pre_terms, bias, l, u, name, shortcuts)
}

/// SOS1 ReLU: `y - s = Σ w x + b`, `y, s >= 0`, `SOS1(s, y)`.
pub fn embed_relu_sos1(
    model: &mut MipModel,
    pre_terms: &[(VarId, f64)],
    bias: f64,
    name: &str,
) -> Result<NeuronVars, FormulationError> {
    relu_sos1_rec(&mut Recorder::new(model), pre_terms, bias, name)
}

pub(crate) fn embed_net_rec(
    rec: &mut Recorder<'_>,
    net: &NeuralNet,
    input_vars: &[VarId],
    boxes: &[(f64, f64)],
    out_vars: Option<&[VarId]>,
    opts: &EmbedOptions,
) -> Result<(Vec<VarId>, Vec<Vec<NeuronVars>>), FormulationError> {
    let bigm = opts.relu_formulation == ReluFormulation::Bigm;
    let bounds = if bigm { Some(propagate_bounds(net, boxes)?) } else { None };
    let prefix = &opts.prefix;
    let mut cur: Vec<VarId> = input_vars.to_vec();
    let mut hidden = Vec::new();
    let last = net.layers.len().saturating_sub(1);
    for (k, layer) in net.layers.iter().enumerate() {
        if k == last {
            let out_bounds = match &bounds {
                Some(b) => b.layers[k].clone(),
                None => vec![(f64::NEG_INFINITY, f64::INFINITY); layer.out_dim()],
            };
            let out = make_outputs(rec, out_vars, &out_bounds, prefix)?;
            for (j, row) in layer.weights.iter().enumerate() {
                let t = affine_terms(&[(out[j], 1.0)], row, &cur);
                rec.linear(format!("{prefix}_out{j}_lin"), &t, Sense::Eq, layer.bias[j])?;
            }
            return Ok((out, hidden));
        }
        let mut vars = Vec::with_capacity(layer.out_dim());
        for (j, row) in layer.weights.iter().enumerate() {
            let name = format!("{prefix}_l{k}_n{j}");
            let pre: Vec<(VarId, f64)> = cur.iter().copied().zip(row.iter().copied()).collect();
            let nv = match layer.activation {
                Activation::Relu => match &bounds {
                    Some(b) => {
                        let (l, u) = b.layers[k][j];
                        relu_bigm_rec(rec, &pre, layer.bias[j], l, u, &name, opts.stable_shortcuts)?
                    }
                    None => relu_sos1_rec(rec, &pre, layer.bias[j], &name)?,
                },
                Activation::Identity => {
                    let (l, u) = bounds
                        .as_ref()
                        .map(|b| b.layers[k][j])
                        .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                    let y = rec.var(VarKind::Continuous, l, u, format!("{name}_y"))?;
                    let t = affine_terms(&[(y, 1.0)], row, &cur);
                    rec.linear(format!("{name}_lin"), &t, Sense::Eq, layer.bias[j])?;
                    NeuronVars { y, z: None, s: None }
                }
            };
            vars.push(nv);
        }
        cur = vars.iter().map(|n| n.y).collect();
        hidden.push(vars);
    }
    // A net without layers is rejected by predictor validation.
    Err(FormulationError::InvalidOption("network has no layers".into()))
}
