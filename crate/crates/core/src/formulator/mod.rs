//! Compile predictors into MIP constraint blocks.

mod argmax;
mod linearize;
mod relu;
mod tree;

pub use argmax::{embed_argmax, ArgmaxVars};
pub use linearize::{encode_abs_exact, encode_min2, AbsVars, LinExpr, Min2Vars};
pub use relu::{embed_relu_bigm, embed_relu_sos1, propagate_bounds, NeuronBounds, NeuronVars};
pub use tree::{embed_ensemble, embed_tree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mip::{ConsId, MipModel, ModelError, Sense, VarId, VarKind};
use crate::predictor::{Core, Head, LinearModel, NeuralNet, Predictor};

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unbounded input for big-M: input {index} has bounds [{lb}, {ub}]")]
    UnboundedInput { index: usize, lb: f64, ub: f64 },
    #[error("non-finite bound: {0}")]
    NonFiniteBound(String),
    #[error("expected {expected} {what} variables, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("argmax needs at least 2 scores, got {0}")]
    TooFewScores(usize),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReluFormulation {
    Bigm,
    Sos1,
}

impl ReluFormulation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bigm" => Some(ReluFormulation::Bigm),
            "sos1" => Some(ReluFormulation::Sos1),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReluFormulation::Bigm => "bigm",
            ReluFormulation::Sos1 => "sos1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOptions {
    pub relu_formulation: ReluFormulation,
    /// Tree split gap: left paths need `x <= θ - ε/2`, right paths `x >= θ + ε/2`.
    pub epsilon: f64,
    /// Per-input box. Intersected with the input variables' own bounds.
    pub input_box: Option<Vec<(f64, f64)>>,
    /// Prefix for every variable and constraint name created by the embedding.
    pub prefix: String,
    /// Apply the `u <= 0` and `l >= 0` shortcuts for big-M neurons.
    pub stable_shortcuts: bool,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            relu_formulation: ReluFormulation::Bigm,
            epsilon: 0.0,
            input_box: None,
            prefix: "p".into(),
            stable_shortcuts: true,
        }
    }
}

impl EmbedOptions {
    pub fn with_formulation(mut self, f: ReluFormulation) -> Self {
        self.relu_formulation = f;
        self
    }

    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_box(mut self, b: Vec<(f64, f64)>) -> Self {
        self.input_box = Some(b);
        self
    }

    fn validate(&self, input_dim: usize) -> Result<(), FormulationError> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(FormulationError::InvalidOption(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if let Some(b) = &self.input_box {
            if b.len() != input_dim {
                return Err(FormulationError::DimensionMismatch {
                    what: "input box",
                    expected: input_dim,
                    got: b.len(),
                });
            }
            for (i, &(lo, hi)) in b.iter().enumerate() {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(FormulationError::InvalidOption(format!(
                        "input box entry {i} is [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Discrete and auxiliary structure specific to the embedded core.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingDetail {
    Linear,
    /// Leaf binaries per tree, in depth-first left-first leaf order.
    Trees { leaves: Vec<Vec<VarId>> },
    /// Hidden-layer neuron variables, one vector per hidden layer.
    Net { hidden: Vec<Vec<NeuronVars>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub input_vars: Vec<VarId>,
    pub score_vars: Vec<VarId>,
    pub output_vars: Vec<VarId>,
    pub aux_vars: Vec<VarId>,
    pub constraints: Vec<ConsId>,
    pub detail: EmbeddingDetail,
    pub argmax: Option<ArgmaxVars>,
}

/// Tracks everything an embedding adds so the result can list it.
pub(crate) struct Recorder<'a> {
    pub model: &'a mut MipModel,
    pub vars: Vec<VarId>,
    pub cons: Vec<ConsId>,
}

impl<'a> Recorder<'a> {
    pub fn new(model: &'a mut MipModel) -> Self {
        Recorder {
            model,
            vars: Vec::new(),
            cons: Vec::new(),
        }
    }

    pub fn var(&mut self, kind: VarKind, lb: f64, ub: f64, name: String) -> Result<VarId, ModelError> {
        let v = self.model.add_var(kind, lb, ub, name)?;
        self.vars.push(v);
        Ok(v)
    }

    pub fn linear(
        &mut self,
        name: String,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConsId, ModelError> {
        let c = self.model.add_linear(name, terms, sense, rhs)?;
        self.cons.push(c);
        Ok(c)
    }

    pub fn indicator(
        &mut self,
        name: String,
        guard: VarId,
        active: bool,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConsId, ModelError> {
        let c = self.model.add_indicator(name, guard, active, terms, sense, rhs)?;
        self.cons.push(c);
        Ok(c)
    }

    pub fn sos1(&mut self, name: String, members: &[VarId], weights: &[f64]) -> Result<ConsId, ModelError> {
        let c = self.model.add_sos1(name, members, weights)?;
        self.cons.push(c);
        Ok(c)
    }
}

/// Effective input box: the option box intersected with variable bounds.
/// When an option box is given, the input variables are tightened to it.
fn effective_box(
    model: &mut MipModel,
    input_vars: &[VarId],
    opts: &EmbedOptions,
) -> Result<Vec<(f64, f64)>, FormulationError> {
    let mut out = Vec::with_capacity(input_vars.len());
    for (i, &v) in input_vars.iter().enumerate() {
        let var = model.var(v);
        let (mut lo, mut hi) = (var.lb, var.ub);
        if let Some(b) = &opts.input_box {
            lo = lo.max(b[i].0);
            hi = hi.min(b[i].1);
            if lo != var.lb || hi != var.ub {
                model.set_var_bounds(v, lo, hi)?;
            }
        }
        out.push((lo, hi));
    }
    Ok(out)
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), FormulationError> {
    if expected != got {
        Err(FormulationError::DimensionMismatch { what, expected, got })
    } else {
        Ok(())
    }
}

/// Embed `p` with inputs `input_vars`. Output variables are created when
/// `output_vars` is `None`.
pub fn embed_predictor(
    model: &mut MipModel,
    p: &Predictor,
    input_vars: &[VarId],
    output_vars: Option<&[VarId]>,
    opts: &EmbedOptions,
) -> Result<EmbeddingResult, FormulationError> {
    check_len("input", p.input_dim(), input_vars.len())?;
    if let Some(out) = output_vars {
        check_len("output", p.output_dim(), out.len())?;
    }
    opts.validate(p.input_dim())?;
    let boxes = effective_box(model, input_vars, opts)?;
    let argmax_head = p.head() == Head::Argmax;
    // With an argmax head the scores are always internal.
    let score_given = if argmax_head { None } else { output_vars };

    let mut rec = Recorder::new(model);
    let (score_vars, detail) = match p.core() {
        Core::Linear(lm) => (embed_linear_rec(&mut rec, lm, input_vars, score_given, &opts.prefix)?, EmbeddingDetail::Linear),
        Core::Tree(t) => {
            let (s, leaves) = tree::embed_tree_rec(&mut rec, t, input_vars, score_given, opts.epsilon, &opts.prefix)?;
            (s, EmbeddingDetail::Trees { leaves: vec![leaves] })
        }
        Core::Ensemble(e) => {
            let (s, leaves) = tree::embed_ensemble_rec(&mut rec, e, input_vars, score_given, opts.epsilon, &opts.prefix)?;
            (s, EmbeddingDetail::Trees { leaves })
        }
        Core::Net(net) => {
            let (s, hidden) = relu::embed_net_rec(&mut rec, net, input_vars, &boxes, score_given, opts)?;
            (s, EmbeddingDetail::Net { hidden })
        }
    };

    let (output, argmax) = if argmax_head {
        let given = output_vars.map(|o| o[0]);
        let am = argmax::embed_argmax_rec(&mut rec, &score_vars, true, given, &opts.prefix)?;
        (vec![am.index.expect("index requested")], Some(am))
    } else {
        (score_vars.clone(), None)
    };

    let given: Vec<VarId> = output_vars.map(|o| o.to_vec()).unwrap_or_default();
    let aux_vars = rec
        .vars
        .iter()
        .copied()
        .filter(|v| !score_vars.contains(v) && !output.contains(v) && !given.contains(v))
        .collect();
    Ok(EmbeddingResult {
        input_vars: input_vars.to_vec(),
        score_vars,
        output_vars: output,
        aux_vars,
        constraints: rec.cons,
        detail,
        argmax,
    })
}

fn make_outputs(
    rec: &mut Recorder<'_>,
    given: Option<&[VarId]>,
    bounds: &[(f64, f64)],
    prefix: &str,
) -> Result<Vec<VarId>, FormulationError> {
    match given {
        Some(g) => {
            check_len("output", bounds.len(), g.len())?;
            Ok(g.to_vec())
        }
        None => bounds
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| Ok(rec.var(VarKind::Continuous, lo, hi, format!("{prefix}_out{j}"))?))
            .collect(),
    }
}

fn embed_linear_rec(
    rec: &mut Recorder<'_>,
    lm: &LinearModel,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    prefix: &str,
) -> Result<Vec<VarId>, FormulationError> {
    let free = vec![(f64::NEG_INFINITY, f64::INFINITY); lm.bias.len()];
    let out = make_outputs(rec, out_vars, &free, prefix)?;
    for (j, row) in lm.weights.iter().enumerate() {
        check_len("input", row.len(), input_vars.len())?;
        let mut terms = vec![(out[j], 1.0)];
        terms.extend(input_vars.iter().zip(row).map(|(&v, &w)| (v, -w)));
        rec.linear(format!("{prefix}_lin{j}"), &terms, Sense::Eq, lm.bias[j])?;
    }
    Ok(out)
}

/// `out_j = Σ W[j,i] in_i + b_j` for every output.
pub fn embed_linear(
    model: &mut MipModel,
    lm: &LinearModel,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    prefix: &str,
) -> Result<EmbeddingResult, FormulationError> {
    let mut rec = Recorder::new(model);
    let out = embed_linear_rec(&mut rec, lm, input_vars, out_vars, prefix)?;
    let aux = rec.vars.iter().copied().filter(|v| !out.contains(v)).collect();
    Ok(EmbeddingResult {
        input_vars: input_vars.to_vec(),
        score_vars: out.clone(),
        output_vars: out,
        aux_vars: aux,
        constraints: rec.cons,
        detail: EmbeddingDetail::Linear,
        argmax: None,
    })
}

/// Embed a ReLU network directly, without a predictor wrapper.
pub fn embed_net(
    model: &mut MipModel,
    net: &NeuralNet,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    opts: &EmbedOptions,
) -> Result<EmbeddingResult, FormulationError> {
    let in_dim = net.layers.first().map(|l| l.in_dim()).unwrap_or(0);
    check_len("input", in_dim, input_vars.len())?;
    opts.validate(in_dim)?;
    let boxes = effective_box(model, input_vars, opts)?;
    let mut rec = Recorder::new(model);
    let (out, hidden) = relu::embed_net_rec(&mut rec, net, input_vars, &boxes, out_vars, opts)?;
    let aux = rec.vars.iter().copied().filter(|v| !out.contains(v)).collect();
    Ok(EmbeddingResult {
        input_vars: input_vars.to_vec(),
        score_vars: out.clone(),
        output_vars: out,
        aux_vars: aux,
        constraints: rec.cons,
        detail: EmbeddingDetail::Net { hidden },
        argmax: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{AffineLayer, Activation, Combine, Ensemble, TreeNode};

    fn inputs(m: &mut MipModel, n: usize, lo: f64, hi: f64) -> Vec<VarId> {
        (0..n).map(|i| m.add_continuous(lo, hi, format!("x{i}")).unwrap()).collect()
    }

    #[test]
    fn linear_embeds_one_equality_per_output() {
        let p = Predictor::new(
            Core::Linear(LinearModel { weights: vec![vec![2.0]], bias: vec![1.0] }),
            Head::Regression,
            1,
        )
        .unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 1, 0.0, 5.0);
        let r = embed_predictor(&mut m, &p, &x, None, &EmbedOptions::default()).unwrap();
        assert_eq!(m.stats().linear, 1);
        assert_eq!(r.output_vars.len(), 1);
        assert!(r.aux_vars.is_empty());
        let out = r.output_vars[0];
        assert_eq!(m.var(out).lb, f64::NEG_INFINITY);
        assert!(m.check_assignment(&[3.0, 7.0], 0.0, 0.0).unwrap().is_feasible());
        assert!(!m.check_assignment(&[3.0, 7.1], 1e-6, 1e-6).unwrap().is_feasible());
    }

    fn tiny_net() -> NeuralNet {
        NeuralNet {
            layers: vec![
                AffineLayer { weights: vec![vec![1.0], vec![-1.0]], bias: vec![0.0, 0.0], activation: Activation::Relu },
                AffineLayer { weights: vec![vec![1.0, 1.0]], bias: vec![0.0], activation: Activation::Identity },
            ],
        }
    }

    #[test]
    fn sos1_net_adds_slack_and_sos_per_neuron() {
        let p = Predictor::new(Core::Net(tiny_net()), Head::Regression, 1).unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 1, f64::NEG_INFINITY, f64::INFINITY);
        let opts = EmbedOptions::default().with_formulation(ReluFormulation::Sos1);
        let r = embed_predictor(&mut m, &p, &x, None, &opts).unwrap();
        let s = m.stats();
        assert_eq!(s.sos1, 2);
        assert_eq!(s.binary, 0);
        // 2 neurons × (y, s) + 1 output
        assert_eq!(s.continuous, 1 + 4 + 1);
        assert_eq!(r.aux_vars.len(), 4);
        assert_eq!(m.var(r.output_vars[0]).ub, f64::INFINITY);
    }

    #[test]
    fn bigm_requires_finite_box() {
        let p = Predictor::new(Core::Net(tiny_net()), Head::Regression, 1).unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 1, f64::NEG_INFINITY, f64::INFINITY);
        let err = embed_predictor(&mut m, &p, &x, None, &EmbedOptions::default()).unwrap_err();
        assert!(matches!(err, FormulationError::UnboundedInput { index: 0, .. }));
        let opts = EmbedOptions::default().with_box(vec![(-1.0, 1.0)]);
        let r = embed_predictor(&mut m, &p, &x, None, &opts).unwrap();
        assert_eq!(m.var(x[0]).lb, -1.0);
        assert_eq!(m.stats().binary, 2);
        let out = m.var(r.output_vars[0]);
        assert_eq!((out.lb, out.ub), (0.0, 2.0));
    }

    #[test]
    fn tree_embedding_counts() {
        let t = TreeNode::split(
            0,
            0.0,
            TreeNode::split(1, 0.0, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0])),
            TreeNode::split(1, 1.0, TreeNode::leaf(vec![3.0]), TreeNode::leaf(vec![4.0])),
        );
        let p = Predictor::new(Core::Tree(t), Head::Regression, 2).unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 2, -5.0, 5.0);
        let r = embed_predictor(&mut m, &p, &x, None, &EmbedOptions::default()).unwrap();
        let s = m.stats();
        assert_eq!(s.binary, 4);
        assert_eq!(s.indicator, 8);
        // sum-to-one + one output tie
        assert_eq!(s.linear, 2);
        let out = m.var(r.output_vars[0]);
        assert_eq!((out.lb, out.ub), (1.0, 4.0));
    }

    #[test]
    fn argmax_head_counts_and_index() {
        let lm = LinearModel {
            weights: vec![vec![1.0], vec![0.0], vec![-1.0]],
            bias: vec![0.0, 0.5, 0.0],
        };
        let p = Predictor::new(Core::Linear(lm), Head::Argmax, 1).unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 1, -1.0, 1.0);
        let r = embed_predictor(&mut m, &p, &x, None, &EmbedOptions::default()).unwrap();
        let am = r.argmax.as_ref().unwrap();
        assert_eq!(am.z.len(), 3);
        assert_eq!(r.output_vars, vec![am.index.unwrap()]);
        assert_eq!(m.var(r.output_vars[0]).kind, VarKind::Integer);
        let s = m.stats();
        assert_eq!(s.sos1, 3);
        assert_eq!(s.binary, 3);
        // 3 score ties, 3 argmax rows, sum, index
        assert_eq!(s.linear, 3 + 3 + 1 + 1);
    }

    #[test]
    fn empty_gbdt_is_base_offset() {
        let e = Ensemble { trees: vec![], combine: Combine::Sum, base_offset: vec![0.7] };
        let p = Predictor::new(Core::Ensemble(e), Head::Regression, 1).unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 1, 0.0, 1.0);
        let r = embed_predictor(&mut m, &p, &x, None, &EmbedOptions::default()).unwrap();
        let out = m.var(r.output_vars[0]);
        assert_eq!((out.lb, out.ub), (0.7, 0.7));
        assert!(m.check_assignment(&[0.3, 0.7], 0.0, 0.0).unwrap().is_feasible());
    }

    #[test]
    fn given_output_vars_are_used() {
        let p = Predictor::new(
            Core::Linear(LinearModel { weights: vec![vec![1.0, 1.0]], bias: vec![0.0] }),
            Head::Regression,
            2,
        )
        .unwrap();
        let mut m = MipModel::new();
        let x = inputs(&mut m, 2, 0.0, 1.0);
        let y = m.add_continuous(0.0, 10.0, "y").unwrap();
        let r = embed_predictor(&mut m, &p, &x, Some(&[y]), &EmbedOptions::default()).unwrap();
        assert_eq!(r.output_vars, vec![y]);
        assert_eq!(m.num_vars(), 3);
        let bad = embed_predictor(&mut m, &p, &x[..1], None, &EmbedOptions::default());
        assert!(matches!(bad, Err(FormulationError::DimensionMismatch { .. })));
    }
}
