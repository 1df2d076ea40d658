//! Framework-neutral trained predictors.
//!
//! A [`Predictor`] couples a scoring core (linear model, single tree, tree
//! ensemble or ReLU network) with an output head. The forward evaluator in
//! this module is the ground truth every MIP encoding is checked against.
//!
//! Predictors are read from and written to a small JSON interchange format:
//!
//! ```text
//! {"kind": "linear" | "tree" | "forest" | "gbdt" | "neural_net",
//!  "head": "regression" | "argmax",
//!  "input_dim": 3,
//!  ... payload ...}
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("cannot read predictor file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed predictor file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unsupported activation `{name}` in `{field}` (only relu and identity can be embedded)")]
    UnsupportedActivation { field: String, name: String },
    #[error("dimension mismatch: expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> PredictorError {
    PredictorError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn parse(name: &str, field: &str) -> Result<Self, PredictorError> {
        match name {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            "sigmoid" | "tanh" | "softmax" | "softplus" => {
                Err(PredictorError::UnsupportedActivation {
                    field: field.to_string(),
                    name: name.to_string(),
                })
            }
            other => Err(invalid(field, format!("unknown activation `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// One fully connected layer: `activation(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    /// Row-major, `out_dim × in_dim`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl AffineLayer {
    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Pre-activation values `W x + b`.
    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    fn validate(&self, field: &str, in_dim: usize) -> Result<(), PredictorError> {
        if self.weights.len() != self.bias.len() {
            return Err(invalid(
                format!("{field}.bias"),
                format!(
                    "length {} does not match {} weight rows",
                    self.bias.len(),
                    self.weights.len()
                ),
            ));
        }
        if self.bias.is_empty() {
            return Err(invalid(format!("{field}.weights"), "layer has no outputs"));
        }
        for (r, row) in self.weights.iter().enumerate() {
            if row.len() != in_dim {
                return Err(invalid(
                    format!("{field}.weights[{r}]"),
                    format!("expected {in_dim} columns, got {}", row.len()),
                ));
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(invalid(format!("{field}.weights[{r}]"), "non-finite entry"));
            }
        }
        if self.bias.iter().any(|b| !b.is_finite()) {
            return Err(invalid(format!("{field}.bias"), "non-finite entry"));
        }
        Ok(())
    }
}

/// Feed-forward network; the last layer is always an identity layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    pub layers: Vec<AffineLayer>,
}

/// Values of one layer during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

impl NeuralNet {
    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, AffineLayer::out_dim)
    }

    pub fn hidden_neurons(&self) -> usize {
        self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(AffineLayer::out_dim)
            .sum()
    }

    /// Forward pass keeping every layer's pre- and post-activation values.
    pub fn forward_trace(&self, x: &[f64]) -> Vec<LayerTrace> {
        let mut current = x.to_vec();
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let pre = layer.pre_activation(&current);
            let post: Vec<f64> = pre.iter().map(|&v| layer.activation.apply(v)).collect();
            current = post.clone();
            trace.push(LayerTrace { pre, post });
        }
        trace
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut current = x.to_vec();
        for layer in &self.layers {
            current = layer
                .pre_activation(&current)
                .into_iter()
                .map(|v| layer.activation.apply(v))
                .collect();
        }
        current
    }

    fn validate(&self, input_dim: usize) -> Result<(), PredictorError> {
        if self.layers.is_empty() {
            return Err(invalid("layers", "network has no layers"));
        }
        let mut in_dim = input_dim;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.validate(&format!("layers[{k}]"), in_dim)?;
            in_dim = layer.out_dim();
        }
        let last = self.layers.len() - 1;
        if self.layers[last].activation != Activation::Identity {
            return Err(invalid(
                format!("layers[{last}].activation"),
                "final layer must use the identity activation",
            ));
        }
        Ok(())
    }
}

/// Binary decision tree. Inputs with `x[feature] <= threshold` descend left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Vec<f64>),
}

/// One branch on a root-to-leaf path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    /// `true` for the `<=` branch.
    pub left: bool,
}

impl TreeNode {
    pub fn split(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn leaf(values: Vec<f64>) -> Self {
        TreeNode::Leaf(values)
    }

    /// Leaf values in depth-first, left-first order.
    pub fn leaves(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        self.for_each_leaf(&mut Vec::new(), &mut |_, v| out.push(v));
        out
    }

    /// `(path, values)` for every leaf, in the same order as [`TreeNode::leaves`].
    pub fn leaf_paths(&self) -> Vec<(Vec<PathStep>, &[f64])> {
        let mut out = Vec::new();
        self.for_each_leaf(&mut Vec::new(), &mut |p, v| out.push((p.to_vec(), v)));
        out
    }

    fn for_each_leaf<'a>(
        &'a self,
        path: &mut Vec<PathStep>,
        visit: &mut dyn FnMut(&[PathStep], &'a [f64]),
    ) {
        match self {
            TreeNode::Leaf(v) => visit(path, v),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                path.push(PathStep {
                    feature: *feature,
                    threshold: *threshold,
                    left: true,
                });
                left.for_each_leaf(path, visit);
                path.pop();
                path.push(PathStep {
                    feature: *feature,
                    threshold: *threshold,
                    left: false,
                });
                right.for_each_leaf(path, visit);
                path.pop();
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Index (in [`TreeNode::leaves`] order) of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = self;
        let mut offset = 0;
        loop {
            match node {
                TreeNode::Leaf(_) => return offset,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if x[*feature] <= *threshold {
                        node = left;
                    } else {
                        offset += left.num_leaves();
                        node = right;
                    }
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    /// Every split as `(feature, threshold)`.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = node
            {
                out.push((*feature, *threshold));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Output dimension, or an error if leaves disagree.
    fn validate(&self, field: &str, input_dim: usize) -> Result<usize, PredictorError> {
        match self {
            TreeNode::Leaf(v) => {
                if v.is_empty() {
                    return Err(invalid(format!("{field}.leaf"), "empty leaf"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(format!("{field}.leaf"), "non-finite leaf value"));
                }
                Ok(v.len())
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= input_dim {
                    return Err(invalid(
                        format!("{field}.split.feature"),
                        format!("feature {feature} out of range for input_dim {input_dim}"),
                    ));
                }
                if !threshold.is_finite() {
                    return Err(invalid(format!("{field}.split.threshold"), "non-finite"));
                }
                let l = left.validate(&format!("{field}.split.left"), input_dim)?;
                let r = right.validate(&format!("{field}.split.right"), input_dim)?;
                if l != r {
                    return Err(invalid(
                        format!("{field}.split"),
                        format!("leaf dimensions differ ({l} vs {r})"),
                    ));
                }
                Ok(l)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Sum,
    Mean,
}

/// Sum- or mean-combined trees plus a constant offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub trees: Vec<TreeNode>,
    pub combine: Combine,
    pub base_offset: Vec<f64>,
}

impl Ensemble {
    /// Scale applied to every tree's output.
    pub fn tree_weight(&self) -> f64 {
        match self.combine {
            Combine::Sum => 1.0,
            Combine::Mean => 1.0 / self.trees.len() as f64,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let w = self.tree_weight();
        let mut out = self.base_offset.clone();
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.eval(x)) {
                *o += w * v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Core {
    Linear(LinearModel),
    Tree(TreeNode),
    Ensemble(Ensemble),
    Net(NeuralNet),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Regression,
    Argmax,
}

/// A validated predictor. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    core: Core,
    head: Head,
    input_dim: usize,
    score_dim: usize,
}

impl Predictor {
    pub fn new(core: Core, head: Head, input_dim: usize) -> Result<Self, PredictorError> {
        if input_dim == 0 {
            return Err(invalid("input_dim", "must be positive"));
        }
        let score_dim = match &core {
            Core::Linear(lm) => {
                let layer = AffineLayer {
                    weights: lm.weights.clone(),
                    bias: lm.bias.clone(),
                    activation: Activation::Identity,
                };
                layer.validate("linear", input_dim).map_err(|e| match e {
                    PredictorError::Validation { field, message } => PredictorError::Validation {
                        field: field.trim_start_matches("linear.").to_string(),
                        message,
                    },
                    other => other,
                })?;
                lm.bias.len()
            }
            Core::Tree(t) => t.validate("tree", input_dim)?,
            Core::Ensemble(e) => {
                if e.base_offset.is_empty() {
                    return Err(invalid("base_offset", "must have at least one entry"));
                }
                if e.base_offset.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("base_offset", "non-finite entry"));
                }
                if e.combine == Combine::Mean && e.trees.is_empty() {
                    return Err(invalid("trees", "mean combination needs at least one tree"));
                }
                for (k, t) in e.trees.iter().enumerate() {
                    let d = t.validate(&format!("trees[{k}]"), input_dim)?;
                    if d != e.base_offset.len() {
                        return Err(invalid(
                            format!("trees[{k}]"),
                            format!(
                                "leaf dimension {d} does not match base_offset length {}",
                                e.base_offset.len()
                            ),
                        ));
                    }
                }
                e.base_offset.len()
            }
            Core::Net(net) => {
                net.validate(input_dim)?;
                net.out_dim()
            }
        };
        if head == Head::Argmax && score_dim < 2 {
            return Err(invalid(
                "head",
                format!("argmax head needs at least 2 scores, core produces {score_dim}"),
            ));
        }
        Ok(Predictor {
            core,
            head,
            input_dim,
            score_dim,
        })
    }

    pub fn core(&self) -> &Core {
        &self.core
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn score_dim(&self) -> usize {
        self.score_dim
    }

    pub fn output_dim(&self) -> usize {
        match self.head {
            Head::Regression => self.score_dim,
            Head::Argmax => 1,
        }
    }

    /// `(input_dim, score_dim, output_dim)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.input_dim, self.score_dim, self.output_dim())
    }

    fn check_len(&self, x: &[f64]) -> Result<(), PredictorError> {
        if x.len() != self.input_dim {
            return Err(PredictorError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-head scores.
    pub fn score_eval(&self, x: &[f64]) -> Result<Vec<f64>, PredictorError> {
        self.check_len(x)?;
        Ok(match &self.core {
            Core::Linear(lm) => lm.eval(x),
            Core::Tree(t) => t.eval(x).to_vec(),
            Core::Ensemble(e) => e.eval(x),
            Core::Net(n) => n.forward(x),
        })
    }

    /// Predictor output. Argmax heads return the class index as a single value.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, PredictorError> {
        let scores = self.score_eval(x)?;
        Ok(match self.head {
            Head::Regression => scores,
            Head::Argmax => vec![argmax(&scores) as f64],
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.core {
            Core::Linear(_) => "linear",
            Core::Tree(_) => "tree",
            Core::Ensemble(e) if e.combine == Combine::Mean => "forest",
            Core::Ensemble(_) => "gbdt",
            Core::Net(_) => "neural_net",
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PredictorError> {
        let raw: RawPredictor = serde_json::from_str(text)?;
        raw.into_predictor()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawPredictor::from(self)).expect("predictor serializes")
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, s, o) = self.dims();
        write!(f, "{} predictor ({i} inputs, {s} scores, {o} outputs)", self.kind_name())
    }
}

/// Smallest index attaining the maximum.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = j;
        }
    }
    best
}

pub fn load_predictor(path: impl AsRef<Path>) -> Result<Predictor, PredictorError> {
    let text = std::fs::read_to_string(path)?;
    Predictor::from_json(&text)
}

// --- interchange format -------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictor {
    kind: String,
    #[serde(default = "default_head")]
    head: String,
    input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<RawNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<RawNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    combine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<RawLayer>>,
}

fn default_head() -> String {
    "regression".to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum RawNode {
    Split(RawSplit),
    Leaf(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    feature: usize,
    threshold: f64,
    left: Box<RawNode>,
    right: Box<RawNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

fn required<T>(v: Option<T>, field: &str, kind: &str) -> Result<T, PredictorError> {
    v.ok_or_else(|| invalid(field, format!("required for kind `{kind}`")))
}

impl RawNode {
    fn into_node(self) -> TreeNode {
        match self {
            RawNode::Leaf(v) => TreeNode::Leaf(v),
            RawNode::Split(s) => TreeNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(s.left.into_node()),
                right: Box::new(s.right.into_node()),
            },
        }
    }

    fn from_node(node: &TreeNode) -> Self {
        match node {
            TreeNode::Leaf(v) => RawNode::Leaf(v.clone()),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => RawNode::Split(RawSplit {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(RawNode::from_node(left)),
                right: Box::new(RawNode::from_node(right)),
            }),
        }
    }
}

impl RawPredictor {
    fn into_predictor(self) -> Result<Predictor, PredictorError> {
        let head = match self.head.as_str() {
            "regression" => Head::Regression,
            "argmax" => Head::Argmax,
            other => return Err(invalid("head", format!("unknown head `{other}`"))),
        };
        let kind = self.kind.as_str();
        let core = match kind {
            "linear" => Core::Linear(LinearModel {
                weights: required(self.weights, "weights", kind)?,
                bias: required(self.bias, "bias", kind)?,
            }),
            "tree" => Core::Tree(required(self.tree, "tree", kind)?.into_node()),
            "forest" | "gbdt" => {
                let default_combine = if kind == "forest" { "mean" } else { "sum" };
                let combine = match self.combine.as_deref().unwrap_or(default_combine) {
                    "sum" => Combine::Sum,
                    "mean" => Combine::Mean,
                    other => return Err(invalid("combine", format!("unknown combiner `{other}`"))),
                };
                Core::Ensemble(Ensemble {
                    trees: required(self.trees, "trees", kind)?
                        .into_iter()
                        .map(RawNode::into_node)
                        .collect(),
                    combine,
                    base_offset: required(self.base_offset, "base_offset", kind)?,
                })
            }
            "neural_net" => {
                let raw_layers = required(self.layers, "layers", kind)?;
                let mut layers = Vec::with_capacity(raw_layers.len());
                for (k, l) in raw_layers.into_iter().enumerate() {
                    let activation =
                        Activation::parse(&l.activation, &format!("layers[{k}].activation"))?;
                    layers.push(AffineLayer {
                        weights: l.weights,
                        bias: l.bias,
                        activation,
                    });
                }
                Core::Net(NeuralNet { layers })
            }
            other => return Err(invalid("kind", format!("unsupported predictor kind `{other}`"))),
        };
        Predictor::new(core, head, self.input_dim)
    }
}

impl From<&Predictor> for RawPredictor {
    fn from(p: &Predictor) -> Self {
        let mut raw = RawPredictor {
            kind: p.kind_name().to_string(),
            head: match p.head {
                Head::Regression => "regression".into(),
                Head::Argmax => "argmax".into(),
            },
            input_dim: p.input_dim,
            weights: None,
            bias: None,
            tree: None,
            trees: None,
            combine: None,
            base_offset: None,
            layers: None,
        };
        match &p.core {
            Core::Linear(lm) => {
                raw.weights = Some(lm.weights.clone());
                raw.bias = Some(lm.bias.clone());
            }
            Core::Tree(t) => raw.tree = Some(RawNode::from_node(t)),
            Core::Ensemble(e) => {
                raw.trees = Some(e.trees.iter().map(RawNode::from_node).collect());
                raw.combine = Some(
                    match e.combine {
                        Combine::Sum => "sum",
                        Combine::Mean => "mean",
                    }
                    .into(),
                );
                raw.base_offset = Some(e.base_offset.clone());
            }
            Core::Net(n) => {
                raw.layers = Some(
                    n.layers
                        .iter()
                        .map(|l| RawLayer {
                            weights: l.weights.clone(),
                            bias: l.bias.clone(),
                            activation: l.activation.as_str().into(),
                        })
                        .collect(),
                );
            }
        }
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Predictor {
        let t = TreeNode::split(0, 0.5, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0]));
        Predictor::new(Core::Tree(t), Head::Regression, 1).unwrap()
    }

    #[test]
    fn identity_linear_model_loads() {
        let p = Predictor::from_json(
            r#"{"kind":"linear","head":"regression","input_dim":2,
                "weights":[[1,0],[0,1]],"bias":[0,0]}"#,
        )
        .unwrap();
        assert_eq!(p.dims(), (2, 2, 2));
        assert_eq!(p.eval(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn bias_length_mismatch_names_bias() {
        let err = Predictor::from_json(
            r#"{"kind":"linear","input_dim":2,"weights":[[1,0],[0,1]],"bias":[0]}"#,
        )
        .unwrap_err();
        match err {
            PredictorError::Validation { field, .. } => assert_eq!(field, "bias"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn depth_two_tree_with_four_leaves() {
        let p = Predictor::from_json(
            r#"{"kind":"tree","input_dim":2,"tree":{"split":{"feature":0,"threshold":0.0,
               "left":{"split":{"feature":1,"threshold":1.0,"left":{"leaf":[1]},"right":{"leaf":[2]}}},
               "right":{"split":{"feature":1,"threshold":-1.0,"left":{"leaf":[3]},"right":{"leaf":[4]}}}}}}"#,
        )
        .unwrap();
        assert_eq!(p.output_dim(), 1);
        let Core::Tree(t) = p.core() else { panic!() };
        assert_eq!(t.num_leaves(), 4);
        assert_eq!(t.depth(), 2);
        assert_eq!(p.eval(&[1.0, -1.0]).unwrap(), vec![3.0]);
        assert_eq!(p.eval(&[1.0, -0.5]).unwrap(), vec![4.0]);
    }

    #[test]
    fn boundary_goes_left() {
        let p = stump();
        assert_eq!(p.eval(&[0.3]).unwrap(), vec![1.0]);
        assert_eq!(p.eval(&[0.5]).unwrap(), vec![1.0]);
        assert_eq!(p.eval(&[0.5000001]).unwrap(), vec![2.0]);
    }

    #[test]
    fn small_relu_net_forward_pass() {
        let net = NeuralNet {
            layers: vec![
                AffineLayer {
                    weights: vec![vec![1.0], vec![-1.0]],
                    bias: vec![0.0, 0.0],
                    activation: Activation::Relu,
                },
                AffineLayer {
                    weights: vec![vec![1.0, 1.0]],
                    bias: vec![0.0],
                    activation: Activation::Identity,
                },
            ],
        };
        let p = Predictor::new(Core::Net(net.clone()), Head::Regression, 1).unwrap();
        assert_eq!(p.eval(&[-2.0]).unwrap(), vec![2.0]);
        let trace = net.forward_trace(&[-2.0]);
        assert_eq!(trace[0].pre, vec![-2.0, 2.0]);
        assert_eq!(trace[0].post, vec![0.0, 2.0]);
    }

    #[test]
    fn argmax_head_picks_first_maximum() {
        let lm = LinearModel {
            weights: vec![vec![0.0]; 3],
            bias: vec![3.0, 1.0, 2.0],
        };
        let p = Predictor::new(Core::Linear(lm), Head::Argmax, 1).unwrap();
        assert_eq!(p.eval(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(p.score_eval(&[0.0]).unwrap(), vec![3.0, 1.0, 2.0]);
        assert_eq!(argmax(&[5.0, 5.0]), 0);
        assert_eq!(argmax(&[1.0, 5.0, 5.0]), 1);
    }

    #[test]
    fn regression_score_eval_matches_eval() {
        let lm = LinearModel {
            weights: vec![vec![2.0]],
            bias: vec![1.0],
        };
        let p = Predictor::new(Core::Linear(lm), Head::Regression, 1).unwrap();
        assert_eq!(p.score_eval(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(p.eval(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn gbdt_of_two_stumps() {
        let e = Ensemble {
            trees: vec![
                TreeNode::split(0, 0.0, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![3.0])),
                TreeNode::split(0, 1.0, TreeNode::leaf(vec![-0.25]), TreeNode::leaf(vec![0.75])),
            ],
            combine: Combine::Sum,
            base_offset: vec![0.5],
        };
        let p = Predictor::new(Core::Ensemble(e), Head::Regression, 1).unwrap();
        assert_eq!(p.score_eval(&[-1.0]).unwrap(), vec![1.25]);
    }

    #[test]
    fn dims_for_mnist_style_classifier() {
        let net = NeuralNet {
            layers: vec![
                AffineLayer {
                    weights: vec![vec![0.0; 256]; 4],
                    bias: vec![0.0; 4],
                    activation: Activation::Relu,
                },
                AffineLayer {
                    weights: vec![vec![0.0; 4]; 10],
                    bias: vec![0.0; 10],
                    activation: Activation::Identity,
                },
            ],
        };
        let p = Predictor::new(Core::Net(net), Head::Argmax, 256).unwrap();
        assert_eq!(p.dims(), (256, 10, 1));
        assert_eq!(stump().dims(), (1, 1, 1));
    }

    #[test]
    fn sigmoid_is_rejected_as_unsupported() {
        let err = Predictor::from_json(
            r#"{"kind":"neural_net","input_dim":1,"layers":[
                {"weights":[[1]],"bias":[0],"activation":"sigmoid"},
                {"weights":[[1]],"bias":[0],"activation":"identity"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, PredictorError::UnsupportedActivation { .. }), "{err}");
        let err = Predictor::from_json(
            r#"{"kind":"neural_net","input_dim":1,"layers":[
                {"weights":[[1]],"bias":[0],"activation":"swish"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, PredictorError::Validation { .. }));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            Predictor::from_json("{\"kind\": \"linear\""),
            Err(PredictorError::Parse(_))
        ));
        assert!(matches!(
            Predictor::from_json(r#"{"kind":"svm","input_dim":1}"#),
            Err(PredictorError::Validation { .. })
        ));
    }

    #[test]
    fn wrong_input_length() {
        assert!(matches!(
            stump().eval(&[1.0, 2.0]),
            Err(PredictorError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn feature_out_of_range_is_rejected() {
        let t = TreeNode::split(3, 0.0, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0]));
        assert!(Predictor::new(Core::Tree(t), Head::Regression, 2).is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictor() {
        let p = stump();
        let q = Predictor::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }
}
