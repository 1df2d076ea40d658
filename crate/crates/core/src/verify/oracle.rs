//! Brute-force optima for tiny instances.
//!
//! Every embedding constraint is dropped and the predictor is rebuilt from
//! its weights: one LP per activation pattern, leaf tuple and winning class.

use std::collections::HashSet;

use thiserror::Error;

use crate::formulator::EmbeddingResult;
use crate::mip::{Constraint, ConsId, MipModel, ModelError, ObjSense, Sense, VarId, VarKind};
use crate::predictor::{Activation, Core, Head, Predictor, TreeNode};
use crate::solve::{simplex_solve, LpProblem, LpStatus, SolveStatus};
use crate::surrogatelib::Instance;

pub const MAX_HIDDEN_NEURONS: usize = 12;
pub const MAX_LEAF_TUPLES: usize = 4096;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{found} ReLU neurons to enumerate, limit {limit}")]
    TooManyNeurons { found: usize, limit: usize },
    #[error("{found} leaf tuples to enumerate, limit {limit}")]
    TooManyCombinations { found: usize, limit: usize },
    #[error("embedding {0} has a core this oracle does not enumerate")]
    WrongCore(usize),
    #[error("problem part is not an LP: {0}")]
    DiscreteRemainder(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A predictor and the bookkeeping of where it was embedded.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedPredictor<'a> {
    pub predictor: &'a Predictor,
    pub embedding: &'a EmbeddingResult,
    pub epsilon: f64,
}

impl Instance {
    pub fn embedded(&self) -> Vec<EmbeddedPredictor<'_>> {
        self.blocks
            .iter()
            .map(|b| EmbeddedPredictor {
                predictor: &self.predictors[b.predictor],
                embedding: &b.embedding,
                epsilon: b.opts.epsilon,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `Optimal`, `Infeasible`, `UnboundedRelaxation` or `NumericalFailure`.
    pub status: SolveStatus,
    pub objective: f64,
    pub assignment: Vec<f64>,
    /// LPs solved.
    pub cases: usize,
    pub feasible_cases: usize,
}

struct Row {
    terms: Vec<(VarId, f64)>,
    sense: Sense,
    rhs: f64,
}

#[derive(Default)]
struct Alt {
    rows: Vec<Row>,
    fixes: Vec<(VarId, f64)>,
}

fn affine_row(lead: VarId, weights: &[f64], inputs: &[VarId], bias: f64) -> Row {
    let mut terms = vec![(lead, 1.0)];
    terms.extend(inputs.iter().zip(weights).map(|(&v, &w)| (v, -w)));
    Row { terms, sense: Sense::Eq, rhs: bias }
}

fn pre_row(weights: &[f64], inputs: &[VarId], sense: Sense, rhs: f64) -> Row {
    Row { terms: inputs.iter().copied().zip(weights.iter().copied()).collect(), sense, rhs }
}

fn path_rows(t: &TreeNode, inputs: &[VarId], eps: f64) -> Vec<(Vec<Row>, Vec<f64>)> {
    t.leaf_paths()
        .into_iter()
        .map(|(steps, values)| {
            let rows = steps
                .iter()
                .map(|s| {
                    let (sense, rhs) = if s.left {
                        (Sense::Le, s.threshold - eps / 2.0)
                    } else {
                        (Sense::Ge, s.threshold + eps / 2.0)
                    };
                    Row { terms: vec![(inputs[s.feature], 1.0)], sense, rhs }
                })
                .collect();
            (rows, values.to_vec())
        })
        .collect()
}

/// Score alternatives of one block, before the head is applied.
fn score_alternatives(
    base: &mut MipModel,
    k: usize,
    ep: &EmbeddedPredictor<'_>,
    limit: usize,
) -> Result<Vec<Alt>, OracleError> {
    let inputs = &ep.embedding.input_vars;
    let scores = &ep.embedding.score_vars;
    let mut common = Vec::new();
    let alts = match ep.predictor.core() {
        Core::Linear(lm) => {
            for (j, row) in lm.weights.iter().enumerate() {
                common.push(affine_row(scores[j], row, inputs, lm.bias[j]));
            }
            vec![Alt::default()]
        }
        Core::Net(net) => {
            let mut cur = inputs.clone();
            // (post var, weights, input vars, bias) for every ReLU neuron.
            let mut relus = Vec::new();
            let last = net.layers.len() - 1;
            for (l, layer) in net.layers.iter().enumerate() {
                if l == last {
                    for (j, row) in layer.weights.iter().enumerate() {
                        common.push(affine_row(scores[j], row, &cur, layer.bias[j]));
                    }
                    break;
                }
                let mut next = Vec::with_capacity(layer.out_dim());
                for (j, row) in layer.weights.iter().enumerate() {
                    let h = base.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("oracle_b{k}_l{l}_n{j}"))?;
                    match layer.activation {
                        Activation::Identity => common.push(affine_row(h, row, &cur, layer.bias[j])),
                        Activation::Relu => relus.push((h, row.clone(), cur.clone(), layer.bias[j])),
                    }
                    next.push(h);
                }
                cur = next;
            }
            if relus.len() > MAX_HIDDEN_NEURONS {
                return Err(OracleError::TooManyNeurons { found: relus.len(), limit: MAX_HIDDEN_NEURONS });
            }
            (0u64..1 << relus.len())
                .map(|mask| {
                    let mut alt = Alt::default();
                    for (i, (h, w, ins, b)) in relus.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            alt.rows.push(affine_row(*h, w, ins, *b));
                            alt.rows.push(pre_row(w, ins, Sense::Ge, -b));
                        } else {
                            alt.fixes.push((*h, 0.0));
                            alt.rows.push(pre_row(w, ins, Sense::Le, -b));
                        }
                    }
                    alt
                })
                .collect()
        }
        Core::Tree(t) => path_rows(t, inputs, ep.epsilon)
            .into_iter()
            .map(|(rows, values)| {
                let fixes = scores.iter().copied().zip(values).collect();
                Alt { rows, fixes }
            })
            .collect(),
        Core::Ensemble(e) => {
            let w = e.tree_weight();
            let per_tree: Vec<_> = e.trees.iter().map(|t| path_rows(t, inputs, ep.epsilon)).collect();
            let total = per_tree.iter().try_fold(1usize, |acc, p| acc.checked_mul(p.len()).filter(|&n| n <= limit));
            let Some(total) = total else {
                return Err(OracleError::TooManyCombinations { found: usize::MAX, limit });
            };
            let mut alts = Vec::with_capacity(total);
            for mut idx in 0..total {
                let mut alt = Alt::default();
                let mut out = e.base_offset.clone();
                for p in &per_tree {
                    let (rows, values) = &p[idx % p.len()];
                    idx /= p.len();
                    alt.rows.extend(rows.iter().map(|r| Row { terms: r.terms.clone(), sense: r.sense, rhs: r.rhs }));
                    for (o, v) in out.iter_mut().zip(values) {
                        *o += w * v;
                    }
                }
                alt.fixes = scores.iter().copied().zip(out).collect();
                alts.push(alt);
            }
            alts
        }
    };
    for r in common {
        base.add_linear(format!("oracle_b{k}_c{}", base.linear_constraints().len()), &r.terms, r.sense, r.rhs)?;
    }
    Ok(alts)
}

/// Cross the score alternatives with every winning class of an argmax head.
fn with_head(ep: &EmbeddedPredictor<'_>, alts: Vec<Alt>) -> Vec<Alt> {
    let Some(am) = ep.embedding.argmax.as_ref().filter(|_| ep.predictor.head() == Head::Argmax) else {
        return alts;
    };
    let scores = &ep.embedding.score_vars;
    let mut out = Vec::with_capacity(alts.len() * scores.len());
    for alt in alts {
        for c in 0..scores.len() {
            let mut rows: Vec<Row> = alt.rows.iter().map(|r| Row { terms: r.terms.clone(), sense: r.sense, rhs: r.rhs }).collect();
            for j in (0..scores.len()).filter(|&j| j != c) {
                rows.push(Row { terms: vec![(scores[c], 1.0), (scores[j], -1.0)], sense: Sense::Ge, rhs: 0.0 });
            }
            let mut fixes = alt.fixes.clone();
            fixes.extend(am.z.iter().enumerate().map(|(j, &z)| (z, if j == c { 1.0 } else { 0.0 })));
            if let Some(i) = am.index {
                fixes.push((i, c as f64));
            }
            out.push(Alt { rows, fixes });
        }
    }
    out
}

/// Exact optimum of `model` by enumerating every block's discrete regimes.
pub fn oracle_enumerate(
    model: &MipModel,
    blocks: &[EmbeddedPredictor<'_>],
    limit: usize,
) -> Result<OracleResult, OracleError> {
    let dropped: HashSet<ConsId> = blocks.iter().flat_map(|b| b.embedding.constraints.iter().copied()).collect();
    let owned: HashSet<VarId> = blocks
        .iter()
        .flat_map(|b| {
            let e = b.embedding;
            e.aux_vars.iter().chain(&e.score_vars).chain(&e.output_vars).copied()
        })
        .collect();

    let mut base = MipModel::new();
    for (i, v) in model.vars().iter().enumerate() {
        if v.kind != VarKind::Continuous && !owned.contains(&VarId(i)) {
            return Err(OracleError::DiscreteRemainder(format!("variable `{}` is integral", v.name)));
        }
        base.add_continuous(v.lb, v.ub, v.name.clone())?;
    }
    for (i, c) in model.linear_constraints().iter().enumerate() {
        if !dropped.contains(&ConsId::Linear(i)) {
            base.add_constraint(Constraint::Linear(c.clone()))?;
        }
    }
    if let Some(c) = (0..model.indicator_constraints().len()).find(|&i| !dropped.contains(&ConsId::Indicator(i))) {
        return Err(OracleError::DiscreteRemainder(format!("indicator `{}`", model.indicator_constraints()[c].name)));
    }
    if let Some(c) = (0..model.sos1_constraints().len()).find(|&i| !dropped.contains(&ConsId::Sos1(i))) {
        return Err(OracleError::DiscreteRemainder(format!("SOS1 `{}`", model.sos1_constraints()[c].name)));
    }
    let obj = model.objective();
    base.set_objective(obj.sense, &obj.terms, obj.constant)?;

    let mut per_block = Vec::with_capacity(blocks.len());
    let mut total = 1usize;
    for (k, b) in blocks.iter().enumerate() {
        let alts = with_head(b, score_alternatives(&mut base, k, b, limit)?);
        total = total.saturating_mul(alts.len());
        if total > limit {
            return Err(OracleError::TooManyCombinations { found: total, limit });
        }
        per_block.push(alts);
    }

    let maximize = obj.sense == ObjSense::Maximize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut feasible = 0;
    'cases: for mut idx in 0..total {
        let mut m = base.clone();
        for (k, alts) in per_block.iter().enumerate() {
            let alt = &alts[idx % alts.len()];
            idx /= alts.len();
            for (r, row) in alt.rows.iter().enumerate() {
                m.add_linear(format!("oracle_alt{k}_{r}"), &row.terms, row.sense, row.rhs)?;
            }
            for &(v, val) in &alt.fixes {
                let var = m.var(v);
                if val < var.lb || val > var.ub {
                    continue 'cases;
                }
                m.set_var_bounds(v, val, val)?;
            }
        }
        let sol = simplex_solve(&LpProblem::from_model(&m));
        match sol.status {
            LpStatus::Optimal => {
                feasible += 1;
                let val = model.objective().value(&sol.x);
                let better = match &best {
                    None => true,
                    Some((b, _)) => if maximize { val > *b } else { val < *b },
                };
                if better {
                    best = Some((val, sol.x));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                return Ok(OracleResult {
                    status: SolveStatus::UnboundedRelaxation,
                    objective: if maximize { f64::INFINITY } else { f64::NEG_INFINITY },
                    assignment: Vec::new(),
                    cases: total,
                    feasible_cases: feasible,
                })
            }
            LpStatus::NumericalFailure | LpStatus::IterationLimit => {
                return Ok(OracleResult {
                    status: SolveStatus::NumericalFailure,
                    objective: f64::NAN,
                    assignment: Vec::new(),
                    cases: total,
                    feasible_cases: feasible,
                })
            }
        }
    }
    let n = model.num_vars();
    Ok(match best {
        Some((objective, mut x)) => {
            x.truncate(n);
            OracleResult { status: SolveStatus::Optimal, objective, assignment: x, cases: total, feasible_cases: feasible }
        }
        None => OracleResult {
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            assignment: Vec::new(),
            cases: total,
            feasible_cases: 0,
        },
    })
}

/// Activation-pattern enumeration; every block must be a net or linear model.
pub fn oracle_enumerate_nn(model: &MipModel, blocks: &[EmbeddedPredictor<'_>]) -> Result<OracleResult, OracleError> {
    let mut neurons = 0;
    for (k, b) in blocks.iter().enumerate() {
        match b.predictor.core() {
            Core::Net(net) => {
                neurons += net
                    .layers
                    .iter()
                    .take(net.layers.len() - 1)
                    .filter(|l| l.activation == Activation::Relu)
                    .map(|l| l.out_dim())
                    .sum::<usize>()
            }
            Core::Linear(_) => {}
            _ => return Err(OracleError::WrongCore(k)),
        }
    }
    if neurons > MAX_HIDDEN_NEURONS {
        return Err(OracleError::TooManyNeurons { found: neurons, limit: MAX_HIDDEN_NEURONS });
    }
    oracle_enumerate(model, blocks, usize::MAX)
}

/// Leaf-tuple enumeration; every block must be a tree or ensemble.
pub fn oracle_enumerate_tree(model: &MipModel, blocks: &[EmbeddedPredictor<'_>]) -> Result<OracleResult, OracleError> {
    let mut tuples = 1usize;
    for (k, b) in blocks.iter().enumerate() {
        let n = match b.predictor.core() {
            Core::Tree(t) => t.num_leaves(),
            Core::Ensemble(e) => e.trees.iter().fold(1usize, |a, t| a.saturating_mul(t.num_leaves())),
            _ => return Err(OracleError::WrongCore(k)),
        };
        tuples = tuples.saturating_mul(n);
    }
    if tuples > MAX_LEAF_TUPLES {
        return Err(OracleError::TooManyCombinations { found: tuples, limit: MAX_LEAF_TUPLES });
    }
    oracle_enumerate(model, blocks, usize::MAX)
}
