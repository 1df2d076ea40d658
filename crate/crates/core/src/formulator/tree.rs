use crate::mip::{MipModel, Sense, VarId, VarKind};
use crate::predictor::{Ensemble, TreeNode};

use super::{make_outputs, EmbeddingDetail, EmbeddingResult, FormulationError, Recorder};

/// Per-output `[min, max]` over the leaves of `t`.
fn leaf_range(t: &TreeNode) -> Vec<(f64, f64)> {
    let leaves = t.leaves();
    let dim = leaves.first().map(|l| l.len()).unwrap_or(0);
    (0..dim)
        .map(|j| {
            leaves.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
                (lo.min(l[j]), hi.max(l[j]))
            })
        })
        .collect()
}

pub(crate) fn embed_tree_rec(
    rec: &mut Recorder<'_>,
    t: &TreeNode,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    epsilon: f64,
    prefix: &str,
) -> Result<(Vec<VarId>, Vec<VarId>), FormulationError> {
    let out = make_outputs(rec, out_vars, &leaf_range(t), prefix)?;
    let paths = t.leaf_paths();
    let mut deltas = Vec::with_capacity(paths.len());
    for l in 0..paths.len() {
        deltas.push(rec.var(VarKind::Binary, 0.0, 1.0, format!("{prefix}_leaf{l}"))?);
    }
    let ones: Vec<(VarId, f64)> = deltas.iter().map(|&d| (d, 1.0)).collect();
    rec.linear(format!("{prefix}_onehot"), &ones, Sense::Eq, 1.0)?;
    let half = epsilon / 2.0;
    for (l, (steps, _)) in paths.iter().enumerate() {
        for (i, step) in steps.iter().enumerate() {
            let x = input_vars.get(step.feature).copied().ok_or(FormulationError::DimensionMismatch {
                what: "input",
                expected: step.feature + 1,
                got: input_vars.len(),
            })?;
            let (sense, rhs) = if step.left {
                (Sense::Le, step.threshold - half)
            } else {
                (Sense::Ge, step.threshold + half)
            };
            rec.indicator(format!("{prefix}_leaf{l}_s{i}"), deltas[l], true, &[(x, 1.0)], sense, rhs)?;
        }
    }
    for (j, &o) in out.iter().enumerate() {
        let mut terms = vec![(o, 1.0)];
        terms.extend(paths.iter().zip(&deltas).map(|((_, v), &d)| (d, -v[j])));
        rec.linear(format!("{prefix}_out{j}_tie"), &terms, Sense::Eq, 0.0)?;
    }
    Ok((out, deltas))
}

pub(crate) fn embed_ensemble_rec(
    rec: &mut Recorder<'_>,
    e: &Ensemble,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    epsilon: f64,
    prefix: &str,
) -> Result<(Vec<VarId>, Vec<Vec<VarId>>), FormulationError> {
    let w = e.tree_weight();
    let dim = e.base_offset.len();
    let mut bounds: Vec<(f64, f64)> = e.base_offset.iter().map(|&b| (b, b)).collect();
    for t in &e.trees {
        for (b, (lo, hi)) in bounds.iter_mut().zip(leaf_range(t)) {
            b.0 += w * lo;
            b.1 += w * hi;
        }
    }
    let out = make_outputs(rec, out_vars, &bounds, prefix)?;
    let mut tree_outs = Vec::with_capacity(e.trees.len());
    let mut leaves = Vec::with_capacity(e.trees.len());
    for (k, t) in e.trees.iter().enumerate() {
        let (o, d) = embed_tree_rec(rec, t, input_vars, None, epsilon, &format!("{prefix}_t{k}"))?;
        tree_outs.push(o);
        leaves.push(d);
    }
    for j in 0..dim {
        let mut terms = vec![(out[j], 1.0)];
        terms.extend(tree_outs.iter().map(|o| (o[j], -w)));
        rec.linear(format!("{prefix}_out{j}_sum"), &terms, Sense::Eq, e.base_offset[j])?;
    }
    Ok((out, leaves))
}

/// One binary per leaf, exactly one selected, path indicators per leaf and
/// `out = Σ value_l δ_l`.
pub fn embed_tree(
    model: &mut MipModel,
    root: &TreeNode,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    epsilon: f64,
    prefix: &str,
) -> Result<EmbeddingResult, FormulationError> {
    let mut rec = Recorder::new(model);
    let (out, leaves) = embed_tree_rec(&mut rec, root, input_vars, out_vars, epsilon, prefix)?;
    let aux = rec.vars.iter().copied().filter(|v| !out.contains(v)).collect();
    Ok(EmbeddingResult {
        input_vars: input_vars.to_vec(),
        score_vars: out.clone(),
        output_vars: out,
        aux_vars: aux,
        constraints: rec.cons,
        detail: EmbeddingDetail::Trees { leaves: vec![leaves] },
        argmax: None,
    })
}

/// Each tree gets its own output block; `out = base + w Σ t_k` with `w = 1`
/// for sums and `1/T` for means.
pub fn embed_ensemble(
    model: &mut MipModel,
    e: &Ensemble,
    input_vars: &[VarId],
    out_vars: Option<&[VarId]>,
    epsilon: f64,
    prefix: &str,
) -> Result<EmbeddingResult, FormulationError> {
    let mut rec = Recorder::new(model);
    let (out, leaves) = embed_ensemble_rec(&mut rec, e, input_vars, out_vars, epsilon, prefix)?;
    let aux = rec.vars.iter().copied().filter(|v| !out.contains(v)).collect();
    Ok(EmbeddingResult {
        input_vars: input_vars.to_vec(),
        score_vars: out.clone(),
        output_vars: out,
        aux_vars: aux,
        constraints: rec.cons,
        detail: EmbeddingDetail::Trees { leaves },
        argmax: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Combine;

    fn stump() -> TreeNode {
        TreeNode::split(0, 0.5, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0]))
    }

    /// Point with `x`, the leaf choice and the implied output.
    fn stump_point(r: &EmbeddingResult, x: f64, leaf: usize, n: usize) -> Vec<f64> {
        let EmbeddingDetail::Trees { leaves } = &r.detail else { unreachable!() };
        let mut pt = vec![0.0; n];
        pt[r.input_vars[0].index()] = x;
        pt[leaves[0][leaf].index()] = 1.0;
        pt[r.output_vars[0].index()] = [1.0, 2.0][leaf];
        pt
    }

    #[test]
    fn stump_leaf_selection() {
        for (eps, x, expect) in [
            (0.0, 0.3, [true, false]),
            (0.0, 0.5, [true, true]),
            (0.2, 0.5, [false, false]),
            (0.2, 0.7, [false, true]),
        ] {
            let mut m = MipModel::new();
            let xv = m.add_continuous(0.0, 1.0, "x").unwrap();
            let r = embed_tree(&mut m, &stump(), &[xv], None, eps, "t").unwrap();
            for leaf in 0..2 {
                let pt = stump_point(&r, x, leaf, m.num_vars());
                let ok = m.check_assignment(&pt, 0.0, 0.0).unwrap().is_feasible();
                assert_eq!(ok, expect[leaf], "eps={eps} x={x} leaf={leaf}");
            }
        }
    }

    #[test]
    fn stump_counts() {
        let mut m = MipModel::new();
        let xv = m.add_continuous(0.0, 1.0, "x").unwrap();
        embed_tree(&mut m, &stump(), &[xv], None, 0.0, "t").unwrap();
        let s = m.stats();
        assert_eq!((s.binary, s.indicator, s.linear, s.sos1), (2, 2, 2, 0));
    }

    #[test]
    fn gbdt_two_stumps() {
        let e = Ensemble {
            trees: vec![
                TreeNode::split(0, 0.5, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![3.0])),
                TreeNode::split(0, 0.2, TreeNode::leaf(vec![0.0]), TreeNode::leaf(vec![-0.25])),
            ],
            combine: Combine::Sum,
            base_offset: vec![0.5],
        };
        let mut m = MipModel::new();
        let xv = m.add_continuous(0.0, 1.0, "x").unwrap();
        let r = embed_ensemble(&mut m, &e, &[xv], None, 0.0, "g").unwrap();
        let out = m.var(r.output_vars[0]);
        assert_eq!((out.lb, out.ub), (1.25, 3.5));
        assert_eq!(m.stats().linear, 2 * 2 + 1);
    }

    #[test]
    fn single_leaf_tree() {
        let mut m = MipModel::new();
        let xv = m.add_continuous(0.0, 1.0, "x").unwrap();
        let r = embed_tree(&mut m, &TreeNode::leaf(vec![4.0, 5.0]), &[xv], None, 0.0, "t").unwrap();
        assert_eq!(r.output_vars.len(), 2);
        assert_eq!(m.stats().indicator, 0);
        assert!(m.check_assignment(&[0.1, 4.0, 5.0, 1.0], 0.0, 0.0).unwrap().is_feasible());
    }
}
