//! Exactness harness, enumeration oracles and the tolerance demonstrations.

mod demo;
mod oracle;

pub use demo::{leaf_feasibility, tolerance_demo, ToleranceReport};
pub use oracle::{
    oracle_enumerate, oracle_enumerate_nn, oracle_enumerate_tree, EmbeddedPredictor, OracleError, OracleResult,
    MAX_HIDDEN_NEURONS, MAX_LEAF_TUPLES,
};

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::formulator::{embed_predictor, EmbedOptions, EmbeddingDetail, EmbeddingResult, FormulationError};
use crate::mip::{MipModel, VarId, DEFAULT_FEASTOL, DEFAULT_INTTOL};
use crate::predictor::{argmax, Core, Head, Predictor};
use crate::solve::{bb_solve, SolveLimits, SolveStatus};

/// Largest output deviation a passing report may show.
pub const EXACT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactnessFailure {
    pub sample: usize,
    pub input: Vec<f64>,
    pub expected: Vec<f64>,
    pub got: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactnessReport {
    pub predictor: String,
    pub formulation: String,
    /// Inputs actually tested.
    pub samples: usize,
    /// Inputs within the tie or split margin, reported but not tested.
    pub boundary_skipped: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub failures: Vec<ExactnessFailure>,
}

impl ExactnessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.max_deviation <= self.tolerance
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ExactnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {} ({}): {} samples, {} boundary skipped, max deviation {:e}, {} failures",
            if self.passed() { "PASS" } else { "FAIL" },
            self.predictor,
            self.formulation,
            self.samples,
            self.boundary_skipped,
            self.max_deviation,
            self.failures.len()
        )?;
        for fl in &self.failures {
            writeln!(
                f,
                "  sample {}: {} (input {:?}, expected {:?}, got {:?})",
                fl.sample, fl.reason, fl.input, fl.expected, fl.got
            )?;
        }
        Ok(())
    }
}

/// Standalone embedding of `p` over a box, ready for per-sample checks.
struct Harness<'p> {
    p: &'p Predictor,
    opts: EmbedOptions,
    bx: Vec<(f64, f64)>,
    model: MipModel,
    inputs: Vec<VarId>,
    emb: EmbeddingResult,
    feastol: f64,
}

impl<'p> Harness<'p> {
    fn new(p: &'p Predictor, opts: &EmbedOptions, feastol: f64) -> Result<Self, FormulationError> {
        let n = p.input_dim();
        let bx = opts.input_box.clone().unwrap_or_else(|| vec![(-1.0, 1.0); n]);
        let mut opts = opts.clone();
        opts.input_box = Some(bx.clone());
        let mut model = MipModel::new();
        let inputs = (0..n)
            .map(|i| model.add_continuous(bx[i].0, bx[i].1, format!("x{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let emb = embed_predictor(&mut model, p, &inputs, None, &opts)?;
        Ok(Harness { p, opts, bx, model, inputs, emb, feastol })
    }

    fn splits(&self) -> Vec<(usize, f64)> {
        match self.p.core() {
            Core::Tree(t) => t.splits(),
            Core::Ensemble(e) => e.trees.iter().flat_map(|t| t.splits()).collect(),
            _ => Vec::new(),
        }
    }

    /// True when `x` sits within the margin where the formulation may pick either side.
    fn on_boundary(&self, x: &[f64], splits: &[(usize, f64)]) -> bool {
        let margin = self.opts.epsilon / 2.0 + self.feastol;
        if splits.iter().any(|&(f, th)| (x[f] - th).abs() <= margin) {
            return true;
        }
        if self.p.head() == Head::Argmax {
            let s = self.p.score_eval(x).expect("checked length");
            let best = argmax(&s);
            let runner = s.iter().enumerate().filter(|&(j, _)| j != best).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
            if s[best] - runner <= 10.0 * self.feastol {
                return true;
            }
        }
        false
    }

    fn fixed_inputs(&self, x: &[f64]) -> MipModel {
        let mut m = self.model.clone();
        for (&v, &xi) in self.inputs.iter().zip(x) {
            m.fix_var_unchecked(v, xi);
        }
        m
    }

    fn check(&self, sample: usize, x: &[f64], limits: &SolveLimits, report: &mut ExactnessReport) {
        let expected = self.p.eval(x).expect("checked length");
        let fail = |got: Vec<f64>, reason: String| ExactnessFailure {
            sample,
            input: x.to_vec(),
            expected: expected.clone(),
            got,
            reason,
        };
        let completion = canonical_completion(&self.model, self.p, &self.emb, &self.opts.prefix, x);
        match self.model.check_assignment(&completion, self.feastol, DEFAULT_INTTOL) {
            Ok(r) if r.is_feasible() => {}
            Ok(r) => {
                report.failures.push(fail(Vec::new(), format!("canonical completion infeasible: {r}")));
                return;
            }
            Err(e) => {
                report.failures.push(fail(Vec::new(), format!("canonical completion incomplete: {e}")));
                return;
            }
        }

        let fixed = self.fixed_inputs(x);
        let res = bb_solve(&fixed, limits);
        if res.status != SolveStatus::Optimal {
            report.failures.push(fail(Vec::new(), format!("fixed-input solve returned {}", res.status)));
            return;
        }
        let got: Vec<f64> = self.emb.output_vars.iter().map(|v| res.assignment[v.index()]).collect();
        match self.p.head() {
            Head::Regression => {
                let dev = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                report.max_deviation = report.max_deviation.max(dev);
                let shift = 10.0 * self.feastol;
                for (j, &out) in self.emb.output_vars.iter().enumerate() {
                    for sign in [1.0, -1.0] {
                        let mut m = fixed.clone();
                        m.fix_var_unchecked(out, expected[j] + sign * shift);
                        let r = bb_solve(&m, limits);
                        if r.status != SolveStatus::Infeasible {
                            let mut bad = expected.clone();
                            bad[j] += sign * shift;
                            report.failures.push(fail(bad, format!("shifted output {j} gave {}", r.status)));
                        }
                    }
                }
            }
            Head::Argmax => {
                let scores = self.p.score_eval(x).expect("checked length");
                let chosen = got[0].round() as usize;
                let top = scores[argmax(&scores)];
                if chosen >= scores.len() || scores[chosen] < top {
                    report.failures.push(fail(got.clone(), "solver picked a non-maximal class".into()));
                }
                report.max_deviation = report.max_deviation.max((got[0] - expected[0]).abs());
                let am = self.emb.argmax.as_ref().expect("argmax head embeds argmax");
                for (j, &z) in am.z.iter().enumerate() {
                    if scores[j] < top {
                        let mut m = fixed.clone();
                        m.fix_var_unchecked(z, 1.0);
                        let r = bb_solve(&m, limits);
                        if r.status != SolveStatus::Infeasible {
                            report.failures.push(fail(vec![j as f64], format!("forcing class {j} gave {}", r.status)));
                        }
                    }
                }
            }
        }
        report.samples += 1;
    }
}

fn empty_report(p: &Predictor, opts: &EmbedOptions) -> ExactnessReport {
    ExactnessReport {
        predictor: p.to_string(),
        formulation: opts.relu_formulation.as_str().into(),
        samples: 0,
        boundary_skipped: 0,
        max_deviation: 0.0,
        tolerance: EXACT_TOL,
        failures: Vec::new(),
    }
}

/// Check the embedding of `p` at `n_samples` uniform inputs from the options'
/// box (`[-1, 1]` per input when none is given).
pub fn check_exactness(
    p: &Predictor,
    opts: &EmbedOptions,
    n_samples: usize,
    seed: u64,
) -> Result<ExactnessReport, FormulationError> {
    check_exactness_with_tol(p, opts, n_samples, seed, DEFAULT_FEASTOL)
}

/// As [`check_exactness`] with a custom feasibility tolerance.
pub fn check_exactness_with_tol(
    p: &Predictor,
    opts: &EmbedOptions,
    n_samples: usize,
    seed: u64,
    feastol: f64,
) -> Result<ExactnessReport, FormulationError> {
    let h = Harness::new(p, opts, feastol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| h.bx.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect())
        .collect();
    Ok(run(&h, &points))
}

/// As [`check_exactness`] at the given points.
pub fn check_exactness_at(
    p: &Predictor,
    opts: &EmbedOptions,
    points: &[Vec<f64>],
) -> Result<ExactnessReport, FormulationError> {
    let h = Harness::new(p, opts, DEFAULT_FEASTOL)?;
    Ok(run(&h, points))
}

fn run(h: &Harness<'_>, points: &[Vec<f64>]) -> ExactnessReport {
    let mut report = empty_report(h.p, &h.opts);
    let splits = h.splits();
    let limits = SolveLimits { max_nodes: 100_000, feastol: h.feastol, ..SolveLimits::default() };
    for (k, x) in points.iter().enumerate() {
        if h.on_boundary(x, &splits) {
            report.boundary_skipped += 1;
        } else {
            h.check(k, x, &limits, &mut report);
        }
    }
    report
}

/// Assignment with inputs at `x` and every embedding variable at the value the
/// forward pass dictates. Variables the embedding did not create stay NaN.
pub fn canonical_completion(
    model: &MipModel,
    p: &Predictor,
    emb: &EmbeddingResult,
    prefix: &str,
    x: &[f64],
) -> Vec<f64> {
    let mut a = vec![f64::NAN; model.num_vars()];
    for (&v, &xi) in emb.input_vars.iter().zip(x) {
        a[v.index()] = xi;
    }
    let scores = p.score_eval(x).expect("input length matches");
    for (&v, &s) in emb.score_vars.iter().zip(&scores) {
        a[v.index()] = s;
    }
    match (&emb.detail, p.core()) {
        (EmbeddingDetail::Net { hidden }, Core::Net(net)) => {
            let trace = net.forward_trace(x);
            for (layer, vars) in trace.iter().zip(hidden) {
                for (j, nv) in vars.iter().enumerate() {
                    let pre = layer.pre[j];
                    a[nv.y.index()] = layer.post[j];
                    if let Some(z) = nv.z {
                        a[z.index()] = if pre > 0.0 { 1.0 } else { 0.0 };
                    }
                    if let Some(s) = nv.s {
                        a[s.index()] = (-pre).max(0.0);
                    }
                }
            }
        }
        (EmbeddingDetail::Trees { leaves }, Core::Tree(t)) => {
            for (l, &d) in leaves[0].iter().enumerate() {
                a[d.index()] = if l == t.leaf_index(x) { 1.0 } else { 0.0 };
            }
        }
        (EmbeddingDetail::Trees { leaves }, Core::Ensemble(e)) => {
            for (k, (t, ds)) in e.trees.iter().zip(leaves).enumerate() {
                let hit = t.leaf_index(x);
                for (l, &d) in ds.iter().enumerate() {
                    a[d.index()] = if l == hit { 1.0 } else { 0.0 };
                }
                for (j, &v) in t.eval(x).iter().enumerate() {
                    if let Some(id) = model.var_by_name(&format!("{prefix}_t{k}_out{j}")) {
                        a[id.index()] = v;
                    }
                }
            }
        }
        _ => {}
    }
    if let Some(am) = &emb.argmax {
        let best = argmax(&scores);
        let top = scores[best];
        a[am.m.index()] = top;
        for (j, (&z, &s)) in am.z.iter().zip(&am.s).enumerate() {
            a[z.index()] = if j == best { 1.0 } else { 0.0 };
            a[s.index()] = top - scores[j];
        }
        if let Some(i) = am.index {
            a[i.index()] = best as f64;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulator::ReluFormulation;
    use crate::predictor::{Activation, AffineLayer, LinearModel, NeuralNet, TreeNode};

    fn stump() -> Predictor {
        Predictor::new(
            Core::Tree(TreeNode::split(0, 0.5, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0]))),
            Head::Regression,
            1,
        )
        .unwrap()
    }

    #[test]
    fn linear_has_no_deviation() {
        let p = Predictor::new(
            Core::Linear(LinearModel { weights: vec![vec![2.0, -1.0]], bias: vec![0.5] }),
            Head::Regression,
            2,
        )
        .unwrap();
        let r = check_exactness(&p, &EmbedOptions::default(), 20, 1).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.samples, 20);
        assert!(r.max_deviation <= 1e-9);
    }

    #[test]
    fn stump_threshold_is_skipped() {
        let opts = EmbedOptions::default().with_box(vec![(0.0, 1.0)]);
        let r = check_exactness_at(&stump(), &opts, &[vec![0.5], vec![0.2], vec![0.9]]).unwrap();
        assert_eq!(r.boundary_skipped, 1);
        assert_eq!(r.samples, 2);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn small_net_both_formulations() {
        let net = NeuralNet {
            layers: vec![
                AffineLayer { weights: vec![vec![1.0], vec![-1.0]], bias: vec![0.0, 0.0], activation: Activation::Relu },
                AffineLayer { weights: vec![vec![1.0, 1.0]], bias: vec![0.0], activation: Activation::Identity },
            ],
        };
        let p = Predictor::new(Core::Net(net), Head::Regression, 1).unwrap();
        for f in [ReluFormulation::Bigm, ReluFormulation::Sos1] {
            let opts = EmbedOptions::default().with_formulation(f).with_box(vec![(-2.0, 2.0)]);
            let r = check_exactness(&p, &opts, 100, 3).unwrap();
            assert!(r.passed(), "{r}");
            assert!(r.max_deviation <= 1e-9);
        }
    }

    #[test]
    fn broken_embedding_is_caught() {
        // Completion built for one predictor, checked against another's embedding.
        let p = stump();
        let h = Harness::new(&p, &EmbedOptions::default().with_box(vec![(0.0, 1.0)]), DEFAULT_FEASTOL).unwrap();
        let other = Predictor::new(
            Core::Tree(TreeNode::split(0, 0.5, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![3.0]))),
            Head::Regression,
            1,
        )
        .unwrap();
        let a = canonical_completion(&h.model, &other, &h.emb, "p", &[0.9]);
        assert!(!h.model.check_assignment(&a, 1e-6, 1e-6).unwrap().is_feasible());
    }

    #[test]
    fn report_renders_both_ways() {
        let r = check_exactness(&stump(), &EmbedOptions::default().with_box(vec![(0.0, 1.0)]), 5, 0).unwrap();
        assert!(r.to_string().starts_with("PASS"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    }
}
