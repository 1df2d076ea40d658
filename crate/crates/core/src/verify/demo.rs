//! Small hand-built models showing how tolerances interact with the ReLU and tree encodings.

use std::fmt;

use serde::Serialize;

use crate::formulator::{embed_predictor, embed_relu_bigm, embed_relu_sos1, EmbedOptions, EmbeddingDetail, FormulationError};
use crate::mip::{MipModel, ModelError, ObjSense, VarId, DEFAULT_FEASTOL, DEFAULT_INTTOL};
use crate::predictor::{Core, Head, Predictor, PredictorError, TreeNode};
use crate::solve::{bb_solve, solve_lp_relaxation, SolveLimits, SolveStatus};

const BIG: f64 = 1e9;
const GUARD: f64 = 1e-6;
const MIN_RATIO: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceReport {
    pub bound: f64,
    pub guard: f64,
    pub feastol: f64,
    /// Largest `y` the four big-M rows allow with the guard at `guard`.
    pub bigm_max_y: f64,
    /// The same with the guard at exactly 0.
    pub bigm_honest_max_y: f64,
    /// Largest `|y|` the SOS1 block allows when each member may be off zero by `feastol`.
    pub sos1_max_deviation: f64,
    pub ratio: f64,
    /// The big-M witness passes `check_assignment` at the default tolerances.
    pub bigm_witness_accepted: bool,
    pub sos1_witness_accepted: bool,
}

impl ToleranceReport {
    pub fn passed(&self) -> bool {
        let expect = self.bound * self.guard;
        (self.bigm_max_y - expect).abs() <= self.feastol
            && self.bigm_honest_max_y.abs() <= self.feastol
            && self.sos1_max_deviation <= self.feastol * (1.0 + 1e-9)
            && self.ratio >= MIN_RATIO
            && self.bigm_witness_accepted
            && self.sos1_witness_accepted
    }
}

impl fmt::Display for ToleranceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} big-M max y {:.6e} (guard {:e}, honest {:.1e}), SOS1 max deviation {:.3e}, ratio {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.bigm_max_y,
            self.guard,
            self.bigm_honest_max_y,
            self.sos1_max_deviation,
            self.ratio
        )
    }
}

fn max_y(model: &mut MipModel, y: VarId) -> Result<(f64, Vec<f64>), ModelError> {
    model.set_objective(ObjSense::Maximize, &[(y, 1.0)], 0.0)?;
    let r = solve_lp_relaxation(model);
    if r.status != SolveStatus::Optimal {
        return Ok((f64::NAN, Vec::new()));
    }
    Ok((r.objective, r.assignment))
}

fn bigm_block(guard: f64) -> Result<(f64, bool), FormulationError> {
    let mut m = MipModel::new();
    let x = m.add_continuous(0.0, 0.0, "x")?;
    let nv = embed_relu_bigm(&mut m, &[(x, 1.0)], 0.0, -BIG, BIG, "demo", false)?;
    let z = nv.z.expect("big-M neuron has a guard");
    m.fix_var_unchecked(z, guard);
    let (y, point) = max_y(&mut m, nv.y)?;
    let mut model = m.clone();
    // The witness is checked against the real binary domain of z.
    model.set_var_bounds(z, 0.0, 1.0)?;
    let ok = !point.is_empty() && model.check_assignment(&point, DEFAULT_FEASTOL, DEFAULT_INTTOL)?.is_feasible();
    Ok((y, ok))
}

fn sos1_block(feastol: f64) -> Result<(f64, bool), FormulationError> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut template = None;
    // Each SOS1 branch pins one member to [0, feastol].
    for pinned in 0..2 {
        let mut m = MipModel::new();
        let x = m.add_continuous(0.0, 0.0, "x")?;
        let nv = embed_relu_sos1(&mut m, &[(x, 1.0)], 0.0, "demo")?;
        let s = nv.s.expect("SOS1 neuron has a slack");
        template.get_or_insert_with(|| m.clone());
        let member = if pinned == 0 { s } else { nv.y };
        m.set_var_bounds(member, 0.0, feastol)?;
        let (y, point) = max_y(&mut m, nv.y)?;
        if y > best.0 {
            best = (y, point);
        }
    }
    let model = template.expect("two branches ran");
    let ok = !best.1.is_empty() && model.check_assignment(&best.1, feastol, DEFAULT_INTTOL)?.is_feasible();
    Ok((best.0.abs(), ok))
}

/// Single-neuron ReLU at pre-activation 0 with bounds `±1e9`, encoded both ways.
pub fn tolerance_demo() -> Result<ToleranceReport, FormulationError> {
    let (bigm_max_y, bigm_witness_accepted) = bigm_block(GUARD)?;
    let (bigm_honest_max_y, _) = bigm_block(0.0)?;
    let (sos1_max_deviation, sos1_witness_accepted) = sos1_block(DEFAULT_FEASTOL)?;
    Ok(ToleranceReport {
        bound: BIG,
        guard: GUARD,
        feastol: DEFAULT_FEASTOL,
        bigm_max_y,
        bigm_honest_max_y,
        sos1_max_deviation,
        ratio: bigm_max_y / sos1_max_deviation.max(f64::MIN_POSITIVE),
        bigm_witness_accepted,
        sos1_witness_accepted,
    })
}

/// For each leaf of `tree`, whether the embedding with split margin `eps` admits it at input `x`.
pub fn leaf_feasibility(tree: &TreeNode, x: &[f64], eps: f64) -> Result<Vec<bool>, FormulationError> {
    let p = Predictor::new(Core::Tree(tree.clone()), Head::Regression, x.len()).map_err(|e: PredictorError| {
        FormulationError::InvalidOption(e.to_string())
    })?;
    let mut base = MipModel::new();
    let inputs = x
        .iter()
        .enumerate()
        .map(|(i, &v)| base.add_continuous(v, v, format!("x{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let e = embed_predictor(&mut base, &p, &inputs, None, &EmbedOptions::default().with_epsilon(eps))?;
    let EmbeddingDetail::Trees { leaves } = &e.detail else {
        return Err(FormulationError::InvalidOption("tree embedding without leaf binaries".into()));
    };
    let mut out = Vec::with_capacity(leaves[0].len());
    for &d in &leaves[0] {
        let mut m = base.clone();
        m.set_var_bounds(d, 1.0, 1.0)?;
        let r = bb_solve(&m, &SolveLimits::default());
        out.push(r.status == SolveStatus::Optimal);
    }
    Ok(out)
}
