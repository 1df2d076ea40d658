//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surromip::formulator::EmbedOptions;
use surromip::io::{parse_lp, parse_mps, write_lp, write_mps_named};
use surromip::predictor::{Core, Head};
use surromip::solve::{bb_solve, simplex_solve, LpProblem, LpRow, LpStatus, SolveLimits, SolveStatus};
use surromip::surrogatelib::{
    fabricate_predictor, generate_instance, instance_name, FabricateSpec, Family, InstanceRecipe, PredictorKind,
};
use surromip::verify::{
    check_exactness, leaf_feasibility, oracle_enumerate_nn, oracle_enumerate_tree, tolerance_demo,
};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- exactness

const EXACT_PREDICTORS: usize = 100;
const EXACT_INPUTS: usize = 100;

fn random_spec(rng: &mut ChaCha8Rng, argmax: bool) -> FabricateSpec {
    let n = rng.gen_range(1..=4);
    let input_box = (0..n)
        .map(|_| {
            let lo = rng.gen_range(-2.0..0.0);
            (lo, lo + rng.gen_range(0.5..3.0))
        })
        .collect();
    let mut spec = FabricateSpec::regression(input_box, (-5.0, 5.0));
    if argmax {
        spec.outputs = 3;
        spec.head = Head::Argmax;
    }
    spec
}

fn random_params(rng: &mut ChaCha8Rng, kind: PredictorKind) -> Vec<usize> {
    match kind {
        PredictorKind::Linear => vec![],
        PredictorKind::Dt => vec![rng.gen_range(1..=4)],
        PredictorKind::Rf | PredictorKind::Gbdt => vec![rng.gen_range(1..=5), rng.gen_range(1..=3)],
        PredictorKind::MlpSos | PredictorKind::MlpBigm => vec![rng.gen_range(1..=2), rng.gen_range(1..=8)],
    }
}

fn exactness() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, kind) in PredictorKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
        let (mut samples, mut skipped, mut failures, mut dev) = (0, 0, 0, 0.0f64);
        for i in 0..EXACT_PREDICTORS {
            let spec = random_spec(&mut rng, i % 5 == 4);
            let params = random_params(&mut rng, kind);
            let p = match fabricate_predictor(kind, &params, &spec, rng.gen()) {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("{kind}: fabrication failed: {e}")),
            };
            let opts = EmbedOptions::default()
                .with_formulation(kind.relu_formulation())
                .with_box(spec.input_box.clone());
            let report = match check_exactness(&p, &opts, EXACT_INPUTS, rng.gen()) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("{kind}: embedding failed: {e}")),
            };
            if !report.passed() {
                eprint!("{report}");
            }
            samples += report.samples;
            skipped += report.boundary_skipped;
            failures += report.failures.len();
            dev = dev.max(report.max_deviation);
        }
        ok &= failures == 0 && dev <= 1e-6;
        lines.push(format!("{kind} {samples}/{skipped}/{failures} dev {dev:.1e}"));
    }
    outcome(ok, format!("tested/skipped/failed: {}", lines.join(", ")))
}

// ---------------------------------------------------------- oracle equivalence

fn tiny_recipes() -> Vec<InstanceRecipe> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    let mut push = |family: Family, params: Vec<usize>, kind: PredictorKind, pp: Vec<usize>| {
        seed += 1;
        out.push(InstanceRecipe::new(family, kind, seed, 100 + seed).with_params(params).with_predictor_params(pp));
    };
    for n in 1..=2 {
        push(Family::Function, vec![n], PredictorKind::Linear, vec![]);
        push(Family::Function, vec![n], PredictorKind::Dt, vec![3]);
        push(Family::Function, vec![n], PredictorKind::Gbdt, vec![2, 2]);
        push(Family::Function, vec![n], PredictorKind::Rf, vec![3, 2]);
        push(Family::Function, vec![n], PredictorKind::MlpBigm, vec![1, 4]);
        push(Family::Function, vec![n], PredictorKind::MlpSos, vec![2, 3]);
        push(Family::Adversarial, vec![n + 1], PredictorKind::MlpBigm, vec![1, 3]);
        push(Family::Adversarial, vec![n + 1], PredictorKind::Dt, vec![2]);
        push(Family::Water, vec![n], PredictorKind::Dt, vec![2]);
        push(Family::Water, vec![n], PredictorKind::MlpSos, vec![1, 2]);
    }
    for kind in [PredictorKind::Linear, PredictorKind::Dt, PredictorKind::Gbdt, PredictorKind::MlpBigm, PredictorKind::MlpSos] {
        let pp = match kind {
            PredictorKind::Linear => vec![],
            PredictorKind::Dt => vec![3],
            PredictorKind::Gbdt => vec![2, 2],
            _ => vec![1, 4],
        };
        push(Family::Palatable, vec![], kind, pp.clone());
        push(Family::Wine, vec![2, 2], kind, pp.clone());
        push(Family::Wine, vec![2, 3], kind, if kind == PredictorKind::Dt { vec![2] } else { pp.clone() });
    }
    for s in 0..15 {
        let kind = [PredictorKind::Dt, PredictorKind::MlpBigm, PredictorKind::MlpSos][s % 3];
        let pp = if kind == PredictorKind::Dt { vec![3] } else { vec![2, 2] };
        push(Family::Function, vec![1 + s % 3], kind, pp);
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let recipes = tiny_recipes();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let (mut optimal, mut cases) = (0, 0);
    for r in &recipes {
        let name = instance_name(r);
        let inst = match generate_instance(r) {
            Ok(i) => i,
            Err(e) => {
                bad.push(format!("{name}: {e}"));
                continue;
            }
        };
        let blocks = inst.embedded();
        let is_tree = matches!(blocks[0].predictor.core(), Core::Tree(_) | Core::Ensemble(_));
        let oracle = if is_tree {
            oracle_enumerate_tree(&inst.model, &blocks)
        } else {
            oracle_enumerate_nn(&inst.model, &blocks)
        };
        let oracle = match oracle {
            Ok(o) => o,
            Err(e) => {
                bad.push(format!("{name}: oracle: {e}"));
                continue;
            }
        };
        let bb = bb_solve(&inst.model, &SolveLimits::default());
        cases += oracle.cases;
        optimal += usize::from(oracle.status == SolveStatus::Optimal);
        let agree = match (oracle.status, bb.status) {
            (SolveStatus::Optimal, SolveStatus::Optimal) => {
                let d = (bb.objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
                worst = worst.max(d);
                d <= 1e-6
            }
            (a, b) => a == b,
        };
        if !agree {
            bad.push(format!(
                "{name}: oracle {} {} vs bb {} {}",
                oracle.status, oracle.objective, bb.status, bb.objective
            ));
        }
    }
    for b in &bad {
        eprintln!("  {b}");
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} instances ({optimal} optimal, {cases} LPs), {} mismatches, worst relative gap {worst:.1e}",
            recipes.len(),
            bad.len()
        ),
    )
}

// ------------------------------------------------------------- tolerance demo

fn tolerance() -> Outcome {
    match tolerance_demo() {
        Ok(r) => {
            let text = r.to_string();
            outcome(r.passed(), text.split_once(' ').map_or(text.as_str(), |t| t.1).to_string())
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

// -------------------------------------------------------------- tree epsilon

fn tree_epsilon() -> Outcome {
    use surromip::predictor::TreeNode;
    let theta = 0.37;
    let t = TreeNode::split(0, theta, TreeNode::leaf(vec![1.0]), TreeNode::leaf(vec![2.0]));
    let tight = leaf_feasibility(&t, &[theta], 0.0);
    let wide = leaf_feasibility(&t, &[theta], 0.2);
    match (tight, wide) {
        (Ok(a), Ok(b)) => outcome(
            a == [true, true] && b == [false, false],
            format!("eps 0 -> {a:?}, eps 0.2 -> {b:?}"),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, e.to_string()),
    }
}

// ---------------------------------------------------- formulation equivalence

fn formulation_equivalence() -> Outcome {
    let families = [
        (Family::Function, vec![2]),
        (Family::Adversarial, vec![2]),
        (Family::Palatable, vec![]),
        (Family::Wine, vec![2, 3]),
        (Family::Water, vec![2]),
    ];
    let mut bad = Vec::new();
    let mut n = 0;
    for (i, (fam, params)) in families.iter().cycle().take(20).enumerate() {
        let pp = vec![1 + i % 2, 2 + i % 3];
        let solve = |kind| {
            let r = InstanceRecipe::new(*fam, kind, i as u64, 7 + i as u64)
                .with_params(params.clone())
                .with_predictor_params(pp.clone());
            generate_instance(&r).map(|inst| bb_solve(&inst.model, &SolveLimits::default()))
        };
        n += 1;
        match (solve(PredictorKind::MlpBigm), solve(PredictorKind::MlpSos)) {
            (Ok(a), Ok(b)) => {
                let same = a.status == b.status
                    && (a.status != SolveStatus::Optimal || close(a.objective, b.objective, 1e-6));
                if !same || a.status != SolveStatus::Optimal {
                    bad.push(format!("{fam} #{i}: bigm {} {} vs sos1 {} {}", a.status, a.objective, b.status, b.objective));
                }
            }
            (Err(e), _) | (_, Err(e)) => bad.push(format!("{fam} #{i}: {e}")),
        }
    }
    for b in &bad {
        eprintln!("  {b}");
    }
    outcome(bad.is_empty(), format!("{n} recipe pairs, {} differ", bad.len()))
}

// --------------------------------------------------------------- regeneration

fn name_conforms(name: &str, r: &InstanceRecipe) -> bool {
    let Some(stem) = name.strip_suffix(".mps") else { return false };
    let parts: Vec<&str> = stem.split('_').collect();
    let mut expect = vec![r.family.as_str().to_string()];
    if !r.params.is_empty() {
        expect.push(r.params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("-"));
    }
    expect.push(r.predictor.as_str().to_string());
    if !r.predictor_params.is_empty() {
        expect.push(r.predictor_params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("-"));
    }
    expect.push(r.framework.clone());
    expect.push(r.data_seed.to_string());
    expect.push(r.train_seed.to_string());
    parts == expect
}

fn regeneration() -> Outcome {
    let mut bad = Vec::new();
    let mut count = 0;
    for (i, fam) in Family::ALL.into_iter().enumerate() {
        for (j, kind) in [PredictorKind::Linear, PredictorKind::Gbdt, PredictorKind::MlpBigm].into_iter().enumerate() {
            count += 1;
            let r = InstanceRecipe::new(fam, kind, i as u64, j as u64);
            let name = instance_name(&r);
            let (a, b) = match (generate_instance(&r), generate_instance(&r)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    bad.push(format!("{name}: {e}"));
                    continue;
                }
            };
            let (mps_a, mps_b) = (write_mps_named(&a.model, &name), write_mps_named(&b.model, &name));
            let (lp_a, lp_b) = (write_lp(&a.model), write_lp(&b.model));
            if mps_a != mps_b || lp_a != lp_b || a.manifest.to_json() != b.manifest.to_json() {
                bad.push(format!("{name}: output differs between runs"));
            }
            match parse_lp(&lp_a) {
                Ok(m) if m.stats() == a.model.stats() => {}
                Ok(_) => bad.push(format!("{name}: LP parse changes counts")),
                Err(e) => bad.push(format!("{name}: parse_lp: {e}")),
            }
            match parse_mps(&mps_a) {
                Ok(m) if m.stats() == a.model.stats() => {}
                Ok(_) => bad.push(format!("{name}: MPS parse changes counts")),
                Err(e) => bad.push(format!("{name}: parse_mps: {e}")),
            }
            if a.manifest.counts != a.model.stats() {
                bad.push(format!("{name}: manifest counts differ from stats"));
            }
            if !name_conforms(&name, &r) {
                bad.push(format!("{name}: name does not follow the field scheme"));
            }
        }
    }
    for b in &bad {
        eprintln!("  {b}");
    }
    outcome(bad.is_empty(), format!("{count} instances over 9 families, {} problems", bad.len()))
}

// ------------------------------------------------------------------- simplex

/// Best objective over all vertices of `{x : a x <= b}` by solving every
/// n-subset of constraints as equalities.
fn vertex_enumeration(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let n = cost.len();
    let m = a.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(&idx.iter().map(|&i| a[i].clone()).collect::<Vec<_>>(), &idx.iter().map(|&i| b[i]).collect::<Vec<_>>()) {
            let feasible = a.iter().zip(b).all(|(row, &bi)| {
                let act: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
                act <= bi + 1e-9 * (1.0 + bi.abs())
            });
            if feasible {
                let v: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Next combination in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < m - n + k {
                break;
            }
        }
        idx[k] += 1;
        for t in k + 1..n {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                if f != 0.0 {
                    for k in c..=n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn simplex_vs_vertices() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = 0;
    let mut worst = 0.0f64;
    let total = 200;
    for t in 0..total {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=8);
        let lb: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..0.0)).collect();
        let ub: Vec<f64> = lb.iter().map(|l| l + rng.gen_range(0.5..6.0)).collect();
        let cost: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        // Right-hand sides sit near a box point; a negative offset can make the LP infeasible.
        let anchor: Vec<f64> = lb.iter().zip(&ub).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
        let mut rows = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..m {
            let coef: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.8) { rng.gen_range(-4.0..4.0) } else { 0.0 }).collect();
            let act: f64 = coef.iter().zip(&anchor).map(|(c, x)| c * x).sum();
            let rhs = act + rng.gen_range(-0.5..2.0);
            if rng.gen_bool(0.3) {
                let lo = 2.0 * act - rhs;
                a.push(coef.iter().map(|c| -c).collect());
                b.push(-lo);
                rows.push(LpRow { terms: coef.iter().copied().enumerate().collect(), lo, hi: f64::INFINITY });
            } else {
                a.push(coef.clone());
                b.push(rhs);
                rows.push(LpRow { terms: coef.iter().copied().enumerate().collect(), lo: f64::NEG_INFINITY, hi: rhs });
            }
        }
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            a.push(e.clone());
            b.push(ub[i]);
            e[i] = -1.0;
            a.push(e);
            b.push(-lb[i]);
        }
        let lp = LpProblem { lb, ub, cost: cost.clone(), rows };
        let sol = simplex_solve(&lp);
        let oracle = vertex_enumeration(&cost, &a, &b);
        let agree = match (sol.status, oracle) {
            (LpStatus::Optimal, Some(v)) => {
                let d = (sol.objective - v).abs();
                worst = worst.max(d);
                d <= 1e-7 && lp.max_violation(&sol.x) <= 1e-9 * (1.0 + v.abs())
            }
            (LpStatus::Infeasible, None) => true,
            _ => false,
        };
        if !agree {
            bad += 1;
            eprintln!("  lp #{t}: simplex {:?} {} vs vertices {oracle:?}", sol.status, sol.objective);
        }
    }
    outcome(bad == 0, format!("{total} LPs, {bad} mismatches, worst gap {worst:.1e}"))
}

// ---------------------------------------------------------------------- main

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("exactness", Duration::from_secs(300), exactness),
        ("oracle-equivalence", Duration::from_secs(600), oracle_equivalence),
        ("tolerance-amplification", Duration::from_secs(60), tolerance),
        ("tree-epsilon", Duration::from_secs(60), tree_epsilon),
        ("formulation-equivalence", Duration::from_secs(600), formulation_equivalence),
        ("regeneration", Duration::from_secs(120), regeneration),
        ("simplex-vertices", Duration::from_secs(600), simplex_vs_vertices),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let ok = o.ok && took <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s of {}s]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
