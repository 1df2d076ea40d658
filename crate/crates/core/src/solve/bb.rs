//! Best-bound branch-and-bound over integrality, SOS1 and indicator constraints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::mip::{IndicatorCons, MipModel, ObjSense, Sense};

use super::simplex::{simplex_solve, LpProblem, LpRow, LpStatus};
use super::{SolveLimits, SolveResult, SolveStatus};

/// Values within this of an integer, or of zero for SOS members, need no branching.
const BRANCH_TOL: f64 = 1e-9;

struct Node {
    bound: f64,
    seq: u64,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap order: the smallest bound, then the oldest node, is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

enum IndState {
    Active,
    Inactive,
    BigM,
    Unresolved,
}

/// Interval of `Σ terms` over the node bounds.
fn activity(terms: &[(crate::mip::VarId, f64)], lb: &[f64], ub: &[f64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(v, c) in terms {
        let (a, b) = (c * lb[v.index()], c * ub[v.index()]);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

fn row_of(terms: &[(crate::mip::VarId, f64)], sense: Sense, rhs: f64) -> LpRow {
    let terms = terms.iter().map(|&(v, c)| (v.index(), c)).collect();
    match sense {
        Sense::Le => LpRow { terms, lo: f64::NEG_INFINITY, hi: rhs },
        Sense::Ge => LpRow { terms, lo: rhs, hi: f64::INFINITY },
        Sense::Eq => LpRow { terms, lo: rhs, hi: rhs },
    }
}

/// Add the implied row of `c`, written as a big-M row on the guard when
/// it is not fixed. Returns how the indicator was handled.
fn indicator_row(c: &IndicatorCons, lb: &[f64], ub: &[f64]) -> (IndState, Option<LpRow>) {
    let g = c.guard.index();
    let act = c.active_value();
    if lb[g] == ub[g] {
        return if lb[g] == act {
            (IndState::Active, Some(row_of(&c.implied.terms, c.implied.sense, c.implied.rhs)))
        } else {
            (IndState::Inactive, None)
        };
    }
    let (lo, hi) = activity(&c.implied.terms, lb, ub);
    let b = c.implied.rhs;
    let mut terms: Vec<(usize, f64)> = c.implied.terms.iter().map(|&(v, a)| (v.index(), a)).collect();
    match c.implied.sense {
        Sense::Le => {
            if !hi.is_finite() {
                return (IndState::Unresolved, None);
            }
            let m = (hi - b).max(0.0);
            // active 1: a·x + M z <= b + M; active 0: a·x - M z <= b
            if c.active {
                terms.push((g, m));
                (IndState::BigM, Some(LpRow { terms, lo: f64::NEG_INFINITY, hi: b + m }))
            } else {
                terms.push((g, -m));
                (IndState::BigM, Some(LpRow { terms, lo: f64::NEG_INFINITY, hi: b }))
            }
        }
        Sense::Ge => {
            if !lo.is_finite() {
                return (IndState::Unresolved, None);
            }
            let m = (b - lo).max(0.0);
            if c.active {
                terms.push((g, -m));
                (IndState::BigM, Some(LpRow { terms, lo: b - m, hi: f64::INFINITY }))
            } else {
                terms.push((g, m));
                (IndState::BigM, Some(LpRow { terms, lo: b, hi: f64::INFINITY }))
            }
        }
        Sense::Eq => (IndState::Unresolved, None),
    }
}

struct Search<'a> {
    model: &'a MipModel,
    base: LpProblem,
    limits: &'a SolveLimits,
    iterations: usize,
    numerical_trouble: bool,
}

enum NodeOutcome {
    Infeasible,
    Failed,
    Unbounded { ray: Vec<f64>, unresolved: Vec<usize> },
    Solved { obj: f64, x: Vec<f64> },
}

impl<'a> Search<'a> {
    fn node_lp(&self, lb: &[f64], ub: &[f64]) -> (LpProblem, Vec<usize>) {
        let mut lp = self.base.clone();
        lp.lb = lb.to_vec();
        lp.ub = ub.to_vec();
        let mut unresolved = Vec::new();
        for (k, c) in self.model.indicator_constraints().iter().enumerate() {
            let (state, row) = indicator_row(c, lb, ub);
            if let Some(r) = row {
                lp.rows.push(r);
            }
            if matches!(state, IndState::Unresolved) {
                unresolved.push(k);
            }
        }
        (lp, unresolved)
    }

    fn solve_node(&mut self, lb: &[f64], ub: &[f64]) -> NodeOutcome {
        let (lp, unresolved) = self.node_lp(lb, ub);
        let sol = simplex_solve(&lp);
        self.iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => NodeOutcome::Solved { obj: sol.objective, x: sol.x },
            LpStatus::Infeasible => NodeOutcome::Infeasible,
            LpStatus::Unbounded => NodeOutcome::Unbounded { ray: sol.ray.unwrap_or_default(), unresolved },
            LpStatus::NumericalFailure | LpStatus::IterationLimit => NodeOutcome::Failed,
        }
    }

    /// Children excluding `x`, or `None` when `x` satisfies every discrete rule.
    fn branch(&self, x: &[f64], lb: &[f64], ub: &[f64]) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        // Most fractional integer variable; lowest id wins ties.
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in self.model.vars().iter().enumerate() {
            if v.kind.is_integral() {
                let frac = (x[j] - x[j].round()).abs();
                if frac > BRANCH_TOL && best.is_none_or(|(_, f)| frac > f) {
                    best = Some((j, frac));
                }
            }
        }
        if let Some((j, _)) = best {
            let mut down_ub = ub.to_vec();
            down_ub[j] = x[j].floor();
            let mut up_lb = lb.to_vec();
            up_lb[j] = x[j].ceil();
            return Some(vec![(lb.to_vec(), down_ub), (up_lb, ub.to_vec())]);
        }
        // Most violated SOS1.
        let mut best: Option<(usize, f64)> = None;
        for (k, s) in self.model.sos1_constraints().iter().enumerate() {
            let mags: Vec<f64> = s.members.iter().map(|v| x[v.index()].abs()).collect();
            if mags.iter().filter(|&&m| m > BRANCH_TOL).count() >= 2 {
                let viol = mags.iter().sum::<f64>() - mags.iter().cloned().fold(0.0, f64::max);
                if best.is_none_or(|(_, b)| viol > b) {
                    best = Some((k, viol));
                }
            }
        }
        if let Some((k, _)) = best {
            let s = &self.model.sos1_constraints()[k];
            let nz: Vec<usize> = (0..s.members.len())
                .filter(|&i| x[s.members[i].index()].abs() > BRANCH_TOL)
                .collect();
            return Some(self.sos_children(k, nz[0], *nz.last().expect("two nonzeros"), lb, ub));
        }
        // Indicator whose guard sits at the active value but whose row is violated.
        for c in self.model.indicator_constraints() {
            let g = c.guard.index();
            if (x[g] - c.active_value()).abs() <= BRANCH_TOL && lb[g] != ub[g] {
                let viol = c.implied.violation(x);
                if viol > 1e-9 * (1.0 + c.implied.rhs.abs()) {
                    return Some(self.guard_children(c, lb, ub));
                }
            }
        }
        None
    }

    fn guard_children(&self, c: &IndicatorCons, lb: &[f64], ub: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let g = c.guard.index();
        let mut out = Vec::with_capacity(2);
        for v in [c.active_value(), 1.0 - c.active_value()] {
            if v >= lb[g] && v <= ub[g] {
                let (mut l, mut u) = (lb.to_vec(), ub.to_vec());
                l[g] = v;
                u[g] = v;
                out.push((l, u));
            }
        }
        out
    }

    /// Split SOS `k` at the weight midpoint of members `first` and `last`.
    fn sos_children(&self, k: usize, first: usize, last: usize, lb: &[f64], ub: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let s = &self.model.sos1_constraints()[k];
        let mid = 0.5 * (s.weights[first] + s.weights[last]);
        let mut out = Vec::with_capacity(2);
        for keep_low in [true, false] {
            let (mut l, mut u) = (lb.to_vec(), ub.to_vec());
            let mut ok = true;
            for (i, &v) in s.members.iter().enumerate() {
                let zero = if keep_low { s.weights[i] > mid } else { s.weights[i] <= mid };
                if zero {
                    let j = v.index();
                    if l[j] > 0.0 || u[j] < 0.0 {
                        ok = false;
                        break;
                    }
                    l[j] = 0.0;
                    u[j] = 0.0;
                }
            }
            if ok {
                out.push((l, u));
            }
        }
        out
    }

    /// Branching for an unbounded relaxation, guided by the ray's support.
    fn branch_unbounded(
        &self,
        ray: &[f64],
        unresolved: &[usize],
        lb: &[f64],
        ub: &[f64],
    ) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        let inds = self.model.indicator_constraints();
        let on_ray = |j: usize| ray.get(j).is_some_and(|r| r.abs() > BRANCH_TOL);
        let free_members = |k: usize| -> Vec<usize> {
            let s = &self.model.sos1_constraints()[k];
            (0..s.members.len())
                .filter(|&i| {
                    let j = s.members[i].index();
                    !(lb[j] == 0.0 && ub[j] == 0.0)
                })
                .collect()
        };
        let sos_on_ray = (0..self.model.sos1_constraints().len()).find(|&k| {
            let s = &self.model.sos1_constraints()[k];
            free_members(k).len() >= 2 && s.members.iter().any(|v| on_ray(v.index()))
        });
        let ind_on_ray = unresolved
            .iter()
            .copied()
            .find(|&k| inds[k].implied.terms.iter().any(|(v, _)| on_ray(v.index())));
        let sos_any = (0..self.model.sos1_constraints().len()).find(|&k| free_members(k).len() >= 2);
        if let Some(k) = ind_on_ray {
            return Some(self.guard_children(&inds[k], lb, ub));
        }
        if let Some(k) = sos_on_ray.or(sos_any) {
            let f = free_members(k);
            return Some(self.sos_children(k, f[0], *f.last().expect("two members"), lb, ub));
        }
        unresolved.first().map(|&k| self.guard_children(&inds[k], lb, ub))
    }

    /// Re-solve with every integer fixed and SOS zeros pinned, so the returned
    /// point satisfies the discrete rules exactly.
    fn polish(&mut self, x: &[f64], lb: &[f64], ub: &[f64]) -> Option<Vec<f64>> {
        let (mut l, mut u) = (lb.to_vec(), ub.to_vec());
        for (j, v) in self.model.vars().iter().enumerate() {
            if v.kind.is_integral() {
                let r = x[j].round().clamp(l[j], u[j]);
                l[j] = r;
                u[j] = r;
            }
        }
        for s in self.model.sos1_constraints() {
            for v in &s.members {
                let j = v.index();
                if x[j].abs() <= BRANCH_TOL && l[j] <= 0.0 && u[j] >= 0.0 {
                    l[j] = 0.0;
                    u[j] = 0.0;
                }
            }
        }
        let (lp, _) = self.node_lp(&l, &u);
        let sol = simplex_solve(&lp);
        self.iterations += sol.iterations;
        (sol.status == LpStatus::Optimal).then_some(sol.x)
    }

    fn accept(&self, x: &[f64]) -> bool {
        self.model
            .check_assignment(x, self.limits.feastol, self.limits.inttol)
            .map(|r| r.is_feasible())
            .unwrap_or(false)
    }
}

fn internal_objective(model: &MipModel, x: &[f64]) -> f64 {
    let v = model.objective().value(x) - model.objective().constant;
    match model.objective().sense {
        ObjSense::Minimize => v,
        ObjSense::Maximize => -v,
    }
}

/// Solve `model` to optimality within `limits`.
pub fn bb_solve(model: &MipModel, limits: &SolveLimits) -> SolveResult {
    let start = Instant::now();
    let mut search = Search {
        model,
        base: LpProblem::from_model(model),
        limits,
        iterations: 0,
        numerical_trouble: false,
    };
    let mut lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
    for (j, v) in model.vars().iter().enumerate() {
        if v.kind.is_integral() {
            lb[j] = lb[j].ceil();
            ub[j] = ub[j].floor();
        }
    }
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, lb, ub });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut unbounded = false;
    let mut limit_status = None;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - limits.gap {
                continue;
            }
        }
        if nodes >= limits.max_nodes {
            heap.push(node);
            limit_status = Some(SolveStatus::NodeLimit);
            break;
        }
        if start.elapsed().as_secs_f64() > limits.max_seconds {
            heap.push(node);
            limit_status = Some(SolveStatus::TimeLimit);
            break;
        }
        nodes += 1;
        if node.lb.iter().zip(&node.ub).any(|(l, u)| l > u) {
            continue;
        }
        let (children, child_bound) = match search.solve_node(&node.lb, &node.ub) {
            NodeOutcome::Infeasible => continue,
            NodeOutcome::Failed => {
                search.numerical_trouble = true;
                continue;
            }
            NodeOutcome::Unbounded { ray, unresolved } => {
                match search.branch_unbounded(&ray, &unresolved, &node.lb, &node.ub) {
                    Some(c) => (c, f64::NEG_INFINITY),
                    None => {
                        unbounded = true;
                        break;
                    }
                }
            }
            NodeOutcome::Solved { obj, x } => {
                if let Some((best, _)) = &incumbent {
                    if obj >= best - limits.gap {
                        continue;
                    }
                }
                match search.branch(&x, &node.lb, &node.ub) {
                    Some(c) => (c, obj),
                    None => {
                        let cand = search
                            .polish(&x, &node.lb, &node.ub)
                            .filter(|p| search.accept(p))
                            .or_else(|| search.accept(&x).then(|| x.clone()));
                        match cand {
                            Some(p) => {
                                let v = internal_objective(model, &p);
                                if incumbent.as_ref().is_none_or(|(b, _)| v < *b) {
                                    incumbent = Some((v, p));
                                }
                            }
                            None => search.numerical_trouble = true,
                        }
                        continue;
                    }
                }
            }
        };
        for (l, u) in children {
            seq += 1;
            heap.push(Node { bound: child_bound, seq, lb: l, ub: u });
        }
    }

    let best_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(incumbent.as_ref().map_or(f64::INFINITY, |(b, _)| *b), f64::min);
    let status = if unbounded {
        SolveStatus::UnboundedRelaxation
    } else if let Some(s) = limit_status {
        s
    } else if search.numerical_trouble {
        SolveStatus::NumericalFailure
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let sign = match model.objective().sense {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    };
    let (objective, assignment) = match incumbent {
        Some((_, x)) => (model.objective().value(&x), x),
        None => (f64::NAN, Vec::new()),
    };
    SolveResult {
        status,
        objective,
        assignment,
        node_count: nodes,
        iterations: search.iterations,
        best_bound: sign * best_bound + model.objective().constant,
    }
}
