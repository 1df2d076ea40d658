//! Dense bounded-variable primal simplex with an explicit basis inverse.
//!
//! Each row `lo <= a·x <= hi` gets a logical column `r` with `A x - r = 0`
//! and bounds `[lo, hi]`. Rows violated by the starting point receive an
//! artificial column; phase 1 drives the artificials to zero.

use crate::mip::{MipModel, ObjSense};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

fn ptol(b: f64) -> f64 {
    if b.is_finite() {
        PRIMAL_TOL * (1.0 + b.abs())
    } else {
        PRIMAL_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// `min cost·x` subject to row ranges and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub cost: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    /// Linear part of `model` with the objective in minimization form.
    pub fn from_model(model: &MipModel) -> Self {
        let n = model.num_vars();
        let mut cost = vec![0.0; n];
        let sign = match model.objective().sense {
            ObjSense::Minimize => 1.0,
            ObjSense::Maximize => -1.0,
        };
        for &(v, c) in &model.objective().terms {
            cost[v.index()] += sign * c;
        }
        let rows = model
            .linear_constraints()
            .iter()
            .map(|c| {
                let (lo, hi) = match c.sense {
                    crate::mip::Sense::Le => (f64::NEG_INFINITY, c.rhs),
                    crate::mip::Sense::Ge => (c.rhs, f64::INFINITY),
                    crate::mip::Sense::Eq => (c.rhs, c.rhs),
                };
                LpRow { terms: c.terms.iter().map(|&(v, a)| (v.index(), a)).collect(), lo, hi }
            })
            .collect();
        LpProblem {
            lb: model.vars().iter().map(|v| v.lb).collect(),
            ub: model.vars().iter().map(|v| v.ub).collect(),
            cost,
            rows,
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lb[j] - x[j]).max(x[j] - self.ub[j]);
        }
        for r in &self.rows {
            let a: f64 = r.terms.iter().map(|&(j, c)| c * x[j]).sum();
            worst = worst.max(r.lo - a).max(a - r.hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Minimization objective; meaningful for `Optimal` (and the last point for `Unbounded`).
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Improving direction over the structural variables when unbounded.
    pub ray: Option<Vec<f64>>,
}

enum Phase {
    Optimal,
    Unbounded(Vec<f64>),
    Failure,
    IterLimit,
}

struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    iters: usize,
    since_refactor: usize,
    max_iters: usize,
}

const NONBASIC: usize = usize::MAX;

impl Simplex {
    fn is_basic(&self, j: usize) -> bool {
        self.pos[j] != NONBASIC
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        // Dense B with an identity on the right; Gauss-Jordan with partial pivoting.
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * w + i] = v;
            }
        }
        for i in 0..m {
            a[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let mut best = c;
            let mut bv = a[c * w + c].abs();
            for r in c + 1..m {
                let v = a[r * w + c].abs();
                if v > bv {
                    bv = v;
                    best = r;
                }
            }
            if bv < 1e-11 {
                return false;
            }
            if best != c {
                for k in 0..w {
                    a.swap(c * w + k, best * w + k);
                }
            }
            let p = a[c * w + c];
            for k in 0..w {
                a[c * w + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * w + c];
                    if f != 0.0 {
                        for k in 0..w {
                            a[r * w + k] -= f * a[c * w + k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = a[i * w + m + k];
            }
        }
        // Recompute basic values from the nonbasic ones.
        let mut rhs = vec![0.0; m];
        for j in 0..self.cols.len() {
            if !self.is_basic(j) && self.x[j] != 0.0 {
                for &(r, v) in &self.cols[j] {
                    rhs[r] -= v * self.x[j];
                }
            }
        }
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..m {
                s += self.binv[i * m + k] * rhs[k];
            }
            self.x[self.basis[i]] = s;
        }
        self.since_refactor = 0;
        true
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, v) in &self.cols[j] {
            for i in 0..m {
                alpha[i] += self.binv[i * m + k] * v;
            }
        }
        alpha
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let c = cost[self.basis[i]];
            if c != 0.0 {
                for k in 0..m {
                    y[k] += c * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
            }
        }
    }

    fn run(&mut self, cost: &[f64], bland_after: usize) -> Phase {
        let mut phase_iters = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Phase::Failure;
            }
            if self.iters >= self.max_iters {
                return Phase::IterLimit;
            }
            let bland = phase_iters >= bland_after;
            let y = self.duals(cost);
            // Pricing.
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.len() {
                if self.is_basic(j) || self.lb[j] == self.ub[j] {
                    continue;
                }
                let mut d = cost[j];
                for &(k, v) in &self.cols[j] {
                    d -= y[k] * v;
                }
                let xj = self.x[j];
                let dir = if xj <= self.lb[j] {
                    if d < -DUAL_TOL { 1.0 } else { continue }
                } else if xj >= self.ub[j] {
                    if d > DUAL_TOL { -1.0 } else { continue }
                } else if d.abs() > DUAL_TOL {
                    -d.signum()
                } else {
                    continue;
                };
                let better = match enter {
                    None => true,
                    Some((_, _, best)) => !bland && d.abs() > best,
                };
                if better {
                    enter = Some((j, dir, d.abs()));
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, dir, _)) = enter else {
                if self.since_refactor > 0 {
                    if !self.refactor() {
                        return Phase::Failure;
                    }
                    continue;
                }
                return Phase::Optimal;
            };
            let alpha = self.ftran(q);

            // Ratio test. Basic i moves at rate -dir * alpha_i.
            let own = if dir > 0.0 { self.ub[q] - self.x[q] } else { self.x[q] - self.lb[q] };
            let limit = |i: usize, relaxed: bool| -> Option<(f64, f64)> {
                let a = alpha[i];
                if a.abs() <= PIVOT_TOL {
                    return None;
                }
                let b = self.basis[i];
                let rate = -dir * a;
                let (bound, gap) = if rate < 0.0 {
                    let lb = self.lb[b];
                    if lb == f64::NEG_INFINITY {
                        return None;
                    }
                    (lb, self.x[b] - lb)
                } else {
                    let ub = self.ub[b];
                    if ub == f64::INFINITY {
                        return None;
                    }
                    (ub, ub - self.x[b])
                };
                let gap = if relaxed { gap + ptol(bound) } else { gap.max(0.0) };
                Some((gap / rate.abs(), bound))
            };
            let mut leave: Option<(usize, f64)> = None;
            let mut step = own;
            if bland {
                let mut best = f64::INFINITY;
                for i in 0..self.m {
                    if let Some((t, bound)) = limit(i, false) {
                        let better = t < best - 1e-12
                            || (t <= best + 1e-12
                                && leave.is_some_and(|(l, _)| self.basis[i] < self.basis[l]));
                        if better {
                            best = t;
                            leave = Some((i, bound));
                        }
                    }
                }
                if leave.is_some() && best < own {
                    step = best;
                } else {
                    leave = None;
                }
            } else {
                let mut tmax = f64::INFINITY;
                for i in 0..self.m {
                    if let Some((t, _)) = limit(i, true) {
                        tmax = tmax.min(t);
                    }
                }
                if tmax < own {
                    let mut best_a = 0.0;
                    for i in 0..self.m {
                        if let Some((t, bound)) = limit(i, false) {
                            if t <= tmax && alpha[i].abs() > best_a {
                                best_a = alpha[i].abs();
                                leave = Some((i, bound));
                                step = t;
                            }
                        }
                    }
                }
            }
            if leave.is_none() && step == f64::INFINITY {
                let mut ray = vec![0.0; self.n];
                if q < self.n {
                    ray[q] = dir;
                }
                for i in 0..self.m {
                    let b = self.basis[i];
                    if b < self.n {
                        ray[b] = -dir * alpha[i];
                    }
                }
                return Phase::Unbounded(ray);
            }

            self.iters += 1;
            phase_iters += 1;
            for i in 0..self.m {
                if alpha[i] != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir * step * alpha[i];
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some((r, bound)) => {
                    self.x[q] += dir * step;
                    let out = self.basis[r];
                    self.x[out] = bound;
                    self.pos[out] = NONBASIC;
                    self.basis[r] = q;
                    self.pos[q] = r;
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                }
            }
        }
    }
}

/// Solve `lp` to optimality, proving infeasibility or unboundedness.
pub fn simplex_solve(lp: &LpProblem) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.rows.len();
    let fail = |status: LpStatus, iterations: usize| LpSolution {
        status,
        objective: f64::NAN,
        x: Vec::new(),
        iterations,
        ray: None,
    };
    for j in 0..n {
        if lp.lb[j] > lp.ub[j] + ptol(lp.ub[j]) || lp.lb[j] == f64::INFINITY || lp.ub[j] == f64::NEG_INFINITY {
            return fail(LpStatus::Infeasible, 0);
        }
    }
    for r in &lp.rows {
        if r.lo > r.hi + ptol(r.hi) {
            return fail(LpStatus::Infeasible, 0);
        }
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
    for (i, r) in lp.rows.iter().enumerate() {
        for &(j, a) in &r.terms {
            if a != 0.0 {
                cols[j].push((i, a));
            }
        }
        cols[n + i].push((i, -1.0));
    }
    let mut lb: Vec<f64> = lp.lb.clone();
    let mut ub: Vec<f64> = lp.ub.iter().zip(&lp.lb).map(|(&u, &l)| u.max(l)).collect();
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            if lb[j].is_finite() {
                lb[j]
            } else if ub[j].is_finite() {
                ub[j]
            } else {
                0.0
            }
        })
        .collect();
    let mut basis = Vec::with_capacity(m);
    let mut arts = Vec::new();
    for (i, r) in lp.rows.iter().enumerate() {
        let act: f64 = r.terms.iter().map(|&(j, a)| a * x[j]).sum();
        lb.push(r.lo);
        ub.push(r.hi.max(r.lo));
        if act < r.lo - ptol(r.lo) || act > r.hi + ptol(r.hi) {
            let b = if act < r.lo { r.lo } else { r.hi };
            x.push(b);
            arts.push((i, b - act));
        } else {
            x.push(act);
            basis.push((i, n + i));
        }
    }
    let mut basis_of_row = vec![NONBASIC; m];
    for &(i, j) in &basis {
        basis_of_row[i] = j;
    }
    for &(i, gap) in &arts {
        // Artificial column s·e_i with s·a = b - act, a >= 0.
        let s = if gap >= 0.0 { 1.0 } else { -1.0 };
        cols.push(vec![(i, s)]);
        lb.push(0.0);
        ub.push(f64::INFINITY);
        x.push(gap.abs());
        basis_of_row[i] = cols.len() - 1;
    }
    let total = cols.len();
    let mut pos = vec![NONBASIC; total];
    for (i, &j) in basis_of_row.iter().enumerate() {
        pos[j] = i;
    }
    let mut s = Simplex {
        m,
        n,
        cols,
        lb,
        ub,
        x,
        basis: basis_of_row,
        pos,
        binv: vec![0.0; m * m],
        iters: 0,
        since_refactor: 0,
        max_iters: 20_000 + 50 * (n + m),
    };
    if !s.refactor() {
        return fail(LpStatus::NumericalFailure, 0);
    }
    let bland_after = 100.max(5 * (n + m));

    if !arts.is_empty() {
        let mut c1 = vec![0.0; total];
        for c in c1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        match s.run(&c1, bland_after) {
            Phase::Optimal => {}
            Phase::IterLimit => return fail(LpStatus::IterationLimit, s.iters),
            _ => return fail(LpStatus::NumericalFailure, s.iters),
        }
        for (k, &(i, _)) in arts.iter().enumerate() {
            let j = n + m + k;
            let r = &lp.rows[i];
            let scale = if s.cols[j][0].1 > 0.0 { r.lo } else { r.hi };
            if s.x[j] > ptol(scale) {
                return LpSolution { iterations: s.iters, ..fail(LpStatus::Infeasible, s.iters) };
            }
            s.ub[j] = 0.0;
            if !s.is_basic(j) {
                s.x[j] = 0.0;
            }
        }
    }

    let mut c2 = vec![0.0; total];
    c2[..n].copy_from_slice(&lp.cost);
    let outcome = s.run(&c2, bland_after);
    let xs: Vec<f64> = s.x[..n].to_vec();
    match outcome {
        Phase::Optimal => {
            let viol = lp.max_violation(&xs);
            let scale = lp
                .rows
                .iter()
                .flat_map(|r| [r.lo, r.hi])
                .chain(lp.lb.iter().copied())
                .chain(lp.ub.iter().copied())
                .filter(|v| v.is_finite())
                .fold(1.0f64, |a, v| a.max(v.abs()));
            if viol > 1e-7 * scale {
                return fail(LpStatus::NumericalFailure, s.iters);
            }
            LpSolution {
                status: LpStatus::Optimal,
                objective: lp.objective(&xs),
                x: xs,
                iterations: s.iters,
                ray: None,
            }
        }
        Phase::Unbounded(ray) => LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            x: xs,
            iterations: s.iters,
            ray: Some(ray),
        },
        Phase::IterLimit => fail(LpStatus::IterationLimit, s.iters),
        Phase::Failure => fail(LpStatus::NumericalFailure, s.iters),
    }
}
