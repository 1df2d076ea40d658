//! MIP data model: variables, linear, indicator and SOS1 constraints and a
//! linear objective, plus a tolerance-aware feasibility checker.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FEASTOL: f64 = 1e-6;
pub const DEFAULT_INTTOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}`: lower bound {lb} exceeds upper bound {ub}")]
    CrossedBounds { name: String, lb: f64, ub: f64 },
    #[error("variable `{name}`: binary bounds must lie in {{0, 1}}, got [{lb}, {ub}]")]
    InvalidBinaryBounds { name: String, lb: f64, ub: f64 },
    #[error("variable `{name}`: bound is NaN")]
    NanBound { name: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable id {0}")]
    UnknownVar(usize),
    #[error("constraint `{name}`: {message}")]
    InvalidConstraint { name: String, message: String },
    #[error("assignment has {got} values but the model has {expected} variables")]
    MissingValue { expected: usize, got: usize },
}

/// Dense, insertion-ordered variable handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Merge duplicate variables, drop zero coefficients and sort by variable id.
pub fn normalize_terms(terms: &[(VarId, f64)]) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = terms.to_vec();
    // Stable sort keeps the summation order of duplicates.
    out.sort_by_key(|&(v, _)| v);
    out.dedup_by(|next, acc| {
        if next.0 == acc.0 {
            acc.1 += next.1;
            true
        } else {
            false
        }
    });
    out.retain(|&(_, c)| c != 0.0);
    out
}

/// `Σ terms  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinCons {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinCons {
    pub fn new(name: impl Into<String>, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> Self {
        LinCons {
            name: name.into(),
            terms: normalize_terms(terms),
            sense,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `guard = active ⇒ implied`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorCons {
    pub name: String,
    pub guard: VarId,
    pub active: bool,
    pub implied: LinCons,
}

impl IndicatorCons {
    pub fn active_value(&self) -> f64 {
        if self.active {
            1.0
        } else {
            0.0
        }
    }
}

/// At most one member may be non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos1Cons {
    pub name: String,
    pub members: Vec<VarId>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Linear(LinCons),
    Indicator(IndicatorCons),
    Sos1(Sos1Cons),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsId {
    Linear(usize),
    Indicator(usize),
    Sos1(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            sense: ObjSense::Minimize,
            terms: Vec::new(),
            constant: 0.0,
        }
    }
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Bound,
    Linear,
    Indicator,
    Sos1,
    Integrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub name: String,
    pub magnitude: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
    pub max_violation: f64,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, name: &str, magnitude: f64, kind: ViolationKind) {
        self.max_violation = self.max_violation.max(magnitude);
        self.violations.push(Violation {
            name: name.to_string(),
            magnitude,
            kind,
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            return write!(f, "feasible");
        }
        write!(f, "{} violations (max {:e})", self.violations.len(), self.max_violation)?;
        for v in self.violations.iter().take(5) {
            write!(f, "; {:?} `{}` by {:e}", v.kind, v.name, v.magnitude)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStats {
    pub continuous: usize,
    pub binary: usize,
    pub integer: usize,
    pub linear: usize,
    pub indicator: usize,
    pub sos1: usize,
}

impl ModelStats {
    pub fn vars(&self) -> usize {
        self.continuous + self.binary + self.integer
    }

    pub fn constraints(&self) -> usize {
        self.linear + self.indicator + self.sos1
    }
}

#[derive(Debug, Clone, Default)]
pub struct MipModel {
    vars: Vec<Var>,
    lin: Vec<LinCons>,
    ind: Vec<IndicatorCons>,
    sos: Vec<Sos1Cons>,
    objective: Objective,
    var_names: HashMap<String, VarId>,
    cons_names: HashMap<String, ConsId>,
}

/// Structural equality: names, kinds, bounds, constraints (in order) and objective.
impl PartialEq for MipModel {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
            && self.lin == other.lin
            && self.ind == other.ind
            && self.sos == other.sos
            && self.objective == other.objective
    }
}

fn check_bounds(kind: VarKind, lb: f64, ub: f64, name: &str) -> Result<(), ModelError> {
    if lb.is_nan() || ub.is_nan() {
        return Err(ModelError::NanBound { name: name.into() });
    }
    if kind == VarKind::Binary && !(matches!(lb, 0.0 | 1.0) && matches!(ub, 0.0 | 1.0)) {
        return Err(ModelError::InvalidBinaryBounds {
            name: name.into(),
            lb,
            ub,
        });
    }
    if lb > ub || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
        return Err(ModelError::CrossedBounds {
            name: name.into(),
            lb,
            ub,
        });
    }
    Ok(())
}

impl MipModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        kind: VarKind,
        lb: f64,
        ub: f64,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        check_bounds(kind, lb, ub, &name)?;
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let id = VarId(self.vars.len());
        self.var_names.insert(name.clone(), id);
        self.vars.push(Var { kind, lb, ub, name });
        Ok(id)
    }

    pub fn add_continuous(
        &mut self,
        lb: f64,
        ub: f64,
        name: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        self.add_var(VarKind::Continuous, lb, ub, name)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_var(VarKind::Binary, 0.0, 1.0, name)
    }

    pub fn set_var_bounds(&mut self, v: VarId, lb: f64, ub: f64) -> Result<(), ModelError> {
        let var = self.vars.get_mut(v.index()).ok_or(ModelError::UnknownVar(v.0))?;
        check_bounds(var.kind, lb, ub, &var.name)?;
        var.lb = lb;
        var.ub = ub;
        Ok(())
    }

    /// Fix a variable to a single value, ignoring the binary `{0,1}` rule.
    ///
    /// Used by verification code that needs to pin a guard at a fractional
    /// value inside the integrality tolerance.
    pub fn fix_var_unchecked(&mut self, v: VarId, value: f64) {
        let var = &mut self.vars[v.index()];
        var.lb = value;
        var.ub = value;
    }

    fn check_var(&self, v: VarId) -> Result<(), ModelError> {
        if v.index() < self.vars.len() {
            Ok(())
        } else {
            Err(ModelError::UnknownVar(v.0))
        }
    }

    fn check_lincons(&self, c: &LinCons) -> Result<(), ModelError> {
        for &(v, coef) in &c.terms {
            self.check_var(v)?;
            if !coef.is_finite() {
                return Err(ModelError::InvalidConstraint {
                    name: c.name.clone(),
                    message: format!("non-finite coefficient on {v}"),
                });
            }
        }
        if !c.rhs.is_finite() {
            return Err(ModelError::InvalidConstraint {
                name: c.name.clone(),
                message: "non-finite right-hand side".into(),
            });
        }
        Ok(())
    }

    fn claim_name(&mut self, name: &str, id: ConsId) -> Result<(), ModelError> {
        if self.cons_names.contains_key(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        self.cons_names.insert(name.to_string(), id);
        Ok(())
    }

    pub fn add_constraint(&mut self, cons: Constraint) -> Result<ConsId, ModelError> {
        match cons {
            Constraint::Linear(mut c) => {
                c.terms = normalize_terms(&c.terms);
                self.check_lincons(&c)?;
                let id = ConsId::Linear(self.lin.len());
                self.claim_name(&c.name, id)?;
                self.lin.push(c);
                Ok(id)
            }
            Constraint::Indicator(mut c) => {
                c.implied.terms = normalize_terms(&c.implied.terms);
                c.implied.name = c.name.clone();
                self.check_var(c.guard)?;
                if self.vars[c.guard.index()].kind != VarKind::Binary {
                    return Err(ModelError::InvalidConstraint {
                        name: c.name.clone(),
                        message: format!("guard `{}` is not binary", self.vars[c.guard.index()].name),
                    });
                }
                if c.implied.sense == Sense::Eq {
                    return Err(ModelError::InvalidConstraint {
                        name: c.name.clone(),
                        message: "equality inside an indicator; split it into <= and >=".into(),
                    });
                }
                self.check_lincons(&c.implied)?;
                let id = ConsId::Indicator(self.ind.len());
                self.claim_name(&c.name, id)?;
                self.ind.push(c);
                Ok(id)
            }
            Constraint::Sos1(c) => {
                for &v in &c.members {
                    self.check_var(v)?;
                }
                if c.members.len() < 2 || c.members.len() != c.weights.len() {
                    return Err(ModelError::InvalidConstraint {
                        name: c.name.clone(),
                        message: "SOS1 needs at least two members with one weight each".into(),
                    });
                }
                if c.weights.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(ModelError::InvalidConstraint {
                        name: c.name.clone(),
                        message: "SOS1 weights must be strictly increasing".into(),
                    });
                }
                let id = ConsId::Sos1(self.sos.len());
                self.claim_name(&c.name, id)?;
                self.sos.push(c);
                Ok(id)
            }
        }
    }

    pub fn add_linear(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConsId, ModelError> {
        self.add_constraint(Constraint::Linear(LinCons::new(name, terms, sense, rhs)))
    }

    pub fn add_indicator(
        &mut self,
        name: impl Into<String>,
        guard: VarId,
        active: bool,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConsId, ModelError> {
        let name = name.into();
        self.add_constraint(Constraint::Indicator(IndicatorCons {
            implied: LinCons::new(name.clone(), terms, sense, rhs),
            name,
            guard,
            active,
        }))
    }

    pub fn add_sos1(
        &mut self,
        name: impl Into<String>,
        members: &[VarId],
        weights: &[f64],
    ) -> Result<ConsId, ModelError> {
        self.add_constraint(Constraint::Sos1(Sos1Cons {
            name: name.into(),
            members: members.to_vec(),
            weights: weights.to_vec(),
        }))
    }

    pub fn set_objective(
        &mut self,
        sense: ObjSense,
        terms: &[(VarId, f64)],
        constant: f64,
    ) -> Result<(), ModelError> {
        for &(v, _) in terms {
            self.check_var(v)?;
        }
        self.objective = Objective {
            sense,
            terms: normalize_terms(terms),
            constant,
        };
        Ok(())
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &Var {
        &self.vars[v.index()]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn constraint_by_name(&self, name: &str) -> Option<ConsId> {
        self.cons_names.get(name).copied()
    }

    pub fn constraint_name(&self, id: ConsId) -> &str {
        match id {
            ConsId::Linear(i) => &self.lin[i].name,
            ConsId::Indicator(i) => &self.ind[i].name,
            ConsId::Sos1(i) => &self.sos[i].name,
        }
    }

    pub fn constraint(&self, id: ConsId) -> Constraint {
        match id {
            ConsId::Linear(i) => Constraint::Linear(self.lin[i].clone()),
            ConsId::Indicator(i) => Constraint::Indicator(self.ind[i].clone()),
            ConsId::Sos1(i) => Constraint::Sos1(self.sos[i].clone()),
        }
    }

    pub fn linear_constraints(&self) -> &[LinCons] {
        &self.lin
    }

    pub fn indicator_constraints(&self) -> &[IndicatorCons] {
        &self.ind
    }

    pub fn sos1_constraints(&self) -> &[Sos1Cons] {
        &self.sos
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            linear: self.lin.len(),
            indicator: self.ind.len(),
            sos1: self.sos.len(),
            ..ModelStats::default()
        };
        for v in &self.vars {
            match v.kind {
                VarKind::Continuous => s.continuous += 1,
                VarKind::Binary => s.binary += 1,
                VarKind::Integer => s.integer += 1,
            }
        }
        s
    }

    /// Check `x` (indexed by variable id) against every constraint.
    ///
    /// Linear and bound violations above `feastol` are reported. An indicator
    /// is enforced only when its guard lies within `inttol` of the active
    /// value. An SOS1 is violated when two or more members exceed `feastol`
    /// in absolute value; its magnitude is the mass outside the largest member.
    pub fn check_assignment(
        &self,
        x: &[f64],
        feastol: f64,
        inttol: f64,
    ) -> Result<ViolationReport, ModelError> {
        if x.len() < self.vars.len() {
            return Err(ModelError::MissingValue {
                expected: self.vars.len(),
                got: x.len(),
            });
        }
        let mut report = ViolationReport::default();
        for (var, &v) in self.vars.iter().zip(x) {
            let below = var.lb - v;
            let above = v - var.ub;
            let bound_viol = below.max(above);
            if bound_viol > feastol || v.is_nan() {
                report.push(&var.name, bound_viol, ViolationKind::Bound);
            }
            if var.kind.is_integral() {
                let frac = (v - v.round()).abs();
                if frac > inttol {
                    report.push(&var.name, frac, ViolationKind::Integrality);
                }
            }
        }
        for c in &self.lin {
            let viol = c.violation(x);
            if viol > feastol {
                report.push(&c.name, viol, ViolationKind::Linear);
            }
        }
        for c in &self.ind {
            if (x[c.guard.index()] - c.active_value()).abs() <= inttol {
                let viol = c.implied.violation(x);
                if viol > feastol {
                    report.push(&c.name, viol, ViolationKind::Indicator);
                }
            }
        }
        for c in &self.sos {
            let mags: Vec<f64> = c.members.iter().map(|v| x[v.index()].abs()).collect();
            let nonzero = mags.iter().filter(|&&m| m > feastol).count();
            if nonzero >= 2 {
                let largest = mags.iter().cloned().fold(0.0, f64::max);
                let total: f64 = mags.iter().sum();
                report.push(&c.name, total - largest, ViolationKind::Sos1);
            }
        }
        Ok(report)
    }
}
