//! Exact MIP encodings of `|e|` and `min(e1, e2)` for affine expressions.

use crate::mip::{MipModel, Sense, VarId, VarKind};

use super::FormulationError;

/// `Σ terms + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new(terms: Vec<(VarId, f64)>, constant: f64) -> Self {
        LinExpr { terms, constant }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    /// `self - other`.
    pub fn minus(&self, other: &LinExpr) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|&(v, c)| (v, -c)));
        LinExpr { terms, constant: self.constant - other.constant }
    }

    pub fn plus(&self, other: &LinExpr) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        LinExpr { terms, constant: self.constant + other.constant }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.index()]).sum::<f64>()
    }

    /// Interval of the expression over the model's variable bounds.
    pub fn range(&self, model: &MipModel) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for &(v, c) in &self.terms {
            let var = model.var(v);
            let (a, b) = (c * var.lb, c * var.ub);
            lo += a.min(b);
            hi += a.max(b);
        }
        (lo, hi)
    }

    fn with_lead(&self, lead: VarId, sign: f64) -> Vec<(VarId, f64)> {
        let mut t = vec![(lead, 1.0)];
        t.extend(self.terms.iter().map(|&(v, c)| (v, sign * c)));
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsVars {
    pub d: VarId,
    pub delta: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Min2Vars {
    pub m: VarId,
    pub delta: VarId,
}

fn check_m(big_m: f64, name: &str) -> Result<(), FormulationError> {
    if big_m.is_finite() && big_m >= 0.0 {
        Ok(())
    } else {
        Err(FormulationError::NonFiniteBound(format!("{name}: M = {big_m}")))
    }
}

/// `d = |e|` with `d ∈ [0, M]` and one binary.
pub fn encode_abs_exact(
    model: &mut MipModel,
    e: &LinExpr,
    big_m: f64,
    name: &str,
) -> Result<AbsVars, FormulationError> {
    check_m(big_m, name)?;
    let c = e.constant;
    let d = model.add_var(VarKind::Continuous, 0.0, big_m, name.to_string())?;
    let delta = model.add_var(VarKind::Binary, 0.0, 1.0, format!("{name}_sgn"))?;
    let minus = e.with_lead(d, -1.0);
    let plus = e.with_lead(d, 1.0);
    model.add_linear(format!("{name}_ge_pos"), &minus, Sense::Ge, c)?;
    model.add_linear(format!("{name}_ge_neg"), &plus, Sense::Ge, -c)?;
    let mut t = minus;
    t.push((delta, big_m));
    model.add_linear(format!("{name}_le_pos"), &t, Sense::Le, c + big_m)?;
    let mut t = plus;
    t.push((delta, -big_m));
    model.add_linear(format!("{name}_le_neg"), &t, Sense::Le, -c)?;
    Ok(AbsVars { d, delta })
}

/// `m = min(e1, e2)` with one binary; `δ = 1` selects `e1`. `m` is free.
pub fn encode_min2(
    model: &mut MipModel,
    e1: &LinExpr,
    e2: &LinExpr,
    big_m: f64,
    name: &str,
) -> Result<Min2Vars, FormulationError> {
    check_m(big_m, name)?;
    let m = model.add_var(VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, name.to_string())?;
    let delta = model.add_var(VarKind::Binary, 0.0, 1.0, format!("{name}_sel"))?;
    let t1 = e1.with_lead(m, -1.0);
    let t2 = e2.with_lead(m, -1.0);
    model.add_linear(format!("{name}_le1"), &t1, Sense::Le, e1.constant)?;
    model.add_linear(format!("{name}_le2"), &t2, Sense::Le, e2.constant)?;
    let mut t = t1;
    t.push((delta, -big_m));
    model.add_linear(format!("{name}_ge1"), &t, Sense::Ge, e1.constant - big_m)?;
    let mut t = t2;
    t.push((delta, big_m));
    model.add_linear(format!("{name}_ge2"), &t, Sense::Ge, e2.constant)?;
    Ok(Min2Vars { m, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasible(m: &MipModel, pt: &[f64]) -> bool {
        m.check_assignment(pt, 0.0, 0.0).unwrap().is_feasible()
    }

    #[test]
    fn abs_cases() {
        for (e, d, good_delta) in [(0.4, 0.4, vec![1.0]), (-0.4, 0.4, vec![0.0]), (0.0, 0.0, vec![0.0, 1.0])] {
            let mut m = MipModel::new();
            let x = m.add_continuous(-1.0, 1.0, "x").unwrap();
            let a = encode_abs_exact(&mut m, &LinExpr::var(x), 1.0, "a").unwrap();
            for delta in [0.0, 1.0] {
                let mut pt = vec![0.0; 3];
                pt[x.index()] = e;
                pt[a.d.index()] = d;
                pt[a.delta.index()] = delta;
                assert_eq!(feasible(&m, &pt), good_delta.contains(&delta), "e={e} delta={delta}");
                pt[a.d.index()] = d + 0.1;
                assert!(!feasible(&m, &pt));
            }
        }
    }

    #[test]
    fn min2_cases() {
        for (a, b, good_delta) in [(3.0, 5.0, vec![1.0]), (5.0, 3.0, vec![0.0]), (4.0, 4.0, vec![0.0, 1.0])] {
            let mut m = MipModel::new();
            let e1 = LinExpr::constant(a);
            let e2 = LinExpr::constant(b);
            let r = encode_min2(&mut m, &e1, &e2, 10.0, "m").unwrap();
            for delta in [0.0, 1.0] {
                let mut pt = vec![0.0; 2];
                pt[r.m.index()] = a.min(b);
                pt[r.delta.index()] = delta;
                assert_eq!(feasible(&m, &pt), good_delta.contains(&delta));
                pt[r.m.index()] = a.min(b) - 0.5;
                assert!(!feasible(&m, &pt));
            }
        }
    }

    #[test]
    fn rejects_infinite_m() {
        let mut m = MipModel::new();
        assert!(encode_abs_exact(&mut m, &LinExpr::constant(1.0), f64::INFINITY, "a").is_err());
        assert!(encode_min2(&mut m, &LinExpr::constant(1.0), &LinExpr::constant(2.0), f64::NAN, "b").is_err());
    }

    #[test]
    fn expr_range() {
        let mut m = MipModel::new();
        let x = m.add_continuous(-1.0, 2.0, "x").unwrap();
        let y = m.add_continuous(0.0, 1.0, "y").unwrap();
        let e = LinExpr::new(vec![(x, 2.0), (y, -1.0)], 1.0);
        assert_eq!(e.range(&m), (-2.0, 5.0));
        assert_eq!(e.minus(&LinExpr::var(y)).value(&[1.0, 1.0]), 1.0);
    }
}
