use crate::mip::{MipModel, Sense, VarId, VarKind};

use super::{FormulationError, Recorder};

#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxVars {
    /// Maximum score.
    pub m: VarId,
    /// Class selectors.
    pub z: Vec<VarId>,
    /// Gaps `m - y_j`.
    pub s: Vec<VarId>,
    /// 0-based class index, when requested.
    pub index: Option<VarId>,
}

pub(crate) fn embed_argmax_rec(
    rec: &mut Recorder<'_>,
    scores: &[VarId],
    with_index: bool,
    index_var: Option<VarId>,
    prefix: &str,
) -> Result<ArgmaxVars, FormulationError> {
    let k = scores.len();
    if k < 2 {
        return Err(FormulationError::TooFewScores(k));
    }
    // m equals the largest score, so finite score bounds carry over to m and s.
    let lo: Vec<f64> = scores.iter().map(|&v| rec.model.var(v).lb).collect();
    let hi: Vec<f64> = scores.iter().map(|&v| rec.model.var(v).ub).collect();
    let m_lo = lo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m_hi = hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m = rec.var(VarKind::Continuous, m_lo, m_hi, format!("{prefix}_am_max"))?;
    let mut z = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    for j in 0..k {
        z.push(rec.var(VarKind::Binary, 0.0, 1.0, format!("{prefix}_am_z{j}"))?);
        let s_hi = (m_hi - lo[j]).max(0.0);
        s.push(rec.var(VarKind::Continuous, 0.0, s_hi, format!("{prefix}_am_s{j}"))?);
    }
    for j in 0..k {
        rec.linear(
            format!("{prefix}_am_gap{j}"),
            &[(scores[j], 1.0), (s[j], 1.0), (m, -1.0)],
            Sense::Eq,
            0.0,
        )?;
        rec.sos1(format!("{prefix}_am_sos{j}"), &[z[j], s[j]], &[1.0, 2.0])?;
    }
    let ones: Vec<(VarId, f64)> = z.iter().map(|&v| (v, 1.0)).collect();
    rec.linear(format!("{prefix}_am_onehot"), &ones, Sense::Eq, 1.0)?;
    let index = if with_index {
        let a = match index_var {
            Some(a) => a,
            None => rec.var(VarKind::Integer, 0.0, (k - 1) as f64, format!("{prefix}_am_index"))?,
        };
        let mut terms = vec![(a, 1.0)];
        terms.extend(z.iter().enumerate().skip(1).map(|(j, &v)| (v, -(j as f64))));
        rec.linear(format!("{prefix}_am_index_def"), &terms, Sense::Eq, 0.0)?;
        Some(a)
    } else {
        None
    };
    Ok(ArgmaxVars { m, z, s, index })
}

/// `y_j + s_j - m = 0`, `SOS1(z_j, s_j)`, `Σ z_j = 1`, and optionally
/// `a = Σ j z_j` with 0-based `j`.
pub fn embed_argmax(
    model: &mut MipModel,
    score_vars: &[VarId],
    with_index: bool,
    prefix: &str,
) -> Result<ArgmaxVars, FormulationError> {
    embed_argmax_rec(&mut Recorder::new(model), score_vars, with_index, None, prefix)
}
