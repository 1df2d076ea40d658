//! CPLEX-style LP dialect.
//!
//! Section headers start in column 0; every entry line is indented by one
//! space. The Bounds section lists every variable in id order, which is how
//! the parser recovers variable order.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::mip::{
    Constraint, IndicatorCons, LinCons, MipModel, ObjSense, Sos1Cons, VarId, VarKind,
};

use super::{add_pending, fmt_num, grammar, kind_of, parse_num, sanitize, sense_of, var_names, FormatError, PendingCons};

fn write_expr(out: &mut String, terms: &[(VarId, f64)], constant: f64, names: &[String]) {
    let mut first = true;
    let mut piece = |out: &mut String, c: f64, name: Option<&str>| {
        let neg = c < 0.0;
        if first {
            if neg {
                out.push_str("- ");
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        first = false;
        let a = c.abs();
        match name {
            Some(n) if a == 1.0 => out.push_str(n),
            Some(n) => {
                let _ = write!(out, "{} {}", fmt_num(a), n);
            }
            None => out.push_str(&fmt_num(a)),
        }
    };
    for &(v, c) in terms {
        piece(out, c, Some(&names[v.index()]));
    }
    if constant != 0.0 || terms.is_empty() {
        piece(out, constant, None);
    }
}

fn write_cons(out: &mut String, c: &LinCons, names: &[String]) {
    write_expr(out, &c.terms, 0.0, names);
    let _ = write!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
}

pub fn write_lp(model: &MipModel) -> String {
    let names = var_names(model);
    let mut out = String::new();
    let obj = model.objective();
    out.push_str(match obj.sense {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    write_expr(&mut out, &obj.terms, obj.constant, &names);
    out.push_str("\nSubject To\n");
    for c in model.linear_constraints() {
        let _ = write!(out, " {}: ", sanitize(&c.name));
        write_cons(&mut out, c, &names);
        out.push('\n');
    }
    for c in model.indicator_constraints() {
        let _ = write!(
            out,
            " {}: {} = {} -> ",
            sanitize(&c.name),
            names[c.guard.index()],
            if c.active { 1 } else { 0 }
        );
        write_cons(&mut out, &c.implied, &names);
        out.push('\n');
    }
    out.push_str("Bounds\n");
    for (v, name) in model.vars().iter().zip(&names) {
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if v.lb == v.ub {
            let _ = writeln!(out, " {name} = {}", fmt_num(v.lb));
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(v.lb), fmt_num(v.ub));
        }
    }
    let section = |out: &mut String, title: &str, kind: VarKind| {
        let members: Vec<&String> = model
            .vars()
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == kind)
            .map(|(_, n)| n)
            .collect();
        if !members.is_empty() {
            out.push_str(title);
            for n in members {
                let _ = writeln!(out, " {n}");
            }
        }
    };
    section(&mut out, "General\n", VarKind::Integer);
    section(&mut out, "Binary\n", VarKind::Binary);
    if !model.sos1_constraints().is_empty() {
        out.push_str("SOS\n");
        for s in model.sos1_constraints() {
            let _ = write!(out, " {}: S1 ::", sanitize(&s.name));
            for (&v, &w) in s.members.iter().zip(&s.weights) {
                let _ = write!(out, " {}:{}", names[v.index()], fmt_num(w));
            }
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    General,
    Binary,
    Sos,
    End,
}

fn header(line: &str) -> Option<(Section, Option<ObjSense>)> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some((Section::Objective, Some(ObjSense::Minimize))),
        "maximize" | "maximum" | "max" => Some((Section::Objective, Some(ObjSense::Maximize))),
        "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, None)),
        "bounds" => Some((Section::Bounds, None)),
        "general" | "generals" | "gen" => Some((Section::General, None)),
        "binary" | "binaries" | "bin" => Some((Section::Binary, None)),
        "sos" => Some((Section::Sos, None)),
        "end" => Some((Section::End, None)),
        _ => None,
    }
}

struct Expr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

fn parse_expr(toks: &[&str], vars: &HashMap<String, VarId>, line: usize) -> Result<Expr, FormatError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    let mut expect_term = true;
    while i < toks.len() {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while i < toks.len() && (toks[i] == "+" || toks[i] == "-") {
            if toks[i] == "-" {
                sign = -sign;
            }
            saw_sign = true;
            i += 1;
        }
        if !saw_sign && !expect_term {
            return Err(grammar(line, format!("expected `+` or `-`, found `{}`", toks[i])));
        }
        let Some(&tok) = toks.get(i) else {
            return Err(grammar(line, "dangling sign"));
        };
        i += 1;
        if let Ok(c) = tok.parse::<f64>() {
            match toks.get(i) {
                Some(&n) if n != "+" && n != "-" => {
                    let v = *vars
                        .get(n)
                        .ok_or_else(|| grammar(line, format!("unknown variable `{n}`")))?;
                    terms.push((v, sign * c));
                    i += 1;
                }
                _ => constant += sign * c,
            }
        } else {
            let v = *vars
                .get(tok)
                .ok_or_else(|| grammar(line, format!("unknown variable `{tok}`")))?;
            terms.push((v, sign));
        }
        expect_term = false;
    }
    if expect_term {
        return Err(grammar(line, "empty expression"));
    }
    Ok(Expr { terms, constant })
}

fn parse_lincons(
    name: &str,
    body: &str,
    vars: &HashMap<String, VarId>,
    line: usize,
) -> Result<LinCons, FormatError> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    let pos = toks
        .iter()
        .position(|t| sense_of(t).is_some())
        .ok_or_else(|| grammar(line, "missing relation"))?;
    let sense = sense_of(toks[pos]).expect("checked");
    if pos + 2 != toks.len() {
        return Err(grammar(line, "expected a single number after the relation"));
    }
    let rhs = parse_num(toks[pos + 1], line)?;
    let lhs = parse_expr(&toks[..pos], vars, line)?;
    Ok(LinCons::new(name, &lhs.terms, sense, rhs - lhs.constant))
}

fn split_label(s: &str, line: usize) -> Result<(&str, &str), FormatError> {
    let (name, rest) = s
        .split_once(':')
        .ok_or_else(|| grammar(line, "expected `name:`"))?;
    let name = name.trim();
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(grammar(line, format!("bad label `{name}`")));
    }
    Ok((name, rest))
}

pub fn parse_lp(text: &str) -> Result<MipModel, FormatError> {
    let mut section: Option<Section> = None;
    let mut sense = ObjSense::Minimize;
    let mut lines: Vec<(Section, usize, &str)> = Vec::new();
    let mut last = 0;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        last = ln;
        if raw.trim().is_empty() || raw.trim_start().starts_with('\\') {
            continue;
        }
        if section == Some(Section::End) {
            return Err(grammar(ln, "content after End"));
        }
        if !raw.starts_with(char::is_whitespace) {
            let (sec, s) = header(raw).ok_or_else(|| grammar(ln, format!("unknown section `{}`", raw.trim())))?;
            if let Some(s) = s {
                sense = s;
            }
            section = Some(sec);
            continue;
        }
        let sec = section.ok_or_else(|| grammar(ln, "content before the objective section"))?;
        lines.push((sec, ln, raw.trim()));
    }
    if section != Some(Section::End) {
        return Err(grammar(last.max(1), "unexpected end of file, missing End"));
    }

    let mut binaries = std::collections::HashSet::new();
    let mut integers = std::collections::HashSet::new();
    for &(sec, _, l) in &lines {
        match sec {
            Section::Binary => {
                binaries.insert(l);
            }
            Section::General => {
                integers.insert(l);
            }
            _ => {}
        }
    }

    let mut model = MipModel::new();
    let mut vars: HashMap<String, VarId> = HashMap::new();
    for &(sec, ln, l) in &lines {
        if sec != Section::Bounds {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        let (name, lb, ub) = match toks.as_slice() {
            [n, f] if f.eq_ignore_ascii_case("free") => (*n, f64::NEG_INFINITY, f64::INFINITY),
            [n, "=", v] => {
                let v = parse_num(v, ln)?;
                (*n, v, v)
            }
            [lo, "<=", n, "<=", hi] => (*n, parse_num(lo, ln)?, parse_num(hi, ln)?),
            _ => return Err(grammar(ln, format!("bad bound `{l}`"))),
        };
        let kind = kind_of(binaries.contains(name), integers.contains(name));
        let id = model.add_var(kind, lb, ub, name).map_err(|e| grammar(ln, e.to_string()))?;
        vars.insert(name.to_string(), id);
    }
    for &(sec, ln, l) in &lines {
        if matches!(sec, Section::Binary | Section::General) && !vars.contains_key(l) {
            return Err(grammar(ln, format!("`{l}` has no bound line")));
        }
    }

    let mut pending = Vec::new();
    let mut seen_obj = false;
    for &(sec, ln, l) in &lines {
        match sec {
            Section::Objective => {
                if seen_obj {
                    return Err(grammar(ln, "second objective line"));
                }
                seen_obj = true;
                let (_, body) = split_label(l, ln)?;
                let toks: Vec<&str> = body.split_whitespace().collect();
                let e = parse_expr(&toks, &vars, ln)?;
                model.set_objective(sense, &e.terms, e.constant)?;
            }
            Section::Constraints => {
                let (name, body) = split_label(l, ln)?;
                let cons = if let Some((guard, implied)) = body.split_once("->") {
                    let g: Vec<&str> = guard.split_whitespace().collect();
                    let [gname, "=", val] = g.as_slice() else {
                        return Err(grammar(ln, "bad indicator guard"));
                    };
                    let guard = *vars
                        .get(*gname)
                        .ok_or_else(|| grammar(ln, format!("unknown variable `{gname}`")))?;
                    let active = match *val {
                        "1" => true,
                        "0" => false,
                        _ => return Err(grammar(ln, "indicator value must be 0 or 1")),
                    };
                    let implied = parse_lincons(name, implied, &vars, ln)?;
                    Constraint::Indicator(IndicatorCons { name: name.to_string(), guard, active, implied })
                } else {
                    Constraint::Linear(parse_lincons(name, body, &vars, ln)?)
                };
                pending.push(PendingCons { line: ln, cons });
            }
            Section::Sos => {
                let (name, body) = split_label(l, ln)?;
                let toks: Vec<&str> = body.split_whitespace().collect();
                if toks.len() < 2 || toks[0] != "S1" || toks[1] != "::" {
                    return Err(grammar(ln, "expected `S1 ::`"));
                }
                let mut members = Vec::new();
                let mut weights = Vec::new();
                for t in &toks[2..] {
                    let (v, w) = t
                        .rsplit_once(':')
                        .ok_or_else(|| grammar(ln, format!("bad SOS member `{t}`")))?;
                    members.push(*vars.get(v).ok_or_else(|| grammar(ln, format!("unknown variable `{v}`")))?);
                    weights.push(parse_num(w, ln)?);
                }
                pending.push(PendingCons {
                    line: ln,
                    cons: Constraint::Sos1(Sos1Cons { name: name.to_string(), members, weights }),
                });
            }
            _ => {}
        }
    }
    if !seen_obj {
        return Err(grammar(1, "missing objective"));
    }
    // Linear constraints first, then indicators, then SOS, matching the writer.
    pending.sort_by_key(|p| match p.cons {
        Constraint::Linear(_) => 0,
        Constraint::Indicator(_) => 1,
        Constraint::Sos1(_) => 2,
    });
    add_pending(&mut model, pending)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::Sense;

    fn tiny() -> MipModel {
        let mut m = MipModel::new();
        let x = m.add_continuous(0.0, 10.0, "x").unwrap();
        m.add_linear("c1", &[(x, 1.0)], Sense::Ge, 1.0).unwrap();
        m.set_objective(ObjSense::Minimize, &[(x, 1.0)], 0.0).unwrap();
        m
    }

    #[test]
    fn tiny_document() {
        let text = write_lp(&tiny());
        assert_eq!(text, "Minimize\n obj: x\nSubject To\n c1: x >= 1\nBounds\n 0 <= x <= 10\nEnd\n");
        assert_eq!(parse_lp(&text).unwrap(), tiny());
    }

    #[test]
    fn sos_line() {
        let mut m = MipModel::new();
        let s = m.add_continuous(0.0, f64::INFINITY, "s").unwrap();
        let y = m.add_continuous(0.0, f64::INFINITY, "y").unwrap();
        m.add_sos1("s1", &[s, y], &[1.0, 2.0]).unwrap();
        let text = write_lp(&m);
        assert!(text.contains("SOS\n s1: S1 :: s:1 y:2\n"), "{text}");
        assert_eq!(parse_lp(&text).unwrap(), m);
    }

    #[test]
    fn full_round_trip() {
        let mut m = MipModel::new();
        let x = m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, "x").unwrap();
        let z = m.add_binary("z").unwrap();
        let i = m.add_var(VarKind::Integer, -3.0, 3.0, "i").unwrap();
        let f = m.add_continuous(2.5, 2.5, "f").unwrap();
        m.add_linear("a", &[(x, -1.0), (z, 0.1), (i, 1e-7)], Sense::Le, -2.0).unwrap();
        m.add_linear("b", &[(x, 1e20), (f, -1.0)], Sense::Eq, 0.0).unwrap();
        m.add_linear("e", &[], Sense::Ge, -1.0).unwrap();
        m.add_indicator("ind", z, false, &[(x, 2.0), (i, -1.0)], Sense::Ge, 1.0 / 3.0).unwrap();
        m.set_objective(ObjSense::Maximize, &[(x, -1.0), (i, 3.0)], -4.5).unwrap();
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, m, "{text}");
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn empty_objective_with_constant() {
        let mut m = MipModel::new();
        m.add_continuous(0.0, 1.0, "x").unwrap();
        m.set_objective(ObjSense::Minimize, &[], 5.0).unwrap();
        let text = write_lp(&m);
        assert!(text.contains(" obj: 5\n"));
        assert_eq!(parse_lp(&text).unwrap(), m);
    }

    #[test]
    fn truncated_file_names_line() {
        let text = write_lp(&tiny());
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        let err = parse_lp(&cut).unwrap_err();
        assert!(matches!(err, FormatError::Grammar { line: 5, .. }), "{err}");
        let err = parse_lp("Minimize\n obj: y\nSubject To\nBounds\n 0 <= x <= 1\nEnd\n").unwrap_err();
        assert!(matches!(err, FormatError::Grammar { line: 2, .. }), "{err}");
    }
}
