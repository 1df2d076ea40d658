//! Free-format MPS with SOS and INDICATORS sections.
//!
//! Every column appears in COLUMNS (an objective entry with coefficient 0 is
//! written for columns that appear nowhere else), so column order is the
//! variable order. The objective constant is stored as the negated RHS of
//! the objective row.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::mip::{Constraint, IndicatorCons, LinCons, MipModel, ObjSense, Sense, Sos1Cons, VarId, VarKind};

use super::{add_pending, fmt_num, grammar, parse_num, sanitize, var_names, FormatError, PendingCons};

fn row_type(s: Sense) -> char {
    match s {
        Sense::Le => 'L',
        Sense::Ge => 'G',
        Sense::Eq => 'E',
    }
}

fn objective_row_name(taken: &HashSet<String>) -> String {
    let mut name = String::from("obj");
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

pub fn write_mps(model: &MipModel) -> String {
    write_mps_named(model, "model")
}

pub fn write_mps_named(model: &MipModel, name: &str) -> String {
    let names = var_names(model);
    let lin = model.linear_constraints();
    let ind = model.indicator_constraints();
    let rows: Vec<(&LinCons, String)> = lin
        .iter()
        .map(|c| (c, sanitize(&c.name)))
        .chain(ind.iter().map(|c| (&c.implied, sanitize(&c.name))))
        .collect();
    let taken: HashSet<String> = rows.iter().map(|(_, n)| n.clone()).collect();
    let obj_name = objective_row_name(&taken);
    let obj = model.objective();

    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", sanitize(name));
    out.push_str("OBJSENSE\n");
    out.push_str(match obj.sense {
        ObjSense::Minimize => "    MIN\n",
        ObjSense::Maximize => "    MAX\n",
    });
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {obj_name}");
    for (c, n) in &rows {
        let _ = writeln!(out, " {} {n}", row_type(c.sense));
    }

    // Column-major entries.
    let mut cols: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.num_vars()];
    for &(v, c) in &obj.terms {
        cols[v.index()].push((&obj_name, c));
    }
    for (c, n) in &rows {
        for &(v, coef) in &c.terms {
            cols[v.index()].push((n.as_str(), coef));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, var) in model.vars().iter().enumerate() {
        let int = var.kind.is_integral();
        if int && !in_int {
            out.push_str("    MARKER MARKER INTORG\n");
        } else if !int && in_int {
            out.push_str("    MARKER MARKER INTEND\n");
        }
        in_int = int;
        if cols[j].is_empty() {
            let _ = writeln!(out, "    {} {obj_name} 0", names[j]);
        }
        for &(row, c) in &cols[j] {
            let _ = writeln!(out, "    {} {row} {}", names[j], fmt_num(c));
        }
    }
    if in_int {
        out.push_str("    MARKER MARKER INTEND\n");
    }

    out.push_str("RHS\n");
    if obj.constant != 0.0 {
        let _ = writeln!(out, "    RHS {obj_name} {}", fmt_num(-obj.constant));
    }
    for (c, n) in &rows {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS {n} {}", fmt_num(c.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for (var, n) in model.vars().iter().zip(&names) {
        let (lb, ub) = (var.lb, var.ub);
        if var.kind == VarKind::Binary {
            let _ = writeln!(out, " BV BND {n}");
            if lb == ub {
                let _ = writeln!(out, " FX BND {n} {}", fmt_num(lb));
            }
            continue;
        }
        let (lo_tag, up_tag) = if var.kind == VarKind::Integer { ("LI", "UI") } else { ("LO", "UP") };
        if lb == ub {
            let _ = writeln!(out, " FX BND {n} {}", fmt_num(lb));
        } else if lb == f64::NEG_INFINITY && ub == f64::INFINITY {
            let _ = writeln!(out, " FR BND {n}");
        } else {
            if lb == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND {n}");
            } else if lb != 0.0 || var.kind == VarKind::Integer {
                let _ = writeln!(out, " {lo_tag} BND {n} {}", fmt_num(lb));
            }
            if ub != f64::INFINITY {
                let _ = writeln!(out, " {up_tag} BND {n} {}", fmt_num(ub));
            }
        }
    }

    if !model.sos1_constraints().is_empty() {
        out.push_str("SOS\n");
        for s in model.sos1_constraints() {
            let _ = writeln!(out, " S1 SOS {}", sanitize(&s.name));
            for (&v, &w) in s.members.iter().zip(&s.weights) {
                let _ = writeln!(out, "    {} {}", names[v.index()], fmt_num(w));
            }
        }
    }
    if !ind.is_empty() {
        out.push_str("INDICATORS\n");
        for c in ind {
            let _ = writeln!(
                out,
                " IND {} {} {}",
                sanitize(&c.name),
                names[c.guard.index()],
                if c.active { 1 } else { 0 }
            );
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Sos,
    Indicators,
    End,
}

struct Row {
    name: String,
    sense: Option<Sense>,
    terms: Vec<(VarId, f64)>,
    rhs: f64,
    line: usize,
}

struct Col {
    name: String,
    integral: bool,
    binary: bool,
    lb: f64,
    ub: f64,
}

pub fn parse_mps(text: &str) -> Result<MipModel, FormatError> {
    let mut section = None;
    let mut sense = ObjSense::Minimize;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<Row> = Vec::new();
    let mut row_idx: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<Col> = Vec::new();
    let mut col_idx: HashMap<String, usize> = HashMap::new();
    let mut obj_terms: Vec<(VarId, f64)> = Vec::new();
    let mut obj_const = 0.0;
    let mut in_int = false;
    let mut sos: Vec<(String, Vec<VarId>, Vec<f64>, usize)> = Vec::new();
    let mut inds: Vec<(String, String, bool, usize)> = Vec::new();
    let mut last = 0;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        last = ln;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if section == Some(Section::End) {
            return Err(grammar(ln, "content after ENDATA"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(char::is_whitespace) {
            section = Some(match toks[0] {
                "NAME" => Section::Name,
                "OBJSENSE" => {
                    if let Some(s) = toks.get(1) {
                        sense = parse_sense(s, ln)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "SOS" => Section::Sos,
                "INDICATORS" => Section::Indicators,
                "ENDATA" => Section::End,
                other => return Err(grammar(ln, format!("unknown section `{other}`"))),
            });
            continue;
        }
        let sec = section.ok_or_else(|| grammar(ln, "content before NAME"))?;
        let col_of = |name: &str, col_idx: &HashMap<String, usize>| {
            col_idx
                .get(name)
                .copied()
                .ok_or_else(|| grammar(ln, format!("unknown column `{name}`")))
        };
        match sec {
            Section::Name | Section::End => return Err(grammar(ln, "unexpected entry")),
            Section::ObjSense => sense = parse_sense(toks[0], ln)?,
            Section::Rows => {
                let [t, n] = toks.as_slice() else {
                    return Err(grammar(ln, "expected `type name`"));
                };
                let s = match *t {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(grammar(ln, "second objective row"));
                        }
                        obj_row = Some(n.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(grammar(ln, format!("unknown row type `{t}`"))),
                };
                if row_idx.insert(n.to_string(), rows.len()).is_some() {
                    return Err(grammar(ln, format!("duplicate row `{n}`")));
                }
                rows.push(Row { name: n.to_string(), sense: Some(s), terms: Vec::new(), rhs: 0.0, line: ln });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" || toks.get(1) == Some(&"MARKER") {
                    match toks.last().map(|s| s.trim_matches('\'')) {
                        Some("INTORG") => in_int = true,
                        Some("INTEND") => in_int = false,
                        _ => return Err(grammar(ln, "bad MARKER line")),
                    }
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(grammar(ln, "expected `column row value [row value]`"));
                }
                let c = match col_idx.get(toks[0]) {
                    Some(&c) => c,
                    None => {
                        col_idx.insert(toks[0].to_string(), cols.len());
                        cols.push(Col {
                            name: toks[0].to_string(),
                            integral: in_int,
                            binary: false,
                            lb: 0.0,
                            ub: f64::INFINITY,
                        });
                        cols.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        obj_terms.push((VarId(c), v));
                    } else {
                        let r = *row_idx
                            .get(pair[0])
                            .ok_or_else(|| grammar(ln, format!("unknown row `{}`", pair[0])))?;
                        rows[r].terms.push((VarId(c), v));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(grammar(ln, "expected `set row value`"));
                }
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        obj_const = -v;
                    } else {
                        let r = *row_idx
                            .get(pair[0])
                            .ok_or_else(|| grammar(ln, format!("unknown row `{}`", pair[0])))?;
                        rows[r].rhs = v;
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(grammar(ln, "expected `type set column [value]`"));
                }
                let c = col_of(toks[2], &col_idx)?;
                let val = || -> Result<f64, FormatError> {
                    toks.get(3)
                        .ok_or_else(|| grammar(ln, "missing bound value"))
                        .and_then(|t| parse_num(t, ln))
                };
                let col = &mut cols[c];
                match toks[0] {
                    "BV" => {
                        col.binary = true;
                        col.integral = true;
                        col.lb = 0.0;
                        col.ub = 1.0;
                    }
                    "FX" => {
                        let v = val()?;
                        col.lb = v;
                        col.ub = v;
                    }
                    "FR" => {
                        col.lb = f64::NEG_INFINITY;
                        col.ub = f64::INFINITY;
                    }
                    "MI" => col.lb = f64::NEG_INFINITY,
                    "PL" => col.ub = f64::INFINITY,
                    "LO" | "LI" => {
                        col.lb = val()?;
                        col.integral |= toks[0] == "LI";
                    }
                    "UP" | "UI" => {
                        col.ub = val()?;
                        col.integral |= toks[0] == "UI";
                    }
                    t => return Err(grammar(ln, format!("unknown bound type `{t}`"))),
                }
            }
            Section::Sos => {
                if toks[0] == "S1" {
                    let [_, _, name] = toks.as_slice() else {
                        return Err(grammar(ln, "expected `S1 SOS name`"));
                    };
                    sos.push((name.to_string(), Vec::new(), Vec::new(), ln));
                } else {
                    let [v, w] = toks.as_slice() else {
                        return Err(grammar(ln, "expected `column weight`"));
                    };
                    let c = col_of(v, &col_idx)?;
                    let set = sos.last_mut().ok_or_else(|| grammar(ln, "SOS member before set header"))?;
                    set.1.push(VarId(c));
                    set.2.push(parse_num(w, ln)?);
                }
            }
            Section::Indicators => {
                let [tag, row, guard, val] = toks.as_slice() else {
                    return Err(grammar(ln, "expected `IND row column value`"));
                };
                if !matches!(*tag, "IND" | "IF") {
                    return Err(grammar(ln, format!("unknown indicator tag `{tag}`")));
                }
                let active = match *val {
                    "1" => true,
                    "0" => false,
                    _ => return Err(grammar(ln, "indicator value must be 0 or 1")),
                };
                inds.push((row.to_string(), guard.to_string(), active, ln));
            }
        }
    }
    if section != Some(Section::End) {
        return Err(grammar(last.max(1), "unexpected end of file, missing ENDATA"));
    }

    let mut model = MipModel::new();
    for c in &cols {
        let kind = if c.binary {
            VarKind::Binary
        } else if c.integral {
            VarKind::Integer
        } else {
            VarKind::Continuous
        };
        model.add_var(kind, c.lb, c.ub, c.name.clone())?;
    }
    model.set_objective(sense, &obj_terms, obj_const)?;

    let mut pending: Vec<PendingCons> = Vec::new();
    let mut ind_rows: HashMap<usize, (String, bool, usize)> = HashMap::new();
    for (row, guard, active, ln) in inds {
        let r = *row_idx.get(&row).ok_or_else(|| grammar(ln, format!("unknown row `{row}`")))?;
        ind_rows.insert(r, (guard, active, ln));
    }
    let mut indicator_cons = Vec::new();
    for (r, row) in rows.iter_mut().enumerate() {
        let lc = LinCons::new(row.name.clone(), &row.terms, row.sense.take().expect("set"), row.rhs);
        match ind_rows.remove(&r) {
            Some((guard, active, ln)) => {
                let g = *col_idx.get(&guard).ok_or_else(|| grammar(ln, format!("unknown column `{guard}`")))?;
                indicator_cons.push(PendingCons {
                    line: ln,
                    cons: Constraint::Indicator(IndicatorCons { name: row.name.clone(), guard: VarId(g), active, implied: lc }),
                });
            }
            None => pending.push(PendingCons { line: row.line, cons: Constraint::Linear(lc) }),
        }
    }
    pending.extend(indicator_cons);
    for (name, members, weights, ln) in sos {
        pending.push(PendingCons { line: ln, cons: Constraint::Sos1(Sos1Cons { name, members, weights }) });
    }
    add_pending(&mut model, pending)?;
    Ok(model)
}

fn parse_sense(s: &str, ln: usize) -> Result<ObjSense, FormatError> {
    match s {
        "MIN" | "MINIMIZE" => Ok(ObjSense::Minimize),
        "MAX" | "MAXIMIZE" => Ok(ObjSense::Maximize),
        _ => Err(grammar(ln, format!("unknown objective sense `{s}`"))),
    }
}
