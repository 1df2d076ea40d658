//! The nine problem builders.

use rand::Rng;

use crate::formulator::{encode_abs_exact, encode_min2, LinExpr};
use crate::mip::{ObjSense, Sense, VarId, VarKind};
use crate::predictor::{argmax, Head};

use super::{score_bounds, FabricateSpec, Gen, SurrogateError};

type R = Result<(), SurrogateError>;

fn cont(g: &mut Gen<'_>, lo: f64, hi: f64, name: impl Into<String>) -> Result<VarId, SurrogateError> {
    Ok(g.model.add_continuous(lo, hi, name)?)
}

fn row(g: &mut Gen<'_>, name: impl Into<String>, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> R {
    g.model.add_linear(name, terms, sense, rhs)?;
    Ok(())
}

fn uniform(g: &mut Gen<'_>, lo: f64, hi: f64) -> f64 {
    g.data.gen_range(lo..=hi)
}

fn sample_box(g: &mut Gen<'_>, b: &[(f64, f64)]) -> Vec<f64> {
    b.iter().map(|&(lo, hi)| uniform(g, lo, hi)).collect()
}

/// Pixels `x̄` near a base image `x` within an L1 budget; minimise the runner-up
/// score minus the true-label score of the classifier at `x̄`.
pub(super) fn adversarial(g: &mut Gen<'_>) -> R {
    let n = g.param(0);
    let pixels = n * n;
    let spec = FabricateSpec {
        input_box: vec![(0.0, 1.0); pixels],
        outputs: 10,
        output_range: (-1.0, 1.0),
        head: Head::Regression,
    };
    let f = g.predictor(&spec)?;
    let base: Vec<f64> = (0..pixels).map(|_| uniform(g, 0.0, 1.0)).collect();
    let budget = uniform(g, 0.05, 0.15) * pixels as f64;
    let scores = g.predictor_ref(f).score_eval(&base)?;
    let truth = argmax(&scores);
    let mut masked = scores.clone();
    masked[truth] = f64::NEG_INFINITY;
    let runner_up = argmax(&masked);

    let mut xbar = Vec::with_capacity(pixels);
    let mut d = Vec::with_capacity(pixels);
    for i in 0..n {
        for j in 0..n {
            xbar.push(cont(g, 0.0, 1.0, format!("xbar_{i}_{j}"))?);
            d.push(cont(g, 0.0, 1.0, format!("d_{i}_{j}"))?);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            row(g, format!("adv_pos_{i}_{j}"), &[(xbar[k], 1.0), (d[k], -1.0)], Sense::Le, base[k])?;
            row(g, format!("adv_neg_{i}_{j}"), &[(xbar[k], -1.0), (d[k], -1.0)], Sense::Le, -base[k])?;
        }
    }
    let all: Vec<(VarId, f64)> = d.iter().map(|&v| (v, 1.0)).collect();
    row(g, "adv_budget", &all, Sense::Le, budget)?;
    let y = g.embed("f", f, &xbar, None)?.output_vars.clone();
    g.model.set_objective(ObjSense::Minimize, &[(y[runner_up], 1.0), (y[truth], -1.0)], 0.0)?;
    g.note("budget", budget);
    g.note("true_label", truth);
    g.note("runner_up", runner_up);
    g.note("base_image", &base);
    Ok(())
}

/// Vehicle features in order; efficiency comes first.
const AUTO_FEATURES: [(&str, f64, f64); 10] = [
    ("efficiency", 15.0, 45.0),
    ("type", 0.0, 1.0),
    ("engine", 1.0, 8.0),
    ("horsepower", 40.0, 450.0),
    ("wheelbase", 90.0, 140.0),
    ("width", 60.0, 80.0),
    ("length", 150.0, 230.0),
    ("curb_weight", 1.8, 5.6),
    ("fuel_capacity", 10.0, 32.0),
    ("power_factor", 20.0, 190.0),
];
const POPULAR: usize = 3;

/// Maximise predicted sales of a new design that differs enough from every
/// popular vehicle and keeps resale value and efficiency high.
pub(super) fn auto(g: &mut Gen<'_>) -> R {
    let fbox: Vec<(f64, f64)> = AUTO_FEATURES.iter().map(|&(_, l, u)| (l, u)).collect();
    let f = g.predictor(&FabricateSpec::regression(fbox.clone(), (8.0, 85.0)))?;
    let price_box = score_bounds(g.predictor_ref(f), &fbox)?[0];
    let mut gbox = fbox.clone();
    gbox.push(price_box);
    let gp = g.predictor(&FabricateSpec::regression(gbox.clone(), (0.0, 250.0)))?;
    let hp = g.predictor(&FabricateSpec::regression(gbox.clone(), (5.0, 70.0)))?;

    let x: Vec<VarId> = AUTO_FEATURES
        .iter()
        .map(|&(name, l, u)| cont(g, l, u, format!("x_{name}")))
        .collect::<Result<_, _>>()?;
    let price = cont(g, price_box.0, price_box.1, "y_price")?;
    let sold_box = score_bounds(g.predictor_ref(gp), &gbox)?[0];
    let resell_box = score_bounds(g.predictor_ref(hp), &gbox)?[0];
    let sold = cont(g, sold_box.0, sold_box.1, "y_sold")?;
    let resell = cont(g, resell_box.0, resell_box.1, "y_resell")?;

    let gamma = uniform(g, 0.5, 1.5);
    let alpha = uniform(g, 0.3, 0.7);
    let (l0, u0) = fbox[0];
    let beta = l0 + uniform(g, 0.0, 0.5) * (u0 - l0);
    let popular: Vec<Vec<f64>> = (0..POPULAR).map(|_| sample_box(g, &fbox)).collect();

    for (j, car) in popular.iter().enumerate() {
        let mut diff = Vec::with_capacity(x.len());
        for (i, (&xi, &(l, u))) in x.iter().zip(&fbox).enumerate() {
            let e = LinExpr::new(vec![(xi, 1.0)], -car[i]);
            let m = (u - car[i]).max(car[i] - l);
            let a = encode_abs_exact(&mut g.model, &e, m, &format!("auto_abs{j}_{i}"))?;
            diff.push((a.d, 1.0 / (u - l)));
        }
        row(g, format!("auto_diff{j}"), &diff, Sense::Ge, gamma)?;
    }
    row(g, "auto_resell", &[(resell, 1.0), (price, -alpha)], Sense::Ge, 0.0)?;
    row(g, "auto_eff", &[(x[0], 1.0)], Sense::Ge, beta)?;

    g.embed("f", f, &x, Some(&[price]))?;
    let mut xp = x.clone();
    xp.push(price);
    g.embed("g", gp, &xp, Some(&[sold]))?;
    g.embed("h", hp, &xp, Some(&[resell]))?;
    g.model.set_objective(ObjSense::Maximize, &[(sold, 1.0)], 0.0)?;
    g.note("gamma", gamma);
    g.note("alpha", alpha);
    g.note("beta", beta);
    g.note("popular", &popular);
    Ok(())
}

const GRID_KM: f64 = 10.0;
/// Amenity types; every type except the last is built twice.
const AMENITIES: [&str; 7] = ["school", "doctor", "post", "kinder", "restaurant", "pharmacy", "college"];

/// Place amenities on the grid to maximise the summed predicted price of
/// the apartments, using the distance to the nearest copy of each type.
pub(super) fn city(g: &mut Gen<'_>) -> R {
    let n = g.param(0);
    let far = 2.0 * GRID_KM;
    let mut abox = vec![(20.0, 150.0), (1.0, 6.0), (0.0, 15.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, GRID_KM)];
    abox.extend(std::iter::repeat((0.0, far)).take(AMENITIES.len()));
    let f = g.predictor(&FabricateSpec::regression(abox, (100.0, 1000.0)))?;
    let gamma = uniform(g, 1.0, 3.0);

    // b[t][c][k]: coordinate k of copy c of amenity t.
    let mut b: Vec<Vec<[VarId; 2]>> = Vec::new();
    for (t, name) in AMENITIES.iter().enumerate() {
        let copies = if t + 1 == AMENITIES.len() { 1 } else { 2 };
        let mut v = Vec::new();
        for c in 0..copies {
            v.push([
                cont(g, 0.0, GRID_KM, format!("b_{name}_{c}_0"))?,
                cont(g, 0.0, GRID_KM, format!("b_{name}_{c}_1"))?,
            ]);
        }
        b.push(v);
    }
    for (t, name) in AMENITIES.iter().enumerate().take(AMENITIES.len() - 1) {
        let mut sep = Vec::new();
        for k in 0..2 {
            let e = LinExpr::var(b[t][0][k]).minus(&LinExpr::var(b[t][1][k]));
            sep.push((encode_abs_exact(&mut g.model, &e, GRID_KM, &format!("city_sep_{name}_{k}"))?.d, 1.0));
        }
        row(g, format!("city_sep_{name}"), &sep, Sense::Ge, gamma)?;
    }

    let mut apartments = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        let a = [uniform(g, 0.0, GRID_KM), uniform(g, 0.0, GRID_KM)];
        let centre = (a[0] - GRID_KM / 2.0).abs() + (a[1] - GRID_KM / 2.0).abs();
        let fixed = [
            ("sqm", uniform(g, 20.0, 150.0)),
            ("rooms", g.data.gen_range(1..=6) as f64),
            ("floor", g.data.gen_range(0..=15) as f64),
            ("parking", g.data.gen_range(0..=1) as f64),
            ("balcony", g.data.gen_range(0..=1) as f64),
            ("security", g.data.gen_range(0..=1) as f64),
            ("centre", centre),
        ];
        let mut x = Vec::with_capacity(14);
        for (name, v) in fixed {
            x.push(cont(g, v, v, format!("apt{i}_{name}"))?);
        }
        for (t, name) in AMENITIES.iter().enumerate() {
            let mut dists = Vec::new();
            for (c, coords) in b[t].clone().iter().enumerate() {
                let mut terms = Vec::new();
                for k in 0..2 {
                    let e = LinExpr::new(vec![(coords[k], 1.0)], -a[k]);
                    let abs = encode_abs_exact(&mut g.model, &e, GRID_KM, &format!("apt{i}_{name}{c}_{k}"))?;
                    terms.push((abs.d, 1.0));
                }
                dists.push(LinExpr::new(terms, 0.0));
            }
            let feature = if dists.len() == 2 {
                let m = encode_min2(&mut g.model, &dists[0], &dists[1], far, &format!("apt{i}_{name}"))?.m;
                g.model.set_var_bounds(m, 0.0, far)?;
                m
            } else {
                let v = cont(g, 0.0, far, format!("apt{i}_{name}"))?;
                let mut terms = vec![(v, 1.0)];
                terms.extend(dists[0].terms.iter().map(|&(d, _)| (d, -1.0)));
                row(g, format!("apt{i}_{name}_def"), &terms, Sense::Eq, 0.0)?;
                v
            };
            x.push(feature);
        }
        let y = g.embed(&format!("f{i}"), f, &x, None)?.output_vars[0];
        outputs.push((y, 1.0));
        apartments.push(a);
    }
    g.model.set_objective(ObjSense::Maximize, &outputs, 0.0)?;
    g.note("grid_km", GRID_KM);
    g.note("gamma", gamma);
    g.note("apartments", &apartments);
    Ok(())
}

/// Minimise `f(x)` subject to `g(x) = c` on `[-1, 1]^n`, where `c = g(x0)`
/// for a sampled `x0`.
pub(super) fn function(g: &mut Gen<'_>) -> R {
    let n = g.param(0);
    let bx = vec![(-1.0, 1.0); n];
    let fp = g.predictor(&FabricateSpec::regression(bx.clone(), (-2.0, 2.0)))?;
    let gp = g.predictor(&FabricateSpec::regression(bx.clone(), (-2.0, 2.0)))?;
    let mut quadratics = Vec::new();
    for _ in 0..2 {
        let q: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| uniform(g, -1.0, 1.0)).collect()).collect();
        let a: Vec<f64> = (0..n).map(|_| uniform(g, -1.0, 1.0)).collect();
        let b = uniform(g, -1.0, 1.0);
        quadratics.push(serde_json::json!({ "q": q, "a": a, "b": b }));
    }
    let x0 = sample_box(g, &bx);
    let c = g.predictor_ref(gp).score_eval(&x0)?[0];
    let x: Vec<VarId> = (0..n).map(|i| cont(g, -1.0, 1.0, format!("x_{i}"))).collect::<Result<_, _>>()?;
    let yf = g.embed("f", fp, &x, None)?.output_vars[0];
    let yg = g.embed("g", gp, &x, None)?.output_vars[0];
    row(g, "func_target", &[(yg, 1.0)], Sense::Eq, c)?;
    g.model.set_objective(ObjSense::Minimize, &[(yf, 1.0)], 0.0)?;
    g.note("quadratics", &quadratics);
    g.note("x0", &x0);
    g.note("c", c);
    Ok(())
}

const FOODS: usize = 25;
const NUTRIENTS: usize = 12;
const SALT: usize = 23;
const SUGAR: usize = 24;

/// Cheapest basket meeting nutrient minima and a predicted palatability floor.
pub(super) fn palatable(g: &mut Gen<'_>) -> R {
    let bx = vec![(0.0, 30.0); FOODS];
    let f = g.predictor(&FabricateSpec::regression(bx.clone(), (0.0, 1.0)))?;
    let nutrition: Vec<Vec<f64>> = (0..FOODS)
        .map(|_| (0..NUTRIENTS).map(|_| uniform(g, 0.0, 1.0)).collect())
        .collect();
    let cost: Vec<f64> = (0..FOODS).map(|_| uniform(g, 1.0, 10.0)).collect();
    let mut baseline = sample_box(g, &bx);
    baseline[SALT] = 5.0;
    baseline[SUGAR] = 20.0;
    let gamma: Vec<f64> = (0..NUTRIENTS)
        .map(|j| {
            let supplied: f64 = (0..FOODS).map(|i| nutrition[i][j] * baseline[i]).sum();
            uniform(g, 0.5, 0.9) * supplied
        })
        .collect();
    let beta = g.predictor_ref(f).score_eval(&baseline)?[0];

    let x: Vec<VarId> = (0..FOODS)
        .map(|i| {
            let name = match i {
                SALT => "x_salt".to_string(),
                SUGAR => "x_sugar".to_string(),
                _ => format!("x_{i}"),
            };
            cont(g, 0.0, 30.0, name)
        })
        .collect::<Result<_, _>>()?;
    for j in 0..NUTRIENTS {
        let terms: Vec<(VarId, f64)> = (0..FOODS).map(|i| (x[i], nutrition[i][j])).collect();
        row(g, format!("diet_nut{j}"), &terms, Sense::Ge, gamma[j])?;
    }
    let p = g.embed("f", f, &x, None)?.output_vars[0];
    row(g, "diet_pal", &[(p, 1.0)], Sense::Ge, beta)?;
    row(g, "diet_salt", &[(x[SALT], 1.0)], Sense::Eq, 5.0)?;
    row(g, "diet_sugar", &[(x[SUGAR], 1.0)], Sense::Eq, 20.0)?;
    let obj: Vec<(VarId, f64)> = x.iter().zip(&cost).map(|(&v, &c)| (v, c)).collect();
    g.model.set_objective(ObjSense::Minimize, &obj, 0.0)?;
    g.note("nutrition", &nutrition);
    g.note("cost", &cost);
    g.note("gamma", &gamma);
    g.note("beta", beta);
    g.note("baseline", &baseline);
    Ok(())
}

const SPECIES: usize = 4;
const SITE_FEATURES: [&str; 6] = ["light", "moisture", "nitrogen", "phosphorus", "potassium", "mycorrhiza"];

/// Plant one species per location; survival is predicted per species from six
/// fixed site features and a sterilisation choice.
pub(super) fn tree_planting(g: &mut Gen<'_>) -> R {
    let n = g.param(0);
    let bx = vec![(0.0, 1.0); SITE_FEATURES.len() + 1];
    let preds: Vec<usize> = (0..SPECIES)
        .map(|_| g.predictor(&FabricateSpec::regression(bx.clone(), (0.0, 1.0))))
        .collect::<Result<_, _>>()?;
    let cost: Vec<f64> = (0..SPECIES).map(|_| uniform(g, 1.0, 5.0)).collect();
    let gamma: Vec<f64> = (0..SPECIES).map(|_| uniform(g, 0.0, 0.1) * n as f64).collect();
    let (cmin, cmax) = cost.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let cost_budget = n as f64 * (cmin + uniform(g, 0.3, 0.8) * (cmax - cmin));
    let sterile_budget = g.data.gen_range(0..=n / 2) as f64;

    let mut sterile = Vec::with_capacity(n);
    let mut sites = Vec::with_capacity(n);
    let mut p = vec![Vec::with_capacity(SPECIES); n];
    let mut adj = vec![Vec::with_capacity(SPECIES); n];
    for i in 0..n {
        let values: Vec<f64> = SITE_FEATURES.iter().map(|_| uniform(g, 0.0, 1.0)).collect();
        let mut x = Vec::with_capacity(bx.len());
        for (name, &v) in SITE_FEATURES.iter().zip(&values) {
            x.push(cont(g, v, v, format!("loc{i}_{name}"))?);
        }
        let s = g.model.add_var(VarKind::Binary, 0.0, 1.0, format!("loc{i}_sterile"))?;
        x.push(s);
        sterile.push((s, 1.0));
        for (k, &fk) in preds.iter().enumerate() {
            let surv = g.embed(&format!("f{k}_{i}"), fk, &x, None)?.output_vars[0];
            let pik = g.model.add_binary(format!("p_{i}_{k}"))?;
            let sp = cont(g, 0.0, 1.0, format!("sp_{i}_{k}"))?;
            g.model.add_indicator(format!("tp_on_{i}_{k}"), pik, true, &[(sp, 1.0), (surv, -1.0)], Sense::Le, 0.0)?;
            g.model.add_indicator(format!("tp_off_{i}_{k}"), pik, false, &[(sp, 1.0)], Sense::Le, 0.0)?;
            p[i].push(pik);
            adj[i].push(sp);
        }
        let one: Vec<(VarId, f64)> = p[i].iter().map(|&v| (v, 1.0)).collect();
        row(g, format!("tp_one_{i}"), &one, Sense::Eq, 1.0)?;
        sites.push(values);
    }
    for k in 0..SPECIES {
        let terms: Vec<(VarId, f64)> = (0..n).map(|i| (adj[i][k], 1.0)).collect();
        row(g, format!("tp_min_{k}"), &terms, Sense::Ge, gamma[k])?;
    }
    let spend: Vec<(VarId, f64)> = (0..n).flat_map(|i| (0..SPECIES).map(move |k| (i, k))).map(|(i, k)| (p[i][k], cost[k])).collect();
    row(g, "tp_cost", &spend, Sense::Le, cost_budget)?;
    row(g, "tp_sterile", &sterile, Sense::Le, sterile_budget)?;
    let obj: Vec<(VarId, f64)> = adj.iter().flatten().map(|&v| (v, 1.0)).collect();
    g.model.set_objective(ObjSense::Maximize, &obj, 0.0)?;
    g.note("cost", &cost);
    g.note("gamma", &gamma);
    g.note("cost_budget", cost_budget);
    g.note("sterile_budget", sterile_budget);
    g.note("sites", &sites);
    Ok(())
}

const WATER_FEATURES: [(&str, f64, f64); 9] = [
    ("ph", 0.0, 14.0),
    ("hardness", 47.0, 324.0),
    ("solids", 320.0, 61228.0),
    ("chloramines", 0.35, 13.2),
    ("sulfate", 129.0, 482.0),
    ("conductivity", 181.0, 754.0),
    ("organic_carbon", 2.2, 28.3),
    ("trihalomethanes", 0.74, 124.0),
    ("turbidity", 1.45, 6.74),
];

/// Treat water samples within per-feature budgets to maximise the number
/// classified drinkable.
pub(super) fn water(g: &mut Gen<'_>) -> R {
    let n = g.param(0);
    let fbox: Vec<(f64, f64)> = WATER_FEATURES.iter().map(|&(_, l, u)| (l, u)).collect();
    let spec = FabricateSpec { input_box: fbox.clone(), outputs: 2, output_range: (-1.0, 1.0), head: Head::Argmax };
    let f = g.predictor(&spec)?;
    let samples: Vec<Vec<f64>> = (0..n).map(|_| sample_box(g, &fbox)).collect();
    let up: Vec<f64> = fbox.iter().map(|&(l, u)| uniform(g, 0.05, 0.2) * (u - l) * n as f64).collect();
    let down: Vec<f64> = fbox.iter().map(|&(l, u)| uniform(g, 0.05, 0.2) * (u - l) * n as f64).collect();

    let mut a = vec![Vec::new(); n];
    let mut b = vec![Vec::new(); n];
    let mut drinkable = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = Vec::with_capacity(fbox.len());
        for (j, &(name, l, u)) in WATER_FEATURES.iter().enumerate() {
            let xv = cont(g, l, u, format!("x_{i}_{name}"))?;
            let av = cont(g, 0.0, u - l, format!("a_{i}_{name}"))?;
            let bv = cont(g, 0.0, u - l, format!("b_{i}_{name}"))?;
            row(g, format!("wat_link_{i}_{j}"), &[(xv, 1.0), (av, -1.0), (bv, 1.0)], Sense::Eq, samples[i][j])?;
            x.push(xv);
            a[i].push(av);
            b[i].push(bv);
        }
        let e = g.embed(&format!("f{i}"), f, &x, None)?;
        drinkable.push((e.argmax.as_ref().expect("argmax head").z[1], 1.0));
    }
    for (j, &(name, _, _)) in WATER_FEATURES.iter().enumerate() {
        let ta: Vec<(VarId, f64)> = (0..n).map(|i| (a[i][j], 1.0)).collect();
        let tb: Vec<(VarId, f64)> = (0..n).map(|i| (b[i][j], 1.0)).collect();
        row(g, format!("wat_up_{name}"), &ta, Sense::Le, up[j])?;
        row(g, format!("wat_down_{name}"), &tb, Sense::Le, down[j])?;
    }
    g.model.set_objective(ObjSense::Maximize, &drinkable, 0.0)?;
    g.note("samples", &samples);
    g.note("gamma_up", &up);
    g.note("gamma_down", &down);
    Ok(())
}

const WINE_FEATURES: [(&str, f64, f64); 11] = [
    ("fixed_acidity", 4.6, 15.9),
    ("volatile_acidity", 0.12, 1.58),
    ("citric_acid", 0.0, 1.0),
    ("residual_sugar", 0.9, 15.5),
    ("chlorides", 0.012, 0.611),
    ("free_sulfur", 1.0, 72.0),
    ("total_sulfur", 6.0, 289.0),
    ("density", 0.99, 1.004),
    ("ph", 2.74, 4.01),
    ("sulphates", 0.33, 2.0),
    ("alcohol", 8.4, 14.9),
];

/// Blend vendor grapes into `n` unit-size wines maximising summed predicted quality.
pub(super) fn wine(g: &mut Gen<'_>) -> R {
    let (n, m) = (g.param(0), g.param(1));
    let fbox: Vec<(f64, f64)> = WINE_FEATURES.iter().map(|&(_, l, u)| (l, u)).collect();
    let f = g.predictor(&FabricateSpec::regression(fbox.clone(), (3.0, 8.0)))?;
    let vendors: Vec<Vec<f64>> = (0..m).map(|_| sample_box(g, &fbox)).collect();
    let supply: Vec<f64> = (0..m).map(|_| uniform(g, 1.0, 2.0)).collect();
    let cost: Vec<f64> = (0..m).map(|_| uniform(g, 1.0, 10.0)).collect();
    let mut sorted = cost.clone();
    sorted.sort_by(f64::total_cmp);
    let budget = sorted[..n].iter().sum::<f64>() * uniform(g, 1.0, 1.5);
    let alpha = uniform(g, 0.0, 1.0);

    let mut bvars = vec![Vec::with_capacity(m); n];
    let mut quality = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..m {
            bvars[i].push(cont(g, 0.0, 1.0, format!("b_{i}_{j}"))?);
        }
        let mut x = Vec::with_capacity(fbox.len());
        for (k, &(name, l, u)) in WINE_FEATURES.iter().enumerate() {
            let xv = cont(g, l, u, format!("x_{i}_{name}"))?;
            let mut terms = vec![(xv, 1.0)];
            terms.extend((0..m).map(|j| (bvars[i][j], -vendors[j][k])));
            row(g, format!("wine_feat_{i}_{k}"), &terms, Sense::Eq, 0.0)?;
            x.push(xv);
        }
        let y = cont(g, 0.0, 10.0, format!("y_{i}"))?;
        g.embed(&format!("f{i}"), f, &x, Some(&[y]))?;
        quality.push(y);
    }
    for j in 0..m {
        let terms: Vec<(VarId, f64)> = (0..n).map(|i| (bvars[i][j], 1.0)).collect();
        row(g, format!("wine_supply_{j}"), &terms, Sense::Le, supply[j])?;
    }
    let spend: Vec<(VarId, f64)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (bvars[i][j], cost[j])).collect();
    row(g, "wine_budget", &spend, Sense::Le, budget)?;
    for i in 0..n {
        let terms: Vec<(VarId, f64)> = bvars[i].iter().map(|&v| (v, 1.0)).collect();
        row(g, format!("wine_blend_{i}"), &terms, Sense::Eq, 1.0)?;
    }
    for (i, &y) in quality.iter().enumerate() {
        row(g, format!("wine_q_{i}"), &[(y, 1.0)], Sense::Ge, alpha)?;
    }
    let obj: Vec<(VarId, f64)> = quality.iter().map(|&y| (y, 1.0)).collect();
    g.model.set_objective(ObjSense::Maximize, &obj, 0.0)?;
    g.note("vendors", &vendors);
    g.note("supply", &supply);
    g.note("cost", &cost);
    g.note("budget", budget);
    g.note("alpha", alpha);
    Ok(())
}

pub(crate) const CORES: usize = 4;
pub(crate) const JOBS: usize = 8;
const CPI: (f64, f64) = (0.5, 3.0);

/// Grid neighbours of core `i` on a `side x side` layout.
fn neighbours(i: usize, side: usize) -> Vec<usize> {
    let (r, c) = (i / side, i % side);
    let mut v = Vec::new();
    if r > 0 {
        v.push(i - side);
    }
    if c > 0 {
        v.push(i - 1);
    }
    if c + 1 < side {
        v.push(i + 1);
    }
    if r + 1 < side {
        v.push(i + side);
    }
    v
}

/// Assign equal job counts to cores on a square grid, maximising the minimum
/// predicted core efficiency.
pub(super) fn workload(g: &mut Gen<'_>) -> R {
    let (n, m) = (CORES, JOBS);
    let side = (n as f64).sqrt().round() as usize;
    let f = g.predictor(&FabricateSpec::regression(vec![CPI; 3], (0.0, 1.0)))?;
    let cpi: Vec<f64> = (0..m).map(|_| uniform(g, CPI.0, CPI.1)).collect();

    let x: Vec<Vec<VarId>> = (0..n)
        .map(|i| (0..m).map(|j| g.model.add_binary(format!("x_{i}_{j}"))).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let avg: Vec<VarId> = (0..n).map(|i| cont(g, CPI.0, CPI.1, format!("avg_{i}"))).collect::<Result<_, _>>()?;
    let near: Vec<VarId> = (0..n).map(|i| cont(g, CPI.0, CPI.1, format!("avgn_{i}"))).collect::<Result<_, _>>()?;
    let away: Vec<VarId> = (0..n).map(|i| cont(g, CPI.0, CPI.1, format!("avgf_{i}"))).collect::<Result<_, _>>()?;
    let e = cont(g, f64::NEG_INFINITY, f64::INFINITY, "e")?;

    for j in 0..m {
        let terms: Vec<(VarId, f64)> = (0..n).map(|i| (x[i][j], 1.0)).collect();
        row(g, format!("wl_job_{j}"), &terms, Sense::Eq, 1.0)?;
    }
    let per_core = m as f64 / n as f64;
    for i in 0..n {
        let terms: Vec<(VarId, f64)> = x[i].iter().map(|&v| (v, 1.0)).collect();
        row(g, format!("wl_core_{i}"), &terms, Sense::Eq, per_core)?;
    }
    for i in 0..n {
        let mut terms = vec![(avg[i], 1.0)];
        terms.extend((0..m).map(|j| (x[i][j], -cpi[j] / per_core)));
        row(g, format!("wl_avg_{i}"), &terms, Sense::Eq, 0.0)?;
    }
    let mut hoods = Vec::with_capacity(n);
    for i in 0..n {
        let hood = neighbours(i, side);
        let rest: Vec<usize> = (0..n).filter(|k| !hood.contains(k)).collect();
        let mut terms = vec![(near[i], 1.0)];
        terms.extend(hood.iter().map(|&k| (avg[k], -1.0 / hood.len() as f64)));
        row(g, format!("wl_neigh_{i}"), &terms, Sense::Eq, 0.0)?;
        let mut terms = vec![(away[i], 1.0)];
        terms.extend(rest.iter().map(|&k| (avg[k], -1.0 / rest.len() as f64)));
        row(g, format!("wl_far_{i}"), &terms, Sense::Eq, 0.0)?;
        hoods.push(hood);
    }
    for i in 0..n {
        let y = g.embed(&format!("f{i}"), f, &[avg[i], near[i], away[i]], None)?.output_vars[0];
        row(g, format!("wl_min_{i}"), &[(e, 1.0), (y, -1.0)], Sense::Le, 0.0)?;
    }
    g.model.set_objective(ObjSense::Maximize, &[(e, 1.0)], 0.0)?;
    g.note("cores", n);
    g.note("jobs", m);
    g.note("cpi", &cpi);
    g.note("neighbourhoods", &hoods);
    Ok(())
}
