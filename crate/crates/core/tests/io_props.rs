use proptest::prelude::*;

use surromip::io::{fmt_num, parse_lp, parse_mps, write_lp, write_mps};
use surromip::mip::{MipModel, ObjSense, Sense, VarId, VarKind};

fn num() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-50i32..=50).prop_map(|v| v as f64),
        prop::num::f64::NORMAL.prop_filter("moderate", |v| v.abs() < 1e30 && v.abs() > 1e-30),
        (-1e3f64..1e3),
    ]
}

#[derive(Debug, Clone)]
struct VarDesc {
    kind: VarKind,
    lb: f64,
    ub: f64,
}

fn var_desc() -> impl Strategy<Value = VarDesc> {
    (0u8..3, num(), 0.0f64..100.0, any::<bool>(), any::<bool>()).prop_map(|(k, lo, w, free_lo, free_hi)| match k {
        0 => VarDesc { kind: VarKind::Binary, lb: 0.0, ub: 1.0 },
        1 => VarDesc { kind: VarKind::Integer, lb: lo.round().clamp(-1e6, 1e6), ub: lo.round().clamp(-1e6, 1e6) + w.round() },
        _ => VarDesc {
            kind: VarKind::Continuous,
            lb: if free_lo { f64::NEG_INFINITY } else { lo },
            ub: if free_hi { f64::INFINITY } else { lo + w },
        },
    })
}

type Terms = Vec<(usize, f64)>;

fn terms(n: usize) -> impl Strategy<Value = Terms> {
    prop::collection::vec((0..n, num()), 0..5)
}

fn sense() -> impl Strategy<Value = Sense> {
    prop::sample::select(vec![Sense::Le, Sense::Eq, Sense::Ge])
}

fn model() -> impl Strategy<Value = MipModel> {
    prop::collection::vec(var_desc(), 1..6).prop_flat_map(|vars| {
        let n = vars.len();
        (
            Just(vars),
            prop::collection::vec((terms(n), sense(), num()), 0..5),
            prop::collection::vec((0..n, any::<bool>(), terms(n), any::<bool>(), num()), 0..3),
            prop::collection::vec(prop::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=n), 0..2),
            (any::<bool>(), terms(n), num()),
        )
            .prop_map(move |(vars, lin, ind, sos, (max, obj, c))| {
                let mut m = MipModel::new();
                for (i, v) in vars.iter().enumerate() {
                    m.add_var(v.kind, v.lb, v.ub, format!("x{i}")).unwrap();
                }
                let t = |ts: &Terms| ts.iter().map(|&(v, c)| (VarId(v), c)).collect::<Vec<_>>();
                for (k, (ts, s, rhs)) in lin.iter().enumerate() {
                    m.add_linear(format!("c{k}"), &t(ts), *s, *rhs).unwrap();
                }
                let binaries: Vec<usize> = (0..n).filter(|&i| vars[i].kind == VarKind::Binary).collect();
                for (k, (g, active, ts, le, rhs)) in ind.iter().enumerate() {
                    if binaries.is_empty() {
                        break;
                    }
                    let guard = VarId(binaries[g % binaries.len()]);
                    let s = if *le { Sense::Le } else { Sense::Ge };
                    m.add_indicator(format!("ind{k}"), guard, *active, &t(ts), s, *rhs).unwrap();
                }
                for (k, members) in sos.iter().enumerate().filter(|(_, s)| s.len() >= 2) {
                    let ids: Vec<VarId> = members.iter().map(|&v| VarId(v)).collect();
                    let w: Vec<f64> = (1..=ids.len()).map(|w| w as f64 * 1.5).collect();
                    m.add_sos1(format!("sos{k}"), &ids, &w).unwrap();
                }
                let sense = if max { ObjSense::Maximize } else { ObjSense::Minimize };
                m.set_objective(sense, &t(&obj), c).unwrap();
                m
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lp_round_trip(m in model()) {
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        prop_assert_eq!(&back, &m, "{}", text);
        prop_assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn mps_round_trip(m in model()) {
        let text = write_mps(&m);
        let back = parse_mps(&text).unwrap();
        prop_assert_eq!(&back, &m, "{}", text);
        prop_assert_eq!(write_mps(&back), text);
    }

    #[test]
    fn writers_are_pure(m in model()) {
        prop_assert_eq!(write_lp(&m), write_lp(&m.clone()));
        prop_assert_eq!(write_mps(&m), write_mps(&m.clone()));
    }

    #[test]
    fn numbers_reparse_bit_for_bit(x in prop::num::f64::ANY.prop_filter("not nan", |v| !v.is_nan())) {
        let s = fmt_num(x);
        let back: f64 = match s.as_str() {
            "+inf" => f64::INFINITY,
            "-inf" => f64::NEG_INFINITY,
            _ => s.parse().unwrap(),
        };
        if x == 0.0 {
            prop_assert_eq!(back, 0.0);
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits(), "{}", s);
        }
    }
}
