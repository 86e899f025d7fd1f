use std::collections::BTreeMap;

use proptest::prelude::*;
use semiwave_core::model::Atom;
use semiwave_core::{HistorySegment, Measure, Model, ModelSpec};

fn builtins() -> Vec<Model> {
    vec![
        Model::kpp(0.0).unwrap(),
        Model::kpp(1.0).unwrap(),
        Model::nicholson(1.0, 2.0).unwrap(),
        Model::may(1.0, 2.0, 2.0, 1.0).unwrap(),
    ]
}

#[test]
fn kpp_examples() {
    let m = Model::kpp(1.0).unwrap();
    assert_eq!(m.eval_f(&HistorySegment::constant(1.0, 0.5)).unwrap(), 0.25);
    let ramp = HistorySegment::new(1.0, vec![0.0, 0.5]).unwrap();
    assert_eq!(ramp.eval(-1.0), 0.0);
    assert_eq!(m.eval_f(&ramp).unwrap(), 0.5);
    let exp = HistorySegment::from_fn(1.0, 101, |s| (2.0 * s).exp());
    assert_eq!(m.eval_lin(&exp).unwrap(), 1.0);
}

#[test]
fn equilibria_of_builtins() {
    for m in builtins() {
        let k = m.kappa();
        assert!(m.eval_f(&HistorySegment::constant(m.h(), 0.0)).unwrap().abs() <= 1e-12, "{}", m.name());
        assert!(m.eval_f(&HistorySegment::constant(m.h(), k)).unwrap().abs() <= 1e-12, "{}", m.name());
        assert!(m.lin().p() - m.lin().q() > 0.0);
    }
}

#[test]
fn nicholson_equilibrium_from_an_independent_root_find() {
    // bisection on p·x·e^{-x} = x, away from the trivial root
    let g = |x: f64| 2.0 * x * (-x).exp() - x;
    let (mut a, mut b) = (0.1, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let m = Model::nicholson(1.0, 2.0).unwrap();
    assert!((m.kappa() - 0.5 * (a + b)).abs() < 1e-12);
    assert!(m.eval_f(&HistorySegment::constant(1.0, m.kappa())).unwrap().abs() < 1e-12);
}

#[test]
fn mackey_glass_linearizations() {
    let nich = Model::nicholson(1.0, 2.0).unwrap();
    assert_eq!(nich.eval_lin(&HistorySegment::constant(1.0, 1.0)).unwrap(), 1.0);
    let may = Model::may(1.0, 2.0, 2.0, 1.0).unwrap();
    assert_eq!((may.lin().q(), may.lin().p()), (1.0, 2.0));
    assert!(Model::nicholson(1.0, 1.0).is_err());
}

#[test]
fn custom_spec_from_toml_like_json() {
    let spec: ModelSpec = serde_json::from_str(
        r#"{"model":"custom","h":0.5,"expr":"u(0)*(1-u(-h))","q":0,"atoms":[[0,1]],"kappa":1,
            "smoothness":{"K":2,"alpha":1,"delta":0.5}}"#,
    )
    .unwrap();
    let m = spec.build().unwrap();
    assert_eq!(m.smoothness().k, 2.0);
    let k = Model::kpp(0.5).unwrap();
    let seg = HistorySegment::from_fn(0.5, 7, |s| 0.4 + s * s);
    assert_eq!(m.eval_f(&seg).unwrap(), k.eval_f(&seg).unwrap());
}

#[test]
fn rejects_domain_mismatch_and_bad_measures() {
    let m = Model::kpp(1.0).unwrap();
    assert!(m.eval_f(&HistorySegment::constant(0.5, 0.1)).is_err());
    assert!(Measure::new(-1.0, vec![], 1.0).is_err());
    assert!(Measure::new(0.0, vec![Atom { s: -2.0, w: 1.0 }], 1.0).is_err());
    assert!(Measure::new(0.0, vec![Atom { s: 0.0, w: 0.0 }], 1.0).is_err());
    let lin = Measure::new(0.0, vec![Atom { s: 0.0, w: 1.0 }], 1.0).unwrap();
    assert!(Model::from_expr("x", 1.0, "u(-2)", &BTreeMap::new(), lin, 1.0).is_err());
}

fn segment(vals: &[f64], h: f64) -> HistorySegment {
    HistorySegment::new(h, vals.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn linearization_is_linear(
        a in prop::collection::vec(-2.0f64..2.0, 9),
        b in prop::collection::vec(-2.0f64..2.0, 9),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
    ) {
        for m in builtins() {
            let h = m.h();
            let (sa, sb) = if h == 0.0 { (segment(&a[..1], 0.0), segment(&b[..1], 0.0)) } else { (segment(&a, h), segment(&b, h)) };
            let combo = sa.combine(x, &sb, y).unwrap();
            let lhs = m.eval_lin(&combo).unwrap();
            let rhs = x * m.eval_lin(&sa).unwrap() + y * m.eval_lin(&sb).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
