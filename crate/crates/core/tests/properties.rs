use pshlab::classify::{classify_point, kohn_strict_type4, FiniteType, Pseudoconvexity, Strict4, Tolerances};
use pshlab::expr::{parse_field, Params, Point4};
use proptest::prelude::*;

const MODEL: &str = "u + $a*absz2*(x^2-y^2) + absz2^2";
const ORIGIN: Point4 = Point4 { x: 0.0, y: 0.0, u: 0.0, v: 0.0 };

fn model(a: f64) -> pshlab::expr::ScalarField {
    let mut params = Params::new();
    params.insert("a".into(), a);
    parse_field(MODEL, &params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_below_one_meets_kohn(a in 0.0f64..0.95) {
        let r = model(a);
        let rep = classify_point(&r, &ORIGIN, &Tolerances::default()).unwrap();
        prop_assert_eq!(rep.c_p, FiniteType::Finite(4));
        prop_assert_eq!(rep.strict4, Strict4::Strict);
        prop_assert_eq!(kohn_strict_type4(&r, &ORIGIN, 1e-7).unwrap(), Some(true));
    }

    #[test]
    fn model_between_one_and_four_thirds(a in 1.05f64..1.3) {
        let r = model(a);
        let rep = classify_point(&r, &ORIGIN, &Tolerances::default()).unwrap();
        prop_assert_eq!(rep.strict4, Strict4::Strict);
        prop_assert_ne!(rep.pseudoconvex, Pseudoconvexity::No);
        prop_assert_eq!(kohn_strict_type4(&r, &ORIGIN, 1e-7).unwrap(), Some(false));
    }

    #[test]
    fn model_past_four_thirds_is_not_pseudoconvex(a in 1.36f64..3.0) {
        let rep = classify_point(&model(a), &ORIGIN, &Tolerances::default()).unwrap();
        prop_assert_eq!(rep.pseudoconvex, Pseudoconvexity::No);
    }

    #[test]
    fn type_is_twice_the_power(m in 1u32..5, c in 0.1f64..10.0) {
        let r = parse_field(&format!("u + {c}*absz2^{m}"), &Params::new()).unwrap();
        let rep = classify_point(&r, &ORIGIN, &Tolerances::default()).unwrap();
        prop_assert_eq!(rep.c_p, FiniteType::Finite(2 * m as usize));
    }
}
