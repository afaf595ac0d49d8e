#![allow(dead_code)]

use circmtd::model::signs_from_ints;
use circmtd::{BindingDensity, Family, MtdArModel, Sign};
use proptest::prelude::*;

pub fn wc_model(a: &[f64], q: &[i64], rho: f64) -> MtdArModel {
    MtdArModel::new(
        a.to_vec(),
        signs_from_ints(q).unwrap(),
        BindingDensity::wrapped_cauchy(rho).unwrap(),
    )
    .unwrap()
}

/// The four sign panels used with `a = (0.3, 0.7)`, wrapped Cauchy 0.9.
pub const PANELS: [[i64; 2]; 4] = [[1, 1], [-1, 1], [1, -1], [-1, -1]];

pub fn panel(q: [i64; 2]) -> MtdArModel {
    wc_model(&[0.3, 0.7], &q, 0.9)
}

pub fn binding_strategy() -> impl Strategy<Value = BindingDensity> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|r| BindingDensity::wrapped_cauchy(r).unwrap()),
        (0.1f64..15.0).prop_map(|k| BindingDensity::von_mises(k).unwrap()),
    ]
}

/// Zero-mean-direction models of order 1..=4 with every weight positive.
pub fn model_strategy() -> impl Strategy<Value = MtdArModel> {
    (1usize..=4)
        .prop_flat_map(|p| {
            (
                proptest::collection::vec(0.05f64..1.0, p),
                proptest::collection::vec(any::<bool>(), p),
                binding_strategy(),
            )
        })
        .prop_map(|(w, s, b)| {
            let total: f64 = w.iter().sum();
            let mut a: Vec<f64> = w.iter().map(|x| x / total).collect();
            let head: f64 = a[..a.len() - 1].iter().sum();
            *a.last_mut().unwrap() = 1.0 - head;
            let signs = s.iter().map(|&m| if m { Sign::Minus } else { Sign::Plus }).collect();
            MtdArModel::new(a, signs, b).unwrap()
        })
}

pub fn family_name(f: Family) -> &'static str {
    f.name()
}
