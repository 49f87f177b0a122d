//! Hand-built JSON so floats keep the fixed `%.12e` formatting.

use lattice_homog::report::fmt_e12;
use nalgebra::{DMatrix, DVector};

pub fn num(x: f64) -> String {
    if x.is_finite() {
        fmt_e12(x + 0.0)
    } else {
        "null".into()
    }
}

pub fn string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn array<I: IntoIterator<Item = String>>(items: I) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}

pub fn vector(v: &DVector<f64>) -> String {
    array(v.iter().map(|x| num(*x)))
}

pub fn ints(v: &[i64]) -> String {
    array(v.iter().map(i64::to_string))
}

/// Column vectors of `m` as a list.
pub fn columns(m: &DMatrix<f64>) -> String {
    array((0..m.ncols()).map(|j| vector(&m.column(j).into_owned())))
}

pub fn object(fields: &[(&str, String)]) -> String {
    array_like('{', '}', fields.iter().map(|(k, v)| format!("{}: {v}", string(k))))
}

fn array_like<I: IntoIterator<Item = String>>(open: char, close: char, items: I) -> String {
    format!("{open}{}{close}", items.into_iter().collect::<Vec<_>>().join(", "))
}
