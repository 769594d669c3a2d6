//! Serialization of nalgebra values as plain JSON arrays.

use nalgebra::{DMatrix, DVector};
use serde::ser::{SerializeSeq, Serializer};

pub fn vec<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v.iter() {
        seq.serialize_element(x)?;
    }
    seq.end()
}

pub fn opt_vec<S: Serializer>(v: &Option<DVector<f64>>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => vec(v, s),
        None => s.serialize_none(),
    }
}

pub fn vecs<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = v.iter().map(|x| x.iter().copied().collect()).collect();
    s.collect_seq(rows)
}

/// Row-major nested arrays.
pub fn mat<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
    s.collect_seq(rows)
}
