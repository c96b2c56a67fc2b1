//! Conversions between complex arrays and the `[re, im]` JSON encoding shared
//! by every file schema.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type Pair = [f64; 2];

pub fn to_pair(z: C64) -> Pair {
    [z.re, z.im]
}

pub fn from_pair(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn vec_to_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().copied().map(to_pair).collect()
}

pub fn pairs_to_vec(p: &[Pair]) -> Vec<C64> {
    p.iter().copied().map(from_pair).collect()
}

pub fn pairs_to_dvector(p: &[Pair]) -> DVector<C64> {
    DVector::from_vec(pairs_to_vec(p))
}

pub fn matrix_to_rows(m: &DMatrix<C64>) -> Vec<Vec<Pair>> {
    m.row_iter()
        .map(|r| r.iter().copied().map(to_pair).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &[Vec<Pair>], what: &str) -> Result<DMatrix<C64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 {
        return Err(Error::Parse(format!("{what}: empty matrix")));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::Parse(format!(
            "{what}: row {k} has {} entries, expected {nc}",
            rows[k].len()
        )));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| from_pair(rows[i][j])))
}

/// Nested JSON arrays in the tensor's axis order, leaves `[re, im]`.
pub fn tensor_to_nested(t: &Tensor) -> Value {
    fn go(shape: &[usize], data: &[C64]) -> Value {
        match shape.split_first() {
            None => serde_json::json!(to_pair(data[0])),
            Some((&n, rest)) => {
                let chunk = data.len() / n;
                Value::Array(
                    (0..n)
                        .map(|k| go(rest, &data[k * chunk..(k + 1) * chunk]))
                        .collect(),
                )
            }
        }
    }
    go(t.shape(), t.data())
}

/// Inverse of [`tensor_to_nested`]; infers the shape from the first element
/// along each axis and rejects ragged input.
pub fn nested_to_tensor(v: &Value, labels: &[String], what: &str) -> Result<Tensor> {
    let mut shape = Vec::new();
    let mut cur = v;
    for _ in 0..labels.len() {
        let arr = cur.as_array().ok_or_else(|| {
            Error::Parse(format!(
                "{what}: expected nested array of rank {}",
                labels.len()
            ))
        })?;
        if arr.is_empty() {
            return Err(Error::Parse(format!("{what}: empty axis")));
        }
        shape.push(arr.len());
        cur = &arr[0];
    }
    let mut data = Vec::with_capacity(shape.iter().product());
    fn collect(v: &Value, shape: &[usize], out: &mut Vec<C64>, what: &str) -> Result<()> {
        match shape.split_first() {
            None => {
                let p: Pair = serde_json::from_value(v.clone())
                    .map_err(|e| Error::Parse(format!("{what}: bad complex entry: {e}")))?;
                out.push(from_pair(p));
                Ok(())
            }
            Some((&n, rest)) => {
                let arr = v
                    .as_array()
                    .filter(|a| a.len() == n)
                    .ok_or_else(|| Error::Parse(format!("{what}: ragged nested array")))?;
                arr.iter().try_for_each(|x| collect(x, rest, out, what))
            }
        }
    }
    collect(v, &shape, &mut data, what)?;
    Ok(Tensor::new(labels.iter().cloned(), shape, data)?)
}

/// Binary basis label `i_n ⋯ i_1` (one symbol per photon, photon 1 last).
pub fn basis_label(mut index: usize, dims: &[usize]) -> String {
    let mut digits = Vec::with_capacity(dims.len());
    for &d in dims {
        digits.push(index % d);
        index /= d;
    }
    digits
        .iter()
        .rev()
        .map(|x| char::from_digit(*x as u32, 36).unwrap_or('?').to_string())
        .collect()
}
