//! Dense complex tensors with named axes.
//!
//! A [`Tensor`] stores its entries in row-major order over `shape`, and every
//! axis carries a label that is unique within the tensor. Contraction pairs
//! axes by label, so callers never track positional axis order by hand.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {got} does not match shape product {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("label count {labels} does not match rank {rank}")]
    LabelCount { labels: usize, rank: usize },

    #[error("duplicate axis label '{0}'")]
    DuplicateLabel(String),

    #[error("no axis labeled '{0}'")]
    UnknownLabel(String),

    #[error("axis '{0}' has zero length")]
    ZeroAxis(String),

    #[error("cannot pair '{a}' (len {a_dim}) with '{b}' (len {b_dim})")]
    DimensionMismatch {
        a: String,
        b: String,
        a_dim: usize,
        b_dim: usize,
    },

    #[error("expected a matrix (rank 2), got rank {0}")]
    NotAMatrix(usize),

    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
}

pub type TensorResult<T> = Result<T, TensorError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    labels: Vec<String>,
    data: Vec<C64>,
}

fn check_unique(labels: &[String]) -> TensorResult<()> {
    for (k, l) in labels.iter().enumerate() {
        if labels[..k].contains(l) {
            return Err(TensorError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// Row-major strides for `shape`.
fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl Tensor {
    pub fn new<L, S>(labels: L, shape: Vec<usize>, data: Vec<C64>) -> TensorResult<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != shape.len() {
            return Err(TensorError::LabelCount {
                labels: labels.len(),
                rank: shape.len(),
            });
        }
        check_unique(&labels)?;
        if let Some(k) = shape.iter().position(|&n| n == 0) {
            return Err(TensorError::ZeroAxis(labels[k].clone()));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(k) = data
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(TensorError::NonFinite(k));
        }
        Ok(Tensor {
            shape,
            labels,
            data,
        })
    }

    pub fn zeros<L, S>(labels: L, shape: Vec<usize>) -> TensorResult<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let n = shape.iter().product();
        Self::new(labels, shape, vec![C64::new(0.0, 0.0); n])
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn<L, S, F>(labels: L, shape: Vec<usize>, mut f: F) -> TensorResult<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
        F: FnMut(&[usize]) -> C64,
    {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(labels, shape, data)
    }

    pub fn scalar(z: C64) -> Self {
        Tensor {
            shape: Vec::new(),
            labels: Vec::new(),
            data: vec![z],
        }
    }

    pub fn from_vector(v: &DVector<C64>, label: &str) -> TensorResult<Self> {
        Self::new([label], vec![v.len()], v.iter().copied().collect())
    }

    pub fn from_matrix(m: &DMatrix<C64>, row: &str, col: &str) -> TensorResult<Self> {
        let (r, c) = m.shape();
        Self::from_fn([row, col], vec![r, c], |i| m[(i[0], i[1])])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn axis(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn axis_or_err(&self, label: &str) -> TensorResult<usize> {
        self.axis(label)
            .ok_or_else(|| TensorError::UnknownLabel(label.to_string()))
    }

    pub fn dim(&self, label: &str) -> TensorResult<usize> {
        Ok(self.shape[self.axis_or_err(label)?])
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.axis(label).is_some()
    }

    /// Entry at a multi-index given in axis order.
    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.rank());
        let flat = idx
            .iter()
            .zip(strides(&self.shape))
            .map(|(i, s)| i * s)
            .sum::<usize>();
        self.data[flat]
    }

    pub fn relabel(mut self, from: &str, to: &str) -> TensorResult<Self> {
        let k = self.axis_or_err(from)?;
        if from != to && self.has_label(to) {
            return Err(TensorError::DuplicateLabel(to.to_string()));
        }
        self.labels[k] = to.to_string();
        Ok(self)
    }

    pub fn scale(mut self, z: C64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= z);
        self
    }

    pub fn conj(mut self) -> Self {
        self.data.iter_mut().for_each(|x| *x = x.conj());
        self
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Returns a copy with axes reordered to `order`, which must name every
    /// axis exactly once.
    pub fn permuted(&self, order: &[&str]) -> TensorResult<Self> {
        if order.len() != self.rank() {
            return Err(TensorError::LabelCount {
                labels: order.len(),
                rank: self.rank(),
            });
        }
        let perm = order
            .iter()
            .map(|l| self.axis_or_err(l))
            .collect::<TensorResult<Vec<_>>>()?;
        let labels: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        check_unique(&labels)?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let src_strides = strides(&self.shape);
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let step: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                src += step[k];
                if idx[k] < shape[k] {
                    break;
                }
                src -= step[k] * shape[k];
                idx[k] = 0;
            }
        }
        Ok(Tensor {
            shape,
            labels,
            data,
        })
    }

    /// Sums over each `(label_in_self, label_in_other)` pair. The result keeps
    /// the unpaired axes of `self` followed by those of `other`, each in their
    /// original order.
    pub fn contract(&self, other: &Tensor, pairs: &[(&str, &str)]) -> TensorResult<Tensor> {
        let mut k_dim = 1usize;
        for &(la, lb) in pairs {
            let (da, db) = (self.dim(la)?, other.dim(lb)?);
            if da != db {
                return Err(TensorError::DimensionMismatch {
                    a: la.to_string(),
                    b: lb.to_string(),
                    a_dim: da,
                    b_dim: db,
                });
            }
            k_dim *= da;
        }
        let paired_a: Vec<&str> = pairs.iter().map(|p| p.0).collect();
        let paired_b: Vec<&str> = pairs.iter().map(|p| p.1).collect();
        let free_a: Vec<&str> = self
            .labels
            .iter()
            .map(String::as_str)
            .filter(|l| !paired_a.contains(l))
            .collect();
        let free_b: Vec<&str> = other
            .labels
            .iter()
            .map(String::as_str)
            .filter(|l| !paired_b.contains(l))
            .collect();
        if let Some(dup) = free_a.iter().find(|l| free_b.contains(l)) {
            return Err(TensorError::DuplicateLabel(dup.to_string()));
        }

        let a_order: Vec<&str> = free_a.iter().chain(paired_a.iter()).copied().collect();
        let b_order: Vec<&str> = paired_b.iter().chain(free_b.iter()).copied().collect();
        let a = self.permuted(&a_order)?;
        let b = other.permuted(&b_order)?;
        let m_dim = a.data.len() / k_dim;
        let n_dim = b.data.len() / k_dim;

        let mut data = vec![C64::new(0.0, 0.0); m_dim * n_dim];
        for i in 0..m_dim {
            let row = &a.data[i * k_dim..(i + 1) * k_dim];
            let out = &mut data[i * n_dim..(i + 1) * n_dim];
            for (k, &x) in row.iter().enumerate() {
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &b.data[k * n_dim..(k + 1) * n_dim];
                for (o, &y) in out.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }

        let shape: Vec<usize> = a.shape[..free_a.len()]
            .iter()
            .chain(&b.shape[paired_b.len()..])
            .copied()
            .collect();
        let labels: Vec<String> = free_a
            .iter()
            .chain(free_b.iter())
            .map(|s| s.to_string())
            .collect();
        Ok(Tensor {
            shape,
            labels,
            data,
        })
    }

    /// Flattens the tensor into a matrix whose row index runs over `rows` and
    /// column index over `cols` (both row-major).
    pub fn to_matrix(&self, rows: &[&str], cols: &[&str]) -> TensorResult<DMatrix<C64>> {
        let order: Vec<&str> = rows.iter().chain(cols.iter()).copied().collect();
        let t = self.permuted(&order)?;
        let nr: usize = t.shape[..rows.len()].iter().product();
        let nc: usize = t.shape[rows.len()..].iter().product();
        Ok(DMatrix::from_row_slice(nr, nc, &t.data))
    }

    /// Max absolute entry difference, after aligning `other`'s axes to ours.
    pub fn max_abs_diff(&self, other: &Tensor) -> TensorResult<f64> {
        let order: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        let o = other.permuted(&order)?;
        if o.shape != self.shape {
            return Err(TensorError::ShapeMismatch {
                expected: self.len(),
                got: o.len(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Thin QR of a rank-2 tensor. `Q` keeps the first axis and gains `bond`;
    /// `R` carries `bond` and the second axis. The diagonal of `R` is real and
    /// non-negative.
    pub fn qr(&self, bond: &str) -> TensorResult<(Tensor, Tensor)> {
        if self.rank() != 2 {
            return Err(TensorError::NotAMatrix(self.rank()));
        }
        let (row, col) = (self.labels[0].as_str(), self.labels[1].as_str());
        if bond == row || bond == col {
            return Err(TensorError::DuplicateLabel(bond.to_string()));
        }
        let m = self.to_matrix(&[row], &[col])?;
        let (q, r) = linalg::qr(&m);
        Ok((
            Tensor::from_matrix(&q, row, bond)?,
            Tensor::from_matrix(&r, bond, col)?,
        ))
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor[")?;
        for (k, (l, n)) in self.labels.iter().zip(&self.shape).enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}:{n}")?;
        }
        write!(f, "]")
    }
}
