//! Numerically stable scalar primitives, cosine similarity and the
//! single-view / multi-view similarity matrices.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MathError {
    #[error("{which} argument has zero norm")]
    ZeroNorm { which: &'static str },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("log-sum-exp of an empty list")]
    EmptyLse,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("length mismatch: {awes} acoustic embeddings vs {agwes} text embeddings")]
    LengthMismatch { awes: usize, agwes: usize },
    #[error("similarity kind {0} requires text embeddings")]
    MissingAgwes(SimilarityKind),
}

/// A point in the shared embedding space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, MathError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MathError::NonFinite("embedding"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Which pair of views a similarity matrix compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimilarityKind {
    /// `S_ij = cos(f_i, f_j)`
    #[serde(rename = "single")]
    Single,
    /// Proxies as positives/negatives: `S_ij = cos(f_i, g_j)`
    #[serde(rename = "pn")]
    ProxyPn,
    /// Proxies as anchors: `S_ij = cos(g_i, f_j)`
    #[serde(rename = "a")]
    ProxyAnchor,
}

impl SimilarityKind {
    pub fn is_multiview(self) -> bool {
        !matches!(self, SimilarityKind::Single)
    }

    pub fn label(self) -> &'static str {
        match self {
            SimilarityKind::Single => "single",
            SimilarityKind::ProxyPn => "P/N",
            SimilarityKind::ProxyAnchor => "A",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub entries: Array2<f64>,
    pub kind: SimilarityKind,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

fn check_pair(u: &[f64], v: &[f64]) -> Result<(f64, f64), MathError> {
    if u.len() != v.len() {
        return Err(MathError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = norm(u);
    if nu == 0.0 {
        return Err(MathError::ZeroNorm { which: "first" });
    }
    let nv = norm(v);
    if nv == 0.0 {
        return Err(MathError::ZeroNorm { which: "second" });
    }
    Ok((nu, nv))
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MathError> {
    let (nu, nv) = check_pair(u, v)?;
    Ok(dot(u, v) / (nu * nv))
}

/// Gradients of `cos(u, v)` with respect to `u` and `v`.
pub fn cosine_grad(u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MathError> {
    let (nu, nv) = check_pair(u, v)?;
    let c = dot(u, v) / (nu * nv);
    let inv = 1.0 / (nu * nv);
    let du = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| b * inv - c * a / (nu * nu))
        .collect();
    let dv = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| a * inv - c * b / (nv * nv))
        .collect();
    Ok((du, dv))
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid, stable for large `|z|`. This is the derivative of [`softplus`].
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted log-sum-exp.
pub fn lse(zs: &[f64]) -> Result<f64, MathError> {
    let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if zs.is_empty() {
        return Err(MathError::EmptyLse);
    }
    if !max.is_finite() {
        return Err(MathError::NonFinite("log-sum-exp input"));
    }
    let sum: f64 = zs.iter().map(|z| (z - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Log-sum-exp over `zs` with an extra zero argument: `log(1 + Σ e^z)`.
/// Defined for the empty list, where it is 0.
pub fn else_fn(zs: &[f64]) -> f64 {
    let max = zs.iter().copied().fold(0.0_f64, f64::max);
    let sum: f64 = zs.iter().map(|z| (z - max).exp()).sum::<f64>() + (-max).exp();
    max + sum.ln()
}

/// Softmax weights of `zs` against an extra zero argument, i.e. the gradient of
/// [`else_fn`]. The weights sum to strictly less than one.
pub fn else_weights(zs: &[f64]) -> Vec<f64> {
    let max = zs.iter().copied().fold(0.0_f64, f64::max);
    let exps: Vec<f64> = zs.iter().map(|z| (z - max).exp()).collect();
    let denom = exps.iter().sum::<f64>() + (-max).exp();
    exps.into_iter().map(|e| e / denom).collect()
}

/// Plain softmax, the gradient of [`lse`].
pub fn softmax(zs: &[f64]) -> Vec<f64> {
    let max = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = zs.iter().map(|z| (z - max).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / denom).collect()
}

fn unit_rows(rows: ArrayView2<'_, f64>, which: &'static str) -> Result<Array2<f64>, MathError> {
    let mut out = rows.to_owned();
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n == 0.0 {
            return Err(MathError::ZeroNorm { which });
        }
        if !n.is_finite() {
            return Err(MathError::NonFinite(which));
        }
        row /= n;
    }
    Ok(out)
}

/// Cosine similarity of every row of `left` against every row of `right`.
pub fn cross_cosine(
    left: ArrayView2<'_, f64>,
    right: ArrayView2<'_, f64>,
) -> Result<Array2<f64>, MathError> {
    if left.ncols() != right.ncols() {
        return Err(MathError::DimensionMismatch {
            left: left.ncols(),
            right: right.ncols(),
        });
    }
    let l = unit_rows(left, "first")?;
    let r = unit_rows(right, "second")?;
    let mut s = l.dot(&r.t());
    s.mapv_inplace(|x| x.clamp(-1.0, 1.0));
    Ok(s)
}

/// Builds the similarity matrix of the requested kind from acoustic
/// embeddings `awes` (rows) and, for the multi-view kinds, text embeddings
/// `agwes` aligned with them by index.
pub fn build_similarity(
    awes: ArrayView2<'_, f64>,
    agwes: Option<ArrayView2<'_, f64>>,
    kind: SimilarityKind,
) -> Result<SimilarityMatrix, MathError> {
    let entries = match kind {
        SimilarityKind::Single => {
            let mut s = cross_cosine(awes, awes)?;
            s.diag_mut().fill(1.0);
            s
        }
        SimilarityKind::ProxyPn | SimilarityKind::ProxyAnchor => {
            let g = agwes.ok_or(MathError::MissingAgwes(kind))?;
            if g.nrows() != awes.nrows() {
                return Err(MathError::LengthMismatch {
                    awes: awes.nrows(),
                    agwes: g.nrows(),
                });
            }
            if kind == SimilarityKind::ProxyPn {
                cross_cosine(awes, g)?
            } else {
                cross_cosine(g, awes)?
            }
        }
    };
    Ok(SimilarityMatrix { entries, kind })
}

/// Backpropagates `grad`, the loss gradient with respect to the matrix
/// `S_ij = cos(u_i, v_j)`, to the rows of `u` and `v`.
pub fn cosine_backward(
    u: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
    grad: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>), MathError> {
    let un = unit_rows(u, "first")?;
    let vn = unit_rows(v, "second")?;
    let s = un.dot(&vn.t());
    let gs = &grad * &s;
    let mut du = grad.dot(&vn);
    let mut dv = grad.t().dot(&un);
    for (i, mut row) in du.rows_mut().into_iter().enumerate() {
        let coef = gs.row(i).sum();
        let n = norm_of(u.row(i));
        row.scaled_add(-coef, &un.row(i));
        row /= n;
    }
    for (j, mut row) in dv.rows_mut().into_iter().enumerate() {
        let coef = gs.column(j).sum();
        let n = norm_of(v.row(j));
        row.scaled_add(-coef, &vn.row(j));
        row /= n;
    }
    Ok((du, dv))
}

fn norm_of(row: ArrayView1<'_, f64>) -> f64 {
    row.dot(&row).sqrt()
}
