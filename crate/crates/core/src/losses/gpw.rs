//! Assembly of a full proxy-based loss from a [`LossSpec`]:
//! `L = Σ_i F_P(S^P, P_i) + F_N(S^N, N_i)`.

use super::partition::{partition, IndexPartition, SelfPairPolicy};
use super::spec::{FunctionKind, LossSpec};
use super::terms::{else_term, lse_term, msp_term, neg_mean_term, Polarity, TermOutput};
use super::LossError;
use crate::math::{build_similarity, cosine_backward, SimilarityKind, SimilarityMatrix};
use ndarray::{Array2, ArrayView2};

/// Gradient of a loss with respect to one similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGrad {
    pub kind: SimilarityKind,
    pub grad: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// `∂L/∂S^P`, nonzero only at anchor-positive entries.
    pub grad_s_p: SimilarityGrad,
    /// `∂L/∂S^N`, nonzero only at anchor-negative entries.
    pub grad_s_n: SimilarityGrad,
}

/// A loss value with its gradients pushed back to the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub result: LossResult,
    pub grad_awes: Array2<f64>,
    /// Present whenever the batch carried text embeddings.
    pub grad_agwes: Option<Array2<f64>>,
}

impl LossEvaluation {
    pub fn value(&self) -> f64 {
        self.result.value
    }
}

pub fn self_pair_policy(kind: SimilarityKind) -> SelfPairPolicy {
    if kind.is_multiview() {
        SelfPairPolicy::Include
    } else {
        SelfPairPolicy::Exclude
    }
}

/// Accumulates `∂L/∂f` and `∂L/∂g` from a gradient on a similarity matrix.
pub fn backprop_similarity(
    grad: &SimilarityGrad,
    awes: ArrayView2<'_, f64>,
    agwes: Option<ArrayView2<'_, f64>>,
    grad_awes: &mut Array2<f64>,
    grad_agwes: Option<&mut Array2<f64>>,
) -> Result<(), LossError> {
    if grad.grad.iter().all(|&g| g == 0.0) {
        return Ok(());
    }
    match grad.kind {
        SimilarityKind::Single => {
            let (du, dv) = cosine_backward(awes, awes, grad.grad.view())?;
            *grad_awes += &du;
            *grad_awes += &dv;
        }
        SimilarityKind::ProxyPn | SimilarityKind::ProxyAnchor => {
            let g = agwes.ok_or(LossError::MissingAgwes)?;
            let gg = grad_agwes.ok_or(LossError::MissingAgwes)?;
            if grad.kind == SimilarityKind::ProxyPn {
                let (df, dg) = cosine_backward(awes, g, grad.grad.view())?;
                *grad_awes += &df;
                *gg += &dg;
            } else {
                let (dg, df) = cosine_backward(g, awes, grad.grad.view())?;
                *grad_awes += &df;
                *gg += &dg;
            }
        }
    }
    Ok(())
}

/// Pushes both similarity gradients of `result` back to the embeddings.
pub fn chain_to_embeddings(
    result: LossResult,
    awes: ArrayView2<'_, f64>,
    agwes: Option<ArrayView2<'_, f64>>,
) -> Result<LossEvaluation, LossError> {
    let mut grad_awes = Array2::zeros(awes.raw_dim());
    let mut grad_agwes = agwes.map(|g| Array2::zeros(g.raw_dim()));
    for sg in [&result.grad_s_p, &result.grad_s_n] {
        backprop_similarity(sg, awes, agwes, &mut grad_awes, grad_agwes.as_mut())?;
    }
    Ok(LossEvaluation {
        result,
        grad_awes,
        grad_agwes,
    })
}

fn apply(
    kind: FunctionKind,
    s: ArrayView2<'_, f64>,
    sets: &[Vec<usize>],
    polarity: Polarity,
    scale: f64,
    lambda: f64,
) -> Result<TermOutput, LossError> {
    match kind {
        FunctionKind::Msp => msp_term(s, sets, polarity, scale, lambda),
        FunctionKind::Else => else_term(s, sets, polarity, scale, lambda),
        FunctionKind::Lse => lse_term(s, sets, polarity, scale),
        FunctionKind::NegMean => neg_mean_term(s, sets, polarity, scale),
    }
}

/// Loss evaluator for one [`LossSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpwLoss {
    spec: LossSpec,
}

/// Validates `spec` and returns its evaluator.
pub fn assemble_gpw(spec: LossSpec) -> Result<GpwLoss, LossError> {
    spec.validate()?;
    Ok(GpwLoss { spec })
}

impl GpwLoss {
    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    /// Evaluates the loss on prebuilt similarity matrices.
    pub fn evaluate_similarities(
        &self,
        s_p: &SimilarityMatrix,
        s_n: &SimilarityMatrix,
        classes: &[usize],
    ) -> Result<LossResult, LossError> {
        let n = classes.len();
        if s_p.len() != n || s_n.len() != n {
            return Err(LossError::LengthMismatch {
                expected: n,
                found: s_p.len().min(s_n.len()),
            });
        }
        let spec = &self.spec;
        let pos: IndexPartition = partition(classes, self_pair_policy(s_p.kind));
        let neg: IndexPartition = partition(classes, self_pair_policy(s_n.kind));
        let p = apply(
            spec.fp,
            s_p.entries.view(),
            &pos.positives,
            Polarity::Positive,
            spec.alpha,
            spec.lambda,
        )?;
        let q = apply(
            spec.fn_,
            s_n.entries.view(),
            &neg.negatives,
            Polarity::Negative,
            spec.beta,
            spec.lambda,
        )?;
        Ok(LossResult {
            value: p.value + q.value,
            grad_s_p: SimilarityGrad {
                kind: s_p.kind,
                grad: p.grad,
            },
            grad_s_n: SimilarityGrad {
                kind: s_n.kind,
                grad: q.grad,
            },
        })
    }

    pub fn evaluate(
        &self,
        awes: ArrayView2<'_, f64>,
        agwes: Option<ArrayView2<'_, f64>>,
        classes: &[usize],
    ) -> Result<LossEvaluation, LossError> {
        if awes.nrows() != classes.len() {
            return Err(LossError::LengthMismatch {
                expected: classes.len(),
                found: awes.nrows(),
            });
        }
        let s_p = build_similarity(awes, agwes, self.spec.sp_kind)?;
        let s_n = if self.spec.sn_kind == self.spec.sp_kind {
            s_p.clone()
        } else {
            build_similarity(awes, agwes, self.spec.sn_kind)?
        };
        let result = self.evaluate_similarities(&s_p, &s_n, classes)?;
        chain_to_embeddings(result, awes, agwes)
    }
}

/// The named asymmetric proxy loss: ELSE over proxy-as-anchor similarities
/// for positives, MSP over proxy-as-positive/negative similarities for
/// negatives.
pub fn asymmetric_proxy_loss(
    awes: ArrayView2<'_, f64>,
    agwes: ArrayView2<'_, f64>,
    classes: &[usize],
    alpha: f64,
    beta: f64,
    lambda: f64,
) -> Result<LossEvaluation, LossError> {
    let spec = LossSpec::asymmetric_proxy().with_scales(alpha, beta, lambda);
    assemble_gpw(spec)?.evaluate(awes, Some(agwes), classes)
}
