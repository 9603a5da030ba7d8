use super::baselines::{
    contrastive, mv_triplet, sample_anchor_negatives, sample_triplets, triplet, DEFAULT_MARGIN,
};
use super::gpw::{assemble_gpw, chain_to_embeddings, LossEvaluation};
use super::spec::{FunctionKind, LossSpec};
use super::LossError;
use crate::math::SimilarityKind;
use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

/// A trainable objective: either a cell of the proxy-based grid or one of the
/// pair/triplet baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Objective {
    Gpw {
        fp: FunctionKind,
        #[serde(rename = "fn")]
        fn_: FunctionKind,
        sp_kind: SimilarityKind,
        sn_kind: SimilarityKind,
        #[serde(default = "super::spec::default_alpha_value")]
        alpha: f64,
        #[serde(default = "super::spec::default_beta_value")]
        beta: f64,
        #[serde(default = "super::spec::default_lambda_value")]
        lambda: f64,
    },
    Contrastive {
        #[serde(default = "default_margin")]
        margin: f64,
    },
    Triplet {
        #[serde(default = "default_margin")]
        margin: f64,
    },
    MvTriplet {
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

impl From<LossSpec> for Objective {
    fn from(s: LossSpec) -> Self {
        Objective::Gpw {
            fp: s.fp,
            fn_: s.fn_,
            sp_kind: s.sp_kind,
            sn_kind: s.sn_kind,
            alpha: s.alpha,
            beta: s.beta,
            lambda: s.lambda,
        }
    }
}

impl Objective {
    pub fn loss_spec(&self) -> Option<LossSpec> {
        match *self {
            Objective::Gpw {
                fp,
                fn_,
                sp_kind,
                sn_kind,
                alpha,
                beta,
                lambda,
            } => Some(LossSpec {
                fp,
                fn_,
                sp_kind,
                sn_kind,
                alpha,
                beta,
                lambda,
            }),
            _ => None,
        }
    }

    /// Whether the objective involves the text view at all.
    pub fn uses_text(&self) -> bool {
        match self {
            Objective::Gpw { .. } => self.loss_spec().is_some_and(|s| s.uses_text()),
            Objective::MvTriplet { .. } => true,
            Objective::Contrastive { .. } | Objective::Triplet { .. } => false,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        match self {
            Objective::Gpw { .. } => self.loss_spec().expect("gpw").validate(),
            Objective::Contrastive { margin }
            | Objective::Triplet { margin }
            | Objective::MvTriplet { margin } => {
                if (0.0..=2.0).contains(margin) {
                    Ok(())
                } else {
                    Err(LossError::InvalidMargin(*margin))
                }
            }
        }
    }

    /// Evaluates the objective and its embedding gradients. `rng` drives
    /// triplet sampling only; proxy-based objectives never touch it.
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        awes: ArrayView2<'_, f64>,
        agwes: Option<ArrayView2<'_, f64>>,
        classes: &[usize],
        rng: &mut R,
    ) -> Result<LossEvaluation, LossError> {
        if awes.nrows() != classes.len() {
            return Err(LossError::LengthMismatch {
                expected: classes.len(),
                found: awes.nrows(),
            });
        }
        match *self {
            Objective::Gpw { .. } => {
                assemble_gpw(self.loss_spec().expect("gpw"))?.evaluate(awes, agwes, classes)
            }
            Objective::Contrastive { margin } => {
                chain_to_embeddings(contrastive(awes, classes, margin)?, awes, agwes)
            }
            Objective::Triplet { margin } => {
                let t = sample_triplets(classes, rng);
                chain_to_embeddings(triplet(awes, &t, margin)?, awes, agwes)
            }
            Objective::MvTriplet { margin } => {
                let g = agwes.ok_or(LossError::MissingAgwes)?;
                let pairs = sample_anchor_negatives(classes, rng);
                chain_to_embeddings(mv_triplet(awes, g, &pairs, margin)?, awes, agwes)
            }
        }
    }
}

/// The named methods compared in the results tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dtw,
    Contrastive,
    Triplet,
    MvTriplet,
    ProxyNcaPn,
    ProxyNcaA,
    ProxyBdPn,
    ProxyBdA,
    ProxyMsPn,
    ProxyMsA,
    AsymmetricProxy,
}

impl Method {
    pub const TABLE1: [Method; 11] = [
        Method::Dtw,
        Method::Contrastive,
        Method::Triplet,
        Method::MvTriplet,
        Method::ProxyNcaPn,
        Method::ProxyNcaA,
        Method::ProxyBdPn,
        Method::ProxyBdA,
        Method::ProxyMsPn,
        Method::ProxyMsA,
        Method::AsymmetricProxy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dtw => "DTW",
            Method::Contrastive => "Contrastive",
            Method::Triplet => "Triplet",
            Method::MvTriplet => "MV Triplet",
            Method::ProxyNcaPn | Method::ProxyNcaA => "Proxy-NCA",
            Method::ProxyBdPn | Method::ProxyBdA => "Proxy-BD",
            Method::ProxyMsPn | Method::ProxyMsA => "Proxy-MS",
            Method::AsymmetricProxy => "Asymmetric-Proxy",
        }
    }

    /// The trainable objective, `None` for the training-free DTW baseline.
    pub fn objective(self) -> Option<Objective> {
        use SimilarityKind::{ProxyAnchor as A, ProxyPn as Pn};
        let margin = DEFAULT_MARGIN;
        Some(match self {
            Method::Dtw => return None,
            Method::Contrastive => Objective::Contrastive { margin },
            Method::Triplet => Objective::Triplet { margin },
            Method::MvTriplet => Objective::MvTriplet { margin },
            Method::ProxyNcaPn => LossSpec::proxy_nca(Pn).into(),
            Method::ProxyNcaA => LossSpec::proxy_nca(A).into(),
            Method::ProxyBdPn => LossSpec::proxy_bd(Pn).into(),
            Method::ProxyBdA => LossSpec::proxy_bd(A).into(),
            Method::ProxyMsPn => LossSpec::proxy_ms(Pn).into(),
            Method::ProxyMsA => LossSpec::proxy_ms(A).into(),
            Method::AsymmetricProxy => LossSpec::asymmetric_proxy().into(),
        })
    }
}
