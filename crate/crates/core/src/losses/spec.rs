use super::LossError;
use crate::math::SimilarityKind;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Function applied to one side (positives or negatives) of every anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    /// Mean-softplus: self-hardness weighting.
    Msp,
    /// Extended log-sum-exp: relative-hardness weighting.
    Else,
    /// Margin-free log-sum-exp.
    Lse,
    /// Scaled mean similarity, linear in `S`.
    NegMean,
}

impl FunctionKind {
    pub fn label(self) -> &'static str {
        match self {
            FunctionKind::Msp => "MSP",
            FunctionKind::Else => "ELSE",
            FunctionKind::Lse => "LSE",
            FunctionKind::NegMean => "NEG-MEAN",
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_BETA: f64 = 50.0;
pub const DEFAULT_LAMBDA: f64 = 0.5;

pub(crate) fn default_alpha_value() -> f64 {
    DEFAULT_ALPHA
}
pub(crate) fn default_beta_value() -> f64 {
    DEFAULT_BETA
}
pub(crate) fn default_lambda_value() -> f64 {
    DEFAULT_LAMBDA
}

/// One cell of the loss grid: the anchor-positive function and similarity
/// kind, the anchor-negative function and similarity kind, and the scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub fp: FunctionKind,
    #[serde(rename = "fn")]
    pub fn_: FunctionKind,
    pub sp_kind: SimilarityKind,
    pub sn_kind: SimilarityKind,
    #[serde(default = "default_alpha_value")]
    pub alpha: f64,
    #[serde(default = "default_beta_value")]
    pub beta: f64,
    #[serde(default = "default_lambda_value")]
    pub lambda: f64,
}

impl LossSpec {
    pub fn new(
        fp: FunctionKind,
        fn_: FunctionKind,
        sp_kind: SimilarityKind,
        sn_kind: SimilarityKind,
    ) -> Self {
        Self {
            fp,
            fn_,
            sp_kind,
            sn_kind,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn with_scales(mut self, alpha: f64, beta: f64, lambda: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self.lambda = lambda;
        self
    }

    pub fn proxy_bd(kind: SimilarityKind) -> Self {
        Self::new(FunctionKind::Msp, FunctionKind::Msp, kind, kind)
    }

    pub fn proxy_ms(kind: SimilarityKind) -> Self {
        Self::new(FunctionKind::Else, FunctionKind::Else, kind, kind)
    }

    pub fn proxy_nca(kind: SimilarityKind) -> Self {
        Self::new(FunctionKind::NegMean, FunctionKind::Lse, kind, kind)
    }

    pub fn asymmetric_proxy() -> Self {
        Self::new(
            FunctionKind::Else,
            FunctionKind::Msp,
            SimilarityKind::ProxyAnchor,
            SimilarityKind::ProxyPn,
        )
    }

    pub fn validate(&self) -> Result<(), LossError> {
        for scale in [self.alpha, self.beta] {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(LossError::InvalidScale(scale));
            }
        }
        if !self.lambda.is_finite() {
            return Err(LossError::InvalidSpec("lambda must be finite".into()));
        }
        Ok(())
    }

    pub fn uses_text(&self) -> bool {
        self.sp_kind.is_multiview() || self.sn_kind.is_multiview()
    }

    pub fn from_toml(text: &str) -> Result<Self, LossError> {
        let spec: Self = toml::from_str(text).map_err(|e| LossError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("loss spec serializes")
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.fp, self.fn_, self.sp_kind, self.sn_kind
        )
    }
}

/// The eight asymmetric cells obtained by crossing `(F_P, F_N)` in
/// `{(MSP, ELSE), (ELSE, MSP)}` with every `(S^P, S^N)` kind pair.
pub fn asymmetric_grid_cells() -> Vec<LossSpec> {
    use FunctionKind::{Else, Msp};
    use SimilarityKind::{ProxyAnchor as A, ProxyPn as Pn};
    let mut out = Vec::new();
    for (fp, fn_) in [(Msp, Else), (Else, Msp)] {
        for (sp, sn) in [(Pn, Pn), (A, A), (Pn, A), (A, Pn)] {
            out.push(LossSpec::new(fp, fn_, sp, sn));
        }
    }
    out
}
