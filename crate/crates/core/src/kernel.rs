//! Covariance of an infinitely wide ReLU graph convolutional network.
//!
//! The construction follows the two-layer forward pass
//! `Z = Â · relu(Â X W¹) · W²`:
//!
//! 1. propagate features, `X̂ = Â X`;
//! 2. initial covariance `Θ⁰ = σ_b² + δ_W · K(X̂, X̂)` (first weight layer);
//! 3. the ReLU closed form (order-1 arc-cosine kernel), scaled by `δ_W` for
//!    the second weight layer;
//! 4. (big / deep only) the adjacency sandwich `Â K Âᵀ`.
//!
//! `δ_W` enters exactly once per weight layer. The sandwich itself is
//! deterministic and adds no variance factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::base_kernels::{gram, BaseKernelSpec};
use crate::error::{Error, Result};
use crate::graph::{propagate, sandwich, NormalizedAdjacency};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::par;

/// Which network the kernel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Two weight layers, no propagation after the activation.
    Small,
    /// Two weight layers with propagation after the activation.
    Big,
    /// `L` weight layers, each hidden layer followed by propagation.
    /// `Deep(2)` coincides with `Big`.
    Deep(u32),
}

impl Variant {
    pub fn weight_layers(&self) -> u32 {
        match *self {
            Variant::Small | Variant::Big => 2,
            Variant::Deep(l) => l,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Variant::Deep(0) => Err(Error::Config(
                "deep variant needs at least one weight layer".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Variant::Small),
            "big" => Ok(Variant::Big),
            other => other
                .strip_prefix("deep")
                .map(|l| l.trim_start_matches([':', '=']))
                .and_then(|l| l.parse().ok())
                .map(Variant::Deep)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown variant {other:?}; expected small, big or deep:L"
                    ))
                }),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Small => f.write_str("small"),
            Variant::Big => f.write_str("big"),
            Variant::Deep(l) => write!(f, "deep:{l}"),
        }
    }
}

fn default_sigma_tau_sq() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub variant: Variant,
    /// Per-layer weight variance times fan-in.
    pub delta_w: f64,
    pub base: BaseKernelSpec,
    /// Bias variance σ_b². Zero for the plain GCN.
    #[serde(default)]
    pub bias_variance: f64,
    /// Use `δ_W/π` in the ReLU layer instead of the exact `δ_W/(2π)`.
    ///
    /// For a single layer this is the same as doubling `δ_W`, but the factor
    /// does not carry through deeper stacks linearly, so it has to be set
    /// consistently for every layer.
    #[serde(default)]
    pub paper_scaling: bool,
    /// Observation noise variance for the regression.
    #[serde(default = "default_sigma_tau_sq")]
    pub sigma_tau_sq: f64,
    /// Starting diagonal jitter. `None` picks `1e-8 · mean(diag Γ_DD)`.
    #[serde(default)]
    pub jitter: Option<f64>,
}

impl KernelConfig {
    pub fn new(variant: Variant, delta_w: f64, base: BaseKernelSpec) -> Self {
        Self {
            variant,
            delta_w,
            base,
            bias_variance: 0.0,
            paper_scaling: false,
            sigma_tau_sq: default_sigma_tau_sq(),
            jitter: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        self.base.validate()?;
        if !(self.delta_w > 0.0 && self.delta_w.is_finite()) {
            return Err(Error::Config(format!(
                "delta_w must be positive, got {}",
                self.delta_w
            )));
        }
        if !(self.bias_variance >= 0.0 && self.bias_variance.is_finite()) {
            return Err(Error::Config(format!(
                "bias_variance must be >= 0, got {}",
                self.bias_variance
            )));
        }
        if !(self.sigma_tau_sq >= 0.0 && self.sigma_tau_sq.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_tau_sq must be >= 0, got {}",
                self.sigma_tau_sq
            )));
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::Config(format!("jitter must be >= 0, got {j}")));
            }
        }
        Ok(())
    }

    fn relu_coefficient(&self) -> f64 {
        if self.paper_scaling {
            self.delta_w / PI
        } else {
            self.delta_w / (2.0 * PI)
        }
    }
}

/// `Θ⁰ = σ_b² + δ_W · K(ÂX, ÂX)`.
pub fn initial_kernel(
    cfg: &KernelConfig,
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<KernelMatrix> {
    cfg.validate()?;
    let x_hat = propagate(a_hat, x)?;
    let g = gram(&cfg.base, &x_hat)?;
    let (bias, dw) = (cfg.bias_variance, cfg.delta_w);
    let n = g.n();
    let data = g.into_vec().into_iter().map(|v| bias + dw * v).collect();
    Ok(KernelMatrix::from_raw(n, data))
}

fn checked_diagonal(theta: &KernelMatrix) -> Result<Vec<f64>> {
    let diag = theta.diagonal();
    match diag.iter().position(|&v| v < 0.0) {
        Some(node) => Err(Error::NegativeDiagonal {
            node,
            value: diag[node],
        }),
        None => Ok(diag),
    }
}

#[inline]
fn angle(theta_mn: f64, var_m: f64, var_n: f64, diagonal: bool) -> f64 {
    if var_m == 0.0 || var_n == 0.0 {
        PI / 2.0
    } else if diagonal {
        0.0
    } else {
        // √(v·v) is exact, so identical rows give a ratio of exactly 1
        (theta_mn / (var_m * var_n).sqrt()).clamp(-1.0, 1.0).acos()
    }
}

/// Angles `α_mn = arccos(Θ_mn / √(Θ_mm Θ_nn))`; `π/2` where a variance is zero.
pub fn angle_matrix(theta: &KernelMatrix) -> Result<KernelMatrix> {
    let var = checked_diagonal(theta)?;
    let n = theta.n();
    let data = par::symmetric_fill(n, |m, tail| {
        for (offset, out) in tail.iter_mut().enumerate() {
            let k = m + offset;
            *out = angle(theta.get(m, k), var[m], var[k], offset == 0);
        }
    });
    Ok(KernelMatrix::from_raw(n, data))
}

/// Covariance after a ReLU followed by a dense weight layer:
/// `σ_b² + c·δ_W·√(Θ_mm Θ_nn)·(sin α + (π − α) cos α)` with `c = 1/(2π)`
/// (or `1/π` under `paper_scaling`).
pub fn relu_layer(cfg: &KernelConfig, theta: &KernelMatrix) -> Result<KernelMatrix> {
    let var = checked_diagonal(theta)?;
    let coef = cfg.relu_coefficient();
    let bias = cfg.bias_variance;
    let n = theta.n();
    let data = par::symmetric_fill(n, |m, tail| {
        for (offset, out) in tail.iter_mut().enumerate() {
            let k = m + offset;
            let scale = (var[m] * var[k]).sqrt();
            *out = if scale == 0.0 {
                bias
            } else {
                let a = angle(theta.get(m, k), var[m], var[k], offset == 0);
                bias + coef * scale * (a.sin() + (PI - a) * a.cos())
            };
        }
    });
    Ok(KernelMatrix::from_raw(n, data))
}

/// Full kernel for the configured variant.
pub fn build_kernel(
    cfg: &KernelConfig,
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<KernelMatrix> {
    let theta0 = initial_kernel(cfg, a_hat, x)?;
    match cfg.variant {
        Variant::Small => relu_layer(cfg, &theta0),
        Variant::Big => sandwich(a_hat, &relu_layer(cfg, &theta0)?),
        Variant::Deep(layers) => {
            let mut gamma = theta0;
            for _ in 1..layers {
                gamma = sandwich(a_hat, &relu_layer(cfg, &gamma)?)?;
            }
            Ok(gamma)
        }
    }
}
