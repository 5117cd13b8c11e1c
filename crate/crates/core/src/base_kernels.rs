//! Initial kernels evaluated on (propagated) node features.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::par;

fn default_degree() -> f64 {
    1.0
}

/// Pairwise base kernel and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKernelSpec {
    /// `exp(-‖x - y‖² / 2ℓ²)`
    #[serde(rename = "se")]
    SquaredExponential { length_scale: f64 },
    /// `xᵀy`
    InnerProduct,
    /// `1 - arccos(cos(x, y)) / π`
    Arccosine,
    /// `(cos(x, y) + b)^a`
    Polynomial {
        bias: f64,
        #[serde(default = "default_degree")]
        degree: f64,
    },
}

impl BaseKernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::SquaredExponential { length_scale }
                if !(length_scale > 0.0 && length_scale.is_finite()) =>
            {
                Err(Error::Config(format!(
                    "length_scale must be positive, got {length_scale}"
                )))
            }
            Self::Polynomial { bias, degree } => {
                if !(bias >= 0.0 && bias.is_finite()) {
                    Err(Error::Config(format!(
                        "polynomial bias must be >= 0, got {bias}"
                    )))
                } else if !(degree > 0.0 && degree.is_finite()) {
                    Err(Error::Config(format!(
                        "polynomial degree must be > 0, got {degree}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SquaredExponential { .. } => "se",
            Self::InnerProduct => "inner_product",
            Self::Arccosine => "arccosine",
            Self::Polynomial { .. } => "polynomial",
        }
    }

    fn needs_norms(&self) -> bool {
        matches!(self, Self::Arccosine | Self::Polynomial { .. })
    }
}

impl fmt::Display for BaseKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::SquaredExponential { length_scale } => write!(f, "se(l={length_scale})"),
            Self::InnerProduct => f.write_str("inner_product"),
            Self::Arccosine => f.write_str("arccosine"),
            Self::Polynomial { bias, degree } => write!(f, "polynomial(b={bias}, a={degree})"),
        }
    }
}

/// Parses `arccosine`, `inner_product` (or `ip`), `se:<ℓ>`,
/// `polynomial:<b>[:<a>]`, or the JSON object form.
impl std::str::FromStr for BaseKernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s)
                .map_err(|e| Error::Config(format!("bad base kernel JSON: {e}")));
        }
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let nums: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let nums =
            nums.map_err(|_| Error::Config(format!("bad base kernel parameters in {s:?}")))?;
        let spec = match (kind.as_str(), nums.as_slice()) {
            ("arccosine" | "ac", []) => Self::Arccosine,
            ("inner_product" | "ip", []) => Self::InnerProduct,
            ("se" | "squared_exponential", [l]) => Self::SquaredExponential { length_scale: *l },
            ("polynomial" | "pl", [b]) => Self::Polynomial { bias: *b, degree: 1.0 },
            ("polynomial" | "pl", [b, a]) => Self::Polynomial { bias: *b, degree: *a },
            _ => {
                return Err(Error::Config(format!(
                    "unknown base kernel {s:?}; expected arccosine, inner_product, se:<l> or polynomial:<b>[:<a>]"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unclamped cosine similarity given precomputed norms.
#[inline]
pub fn cos_similarity(a: &[f64], b: &[f64], norm_a: f64, norm_b: f64) -> f64 {
    dot(a, b) / (norm_a * norm_b)
}

/// Gram matrix of `spec` over the rows of `x`.
pub fn gram(spec: &BaseKernelSpec, x: &FeatureMatrix) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::shape("gram", "at least one row", 0));
    }
    let norms: Vec<f64> = (0..n).map(|i| dot(x.row(i), x.row(i)).sqrt()).collect();
    if spec.needs_norms() {
        if let Some(node) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroNorm {
                kernel: spec.name(),
                node,
            });
        }
    }

    let spec = *spec;
    let data = par::symmetric_fill(n, |m, tail| {
        let xm = x.row(m);
        for (offset, out) in tail.iter_mut().enumerate() {
            let k = m + offset;
            let xn = x.row(k);
            // a row is exactly parallel to itself; the computed ratio can miss 1 by an ulp
            let cos = || {
                if offset == 0 {
                    1.0
                } else {
                    cos_similarity(xm, xn, norms[m], norms[k]).clamp(-1.0, 1.0)
                }
            };
            *out = match spec {
                BaseKernelSpec::SquaredExponential { length_scale } => {
                    let d2: f64 = xm.iter().zip(xn).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2 / (2.0 * length_scale * length_scale)).exp()
                }
                BaseKernelSpec::InnerProduct => dot(xm, xn),
                BaseKernelSpec::Arccosine => 1.0 - cos().acos() / PI,
                BaseKernelSpec::Polynomial { bias, degree } => (cos() + bias).powf(degree),
            };
        }
    });

    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "base kernel gram",
            row: pos / n,
            col: pos % n,
        });
    }
    Ok(KernelMatrix::from_raw(n, data))
}
