//! Finite-width Monte-Carlo check of the analytic kernel.
//!
//! Each draw samples an untrained ReLU GCN with `width` hidden units and
//! records its single output unit on every node. The uncentered second moment
//! of those outputs should approach [`build_kernel`] with the inner-product
//! base kernel.
//!
//! Weight scales: the first layer reads raw (propagated) features and its
//! covariance is the unnormalized inner product `δ_W · X̂ X̂ᵀ`, so its weights
//! have variance `δ_W`. Layers that read `width` hidden units use `δ_W / width`.
//!
//! Randomness: ChaCha8 seeded from `seed`, with the draw index selecting the
//! stream. Draws are therefore independent of scheduling and reproducible
//! across runs on the same build.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::base_kernels::BaseKernelSpec;
use crate::error::{Error, Result};
use crate::graph::{propagate, NormalizedAdjacency};
use crate::kernel::{build_kernel, KernelConfig, Variant};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::par;

fn default_base() -> BaseKernelSpec {
    BaseKernelSpec::InnerProduct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Hidden units per hidden layer.
    pub width: usize,
    /// Independent weight draws.
    pub samples: usize,
    pub seed: u64,
    pub variant: Variant,
    pub delta_w: f64,
    #[serde(default = "default_base")]
    pub base: BaseKernelSpec,
    /// Scaling used for the analytic side of the comparison.
    #[serde(default)]
    pub paper_scaling: bool,
}

impl McConfig {
    pub fn new(width: usize, samples: usize, seed: u64, variant: Variant, delta_w: f64) -> Self {
        Self {
            width,
            samples,
            seed,
            variant,
            delta_w,
            base: BaseKernelSpec::InnerProduct,
            paper_scaling: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.samples == 0 {
            return Err(Error::Config("width and samples must be at least 1".into()));
        }
        if !(self.delta_w > 0.0 && self.delta_w.is_finite()) {
            return Err(Error::Config(format!(
                "delta_w must be positive, got {}",
                self.delta_w
            )));
        }
        self.variant.validate()?;
        if self.base != BaseKernelSpec::InnerProduct {
            return Err(Error::UnsupportedBaseKernel(self.base.to_string()));
        }
        Ok(())
    }

    /// The analytic kernel configuration this sampler should reproduce.
    pub fn kernel_config(&self) -> KernelConfig {
        let mut cfg = KernelConfig::new(self.variant, self.delta_w, BaseKernelSpec::InnerProduct);
        cfg.paper_scaling = self.paper_scaling;
        cfg
    }
}

fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

#[inline]
fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

/// Sparse `Â v` for a single column.
fn propagate_vec(a_hat: &NormalizedAdjacency, v: &[f64]) -> Vec<f64> {
    (0..a_hat.n_nodes())
        .map(|i| {
            let (idx, w) = a_hat.row(i);
            idx.iter().zip(w).map(|(&k, &a)| a * v[k]).sum()
        })
        .collect()
}

/// Sparse `Â H` for an `n x width` row-major block.
fn propagate_block(a_hat: &NormalizedAdjacency, h: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    for i in 0..a_hat.n_nodes() {
        let (idx, w) = a_hat.row(i);
        let row = &mut out[i * width..(i + 1) * width];
        for (&k, &a) in idx.iter().zip(w) {
            for (o, &v) in row.iter_mut().zip(&h[k * width..(k + 1) * width]) {
                *o += a * v;
            }
        }
    }
    out
}

/// Output of one randomly initialized network on every node.
fn forward(
    mc: &McConfig,
    a_hat: &NormalizedAdjacency,
    x_hat: &FeatureMatrix,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = x_hat.rows();
    let d = x_hat.cols();
    let h = mc.width;
    let sd_in = mc.delta_w.sqrt();
    let sd_hidden = (mc.delta_w / h as f64).sqrt();

    match mc.variant {
        Variant::Small | Variant::Big => {
            // relu(X̂ W¹) W², one hidden unit at a time
            let mut out = vec![0.0; n];
            let mut column = vec![0.0; d];
            for _ in 0..h {
                column.iter_mut().for_each(|c| *c = normal(rng, sd_in));
                let w2 = normal(rng, sd_hidden);
                for (i, o) in out.iter_mut().enumerate() {
                    let pre: f64 = x_hat.row(i).iter().zip(&column).map(|(a, b)| a * b).sum();
                    *o += pre.max(0.0) * w2;
                }
            }
            if mc.variant == Variant::Big {
                out = propagate_vec(a_hat, &out);
            }
            out
        }
        Variant::Deep(layers) => {
            let first_width = if layers == 1 { 1 } else { h };
            // column-major draw of W¹ (d x first_width)
            let w1: Vec<f64> = (0..d * first_width).map(|_| normal(rng, sd_in)).collect();
            let mut z = vec![0.0; n * first_width];
            for i in 0..n {
                let xi = x_hat.row(i);
                for k in 0..first_width {
                    z[i * first_width + k] =
                        xi.iter().enumerate().map(|(j, v)| v * w1[k * d + j]).sum();
                }
            }
            let mut width = first_width;
            for layer in 2..=layers {
                let out_width = if layer == layers { 1 } else { h };
                let mut next = vec![0.0; n * out_width];
                for k in 0..out_width {
                    let w: Vec<f64> = (0..width).map(|_| normal(rng, sd_hidden)).collect();
                    for i in 0..n {
                        next[i * out_width + k] = z[i * width..(i + 1) * width]
                            .iter()
                            .zip(&w)
                            .map(|(v, wk)| v.max(0.0) * wk)
                            .sum();
                    }
                }
                z = propagate_block(a_hat, &next, out_width);
                width = out_width;
            }
            z
        }
    }
}

/// One `N`-vector of network outputs per draw, in draw order.
pub fn sample_gcn_outputs(
    mc: &McConfig,
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<Vec<Vec<f64>>> {
    mc.validate()?;
    let x_hat = propagate(a_hat, x)?;
    Ok(par::map_indices(mc.samples, |s| {
        let mut rng = draw_rng(mc.seed, s);
        forward(mc, a_hat, &x_hat, &mut rng)
    }))
}

/// Uncentered second moment `(1/S) Σ_s z_s z_sᵀ` (the prior mean is zero).
pub fn empirical_covariance(samples: &[Vec<f64>]) -> Result<KernelMatrix> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let n = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::shape(
            "empirical_covariance",
            format!("{n}-vectors"),
            bad.len(),
        ));
    }
    let s = samples.len() as f64;
    let data = par::symmetric_fill(n, |m, tail| {
        for z in samples {
            let zm = z[m];
            for (out, &zn) in tail.iter_mut().zip(&z[m..]) {
                *out += zm * zn;
            }
        }
        tail.iter_mut().for_each(|v| *v /= s);
    });
    Ok(KernelMatrix::from_raw(n, data))
}

/// `‖analytic − empirical‖_F / ‖analytic‖_F`, or `‖empirical‖_F` when the
/// analytic kernel is identically zero.
pub fn kernel_discrepancy(analytic: &KernelMatrix, empirical: &KernelMatrix) -> Result<f64> {
    if analytic.n() != empirical.n() {
        return Err(Error::shape(
            "kernel_discrepancy",
            analytic.n(),
            empirical.n(),
        ));
    }
    let diff: f64 = analytic
        .as_slice()
        .iter()
        .zip(empirical.as_slice())
        .map(|(a, e)| (a - e) * (a - e))
        .sum::<f64>()
        .sqrt();
    let norm = analytic.frobenius_norm();
    Ok(if norm == 0.0 { diff } else { diff / norm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub width: usize,
    pub samples: usize,
    pub discrepancy: f64,
    pub seconds: f64,
}

/// Runs the sampler at each width and compares against the analytic kernel.
pub fn validate_widths(
    mc: &McConfig,
    widths: &[usize],
    a_hat: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<Vec<McReport>> {
    mc.validate()?;
    let analytic = build_kernel(&mc.kernel_config(), a_hat, x)?;
    widths
        .iter()
        .map(|&width| {
            let start = Instant::now();
            let run = McConfig {
                width,
                ..mc.clone()
            };
            let samples = sample_gcn_outputs(&run, a_hat, x)?;
            let empirical = empirical_covariance(&samples)?;
            Ok(McReport {
                width,
                samples: mc.samples,
                discrepancy: kernel_discrepancy(&analytic, &empirical)?,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}
