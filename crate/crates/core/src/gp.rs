//! Exact GP regression on a fixed node set and argmax labelling.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::KernelMatrix;

/// Jitter is multiplied by ten this many times before giving up.
pub const JITTER_ESCALATIONS: usize = 4;

/// Train/validation/test partition plus known labels.
///
/// Labels for test nodes may be missing (pure prediction runs); every train
/// node must be labelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
    #[serde(default)]
    pub labels: BTreeMap<usize, usize>,
    pub n_classes: usize,
}

impl LabeledSplit {
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::Config("n_classes must be positive".into()));
        }
        if self.train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &id in self.train.iter().chain(&self.val).chain(&self.test) {
            if id >= n_nodes {
                return Err(Error::Config(format!(
                    "split node {id} is outside 0..{n_nodes}"
                )));
            }
            if !seen.insert(id) {
                return Err(Error::Config(format!(
                    "node {id} appears more than once in the split"
                )));
            }
        }
        for (&id, &class) in &self.labels {
            if class >= self.n_classes {
                return Err(Error::Config(format!(
                    "node {id} has class {class} but n_classes is {}",
                    self.n_classes
                )));
            }
        }
        if let Some(&id) = self.train.iter().find(|id| !self.labels.contains_key(id)) {
            return Err(Error::MissingLabel(id));
        }
        Ok(())
    }

    pub fn has_all_labels(&self, ids: &[usize]) -> bool {
        ids.iter().all(|id| self.labels.contains_key(id))
    }
}

/// One-hot targets, `|ids| x C`.
pub fn encode_labels(split: &LabeledSplit, ids: &[usize]) -> Result<DMatrix<f64>> {
    let mut y = DMatrix::zeros(ids.len(), split.n_classes);
    for (row, &id) in ids.iter().enumerate() {
        let class = *split.labels.get(&id).ok_or(Error::MissingLabel(id))?;
        if class >= split.n_classes {
            return Err(Error::Config(format!(
                "node {id} has out-of-range class {class}"
            )));
        }
        y[(row, class)] = 1.0;
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct GpPosterior {
    /// Posterior mean, one row per entry of `unlabeled_ids`.
    pub mean: DMatrix<f64>,
    /// Posterior covariance over `unlabeled_ids`, when requested.
    pub predictive_cov: Option<DMatrix<f64>>,
    pub unlabeled_ids: Vec<usize>,
    /// Diagonal jitter that made the factorization succeed.
    pub jitter: f64,
}

/// Factorized training system `(Γ_DD + (σ_τ² + jitter) I)` and the weights
/// `α = (Γ_DD + ...)⁻¹ Y_D`.
#[derive(Debug, Clone)]
pub struct GpFit {
    observed: Vec<usize>,
    chol: Cholesky<f64, Dyn>,
    alpha: DMatrix<f64>,
    jitter: f64,
}

fn submatrix(gamma: &KernelMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| gamma.get(rows[i], cols[j]))
}

fn check_ids(gamma: &KernelMatrix, ids: &[usize], what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &id in ids {
        if id >= gamma.n() {
            return Err(Error::shape(
                "posterior",
                format!("{what} ids < {}", gamma.n()),
                id,
            ));
        }
        if !seen.insert(id) {
            return Err(Error::Config(format!("{what} node {id} listed twice")));
        }
    }
    Ok(())
}

impl GpFit {
    /// Factorizes the observed block, escalating jitter tenfold on failure.
    /// `jitter = None` starts from `1e-8 · trace(Γ_DD) / D`.
    pub fn new(
        gamma: &KernelMatrix,
        observed: &[usize],
        y_d: &DMatrix<f64>,
        sigma_tau_sq: f64,
        jitter: Option<f64>,
    ) -> Result<Self> {
        check_ids(gamma, observed, "observed")?;
        if y_d.nrows() != observed.len() {
            return Err(Error::shape(
                "posterior",
                format!("{} target rows", observed.len()),
                y_d.nrows(),
            ));
        }
        if sigma_tau_sq.is_nan() || sigma_tau_sq < 0.0 {
            return Err(Error::Config(format!(
                "sigma_tau_sq must be >= 0, got {sigma_tau_sq}"
            )));
        }
        let k_dd = submatrix(gamma, observed, observed);
        let d = observed.len().max(1) as f64;
        let relative = 1e-8 * k_dd.trace() / d;
        let fallback = if relative > 0.0 && relative.is_finite() {
            relative
        } else {
            1e-8
        };
        let mut jitter = jitter.unwrap_or(fallback);

        for attempt in 0..=JITTER_ESCALATIONS {
            let mut system = k_dd.clone();
            for i in 0..observed.len() {
                system[(i, i)] += sigma_tau_sq + jitter;
            }
            if let Some(chol) = Cholesky::new(system) {
                let alpha = chol.solve(y_d);
                if alpha.iter().all(|v| v.is_finite()) {
                    return Ok(Self {
                        observed: observed.to_vec(),
                        chol,
                        alpha,
                        jitter,
                    });
                }
            }
            if attempt < JITTER_ESCALATIONS {
                log::debug!("Cholesky failed with jitter {jitter:e}; escalating");
                jitter = if jitter == 0.0 {
                    fallback
                } else {
                    jitter * 10.0
                };
            }
        }
        Err(Error::Factorization { jitter })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    /// Posterior at arbitrary `queries` (which may include observed nodes).
    pub fn predict(
        &self,
        gamma: &KernelMatrix,
        queries: &[usize],
        want_cov: bool,
    ) -> Result<GpPosterior> {
        check_ids(gamma, queries, "query")?;
        let k_qd = submatrix(gamma, queries, &self.observed);
        let mean = &k_qd * &self.alpha;
        let predictive_cov = want_cov.then(|| {
            let mut v = k_qd.transpose();
            // only the lower triangle of the dirty factor is read
            self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
            let reduction = v.tr_mul(&v);
            submatrix(gamma, queries, queries) - reduction
        });
        Ok(GpPosterior {
            mean,
            predictive_cov,
            unlabeled_ids: queries.to_vec(),
            jitter: self.jitter,
        })
    }
}

/// Posterior over every node not in `observed`, in ascending node order.
pub fn posterior(
    gamma: &KernelMatrix,
    observed: &[usize],
    y_d: &DMatrix<f64>,
    sigma_tau_sq: f64,
    jitter: Option<f64>,
    want_cov: bool,
) -> Result<GpPosterior> {
    let fit = GpFit::new(gamma, observed, y_d, sigma_tau_sq, jitter)?;
    let observed: BTreeSet<usize> = observed.iter().copied().collect();
    let unlabeled: Vec<usize> = (0..gamma.n()).filter(|i| !observed.contains(i)).collect();
    fit.predict(gamma, &unlabeled, want_cov)
}

/// Row-wise argmax of the posterior mean; ties go to the lower class.
pub fn classify(post: &GpPosterior) -> BTreeMap<usize, usize> {
    post.unlabeled_ids
        .iter()
        .enumerate()
        .map(|(row, &id)| (id, argmax(post.mean.row(row).iter().copied())))
        .collect()
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
