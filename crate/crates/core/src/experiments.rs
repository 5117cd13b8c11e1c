//! Dataset assembly, kNN graphs, grid search, evaluation and the scaling
//! benchmark.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::base_kernels::BaseKernelSpec;
use crate::error::{Error, Result};
use crate::gp::{classify, encode_labels, GpFit, LabeledSplit};
use crate::graph::{normalize_adjacency, Graph, NormalizedAdjacency};
use crate::kernel::{build_kernel, KernelConfig, Variant};
use crate::matrix::{FeatureMatrix, KernelMatrix};
use crate::par;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub split: LabeledSplit,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: FeatureMatrix,
        split: LabeledSplit,
    ) -> Result<Self> {
        if graph.n_nodes() != features.rows() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} feature rows", graph.n_nodes()),
                features.rows(),
            ));
        }
        split.validate(graph.n_nodes())?;
        Ok(Self {
            name: name.into(),
            graph,
            features,
            split,
        })
    }
}

/// Undirected k-nearest-neighbour graph under Euclidean distance. Each node
/// links to its `k` closest other nodes (ties go to the lower index); the
/// union of those links is the edge set.
pub fn knn_graph(features: &FeatureMatrix, k: usize) -> Result<Graph> {
    let n = features.rows();
    if k == 0 || k >= n {
        return Err(Error::Config(format!(
            "k must be in 1..{n} for {n} nodes, got {k}"
        )));
    }
    let neighbours: Vec<Vec<usize>> = par::map_indices(n, |i| {
        let xi = features.row(i);
        let mut dist: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d2 = xi
                    .iter()
                    .zip(features.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, j)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
            dist.truncate(k);
        }
        dist.sort_unstable_by(order);
        dist.into_iter().map(|(_, j)| j).collect()
    });
    Graph::new(
        n,
        neighbours
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j))),
    )
}

fn default_delta_w_grid() -> Vec<f64> {
    (0..=8).map(|i| 0.005 * f64::from(1u32 << i)).collect()
}

fn default_base_grid() -> Vec<BaseKernelSpec> {
    vec![
        BaseKernelSpec::SquaredExponential { length_scale: 1.0 },
        BaseKernelSpec::InnerProduct,
        BaseKernelSpec::Arccosine,
        BaseKernelSpec::Polynomial {
            bias: 0.5,
            degree: 1.0,
        },
    ]
}

fn default_sigma_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0]
}

/// Hyperparameter grid. Points are visited base-major, then `δ_W`, then `σ_τ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default = "default_delta_w_grid")]
    pub delta_w: Vec<f64>,
    #[serde(default = "default_base_grid")]
    pub base_kernels: Vec<BaseKernelSpec>,
    #[serde(default = "default_sigma_grid")]
    pub sigma_tau_sq: Vec<f64>,
    pub variant: Variant,
}

impl GridSpec {
    pub fn default_for(variant: Variant) -> Self {
        Self {
            delta_w: default_delta_w_grid(),
            base_kernels: default_base_grid(),
            sigma_tau_sq: default_sigma_grid(),
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_w.is_empty() || self.base_kernels.is_empty() || self.sigma_tau_sq.is_empty() {
            return Err(Error::Config("grid lists must all be nonempty".into()));
        }
        Ok(())
    }

    /// Every grid configuration, in visiting order. `template` supplies the
    /// fields the grid does not vary.
    pub fn points(&self, template: &KernelConfig) -> Vec<KernelConfig> {
        let mut out = Vec::new();
        for base in &self.base_kernels {
            for &delta_w in &self.delta_w {
                for &sigma_tau_sq in &self.sigma_tau_sq {
                    out.push(KernelConfig {
                        variant: self.variant,
                        delta_w,
                        base: *base,
                        sigma_tau_sq,
                        ..template.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: KernelConfig,
    /// Validation accuracy, or −1 when the point failed.
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub best: KernelConfig,
    pub best_accuracy: f64,
    pub points: Vec<GridPoint>,
}

fn accuracy_on(
    fit: &GpFit,
    gamma: &KernelMatrix,
    split: &LabeledSplit,
    ids: &[usize],
) -> Result<f64> {
    let post = fit.predict(gamma, ids, false)?;
    let predicted = classify(&post);
    let correct = ids
        .iter()
        .filter(|id| split.labels.get(id) == Some(&predicted[id]))
        .count();
    Ok(correct as f64 / ids.len() as f64)
}

/// Kernels with `δ_W = 1`, shared across a sweep. With zero bias variance the
/// kernel is homogeneous in `δ_W` of degree L (one factor per weight layer),
/// so any other `δ_W` is a rescaling.
struct UnitKernels {
    a_hat: NormalizedAdjacency,
    cache: HashMap<String, std::result::Result<KernelMatrix, String>>,
}

impl UnitKernels {
    fn unit_key(cfg: &KernelConfig) -> Option<(KernelConfig, String)> {
        (cfg.bias_variance == 0.0).then(|| {
            let unit = KernelConfig {
                delta_w: 1.0,
                sigma_tau_sq: 0.0,
                jitter: None,
                ..cfg.clone()
            };
            let key = serde_json::to_string(&unit).expect("kernel config serializes");
            (unit, key)
        })
    }

    fn prepare(a_hat: NormalizedAdjacency, configs: &[KernelConfig], x: &FeatureMatrix) -> Self {
        let mut cache = HashMap::new();
        for cfg in configs {
            if let Some((unit, key)) = Self::unit_key(cfg) {
                cache
                    .entry(key)
                    .or_insert_with(|| build_kernel(&unit, &a_hat, x).map_err(|e| e.to_string()));
            }
        }
        Self { a_hat, cache }
    }

    fn kernel(&self, cfg: &KernelConfig, x: &FeatureMatrix) -> Result<KernelMatrix> {
        cfg.validate()?;
        let Some((unit, key)) = Self::unit_key(cfg) else {
            return build_kernel(cfg, &self.a_hat, x);
        };
        match self.cache.get(&key) {
            Some(Ok(k)) => Ok(k.scaled(cfg.delta_w.powi(cfg.variant.weight_layers() as i32))),
            Some(Err(msg)) => Err(Error::Config(msg.clone())),
            None => Ok(build_kernel(&unit, &self.a_hat, x)?
                .scaled(cfg.delta_w.powi(cfg.variant.weight_layers() as i32))),
        }
    }
}

/// Exhaustive search maximizing validation accuracy. Failing points score −1
/// and the search continues; ties keep the earliest point.
pub fn grid_search(data: &Dataset, grid: &GridSpec, template: &KernelConfig) -> Result<GridResult> {
    grid.validate()?;
    let split = &data.split;
    if split.val.is_empty() {
        return Err(Error::Config(
            "grid search needs a nonempty validation set".into(),
        ));
    }
    if !split.has_all_labels(&split.val) {
        return Err(Error::Config("every validation node needs a label".into()));
    }
    let y = encode_labels(split, &split.train)?;
    let configs = grid.points(template);
    let kernels = UnitKernels::prepare(normalize_adjacency(&data.graph), &configs, &data.features);

    let points = par::map_indices(configs.len(), |i| {
        let cfg = &configs[i];
        let outcome = kernels.kernel(cfg, &data.features).and_then(|gamma| {
            let fit = GpFit::new(&gamma, &split.train, &y, cfg.sigma_tau_sq, cfg.jitter)?;
            accuracy_on(&fit, &gamma, split, &split.val)
        });
        match outcome {
            Ok(accuracy) => GridPoint {
                config: cfg.clone(),
                accuracy,
                error: None,
            },
            Err(e) => {
                log::warn!("grid point {} δ_W={} failed: {e}", cfg.base, cfg.delta_w);
                GridPoint {
                    config: cfg.clone(),
                    accuracy: -1.0,
                    error: Some(e.to_string()),
                }
            }
        }
    });

    // selection runs in grid order, independent of completion order
    let best = points
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if b.accuracy >= p.accuracy => Some(b),
            _ => Some(p),
        })
        .expect("grid is nonempty");
    Ok(GridResult {
        best: best.config.clone(),
        best_accuracy: best.accuracy,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Fit on training labels only.
    Standard,
    /// Fit on training and validation labels.
    X,
}

impl std::str::FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(FitMode::Standard),
            "x" => Ok(FitMode::X),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected standard or x"
            ))),
        }
    }
}

impl FitMode {
    pub fn fit_ids(&self, split: &LabeledSplit) -> Vec<usize> {
        match self {
            FitMode::Standard => split.train.clone(),
            FitMode::X => split.train.iter().chain(&split.val).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub mode: FitMode,
    pub accuracy: f64,
    /// Accuracy per true class; `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
    pub kernel_seconds: f64,
    pub solve_seconds: f64,
}

pub fn evaluate(data: &Dataset, cfg: &KernelConfig, mode: FitMode) -> Result<EvalReport> {
    let split = &data.split;
    if split.test.is_empty() {
        return Err(Error::Config("evaluation needs a nonempty test set".into()));
    }
    if let Some(&id) = split.test.iter().find(|id| !split.labels.contains_key(id)) {
        return Err(Error::MissingLabel(id));
    }
    let fit_ids = mode.fit_ids(split);
    let y = encode_labels(split, &fit_ids)?;

    let start = Instant::now();
    let gamma = build_kernel(cfg, &normalize_adjacency(&data.graph), &data.features)?;
    let kernel_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let fit = GpFit::new(&gamma, &fit_ids, &y, cfg.sigma_tau_sq, cfg.jitter)?;
    let post = fit.predict(&gamma, &split.test, false)?;
    let predicted = classify(&post);
    let solve_seconds = start.elapsed().as_secs_f64();

    Ok(score(data, mode, &predicted, kernel_seconds, solve_seconds))
}

pub fn score(
    data: &Dataset,
    mode: FitMode,
    predicted: &BTreeMap<usize, usize>,
    kernel_seconds: f64,
    solve_seconds: f64,
) -> EvalReport {
    let split = &data.split;
    let c = split.n_classes;
    let mut confusion = vec![vec![0usize; c]; c];
    for id in &split.test {
        confusion[split.labels[id]][predicted[id]] += 1;
    }
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[i] as f64 / total as f64)
        })
        .collect();
    EvalReport {
        dataset: data.name.clone(),
        mode,
        accuracy: correct as f64 / split.test.len() as f64,
        per_class_accuracy,
        confusion,
        n_test: split.test.len(),
        kernel_seconds,
        solve_seconds,
    }
}

/// Two Gaussian clusters centred at `±separation/2` along the first axis
/// (unit variance), joined by a kNN graph. The first `labeled_per_class`
/// nodes of each cluster (after shuffling) are training nodes, the rest test.
pub fn two_cluster_dataset(
    per_class: usize,
    dim: usize,
    separation: f64,
    k: usize,
    labeled_per_class: usize,
    seed: u64,
) -> Result<Dataset> {
    if dim == 0 || labeled_per_class == 0 || labeled_per_class > per_class {
        return Err(Error::Config("invalid two-cluster parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = BTreeMap::new();
    for node in 0..n {
        let class = node / per_class;
        let centre = if class == 0 {
            -separation / 2.0
        } else {
            separation / 2.0
        };
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(if j == 0 { centre + z } else { z });
        }
        labels.insert(node, class);
    }
    let features = FeatureMatrix::new(n, dim, data)?;
    let graph = knn_graph(&features, k)?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2 {
        let mut ids: Vec<usize> = (class * per_class..(class + 1) * per_class).collect();
        ids.shuffle(&mut rng);
        train.extend_from_slice(&ids[..labeled_per_class]);
        test.extend_from_slice(&ids[labeled_per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let split = LabeledSplit {
        train,
        val: Vec::new(),
        test,
        labels,
        n_classes: 2,
    };
    Dataset::new(format!("two-cluster-{seed}"), graph, features, split)
}

/// Random graph with `n · avg_degree / 2` distinct uniformly drawn edges.
pub fn random_graph(n: usize, avg_degree: usize, rng: &mut impl Rng) -> Result<Graph> {
    let max_edges = n * n.saturating_sub(1) / 2;
    let target = (n * avg_degree / 2).min(max_edges);
    let mut edges = std::collections::BTreeSet::new();
    while edges.len() < target {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    Graph::new(n, edges)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub max_degree: usize,
    /// Fastest of the trials.
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub avg_degree: usize,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log(seconds) on log(N); absent for one size.
    pub slope: Option<f64>,
}

/// Least-squares slope of `ys` on `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times the big-variant kernel build on random graphs of fixed average degree.
pub fn benchmark_scaling(
    sizes: &[usize],
    avg_degree: usize,
    trials: usize,
    feature_dim: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("benchmark sizes must be increasing".into()));
    }
    let cfg = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let graph = random_graph(n, avg_degree, &mut rng)?;
        let x: Vec<f64> = (0..n * feature_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let x = FeatureMatrix::new(n, feature_dim, x)?;
        let a_hat = normalize_adjacency(&graph);
        let mut best = f64::INFINITY;
        for _ in 0..trials.max(1) {
            let start = Instant::now();
            let k = build_kernel(&cfg, &a_hat, &x)?;
            best = best.min(start.elapsed().as_secs_f64());
            std::hint::black_box(k);
        }
        rows.push(ScalingRow {
            n_nodes: n,
            n_edges: graph.n_edges(),
            max_degree: a_hat.max_degree(),
            seconds: best,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n_nodes as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds.max(1e-9).ln()).collect();
    Ok(ScalingReport {
        avg_degree,
        slope: fit_slope(&xs, &ys),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    /// Brute force: sort all other nodes by (distance, index).
    fn knn_oracle(x: &FeatureMatrix, k: usize) -> Vec<(usize, usize)> {
        let n = x.rows();
        let mut edges = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = x
                        .row(i)
                        .iter()
                        .zip(x.row(j))
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    (d, j)
                })
                .collect();
            others.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for &(_, j) in &others[..k] {
                edges.insert((i.min(j), i.max(j)));
            }
        }
        edges.into_iter().collect()
    }

    #[test]
    fn knn_collinear_points() {
        let g = knn_graph(&fm(&[vec![0.0], vec![1.0], vec![10.0]]), 1).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_full_k_is_complete() {
        let x = fm(&[
            vec![0.0, 1.0],
            vec![2.0, 0.5],
            vec![-1.0, 3.0],
            vec![4.0, 4.0],
        ]);
        assert_eq!(knn_graph(&x, 3).unwrap().n_edges(), 6);
        assert!(knn_graph(&x, 4).is_err());
        assert!(knn_graph(&x, 0).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        // nodes 1 and 2 coincide, both at distance 1 from node 0
        let g = knn_graph(&fm(&[vec![0.0], vec![1.0], vec![1.0], vec![5.0]]), 1).unwrap();
        assert!(g.neighbors(0).contains(&1));
        assert!(!g.neighbors(0).contains(&2));
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..6 {
            let x: Vec<f64> = (0..40 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = FeatureMatrix::new(40, 3, x).unwrap();
            let g = knn_graph(&x, k).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), knn_oracle(&x, k));
            assert!((0..40).all(|i| g.degree(i) >= k && !g.neighbors(i).contains(&i)));
        }
    }

    fn toy() -> Dataset {
        let mut d = two_cluster_dataset(10, 3, 6.0, 3, 2, 7).unwrap();
        // move some test nodes to validation
        let val: Vec<usize> = d.split.test.iter().step_by(3).copied().collect();
        d.split.test.retain(|id| !val.contains(id));
        d.split.val = val;
        d
    }

    #[test]
    fn single_point_grid_returns_it() {
        let data = toy();
        let template = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        let grid = GridSpec {
            delta_w: vec![0.3],
            base_kernels: vec![BaseKernelSpec::Arccosine],
            sigma_tau_sq: vec![0.1],
            variant: Variant::Small,
        };
        let res = grid_search(&data, &grid, &template).unwrap();
        assert_eq!(res.points.len(), 1);
        assert_eq!(res.best.delta_w, 0.3);
        assert_eq!(res.best.base, BaseKernelSpec::Arccosine);
        assert_eq!(res.best.variant, Variant::Small);
        assert!(res.best_accuracy >= 0.0);
    }

    #[test]
    fn failing_points_are_skipped() {
        let mut data = toy();
        let mut x = data.features.clone().into_vec();
        let cols = data.features.cols();
        // an isolated all-zero node makes the arccosine kernel fail
        let zero_node = *data.split.test.last().unwrap();
        x[zero_node * cols..(zero_node + 1) * cols]
            .iter_mut()
            .for_each(|v| *v = 0.0);
        data.features = FeatureMatrix::new(data.features.rows(), cols, x).unwrap();
        let edges: Vec<_> = data
            .graph
            .edges()
            .filter(|&(i, j)| i != zero_node && j != zero_node)
            .collect();
        data.graph = Graph::new(data.graph.n_nodes(), edges).unwrap();

        let grid = GridSpec {
            delta_w: vec![1.0],
            base_kernels: vec![BaseKernelSpec::Arccosine, BaseKernelSpec::InnerProduct],
            sigma_tau_sq: vec![0.1],
            variant: Variant::Big,
        };
        let template = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        let res = grid_search(&data, &grid, &template).unwrap();
        assert_eq!(res.points[0].accuracy, -1.0);
        assert!(res.points[0].error.is_some());
        assert_eq!(res.best.base, BaseKernelSpec::InnerProduct);
    }

    #[test]
    fn rescaled_kernels_match_direct_builds() {
        let data = toy();
        let a_hat = normalize_adjacency(&data.graph);
        let cache = UnitKernels::prepare(a_hat.clone(), &[], &data.features);
        for variant in [Variant::Small, Variant::Big, Variant::Deep(3)] {
            for dw in [0.005, 0.137, 1.28] {
                let cfg = KernelConfig::new(variant, dw, BaseKernelSpec::Arccosine);
                let direct = build_kernel(&cfg, &a_hat, &data.features).unwrap();
                let cached = cache.kernel(&cfg, &data.features).unwrap();
                let scale = direct.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(direct.max_abs_diff(&cached) <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn grid_search_is_reproducible() {
        let data = toy();
        let grid = GridSpec::default_for(Variant::Big);
        let template = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        let a = grid_search(&data, &grid, &template).unwrap();
        let b = grid_search(&data, &grid, &template).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.points.len(), 9 * 4 * 4);
    }

    #[test]
    fn grid_search_needs_validation() {
        let data = two_cluster_dataset(10, 3, 6.0, 3, 2, 7).unwrap();
        let grid = GridSpec::default_for(Variant::Big);
        let template = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        assert!(grid_search(&data, &grid, &template).is_err());
    }

    #[test]
    fn single_class_is_always_right() {
        let x = fm(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let split = LabeledSplit {
            train: vec![0],
            val: vec![],
            test: vec![1, 2, 3],
            labels: (0..4).map(|i| (i, 0)).collect(),
            n_classes: 1,
        };
        let data = Dataset::new("one", g, x, split).unwrap();
        let cfg = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        let report = evaluate(&data, &cfg, FitMode::Standard).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.confusion, vec![vec![3]]);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let data = toy();
        let predicted: BTreeMap<usize, usize> = data.split.labels.clone();
        let report = score(&data, FitMode::Standard, &predicted, 0.0, 0.0);
        assert_eq!(report.accuracy, 1.0);
        assert!(report.per_class_accuracy.iter().all(|a| *a == Some(1.0)));
    }

    #[test]
    fn x_mode_ignores_test_labels() {
        let data = toy();
        let cfg = KernelConfig::new(Variant::Big, 1.0, BaseKernelSpec::InnerProduct);
        let a_hat = normalize_adjacency(&data.graph);
        let gamma = build_kernel(&cfg, &a_hat, &data.features).unwrap();
        let fit_mean = |split: &LabeledSplit| {
            let ids = FitMode::X.fit_ids(split);
            let y = encode_labels(split, &ids).unwrap();
            let fit = GpFit::new(&gamma, &ids, &y, cfg.sigma_tau_sq, cfg.jitter).unwrap();
            fit.predict(&gamma, &split.test, false).unwrap().mean
        };
        let mut corrupted = data.split.clone();
        for id in &corrupted.test {
            let l = corrupted.labels.get_mut(id).unwrap();
            *l = 1 - *l;
        }
        assert_eq!(fit_mean(&data.split), fit_mean(&corrupted));
        assert_eq!(
            FitMode::X.fit_ids(&data.split).len(),
            data.split.train.len() + data.split.val.len()
        );
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 3.0];
        assert!((fit_slope(&xs, &[2.0, 4.0, 6.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_slope(&[1.0], &[1.0]), None);
        let report = benchmark_scaling(&[64], 4, 1, 4, 0).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.slope.is_none());
        assert!(benchmark_scaling(&[64, 32], 4, 1, 4, 0).is_err());
    }

    #[test]
    fn random_graph_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(200, 6, &mut rng).unwrap();
        assert_eq!(g.n_edges(), 600);
        let g = random_graph(4, 10, &mut rng).unwrap();
        assert_eq!(g.n_edges(), 6);
    }
}
