//! Classical network features of a LON: pagerank mass near the best optima,
//! strongly connected component summaries, and flow toward the global
//! structure, combined into one per-network feature record.

use thiserror::Error;

use crate::laplacian::{flow_metrics, FlowMetrics, LaplacianError, WeightMode};
use crate::lon::{find_sccs, Lon, Perturbation};
use crate::qap::Fitness;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Laplacian(#[from] LaplacianError),
}

/// Pagerank over the weighted out-edge distribution. Self-loops count as
/// ordinary out-edges; nodes without any out-edge spread their mass
/// uniformly. Power iteration to an L1 residual of 1e-12.
pub fn pagerank(lon: &Lon, damping: f64) -> Result<Vec<f64>, MetricsError> {
    if !(0.0..1.0).contains(&damping) {
        return Err(MetricsError::Input(format!(
            "damping must lie in [0, 1), got {damping}"
        )));
    }
    let n = lon.node_count();
    let mut out_weight = vec![0.0f64; n];
    for e in lon.edges() {
        out_weight[e.from as usize] += e.weight as f64;
    }
    // Incoming contributions as (source, fraction of its mass we receive).
    let mut incoming: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for e in lon.edges() {
        incoming[e.to as usize].push((e.from, e.weight as f64 / out_weight[e.from as usize]));
    }
    let dangling: Vec<usize> = (0..n).filter(|&v| out_weight[v] == 0.0).collect();
    let base = (1.0 - damping) / n as f64;
    let mut pr = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..100_000 {
        let dangling_share: f64 =
            dangling.iter().map(|&v| pr[v]).sum::<f64>() / n as f64;
        for i in 0..n {
            let mut acc = 0.0;
            for &(src, frac) in &incoming[i] {
                acc += frac * pr[src as usize];
            }
            next[i] = base + damping * (acc + dangling_share);
        }
        let residual: f64 = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if residual <= 1e-12 {
            return Ok(pr);
        }
    }
    Err(MetricsError::Numerical(
        "pagerank did not converge within the iteration budget".into(),
    ))
}

#[derive(Clone, Debug)]
pub struct PagerankFeatures {
    /// Total pagerank held by the nodes at the network's best fitness.
    pub mass_at_best: f64,
    /// Fitness-weighted mean pagerank, `sum(F_j pr_j) / sum(F_j)`.
    pub fitness_weighted: f64,
    /// Whether the best fitness in the network matches the instance's
    /// best-known value; `None` when no best-known value was supplied.
    pub best_matches_best_known: Option<bool>,
}

pub fn pagerank_features(
    lon: &Lon,
    damping: f64,
    best_known: Option<Fitness>,
) -> Result<PagerankFeatures, MetricsError> {
    let pr = pagerank(lon, damping)?;
    let best = lon.best_fitness();
    let mass_at_best = lon
        .nodes()
        .iter()
        .zip(&pr)
        .filter(|(v, _)| v.fitness == best)
        .map(|(_, &p)| p)
        .sum();
    let f = lon.normalized_reversed_fitness();
    let weight_sum: f64 = f.iter().sum();
    let fitness_weighted = f.iter().zip(&pr).map(|(w, p)| w * p).sum::<f64>() / weight_sum;
    Ok(PagerankFeatures {
        mass_at_best,
        fitness_weighted,
        best_matches_best_known: best_known.map(|bk| best == bk),
    })
}

/// Size statistics of the non-trivial strongly connected components.
#[derive(Clone, Debug, PartialEq)]
pub struct SccFeatures {
    pub count: usize,
    pub member_count: usize,
    pub node_ratio: f64,
    /// 0 when there are no non-trivial components.
    pub max_size: usize,
    /// `None` when there are no non-trivial components.
    pub mean_size: Option<f64>,
}

pub fn scc_features(lon: &Lon) -> SccFeatures {
    let info = find_sccs(lon);
    let sizes: Vec<usize> = info.components.iter().map(|c| c.len()).collect();
    SccFeatures {
        count: info.count(),
        member_count: info.member_count,
        node_ratio: info.node_ratio,
        max_size: sizes.iter().copied().max().unwrap_or(0),
        mean_size: (!sizes.is_empty())
            .then(|| sizes.iter().sum::<usize>() as f64 / sizes.len() as f64),
    }
}

/// Fraction of non-self-loop transition mass that enters a node at the
/// network's best fitness. `None` when every edge is a self-loop (or there
/// are no edges at all).
pub fn global_flow(lon: &Lon) -> Option<f64> {
    let best = lon.best_fitness();
    let mut total = 0u64;
    let mut into_best = 0u64;
    for e in lon.edges() {
        if e.from == e.to {
            continue;
        }
        total += e.weight;
        if lon.nodes()[e.to as usize].fitness == best {
            into_best += e.weight;
        }
    }
    (total > 0).then(|| into_best as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimaCounts {
    /// Distinct local optima in the network.
    pub n_local: usize,
    /// Nodes at the instance's best-known fitness; 0 when the sampling
    /// never reached it, `None` when no best-known value was supplied.
    pub n_global: Option<usize>,
}

pub fn optima_counts(lon: &Lon, best_known: Option<Fitness>) -> OptimaCounts {
    OptimaCounts {
        n_local: lon.node_count(),
        n_global: best_known.map(|bk| {
            lon.nodes().iter().filter(|v| v.fitness == bk).count()
        }),
    }
}

/// Everything the analysis stage consumes about one network.
#[derive(Clone, Debug)]
pub struct LonFeatures {
    pub name: String,
    pub perturbation: Perturbation,
    pub n_local: usize,
    pub n_global: Option<usize>,
    pub n_sources: usize,
    pub n_sinks: usize,
    pub weak_components: usize,
    pub scc: SccFeatures,
    pub global_flow: Option<f64>,
    pub pagerank_mass_at_best: f64,
    pub pagerank_fitness_weighted: f64,
    pub best_matches_best_known: Option<bool>,
    pub flow: FlowMetrics,
}

pub fn compute_features(
    lon: &Lon,
    mode: WeightMode,
    damping: f64,
    best_known: Option<Fitness>,
) -> Result<LonFeatures, MetricsError> {
    let flow = flow_metrics(lon, mode)?;
    let pr = pagerank_features(lon, damping, best_known)?;
    let counts = optima_counts(lon, best_known);
    Ok(LonFeatures {
        name: lon.name.clone(),
        perturbation: lon.perturbation,
        n_local: counts.n_local,
        n_global: counts.n_global,
        n_sources: flow.n_sources,
        n_sinks: flow.n_sinks,
        weak_components: lon.weak_component_count(),
        scc: scc_features(lon),
        global_flow: global_flow(lon),
        pagerank_mass_at_best: pr.mass_at_best,
        pagerank_fitness_weighted: pr.fitness_weighted,
        best_matches_best_known: pr.best_matches_best_known,
        flow,
    })
}
