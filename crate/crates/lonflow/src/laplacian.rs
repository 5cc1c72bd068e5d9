//! Random-walk Laplacian of a LON and the asymptotic structure of the
//! consensus dynamics `dp/dt = -L p`.
//!
//! The adjacency here is *incoming*: `A[i][j]` is the weight of the LON edge
//! `j -> i`, so the induced walk `P = D^-1 A` steps from a node to one of
//! its in-neighbors (backward along observed transitions, toward flow
//! origins). `L = I - P`. Rows with no incoming edge get a unit self-loop so
//! that `D` is invertible; those rows of `L` are zero.
//!
//! As `t` grows, `exp(-Lt)` converges to a projection `G` onto the kernel of
//! `L` along its range. `G` is computed two independent ways:
//!
//! * [`compute_gamma`]: probabilistically. The recurrent classes of the walk
//!   are the source components of the network; `G[i][j]` is the probability
//!   that the walk from `i` is absorbed into the class of `j`, times the
//!   stationary weight of `j` within its class. Absorption probabilities are
//!   solved block-triangularly over the condensation, so this route scales
//!   to large sparse networks and is the one used by [`flow_metrics`].
//! * [`gamma_nullspace`]: algebraically, from dense left and right null
//!   space bases of `L`. Cubic in `n`; serves as a cross-check.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::lon::{classify_nodes, strongly_connected_components, Lon};

#[derive(Debug, Error)]
pub enum LaplacianError {
    #[error("network is empty")]
    EmptyNetwork,
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("flow projection inconsistent: {0}")]
    Consistency(String),
}

/// Whether edge multiplicities enter the walk or every edge counts once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    Weighted,
    Binarized,
}

/// Random-walk Laplacian in sparse row form.
#[derive(Clone, Debug)]
pub struct RwLaplacian {
    n: usize,
    mode: WeightMode,
    /// Row `i`: in-neighbors `(j, a_ij)` sorted by `j`; includes the imposed
    /// unit self-loop where the network had no incoming edge.
    in_rows: Vec<Vec<(u32, f64)>>,
    /// Row sums of the in-adjacency.
    degrees: Vec<f64>,
    imposed: Vec<bool>,
}

pub fn build_laplacian(lon: &Lon, mode: WeightMode) -> Result<RwLaplacian, LaplacianError> {
    let n = lon.node_count();
    if n == 0 {
        return Err(LaplacianError::EmptyNetwork);
    }
    let mut in_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for e in lon.edges() {
        let a = match mode {
            WeightMode::Weighted => e.weight as f64,
            WeightMode::Binarized => 1.0,
        };
        in_rows[e.to as usize].push((e.from, a));
    }
    let mut imposed = vec![false; n];
    for (i, row) in in_rows.iter_mut().enumerate() {
        if row.is_empty() {
            row.push((i as u32, 1.0));
            imposed[i] = true;
        }
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    let degrees = in_rows
        .iter()
        .map(|row| row.iter().map(|&(_, a)| a).sum())
        .collect();
    Ok(RwLaplacian {
        n,
        mode,
        in_rows,
        degrees,
        imposed,
    })
}

impl RwLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    /// Rows where a unit self-loop was imposed for invertibility of `D`.
    pub fn imposed_rows(&self) -> &[bool] {
        &self.imposed
    }

    /// Walk transition probabilities out of node `i` (backward along edges).
    pub fn walk_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let d = self.degrees[i];
        self.in_rows[i].iter().map(move |&(j, a)| (j as usize, a / d))
    }

    /// Dense `L = I - D^-1 A`. Intended for small networks.
    pub fn laplacian_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.n, self.n);
        for i in 0..self.n {
            for (j, p) in self.walk_row(i) {
                m[(i, j)] -= p;
            }
        }
        m
    }

    /// `out = -L p`, the consensus vector field.
    fn neg_l_apply(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = -p[i];
            for (j, w) in self.walk_row(i) {
                acc += w * p[j];
            }
            out[i] = acc;
        }
    }
}

/// One recurrent class of the walk: a source component of the network.
#[derive(Clone, Debug)]
pub struct GammaClass {
    /// Member node ids, ascending.
    pub nodes: Vec<u32>,
    /// Stationary distribution of the walk restricted to the class, aligned
    /// with `nodes`; sums to 1.
    pub pi: Vec<f64>,
    /// For every node of the network, the probability that the walk started
    /// there is absorbed into this class.
    pub absorb: Vec<f64>,
}

/// The asymptotic projection in factored form:
/// `G[i][j] = sum_c absorb_c[i] * pi_c(j)`.
#[derive(Clone, Debug)]
pub struct Gamma {
    pub n: usize,
    /// Ordered by smallest member id.
    pub classes: Vec<GammaClass>,
}

impl Gamma {
    /// Node ids carrying nonzero columns, ascending: exactly the members of
    /// the recurrent classes.
    pub fn support_columns(&self) -> Vec<u32> {
        let mut cols: Vec<u32> = self
            .classes
            .iter()
            .flat_map(|c| c.nodes.iter().copied())
            .collect();
        cols.sort_unstable();
        cols
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for class in &self.classes {
            let h = class.absorb[i];
            if h != 0.0 {
                for (k, &j) in class.nodes.iter().enumerate() {
                    out[j as usize] += h * class.pi[k];
                }
            }
        }
        out
    }

    /// Dense materialization; quadratic memory, for small networks.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for class in &self.classes {
            for (k, &j) in class.nodes.iter().enumerate() {
                let pj = class.pi[k];
                for i in 0..self.n {
                    g[(i, j as usize)] += class.absorb[i] * pj;
                }
            }
        }
        g
    }
}

/// Column means of the projection: how much asymptotic mass each node
/// receives from a uniform start.
pub fn influence_vector(gamma: &Gamma) -> Vec<f64> {
    let n = gamma.n;
    let mut out = vec![0.0; n];
    for class in &gamma.classes {
        let mean_h = class.absorb.iter().sum::<f64>() / n as f64;
        for (k, &j) in class.nodes.iter().enumerate() {
            out[j as usize] += mean_h * class.pi[k];
        }
    }
    out
}

/// Influence of the edge-reversed network: asymptotic mass flowing against
/// the fitness gradient, which lands on the sinks of the original.
pub fn defluence_vector(lon: &Lon, mode: WeightMode) -> Result<Vec<f64>, LaplacianError> {
    let rw = build_laplacian(&lon.reverse(), mode)?;
    Ok(influence_vector(&compute_gamma(&rw)?))
}

/// Blocks up to this size use direct dense solves; larger ones fall back to
/// iterative methods.
const DENSE_BLOCK_LIMIT: usize = 512;
const ITER_LIMIT: usize = 1_000_000;

fn block_positions(nodes: &[u32]) -> HashMap<u32, usize> {
    nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect()
}

fn stationary_distribution(rw: &RwLaplacian, nodes: &[u32]) -> Result<Vec<f64>, LaplacianError> {
    let m = nodes.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let pos = block_positions(nodes);
    let pi = if m <= DENSE_BLOCK_LIMIT {
        // Solve (P^T - I) pi = 0 with the last equation replaced by sum = 1.
        let mut mat = DMatrix::zeros(m, m);
        for (k, &iu) in nodes.iter().enumerate() {
            for (j, p) in rw.walk_row(iu as usize) {
                let kj = pos[&(j as u32)];
                mat[(kj, k)] += p;
            }
        }
        for k in 0..m {
            mat[(k, k)] -= 1.0;
        }
        for k in 0..m {
            mat[(m - 1, k)] = 1.0;
        }
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let x = mat
            .lu()
            .solve(&b)
            .ok_or_else(|| LaplacianError::Numerical("stationary system is singular".into()))?;
        x.iter().copied().collect::<Vec<f64>>()
    } else {
        // Lazy power iteration x <- x (P + I) / 2; converges on any closed
        // class because laziness removes periodicity.
        let mut x = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        let mut converged = false;
        for _ in 0..ITER_LIMIT {
            for v in next.iter_mut() {
                *v = 0.0;
            }
            for (k, &iu) in nodes.iter().enumerate() {
                next[k] += 0.5 * x[k];
                for (j, p) in rw.walk_row(iu as usize) {
                    next[pos[&(j as u32)]] += 0.5 * p * x[k];
                }
            }
            let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if diff <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LaplacianError::Numerical(
                "stationary power iteration did not converge".into(),
            ));
        }
        x
    };
    let mut pi = pi;
    let mut sum = 0.0;
    for v in pi.iter_mut() {
        if *v < -1e-9 {
            return Err(LaplacianError::Consistency(format!(
                "negative stationary weight {v}"
            )));
        }
        *v = v.max(0.0);
        sum += *v;
    }
    if !(sum.is_finite() && sum > 0.0) {
        return Err(LaplacianError::Numerical("stationary mass vanished".into()));
    }
    for v in pi.iter_mut() {
        *v /= sum;
    }
    Ok(pi)
}

struct TransientBlock {
    nodes: Vec<u32>,
    pos: HashMap<u32, usize>,
    /// LU of `I - Q` for dense-sized blocks, `None` for large ones.
    lu: Option<nalgebra::linalg::LU<f64, Dyn, Dyn>>,
}

impl TransientBlock {
    fn build(rw: &RwLaplacian, nodes: Vec<u32>) -> Self {
        let pos = block_positions(&nodes);
        let m = nodes.len();
        let lu = (1 < m && m <= DENSE_BLOCK_LIMIT).then(|| {
            let mut mat = DMatrix::identity(m, m);
            for (k, &iu) in nodes.iter().enumerate() {
                for (j, p) in rw.walk_row(iu as usize) {
                    if let Some(&kj) = pos.get(&(j as u32)) {
                        mat[(k, kj)] -= p;
                    }
                }
            }
            mat.lu()
        });
        TransientBlock { nodes, pos, lu }
    }

    /// Solves `(I - Q) x = r` where `r_i` collects walk mass leaving the
    /// block into already-solved nodes, then scatters `x` into `h`.
    fn absorb_into(&self, rw: &RwLaplacian, h: &mut [f64]) -> Result<(), LaplacianError> {
        let m = self.nodes.len();
        let mut r = vec![0.0; m];
        for (k, &iu) in self.nodes.iter().enumerate() {
            for (j, p) in rw.walk_row(iu as usize) {
                if !self.pos.contains_key(&(j as u32)) {
                    r[k] += p * h[j];
                }
            }
        }
        if m == 1 {
            let i = self.nodes[0] as usize;
            let q: f64 = rw
                .walk_row(i)
                .filter(|&(j, _)| j == i)
                .map(|(_, p)| p)
                .sum();
            // q < 1: a closed singleton would be recurrent, not transient.
            h[i] = r[0] / (1.0 - q);
            return Ok(());
        }
        if let Some(lu) = &self.lu {
            let x = lu
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| LaplacianError::Numerical("transient block is singular".into()))?;
            for (k, &iu) in self.nodes.iter().enumerate() {
                h[iu as usize] = x[k];
            }
            return Ok(());
        }
        // Gauss-Seidel sweeps for oversized blocks; converges because Q is
        // non-negative with spectral radius below one.
        let mut x = vec![0.0; m];
        let mut converged = false;
        for _ in 0..ITER_LIMIT {
            let mut change: f64 = 0.0;
            for (k, &iu) in self.nodes.iter().enumerate() {
                let mut acc = r[k];
                let mut diag = 0.0;
                for (j, p) in rw.walk_row(iu as usize) {
                    match self.pos.get(&(j as u32)) {
                        Some(&kj) if kj == k => diag += p,
                        Some(&kj) => acc += p * x[kj],
                        None => {}
                    }
                }
                let new = acc / (1.0 - diag);
                change = change.max((new - x[k]).abs());
                x[k] = new;
            }
            if change <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LaplacianError::Numerical(
                "absorption sweeps did not converge".into(),
            ));
        }
        for (k, &iu) in self.nodes.iter().enumerate() {
            h[iu as usize] = x[k];
        }
        Ok(())
    }
}

/// Computes the asymptotic projection of the walk in factored form.
pub fn compute_gamma(rw: &RwLaplacian) -> Result<Gamma, LaplacianError> {
    let n = rw.n;
    let adj: Vec<Vec<u32>> = rw
        .in_rows
        .iter()
        .map(|row| row.iter().map(|&(j, _)| j).collect())
        .collect();
    let (comp, n_comps) = strongly_connected_components(n, &adj);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n_comps];
    for v in 0..n {
        members[comp[v] as usize].push(v as u32);
    }
    let mut recurrent = vec![true; n_comps];
    for i in 0..n {
        for &(j, _) in &rw.in_rows[i] {
            if comp[j as usize] != comp[i] {
                recurrent[comp[i] as usize] = false;
            }
        }
    }

    let mut class_comps: Vec<usize> = (0..n_comps).filter(|&c| recurrent[c]).collect();
    class_comps.sort_by_key(|&c| members[c][0]);
    let mut class_of_comp = vec![usize::MAX; n_comps];
    for (k, &c) in class_comps.iter().enumerate() {
        class_of_comp[c] = k;
    }
    let mut classes = Vec::with_capacity(class_comps.len());
    for &c in &class_comps {
        let nodes = members[c].clone();
        let pi = stationary_distribution(rw, &nodes)?;
        classes.push(GammaClass {
            nodes,
            pi,
            absorb: Vec::new(),
        });
    }

    // Transient blocks, factored once and reused for every class. Tarjan
    // emits components in reverse topological order, so walking them in
    // emission order visits every block after all blocks it can step into.
    let blocks: Vec<Option<TransientBlock>> = (0..n_comps)
        .map(|c| (!recurrent[c]).then(|| TransientBlock::build(rw, members[c].clone())))
        .collect();

    for k in 0..classes.len() {
        let mut h = vec![0.0; n];
        for c in 0..n_comps {
            match &blocks[c] {
                None => {
                    let val = if class_of_comp[c] == k { 1.0 } else { 0.0 };
                    for &v in &members[c] {
                        h[v as usize] = val;
                    }
                }
                Some(block) => block.absorb_into(rw, &mut h)?,
            }
        }
        for (i, v) in h.iter().enumerate() {
            if !v.is_finite() || *v < -1e-9 || *v > 1.0 + 1e-9 {
                return Err(LaplacianError::Consistency(format!(
                    "absorption probability {v} at node {i}"
                )));
            }
        }
        classes[k].absorb = h;
    }

    for i in 0..n {
        let total: f64 = classes.iter().map(|cl| cl.absorb[i]).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(LaplacianError::Consistency(format!(
                "absorption mass {total} at node {i}"
            )));
        }
    }
    Ok(Gamma { n, classes })
}

/// Basis of the right null space of `m` (columns), from Gauss-Jordan
/// elimination with row pivoting. Pivots are judged against the largest
/// entry of the input, which cleanly separates true kernel directions from
/// the well-gapped nonzero spectrum of a walk Laplacian.
fn dense_null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let tol = 1e-8 * a.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut pivot_cols: Vec<usize> = Vec::new();
    for c in 0..cols {
        let r = pivot_cols.len();
        if r == rows {
            break;
        }
        let (best_row, best) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty row range");
        if best <= tol {
            continue;
        }
        a.swap_rows(r, best_row);
        let piv = a[(r, c)];
        for j in c..cols {
            a[(r, j)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in c..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivot_cols.push(c);
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = DMatrix::zeros(cols, free.len());
    for (k, &f) in free.iter().enumerate() {
        basis[(f, k)] = 1.0;
        for (r, &p) in pivot_cols.iter().enumerate() {
            basis[(p, k)] = -a[(r, f)];
        }
    }
    basis
}

/// Independent dense route to the projection: with `R` spanning the right
/// null space of `L` and `Λ` the left one, `G = R (Λ R)^-1 Λ`.
pub fn gamma_nullspace(l: &DMatrix<f64>) -> Result<DMatrix<f64>, LaplacianError> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(LaplacianError::Input(format!(
            "expected a square matrix, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let r = dense_null_space(l);
    let lam = dense_null_space(&l.transpose()).transpose();
    if r.ncols() == 0 {
        return Err(LaplacianError::Numerical(
            "matrix has no null space within tolerance".into(),
        ));
    }
    if r.ncols() != lam.nrows() {
        return Err(LaplacianError::Numerical(format!(
            "left and right null spaces have different dimensions ({} vs {})",
            lam.nrows(),
            r.ncols()
        )));
    }
    let pairing = &lam * &r;
    let inv = pairing.try_inverse().ok_or_else(|| {
        LaplacianError::Numerical("left/right null space pairing is singular".into())
    })?;
    Ok(&r * inv * &lam)
}

/// Fixed-step RK4 integration of `dp/dt = -L p` up to `t_end` with step at
/// most 0.01.
pub fn simulate_consensus(
    rw: &RwLaplacian,
    p0: &[f64],
    t_end: f64,
) -> Result<Vec<f64>, LaplacianError> {
    if p0.len() != rw.n {
        return Err(LaplacianError::Input(format!(
            "state has length {}, network has {} nodes",
            p0.len(),
            rw.n
        )));
    }
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(LaplacianError::Input("state contains non-finite entries".into()));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(LaplacianError::Input(format!("bad horizon {t_end}")));
    }
    let mut p = p0.to_vec();
    if t_end == 0.0 {
        return Ok(p);
    }
    let steps = (t_end / 0.01).ceil() as usize;
    let h = t_end / steps as f64;
    let n = rw.n;
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        rw.neg_l_apply(&p, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        rw.neg_l_apply(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        rw.neg_l_apply(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + h * k3[i];
        }
        rw.neg_l_apply(&tmp, &mut k4);
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if step % 1024 == 0 || step + 1 == steps {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(LaplacianError::Numerical(
                    "consensus state became non-finite".into(),
                ));
            }
        }
    }
    Ok(p)
}

/// Influence and defluence statistics of a network under one weight mode.
///
/// The `i*` family describes the forward network: `i1` is the population
/// variance of the influence vector, `i2` the variance over its strictly
/// positive entries, `i3` the distance between influence and its sink-row
/// reduction, `i4` the same with fitness-weighted sink rows, and `i5` the
/// fitness-weighted total influence. The `d*` family repeats this on the
/// edge-reversed network (defluence). `i3`/`i4`/`d3`/`d4` are `None` when
/// the relevant direction has no sink-like nodes to reduce over.
#[derive(Clone, Debug)]
pub struct FlowMetrics {
    pub i1: f64,
    pub i2: f64,
    pub i3: Option<f64>,
    pub i4: Option<f64>,
    pub i5: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: Option<f64>,
    pub d4: Option<f64>,
    pub d5: f64,
    pub n_sources: usize,
    pub n_sinks: usize,
}

struct DirectionStats {
    v1: f64,
    v2: f64,
    v3: Option<f64>,
    v4: Option<f64>,
    v5: f64,
}

fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn direction_stats(
    lon: &Lon,
    mode: WeightMode,
    fitness_weight: &[f64],
) -> Result<DirectionStats, LaplacianError> {
    let classes = classify_nodes(lon);
    let rw = build_laplacian(lon, mode)?;
    let gamma = compute_gamma(&rw)?;
    let influence = influence_vector(&gamma);
    let sinks: Vec<usize> = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_sink_like())
        .map(|(i, _)| i)
        .collect();
    let n = gamma.n;
    let (v3, v4) = if sinks.is_empty() {
        (None, None)
    } else {
        let mut reduced = vec![0.0; n];
        let mut reduced_f = vec![0.0; n];
        for class in &gamma.classes {
            let mut mean_h = 0.0;
            let mut mean_hf = 0.0;
            for &s in &sinks {
                mean_h += class.absorb[s];
                mean_hf += fitness_weight[s] * class.absorb[s];
            }
            mean_h /= sinks.len() as f64;
            mean_hf /= sinks.len() as f64;
            for (k, &j) in class.nodes.iter().enumerate() {
                reduced[j as usize] += mean_h * class.pi[k];
                reduced_f[j as usize] += mean_hf * class.pi[k];
            }
        }
        (
            Some(l2_distance(&reduced, &influence)),
            Some(l2_distance(&reduced_f, &influence)),
        )
    };
    let positives: Vec<f64> = influence.iter().copied().filter(|&v| v > 0.0).collect();
    let v5 = influence
        .iter()
        .zip(fitness_weight)
        .map(|(a, b)| a * b)
        .sum();
    Ok(DirectionStats {
        v1: population_variance(&influence),
        v2: population_variance(&positives),
        v3,
        v4,
        v5,
    })
}

/// Computes the full influence/defluence metric family of a network.
pub fn flow_metrics(lon: &Lon, mode: WeightMode) -> Result<FlowMetrics, LaplacianError> {
    let fitness_weight = lon.normalized_reversed_fitness();
    let classes = classify_nodes(lon);
    let forward = direction_stats(lon, mode, &fitness_weight)?;
    let backward = direction_stats(&lon.reverse(), mode, &fitness_weight)?;
    Ok(FlowMetrics {
        i1: forward.v1,
        i2: forward.v2,
        i3: forward.v3,
        i4: forward.v4,
        i5: forward.v5,
        d1: backward.v1,
        d2: backward.v2,
        d3: backward.v3,
        d4: backward.v4,
        d5: backward.v5,
        n_sources: classes.iter().filter(|c| c.is_source_like()).count(),
        n_sinks: classes.iter().filter(|c| c.is_sink_like()).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::flow12_lon;

    fn assert_close(a: f64, b: f64, tol: f64, label: &str) {
        assert!((a - b).abs() <= tol, "{label}: {a} vs {b}");
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_sources_are_flat() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        let l = rw.laplacian_dense();
        for i in 0..12 {
            let row_sum: f64 = (0..12).map(|j| l[(i, j)]).sum();
            assert_close(row_sum, 0.0, 1e-15, "row sum");
        }
        // Node 0 has no incoming edges: imposed self-loop, zero row.
        assert!(rw.imposed_rows()[0]);
        for j in 0..12 {
            assert_eq!(l[(0, j)], 0.0);
        }
        // Node 8 has exactly one in-neighbor (7).
        assert_eq!(l[(8, 8)], 1.0);
        assert_eq!(l[(8, 7)], -1.0);
    }

    #[test]
    fn gamma_matches_hand_computed_absorption() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        let gamma = compute_gamma(&rw).unwrap();
        assert_eq!(gamma.classes.len(), 2);
        assert_eq!(gamma.classes[0].nodes, vec![0]);
        assert_eq!(gamma.classes[1].nodes, vec![2, 3, 4]);
        let h0 = &gamma.classes[0].absorb;
        let hc = &gamma.classes[1].absorb;
        let expect_h0 = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5];
        for i in 0..12 {
            assert_close(h0[i], expect_h0[i], 1e-12, "absorption into node 0");
            assert_close(hc[i], 1.0 - expect_h0[i], 1e-12, "absorption into cycle");
        }
        for &p in &gamma.classes[1].pi {
            assert_close(p, 1.0 / 3.0, 1e-12, "cycle stationary weight");
        }
        assert_eq!(gamma.support_columns(), vec![0, 2, 3, 4]);
        let dense = gamma.to_dense();
        for i in 0..12 {
            let row_sum: f64 = (0..12).map(|j| dense[(i, j)]).sum();
            assert_close(row_sum, 1.0, 1e-12, "projection row sum");
        }
    }

    #[test]
    fn influence_matches_hand_values() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        let inf = influence_vector(&compute_gamma(&rw).unwrap());
        let expected = [
            9.0 / 24.0,
            0.0,
            5.0 / 24.0,
            5.0 / 24.0,
            5.0 / 24.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ];
        for i in 0..12 {
            assert_close(inf[i], expected[i], 1e-12, "influence");
        }
    }

    #[test]
    fn defluence_matches_hand_values() {
        let lon = flow12_lon();
        let d = defluence_vector(&lon, WeightMode::Weighted).unwrap();
        let expected = [
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.25,
            0.0,
            0.0,
            1.0 / 3.0,
            5.0 / 24.0,
            5.0 / 24.0,
        ];
        for i in 0..12 {
            assert_close(d[i], expected[i], 1e-12, "defluence");
        }
    }

    #[test]
    fn metric_family_fixture_values() {
        let lon = flow12_lon();
        let m = flow_metrics(&lon, WeightMode::Weighted).unwrap();
        assert_close(m.i1, 1.0 / 64.0, 1e-12, "i1");
        assert_close(m.i2, 1.0 / 192.0, 1e-12, "i2");
        assert_close(m.i3.unwrap(), 0.0, 1e-12, "i3");
        assert_close(m.i4.unwrap(), 0.0, 1e-12, "i4");
        assert_close(m.i5, 5.0 / 112.0, 1e-12, "i5");
        assert_close(m.d1, 17.0 / 1152.0, 1e-12, "d1");
        assert_close(m.d2, 1.0 / 384.0, 1e-12, "d2");
        assert_close(m.d3.unwrap(), (198.0f64 / 9216.0).sqrt(), 1e-12, "d3");
        let d4 = ((25.0f64 / 112.0).powi(2)
            + (215.0f64 / 672.0).powi(2)
            + 2.0 * (271.0f64 / 1344.0).powi(2))
        .sqrt();
        assert_close(m.d4.unwrap(), d4, 1e-12, "d4");
        assert_close(m.d5, 1.0, 1e-12, "d5");
        assert_eq!(m.n_sources, 4);
        assert_eq!(m.n_sinks, 4);
        // All fixture weights are 1, so binarization changes nothing.
        let b = flow_metrics(&lon, WeightMode::Binarized).unwrap();
        assert_close(b.i1, m.i1, 0.0, "binarized i1");
        assert_close(b.d1, m.d1, 0.0, "binarized d1");
    }

    #[test]
    fn nullspace_route_agrees_on_fixture() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        let direct = compute_gamma(&rw).unwrap().to_dense();
        let oracle = gamma_nullspace(&rw.laplacian_dense()).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_close(direct[(i, j)], oracle[(i, j)], 1e-10, "projection entry");
            }
        }
    }

    #[test]
    fn consensus_fixes_constant_state_and_respects_projection() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        let flat = simulate_consensus(&rw, &vec![0.5; 12], 3.0).unwrap();
        for v in flat {
            assert_close(v, 0.5, 1e-12, "constant state");
        }
        // A point mass evolves toward the matching projection column.
        let mut p0 = vec![0.0; 12];
        p0[0] = 1.0;
        let p = simulate_consensus(&rw, &p0, 200.0).unwrap();
        let gamma = compute_gamma(&rw).unwrap();
        let expect = &gamma.classes[0].absorb;
        for i in 0..12 {
            assert_close(p[i], expect[i], 1e-6, "asymptotic state");
        }
    }

    #[test]
    fn consensus_validates_input() {
        let lon = flow12_lon();
        let rw = build_laplacian(&lon, WeightMode::Weighted).unwrap();
        assert!(simulate_consensus(&rw, &[0.0; 3], 1.0).is_err());
        assert!(simulate_consensus(&rw, &[f64::NAN; 12], 1.0).is_err());
        assert!(simulate_consensus(&rw, &[0.0; 12], -1.0).is_err());
        assert!(simulate_consensus(&rw, &[0.0; 12], f64::INFINITY).is_err());
    }

    #[test]
    fn nullspace_rejects_nonsquare_and_full_rank() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(gamma_nullspace(&m).is_err());
        let full = DMatrix::<f64>::identity(4, 4);
        assert!(matches!(
            gamma_nullspace(&full),
            Err(LaplacianError::Numerical(_))
        ));
    }
}
