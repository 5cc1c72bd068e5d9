//! Sampling metaheuristics over the pairwise-exchange neighborhood:
//! iterated local search (ILS), instrumented to record transitions between
//! local optima, and robust tabu search (ROTS).
//!
//! Runs are reproducible: each takes an explicit seed for a ChaCha8 stream,
//! and batches derive per-run seeds with [`derive_seed`].

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::qap::{Fitness, Permutation, QapError, QapInstance};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Qap(#[from] QapError),
}

/// Per-run seed `index` derived from a base seed: output `index` of the
/// splitmix64 counter sequence starting at `base`. O(1), collision-resistant,
/// and stable across platforms.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Weak perturbation strength, n/8 rounded and at least 1.
pub fn k_low(n: usize) -> usize {
    ((n as f64 / 8.0).round() as usize).max(1)
}

/// Strong perturbation strength, 3n/4 rounded and at least 1.
pub fn k_high(n: usize) -> usize {
    ((3.0 * n as f64 / 4.0).round() as usize).max(1)
}

/// First-improvement local search. The neighborhood is all facility swaps,
/// scanned in a random cyclic order drawn once per call; improving moves are
/// taken immediately and the scan continues from the next pair, terminating
/// after a full cycle without improvement.
pub fn local_search<R: Rng + ?Sized>(
    inst: &QapInstance,
    start: Permutation,
    rng: &mut R,
) -> Result<(Permutation, Fitness), SearchError> {
    let mut f = inst.evaluate(&start)?;
    let mut s = start;
    let n = inst.size();
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i as u16, j as u16));
        }
    }
    if pairs.is_empty() {
        return Ok((s, f));
    }
    pairs.shuffle(rng);
    let m = pairs.len();
    let mut idx = 0usize;
    let mut without_improvement = 0usize;
    while without_improvement < m {
        let (i, j) = pairs[idx];
        let cand = inst.delta(&s, f, i as usize, j as usize)?;
        if cand < f {
            s.swap(i as usize, j as usize);
            f = cand;
            without_improvement = 0;
        } else {
            without_improvement += 1;
        }
        idx += 1;
        if idx == m {
            idx = 0;
        }
    }
    Ok((s, f))
}

/// Applies `k` uniformly random swaps; the two facilities of each swap are
/// distinct, but later swaps may undo earlier ones.
pub fn perturb<R: Rng + ?Sized>(
    s: &Permutation,
    k: usize,
    rng: &mut R,
) -> Result<Permutation, SearchError> {
    let n = s.len();
    if n < 2 {
        return Err(SearchError::Config(
            "perturbation needs at least 2 facilities".into(),
        ));
    }
    if k == 0 {
        return Err(SearchError::Config("perturbation strength must be >= 1".into()));
    }
    let mut out = s.clone();
    for _ in 0..k {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    Ok(out)
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    Stagnation,
    IterationBudget,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub best: Fitness,
    pub iterations: u64,
    pub termination: Termination,
}

/// Local optima visited by one ILS run, deduplicated, plus every accepted
/// transition as a pair of indices into `optima`. Self-transitions (the
/// perturbed search fell back into the same optimum) are kept.
#[derive(Clone, Debug, Default)]
pub struct RunTrace {
    pub optima: Vec<(Permutation, Fitness)>,
    pub transitions: Vec<(u32, u32)>,
}

impl RunTrace {
    fn intern(&mut self, index: &mut HashMap<Permutation, u32>, s: &Permutation, f: Fitness) -> u32 {
        if let Some(&id) = index.get(s) {
            return id;
        }
        let id = self.optima.len() as u32;
        self.optima.push((s.clone(), f));
        index.insert(s.clone(), id);
        id
    }
}

#[derive(Clone, Debug)]
pub struct IlsConfig {
    /// Perturbation strength: number of random swaps per kick.
    pub k: usize,
    /// Stop after this many consecutive iterations without strict improvement.
    pub stagnation_limit: u64,
    /// Stop as soon as the incumbent reaches this fitness or better.
    pub target: Option<Fitness>,
    pub seed: u64,
}

/// Iterated local search from a random start. Perturbed solutions are
/// re-optimized and accepted when not worse than the incumbent; ties move
/// the incumbent but do not reset the stagnation counter.
pub fn run_ils(inst: &QapInstance, cfg: &IlsConfig) -> Result<(RunTrace, RunResult), SearchError> {
    if inst.size() < 2 {
        return Err(SearchError::Config("instance must have size >= 2".into()));
    }
    if cfg.k == 0 {
        return Err(SearchError::Config("k must be >= 1".into()));
    }
    if cfg.stagnation_limit == 0 {
        return Err(SearchError::Config("stagnation limit must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Permutation::random(inst.size(), &mut rng);
    let (mut cur, mut f) = local_search(inst, start, &mut rng)?;

    let mut trace = RunTrace::default();
    let mut index = HashMap::new();
    let mut cur_id = trace.intern(&mut index, &cur, f);
    let target_met = |f: Fitness| cfg.target.is_some_and(|t| f <= t);
    let mut iterations = 0u64;
    let mut stagnant = 0u64;
    let mut termination = None;
    while termination.is_none() {
        if target_met(f) {
            termination = Some(Termination::TargetReached);
            break;
        }
        if stagnant >= cfg.stagnation_limit {
            termination = Some(Termination::Stagnation);
            break;
        }
        iterations += 1;
        let kicked = perturb(&cur, cfg.k, &mut rng)?;
        let (opt, fo) = local_search(inst, kicked, &mut rng)?;
        if fo < f {
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        if fo <= f {
            let id = trace.intern(&mut index, &opt, fo);
            trace.transitions.push((cur_id, id));
            cur = opt;
            f = fo;
            cur_id = id;
        }
    }
    Ok((
        trace,
        RunResult {
            best: f,
            iterations,
            termination: termination.unwrap(),
        },
    ))
}

#[derive(Clone, Debug)]
pub struct RotsConfig {
    /// Iterations a reversed assignment stays forbidden after a move.
    pub tenure: u64,
    /// Assignments not realized for this many iterations are forced.
    pub aspiration: u64,
    pub max_iterations: u64,
    pub target: Option<Fitness>,
    pub seed: u64,
}

impl RotsConfig {
    /// Taillard's published parameterization: tenure `8n`, aspiration `5n^2`.
    pub fn classic(n: usize, max_iterations: u64, target: Option<Fitness>, seed: u64) -> Self {
        RotsConfig {
            tenure: 8 * n as u64,
            aspiration: 5 * (n as u64) * (n as u64),
            max_iterations,
            target,
            seed,
        }
    }
}

/// Robust tabu search. Every iteration scans all swaps and applies the best
/// one that is either aspired (its assignments were not realized within the
/// aspiration window, or it improves on the best solution found) or not
/// tabu; aspired moves take precedence over merely authorized ones. After a
/// move, returning each swapped facility to the location it just left is
/// forbidden for `tenure` iterations.
pub fn run_rots(inst: &QapInstance, cfg: &RotsConfig) -> Result<RunResult, SearchError> {
    let n = inst.size();
    if n < 2 {
        return Err(SearchError::Config("instance must have size >= 2".into()));
    }
    if cfg.max_iterations > i64::MAX as u64 / 2 {
        return Err(SearchError::Config("iteration budget too large".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = Permutation::random(n, &mut rng);
    let mut f = inst.evaluate(&s)?;
    let mut best = f;
    let target_met = |f: Fitness| cfg.target.is_some_and(|t| f <= t);
    if target_met(best) {
        return Ok(RunResult {
            best,
            iterations: 0,
            termination: Termination::TargetReached,
        });
    }
    let tenure = cfg.tenure as i64;
    let aspiration = cfg.aspiration as i64;
    // tabu_until[fac * n + loc]: first iteration at which placing `fac` back
    // on `loc` is allowed again. last_seen[fac * n + loc]: latest iteration
    // at which `fac` occupied `loc`.
    let mut tabu_until = vec![0i64; n * n];
    let mut last_seen = vec![i64::MIN; n * n];
    for iter in 0..cfg.max_iterations as i64 {
        for fac in 0..n {
            last_seen[fac * n + s.location_of(fac)] = iter;
        }
        let mut chosen: Option<(usize, usize, Fitness)> = None;
        let mut best_cand = Fitness(i64::MAX);
        let mut already_aspired = false;
        for i in 0..n {
            let li = s.location_of(i);
            for j in i + 1..n {
                let lj = s.location_of(j);
                let cand = inst.delta(&s, f, i, j)?;
                let authorized = tabu_until[i * n + lj] <= iter || tabu_until[j * n + li] <= iter;
                let aspired = last_seen[i * n + lj] < iter - aspiration
                    || last_seen[j * n + li] < iter - aspiration
                    || cand < best;
                let take = (aspired && !already_aspired)
                    || (aspired && already_aspired && cand < best_cand)
                    || (!aspired && !already_aspired && authorized && cand < best_cand);
                if take {
                    chosen = Some((i, j, cand));
                    best_cand = cand;
                    if aspired {
                        already_aspired = true;
                    }
                }
            }
        }
        if let Some((i, j, cand)) = chosen {
            let old_li = s.location_of(i);
            let old_lj = s.location_of(j);
            s.swap(i, j);
            f = cand;
            tabu_until[i * n + old_li] = iter + 1 + tenure;
            tabu_until[j * n + old_lj] = iter + 1 + tenure;
            if f < best {
                best = f;
            }
            if target_met(best) {
                return Ok(RunResult {
                    best,
                    iterations: iter as u64 + 1,
                    termination: Termination::TargetReached,
                });
            }
        }
    }
    Ok(RunResult {
        best,
        iterations: cfg.max_iterations,
        termination: Termination::IterationBudget,
    })
}

/// Mean best fitness across runs divided by the best-known value; 1.0 means
/// every run hit the best-known solution.
pub fn performance_gap(best: &[Fitness], best_known: Fitness) -> Result<f64, SearchError> {
    if best.is_empty() {
        return Err(SearchError::Config("no run results".into()));
    }
    if best_known.0 <= 0 {
        return Err(SearchError::Config(format!(
            "best-known value must be positive, got {best_known}"
        )));
    }
    let mean = best.iter().map(|f| f.0 as f64).sum::<f64>() / best.len() as f64;
    Ok(mean / best_known.0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> QapInstance {
        QapInstance::parse("2 0 1 1 0 0 2 2 0", "two").unwrap()
    }

    fn random_instance(n: usize, seed: u64) -> QapInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = n * n;
        let mut a = vec![0i64; dim];
        let mut b = vec![0i64; dim];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    a[i * n + j] = rng.random_range(0..50);
                    b[i * n + j] = rng.random_range(0..50);
                }
            }
        }
        QapInstance::new(&format!("rand{n}-{seed}"), n, a, b).unwrap()
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn perturbation_strengths() {
        assert_eq!(k_low(12), 2);
        assert_eq!(k_high(12), 9);
        assert_eq!(k_low(4), 1);
        assert_eq!(k_high(4), 3);
        assert_eq!(k_low(100), 13);
        assert_eq!(k_high(100), 75);
    }

    #[test]
    fn local_search_reaches_local_optimum() {
        let inst = random_instance(7, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let start = Permutation::random(7, &mut rng);
        let (s, f) = local_search(&inst, start, &mut rng).unwrap();
        assert_eq!(inst.evaluate(&s).unwrap(), f);
        for i in 0..7 {
            for j in i + 1..7 {
                let mut t = s.clone();
                t.swap(i, j);
                assert!(inst.evaluate(&t).unwrap() >= f, "swap {i},{j} improves");
            }
        }
    }

    #[test]
    fn perturb_draws_uniform_distinct_swaps() {
        // With n = 4 there are 6 distinct transpositions; over 60000 draws
        // each should appear close to 10000 times.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let id = Permutation::identity(4);
        let mut counts = HashMap::new();
        for _ in 0..60000 {
            let p = perturb(&id, 1, &mut rng).unwrap();
            assert_ne!(p, id);
            *counts.entry(p).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            assert!((c as i64 - 10000).abs() < 500, "count {c} far from uniform");
        }
    }

    #[test]
    fn perturb_rejects_bad_config() {
        let id = Permutation::identity(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(perturb(&id, 0, &mut rng).is_err());
        assert!(perturb(&Permutation::identity(1), 1, &mut rng).is_err());
    }

    #[test]
    fn ils_hits_target_on_trivial_instance() {
        let inst = two();
        let cfg = IlsConfig {
            k: 1,
            stagnation_limit: 10,
            target: Some(Fitness(4)),
            seed: 1,
        };
        let (trace, result) = run_ils(&inst, &cfg).unwrap();
        assert_eq!(result.termination, Termination::TargetReached);
        assert_eq!(result.iterations, 0);
        assert_eq!(result.best, Fitness(4));
        assert_eq!(trace.optima.len(), 1);
    }

    #[test]
    fn ils_trace_is_monotone_and_consistent() {
        let inst = random_instance(8, 23);
        let cfg = IlsConfig {
            k: 2,
            stagnation_limit: 60,
            target: None,
            seed: 99,
        };
        let (trace, result) = run_ils(&inst, &cfg).unwrap();
        assert_eq!(result.termination, Termination::Stagnation);
        assert!(!trace.optima.is_empty());
        for (s, f) in &trace.optima {
            assert_eq!(inst.evaluate(s).unwrap(), *f);
        }
        let mut best_seen = trace.optima[0].1;
        for &(from, to) in &trace.transitions {
            let ff = trace.optima[from as usize].1;
            let ft = trace.optima[to as usize].1;
            assert!(ft <= ff, "worsening transition recorded");
            best_seen = best_seen.min(ft);
        }
        assert_eq!(best_seen, result.best);
    }

    #[test]
    fn ils_is_deterministic() {
        let inst = random_instance(8, 23);
        let cfg = IlsConfig {
            k: 2,
            stagnation_limit: 40,
            target: None,
            seed: 7,
        };
        let (t1, r1) = run_ils(&inst, &cfg).unwrap();
        let (t2, r2) = run_ils(&inst, &cfg).unwrap();
        assert_eq!(t1.optima, t2.optima);
        assert_eq!(t1.transitions, t2.transitions);
        assert_eq!(r1.best, r2.best);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn rots_hits_target_on_trivial_instance() {
        let inst = two();
        let cfg = RotsConfig::classic(2, 100, Some(Fitness(4)), 3);
        let result = run_rots(&inst, &cfg).unwrap();
        assert_eq!(result.termination, Termination::TargetReached);
        assert!(result.iterations <= 1);
    }

    #[test]
    fn rots_finds_brute_force_optimum() {
        let inst = random_instance(5, 77);
        let mut best = Fitness(i64::MAX);
        let mut perm = vec![0u16, 1, 2, 3, 4];
        // Heap's algorithm over all 120 permutations.
        fn heaps(k: usize, arr: &mut Vec<u16>, inst: &QapInstance, best: &mut Fitness) {
            if k == 1 {
                let p = Permutation::new(arr.clone()).unwrap();
                *best = (*best).min(inst.evaluate(&p).unwrap());
                return;
            }
            for i in 0..k {
                heaps(k - 1, arr, inst, best);
                if k % 2 == 0 {
                    arr.swap(i, k - 1);
                } else {
                    arr.swap(0, k - 1);
                }
            }
        }
        heaps(5, &mut perm, &inst, &mut best);
        let cfg = RotsConfig::classic(5, 5_000, None, 9);
        let result = run_rots(&inst, &cfg).unwrap();
        assert_eq!(result.best, best);
        assert_eq!(result.termination, Termination::IterationBudget);
    }

    #[test]
    fn rots_is_deterministic() {
        let inst = random_instance(6, 5);
        let cfg = RotsConfig::classic(6, 500, None, 21);
        let r1 = run_rots(&inst, &cfg).unwrap();
        let r2 = run_rots(&inst, &cfg).unwrap();
        assert_eq!(r1.best, r2.best);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn gap_is_mean_over_best_known() {
        let gaps = [Fitness(110), Fitness(100), Fitness(120)];
        let g = performance_gap(&gaps, Fitness(100)).unwrap();
        assert!((g - 1.1).abs() < 1e-12);
        assert!(performance_gap(&[], Fitness(1)).is_err());
        assert!(performance_gap(&gaps, Fitness(0)).is_err());
    }
}
