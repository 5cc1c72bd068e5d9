//! Shared acceptance corpus: deterministic QAP instances in library plain
//! format, desk-profile network extractions, and exhaustively solved small
//! instances. Built once per test binary and reused by every criterion.

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use lonflow::lon::{build_lon, Lon, Perturbation};
use lonflow::qap::{Fitness, Permutation, QapInstance};
use lonflow::search::{derive_seed, k_high, k_low, run_ils, IlsConfig};

pub const DESK_RUNS: u64 = 30;
pub const DESK_STAGNATION: u64 = 1_000;
pub const EXTRACTION_SEED: u64 = 7;

pub struct SmallInstance {
    pub instance: QapInstance,
    pub path: PathBuf,
    pub optimum: Fitness,
}

pub struct Corpus {
    /// Mid-size instances with heavy fitness neutrality.
    pub instances: Vec<QapInstance>,
    /// Desk-profile networks, one per (instance, regime), in instance order
    /// with low before high.
    pub lons: Vec<(Perturbation, Lon)>,
    /// Instances small enough to solve exhaustively, written to disk so the
    /// binary can be driven over them.
    pub small: Vec<SmallInstance>,
}

fn matrix_text(m: &[Vec<i64>]) -> String {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn qap_text(a: &[Vec<i64>], b: &[Vec<i64>]) -> String {
    format!("{}\n\n{}\n\n{}\n", a.len(), matrix_text(a), matrix_text(b))
}

pub fn manhattan_grid(w: usize, h: usize) -> Vec<Vec<i64>> {
    let n = w * h;
    let mut d = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (xi, yi) = (i % w, i / w);
            let (xj, yj) = (j % w, j / w);
            d[i][j] = (xi.abs_diff(xj) + yi.abs_diff(yj)) as i64;
        }
    }
    d
}

/// Symmetric flows drawn (without replacement) from a fixed multiset: half
/// the facility pairs get zero flow, the rest cycle through `1..=levels`.
/// Every instance of a family therefore shares the same flow histogram,
/// which keeps the metric scales comparable, and the small value set packs
/// the landscape with fitness ties.
fn shuffled_multiset_flows(n: usize, levels: i64, seed: u64) -> Vec<Vec<i64>> {
    let pairs = n * (n - 1) / 2;
    let mut vals: Vec<i64> = (0..pairs)
        .map(|t| {
            if t < pairs / 2 {
                0
            } else {
                (t as i64) % levels + 1
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..vals.len()).rev() {
        let j = rng.random_range(0..=i);
        vals.swap(i, j);
    }
    let mut a = vec![vec![0i64; n]; n];
    let mut t = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            a[i][j] = vals[t];
            a[j][i] = vals[t];
            t += 1;
        }
    }
    a
}

fn random_matrix(n: usize, lo: i64, hi: i64, seed: u64) -> Vec<Vec<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i][j] = rng.random_range(lo..=hi);
            }
        }
    }
    a
}

pub fn extract_desk_lon(inst: &QapInstance, pert: Perturbation, base_seed: u64) -> Lon {
    let n = inst.size();
    let k = match pert {
        Perturbation::Low => k_low(n),
        Perturbation::High => k_high(n),
    };
    let traces: Vec<_> = (0..DESK_RUNS)
        .into_par_iter()
        .map(|r| {
            let cfg = IlsConfig {
                k,
                stagnation_limit: DESK_STAGNATION,
                target: None,
                seed: derive_seed(base_seed, r),
            };
            run_ils(inst, &cfg).expect("corpus instances are valid").0
        })
        .collect();
    build_lon(inst.name(), pert, &traces).expect("traces are non-empty")
}

/// Exhaustive optimum by enumerating all permutations (Heap's algorithm).
pub fn brute_force_optimum(inst: &QapInstance) -> Fitness {
    let n = inst.size();
    assert!(n <= 8, "exhaustive search is for tiny instances");
    let mut perm: Vec<u16> = (0..n as u16).collect();
    let mut c = vec![0usize; n];
    let eval = |p: &[u16]| {
        inst.evaluate(&Permutation::new(p.to_vec()).unwrap())
            .unwrap()
    };
    let mut best = eval(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Highest 2-class accuracy of a single linear threshold in the plane.
/// Sweeps projection directions by half-degree and tries every cut between
/// consecutive projected points; `-inf` coordinates are legitimate and sort
/// below every finite cut.
pub fn best_linear_accuracy(points: &[(f64, f64, bool)]) -> f64 {
    let mut best = 0.0f64;
    for half_deg in 0..360 {
        let th = (half_deg as f64).to_radians() / 2.0;
        let (c, s) = (th.cos(), th.sin());
        let mut proj: Vec<(f64, bool)> = points
            .iter()
            .map(|&(x, y, label)| (if s == 0.0 { c * x } else { c * x + s * y }, label))
            .collect();
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = proj.len() as f64;
        let positives: usize = proj.iter().filter(|p| p.1).count();
        let mut pos_left = 0usize;
        for i in 0..=proj.len() {
            let neg_left = i - pos_left;
            let pos_side_right = pos_left + (proj.len() - i - (positives - pos_left));
            let pos_side_left = neg_left + (positives - pos_left);
            best = best.max(pos_side_right.max(pos_side_left) as f64 / total);
            if i < proj.len() && proj[i].1 {
                pos_left += 1;
            }
        }
    }
    best
}

fn build_corpus() -> Corpus {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_corpus");
    std::fs::create_dir_all(&root).expect("corpus dir");

    let mut specs: Vec<(String, String)> = Vec::new();
    let grid = manhattan_grid(4, 4);
    for idx in 0..10u64 {
        let a = shuffled_multiset_flows(16, 3, 900 + idx);
        specs.push((format!("net16a_{idx}"), qap_text(&a, &grid)));
    }
    for idx in 0..10u64 {
        let a = shuffled_multiset_flows(16, 2, 1200 + idx);
        specs.push((format!("net16b_{idx}"), qap_text(&a, &grid)));
    }

    let instances: Vec<QapInstance> = specs
        .iter()
        .map(|(name, text)| QapInstance::parse(text, name).expect("valid instance"))
        .collect();

    let jobs: Vec<(usize, Perturbation)> = (0..instances.len())
        .flat_map(|i| [(i, Perturbation::Low), (i, Perturbation::High)])
        .collect();
    let lons: Vec<(Perturbation, Lon)> = jobs
        .into_iter()
        .map(|(i, pert)| (pert, extract_desk_lon(&instances[i], pert, EXTRACTION_SEED)))
        .collect();

    let small_specs = [
        ("tiny5", qap_text(&random_matrix(5, 0, 9, 21), &random_matrix(5, 1, 6, 22))),
        ("tiny6", qap_text(&random_matrix(6, 0, 9, 31), &random_matrix(6, 1, 6, 32))),
    ];
    let small = small_specs
        .into_iter()
        .map(|(name, text)| {
            let path = root.join(format!("{name}.dat"));
            std::fs::write(&path, &text).expect("instance file");
            let instance = QapInstance::parse(&text, name).expect("valid instance");
            let optimum = brute_force_optimum(&instance);
            SmallInstance {
                instance,
                path,
                optimum,
            }
        })
        .collect();

    Corpus {
        instances,
        lons,
        small,
    }
}

pub fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(build_corpus)
}
