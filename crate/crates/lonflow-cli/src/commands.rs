//! Subcommand implementations. Parallel work is collected by index and
//! assembled single-threaded, so output bytes never depend on `--jobs`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lonflow::analysis::{correlation_report, scc_aggregate, FeatureRow, FeatureTable};
use lonflow::laplacian::{build_laplacian, compute_gamma, WeightMode};
use lonflow::lon::{build_lon, Lon, Perturbation};
use lonflow::metrics::{compute_features, LonFeatures};
use lonflow::qap::{load_best_known, Fitness, Permutation, QapInstance};
use lonflow::search::{
    derive_seed, k_high, k_low, performance_gap, run_ils, run_rots, IlsConfig, RotsConfig,
    RunTrace,
};
use lonflow::viz::export_flow_dot;

use crate::config::Config;
use crate::{
    Algorithm, Cli, CliError, Command, CorrelateArgs, ExportFeaturesArgs, ExtractLonArgs, KMode,
    KMode::{High, Low},
    MetricsArgs, Mode, Profile, RunPerfArgs, SccTableArgs, VizArgs,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl std::fmt::Display) -> CliError {
    CliError::Data(msg.to_string())
}

impl Mode {
    fn weight_mode(self) -> WeightMode {
        match self {
            Mode::Weighted => WeightMode::Weighted,
            Mode::Binarized => WeightMode::Binarized,
        }
    }
    fn name(self) -> &'static str {
        match self {
            Mode::Weighted => "weighted",
            Mode::Binarized => "binarized",
        }
    }
}

impl KMode {
    fn name(self) -> &'static str {
        match self {
            Low => "low",
            High => "high",
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let mut jobs = cli.jobs;
    cfg.fill("jobs", &mut jobs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| data(format!("cannot start worker pool: {e}")))?;

    match cli.command {
        Command::ExtractLon(a) => cmd_extract_lon(a, &mut cfg, &pool),
        Command::Metrics(a) => cmd_metrics(a, &mut cfg, &pool),
        Command::RunPerf(a) => cmd_run_perf(a, &mut cfg, &pool),
        Command::Correlate(a) => cmd_correlate(a, &mut cfg),
        Command::Viz(a) => cmd_viz(a, &mut cfg),
        Command::SccTable(a) => cmd_scc_table(a, &mut cfg, &pool),
        Command::ExportFeatures(a) => cmd_export_features(a, &mut cfg, &pool),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| data(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn provenance(command: &str, settings: &[(&str, String)]) -> String {
    let mut s = format!("# lonflow {}\n# command: {command}\n", env!("CARGO_PKG_VERSION"));
    for (key, value) in settings {
        let _ = writeln!(s, "# {key}: {value}");
    }
    s
}

/// Expand directories into their `*.lon` files (sorted by name); plain
/// files pass through in argument order.
fn collect_lon_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p)
                .map_err(|e| data(format!("cannot read directory {}: {e}", p.display())))?;
            let mut inside: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x == "lon"))
                .collect();
            inside.sort();
            files.extend(inside);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(data(format!("no such file or directory: {}", p.display())));
        }
    }
    Ok(files)
}

fn load_lons(pool: &rayon::ThreadPool, files: &[PathBuf]) -> Result<Vec<Lon>, CliError> {
    pool.install(|| {
        files
            .par_iter()
            .map(|p| Lon::load(p).map_err(|e| data(format!("{}: {e}", p.display()))))
            .collect()
    })
}

fn na<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

// ---------------------------------------------------------------- extract

fn cmd_extract_lon(
    mut a: ExtractLonArgs,
    cfg: &mut Config,
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    cfg.fill("instance", &mut a.instance)?;
    cfg.fill("k-mode", &mut a.k_mode)?;
    cfg.fill("runs", &mut a.runs)?;
    cfg.fill("stagnation", &mut a.stagnation)?;
    cfg.fill("seed", &mut a.seed)?;
    cfg.fill("profile", &mut a.profile)?;
    cfg.fill_flag("store-perms", &mut a.store_perms)?;
    cfg.fill("out", &mut a.out)?;
    cfg.ensure_consumed()?;

    let instance = a.instance.ok_or_else(|| usage("--instance is required"))?;
    let k_mode = a.k_mode.ok_or_else(|| usage("--k-mode is required"))?;
    let out = a.out.ok_or_else(|| usage("--out is required"))?;
    let profile = a.profile.unwrap_or(Profile::Desk);
    let runs = a.runs.unwrap_or(profile.runs());
    let stagnation = a.stagnation.unwrap_or(profile.stagnation());
    let seed = a.seed.unwrap_or(0);
    if runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }

    let inst = QapInstance::from_file(&instance)?;
    let n = inst.size();
    let k = match k_mode {
        Low => k_low(n),
        High => k_high(n),
    };
    let perturbation = match k_mode {
        Low => Perturbation::Low,
        High => Perturbation::High,
    };

    let traces: Vec<RunTrace> = if n == 1 {
        // No swap neighborhood exists; the single assignment is the optimum.
        let p = Permutation::identity(1);
        let f = inst.evaluate(&p)?;
        vec![
            RunTrace {
                optima: vec![(p, f)],
                transitions: vec![],
            };
            runs as usize
        ]
    } else {
        pool.install(|| {
            (0..runs)
                .into_par_iter()
                .map(|r| {
                    let run_cfg = IlsConfig {
                        k,
                        stagnation_limit: stagnation,
                        target: None,
                        seed: derive_seed(seed, r),
                    };
                    run_ils(&inst, &run_cfg).map(|(trace, _)| trace)
                })
                .collect::<Result<Vec<_>, _>>()
        })?
    };

    let mut lon = build_lon(inst.name(), perturbation, &traces)?;
    lon.meta = vec![
        ("tool".into(), format!("lonflow {}", env!("CARGO_PKG_VERSION"))),
        ("command".into(), "extract-lon".into()),
        ("instance".into(), inst.name().to_string()),
        ("n".into(), n.to_string()),
        ("k_mode".into(), k_mode.name().into()),
        ("k".into(), k.to_string()),
        ("runs".into(), runs.to_string()),
        ("stagnation".into(), stagnation.to_string()),
        ("seed".into(), seed.to_string()),
        ("profile".into(), profile.name().into()),
    ];
    if !a.store_perms {
        lon.strip_permutations();
    }
    lon.save(&out, a.store_perms)?;
    Ok(())
}

// ---------------------------------------------------------------- metrics

const METRIC_HEADER: &str = "instance,perturbation,n_local,n_global,n_sources,n_sinks,\
weak_components,scc_count,scc_nodes,scc_max_size,scc_mean_size,scc_node_ratio,global_flow,\
pagerank_best,pagerank_fitness,best_matches_best_known,i1,i2,i3,i4,i5,d1,d2,d3,d4,d5";

fn metric_record(f: &LonFeatures) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        f.name,
        f.perturbation,
        f.n_local,
        na(f.n_global),
        f.n_sources,
        f.n_sinks,
        f.weak_components,
        f.scc.count,
        f.scc.member_count,
        f.scc.max_size,
        na(f.scc.mean_size),
        f.scc.node_ratio,
        na(f.global_flow),
        f.pagerank_mass_at_best,
        f.pagerank_fitness_weighted,
        na(f.best_matches_best_known),
        f.flow.i1,
        f.flow.i2,
        na(f.flow.i3),
        na(f.flow.i4),
        f.flow.i5,
        f.flow.d1,
        f.flow.d2,
        na(f.flow.d3),
        na(f.flow.d4),
        f.flow.d5,
    )
}

fn features_for(
    pool: &rayon::ThreadPool,
    lons: &[Lon],
    mode: WeightMode,
    damping: f64,
    best_known: &BTreeMap<String, Fitness>,
) -> Result<Vec<LonFeatures>, CliError> {
    pool.install(|| {
        lons.par_iter()
            .map(|lon| {
                compute_features(lon, mode, damping, best_known.get(&lon.name).copied())
                    .map_err(|e| CliError::from(e_with_name(e, &lon.name)))
            })
            .collect()
    })
}

fn e_with_name(e: lonflow::metrics::MetricsError, name: &str) -> lonflow::metrics::MetricsError {
    use lonflow::metrics::MetricsError;
    match e {
        MetricsError::Input(m) => MetricsError::Input(format!("{name}: {m}")),
        MetricsError::Numerical(m) => MetricsError::Numerical(format!("{name}: {m}")),
        other => other,
    }
}

fn cmd_metrics(
    mut a: MetricsArgs,
    cfg: &mut Config,
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    cfg.fill("mode", &mut a.mode)?;
    cfg.fill("damping", &mut a.damping)?;
    cfg.fill("best-known", &mut a.best_known)?;
    cfg.fill("gamma-dump", &mut a.gamma_dump)?;
    cfg.fill("out", &mut a.out)?;
    cfg.ensure_consumed()?;

    if a.paths.is_empty() {
        return Err(usage("give at least one network file or directory"));
    }
    let mode = a.mode.unwrap_or(Mode::Weighted);
    let damping = a.damping.unwrap_or(0.85);
    let best_known = match &a.best_known {
        Some(p) => load_best_known(p)?,
        None => BTreeMap::new(),
    };

    let files = collect_lon_paths(&a.paths)?;
    if files.is_empty() {
        return write_output(a.out.as_deref(), "");
    }
    let lons = load_lons(pool, &files)?;
    let feats = features_for(pool, &lons, mode.weight_mode(), damping, &best_known)?;

    if let Some(dir) = &a.gamma_dump {
        std::fs::create_dir_all(dir)
            .map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
        for lon in &lons {
            let rw = build_laplacian(lon, mode.weight_mode())?;
            let g = compute_gamma(&rw)?.to_dense();
            let mut s = provenance(
                "metrics --gamma-dump",
                &[
                    ("network", lon.name.clone()),
                    ("perturbation", lon.perturbation.to_string()),
                    ("mode", mode.name().into()),
                ],
            );
            for i in 0..g.nrows() {
                let row: Vec<String> = (0..g.ncols()).map(|j| g[(i, j)].to_string()).collect();
                let _ = writeln!(s, "{}", row.join(","));
            }
            let path = dir.join(format!("{}_{}.gamma.csv", lon.name, lon.perturbation));
            std::fs::write(&path, s)
                .map_err(|e| data(format!("cannot write {}: {e}", path.display())))?;
        }
    }

    let mut outbuf = provenance(
        "metrics",
        &[
            ("mode", mode.name().into()),
            ("damping", damping.to_string()),
        ],
    );
    let _ = writeln!(outbuf, "{METRIC_HEADER}");
    for f in &feats {
        let _ = writeln!(outbuf, "{}", metric_record(f));
    }
    write_output(a.out.as_deref(), &outbuf)
}

// ---------------------------------------------------------------- run-perf

fn cmd_run_perf(
    mut a: RunPerfArgs,
    cfg: &mut Config,
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    cfg.fill("instance", &mut a.instance)?;
    cfg.fill("algorithm", &mut a.algorithm)?;
    cfg.fill("runs", &mut a.runs)?;
    cfg.fill("seed", &mut a.seed)?;
    cfg.fill("best-known", &mut a.best_known)?;
    cfg.fill("k-mode", &mut a.k_mode)?;
    cfg.fill("stagnation", &mut a.stagnation)?;
    cfg.fill("iterations", &mut a.iterations)?;
    cfg.fill("profile", &mut a.profile)?;
    cfg.fill("out", &mut a.out)?;
    cfg.ensure_consumed()?;

    let instance = a.instance.ok_or_else(|| usage("--instance is required"))?;
    let algorithm = a.algorithm.ok_or_else(|| usage("--algorithm is required"))?;
    let best_known_path = a
        .best_known
        .ok_or_else(|| usage("--best-known is required (the gap is relative to it)"))?;
    let profile = a.profile.unwrap_or(Profile::Desk);
    let runs = a.runs.unwrap_or(profile.runs());
    let seed = a.seed.unwrap_or(0);
    let k_mode = a.k_mode.unwrap_or(Low);
    let stagnation = a.stagnation.unwrap_or(profile.stagnation());
    let iterations = a.iterations.unwrap_or(profile.rots_iterations());
    if runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }

    let inst = QapInstance::from_file(&instance)?;
    let table = load_best_known(&best_known_path)?;
    let best = *table.get(inst.name()).ok_or_else(|| {
        data(format!(
            "{}: no best-known entry for `{}`",
            best_known_path.display(),
            inst.name()
        ))
    })?;
    if best.0 <= 0 {
        return Err(data(format!(
            "best-known value for `{}` is {best}; the gap is only defined for positive optima",
            inst.name()
        )));
    }

    let n = inst.size();
    let bests: Vec<Fitness> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let run_seed = derive_seed(seed, r);
                match algorithm {
                    Algorithm::Ils => {
                        let k = match k_mode {
                            Low => k_low(n),
                            High => k_high(n),
                        };
                        let run_cfg = IlsConfig {
                            k,
                            stagnation_limit: stagnation,
                            target: Some(best),
                            seed: run_seed,
                        };
                        run_ils(&inst, &run_cfg).map(|(_, res)| res.best)
                    }
                    Algorithm::Rots => {
                        let run_cfg = RotsConfig::classic(n, iterations, Some(best), run_seed);
                        run_rots(&inst, &run_cfg).map(|res| res.best)
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let gap = performance_gap(&bests, best)?;

    let algo_name = match algorithm {
        Algorithm::Ils => "ils",
        Algorithm::Rots => "rots",
    };
    let mut settings = vec![
        ("instance", inst.name().to_string()),
        ("n", n.to_string()),
        ("algorithm", algo_name.to_string()),
        ("profile", profile.name().to_string()),
        ("best_known", best.to_string()),
    ];
    match algorithm {
        Algorithm::Ils => {
            settings.push(("k_mode", k_mode.name().to_string()));
            settings.push(("stagnation", stagnation.to_string()));
        }
        Algorithm::Rots => settings.push(("iterations", iterations.to_string())),
    }
    let mut outbuf = provenance("run-perf", &settings);
    let _ = writeln!(outbuf, "instance,algorithm,runs,seed,gap");
    let _ = writeln!(outbuf, "{},{algo_name},{runs},{seed},{gap}", inst.name());
    write_output(a.out.as_deref(), &outbuf)
}

/// Performance records keyed by instance: `(ils_gap, rots_gap)`.
fn load_perf(path: &Path) -> Result<BTreeMap<String, (Option<f64>, Option<f64>)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| data(format!("{}: empty performance file", path.display())))?;
    if header != "instance,algorithm,runs,seed,gap" {
        return Err(data(format!(
            "{}: unrecognized performance header `{header}`",
            path.display()
        )));
    }
    let mut map: BTreeMap<String, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(data(format!(
                "{}: expected 5 fields, got {}: `{line}`",
                path.display(),
                fields.len()
            )));
        }
        let gap: f64 = fields[4]
            .parse()
            .map_err(|e| data(format!("{}: bad gap `{}`: {e}", path.display(), fields[4])))?;
        let entry = map.entry(fields[0].to_string()).or_default();
        let slot = match fields[1] {
            "ils" => &mut entry.0,
            "rots" => &mut entry.1,
            other => {
                return Err(data(format!(
                    "{}: unknown algorithm `{other}`",
                    path.display()
                )))
            }
        };
        if slot.replace(gap).is_some() {
            return Err(data(format!(
                "{}: duplicate record for `{}` / {}",
                path.display(),
                fields[0],
                fields[1]
            )));
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------- correlate

fn cmd_correlate(mut a: CorrelateArgs, cfg: &mut Config) -> Result<(), CliError> {
    cfg.fill("features", &mut a.features)?;
    cfg.fill("perf", &mut a.perf)?;
    cfg.fill("out", &mut a.out)?;
    cfg.fill_flag("text", &mut a.text)?;
    cfg.ensure_consumed()?;

    let features_path = a.features.ok_or_else(|| usage("--features is required"))?;
    let text = std::fs::read_to_string(&features_path)
        .map_err(|e| data(format!("cannot read {}: {e}", features_path.display())))?;
    let mut table = FeatureTable::from_csv(&text)
        .map_err(|e| data(format!("{}: {e}", features_path.display())))?;

    if let Some(perf_path) = &a.perf {
        let perf = load_perf(perf_path)?;
        for row in &mut table.rows {
            if let Some((ils, rots)) = perf.get(&row.instance) {
                if ils.is_some() {
                    row.ils_gap = *ils;
                }
                if rots.is_some() {
                    row.rots_gap = *rots;
                }
            }
        }
    }

    for pert in [Perturbation::Low, Perturbation::High] {
        let regime: Vec<_> = table.rows.iter().filter(|r| r.perturbation == pert).collect();
        if regime.is_empty() {
            continue;
        }
        for (name, get) in [
            ("ils_gap", (|r: &&FeatureRow| r.ils_gap) as fn(&&FeatureRow) -> Option<f64>),
            ("rots_gap", |r: &&FeatureRow| r.rots_gap),
        ] {
            let have = regime.iter().filter(|r| get(r).is_some()).count();
            if have < 3 {
                eprintln!(
                    "warning: {pert}/{name}: only {have} joined rows; correlations reported as NA"
                );
            }
        }
    }

    let report = correlation_report(&table);
    if a.text {
        print!("{}", report.to_text());
        if let Some(out) = &a.out {
            let body = provenance("correlate", &[]) + &report.to_csv();
            write_output(Some(out), &body)?;
        }
        Ok(())
    } else {
        let body = provenance("correlate", &[]) + &report.to_csv();
        write_output(a.out.as_deref(), &body)
    }
}

// ---------------------------------------------------------------- viz

fn cmd_viz(mut a: VizArgs, cfg: &mut Config) -> Result<(), CliError> {
    cfg.fill("out", &mut a.out)?;
    cfg.fill("layout-json", &mut a.layout_json)?;
    cfg.ensure_consumed()?;

    let path = a.lon.ok_or_else(|| usage("give a network file to render"))?;
    let lon = Lon::load(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let rendered = export_flow_dot(&lon);
    if let Some(json_path) = &a.layout_json {
        std::fs::write(json_path, &rendered.layout)
            .map_err(|e| data(format!("cannot write {}: {e}", json_path.display())))?;
    }
    write_output(a.out.as_deref(), &rendered.dot)
}

// ---------------------------------------------------------------- scc-table

fn cmd_scc_table(
    mut a: SccTableArgs,
    cfg: &mut Config,
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    cfg.fill("out", &mut a.out)?;
    cfg.ensure_consumed()?;

    if a.paths.is_empty() {
        return Err(usage("give at least one network file or directory"));
    }
    let files = collect_lon_paths(&a.paths)?;
    if files.is_empty() {
        return write_output(a.out.as_deref(), "");
    }
    let lons = load_lons(pool, &files)?;
    let aggregates = scc_aggregate(&lons);

    let mut outbuf = provenance("scc-table", &[("networks", lons.len().to_string())]);
    let _ = writeln!(
        outbuf,
        "perturbation,networks,fraction_with_scc,scc_count_max,scc_count_mean,\
scc_count_mean_with_scc,scc_nodes_max,scc_nodes_mean,scc_nodes_mean_with_scc,\
node_ratio_max,node_ratio_mean,node_ratio_mean_with_scc"
    );
    for agg in &aggregates {
        let _ = writeln!(
            outbuf,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            agg.perturbation,
            agg.networks,
            agg.fraction_with_scc,
            agg.max_count,
            agg.mean_count_all,
            na(agg.mean_count_with),
            agg.max_members,
            agg.mean_members_all,
            na(agg.mean_members_with),
            agg.max_ratio,
            agg.mean_ratio_all,
            na(agg.mean_ratio_with),
        );
    }
    write_output(a.out.as_deref(), &outbuf)
}

// ---------------------------------------------------------------- export

const FEATURE_NAMES: [&str; 22] = [
    "n_local",
    "n_global",
    "n_sources",
    "n_sinks",
    "weak_components",
    "scc_count",
    "scc_nodes",
    "scc_max_size",
    "scc_node_ratio",
    "global_flow",
    "pagerank_best",
    "pagerank_fitness",
    "i1",
    "i2",
    "i3",
    "i4",
    "i5",
    "d1",
    "d2",
    "d3",
    "d4",
    "d5",
];

fn feature_values(f: &LonFeatures) -> Vec<Option<f64>> {
    vec![
        Some(f.n_local as f64),
        f.n_global.map(|v| v as f64),
        Some(f.n_sources as f64),
        Some(f.n_sinks as f64),
        Some(f.weak_components as f64),
        Some(f.scc.count as f64),
        Some(f.scc.member_count as f64),
        Some(f.scc.max_size as f64),
        Some(f.scc.node_ratio),
        f.global_flow,
        Some(f.pagerank_mass_at_best),
        Some(f.pagerank_fitness_weighted),
        Some(f.flow.i1),
        Some(f.flow.i2),
        f.flow.i3,
        f.flow.i4,
        Some(f.flow.i5),
        Some(f.flow.d1),
        Some(f.flow.d2),
        f.flow.d3,
        f.flow.d4,
        Some(f.flow.d5),
    ]
}

fn cmd_export_features(
    mut a: ExportFeaturesArgs,
    cfg: &mut Config,
    pool: &rayon::ThreadPool,
) -> Result<(), CliError> {
    cfg.fill("mode", &mut a.mode)?;
    cfg.fill("damping", &mut a.damping)?;
    cfg.fill("best-known", &mut a.best_known)?;
    cfg.fill("perf", &mut a.perf)?;
    cfg.fill("out", &mut a.out)?;
    cfg.ensure_consumed()?;

    if a.paths.is_empty() {
        return Err(usage("give at least one network file or directory"));
    }
    let mode = a.mode.unwrap_or(Mode::Weighted);
    let damping = a.damping.unwrap_or(0.85);
    let best_known = match &a.best_known {
        Some(p) => load_best_known(p)?,
        None => BTreeMap::new(),
    };
    let perf = match &a.perf {
        Some(p) => load_perf(p)?,
        None => BTreeMap::new(),
    };

    let files = collect_lon_paths(&a.paths)?;
    if files.is_empty() {
        return write_output(a.out.as_deref(), "");
    }
    let lons = load_lons(pool, &files)?;
    let feats = features_for(pool, &lons, mode.weight_mode(), damping, &best_known)?;

    let mut table = FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect())?;
    for f in &feats {
        let (ils_gap, rots_gap) = perf.get(&f.name).copied().unwrap_or((None, None));
        table.push_row(FeatureRow {
            instance: f.name.clone(),
            perturbation: f.perturbation,
            values: feature_values(f),
            ils_gap,
            rots_gap,
        })?;
    }

    let body = provenance(
        "export-features",
        &[
            ("mode", mode.name().into()),
            ("damping", damping.to_string()),
            ("networks", lons.len().to_string()),
        ],
    ) + &table.to_csv();
    write_output(a.out.as_deref(), &body)
}
