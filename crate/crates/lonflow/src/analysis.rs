//! Cross-instance analysis: feature tables keyed by instance and
//! perturbation regime, correlation of features against search performance,
//! and aggregate statistics of strongly connected components.
//!
//! Missing values are explicit throughout (`Option<f64>`, `NA` in CSV);
//! undefined correlations (zero variance, too few pairs) stay missing
//! rather than collapsing to zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::lon::{find_sccs, Lon, Perturbation};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 paired observations, got {0}")]
    TooFew(usize),
    #[error("malformed table: {0}")]
    Schema(String),
}

/// Product-moment correlation; `Ok(None)` when either side has zero
/// variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFew(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx.sqrt() * syy.sqrt())))
}

/// Ranks starting at 1; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: Pearson over tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// One observation: a sampled network identified by instance and
/// perturbation regime, its feature values, and the search performance
/// gaps measured on the same instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub instance: String,
    pub perturbation: Perturbation,
    pub values: Vec<Option<f64>>,
    pub ils_gap: Option<f64>,
    pub rots_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

const RESPONSES: [&str; 2] = ["ils_gap", "rots_gap"];

impl FeatureTable {
    pub fn new(feature_names: Vec<String>) -> Result<Self, AnalysisError> {
        for name in &feature_names {
            if name.is_empty()
                || name.contains(',')
                || name.chars().any(char::is_whitespace)
                || name == "instance"
                || name == "perturbation"
                || RESPONSES.contains(&name.as_str())
            {
                return Err(AnalysisError::Schema(format!(
                    "invalid feature name `{name}`"
                )));
            }
        }
        Ok(FeatureTable {
            feature_names,
            rows: Vec::new(),
        })
    }

    pub fn push_row(&mut self, row: FeatureRow) -> Result<(), AnalysisError> {
        if row.values.len() != self.feature_names.len() {
            return Err(AnalysisError::Schema(format!(
                "row for `{}` has {} values, table has {} features",
                row.instance,
                row.values.len(),
                self.feature_names.len()
            )));
        }
        if row.instance.is_empty() || row.instance.contains(',') {
            return Err(AnalysisError::Schema(format!(
                "invalid instance name `{}`",
                row.instance
            )));
        }
        if self
            .rows
            .iter()
            .any(|r| r.instance == row.instance && r.perturbation == row.perturbation)
        {
            return Err(AnalysisError::Schema(format!(
                "duplicate row for `{}` / {}",
                row.instance, row.perturbation
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, feature: &str) -> Option<Vec<Option<f64>>> {
        let k = self.feature_names.iter().position(|n| n == feature)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// CSV with explicit `NA` for missing values; floats use the shortest
    /// round-trip representation, so export and import are byte-stable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,perturbation");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",ils_gap,rots_gap\n");
        for row in &self.rows {
            write!(out, "{},{}", row.instance, row.perturbation).unwrap();
            for v in row.values.iter().chain([&row.ils_gap, &row.rots_gap]) {
                match v {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`FeatureTable::to_csv`] output; lines starting with `#` are
    /// treated as comments.
    pub fn from_csv(text: &str) -> Result<Self, AnalysisError> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| AnalysisError::Schema("empty table".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let base_ok = cols.len() >= 4
            && cols[0] == "instance"
            && cols[1] == "perturbation"
            && cols[cols.len() - 2] == "ils_gap"
            && cols[cols.len() - 1] == "rots_gap";
        if !base_ok {
            return Err(AnalysisError::Schema(format!(
                "unexpected header `{header}`"
            )));
        }
        let names: Vec<String> = cols[2..cols.len() - 2]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut table = FeatureTable::new(names)?;
        let parse_cell = |cell: &str| -> Result<Option<f64>, AnalysisError> {
            if cell == "NA" {
                return Ok(None);
            }
            cell.parse::<f64>()
                .map(Some)
                .map_err(|_| AnalysisError::Schema(format!("bad numeric cell `{cell}`")))
        };
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(AnalysisError::Schema(format!(
                    "row has {} cells, header has {}",
                    cells.len(),
                    cols.len()
                )));
            }
            let perturbation: Perturbation = cells[1]
                .parse()
                .map_err(|_| AnalysisError::Schema(format!("bad perturbation `{}`", cells[1])))?;
            let values = cells[2..cells.len() - 2]
                .iter()
                .map(|c| parse_cell(c))
                .collect::<Result<Vec<_>, _>>()?;
            table.push_row(FeatureRow {
                instance: cells[0].to_string(),
                perturbation,
                values,
                ils_gap: parse_cell(cells[cells.len() - 2])?,
                rots_gap: parse_cell(cells[cells.len() - 1])?,
            })?;
        }
        Ok(table)
    }
}

/// Component statistics over a collection of networks sharing a
/// perturbation regime. Means come in two flavors: over all networks
/// (component-free ones contributing zero) and over only the networks that
/// have components (`None` when there are none at all).
#[derive(Clone, Debug)]
pub struct SccAggregate {
    pub perturbation: Perturbation,
    pub networks: usize,
    pub fraction_with_scc: f64,
    pub max_count: usize,
    pub mean_count_all: f64,
    pub mean_count_with: Option<f64>,
    pub max_members: usize,
    pub mean_members_all: f64,
    pub mean_members_with: Option<f64>,
    pub max_ratio: f64,
    pub mean_ratio_all: f64,
    pub mean_ratio_with: Option<f64>,
}

pub fn scc_aggregate(lons: &[Lon]) -> Vec<SccAggregate> {
    let mut groups: BTreeMap<Perturbation, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for lon in lons {
        let info = find_sccs(lon);
        groups
            .entry(lon.perturbation)
            .or_default()
            .push((info.count(), info.member_count, info.node_ratio));
    }
    groups
        .into_iter()
        .map(|(perturbation, stats)| {
            let n = stats.len();
            let with: Vec<&(usize, usize, f64)> =
                stats.iter().filter(|(c, _, _)| *c > 0).collect();
            let mean_all = |f: &dyn Fn(&(usize, usize, f64)) -> f64| {
                stats.iter().map(f).sum::<f64>() / n as f64
            };
            let mean_with = |f: &dyn Fn(&(usize, usize, f64)) -> f64| {
                (!with.is_empty())
                    .then(|| with.iter().map(|s| f(s)).sum::<f64>() / with.len() as f64)
            };
            SccAggregate {
                perturbation,
                networks: n,
                fraction_with_scc: with.len() as f64 / n as f64,
                max_count: stats.iter().map(|s| s.0).max().unwrap_or(0),
                mean_count_all: mean_all(&|s| s.0 as f64),
                mean_count_with: mean_with(&|s| s.0 as f64),
                max_members: stats.iter().map(|s| s.1).max().unwrap_or(0),
                mean_members_all: mean_all(&|s| s.1 as f64),
                mean_members_with: mean_with(&|s| s.1 as f64),
                max_ratio: stats.iter().map(|s| s.2).fold(0.0, f64::max),
                mean_ratio_all: mean_all(&|s| s.2),
                mean_ratio_with: mean_with(&|s| s.2),
            }
        })
        .collect()
}

/// Correlation of one feature against one response within one perturbation
/// regime. `pairs` counts complete observations; coefficients are `None`
/// when fewer than 3 pairs exist or a side has zero variance.
#[derive(Clone, Debug)]
pub struct CorrelationCell {
    pub perturbation: Perturbation,
    pub response: String,
    pub feature: String,
    pub pairs: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CorrelationReport {
    pub cells: Vec<CorrelationCell>,
    /// Correlation between the two responses themselves, per regime.
    pub baselines: Vec<CorrelationCell>,
}

fn correlate(
    perturbation: Perturbation,
    response: &str,
    feature: &str,
    xs: &[Option<f64>],
    ys: &[Option<f64>],
) -> CorrelationCell {
    let complete: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter_map(|(x, y)| x.zip(*y))
        .collect();
    let (fx, fy): (Vec<f64>, Vec<f64>) = complete.into_iter().unzip();
    let (pearson, spearman) = if fx.len() < 3 {
        (None, None)
    } else {
        (
            pearson(&fx, &fy).expect("lengths match"),
            spearman(&fx, &fy).expect("lengths match"),
        )
    };
    CorrelationCell {
        perturbation,
        response: response.to_string(),
        feature: feature.to_string(),
        pairs: fx.len(),
        pearson,
        spearman,
    }
}

pub fn correlation_report(table: &FeatureTable) -> CorrelationReport {
    let mut regimes: Vec<Perturbation> = table.rows.iter().map(|r| r.perturbation).collect();
    regimes.sort_unstable();
    regimes.dedup();
    let mut cells = Vec::new();
    let mut baselines = Vec::new();
    for &regime in &regimes {
        let rows: Vec<&FeatureRow> = table
            .rows
            .iter()
            .filter(|r| r.perturbation == regime)
            .collect();
        let responses: [Vec<Option<f64>>; 2] = [
            rows.iter().map(|r| r.ils_gap).collect(),
            rows.iter().map(|r| r.rots_gap).collect(),
        ];
        for (response, ys) in RESPONSES.iter().zip(&responses) {
            for (k, feature) in table.feature_names.iter().enumerate() {
                let xs: Vec<Option<f64>> = rows.iter().map(|r| r.values[k]).collect();
                cells.push(correlate(regime, response, feature, &xs, ys));
            }
        }
        baselines.push(correlate(
            regime,
            "rots_gap",
            "ils_gap",
            &responses[0],
            &responses[1],
        ));
    }
    CorrelationReport { cells, baselines }
}

fn cell_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| v.to_string())
}

impl CorrelationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,perturbation,response,feature,pairs,pearson,spearman\n");
        for (kind, cell) in self
            .cells
            .iter()
            .map(|c| ("feature", c))
            .chain(self.baselines.iter().map(|c| ("baseline", c)))
        {
            writeln!(
                out,
                "{kind},{},{},{},{},{},{}",
                cell.perturbation,
                cell.response,
                cell.feature,
                cell.pairs,
                cell_value(cell.pearson),
                cell_value(cell.spearman),
            )
            .unwrap();
        }
        out
    }

    /// Fixed-width rendering for terminals.
    pub fn to_text(&self) -> String {
        let fmt_coef = |v: Option<f64>| match v {
            Some(v) => format!("{v:+.4}"),
            None => "     NA".to_string(),
        };
        let mut out = String::new();
        let mut regimes: Vec<Perturbation> = self.cells.iter().map(|c| c.perturbation).collect();
        regimes.sort_unstable();
        regimes.dedup();
        for regime in regimes {
            writeln!(out, "perturbation: {regime}").unwrap();
            writeln!(
                out,
                "  {:<28} {:<9} {:>5} {:>8} {:>8}",
                "feature", "response", "pairs", "pearson", "spearman"
            )
            .unwrap();
            for cell in self
                .cells
                .iter()
                .chain(&self.baselines)
                .filter(|c| c.perturbation == regime)
            {
                writeln!(
                    out,
                    "  {:<28} {:<9} {:>5} {:>8} {:>8}",
                    cell.feature,
                    cell.response,
                    cell.pairs,
                    fmt_coef(cell.pearson),
                    fmt_coef(cell.spearman),
                )
                .unwrap();
            }
            out.push('\n');
        }
        out
    }
}
