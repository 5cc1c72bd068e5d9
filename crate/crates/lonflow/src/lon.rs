//! The monotonic local optima network (LON).
//!
//! Nodes are distinct local optima; a directed edge `u -> v` records that a
//! perturbation of `u` followed by local search produced `v` with
//! `f(v) <= f(u)`, and its weight counts how often that transition was
//! accepted across runs. Self-loops (perturbations that fell back into the
//! same optimum) are first-class edges.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::qap::{Fitness, Permutation};
use crate::search::RunTrace;

#[derive(Debug, Error)]
pub enum LonError {
    #[error("{0}")]
    Schema(String),
    #[error("optimum `{perm}` was recorded with fitness {a} and {b}")]
    FitnessConflict { perm: String, a: i64, b: i64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn schema(detail: impl Into<String>) -> LonError {
    LonError::Schema(detail.into())
}

/// Perturbation regime the network was sampled under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Perturbation {
    Low,
    High,
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Perturbation::Low => "low",
            Perturbation::High => "high",
        })
    }
}

impl FromStr for Perturbation {
    type Err = LonError;

    fn from_str(s: &str) -> Result<Self, LonError> {
        match s {
            "low" => Ok(Perturbation::Low),
            "high" => Ok(Perturbation::High),
            other => Err(schema(format!("unknown perturbation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LonNode {
    pub fitness: Fitness,
    /// The underlying assignment; optional because persisted networks may
    /// drop permutations to save space.
    pub perm: Option<Permutation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LonEdge {
    pub from: u32,
    pub to: u32,
    pub weight: u64,
}

/// A sampled local optima network. Edges are kept sorted by `(from, to)`
/// and are unique; parallel observations are merged by summing weights.
#[derive(Clone, Debug)]
pub struct Lon {
    pub name: String,
    pub perturbation: Perturbation,
    /// Free-form provenance, persisted in order.
    pub meta: Vec<(String, String)>,
    nodes: Vec<LonNode>,
    edges: Vec<LonEdge>,
}

impl Lon {
    /// Validates and assembles a network: at least one node, edge endpoints
    /// in range, positive weights, no duplicate edges, and non-worsening
    /// fitness along every edge.
    pub fn new(
        name: &str,
        perturbation: Perturbation,
        nodes: Vec<LonNode>,
        edges: Vec<LonEdge>,
    ) -> Result<Self, LonError> {
        Lon::assemble(name, perturbation, nodes, edges, true)
    }

    fn assemble(
        name: &str,
        perturbation: Perturbation,
        nodes: Vec<LonNode>,
        mut edges: Vec<LonEdge>,
        require_monotone: bool,
    ) -> Result<Self, LonError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(schema(format!("invalid network name `{name}`")));
        }
        if nodes.is_empty() {
            return Err(schema("network has no nodes"));
        }
        let n = nodes.len() as u32;
        edges.sort_by_key(|e| (e.from, e.to));
        for (k, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(schema(format!("edge {}->{} out of range", e.from, e.to)));
            }
            if e.weight == 0 {
                return Err(schema(format!("edge {}->{} has zero weight", e.from, e.to)));
            }
            if k > 0 && (edges[k - 1].from, edges[k - 1].to) == (e.from, e.to) {
                return Err(schema(format!("duplicate edge {}->{}", e.from, e.to)));
            }
            if require_monotone
                && nodes[e.to as usize].fitness > nodes[e.from as usize].fitness
            {
                return Err(schema(format!(
                    "edge {}->{} increases fitness ({} -> {})",
                    e.from, e.to, nodes[e.from as usize].fitness, nodes[e.to as usize].fitness
                )));
            }
        }
        Ok(Lon {
            name: name.to_string(),
            perturbation,
            meta: Vec::new(),
            nodes,
            edges,
        })
    }

    pub fn with_meta(mut self, meta: Vec<(String, String)>) -> Self {
        self.meta = meta;
        self
    }

    pub fn nodes(&self) -> &[LonNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[LonEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sum of all edge weights, self-loops included.
    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Best (lowest) fitness present in the network.
    pub fn best_fitness(&self) -> Fitness {
        self.nodes.iter().map(|v| v.fitness).min().expect("non-empty")
    }

    /// Drops stored permutations, keeping the graph.
    pub fn strip_permutations(&mut self) {
        for v in &mut self.nodes {
            v.perm = None;
        }
    }

    /// The same nodes with every edge direction flipped. The result is not
    /// fitness-monotone; it exists to study flow against the gradient.
    pub fn reverse(&self) -> Lon {
        let edges = self
            .edges
            .iter()
            .map(|e| LonEdge {
                from: e.to,
                to: e.from,
                weight: e.weight,
            })
            .collect();
        let mut rev = Lon::assemble(
            &self.name,
            self.perturbation,
            self.nodes.clone(),
            edges,
            false,
        )
        .expect("reversal preserves structural validity");
        rev.meta = self.meta.clone();
        rev
    }

    /// Fitness rescaled to `[0, 1]` with 1 at the best (minimal) fitness and
    /// 0 at the worst; a flat landscape maps to all ones.
    pub fn normalized_reversed_fitness(&self) -> Vec<f64> {
        let min = self.best_fitness().0;
        let max = self.nodes.iter().map(|v| v.fitness.0).max().expect("non-empty");
        if min == max {
            return vec![1.0; self.nodes.len()];
        }
        self.nodes
            .iter()
            .map(|v| (max - v.fitness.0) as f64 / (max - min) as f64)
            .collect()
    }

    /// Number of weakly connected components.
    pub fn weak_component_count(&self) -> usize {
        let mut parent: Vec<u32> = (0..self.nodes.len() as u32).collect();
        fn find(parent: &mut [u32], x: u32) -> u32 {
            let mut root = x;
            while parent[root as usize] != root {
                root = parent[root as usize];
            }
            let mut cur = x;
            while parent[cur as usize] != root {
                let next = parent[cur as usize];
                parent[cur as usize] = root;
                cur = next;
            }
            root
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a as usize] = b;
            }
        }
        (0..parent.len() as u32)
            .filter(|&v| find(&mut parent, v) == v)
            .count()
    }
}

/// Merges run traces into one network. Optima are identified by their exact
/// permutation across traces; transition counts accumulate into edge
/// weights. Node ids follow first encounter in trace order.
pub fn build_lon(
    name: &str,
    perturbation: Perturbation,
    traces: &[RunTrace],
) -> Result<Lon, LonError> {
    let mut ids: HashMap<&Permutation, u32> = HashMap::new();
    let mut nodes: Vec<LonNode> = Vec::new();
    let mut weights: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for trace in traces {
        let mut local = Vec::with_capacity(trace.optima.len());
        for (perm, fitness) in &trace.optima {
            let id = match ids.get(perm) {
                Some(&id) => {
                    let known = nodes[id as usize].fitness;
                    if known != *fitness {
                        return Err(LonError::FitnessConflict {
                            perm: perm.to_string(),
                            a: known.0,
                            b: fitness.0,
                        });
                    }
                    id
                }
                None => {
                    let id = nodes.len() as u32;
                    nodes.push(LonNode {
                        fitness: *fitness,
                        perm: Some(perm.clone()),
                    });
                    ids.insert(perm, id);
                    id
                }
            };
            local.push(id);
        }
        for &(a, b) in &trace.transitions {
            let (Some(&ga), Some(&gb)) = (local.get(a as usize), local.get(b as usize)) else {
                return Err(schema("trace transition references unknown optimum"));
            };
            *weights.entry((ga, gb)).or_insert(0) += 1;
        }
    }
    let edges = weights
        .into_iter()
        .map(|((from, to), weight)| LonEdge { from, to, weight })
        .collect();
    Lon::new(name, perturbation, nodes, edges)
}

/// Structural role of a node, judged at the granularity of its strongly
/// connected component: a component with no incoming edge from outside is a
/// source, one with no outgoing edge to the outside is a sink, one with
/// neither is isolated. Intra-component edges (self-loops included) do not
/// count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Source,
    Sink,
    Interior,
    Isolated,
}

impl NodeClass {
    /// Sources and isolated nodes: flow originates here.
    pub fn is_source_like(self) -> bool {
        matches!(self, NodeClass::Source | NodeClass::Isolated)
    }

    /// Sinks and isolated nodes: flow terminates here.
    pub fn is_sink_like(self) -> bool {
        matches!(self, NodeClass::Sink | NodeClass::Isolated)
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Source => "source",
            NodeClass::Sink => "sink",
            NodeClass::Interior => "interior",
            NodeClass::Isolated => "isolated",
        })
    }
}

/// Iterative Tarjan. Returns a component id per node plus the component
/// count; ids follow emission order, which is a reverse topological order
/// of the condensation (every successor component of `c` has an id `< c`).
pub(crate) fn strongly_connected_components(n: usize, adj: &[Vec<u32>]) -> (Vec<u32>, usize) {
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut next_index = 0u32;
    let mut n_comps = 0u32;
    for root in 0..n as u32 {
        if index[root as usize] != UNSET {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut cursor)) = call.last_mut() {
            let vu = v as usize;
            if *cursor == 0 {
                index[vu] = next_index;
                low[vu] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[vu] = true;
            }
            if let Some(&w) = adj[vu].get(*cursor) {
                *cursor += 1;
                let wu = w as usize;
                if index[wu] == UNSET {
                    call.push((w, 0));
                } else if on_stack[wu] {
                    low[vu] = low[vu].min(index[wu]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p as usize] = low[p as usize].min(low[vu]);
                }
                if low[vu] == index[vu] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w as usize] = false;
                        comp[w as usize] = n_comps;
                        if w == v {
                            break;
                        }
                    }
                    n_comps += 1;
                }
            }
        }
    }
    (comp, n_comps as usize)
}

fn out_adjacency(lon: &Lon) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); lon.node_count()];
    for e in lon.edges() {
        adj[e.from as usize].push(e.to);
    }
    adj
}

fn component_boundaries(lon: &Lon, comp: &[u32], n_comps: usize) -> (Vec<bool>, Vec<bool>) {
    let mut ext_in = vec![false; n_comps];
    let mut ext_out = vec![false; n_comps];
    for e in lon.edges() {
        let (cf, ct) = (comp[e.from as usize], comp[e.to as usize]);
        if cf != ct {
            ext_out[cf as usize] = true;
            ext_in[ct as usize] = true;
        }
    }
    (ext_in, ext_out)
}

/// Classifies every node as source, sink, interior, or isolated.
pub fn classify_nodes(lon: &Lon) -> Vec<NodeClass> {
    let (comp, n_comps) = strongly_connected_components(lon.node_count(), &out_adjacency(lon));
    let (ext_in, ext_out) = component_boundaries(lon, &comp, n_comps);
    comp.iter()
        .map(|&c| match (ext_in[c as usize], ext_out[c as usize]) {
            (false, false) => NodeClass::Isolated,
            (false, true) => NodeClass::Source,
            (true, false) => NodeClass::Sink,
            (true, true) => NodeClass::Interior,
        })
        .collect()
}

/// Role of a non-trivial strongly connected component, by the same boundary
/// rule as [`NodeClass`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SccKind {
    SourceScc,
    SinkScc,
    InteriorScc,
    IsolatedScc,
}

/// Summary of the non-trivial (size >= 2) strongly connected components.
#[derive(Clone, Debug)]
pub struct SccInfo {
    /// Member lists, each sorted by node id; components ordered by their
    /// smallest member.
    pub components: Vec<Vec<u32>>,
    pub kinds: Vec<SccKind>,
    /// Total number of nodes lying in any non-trivial component.
    pub member_count: usize,
    /// `member_count` over the node count.
    pub node_ratio: f64,
}

impl SccInfo {
    pub fn count(&self) -> usize {
        self.components.len()
    }
}

pub fn find_sccs(lon: &Lon) -> SccInfo {
    let n = lon.node_count();
    let (comp, n_comps) = strongly_connected_components(n, &out_adjacency(lon));
    let (ext_in, ext_out) = component_boundaries(lon, &comp, n_comps);
    let mut members = vec![Vec::new(); n_comps];
    for v in 0..n as u32 {
        members[comp[v as usize] as usize].push(v);
    }
    let mut nontrivial: Vec<(Vec<u32>, SccKind)> = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(c, mut m)| {
            m.sort_unstable();
            let kind = match (ext_in[c], ext_out[c]) {
                (false, false) => SccKind::IsolatedScc,
                (false, true) => SccKind::SourceScc,
                (true, false) => SccKind::SinkScc,
                (true, true) => SccKind::InteriorScc,
            };
            (m, kind)
        })
        .collect();
    nontrivial.sort_by_key(|(m, _)| m[0]);
    let member_count = nontrivial.iter().map(|(m, _)| m.len()).sum();
    let (components, kinds) = nontrivial.into_iter().unzip();
    SccInfo {
        components,
        kinds,
        member_count,
        node_ratio: member_count as f64 / n as f64,
    }
}

const FORMAT_TAG: &str = "lonflow-lon";
const FORMAT_VERSION: u32 = 1;

impl Lon {
    /// Plain-text serialization; see [`Lon::from_text`] for the layout.
    /// Permutations are written only when `include_perms` is set and stored.
    pub fn to_text(&self, include_perms: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!("{FORMAT_TAG} {FORMAT_VERSION}\n"));
        out.push_str(&format!("name {}\n", self.name));
        out.push_str(&format!("perturbation {}\n", self.perturbation));
        for (k, v) in &self.meta {
            out.push_str(&format!("meta {k} {v}\n"));
        }
        out.push_str(&format!("nodes {}\n", self.nodes.len()));
        for (id, node) in self.nodes.iter().enumerate() {
            match (&node.perm, include_perms) {
                (Some(p), true) => out.push_str(&format!("{id} {} {p}\n", node.fitness)),
                _ => out.push_str(&format!("{id} {}\n", node.fitness)),
            }
        }
        out.push_str(&format!("edges {}\n", self.edges.len()));
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.from, e.to, e.weight));
        }
        out.push_str("end\n");
        out
    }

    /// Parses the text layout:
    ///
    /// ```text
    /// lonflow-lon 1
    /// name <name>
    /// perturbation low|high
    /// meta <key> <value>        (zero or more)
    /// nodes <count>
    /// <id> <fitness> [<loc> ...]
    /// edges <count>
    /// <from> <to> <weight>
    /// end
    /// ```
    pub fn from_text(text: &str) -> Result<Lon, LonError> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(k, l)| (k + 1, l.trim()))
                .ok_or_else(|| schema(format!("unexpected end of file, expected {what}")))
        };
        let (_, header) = next("header")?;
        if header != format!("{FORMAT_TAG} {FORMAT_VERSION}") {
            return Err(schema(format!("unrecognized header `{header}`")));
        }
        let (_, name_line) = next("name")?;
        let name = name_line
            .strip_prefix("name ")
            .ok_or_else(|| schema("expected `name`"))?
            .to_string();
        let (_, pert_line) = next("perturbation")?;
        let perturbation: Perturbation = pert_line
            .strip_prefix("perturbation ")
            .ok_or_else(|| schema("expected `perturbation`"))?
            .parse()?;
        let mut meta = Vec::new();
        let (mut lineno, mut line) = next("nodes")?;
        while let Some(rest) = line.strip_prefix("meta ") {
            let (key, value) = rest
                .split_once(' ')
                .ok_or_else(|| schema(format!("line {lineno}: meta needs a key and a value")))?;
            meta.push((key.to_string(), value.to_string()));
            (lineno, line) = next("nodes")?;
        }
        let n: usize = line
            .strip_prefix("nodes ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| schema(format!("line {lineno}: expected `nodes <count>`")))?;
        let mut nodes = Vec::with_capacity(n);
        for want in 0..n {
            let (lineno, line) = next("a node")?;
            let bad = || schema(format!("line {lineno}: malformed node"));
            let mut toks = line.split_whitespace();
            let id: usize = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if id != want {
                return Err(schema(format!(
                    "line {lineno}: node id {id} out of sequence (expected {want})"
                )));
            }
            let fitness: i64 = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let rest: Vec<&str> = toks.collect();
            let perm = if rest.is_empty() {
                None
            } else {
                Some(rest.join(" ").parse::<Permutation>().map_err(|e| {
                    schema(format!("line {lineno}: {e}"))
                })?)
            };
            nodes.push(LonNode {
                fitness: Fitness(fitness),
                perm,
            });
        }
        let (lineno, line) = next("edges")?;
        let m: usize = line
            .strip_prefix("edges ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| schema(format!("line {lineno}: expected `edges <count>`")))?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (lineno, line) = next("an edge")?;
            let bad = || schema(format!("line {lineno}: malformed edge"));
            let mut toks = line.split_whitespace();
            let from: u32 = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let to: u32 = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let weight: u64 = toks.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if toks.next().is_some() {
                return Err(bad());
            }
            edges.push(LonEdge { from, to, weight });
        }
        let (_, line) = next("end")?;
        if line != "end" {
            return Err(schema("expected `end`"));
        }
        Ok(Lon::new(&name, perturbation, nodes, edges)?.with_meta(meta))
    }

    pub fn save(&self, path: &Path, include_perms: bool) -> Result<(), LonError> {
        fs::write(path, self.to_text(include_perms)).map_err(|source| LonError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Lon, LonError> {
        let text = fs::read_to_string(path).map_err(|source| LonError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lon::from_text(&text)
    }
}

/// Imports a network from CSV node and edge lists. The node list needs an
/// `id,fitness` header with contiguous ids starting at 0 (in any order);
/// the edge list needs `from,to,weight`.
pub fn import_csv(
    name: &str,
    perturbation: Perturbation,
    nodes_csv: &str,
    edges_csv: &str,
) -> Result<Lon, LonError> {
    let mut node_lines = nodes_csv.lines();
    match node_lines.next().map(str::trim) {
        Some("id,fitness") => {}
        other => {
            return Err(schema(format!(
                "node list must start with `id,fitness`, got {other:?}"
            )))
        }
    }
    let mut by_id: BTreeMap<u32, i64> = BTreeMap::new();
    for line in node_lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || schema(format!("malformed node row `{line}`"));
        let (id, fitness) = line.split_once(',').ok_or_else(bad)?;
        let id: u32 = id.trim().parse().map_err(|_| bad())?;
        let fitness: i64 = fitness.trim().parse().map_err(|_| bad())?;
        if by_id.insert(id, fitness).is_some() {
            return Err(schema(format!("duplicate node id {id}")));
        }
    }
    let n = by_id.len() as u32;
    if by_id.keys().next_back().map(|&k| k + 1) != Some(n) {
        return Err(schema("node ids must be contiguous from 0"));
    }
    let nodes = by_id
        .into_values()
        .map(|f| LonNode {
            fitness: Fitness(f),
            perm: None,
        })
        .collect();

    let mut edge_lines = edges_csv.lines();
    match edge_lines.next().map(str::trim) {
        Some("from,to,weight") => {}
        other => {
            return Err(schema(format!(
                "edge list must start with `from,to,weight`, got {other:?}"
            )))
        }
    }
    let mut edges = Vec::new();
    for line in edge_lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || schema(format!("malformed edge row `{line}`"));
        let mut cells = line.split(',');
        let (Some(from), Some(to), Some(weight), None) =
            (cells.next(), cells.next(), cells.next(), cells.next())
        else {
            return Err(bad());
        };
        edges.push(LonEdge {
            from: from.trim().parse().map_err(|_| bad())?,
            to: to.trim().parse().map_err(|_| bad())?,
            weight: weight.trim().parse().map_err(|_| bad())?,
        });
    }
    Lon::new(name, perturbation, nodes, edges)
}
