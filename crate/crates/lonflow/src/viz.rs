//! Graphviz export of the condensed flow structure of a network.
//!
//! Non-trivial strongly connected components collapse into a single glyph
//! (star for 2 members, box for 3, diamond beyond that, labeled with the
//! member count); remaining nodes render as circles. Intra-component edges
//! vanish with the condensation, parallel edges merge by summing weights,
//! so the rendered graph is acyclic. Fill colors sample a 256-step
//! dark-violet-to-yellow colormap over normalized fitness (0 at the minimal
//! fitness), edge pen widths grow with `ln(1 + weight)`, and nodes sit in
//! `rank=same` layers by longest-path depth from the sources. All output is
//! byte-deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;

use crate::lon::{classify_nodes, strongly_connected_components, Lon};
use crate::qap::Fitness;

/// Rendered artifacts: the DOT document and a JSON companion describing
/// every rendered unit (`id`, `scc_members`, `fitness_norm`, `class`).
#[derive(Clone, Debug)]
pub struct FlowDot {
    pub dot: String,
    pub layout: String,
}

const COLOR_ANCHORS: [(u8, u8, u8); 10] = [
    (0x44, 0x01, 0x54),
    (0x48, 0x28, 0x78),
    (0x3e, 0x49, 0x89),
    (0x31, 0x68, 0x8e),
    (0x26, 0x82, 0x8e),
    (0x1f, 0x9e, 0x89),
    (0x35, 0xb7, 0x79),
    (0x6e, 0xce, 0x58),
    (0xb5, 0xde, 0x2b),
    (0xfd, 0xe7, 0x25),
];

/// 256-step quantized sample of the colormap at `t` in `[0, 1]`.
fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let step = (t * 255.0).round() as f64 / 255.0;
    let pos = step * (COLOR_ANCHORS.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * frac).round() as u8;
    let (r, g, b) = (
        mix(COLOR_ANCHORS[lo].0, COLOR_ANCHORS[hi].0),
        mix(COLOR_ANCHORS[lo].1, COLOR_ANCHORS[hi].1),
        mix(COLOR_ANCHORS[lo].2, COLOR_ANCHORS[hi].2),
    );
    format!("#{r:02x}{g:02x}{b:02x}")
}

struct Unit {
    name: String,
    members: Vec<u32>,
    fitness: Fitness,
    fitness_norm: f64,
    class: String,
    shape: &'static str,
    label: String,
    depth: usize,
}

pub fn export_flow_dot(lon: &Lon) -> FlowDot {
    let n = lon.node_count();
    let mut adj = vec![Vec::new(); n];
    for e in lon.edges() {
        adj[e.from as usize].push(e.to);
    }
    let (comp, n_comps) = strongly_connected_components(n, &adj);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); n_comps];
    for v in 0..n as u32 {
        members[comp[v as usize] as usize].push(v);
    }
    let classes = classify_nodes(lon);

    let fit_min = lon.best_fitness().0;
    let fit_max = lon.nodes().iter().map(|v| v.fitness.0).max().unwrap_or(fit_min);
    let norm = |f: i64| {
        if fit_max == fit_min {
            0.0
        } else {
            (f - fit_min) as f64 / (fit_max - fit_min) as f64
        }
    };

    // Longest-path depth over the condensation. Tarjan ids are reverse
    // topological, so descending order visits every component before its
    // successors.
    let mut depth = vec![0usize; n_comps];
    for c in (0..n_comps).rev() {
        for &v in &members[c] {
            for &w in &adj[v as usize] {
                let cw = comp[w as usize] as usize;
                if cw != c {
                    depth[cw] = depth[cw].max(depth[c] + 1);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n_comps).collect();
    order.sort_by_key(|&c| {
        let best = members[c]
            .iter()
            .map(|&v| lon.nodes()[v as usize].fitness)
            .min()
            .expect("components are non-empty");
        (best, members[c][0])
    });
    let mut units: Vec<Unit> = Vec::with_capacity(n_comps);
    let mut unit_of_comp = vec![usize::MAX; n_comps];
    let mut glyphs = 0usize;
    for &c in &order {
        let m = &members[c];
        let fitness = m
            .iter()
            .map(|&v| lon.nodes()[v as usize].fitness)
            .min()
            .expect("components are non-empty");
        let node_class = classes[m[0] as usize];
        let (name, shape, label, class) = if m.len() >= 2 {
            let name = format!("c{glyphs}");
            glyphs += 1;
            let shape = match m.len() {
                2 => "star",
                3 => "box",
                _ => "diamond",
            };
            (name, shape, m.len().to_string(), format!("{node_class}_scc"))
        } else {
            (
                format!("n{}", m[0]),
                "circle",
                m[0].to_string(),
                node_class.to_string(),
            )
        };
        unit_of_comp[c] = units.len();
        units.push(Unit {
            name,
            members: m.clone(),
            fitness,
            fitness_norm: norm(fitness.0),
            class,
            shape,
            label,
            depth: depth[c],
        });
    }

    let mut condensed: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for e in lon.edges() {
        let (cu, cv) = (comp[e.from as usize], comp[e.to as usize]);
        if cu != cv {
            let key = (
                unit_of_comp[cu as usize],
                unit_of_comp[cv as usize],
            );
            *condensed.entry(key).or_insert(0) += e.weight;
        }
    }

    let mut dot = String::new();
    writeln!(dot, "// lonflow {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(
        dot,
        "// network {} ({}), {} nodes, {} edges, {} rendered units",
        lon.name,
        lon.perturbation,
        n,
        lon.edge_count(),
        units.len()
    )
    .unwrap();
    writeln!(dot, "digraph flow {{").unwrap();
    writeln!(dot, "  rankdir=LR;").unwrap();
    writeln!(dot, "  node [style=filled, fontsize=10];").unwrap();
    for u in &units {
        let fill = colormap(u.fitness_norm);
        let font = if u.fitness_norm < 0.5 { "#ffffff" } else { "#000000" };
        writeln!(
            dot,
            "  \"{}\" [shape={}, label=\"{}\", fillcolor=\"{}\", fontcolor=\"{}\"];",
            u.name, u.shape, u.label, fill, font
        )
        .unwrap();
    }
    let max_depth = units.iter().map(|u| u.depth).max().unwrap_or(0);
    for d in 0..=max_depth {
        let layer: Vec<&str> = units
            .iter()
            .filter(|u| u.depth == d)
            .map(|u| u.name.as_str())
            .collect();
        if !layer.is_empty() {
            write!(dot, "  {{ rank=same;").unwrap();
            for name in layer {
                write!(dot, " \"{name}\";").unwrap();
            }
            writeln!(dot, " }}").unwrap();
        }
    }
    for (&(from, to), &weight) in &condensed {
        writeln!(
            dot,
            "  \"{}\" -> \"{}\" [penwidth={:.3}];",
            units[from].name,
            units[to].name,
            (1.0 + weight as f64).ln()
        )
        .unwrap();
    }
    writeln!(dot, "}}").unwrap();

    let layout_units: Vec<serde_json::Value> = units
        .iter()
        .map(|u| {
            json!({
                "id": u.name,
                "scc_members": u.members,
                "fitness": u.fitness.0,
                "fitness_norm": u.fitness_norm,
                "class": u.class,
                "depth": u.depth,
            })
        })
        .collect();
    let layout = serde_json::to_string_pretty(&json!({
        "network": lon.name,
        "perturbation": lon.perturbation.to_string(),
        "units": layout_units,
    }))
    .expect("layout serializes");

    FlowDot { dot, layout }
}
