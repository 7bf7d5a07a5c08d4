//! Chain-graph assembly and export.
//!
//! Responses become circle nodes connected by undirected edges weighted by
//! posterior-mean partial correlations −ω_ij/√(ω_ii·ω_jj); predictors become
//! triangle nodes with directed edges into responses weighted by
//! posterior-mean coefficients. An edge is included when its equal-tailed
//! credible interval at the chosen level excludes zero (or, alternatively,
//! when |posterior mean| clears a fixed threshold); excluded edges are kept
//! in the structure with `included = false` for audit. Response node sizes
//! are α-centralities of the included response–response subgraph.

use crate::error::{Error, Result};
use crate::inference::{quantile_sorted, FitMetadata};
use crate::model::PosteriorDraws;
use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Response,
    Predictor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    RespResp,
    PredResp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// α-centrality for responses; 1.0 for predictors.
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    pub weight: f64,
    pub included: bool,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub ci_level: f64,
}

impl ChainGraph {
    pub fn included_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.included)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn included_edge_count(&self) -> usize {
        self.included_edges().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
}

/// Partial-correlation matrix of an SPD precision matrix: off-diagonal
/// (i, j) ↦ −ω_ij/√(ω_ii·ω_jj), diagonal 1.
pub fn partial_correlations(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if omega.nrows() != omega.ncols() {
        return Err(Error::dims("partial correlations need a square matrix"));
    }
    if nalgebra::Cholesky::new(omega.clone()).is_none() {
        return Err(Error::DomainError {
            what: "partial_correlations",
            detail: "matrix is not symmetric positive definite".into(),
        });
    }
    let k = omega.nrows();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        out[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let v = -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// α-centrality x = (I − a·Aᵀ)⁻¹·e with a = alpha_frac/ρ(A) (a = 0 for an
/// empty graph). `adjacency` must be entrywise nonnegative, `e` entrywise
/// positive, and alpha_frac in (0, 1) so the Neumann series converges.
pub fn alpha_centrality(
    adjacency: &DMatrix<f64>,
    alpha_frac: f64,
    e: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = adjacency.nrows();
    if adjacency.ncols() != n || e.len() != n {
        return Err(Error::dims("centrality adjacency/vector dimensions"));
    }
    if !(alpha_frac > 0.0 && alpha_frac < 1.0) {
        return Err(Error::DomainError {
            what: "alpha_centrality",
            detail: format!("alpha_frac must lie in (0,1), got {alpha_frac}"),
        });
    }
    if adjacency.iter().any(|v| *v < 0.0) || e.iter().any(|v| *v <= 0.0) {
        return Err(Error::DomainError {
            what: "alpha_centrality",
            detail: "adjacency must be nonnegative and e positive".into(),
        });
    }
    let rho = spectral_radius(adjacency);
    let a = if rho > 0.0 { alpha_frac / rho } else { 0.0 };
    let system = DMatrix::identity(n, n) - adjacency.transpose() * a;
    LU::new(system)
        .solve(e)
        .ok_or_else(|| Error::breakdown("alpha-centrality system unexpectedly singular"))
}

/// Spectral radius of a nonnegative matrix by power iteration.
fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 || a.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut rho = 0.0;
    for _ in 0..200 {
        let w = a * &v;
        let norm = w.norm();
        if norm < 1e-300 {
            return 0.0;
        }
        v = w / norm;
        rho = norm;
    }
    rho
}

/// Edge-selection rule: credible interval excluding zero (default), or an
/// absolute posterior-mean threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InclusionRule {
    CiExcludesZero,
    MinAbsWeight(f64),
}

/// Assemble the chain graph from stored draws.
///
/// `chains` are pooled; partial-correlation and coefficient credible
/// intervals are recomputed at `ci_level`, so the level may differ from the
/// one stored in the fit summary.
pub fn build_graph(
    meta: &FitMetadata,
    chains: &[PosteriorDraws],
    ci_level: f64,
    rule: InclusionRule,
) -> Result<ChainGraph> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::BadCiLevel { level: ci_level });
    }
    if chains.iter().all(|c| c.is_empty()) {
        return Err(Error::InsufficientDraws { draws: 0 });
    }
    let k = meta.k_eff;
    let p = meta.p;
    let q_lo = (1.0 - ci_level) / 2.0;
    let q_hi = 1.0 - q_lo;

    let summarize = |series: &mut Vec<f64>| -> (f64, f64, f64) {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        series.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        (
            mean,
            quantile_sorted(series, q_lo),
            quantile_sorted(series, q_hi),
        )
    };
    let include = |mean: f64, lo: f64, hi: f64| -> bool {
        if mean == 0.0 {
            return false;
        }
        match rule {
            InclusionRule::CiExcludesZero => lo > 0.0 || hi < 0.0,
            InclusionRule::MinAbsWeight(t) => mean.abs() >= t,
        }
    };

    let mut edges = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut series: Vec<f64> = chains
                .iter()
                .flat_map(|c| c.omegas.iter())
                .map(|om| -om[(i, j)] / (om[(i, i)] * om[(j, j)]).sqrt())
                .collect();
            let (mean, lo, hi) = summarize(&mut series);
            edges.push(Edge {
                from: meta.core_response_labels[i].clone(),
                to: meta.core_response_labels[j].clone(),
                kind: EdgeKind::RespResp,
                weight: mean,
                included: include(mean, lo, hi),
                ci_lower: lo,
                ci_upper: hi,
            });
        }
    }
    for a in 0..p {
        for j in 0..k {
            let mut series: Vec<f64> = chains
                .iter()
                .flat_map(|c| c.bs.iter())
                .map(|b| b[(a, j)])
                .collect();
            let (mean, lo, hi) = summarize(&mut series);
            edges.push(Edge {
                from: meta.predictor_labels[a].clone(),
                to: meta.core_response_labels[j].clone(),
                kind: EdgeKind::PredResp,
                weight: mean,
                included: include(mean, lo, hi),
                ci_lower: lo,
                ci_upper: hi,
            });
        }
    }

    // α-centrality of responses on absolute included resp-resp weights
    let mut adj = DMatrix::zeros(k, k);
    for e in edges
        .iter()
        .filter(|e| e.included && e.kind == EdgeKind::RespResp)
    {
        let i = meta
            .core_response_labels
            .iter()
            .position(|n| *n == e.from)
            .expect("edge endpoints come from the label list");
        let j = meta
            .core_response_labels
            .iter()
            .position(|n| *n == e.to)
            .expect("edge endpoints come from the label list");
        adj[(i, j)] = e.weight.abs();
        adj[(j, i)] = e.weight.abs();
    }
    let sizes = alpha_centrality(&adj, 0.5, &DVector::from_element(k, 1.0))?;

    // Every raw response becomes a circle node, including the logit
    // reference category, which carries no edges and keeps the baseline
    // centrality of an isolated node.
    let mut nodes: Vec<Node> = meta
        .response_labels
        .iter()
        .map(|name| {
            let size = meta
                .core_response_labels
                .iter()
                .position(|c| c == name)
                .map_or(1.0, |i| sizes[i]);
            Node {
                name: name.clone(),
                kind: NodeKind::Response,
                size,
            }
        })
        .collect();
    nodes.extend(meta.predictor_labels.iter().map(|name| Node {
        name: name.clone(),
        kind: NodeKind::Predictor,
        size: 1.0,
    }));

    Ok(ChainGraph {
        nodes,
        edges,
        ci_level,
    })
}

pub const POSITIVE_COLOR: &str = "#D62728";
pub const NEGATIVE_COLOR: &str = "#1F77B4";

fn dot_escape(name: &str) -> String {
    name.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render Graphviz DOT: circles for responses, triangles for predictors,
/// red (#D62728) edges for positive weights, blue (#1F77B4) for negative,
/// penwidth 1 + 4·|w|/max|w|; response node widths scaled affinely into
/// [0.5, 1.5]. Only included edges are emitted.
pub fn render_dot(graph: &ChainGraph) -> String {
    let mut out = String::from("digraph chain_graph {\n");
    let _ = writeln!(
        out,
        "  // edge selection at credible level {}",
        graph.ci_level
    );

    let resp_sizes: Vec<f64> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Response)
        .map(|n| n.size)
        .collect();
    let (smin, smax) = resp_sizes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let width_of = |n: &Node| -> f64 {
        match n.kind {
            NodeKind::Predictor => 1.0,
            NodeKind::Response => {
                if !smin.is_finite() || (smax - smin).abs() < 1e-12 {
                    1.0
                } else {
                    0.5 + (n.size - smin) / (smax - smin)
                }
            }
        }
    };

    for node in &graph.nodes {
        let shape = match node.kind {
            NodeKind::Response => "circle",
            NodeKind::Predictor => "triangle",
        };
        let _ = writeln!(
            out,
            "  \"{}\" [shape={}, width={:.3}, fixedsize=true];",
            dot_escape(&node.name),
            shape,
            width_of(node)
        );
    }

    let max_abs = graph
        .included_edges()
        .map(|e| e.weight.abs())
        .fold(0.0f64, f64::max);
    for edge in graph.included_edges() {
        let color = if edge.weight > 0.0 {
            POSITIVE_COLOR
        } else {
            NEGATIVE_COLOR
        };
        let penwidth = if max_abs > 0.0 {
            1.0 + 4.0 * edge.weight.abs() / max_abs
        } else {
            1.0
        };
        let dir = match edge.kind {
            EdgeKind::RespResp => ", dir=none",
            EdgeKind::PredResp => "",
        };
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [color=\"{}\", penwidth={:.3}{}];",
            dot_escape(&edge.from),
            dot_escape(&edge.to),
            color,
            penwidth,
            dir
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render GraphML 1.0 with the stable attribute keys kind/size on nodes
/// and kind/weight/sign on edges. Only included edges are emitted.
pub fn render_graphml(graph: &ChainGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"ekind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"sign\" for=\"edge\" attr.name=\"sign\" attr.type=\"string\"/>\n");
    out.push_str("  <graph id=\"chain_graph\" edgedefault=\"directed\">\n");
    for node in &graph.nodes {
        let kind = match node.kind {
            NodeKind::Response => "response",
            NodeKind::Predictor => "predictor",
        };
        let _ = writeln!(
            out,
            "    <node id=\"{}\"><data key=\"kind\">{}</data><data key=\"size\">{}</data></node>",
            xml_escape(&node.name),
            kind,
            node.size
        );
    }
    for (idx, edge) in graph.included_edges().enumerate() {
        let kind = match edge.kind {
            EdgeKind::RespResp => "resp_resp",
            EdgeKind::PredResp => "pred_resp",
        };
        let sign = if edge.weight > 0.0 {
            "positive"
        } else {
            "negative"
        };
        let _ = writeln!(
            out,
            "    <edge id=\"e{}\" source=\"{}\" target=\"{}\"><data key=\"ekind\">{}</data><data key=\"weight\">{}</data><data key=\"sign\">{}</data></edge>",
            idx,
            xml_escape(&edge.from),
            xml_escape(&edge.to),
            kind,
            edge.weight,
            sign
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Serialize the full graph (including excluded edges) as JSON.
pub fn render_json(graph: &ChainGraph) -> Result<String> {
    serde_json::to_string_pretty(graph)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Other(format!("graph serialization: {e}")))
}

/// Write the graph in the requested format.
pub fn export_graph(graph: &ChainGraph, format: ExportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ExportFormat::Dot => render_dot(graph),
        ExportFormat::Graphml => render_graphml(graph),
        ExportFormat::Json => render_json(graph)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path.to_path_buf(), e))
}
