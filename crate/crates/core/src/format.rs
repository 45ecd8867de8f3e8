//! Plain-text graph, capacity, and scenario files.
//!
//! ```text
//! nodes 9 source 4
//! edge 4 1
//! coord 4 1 1
//! edgecap 4 1 4.0
//! ```
//!
//! Capacity lines are `nodecap <v> <C>`, `edgecap <u> <v> <C>`, or
//! `route <u> <v> <link>` with `linkcap <link> <C>`; one file uses one kind.
//! Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::capacity::{edge_capacitated, node_capacitated, physical_link_model, CapacityKind, CapacityModel, RowLabel};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, GridLayout, NodeId, OverlayGraph};

pub fn write_graph(g: &OverlayGraph, layout: Option<&GridLayout>) -> String {
    let mut out = format!("nodes {} source {}\n", g.node_count(), g.source());
    for e in g.edges() {
        writeln!(out, "edge {} {}", e.from, e.to).unwrap();
    }
    if let Some(layout) = layout {
        for v in g.nodes() {
            let (row, col) = layout.coord(v);
            writeln!(out, "coord {v} {row} {col}").unwrap();
        }
    }
    out
}

pub fn write_capacity(g: &OverlayGraph, m: &CapacityModel) -> String {
    let mut out = String::new();
    match m.kind() {
        CapacityKind::NodeCap | CapacityKind::EdgeCap => {
            for k in 0..m.row_count() {
                match m.label(k) {
                    RowLabel::Node(v) => writeln!(out, "nodecap {v} {}", m.bound(k)).unwrap(),
                    RowLabel::Edge(e) => {
                        let edge = g.edge(e);
                        writeln!(out, "edgecap {} {} {}", edge.from, edge.to, m.bound(k)).unwrap()
                    }
                    RowLabel::Link(_) => unreachable!("node and edge models carry node and edge labels"),
                }
            }
        }
        CapacityKind::PhysicalLink | CapacityKind::General => {
            let link = |k: usize| match m.label(k) {
                RowLabel::Link(l) => l,
                _ => k,
            };
            for e in g.edge_ids() {
                let edge = g.edge(e);
                for &k in m.rows_of_edge(e) {
                    writeln!(out, "route {} {} {}", edge.from, edge.to, link(k)).unwrap();
                }
            }
            for k in 0..m.row_count() {
                writeln!(out, "linkcap {} {}", link(k), m.bound(k)).unwrap();
            }
        }
    }
    out
}

pub fn write_scenario(g: &OverlayGraph, layout: Option<&GridLayout>, m: &CapacityModel) -> String {
    write_graph(g, layout) + &write_capacity(g, m)
}

#[derive(Clone, Debug)]
pub struct ParsedScenario {
    pub graph: OverlayGraph,
    pub layout: Option<GridLayout>,
    /// `None` when the text had no capacity lines.
    pub model: Option<CapacityModel>,
}

struct Line<'a> {
    number: usize,
    words: Vec<&'a str>,
}

impl Line<'_> {
    fn arity(&self, n: usize) -> Result<()> {
        if self.words.len() == n + 1 {
            Ok(())
        } else {
            Err(Error::parse(self.number, format!("`{}` takes {n} arguments", self.words[0])))
        }
    }

    fn int(&self, i: usize) -> Result<usize> {
        self.words[i]
            .parse()
            .map_err(|_| Error::parse(self.number, format!("expected an integer, got `{}`", self.words[i])))
    }

    fn float(&self, i: usize) -> Result<f64> {
        self.words[i]
            .parse()
            .map_err(|_| Error::parse(self.number, format!("expected a number, got `{}`", self.words[i])))
    }
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        (!words.is_empty()).then_some(Line { number: i + 1, words })
    })
}

pub fn parse_graph(text: &str) -> Result<OverlayGraph> {
    Ok(parse_scenario(text)?.graph)
}

/// Parses a graph followed by optional capacity lines.
pub fn parse_scenario(text: &str) -> Result<ParsedScenario> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut coords = Vec::new();
    let mut cap_lines = Vec::new();
    for line in lines(text) {
        match line.words[0] {
            "nodes" => {
                if header.is_some() {
                    return Err(Error::parse(line.number, "duplicate `nodes` line"));
                }
                if line.words.len() != 4 || line.words[2] != "source" {
                    return Err(Error::parse(line.number, "expected `nodes <n> source <s>`"));
                }
                header = Some((line.int(1)?, line.int(3)?));
            }
            "edge" => {
                line.arity(2)?;
                edges.push((NodeId(line.int(1)?), NodeId(line.int(2)?)));
            }
            "coord" => {
                line.arity(3)?;
                coords.push((line.number, line.int(1)?, line.int(2)?, line.int(3)?));
            }
            "nodecap" | "edgecap" | "route" | "linkcap" => cap_lines.push(line),
            other => return Err(Error::parse(line.number, format!("unknown directive `{other}`"))),
        }
    }
    let (n, source) = header.ok_or_else(|| Error::parse(1, "missing `nodes <n> source <s>` line"))?;
    let graph = OverlayGraph::new(n, &edges, NodeId(source))?;
    let layout = parse_layout(n, &coords)?;
    let model = if cap_lines.is_empty() { None } else { Some(parse_capacity_lines(&graph, &cap_lines)?) };
    Ok(ParsedScenario { graph, layout, model })
}

fn parse_layout(n: usize, coords: &[(usize, usize, usize, usize)]) -> Result<Option<GridLayout>> {
    let Some(&(first, ..)) = coords.first() else {
        return Ok(None);
    };
    let side = (1..=n).find(|s| s * s >= n).unwrap_or(0);
    if side * side != n || coords.len() != n {
        return Err(Error::parse(first, "coord lines must cover a square grid"));
    }
    for &(line, v, row, col) in coords {
        if row * side + col != v || row >= side || col >= side {
            return Err(Error::parse(line, format!("node {v} is not at row-major cell ({row}, {col})")));
        }
    }
    Ok(Some(GridLayout { side }))
}

pub fn parse_capacity(g: &OverlayGraph, text: &str) -> Result<CapacityModel> {
    let cap_lines: Vec<Line> = lines(text).collect();
    if let Some(line) = cap_lines.iter().find(|l| !matches!(l.words[0], "nodecap" | "edgecap" | "route" | "linkcap")) {
        return Err(Error::parse(line.number, format!("unknown capacity directive `{}`", line.words[0])));
    }
    if cap_lines.is_empty() {
        return Err(Error::parse(1, "no capacity lines"));
    }
    parse_capacity_lines(g, &cap_lines)
}

fn parse_capacity_lines(g: &OverlayGraph, cap_lines: &[Line]) -> Result<CapacityModel> {
    let kind_of = |w: &str| match w {
        "nodecap" => 0,
        "edgecap" => 1,
        _ => 2,
    };
    let kind = kind_of(cap_lines[0].words[0]);
    if let Some(line) = cap_lines.iter().find(|l| kind_of(l.words[0]) != kind) {
        return Err(Error::parse(line.number, "capacity kinds may not be mixed in one file"));
    }
    let edge_at = |line: &Line| -> Result<EdgeId> {
        let (u, v) = (NodeId(line.int(1)?), NodeId(line.int(2)?));
        g.find_edge(u, v).ok_or_else(|| Error::parse(line.number, format!("no edge {u} -> {v}")))
    };
    match kind {
        0 => {
            let mut caps = BTreeMap::new();
            for line in cap_lines {
                line.arity(2)?;
                if caps.insert(NodeId(line.int(1)?), line.float(2)?).is_some() {
                    return Err(Error::parse(line.number, "duplicate node capacity"));
                }
            }
            node_capacitated(g, &caps)
        }
        1 => {
            let mut caps = BTreeMap::new();
            for line in cap_lines {
                line.arity(3)?;
                if caps.insert(edge_at(line)?, line.float(3)?).is_some() {
                    return Err(Error::parse(line.number, "duplicate edge capacity"));
                }
            }
            edge_capacitated(g, &caps)
        }
        _ => {
            let mut routes: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
            let mut link_caps = BTreeMap::new();
            for line in cap_lines {
                if line.words[0] == "route" {
                    line.arity(3)?;
                    routes.entry(edge_at(line)?).or_default().push(line.int(3)?);
                } else {
                    line.arity(2)?;
                    if link_caps.insert(line.int(1)?, line.float(2)?).is_some() {
                        return Err(Error::parse(line.number, "duplicate link capacity"));
                    }
                }
            }
            physical_link_model(g, &routes, &link_caps)
        }
    }
}
