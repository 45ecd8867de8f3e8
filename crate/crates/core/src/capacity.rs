//! Linear capacity constraints `A r <= C` over overlay link rates.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, NodeId, OverlayGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapacityKind {
    NodeCap,
    EdgeCap,
    PhysicalLink,
    General,
}

impl fmt::Display for CapacityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CapacityKind::NodeCap => "node-capacitated",
            CapacityKind::EdgeCap => "edge-capacitated",
            CapacityKind::PhysicalLink => "physical-link",
            CapacityKind::General => "general",
        };
        f.write_str(name)
    }
}

/// What a constraint row stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowLabel {
    Node(NodeId),
    Edge(EdgeId),
    Link(usize),
}

/// Sparse 0/1 constraint matrix with positive bounds. Every edge is covered by
/// at least one row.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityModel {
    kind: CapacityKind,
    edge_count: usize,
    rows: Vec<Vec<EdgeId>>,
    bounds: Vec<f64>,
    labels: Vec<RowLabel>,
    // Transposed incidence: rows touching each edge.
    by_edge: Vec<Vec<usize>>,
}

impl CapacityModel {
    /// Builds a model from explicit rows; each row lists the edges with a 1.
    pub fn general(edge_count: usize, rows: Vec<Vec<EdgeId>>, bounds: Vec<f64>) -> Result<Self> {
        let labels = (0..rows.len()).map(RowLabel::Link).collect();
        Self::from_parts(CapacityKind::General, edge_count, rows, bounds, labels)
    }

    fn from_parts(
        kind: CapacityKind,
        edge_count: usize,
        mut rows: Vec<Vec<EdgeId>>,
        bounds: Vec<f64>,
        labels: Vec<RowLabel>,
    ) -> Result<Self> {
        if rows.len() != bounds.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), actual: bounds.len() });
        }
        let mut by_edge = vec![Vec::new(); edge_count];
        for (k, row) in rows.iter_mut().enumerate() {
            let bound = bounds[k];
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(Error::NonpositiveCapacity(format!("row {k}"), bound));
            }
            row.sort();
            for (i, &e) in row.iter().enumerate() {
                if e.0 >= edge_count || (i > 0 && row[i - 1] == e) {
                    return Err(Error::InvalidRow(k, e));
                }
                by_edge[e.0].push(k);
            }
        }
        if let Some(e) = by_edge.iter().position(Vec::is_empty) {
            return Err(Error::UncoveredEdge(EdgeId(e)));
        }
        Ok(CapacityModel { kind, edge_count, rows, bounds, labels, by_edge })
    }

    pub fn kind(&self) -> CapacityKind {
        self.kind
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[EdgeId] {
        &self.rows[k]
    }

    pub fn bound(&self, k: usize) -> f64 {
        self.bounds[k]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn label(&self, k: usize) -> RowLabel {
        self.labels[k]
    }

    /// Rows in which edge `e` has a 1.
    pub fn rows_of_edge(&self, e: EdgeId) -> &[usize] {
        &self.by_edge[e.0]
    }

    pub fn max_bound(&self) -> f64 {
        self.bounds.iter().copied().fold(0.0, f64::max)
    }

    /// Dense 0/1 entry `a_{k,e}`.
    pub fn entry(&self, k: usize, e: EdgeId) -> bool {
        self.rows[k].binary_search(&e).is_ok()
    }

    /// `A r`, one value per row.
    pub fn row_loads(&self, r: &RateAllocation) -> Result<Vec<f64>> {
        self.check_dims(r)?;
        Ok(self.rows.iter().map(|row| row.iter().map(|&e| r[e]).sum()).collect())
    }

    /// Per-node capacity of a node-capacitated model (`None` for nodes without a row).
    pub fn node_capacity(&self, v: NodeId) -> Option<f64> {
        self.labels.iter().position(|l| *l == RowLabel::Node(v)).map(|k| self.bounds[k])
    }

    fn check_dims(&self, r: &RateAllocation) -> Result<()> {
        if r.len() != self.edge_count {
            return Err(Error::DimensionMismatch { expected: self.edge_count, actual: r.len() });
        }
        Ok(())
    }
}

fn check_cap(what: impl FnOnce() -> String, cap: f64) -> Result<f64> {
    if cap > 0.0 && cap.is_finite() {
        Ok(cap)
    } else {
        Err(Error::NonpositiveCapacity(what(), cap))
    }
}

/// One row per node with outgoing edges: the node's total upload rate is
/// bounded by its capacity.
pub fn node_capacitated(g: &OverlayGraph, caps: &BTreeMap<NodeId, f64>) -> Result<CapacityModel> {
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut labels = Vec::new();
    for v in g.nodes().filter(|&v| g.out_degree(v) > 0) {
        let cap = *caps.get(&v).ok_or_else(|| Error::MissingCapacity(format!("node {v}")))?;
        bounds.push(check_cap(|| format!("node {v}"), cap)?);
        rows.push(g.out_edges(v).to_vec());
        labels.push(RowLabel::Node(v));
    }
    CapacityModel::from_parts(CapacityKind::NodeCap, g.edge_count(), rows, bounds, labels)
}

/// `r_e <= C_e` for every overlay edge (identity `A`).
pub fn edge_capacitated(g: &OverlayGraph, caps: &BTreeMap<EdgeId, f64>) -> Result<CapacityModel> {
    let mut bounds = Vec::with_capacity(g.edge_count());
    for e in g.edge_ids() {
        let edge = g.edge(e);
        let name = || format!("edge {} -> {}", edge.from, edge.to);
        let cap = *caps.get(&e).ok_or_else(|| Error::MissingCapacity(name()))?;
        bounds.push(check_cap(name, cap)?);
    }
    let rows = g.edge_ids().map(|e| vec![e]).collect();
    let labels = g.edge_ids().map(RowLabel::Edge).collect();
    CapacityModel::from_parts(CapacityKind::EdgeCap, g.edge_count(), rows, bounds, labels)
}

/// One row per physical link: the overlay edges routed across it share its
/// capacity. Rows are ordered by link id.
pub fn physical_link_model(
    g: &OverlayGraph,
    routes: &BTreeMap<EdgeId, Vec<usize>>,
    link_caps: &BTreeMap<usize, f64>,
) -> Result<CapacityModel> {
    let mut members: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
    for e in g.edge_ids() {
        let links = routes.get(&e).filter(|l| !l.is_empty()).ok_or(Error::UnroutedEdge(e))?;
        for &l in links {
            let row = members.entry(l).or_default();
            if row.last() != Some(&e) {
                row.push(e);
            }
        }
    }
    let mut rows = Vec::with_capacity(members.len());
    let mut bounds = Vec::with_capacity(members.len());
    let mut labels = Vec::with_capacity(members.len());
    for (l, row) in members {
        let cap = *link_caps.get(&l).ok_or_else(|| Error::MissingCapacity(format!("link {l}")))?;
        bounds.push(check_cap(|| format!("link {l}"), cap)?);
        rows.push(row);
        labels.push(RowLabel::Link(l));
    }
    CapacityModel::from_parts(CapacityKind::PhysicalLink, g.edge_count(), rows, bounds, labels)
}

/// Nonnegative rate per overlay edge.
#[derive(Clone, Debug, PartialEq)]
pub struct RateAllocation(Vec<f64>);

impl RateAllocation {
    pub fn zeros(edge_count: usize) -> Self {
        RateAllocation(vec![0.0; edge_count])
    }

    /// Negative entries are rejected; `-0.0` and tiny round-off are clamped to zero.
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        let mut rates = rates;
        for (i, r) in rates.iter_mut().enumerate() {
            if !r.is_finite() || *r < -1e-9 {
                return Err(Error::NegativeRate(EdgeId(i), *r));
            }
            *r = r.max(0.0);
        }
        Ok(RateAllocation(rates))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, f64)> + '_ {
        self.0.iter().enumerate().map(|(i, &r)| (EdgeId(i), r))
    }

    /// Total rate entering `v`.
    pub fn inflow(&self, g: &OverlayGraph, v: NodeId) -> f64 {
        g.in_edges(v).iter().map(|&e| self[e]).sum()
    }
}

impl Index<EdgeId> for RateAllocation {
    type Output = f64;
    fn index(&self, e: EdgeId) -> &f64 {
        &self.0[e.0]
    }
}

impl IndexMut<EdgeId> for RateAllocation {
    fn index_mut(&mut self, e: EdgeId) -> &mut f64 {
        &mut self.0[e.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// `max(0, max_k (A r - C)_k)`.
    pub max_violation: f64,
}

pub fn feasible(r: &RateAllocation, m: &CapacityModel, tol: f64) -> Result<Feasibility> {
    let loads = m.row_loads(r)?;
    let max_violation = loads.iter().zip(m.bounds()).map(|(load, cap)| load - cap).fold(0.0, f64::max);
    Ok(Feasibility { feasible: max_violation <= tol, max_violation })
}
