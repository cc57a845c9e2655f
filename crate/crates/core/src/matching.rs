//! Dependency graph between value-vector entries and measurements.
//!
//! A common vertex `k` is adjacent to every measurement of sensor `j` unless column
//! `k` of `P_C` is also a column of `P_j`; an innovation vertex of sensor `j` is
//! adjacent to exactly sensor `j`'s measurements. A matching that saturates the value
//! vertices assigns each common entry to a sensor that can resolve it.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::check_known_p;
use crate::ensemble::LocationMatrix;
use crate::{DcsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueVertex {
    Common { index: usize },
    Innovation { sensor: usize, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementVertex {
    pub sensor: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub value_vertices: Vec<ValueVertex>,
    pub measurement_vertices: Vec<MeasurementVertex>,
    /// `adjacency[v]` lists measurement-vertex indices in increasing order.
    pub adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    k_common: usize,
    #[serde(skip)]
    sensors: usize,
}

/// Builds the graph for `p` with `allocation[j]` measurements at sensor `j`.
///
/// Value vertices: common block first, then innovations sensor by sensor.
/// Measurement vertices: sensor by sensor, rows in order.
pub fn build_graph(p: &LocationMatrix, allocation: &[usize]) -> Result<BipartiteGraph> {
    if allocation.len() != p.sensors() {
        return Err(DcsError::DimensionMismatch(format!(
            "allocation has {} entries, location matrix has J = {}",
            allocation.len(),
            p.sensors()
        )));
    }
    let mut measurement_vertices = Vec::new();
    let mut sensor_rows = Vec::with_capacity(p.sensors());
    for (sensor, &m) in allocation.iter().enumerate() {
        let start = measurement_vertices.len();
        measurement_vertices.extend((0..m).map(|row| MeasurementVertex { sensor, row }));
        sensor_rows.push(start..start + m);
    }

    let mut value_vertices = Vec::with_capacity(p.num_columns());
    let mut adjacency = Vec::with_capacity(p.num_columns());
    for (index, &row) in p.common().columns().iter().enumerate() {
        value_vertices.push(ValueVertex::Common { index });
        adjacency.push(
            (0..p.sensors()).filter(|&j| !p.innovation(j).contains(row)).flat_map(|j| sensor_rows[j].clone()).collect(),
        );
    }
    for (sensor, rows) in sensor_rows.iter().enumerate() {
        for index in 0..p.k_innovation(sensor) {
            value_vertices.push(ValueVertex::Innovation { sensor, index });
            adjacency.push(rows.clone().collect());
        }
    }
    Ok(BipartiteGraph { value_vertices, measurement_vertices, adjacency, k_common: p.k_common(), sensors: p.sensors() })
}

impl BipartiteGraph {
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(v, ms)| ms.iter().map(move |&m| (v, m)))
    }

    /// `E(Π)`: measurement vertices adjacent to any value vertex in `set`.
    pub fn neighbours(&self, set: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.measurement_vertices.len()];
        for &v in set {
            for &m in &self.adjacency[v] {
                seen[m] = true;
            }
        }
        (0..seen.len()).filter(|&m| seen[m]).collect()
    }

    /// Graphviz rendering; matched edges drawn bold when `matching` is given.
    pub fn to_dot(&self, matching: Option<&MatchingResult>) -> String {
        let mut out = String::from("graph dependencies {\n  rankdir=LR;\n");
        for (v, vertex) in self.value_vertices.iter().enumerate() {
            let label = match vertex {
                ValueVertex::Common { index } => format!("c{index}"),
                ValueVertex::Innovation { sensor, index } => format!("i{sensor}.{index}"),
            };
            out.push_str(&format!("  v{v} [label=\"{label}\", shape=circle];\n"));
        }
        for (m, vertex) in self.measurement_vertices.iter().enumerate() {
            out.push_str(&format!("  m{m} [label=\"y{}({})\", shape=box];\n", vertex.sensor, vertex.row));
        }
        for (v, m) in self.edges() {
            let matched = matching.is_some_and(|r| r.pairs.contains(&(v, m)));
            let style = if matched { " [penwidth=3]" } else { "" };
            out.push_str(&format!("  v{v} -- m{m}{style};\n"));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub complete: bool,
    /// Matched `(value vertex, measurement vertex)` pairs in value-vertex order.
    pub pairs: Vec<(usize, usize)>,
    /// On failure, value vertices `Π` with `|E(Π)| < |Π|`.
    pub deficient_set: Option<Vec<usize>>,
    /// On success, the sensor each common entry is assigned to.
    pub assignment: Option<Vec<usize>>,
    /// On success, `C_j`: number of common entries assigned to sensor `j`.
    pub assignment_counts: Option<Vec<usize>>,
}

/// Maximum matching by Hopcroft-Karp, scanning vertices in graph order.
///
/// When the matching is not saturating, the value vertices reachable from unmatched
/// ones along alternating paths form the deficient set.
pub fn find_matching(g: &BipartiteGraph) -> MatchingResult {
    let left = g.value_vertices.len();
    let right = g.measurement_vertices.len();
    let mut mate_left: Vec<Option<usize>> = vec![None; left];
    let mut mate_right: Vec<Option<usize>> = vec![None; right];

    loop {
        let dist = layer(g, &mate_left, &mate_right);
        let mut augmented = false;
        for u in 0..left {
            if mate_left[u].is_none() && augment(g, u, &dist, &mut mate_left, &mut mate_right, &mut vec![false; left]) {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }

    let pairs: Vec<(usize, usize)> = mate_left.iter().enumerate().filter_map(|(v, m)| m.map(|m| (v, m))).collect();
    if pairs.len() == left {
        let assignment: Vec<usize> =
            (0..g.k_common).map(|k| g.measurement_vertices[mate_left[k].expect("saturated")].sensor).collect();
        let mut counts = vec![0; g.sensors];
        for &j in &assignment {
            counts[j] += 1;
        }
        MatchingResult {
            complete: true,
            pairs,
            deficient_set: None,
            assignment: Some(assignment),
            assignment_counts: Some(counts),
        }
    } else {
        MatchingResult {
            complete: false,
            pairs,
            deficient_set: Some(alternating_reach(g, &mate_left, &mate_right)),
            assignment: None,
            assignment_counts: None,
        }
    }
}

const UNREACHED: usize = usize::MAX;

fn layer(g: &BipartiteGraph, mate_left: &[Option<usize>], mate_right: &[Option<usize>]) -> Vec<usize> {
    let mut dist = vec![UNREACHED; mate_left.len()];
    let mut queue = VecDeque::new();
    for (u, m) in mate_left.iter().enumerate() {
        if m.is_none() {
            dist[u] = 0;
            queue.push_back(u);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &m in &g.adjacency[u] {
            if let Some(w) = mate_right[m] {
                if dist[w] == UNREACHED {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    dist
}

fn augment(
    g: &BipartiteGraph,
    u: usize,
    dist: &[usize],
    mate_left: &mut [Option<usize>],
    mate_right: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    visited[u] = true;
    for &m in &g.adjacency[u] {
        let free = match mate_right[m] {
            None => true,
            Some(w) => !visited[w] && dist[w] == dist[u] + 1 && augment(g, w, dist, mate_left, mate_right, visited),
        };
        if free {
            mate_left[u] = Some(m);
            mate_right[m] = Some(u);
            return true;
        }
    }
    false
}

fn alternating_reach(g: &BipartiteGraph, mate_left: &[Option<usize>], mate_right: &[Option<usize>]) -> Vec<usize> {
    let mut reached = vec![false; mate_left.len()];
    let mut queue: VecDeque<usize> = (0..mate_left.len()).filter(|&u| mate_left[u].is_none()).collect();
    for &u in &queue {
        reached[u] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &m in &g.adjacency[u] {
            // A maximum matching leaves no free vertex reachable here.
            let w = mate_right[m].expect("maximum matching");
            if !reached[w] {
                reached[w] = true;
                queue.push_back(w);
            }
        }
    }
    (0..reached.len()).filter(|&u| reached[u]).collect()
}

/// Hall's condition for the dependency graph, evaluated through the per-subset
/// bound: neighbourhoods are unions of whole sensors.
pub fn hall_feasible(p: &LocationMatrix, allocation: &[usize]) -> Result<bool> {
    Ok(check_known_p(allocation, p)?.satisfied)
}

/// `Υ₀`: for each common column `k` (in increasing order) and every sensor whose
/// innovation block repeats that index, subtract the matching innovation column of
/// `Υ` from column `k`, zeroing the duplicated `Φ_j P_C` block.
pub fn partially_zero(upsilon: &DMatrix<f64>, p: &LocationMatrix) -> Result<DMatrix<f64>> {
    if upsilon.ncols() != p.num_columns() {
        return Err(DcsError::DimensionMismatch(format!(
            "matrix has {} columns, location matrix has {}",
            upsilon.ncols(),
            p.num_columns()
        )));
    }
    let mut zeroed = upsilon.clone();
    for k in 0..p.k_common() {
        for (j, local) in p.overlaps_of_common(k) {
            let source = p.innovation_offset(j) + local;
            let col = upsilon.column(source).clone_owned();
            let mut target = zeroed.column_mut(k);
            target -= col;
        }
    }
    Ok(zeroed)
}
