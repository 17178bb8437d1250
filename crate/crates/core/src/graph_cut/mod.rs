//! Radial s-t graph over a [`NodeGrid`] and its minimum cut.
//!
//! The cut selects, for every ray `i`, a boundary node `b_i`; the nodes
//! `0..=b_i` form the object. The graph is a minimum-closed-set construction:
//!
//! * intra-ray arcs `v(i,j) -> v(i,j-1)` (infinite) make the object a prefix
//!   of each ray, and an infinite `s -> v(i,0)` anchor keeps it non-empty;
//! * inter-ray arcs `v(i,j) -> v(i±1, max(0, j-delta))` (infinite) enforce
//!   `|b_i - b_{i+1}| <= delta` cyclically;
//! * terminal arcs carry the telescoped node weights `c(i,j) - c(i,j-1)`, so
//!   a closed set with boundary `b` costs `sum_i c(i, b_i)` plus a constant.
//!
//! Node costs are `exp(-t_weight * contrast)` where contrast is the absolute
//! grey step from the previous node on the ray (the seed for `j = 0`); the
//! cut therefore settles on high-contrast positions.

mod maxflow;

pub use maxflow::{Dinic, RESIDUAL_EPS};

use crate::error::{Error, Result};
use crate::point::Point2;
use crate::template::{NodeGrid, RayFan, SeedPoint, Template};
use crate::volume::Slice2D;
use serde::{Deserialize, Serialize};

/// Largest smoothness bound accepted for `delta`.
pub const MAX_DELTA: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Number of rays.
    pub k: usize,
    /// Nodes per ray.
    pub n: usize,
    /// Maximum boundary index step between neighbouring rays.
    pub delta: usize,
    /// Contrast sensitivity of the node costs.
    pub t_weight: f64,
    /// Scale applied to a cut before it becomes the next template.
    pub sf: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            k: 40,
            n: 40,
            delta: 2,
            t_weight: 0.2,
            sf: 1.6,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::arg(format!("k must be >= 3, got {}", self.k)));
        }
        if self.n < 2 {
            return Err(Error::arg(format!("n must be >= 2, got {}", self.n)));
        }
        if self.delta > MAX_DELTA {
            return Err(Error::arg(format!("delta must be <= {MAX_DELTA}, got {}", self.delta)));
        }
        if !(self.t_weight.is_finite() && self.t_weight > 0.0) {
            return Err(Error::arg(format!("t_weight must be positive, got {}", self.t_weight)));
        }
        if !(self.sf.is_finite() && self.sf > 0.0) {
            return Err(Error::arg(format!("sf must be positive, got {}", self.sf)));
        }
        Ok(())
    }
}

/// `k x n` node costs, row-major by ray.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    k: usize,
    n: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(k: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || n == 0 || values.len() != k * n {
            return Err(Error::arg(format!(
                "{} costs cannot form a {k}x{n} matrix",
                values.len()
            )));
        }
        if values.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::arg("costs must be finite and non-negative"));
        }
        Ok(Self { k, n, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, ray: usize, node: usize) -> f64 {
        self.values[ray * self.n + node]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum_i c(i, b_i)`.
    pub fn objective(&self, boundary: &[usize]) -> f64 {
        boundary.iter().enumerate().map(|(i, &b)| self.get(i, b)).sum()
    }
}

pub fn node_costs(grid: &NodeGrid, t_weight: f64) -> CostMatrix {
    let mut values = Vec::with_capacity(grid.k * grid.n);
    for i in 0..grid.k {
        let mut prev = grid.seed_grey;
        for j in 0..grid.n {
            let g = grid.grey(i, j);
            values.push((-t_weight * (g - prev).abs()).exp());
            prev = g;
        }
    }
    CostMatrix {
        k: grid.k,
        n: grid.n,
        values,
    }
}

/// True when every index is below `n` and cyclic neighbours differ by at most `delta`.
pub fn is_feasible(boundary: &[usize], n: usize, delta: usize) -> bool {
    let k = boundary.len();
    boundary.iter().all(|&b| b < n) && (0..k).all(|i| boundary[i].abs_diff(boundary[(i + 1) % k]) <= delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcKind {
    /// `s -> v(i,0)`.
    SeedAnchor,
    /// `v(i,j) -> v(i,j-1)`.
    IntraRay,
    /// `v(i,j) -> v(i±1, max(0, j-delta))`.
    InterRay,
    /// Node weight arc to `s` or `t`.
    Terminal,
    /// Arcs of graphs not produced by [`FlowGraph::build`].
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn is_infinite(self) -> bool {
        matches!(self, Capacity::Infinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: Capacity,
    pub kind: ArcKind,
}

/// Directed s-t network. Radial graphs number node `v(i,j)` as `i*n + j` and
/// put the source and sink at `k*n` and `k*n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    node_count: usize,
    source: usize,
    sink: usize,
    arcs: Vec<FlowArc>,
}

/// Max-flow value and the residual-reachable source side.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow_value: f64,
    pub source_side: Vec<bool>,
}

impl FlowGraph {
    pub fn from_arcs(node_count: usize, source: usize, sink: usize, arcs: Vec<FlowArc>) -> Result<Self> {
        if source >= node_count || sink >= node_count || source == sink {
            return Err(Error::arg("source and sink must be distinct nodes of the graph"));
        }
        for a in &arcs {
            if a.from >= node_count || a.to >= node_count {
                return Err(Error::arg(format!("arc {} -> {} leaves the graph", a.from, a.to)));
            }
            if let Capacity::Finite(c) = a.capacity {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::arg(format!("arc {} -> {} has capacity {c}", a.from, a.to)));
                }
            }
        }
        Ok(Self {
            node_count,
            source,
            sink,
            arcs,
        })
    }

    pub fn build(costs: &CostMatrix, delta: usize) -> Result<Self> {
        let (k, n) = (costs.k, costs.n);
        if k < 3 {
            return Err(Error::arg(format!("k must be >= 3, got {k}")));
        }
        let node = |i: usize, j: usize| i * n + j;
        let (s, t) = (k * n, k * n + 1);
        let inf = |from, to, kind| FlowArc {
            from,
            to,
            capacity: Capacity::Infinite,
            kind,
        };
        let fin = |from, to, c| FlowArc {
            from,
            to,
            capacity: Capacity::Finite(c),
            kind: ArcKind::Terminal,
        };

        let mut arcs = Vec::with_capacity(k * (4 * n + 1));
        for i in 0..k {
            arcs.push(inf(s, node(i, 0), ArcKind::SeedAnchor));
            for j in 1..n {
                arcs.push(inf(node(i, j), node(i, j - 1), ArcKind::IntraRay));
            }
        }
        for i in 0..k {
            let prev = (i + k - 1) % k;
            let next = (i + 1) % k;
            for j in 0..n {
                let lower = j.saturating_sub(delta);
                arcs.push(inf(node(i, j), node(next, lower), ArcKind::InterRay));
                arcs.push(inf(node(i, j), node(prev, lower), ArcKind::InterRay));
            }
        }
        for i in 0..k {
            // the sink arc at j = 0 always sits below the infinite anchor and
            // only adds the constant c(i,0) to every cut
            arcs.push(fin(node(i, 0), t, costs.get(i, 0)));
            for j in 1..n {
                let w = costs.get(i, j) - costs.get(i, j - 1);
                if w < 0.0 {
                    arcs.push(fin(s, node(i, j), -w));
                } else {
                    arcs.push(fin(node(i, j), t, w));
                }
            }
        }
        Ok(Self {
            node_count: k * n + 2,
            source: s,
            sink: t,
            arcs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    /// Finite stand-in for infinite capacities: larger than the sum of all
    /// finite capacities, so no minimum cut can afford to sever it.
    pub fn infinity(&self) -> Result<f64> {
        let (sum, max) = self
            .arcs
            .iter()
            .fold((0.0f64, 0.0f64), |(sum, max), a| match a.capacity {
                Capacity::Finite(c) => (sum + c, max.max(c)),
                Capacity::Infinite => (sum, max),
            });
        let inf = 2.0 * sum.max(self.node_count as f64 * max) + 2.0;
        if !inf.is_finite() {
            return Err(Error::Internal("infinite-capacity sentinel overflows f64".into()));
        }
        Ok(inf)
    }

    /// Capacity of the arcs leaving `source_side`, or `None` if an infinite arc crosses.
    pub fn cut_capacity(&self, source_side: &[bool]) -> Option<f64> {
        let mut total = 0.0;
        for a in &self.arcs {
            if source_side[a.from] && !source_side[a.to] {
                match a.capacity {
                    Capacity::Finite(c) => total += c,
                    Capacity::Infinite => return None,
                }
            }
        }
        Some(total)
    }

    pub fn max_flow(&self) -> Result<MinCut> {
        let inf = self.infinity()?;
        let mut solver = Dinic::new(self.node_count);
        for a in &self.arcs {
            let cap = match a.capacity {
                Capacity::Finite(c) => c,
                Capacity::Infinite => inf,
            };
            solver.add_edge(a.from, a.to, cap);
        }
        let flow_value = solver.max_flow(self.source, self.sink);
        let source_side = solver.source_side(self.source);
        if source_side[self.sink] {
            return Err(Error::Internal("sink reachable after max-flow".into()));
        }
        let cut = self
            .cut_capacity(&source_side)
            .ok_or_else(|| Error::Internal("an infinite arc crosses the minimum cut".into()))?;
        if (cut - flow_value).abs() > 1e-7 * (1.0 + flow_value.abs()) {
            return Err(Error::Internal(format!(
                "cut capacity {cut} differs from flow {flow_value}"
            )));
        }
        Ok(MinCut {
            flow_value,
            source_side,
        })
    }
}

/// Per-ray boundary `b_i = max { j : v(i,j) in source side }`.
pub fn boundary_from_partition(k: usize, n: usize, source_side: &[bool]) -> Result<Vec<usize>> {
    (0..k)
        .map(|i| {
            let ray = &source_side[i * n..(i + 1) * n];
            let inside = ray.iter().take_while(|&&x| x).count();
            if inside == 0 {
                return Err(Error::Internal(format!("ray {i} has an empty object")));
            }
            if ray[inside..].iter().any(|&x| x) {
                return Err(Error::Internal(format!("source side of ray {i} is not a prefix")));
            }
            Ok(inside - 1)
        })
        .collect()
}

/// One slice's minimum cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    /// Outermost object node per ray.
    pub boundary: Vec<usize>,
    /// Boundary node positions in ray order.
    pub contour: Vec<Point2>,
    /// `sum_i c(i, b_i)`.
    pub objective: f64,
    pub cut_cost: f64,
    pub flow_value: f64,
}

pub fn extract_cut(grid: &NodeGrid, costs: &CostMatrix, cut: &MinCut) -> Result<CutResult> {
    let boundary = boundary_from_partition(grid.k, grid.n, &cut.source_side)?;
    let contour = boundary.iter().enumerate().map(|(i, &b)| grid.position(i, b)).collect();
    Ok(CutResult {
        objective: costs.objective(&boundary),
        boundary,
        contour,
        cut_cost: cut.flow_value,
        flow_value: cut.flow_value,
    })
}

/// Minimum-cost boundary for a cost matrix; the graph-only half of the pipeline.
pub fn solve_boundary(costs: &CostMatrix, delta: usize) -> Result<(Vec<usize>, MinCut)> {
    let graph = FlowGraph::build(costs, delta)?;
    let cut = graph.max_flow()?;
    let boundary = boundary_from_partition(costs.k, costs.n, &cut.source_side)?;
    if !is_feasible(&boundary, costs.n, delta) {
        return Err(Error::Internal(format!(
            "boundary {boundary:?} violates delta = {delta}"
        )));
    }
    Ok((boundary, cut))
}

/// Node grid and cut of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSegmentation {
    pub grid: NodeGrid,
    pub cut: CutResult,
}

impl SliceSegmentation {
    pub fn run(slice: &Slice2D, template: &Template, seed: SeedPoint, params: &GraphParams) -> Result<Self> {
        params.validate()?;
        if template.z_index != slice.z_index || seed.z_index != slice.z_index {
            return Err(Error::arg(format!(
                "template (z={}) and seed (z={}) must lie on slice {}",
                template.z_index, seed.z_index, slice.z_index
            )));
        }
        let fan = RayFan::cast(seed, template, params.k)?;
        let grid = NodeGrid::sample(&fan, params.n, slice)?;
        let costs = node_costs(&grid, params.t_weight);
        let (_, min_cut) = solve_boundary(&costs, params.delta)?;
        let cut = extract_cut(&grid, &costs, &min_cut)?;
        Ok(Self { grid, cut })
    }
}

pub fn segment_one_slice(
    slice: &Slice2D,
    template: &Template,
    seed: SeedPoint,
    params: &GraphParams,
) -> Result<CutResult> {
    SliceSegmentation::run(slice, template, seed, params).map(|s| s.cut)
}

#[cfg(test)]
mod tests;
