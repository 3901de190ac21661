//! The iterative detailed router.
//!
//! Each iteration routes (or reroutes) nets with a weighted A*, runs the
//! design rule check, and folds the violations into a decaying per-node
//! marker map that steers the next iteration away from them.

pub mod astar;
pub mod drc;
pub mod partition;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{static_features, Design, GridGraph, StaticFeatures};

pub use astar::{route_net, Route, RoutedNet};
pub use drc::{run_drc, Violation, ViolationKind};
pub use partition::{partition_stats, PartitionStats, Tiling, DEFAULT_TILE_SIZE};

pub const DEFAULT_MAX_ITERATIONS: usize = 64;

/// The four tunable violation costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    /// Penalty for overlapping another net, and marker seeded at a violation.
    pub drc_cost: f64,
    /// Marker added to the neighbors of a violation.
    pub marker_cost: f64,
    /// Cost of entering a node beside a fixed shape.
    pub fixed_shape_cost: f64,
    /// Per-iteration multiplier applied to all markers.
    pub marker_decay: f64,
}

/// Accumulated marker cost and current occupancy, one slot per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    pub marker: Vec<f64>,
    pub occupancy: Vec<u32>,
}

impl CostMap {
    pub fn new(grid: &GridGraph) -> Self {
        CostMap {
            marker: vec![0.0; grid.num_nodes()],
            occupancy: vec![0; grid.num_nodes()],
        }
    }

    pub fn occupy(&mut self, grid: &GridGraph, route: &Route) {
        for &n in &route.nodes {
            self.occupancy[grid.index(n)] += 1;
        }
    }

    pub fn release(&mut self, grid: &GridGraph, route: &Route) {
        for &n in &route.nodes {
            let slot = &mut self.occupancy[grid.index(n)];
            debug_assert!(*slot > 0, "releasing unoccupied node {n:?}");
            *slot -= 1;
        }
    }

    /// Decays every marker, then seeds new cost at each violation and its
    /// same-layer neighbors.
    pub fn update(&mut self, grid: &GridGraph, violations: &[Violation], weights: &WeightVector) {
        for m in &mut self.marker {
            *m *= weights.marker_decay;
        }
        for v in violations {
            let here = match v.kind {
                ViolationKind::FixedShape => weights.fixed_shape_cost,
                _ => weights.drc_cost,
            };
            self.marker[grid.index(v.node)] += here;
            for n in grid.planar_neighbors(v.node) {
                self.marker[grid.index(n)] += weights.marker_cost;
            }
        }
    }
}

pub fn update_cost_map(
    cost_map: &mut CostMap,
    grid: &GridGraph,
    violations: &[Violation],
    weights: &WeightVector,
) {
    cost_map.update(grid, violations, weights)
}

/// Snapshot recorded at the end of one ripup-and-reroute iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub iteration: usize,
    pub weights: WeightVector,
    pub partition_drvs: Vec<u32>,
    pub max_partition_drv: u32,
    pub neighbor_drvs: Vec<u32>,
    pub total_drvs: u32,
    pub total_wirelength_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub design_name: String,
    #[serde(rename = "static")]
    pub static_features: StaticFeatures,
    pub states: Vec<IterationState>,
    pub converged: bool,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.states.len()
    }

    pub fn final_drvs(&self) -> u32 {
        self.states.last().map_or(0, |s| s.total_drvs)
    }

    pub fn drv_curve(&self) -> Vec<u32> {
        self.states.iter().map(|s| s.total_drvs).collect()
    }
}

/// Supplies the weights for the next iteration given the history so far.
pub trait WeightPolicy {
    fn next_weights(&mut self, features: &StaticFeatures, history: &[IterationState]) -> Result<WeightVector>;
}

impl<F> WeightPolicy for F
where
    F: FnMut(&StaticFeatures, &[IterationState]) -> Result<WeightVector>,
{
    fn next_weights(&mut self, features: &StaticFeatures, history: &[IterationState]) -> Result<WeightVector> {
        self(features, history)
    }
}

/// Mutable routing state for one flow over one design.
#[derive(Debug, Clone)]
pub struct FlowContext<'a> {
    pub design: &'a Design,
    pub cost_map: CostMap,
    /// `routes[i]` routes `design.nets[i]`.
    pub routes: Vec<Option<Route>>,
    pub violations: Vec<Violation>,
    pub iteration: usize,
    pub tile_size: usize,
    order: Vec<usize>,
}

impl<'a> FlowContext<'a> {
    pub fn new(design: &'a Design) -> Self {
        FlowContext {
            design,
            cost_map: CostMap::new(&design.grid),
            routes: vec![None; design.nets.len()],
            violations: Vec::new(),
            iteration: 0,
            tile_size: DEFAULT_TILE_SIZE,
            order: design.net_order(),
        }
    }

    /// Nets to rip up before the next iteration: every net named in a
    /// current violation or touching a node with a positive marker.
    pub fn ripup_set(&self) -> Vec<bool> {
        let grid = &self.design.grid;
        let mut rip = vec![false; self.design.nets.len()];
        if self.iteration == 0 {
            rip.fill(true);
            return rip;
        }
        let mut implicated = std::collections::BTreeSet::new();
        for v in &self.violations {
            for id in &v.nets {
                implicated.insert(id.as_str());
            }
        }
        for (k, net) in self.design.nets.iter().enumerate() {
            if implicated.contains(net.id.as_str()) {
                rip[k] = true;
            } else if let Some(route) = &self.routes[k] {
                rip[k] = route.nodes.iter().any(|&n| self.cost_map.marker[grid.index(n)] > 0.0);
            }
        }
        rip
    }

    pub fn run_iteration(&mut self, weights: &WeightVector) -> Result<IterationState> {
        let grid = &self.design.grid;
        let rip = self.ripup_set();
        for (k, &r) in rip.iter().enumerate() {
            if r {
                if let Some(old) = self.routes[k].take() {
                    self.cost_map.release(grid, &old);
                }
            }
        }
        for &k in &self.order {
            if !rip[k] {
                continue;
            }
            let routed = route_net(self.design, &self.cost_map, weights, &self.design.nets[k])?;
            self.cost_map.occupy(grid, &routed.route);
            self.routes[k] = Some(routed.route);
        }

        self.violations = run_drc(self.design, &self.routes);
        self.cost_map.update(grid, &self.violations, weights);
        let stats = partition_stats(&self.violations, grid, self.tile_size);
        let planar: usize = self.routes.iter().flatten().map(Route::planar_edges).sum();
        let state = IterationState {
            iteration: self.iteration,
            weights: *weights,
            total_drvs: self.violations.len() as u32,
            partition_drvs: stats.partition_drvs,
            max_partition_drv: stats.max_partition_drv,
            neighbor_drvs: stats.neighbor_drvs,
            total_wirelength_um: planar as f64 * grid.pitch_um,
        };
        self.iteration += 1;
        Ok(state)
    }
}

/// Runs ripup-and-reroute until no violations remain or `max_iterations`
/// iterations have been spent.
pub fn run_flow(design: &Design, policy: &mut dyn WeightPolicy, max_iterations: usize) -> Result<Trajectory> {
    let features = static_features(design);
    let mut ctx = FlowContext::new(design);
    let mut states: Vec<IterationState> = Vec::new();
    let mut converged = false;
    while states.len() < max_iterations.max(1) {
        let weights = policy.next_weights(&features, &states)?;
        let state = ctx.run_iteration(&weights)?;
        converged = state.total_drvs == 0;
        states.push(state);
        if converged {
            break;
        }
    }
    Ok(Trajectory {
        design_name: design.name.clone(),
        static_features: features,
        states,
        converged,
    })
}
