use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::grid::{Design, GridGraph, Layer, Net, Node};

use super::{CostMap, WeightVector};

pub const BASE_EDGE_COST: f64 = 1.0;
pub const WRONG_WAY_FACTOR: f64 = 4.0;
/// Added on top of the base edge cost when an edge changes layer.
pub const VIA_COST: f64 = 2.0;

/// Cost of traversing the edge `from -> to`, excluding node-entry terms.
#[inline]
pub fn edge_cost(from: Node, to: Node) -> f64 {
    if from.layer != to.layer {
        return BASE_EDGE_COST + VIA_COST;
    }
    let dir = GridGraph::step_direction(from, to);
    if dir == Layer::new(from.layer).preferred_direction {
        BASE_EDGE_COST
    } else {
        BASE_EDGE_COST * WRONG_WAY_FACTOR
    }
}

/// Cost charged on entering `node`: marker, overlap with other nets (on the
/// node itself and on its cross-track neighbors), and proximity to fixed
/// shapes.
#[inline]
pub fn entry_cost(grid: &GridGraph, cost_map: &CostMap, weights: &WeightVector, node: Node) -> f64 {
    let i = grid.index(node);
    let mut c = cost_map.marker[i] + weights.drc_cost * cost_map.occupancy[i] as f64;
    for m in spacing_partners(grid, node) {
        c += weights.drc_cost * cost_map.occupancy[grid.index(m)] as f64;
    }
    if grid.is_near_obstacle(node) {
        c += weights.fixed_shape_cost;
    }
    c
}

/// Same-layer neighbors across the preferred direction, i.e. the adjacent
/// tracks a wire on `n` would violate spacing against.
pub fn spacing_partners(grid: &GridGraph, n: Node) -> impl Iterator<Item = Node> {
    let (rows, cols) = (grid.num_rows, grid.num_cols);
    let cand = match Layer::new(n.layer).preferred_direction {
        crate::grid::Direction::Horizontal => [
            (n.row > 0).then(|| Node::new(n.layer, n.row.wrapping_sub(1), n.col)),
            (n.row + 1 < rows).then(|| Node::new(n.layer, n.row + 1, n.col)),
        ],
        crate::grid::Direction::Vertical => [
            (n.col > 0).then(|| Node::new(n.layer, n.row, n.col.wrapping_sub(1))),
            (n.col + 1 < cols).then(|| Node::new(n.layer, n.row, n.col + 1)),
        ],
    };
    cand.into_iter().flatten()
}

/// All traversable neighbors of `n`: same-layer 4-neighbors plus the nodes
/// directly above and below.
pub fn neighbors(grid: &GridGraph, n: Node) -> impl Iterator<Item = Node> + '_ {
    let up = (n.layer + 1 < grid.num_layers).then(|| Node::new(n.layer + 1, n.row, n.col));
    let down = (n.layer > 0).then(|| Node::new(n.layer - 1, n.row, n.col));
    grid.planar_neighbors(n)
        .chain(up)
        .chain(down)
        .filter(move |&m| !grid.is_blocked(m))
}

#[inline]
fn lower_bound(a: Node, b: Node) -> f64 {
    let planar = a.row.abs_diff(b.row) + a.col.abs_diff(b.col);
    planar as f64 * BASE_EDGE_COST + a.layer.abs_diff(b.layer) as f64 * (BASE_EDGE_COST + VIA_COST)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // max-heap: smallest f first, then deepest g, then lowest index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.index.cmp(&self.index))
    }
}

const NO_PARENT: usize = usize::MAX;

/// Minimum-cost path from any node of `sources` (cost 0) to `target`.
/// Returns the path from a source to `target` and its cost.
pub fn shortest_path(
    grid: &GridGraph,
    cost_map: &CostMap,
    weights: &WeightVector,
    sources: &[Node],
    target: Node,
) -> Option<(Vec<Node>, f64)> {
    let n = grid.num_nodes();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![NO_PARENT; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    for &s in sources {
        let i = grid.index(s);
        g[i] = 0.0;
        open.push(Open {
            f: lower_bound(s, target),
            g: 0.0,
            index: i,
        });
    }
    let t = grid.index(target);
    while let Some(Open { g: gc, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == t {
            let mut path = vec![target];
            let mut cur = index;
            while parent[cur] != NO_PARENT {
                cur = parent[cur];
                path.push(grid.node(cur));
            }
            path.reverse();
            return Some((path, gc));
        }
        let node = grid.node(index);
        for m in neighbors(grid, node) {
            let j = grid.index(m);
            if closed[j] {
                continue;
            }
            let cand = gc + edge_cost(node, m) + entry_cost(grid, cost_map, weights, m);
            if cand < g[j] {
                g[j] = cand;
                parent[j] = index;
                open.push(Open {
                    f: cand + lower_bound(m, target),
                    g: cand,
                    index: j,
                });
            }
        }
    }
    None
}

/// A routed net: the tree's nodes (sorted, unique) and edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<Node>,
    pub edges: Vec<(Node, Node)>,
}

impl Route {
    /// Number of same-layer edges; vias carry no wirelength.
    pub fn planar_edges(&self) -> usize {
        self.edges.iter().filter(|(a, b)| a.layer == b.layer).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedNet {
    pub route: Route,
    /// One path per 2-pin connection, in connection order.
    pub paths: Vec<Vec<Node>>,
    pub cost: f64,
}

/// Routes a multi-pin net by growing a tree from its first pin, each time
/// connecting the remaining pin nearest to the tree with a 2-pin search.
pub fn route_net(
    design: &Design,
    cost_map: &CostMap,
    weights: &WeightVector,
    net: &Net,
) -> Result<RoutedNet> {
    let grid = &design.grid;
    let mut tree: BTreeSet<Node> = BTreeSet::new();
    let mut tree_list = vec![net.pins[0]];
    tree.insert(net.pins[0]);
    let mut edges = BTreeSet::new();
    let mut remaining: Vec<Node> = net.pins[1..].to_vec();
    let mut paths = Vec::with_capacity(remaining.len());
    let mut total = 0.0;
    while !remaining.is_empty() {
        let (k, _) = remaining
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let d = tree_list
                    .iter()
                    .map(|&t| lower_bound(t, p))
                    .fold(f64::INFINITY, f64::min);
                (k, d)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("remaining is non-empty");
        let pin = remaining.remove(k);
        if tree.contains(&pin) {
            paths.push(vec![pin]);
            continue;
        }
        let (path, cost) = shortest_path(grid, cost_map, weights, &tree_list, pin).ok_or_else(
            || Error::Unroutable {
                net: net.id.clone(),
                pin,
            },
        )?;
        total += cost;
        for w in path.windows(2) {
            let e = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            edges.insert(e);
        }
        for &p in &path {
            if tree.insert(p) {
                tree_list.push(p);
            }
        }
        paths.push(path);
    }
    Ok(RoutedNet {
        route: Route {
            nodes: tree.into_iter().collect(),
            edges: edges.into_iter().collect(),
        },
        paths,
        cost: total,
    })
}
