use serde::{Deserialize, Serialize};

use crate::grid::{Design, Layer, Node};

use super::astar::Route;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Short,
    Spacing,
    FixedShape,
}

/// A design rule violation. `nets` holds net ids in ascending order: two for
/// shorts and spacing, one for fixed-shape conflicts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub node: Node,
    pub kind: ViolationKind,
    pub nets: Vec<String>,
}

fn ordered_pair(a: &str, b: &str) -> Vec<String> {
    if a <= b {
        vec![a.to_string(), b.to_string()]
    } else {
        vec![b.to_string(), a.to_string()]
    }
}

/// Checks routed nets for shorts, spacing and fixed-shape violations.
///
/// `routes[i]` is the route of `design.nets[i]`; unrouted nets are skipped.
/// Spacing is checked only across the layer's preferred direction, i.e.
/// between parallel neighboring tracks, with one violation per adjacent node
/// pair placed on the lower node and naming the smallest net pair. The
/// result is sorted by (layer, row, col, kind, nets).
pub fn run_drc(design: &Design, routes: &[Option<Route>]) -> Vec<Violation> {
    let grid = &design.grid;
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); grid.num_nodes()];
    for (k, route) in routes.iter().enumerate() {
        if let Some(route) = route {
            for &n in &route.nodes {
                users[grid.index(n)].push(k);
            }
        }
    }
    let id = |k: usize| design.nets[k].id.as_str();

    let mut out = Vec::new();
    for (i, here) in users.iter().enumerate() {
        if here.is_empty() {
            continue;
        }
        let node = grid.node(i);
        for (a, &x) in here.iter().enumerate() {
            for &y in &here[a + 1..] {
                out.push(Violation {
                    node,
                    kind: ViolationKind::Short,
                    nets: ordered_pair(id(x), id(y)),
                });
            }
        }

        // the one neighbor across the preferred direction, forward only so
        // each unordered node pair is visited once
        let across = match Layer::new(node.layer).preferred_direction {
            crate::grid::Direction::Horizontal => {
                (node.row + 1 < grid.num_rows).then(|| Node::new(node.layer, node.row + 1, node.col))
            }
            crate::grid::Direction::Vertical => {
                (node.col + 1 < grid.num_cols).then(|| Node::new(node.layer, node.row, node.col + 1))
            }
        };
        if let Some(other) = across {
            let there = &users[grid.index(other)];
            let pair = here
                .iter()
                .flat_map(|&x| there.iter().filter(move |&&y| y != x).map(move |&y| ordered_pair(id(x), id(y))))
                .min();
            if let Some(nets) = pair {
                out.push(Violation {
                    node,
                    kind: ViolationKind::Spacing,
                    nets,
                });
            }
        }

        if grid.is_near_obstacle(node) {
            for &x in here {
                out.push(Violation {
                    node,
                    kind: ViolationKind::FixedShape,
                    nets: vec![id(x).to_string()],
                });
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridGraph, Net};

    fn route(nodes: &[Node]) -> Route {
        let mut nodes = nodes.to_vec();
        nodes.sort();
        Route {
            nodes,
            edges: vec![],
        }
    }

    fn two_net_design(obstacles: Vec<Node>) -> Design {
        let grid = GridGraph::new(2, 5, 5, 1.0, obstacles, &[]).unwrap();
        let nets = vec![
            Net {
                id: "A".into(),
                pins: vec![Node::new(0, 0, 0), Node::new(0, 0, 4)],
            },
            Net {
                id: "B".into(),
                pins: vec![Node::new(0, 4, 0), Node::new(0, 4, 4)],
            },
        ];
        Design::new("t".into(), grid, nets, vec![]).unwrap()
    }

    #[test]
    fn single_net_is_clean() {
        let d = two_net_design(vec![]);
        let r = route(&(0..5).map(|c| Node::new(0, 0, c)).collect::<Vec<_>>());
        assert!(run_drc(&d, &[Some(r), None]).is_empty());
    }

    #[test]
    fn shared_node_is_one_short() {
        let d = two_net_design(vec![]);
        let a = route(&[Node::new(0, 2, 1), Node::new(0, 2, 2), Node::new(0, 2, 3)]);
        let b = route(&[Node::new(1, 1, 2), Node::new(0, 2, 2), Node::new(1, 2, 2)]);
        let v = run_drc(&d, &[Some(a), Some(b)]);
        assert_eq!(
            v,
            vec![Violation {
                node: Node::new(0, 2, 2),
                kind: ViolationKind::Short,
                nets: vec!["A".into(), "B".into()],
            }]
        );
    }

    #[test]
    fn spacing_only_across_preferred_direction() {
        let d = two_net_design(vec![]);
        // layer 0 is horizontal: vertically stacked tracks conflict
        let a = route(&[Node::new(0, 1, 1)]);
        let b = route(&[Node::new(0, 2, 1)]);
        let v = run_drc(&d, &[Some(a), Some(b)]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Spacing);
        assert_eq!(v[0].node, Node::new(0, 1, 1));
        // end-to-end along the preferred direction is fine
        let a = route(&[Node::new(0, 1, 1)]);
        let b = route(&[Node::new(0, 1, 2)]);
        assert!(run_drc(&d, &[Some(a), Some(b)]).is_empty());
        // layer 1 is vertical: side-by-side columns conflict
        let a = route(&[Node::new(1, 1, 1)]);
        let b = route(&[Node::new(1, 1, 2)]);
        assert_eq!(run_drc(&d, &[Some(a), Some(b)])[0].kind, ViolationKind::Spacing);
    }

    #[test]
    fn fixed_shape_per_net_per_node() {
        let d = two_net_design(vec![Node::new(0, 2, 2)]);
        let a = route(&[Node::new(0, 2, 1)]);
        let v = run_drc(&d, &[Some(a), None]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::FixedShape);
        assert_eq!(v[0].nets, vec!["A".to_string()]);
    }
}
