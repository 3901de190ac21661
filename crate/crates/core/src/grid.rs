//! Routing problem instances: the 3D grid graph, nets, macros, and the static
//! design characteristics handed to the policy.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid node addressed as `(layer, row, col)`. Serialized as a 3-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Node {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

impl Node {
    pub const fn new(layer: usize, row: usize, col: usize) -> Self {
        Node { layer, row, col }
    }
}

impl From<[usize; 3]> for Node {
    fn from([layer, row, col]: [usize; 3]) -> Self {
        Node { layer, row, col }
    }
}

impl From<Node> for [usize; 3] {
    fn from(n: Node) -> Self {
        [n.layer, n.row, n.col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn perpendicular(self) -> Self {
        match self {
            Direction::Horizontal => Direction::Vertical,
            Direction::Vertical => Direction::Horizontal,
        }
    }
}

/// A routing layer. Even layers prefer horizontal wires, odd layers vertical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub index: usize,
    pub preferred_direction: Direction,
}

impl Layer {
    pub fn new(index: usize) -> Self {
        let preferred_direction = if index.is_multiple_of(2) {
            Direction::Horizontal
        } else {
            Direction::Vertical
        };
        Layer {
            index,
            preferred_direction,
        }
    }
}

/// Axis-aligned box of obstacle nodes, inclusive on both corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 6]", into = "[usize; 6]")]
pub struct Macro {
    pub lo: Node,
    pub hi: Node,
}

impl From<[usize; 6]> for Macro {
    fn from(v: [usize; 6]) -> Self {
        Macro {
            lo: Node::new(v[0], v[1], v[2]),
            hi: Node::new(v[3], v[4], v[5]),
        }
    }
}

impl From<Macro> for [usize; 6] {
    fn from(m: Macro) -> Self {
        [m.lo.layer, m.lo.row, m.lo.col, m.hi.layer, m.hi.row, m.hi.col]
    }
}

impl Macro {
    pub fn contains(&self, n: Node) -> bool {
        (self.lo.layer..=self.hi.layer).contains(&n.layer)
            && (self.lo.row..=self.hi.row).contains(&n.row)
            && (self.lo.col..=self.hi.col).contains(&n.col)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (self.lo.layer..=self.hi.layer).flat_map(move |l| {
            (self.lo.row..=self.hi.row)
                .flat_map(move |r| (self.lo.col..=self.hi.col).map(move |c| Node::new(l, r, c)))
        })
    }
}

/// The routing grid. `blocked` covers explicit obstacles and macro cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    pub num_layers: usize,
    pub num_rows: usize,
    pub num_cols: usize,
    pub pitch_um: f64,
    /// Explicit fixed-shape nodes, sorted and unique.
    pub obstacles: Vec<Node>,
    blocked: Vec<bool>,
    near_obstacle: Vec<bool>,
}

impl GridGraph {
    pub fn new(
        num_layers: usize,
        num_rows: usize,
        num_cols: usize,
        pitch_um: f64,
        obstacles: Vec<Node>,
        macros: &[Macro],
    ) -> Result<Self> {
        if num_layers == 0 || num_rows == 0 || num_cols == 0 {
            return Err(Error::Validation("grid dimensions must be positive".into()));
        }
        if !(pitch_um.is_finite() && pitch_um > 0.0) {
            return Err(Error::Validation(format!("pitch_um must be positive, got {pitch_um}")));
        }
        let mut grid = GridGraph {
            num_layers,
            num_rows,
            num_cols,
            pitch_um,
            obstacles: Vec::new(),
            blocked: vec![false; num_layers * num_rows * num_cols],
            near_obstacle: Vec::new(),
        };
        let mut seen = BTreeSet::new();
        for &o in &obstacles {
            if !grid.in_bounds(o) {
                return Err(Error::Validation(format!("obstacle {o:?} out of bounds")));
            }
            if !seen.insert(o) {
                return Err(Error::Validation(format!("duplicate obstacle {o:?}")));
            }
            let i = grid.index(o);
            grid.blocked[i] = true;
        }
        for m in macros {
            if !(grid.in_bounds(m.lo) && grid.in_bounds(m.hi))
                || m.lo.layer > m.hi.layer
                || m.lo.row > m.hi.row
                || m.lo.col > m.hi.col
            {
                return Err(Error::Validation(format!("macro {m:?} outside die bounds")));
            }
            for n in m.nodes() {
                let i = grid.index(n);
                grid.blocked[i] = true;
            }
        }
        grid.obstacles = seen.into_iter().collect();
        grid.near_obstacle = (0..grid.num_nodes())
            .map(|i| {
                let n = grid.node(i);
                grid.planar_neighbors(n).any(|m| grid.is_blocked(m))
            })
            .collect();
        Ok(grid)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_layers * self.num_rows * self.num_cols
    }

    pub fn in_bounds(&self, n: Node) -> bool {
        n.layer < self.num_layers && n.row < self.num_rows && n.col < self.num_cols
    }

    #[inline]
    pub fn index(&self, n: Node) -> usize {
        (n.layer * self.num_rows + n.row) * self.num_cols + n.col
    }

    #[inline]
    pub fn node(&self, index: usize) -> Node {
        let col = index % self.num_cols;
        let rest = index / self.num_cols;
        Node::new(rest / self.num_rows, rest % self.num_rows, col)
    }

    pub fn layer(&self, index: usize) -> Layer {
        Layer::new(index)
    }

    #[inline]
    pub fn is_blocked(&self, n: Node) -> bool {
        self.blocked[self.index(n)]
    }

    /// True if a same-layer 4-neighbor of `n` is blocked.
    #[inline]
    pub fn is_near_obstacle(&self, n: Node) -> bool {
        self.near_obstacle[self.index(n)]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|&&b| b).count()
    }

    /// Same-layer 4-neighbors within bounds, in (row-1, row+1, col-1, col+1) order.
    pub fn planar_neighbors(&self, n: Node) -> impl Iterator<Item = Node> {
        let (rows, cols) = (self.num_rows, self.num_cols);
        let cand = [
            (n.row > 0).then(|| Node::new(n.layer, n.row.wrapping_sub(1), n.col)),
            (n.row + 1 < rows).then(|| Node::new(n.layer, n.row + 1, n.col)),
            (n.col > 0).then(|| Node::new(n.layer, n.row, n.col.wrapping_sub(1))),
            (n.col + 1 < cols).then(|| Node::new(n.layer, n.row, n.col + 1)),
        ];
        cand.into_iter().flatten()
    }

    /// Direction of the planar step between two 4-adjacent same-layer nodes.
    pub fn step_direction(a: Node, b: Node) -> Direction {
        if a.row == b.row {
            Direction::Horizontal
        } else {
            Direction::Vertical
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: String,
    pub pins: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub name: String,
    pub grid: GridGraph,
    pub nets: Vec<Net>,
    pub macros: Vec<Macro>,
}

/// On-disk design document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub name: String,
    pub layers: usize,
    pub rows: usize,
    pub cols: usize,
    pub pitch_um: f64,
    pub obstacles: Vec<Node>,
    pub macros: Vec<Macro>,
    pub nets: Vec<Net>,
}

impl Design {
    pub fn new(name: String, grid: GridGraph, nets: Vec<Net>, macros: Vec<Macro>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for net in &nets {
            if !ids.insert(net.id.as_str()) {
                return Err(Error::Validation(format!("duplicate net id {:?}", net.id)));
            }
            if net.pins.len() < 2 {
                return Err(Error::Validation(format!("net {:?} has fewer than 2 pins", net.id)));
            }
            let mut pins = BTreeSet::new();
            for &p in &net.pins {
                if !grid.in_bounds(p) {
                    return Err(Error::Validation(format!(
                        "net {:?} pin {p:?} out of bounds",
                        net.id
                    )));
                }
                if grid.is_blocked(p) {
                    return Err(Error::Validation(format!(
                        "net {:?} pin {p:?} lies on an obstacle",
                        net.id
                    )));
                }
                if !pins.insert(p) {
                    return Err(Error::Validation(format!(
                        "net {:?} repeats pin {p:?}",
                        net.id
                    )));
                }
            }
        }
        Ok(Design {
            name,
            grid,
            nets,
            macros,
        })
    }

    pub fn from_file(file: DesignFile) -> Result<Self> {
        let grid = GridGraph::new(
            file.layers,
            file.rows,
            file.cols,
            file.pitch_um,
            file.obstacles,
            &file.macros,
        )?;
        Design::new(file.name, grid, file.nets, file.macros)
    }

    pub fn to_file(&self) -> DesignFile {
        DesignFile {
            name: self.name.clone(),
            layers: self.grid.num_layers,
            rows: self.grid.num_rows,
            cols: self.grid.num_cols,
            pitch_um: self.grid.pitch_um,
            obstacles: self.grid.obstacles.clone(),
            macros: self.macros.clone(),
            nets: self.nets.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "design".into(),
            message: e.to_string(),
        })?;
        Design::from_file(file)
    }

    /// Net indices sorted by ascending id; the router's fixed net order.
    pub fn net_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.nets.len()).collect();
        order.sort_by(|&a, &b| self.nets[a].id.cmp(&self.nets[b].id));
        order
    }

    pub fn total_pins(&self) -> usize {
        self.nets.iter().map(|n| n.pins.len()).sum()
    }
}

pub fn load_design(path: impl AsRef<Path>) -> Result<Design> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Design::from_json(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            what: path.display().to_string(),
            message,
        },
        other => other,
    })
}

pub fn save_design(design: &Design, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, design.to_json() + "\n").map_err(|e| Error::io(path, e))
}

/// Parameters for [`generate_synthetic_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub layers: usize,
    pub rows: usize,
    pub cols: usize,
    pub num_nets: usize,
    pub min_pins: usize,
    pub max_pins: usize,
    /// Fraction of the die footprint covered by macros, in `[0, 0.3]`.
    pub obstacle_density: f64,
    /// Pins of one net are drawn from a square window of this side length.
    pub net_span: usize,
}

impl SynthConfig {
    pub fn easy() -> Self {
        SynthConfig {
            layers: 3,
            rows: 16,
            cols: 16,
            num_nets: 4,
            min_pins: 2,
            max_pins: 3,
            obstacle_density: 0.0,
            net_span: 8,
        }
    }

    pub fn congested() -> Self {
        SynthConfig {
            layers: 3,
            rows: 24,
            cols: 24,
            num_nets: 12,
            min_pins: 2,
            max_pins: 3,
            obstacle_density: 0.15,
            net_span: 12,
        }
    }
}

const PIN_ATTEMPTS: usize = 10_000;

/// Builds a random design that is a pure function of `(seed, cfg)`.
///
/// Macros span layers 0 and 1. Pins sit on layer 0, never on or beside a
/// blocked node, and never on or beside another pin.
pub fn generate_synthetic_design(name: &str, seed: u64, cfg: &SynthConfig) -> Result<Design> {
    if cfg.layers < 2 {
        return Err(Error::InfeasibleConfig("need at least 2 layers".into()));
    }
    if cfg.num_nets == 0 {
        return Err(Error::InfeasibleConfig("need at least 1 net".into()));
    }
    if !(0.0..=0.3).contains(&cfg.obstacle_density) {
        return Err(Error::InfeasibleConfig(format!(
            "obstacle density {} outside [0, 0.3]",
            cfg.obstacle_density
        )));
    }
    if cfg.min_pins < 2 || cfg.max_pins < cfg.min_pins {
        return Err(Error::InfeasibleConfig("pins per net must satisfy 2 <= min <= max".into()));
    }
    if cfg.rows == 0 || cfg.cols == 0 {
        return Err(Error::InfeasibleConfig("grid dimensions must be positive".into()));
    }
    let free_nodes = cfg.layers * cfg.rows * cfg.cols;
    let min_total_pins = cfg.num_nets * cfg.min_pins;
    if min_total_pins > free_nodes {
        return Err(Error::InfeasibleConfig(format!(
            "{min_total_pins} pins cannot fit on {free_nodes} nodes"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let macros = place_macros(&mut rng, cfg);
    let grid = GridGraph::new(cfg.layers, cfg.rows, cfg.cols, 1.0, Vec::new(), &macros)?;

    let mut taken = vec![false; cfg.rows * cfg.cols];
    let usable = |taken: &[bool], r: usize, c: usize| {
        let n = Node::new(0, r, c);
        if grid.is_blocked(n) || grid.is_near_obstacle(n) || taken[r * cfg.cols + c] {
            return false;
        }
        grid.planar_neighbors(n).all(|m| !taken[m.row * cfg.cols + m.col])
    };
    let available = (0..cfg.rows * cfg.cols)
        .filter(|&i| usable(&taken, i / cfg.cols, i % cfg.cols))
        .count();
    if min_total_pins > available {
        return Err(Error::InfeasibleConfig(format!(
            "{min_total_pins} pins cannot fit on {available} free pin sites"
        )));
    }

    let span = cfg.net_span.clamp(2, cfg.rows.max(cfg.cols));
    let mut nets = Vec::with_capacity(cfg.num_nets);
    let width = cfg.num_nets.to_string().len();
    for k in 0..cfg.num_nets {
        let pin_count = rng.random_range(cfg.min_pins..=cfg.max_pins);
        let r0 = rng.random_range(0..cfg.rows.saturating_sub(span).max(1));
        let c0 = rng.random_range(0..cfg.cols.saturating_sub(span).max(1));
        let mut pins = Vec::with_capacity(pin_count);
        let mut attempts = 0;
        while pins.len() < pin_count {
            attempts += 1;
            if attempts > PIN_ATTEMPTS {
                return Err(Error::InfeasibleConfig(format!(
                    "could not place {pin_count} pins for net {k}"
                )));
            }
            let r = (r0 + rng.random_range(0..span)).min(cfg.rows - 1);
            let c = (c0 + rng.random_range(0..span)).min(cfg.cols - 1);
            if !usable(&taken, r, c) {
                continue;
            }
            taken[r * cfg.cols + c] = true;
            pins.push(Node::new(0, r, c));
        }
        nets.push(Net {
            id: format!("n{k:0width$}"),
            pins,
        });
    }
    Design::new(name.to_string(), grid, nets, macros)
}

fn place_macros(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Vec<Macro> {
    let footprint = (cfg.rows * cfg.cols) as f64;
    let target = cfg.obstacle_density * footprint;
    let mut covered = vec![false; cfg.rows * cfg.cols];
    let mut area = 0usize;
    let mut macros = Vec::new();
    let top = cfg.layers.min(2) - 1;
    let mut attempts = 0;
    while (area as f64) < target && attempts < 1000 {
        attempts += 1;
        let h = rng.random_range(2..=(cfg.rows / 4).max(2)).min(cfg.rows);
        let w = rng.random_range(2..=(cfg.cols / 4).max(2)).min(cfg.cols);
        // keep a 2-track margin to the die edge so pins can escape
        if cfg.rows < h + 4 || cfg.cols < w + 4 {
            break;
        }
        let r = rng.random_range(2..=cfg.rows - h - 2);
        let c = rng.random_range(2..=cfg.cols - w - 2);
        // macros keep at least 3 free tracks between each other
        let clash = (r.saturating_sub(3)..(r + h + 3).min(cfg.rows)).any(|rr| {
            (c.saturating_sub(3)..(c + w + 3).min(cfg.cols)).any(|cc| covered[rr * cfg.cols + cc])
        });
        if clash {
            continue;
        }
        for rr in r..r + h {
            for cc in c..c + w {
                covered[rr * cfg.cols + cc] = true;
            }
        }
        area += h * w;
        macros.push(Macro {
            lo: Node::new(0, r, c),
            hi: Node::new(top, r + h - 1, c + w - 1),
        });
    }
    macros
}

/// Design-level characteristics fixed for the whole routing flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticFeatures {
    pub die_area_um2: f64,
    pub total_pins: f64,
    pub pin_density: f64,
    pub num_macros: f64,
    pub instance_density: f64,
    pub num_nets: f64,
    pub avg_pins_per_net: f64,
    pub net_density: f64,
    pub num_routing_layers: f64,
}

impl StaticFeatures {
    pub const LEN: usize = 9;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.die_area_um2,
            self.total_pins,
            self.pin_density,
            self.num_macros,
            self.instance_density,
            self.num_nets,
            self.avg_pins_per_net,
            self.net_density,
            self.num_routing_layers,
        ]
    }
}

pub fn static_features(design: &Design) -> StaticFeatures {
    let g = &design.grid;
    let die_area_um2 = (g.num_rows * g.num_cols) as f64 * g.pitch_um * g.pitch_um;
    let total_pins = design.total_pins() as f64;
    let num_nets = design.nets.len() as f64;
    let free = (g.num_nodes() - g.blocked_count()) as f64;
    StaticFeatures {
        die_area_um2,
        total_pins,
        pin_density: total_pins / die_area_um2,
        num_macros: design.macros.len() as f64,
        instance_density: if free > 0.0 { total_pins / free } else { 0.0 },
        num_nets,
        avg_pins_per_net: if num_nets > 0.0 { total_pins / num_nets } else { 0.0 },
        net_density: num_nets / die_area_um2,
        num_routing_layers: g.num_layers as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{"name":"tiny","layers":1,"rows":4,"cols":4,"pitch_um":1.0,
            "obstacles":[],"macros":[],
            "nets":[{"id":"a","pins":[[0,0,0],[0,3,3]]}]}"#
    }

    #[test]
    fn minimal_design_loads() {
        let d = Design::from_json(minimal_json()).unwrap();
        assert_eq!(d.nets.len(), 1);
        assert!(d.grid.obstacles.is_empty());
        assert_eq!(d.grid.blocked_count(), 0);
    }

    #[test]
    fn out_of_bounds_pin_rejected() {
        let text = minimal_json().replace("[0,3,3]", "[0,9,0]");
        assert!(matches!(Design::from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn pin_on_obstacle_rejected() {
        let text = minimal_json().replace(r#""obstacles":[]"#, r#""obstacles":[[0,3,3]]"#);
        assert!(matches!(Design::from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_obstacle_rejected() {
        let text =
            minimal_json().replace(r#""obstacles":[]"#, r#""obstacles":[[0,1,1],[0,1,1]]"#);
        assert!(matches!(Design::from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(Design::from_json("{\"name\": 3"), Err(Error::Parse { .. })));
        let unknown = minimal_json().replace("\"pitch_um\"", "\"pitch\"");
        assert!(matches!(Design::from_json(&unknown), Err(Error::Parse { .. })));
    }

    #[test]
    fn macro_outside_die_rejected() {
        let text = minimal_json().replace(r#""macros":[]"#, r#""macros":[[0,1,1,0,5,2]]"#);
        assert!(matches!(Design::from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn node_index_roundtrip() {
        let g = GridGraph::new(3, 5, 7, 1.0, vec![], &[]).unwrap();
        for i in 0..g.num_nodes() {
            assert_eq!(g.index(g.node(i)), i);
        }
    }

    #[test]
    fn layers_alternate() {
        for i in 0..6 {
            assert_ne!(Layer::new(i).preferred_direction, Layer::new(i + 1).preferred_direction);
        }
        assert_eq!(Layer::new(0).preferred_direction, Direction::Horizontal);
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig::congested();
        let a = generate_synthetic_design("d", 7, &cfg).unwrap();
        let b = generate_synthetic_design("d", 7, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_synthetic_design("d", 8, &cfg).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn zero_density_has_no_macros() {
        let mut cfg = SynthConfig::congested();
        cfg.obstacle_density = 0.0;
        let d = generate_synthetic_design("d", 1, &cfg).unwrap();
        assert!(d.macros.is_empty());
    }

    #[test]
    fn pigeonhole_config_is_infeasible() {
        let cfg = SynthConfig {
            layers: 3,
            rows: 4,
            cols: 4,
            num_nets: 5000,
            min_pins: 2,
            max_pins: 2,
            obstacle_density: 0.0,
            net_span: 4,
        };
        assert!(matches!(
            generate_synthetic_design("d", 1, &cfg),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn generator_rejects_bad_configs() {
        let mut cfg = SynthConfig::easy();
        cfg.layers = 1;
        assert!(generate_synthetic_design("d", 1, &cfg).is_err());
        let mut cfg = SynthConfig::easy();
        cfg.obstacle_density = 0.31;
        assert!(generate_synthetic_design("d", 1, &cfg).is_err());
        let mut cfg = SynthConfig::easy();
        cfg.num_nets = 0;
        assert!(generate_synthetic_design("d", 1, &cfg).is_err());
    }

    #[test]
    fn generated_pins_are_spread_out() {
        let d = generate_synthetic_design("d", 3, &SynthConfig::congested()).unwrap();
        let mut seen = BTreeSet::new();
        for net in &d.nets {
            for &p in &net.pins {
                assert!(!d.grid.is_blocked(p));
                assert!(!d.grid.is_near_obstacle(p));
                assert!(seen.insert(p), "duplicate pin {p:?}");
            }
        }
        for &p in &seen {
            for q in d.grid.planar_neighbors(p) {
                assert!(!seen.contains(&q));
            }
        }
    }

    #[test]
    fn static_feature_arithmetic() {
        // 100x100 grid, 100 nets; 50 with 3 pins, 50 with 2 pins -> 250 pins.
        let grid = GridGraph::new(2, 100, 100, 1.0, vec![], &[]).unwrap();
        let nets = (0..100)
            .map(|k| {
                let r = k;
                let mut pins = vec![Node::new(0, r, 0), Node::new(0, r, 1)];
                if k < 50 {
                    pins.push(Node::new(0, r, 2));
                }
                Net {
                    id: format!("n{k:03}"),
                    pins,
                }
            })
            .collect();
        let d = Design::new("x".into(), grid, nets, vec![]).unwrap();
        let f = static_features(&d);
        assert_eq!(f.die_area_um2, 10_000.0);
        assert_eq!(f.total_pins, 250.0);
        assert_eq!(f.pin_density, 0.025);
        assert_eq!(f.avg_pins_per_net, 2.5);
        assert_eq!(f.num_macros, 0.0);
        assert_eq!(f.net_density, 0.01);
        assert_eq!(f.num_routing_layers, 2.0);
        assert_eq!(f.instance_density, 250.0 / 20_000.0);
    }

    #[test]
    fn two_pin_nets_double_pin_count() {
        let d = generate_synthetic_design(
            "d",
            5,
            &SynthConfig {
                min_pins: 2,
                max_pins: 2,
                ..SynthConfig::congested()
            },
        )
        .unwrap();
        let f = static_features(&d);
        assert_eq!(f.total_pins, 2.0 * f.num_nets);
        assert_eq!(f.avg_pins_per_net * f.num_nets, f.total_pins);
    }
}
