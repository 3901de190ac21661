use crate::grid::{GridGraph, Node};

use super::drc::Violation;

pub const DEFAULT_TILE_SIZE: usize = 8;

/// A rectangular tile spanning all layers; `row_hi`/`col_hi` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    pub id: usize,
    pub row_lo: usize,
    pub row_hi: usize,
    pub col_lo: usize,
    pub col_hi: usize,
}

/// Tiling of a grid into `tile x tile` partitions, row-major ids. Edge tiles
/// may be smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tiling {
    pub tile: usize,
    pub tile_rows: usize,
    pub tile_cols: usize,
    rows: usize,
    cols: usize,
}

impl Tiling {
    pub fn new(grid: &GridGraph, tile: usize) -> Self {
        assert!(tile > 0, "tile size must be positive");
        Tiling {
            tile,
            tile_rows: grid.num_rows.div_ceil(tile),
            tile_cols: grid.num_cols.div_ceil(tile),
            rows: grid.num_rows,
            cols: grid.num_cols,
        }
    }

    pub fn len(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn of(&self, n: Node) -> usize {
        (n.row / self.tile) * self.tile_cols + n.col / self.tile
    }

    pub fn partition(&self, id: usize) -> Partition {
        let (tr, tc) = (id / self.tile_cols, id % self.tile_cols);
        Partition {
            id,
            row_lo: tr * self.tile,
            row_hi: ((tr + 1) * self.tile).min(self.rows),
            col_lo: tc * self.tile,
            col_hi: ((tc + 1) * self.tile).min(self.cols),
        }
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> {
        let (tr, tc) = (id / self.tile_cols, id % self.tile_cols);
        let (nr, nc) = (self.tile_rows, self.tile_cols);
        [
            (tr > 0).then(|| id - nc),
            (tr + 1 < nr).then(|| id + nc),
            (tc > 0).then(|| id - 1),
            (tc + 1 < nc).then(|| id + 1),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionStats {
    pub partition_drvs: Vec<u32>,
    pub max_partition_drv: u32,
    pub neighbor_drvs: Vec<u32>,
}

pub fn partition_stats(violations: &[Violation], grid: &GridGraph, tile: usize) -> PartitionStats {
    let tiling = Tiling::new(grid, tile);
    let mut drvs = vec![0u32; tiling.len()];
    for v in violations {
        drvs[tiling.of(v.node)] += 1;
    }
    let neighbor_drvs = (0..tiling.len())
        .map(|p| tiling.neighbors(p).map(|q| drvs[q]).sum())
        .collect();
    PartitionStats {
        max_partition_drv: drvs.iter().copied().max().unwrap_or(0),
        partition_drvs: drvs,
        neighbor_drvs,
    }
}
