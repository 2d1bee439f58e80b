//! Uniform cell-centered grids over an axis-aligned box.

use crate::geom::{v, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// xmin, xmax, ymin, ymax
    pub bbox: [f64; 4],
}

impl Grid {
    pub fn new(nx: usize, ny: usize, bbox: [f64; 4]) -> Grid {
        assert!(nx >= 2 && ny >= 2 && bbox[1] > bbox[0] && bbox[3] > bbox[2]);
        Grid { nx, ny, bbox }
    }

    pub fn hx(&self) -> f64 {
        (self.bbox[1] - self.bbox[0]) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.bbox[3] - self.bbox[2]) / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell center of cell (i, j).
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        v(
            self.bbox[0] + (i as f64 + 0.5) * self.hx(),
            self.bbox[2] + (j as f64 + 0.5) * self.hy(),
        )
    }
}
