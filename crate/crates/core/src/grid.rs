//! Uniform sampling grids.

use serde::{Deserialize, Serialize};

/// Uniform one-dimensional grid with `n` points, `x_i = start + i*step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1 {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Grid1 {
    pub fn new(start: f64, end: f64, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points");
        Grid1 {
            start,
            step: (end - start) / (n - 1) as f64,
            n,
        }
    }

    /// Grid covering `[start, end)` with `n` points, suitable for periodic domains.
    pub fn periodic(start: f64, end: f64, n: usize) -> Self {
        assert!(n >= 2);
        Grid1 {
            start,
            step: (end - start) / n as f64,
            n,
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    pub fn end(&self) -> f64 {
        self.point(self.n - 1)
    }

    /// Sample a function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }
}

/// Axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "box must have positive extent");
        BoxDomain { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (a, b))| *xi >= *a && *xi <= *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = Grid1::new(-1.0, 1.0, 5);
        assert_eq!(g.point(0), -1.0);
        assert_eq!(g.end(), 1.0);
        assert_eq!(g.step, 0.5);
    }

    #[test]
    fn periodic_grid_excludes_endpoint() {
        let g = Grid1::periodic(0.0, 1.0, 4);
        assert_eq!(g.step, 0.25);
        assert_eq!(g.point(3), 0.75);
    }

    #[test]
    fn box_volume_and_membership() {
        let b = BoxDomain::new(vec![0.0, 0.0], vec![2.0, 3.0]);
        assert_eq!(b.volume(), 6.0);
        assert!(b.contains(&[1.0, 1.5]));
        assert!(!b.contains(&[2.5, 1.0]));
    }
}
