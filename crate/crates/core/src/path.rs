//! Piecewise-linear paths on a uniform time grid.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::format_float;

/// Relative tolerance used to snap a time onto a grid node.
const SNAP: f64 = 1e-12;

/// `max {t_n} ∩ [0, t]`: the grid node at or left of `t`.
pub fn grid_floor(t: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    grid_index_floor(t, t_end, steps) as f64 * h
}

/// `min {t_n} ∩ [t, T]`: the grid node at or right of `t`.
pub fn grid_ceil(t: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let n = grid_index_floor(t, t_end, steps);
    if (t - n as f64 * h).abs() <= SNAP * t_end {
        n as f64 * h
    } else {
        (n + 1) as f64 * h
    }
}

fn grid_index_floor(t: f64, t_end: f64, steps: usize) -> usize {
    let h = t_end / steps as f64;
    let r = t / h;
    let nearest = r.round();
    let n = if (r - nearest).abs() * h <= SNAP * t_end {
        nearest
    } else {
        r.floor()
    };
    (n.max(0.0) as usize).min(steps)
}

/// Node values of a piecewise-linear path on `t_n = n T / N`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    t_end: f64,
    steps: usize,
    dim: usize,
    nodes: Vec<f64>,
}

impl GridPath {
    /// `nodes` holds `(steps + 1) * dim` values, node-major.
    pub fn new(t_end: f64, steps: usize, dim: usize, nodes: Vec<f64>) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {t_end}")));
        }
        if steps == 0 || dim == 0 {
            return Err(Error::Domain("steps and dimension must be positive".into()));
        }
        if nodes.len() != (steps + 1) * dim {
            return Err(Error::Domain(format!(
                "expected {} node values, got {}",
                (steps + 1) * dim,
                nodes.len()
            )));
        }
        Ok(Self {
            t_end,
            steps,
            dim,
            nodes,
        })
    }

    /// Straight line from `x0` at `t = 0` to `x` at `t = T`.
    pub fn straight_line(x0: &[f64], x: &[f64], t_end: f64, steps: usize) -> Result<Self> {
        if x0.len() != x.len() {
            return Err(Error::Domain("endpoint dimensions differ".into()));
        }
        let dim = x0.len();
        let mut nodes = Vec::with_capacity((steps + 1) * dim);
        for n in 0..=steps {
            let s = n as f64 / steps.max(1) as f64;
            nodes.extend(x0.iter().zip(x).map(|(a, b)| a + s * (b - a)));
        }
        // pin the far end exactly
        if steps > 0 {
            nodes[steps * dim..].copy_from_slice(x);
        }
        Self::new(t_end, steps, dim, nodes)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `h = T / N`.
    pub fn step(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_end
        } else {
            n as f64 * self.step()
        }
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.nodes[n * self.dim..(n + 1) * self.dim]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn start(&self) -> &[f64] {
        self.node(0)
    }

    pub fn end(&self) -> &[f64] {
        self.node(self.steps)
    }

    /// Interior node values `n = 1..N-1`, node-major.
    pub fn interior(&self) -> &[f64] {
        &self.nodes[self.dim..self.steps * self.dim]
    }

    pub(crate) fn interior_mut(&mut self) -> &mut [f64] {
        let (d, n) = (self.dim, self.steps);
        &mut self.nodes[d..n * d]
    }

    /// Linear interpolation between the bracketing nodes; exact at nodes.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.t_end).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.t_end
            )));
        }
        let n = grid_index_floor(t, self.t_end, self.steps);
        let offset = t - n as f64 * self.step();
        if n == self.steps || offset.abs() <= SNAP * self.t_end {
            return Ok(self.node(n).to_vec());
        }
        let s = offset / self.step();
        Ok(self
            .node(n)
            .iter()
            .zip(self.node(n + 1))
            .map(|(a, b)| a + s * (b - a))
            .collect())
    }

    /// `‖φ'‖_{L²}` of the interpolant, `sqrt(Σ |Δφ_n|² / h)`.
    pub fn h1_seminorm(&self) -> f64 {
        self.energy_on(0, self.steps).sqrt()
    }

    /// `∫ |φ'|²` over the nodes `from..to`.
    fn energy_on(&self, from: usize, to: usize) -> f64 {
        let h = self.step();
        (from..to)
            .map(|n| {
                self.node(n)
                    .iter()
                    .zip(self.node(n + 1))
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>()
                    / h
            })
            .sum()
    }

    /// `∫_s^t |φ'|²` for grid times `s = t_i ≤ t = t_j`.
    pub fn energy_between(&self, i: usize, j: usize) -> f64 {
        self.energy_on(i.min(j), i.max(j))
    }

    /// Same function sampled on a grid `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<GridPath> {
        if factor == 0 {
            return Err(Error::Domain("refinement factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let d = self.dim;
        let steps = self.steps * factor;
        let mut nodes = Vec::with_capacity((steps + 1) * d);
        for n in 0..self.steps {
            let (a, b) = (self.node(n), self.node(n + 1));
            for j in 0..factor {
                let s = j as f64 / factor as f64;
                nodes.extend(a.iter().zip(b).map(|(p, q)| p + s * (q - p)));
            }
        }
        nodes.extend_from_slice(self.end());
        GridPath::new(self.t_end, steps, d, nodes)
    }

    /// Samples the interpolant on a uniform grid with `steps` subintervals.
    pub fn resample(&self, steps: usize) -> Result<GridPath> {
        if steps == self.steps {
            return Ok(self.clone());
        }
        if steps > 0 && steps % self.steps == 0 {
            return self.refine(steps / self.steps);
        }
        if steps == 0 {
            return Err(Error::Domain("steps must be positive".into()));
        }
        let mut nodes = Vec::with_capacity((steps + 1) * self.dim);
        for n in 0..steps {
            let t = n as f64 * self.t_end / steps as f64;
            nodes.extend(self.interpolate(t)?);
        }
        nodes.extend_from_slice(self.end());
        GridPath::new(self.t_end, steps, self.dim, nodes)
    }

    /// CSV with header `t,x1..xd` and one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header}")?;
        for n in 0..=self.steps {
            let mut row = format_float(self.time(n));
            for v in self.node(n) {
                row.push(',');
                row.push_str(&format_float(*v));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(nodes: &[f64], t_end: f64) -> GridPath {
        GridPath::new(t_end, nodes.len() - 1, 1, nodes.to_vec()).unwrap()
    }

    #[test]
    fn interpolation() {
        assert_eq!(path(&[0.0, 1.0], 1.0).interpolate(0.5).unwrap(), vec![0.5]);
        let p = path(&[0.0, 0.5, 1.0], 1.0);
        assert_eq!(p.interpolate(0.75).unwrap(), vec![0.75]);
        let q = path(&[0.3, -1.0, 2.0, 4.0], 3.0);
        for n in 0..=3 {
            assert_eq!(q.interpolate(q.time(n)).unwrap(), q.node(n));
        }
        assert!(matches!(q.interpolate(3.5), Err(Error::Domain(_))));
        assert!(q.interpolate(-0.1).is_err());
    }

    #[test]
    fn seminorm() {
        assert_eq!(path(&[2.0, 2.0, 2.0], 1.0).h1_seminorm(), 0.0);
        for n in [1, 3, 10] {
            let line = GridPath::straight_line(&[0.0], &[1.0], 1.0, n).unwrap();
            assert!((line.h1_seminorm() - 1.0).abs() < 1e-14);
        }
        let p = path(&[0.0, 1.0, 1.0], 1.0);
        assert!((p.h1_seminorm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn refine_examples() {
        let p = path(&[0.0, 1.0, 0.0], 1.0);
        let r = p.refine(2).unwrap();
        assert_eq!(r.nodes(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!((r.h1_seminorm() - p.h1_seminorm()).abs() < 1e-14);
        assert_eq!(p.refine(1).unwrap(), p);
        let line = GridPath::straight_line(&[0.0], &[1.0], 1.0, 4).unwrap();
        let fine = line.refine(2).unwrap();
        assert_eq!(fine.steps(), 8);
        assert!((fine.h1_seminorm() - 1.0).abs() < 1e-14);
        assert!(p.refine(0).is_err());
    }

    #[test]
    fn grid_operators() {
        let (t_end, n) = (1.0, 4);
        assert_eq!(grid_floor(0.3, t_end, n), 0.25);
        assert_eq!(grid_ceil(0.3, t_end, n), 0.5);
        for k in 0..=4 {
            let t = k as f64 * 0.25;
            assert_eq!(grid_floor(t, t_end, n), t);
            assert_eq!(grid_ceil(t, t_end, n), t);
        }
        // a node computed with round-off still snaps to itself
        let t = 0.1 + 0.2; // 0.30000000000000004
        assert_eq!(grid_floor(t, 0.9, 3), 0.3);
        assert_eq!(grid_ceil(t, 0.9, 3), 0.3);
    }

    #[test]
    fn csv_layout() {
        let p = GridPath::new(1.0, 1, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines.len(), 3);
        assert!(!text.contains('\r'));
    }
}
