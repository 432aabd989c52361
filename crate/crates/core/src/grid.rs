//! Rectilinear grids and multilinear interpolation.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of axes a grid can have (two state axes plus the budget axis).
pub const MAX_DIM: usize = 3;
const MAX_CORNERS: usize = 1 << MAX_DIM;

/// A point in a state space of dimension at most [`MAX_DIM`].
#[derive(Clone, Copy, PartialEq)]
pub struct State {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl State {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "state dimension {} not in 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn scalar(x: f64) -> Self {
        Self::new(&[x])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn with_appended(&self, value: f64) -> Self {
        let mut next = *self;
        next.coords[self.dim] = value;
        next.dim += 1;
        next
    }
}

impl Index<usize> for State {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl From<f64> for State {
    fn from(x: f64) -> Self {
        Self::scalar(x)
    }
}

/// Interpolation weights of a point over the corners of its enclosing cell.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    index: [usize; MAX_CORNERS],
    weight: [f64; MAX_CORNERS],
    len: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.index[..self.len]
            .iter()
            .copied()
            .zip(self.weight[..self.len].iter().copied())
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * values[i]).sum()
    }
}

/// Cartesian product of strictly increasing coordinate lists, stored row-major
/// with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "grid dimension {} not in 1..={MAX_DIM}",
                axes.len()
            )));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::InvalidModel(format!("axis {k} has fewer than 2 nodes")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("axis {k} has a non-finite node")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidModel(format!("axis {k} is not strictly increasing")));
            }
        }
        Ok(Self { axes })
    }

    /// Evenly spaced nodes `lo, …, hi` with `intervals` cells.
    ///
    /// Nodes are computed as `(lo·n + (hi−lo)·i) / n`, which is exact for
    /// decimal grids such as `{18, 18.1, …, 23}`.
    pub fn uniform_axis(lo: f64, hi: f64, intervals: usize) -> Vec<f64> {
        let n = intervals as f64;
        let mut axis: Vec<f64> = (0..=intervals)
            .map(|i| (lo * n + (hi - lo) * i as f64) / n)
            .collect();
        axis[0] = lo;
        axis[intervals] = hi;
        axis
    }

    pub fn uniform_1d(lo: f64, hi: f64, intervals: usize) -> Result<Self> {
        Self::new(vec![Self::uniform_axis(lo, hi, intervals)])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lower(&self) -> State {
        State::new(&self.axes.iter().map(|a| a[0]).collect::<Vec<_>>())
    }

    pub fn upper(&self) -> State {
        State::new(&self.axes.iter().map(|a| a[a.len() - 1]).collect::<Vec<_>>())
    }

    /// Coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> State {
        let mut coords = [0.0; MAX_DIM];
        let mut rest = flat;
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            coords[k] = self.axes[k][rest % n];
            rest /= n;
        }
        State::new(&coords[..self.dim()])
    }

    pub fn nodes(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    /// Componentwise projection onto the bounding box.
    pub fn clamp(&self, point: &State) -> State {
        let mut out = *point;
        for (k, axis) in self.axes.iter().enumerate() {
            out.coords[k] = point.coords[k].clamp(axis[0], axis[axis.len() - 1]);
        }
        out
    }

    pub fn contains(&self, point: &State) -> bool {
        point.dim() == self.dim()
            && self
                .axes
                .iter()
                .zip(point.as_slice())
                .all(|(a, &x)| x >= a[0] && x <= a[a.len() - 1])
    }

    /// Cell index and upper weight of `x` on one axis, after clamping.
    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        let last = axis.len() - 1;
        let x = x.clamp(axis[0], axis[last]);
        let upper = axis.partition_point(|&v| v <= x).clamp(1, last);
        let lo = upper - 1;
        let t = (x - axis[lo]) / (axis[upper] - axis[lo]);
        (lo, t)
    }

    pub fn nearest_on_axis(axis: &[f64], x: f64) -> usize {
        let (lo, t) = Self::locate(axis, x);
        if t > 0.5 {
            lo + 1
        } else {
            lo
        }
    }

    /// Flat index of the node nearest to `point` (ties go to the lower node).
    pub fn nearest(&self, point: &State) -> usize {
        let mut multi = [0usize; MAX_DIM];
        for (k, axis) in self.axes.iter().enumerate() {
            multi[k] = Self::nearest_on_axis(axis, point.coords[k]);
        }
        self.flat_index(&multi[..self.dim()])
    }

    /// Multilinear interpolation stencil of `point`, clamped into the box.
    pub fn stencil(&self, point: &State) -> Stencil {
        let d = self.dim();
        let mut cell = [(0usize, 0.0f64); MAX_DIM];
        for (k, axis) in self.axes.iter().enumerate() {
            cell[k] = Self::locate(axis, point.coords[k]);
        }
        let mut stencil = Stencil {
            index: [0; MAX_CORNERS],
            weight: [0.0; MAX_CORNERS],
            len: 1 << d,
        };
        for corner in 0..(1usize << d) {
            let mut flat = 0;
            let mut weight = 1.0;
            for (k, axis) in self.axes.iter().enumerate() {
                let bit = (corner >> (d - 1 - k)) & 1;
                let (lo, t) = cell[k];
                flat = flat * axis.len() + lo + bit;
                weight *= if bit == 1 { t } else { 1.0 - t };
            }
            stencil.index[corner] = flat;
            stencil.weight[corner] = weight;
        }
        stencil
    }

    pub fn interpolate(&self, values: &[f64], point: &State) -> f64 {
        self.stencil(point).apply(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_axis_hits_decimal_nodes() {
        let axis = Grid::uniform_axis(18.0, 23.0, 50);
        assert_eq!(axis.len(), 51);
        assert_eq!(axis[25], 20.5);
        assert_eq!(axis[1], 18.1);
        assert_eq!(axis[50], 23.0);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Grid::new(vec![vec![0.0]]).is_err());
        assert!(Grid::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(Grid::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![vec![0.0, 1.0]; 4]).is_err());
    }

    #[test]
    fn exact_at_nodes() {
        let grid = Grid::new(vec![vec![0.0, 0.5, 2.0], vec![-1.0, 1.0, 3.0, 4.0]]).unwrap();
        let values: Vec<f64> = (0..grid.len()).map(|i| (i * i) as f64 * 0.37 - 2.0).collect();
        for i in 0..grid.len() {
            assert_eq!(grid.interpolate(&values, &grid.node(i)), values[i]);
        }
    }

    #[test]
    fn linear_in_one_dimension() {
        let grid = Grid::new(vec![vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(grid.interpolate(&[0.0, 10.0], &State::scalar(0.25)), 2.5);
    }

    #[test]
    fn bilinear_cell_center() {
        let grid = Grid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(grid.interpolate(&[0.0, 0.0, 10.0, 10.0], &State::new(&[0.5, 0.5])), 5.0);
    }

    #[test]
    fn clamps_out_of_box_points() {
        let grid = Grid::new(vec![
            Grid::uniform_axis(0.0, 5.5, 55),
            Grid::uniform_axis(0.0, 7.0, 70),
        ])
        .unwrap();
        assert_eq!(grid.clamp(&State::new(&[6.0, 3.0])), State::new(&[5.5, 3.0]));
        assert_eq!(grid.clamp(&State::new(&[-0.1, -0.1])), State::new(&[0.0, 0.0]));
        assert_eq!(grid.clamp(&State::new(&[1.2, 3.4])), State::new(&[1.2, 3.4]));
    }

    #[test]
    fn node_and_flat_index_agree() {
        let grid = Grid::new(vec![vec![0.0, 1.0, 2.0], vec![5.0, 6.0], vec![-1.0, 0.0, 1.0, 2.0]]).unwrap();
        for i in 0..grid.len() {
            assert_eq!(grid.nearest(&grid.node(i)), i);
        }
    }

    proptest! {
        #[test]
        fn interpolation_is_bounded_by_cell_corners(
            values in prop::collection::vec(-100.0f64..100.0, 12),
            x in -0.5f64..2.5,
            y in -1.5f64..4.5,
        ) {
            let grid = Grid::new(vec![vec![0.0, 0.7, 2.0], vec![-1.0, 0.0, 2.5, 4.0]]).unwrap();
            let p = State::new(&[x, y]);
            let stencil = grid.stencil(&p);
            let corners: Vec<f64> = stencil.iter().map(|(i, _)| values[i]).collect();
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = grid.interpolate(&values, &p);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            let total: f64 = stencil.iter().map(|(_, w)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
