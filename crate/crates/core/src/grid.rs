//! Uniform periodic grid on the period box `[0,T¹] × … × [0,Tᵖ]`.
//!
//! Nodes sit at left endpoints `t_k = (k_1 h_1, …, k_p h_p)` and the face
//! `t^α = T^α` is identified with `t^α = 0`, so every grid function is
//! multi-periodic by construction. Quadrature uses the equal weight
//! `w = Π h_α` on every node (the periodic trapezoid rule).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_AXES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    periods: Vec<f64>,
    resolutions: Vec<usize>,
    spacings: Vec<f64>,
    node_count: usize,
    cell_weight: f64,
}

/// Position of a node as one integer per axis, `0 <= k_α < N_α`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl TorusGrid {
    pub fn new(p: usize, periods: &[f64], resolutions: &[usize]) -> Result<Self> {
        if p == 0 || p > MAX_AXES {
            return Err(Error::BadDimension(p));
        }
        if periods.len() != p {
            return Err(Error::LengthMismatch {
                what: "periods",
                expected: p,
                got: periods.len(),
            });
        }
        if resolutions.len() != p {
            return Err(Error::LengthMismatch {
                what: "resolutions",
                expected: p,
                got: resolutions.len(),
            });
        }
        for (axis, &value) in periods.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositivePeriod { axis, value });
            }
        }
        for (axis, &value) in resolutions.iter().enumerate() {
            if value % 2 != 0 {
                return Err(Error::OddResolution { axis, value });
            }
            if value < 4 {
                return Err(Error::ResolutionTooSmall { axis, value });
            }
        }
        let spacings: Vec<f64> = periods
            .iter()
            .zip(resolutions)
            .map(|(&t, &n)| t / n as f64)
            .collect();
        Ok(Self {
            periods: periods.to_vec(),
            resolutions: resolutions.to_vec(),
            cell_weight: spacings.iter().product(),
            spacings,
            node_count: resolutions.iter().product(),
        })
    }

    /// Convenience constructor returning a shared handle, which is what
    /// fields and operators hold on to.
    pub fn shared(p: usize, periods: &[f64], resolutions: &[usize]) -> Result<Arc<Self>> {
        Self::new(p, periods, resolutions).map(Arc::new)
    }

    pub fn p(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Stride of axis `axis` in the flat node ordering. Axis 0 varies slowest.
    pub fn stride(&self, axis: usize) -> usize {
        self.resolutions[axis + 1..].iter().product()
    }

    pub fn flatten(&self, idx: &MultiIndex) -> Result<usize> {
        self.check_index(idx)?;
        Ok(idx
            .0
            .iter()
            .zip(&self.resolutions)
            .fold(0, |acc, (&k, &n)| acc * n + k))
    }

    pub fn unflatten(&self, mut node: usize) -> Result<MultiIndex> {
        if node >= self.node_count {
            return Err(Error::IndexOutOfBounds {
                index: vec![node],
                resolutions: self.resolutions.clone(),
            });
        }
        let mut k = vec![0; self.p()];
        for axis in (0..self.p()).rev() {
            k[axis] = node % self.resolutions[axis];
            node /= self.resolutions[axis];
        }
        Ok(MultiIndex(k))
    }

    pub fn node_coords(&self, idx: &MultiIndex) -> Result<Vec<f64>> {
        self.check_index(idx)?;
        Ok(idx
            .0
            .iter()
            .zip(&self.spacings)
            .map(|(&k, &h)| k as f64 * h)
            .collect())
    }

    /// Coordinates of a node given by its flat index. Panics if out of range.
    pub fn coords_of(&self, node: usize, out: &mut [f64]) {
        assert!(node < self.node_count, "node {node} out of range");
        let mut rest = node;
        for axis in (0..self.p()).rev() {
            let n = self.resolutions[axis];
            out[axis] = (rest % n) as f64 * self.spacings[axis];
            rest /= n;
        }
    }

    /// All node coordinates, node-major, `p` reals per node.
    pub fn all_coords(&self) -> Vec<f64> {
        let p = self.p();
        let mut out = vec![0.0; self.node_count * p];
        for (node, chunk) in out.chunks_mut(p).enumerate() {
            self.coords_of(node, chunk);
        }
        out
    }

    /// Periodic trapezoid quadrature: `w · Σ values`.
    pub fn integrate(&self, node_values: &[f64]) -> Result<f64> {
        if node_values.len() != self.node_count {
            return Err(Error::LengthMismatch {
                what: "node values",
                expected: self.node_count,
                got: node_values.len(),
            });
        }
        Ok(self.cell_weight * node_values.iter().sum::<f64>())
    }

    fn check_index(&self, idx: &MultiIndex) -> Result<()> {
        if idx.0.len() != self.p() || idx.0.iter().zip(&self.resolutions).any(|(&k, &n)| k >= n) {
            return Err(Error::IndexOutOfBounds {
                index: idx.0.clone(),
                resolutions: self.resolutions.clone(),
            });
        }
        Ok(())
    }
}

/// Discrete map `u: grid → Rⁿ`, stored node-major with the component index
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<TorusGrid>,
    n: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<TorusGrid>, n: usize) -> Self {
        assert!(n > 0, "field needs at least one component");
        Self {
            grid: Arc::clone(grid),
            n,
            values: vec![0.0; grid.node_count() * n],
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ComponentMismatch {
                expected: 1,
                got: 0,
            });
        }
        if values.len() != grid.node_count() * n {
            return Err(Error::LengthMismatch {
                what: "field values",
                expected: grid.node_count() * n,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field entry {bad}")));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            n,
            values,
        })
    }

    /// Samples `f(t, out)` at every node.
    pub fn from_fn(grid: &Arc<TorusGrid>, n: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut field = Self::zeros(grid, n);
        let mut t = vec![0.0; grid.p()];
        for (node, chunk) in field.values.chunks_mut(n).enumerate() {
            grid.coords_of(node, &mut t);
            f(&t, chunk);
        }
        field
    }

    /// Constant field equal to `x` at every node.
    pub fn constant(grid: &Arc<TorusGrid>, x: &[f64]) -> Self {
        Self::from_fn(grid, x.len(), |_, out| out.copy_from_slice(x))
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.n..(node + 1) * self.n]
    }

    /// Samples of component `i` across all nodes.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(i)
            .step_by(self.n)
            .copied()
            .collect()
    }

    pub fn set_component(&mut self, i: usize, data: &[f64]) {
        for (dst, &src) in self.values.iter_mut().skip(i).step_by(self.n).zip(data) {
            *dst = src;
        }
    }

    pub fn same_shape(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid && *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        if self.n != other.n {
            return Err(Error::ComponentMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to another field of the same shape.
    pub fn max_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `∫ ⟨self, other⟩` by quadrature.
    pub fn l2_dot(&self, other: &Field) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.cell_weight()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_dot(self).sqrt()
    }

    /// `self + alpha * dir`.
    pub fn axpy(&self, alpha: f64, dir: &Field) -> Field {
        let mut out = self.clone();
        out.add_scaled(alpha, dir);
        out
    }

    pub fn add_scaled(&mut self, alpha: f64, dir: &Field) {
        for (a, b) in self.values.iter_mut().zip(&dir.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn build_grid_arithmetic() {
        let g = TorusGrid::new(1, &[2.0 * PI], &[4]).unwrap();
        assert_eq!(g.node_count(), 4);
        assert!((g.spacings()[0] - PI / 2.0).abs() < 1e-15);
        assert!((g.cell_weight() - PI / 2.0).abs() < 1e-15);

        let g = TorusGrid::new(2, &[1.0, 2.0], &[4, 8]).unwrap();
        assert_eq!(g.node_count(), 32);
        assert_eq!(g.cell_weight(), 1.0 / 16.0);
    }

    #[test]
    fn build_grid_rejections_are_distinct() {
        assert!(matches!(
            TorusGrid::new(0, &[], &[]),
            Err(Error::BadDimension(0))
        ));
        assert!(matches!(
            TorusGrid::new(1, &[1.0], &[3]),
            Err(Error::OddResolution { axis: 0, value: 3 })
        ));
        assert!(matches!(
            TorusGrid::new(1, &[1.0], &[2]),
            Err(Error::ResolutionTooSmall { .. })
        ));
        assert!(matches!(
            TorusGrid::new(2, &[1.0, -1.0], &[4, 4]),
            Err(Error::NonPositivePeriod { axis: 1, .. })
        ));
        assert!(matches!(
            TorusGrid::new(5, &[1.0; 5], &[4; 5]),
            Err(Error::BadDimension(5))
        ));
    }

    #[test]
    fn node_coordinates() {
        let g = TorusGrid::new(1, &[2.0 * PI], &[4]).unwrap();
        let c = g.node_coords(&MultiIndex(vec![3])).unwrap();
        assert!((c[0] - 1.5 * PI).abs() < 1e-15);

        let g = TorusGrid::new(2, &[1.0, 2.0], &[4, 8]).unwrap();
        assert_eq!(
            g.node_coords(&MultiIndex(vec![0, 0])).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            g.node_coords(&MultiIndex(vec![2, 4])).unwrap(),
            vec![0.5, 1.0]
        );
        assert!(g.node_coords(&MultiIndex(vec![4, 0])).is_err());
        assert!(g.node_coords(&MultiIndex(vec![0])).is_err());
    }

    #[test]
    fn spacing_times_resolution_recovers_period() {
        let g = TorusGrid::new(3, &[0.7, 2.0 * PI, 13.1], &[6, 10, 4]).unwrap();
        for a in 0..3 {
            let back = g.spacings()[a] * g.resolutions()[a] as f64;
            assert!((back - g.periods()[a]).abs() <= f64::EPSILON * g.periods()[a]);
        }
    }

    #[test]
    fn quadrature_examples() {
        let g = TorusGrid::new(1, &[2.0 * PI], &[4]).unwrap();
        assert!((g.integrate(&[1.0; 4]).unwrap() - 2.0 * PI).abs() < 1e-14);

        let g = TorusGrid::new(1, &[2.0 * PI], &[8]).unwrap();
        let h = g.spacings()[0];
        let s: Vec<f64> = (0..8).map(|k| (k as f64 * h).sin()).collect();
        assert!(g.integrate(&s).unwrap().abs() < 1e-14);
        let s2: Vec<f64> = (0..8).map(|k| (k as f64 * h).sin().powi(2)).collect();
        assert!((g.integrate(&s2).unwrap() - PI).abs() < 1e-12);

        assert!(g.integrate(&[1.0; 7]).is_err());
    }

    #[test]
    fn trig_polynomials_integrate_exactly() {
        // ∫ cos²(2πk₁t¹/T¹) sin²(2πk₂t²/T²) = vol/4 for nonzero k with 2k < N
        let g = TorusGrid::new(2, &[1.3, 2.9], &[10, 12]).unwrap();
        let vol = g.volume();
        for k1 in 1..5 {
            for k2 in 1..5 {
                let vals: Vec<f64> = (0..g.node_count())
                    .map(|node| {
                        let mut t = [0.0; 2];
                        g.coords_of(node, &mut t);
                        let a = (2.0 * PI * k1 as f64 * t[0] / 1.3).cos();
                        let b = (2.0 * PI * k2 as f64 * t[1] / 2.9).sin();
                        a * a * b * b
                    })
                    .collect();
                let q = g.integrate(&vals).unwrap();
                assert!((q - vol / 4.0).abs() <= 1e-12 * vol, "k=({k1},{k2}) q={q}");
            }
        }
    }

    #[test]
    fn field_shape_checks() {
        let g = TorusGrid::shared(1, &[1.0], &[4]).unwrap();
        assert!(Field::from_values(&g, 2, vec![0.0; 7]).is_err());
        assert!(Field::from_values(&g, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let f = Field::from_values(&g, 2, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(f.at(2), &[4.0, 5.0]);
        assert_eq!(f.component(1), vec![1.0, 3.0, 5.0, 7.0]);
        let other = TorusGrid::shared(1, &[2.0], &[4]).unwrap();
        assert!(f.same_shape(&Field::zeros(&other, 2)).is_err());
        assert!(f.same_shape(&Field::zeros(&g, 1)).is_err());
    }

    mod props {
        use proptest::prelude::*;

        use super::super::*;

        proptest! {
            #[test]
            fn index_round_trip(p in 1usize..=4, seed in 0usize..1000) {
                let res: Vec<usize> = (0..p).map(|a| 4 + 2 * ((seed >> a) % 3)).collect();
                let g = TorusGrid::new(p, &vec![1.0; p], &res).unwrap();
                let mut seen = vec![false; g.node_count()];
                for node in 0..g.node_count() {
                    let idx = g.unflatten(node).unwrap();
                    let back = g.flatten(&idx).unwrap();
                    prop_assert_eq!(back, node);
                    prop_assert!(!seen[back]);
                    seen[back] = true;
                }
            }

            #[test]
            fn volume_identity(periods in proptest::collection::vec(0.01f64..50.0, 1..=4)) {
                let p = periods.len();
                let g = TorusGrid::new(p, &periods, &vec![6; p]).unwrap();
                let vol: f64 = periods.iter().product();
                let q = g.integrate(&vec![1.0; g.node_count()]).unwrap();
                prop_assert!((q - vol).abs() <= 1e-14 * vol);
            }
        }
    }
}
