//! Periodic spatial grid, phase-space field containers, central-difference
//! stencils and the snapshot file format.

mod snapshot;
mod stencil;

use std::sync::Arc;

pub use snapshot::{Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use stencil::{multi_index_derivative, multi_indices, spatial_derivative, MultiIndex};

use crate::equilibrium::VelocityGrid;
use crate::numeric::pairwise_sum;
use crate::{Error, Result, Vector, MAX_DIM};

/// Default torus period per axis.
pub const DEFAULT_PERIOD: f64 = 2.0 * std::f64::consts::PI;

/// Uniform cell-centred grid on the torus `Π [0, L_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    cells: Vec<usize>,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(cells: &[usize], lengths: &[f64]) -> Result<Self> {
        let dim = cells.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDimension { dim, max: MAX_DIM });
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} periods, got {}",
                lengths.len()
            )));
        }
        if let Some(&k) = cells.iter().find(|&&k| k < 4) {
            return Err(Error::InvalidGrid(format!(
                "cell count {k} below the minimum of 4"
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid(
                "periods must be positive and finite".into(),
            ));
        }
        let spacing = cells
            .iter()
            .zip(lengths)
            .map(|(&k, &l)| l / k as f64)
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * cells[a + 1];
        }
        Ok(Self {
            dim,
            cells: cells.to_vec(),
            lengths: lengths.to_vec(),
            spacing,
            strides,
        })
    }

    /// `cells^d` grid with the default period `2π`.
    pub fn uniform(dim: usize, cells: usize) -> Result<Self> {
        Self::new(&vec![cells; dim], &vec![DEFAULT_PERIOD; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Per-axis integer coordinates of a flat cell index.
    pub fn coords(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for (a, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (cell / self.strides[a]) % self.cells[a];
        }
        out
    }

    pub fn center(&self, cell: usize) -> Vector {
        let c = self.coords(cell);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = (c[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// Flat index of the cell `offset` steps away along `axis`, wrapping periodically.
    #[inline]
    pub fn neighbor(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let n = self.cells[axis] as isize;
        let stride = self.strides[axis];
        let i = ((cell / stride) % self.cells[axis]) as isize;
        let j = (i + offset).rem_euclid(n);
        (cell as isize + (j - i) * stride as isize) as usize
    }
}

/// Data sampled on a spatial grid with a fixed number of components per cell.
pub trait PeriodicField: Clone {
    fn spatial(&self) -> &SpatialGrid;
    fn components(&self) -> usize;
    fn data(&self) -> &[f64];
    fn data_mut(&mut self) -> &mut [f64];

    /// Slice of the components attached to `cell`.
    fn cell(&self, cell: usize) -> &[f64] {
        let nc = self.components();
        &self.data()[cell * nc..(cell + 1) * nc]
    }
}

/// Distribution sampled on `SpatialGrid × VelocityGrid`, spatial index outer.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField {
    spatial: Arc<SpatialGrid>,
    velocity: Arc<VelocityGrid>,
    data: Vec<f64>,
}

impl KineticField {
    pub fn zeros(spatial: Arc<SpatialGrid>, velocity: Arc<VelocityGrid>) -> Self {
        let len = spatial.len() * velocity.len();
        Self {
            spatial,
            velocity,
            data: vec![0.0; len],
        }
    }

    pub fn from_data(
        spatial: Arc<SpatialGrid>,
        velocity: Arc<VelocityGrid>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if spatial.dim() != velocity.dim() {
            return Err(Error::ShapeMismatch(format!(
                "spatial dimension {} != velocity dimension {}",
                spatial.dim(),
                velocity.dim()
            )));
        }
        let expected = spatial.len() * velocity.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values, grids need {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite entry at index {i}"
            )));
        }
        Ok(Self {
            spatial,
            velocity,
            data,
        })
    }

    /// Builds a field cell by cell from a closure filling each velocity slice.
    pub fn from_fn<F: FnMut(usize, &mut [f64])>(
        spatial: Arc<SpatialGrid>,
        velocity: Arc<VelocityGrid>,
        mut fill: F,
    ) -> Self {
        let mut field = Self::zeros(spatial, velocity);
        let nv = field.velocity.len();
        for (cell, chunk) in field.data.chunks_mut(nv).enumerate() {
            fill(cell, chunk);
        }
        field
    }

    pub fn spatial_arc(&self) -> &Arc<SpatialGrid> {
        &self.spatial
    }

    pub fn velocity_arc(&self) -> &Arc<VelocityGrid> {
        &self.velocity
    }

    pub fn velocity(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn slices(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.velocity.len())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.spatial == other.spatial && self.velocity == other.velocity
    }

    /// `∬ f g dx dv`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.spatial.cell_volume()
            * self.velocity.weight()
            * pairwise_sum(self.data.len(), |i| self.data[i] * other.data[i])
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `∬ g(v) F dx dv` for a velocity weight `g`.
    pub fn integrate_against(&self, g: &[f64]) -> f64 {
        let nv = self.velocity.len();
        self.spatial.cell_volume()
            * self.velocity.weight()
            * pairwise_sum(self.data.len(), |i| g[i % nv] * self.data[i])
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map_data(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x = f(*x));
        out
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut out = self.clone();
        for (o, y) in out.data.iter_mut().zip(&other.data) {
            *o = a * *o + b * y;
        }
        out
    }
}

impl PeriodicField for KineticField {
    fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    fn components(&self) -> usize {
        self.velocity.len()
    }

    fn data(&self) -> &[f64] {
        &self.data
    }

    fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Macroscopic (x-only) field with `components` values per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    spatial: Arc<SpatialGrid>,
    components: usize,
    data: Vec<f64>,
}

impl MacroField {
    pub fn zeros(spatial: Arc<SpatialGrid>, components: usize) -> Self {
        let len = spatial.len() * components;
        Self {
            spatial,
            components,
            data: vec![0.0; len],
        }
    }

    pub fn from_data(spatial: Arc<SpatialGrid>, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 || data.len() != spatial.len() * components {
            return Err(Error::ShapeMismatch(format!(
                "macro field of {} values does not match {} cells x {components}",
                data.len(),
                spatial.len()
            )));
        }
        Ok(Self {
            spatial,
            components,
            data,
        })
    }

    pub fn from_fn(spatial: Arc<SpatialGrid>, f: impl Fn(&Vector) -> f64) -> Self {
        let data = (0..spatial.len()).map(|c| f(&spatial.center(c))).collect();
        Self {
            spatial,
            components: 1,
            data,
        }
    }

    pub fn spatial_arc(&self) -> &Arc<SpatialGrid> {
        &self.spatial
    }

    /// `Σ_x |value|²` over all components, times the cell volume.
    pub fn norm_sq(&self) -> f64 {
        self.spatial.cell_volume() * pairwise_sum(self.data.len(), |i| self.data[i] * self.data[i])
    }

    /// Discrete integral of component `c`.
    pub fn integral(&self, c: usize) -> f64 {
        let nc = self.components;
        self.spatial.cell_volume() * pairwise_sum(self.spatial.len(), |i| self.data[i * nc + c])
    }
}

impl PeriodicField for MacroField {
    fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    fn components(&self) -> usize {
        self.components
    }

    fn data(&self) -> &[f64] {
        &self.data
    }

    fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
