//! Periodic grids on flat 7-tori and the finite-difference calculus on them.
//!
//! Point coordinates are x_a = i_a h_a. Axes with a single point are inert:
//! every difference along them vanishes. Fields carry a [`Layout`]; an
//! edge-layout two-tensor stores row a at the midpoint i + ½e_a, which is
//! where forward differences along axis a naturally live.

mod io;

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{FourForm, Spinor8, Tensor2, ThreeForm, Vec7, DIM};
use crate::error::{Error, Result};

pub use io::{read_field, write_field, FieldHeader};

/// Below this many points per-point maps run serially.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    sizes: [usize; 7],
    lengths: [f64; 7],
}

impl GridShape {
    pub fn new(sizes: [usize; 7], lengths: [f64; 7]) -> Result<Self> {
        if let Some(a) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::GridMismatch(format!("axis {} has zero points", a + 1)));
        }
        if let Some(a) = lengths.iter().position(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::GridMismatch(format!(
                "axis {} has non-positive period {}",
                a + 1,
                lengths[a]
            )));
        }
        sizes
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::GridMismatch("point count overflows".into()))?;
        Ok(Self { sizes, lengths })
    }

    /// Period 2π on active axes and 1 on inert ones.
    pub fn with_default_lengths(sizes: [usize; 7]) -> Result<Self> {
        let lengths = std::array::from_fn(|a| if sizes[a] > 1 { TAU } else { 1.0 });
        Self::new(sizes, lengths)
    }

    /// A grid active on the leading axes, e.g. `collapsed(&[64, 64])`.
    pub fn collapsed(active: &[usize]) -> Result<Self> {
        if active.len() > DIM {
            return Err(Error::GridMismatch("more than seven axes".into()));
        }
        let mut sizes = [1; 7];
        sizes[..active.len()].copy_from_slice(active);
        Self::with_default_lengths(sizes)
    }

    pub fn sizes(&self) -> [usize; 7] {
        self.sizes
    }

    pub fn lengths(&self) -> [f64; 7] {
        self.lengths
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn is_active(&self, axis: usize) -> bool {
        self.sizes[axis] > 1
    }

    pub fn active_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..DIM).filter(|&a| self.is_active(a))
    }

    /// Smallest spacing over active axes (infinite when every axis is inert).
    pub fn min_spacing(&self) -> f64 {
        self.active_axes()
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..DIM).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.sizes[..axis].iter().product()
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 7] {
        let mut c = [0; 7];
        for a in 0..DIM {
            c[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
        c
    }

    pub fn index(&self, coords: [usize; 7]) -> usize {
        let mut idx = 0;
        for a in (0..DIM).rev() {
            idx = idx * self.sizes[a] + coords[a] % self.sizes[a];
        }
        idx
    }

    /// Position of a node.
    pub fn position(&self, idx: usize) -> [f64; 7] {
        let c = self.coords(idx);
        std::array::from_fn(|a| c[a] as f64 * self.spacing(a))
    }

    /// Index of the node `offset` steps along `axis`, wrapping periodically.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.sizes[axis];
        if n == 1 {
            return idx;
        }
        let stride = self.stride(axis);
        let c = (idx / stride) % n;
        let shifted = (c as isize + offset).rem_euclid(n as isize) as usize;
        idx + shifted * stride - c * stride
    }

    pub fn ensure_same(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "sizes {:?} vs {:?}",
                self.sizes, other.sizes
            )));
        }
        Ok(())
    }
}

/// Where the values of a field are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Node,
    /// Row or component a sits at i + ½e_a.
    Edge,
}

/// Difference stencil order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Order {
    #[default]
    #[serde(rename = "2")]
    Second,
    #[serde(rename = "4")]
    Fourth,
}

impl Order {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(Error::Domain(format!("stencil order {order} (expected 2 or 4)"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }
}

/// Pointwise value types stored in fields.
pub trait Fiber: Copy + Default + Send + Sync + 'static {
    const LEN: usize;
    const NAME: &'static str;
    fn as_slice(&self) -> &[f64];
    fn as_mut_slice(&mut self) -> &mut [f64];
}

impl Fiber for f64 {
    const LEN: usize = 1;
    const NAME: &'static str = "scalar";
    fn as_slice(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
    fn as_mut_slice(&mut self) -> &mut [f64] {
        std::slice::from_mut(self)
    }
}

macro_rules! fiber_impl {
    ($t:ty, $len:expr, $name:expr) => {
        impl Fiber for $t {
            const LEN: usize = $len;
            const NAME: &'static str = $name;
            fn as_slice(&self) -> &[f64] {
                &self.0
            }
            fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0
            }
        }
    };
}

fiber_impl!(Vec7, 7, "vec7");
fiber_impl!(Spinor8, 8, "spinor8");
fiber_impl!(ThreeForm, 35, "three_form");
fiber_impl!(FourForm, 35, "four_form");

impl Fiber for Tensor2 {
    const LEN: usize = 49;
    const NAME: &'static str = "tensor2";
    fn as_slice(&self) -> &[f64] {
        self.0.as_flattened()
    }
    fn as_mut_slice(&mut self) -> &mut [f64] {
        self.0.as_flattened_mut()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Fiber> {
    grid: GridShape,
    layout: Layout,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type Vec7Field = Field<Vec7>;
pub type Tensor2Field = Field<Tensor2>;
pub type Spinor8Field = Field<Spinor8>;
pub type ThreeFormField = Field<ThreeForm>;

fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n < PARALLEL_THRESHOLD {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Sum with a fixed pairwise tree, so the result does not depend on threading.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    if values.len() >= PARALLEL_THRESHOLD {
        let (a, b) = rayon::join(|| pairwise_sum(lo), || pairwise_sum(hi));
        a + b
    } else {
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

impl<T: Fiber> Field<T> {
    pub fn constant(grid: GridShape, value: T) -> Self {
        Self {
            grid,
            layout: Layout::Node,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridShape) -> Self {
        Self::constant(grid, T::default())
    }

    pub fn from_values(grid: GridShape, layout: Layout, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, layout, values })
    }

    /// Builds a node field from a function of the point index.
    pub fn from_fn(grid: GridShape, f: impl Fn(usize) -> T + Sync + Send) -> Self {
        Self {
            grid,
            layout: Layout::Node,
            values: map_indices(grid.len(), f),
        }
    }

    pub fn from_fn_with_layout(
        grid: GridShape,
        layout: Layout,
        f: impl Fn(usize) -> T + Sync + Send,
    ) -> Self {
        Self {
            grid,
            layout,
            values: map_indices(grid.len(), f),
        }
    }

    /// Builds a node field from a function of the node position.
    pub fn from_position(grid: GridShape, f: impl Fn([f64; 7]) -> T + Sync + Send) -> Self {
        Self::from_fn(grid, |i| f(grid.position(i)))
    }

    pub fn grid(&self) -> &GridShape {
        &self.grid
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<S: Fiber>(&self, f: impl Fn(&T) -> S + Sync + Send) -> Field<S> {
        Field {
            grid: self.grid,
            layout: self.layout,
            values: map_indices(self.len(), |i| f(&self.values[i])),
        }
    }

    pub fn zip_map<S: Fiber, R: Fiber>(
        &self,
        other: &Field<S>,
        f: impl Fn(&T, &S) -> R + Sync + Send,
    ) -> Result<Field<R>> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            layout: self.layout,
            values: map_indices(self.len(), |i| f(&self.values[i], &other.values[i])),
        })
    }

    /// Linear combination a·self + b·other, componentwise.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_map(other, |x, y| {
            let mut out = T::default();
            for ((o, p), q) in out
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice())
                .zip(y.as_slice())
            {
                *o = a * p + b * q;
            }
            out
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| {
            let mut out = *x;
            out.as_mut_slice().iter_mut().for_each(|v| *v *= s);
            out
        })
    }

    /// self += s·other.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        for (x, y) in self.values.iter_mut().zip(other.values.iter()) {
            for (p, q) in x.as_mut_slice().iter_mut().zip(y.as_slice()) {
                *p += s * q;
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|x| x.as_slice().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|x| x.as_slice().iter().all(|v| v.is_finite()))
    }

    /// Largest deviation of any point from the field mean, componentwise.
    pub fn spatial_variation(&self) -> f64 {
        let n = self.len() as f64;
        let mut mean = vec![0.0; T::LEN];
        for x in &self.values {
            for (m, v) in mean.iter_mut().zip(x.as_slice()) {
                *m += v / n;
            }
        }
        self.values
            .iter()
            .flat_map(|x| x.as_slice().iter().zip(mean.iter()))
            .fold(0.0, |m, (v, mu)| m.max((v - mu).abs()))
    }

    /// Mean value over the grid.
    pub fn mean(&self) -> T {
        let n = self.len() as f64;
        let mut out = T::default();
        for k in 0..T::LEN {
            let comp: Vec<f64> = self.values.iter().map(|x| x.as_slice()[k]).collect();
            out.as_mut_slice()[k] = pairwise_sum(&comp) / n;
        }
        out
    }

    /// Values flattened point-major, fiber components contiguous.
    pub fn to_flat(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|x| x.as_slice().iter().copied())
            .collect()
    }

    pub fn from_flat(grid: GridShape, layout: Layout, flat: &[f64]) -> Result<Self> {
        if flat.len() != grid.len() * T::LEN {
            return Err(Error::GridMismatch(format!(
                "{} numbers for {} points of {} components",
                flat.len(),
                grid.len(),
                T::LEN
            )));
        }
        let values = flat
            .chunks_exact(T::LEN)
            .map(|c| {
                let mut x = T::default();
                x.as_mut_slice().copy_from_slice(c);
                x
            })
            .collect();
        Ok(Self { grid, layout, values })
    }

    /// Applies Σ_k c_k (f(i + p_k e_axis) − f(i + m_k e_axis)) / h at every
    /// point; written as differences so constants map to exact zeros.
    fn stencil(&self, axis: usize, taps: &[(isize, isize, f64)], layout: Layout) -> Self {
        let grid = self.grid;
        if !grid.is_active(axis) {
            return Self {
                grid,
                layout,
                values: vec![T::default(); grid.len()],
            };
        }
        let inv_h = 1.0 / grid.spacing(axis);
        Self {
            grid,
            layout,
            values: map_indices(grid.len(), |i| {
                let mut out = T::default();
                for &(p, m, c) in taps {
                    let fp = self.values[grid.neighbor(i, axis, p)].as_slice();
                    let fm = self.values[grid.neighbor(i, axis, m)].as_slice();
                    for ((o, a), b) in out.as_mut_slice().iter_mut().zip(fp).zip(fm) {
                        *o += c * (a - b);
                    }
                }
                out.as_mut_slice().iter_mut().for_each(|o| *o *= inv_h);
                out
            }),
        }
    }

    /// Periodic central difference along `axis` (node to node).
    pub fn partial(&self, axis: usize, order: Order) -> Self {
        match order {
            Order::Second => self.stencil(axis, &[(1, -1, 0.5)], self.layout),
            Order::Fourth => self.stencil(
                axis,
                &[(1, -1, 8.0 / 12.0), (2, -2, -1.0 / 12.0)],
                self.layout,
            ),
        }
    }

    /// Forward staggered difference: node values to the midpoints i + ½e_axis.
    pub fn forward(&self, axis: usize, order: Order) -> Self {
        match order {
            Order::Second => self.stencil(axis, &[(1, 0, 1.0)], Layout::Edge),
            Order::Fourth => self.stencil(
                axis,
                &[(1, 0, 27.0 / 24.0), (2, -1, -1.0 / 24.0)],
                Layout::Edge,
            ),
        }
    }

    /// Backward staggered difference: midpoint values back to nodes. It is
    /// the negative adjoint of [`Field::forward`] of the same order.
    pub fn backward(&self, axis: usize, order: Order) -> Self {
        match order {
            Order::Second => self.stencil(axis, &[(0, -1, 1.0)], Layout::Node),
            Order::Fourth => self.stencil(
                axis,
                &[(0, -1, 27.0 / 24.0), (1, -2, -1.0 / 24.0)],
                Layout::Node,
            ),
        }
    }

    /// Shift by `offset` points along `axis`: result(i) = f(i + offset e_axis).
    pub fn shifted(&self, axis: usize, offset: isize) -> Self {
        let grid = self.grid;
        Self {
            grid,
            layout: self.layout,
            values: map_indices(grid.len(), |i| self.values[grid.neighbor(i, axis, offset)]),
        }
    }

    /// Compact second difference Σ_a D⁻_a D⁺_a f; negative semidefinite.
    pub fn laplacian(&self, order: Order) -> Self {
        let mut out = Self {
            grid: self.grid,
            layout: self.layout,
            values: vec![T::default(); self.len()],
        };
        for a in self.grid.active_axes() {
            let d2 = self.forward(a, order).backward(a, order);
            out.axpy(1.0, &d2).expect("same grid");
        }
        out
    }

    /// Σ_points ⟨f, g⟩ · cell volume.
    pub fn inner_l2(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let terms = map_indices(self.len(), |i| {
            self.values[i]
                .as_slice()
                .iter()
                .zip(other.values[i].as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        });
        Ok(pairwise_sum(&terms) * self.grid.cell_volume())
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner_l2(self).expect("same grid").sqrt()
    }
}

/// How first derivatives of node fields are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// Central differences, result on nodes.
    Central,
    /// Forward differences, row a on the midpoints along axis a.
    Staggered,
}

/// ∇U as a two-tensor field with (∇U)_ab = ∂_a U^b.
pub fn grad_vec(u: &Vec7Field, scheme: DiffScheme, order: Order) -> Tensor2Field {
    let grid = *u.grid();
    let parts: Vec<Vec7Field> = (0..DIM)
        .map(|a| match scheme {
            DiffScheme::Central => u.partial(a, order),
            DiffScheme::Staggered => u.forward(a, order),
        })
        .collect();
    let layout = match scheme {
        DiffScheme::Central => Layout::Node,
        DiffScheme::Staggered => Layout::Edge,
    };
    Field::from_fn_with_layout(grid, layout, |i| {
        Tensor2(std::array::from_fn(|a| parts[a].values()[i].0))
    })
}

/// ∇u as a vector field.
pub fn grad_scalar(u: &ScalarField, scheme: DiffScheme, order: Order) -> Vec7Field {
    let grid = *u.grid();
    let parts: Vec<ScalarField> = (0..DIM)
        .map(|a| match scheme {
            DiffScheme::Central => u.partial(a, order),
            DiffScheme::Staggered => u.forward(a, order),
        })
        .collect();
    let layout = match scheme {
        DiffScheme::Central => Layout::Node,
        DiffScheme::Staggered => Layout::Edge,
    };
    Field::from_fn_with_layout(grid, layout, |i| {
        Vec7(std::array::from_fn(|a| parts[a].values()[i]))
    })
}

/// (div T)_b = Σ_a ∂_a T_ab, on nodes. Node-layout tensors use central
/// differences; edge-layout tensors use the backward staggered difference.
pub fn div_tensor2(t: &Tensor2Field, order: Order) -> Vec7Field {
    let grid = *t.grid();
    let mut out = Vec7Field::zeros(grid);
    for a in grid.active_axes() {
        let row = t.map(|x| x.row(a));
        let d = match t.layout() {
            Layout::Node => row.partial(a, order),
            Layout::Edge => row.backward(a, order),
        };
        out.axpy(1.0, &d.with_layout(Layout::Node)).expect("same grid");
    }
    out
}

/// Bochner Laplacian Δ′ = −Σ_a ∂_a∂_a on vector fields.
pub fn bochner_laplacian(v: &Vec7Field, order: Order) -> Vec7Field {
    v.laplacian(order).scale(-1.0)
}

/// Eigenvalue of −D⁻D⁺ for the Fourier mode with wavenumber k along an
/// axis of n points and spacing h.
pub fn discrete_laplacian_eigenvalue(k: i64, n: usize, h: f64, order: Order) -> f64 {
    let theta = std::f64::consts::PI * k as f64 / n as f64;
    match order {
        Order::Second => 4.0 * theta.sin().powi(2) / (h * h),
        Order::Fourth => {
            let s = (27.0 * theta.sin() - (3.0 * theta).sin()) / 12.0;
            s * s / (h * h)
        }
    }
}
