//! Grids, spectral calculus on the circle, RK4 stepping and masked planar
//! fields with Dirichlet-energy quadrature.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const TAU: f64 = 2.0 * PI;

/// Equispaced nodes θ_j = 2πj/n on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleGrid {
    n: usize,
}

impl CircleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "circle grid size {n} must be a power of two and at least 16"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n as f64
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.theta(j)).collect()
    }

    /// Unit-circle nodes e^{iθ_j}.
    pub fn nodes(&self) -> Vec<C64> {
        self.thetas().into_iter().map(|t| C64::from_polar(1.0, t)).collect()
    }
}

/// Uniform time nodes t_k = t0 + k·dt with an integral number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(t1 > t0) || !(dt > 0.0) {
            return Err(Error::Config(format!(
                "time grid needs t1 > t0 and dt > 0 (got t0={t0}, t1={t1}, dt={dt})"
            )));
        }
        let ratio = (t1 - t0) / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Config(format!(
                "(t1 - t0)/dt = {ratio} is not an integer"
            )));
        }
        Ok(Self { t0, t1, dt, steps: steps as usize })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [C64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let fft = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "circle samples must have power-of-two length, got {n}"
        )));
    }
    Ok(())
}

/// Normalised discrete Fourier coefficients ĉ_k = (1/n) Σ_j v_j e^{-ikθ_j}, k = 0..n-1.
pub fn fourier_coefficients(values: &[f64]) -> Vec<C64> {
    let n = values.len();
    let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Inverse of [`fourier_coefficients`].
pub fn synthesize(coeffs: &[C64]) -> Vec<C64> {
    let mut buf = coeffs.to_vec();
    fft_in_place(&mut buf, true);
    buf
}

/// Signed frequency of FFT bin `k` for length `n`.
pub fn frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Spectral derivative of order `order`; the Nyquist mode is dropped.
pub fn periodic_derivative_order(values: &[f64], order: u32) -> Result<Vec<f64>> {
    let n = values.len();
    check_len(n)?;
    let mut c = fourier_coefficients(values);
    for (k, ck) in c.iter_mut().enumerate() {
        let f = frequency(k, n);
        if 2 * f.unsigned_abs() as usize == n {
            *ck = C64::new(0.0, 0.0);
        } else {
            *ck *= C64::new(0.0, f as f64).powu(order);
        }
    }
    Ok(synthesize(&c).into_iter().map(|z| z.re).collect())
}

/// Spectral derivative d/dθ of periodic samples.
pub fn periodic_derivative(values: &[f64]) -> Result<Vec<f64>> {
    periodic_derivative_order(values, 1)
}

/// Boundary values of Im F where F is holomorphic in the disk with
/// Re F = `values` on the circle and Im F(0) = 0.
pub fn conjugate_function(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    check_len(n)?;
    let mut c = fourier_coefficients(values);
    for (k, ck) in c.iter_mut().enumerate() {
        let f = frequency(k, n);
        if f == 0 || 2 * f.unsigned_abs() as usize == n {
            *ck = C64::new(0.0, 0.0);
        } else {
            *ck *= C64::new(0.0, -(f.signum() as f64));
        }
    }
    Ok(synthesize(&c).into_iter().map(|z| z.re).collect())
}

/// Evaluate the trigonometric interpolant of real samples (given by their
/// coefficients from [`fourier_coefficients`]) at arbitrary angles.
pub fn trig_interpolate(coeffs: &[C64], thetas: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let half = n / 2;
    thetas
        .iter()
        .map(|&t| {
            let step = C64::from_polar(1.0, t);
            let mut e = step;
            let mut acc = coeffs[0].re;
            for ck in coeffs.iter().take(half).skip(1) {
                acc += 2.0 * (ck * e).re;
                e *= step;
            }
            acc + (coeffs[half] * e).re
        })
        .collect()
}

/// (2π/n) Σ values, the trapezoid rule on the circle.
pub fn trapezoid_circle(values: &[f64]) -> f64 {
    TAU / values.len() as f64 * values.iter().sum::<f64>()
}

pub fn trapezoid_circle_complex(values: &[C64]) -> C64 {
    values.iter().sum::<C64>() * (TAU / values.len() as f64)
}

/// One classical RK4 step for a fixed-size complex state.
pub fn rk4_step<const N: usize, F>(state: &[C64; N], t: f64, dt: f64, mut rhs: F) -> [C64; N]
where
    F: FnMut(f64, &[C64; N]) -> [C64; N],
{
    let shift = |y: &[C64; N], k: &[C64; N], h: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += k[i] * h;
        }
        out
    };
    let k1 = rhs(t, state);
    let k2 = rhs(t + 0.5 * dt, &shift(state, &k1, 0.5 * dt));
    let k3 = rhs(t + 0.5 * dt, &shift(state, &k2, 0.5 * dt));
    let k4 = rhs(t + dt, &shift(state, &k3, dt));
    let mut out = *state;
    for i in 0..N {
        out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
    }
    out
}

/// RK4 step for a dynamically sized state with a fallible right-hand side.
pub fn rk4_step_vec<F, E>(state: &[C64], t: f64, dt: f64, mut rhs: F) -> std::result::Result<Vec<C64>, E>
where
    F: FnMut(f64, &[C64]) -> std::result::Result<Vec<C64>, E>,
{
    let shift = |k: &[C64], h: f64| -> Vec<C64> {
        state.iter().zip(k).map(|(y, k)| y + k * h).collect()
    };
    let k1 = rhs(t, state)?;
    let k2 = rhs(t + 0.5 * dt, &shift(&k1, 0.5 * dt))?;
    let k3 = rhs(t + 0.5 * dt, &shift(&k2, 0.5 * dt))?;
    let k4 = rhs(t + dt, &shift(&k3, dt))?;
    Ok((0..state.len())
        .map(|i| state[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
        .collect())
}

/// Cell-centred m×m sampling of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl GridSpec {
    pub fn new(m: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if m < 3 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::Config(format!(
                "planar grid needs m >= 3 and a non-empty box (m={m})"
            )));
        }
        Ok(Self { m, x0, x1, y0, y1 })
    }

    /// The square [-1,1]² with m cells per side.
    pub fn unit_disk(m: usize) -> Self {
        Self { m, x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }
    }

    pub fn square(m: usize, half_width: f64) -> Self {
        Self { m, x0: -half_width, x1: half_width, y0: -half_width, y1: half_width }
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.m as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.m as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Row-major index: `j` selects the row (y), `i` the column (x).
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.m + i
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        C64::new(
            self.x0 + (i as f64 + 0.5) * self.hx(),
            self.y0 + (j as f64 + 0.5) * self.hy(),
        )
    }

    pub fn points(&self) -> Vec<C64> {
        (0..self.len()).map(|k| self.point(k % self.m, k / self.m)).collect()
    }
}

/// Real samples on a [`GridSpec`] with a validity mask (`None` = masked out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarField {
    pub spec: GridSpec,
    pub values: Vec<Option<f64>>,
}

impl PlanarField {
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(C64) -> Option<f64> + Sync,
    {
        let values = spec.points().into_par_iter().map(|z| f(z)).collect();
        Self { spec, values }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[self.spec.index(i, j)]
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { spec: self.spec, values: self.values.iter().map(|v| v.map(&f)).collect() }
    }
}

/// Result of a masked Dirichlet quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletEstimate {
    /// (1/π) ∫ |∇u|² dA over the used cells.
    pub energy: f64,
    /// Area of valid cells that were dropped.
    pub excluded_area: f64,
    /// Area of cells that contributed.
    pub used_area: f64,
}

/// Finite-difference Dirichlet energy of a masked field: central differences in
/// the interior, one-sided where only one neighbour is valid; cells with no
/// valid neighbour along an axis are excluded.
pub fn dirichlet_energy(field: &PlanarField) -> Result<DirichletEstimate> {
    let spec = field.spec;
    let m = spec.m;
    if field.valid_count() < 9 {
        return Err(Error::Degenerate("fewer than 3x3 valid samples".into()));
    }
    let (hx, hy) = (spec.hx(), spec.hy());
    let area = spec.cell_area();
    let axis = |here: f64, lo: Option<f64>, hi: Option<f64>, h: f64| -> Option<f64> {
        match (lo, hi) {
            (Some(a), Some(b)) => Some((b - a) / (2.0 * h)),
            (Some(a), None) => Some((here - a) / h),
            (None, Some(b)) => Some((b - here) / h),
            (None, None) => None,
        }
    };
    let mut sum = 0.0;
    let mut used = 0.0;
    let mut excluded = 0.0;
    for j in 0..m {
        for i in 0..m {
            let Some(u) = field.get(i, j) else { continue };
            let left = if i > 0 { field.get(i - 1, j) } else { None };
            let right = if i + 1 < m { field.get(i + 1, j) } else { None };
            let down = if j > 0 { field.get(i, j - 1) } else { None };
            let up = if j + 1 < m { field.get(i, j + 1) } else { None };
            match (axis(u, left, right, hx), axis(u, down, up, hy)) {
                (Some(ux), Some(uy)) => {
                    sum += ux * ux + uy * uy;
                    used += area;
                }
                _ => excluded += area,
            }
        }
    }
    Ok(DirichletEstimate { energy: sum * area / PI, excluded_area: excluded, used_area: used })
}

/// Dirichlet energy from pointwise samples of |∇u|² (midpoint rule on cells).
pub fn dirichlet_energy_from_gradients(spec: GridSpec, grad_sq: &[Option<f64>]) -> Result<DirichletEstimate> {
    let valid = grad_sq.iter().filter(|g| g.is_some()).count();
    if valid < 9 {
        return Err(Error::Degenerate("fewer than 3x3 valid samples".into()));
    }
    let area = spec.cell_area();
    let mut sum = 0.0;
    let mut excluded = 0.0;
    for g in grad_sq.iter().flatten() {
        if g.is_finite() {
            sum += g;
        } else {
            excluded += area;
        }
    }
    Ok(DirichletEstimate {
        energy: sum * area / PI,
        excluded_area: excluded,
        used_area: valid as f64 * area - excluded,
    })
}
