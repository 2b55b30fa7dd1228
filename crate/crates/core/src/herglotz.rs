//! Poisson and Herglotz integrals of circle densities and the α-field.

use crate::error::{Error, Result};
use crate::numerics::{fourier_coefficients, periodic_derivative, CircleGrid, C64, TAU};

const TRIM: f64 = 1e-15;

/// H(z) = ∫ (e^{iθ}+z)/(e^{iθ}−z) ν²(θ) dθ stored as a Taylor series.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzEvaluator {
    coeffs: Vec<C64>,
}

impl HerglotzEvaluator {
    /// Build from ν² samples on a circle grid; H = c₀ + 2Σ c_k z^k with
    /// c_k = ∫ e^{-ikθ} ν² dθ, truncated below the Nyquist mode.
    pub fn from_density(density: &[f64]) -> Result<Self> {
        CircleGrid::new(density.len())?;
        let n = density.len();
        let c = fourier_coefficients(density);
        let mut coeffs: Vec<C64> = (0..n / 2)
            .map(|k| if k == 0 { c[0] * TAU } else { c[k] * (2.0 * TAU) })
            .collect();
        coeffs[0].im = 0.0;
        let scale = coeffs[0].norm().max(1.0);
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1].norm() <= TRIM * scale {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    /// H ≡ c (the uniform measure of mass c).
    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![C64::new(c, 0.0)] }
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    /// Total mass H(0).
    pub fn mass(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        self.eval3(z).1
    }

    /// (H, H′, H″) in one Horner pass.
    #[inline]
    pub fn eval3(&self, z: C64) -> (C64, C64, C64) {
        let zero = C64::new(0.0, 0.0);
        let (mut p, mut d1, mut d2) = (zero, zero, zero);
        for c in self.coeffs.iter().rev() {
            d2 = d2 * z + d1;
            d1 = d1 * z + p;
            p = p * z + c;
        }
        (p, d1, d2 * 2.0)
    }

    /// (H, H′) in one Horner pass.
    #[inline]
    pub fn eval2(&self, z: C64) -> (C64, C64) {
        let zero = C64::new(0.0, 0.0);
        let (mut p, mut d1) = (zero, zero);
        for c in self.coeffs.iter().rev() {
            d1 = d1 * z + p;
            p = p * z + c;
        }
        (p, d1)
    }
}

/// P(z, e^{iθ}) = (1−|z|²)/|z−e^{iθ}|².
pub fn poisson_kernel(z: C64, theta: f64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("|z| = {} is not inside the disk", z.norm())));
    }
    Ok((1.0 - z.norm_sqr()) / (z - C64::from_polar(1.0, theta)).norm_sqr())
}

/// (1/2π) ∫ P(z,e^{iθ}) f(θ) dθ by the trapezoid rule on the sample grid.
pub fn poisson_integral(values: &[f64], z: C64) -> Result<f64> {
    let n = values.len();
    let mut acc = 0.0;
    for (j, v) in values.iter().enumerate() {
        acc += poisson_kernel(z, TAU * j as f64 / n as f64)? * v;
    }
    Ok(acc / n as f64)
}

pub fn herglotz_eval(h: &HerglotzEvaluator, z: C64) -> C64 {
    h.eval(z)
}

pub fn herglotz_derivative(h: &HerglotzEvaluator, z: C64) -> C64 {
    h.derivative(z)
}

/// α(z) = Im(z H′(z)).
pub fn alpha_field(h: &HerglotzEvaluator, z: C64) -> f64 {
    (z * h.derivative(z)).im
}

/// α(z) = −4π P_D[νν′](z) = −2π P_D[(ν²)′](z), computed by quadrature.
pub fn alpha_from_density(density: &[f64], z: C64) -> Result<f64> {
    let d = periodic_derivative(density)?;
    Ok(-TAU * poisson_integral(&d, z)?)
}
