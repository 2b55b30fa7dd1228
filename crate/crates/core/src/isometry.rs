//! Green's function dynamics and the disintegration operators ι and κ.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{flow_snapshots, integrate_forward, Driver, FlowSettings};
use crate::energy::Bump;
use crate::error::{Error, Result};
use crate::measure::DrivingMeasure;
use crate::numerics::{fourier_coefficients, periodic_derivative, trapezoid_circle, CircleGrid, GridSpec, TimeGrid, C64, TAU};

/// G_t(z, w) = −log|(g_t(z) − g_t(w))/(1 − conj(g_t(w)) g_t(z))|, and 0 once
/// either point has left D_t.
pub fn green_eval(driver: &Driver, t: f64, z: C64, w: C64, settings: &FlowSettings) -> Result<f64> {
    if z == w {
        return Err(Error::Domain("Green's function is singular at z = w".into()));
    }
    let a = integrate_forward(driver, z, t, settings)?;
    let b = integrate_forward(driver, w, t, settings)?;
    if a.exited || b.exited {
        return Ok(0.0);
    }
    Ok(-((a.y - b.y) / (1.0 - b.y.conj() * a.y)).norm().ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardReport {
    /// −∂_t G_t(z, w) by central differences.
    pub lhs: f64,
    /// ∫ P(g_t(z), e^{iθ}) P(g_t(w), e^{iθ}) ν_t²(θ) dθ.
    pub rhs: f64,
    pub residual: f64,
}

/// Compares −∂_t G_t(z,w) with the Poisson-product integral against ρ_t.
pub fn hadamard_check(rho: &DrivingMeasure, t: f64, z: C64, w: C64, fd_step: f64, settings: &FlowSettings) -> Result<HadamardReport> {
    const QUAD: usize = 1024;
    const MARGIN: f64 = 1e-2;
    if t < fd_step {
        return Err(Error::Domain(format!("t = {t} is closer to 0 than the difference step")));
    }
    let driver = Driver::from_measure(rho, settings.n)?;
    let mut g = [C64::new(0.0, 0.0); 2];
    for (k, p) in [z, w].into_iter().enumerate() {
        let late = integrate_forward(&driver, p, t + fd_step, settings)?;
        if late.exited || late.y.norm() > 1.0 - MARGIN {
            return Err(Error::Domain(format!("{p} is within {MARGIN} of the boundary of D_t")));
        }
        g[k] = integrate_forward(&driver, p, t, settings)?.y;
    }
    let lhs = -(green_eval(&driver, t + fd_step, z, w, settings)? - green_eval(&driver, t - fd_step, z, w, settings)?) / (2.0 * fd_step);
    let density = rho.density_at(t, QUAD)?;
    let grid = CircleGrid::new(QUAD)?;
    let prod: Vec<f64> = (0..QUAD)
        .map(|j| {
            let u = C64::from_polar(1.0, grid.theta(j));
            let pz = (1.0 - g[0].norm_sqr()) / (g[0] - u).norm_sqr();
            let pw = (1.0 - g[1].norm_sqr()) / (g[1] - u).norm_sqr();
            pz * pw * density[j]
        })
        .collect();
    let rhs = trapezoid_circle(&prod);
    Ok(HadamardReport { lhs, rhs, residual: (lhs - rhs).abs() / rhs.abs() })
}

/// Test fields with closed-form gradient and positive Laplacian Δ = −(∂xx + ∂yy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestField {
    /// 1 − |z|².
    Paraboloid,
    Bump(Bump),
}

impl TestField {
    pub fn new_bump(center: C64, radius: f64, amplitude: f64) -> Result<Self> {
        if center.norm() + radius > 1.0 || radius <= 0.0 {
            return Err(Error::Config("bump support must lie in the closed unit disk".into()));
        }
        Ok(TestField::Bump(Bump { center, radius, amplitude }))
    }

    pub fn value(&self, z: C64) -> f64 {
        match self {
            TestField::Paraboloid => 1.0 - z.norm_sqr(),
            TestField::Bump(b) => b.value(z),
        }
    }

    pub fn gradient(&self, z: C64) -> C64 {
        match self {
            TestField::Paraboloid => -2.0 * z,
            TestField::Bump(b) => b.gradient(z),
        }
    }

    pub fn laplacian(&self, z: C64) -> f64 {
        match self {
            TestField::Paraboloid => 4.0,
            TestField::Bump(b) => {
                let r2 = b.radius * b.radius;
                let s = (z - b.center).norm_sqr() / r2;
                if s >= 1.0 {
                    return 0.0;
                }
                let v = b.value(z);
                let d1 = -1.0 / ((1.0 - s) * (1.0 - s));
                let d2 = -2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
                -v * ((d1 * d1 + d2) * 4.0 * s / r2 + d1 * 4.0 / r2)
            }
        }
    }

    /// D_D(φ) = (1/π)∫_D |∇φ|² by a polar midpoint rule.
    pub fn dirichlet(&self) -> f64 {
        let (nr, na) = (2000, 512);
        let sum: f64 = (0..nr)
            .into_par_iter()
            .map(|i| {
                let r = (i as f64 + 0.5) / nr as f64;
                (0..na)
                    .map(|j| self.gradient(C64::from_polar(r, TAU * j as f64 / na as f64)).norm_sqr())
                    .sum::<f64>()
                    * r
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        sum * (1.0 / nr as f64) * (TAU / na as f64) / PI
    }
}

/// Samples u(θ_j, t_k) on a circle grid × time cells [e_k, e_{k+1}], taken at
/// the cell midpoints t_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub n: usize,
    pub edges: Vec<f64>,
    /// values[k][j] = u(θ_j, t_k).
    pub values: Vec<Vec<f64>>,
    /// Pointwise u²ν² where it differs from the product of samples (limits at zeros of ν).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_density: Option<Vec<Vec<f64>>>,
}

impl CylinderFunction {
    pub fn new(n: usize, edges: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        CircleGrid::new(n)?;
        if values.len() + 1 != edges.len() || values.iter().any(|v| v.len() != n) {
            return Err(Error::Config("cylinder samples do not match the grids".into()));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("cylinder cell edges must increase".into()));
        }
        Ok(Self { n, edges, values, energy_density: None })
    }

    pub fn constant(c: f64, n: usize, edges: Vec<f64>) -> Result<Self> {
        let values = vec![vec![c; n]; edges.len().saturating_sub(1)];
        Self::new(n, edges, values)
    }

    /// Cell midpoints.
    pub fn times(&self) -> Vec<f64> {
        midpoints(&self.edges)
    }

    fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// u = −2ν′/ν = −(ν²)′/ν² on {ν > 0}; 0 where ν² vanishes (a ρ-null set),
    /// with u²ν² there taken as its limit 2(ν²)″.
    pub fn winding(rho: &DrivingMeasure, edges: Vec<f64>, n: usize) -> Result<Self> {
        let mut values = Vec::new();
        let mut energy = Vec::new();
        for t in midpoints(&edges) {
            let d = rho.density_at(t, n)?;
            let dd = periodic_derivative(&d)?;
            let d2 = periodic_derivative(&dd)?;
            let floor = 1e-10 * d.iter().cloned().fold(0.0, f64::max);
            let mut u = Vec::with_capacity(n);
            let mut e = Vec::with_capacity(n);
            for j in 0..n {
                if d[j] > floor {
                    u.push(-dd[j] / d[j]);
                    e.push(dd[j] * dd[j] / d[j]);
                } else {
                    u.push(0.0);
                    e.push(2.0 * d2[j].max(0.0));
                }
            }
            values.push(u);
            energy.push(e);
        }
        let mut out = Self::new(n, edges, values)?;
        out.energy_density = Some(energy);
        Ok(out)
    }

    /// u·ν_t² at each node.
    fn weighted(&self, rho: &DrivingMeasure) -> Result<Vec<Vec<f64>>> {
        self.times()
            .iter()
            .zip(&self.values)
            .map(|(&t, u)| Ok(rho.density_at(t, self.n)?.iter().zip(u).map(|(d, v)| d * v).collect()))
            .collect()
    }

    /// ‖u‖²_{L²(2ρ)} = 2∫∫u²ν² dθ dt (trapezoid in θ, midpoint in t).
    pub fn l2_norm_sq(&self, rho: &DrivingMeasure) -> Result<f64> {
        let times = self.times();
        let mut total = 0.0;
        for (k, w) in self.widths().into_iter().enumerate() {
            let dens: Vec<f64> = match &self.energy_density {
                Some(e) => e[k].clone(),
                None => {
                    let d = rho.density_at(times[k], self.n)?;
                    self.values[k].iter().zip(&d).map(|(v, w)| v * v * w).collect()
                }
            };
            total += 2.0 * w * trapezoid_circle(&dens);
        }
        Ok(total)
    }

    /// Copy with samples outside [a, b) set to zero.
    pub fn restricted(&self, a: f64, b: f64) -> Self {
        let keep: Vec<bool> = self.times().iter().map(|&t| t >= a && t < b).collect();
        let mask = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter().zip(&keep).map(|(u, k)| if *k { u.clone() } else { vec![0.0; self.n] }).collect()
        };
        Self {
            n: self.n,
            edges: self.edges.clone(),
            values: mask(&self.values),
            energy_density: self.energy_density.as_ref().map(mask),
        }
    }
}

fn midpoints(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Discretisation of ι and κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IotaSettings {
    /// Planar grid cells per side of [-1, 1]².
    pub grid: usize,
    /// Circle resolution of the cylinder.
    pub n: usize,
    pub t_max: f64,
    /// Width of the cylinder time cells.
    pub sample_dt: f64,
    pub flow: FlowSettings,
}

impl Default for IotaSettings {
    fn default() -> Self {
        Self { grid: 400, n: 64, t_max: 4.0, sample_dt: 1e-2, flow: FlowSettings::default() }
    }
}

impl IotaSettings {
    fn edges(&self) -> Result<Vec<f64>> {
        Ok(TimeGrid::new(0.0, self.t_max, self.sample_dt)?.times())
    }
}

/// ι[φ](θ,t) = (1/2π)∫_{D_t} Δφ(w) P(g_t(w), e^{iθ}) dA(w), through the moments
/// M_k(t) = ∫_{D_t} Δφ g_t^k dA and P = 1 + 2Re Σ y^k e^{−ikθ}.
pub fn iota(field: &TestField, rho: &DrivingMeasure, cfg: &IotaSettings) -> Result<CylinderFunction> {
    if cfg.grid < 16 {
        return Err(Error::Resolution(format!("planar grid {} is too coarse", cfg.grid)));
    }
    let grid = CircleGrid::new(cfg.n)?;
    let edges = cfg.edges()?;
    let times = midpoints(&edges);
    let nt = times.len();
    let modes = cfg.n / 2;
    let driver = Driver::from_measure(rho, cfg.flow.n)?;
    let spec = GridSpec::unit_disk(cfg.grid);
    let area = spec.cell_area();
    let sources: Vec<(C64, f64)> = spec
        .points()
        .into_iter()
        .filter(|z| z.norm() < 1.0)
        .map(|z| (z, field.laplacian(z)))
        .filter(|(_, l)| *l != 0.0)
        .collect();
    let partial = sources
        .par_chunks(512)
        .map(|chunk| {
            let mut acc = vec![C64::new(0.0, 0.0); nt * modes];
            for &(z, lap) in chunk {
                let (snaps, _) = flow_snapshots(&driver, z, &times, &cfg.flow)
                    .map_err(|e| Error::Resolution(format!("flow from {z} failed: {e}")))?;
                for (k, y) in snaps.iter().enumerate() {
                    let mut p = C64::new(lap * area, 0.0);
                    for slot in &mut acc[k * modes..(k + 1) * modes] {
                        *slot += p;
                        p *= y;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut moments = vec![C64::new(0.0, 0.0); nt * modes];
    for part in &partial {
        for (m, p) in moments.iter_mut().zip(part) {
            *m += p;
        }
    }
    let values = (0..nt)
        .map(|k| {
            let m = &moments[k * modes..(k + 1) * modes];
            (0..cfg.n)
                .map(|j| {
                    let e = C64::from_polar(1.0, -grid.theta(j));
                    let mut ep = e;
                    let mut s = m[0].re;
                    for mk in &m[1..] {
                        s += 2.0 * (mk * ep).re;
                        ep *= e;
                    }
                    s / TAU
                })
                .collect()
        })
        .collect();
    CylinderFunction::new(cfg.n, edges, values)
}

/// κ[u](w) = 2π∫₀^{τ(w)} P_D[u_t ρ_t](g_t(w)) dt with the Poisson integral
/// evaluated from Fourier coefficients of u_t ν_t².
pub struct KappaOperator {
    edges: Vec<f64>,
    coeffs: Vec<Vec<C64>>,
    driver: Driver,
    flow: FlowSettings,
}

impl KappaOperator {
    pub fn new(u: &CylinderFunction, rho: &DrivingMeasure, flow: &FlowSettings) -> Result<Self> {
        let coeffs = u
            .weighted(rho)?
            .iter()
            .map(|f| fourier_coefficients(f)[..u.n / 2].to_vec())
            .collect();
        Ok(Self { edges: u.edges.clone(), coeffs, driver: Driver::from_measure(rho, flow.n)?, flow: *flow })
    }

    fn poisson(&self, k: usize, y: C64) -> f64 {
        let c = &self.coeffs[k];
        let tail = c[1..].iter().rev().fold(C64::new(0.0, 0.0), |acc, ck| (acc + ck) * y);
        TAU * (c[0].re + 2.0 * tail.re)
    }

    pub fn eval(&self, w: C64) -> Result<f64> {
        if w.norm() >= 1.0 {
            return Err(Error::Domain(format!("|w| = {} is not inside the disk", w.norm())));
        }
        let (snaps, exit) = flow_snapshots(&self.driver, w, &midpoints(&self.edges), &self.flow)?;
        let vals: Vec<f64> = snaps.iter().enumerate().map(|(k, y)| self.poisson(k, *y)).collect();
        let Some(tau) = exit else {
            return Ok(vals.iter().enumerate().map(|(k, v)| v * (self.edges[k + 1] - self.edges[k])).sum());
        };
        // Full cells before the exit cell, then the part of the exit cell before τ.
        let cell = self.edges.partition_point(|&e| e <= tau).saturating_sub(1);
        let mut total: f64 = (0..cell.min(vals.len())).map(|k| vals[k] * (self.edges[k + 1] - self.edges[k])).sum();
        if let Some(v) = vals.get(cell).or_else(|| vals.last()) {
            total += v * (tau - self.edges[cell]).max(0.0);
        }
        Ok(total)
    }
}

pub fn kappa(u: &CylinderFunction, rho: &DrivingMeasure, w: C64, flow: &FlowSettings) -> Result<f64> {
    KappaOperator::new(u, rho, flow)?.eval(w)
}

/// Deterministic test points with radii in [0.1, 0.95].
pub fn test_points(count: usize) -> Vec<C64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let r = 0.1 + 0.85 * (k as f64 + 0.5) / count as f64;
            C64::from_polar(r, golden * k as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub norm_sq: f64,
    pub dirichlet: f64,
    pub norm_residual: f64,
    pub kappa_sup_error: f64,
    pub points: usize,
}

/// ‖ι[φ]‖² against D_D(φ) and sup |κ[ι[φ]] − φ| on 50 test points.
pub fn isometry_check(field: &TestField, rho: &DrivingMeasure, cfg: &IotaSettings) -> Result<IsometryReport> {
    let u = iota(field, rho, cfg)?;
    let norm_sq = u.l2_norm_sq(rho)?;
    let dirichlet = field.dirichlet();
    let op = KappaOperator::new(&u, rho, &cfg.flow)?;
    let pts = test_points(50);
    let errs = pts
        .par_iter()
        .map(|&w| Ok((op.eval(w)? - field.value(w)).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(IsometryReport {
        norm_sq,
        dirichlet,
        norm_residual: (norm_sq - dirichlet).abs() / dirichlet,
        kappa_sup_error: errs.iter().cloned().fold(0.0, f64::max),
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingIsometryReport {
    /// ‖−2ν′/ν‖²_{L²(2ρ)}.
    pub norm_sq: f64,
    pub sixteen_s: f64,
    /// sup |κ[−2ν′/ν] − φ| on the test points.
    pub kappa_sup_error: f64,
}

/// ι[φ] = −2ν′/ν for the winding field: its norm against 16S and κ of it
/// against φ from the flow.
pub fn winding_isometry_check(rho: &DrivingMeasure, cfg: &IotaSettings) -> Result<WindingIsometryReport> {
    let u = CylinderFunction::winding(rho, cfg.edges()?, cfg.n)?;
    let norm_sq = u.l2_norm_sq(rho)?;
    let sixteen_s = 16.0 * crate::measure::total_energy(rho, 0.0, cfg.t_max)?;
    let op = KappaOperator::new(&u, rho, &cfg.flow)?;
    let driver = Driver::from_measure(rho, cfg.flow.n)?;
    let errs = test_points(50)
        .par_iter()
        .map(|&w| {
            let phi = integrate_forward(&driver, w, cfg.t_max, &cfg.flow)?.phi;
            Ok((op.eval(w)? - phi).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WindingIsometryReport { norm_sq, sixteen_s, kappa_sup_error: errs.iter().cloned().fold(0.0, f64::max) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn driver(rho: &DrivingMeasure) -> Driver {
        Driver::from_measure(rho, 64).unwrap()
    }

    #[test]
    fn green_at_time_zero_and_uniform() {
        let s = FlowSettings::default();
        let u = driver(&DrivingMeasure::uniform(0.0, 2.0));
        let w = c(0.3, -0.2);
        assert!((green_eval(&u, 0.0, c(0.0, 0.0), w, &s).unwrap() + w.norm().ln()).abs() < 1e-14);
        let t = 0.7;
        assert!((green_eval(&u, t, c(0.0, 0.0), w, &s).unwrap() + (t.exp() * w.norm()).ln()).abs() < 1e-12);
        assert_eq!(green_eval(&u, 2.0, c(0.0, 0.0), w, &s).unwrap(), 0.0);
        assert!(green_eval(&u, 0.1, w, w, &s).is_err());
    }

    #[test]
    fn green_is_symmetric_and_positive() {
        let s = FlowSettings::default();
        let d = driver(&DrivingMeasure::example(0.0, 1.0));
        let pts = test_points(12);
        for a in &pts[..6] {
            for b in &pts[6..] {
                let g1 = green_eval(&d, 0.4, *a, *b, &s).unwrap();
                let g2 = green_eval(&d, 0.4, *b, *a, &s).unwrap();
                assert!((g1 - g2).abs() < 1e-10);
                assert!(g1 >= 0.0);
            }
        }
    }

    #[test]
    fn hadamard_uniform_and_example() {
        let s = FlowSettings::default();
        let u = DrivingMeasure::uniform(0.0, 2.0);
        let r = hadamard_check(&u, 0.5, c(0.0, 0.0), c(0.2, 0.3), 1e-4, &s).unwrap();
        assert!((r.rhs - 1.0).abs() < 1e-12 && r.residual < 1e-4, "{r:?}");
        let r = hadamard_check(&u, 0.3, c(0.1, -0.2), c(-0.25, 0.3), 1e-4, &s).unwrap();
        assert!(r.residual < 1e-4, "{r:?}");
        let ex = DrivingMeasure::example(0.0, 1.0);
        let r = hadamard_check(&ex, 0.45, c(0.2, 0.1), c(-0.1, -0.3), 1e-4, &s).unwrap();
        assert!(r.residual < 1e-3, "{r:?}");
        assert!(hadamard_check(&ex, 0.5, c(-0.9, 0.0), c(0.1, 0.0), 1e-4, &s).is_err());
    }

    #[test]
    fn hadamard_converges_at_second_order() {
        let s = FlowSettings::default();
        let ex = DrivingMeasure::example(0.0, 1.0);
        let (z, w) = (c(0.3, 0.2), c(-0.2, 0.1));
        let a = hadamard_check(&ex, 0.5, z, w, 2e-2, &s).unwrap();
        let b = hadamard_check(&ex, 0.5, z, w, 1e-2, &s).unwrap();
        let ratio = (a.lhs - a.rhs).abs() / (b.lhs - b.rhs).abs();
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn bump_laplacian_matches_finite_difference() {
        let f = TestField::new_bump(c(0.2, -0.1), 0.5, 1.0).unwrap();
        let z = c(0.35, 0.05);
        let e = 1e-4;
        let lap = -(f.value(z + e) + f.value(z - e) + f.value(z + c(0.0, e)) + f.value(z - c(0.0, e)) - 4.0 * f.value(z)) / (e * e);
        assert!((lap - f.laplacian(z)).abs() < 1e-5 * (1.0 + lap.abs()));
        assert!(TestField::new_bump(c(0.8, 0.0), 0.5, 1.0).is_err());
    }

    #[test]
    fn paraboloid_dirichlet_is_two() {
        assert!((TestField::Paraboloid.dirichlet() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn kappa_of_constant_under_uniform() {
        let rho = DrivingMeasure::uniform(0.0, 3.0);
        let edges = TimeGrid::new(0.0, 2.0, 0.01).unwrap().times();
        let u = CylinderFunction::constant(1.5, 32, edges).unwrap();
        let s = FlowSettings::default();
        for w in [c(0.5, 0.1), c(0.05, 0.02), c(0.0, 0.8)] {
            let k = kappa(&u, &rho, w, &s).unwrap();
            let expect = 1.5 * (-w.norm().ln()).min(2.0);
            assert!((k - expect).abs() < 1e-9, "{w}: {k} vs {expect}");
        }
        let zero = CylinderFunction::constant(0.0, 32, vec![0.0, 1.0]).unwrap();
        assert_eq!(kappa(&zero, &rho, c(0.3, 0.0), &s).unwrap(), 0.0);
    }

    #[test]
    fn iota_of_paraboloid_under_uniform() {
        let rho = DrivingMeasure::uniform(0.0, 5.0);
        let cfg = IotaSettings { grid: 200, n: 32, t_max: 2.0, sample_dt: 0.05, ..Default::default() };
        let u = iota(&TestField::Paraboloid, &rho, &cfg).unwrap();
        for (t, row) in u.times().iter().zip(&u.values) {
            for v in row {
                assert!((v - 2.0 * (-2.0 * t).exp()).abs() < 2e-2 * 2.0, "{t}: {v}");
            }
        }
    }

    #[test]
    fn iota_of_zero_field_vanishes() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let f = TestField::new_bump(c(0.0, 0.0), 0.3, 0.0).unwrap();
        let cfg = IotaSettings { grid: 32, n: 16, t_max: 1.0, sample_dt: 0.1, ..Default::default() };
        let u = iota(&f, &rho, &cfg).unwrap();
        assert!(u.values.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn winding_cylinder_of_example() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let cfg = IotaSettings { t_max: 1.5, sample_dt: 0.01, ..Default::default() };
        let r = winding_isometry_check(&rho, &cfg).unwrap();
        assert!((r.norm_sq - r.sixteen_s).abs() < 0.02 * r.sixteen_s, "{r:?}");
        assert!(r.kappa_sup_error < 1e-3, "{r:?}");
    }

    #[test]
    fn bump_isometry_under_example() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let f = TestField::new_bump(c(0.3, 0.2), 0.4, 1.0).unwrap();
        let cfg = IotaSettings { grid: 200, n: 64, t_max: 4.0, sample_dt: 0.01, ..Default::default() };
        let r = isometry_check(&f, &rho, &cfg).unwrap();
        assert!(r.norm_residual < 0.02, "{r:?}");
        assert!(r.kappa_sup_error < 1e-2, "{r:?}");
    }
}
