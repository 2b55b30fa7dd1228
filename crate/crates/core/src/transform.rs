//! Conformal distortion of foliations and time reversal by inversion.
//!
//! Both operations track a boundary correspondence on the circle. For the
//! distortion ψ_t = g̃_t∘ψ∘f_t with ψ_t(e^{iθ}) = e^{iΘ_t(θ)} and
//! ν̃_t²(Θ) Θ′ = Θ′² ν_t². Θ_t is recovered at each sample time by mapping the
//! image leaf ψ(f_t(S¹)) conformally onto the circle.
//!
//! For the reversal the welding e^{iV_t(φ)} = f_t^{-1}(h_t(e^{iφ})) between the
//! interior map f_t and the exterior map h_t of the same leaf satisfies
//!
//! ```text
//! V̇ = V′ Im Q_t + Im H_t(e^{iV}),    Re Q_t = −Re H_t(e^{iV}) / V′,
//! ```
//!
//! with Q_t holomorphic outside the disk, ∂_t h_t = z h_t′ Q_t and
//! ds/dt = Q_t(∞).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{boundary_chain, Driver, FlowSettings};
use crate::error::{Error, Result};
use crate::foliation::{distance_to_polyline, winding_number};
use crate::herglotz::HerglotzEvaluator;
use crate::measure::{local_energy, DensityKind, DensitySegment, DrivingMeasure};
use crate::numerics::{
    conjugate_function, fourier_coefficients, frequency, periodic_derivative_order, synthesize, trapezoid_circle,
    CircleGrid,
    TAU,
};

const BOUNDARY_TOL: f64 = 1e-9;
const HULL_MARGIN: f64 = 0.02;
const NEWTON_TOL: f64 = 1e-14;
const MAX_NEWTON: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GermKind {
    Identity,
    /// e^{i·rotation}(z − a)/(1 − āz).
    DiskMoebius { a: C64, rotation: f64 },
    /// Σ c_k z^k.
    Polynomial { coefficients: Vec<C64> },
    /// z·exp(iε(z + 1/z)), which maps the circle onto itself.
    CirclePerturbation { eps: f64 },
}

/// A map defined near the hull that sends the circle into itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticGerm {
    kind: GermKind,
}

impl AnalyticGerm {
    pub fn new(kind: GermKind) -> Result<Self> {
        match &kind {
            GermKind::DiskMoebius { a, rotation } => {
                if !(a.norm() < 1.0) || !rotation.is_finite() {
                    return Err(Error::Domain(format!("Möbius parameter a = {a} must lie in the open disk")));
                }
            }
            GermKind::Polynomial { coefficients } => {
                if coefficients.len() < 2 || coefficients.iter().all(|c| c.norm() == 0.0) {
                    return Err(Error::Domain("polynomial germ needs a non-constant polynomial".into()));
                }
            }
            GermKind::CirclePerturbation { eps } => {
                if !(eps.abs() < 0.5) {
                    return Err(Error::Domain(format!("|ε| = {} must be below 1/2", eps.abs())));
                }
            }
            GermKind::Identity => {}
        }
        let germ = Self { kind };
        let grid = CircleGrid::new(256)?;
        for z in grid.nodes() {
            let r = germ.eval(z).norm();
            if (r - 1.0).abs() > BOUNDARY_TOL {
                return Err(Error::Domain(format!(
                    "germ does not preserve the unit circle: |ψ({:.4})| = {r:.6}",
                    z
                )));
            }
        }
        Ok(germ)
    }

    pub fn identity() -> Self {
        Self { kind: GermKind::Identity }
    }

    pub fn rotation(alpha: f64) -> Self {
        Self { kind: GermKind::DiskMoebius { a: C64::new(0.0, 0.0), rotation: alpha } }
    }

    pub fn disk_moebius(a: C64, rotation: f64) -> Result<Self> {
        Self::new(GermKind::DiskMoebius { a, rotation })
    }

    pub fn polynomial(coefficients: Vec<C64>) -> Result<Self> {
        Self::new(GermKind::Polynomial { coefficients })
    }

    pub fn circle_perturbation(eps: f64) -> Result<Self> {
        Self::new(GermKind::CirclePerturbation { eps })
    }

    pub fn kind(&self) -> &GermKind {
        &self.kind
    }

    pub fn is_moebius(&self) -> bool {
        matches!(self.kind, GermKind::Identity | GermKind::DiskMoebius { .. })
    }

    pub fn eval(&self, z: C64) -> C64 {
        match &self.kind {
            GermKind::Identity => z,
            GermKind::DiskMoebius { a, rotation } => C64::from_polar(1.0, *rotation) * (z - a) / (1.0 - a.conj() * z),
            GermKind::Polynomial { coefficients } => horner(coefficients, z),
            GermKind::CirclePerturbation { eps } => z * (C64::i() * *eps * (z + 1.0 / z)).exp(),
        }
    }

    /// (ψ′, ψ″, ψ‴).
    pub fn derivatives(&self, z: C64) -> (C64, C64, C64) {
        match &self.kind {
            GermKind::Identity => (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            GermKind::Polynomial { coefficients } => {
                let d1 = derive(coefficients);
                let d2 = derive(&d1);
                let d3 = derive(&d2);
                (horner(&d1, z), horner(&d2, z), horner(&d3, z))
            }
            _ => {
                let d1 = self.derivative(z);
                let (r1, r2) = self.log_derivatives(z);
                (d1, r1 * d1, r2 * d1)
            }
        }
    }

    pub fn derivative(&self, z: C64) -> C64 {
        match &self.kind {
            GermKind::Identity => C64::new(1.0, 0.0),
            GermKind::DiskMoebius { a, rotation } => {
                let d = 1.0 - a.conj() * z;
                C64::from_polar(1.0, *rotation) * (1.0 - a.norm_sqr()) / (d * d)
            }
            GermKind::Polynomial { coefficients } => horner(&derive(coefficients), z),
            GermKind::CirclePerturbation { eps } => {
                let w = 1.0 / z;
                self.eval(z) * (w + C64::i() * *eps * (1.0 - w * w))
            }
        }
    }

    /// (ψ″/ψ′, ψ‴/ψ′).
    fn log_derivatives(&self, z: C64) -> (C64, C64) {
        match &self.kind {
            GermKind::Identity => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            GermKind::DiskMoebius { a, .. } => {
                let q = a.conj() / (1.0 - a.conj() * z);
                (2.0 * q, 6.0 * (q * q))
            }
            GermKind::Polynomial { coefficients } => {
                let d1 = derive(coefficients);
                let d2 = derive(&d1);
                let d3 = derive(&d2);
                let p1 = horner(&d1, z);
                (horner(&d2, z) / p1, horner(&d3, z) / p1)
            }
            GermKind::CirclePerturbation { eps } => {
                let w = 1.0 / z;
                let ie = C64::i() * *eps;
                let l1 = w + ie * (1.0 - w * w);
                let l2 = -w * w + 2.0 * ie * w * w * w;
                let l3 = 2.0 * w * w * w - 6.0 * ie * w * w * w * w;
                ((l2 + l1 * l1) / l1, (l3 + 3.0 * l1 * l2 + l1 * l1 * l1) / l1)
            }
        }
    }

    /// Boundary angle Θ(θ) − θ on the grid, continuous and periodic.
    pub fn boundary_angle(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..n {
            let theta = TAU * j as f64 / n as f64;
            let w = self.eval(C64::from_polar(1.0, theta)) * C64::from_polar(1.0, -theta);
            let arg = w.arg();
            let p = match prev {
                None => arg,
                Some((last_arg, last_p)) => last_p + wrap(arg - last_arg),
            };
            prev = Some((arg, p));
            out.push(p);
        }
        out
    }

    /// Check the germ on the hull K_T = D∖D_T: images stay in the closed disk,
    /// ψ′ does not vanish and the argument principle counts one preimage.
    pub fn check_hull(&self, rho: &DrivingMeasure, t: f64, settings: &FlowSettings) -> Result<usize> {
        let driver = Driver::from_measure(rho, settings.n)?;
        let leaf = boundary_chain(&driver, t, 512, settings)?.points;
        let circle = CircleGrid::new(512)?.nodes();
        let leaf_img: Vec<C64> = leaf.iter().map(|&z| self.eval(z)).collect();
        let circle_img: Vec<C64> = circle.iter().map(|&z| self.eval(z)).collect();
        if let Some(z) = leaf.iter().find(|z| !(self.eval(**z).norm() < 1.0 + BOUNDARY_TOL)) {
            return Err(Error::Domain(format!("germ sends the leaf point {z:.4} outside the disk")));
        }
        if winding_number(&leaf_img, C64::new(0.0, 0.0)) != 1 {
            return Err(Error::Domain("the image of the hull contains the origin".into()));
        }
        let mut checked = 0;
        let rings = 48;
        let spokes = 96;
        for i in 1..rings {
            let r = i as f64 / rings as f64;
            for k in 0..spokes {
                let z = C64::from_polar(r, TAU * (k as f64 + 0.5 * (i % 2) as f64) / spokes as f64);
                if winding_number(&leaf, z) != 0 {
                    continue;
                }
                let w = self.eval(z);
                if !w.is_finite() || w.norm() > 1.0 + BOUNDARY_TOL {
                    return Err(Error::Domain(format!("germ sends the hull point {z:.4} outside the disk")));
                }
                if self.derivative(z).norm() < 1e-12 {
                    return Err(Error::Domain(format!("germ has a critical point near {z:.4} in the hull")));
                }
                if 1.0 - r < HULL_MARGIN || distance_to_polyline(&leaf, z) < HULL_MARGIN {
                    continue;
                }
                let count = winding_number(&circle_img, w) - winding_number(&leaf_img, w);
                if count != 1 {
                    return Err(Error::Domain(format!(
                        "germ is not injective on the hull: {count} preimages of ψ({z:.4})"
                    )));
                }
                checked += 1;
            }
        }
        Ok(checked)
    }
}

fn horner(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn derive(c: &[C64]) -> Vec<C64> {
    c.iter().enumerate().skip(1).map(|(k, &a)| a * k as f64).collect()
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

/// Sψ = (ψ″/ψ′)′ − (ψ″/ψ′)²/2 = ψ‴/ψ′ − (3/2)(ψ″/ψ′)².
pub fn schwarzian(germ: &AnalyticGerm, z: C64) -> Result<C64> {
    let d = germ.derivative(z);
    if !(d.norm() > 1e-14) {
        return Err(Error::Domain(format!("ψ′ vanishes at {z}")));
    }
    let (r1, r2) = germ.log_derivatives(z);
    Ok(r2 - 1.5 * (r1 * r1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSettings {
    pub n: usize,
    /// Step of the leaf evolution.
    pub dt: f64,
    /// Spacing of the re-uniformized slices.
    pub sample_dt: f64,
    pub flow: FlowSettings,
    pub check_hull: bool,
}

impl Default for DistortionSettings {
    fn default() -> Self {
        Self { n: 256, dt: 1e-3, sample_dt: 1e-2, flow: FlowSettings::default(), check_hull: true }
    }
}

/// Quantities of one time slice of the distorted chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceData {
    pub t: f64,
    /// |ρ̃_t| by quadrature of ν̃_t² on the image circle.
    pub mass: f64,
    /// ∫Θ_t′² ν_t² dθ.
    pub mass_transported: f64,
    pub rho_mass: f64,
    pub l_rho: f64,
    pub l_tilde: f64,
    /// ¼∫e^{2iθ}Sψ_t(e^{iθ}) ν_t² dθ.
    pub schwarzian_term: f64,
}

impl SliceData {
    pub fn lhs(&self) -> f64 {
        self.l_tilde - self.l_rho
    }

    pub fn rhs(&self, drop_schwarzian: bool) -> f64 {
        let s = if drop_schwarzian { 0.0 } else { self.schwarzian_term };
        s + 0.125 * (self.mass - self.rho_mass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortedMeasure {
    pub times: Vec<f64>,
    /// Θ_t(θ_j) − θ_j at each node.
    pub angle: Vec<Vec<f64>>,
    /// |ψ_t′(e^{iθ_j})| = Θ_t′(θ_j).
    pub derivative: Vec<Vec<f64>>,
    /// e^{2iθ_j}Sψ_t(e^{iθ_j}) (real).
    pub schwarzian: Vec<Vec<f64>>,
    /// ν̃_t² on the uniform grid of the image circle.
    pub densities: Vec<Vec<f64>>,
    /// Per-node slice data; an interior node uses the density of the interval it starts.
    pub slices: Vec<SliceData>,
    /// Trapezoid integrals over the window of L̃ − L, the Schwarzian term and |ρ̃| − |ρ|.
    pub integrated_lhs: f64,
    pub integrated_schwarzian: f64,
    pub integrated_mass_gap: f64,
    /// ∫|ρ̃_t| dt.
    pub integrated_mass: f64,
    /// log g̃_T′(0) from the final re-uniformization.
    pub log_capacity: f64,
}

impl DistortedMeasure {
    /// Piecewise-constant driver for ρ̃ using node averages on each interval.
    pub fn driver(&self) -> Result<Driver> {
        let dens: Vec<Vec<f64>> = self
            .densities
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        Driver::from_densities(&self.times, &dens)
    }

    /// ψ_t at an interior point near the circle by Laurent continuation of log(ψ_t(z)/z).
    pub fn psi_t(&self, node: usize, z: C64) -> C64 {
        let p = &self.angle[node];
        let n = p.len();
        let c = fourier_coefficients(p);
        let mut acc = C64::new(0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            let f = frequency(k, n);
            if 2 * f.unsigned_abs() as usize == n {
                continue;
            }
            acc += C64::i() * ck * z.powi(f as i32);
        }
        z * acc.exp()
    }
}

/// Time cells of length at most dt covering [a, b], each with the density active on it.
struct Cells {
    cells: Vec<(f64, f64, usize)>,
    densities: Vec<Vec<f64>>,
    herglotz: Vec<HerglotzEvaluator>,
}

fn time_cells(rho: &DrivingMeasure, a: f64, b: f64, dt: f64, n: usize) -> Result<Cells> {
    if !(dt > 0.0) || !(b > a) {
        return Err(Error::Config(format!("need dt > 0 and a non-empty window, got dt = {dt}, [{a}, {b}]")));
    }
    let mut breaks = vec![a];
    for s in rho.segments() {
        for t in [s.t0, s.t1] {
            if t > a && t < b {
                breaks.push(t);
            }
        }
    }
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut cells = Vec::new();
    let mut densities: Vec<Vec<f64>> = Vec::new();
    let mut herglotz = Vec::new();
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let d = rho.density_at(mid, n)?;
        let idx = match densities.iter().position(|x| *x == d) {
            Some(i) => i,
            None => {
                herglotz.push(HerglotzEvaluator::from_density(&d)?);
                densities.push(d);
                densities.len() - 1
            }
        };
        let m = ((w[1] - w[0]) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / m as f64;
        for k in 0..m {
            let t0 = w[0] + k as f64 * h;
            let t1 = if k + 1 == m { w[1] } else { t0 + h };
            cells.push((t0, t1, idx));
        }
    }
    Ok(Cells { cells, densities, herglotz })
}

fn rk4<F>(y: &[f64], h: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    let k1 = f(y)?;
    let k2 = f(&axpy(0.5 * h, &k1))?;
    let k3 = f(&axpy(0.5 * h, &k2))?;
    let k4 = f(&axpy(h, &k3))?;
    Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Trigonometric interpolant of real periodic samples.
struct Trig {
    c: Vec<C64>,
}

impl Trig {
    fn new(values: &[f64]) -> Self {
        Self { c: fourier_coefficients(values) }
    }

    /// Value and first derivative at θ; the Nyquist mode is dropped.
    fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.c.len();
        let mut v = self.c[0].re;
        let mut d = 0.0;
        let step = C64::from_polar(1.0, theta);
        let mut e = step;
        for (k, ck) in self.c.iter().enumerate().take(n / 2).skip(1) {
            let z = ck * e;
            v += 2.0 * z.re;
            d -= 2.0 * k as f64 * z.im;
            e *= step;
        }
        (v, d)
    }
}

/// For x ↦ x + p(x) on the grid, the periodic part q of its inverse y ↦ y + q(y).
fn invert_correspondence(p: &[f64]) -> Result<Vec<f64>> {
    let n = p.len();
    let tp = Trig::new(p);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let y = TAU * k as f64 / n as f64;
            let mut x = y - p[k];
            for _ in 0..60 {
                let (v, d) = tp.eval(x);
                let step = (x + v - y) / (1.0 + d);
                x -= step;
                if step.abs() < NEWTON_TOL {
                    break;
                }
            }
            let (v, _) = tp.eval(x);
            if !x.is_finite() || (x + v - y).abs() > 1e-10 {
                return Err(Error::Evolution(format!("cannot invert the boundary correspondence at {y}")));
            }
            Ok(x - y)
        })
        .collect()
}

fn positive_slope(p: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let d1: Vec<f64> = periodic_derivative_order(p, 1)?.into_iter().map(|x| 1.0 + x).collect();
    if let Some(bad) = d1.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Evolution(format!("boundary correspondence lost monotonicity (slope {bad})")));
    }
    let d2 = periodic_derivative_order(p, 2)?;
    let d3 = periodic_derivative_order(p, 3)?;
    Ok((d1, d2, d3))
}

/// Fourier coefficients of [Re, Im] samples with negative and Nyquist modes removed.
fn analytic_coefficients(state: &[f64]) -> Vec<C64> {
    let n = state.len() / 2;
    let re = fourier_coefficients(&state[..n]);
    let im = fourier_coefficients(&state[n..]);
    (0..n)
        .map(|k| if k < n / 2 { re[k] + C64::i() * im[k] } else { C64::new(0.0, 0.0) })
        .collect()
}

fn split(values: &[C64]) -> Vec<f64> {
    values.iter().map(|z| z.re).chain(values.iter().map(|z| z.im)).collect()
}

fn project_analytic(state: &[f64]) -> Vec<f64> {
    split(&synthesize(&analytic_coefficients(state)))
}

/// L̇ = −H + iH L_θ for L = log(f_t(e^{iθ})e^{-iθ}), stored as [Re L, Im L].
/// L extends holomorphically to the disk, so only modes k ≥ 0 are kept.
fn leaf_rhs(state: &[f64], h: &[C64]) -> Result<Vec<f64>> {
    let c = analytic_coefficients(state);
    let d: Vec<C64> = c.iter().enumerate().map(|(k, ck)| ck * C64::new(0.0, k as f64)).collect();
    let dl = synthesize(&d);
    let v: Vec<C64> = h.iter().zip(&dl).map(|(hj, lj)| -hj + C64::i() * hj * lj).collect();
    Ok(project_analytic(&split(&v)))
}

/// Solution of Theodorsen's equation for the image leaf: S(φ) = φ + u(φ) with
/// f̃_t(e^{iφ}) = ψ(f_t(e^{iS(φ)})).
struct ImageMap {
    u: Vec<f64>,
    /// log g̃_t′(0).
    log_capacity: f64,
}

struct Uniformizer {
    kernel: DMatrix<f64>,
}

impl Uniformizer {
    fn new(n: usize) -> Result<Self> {
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let col = conjugate_function(&e0)?;
        Ok(Self { kernel: DMatrix::from_fn(n, n, |j, l| col[(j + n - l) % n]) })
    }

    /// Newton iteration on arg Γ(S) − φ = K[log|Γ(S)|] for Γ = ψ∘f_t on the circle.
    fn solve(&self, leaf: &[f64], germ: &AnalyticGerm, guess: &[f64]) -> Result<ImageMap> {
        let n = guess.len();
        let tre = Trig::new(&leaf[..n]);
        let tim = Trig::new(&leaf[n..]);
        let mut u = guess.to_vec();
        for _ in 0..MAX_NEWTON {
            let mut arg = vec![0.0; n];
            let mut logmod = vec![0.0; n];
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            for j in 0..n {
                let phi = TAU * j as f64 / n as f64;
                let s = phi + u[j];
                let (lr, dlr) = tre.eval(s);
                let (li, dli) = tim.eval(s);
                let z = C64::new(lr, li + s).exp();
                let dz = z * C64::new(dlr, 1.0 + dli);
                let w = germ.eval(z);
                let dlog = germ.derivative(z) * dz / w;
                let raw = (w * C64::from_polar(1.0, -phi)).arg();
                arg[j] = if j == 0 { raw } else { arg[j - 1] + wrap(raw - arg[j - 1]) };
                logmod[j] = w.norm().ln();
                a[j] = dlog.im;
                b[j] = dlog.re;
            }
            let mean = arg.iter().sum::<f64>() / n as f64;
            let shift = TAU * (mean / TAU).round();
            let conj = conjugate_function(&logmod)?;
            let g = DVector::from_fn(n, |j, _| -(arg[j] - shift - conj[j]));
            let mut jac = self.kernel.clone();
            for l in 0..n {
                for j in 0..n {
                    jac[(j, l)] *= -b[l];
                }
            }
            for j in 0..n {
                jac[(j, j)] += a[j];
            }
            let delta = jac
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::Evolution("singular linearization in the re-uniformization".into()))?;
            let size = delta.amax();
            let damp = if size > 0.25 { 0.25 / size } else { 1.0 };
            for j in 0..n {
                u[j] += damp * delta[j];
            }
            if size < 1e-12 {
                let mean_log = logmod.iter().sum::<f64>() / n as f64;
                return Ok(ImageMap { u, log_capacity: -mean_log });
            }
        }
        Err(Error::Evolution("re-uniformization of the image leaf did not converge".into()))
    }
}

struct Snapshot {
    t: f64,
    map: ImageMap,
    /// Θ_t − θ on the θ-grid.
    angle: Vec<f64>,
}

struct Slice {
    data: SliceData,
    density: Vec<f64>,
    derivative: Vec<f64>,
    schwarzian: Vec<f64>,
}

fn slice(snap: &Snapshot, nu2: &[f64], moebius: bool) -> Result<Slice> {
    let n = nu2.len();
    let (d1, d2, d3) = positive_slope(&snap.angle)?;
    let sd: Vec<f64> = periodic_derivative_order(&snap.map.u, 1)?.into_iter().map(|x| 1.0 + x).collect();
    let tn = Trig::new(nu2);
    let density: Vec<f64> = (0..n)
        .map(|j| (tn.eval(TAU * j as f64 / n as f64 + snap.map.u[j]).0 / sd[j]).max(0.0))
        .collect();
    let schwarzian: Vec<f64> = (0..n)
        .map(|j| {
            if moebius {
                return 0.0;
            }
            let r = d2[j] / d1[j];
            0.5 * (1.0 - d1[j] * d1[j]) - (d3[j] / d1[j] - 1.5 * r * r)
        })
        .collect();
    let weighted: Vec<f64> = schwarzian.iter().zip(nu2).map(|(a, b)| a * b).collect();
    let transported: Vec<f64> = d1.iter().zip(nu2).map(|(a, b)| a * a * b).collect();
    Ok(Slice {
        data: SliceData {
            t: snap.t,
            mass: trapezoid_circle(&density),
            mass_transported: trapezoid_circle(&transported),
            rho_mass: trapezoid_circle(nu2),
            l_rho: local_energy(nu2)?,
            l_tilde: local_energy(&density)?,
            schwarzian_term: 0.25 * trapezoid_circle(&weighted),
        },
        density,
        derivative: d1,
        schwarzian,
    })
}

/// Push ρ forward under the germ. The leaves f_t(S¹) are evolved on the
/// circle, mapped by ψ and re-uniformized at every sample time.
pub fn distort_measure(rho: &DrivingMeasure, germ: &AnalyticGerm, settings: &DistortionSettings) -> Result<DistortedMeasure> {
    let n = settings.n;
    CircleGrid::new(n)?;
    let (a, b) = rho
        .nonuniform_window()
        .ok_or_else(|| Error::Config("measure is uniform; nothing to distort".into()))?;
    if a < -1e-12 {
        return Err(Error::Config(format!("measure must be uniform before t = 0, nonuniform from {a}")));
    }
    if !(settings.sample_dt >= settings.dt) {
        return Err(Error::Config("sample_dt must be at least dt".into()));
    }
    if settings.check_hull {
        germ.check_hull(rho, b, &settings.flow)?;
    }
    let cells = time_cells(rho, 0.0, b, settings.dt, n)?;
    let boundary: Vec<Vec<C64>> = cells
        .densities
        .iter()
        .map(|d| {
            let c = conjugate_function(d)?;
            Ok(d.iter().zip(&c).map(|(x, y)| C64::new(TAU * x, TAU * y)).collect())
        })
        .collect::<Result<_>>()?;
    let stride = (settings.sample_dt / settings.dt).round().max(1.0) as usize;
    let len = cells.cells.len();
    let is_node = |k: usize| k == 0 || k == len || k % stride == 0 || cells.cells[k - 1].2 != cells.cells[k].2;
    let solver = Uniformizer::new(n)?;
    let mut leaf = vec![0.0; 2 * n];
    let snapshot = |t: f64, leaf: &[f64], guess: &[f64]| -> Result<Snapshot> {
        let map = solver.solve(leaf, germ, guess)?;
        let angle = invert_correspondence(&map.u)?;
        Ok(Snapshot { t, map, angle })
    };
    let mut nodes = vec![(0usize, snapshot(0.0, &leaf, &vec![0.0; n])?)];
    for (k, &(t0, t1, idx)) in cells.cells.iter().enumerate() {
        leaf = project_analytic(&rk4(&leaf, t1 - t0, |y| leaf_rhs(y, &boundary[idx]))?);
        if is_node(k + 1) {
            let guess = nodes.last().expect("nonempty").1.map.u.clone();
            nodes.push((k + 1, snapshot(t1, &leaf, &guess)?));
        }
    }
    let mut out = DistortedMeasure {
        times: nodes.iter().map(|(_, s)| s.t).collect(),
        angle: Vec::with_capacity(nodes.len()),
        derivative: Vec::with_capacity(nodes.len()),
        schwarzian: Vec::with_capacity(nodes.len()),
        densities: Vec::with_capacity(nodes.len()),
        slices: Vec::with_capacity(nodes.len()),
        integrated_lhs: 0.0,
        integrated_schwarzian: 0.0,
        integrated_mass_gap: 0.0,
        integrated_mass: 0.0,
        log_capacity: nodes.last().expect("nonempty").1.map.log_capacity,
    };
    let push = |out: &mut DistortedMeasure, s: Slice, snap: &Snapshot| {
        out.angle.push(snap.angle.clone());
        out.derivative.push(s.derivative);
        out.schwarzian.push(s.schwarzian);
        out.densities.push(s.density);
        out.slices.push(s.data);
    };
    for w in nodes.windows(2) {
        let (ka, ref sa) = w[0];
        let (_, ref sb) = w[1];
        let nu2 = &cells.densities[cells.cells[ka].2];
        let left = slice(sa, nu2, germ.is_moebius())?;
        let right = slice(sb, nu2, germ.is_moebius())?;
        let h = 0.5 * (sb.t - sa.t);
        let (l, r) = (left.data, right.data);
        out.integrated_lhs += h * (l.lhs() + r.lhs());
        out.integrated_schwarzian += h * (l.schwarzian_term + r.schwarzian_term);
        out.integrated_mass_gap += h * (l.mass - l.rho_mass + r.mass - r.rho_mass);
        out.integrated_mass += h * (l.mass + r.mass);
        push(&mut out, left, sa);
        if std::ptr::eq(sb, &nodes.last().expect("nonempty").1) {
            push(&mut out, right, sb);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub moebius: bool,
    /// max_t |lhs_t − rhs_t| / max_t |lhs_t|.
    pub per_time_residual: f64,
    pub integrated_lhs: f64,
    pub integrated_rhs: f64,
    pub integrated_residual: f64,
    /// max_t |∫ν̃² dφ − ∫Θ′²ν² dθ|.
    pub mass_discrepancy: f64,
    pub max_schwarzian_term: f64,
    /// ∫|ρ̃_t| dt and log g̃_T′(0), which agree.
    pub integrated_mass: f64,
    pub log_capacity: f64,
}

/// Both sides of L(ρ̃_t) − L(ρ_t) = ¼∫e^{2iθ}Sψ_t ν_t² + ⅛(|ρ̃_t| − |ρ_t|) and
/// of its time integral. The Schwarzian term is dropped for Möbius germs.
pub fn distortion_identity(rho: &DrivingMeasure, germ: &AnalyticGerm, settings: &DistortionSettings) -> Result<(DistortionReport, DistortedMeasure)> {
    let d = distort_measure(rho, germ, settings)?;
    let moebius = germ.is_moebius();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut mass_gap = 0.0f64;
    let mut max_s = 0.0f64;
    for s in &d.slices {
        worst = worst.max((s.lhs() - s.rhs(moebius)).abs());
        scale = scale.max(s.lhs().abs());
        mass_gap = mass_gap.max((s.mass - s.mass_transported).abs());
        max_s = max_s.max(s.schwarzian_term.abs());
    }
    let rhs = if moebius { 0.0 } else { d.integrated_schwarzian } + 0.125 * d.integrated_mass_gap;
    let rel = |x: f64, s: f64| if s > 0.0 { x / s } else if x == 0.0 { 0.0 } else { f64::INFINITY };
    let report = DistortionReport {
        moebius,
        per_time_residual: rel(worst, scale),
        integrated_lhs: d.integrated_lhs,
        integrated_rhs: rhs,
        integrated_residual: rel((d.integrated_lhs - rhs).abs(), d.integrated_lhs.abs()),
        mass_discrepancy: mass_gap,
        max_schwarzian_term: max_s,
        integrated_mass: d.integrated_mass,
        log_capacity: d.log_capacity,
    };
    Ok((report, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReversalSettings {
    pub n: usize,
    pub dt: f64,
    /// Time integrated past the nonuniform window.
    pub tail: f64,
}

impl Default for ReversalSettings {
    fn default() -> Self {
        Self { n: 256, dt: 1e-3, tail: 8.0 }
    }
}

/// The inverted chain j(Ĉ∖D_t) reparametrized by its capacity s(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversedChain {
    pub t: Vec<f64>,
    /// s(t) = log h_t′(∞), strictly decreasing.
    pub s: Vec<f64>,
    /// ν̃² of the reversed chain at parameter s(t) on the uniform grid.
    pub densities: Vec<Vec<f64>>,
    /// S(ρ) on the same window.
    pub energy: f64,
    /// S(ρ̃) = ∫L(ρ̃_s) ds.
    pub energy_reversed: f64,
    /// Largest deviation from 1 of ∫μ_t dφ / |ds/dt| with ds/dt from finite differences of s.
    pub mass_defect: f64,
}

impl ReversedChain {
    /// ρ̃ as a driving measure on a uniform s-grid of step at most ds.
    pub fn measure(&self, ds: f64) -> Result<DrivingMeasure> {
        let lo = *self.s.last().expect("nonempty");
        let hi = self.s[0];
        let m = ((hi - lo) / ds).ceil().max(1.0) as usize;
        let h = (hi - lo) / m as f64;
        let mut segments = Vec::with_capacity(m);
        let mut k = self.s.len() - 1;
        for c in 0..m {
            let s0 = lo + c as f64 * h;
            let s1 = if c + 1 == m { hi } else { s0 + h };
            let mid = 0.5 * (s0 + s1);
            while k > 0 && self.s[k - 1] <= mid {
                k -= 1;
            }
            let (i, j) = if k == 0 { (0, 1) } else { (k, k - 1) };
            let w = ((mid - self.s[i]) / (self.s[j] - self.s[i])).clamp(0.0, 1.0);
            let d: Vec<f64> = self.densities[i].iter().zip(&self.densities[j]).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let mass = trapezoid_circle(&d);
            segments.push(DensitySegment::new(s0, s1, DensityKind::Samples(d.iter().map(|x| x / mass).collect()))?);
        }
        DrivingMeasure::new(segments, true)
    }

    pub fn relative_gap(&self) -> f64 {
        (self.energy_reversed - self.energy).abs() / self.energy.abs().max(f64::MIN_POSITIVE)
    }
}

struct Welding {
    dv: Vec<f64>,
    q0: f64,
    mu: Vec<f64>,
}

fn welding_rhs(p: &[f64], h: Option<&HerglotzEvaluator>) -> Result<Welding> {
    let n = p.len();
    let d1: Vec<f64> = periodic_derivative_order(p, 1)?.into_iter().map(|x| 1.0 + x).collect();
    if let Some(bad) = d1.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Evolution(format!("welding lost monotonicity (slope {bad})")));
    }
    let hv: Vec<C64> = (0..n)
        .map(|j| match h {
            Some(h) => h.eval(C64::from_polar(1.0, TAU * j as f64 / n as f64 + p[j])),
            None => C64::new(1.0, 0.0),
        })
        .collect();
    let re_q: Vec<f64> = hv.iter().zip(&d1).map(|(v, d)| -v.re / d).collect();
    let im_q = conjugate_function(&re_q)?;
    let dv = (0..n).map(|j| -d1[j] * im_q[j] + hv[j].im).collect();
    let q0 = re_q.iter().sum::<f64>() / n as f64;
    let mu = re_q.iter().map(|x| (-x / TAU).max(0.0)).collect();
    Ok(Welding { dv, q0, mu })
}

/// Reverse a whole-plane chain through j(z) = 1/z by evolving the welding
/// between interior and exterior maps of its leaves.
pub fn reverse_foliation(rho: &DrivingMeasure, settings: &ReversalSettings) -> Result<ReversedChain> {
    let n = settings.n;
    CircleGrid::new(n)?;
    if !rho.uniform_extension {
        return Err(Error::Config("reversal needs uniform tails on both ends".into()));
    }
    let (a, b) = rho
        .nonuniform_window()
        .ok_or_else(|| Error::Config("measure is uniform; the reversal is trivial".into()))?;
    let cells = time_cells(rho, a, b + settings.tail, settings.dt, n)?;
    let herglotz: Vec<Option<&HerglotzEvaluator>> = cells
        .densities
        .iter()
        .zip(&cells.herglotz)
        .map(|(d, h)| if d.iter().all(|x| (x - 1.0 / TAU).abs() < 1e-15) { None } else { Some(h) })
        .collect();
    let mut state = vec![0.0; n + 1];
    state[n] = -a;
    let mut out = ReversedChain {
        t: vec![a],
        s: vec![-a],
        densities: Vec::new(),
        energy: crate::measure::total_energy_on(rho, a, b, n)?,
        energy_reversed: 0.0,
        mass_defect: 0.0,
    };
    let reversed = |w: &Welding| -> Vec<f64> {
        let scale = 1.0 / w.q0.abs();
        (0..n).map(|j| w.mu[(n - j) % n].max(0.0) * scale).collect()
    };
    let first = welding_rhs(&state[..n], herglotz[cells.cells[0].2])?;
    out.densities.push(reversed(&first));
    let mut masses = vec![trapezoid_circle(&first.mu)];
    let mut left = local_energy(&first.mu)?;
    for (c, &(t0, t1, idx)) in cells.cells.iter().enumerate() {
        let h = herglotz[idx];
        if c > 0 && cells.cells[c - 1].2 != idx {
            left = local_energy(&welding_rhs(&state[..n], h)?.mu)?;
        }
        state = rk4(&state, t1 - t0, |y| {
            let w = welding_rhs(&y[..n], h)?;
            let mut d = w.dv;
            d.push(w.q0);
            Ok(d)
        })?;
        let end = welding_rhs(&state[..n], h)?;
        if !(state[n] < *out.s.last().expect("nonempty")) {
            return Err(Error::Evolution(format!("s(t) is not strictly decreasing at t = {t1}")));
        }
        let right = local_energy(&end.mu)?;
        out.energy_reversed += 0.5 * (t1 - t0) * (left + right);
        let next = match cells.cells.get(c + 1) {
            Some(&(_, _, j)) if j != idx => welding_rhs(&state[..n], herglotz[j])?,
            _ => end,
        };
        left = local_energy(&next.mu)?;
        out.t.push(t1);
        out.s.push(state[n]);
        out.densities.push(reversed(&next));
        masses.push(trapezoid_circle(&next.mu));
    }
    for k in 1..out.t.len().saturating_sub(1) {
        let rate = (out.s[k + 1] - out.s[k - 1]) / (out.t[k + 1] - out.t[k - 1]);
        if cells.cells[k - 1].2 == cells.cells[k].2 {
            out.mass_defect = out.mass_defect.max((masses[k] / rate.abs() - 1.0).abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{integrate_forward, map_inverse};
    use crate::measure::measure_energy;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fast() -> DistortionSettings {
        DistortionSettings { n: 64, dt: 4e-3, sample_dt: 2e-2, ..Default::default() }
    }

    #[test]
    fn schwarzian_of_square_at_one() {
        let g = AnalyticGerm { kind: GermKind::Polynomial { coefficients: vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)] } };
        let s = schwarzian(&g, c(1.0, 0.0)).unwrap();
        assert!((s - c(-1.5, 0.0)).norm() < 1e-14);
        assert!(schwarzian(&g, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn schwarzian_vanishes_for_moebius() {
        let g = AnalyticGerm::disk_moebius(c(0.3, -0.2), 0.7).unwrap();
        for z in CircleGrid::new(64).unwrap().nodes() {
            for r in [0.5, 0.9, 1.0] {
                assert_eq!(schwarzian(&g, z * r).unwrap(), c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn schwarzian_matches_finite_differences() {
        let g = AnalyticGerm::circle_perturbation(0.05).unwrap();
        let z = c(0.6, 0.5);
        let h = 1e-3;
        let d = |z: C64| g.derivative(z);
        let (d1, d2, d3) = g.derivatives(z);
        let fd2 = (d(z + h) - d(z - h)) / (2.0 * h);
        let fd3 = (d(z + h) - 2.0 * d(z) + d(z - h)) / (h * h);
        assert!((d1 - (g.eval(z + h) - g.eval(z - h)) / (2.0 * h)).norm() < 1e-6);
        assert!((d2 - fd2).norm() < 1e-6);
        assert!((d3 - fd3).norm() < 1e-5);
        let s = schwarzian(&g, z).unwrap();
        assert!((s - (d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1))).norm() < 1e-12);
    }

    #[test]
    fn boundary_schwarzian_is_real() {
        let g = AnalyticGerm::circle_perturbation(0.05).unwrap();
        for z in CircleGrid::new(64).unwrap().nodes() {
            let v = z * z * schwarzian(&g, z).unwrap();
            assert!(v.im.abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn polynomial_perturbation_is_rejected() {
        let e = AnalyticGerm::polynomial(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.05, 0.0)]).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }

    #[test]
    fn boundary_angle_oracles() {
        let g = AnalyticGerm::circle_perturbation(0.05).unwrap();
        let p = g.boundary_angle(64);
        for (j, v) in p.iter().enumerate() {
            let th = TAU * j as f64 / 64.0;
            assert!((v - 0.1 * th.cos()).abs() < 1e-13);
        }
        let m = AnalyticGerm::disk_moebius(c(0.4, 0.3), 2.5).unwrap();
        let p = m.boundary_angle(128);
        let d = periodic_derivative_order(&p, 1).unwrap();
        for (j, dv) in d.iter().enumerate() {
            let z = C64::from_polar(1.0, TAU * j as f64 / 128.0);
            assert!((1.0 + dv - m.derivative(z).norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn hull_check_rejects_bad_germs() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let fs = FlowSettings { dt: 1e-2, ..Default::default() };
        assert!(AnalyticGerm::circle_perturbation(0.05).unwrap().check_hull(&rho, 1.0, &fs).unwrap() > 50);
        let far = AnalyticGerm::disk_moebius(c(-0.9, 0.0), 0.0).unwrap();
        assert!(matches!(far.check_hull(&rho, 1.0, &fs), Err(Error::Domain(_))));
        let folded = AnalyticGerm::circle_perturbation(0.45).unwrap();
        assert!(matches!(folded.check_hull(&rho, 1.0, &fs), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_germ_is_exact() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let (r, d) = distortion_identity(&rho, &AnalyticGerm::identity(), &fast()).unwrap();
        assert!(r.integrated_lhs.abs() < 1e-12 && r.integrated_rhs.abs() < 1e-12, "{r:?}");
        assert!(d.slices.iter().all(|s| s.lhs().abs() < 1e-12 && (s.mass - 1.0).abs() < 1e-12));
        let nu2 = rho.density_at(0.5, 64).unwrap();
        for dens in &d.densities {
            for (a, b) in dens.iter().zip(&nu2) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rotation_germ_rotates() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let alpha = TAU * 5.0 / 64.0;
        let (r, d) = distortion_identity(&rho, &AnalyticGerm::rotation(alpha), &fast()).unwrap();
        let nu2 = rho.density_at(0.5, 64).unwrap();
        let last = d.densities.last().unwrap();
        for j in 0..64 {
            assert!((last[(j + 5) % 64] - nu2[j]).abs() < 1e-10);
        }
        assert!(r.integrated_lhs.abs() < 1e-10);
        for s in &d.slices {
            assert!((s.l_tilde - s.l_rho).abs() < 1e-10);
        }
    }

    #[test]
    fn moebius_germ_satisfies_identity() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let g = AnalyticGerm::disk_moebius(c(0.2, 0.1), 0.3).unwrap();
        let (r, d) = distortion_identity(&rho, &g, &fast()).unwrap();
        assert!(r.per_time_residual < 1e-3, "{r:?}");
        assert!(r.mass_discrepancy < 1e-6, "{r:?}");
        assert_eq!(r.max_schwarzian_term, 0.0, "{r:?}");
        assert!(d.slices.iter().any(|s| (s.mass - 1.0).abs() > 1e-2));
    }

    #[test]
    fn perturbation_satisfies_identity() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let g = AnalyticGerm::circle_perturbation(0.05).unwrap();
        let (r, _) = distortion_identity(&rho, &g, &fast()).unwrap();
        assert!(r.integrated_residual < 0.02, "{r:?}");
        assert!(r.per_time_residual < 0.02, "{r:?}");
        assert!(r.mass_discrepancy < 1e-6, "{r:?}");
    }

    #[test]
    fn distorted_boundary_matches_composition() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let g = AnalyticGerm::circle_perturbation(0.05).unwrap();
        let s = DistortionSettings { n: 64, dt: 2e-3, sample_dt: 2e-3, ..Default::default() };
        let d = distort_measure(&rho, &g, &s).unwrap();
        let node = d.times.iter().position(|t| (t - 0.5).abs() < 1e-9).unwrap();
        let driver = Driver::from_measure(&rho, 64).unwrap();
        let tilde = d.driver().unwrap();
        let fs = FlowSettings { dt: 1e-3, ..Default::default() };
        for k in 0..8 {
            let z = C64::from_polar(0.97, TAU * k as f64 / 8.0 + 0.1);
            let f = map_inverse(&driver, 0.5, z, &fs).unwrap();
            let tr = integrate_forward(&tilde, g.eval(f), 0.5, &fs).unwrap();
            assert!(!tr.exited);
            let lhs = d.psi_t(node, z);
            assert!((lhs - tr.y).norm() < 2e-4, "{k}: {lhs} vs {}", tr.y);
        }
    }

    fn example_s(t: f64) -> f64 {
        if t <= 1.0 {
            -(2.0 - (-t).exp()).ln()
        } else {
            let k = (-1.0f64).exp();
            let a = 1.0 - k;
            let r = (-(t - 1.0)).exp();
            (k * r / (1.0 - a * a * r * r)).ln()
        }
    }

    #[test]
    fn reversal_of_uniform_is_trivial() {
        let rho = DrivingMeasure::uniform(0.0, 1.0);
        assert!(matches!(reverse_foliation(&rho, &ReversalSettings::default()), Err(Error::Config(_))));
    }

    #[test]
    fn reversal_of_example() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let cfg = ReversalSettings { n: 64, dt: 2e-3, tail: 8.0 };
        let r = reverse_foliation(&rho, &cfg).unwrap();
        for (t, s) in r.t.iter().zip(&r.s) {
            assert!((s - example_s(*t)).abs() < 1e-6, "t = {t}: {s} vs {}", example_s(*t));
        }
        assert!(r.s.windows(2).all(|w| w[1] < w[0]));
        assert!((r.energy - 0.125).abs() < 1e-12);
        assert!(r.relative_gap() < 0.03, "{r:?}");
        assert!(r.mass_defect < 1e-2, "{}", r.mass_defect);
        for d in &r.densities {
            assert!((trapezoid_circle(d) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn double_reversal_returns_energy() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let cfg = ReversalSettings { n: 64, dt: 5e-3, tail: 6.0 };
        let r = reverse_foliation(&rho, &cfg).unwrap();
        let back = reverse_foliation(&r.measure(0.02).unwrap(), &cfg).unwrap();
        let s = measure_energy(&rho).unwrap();
        assert!((back.energy_reversed - s).abs() / s < 0.05, "{} vs {s}", back.energy_reversed);
    }
}
