//! Uniformizing flow g_t, its inverse f_t = g_t^{-1}, exit times, boundary
//! chains and recovery of the driving measure from a chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::HerglotzEvaluator;
use crate::measure::DrivingMeasure;
use crate::numerics::{periodic_derivative, rk4_step, trapezoid_circle, CircleGrid, C64, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    pub dt: f64,
    pub eps_exit: f64,
    pub eps_bdy: f64,
    /// Circle resolution used to build Herglotz evaluators.
    pub n: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { dt: 1e-3, eps_exit: 1e-6, eps_bdy: 1e-4, n: 256 }
    }
}

impl FlowSettings {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// A time interval on which the Herglotz function is fixed.
#[derive(Debug, Clone)]
pub struct DriverPiece {
    pub t0: f64,
    pub t1: f64,
    pub h: HerglotzEvaluator,
}

/// Piecewise-constant-in-time Herglotz functions; H ≡ 1 wherever no piece is
/// active. Masses need not be 1, so unnormalised families can drive flows.
#[derive(Debug, Clone)]
pub struct Driver {
    pieces: Vec<DriverPiece>,
}

impl Driver {
    pub fn from_measure(rho: &DrivingMeasure, n: usize) -> Result<Self> {
        let n = rho.native_grid(n);
        let pieces = rho
            .segments()
            .iter()
            .map(|s| {
                let h = if s.kind.is_uniform() {
                    HerglotzEvaluator::constant(1.0)
                } else {
                    HerglotzEvaluator::from_density(&s.kind.on_grid(n))?
                };
                Ok(DriverPiece { t0: s.t0, t1: s.t1, h })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pieces })
    }

    /// Densities (any mass) on consecutive intervals [times[k], times[k+1]].
    pub fn from_densities(times: &[f64], densities: &[Vec<f64>]) -> Result<Self> {
        if times.len() != densities.len() + 1 {
            return Err(Error::Config("need one more time node than densities".into()));
        }
        let pieces = densities
            .iter()
            .enumerate()
            .map(|(k, d)| Ok(DriverPiece { t0: times[k], t1: times[k + 1], h: HerglotzEvaluator::from_density(d)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pieces })
    }

    pub fn from_pieces(pieces: Vec<DriverPiece>) -> Self {
        Self { pieces }
    }

    pub fn pieces(&self) -> &[DriverPiece] {
        &self.pieces
    }

    /// End of the last piece that is not the uniform measure.
    pub fn last_active_time(&self) -> f64 {
        self.pieces
            .iter()
            .rev()
            .find(|p| !(p.h.is_constant() && (p.h.mass() - 1.0).abs() < 1e-15))
            .map(|p| p.t1)
            .unwrap_or(0.0)
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| DriverPiece { t0: p.t0 + delta, t1: p.t1 + delta, h: p.h.clone() })
                .collect(),
        }
    }

    /// Intervals covering [a, b] in order, with uniform filler between pieces.
    pub fn schedule(&self, a: f64, b: f64) -> Vec<(f64, f64, Option<&HerglotzEvaluator>)> {
        let mut out = Vec::new();
        let mut t = a;
        for p in &self.pieces {
            if p.t1 <= t || p.t0 >= b {
                continue;
            }
            if p.t0 > t {
                out.push((t, p.t0, None));
                t = p.t0;
            }
            let hi = p.t1.min(b);
            if hi > t {
                out.push((t, hi, Some(&p.h)));
                t = hi;
            }
        }
        if b > t {
            out.push((t, b, None));
        }
        out
    }

    /// Herglotz function active at time t (None = uniform).
    pub fn at(&self, t: f64) -> Option<&HerglotzEvaluator> {
        self.pieces.iter().find(|p| t >= p.t0 && t < p.t1).map(|p| &p.h)
    }
}

/// State carried along a forward trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// g_s(z) at the stopping time.
    pub y: C64,
    /// g_s′(z).
    pub dg: C64,
    /// log g_s′(z), continuous branch.
    pub log_dg: C64,
    /// ∫ α_u(g_u(z)) du.
    pub phi: f64,
    /// ∫ A′(g_u(z)) g_u′(z) du with A(y) = yH′(y); ∂φ/∂z-transport.
    pub gamma: C64,
    /// Stopping time (exit time when `exited`).
    pub time: f64,
    pub exited: bool,
    /// Herglotz value at the exit point (for exit-time sensitivities).
    pub exit_h: Option<C64>,
}

#[inline]
fn forward_rhs(h: &HerglotzEvaluator, s: &[C64; 5]) -> [C64; 5] {
    let y = s[0];
    let (hv, d1, d2) = h.eval3(y);
    let lin = hv + y * d1;
    [y * hv, lin * s[1], lin, C64::new((y * d1).im, 0.0), (d1 + y * d2) * s[1]]
}

fn refine_exit(h: &HerglotzEvaluator, s0: &[C64; 5], step: f64, r2: f64) -> (f64, [C64; 5]) {
    let f = |x: f64| {
        let s = rk4_step(s0, 0.0, x, |_, s| forward_rhs(h, s));
        (s[0].norm_sqr() - r2, s)
    };
    let (mut a, mut fa) = (0.0, s0[0].norm_sqr() - r2);
    let (mut b, mut fb) = (step, f(step).0);
    let mut side = 0i8;
    let mut best = (step, f(step).1);
    for _ in 0..100 {
        if fb.abs() < 1e-15 || (b - a).abs() < 1e-15 * step.max(1e-300) {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let (fc, sc) = f(c);
        best = (c, sc);
        if fc.abs() < 1e-15 {
            break;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    best
}

fn steps_for(len: f64, dt: f64) -> usize {
    ((len / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Integrate the forward flow ∂_s y = y H_s(y) from y(0) = z up to `t_end`
/// or the exit time, transporting g′, log g′, φ and the φ-gradient kernel.
pub fn integrate_forward(driver: &Driver, z: C64, t_end: f64, settings: &FlowSettings) -> Result<Trajectory> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    advance(driver, [z, one, zero, zero, zero], 0.0, t_end, settings)
}

/// g_t(z) at each of the increasing `times` (starting from g_0 = id) until the
/// exit time, which is returned when it precedes the last time.
pub fn flow_snapshots(driver: &Driver, z: C64, times: &[f64], settings: &FlowSettings) -> Result<(Vec<C64>, Option<f64>)> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut s = [z, one, zero, zero, zero];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &tk in times {
        if tk > t {
            let tr = advance(driver, s, t, tk, settings)?;
            if tr.exited {
                return Ok((out, Some(tr.time)));
            }
            s = [tr.y, tr.dg, tr.log_dg, C64::new(tr.phi, 0.0), tr.gamma];
            t = tk;
        }
        if s[0].norm() >= 1.0 - settings.eps_exit {
            return Ok((out, Some(t)));
        }
        out.push(s[0]);
    }
    Ok((out, None))
}

fn advance(driver: &Driver, mut s: [C64; 5], t0: f64, t_end: f64, settings: &FlowSettings) -> Result<Trajectory> {
    let r_exit = 1.0 - settings.eps_exit;
    let r2 = r_exit * r_exit;
    for (lo, hi, piece) in driver.schedule(t0, t_end) {
        let len = hi - lo;
        match piece {
            Some(h) if !h.is_constant() => {
                if s[0].norm_sqr() >= r2 {
                    return Ok(finish(&s, lo, true, Some(h.eval(s[0]))));
                }
                let k = steps_for(len, settings.dt);
                let step = len / k as f64;
                for i in 0..k {
                    let next = rk4_step(&s, 0.0, step, |_, s| forward_rhs(h, s));
                    let rn = next[0].norm_sqr();
                    if rn >= r2 {
                        if rn.sqrt() > 1.0 + 0.5 && step > 0.0 {
                            return Err(Error::StepSize(format!(
                                "flow step jumped to |g| = {} near t = {}; use a smaller dt",
                                rn.sqrt(),
                                lo + i as f64 * step
                            )));
                        }
                        let (x, se) = refine_exit(h, &s, step, r2);
                        return Ok(finish(&se, lo + i as f64 * step + x, true, Some(h.eval(se[0]))));
                    }
                    s = next;
                }
            }
            other => {
                let c = other.map(|h| h.mass()).unwrap_or(1.0);
                let r = s[0].norm();
                if r > 0.0 && c > 0.0 {
                    let until = -r.ln() / c;
                    if until <= len {
                        let e = (c * until).exp();
                        let se = [s[0] * e, s[1] * e, s[2] + c * until, s[3], s[4]];
                        return Ok(finish(&se, lo + until, true, Some(C64::new(c, 0.0))));
                    }
                }
                let e = (c * len).exp();
                s = [s[0] * e, s[1] * e, s[2] + c * len, s[3], s[4]];
            }
        }
    }
    Ok(finish(&s, t_end, false, None))
}

fn finish(s: &[C64; 5], time: f64, exited: bool, exit_h: Option<C64>) -> Trajectory {
    Trajectory { y: s[0], dg: s[1], log_dg: s[2], phi: s[3].re, gamma: s[4], time, exited, exit_h }
}

/// Result of a forward flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub value: C64,
    pub log_derivative: C64,
    pub exited: bool,
    /// Exit time if the point left before `t_end`; `None` stands for τ > t_end.
    pub exit_time: Option<f64>,
}

pub fn flow_forward(driver: &Driver, z: C64, t_end: f64, settings: &FlowSettings) -> Result<FlowResult> {
    if z.norm() >= 1.0 {
        return Err(Error::Domain(format!("|z| = {} is not inside the disk", z.norm())));
    }
    let tr = integrate_forward(driver, z, t_end, settings)?;
    Ok(FlowResult {
        value: tr.y,
        log_derivative: tr.log_dg,
        exited: tr.exited,
        exit_time: tr.exited.then_some(tr.time),
    })
}

/// Exit time τ(z); uniform tails are resolved in closed form, τ(0) = ∞.
pub fn exit_time(driver: &Driver, z: C64, settings: &FlowSettings) -> Result<f64> {
    if z.norm() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let t_last = driver.last_active_time().max(0.0);
    let tr = integrate_forward(driver, z, t_last, settings)?;
    if tr.exited {
        Ok(tr.time)
    } else {
        Ok(t_last - tr.y.norm().ln())
    }
}

/// ϑ[g_t](z) = ∫_0^t α_s(g_s(z)) ds.
pub fn vartheta(driver: &Driver, t: f64, z: C64, settings: &FlowSettings) -> Result<f64> {
    let tr = integrate_forward(driver, z, t, settings)?;
    if tr.exited {
        return Err(Error::Domain(format!("point {z} left the domain at {} < {t}", tr.time)));
    }
    Ok(tr.phi)
}

/// f_t(w) with its derivative data, from the backward flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseResult {
    pub value: C64,
    pub derivative: C64,
    /// log f_t′(w), continuous branch.
    pub log_derivative: C64,
    /// log(f_t(w)/w), continuous branch equal to −t at w = 0.
    pub log_ratio: C64,
}

#[inline]
fn backward_rhs(h: &HerglotzEvaluator, s: &[C64; 4]) -> [C64; 4] {
    let y = s[0];
    let (hv, d1) = h.eval2(y);
    let lin = hv + y * d1;
    [y * hv, lin * s[1], lin, hv]
}

/// f_t(w) by integrating ∂_s y = y H_s(y) backward from (t, w) to s = 0.
pub fn map_inverse_full(driver: &Driver, t: f64, w: C64, settings: &FlowSettings) -> InverseResult {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut s = [w, one, zero, zero];
    for (lo, hi, piece) in driver.schedule(0.0, t).into_iter().rev() {
        let len = hi - lo;
        match piece {
            Some(h) if !h.is_constant() => {
                let k = steps_for(len, settings.dt);
                let step = len / k as f64;
                for _ in 0..k {
                    s = rk4_step(&s, 0.0, -step, |_, s| backward_rhs(h, s));
                }
            }
            other => {
                let c = other.map(|h| h.mass()).unwrap_or(1.0);
                let e = (-c * len).exp();
                s = [s[0] * e, s[1] * e, s[2] - c * len, s[3] - c * len];
            }
        }
    }
    InverseResult { value: s[0], derivative: s[1], log_derivative: s[2], log_ratio: s[3] }
}

pub fn map_inverse(driver: &Driver, t: f64, w: C64, settings: &FlowSettings) -> Result<C64> {
    if w.norm() >= 1.0 {
        return Err(Error::Domain(format!("|w| = {} is not inside the disk", w.norm())));
    }
    Ok(map_inverse_full(driver, t, w, settings).value)
}

/// Boundary samples of the chain map f_t on a circle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub t: f64,
    /// f_t(e^{iθ_j}).
    pub points: Vec<C64>,
    /// log(z f_t′(z)/f_t(z)) at z = e^{iθ_j}, continuous branch vanishing at 0.
    pub log_winding: Vec<C64>,
    /// f_t′(0).
    pub conformal_radius: f64,
}

impl ChainSample {
    /// True when no two non-adjacent polyline edges cross.
    pub fn is_injective(&self) -> bool {
        polyline_is_simple(&self.points)
    }
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let orient = |p: C64, q: C64, r: C64| ((q - p).conj() * (r - p)).im;
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Simple-closed-polyline test by pairwise edge intersection.
pub fn polyline_is_simple(points: &[C64]) -> bool {
    let n = points.len();
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, points[j], points[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// f_t on the circle via backward flows from radii 1−ε and 1−2ε and linear
/// Richardson extrapolation to radius 1.
pub fn boundary_chain(driver: &Driver, t: f64, n: usize, settings: &FlowSettings) -> Result<ChainSample> {
    let grid = CircleGrid::new(n)?;
    let eps = settings.eps_bdy;
    let data: Vec<(C64, C64)> = grid
        .thetas()
        .into_par_iter()
        .map(|th| {
            let u = C64::from_polar(1.0, th);
            let a = map_inverse_full(driver, t, u * (1.0 - eps), settings);
            let b = map_inverse_full(driver, t, u * (1.0 - 2.0 * eps), settings);
            let lw = |r: &InverseResult| r.log_derivative - r.log_ratio;
            (a.value * 2.0 - b.value, lw(&a) * 2.0 - lw(&b))
        })
        .collect();
    let origin = map_inverse_full(driver, t, C64::new(0.0, 0.0), settings);
    Ok(ChainSample {
        t,
        points: data.iter().map(|d| d.0).collect(),
        log_winding: data.iter().map(|d| d.1).collect(),
        conformal_radius: origin.derivative.re,
    })
}

/// Densities Re H_t(e^{iθ})/2π with H_t = −∂_t f/(z f′) = −i ∂_t f / ∂_θ f,
/// without normalisation. Central differences at interior samples; a
/// midpoint rule when only two samples are given.
pub fn recover_densities_raw(samples: &[ChainSample]) -> Result<Vec<(f64, Vec<f64>)>> {
    if samples.len() < 2 {
        return Err(Error::Recovery("need at least two chain samples".into()));
    }
    let n = samples[0].points.len();
    if samples.iter().any(|s| s.points.len() != n) {
        return Err(Error::Recovery("chain samples have different sizes".into()));
    }
    let dtheta = |p: &[C64]| -> Result<Vec<C64>> {
        let re = periodic_derivative(&p.iter().map(|z| z.re).collect::<Vec<_>>())?;
        let im = periodic_derivative(&p.iter().map(|z| z.im).collect::<Vec<_>>())?;
        Ok(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
    };
    let density = |dt_f: Vec<C64>, dth: Vec<C64>| -> Vec<f64> {
        dt_f.iter()
            .zip(&dth)
            .map(|(a, b)| (C64::new(0.0, -1.0) * a / b).re / TAU)
            .collect()
    };
    let mut out = Vec::new();
    if samples.len() == 2 {
        let (a, b) = (&samples[0], &samples[1]);
        let h = b.t - a.t;
        let dt_f: Vec<C64> = a.points.iter().zip(&b.points).map(|(x, y)| (y - x) / h).collect();
        let mid: Vec<C64> = a.points.iter().zip(&b.points).map(|(x, y)| (x + y) * 0.5).collect();
        out.push((0.5 * (a.t + b.t), density(dt_f, dtheta(&mid)?)));
        return Ok(out);
    }
    for k in 1..samples.len() - 1 {
        let (a, c, b) = (&samples[k - 1], &samples[k], &samples[k + 1]);
        let (ha, hb) = (c.t - a.t, b.t - c.t);
        // Three-point derivative on a possibly non-uniform stencil.
        let dt_f: Vec<C64> = (0..n)
            .map(|j| {
                -a.points[j] * (hb / (ha * (ha + hb)))
                    + c.points[j] * ((hb - ha) / (ha * hb))
                    + b.points[j] * (ha / (hb * (ha + hb)))
            })
            .collect();
        out.push((c.t, density(dt_f, dtheta(&c.points)?)));
    }
    Ok(out)
}

/// Recovered probability densities; fails when the raw mass is off by more than 1e-2.
pub fn measure_recovery(samples: &[ChainSample]) -> Result<Vec<(f64, Vec<f64>)>> {
    recover_densities_raw(samples)?
        .into_iter()
        .map(|(t, mut d)| {
            let mass = trapezoid_circle(&d);
            if (mass - 1.0).abs() > 1e-2 {
                return Err(Error::Recovery(format!("recovered mass {mass} at t = {t}; time step too coarse")));
            }
            d.iter_mut().for_each(|x| *x /= mass);
            Ok((t, d))
        })
        .collect()
}
