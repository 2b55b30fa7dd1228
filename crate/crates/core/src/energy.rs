//! Duality reports and energies of curves with closed-form conformal maps.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{map_inverse_full, measure_recovery, ChainSample, Driver, FlowSettings};
use crate::error::{Error, Result};
use crate::foliation::winding_field;
use crate::measure::{local_energy, measure_energy, DrivingMeasure};
use crate::numerics::{CircleGrid, GridSpec, C64};

/// D/S at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub grid: usize,
    pub dt: f64,
    pub d: f64,
    pub ratio: Option<f64>,
    pub masked_area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafEnergy {
    pub t: f64,
    pub loewner_energy: f64,
    /// 16·S over [0, t].
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrunskyDeficit {
    pub t: f64,
    /// D_D(arg f_t(z)/z).
    pub dirichlet: f64,
    /// 2t − D_D(arg f_t(z)/z).
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub s: f64,
    pub d: f64,
    /// D/S, absent when S = 0.
    pub ratio: Option<f64>,
    pub masked_area: f64,
    /// Levels from coarsest to the reference resolution.
    pub refinement: Vec<RefinementLevel>,
    /// |ratio − 16| decreases across the levels.
    pub monotone: bool,
    pub leaf_energies: Vec<LeafEnergy>,
    pub grunsky: Vec<GrunskyDeficit>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

/// Options for [`duality_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityOptions {
    /// Reference grid size (cells per side of the unit square [-1,1]²).
    pub grid: usize,
    /// Number of levels; level k uses grid/2^k and dt·2^k below the reference.
    pub levels: usize,
    /// Times at which the Grunsky bound is evaluated.
    pub grunsky_times: Vec<f64>,
    pub grunsky_grid: usize,
    /// Masked area above which a warning is attached.
    pub masked_area_warning: f64,
}

impl Default for DualityOptions {
    fn default() -> Self {
        Self { grid: 400, levels: 2, grunsky_times: Vec::new(), grunsky_grid: 200, masked_area_warning: 1e-3 }
    }
}

/// S(ρ), D(φ) and the ratio with its refinement trend.
pub fn duality_report(rho: &DrivingMeasure, settings: &FlowSettings, t_max: f64, opts: &DualityOptions) -> Result<EnergyReport> {
    let start = Instant::now();
    let s = measure_energy(rho)?;
    if !s.is_finite() {
        return Err(Error::Degenerate("energy of the measure is not finite".into()));
    }
    let mut refinement = Vec::new();
    for k in (0..opts.levels.max(1)).rev() {
        let m = opts.grid >> k;
        let level = FlowSettings { dt: settings.dt * (1u64 << k) as f64, ..*settings };
        let field = winding_field(rho, GridSpec::unit_disk(m), &level, t_max)?;
        let est = field.dirichlet()?;
        refinement.push(RefinementLevel {
            grid: m,
            dt: level.dt,
            d: est.energy,
            ratio: (s > 0.0).then(|| est.energy / s),
            masked_area: field.failures as f64 * field.phi.spec.cell_area() + est.excluded_area,
        });
    }
    let last = *refinement.last().expect("at least one level");
    let monotone = refinement
        .windows(2)
        .all(|w| match (w[0].ratio, w[1].ratio) {
            (Some(a), Some(b)) => (b - 16.0).abs() <= (a - 16.0).abs(),
            _ => (w[1].d).abs() <= (w[0].d).abs() + 1e-12,
        });
    let mut warnings = Vec::new();
    if last.masked_area > opts.masked_area_warning {
        warnings.push(format!("masked area {:.3e} exceeds {:.1e}; refine the grid", last.masked_area, opts.masked_area_warning));
    }
    if !monotone {
        warnings.push("ratio does not improve monotonically under refinement".into());
    }
    let grunsky = opts
        .grunsky_times
        .iter()
        .map(|&t| grunsky_bound(rho, t, opts.grunsky_grid, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport {
        s,
        d: last.d,
        ratio: last.ratio,
        masked_area: last.masked_area,
        refinement,
        monotone,
        leaf_energies: Vec::new(),
        grunsky,
        warnings,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// D_D(arg f_t(z)/z) = (1/π)∫_D |f_t′/f_t − 1/z|² dA from backward flows.
pub fn grunsky_bound(rho: &DrivingMeasure, t: f64, m: usize, settings: &FlowSettings) -> Result<GrunskyDeficit> {
    let driver = Driver::from_measure(rho, settings.n)?;
    let spec = GridSpec::unit_disk(m);
    let sum: f64 = spec
        .points()
        .par_iter()
        .map(|&z| {
            if z.norm() >= 1.0 {
                return 0.0;
            }
            let r = map_inverse_full(&driver, t, z, settings);
            (r.derivative / r.value - 1.0 / z).norm_sqr()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let dirichlet = sum * spec.cell_area() / PI;
    Ok(GrunskyDeficit { t, dirichlet, deficit: 2.0 * t - dirichlet })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveKind {
    CenteredCircle { r: f64 },
    OffsetCircle { center: C64, r: f64 },
    ExampleLeaf { t: f64 },
}

/// A circle |w − c| = r around 0 with its Möbius maps
/// f(z) = k z/(1 − p̄z), k = r(1 − |p|²), p = c/r, and h(z) = c + r z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCurve {
    pub kind: CurveKind,
    pub center: C64,
    pub radius: f64,
}

impl AnalyticCurve {
    pub fn new(kind: CurveKind) -> Result<Self> {
        let (center, radius) = match kind {
            CurveKind::CenteredCircle { r } => (C64::new(0.0, 0.0), r),
            CurveKind::OffsetCircle { center, r } => (center, r),
            CurveKind::ExampleLeaf { t } => {
                if t < 0.0 {
                    return Err(Error::Config("leaf time must be nonnegative".into()));
                }
                let b = (-t).exp();
                (C64::new((1.0 - b) / (2.0 - b), 0.0), 1.0 / (2.0 - b))
            }
        };
        if !(radius > 0.0 && radius.is_finite()) || center.norm() >= radius {
            return Err(Error::Config(format!("circle |w − {center}| = {radius} must surround 0")));
        }
        Ok(Self { kind, center, radius })
    }

    pub fn centered_circle(r: f64) -> Result<Self> {
        Self::new(CurveKind::CenteredCircle { r })
    }

    pub fn offset_circle(center: C64, r: f64) -> Result<Self> {
        Self::new(CurveKind::OffsetCircle { center, r })
    }

    pub fn example_leaf(t: f64) -> Result<Self> {
        Self::new(CurveKind::ExampleLeaf { t })
    }

    pub fn p(&self) -> C64 {
        self.center / self.radius
    }

    fn k(&self) -> f64 {
        self.radius * (1.0 - self.p().norm_sqr())
    }

    pub fn f(&self, z: C64) -> C64 {
        z * self.k() / (1.0 - self.p().conj() * z)
    }

    pub fn f_prime(&self, z: C64) -> C64 {
        let d = 1.0 - self.p().conj() * z;
        self.k() / (d * d)
    }

    /// f″/f′.
    pub fn f_log_prime_derivative(&self, z: C64) -> C64 {
        let q = self.p().conj();
        2.0 * q / (1.0 - q * z)
    }

    /// d/dz log(f(z)/z) = f′/f − 1/z.
    pub fn f_log_ratio_derivative(&self, z: C64) -> C64 {
        let q = self.p().conj();
        q / (1.0 - q * z)
    }

    /// Inverse of f on the interior domain.
    pub fn g(&self, w: C64) -> C64 {
        w / (self.k() + self.p().conj() * w)
    }

    pub fn g_prime(&self, w: C64) -> C64 {
        let d = self.k() + self.p().conj() * w;
        self.k() / (d * d)
    }

    pub fn h(&self, z: C64) -> C64 {
        self.center + z * self.radius
    }

    pub fn h_prime(&self, _z: C64) -> C64 {
        C64::new(self.radius, 0.0)
    }

    /// h″/h′.
    pub fn h_log_prime_derivative(&self, _z: C64) -> C64 {
        C64::new(0.0, 0.0)
    }

    /// h′/h − 1/z.
    pub fn h_log_ratio_derivative(&self, z: C64) -> C64 {
        self.radius / self.h(z) - 1.0 / z
    }

    pub fn f_prime_at_zero(&self) -> f64 {
        self.k()
    }

    pub fn h_prime_at_infinity(&self) -> f64 {
        self.radius
    }

    pub fn inside(&self, w: C64) -> bool {
        (w - self.center).norm() < self.radius
    }

    pub fn sample(&self, n: usize) -> Result<Vec<C64>> {
        Ok(CircleGrid::new(n)?.nodes().into_iter().map(|z| self.f(z)).collect())
    }
}

/// (1/π)∫_D w(z)|G(z)|² dA by the masked midpoint rule.
fn disk_integral(m: usize, g: impl Fn(C64) -> f64 + Sync) -> f64 {
    let spec = GridSpec::unit_disk(m);
    let vals: Vec<f64> = spec
        .points()
        .par_iter()
        .map(|&z| if z.norm() < 1.0 { g(z) } else { 0.0 })
        .collect();
    vals.iter().sum::<f64>() * spec.cell_area() / PI
}

/// (1/π)∫_{D*} |G(z)|² dA via z = 1/u.
fn exterior_integral(m: usize, g: impl Fn(C64) -> f64 + Sync) -> f64 {
    disk_integral(m, |u| g(1.0 / u) / u.norm_sqr().powi(2))
}

/// I^L(γ) = D_D(log|f′|) + D_{D*}(log|h′|) + 4 log|f′(0)/h′(∞)|.
pub fn loewner_energy(curve: &AnalyticCurve, m: usize) -> f64 {
    let inner = disk_integral(m, |z| curve.f_log_prime_derivative(z).norm_sqr());
    let outer = exterior_integral(m, |z| curve.h_log_prime_derivative(z).norm_sqr());
    inner + outer + 4.0 * (curve.f_prime_at_zero() / curve.h_prime_at_infinity()).ln()
}

/// (∫_D |f′/f − 1/z|² + ∫_{D*} |h′/h − 1/z|², 2π log|h′(∞)/f′(0)|).
pub fn grunsky_identity(curve: &AnalyticCurve, m: usize) -> (f64, f64) {
    let inner = disk_integral(m, |z| curve.f_log_ratio_derivative(z).norm_sqr());
    let outer = exterior_integral(m, |z| curve.h_log_ratio_derivative(z).norm_sqr());
    (PI * (inner + outer), 2.0 * PI * (curve.h_prime_at_infinity() / curve.f_prime_at_zero()).ln())
}

/// Equipotential foliation of a circle: the whole-plane chain whose leaves are
/// h(R·S¹) for times before the curve and f(r·S¹) after it.
#[derive(Debug, Clone, Copy)]
pub struct EquipotentialChain {
    curve: AnalyticCurve,
}

impl EquipotentialChain {
    pub fn new(curve: AnalyticCurve) -> Self {
        Self { curve }
    }

    /// Time of the curve itself: e^{−t} = f′(0).
    pub fn curve_time(&self) -> f64 {
        -self.curve.f_prime_at_zero().ln()
    }

    /// The leaf circle at time t as (center, radius).
    pub fn circle(&self, t: f64) -> (C64, f64) {
        let c = self.curve.center;
        if t >= self.curve_time() {
            let s = (-(t - self.curve_time())).exp();
            // f(s·S¹) is the image of a centred circle under a Möbius map.
            let q = self.curve.p().conj();
            let k = self.curve.k();
            let denom = 1.0 - (q * s).norm_sqr();
            let centre = k * s * s * q.conj() / denom;
            (centre, k * s / denom)
        } else {
            let e = (-t).exp();
            (c, 0.5 * (e + (e * e + 4.0 * c.norm_sqr()).sqrt()))
        }
    }

    /// Chain map at time t: the normalised map onto the leaf circle.
    pub fn map(&self, t: f64) -> Result<AnalyticCurve> {
        let (c, r) = self.circle(t);
        AnalyticCurve::offset_circle(c, r)
    }

    pub fn sample(&self, t: f64, n: usize) -> Result<ChainSample> {
        let map = self.map(t)?;
        let nodes = CircleGrid::new(n)?.nodes();
        let q = map.p().conj();
        Ok(ChainSample {
            t,
            points: nodes.iter().map(|&z| map.f(z)).collect(),
            log_winding: nodes.iter().map(|&z| -(1.0 - q * z).ln()).collect(),
            conformal_radius: map.f_prime_at_zero(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquipotentialReport {
    /// 16 S(ρ^γ) from recovered densities.
    pub lhs: f64,
    /// I^L(γ) − 2 log|f′(0)/h′(∞)|.
    pub rhs: f64,
    pub loewner_energy: f64,
    pub residual: f64,
}

/// Settings for the equipotential time quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquipotentialSettings {
    /// Midpoint step of the time integral.
    pub dt: f64,
    /// Half-width of the central difference used for recovery.
    pub delta: f64,
    /// How far before the curve time the integral starts.
    pub horizon: f64,
    /// Interior span after the curve time.
    pub interior: f64,
    pub n: usize,
    pub grid: usize,
}

impl Default for EquipotentialSettings {
    fn default() -> Self {
        Self { dt: 1e-2, delta: 1e-4, horizon: 16.0, interior: 1.0, n: 256, grid: 400 }
    }
}

/// 16 S(ρ^γ) against I^L(γ) − 2 log|f′(0)/h′(∞)| with ρ^γ recovered from
/// the equipotential chain.
pub fn equipotential_identity(curve: &AnalyticCurve, cfg: &EquipotentialSettings) -> Result<EquipotentialReport> {
    let chain = EquipotentialChain::new(*curve);
    let tc = chain.curve_time();
    let steps = |span: f64| (span / cfg.dt).round().max(1.0) as usize;
    let (ne, ni) = (steps(cfg.horizon), steps(cfg.interior));
    let mut nodes: Vec<(f64, f64)> = (0..ne).map(|k| (tc - (k as f64 + 0.5) * cfg.horizon / ne as f64, cfg.horizon / ne as f64)).collect();
    nodes.extend((0..ni).map(|k| (tc + (k as f64 + 0.5) * cfg.interior / ni as f64, cfg.interior / ni as f64)));
    let energies = nodes
        .par_iter()
        .map(|&(t, w)| {
            let samples = [t - cfg.delta, t, t + cfg.delta]
                .iter()
                .map(|&s| chain.sample(s, cfg.n))
                .collect::<Result<Vec<_>>>()?;
            let rec = measure_recovery(&samples)?;
            Ok(w * local_energy(&rec[0].1)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lhs = 16.0 * energies.iter().sum::<f64>();
    let il = loewner_energy(curve, cfg.grid);
    let rhs = il - 2.0 * (curve.f_prime_at_zero() / curve.h_prime_at_infinity()).ln();
    let residual = if rhs.abs() > 1e-12 { (lhs - rhs).abs() / rhs.abs() } else { (lhs - rhs).abs() };
    Ok(EquipotentialReport { lhs, rhs, loewner_energy: il, residual })
}

/// Smooth bump A·exp(1 − 1/(1 − |w − w₀|²/R²)) supported in |w − w₀| < R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: C64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, w: C64) -> f64 {
        let s = (w - self.center).norm_sqr() / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
        }
    }

    /// ∂_x + i∂_y of the bump.
    pub fn gradient(&self, w: C64) -> C64 {
        let s = (w - self.center).norm_sqr() / (self.radius * self.radius);
        if s >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let ds = -self.value(w) / ((1.0 - s) * (1.0 - s));
        (w - self.center) * (2.0 * ds / (self.radius * self.radius))
    }
}

/// ψ = Σ Re-bumps + i(ϑ-part + Σ Im-bumps), where the ϑ-part equals
/// arg(1 − p̄g(w)) inside the curve and arg(w/(w − c)) outside, so that Im ψ
/// is compatible with the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTestField {
    pub curve: AnalyticCurve,
    pub re_bumps: Vec<Bump>,
    pub im_bumps: Vec<Bump>,
    /// Include the curve's winding data in Im ψ.
    pub winding_part: bool,
}

impl ComplexTestField {
    pub fn new(curve: AnalyticCurve, re_bumps: Vec<Bump>, im_bumps: Vec<Bump>, winding_part: bool) -> Result<Self> {
        let field = Self { curve, re_bumps, im_bumps, winding_part };
        let pts = curve.sample(512)?;
        for b in &field.im_bumps {
            if pts.iter().any(|&w| (w - b.center).norm() < b.radius) {
                return Err(Error::Config(format!("Im-bump at {} meets the curve; Im ψ would be incompatible", b.center)));
            }
        }
        if !field.winding_part && curve.center.norm() > 0.0 {
            return Err(Error::Config("off-centre curves need the winding part in Im ψ".into()));
        }
        Ok(field)
    }

    /// (∇Re ψ, ∇Im ψ) as x + iy gradient vectors.
    pub fn gradients(&self, w: C64) -> (C64, C64) {
        let gre = self.re_bumps.iter().map(|b| b.gradient(w)).sum::<C64>();
        let mut gim = self.im_bumps.iter().map(|b| b.gradient(w)).sum::<C64>();
        if self.winding_part {
            let c = &self.curve;
            let d = if c.inside(w) {
                let q = c.p().conj();
                -q * c.g_prime(w) / (1.0 - q * c.g(w))
            } else {
                1.0 / w - 1.0 / (w - c.center)
            };
            gim += C64::new(0.0, 1.0) * d.conj();
        }
        (gre, gim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexIdentityReport {
    pub plane: f64,
    pub inside: f64,
    pub outside: f64,
    pub residual: f64,
}

/// D_C(ψ) against D_D(ζ) + D_{D*}(ξ) with ζ = ψ∘f + log(zf′/f) and
/// ξ = ψ∘h + log(zh′/h). The plane integral uses |w| < `box_radius` directly
/// and the rest through w = 1/u.
pub fn complex_identity_check(psi: &ComplexTestField, m: usize, box_radius: f64) -> Result<ComplexIdentityReport> {
    let curve = &psi.curve;
    let i = C64::new(0.0, 1.0);
    let energy = |w: C64| {
        let (a, b) = psi.gradients(w);
        a.norm_sqr() + b.norm_sqr()
    };
    let near = disk_integral(m, |u| energy(u * box_radius)) * box_radius * box_radius;
    let far = disk_integral(m, |u| {
        let u = u / box_radius;
        energy(1.0 / u) / u.norm_sqr().powi(2)
    }) / (box_radius * box_radius);
    let plane = near + far;
    let inside = disk_integral(m, |z| {
        let (a, b) = psi.gradients(curve.f(z));
        let fp = curve.f_prime(z).conj();
        let l = (curve.f_log_prime_derivative(z) - curve.f_log_ratio_derivative(z)).conj();
        (a * fp + l).norm_sqr() + (b * fp + i * l).norm_sqr()
    });
    let outside = exterior_integral(m, |z| {
        let (a, b) = psi.gradients(curve.h(z));
        let hp = curve.h_prime(z).conj();
        let l = (curve.h_log_prime_derivative(z) - curve.h_log_ratio_derivative(z)).conj();
        (a * hp + l).norm_sqr() + (b * hp + i * l).norm_sqr()
    });
    let rhs = inside + outside;
    let residual = if plane.abs() > 1e-12 { (plane - rhs).abs() / plane.abs() } else { (plane - rhs).abs() };
    Ok(ComplexIdentityReport { plane, inside, outside, residual })
}

/// I^L of example leaves against 16·S over [0, t].
pub fn leaf_energy_bounds(rho: &DrivingMeasure, times: &[f64], m: usize) -> Result<Vec<LeafEnergy>> {
    times
        .iter()
        .map(|&t| {
            let curve = AnalyticCurve::example_leaf(t)?;
            Ok(LeafEnergy { t, loewner_energy: loewner_energy(&curve, m), bound: 16.0 * crate::measure::total_energy(rho, 0.0, t)? })
        })
        .collect()
}
