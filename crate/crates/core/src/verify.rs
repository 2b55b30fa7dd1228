//! The acceptance suite: twelve criteria, each with a tolerance and a time
//! budget. A criterion that errors is reported as failed and the suite goes on.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{boundary_chain, Driver, FlowSettings};
use crate::energy::{duality_report, equipotential_identity, grunsky_bound, leaf_energy_bounds, AnalyticCurve, DualityOptions, EquipotentialSettings};
use crate::error::{Error, Result};
use crate::foliation::winding_field;
use crate::isometry::{hadamard_check, isometry_check, IotaSettings, TestField};
use crate::measure::{band_limited_density, local_energy, measure_energy, poisson_mollify, time_average, DensityKind, DensitySegment, DrivingMeasure};
use crate::numerics::{CircleGrid, GridSpec, C64};
use crate::transform::{distortion_identity, reverse_foliation, AnalyticGerm, DistortionSettings, ReversalSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    pub seed: u64,
    /// Multiplies every flow step.
    pub dt_scale: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { seed: 7, dt_scale: 1.0 }
    }
}

impl VerifySettings {
    fn flow(&self) -> FlowSettings {
        FlowSettings::with_dt(1e-3 * self.dt_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub within_budget: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {:>8.2}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget,
            self.detail
        )
    }
}

/// Identifier, name and time budget in seconds.
pub const CRITERIA: [(usize, &str, f64); 12] = [
    (1, "closed-form chain", 10.0),
    (2, "duality ratio", 300.0),
    (3, "duality ratio, random", 900.0),
    (4, "hadamard formula", 60.0),
    (5, "isometry", 120.0),
    (6, "winding closed form", 60.0),
    (7, "grunsky bound", 120.0),
    (8, "leaf energy bound", 60.0),
    (9, "equipotential identity", 180.0),
    (10, "reversibility", 300.0),
    (11, "distortion", 300.0),
    (12, "mollification monotonicity", 30.0),
];

pub fn run_criterion(id: usize, cfg: &VerifySettings) -> Result<Outcome> {
    let &(_, name, budget) = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .ok_or_else(|| Error::Config(format!("no criterion {id}; valid ids are 1..=12")))?;
    let start = Instant::now();
    let result = match id {
        1 => closed_form_chain(cfg),
        2 => duality_ratio(cfg),
        3 => duality_random(cfg),
        4 => hadamard(cfg),
        5 => isometry(cfg),
        6 => winding_closed_form(cfg),
        7 => grunsky(cfg),
        8 => leaf_energy(),
        9 => equipotential(),
        10 => reversibility(),
        11 => distortion(cfg),
        _ => mollification(cfg),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (ok, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Ok(Outcome { id, name: name.into(), passed: ok && seconds <= budget, within_budget: seconds <= budget, detail, seconds, budget })
}

/// Runs the selected criteria (all when `ids` is empty) in order.
pub fn run_suite(ids: &[usize], cfg: &VerifySettings, mut each: impl FnMut(&Outcome)) -> Result<Vec<Outcome>> {
    let ids: Vec<usize> = if ids.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { ids.to_vec() };
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let o = run_criterion(id, cfg)?;
        each(&o);
        out.push(o);
    }
    Ok(out)
}

type Check = Result<(bool, String)>;

fn example_f(t: f64, z: C64) -> C64 {
    let b = (-t).exp();
    z * b / (1.0 - z * (1.0 - b))
}

fn closed_form_chain(cfg: &VerifySettings) -> Check {
    let rho = DrivingMeasure::example(0.0, 1.0);
    let driver = Driver::from_measure(&rho, 256)?;
    let s = boundary_chain(&driver, 1.0, 256, &cfg.flow())?;
    let nodes = CircleGrid::new(256)?.nodes();
    let err = s.points.iter().zip(&nodes).map(|(p, z)| (p - example_f(1.0, *z)).norm()).fold(0.0, f64::max);
    Ok((err <= 1e-5, format!("max |f - exact| = {err:.3e} (tol 1e-5)")))
}

fn duality_ratio(cfg: &VerifySettings) -> Check {
    let rho = DrivingMeasure::example(0.0, 1.0);
    let r = duality_report(&rho, &cfg.flow(), 1.0, &DualityOptions { grid: 400, levels: 2, ..Default::default() })?;
    let ratio = r.ratio.unwrap_or(f64::NAN);
    let trend: Vec<String> = r.refinement.iter().map(|l| format!("{}:{:.4}", l.grid, l.ratio.unwrap_or(f64::NAN))).collect();
    Ok((
        (15.7..=16.3).contains(&ratio) && r.monotone,
        format!("S = {:.6}, D = {:.5}, D/S = {ratio:.4} in [15.7, 16.3]; levels {} monotone = {}", r.s, r.d, trend.join(" "), r.monotone),
    ))
}

/// Positive density with at most three Fourier modes.
fn random_band_limited(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let modes = rng.gen_range(1..=3);
    let mut cos = vec![0.0; modes];
    let mut sin = vec![0.0; modes];
    let mut budget: f64 = 0.85;
    for k in 0..modes {
        let a = rng.gen_range(-1.0f64..1.0) * budget / 2.0;
        let b = rng.gen_range(-1.0f64..1.0) * budget / 2.0;
        budget -= a.abs() + b.abs();
        cos[k] = a;
        sin[k] = b;
    }
    band_limited_density(n, &cos, &sin)
}

fn duality_random(cfg: &VerifySettings) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    let mut ratios = Vec::new();
    for _ in 0..5 {
        let rho = DrivingMeasure::from_samples(0.0, 0.5, random_band_limited(&mut rng, 64))?;
        let r = duality_report(&rho, &cfg.flow(), 0.5, &DualityOptions { grid: 400, levels: 1, ..Default::default() })?;
        let ratio = r.ratio.unwrap_or(f64::NAN);
        worst = worst.max((ratio / 16.0 - 1.0).abs());
        ratios.push(format!("{ratio:.3}"));
    }
    Ok((worst <= 0.05, format!("ratios [{}], worst deviation {:.2}% (tol 5%)", ratios.join(", "), 100.0 * worst)))
}

/// A point uniformly distributed in the disk of radius 0.7 r about c.
fn point_in(rng: &mut ChaCha8Rng, c: f64, r: f64) -> C64 {
    let rad = 0.7 * r * rng.gen::<f64>().sqrt();
    c + C64::from_polar(rad, 2.0 * PI * rng.gen::<f64>())
}

fn hadamard(cfg: &VerifySettings) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let flow = cfg.flow();
    let mut worst = [0.0f64; 2];
    for (k, rho) in [DrivingMeasure::uniform(0.0, 2.0), DrivingMeasure::example(0.0, 1.0)].iter().enumerate() {
        for _ in 0..20 {
            let t = rng.gen_range(0.2..0.8);
            let b = (-t as f64).exp();
            let (c, r) = if k == 0 { (0.0, b) } else { ((1.0 - b) / (2.0 - b), 1.0 / (2.0 - b)) };
            let (z, w) = (point_in(&mut rng, c, r), point_in(&mut rng, c, r));
            worst[k] = worst[k].max(hadamard_check(rho, t, z, w, 1e-4, &flow)?.residual);
        }
    }
    Ok((
        worst.iter().all(|&w| w <= 1e-3),
        format!("max relative residual: uniform {:.2e}, example {:.2e} over 20 pairs each (tol 1e-3)", worst[0], worst[1]),
    ))
}

fn isometry(cfg: &VerifySettings) -> Check {
    let rho = DrivingMeasure::uniform(0.0, 4.0);
    let r = isometry_check(&TestField::Paraboloid, &rho, &IotaSettings { flow: cfg.flow(), ..Default::default() })?;
    let ok = (r.norm_sq - 2.0).abs() <= 1e-3 && (r.dirichlet - 2.0).abs() <= 1e-3 && r.kappa_sup_error <= 1e-3;
    Ok((ok, format!("|iota|^2 = {:.6}, D = {:.6} (target 2, tol 1e-3), kappa sup error {:.2e} on {} points", r.norm_sq, r.dirichlet, r.kappa_sup_error, r.points)))
}

/// φ for the example measure on [0, T]: arg(z/(z−1)²) + π in the hull,
/// −arg(z(1−e^{−T}) + e^{−T}) in D_T.
pub fn example_winding(z: C64, t: f64) -> (bool, f64) {
    let b = (-t).exp();
    let a = 1.0 - b;
    if (z - a / (2.0 - b)).norm() < 1.0 / (2.0 - b) {
        (false, -(z * a + b).arg())
    } else {
        let v = (z / ((z - 1.0) * (z - 1.0))).arg() + PI;
        (true, if v > PI { v - 2.0 * PI } else { v })
    }
}

fn winding_closed_form(cfg: &VerifySettings) -> Check {
    let f = winding_field(&DrivingMeasure::example(0.0, 1.0), GridSpec::unit_disk(100), &cfg.flow(), 1.0)?;
    let mut worst = [0.0f64; 2];
    let mut count = [0usize; 2];
    for (k, z) in f.phi.spec.points().iter().enumerate() {
        if let Some(v) = f.phi.values[k] {
            let (hull, exact) = example_winding(*z, 1.0);
            let i = usize::from(hull);
            worst[i] = worst[i].max((v - exact).abs());
            count[i] += 1;
        }
    }
    Ok((
        count.iter().all(|&c| c >= 1000) && worst.iter().all(|&w| w <= 1e-3),
        format!("max error: D_T {:.2e} on {} points, K_T {:.2e} on {} points (tol 1e-3)", worst[0], count[0], worst[1], count[1]),
    ))
}

fn grunsky(cfg: &VerifySettings) -> Check {
    let flow = cfg.flow();
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (label, rho) in [("uniform", DrivingMeasure::uniform(0.0, 1.0)), ("example", DrivingMeasure::example(0.0, 1.0))] {
        for t in [0.25, 0.5, 1.0] {
            let g = grunsky_bound(&rho, t, 200, &flow)?;
            worst = worst.max(g.dirichlet / (2.0 * t));
            parts.push(format!("{label}@{t}: {:.4}", g.dirichlet));
        }
    }
    Ok((worst <= 1.05, format!("D <= 2t: max D/2t = {worst:.4} (tol 1.05); {}", parts.join(", "))))
}

fn leaf_energy() -> Check {
    let rows = leaf_energy_bounds(&DrivingMeasure::example(0.0, 1.0), &[0.25, 0.5, 1.0], 400)?;
    let worst = rows.iter().map(|r| r.loewner_energy / r.bound).fold(0.0, f64::max);
    let parts: Vec<String> = rows.iter().map(|r| format!("t={}: {:.4} <= {:.4}", r.t, r.loewner_energy, r.bound)).collect();
    Ok((worst <= 1.05, format!("max I/16S = {worst:.4} (tol 1.05); {}", parts.join(", "))))
}

fn equipotential() -> Check {
    let cfg = EquipotentialSettings::default();
    let offset = equipotential_identity(&AnalyticCurve::offset_circle(C64::new(0.2, 0.0), 0.9)?, &cfg)?;
    let leaf = equipotential_identity(&AnalyticCurve::example_leaf(1.0)?, &cfg)?;
    Ok((
        offset.residual <= 0.02 && leaf.residual <= 0.02,
        format!(
            "offset circle {:.5} vs {:.5} ({:.2e}); example leaf {:.5} vs {:.5} ({:.2e}) (tol 2%)",
            offset.lhs, offset.rhs, offset.residual, leaf.lhs, leaf.rhs, leaf.residual
        ),
    ))
}

fn reversibility() -> Check {
    let r = reverse_foliation(&DrivingMeasure::example(0.0, 1.0), &ReversalSettings::default())?;
    let gap = r.relative_gap();
    Ok((gap <= 0.03, format!("S = {:.6}, S reversed = {:.6}, relative gap {gap:.2e} (tol 3%)", r.energy, r.energy_reversed)))
}

fn distortion(cfg: &VerifySettings) -> Check {
    let rho = DrivingMeasure::example(0.0, 1.0);
    let settings = DistortionSettings { n: 128, flow: cfg.flow(), ..Default::default() };
    let (id, _) = distortion_identity(&rho, &AnalyticGerm::identity(), &settings)?;
    let id_ok = id.integrated_lhs.abs() < 1e-12 && id.integrated_rhs.abs() < 1e-12 && id.mass_discrepancy < 1e-12;
    let (mo, _) = distortion_identity(&rho, &AnalyticGerm::disk_moebius(C64::new(0.2, 0.1), 0.3)?, &settings)?;
    let mo_ok = mo.per_time_residual <= 1e-3 && mo.max_schwarzian_term == 0.0;
    let (pe, _) = distortion_identity(&rho, &AnalyticGerm::circle_perturbation(0.05)?, &settings)?;
    let pe_ok = pe.integrated_residual <= 0.02;
    let poly_rejected = AnalyticGerm::polynomial(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.05, 0.0)]).is_err();
    Ok((
        id_ok && mo_ok && pe_ok,
        format!(
            "identity |lhs| {:.1e}; moebius residual {:.2e} (tol 1e-3), schwarzian term {:.1e}; z*exp(0.05i(z+1/z)) integrated residual {:.2e} (tol 2%); z+0.05z^2 rejected as not circle-preserving: {poly_rejected}",
            id.integrated_lhs.abs(),
            mo.per_time_residual,
            mo.max_schwarzian_term,
            pe.integrated_residual
        ),
    ))
}

fn mollification(cfg: &VerifySettings) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = 128;
    let mut worst_l = f64::NEG_INFINITY;
    let mut worst_s = f64::NEG_INFINITY;
    for _ in 0..20 {
        let sigma = random_band_limited(&mut rng, n);
        let r = rng.gen_range(0.05..0.95);
        worst_l = worst_l.max(local_energy(&poisson_mollify(&sigma, r)?)? - local_energy(&sigma)?);
        let segs = (0..4)
            .map(|k| {
                let d = if k == 0 { sigma.clone() } else { random_band_limited(&mut rng, n) };
                DensitySegment::new(0.25 * k as f64, 0.25 * (k + 1) as f64, DensityKind::Samples(d))
            })
            .collect::<Result<Vec<_>>>()?;
        let rho = DrivingMeasure::new(segs, true)?;
        worst_s = worst_s.max(measure_energy(&time_average(&rho, 1)?)? - measure_energy(&rho)?);
    }
    Ok((
        worst_l <= 1e-12 && worst_s <= 1e-12,
        format!("max L(mollified) - L = {worst_l:.2e}, max S(averaged) - S = {worst_s:.2e} over 20 seeds (must be <= 0)"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion_is_a_config_error() {
        assert!(matches!(run_criterion(13, &VerifySettings::default()), Err(Error::Config(_))));
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 8, 12] {
            let o = run_criterion(id, &VerifySettings::default()).unwrap();
            assert!(o.passed, "{}", o.line());
        }
    }

    #[test]
    fn coarse_steps_fail_the_chain_criterion() {
        let o = run_criterion(1, &VerifySettings { dt_scale: 200.0, ..Default::default() }).unwrap();
        assert!(!o.passed, "{}", o.line());
    }

    #[test]
    fn example_winding_matches_both_formulas_on_the_leaf() {
        let b = (-1.0f64).exp();
        let (c, r) = ((1.0 - b) / (2.0 - b), 1.0 / (2.0 - b));
        for k in 1..8 {
            let z = c + C64::from_polar(r, 0.7 * k as f64);
            let inner = example_winding(c + (z - c) * (1.0 - 1e-9), 1.0).1;
            let outer = example_winding(c + (z - c) * (1.0 + 1e-9), 1.0).1;
            assert!((inner - outer).abs() < 1e-6, "{z}: {inner} vs {outer}");
        }
    }

    #[test]
    fn random_densities_are_positive_and_normalised() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = random_band_limited(&mut rng, 64);
            assert!(d.iter().all(|&x| x > 0.0));
            assert!((crate::numerics::trapezoid_circle(&d) - 1.0).abs() < 1e-12);
        }
    }
}
