//! Leaves, foliations and the winding field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{boundary_chain, integrate_forward, polyline_is_simple, Driver, FlowSettings};
use crate::error::{Error, Result};
use crate::measure::DrivingMeasure;
use crate::numerics::{dirichlet_energy_from_gradients, DirichletEstimate, GridSpec, PlanarField, C64};

/// Sampled leaf γ_t = f_t(S¹) in its conformal parametrisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub t: f64,
    pub points: Vec<C64>,
    pub chord_arc: f64,
}

impl Leaf {
    pub fn new(t: f64, points: Vec<C64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate("a leaf needs at least three points".into()));
        }
        if !polyline_is_simple(&points) {
            return Err(Error::Evolution(format!("leaf at t = {t} self-intersects")));
        }
        if winding_number(&points, C64::new(0.0, 0.0)) == 0 {
            return Err(Error::Evolution(format!("leaf at t = {t} does not enclose 0")));
        }
        let chord_arc = chord_arc_ratio(&points);
        Ok(Self { t, points, chord_arc })
    }

    /// Closed polygon containment with a boundary tolerance.
    pub fn contains(&self, z: C64, tol: f64) -> bool {
        winding_number(&self.points, z) != 0 || distance_to_polyline(&self.points, z) <= tol
    }
}

/// Winding number of a closed polyline around z.
pub fn winding_number(points: &[C64], z: C64) -> i32 {
    let n = points.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (points[i] - z, points[(i + 1) % n] - z);
        let cross = a.re * b.im - a.im * b.re;
        if a.im <= 0.0 {
            if b.im > 0.0 && cross > 0.0 {
                w += 1;
            }
        } else if b.im <= 0.0 && cross < 0.0 {
            w -= 1;
        }
    }
    w
}

pub fn distance_to_polyline(points: &[C64], z: C64) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            let d = b - a;
            let s = if d.norm_sqr() > 0.0 { (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0) } else { 0.0 };
            (a + d * s - z).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// max over vertex pairs of (shorter arc length)/(chord length).
pub fn chord_arc_ratio(points: &[C64]) -> f64 {
    let n = points.len();
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        cum[i + 1] = cum[i] + (points[(i + 1) % n] - points[i]).norm();
    }
    let total = cum[n];
    let mut worst: f64 = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            let arc = cum[j] - cum[i];
            let arc = arc.min(total - arc);
            let chord = (points[j] - points[i]).norm();
            worst = worst.max(if chord > 0.0 { arc / chord } else { f64::INFINITY });
        }
    }
    worst
}

/// Ordered leaves with nesting and continuity diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Foliation {
    pub leaves: Vec<Leaf>,
    /// sup_j |γ_{t_{k+1}}(θ_j) − γ_{t_k}(θ_j)| for consecutive leaves.
    pub continuity: Vec<f64>,
    pub measure: DrivingMeasure,
}

/// Leaves at the requested (increasing) times from boundary chains.
pub fn extract_leaves(rho: &DrivingMeasure, times: &[f64], n: usize, settings: &FlowSettings) -> Result<Foliation> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("leaf times must be strictly increasing".into()));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::Config("leaf times must be nonnegative".into()));
    }
    let driver = Driver::from_measure(rho, settings.n)?;
    let leaves = times
        .iter()
        .map(|&t| Leaf::new(t, boundary_chain(&driver, t, n, settings)?.points))
        .collect::<Result<Vec<_>>>()?;
    for w in leaves.windows(2) {
        let tol = 10.0 * settings.eps_bdy + sagitta(&w[0].points);
        if let Some(p) = w[1].points.iter().find(|&&p| !w[0].contains(p, tol)) {
            return Err(Error::Evolution(format!(
                "leaf at t = {} leaves the region of the leaf at t = {} near {p}",
                w[1].t, w[0].t
            )));
        }
    }
    let continuity = leaves
        .windows(2)
        .map(|w| w[0].points.iter().zip(&w[1].points).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
        .collect();
    Ok(Foliation { leaves, continuity, measure: rho.clone() })
}

/// Largest distance from a vertex to the chord through its neighbours, a
/// bound on how far the polygon cuts inside a convex stretch of the curve.
fn sagitta(points: &[C64]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|j| distance_to_polyline(&[points[(j + n - 1) % n], points[(j + 1) % n]], points[j]))
        .fold(0.0, f64::max)
}

/// φ and τ on a planar grid with the pointwise squared gradient |∇φ|².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindingField {
    pub phi: PlanarField,
    pub tau: PlanarField,
    pub grad_sq: Vec<Option<f64>>,
    pub failures: usize,
    /// Area of grid cells outside the computed region.
    pub masked_area: f64,
}

impl WindingField {
    /// (1/π)∫|∇φ|² from the transported gradients.
    pub fn dirichlet(&self) -> Result<DirichletEstimate> {
        dirichlet_energy_from_gradients(self.phi.spec, &self.grad_sq)
    }
}

struct PointSample {
    phi: f64,
    tau: f64,
    grad_sq: f64,
}

fn sample_point(driver: &Driver, z: C64, t_max: f64, settings: &FlowSettings) -> Result<PointSample> {
    let tr = integrate_forward(driver, z, t_max, settings)?;
    // 2∂_zφ = −iΓ + 2∂_zτ·α(g_τ(z)), with 2∂_zτ = −g′/(g Re H(g)) at exit.
    let mut w = C64::new(0.0, -1.0) * tr.gamma;
    let tau = if tr.exited {
        let hv = tr.exit_h.unwrap_or(C64::new(1.0, 0.0));
        let alpha = driver
            .at(tr.time)
            .map(|h| (tr.y * h.derivative(tr.y)).im)
            .unwrap_or(0.0);
        w += -tr.dg / (tr.y * hv.re) * alpha;
        tr.time
    } else {
        t_max - tr.y.norm().ln()
    };
    let out = PointSample { phi: tr.phi, tau, grad_sq: w.norm_sqr() };
    if !(out.phi.is_finite() && out.grad_sq.is_finite()) {
        return Err(Error::Evolution(format!("non-finite winding sample at {z}")));
    }
    Ok(out)
}

/// φ(z) = ∫₀^{min(τ(z),T_max)} α_s(g_s(z)) ds on the grid; |z| ≥ 1 is masked.
pub fn winding_field(rho: &DrivingMeasure, spec: GridSpec, settings: &FlowSettings, t_max: f64) -> Result<WindingField> {
    if let Some((_, b)) = rho.nonuniform_window() {
        if t_max < b - 1e-12 {
            return Err(Error::Config(format!("T_max = {t_max} precedes the last nonuniform time {b}")));
        }
    }
    let driver = Driver::from_measure(rho, settings.n)?;
    field_from_driver(&driver, spec, settings, t_max, 1.0, 0.0)
}

/// Shared planar sampler: the point z is evaluated at scale·z for the disk
/// problem and gradients rescaled accordingly; `tau_shift` is added to τ.
fn field_from_driver(
    driver: &Driver,
    spec: GridSpec,
    settings: &FlowSettings,
    t_max: f64,
    scale: f64,
    tau_shift: f64,
) -> Result<WindingField> {
    let points = spec.points();
    let samples: Vec<Option<Result<PointSample>>> = points
        .par_iter()
        .map(|&z| {
            let w = z * scale;
            if w.norm() >= 1.0 {
                None
            } else {
                Some(sample_point(driver, w, t_max, settings))
            }
        })
        .collect();
    let mut failures = 0;
    let mut masked = 0;
    let mut phi = Vec::with_capacity(samples.len());
    let mut tau = Vec::with_capacity(samples.len());
    let mut grad = Vec::with_capacity(samples.len());
    for s in samples {
        match s {
            Some(Ok(p)) => {
                phi.push(Some(p.phi));
                tau.push(Some(p.tau + tau_shift));
                grad.push(Some(p.grad_sq * scale * scale));
            }
            Some(Err(_)) => {
                failures += 1;
                phi.push(None);
                tau.push(None);
                grad.push(None);
            }
            None => {
                masked += 1;
                phi.push(None);
                tau.push(None);
                grad.push(None);
            }
        }
    }
    let inside = points.len() - masked;
    if inside > 0 && failures as f64 > 1e-3 * inside as f64 {
        return Err(Error::Evolution(format!("{failures} of {inside} grid points failed to integrate")));
    }
    Ok(WindingField {
        phi: PlanarField { spec, values: phi },
        tau: PlanarField { spec, values: tau },
        grad_sq: grad,
        failures,
        masked_area: (masked + failures) as f64 * spec.cell_area(),
    })
}

/// Winding field of the whole-plane chain f_t = e^{−t}z for t ≤ T_min, on any
/// planar grid. Inside e^{−T_min}·D the disk problem of the shifted measure is
/// evaluated at e^{T_min}z; outside, leaves are centred circles and φ = 0.
pub fn whole_plane_field(rho: &DrivingMeasure, t_min: f64, spec: GridSpec, settings: &FlowSettings) -> Result<WindingField> {
    let window = rho.nonuniform_window();
    if let Some((a, _)) = window {
        if t_min > a + 1e-12 {
            return Err(Error::Config(format!("T_min = {t_min} is after the first nonuniform time {a}")));
        }
    }
    let t_max = window.map(|(_, b)| b).unwrap_or(t_min).max(t_min);
    let shifted = rho.shifted(-t_min);
    let driver = Driver::from_measure(&shifted, settings.n)?;
    let scale = t_min.exp();
    let mut field = field_from_driver(&driver, spec, settings, t_max - t_min, scale, t_min)?;
    let points = spec.points();
    for (k, z) in points.iter().enumerate() {
        if field.phi.values[k].is_none() && (z * scale).norm() >= 1.0 {
            field.phi.values[k] = Some(0.0);
            field.tau.values[k] = Some(if z.norm() > 0.0 { -z.norm().ln() } else { f64::INFINITY });
            field.grad_sq[k] = Some(0.0);
        }
    }
    field.masked_area = field.failures as f64 * spec.cell_area();
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{band_limited_density, DensityKind, DensitySegment};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Closed forms for the example measure on [0, T]: arg(z/(z−1)²) + π in
    /// the hull, −arg(z(1−e^{−T}) + e^{−T}) in D_T.
    fn example_phi(z: C64, t: f64) -> f64 {
        let b = (-t).exp();
        let a = 1.0 - b;
        if (z - a / (2.0 - b)).norm() < 1.0 / (2.0 - b) {
            -(z * a + b).arg()
        } else {
            let v = (z / ((z - 1.0) * (z - 1.0))).arg() + PI;
            if v > PI {
                v - 2.0 * PI
            } else {
                v
            }
        }
    }

    #[test]
    fn uniform_leaves_are_concentric() {
        let f = extract_leaves(&DrivingMeasure::uniform(0.0, 3.0), &[0.0, 1.0, 2.0], 64, &FlowSettings::default()).unwrap();
        for (leaf, r) in f.leaves.iter().zip([1.0, (-1f64).exp(), (-2f64).exp()]) {
            assert!(leaf.points.iter().all(|p| (p.norm() - r).abs() < 1e-12));
            assert!((leaf.chord_arc - PI / 2.0).abs() < 1e-3);
        }
        assert_eq!(f.continuity.len(), 2);
    }

    #[test]
    fn example_leaves_touch_one() {
        let f = extract_leaves(&DrivingMeasure::example(0.0, 1.0), &[0.25, 0.5, 1.0], 256, &FlowSettings::default()).unwrap();
        for leaf in &f.leaves {
            let d = leaf.points.iter().map(|p| (p - 1.0).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-4, "{d}");
            assert!(leaf.chord_arc.is_finite());
        }
    }

    #[test]
    fn coarse_tangent_leaves_are_nested() {
        let times: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let f = extract_leaves(&DrivingMeasure::example(0.0, 1.0), &times, 64, &FlowSettings::with_dt(2e-3)).unwrap();
        assert_eq!(f.leaves.len(), 9);
        let shrunk: Vec<C64> = f.leaves[4].points.iter().map(|p| (p - 0.3) * 1.2 + 0.3).collect();
        assert!(shrunk.iter().any(|&p| !f.leaves[3].contains(p, 10.0 * 1e-4 + sagitta(&f.leaves[3].points))));
    }

    #[test]
    fn non_monotone_times_rejected() {
        let r = extract_leaves(&DrivingMeasure::uniform(0.0, 1.0), &[0.5, 0.2], 64, &FlowSettings::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn leaf_rejects_figure_eight() {
        let pts = vec![c(1.0, 1.0), c(-1.0, -1.0), c(1.0, -1.0), c(-1.0, 1.0)];
        assert!(Leaf::new(0.0, pts).is_err());
        let off = vec![c(2.0, 0.0), c(3.0, 0.0), c(3.0, 1.0)];
        assert!(Leaf::new(0.0, off).is_err());
    }

    #[test]
    fn uniform_field_vanishes() {
        let f = winding_field(&DrivingMeasure::uniform(0.0, 1.0), GridSpec::unit_disk(20), &FlowSettings::default(), 1.0).unwrap();
        assert!(f.phi.values.iter().flatten().all(|v| *v == 0.0));
        assert!(f.dirichlet().unwrap().energy == 0.0);
    }

    #[test]
    fn example_field_matches_closed_form() {
        let f = winding_field(&DrivingMeasure::example(0.0, 1.0), GridSpec::unit_disk(40), &FlowSettings::default(), 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for (k, z) in f.phi.spec.points().iter().enumerate() {
            if let Some(v) = f.phi.values[k] {
                if (z - 1.0).norm() > 0.05 {
                    worst = worst.max((v - example_phi(*z, 1.0)).abs());
                }
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn transported_gradient_matches_finite_difference() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let driver = Driver::from_measure(&rho, 64).unwrap();
        let s = FlowSettings::default();
        for z in [c(0.3, 0.2), c(-0.5, 0.4), c(0.2, -0.7), c(0.6, 0.1)] {
            let g = sample_point(&driver, z, 1.0, &s).unwrap().grad_sq;
            let e = 1e-5;
            let p = |w: C64| sample_point(&driver, w, 1.0, &s).unwrap().phi;
            let gx = (p(z + e) - p(z - e)) / (2.0 * e);
            let gy = (p(z + c(0.0, e)) - p(z - c(0.0, e))) / (2.0 * e);
            assert!((g - gx * gx - gy * gy).abs() < 1e-4 * (1.0 + g), "{z}: {g} vs {}", gx * gx + gy * gy);
        }
    }

    #[test]
    fn field_beyond_last_time_is_harmonic_tail() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let a = winding_field(&rho, GridSpec::unit_disk(16), &FlowSettings::default(), 1.0).unwrap();
        let b = winding_field(&rho, GridSpec::unit_disk(16), &FlowSettings::default(), 3.0).unwrap();
        for (x, y) in a.phi.values.iter().zip(&b.phi.values) {
            if let (Some(x), Some(y)) = (x, y) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        assert!(winding_field(&rho, GridSpec::unit_disk(16), &FlowSettings::default(), 0.5).is_err());
    }

    #[test]
    fn additivity_over_time_split() {
        // φ_ρ(z) = φ_{ρ|[0,T]}(z) + φ_{ρ(·+T)}(g_T(z)) for z ∈ D_T.
        let s = FlowSettings::default();
        let rho = DrivingMeasure::new(
            vec![
                DensitySegment::new(0.0, 0.4, DensityKind::Samples(band_limited_density(64, &[0.3], &[0.2]))).unwrap(),
                DensitySegment::new(0.4, 0.8, DensityKind::ExampleSin2).unwrap(),
            ],
            true,
        )
        .unwrap();
        let whole = Driver::from_measure(&rho, 64).unwrap();
        let head = Driver::from_measure(&DrivingMeasure::new(vec![rho.segments()[0].clone()], true).unwrap(), 64).unwrap();
        let tail = whole.shifted(-0.4);
        for z in [c(0.1, 0.1), c(-0.2, 0.15), c(0.05, -0.25)] {
            let full = integrate_forward(&whole, z, 0.8, &s).unwrap();
            let first = integrate_forward(&head, z, 0.4, &s).unwrap();
            let second = integrate_forward(&tail, first.y, 0.4, &s).unwrap();
            assert!(!full.exited);
            assert!((full.phi - first.phi - second.phi).abs() < 2e-4);
        }
    }

    #[test]
    fn whole_plane_uniform_is_zero_and_scaling_covariant() {
        let s = FlowSettings::default();
        let spec = GridSpec::square(24, 2.0);
        let f = whole_plane_field(&DrivingMeasure::uniform(-1.0, 1.0), -1.0, spec, &s).unwrap();
        assert!(f.phi.values.iter().all(|v| v == &Some(0.0)));

        let shifted = DrivingMeasure::example(0.0, 1.0).shifted(-1.0);
        let wp = whole_plane_field(&shifted, -1.0, spec, &s).unwrap();
        let disk = Driver::from_measure(&DrivingMeasure::example(0.0, 1.0), 64).unwrap();
        for (k, z) in spec.points().iter().enumerate() {
            let w = z * (-1f64).exp();
            if w.norm() < 1.0 && (w - 1.0).norm() > 0.1 {
                let expect = sample_point(&disk, w, 1.0, &s).unwrap().phi;
                assert!((wp.phi.values[k].unwrap() - expect).abs() < 1e-12);
            } else if w.norm() >= 1.0 {
                assert_eq!(wp.phi.values[k], Some(0.0));
            }
        }
        assert!(matches!(whole_plane_field(&shifted, 0.0, spec, &s), Err(Error::Config(_))));
    }

    #[test]
    fn whole_plane_field_continuous_across_unit_circle() {
        let s = FlowSettings::default();
        let rho = DrivingMeasure::new(
            vec![DensitySegment::new(-0.5, 0.5, DensityKind::Samples(band_limited_density(64, &[0.2], &[0.3]))).unwrap()],
            true,
        )
        .unwrap();
        let driver = Driver::from_measure(&rho.shifted(0.5), 64).unwrap();
        let scale = (-0.5f64).exp();
        let phi = |z: C64| sample_point(&driver, z * scale, 1.0, &s).unwrap().phi;
        for k in 0..16 {
            let u = C64::from_polar(1.0, 0.4 * k as f64);
            assert!((phi(u * 0.999) - phi(u * 1.001)).abs() < 5e-3);
        }
    }
}
