//! Driving measures ρ = (ρ_t) with absolutely continuous slices ν_t² dθ, the
//! local energy L and its time integral S.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    fourier_coefficients, frequency, periodic_derivative_order, synthesize, trapezoid_circle,
    trig_interpolate, CircleGrid, TAU,
};

/// Default circle resolution for energy quadrature.
pub const ENERGY_GRID: usize = 1024;

const NEGATIVE_FLOOR: f64 = -1e-12;
const MASS_TOL: f64 = 1e-8;
const PARSE_MASS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityKind {
    /// ν² = 1/2π.
    Uniform,
    /// ν² = sin²(θ/2)/π.
    ExampleSin2,
    /// ν² sampled at θ_j = 2πj/n.
    Samples(Vec<f64>),
}

impl DensityKind {
    /// Samples of ν² on an n-point circle grid.
    pub fn on_grid(&self, n: usize) -> Vec<f64> {
        match self {
            DensityKind::Uniform => vec![1.0 / TAU; n],
            DensityKind::ExampleSin2 => (0..n)
                .map(|j| (PI * j as f64 / n as f64).sin().powi(2) / PI)
                .collect(),
            DensityKind::Samples(v) if v.len() == n => v.clone(),
            DensityKind::Samples(v) => resample(v, n),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DensityKind::Uniform)
    }
}

/// Spectral resampling of periodic samples onto an n-point grid.
pub fn resample(values: &[f64], n: usize) -> Vec<f64> {
    let c = fourier_coefficients(values);
    let thetas: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    trig_interpolate(&c, &thetas)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySegment {
    pub t0: f64,
    pub t1: f64,
    pub kind: DensityKind,
}

impl DensitySegment {
    pub fn new(t0: f64, t1: f64, kind: DensityKind) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidMeasure(format!("segment [{t0}, {t1}] is empty")));
        }
        if let DensityKind::Samples(v) = &kind {
            CircleGrid::new(v.len())?;
            if let Some(bad) = v.iter().find(|&&x| x < NEGATIVE_FLOOR || !x.is_finite()) {
                return Err(Error::InvalidMeasure(format!("density sample {bad} is negative")));
            }
            let mass = trapezoid_circle(v);
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidMeasure(format!("density mass {mass} differs from 1")));
            }
        }
        Ok(Self { t0, t1, kind })
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Piecewise-constant-in-time family of probability densities on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingMeasure {
    segments: Vec<DensitySegment>,
    /// Outside the covered window the measure is uniform when set.
    pub uniform_extension: bool,
}

impl DrivingMeasure {
    pub fn new(segments: Vec<DensitySegment>, uniform_extension: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidMeasure("no segments".into()));
        }
        for (k, w) in segments.windows(2).enumerate() {
            if (w[0].t1 - w[1].t0).abs() > 1e-12 {
                return Err(Error::InvalidMeasure(format!(
                    "segments {k} and {} are not contiguous ({} vs {})",
                    k + 1,
                    w[0].t1,
                    w[1].t0
                )));
            }
        }
        Ok(Self { segments, uniform_extension })
    }

    pub fn uniform(t0: f64, t1: f64) -> Self {
        Self { segments: vec![DensitySegment { t0, t1, kind: DensityKind::Uniform }], uniform_extension: true }
    }

    /// The measure ν² = sin²(θ/2)/π on [t0, t1], uniform outside.
    pub fn example(t0: f64, t1: f64) -> Self {
        Self { segments: vec![DensitySegment { t0, t1, kind: DensityKind::ExampleSin2 }], uniform_extension: true }
    }

    pub fn from_samples(t0: f64, t1: f64, samples: Vec<f64>) -> Result<Self> {
        Self::new(vec![DensitySegment::new(t0, t1, DensityKind::Samples(samples))?], true)
    }

    pub fn segments(&self) -> &[DensitySegment] {
        &self.segments
    }

    pub fn t_min(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn t_max(&self) -> f64 {
        self.segments[self.segments.len() - 1].t1
    }

    /// First and last times where the measure is not uniform, if any.
    pub fn nonuniform_window(&self) -> Option<(f64, f64)> {
        let mut it = self.segments.iter().filter(|s| !s.kind.is_uniform());
        let first = it.next()?;
        let last = self.segments.iter().rev().find(|s| !s.kind.is_uniform()).unwrap_or(first);
        Some((first.t0, last.t1))
    }

    /// Translate every segment by `delta` in time.
    pub fn shifted(&self, delta: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| DensitySegment { t0: s.t0 + delta, t1: s.t1 + delta, kind: s.kind.clone() })
            .collect();
        Self { segments, uniform_extension: self.uniform_extension }
    }

    /// Segment active at time t (half-open [t0, t1), the last one closed).
    pub fn segment_at(&self, t: f64) -> Option<&DensitySegment> {
        let last = self.segments.len() - 1;
        self.segments
            .iter()
            .enumerate()
            .find(|(k, s)| t >= s.t0 && (t < s.t1 || (*k == last && t <= s.t1)))
            .map(|(_, s)| s)
    }

    /// ν_t² on an n-point grid.
    pub fn density_at(&self, t: f64, n: usize) -> Result<Vec<f64>> {
        match self.segment_at(t) {
            Some(s) => Ok(s.kind.on_grid(n)),
            None if self.uniform_extension => Ok(DensityKind::Uniform.on_grid(n)),
            None => Err(Error::Range(format!(
                "time {t} outside [{}, {}]",
                self.t_min(),
                self.t_max()
            ))),
        }
    }

    /// Largest sampled grid among the segments (at least `floor`).
    pub fn native_grid(&self, floor: usize) -> usize {
        self.segments
            .iter()
            .filter_map(|s| match &s.kind {
                DensityKind::Samples(v) => Some(v.len()),
                _ => None,
            })
            .fold(floor, usize::max)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MeasureConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("cannot parse measure config: {e}")))?;
        cfg.build()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub t0: f64,
    pub t1: f64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureConfig {
    List(Vec<SegmentConfig>),
    Full {
        segments: Vec<SegmentConfig>,
        #[serde(default = "default_true")]
        uniform_extension: bool,
    },
}

fn default_true() -> bool {
    true
}

impl MeasureConfig {
    pub fn build(&self) -> Result<DrivingMeasure> {
        let (segs, ext) = match self {
            MeasureConfig::List(s) => (s, true),
            MeasureConfig::Full { segments, uniform_extension } => (segments, *uniform_extension),
        };
        let mut out = Vec::with_capacity(segs.len());
        for (k, s) in segs.iter().enumerate() {
            let named = |msg: String| Error::Config(format!("segment {k} ([{}, {}]): {msg}", s.t0, s.t1));
            let kind = match s.kind.as_str() {
                "uniform" => DensityKind::Uniform,
                "example_sin2" => DensityKind::ExampleSin2,
                "samples" => {
                    let v = s.values.clone().ok_or_else(|| named("samples segment without values".into()))?;
                    if CircleGrid::new(v.len()).is_err() {
                        return Err(named(format!("{} samples; need a power of two >= 16", v.len())));
                    }
                    if v.iter().any(|x| !x.is_finite() || *x < NEGATIVE_FLOOR) {
                        return Err(named("negative or non-finite density sample".into()));
                    }
                    let mass = trapezoid_circle(&v);
                    if (mass - 1.0).abs() > PARSE_MASS_TOL {
                        return Err(named(format!("mass {mass} is not within 1e-3 of 1")));
                    }
                    DensityKind::Samples(v.iter().map(|x| x.max(0.0) / mass).collect())
                }
                "dirac" | "delta" | "point_mass" => {
                    return Err(named("singular (Dirac) drivers have infinite energy and are not representable".into()))
                }
                other => return Err(named(format!("unknown kind '{other}'"))),
            };
            out.push(DensitySegment::new(s.t0, s.t1, kind).map_err(|e| named(e.to_string()))?);
        }
        DrivingMeasure::new(out, ext).map_err(|e| Error::Config(e.to_string()))
    }
}

fn clamp_density(density: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = density.iter().find(|&&x| x < NEGATIVE_FLOOR || !x.is_finite()) {
        return Err(Error::InvalidMeasure(format!("density sample {bad} is negative")));
    }
    Ok(density.iter().map(|x| x.max(0.0)).collect())
}

/// L(σ) = ½∫ν′² dθ for dσ = ν² dθ.
///
/// Uses ν′² = ((ν²)′)²/(4ν²) with spectral derivatives of ν², and the limit
/// (ν²)″/2 at nodes where ν² vanishes. Exact for trigonometric-polynomial
/// densities with quadratic zeros.
pub fn local_energy(density: &[f64]) -> Result<f64> {
    let d = clamp_density(density)?;
    let d1 = periodic_derivative_order(&d, 1)?;
    let d2 = periodic_derivative_order(&d, 2)?;
    let peak = d.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(0.0);
    }
    let floor = 1e-10 * peak;
    let integrand: Vec<f64> = d
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(&v, (&a, &b))| if v > floor { a * a / (4.0 * v) } else { 0.5 * b.max(0.0) })
        .collect();
    Ok(0.5 * trapezoid_circle(&integrand))
}

/// L(σ) via ν = √ν² and a spectral derivative of ν; slower to converge at
/// zeros of the density.
pub fn local_energy_sqrt(density: &[f64]) -> Result<f64> {
    let nu: Vec<f64> = clamp_density(density)?.iter().map(|x| x.sqrt()).collect();
    let d = periodic_derivative_order(&nu, 1)?;
    Ok(0.5 * trapezoid_circle(&d.iter().map(|x| x * x).collect::<Vec<_>>()))
}

/// S_{[a,b]}(ρ) = ∫_a^b L(ρ_t) dt on an n-point circle grid.
pub fn total_energy_on(rho: &DrivingMeasure, a: f64, b: f64, n: usize) -> Result<f64> {
    if b < a {
        return Err(Error::Range(format!("empty window [{a}, {b}]")));
    }
    if !rho.uniform_extension && (a < rho.t_min() - 1e-12 || b > rho.t_max() + 1e-12) {
        return Err(Error::Range(format!(
            "[{a}, {b}] outside the covered window [{}, {}]",
            rho.t_min(),
            rho.t_max()
        )));
    }
    let mut total = 0.0;
    for s in rho.segments() {
        let lo = s.t0.max(a);
        let hi = s.t1.min(b);
        if hi > lo && !s.kind.is_uniform() {
            total += (hi - lo) * local_energy(&s.kind.on_grid(n))?;
        }
    }
    Ok(total)
}

pub fn total_energy(rho: &DrivingMeasure, a: f64, b: f64) -> Result<f64> {
    total_energy_on(rho, a, b, rho.native_grid(ENERGY_GRID))
}

/// S(ρ) over the whole covered window.
pub fn measure_energy(rho: &DrivingMeasure) -> Result<f64> {
    total_energy(rho, rho.t_min(), rho.t_max())
}

/// Replace ρ on each of the 2^level dyadic subintervals of its window by the
/// time-average of its densities there.
pub fn time_average(rho: &DrivingMeasure, level: u32) -> Result<DrivingMeasure> {
    let n = rho.native_grid(256);
    let (a, b) = (rho.t_min(), rho.t_max());
    let pieces = 1usize << level;
    let width = (b - a) / pieces as f64;
    let mut segs = Vec::with_capacity(pieces);
    for p in 0..pieces {
        let lo = a + p as f64 * width;
        let hi = if p + 1 == pieces { b } else { lo + width };
        let mut acc = vec![0.0; n];
        for s in rho.segments() {
            let w = (s.t1.min(hi) - s.t0.max(lo)).max(0.0);
            if w > 0.0 {
                for (x, v) in acc.iter_mut().zip(s.kind.on_grid(n)) {
                    *x += w * v;
                }
            }
        }
        let len = hi - lo;
        acc.iter_mut().for_each(|x| *x /= len);
        let mass = trapezoid_circle(&acc);
        acc.iter_mut().for_each(|x| *x /= mass);
        segs.push(DensitySegment::new(lo, hi, DensityKind::Samples(acc))?);
    }
    DrivingMeasure::new(segs, rho.uniform_extension)
}

/// Convolution with the Poisson kernel at radius r: Fourier modes scale by r^|k|.
pub fn poisson_mollify(density: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Range(format!("mollification radius {r} outside (0,1)")));
    }
    CircleGrid::new(density.len())?;
    let n = density.len();
    let mut c = fourier_coefficients(density);
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= r.powi(frequency(k, n).unsigned_abs() as i32);
    }
    Ok(synthesize(&c).into_iter().map(|z| z.re).collect())
}

/// ν² = (1 + Σ_k a_k cos kθ + b_k sin kθ)/2π sampled on n points.
pub fn band_limited_density(n: usize, cos: &[f64], sin: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = TAU * j as f64 / n as f64;
            let mut v = 1.0;
            for (k, a) in cos.iter().enumerate() {
                v += a * ((k + 1) as f64 * t).cos();
            }
            for (k, b) in sin.iter().enumerate() {
                v += b * ((k + 1) as f64 * t).sin();
            }
            v / TAU
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_has_zero_energy() {
        assert!(local_energy(&DensityKind::Uniform.on_grid(64)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn example_energy_is_one_eighth() {
        // ½∫ν′² with ν = sin(θ/2)/√π: ½·(1/4π)·∫cos²(θ/2)dθ = 1/8.
        let l = local_energy(&DensityKind::ExampleSin2.on_grid(64)).unwrap();
        assert!((l - 0.125).abs() < 1e-13, "{l}");
    }

    #[test]
    fn sqrt_pipeline_converges_to_same_value() {
        let l = local_energy_sqrt(&DensityKind::ExampleSin2.on_grid(4096)).unwrap();
        assert!((l - 0.125).abs() < 2e-4, "{l}");
    }

    #[test]
    fn cosine_density_energy() {
        // ν² = (1 + q cos θ)/2π: ½∫ν′² = (1 − √(1 − q²))/8.
        for q in [0.5, 0.9] {
            let d = band_limited_density(256, &[q], &[]);
            let l = local_energy(&d).unwrap();
            let exact = (1.0 - (1.0 - q * q as f64).sqrt()) / 8.0;
            assert!((l - exact).abs() < 1e-12, "{q}: {l} vs {exact}");
            let l2 = local_energy_sqrt(&d).unwrap();
            assert!((l2 - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_density_rejected() {
        let mut d = DensityKind::Uniform.on_grid(32);
        d[3] = -1e-6;
        assert!(matches!(local_energy(&d), Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn total_energy_of_example() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        assert!((measure_energy(&rho).unwrap() - 0.125).abs() < 1e-12);
        assert_eq!(total_energy(&DrivingMeasure::uniform(0.0, 5.0), 0.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn total_energy_is_additive() {
        let rho = DrivingMeasure::new(
            vec![
                DensitySegment::new(0.0, 0.7, DensityKind::ExampleSin2).unwrap(),
                DensitySegment::new(0.7, 2.0, DensityKind::Samples(band_limited_density(64, &[0.3], &[0.2]))).unwrap(),
            ],
            true,
        )
        .unwrap();
        let whole = total_energy(&rho, 0.0, 2.0).unwrap();
        let parts = total_energy(&rho, 0.0, 1.0).unwrap() + total_energy(&rho, 1.0, 2.0).unwrap();
        assert!((whole - parts).abs() < 1e-15);
    }

    #[test]
    fn window_violation_without_extension() {
        let mut rho = DrivingMeasure::example(0.0, 1.0);
        rho.uniform_extension = false;
        assert!(matches!(total_energy(&rho, 0.0, 2.0), Err(Error::Range(_))));
    }

    #[test]
    fn time_average_of_constant_is_identity() {
        let rho = DrivingMeasure::example(0.0, 1.0);
        let avg = time_average(&rho, 2).unwrap();
        for s in avg.segments() {
            let d = s.kind.on_grid(256);
            let e = DensityKind::ExampleSin2.on_grid(256);
            assert!(d.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }

    #[test]
    fn time_average_two_segments_is_convex() {
        let rho = DrivingMeasure::new(
            vec![
                DensitySegment::new(0.0, 0.5, DensityKind::Uniform).unwrap(),
                DensitySegment::new(0.5, 1.0, DensityKind::ExampleSin2).unwrap(),
            ],
            true,
        )
        .unwrap();
        let avg = time_average(&rho, 0).unwrap();
        assert_eq!(avg.segments().len(), 1);
        let d = avg.segments()[0].kind.on_grid(256);
        let mix: Vec<f64> = DensityKind::Uniform
            .on_grid(256)
            .iter()
            .zip(DensityKind::ExampleSin2.on_grid(256))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        assert!(d.iter().zip(&mix).all(|(a, b)| (a - b).abs() < 1e-14));
        let l_avg = local_energy(&d).unwrap();
        assert!(l_avg <= 0.5 * (0.0 + 0.125));
    }

    #[test]
    fn time_average_refinement_increases_to_energy() {
        let rho = DrivingMeasure::new(
            vec![
                DensitySegment::new(0.0, 0.3, DensityKind::Uniform).unwrap(),
                DensitySegment::new(0.3, 0.8, DensityKind::ExampleSin2).unwrap(),
                DensitySegment::new(0.8, 1.0, DensityKind::Samples(band_limited_density(256, &[0.0, 0.6], &[0.2]))).unwrap(),
            ],
            true,
        )
        .unwrap();
        let s = measure_energy(&rho).unwrap();
        let mut prev = 0.0;
        for level in 0..6 {
            let v = measure_energy(&time_average(&rho, level).unwrap()).unwrap();
            assert!(v <= s + 1e-12 && v >= prev - 1e-12, "level {level}: {v} (prev {prev}, S {s})");
            prev = v;
        }
    }

    #[test]
    fn mollify_uniform_is_uniform() {
        let u = DensityKind::Uniform.on_grid(64);
        let m = poisson_mollify(&u, 0.7).unwrap();
        assert!(m.iter().all(|x| (x - 1.0 / TAU).abs() < 1e-15));
        assert!(poisson_mollify(&u, 1.0).is_err());
    }

    #[test]
    fn mollify_example_keeps_mass_and_lowers_energy() {
        let d = DensityKind::ExampleSin2.on_grid(256);
        let m = poisson_mollify(&d, 0.9).unwrap();
        assert!((trapezoid_circle(&m) - 1.0).abs() < 1e-10);
        assert!(m.iter().all(|&x| x > 0.0));
        assert!(local_energy(&m).unwrap() < local_energy(&d).unwrap());
        // Closed form: ν² = (1 − 0.9 cos θ)/2π.
        let exact = (1.0 - (1.0 - 0.81f64).sqrt()) / 8.0;
        assert!((local_energy(&m).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn mollify_limit_recovers_energy() {
        let d = DensityKind::ExampleSin2.on_grid(1024);
        let l = local_energy(&d).unwrap();
        let gaps: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&r| l - local_energy(&poisson_mollify(&d, r).unwrap()).unwrap())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 1e-2);
    }

    #[test]
    fn parse_normalises_and_names_segments() {
        let mut v = DensityKind::Uniform.on_grid(16);
        v.iter_mut().for_each(|x| *x *= 1.0005);
        let text = serde_json::json!({"segments": [
            {"t0": 0.0, "t1": 1.0, "kind": "example_sin2"},
            {"t0": 1.0, "t1": 2.0, "kind": "samples", "values": v}
        ]})
        .to_string();
        let rho = DrivingMeasure::from_json(&text).unwrap();
        let DensityKind::Samples(s) = &rho.segments()[1].kind else { panic!() };
        assert!((trapezoid_circle(s) - 1.0).abs() < 1e-14);

        let bad = r#"[{"t0":0,"t1":1,"kind":"uniform"},{"t0":1,"t1":2,"kind":"samples","values":[1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1]}]"#;
        let err = DrivingMeasure::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("segment 1"), "{err}");
        let dirac = r#"[{"t0":0,"t1":1,"kind":"dirac"}]"#;
        assert!(DrivingMeasure::from_json(dirac).unwrap_err().to_string().contains("segment 0"));
    }

    #[test]
    fn gap_between_segments_rejected() {
        let r = DrivingMeasure::new(
            vec![
                DensitySegment::new(0.0, 1.0, DensityKind::Uniform).unwrap(),
                DensitySegment::new(1.5, 2.0, DensityKind::Uniform).unwrap(),
            ],
            true,
        );
        assert!(r.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn density() -> impl Strategy<Value = Vec<f64>> {
            (proptest::collection::vec(-0.16f64..0.16, 3), proptest::collection::vec(-0.16f64..0.16, 3))
                .prop_map(|(a, b)| band_limited_density(128, &a, &b))
        }

        proptest! {
            #[test]
            fn mollification_lowers_energy(d in density(), r in 0.05f64..0.99) {
                let m = poisson_mollify(&d, r).unwrap();
                prop_assert!(local_energy(&m).unwrap() <= local_energy(&d).unwrap() + 1e-15);
            }

            #[test]
            fn averaging_two_slices_is_jensen(d1 in density(), d2 in density()) {
                let rho = DrivingMeasure::new(vec![
                    DensitySegment::new(0.0, 1.0, DensityKind::Samples(d1)).unwrap(),
                    DensitySegment::new(1.0, 2.0, DensityKind::Samples(d2)).unwrap(),
                ], true).unwrap();
                let avg = time_average(&rho, 0).unwrap();
                prop_assert!(measure_energy(&avg).unwrap() <= measure_energy(&rho).unwrap() + 1e-14);
            }
        }
    }
}
