//! Run configuration and the CSV, PGM, SVG and JSON writers.
//!
//! Every file starts with the version string and a one-line JSON echo of the
//! [`RunConfig`] that produced it. Numbers are written with Rust's shortest
//! round-trip formatting, so equal inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chain::ChainSample;
use crate::error::{Error, Result};
use crate::foliation::{Leaf, WindingField};
use crate::isometry::CylinderFunction;
use crate::measure::DrivingMeasure;
use crate::numerics::{CircleGrid, PlanarField, TAU};
use crate::transform::ReversedChain;
use crate::VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Measure description (JSON); the worked example on [0, 1] when absent.
    pub measure: Option<PathBuf>,
    /// Circle resolution.
    pub n: usize,
    /// Planar grid size per side.
    pub m: usize,
    pub dt: f64,
    /// Step of finite differences.
    pub dt_fd: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Sample times for chain and leaf output; defaults to the window ends.
    pub times: Vec<f64>,
    pub output: PathBuf,
    pub seed: u64,
    /// Command-specific options.
    pub options: BTreeMap<String, Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            measure: None,
            n: 256,
            m: 400,
            dt: 1e-3,
            dt_fd: 1e-4,
            t_min: 0.0,
            t_max: 1.0,
            times: Vec::new(),
            output: PathBuf::from("out"),
            seed: 7,
            options: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read run config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        CircleGrid::new(self.n).map_err(|_| Error::Config(format!("n = {} must be a power of two >= 16", self.n)))?;
        if self.m < 3 {
            return Err(Error::Config(format!("m = {} must be at least 3", self.m)));
        }
        for (name, v) in [("dt", self.dt), ("dt_fd", self.dt_fd)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.t_max > self.t_min) {
            return Err(Error::Config(format!("empty time window [{}, {}]", self.t_min, self.t_max)));
        }
        if let Some(t) = self.times.iter().find(|t| !t.is_finite()) {
            return Err(Error::Config(format!("sample time {t} is not finite")));
        }
        Ok(())
    }

    /// The configured measure, or ν² = sin²(θ/2)/π on [t_min, t_max].
    pub fn load_measure(&self) -> Result<DrivingMeasure> {
        match &self.measure {
            None => Ok(DrivingMeasure::example(self.t_min, self.t_max)),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read measure {}: {e}", path.display())))?;
                DrivingMeasure::from_json(&text)
            }
        }
    }

    pub fn sample_times(&self) -> Vec<f64> {
        if self.times.is_empty() {
            vec![self.t_min, self.t_max]
        } else {
            self.times.clone()
        }
    }

    pub fn option_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.options.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| Error::Config(format!("option {key} must be a number"))),
        }
    }

    pub fn option_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.options.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Error::Config(format!("option {key} must be a non-negative integer"))),
        }
    }

    /// Verbatim JSON echo.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn echo_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_header(cfg: &RunConfig, columns: &str) -> String {
    format!("# {VERSION}\n# config: {}\n{columns}\n", cfg.echo_line())
}

/// Boundary samples: one row per point, columns t, theta, re, im.
pub fn write_chain_csv(path: &Path, samples: &[ChainSample], cfg: &RunConfig) -> Result<()> {
    let mut s = csv_header(cfg, "t,theta,re,im");
    for c in samples {
        let n = c.points.len();
        for (j, z) in c.points.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", c.t, TAU * j as f64 / n as f64, z.re, z.im);
        }
    }
    write(path, s.as_bytes())
}

/// Winding and exit-time fields: columns x, y, phi, tau, mask (1 = valid).
pub fn write_winding_csv(path: &Path, field: &WindingField, cfg: &RunConfig) -> Result<()> {
    let mut s = csv_header(cfg, "x,y,phi,tau,mask");
    let spec = field.phi.spec;
    for j in 0..spec.m {
        for i in 0..spec.m {
            let z = spec.point(i, j);
            match (field.phi.get(i, j), field.tau.get(i, j)) {
                (Some(p), Some(t)) => {
                    let _ = writeln!(s, "{},{},{},{},1", z.re, z.im, p, t);
                }
                _ => {
                    let _ = writeln!(s, "{},{},,,0", z.re, z.im);
                }
            }
        }
    }
    write(path, s.as_bytes())
}

/// Cylinder function at cell midpoints: columns t, theta, u.
pub fn write_cylinder_csv(path: &Path, u: &CylinderFunction, cfg: &RunConfig) -> Result<()> {
    let mut s = csv_header(cfg, "t,theta,u");
    for (t, row) in u.times().iter().zip(&u.values) {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", t, TAU * j as f64 / u.n as f64, v);
        }
    }
    write(path, s.as_bytes())
}

/// Reparametrization table: columns t, s.
pub fn write_s_table(path: &Path, chain: &ReversedChain, cfg: &RunConfig) -> Result<()> {
    let mut s = csv_header(cfg, "t,s");
    for (t, v) in chain.t.iter().zip(&chain.s) {
        let _ = writeln!(s, "{t},{v}");
    }
    write(path, s.as_bytes())
}

/// Reversed densities every `stride` nodes: columns s, theta, density.
pub fn write_reversed_csv(path: &Path, chain: &ReversedChain, stride: usize, cfg: &RunConfig) -> Result<()> {
    let mut s = csv_header(cfg, "s,theta,density");
    for (k, d) in chain.densities.iter().enumerate().step_by(stride.max(1)) {
        let n = d.len();
        for (j, v) in d.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", chain.s[k], TAU * j as f64 / n as f64, v);
        }
    }
    write(path, s.as_bytes())
}

/// 8-bit binary PGM; values map linearly from [lo, hi] to [0, 255] with
/// clamping, masked cells are 0. The top row is the largest y.
pub fn write_pgm(path: &Path, field: &PlanarField, lo: f64, hi: f64, cfg: &RunConfig) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::Config(format!("empty PGM range [{lo}, {hi}]")));
    }
    let m = field.spec.m;
    let mut out = format!("P5\n# {VERSION}\n# config: {}\n# range: {lo} {hi}\n{m} {m}\n255\n", cfg.echo_line()).into_bytes();
    for j in (0..m).rev() {
        for i in 0..m {
            let byte = match field.get(i, j) {
                Some(v) => (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8,
                None => 0,
            };
            out.push(byte);
        }
    }
    write(path, &out)
}

/// One closed path per leaf; the viewBox is the bounding box of all leaves.
pub fn write_svg_leaves(path: &Path, leaves: &[Leaf], cfg: &RunConfig) -> Result<()> {
    let pts = leaves.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in pts {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(-z.im);
        y1 = y1.max(-z.im);
    }
    if leaves.is_empty() || !x0.is_finite() {
        x0 = -1.0;
        x1 = 1.0;
        y0 = -1.0;
        y1 = 1.0;
    }
    let stroke = 2e-3 * (x1 - x0).max(y1 - y0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0} {y0} {} {}\">",
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(s, "<!-- {VERSION} -->");
    let _ = writeln!(s, "<!-- config: {} -->", cfg.echo_line().replace("--", "- -"));
    for leaf in leaves {
        let mut d = String::new();
        for (k, z) in leaf.points.iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if k == 0 { "M" } else { "L" }, z.re, -z.im);
        }
        d.push('Z');
        let _ = writeln!(
            s,
            "<path data-t=\"{}\" d=\"{d}\" fill=\"none\" stroke=\"black\" stroke-width=\"{stroke}\"/>",
            leaf.t
        );
    }
    s.push_str("</svg>\n");
    write(path, s.as_bytes())
}

/// A report wrapped with the version and configuration echo.
pub fn report_json<T: Serialize>(kind: &str, report: &T, cfg: &RunConfig) -> Result<String> {
    let doc = serde_json::json!({
        "version": VERSION,
        "kind": kind,
        "config": cfg.echo(),
        "report": report,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn write_json_report<T: Serialize>(path: &Path, kind: &str, report: &T, cfg: &RunConfig) -> Result<()> {
    write(path, report_json(kind, report, cfg)?.as_bytes())
}
