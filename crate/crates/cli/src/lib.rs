//! Subcommands of the `kufarev` binary.
//!
//! Every command reads an optional JSON [`RunConfig`], writes its files into
//! the configured output directory and returns an exit status: 0 on success,
//! 1 when a computation or acceptance criterion fails, 2 on bad input.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use kufarev::chain::boundary_chain;
use kufarev::energy::{duality_report, grunsky_bound, DualityOptions};
use kufarev::foliation::{extract_leaves, winding_field};
use kufarev::io::{
    report_json, write_chain_csv, write_json_report, write_pgm, write_reversed_csv, write_s_table, write_svg_leaves,
    write_winding_csv, RunConfig,
};
use kufarev::isometry::{hadamard_check, isometry_check, winding_isometry_check, IotaSettings, TestField};
use kufarev::measure::{local_energy, total_energy};
use kufarev::transform::{distortion_identity, reverse_foliation, DistortionSettings, GermKind, ReversalSettings};
use kufarev::verify::{run_suite, VerifySettings};
use kufarev::{AnalyticGerm, Driver, Error, FlowSettings, GridSpec, Result, C64};

#[derive(Debug, Parser)]
#[command(name = "kufarev", version, about = "Loewner-Kufarev flows, foliations and energy identities")]
pub struct Cli {
    /// Upper bound on worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Boundary chain f_t(e^{iθ}) at the sample times.
    Evolve,
    /// Leaves at the sample times as SVG and CSV.
    Leaves,
    /// Winding and exit-time fields on the planar grid.
    Winding,
    /// D(φ)/S(ρ) with refinement, heatmap and leaves.
    Duality,
    /// S(ρ), local energies and Grunsky deficits.
    Energy,
    /// Isometry of ι and reconstruction by κ.
    IsometryCheck,
    /// Hadamard variation of the Green's function.
    HadamardCheck,
    /// Push the measure forward under a germ and check the distortion identity.
    Distort,
    /// Reverse the foliation and compare energies.
    Reverse,
    /// Run the acceptance criteria (all, or the listed ids).
    Verify { ids: Vec<usize> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Leaves => "leaves",
            Command::Winding => "winding",
            Command::Duality => "duality",
            Command::Energy => "energy",
            Command::IsometryCheck => "isometry-check",
            Command::HadamardCheck => "hadamard-check",
            Command::Distort => "distort",
            Command::Reverse => "reverse",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("kufarev {}: {e}", cli.command.name());
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // A pool built earlier in the process wins; the bound is advisory.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    if cfg.measure.is_some() {
        cfg.load_measure()?;
    }
    match &cli.command {
        Command::Evolve => evolve(&cfg),
        Command::Leaves => leaves(&cfg),
        Command::Winding => winding(&cfg),
        Command::Duality => duality(&cfg),
        Command::Energy => energy(&cfg),
        Command::IsometryCheck => isometry(&cfg),
        Command::HadamardCheck => hadamard(&cfg),
        Command::Distort => distort(&cfg),
        Command::Reverse => reverse(&cfg),
        Command::Verify { ids } => verify(&cfg, ids),
    }
}

fn flow(cfg: &RunConfig) -> FlowSettings {
    FlowSettings { dt: cfg.dt, n: cfg.n, ..FlowSettings::default() }
}

fn option_point(cfg: &RunConfig, key: &str, default: C64) -> Result<C64> {
    match cfg.options.get(key) {
        None => Ok(default),
        Some(v) => serde_json::from_value::<[f64; 2]>(v.clone())
            .map(|[re, im]| C64::new(re, im))
            .map_err(|_| Error::Config(format!("option {key} must be [re, im]"))),
    }
}

fn option_range(cfg: &RunConfig, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
    match cfg.options.get(key) {
        None => Ok(default),
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| Error::Config(format!("option {key} must be [lo, hi]"))),
    }
}

fn leaf_times(cfg: &RunConfig) -> Vec<f64> {
    if cfg.times.is_empty() {
        (0..=8).map(|k| cfg.t_min + (cfg.t_max - cfg.t_min) * k as f64 / 8.0).collect()
    } else {
        cfg.times.clone()
    }
}

fn without_seconds(report: &impl serde::Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("seconds");
    }
    Ok(v)
}

fn done(cfg: &RunConfig, files: &[&str]) -> Result<i32> {
    for f in files {
        println!("{}", cfg.path(f).display());
    }
    Ok(0)
}

fn evolve(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let driver = Driver::from_measure(&rho, cfg.n)?;
    let samples = cfg
        .sample_times()
        .iter()
        .map(|&t| boundary_chain(&driver, t, cfg.n, &flow(cfg)))
        .collect::<Result<Vec<_>>>()?;
    write_chain_csv(&cfg.path("chain.csv"), &samples, cfg)?;
    done(cfg, &["chain.csv"])
}

fn leaves(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let fol = extract_leaves(&rho, &leaf_times(cfg), cfg.n, &flow(cfg))?;
    write_svg_leaves(&cfg.path("leaves.svg"), &fol.leaves, cfg)?;
    let report = json!({
        "times": fol.leaves.iter().map(|l| l.t).collect::<Vec<_>>(),
        "chord_arc": fol.leaves.iter().map(|l| l.chord_arc).collect::<Vec<_>>(),
        "continuity": fol.continuity,
    });
    write_json_report(&cfg.path("leaves.json"), "leaves", &report, cfg)?;
    done(cfg, &["leaves.svg", "leaves.json"])
}

fn winding(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let field = winding_field(&rho, GridSpec::unit_disk(cfg.m), &flow(cfg), cfg.t_max)?;
    write_winding_csv(&cfg.path("winding.csv"), &field, cfg)?;
    let [lo, hi] = option_range(cfg, "phi_range", [-1.0, 1.0])?;
    write_pgm(&cfg.path("winding.pgm"), &field.phi, lo, hi, cfg)?;
    let est = field.dirichlet()?;
    let report = json!({ "dirichlet": est.energy, "failures": field.failures, "masked_area": field.masked_area });
    write_json_report(&cfg.path("winding.json"), "winding", &report, cfg)?;
    done(cfg, &["winding.csv", "winding.pgm", "winding.json"])
}

fn duality(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let opts = DualityOptions { grid: cfg.m, levels: cfg.option_usize("levels", 2)?, ..DualityOptions::default() };
    let report = duality_report(&rho, &flow(cfg), cfg.t_max, &opts)?;
    eprintln!("duality: {:.2}s", report.seconds);
    write_json_report(&cfg.path("duality.json"), "duality", &without_seconds(&report)?, cfg)?;
    let field = winding_field(&rho, GridSpec::unit_disk(cfg.m), &flow(cfg), cfg.t_max)?;
    let [lo, hi] = option_range(cfg, "phi_range", [-1.0, 1.0])?;
    write_pgm(&cfg.path("winding.pgm"), &field.phi, lo, hi, cfg)?;
    let fol = extract_leaves(&rho, &leaf_times(cfg), cfg.n, &flow(cfg))?;
    write_svg_leaves(&cfg.path("leaves.svg"), &fol.leaves, cfg)?;
    done(cfg, &["duality.json", "winding.pgm", "leaves.svg"])
}

fn energy(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let s = total_energy(&rho, cfg.t_min, cfg.t_max)?;
    let mut local = Vec::new();
    let mut grunsky = Vec::new();
    for t in leaf_times(cfg) {
        local.push(json!({ "t": t, "l": local_energy(&rho.density_at(t, cfg.n)?)? }));
        if t > 0.0 {
            grunsky.push(grunsky_bound(&rho, t, cfg.option_usize("grunsky_grid", 100)?, &flow(cfg))?);
        }
    }
    let report = json!({ "s": s, "sixteen_s": 16.0 * s, "local": local, "grunsky": grunsky });
    write_json_report(&cfg.path("energy.json"), "energy", &report, cfg)?;
    done(cfg, &["energy.json"])
}

fn iota_settings(cfg: &RunConfig) -> Result<IotaSettings> {
    Ok(IotaSettings {
        grid: cfg.m,
        n: cfg.option_usize("cylinder_n", 64)?,
        t_max: cfg.t_max,
        sample_dt: cfg.option_f64("sample_dt", 1e-2)?,
        flow: flow(cfg),
    })
}

fn isometry(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let field = match cfg.options.get("field") {
        None => TestField::Paraboloid,
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("option field: {e}")))?,
    };
    let settings = iota_settings(cfg)?;
    let field_report = isometry_check(&field, &rho, &settings)?;
    let winding = match rho.nonuniform_window() {
        Some(_) => Some(winding_isometry_check(&rho, &settings)?),
        None => None,
    };
    let report = json!({ "field": field_report, "winding": winding });
    write_json_report(&cfg.path("isometry.json"), "isometry-check", &report, cfg)?;
    done(cfg, &["isometry.json"])
}

fn hadamard(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let t = cfg.option_f64("t", 0.5 * (cfg.t_min + cfg.t_max))?;
    let z = option_point(cfg, "z", C64::new(0.2, 0.1))?;
    let w = option_point(cfg, "w", C64::new(-0.1, -0.3))?;
    let report = hadamard_check(&rho, t, z, w, cfg.dt_fd, &flow(cfg))?;
    write_json_report(&cfg.path("hadamard.json"), "hadamard-check", &report, cfg)?;
    done(cfg, &["hadamard.json"])
}

fn distort(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let germ = match cfg.options.get("germ") {
        None => AnalyticGerm::circle_perturbation(0.05)?,
        Some(v) => {
            let kind: GermKind = serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("option germ: {e}")))?;
            AnalyticGerm::new(kind).map_err(|e| Error::Config(format!("option germ: {e}")))?
        }
    };
    let settings = DistortionSettings {
        n: cfg.n,
        dt: cfg.dt,
        sample_dt: cfg.option_f64("sample_dt", 1e-2)?,
        flow: flow(cfg),
        check_hull: true,
    };
    let (report, measure) = distortion_identity(&rho, &germ, &settings)?;
    let body = json!({ "germ": germ, "identity": report, "slices": measure.slices });
    write_json_report(&cfg.path("distortion.json"), "distort", &body, cfg)?;
    let mut csv = format!("# {}\n# config: {}\nt,theta,density\n", kufarev::VERSION, cfg.echo_line());
    for (t, d) in measure.times.iter().zip(&measure.densities) {
        for (j, v) in d.iter().enumerate() {
            csv.push_str(&format!("{t},{},{v}\n", std::f64::consts::TAU * j as f64 / d.len() as f64));
        }
    }
    std::fs::create_dir_all(&cfg.output)?;
    std::fs::write(cfg.path("distorted.csv"), csv)?;
    done(cfg, &["distortion.json", "distorted.csv"])
}

fn reverse(cfg: &RunConfig) -> Result<i32> {
    let rho = cfg.load_measure()?;
    let settings = ReversalSettings { n: cfg.n, dt: cfg.dt, tail: cfg.option_f64("tail", 8.0)? };
    let chain = reverse_foliation(&rho, &settings)?;
    write_s_table(&cfg.path("s_table.csv"), &chain, cfg)?;
    write_reversed_csv(&cfg.path("reversed.csv"), &chain, cfg.option_usize("stride", 10)?, cfg)?;
    let report = json!({
        "energy": chain.energy,
        "energy_reversed": chain.energy_reversed,
        "relative_gap": chain.relative_gap(),
        "mass_defect": chain.mass_defect,
    });
    write_json_report(&cfg.path("reverse.json"), "reverse", &report, cfg)?;
    done(cfg, &["s_table.csv", "reversed.csv", "reverse.json"])
}

fn verify(cfg: &RunConfig, ids: &[usize]) -> Result<i32> {
    let settings = VerifySettings { seed: cfg.seed, dt_scale: cfg.option_f64("dt_scale", 1.0)? };
    let outcomes = run_suite(ids, &settings, |o| println!("{}", o.line()))?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    let table: Vec<Value> = outcomes
        .iter()
        .map(|o| json!({ "id": o.id, "name": o.name, "passed": o.passed, "within_budget": o.within_budget, "detail": o.detail, "budget": o.budget }))
        .collect();
    std::fs::create_dir_all(&cfg.output)?;
    std::fs::write(cfg.path("verify.json"), report_json("verify", &table, cfg)?)?;
    Ok(if failed == 0 { 0 } else { 1 })
}
