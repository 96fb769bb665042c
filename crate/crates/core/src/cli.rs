//! Command-line front end. `main.rs` only parses and forwards here.
//!
//! Exit codes: 0 success, 1 a check or a point failed, 2 bad input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::flow::IntegratedPullback;
use crate::geometry::{divergence, steadiness_residual, vorticity_transport_residual, ChartPoint, Vec3};
use crate::io::{csv_row, json_number, sci, write_atomic};
use crate::jacobi::first_conjugate_time_full;
use crate::jacobi::transport::{admissible_amplitude, solve_left_form, solve_right_form};
use crate::model::{FieldFile, FieldModel};
use crate::ode::Tolerances;
use crate::reproduce;
use crate::sphere::scan::surface_rows;
use crate::sphere::{first_times_ordered, scan_intervals, IntervalSet, NodeStatus, ScanOptions, ScanResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Residuals below this pass `validate`.
pub const VALIDATE_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "epiconj", version, about = "Conjugate points along volume-preserving flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check divergence, steadiness and metric positivity of a field file.
    Validate(RunArgs),
    /// First zero of det Υ at each point.
    First(RunArgs),
    /// Sweep WKB directions over the sphere and report conjugate-time intervals.
    Scan(RunArgs),
    /// Compare the left- and right-translated amplitude equations.
    RightCheck {
        #[command(flatten)]
        run: RunArgs,
        /// Random (∇Φ₀, α₀) pairs per point.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = reproduce::DEFAULT_SEED)]
        seed: u64,
    },
    /// Run the built-in reproduction checks.
    Examples {
        #[arg(long, default_value_t = reproduce::DEFAULT_SEED)]
        seed: u64,
        /// Comma-separated check numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        /// Also run the loose-tolerance and flat-annulus demonstrations.
        #[arg(long)]
        demos: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Field definition (JSON).
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// `x,y,z;x,y,z;...` or a JSON file holding `[[x, y, z], ...]`.
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long)]
    pub grid_level: Option<u32>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Output directory; nothing is written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep only the first conjugate time of each direction.
    #[arg(long)]
    pub first_only: bool,
}

/// Flags merged over the field file's `run` section.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: FieldModel,
    pub points: Vec<ChartPoint>,
    pub grid_level: u32,
    pub horizon: f64,
    pub tol: Tolerances,
    pub out: Option<PathBuf>,
    pub first_only: bool,
}

fn parse_points(src: &str) -> Result<Vec<[f64; 3]>> {
    let path = Path::new(src);
    if path.is_file() {
        return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
    }
    src.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            let v: Vec<f64> = p
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("point `{p}`: {e}")))?;
            <[f64; 3]>::try_from(v).map_err(|_| Error::InvalidInput(format!("point `{p}` needs three coordinates")))
        })
        .collect()
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, default_horizon: f64, need_points: bool) -> Result<Self> {
        let path = args.field.as_ref().ok_or_else(|| Error::InvalidInput("--field is required".into()))?;
        let file = FieldFile::read(path)?;
        let model = FieldModel::from_file(&file)?;
        let run = file.run.clone().unwrap_or_default();
        let points = match &args.points {
            Some(p) => parse_points(p)?,
            None => run.points.clone().unwrap_or_default(),
        };
        let cfg = RunConfig {
            points: points.iter().map(|p| ChartPoint::new(p[0], p[1], p[2])).collect(),
            grid_level: args.grid_level.or(run.grid_level).unwrap_or(4),
            horizon: args.horizon.or(run.horizon).unwrap_or(default_horizon),
            tol: Tolerances::new(
                args.rtol.or(run.rtol).unwrap_or(Tolerances::default().rtol),
                args.atol.or(run.atol).unwrap_or(Tolerances::default().atol),
            ),
            out: args.out.clone().or(run.out.as_ref().map(PathBuf::from)),
            first_only: args.first_only || run.first_only.unwrap_or(false),
            model,
        };
        cfg.check(need_points)?;
        Ok(cfg)
    }

    fn check(&self, need_points: bool) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.tol.rtol > 0.0 && self.tol.atol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.grid_level > 7 {
            return Err(Error::InvalidInput(format!("grid level {} is too fine (max 7)", self.grid_level)));
        }
        if need_points && self.points.is_empty() {
            return Err(Error::InvalidInput("no points given (--points or run.points)".into()));
        }
        for p in &self.points {
            if !self.model.chart.contains(&p.coords) {
                return Err(Error::InvalidInput(format!("point {:?} is outside the chart", p.as_array())));
            }
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Validate(args) => RunConfig::resolve(&args, 50.0, false).map(|c| cmd_validate(&c)),
        Command::First(args) => RunConfig::resolve(&args, 50.0, true).and_then(|c| cmd_first(&c)),
        Command::Scan(args) => RunConfig::resolve(&args, 50.0, true).and_then(|c| cmd_scan(&c)),
        Command::RightCheck { run, samples, seed } => {
            RunConfig::resolve(&run, 10.0, true).and_then(|c| cmd_right_check(&c, samples, seed))
        }
        Command::Examples { seed, only, demos } => Ok(cmd_examples(seed, &only, demos)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn point_label(x: &ChartPoint) -> String {
    let [a, b, c] = x.as_array();
    format!("({a:.4}, {b:.4}, {c:.4})")
}

pub fn cmd_validate(cfg: &RunConfig) -> i32 {
    let model = &cfg.model;
    let samples = model.interior_samples(4);
    let div = samples
        .iter()
        .map(|x| divergence(&model.velocity, &model.metric, x, 0.0).abs())
        .fold(0.0, f64::max);
    let (label, steady) = if model.velocity.is_steady() {
        ("steadiness residual", steadiness_residual(&model.velocity, &model.metric, &samples))
    } else {
        let times: Vec<f64> = (0..=4).map(|k| cfg.horizon * k as f64 / 4.0).collect();
        ("vorticity transport residual", vorticity_transport_residual(&model.velocity, &model.metric, &samples, &times))
    };
    let spd_bad: Vec<&ChartPoint> = samples.iter().filter(|x| model.metric.check_spd(&x.coords).is_err()).collect();

    let div_ok = div < VALIDATE_TOL;
    let steady_ok = steady < VALIDATE_TOL;
    let spd_ok = spd_bad.is_empty();
    println!("field: {}", model.name);
    println!("divergence residual  {}  (tol {}) {}", sci(div), sci(VALIDATE_TOL), verdict(div_ok));
    println!("{label}  {}  (tol {}) {}", sci(steady), sci(VALIDATE_TOL), verdict(steady_ok));
    println!("metric SPD           {}/{} samples {}", samples.len() - spd_bad.len(), samples.len(), verdict(spd_ok));
    if let Some(x) = spd_bad.first() {
        println!("  first non-SPD sample at {}", point_label(x));
    }
    if div_ok && steady_ok && spd_ok {
        EXIT_OK
    } else {
        let failed: Vec<&str> = [(div_ok, "divergence"), (steady_ok, "steadiness"), (spd_ok, "metric_spd")]
            .iter()
            .filter(|(ok, _)| !ok)
            .map(|(_, n)| *n)
            .collect();
        eprintln!("validation failed: {}", failed.join(", "));
        EXIT_CHECK_FAILED
    }
}

pub const FIRST_HEADER: &str = "x1,x2,x3,status,tau,k1,k2,k3";

pub fn cmd_first(cfg: &RunConfig) -> Result<i32> {
    let mut csv = format!("{FIRST_HEADER}\n");
    let mut any_failed = false;
    for x in &cfg.points {
        let coords = csv_row(&x.as_array());
        let found = IntegratedPullback::new(&cfg.model, x, cfg.horizon, cfg.tol.tightened(1e-2))
            .and_then(|src| first_conjugate_time_full(&src, cfg.horizon, cfg.tol));
        match found {
            Ok(Some(e)) => {
                println!("{}  tau = {}  kernel = [{}]", point_label(x), sci(e.t), csv_row(&e.kernel).replace(',', ", "));
                let _ = writeln!(csv, "{coords},found,{},{}", sci(e.t), csv_row(&e.kernel));
            }
            Ok(None) => {
                println!("{}  none up to {}", point_label(x), sci(cfg.horizon));
                let _ = writeln!(csv, "{coords},none,,,,");
            }
            Err(err) => {
                any_failed = true;
                println!("{}  failed: {err}", point_label(x));
                let _ = writeln!(csv, "{coords},failed,,,,");
            }
        }
    }
    if let Some(dir) = &cfg.out {
        write_atomic(dir.join("first.csv"), csv.as_bytes())?;
    }
    Ok(if any_failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

pub const SURFACE_HEADER: &str = "theta,phi,xi1,xi2,xi3,branch_id,t";

pub fn surface_csv(scan: &ScanResult) -> String {
    let mut out = format!("{SURFACE_HEADER}\n");
    for (th, ph, xi, branch, t, _) in surface_rows(scan) {
        let _ = writeln!(out, "{},{},{branch},{}", csv_row(&[th, ph]), csv_row(xi.as_slice()), sci(t));
    }
    out
}

pub fn intervals_json(x: &ChartPoint, set: &IntervalSet) -> Value {
    json!({
        "x": x.as_array().map(json_number),
        "horizon": json_number(set.horizon),
        "intervals": set.intervals.iter().map(|iv| iv.map(json_number)).collect::<Vec<_>>(),
        "reaches_horizon": set.reaches_horizon,
    })
}

pub fn directions_json(x: &ChartPoint, scan: &ScanResult) -> Value {
    let records: Vec<Value> = scan
        .nodes
        .iter()
        .map(|n| {
            let status = match &n.status {
                NodeStatus::Solved => "solved".to_string(),
                NodeStatus::Degenerate => "degenerate".to_string(),
                NodeStatus::Failed(why) => format!("failed: {why}"),
            };
            json!({
                "x": x.as_array().map(json_number),
                "theta": json_number(n.dir.theta),
                "phi": json_number(n.dir.phi),
                "c": json_number(n.c),
                "status": status,
                "events": n.events.iter().map(|e| json!({
                    "t": json_number(e.t),
                    "mode": e.mode.as_str(),
                    "kernel": e.kernel.iter().map(|v| json_number(*v)).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "det_W_drift": json_number(n.det_drift),
                "horizon": json_number(scan.horizon),
            })
        })
        .collect();
    Value::Array(records)
}

fn format_intervals(set: &IntervalSet) -> String {
    if set.is_empty() {
        return "(none)".into();
    }
    set.intervals
        .iter()
        .map(|[a, b]| {
            if *b == set.horizon && set.reaches_horizon {
                format!("[{a:.4}, H]")
            } else {
                format!("[{a:.4}, {b:.4}]")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<i32> {
    let opts = ScanOptions {
        horizon: cfg.horizon,
        tol: cfg.tol,
        first_only: cfg.first_only,
    };
    let mut any_failed = false;
    for (i, x) in cfg.points.iter().enumerate() {
        let src = match IntegratedPullback::new(&cfg.model, x, cfg.horizon, cfg.tol.tightened(1e-2)) {
            Ok(s) => s,
            Err(e) => {
                any_failed = true;
                println!("{}  failed: {e}", point_label(x));
                continue;
            }
        };
        let (scan, set) = scan_intervals(&src, cfg.grid_level, &opts);
        let full = first_conjugate_time_full(&src, cfg.horizon, cfg.tol).ok().flatten().map(|e| e.t);
        let wkb = set.intervals.first().map(|iv| iv[0]);
        let ordered = first_times_ordered(wkb, full);
        any_failed |= scan.failed_count() > 0;
        println!(
            "{}  intervals {}  (H = {}, {} degenerate, {} failed; det zero {}, order {})",
            point_label(x),
            format_intervals(&set),
            cfg.horizon,
            scan.degenerate_count(),
            scan.failed_count(),
            full.map_or("none".into(), |t| format!("{t:.4}")),
            verdict(ordered),
        );
        if let Some(dir) = &cfg.out {
            let sub = dir.join(format!("point_{i:03}"));
            write_atomic(sub.join("surface.csv"), surface_csv(&scan).as_bytes())?;
            write_atomic(sub.join("intervals.json"), serde_json::to_string_pretty(&intervals_json(x, &set))?.as_bytes())?;
            write_atomic(sub.join("directions.json"), serde_json::to_string_pretty(&directions_json(x, &scan))?.as_bytes())?;
        }
    }
    Ok(if any_failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}

/// Acceptable `‖α − Dη β‖_g` between the two amplitude equations.
pub const RIGHT_CHECK_TOL: f64 = 1e-6;

pub fn cmd_right_check(cfg: &RunConfig, samples: usize, seed: u64) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = cfg.tol.tightened(1e-2);
    let mut worst_all: f64 = 0.0;
    let mut any_failed = false;
    let mut csv = String::from("x1,x2,x3,sample,discrepancy,constraint_defect\n");
    for x in &cfg.points {
        for k in 0..samples {
            let mut draw = || Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let grad = draw();
            let a0 = admissible_amplitude(&cfg.model, x, &grad, &draw());
            let res = (|| -> Result<(f64, f64)> {
                let right = solve_right_form(&cfg.model, x, &grad, &a0, cfg.horizon, tol)?;
                let left = solve_left_form(&cfg.model, x, &grad, &a0, cfg.horizon, tol)?;
                let (mut d, mut c): (f64, f64) = (0.0, 0.0);
                for j in 0..=200 {
                    let t = cfg.horizon * j as f64 / 200.0;
                    let s = right.state(t)?;
                    let diff = s.alpha - left.pushed_forward(t)?;
                    d = d.max(crate::geometry::metric_norm(&cfg.model.metric.at(&s.eta), &diff));
                    c = c.max(right.constraint_defect(t)?);
                }
                Ok((d, c))
            })();
            match res {
                Ok((d, c)) => {
                    worst_all = worst_all.max(d);
                    let _ = writeln!(csv, "{},{k},{},{}", csv_row(&x.as_array()), sci(d), sci(c));
                    println!("{}  sample {k}: |alpha - D eta beta| = {}  <alpha, grad Phi> = {}", point_label(x), sci(d), sci(c));
                }
                Err(e) => {
                    any_failed = true;
                    println!("{}  sample {k}: failed: {e}", point_label(x));
                }
            }
        }
    }
    let ok = !any_failed && worst_all < RIGHT_CHECK_TOL;
    println!("worst discrepancy {} (tol {}) {}", sci(worst_all), sci(RIGHT_CHECK_TOL), verdict(ok));
    if let Some(dir) = &cfg.out {
        write_atomic(dir.join("right_check.csv"), csv.as_bytes())?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn cmd_examples(seed: u64, only: &[usize], demos: bool) -> i32 {
    let checks = if only.is_empty() {
        reproduce::run_all(seed)
    } else {
        reproduce::run_selected(seed, only)
    };
    for c in &checks {
        println!("{c}");
    }
    if demos {
        let loose = reproduce::loose_tolerance_demo(seed);
        println!("demo: {loose}");
        match reproduce::flat_annulus_zeros() {
            Ok(z) => println!(
                "demo: flat annulus det zeros at {} (2 pi n: {})",
                z.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(", "),
                z.iter().enumerate().map(|(k, t)| format!("{:.1e}", (t - std::f64::consts::TAU * (k + 1) as f64).abs())).collect::<Vec<_>>().join(", ")
            ),
            Err(e) => println!("demo: flat annulus failed: {e}"),
        }
    }
    if checks.iter().all(|c| c.pass) && !checks.is_empty() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}
