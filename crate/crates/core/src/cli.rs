//! Command-line front end: config resolution, sweeps, fits of external data
//! and the oracle validation suite.
//!
//! Config files are line-oriented `key = value` text with `#` comments.
//! Every key can also be given as a flag `--<key> <value>`; flags win over
//! the file, the file wins over the built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fit::{self, RsOptions};
use crate::model::ModelParams;
use crate::oracle;
use crate::rates;
use crate::spectrum::{self, FilterWindow};

/// Keys that must be present when a config file is used.
pub const REQUIRED_KEYS: [&str; 4] = ["g", "kappa", "omega_drive", "delta_laser"];

/// Keys beyond the model parameters.
pub const EXTRA_KEYS: [&str; 10] = [
    "gamma_bare",
    "nu0_thz",
    "sweep_start",
    "sweep_stop",
    "sweep_count",
    "grid_min",
    "grid_max",
    "grid_points",
    "filter_center",
    "filter_width",
];

pub const TRUNCATION_TOL: f64 = 1e-3;
pub const ADIABATIC_TOL: f64 = 1e-2;
pub const RATE_TOL: f64 = 0.05;

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INSTABILITY: i32 = 3;
    pub const NO_CONVERGENCE: i32 = 4;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Parse { .. } | Error::Io(_) => exit::CONFIG,
        Error::DegenerateSpectrum(..)
        | Error::NonUniqueSteadyState(_)
        | Error::UnstableLiouvillian(_)
        | Error::Frame(_)
        | Error::StiffnessFailure(_)
        | Error::Linalg(_) => exit::INSTABILITY,
        Error::NoConvergence(_)
        | Error::DegeneratePeaks(..)
        | Error::NonDecaying(_)
        | Error::AmbiguousAssignment(_)
        | Error::VanishingSpontaneous { .. }
        | Error::IllConditioned(_) => exit::NO_CONVERGENCE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count < 1 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Config(format!("invalid sweep {start}..{stop} x {count}")));
        }
        Ok(Self { start, stop, count })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        spectrum::linear_grid(self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub gamma_bare: f64,
    pub nu0_thz: f64,
    /// Unset means the subcommand's own default range.
    pub sweep: Option<SweepSpec>,
    pub grid: GridSpec,
    pub filter: Option<FilterWindow>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            gamma_bare: rates::GAMMA_BARE_QUOTED,
            nu0_thz: rates::DEFAULT_NU0_THZ,
            sweep: None,
            grid: GridSpec {
                min: -120.0,
                max: 60.0,
                points: 3601,
            },
            filter: None,
            seed: 0,
        }
    }
}

/// Value of a key and the config line it came from (0 for flags).
type KeyValues = BTreeMap<String, (f64, usize)>;

fn known_key(k: &str) -> bool {
    ModelParams::FIELD_NAMES.contains(&k) || EXTRA_KEYS.contains(&k) || k == "seed"
}

/// Parses `key = value` lines. Unknown keys, duplicates and non-numeric
/// values are rejected with their line number.
pub fn parse_config(text: &str) -> Result<KeyValues> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, got `{body}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !known_key(k) {
            return Err(Error::Parse { line, msg: format!("unknown key `{k}`") });
        }
        let x: f64 = v.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("value `{v}` for `{k}` is not a number"),
        })?;
        if let Some((_, first)) = out.insert(k.to_string(), (x, line)) {
            return Err(Error::Parse { line, msg: format!("`{k}` already set on line {first}") });
        }
    }
    Ok(out)
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("`{key}` must be a non-negative integer, got {v}")))
    }
}

/// Merges file values and flag overrides over the defaults.
///
/// `delta_cavity` follows the resolved `delta_laser` (Raman resonance) when
/// neither source sets it.
pub fn resolve(file: Option<&KeyValues>, flags: &KeyValues) -> Result<RunConfig> {
    let mut merged = file.cloned().unwrap_or_default();
    for (k, v) in flags {
        merged.insert(k.clone(), *v);
    }
    if file.is_some() {
        for k in REQUIRED_KEYS {
            if !merged.contains_key(k) {
                return Err(Error::Config(format!("missing required key `{k}`")));
            }
        }
    }
    let get = |k: &str| merged.get(k).map(|v| v.0);

    let mut cfg = RunConfig::default();
    for name in ModelParams::FIELD_NAMES {
        if let Some(v) = get(name) {
            cfg.params.set(name, v)?;
        }
    }
    if get("delta_cavity").is_none() {
        cfg.params.delta_cavity = cfg.params.delta_laser;
    }
    cfg.params
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    if let Some(v) = get("gamma_bare") {
        cfg.gamma_bare = v;
    }
    if let Some(v) = get("nu0_thz") {
        cfg.nu0_thz = v;
    }
    let sweep_keys = ["sweep_start", "sweep_stop", "sweep_count"];
    match sweep_keys.map(get) {
        [None, None, None] => {}
        [Some(a), b, n] => {
            let n = as_count("sweep_count", n.unwrap_or(1.0))?;
            cfg.sweep = Some(SweepSpec::new(a, b.unwrap_or(a), n)?);
        }
        _ => return Err(Error::Config("`sweep_start` is required for a sweep".into())),
    }
    if let Some(v) = get("grid_min") {
        cfg.grid.min = v;
    }
    if let Some(v) = get("grid_max") {
        cfg.grid.max = v;
    }
    if let Some(v) = get("grid_points") {
        cfg.grid.points = as_count("grid_points", v)?;
    }
    if cfg.grid.points < 16 || !(cfg.grid.max > cfg.grid.min) {
        return Err(Error::Config(format!(
            "grid needs min < max and at least 16 points, got {:?}",
            cfg.grid
        )));
    }
    match (get("filter_center"), get("filter_width")) {
        (None, None) => {}
        (c, w) => {
            let w = FilterWindow::new(c.unwrap_or(0.0), w.unwrap_or(FilterWindow::monochromator().width))
                .map_err(|e| Error::Config(e.to_string()))?;
            cfg.filter = Some(w);
        }
    }
    if let Some(v) = get("seed") {
        cfg.seed = as_count("seed", v)? as u64;
    }
    Ok(cfg)
}

/// `#`-prefixed header recording the command and every resolved setting.
pub fn header(cmd: &str, cfg: &RunConfig) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# cavity-raman {cmd}");
    for name in ModelParams::FIELD_NAMES {
        let _ = writeln!(h, "# {name} = {:.16e}", cfg.params.get(name).unwrap_or(f64::NAN));
    }
    let _ = writeln!(h, "# gamma_bare = {:.16e}", cfg.gamma_bare);
    let _ = writeln!(h, "# nu0_thz = {:.16e}", cfg.nu0_thz);
    if let Some(s) = cfg.sweep {
        let _ = writeln!(h, "# sweep_start = {:.16e}", s.start);
        let _ = writeln!(h, "# sweep_stop = {:.16e}", s.stop);
        let _ = writeln!(h, "# sweep_count = {}", s.count);
    }
    let _ = writeln!(h, "# grid_min = {:.16e}", cfg.grid.min);
    let _ = writeln!(h, "# grid_max = {:.16e}", cfg.grid.max);
    let _ = writeln!(h, "# grid_points = {}", cfg.grid.points);
    if let Some(f) = cfg.filter {
        let _ = writeln!(h, "# filter_center = {:.16e}", f.center);
        let _ = writeln!(h, "# filter_width = {:.16e}", f.width);
    }
    let _ = writeln!(h, "# seed = {}", cfg.seed);
    h
}

fn csv_rows(cols: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = cols.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Subcommands

#[derive(Debug, Clone, Serialize)]
pub struct RatesOutput {
    #[serde(flatten)]
    pub report: rates::RateReport,
    pub quality_factor: f64,
    pub adiabatic_valid: bool,
    pub truncation_valid: bool,
}

pub fn cmd_rates(cfg: &RunConfig) -> Result<RatesOutput> {
    let p = &cfg.params;
    Ok(RatesOutput {
        report: rates::rate_report(p, cfg.gamma_bare)?,
        quality_factor: rates::quality_factor(cfg.nu0_thz, p.kappa)?,
        adiabatic_valid: p.adiabatic_valid(),
        truncation_valid: p.truncation_valid(),
    })
}

/// Lab-axis spectrum on the configured grid, filtered if a window is set.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<spectrum::Spectrum> {
    let grid = spectrum::linear_grid(cfg.grid.min, cfg.grid.max, cfg.grid.points);
    let s = spectrum::emission_spectrum(&cfg.params, &grid)?;
    match cfg.filter {
        Some(w) => spectrum::apply_filter(s, w),
        None => Ok(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetuningRow {
    pub delta: f64,
    pub ratio: f64,
    pub ratio_err: f64,
    pub r_peak: f64,
    pub s_peak: f64,
    /// The spontaneous area is below three standard errors.
    pub vanishing_s: bool,
}

pub fn detuning_row(p: &ModelParams, delta: f64) -> Result<DetuningRow> {
    let opts = RsOptions::default();
    let q = p.with_detuning(delta);
    let (_, _, dec) = spectrum::decompose(&q)?;
    let r = fit::local_peak(&dec, &q, -delta, opts)?;
    let s = fit::local_peak(&dec, &q, 0.0, opts)?;
    let (ratio, ratio_err, vanishing_s) = match fit::rs_ratio((&r, &s), delta, opts.mode) {
        Ok(pt) => (pt.ratio, pt.ratio_err, false),
        Err(Error::VanishingSpontaneous { .. }) => (r.area / s.area, f64::INFINITY, true),
        Err(e) => return Err(e),
    };
    Ok(DetuningRow {
        delta,
        ratio,
        ratio_err,
        r_peak: r.center,
        s_peak: s.center,
        vanishing_s,
    })
}

pub fn default_detuning_sweep() -> SweepSpec {
    SweepSpec { start: 15.0, stop: 95.0, count: 9 }
}

pub fn cmd_sweep_detuning(cfg: &RunConfig) -> Result<Vec<DetuningRow>> {
    let sweep = cfg.sweep.unwrap_or_else(default_detuning_sweep);
    sweep
        .values()
        .par_iter()
        .map(|&d| detuning_row(&cfg.params, d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityRow {
    pub delta_cavity: f64,
    pub raman_intensity: f64,
    pub spont_intensity: f64,
}

pub fn cavity_row(p: &ModelParams, delta_cavity: f64) -> Result<CavityRow> {
    let opts = RsOptions::default();
    let q = ModelParams { delta_cavity, ..*p };
    let (_, _, dec) = spectrum::decompose(&q)?;
    let r = fit::local_peak(&dec, &q, -q.delta_laser, opts)?;
    let s = fit::local_peak(&dec, &q, 0.0, opts)?;
    Ok(CavityRow {
        delta_cavity,
        raman_intensity: r.area,
        spont_intensity: s.area,
    })
}

/// `Δ_L ± 100 GHz` in 5 GHz steps.
pub fn default_cavity_sweep(p: &ModelParams) -> SweepSpec {
    SweepSpec {
        start: p.delta_laser - 100.0,
        stop: p.delta_laser + 100.0,
        count: 41,
    }
}

pub fn cmd_sweep_cavity(cfg: &RunConfig) -> Result<Vec<CavityRow>> {
    let sweep = cfg.sweep.unwrap_or_else(|| default_cavity_sweep(&cfg.params));
    sweep
        .values()
        .par_iter()
        .map(|&dc| cavity_row(&cfg.params, dc))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Lorentzian1,
    Lorentzian2,
    Exponential,
    PhononN,
}

impl FitKind {
    pub const NAMES: [&'static str; 4] = ["lorentzian1", "lorentzian2", "exponential", "phonon-n"];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lorentzian1" => Ok(Self::Lorentzian1),
            "lorentzian2" => Ok(Self::Lorentzian2),
            "exponential" => Ok(Self::Exponential),
            "phonon-n" => Ok(Self::PhononN),
            _ => Err(Error::Config(format!("unknown fit kind `{s}`"))),
        }
    }
}

pub fn cmd_fit(kind: FitKind, text: &str, cfg: &RunConfig) -> Result<serde_json::Value> {
    let v = match kind {
        FitKind::Lorentzian1 => serde_json::to_value(fit::fit_lorentzian(&fit::parse_xy(text)?, 1, None)?),
        FitKind::Lorentzian2 => serde_json::to_value(fit::fit_lorentzian(&fit::parse_xy(text)?, 2, None)?),
        FitKind::Exponential => serde_json::to_value(fit::fit_exponential(&fit::parse_xy(text)?)?),
        FitKind::PhononN => {
            serde_json::to_value(fit::fit_phonon_exponent(&fit::parse_rs_points(text)?, &cfg.params)?)
        }
    };
    v.map_err(|e| Error::Config(format!("cannot serialize fit: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn from_result(name: &'static str, tolerance: f64, r: Result<(f64, String)>, extra_ok: bool) -> Self {
        match r {
            Ok((value, detail)) => Self {
                name,
                value,
                tolerance,
                pass: value.is_finite() && value < tolerance && extra_ok,
                detail,
            },
            Err(e) => Self {
                name,
                value: f64::NAN,
                tolerance,
                pass: false,
                detail: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

fn truncation_check(p: &ModelParams) -> Check {
    let r = oracle::truncation_error(p, oracle::DEFAULT_N_MAX).and_then(|d| {
        let conv = oracle::ladder_convergence(p, oracle::DEFAULT_N_MAX)?;
        Ok((
            d,
            format!(
                "trace distance {d:.3e} at N_max = {}, ladder change to N_max+1 {conv:.1e}, gamma_flip/kappa = {:.3} (regime needs < 0.1)",
                oracle::DEFAULT_N_MAX,
                p.gamma_flip / p.kappa
            ),
        ))
    });
    Check::from_result("truncation", TRUNCATION_TOL, r, p.truncation_valid())
}

fn adiabatic_check(p: &ModelParams) -> Check {
    let r = oracle::adiabatic_grid(p.omega_drive, p.g, p.delta_laser).and_then(|grid| {
        let a = oracle::adiabatic_error(p.omega_drive, p.g, p.delta_laser, &grid)?;
        Ok((
            a.max_population_error,
            format!("max |c3|^2 = {:.3e}", a.max_excited_population),
        ))
    });
    Check::from_result("adiabatic", ADIABATIC_TOL, r, true)
}

fn rate_check(cfg: &RunConfig) -> Check {
    let p = &cfg.params;
    let r = (|| {
        // lossless emitter, so P(|g2,0>) grows only through the cavity
        let q = ModelParams {
            gamma1: 0.0,
            gamma2: 0.0,
            gamma_flip: 0.0,
            phonon_alpha1: 0.0,
            phonon_alpha2: 0.0,
            ..*p
        };
        let want = rates::raman_rate_cavity(&q)?;
        let got = oracle::cavity_growth_rate(&q, want)?;
        let cav = (got / want - 1.0).abs();
        let gamma = p.gamma2.max(1e-3);
        let gamma_tot = (p.gamma1 + p.gamma2).max(gamma);
        let bare_want = rates::raman_rate_bare(p.omega_drive, p.delta_laser, gamma, gamma_tot, 0.5 * gamma_tot)?;
        let bare_got = oracle::bare_growth_rate(p.omega_drive, p.delta_laser, gamma, gamma_tot, 0.5 * gamma_tot)?;
        let bare = (bare_got / bare_want - 1.0).abs();
        Ok((
            cav.max(bare),
            format!(
                "cavity formula {want:.6e} vs master equation {got:.6e} /ns; bare formula {bare_want:.6e} vs ODE {bare_got:.6e} /ns"
            ),
        ))
    })();
    Check::from_result("rate", RATE_TOL, r, true)
}

pub fn cmd_validate(cfg: &RunConfig) -> ValidationReport {
    let p = cfg.params;
    let (truncation, (adiabatic, rate)) =
        rayon::join(|| truncation_check(&p), || rayon::join(|| adiabatic_check(&p), || rate_check(cfg)));
    let checks = vec![truncation, adiabatic, rate];
    ValidationReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

// ---------------------------------------------------------------------------
// Argument handling

pub fn command() -> Command {
    let mut common = vec![
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .global(true)
            .help("key = value config file"),
        Arg::new("out")
            .long("out")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .global(true)
            .help("write output here instead of stdout"),
        Arg::new("seed")
            .long("seed")
            .value_name("N")
            .value_parser(value_parser!(u64))
            .global(true)
            .help("base seed recorded in output headers"),
        Arg::new("json")
            .long("json")
            .action(ArgAction::SetTrue)
            .global(true)
            .help("structured stdout"),
    ];
    for key in ModelParams::FIELD_NAMES.iter().chain(EXTRA_KEYS.iter()) {
        let mut a = Arg::new(*key)
            .long(*key)
            .value_name("VALUE")
            .value_parser(value_parser!(f64))
            .allow_negative_numbers(true)
            .global(true)
            .help_heading("Parameter overrides");
        if *key == "omega_drive" {
            a = a.alias("omega");
        }
        common.push(a);
    }
    Command::new("cavity-raman")
        .about("Cavity-enhanced Raman emission from a driven Lambda-system emitter")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .args(common)
        .subcommand(Command::new("rates").about("closed-form rates and regime flags as JSON"))
        .subcommand(Command::new("spectrum").about("lab-axis emission spectrum as CSV"))
        .subcommand(Command::new("sweep-detuning").about("R/S ratio and peak positions versus detuning"))
        .subcommand(Command::new("sweep-cavity").about("R and S intensities versus cavity detuning"))
        .subcommand(
            Command::new("fit")
                .about("fit an external CSV and print a JSON report")
                .arg(
                    Arg::new("kind")
                        .required(true)
                        .value_parser(FitKind::NAMES),
                )
                .arg(Arg::new("input").required(true).value_parser(value_parser!(PathBuf))),
        )
        .subcommand(Command::new("validate").about("truncation, adiabatic and rate oracles"))
}

fn flag_values(m: &ArgMatches) -> KeyValues {
    let mut out = KeyValues::new();
    for key in ModelParams::FIELD_NAMES.iter().chain(EXTRA_KEYS.iter()) {
        if let Some(v) = m.get_one::<f64>(key) {
            out.insert(key.to_string(), (*v, 0));
        }
    }
    if let Some(s) = m.get_one::<u64>("seed") {
        out.insert("seed".into(), (*s as f64, 0));
    }
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

struct Output {
    out: Option<PathBuf>,
    json: bool,
}

impl Output {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
            None => {
                let mut so = std::io::stdout().lock();
                so.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    /// CSV goes to the output; with `--json` stdout gets `summary` too.
    fn emit_table(&self, csv: &str, summary: serde_json::Value) -> Result<()> {
        self.emit(csv)?;
        if self.json && self.out.is_some() {
            println!("{summary}");
        }
        Ok(())
    }
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_else(|e| format!("{{\"error\": \"{e}\"}}"));
    s.push('\n');
    s
}

fn dispatch(m: &ArgMatches) -> Result<i32> {
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let file = match sub.get_one::<PathBuf>("config") {
        Some(path) => Some(parse_config(&read(path)?)?),
        None => None,
    };
    let cfg = resolve(file.as_ref(), &flag_values(sub))?;
    let out = Output {
        out: sub.get_one::<PathBuf>("out").cloned(),
        json: sub.get_flag("json"),
    };
    match name {
        "rates" => out.emit(&pretty(&cmd_rates(&cfg)?))?,
        "spectrum" => {
            let s = cmd_spectrum(&cfg)?;
            let rows: Vec<Vec<f64>> = s.freqs.iter().zip(&s.intensity).map(|(f, v)| vec![*f, *v]).collect();
            let csv = header(name, &cfg) + &csv_rows(&["nu_lab_GHz", "intensity"], &rows);
            out.emit_table(&csv, json!({ "points": s.len(), "argmax": s.argmax(), "integral": s.integral() }))?;
        }
        "sweep-detuning" => {
            let rows = cmd_sweep_detuning(&cfg)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.delta, r.ratio, r.ratio_err, r.r_peak, r.s_peak, f64::from(u8::from(r.vanishing_s))])
                .collect();
            let cols = ["delta_GHz", "ratio", "ratio_err", "r_peak_GHz", "s_peak_GHz", "vanishing_s"];
            let csv = header(name, &cfg) + &csv_rows(&cols, &table);
            out.emit_table(&csv, json!({ "rows": rows }))?;
        }
        "sweep-cavity" => {
            let rows = cmd_sweep_cavity(&cfg)?;
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.delta_cavity, r.raman_intensity, r.spont_intensity])
                .collect();
            let cols = ["delta_cavity_GHz", "raman_intensity", "spont_intensity"];
            let csv = header(name, &cfg) + &csv_rows(&cols, &table);
            out.emit_table(&csv, json!({ "rows": rows }))?;
        }
        "fit" => {
            let kind = FitKind::parse(sub.get_one::<String>("kind").expect("required"))?;
            let text = read(sub.get_one::<PathBuf>("input").expect("required"))?;
            out.emit(&pretty(&cmd_fit(kind, &text, &cfg)?))?;
        }
        "validate" => {
            let report = cmd_validate(&cfg);
            out.emit(&pretty(&report))?;
            if !report.pass {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                eprintln!("validation failed: {}", failed.join(", "));
                return Ok(exit::VALIDATION);
            }
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(exit::OK)
}

/// Parses `args` (including the program name), runs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match dispatch(&m) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_errors() {
        let kv = parse_config("# device\ng = 0.8\nkappa=53.7 # trailing\n\nkT = 83\n").unwrap();
        assert_eq!(kv["g"], (0.8, 2));
        assert_eq!(kv["kT"].0, 83.0);
        assert!(matches!(parse_config("g = 1\nfoo = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("g = x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("g 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("g = 1\ng = 2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn required_keys_only_with_file() {
        let file = parse_config("g = 0.8\nomega_drive = 2.58\ndelta_laser = 55").unwrap();
        let e = resolve(Some(&file), &KeyValues::new()).unwrap_err();
        assert!(e.to_string().contains("kappa"));
        assert_eq!(exit_code(&e), exit::CONFIG);
        let mut flags = KeyValues::new();
        flags.insert("kappa".into(), (50.0, 0));
        assert_eq!(resolve(Some(&file), &flags).unwrap().params.kappa, 50.0);
        assert_eq!(resolve(None, &KeyValues::new()).unwrap(), RunConfig::default());
    }

    #[test]
    fn precedence_and_cavity_default() {
        let file = parse_config("g = 0.8\nkappa = 53.7\nomega_drive = 2.58\ndelta_laser = 40").unwrap();
        let mut flags = KeyValues::new();
        flags.insert("g".into(), (0.5, 0));
        let cfg = resolve(Some(&file), &flags).unwrap();
        assert_eq!(cfg.params.g, 0.5);
        assert_eq!(cfg.params.delta_cavity, 40.0);
        assert_eq!(cfg.params.gamma1, ModelParams::default().gamma1);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut flags = KeyValues::new();
        flags.insert("kappa".into(), (-1.0, 0));
        assert_eq!(exit_code(&resolve(None, &flags).unwrap_err()), exit::CONFIG);
        let mut flags = KeyValues::new();
        flags.insert("grid_points".into(), (8.0, 0));
        assert!(resolve(None, &flags).is_err());
        let mut flags = KeyValues::new();
        flags.insert("sweep_count".into(), (3.0, 0));
        assert!(resolve(None, &flags).is_err());
    }

    #[test]
    fn sweep_values() {
        assert_eq!(SweepSpec::new(10.0, 20.0, 1).unwrap().values(), vec![10.0]);
        let v = SweepSpec::new(10.0, 20.0, 3).unwrap().values();
        assert_eq!(v, vec![10.0, 15.0, 20.0]);
        assert!(SweepSpec::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn header_lists_every_parameter() {
        let h = header("spectrum", &RunConfig::default());
        for name in ModelParams::FIELD_NAMES {
            assert!(h.contains(&format!("# {name} = ")), "{name}");
        }
        assert!(h.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn rates_without_drive() {
        let mut cfg = RunConfig::default();
        cfg.params.omega_drive = 0.0;
        let r = cmd_rates(&cfg).unwrap();
        assert_eq!(r.report.r_cavity, 0.0);
        assert_eq!(r.report.r_bare, 0.0);
        assert!(r.report.enhancement.is_none());
    }

    #[test]
    fn exit_code_classes() {
        assert_eq!(exit_code(&Error::UnstableLiouvillian(1.0)), exit::INSTABILITY);
        assert_eq!(exit_code(&Error::NoConvergence(5)), exit::NO_CONVERGENCE);
        assert_eq!(exit_code(&Error::Parse { line: 1, msg: String::new() }), exit::CONFIG);
    }
}
