//! Reproducible experiment drivers and their CSV/JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{convergence_order, convergence_order_to, ipm_run};
use crate::error::{IpmError, Result};
use crate::minmode::index_region_membership;
use crate::model::{IpmConfig, IterationTrace, Metric, PotentialSurface, TraceStatus, Vector};
use crate::problems::ch::{ch_config, ch_index_certificate, CahnHilliard, ChGrid, ChIndexCertificate, ChInitial, CH_MASS};
use crate::problems::periodic::PeriodicGrid;
use crate::problems::toy::{Toy2D, TOY_SADDLES};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Default configuration of the toy experiments.
pub fn toy_config() -> IpmConfig {
    IpmConfig {
        alpha: 1.0,
        beta: 1.0,
        rho: 100.0,
        inner_steps: 100,
        dt: 0.01,
        tol: 1e-8,
        max_outer: 200,
        ..IpmConfig::default()
    }
}

/// Starting point from which the unpenalized iteration breaks down at `M = 500`.
pub const TOY_BAD_START: [f64; 2] = [1.0, 0.6];

/// Default basin window `[x_min, x_max, y_min, y_max]` and resolution.
pub const BASIN_WINDOW: [f64; 4] = [-2.0, 2.0, -1.0, 2.5];
pub const BASIN_RESOLUTION: usize = 101;
pub const SADDLE_MATCH_RADIUS: f64 = 1e-2;
pub const SADDLE_DEDUP_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: IpmConfig,
    pub surface: String,
    pub surface_params: serde_json::Value,
    pub initial: serde_json::Value,
    pub code_version: String,
    pub schema_version: u32,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(
        experiment: &str,
        config: &IpmConfig,
        surface: &str,
        surface_params: serde_json::Value,
        initial: serde_json::Value,
    ) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            experiment: experiment.to_string(),
            config: config.clone(),
            surface: surface.to_string(),
            surface_params,
            initial,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION,
            seed: config.seed,
            timestamp,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn csv_preamble(schema: &str) -> String {
    format!("# schema: {schema} v{SCHEMA_VERSION}; manifest: {MANIFEST_FILE}\n")
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Non-comment lines of a CSV written by this module, split on commas.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let f = fs::File::open(path)?;
    let mut rows = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        rows.push(line.split(',').map(str::to_string).collect());
    }
    Ok(rows)
}

/// `k, grad_norm, lambda1, x_0, …, x_{d−1}` per outer iteration.
pub fn write_trace_csv(path: &Path, trace: &IterationTrace) -> Result<()> {
    let dim = trace.final_point.len();
    let mut s = csv_preamble("trace");
    s.push_str("k,grad_norm,lambda1");
    for i in 0..dim {
        let _ = write!(s, ",x_{i}");
    }
    s.push('\n');
    for r in &trace.records {
        let _ = write!(s, "{},{},{}", r.outer_index, num(r.grad_norm), num(r.lambda1));
        for v in r.point.iter() {
            s.push(',');
            s.push_str(&num(*v));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToySummary {
    pub status: TraceStatus,
    pub outer_iterations: usize,
    pub final_point: [f64; 2],
    pub final_grad_norm: f64,
    /// Index into [`TOY_SADDLES`] of the published saddle within 1e-3, if any.
    pub saddle: Option<usize>,
    pub distance_to_saddle: f64,
    pub order_grad: Option<f64>,
    pub order_distance: Option<f64>,
}

impl ToySummary {
    pub fn line(&self) -> String {
        let fmt = |o: Option<f64>| o.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        format!(
            "status={} iterations={} final=({:.8}, {:.8}) grad_norm={:.3e} saddle={} distance={:.3e} order={} order_x={}",
            self.status.as_str(),
            self.outer_iterations,
            self.final_point[0],
            self.final_point[1],
            self.final_grad_norm,
            self.saddle.map_or("none".to_string(), |i| i.to_string()),
            self.distance_to_saddle,
            fmt(self.order_grad),
            fmt(self.order_distance),
        )
    }
}

pub fn nearest_toy_saddle(p: &Vector) -> (usize, f64) {
    TOY_SADDLES
        .iter()
        .enumerate()
        .map(|(i, s)| (i, ((p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2)).sqrt()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three saddles")
}

pub fn toy_run(x0: [f64; 2], config: &IpmConfig) -> Result<(IterationTrace, ToySummary)> {
    let trace = ipm_run(&Toy2D, &Metric::Euclidean, &Vector::from_vec(x0.to_vec()), 1, config)?;
    let fp = &trace.final_point;
    let (idx, dist) = nearest_toy_saddle(fp);
    let order_grad = convergence_order(&trace, 10).ok();
    let order_distance = convergence_order_to(&trace, fp, 10).ok();
    let summary = ToySummary {
        status: trace.status,
        outer_iterations: trace.outer_iterations(),
        final_point: [fp[0], fp[1]],
        final_grad_norm: trace.last_grad_norm().unwrap_or(f64::NAN),
        saddle: (trace.converged() && dist <= 1e-3).then_some(idx),
        distance_to_saddle: dist,
        order_grad,
        order_distance,
    };
    Ok((trace, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinOutcome {
    Converged,
    Diverged,
    MaxIterations,
    NumericalFailure,
}

impl BasinOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasinOutcome::Converged => "converged",
            BasinOutcome::Diverged => "diverged",
            BasinOutcome::MaxIterations => "max_iterations",
            BasinOutcome::NumericalFailure => "numerical_failure",
        }
    }
}

impl From<TraceStatus> for BasinOutcome {
    fn from(s: TraceStatus) -> Self {
        match s {
            TraceStatus::Converged => BasinOutcome::Converged,
            TraceStatus::Diverged => BasinOutcome::Diverged,
            TraceStatus::MaxIterations => BasinOutcome::MaxIterations,
            TraceStatus::NumericalFailure => BasinOutcome::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinPoint {
    pub x0: f64,
    pub y0: f64,
    pub outcome: BasinOutcome,
    pub saddle_id: Option<usize>,
    pub iterations: usize,
    pub in_omega1: bool,
}

/// A critical point found by the scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisteredSaddle {
    pub point: [f64; 2],
    pub index_one: bool,
    pub published: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinResult {
    pub rho: f64,
    pub points: Vec<BasinPoint>,
    pub saddles: Vec<RegisteredSaddle>,
}

impl BasinResult {
    /// Fraction of Ω₁ grid points that converge to an index-1 saddle.
    pub fn omega1_success_fraction(&self) -> f64 {
        let inside: Vec<&BasinPoint> = self.points.iter().filter(|p| p.in_omega1).collect();
        if inside.is_empty() {
            return 0.0;
        }
        let ok = inside
            .iter()
            .filter(|p| p.saddle_id.map_or(false, |id| self.saddles[id].index_one))
            .count();
        ok as f64 / inside.len() as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinSpec {
    pub window: [f64; 4],
    pub nx: usize,
    pub ny: usize,
}

impl Default for BasinSpec {
    fn default() -> Self {
        Self { window: BASIN_WINDOW, nx: BASIN_RESOLUTION, ny: BASIN_RESOLUTION }
    }
}

impl BasinSpec {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1, y0, y1] = self.window;
        if !(x1 > x0) || !(y1 > y0) || self.nx == 0 || self.ny == 0 {
            return Err(IpmError::InvalidArgument(format!("invalid basin grid {self:?}")));
        }
        if !self.window.iter().all(|v| v.is_finite()) {
            return Err(IpmError::InvalidArgument("basin window is not finite".into()));
        }
        Ok(())
    }

    /// Row-major grid points (x fastest).
    pub fn points(&self) -> Vec<[f64; 2]> {
        let [x0, x1, y0, y1] = self.window;
        let coord = |a: f64, b: f64, n: usize, i: usize| {
            if n == 1 {
                0.5 * (a + b)
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        };
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| [coord(x0, x1, self.nx, i), coord(y0, y1, self.ny, j)])
            .collect()
    }
}

/// Runs the toy iteration from every grid point. Runs are independent and
/// execute in parallel; saddle labels are assigned afterwards in grid order
/// so the result does not depend on scheduling.
pub fn basin_scan(spec: &BasinSpec, config: &IpmConfig) -> Result<BasinResult> {
    spec.validate()?;
    config.validate()?;
    let metric = Metric::Euclidean;
    let runs: Vec<(BasinOutcome, usize, [f64; 2], bool)> = spec
        .points()
        .par_iter()
        .map(|p| {
            let x = Vector::from_vec(p.to_vec());
            let in_omega1 = index_region_membership(&Toy2D, &metric, &x, 1, config.eig_tol)
                .map_or(false, |r| r.member);
            match ipm_run(&Toy2D, &metric, &x, 1, config) {
                Ok(t) => (
                    t.status.into(),
                    t.outer_iterations(),
                    [t.final_point[0], t.final_point[1]],
                    in_omega1,
                ),
                Err(_) => (BasinOutcome::NumericalFailure, 0, *p, in_omega1),
            }
        })
        .collect();

    let mut saddles: Vec<RegisteredSaddle> = TOY_SADDLES
        .iter()
        .map(|s| RegisteredSaddle { point: *s, index_one: true, published: true })
        .collect();
    let mut points = Vec::with_capacity(runs.len());
    for (p, (outcome, iterations, fp, in_omega1)) in spec.points().into_iter().zip(runs) {
        let saddle_id = if outcome == BasinOutcome::Converged {
            Some(register(&mut saddles, fp, config.eig_tol))
        } else {
            None
        };
        points.push(BasinPoint { x0: p[0], y0: p[1], outcome, saddle_id, iterations, in_omega1 });
    }
    Ok(BasinResult { rho: config.rho, points, saddles })
}

fn register(saddles: &mut Vec<RegisteredSaddle>, p: [f64; 2], eig_tol: f64) -> usize {
    let dist = |s: &RegisteredSaddle| (s.point[0] - p[0]).hypot(s.point[1] - p[1]);
    let nearest = saddles
        .iter()
        .enumerate()
        .map(|(i, s)| (i, dist(s)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((i, d)) = nearest {
        let radius = if saddles[i].published { SADDLE_MATCH_RADIUS } else { SADDLE_DEDUP_RADIUS };
        if d <= radius {
            return i;
        }
    }
    let x = Vector::from_vec(p.to_vec());
    let index_one = index_region_membership(&Toy2D, &Metric::Euclidean, &x, 1, eig_tol).map_or(false, |r| r.member);
    saddles.push(RegisteredSaddle { point: p, index_one, published: false });
    saddles.len() - 1
}

/// `x0, y0, outcome, saddle_id, iters, in_omega1`.
pub fn write_basin_csv(path: &Path, result: &BasinResult) -> Result<()> {
    let mut s = csv_preamble("basin");
    let _ = writeln!(s, "# rho: {}", num(result.rho));
    for (i, sd) in result.saddles.iter().enumerate() {
        let _ = writeln!(
            s,
            "# saddle {i}: {}, {} index_one={} published={}",
            num(sd.point[0]),
            num(sd.point[1]),
            sd.index_one,
            sd.published
        );
    }
    s.push_str("x0,y0,outcome,saddle_id,iters,in_omega1\n");
    for p in &result.points {
        let id = p.saddle_id.map_or(String::new(), |i| i.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(p.x0),
            num(p.y0),
            p.outcome.as_str(),
            id,
            p.iterations,
            u8::from(p.in_omega1)
        );
    }
    write_text(path, &s)
}

#[derive(Debug, Clone)]
pub struct ChRun {
    pub initial: ChInitial,
    pub trace: IterationTrace,
    pub state: Option<ChGrid>,
    pub certificate: Option<ChIndexCertificate>,
}

impl ChRun {
    /// Converged to an index-1 critical point (modulo translation).
    pub fn found_saddle(&self) -> bool {
        self.trace.converged() && self.certificate.as_ref().map_or(false, |c| c.is_index_one())
    }
}

pub fn ch_run(surface: &CahnHilliard, initial: ChInitial, config: &IpmConfig) -> Result<ChRun> {
    let phi0 = initial.profile(surface, CH_MASS);
    let trace = ipm_run(surface, &surface.metric(), &phi0, 1, config)?;
    let (state, certificate) = if trace.converged() {
        let state = ChGrid::new(surface.clone(), CH_MASS, trace.final_point.clone()).ok();
        let cert = state.as_ref().and_then(|s| ch_index_certificate(s, config.eig_tol).ok());
        (state, cert)
    } else {
        (None, None)
    };
    Ok(ChRun { initial, trace, state, certificate })
}

/// `x_i, phi_i` with 17 significant digits.
pub fn write_profile_csv(path: &Path, grid: &PeriodicGrid, phi: &Vector) -> Result<()> {
    let mut s = csv_preamble("profile");
    s.push_str("x_i,phi_i\n");
    for (x, p) in grid.nodes().iter().zip(phi.iter()) {
        let _ = writeln!(s, "{},{}", num(*x), num(*p));
    }
    write_text(path, &s)
}

pub fn read_profile_csv(path: &Path) -> Result<(Vector, Vector)> {
    let rows = read_csv_rows(path)?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| IpmError::InvalidArgument(format!("bad number '{s}': {e}")))
    };
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for row in rows.iter().skip(1) {
        if row.len() != 2 {
            return Err(IpmError::InvalidArgument(format!("expected 2 columns, got {}", row.len())));
        }
        xs.push(parse(&row[0])?);
        ps.push(parse(&row[1])?);
    }
    Ok((Vector::from_vec(xs), Vector::from_vec(ps)))
}

/// Smallest L² distance between `a` and the circular shifts of `b`, with the shift.
pub fn best_circular_shift(grid: &PeriodicGrid, a: &Vector, b: &Vector) -> (usize, f64) {
    let n = a.len();
    (0..n)
        .map(|s| {
            let shifted = Vector::from_fn(n, |i, _| b[(i + s) % n]);
            (s, grid.l2_norm(&(a - shifted)))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty grid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableCell {
    pub m: usize,
    pub initial: ChInitial,
    pub rho: f64,
    pub status: TraceStatus,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub lambda1: f64,
    /// Converged to an index-1 saddle.
    pub pass: bool,
}

impl TableCell {
    pub fn method(&self) -> &'static str {
        if self.rho == 0.0 {
            "IMF"
        } else {
            "IPM"
        }
    }
}

/// Sweeps `M × ρ × initial state`; cells run in parallel and are returned
/// sorted by (M, state, ρ).
pub fn ch_table(
    surface: &CahnHilliard,
    ms: &[usize],
    rhos: &[f64],
    initials: &[ChInitial],
    base: &IpmConfig,
) -> Result<Vec<TableCell>> {
    let mut jobs = Vec::new();
    for &m in ms {
        for &init in initials {
            for &rho in rhos {
                jobs.push((m, init, rho));
            }
        }
    }
    let cells = jobs
        .par_iter()
        .map(|&(m, init, rho)| {
            let cfg = IpmConfig { rho, inner_steps: m, ..base.clone() };
            let run = ch_run(surface, init, &cfg)?;
            let last = run.trace.records.last();
            Ok(TableCell {
                m,
                initial: init,
                rho,
                status: run.trace.status,
                iterations: run.trace.outer_iterations(),
                final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm),
                lambda1: last.map_or(f64::NAN, |r| r.lambda1),
                pass: run.found_saddle(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cells)
}

pub fn write_table_csv(path: &Path, cells: &[TableCell]) -> Result<()> {
    let mut s = csv_preamble("table");
    s.push_str("M,initial,method,rho,status,iterations,final_grad_norm,lambda1,pass\n");
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.m,
            c.initial.as_str(),
            c.method(),
            num(c.rho),
            c.status.as_str(),
            c.iterations,
            num(c.final_grad_norm),
            num(c.lambda1),
            u8::from(c.pass)
        );
    }
    write_text(path, &s)
}

/// Markdown rendering with one ✓/✗ column per (state, method).
pub fn table_markdown(cells: &[TableCell]) -> String {
    let mut ms: Vec<usize> = cells.iter().map(|c| c.m).collect();
    ms.dedup();
    let mut cols: Vec<(ChInitial, &'static str)> = Vec::new();
    for c in cells {
        if !cols.contains(&(c.initial, c.method())) {
            cols.push((c.initial, c.method()));
        }
    }
    let mut s = String::from("| M |");
    for (init, method) in &cols {
        let _ = write!(s, " {} {} |", init.as_str(), method);
    }
    s.push_str("\n|---|");
    for _ in &cols {
        s.push_str("---|");
    }
    s.push('\n');
    for m in ms {
        let _ = write!(s, "| {m} |");
        for (init, method) in &cols {
            let mark = cells
                .iter()
                .find(|c| c.m == m && c.initial == *init && c.method() == *method)
                .map_or("", |c| if c.pass { "✓" } else { "✗" });
            let _ = write!(s, " {mark} |");
        }
        s.push('\n');
    }
    s
}

/// Configuration of the CH experiments for a given `ρ` and `M`.
pub fn ch_experiment_config(rho: f64, inner_steps: usize) -> Result<IpmConfig> {
    ch_config(rho, inner_steps)
}

pub fn ch_surface_params(surface: &CahnHilliard) -> serde_json::Value {
    serde_json::json!({
        "n_cells": surface.dim(),
        "kappa": surface.kappa(),
        "mass": CH_MASS,
        "stabilizer": surface.stabilizer(),
    })
}
