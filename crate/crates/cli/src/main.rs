use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ipm_core::experiments::{
    basin_scan, ch_run, ch_surface_params, ch_table, table_markdown, toy_config, toy_run, write_basin_csv,
    write_profile_csv, write_table_csv, write_trace_csv, BasinSpec, RunManifest, BASIN_RESOLUTION, BASIN_WINDOW,
};
use ipm_core::problems::ch::{ch_config, gl_energy, CahnHilliard, ChInitial, CH_MASS};
use ipm_core::problems::toy::Toy2D;
use ipm_core::{
    fixed_point_residual, ipm_run, nash_check, GameProfile, IpmConfig, IterationTrace, Metric, PenaltyKind,
    TraceStatus, Vector,
};

const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "ipm", version, about = "Saddle search by iterative proximal minimization")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Unset values fall back to the
/// defaults of the selected problem.
#[derive(Args, Debug, Clone)]
struct Global {
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Inner gradient steps per outer iteration.
    #[arg(long = "M", global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_outer: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    penalty: Option<PenaltyKind>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single run on the 2D toy surface.
    Toy {
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0.5,1.0")]
        x0: [f64; 2],
    },
    /// Basins of attraction on the toy surface, one CSV per ρ.
    Basin {
        /// x_min,x_max,y_min,y_max
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<[f64; 4]>,
        /// Grid points per axis.
        #[arg(long, default_value_t = BASIN_RESOLUTION)]
        resolution: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,5,100")]
        rhos: Vec<f64>,
    },
    /// Cahn-Hilliard transition state from a generated initial state.
    Ch {
        #[arg(long, default_value = "phi01")]
        init: ChInitial,
    },
    /// Convergence table over M, ρ and initial states.
    Table {
        #[arg(long, value_delimiter = ',', default_value = "10,100,200,500")]
        ms: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,100")]
        rhos: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "phi01,phi02,phi03")]
        states: Vec<ChInitial>,
    },
    /// Checks the Nash condition at the point reached from --x0 (toy).
    NashCheck {
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0.5,1.0")]
        x0: [f64; 2],
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        /// Check --x0 as given instead of running the search first.
        #[arg(long)]
        no_solve: bool,
    },
    /// Fixed-point residual at the point reached from --x0 (toy).
    FixedPoint {
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0.5,1.0")]
        x0: [f64; 2],
        #[arg(long)]
        no_solve: bool,
    },
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    vals.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    parse_list::<2>(s)
}

fn parse_window(s: &str) -> Result<[f64; 4], String> {
    parse_list::<4>(s)
}

impl Global {
    fn apply(&self, mut cfg: IpmConfig) -> anyhow::Result<IpmConfig> {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.m {
            cfg.inner_steps = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.penalty {
            cfg.penalty = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Failures that are the caller's fault exit with the usage code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn status_code(status: TraceStatus) -> u8 {
    match status {
        TraceStatus::Converged => 0,
        TraceStatus::MaxIterations => 1,
        TraceStatus::Diverged => 2,
        TraceStatus::NumericalFailure => 3,
    }
}

fn toy_json(x0: [f64; 2]) -> serde_json::Value {
    serde_json::json!({ "x0": x0 })
}

fn cmd_toy(g: &Global, x0: [f64; 2]) -> anyhow::Result<u8> {
    let cfg = g.apply(toy_config())?;
    let (trace, summary) = toy_run(x0, &cfg)?;
    let manifest = RunManifest::new("toy", &cfg, "toy2d", serde_json::json!({}), toy_json(x0));
    manifest.write(&g.out_dir)?;
    write_trace_csv(&g.out_dir.join("trace.csv"), &trace)?;
    println!("{}", summary.line());
    Ok(status_code(trace.status))
}

fn cmd_basin(g: &Global, window: Option<[f64; 4]>, resolution: usize, rhos: &[f64]) -> anyhow::Result<u8> {
    let spec = BasinSpec { window: window.unwrap_or(BASIN_WINDOW), nx: resolution, ny: resolution };
    spec.validate().map_err(|e| Usage(e.to_string()))?;
    if rhos.is_empty() {
        return Err(Usage("--rhos must not be empty".into()).into());
    }
    let base = g.apply(toy_config())?;
    for &rho in rhos {
        let cfg = IpmConfig { rho, ..base.clone() };
        cfg.validate()?;
        let start = Instant::now();
        let result = basin_scan(&spec, &cfg)?;
        let dir = g.out_dir.join(format!("rho_{rho}"));
        let manifest = RunManifest::new(
            "basin",
            &cfg,
            "toy2d",
            serde_json::json!({}),
            serde_json::json!({ "window": spec.window, "nx": spec.nx, "ny": spec.ny }),
        );
        manifest.write(&dir)?;
        write_basin_csv(&dir.join("basin.csv"), &result)?;
        println!(
            "rho={rho} points={} omega1_success={:.4} saddles={} time={:.1}s",
            result.points.len(),
            result.omega1_success_fraction(),
            result.saddles.len(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(0)
}

fn ch_base(g: &Global) -> anyhow::Result<IpmConfig> {
    let mut cfg = ch_config(100.0, 10)?;
    cfg.max_outer = 1000;
    g.apply(cfg)
}

fn cmd_ch(g: &Global, init: ChInitial) -> anyhow::Result<u8> {
    let cfg = ch_base(g)?;
    let surface = CahnHilliard::standard();
    let run = ch_run(&surface, init, &cfg)?;
    let manifest = RunManifest::new(
        "ch",
        &cfg,
        "cahn_hilliard_1d",
        ch_surface_params(&surface),
        serde_json::json!({ "init": init.as_str(), "weight": init.weight() }),
    );
    manifest.write(&g.out_dir)?;
    write_trace_csv(&g.out_dir.join("trace.csv"), &run.trace)?;
    let phi = &run.trace.final_point;
    write_profile_csv(&g.out_dir.join("profile.csv"), surface.grid(), phi)?;
    let last = run.trace.records.last();
    let mut line = format!(
        "status={} iterations={} grad_norm={:.3e} mass={:.15}",
        run.trace.status.as_str(),
        run.trace.outer_iterations(),
        last.map_or(f64::NAN, |r| r.grad_norm),
        surface.grid().mean(phi),
    );
    if let Some(state) = &run.state {
        line += &format!(" energy={:.10}", gl_energy(state));
    }
    if let Some(c) = &run.certificate {
        line += &format!(" lambda1={:.6e} lambda2_reduced={:.6e} index_one={}", c.lambda1, c.reduced[1], c.is_index_one());
    }
    println!("{line}");
    Ok(status_code(run.trace.status))
}

fn cmd_table(g: &Global, ms: &[usize], rhos: &[f64], states: &[ChInitial]) -> anyhow::Result<u8> {
    if ms.is_empty() || rhos.is_empty() || states.is_empty() {
        return Err(Usage("--ms, --rhos and --states must be non-empty".into()).into());
    }
    let cfg = ch_base(g)?;
    let surface = CahnHilliard::standard();
    let cells = ch_table(&surface, ms, rhos, states, &cfg)?;
    let manifest = RunManifest::new(
        "table",
        &cfg,
        "cahn_hilliard_1d",
        ch_surface_params(&surface),
        serde_json::json!({
            "ms": ms,
            "rhos": rhos,
            "states": states.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            "mass": CH_MASS,
        }),
    );
    manifest.write(&g.out_dir)?;
    write_table_csv(&g.out_dir.join("table.csv"), &cells)?;
    let md = table_markdown(&cells);
    std::fs::write(g.out_dir.join("table.md"), &md)?;
    print!("{md}");
    Ok(0)
}

fn toy_point(cfg: &IpmConfig, x0: [f64; 2], no_solve: bool) -> anyhow::Result<(Vector, Option<IterationTrace>)> {
    let x = Vector::from_vec(x0.to_vec());
    if no_solve {
        return Ok((x, None));
    }
    let trace = ipm_run(&Toy2D, &Metric::Euclidean, &x, 1, cfg)?;
    Ok((trace.final_point.clone(), Some(trace)))
}

fn report_solve(trace: &Option<IterationTrace>, x: &Vector) {
    if let Some(t) = trace {
        println!(
            "solve: status={} iterations={} point=({:.8}, {:.8})",
            t.status.as_str(),
            t.outer_iterations(),
            x[0],
            x[1]
        );
    }
}

fn cmd_nash(g: &Global, x0: [f64; 2], delta: f64, samples: usize, no_solve: bool) -> anyhow::Result<u8> {
    if !(delta > 0.0) || samples == 0 {
        return Err(Usage("--delta must be positive and --samples at least 1".into()).into());
    }
    let cfg = g.apply(toy_config())?;
    let (x, trace) = toy_point(&cfg, x0, no_solve)?;
    report_solve(&trace, &x);
    let metric = Metric::Euclidean;
    let profile = GameProfile::at_point(&Toy2D, &metric, &x, 1, &cfg)?;
    let report = nash_check(&Toy2D, &metric, &profile, delta, samples, &cfg)?;
    write_text(&g.out_dir, "nash.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let worst: Vec<String> = report.worst_violation_per_player.iter().map(|w| format!("{w:.3e}")).collect();
    println!("certified={} worst_violation=[{}]", report.certified, worst.join(", "));
    Ok(if report.certified { 0 } else { 1 })
}

fn cmd_fixed_point(g: &Global, x0: [f64; 2], no_solve: bool) -> anyhow::Result<u8> {
    let cfg = g.apply(toy_config())?;
    let (x, trace) = toy_point(&cfg, x0, no_solve)?;
    report_solve(&trace, &x);
    let r = fixed_point_residual(&Toy2D, &Metric::Euclidean, &x, 1, &cfg)?;
    let bound = 10.0 * cfg.tol;
    println!("residual={r:.3e} bound={bound:.3e} fixed_point={}", r <= bound);
    Ok(if r <= bound { 0 } else { 1 })
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Toy { x0 } => cmd_toy(g, *x0),
        Command::Basin { window, resolution, rhos } => cmd_basin(g, *window, *resolution, rhos),
        Command::Ch { init } => cmd_ch(g, *init),
        Command::Table { ms, rhos, states } => cmd_table(g, ms, rhos, states),
        Command::NashCheck { x0, delta, samples, no_solve } => cmd_nash(g, *x0, *delta, *samples, *no_solve),
        Command::FixedPoint { x0, no_solve } => cmd_fixed_point(g, *x0, *no_solve),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<ipm_core::IpmError>(), Some(ipm_core::IpmError::InvalidConfig(_)))
                || matches!(e.downcast_ref::<ipm_core::IpmError>(), Some(ipm_core::IpmError::InvalidArgument(_)));
            if usage {
                return ExitCode::from(EXIT_USAGE);
            }
            ExitCode::from(3)
        }
    }
}
