//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 solver failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use torsion2d::body::ConvexBody;
use torsion2d::distance::{sample_field, write_field_csv, CellLabel, DistanceOpts};
use torsion2d::domain::Domain;
use torsion2d::geom::v;
use torsion2d::grid::Grid;
use torsion2d::problem::ProblemFile;
use torsion2d::solver::{
    build_obstacles, max_gauge_of_gradient, plastic_cell_count, smoothing_pipeline,
    solve_double_obstacle, solve_penalized, Discretization, Functional, Solution, SolverCfg,
};
use torsion2d::verify;

#[derive(Parser)]
#[command(name = "torsion2d", about = "Anisotropic distance fields and gradient-constrained solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem file (TOML).
    #[arg(long)]
    problem: PathBuf,
    /// Override grid resolution (nx = ny = N).
    #[arg(long)]
    grid: Option<usize>,
    /// Override the load factor tau.
    #[arg(long)]
    tau: Option<f64>,
    /// Override the mollification radius.
    #[arg(long)]
    eps: Option<f64>,
    /// Override the penalty parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate gauge quantities of the body at a point.
    GaugeEval {
        #[command(flatten)]
        common: Common,
        /// Point "x,y".
        #[arg(long)]
        point: String,
    },
    /// Sample the forward/reverse distance field to CSV.
    DistanceField {
        #[command(flatten)]
        common: Common,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the distance field and summarize ridge labels.
    Ridge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the double-obstacle (or penalized) problem.
    Solve {
        #[command(flatten)]
        common: Common,
        /// "obstacle" (default) or "penalized".
        #[arg(long, default_value = "obstacle")]
        method: String,
        /// Write the JSON summary here (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and run the verification report; exits 1 on failure.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smoothing pipeline for nonsmooth bodies.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Setup {
    body: ConvexBody,
    domain: Domain,
    grid: Grid,
    fun: Functional,
    cfg: SolverCfg,
    opts: DistanceOpts,
}

fn load(common: &Common) -> Result<(ProblemFile, Setup), String> {
    let text = fs::read_to_string(&common.problem)
        .map_err(|e| format!("cannot read {}: {e}", common.problem.display()))?;
    let mut pf = ProblemFile::parse(&text).map_err(|e| e.to_string())?;
    if let Some(n) = common.grid {
        pf.grid.nx = n;
        pf.grid.ny = n;
    }
    if let Some(t) = common.tau {
        pf.functional.tau = t;
    }
    if let Some(e) = common.eps {
        pf.solver.get_or_insert_with(default_solver_block).eps = Some(e);
    }
    if let Some(d) = common.delta {
        pf.solver.get_or_insert_with(default_solver_block).delta = Some(d);
    }
    let body = pf.build_body().map_err(|e| e.to_string())?;
    let domain = pf.build_domain().map_err(|e| e.to_string())?;
    let grid = pf.build_grid(&domain);
    let fun = pf.build_functional().map_err(|e| e.to_string())?;
    let cfg = pf.solver_cfg();
    let opts = pf.distance_opts();
    Ok((pf, Setup { body, domain, grid, fun, cfg, opts }))
}

fn default_solver_block() -> torsion2d::problem::SolverBlock {
    torsion2d::problem::SolverBlock {
        max_iters: None,
        tol: None,
        eps: None,
        delta: None,
        ridge_band: None,
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solution_summary(sol: &Solution, body: &ConvexBody) -> serde_json::Value {
    json!({
        "energy": sol.energy,
        "iterations": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "max_gauge_of_gradient": max_gauge_of_gradient(sol, body),
        "plastic_cell_count": plastic_cell_count(sol, 1e-9),
    })
}

fn run() -> Result<ExitCode, (u8, String)> {
    let cli = Cli::parse();
    let (common, action): (&Common, &Command) = match &cli.command {
        Command::GaugeEval { common, .. }
        | Command::DistanceField { common, .. }
        | Command::Ridge { common, .. }
        | Command::Solve { common, .. }
        | Command::Verify { common, .. }
        | Command::Pipeline { common, .. } => (common, &cli.command),
    };
    let (pf, setup) = load(common).map_err(|e| (2u8, e))?;
    if common.dump_config {
        println!("{}", pf.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    match action {
        Command::GaugeEval { point, .. } => {
            let parts: Vec<f64> = point
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| (2u8, format!("bad --point: {e}")))?;
            if parts.len() != 2 {
                return Err((2, "--point needs two coordinates".into()));
            }
            let x = v(parts[0], parts[1]);
            let b = &setup.body;
            let mut out = json!({
                "gauge": b.gauge(x),
                "polar_gauge": b.polar_gauge(x),
            });
            if let Ok(g) = b.grad_gauge(x) {
                out["grad_gauge"] = json!([g.x, g.y]);
            }
            if let Ok(g) = b.grad_polar_gauge(x) {
                out["grad_polar_gauge"] = json!([g.x, g.y]);
            }
            if let Ok(h) = b.hess_polar_gauge(x) {
                out["hess_polar_gauge"] = json!([[h.xx, h.xy], [h.xy, h.yy]]);
            }
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::DistanceField { out, .. } => {
            let field = sample_field(&setup.domain, &setup.body, setup.grid, &setup.opts);
            let mut buf = Vec::new();
            write_field_csv(&field, &mut buf).map_err(|e| (3u8, e.to_string()))?;
            write_out(out, &String::from_utf8(buf).unwrap()).map_err(|e| (3u8, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ridge { out, .. } => {
            let field = sample_field(&setup.domain, &setup.body, setup.grid, &setup.opts);
            if let Some(p) = out {
                let mut buf = Vec::new();
                write_field_csv(&field, &mut buf).map_err(|e| (3u8, e.to_string()))?;
                fs::write(p, buf).map_err(|e| (3u8, e.to_string()))?;
            }
            let count = |l: CellLabel| field.label.iter().filter(|&&x| x == l).count();
            let summary = json!({
                "multiplicity_ridge_cells": count(CellLabel::MultiplicityRidge),
                "curvature_ridge_cells": count(CellLabel::CurvatureRidge),
                "interior_cells": field.label.iter().filter(|&&x| x != CellLabel::Outside && x != CellLabel::Boundary).count(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { method, out, .. } => {
            let field = sample_field(&setup.domain, &setup.body, setup.grid, &setup.opts);
            let sol = match method.as_str() {
                "obstacle" => {
                    let disc = Discretization::build(&setup.domain, setup.grid);
                    solve_double_obstacle(&disc, &setup.fun, &field, &setup.cfg)
                        .map_err(|e| (3u8, e.to_string()))?
                }
                "penalized" => {
                    let obs = build_obstacles(&setup.domain, &setup.body, &field, setup.cfg.eps);
                    solve_penalized(&setup.fun, &obs, &setup.cfg)
                        .map_err(|e| (3u8, e.to_string()))?
                }
                other => return Err((2, format!("unknown method `{other}`"))),
            };
            let summary = solution_summary(&sol, &setup.body);
            write_out(out, &serde_json::to_string_pretty(&summary).unwrap())
                .map_err(|e| (3u8, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { out, .. } => {
            let field = sample_field(&setup.domain, &setup.body, setup.grid, &setup.opts);
            let disc = Discretization::build(&setup.domain, setup.grid);
            let sol = solve_double_obstacle(&disc, &setup.fun, &field, &setup.cfg)
                .map_err(|e| (3u8, e.to_string()))?;
            let h = setup.grid.hx().max(setup.grid.hy());
            let report = verify::solution_report(
                &setup.domain,
                &setup.body,
                &disc,
                &setup.fun,
                &sol,
                &field,
                1e-9,
                2.0 / h, // sign violations beyond the discretization scale
            );
            let text = serde_json::to_string_pretty(&report).unwrap();
            write_out(out, &text).map_err(|e| (3u8, e))?;
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Pipeline { kmax, out, .. } => {
            let result = smoothing_pipeline(
                &setup.domain,
                &setup.body,
                setup.grid,
                &setup.fun,
                &setup.cfg,
                *kmax,
                &setup.opts,
            )
            .map_err(|e| (3u8, e.to_string()))?;
            let stages: Vec<_> = result
                .stages
                .iter()
                .map(|s| {
                    json!({
                        "k": s.k,
                        "hausdorff": s.hausdorff,
                        "energy": s.solution.energy,
                        "iterations": s.solution.iterations,
                    })
                })
                .collect();
            let summary = json!({
                "stages": stages,
                "sup_diffs": result.sup_diffs,
                "final_max_polar_gauge": result.final_max_polar_gauge,
            });
            write_out(out, &serde_json::to_string_pretty(&summary).unwrap())
                .map_err(|e| (3u8, e))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
