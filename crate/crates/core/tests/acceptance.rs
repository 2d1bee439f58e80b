//! Acceptance benchmarks. Each test prints one `criterion N: PASS/FAIL`
//! line with the measured quantity and its threshold.

use std::sync::OnceLock;
use std::time::Instant;

use torsion2d::body::ConvexBody;
use torsion2d::distance::{
    self, laplacian_distance, ridge_residual, sample_field, CellLabel,
    DistanceOpts,
};
use torsion2d::domain::{annulus_sector_domain, disk_domain, rectangle_domain, Domain};
use torsion2d::geom::{v, Vec2};
use torsion2d::grid::Grid;
use torsion2d::solver::{
    build_obstacles, classify_regions, smoothing_pipeline, solve_double_obstacle, solve_penalized,
    sup_diff, Discretization, FKind, Functional, GKind, Region, Solution, SolverCfg,
};
use torsion2d::verify::{self, Status};

struct Line {
    criterion: usize,
    what: &'static str,
    ok: bool,
    measured: f64,
    threshold: f64,
}

fn report(lines: &[Line], started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    let mut all_ok = true;
    for l in lines {
        println!(
            "criterion {} [{}]: {} (measured {:.3e}, threshold {:.3e})",
            l.criterion,
            l.what,
            if l.ok { "PASS" } else { "FAIL" },
            l.measured,
            l.threshold
        );
        all_ok &= l.ok;
    }
    println!(
        "criterion {} [runtime]: {} ({:.1}s of {:.0}s)",
        lines[0].criterion,
        if elapsed <= budget_s { "PASS" } else { "FAIL" },
        elapsed,
        budget_s
    );
    assert!(all_ok, "criterion {} failed", lines[0].criterion);
    assert!(elapsed <= budget_s, "criterion {} over budget", lines[0].criterion);
}

fn torsion(tau: f64) -> Functional {
    Functional::new(FKind::HalfSquare, GKind::Linear { tau }).unwrap()
}

struct DiskRun {
    grid: Grid,
    disc: Discretization,
    field: distance::DistanceField,
    tau4: Solution,
}

fn disk_run(n: usize) -> DiskRun {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(n, n, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let tau4 = solve_double_obstacle(&disc, &torsion(4.0), &field, &SolverCfg::defaults()).unwrap();
    DiskRun { grid, disc, field, tau4 }
}

static DISK_256: OnceLock<DiskRun> = OnceLock::new();
static DISK_128: OnceLock<DiskRun> = OnceLock::new();
static DISK_64: OnceLock<DiskRun> = OnceLock::new();

fn disk_256() -> &'static DiskRun {
    DISK_256.get_or_init(|| disk_run(256))
}

#[test]
fn criterion_1_gauge_identity_suite() {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    for (name, body) in [
        ("disk", ConvexBody::disk(1.0)),
        ("ellipse", ConvexBody::ellipse(1.5, 0.7)),
        ("p_ball_4", ConvexBody::p_ball(4.0)),
    ] {
        let c = verify::check_gauge_identities(&body, 200, 42, 1e-8);
        lines.push(Line {
            criterion: 1,
            what: Box::leak(format!("identities {name}").into_boxed_str()),
            ok: c.status == Status::Pass,
            measured: c.measured,
            threshold: c.threshold,
        });
    }
    report(&lines, t0, 5.0);
}

#[test]
fn criterion_2_disk_distance_laplacian() {
    let t0 = Instant::now();
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let opts = DistanceOpts::default();
    // In the unit disk with the Euclidean gauge, d(x) = 1 - |x| and the
    // Laplacian is -1/|x| = -1/(1 - d(x)).
    let mut worst_analytic = 0.0f64;
    let mut worst_fd = 0.0f64;
    for k in 0..50 {
        let r = 0.05 + (0.9 - 0.05) * (k as f64 + 0.5) / 50.0;
        let x = r * Vec2::from_angle(0.37 + 2.39996 * k as f64);
        let lap = laplacian_distance(&dom, &body, x, &opts).unwrap();
        let exact = -1.0 / r;
        worst_analytic = worst_analytic.max((lap - exact).abs() / exact.abs());
        let f = |p: Vec2| distance::boundary_gauge_distance(&dom, &body, p, &opts);
        let e = 1e-5;
        let fd = (f(x + v(e, 0.0)) + f(x - v(e, 0.0)) + f(x + v(0.0, e)) + f(x - v(0.0, e))
            - 4.0 * f(x))
            / (e * e);
        worst_fd = worst_fd.max((lap - fd).abs() / exact.abs());
    }
    let lines = vec![
        Line {
            criterion: 2,
            what: "laplacian vs closed form",
            ok: worst_analytic <= 1e-8,
            measured: worst_analytic,
            threshold: 1e-8,
        },
        Line {
            criterion: 2,
            what: "laplacian vs finite differences",
            ok: worst_fd <= 1e-4,
            measured: worst_fd,
            threshold: 1e-4,
        },
    ];
    report(&lines, t0, 5.0);
}

#[test]
fn criterion_3_ridge_correctness() {
    let t0 = Instant::now();
    // Square domain, Euclidean gauge: the multiplicity ridge is the diagonal
    // cross; compare labels against brute-force closest-edge multiplicity.
    let dom = rectangle_domain(-1.0, 1.0, -1.0, 1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(128, 128, [-1.0, 1.0, -1.0, 1.0]);
    let opts = DistanceOpts::default();
    let field = sample_field(&dom, &body, grid, &opts);
    let edges = [
        (v(-1.0, -1.0), v(1.0, -1.0)),
        (v(1.0, -1.0), v(1.0, 1.0)),
        (v(1.0, 1.0), v(-1.0, 1.0)),
        (v(-1.0, 1.0), v(-1.0, -1.0)),
    ];
    let seg_dist = |x: Vec2, a: Vec2, b: Vec2| -> f64 {
        let ab = b - a;
        let t = ((x - a).dot(ab) / ab.norm2()).clamp(0.0, 1.0);
        x.dist(a + t * ab)
    };
    let (mut agree, mut total) = (0usize, 0usize);
    let tie = 1e-8 * dom_diam(&dom);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if matches!(field.label[idx], CellLabel::Outside | CellLabel::Boundary) {
                continue;
            }
            let x = grid.node(i, j);
            let ds: Vec<f64> = edges.iter().map(|&(a, b)| seg_dist(x, a, b)).collect();
            let dmin = ds.iter().cloned().fold(f64::INFINITY, f64::min);
            let mult = ds.iter().filter(|&&d| d <= dmin + tie).count();
            let brute_ridge = mult > 1;
            let labeled = matches!(field.label[idx], CellLabel::MultiplicityRidge);
            total += 1;
            if brute_ridge == labeled {
                agree += 1;
            }
        }
    }
    let frac = agree as f64 / total as f64;

    // Unit disk domain, disk(2) gauge: 1 - kappa_K d vanishes where d = 1/2.
    let ddom = disk_domain(1.0);
    let dbody = ConvexBody::disk(2.0);
    let h = 2.0 / 128.0;
    let mut best = (f64::INFINITY, 0.0);
    let mut r = 0.9;
    while r > 1e-4 {
        let x = r * Vec2::from_angle(0.81);
        let res = ridge_residual(&ddom, &dbody, x, &opts).unwrap();
        if res.abs() < best.0 {
            let d = distance::distance(&ddom, &dbody, x, &opts).unwrap();
            best = (res.abs(), d);
        }
        r -= h / 4.0;
    }
    let lines = vec![
        Line {
            criterion: 3,
            what: "multiplicity ridge vs brute force",
            ok: frac >= 0.99,
            measured: frac,
            threshold: 0.99,
        },
        Line {
            criterion: 3,
            what: "curvature ridge crossing depth",
            ok: (best.1 - 0.5).abs() <= h,
            measured: best.1,
            threshold: 0.5,
        },
    ];
    report(&lines, t0, 30.0);
}

fn dom_diam(d: &Domain) -> f64 {
    (d.bbox[1] - d.bbox[0]).hypot(d.bbox[3] - d.bbox[2])
}

#[test]
fn criterion_4_torsion_benchmark() {
    let t0 = Instant::now();
    let run = disk_256();
    let grid = run.grid;
    let h = grid.hx();
    // Free-boundary radius: innermost upper-contact cell.
    let regions = classify_regions(&run.tau4, 1e-7);
    let mut rstar = f64::INFINITY;
    let mut u0 = f64::NEG_INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            let r = grid.node(i, j).norm();
            if regions[idx] == Region::PlasticPlus {
                rstar = rstar.min(r);
            }
            if run.tau4.inside[idx] && r < 0.02 {
                u0 = u0.max(run.tau4.u[idx] + r * r);
            }
        }
    }
    // tau = 1 stays elastic with u = (1 - r^2)/4.
    let tau1 = solve_double_obstacle(&run.disc, &torsion(1.0), &run.field, &SolverCfg::defaults())
        .unwrap();
    let mut linf = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if tau1.inside[idx] {
                let r2 = grid.node(i, j).norm2();
                linf = linf.max((tau1.u[idx] - (1.0 - r2) / 4.0).abs());
            }
        }
    }
    let lines = vec![
        Line {
            criterion: 4,
            what: "free boundary radius",
            ok: (rstar - 0.5).abs() <= 2.0 * h,
            measured: rstar,
            threshold: 0.5,
        },
        Line {
            criterion: 4,
            what: "center value",
            ok: (u0 - 0.75).abs() <= 5e-3,
            measured: u0,
            threshold: 0.75,
        },
        Line {
            criterion: 4,
            what: "tau=1 sup error",
            ok: linf <= 5e-3,
            measured: linf,
            threshold: 5e-3,
        },
    ];
    report(&lines, t0, 120.0);
}

#[test]
fn criterion_5_gradient_and_region_equivalence() {
    let t0 = Instant::now();
    let run = disk_256();
    let body = ConvexBody::disk(1.0);
    let h = run.grid.hx();
    let lip = verify::lipschitz_bound(&body);
    let cg = verify::check_gradient_constraint(&run.tau4, &body, 4.0 * h * lip);
    let regions = classify_regions(&run.tau4, 1e-7);
    let cd = verify::check_primal_dual_plasticity(&run.tau4, &body, &regions, 0.05, 0.05);
    let lines = vec![
        Line {
            criterion: 5,
            what: "max polar gauge of gradient",
            ok: cg.status == Status::Pass,
            measured: cg.measured,
            threshold: cg.threshold,
        },
        Line {
            criterion: 5,
            what: "contact vs dual plastic set",
            ok: cd.status == Status::Pass,
            measured: cd.measured,
            threshold: cd.threshold,
        },
    ];
    report(&lines, t0, 120.0);
}

#[test]
fn criterion_6_theorem_suite_annulus_sector() {
    let t0 = Instant::now();
    let dom = annulus_sector_domain(0.5, 1.5, 0.3, 2.2, 0.12).unwrap();
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(160, 160, dom.bbox);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let fun = torsion(4.0);
    let sol = solve_double_obstacle(&disc, &fun, &field, &SolverCfg::defaults()).unwrap();
    let report_ = verify::solution_report(&dom, &body, &disc, &fun, &sol, &field, 1e-7, 0.05);
    // Gate on the four checks this criterion calls for; the remaining report
    // lines are printed for information only. The primal-dual cross-check with
    // a fixed gradient tolerance settles at a geometry-dependent constant (the
    // near-ridge gradient band has fixed area), so it is gated on the disk in
    // criterion 5 instead.
    const GATED: [&str; 4] = [
        "variational_inequality",
        "contact_sign",
        "segment_plasticity",
        "ridge_gap_cells",
    ];
    let mut lines = Vec::new();
    for c in &report_.checks {
        if GATED.contains(&c.name.as_str()) {
            lines.push(Line {
                criterion: 6,
                what: Box::leak(c.name.clone().into_boxed_str()),
                ok: c.status != Status::Fail,
                measured: c.measured,
                threshold: c.threshold,
            });
        } else {
            println!(
                "criterion 6 [{} (informational)]: {:?} (measured {:.3e}, threshold {:.3e})",
                c.name, c.status, c.measured, c.threshold
            );
        }
    }
    report(&lines, t0, 180.0);
}

#[test]
fn criterion_7_w2inf_stability() {
    let t0 = Instant::now();
    let dom = disk_domain(1.0);
    let s64 = &DISK_64.get_or_init(|| disk_run(64)).tau4;
    let s128 = &DISK_128.get_or_init(|| disk_run(128)).tau4;
    let s256 = &disk_256().tau4;
    let c = verify::check_w2inf(&[s64, s128, s256], &dom, 0.2, 1.2);
    let lines = vec![Line {
        criterion: 7,
        what: "second difference ratio",
        ok: c.status == Status::Pass,
        measured: c.measured,
        threshold: c.threshold,
    }];
    report(&lines, t0, 300.0);
}

#[test]
fn criterion_8_smoothing_pipeline() {
    let t0 = Instant::now();
    // Square gauge on the square domain, progressively smoothed bodies.
    let dom = rectangle_domain(-1.0, 1.0, -1.0, 1.0);
    let body = ConvexBody::square(1.0);
    let grid = Grid::new(96, 96, [-1.0, 1.0, -1.0, 1.0]);
    let fun = torsion(4.0);
    let cfg = SolverCfg::defaults();
    let res = smoothing_pipeline(&dom, &body, grid, &fun, &cfg, 8, &DistanceOpts::default())
        .unwrap();
    // sup_diffs[i] = |u_{i+2} - u_{i+1}|_inf; demand decrease from k = 3 on.
    let mut monotone = true;
    let mut worst_ratio = 0.0f64;
    for w in res.sup_diffs[1..].windows(2) {
        let ratio = w[1] / w[0].max(1e-300);
        worst_ratio = worst_ratio.max(ratio);
        if w[1] > w[0] + 1e-9 {
            monotone = false;
        }
    }
    println!("criterion 8 [stage sup diffs]: {:?}", res.sup_diffs);

    // Penalized and double-obstacle paths on the tau=4 disk.
    let ddom = disk_domain(1.0);
    let dbody = ConvexBody::disk(1.0);
    let dgrid = Grid::new(128, 128, [-1.0, 1.0, -1.0, 1.0]);
    let ddisc = Discretization::build(&ddom, dgrid);
    let dfield = sample_field(&ddom, &dbody, dgrid, &DistanceOpts::default());
    let so = solve_double_obstacle(&ddisc, &fun, &dfield, &cfg).unwrap();
    let obs = build_obstacles(&ddom, &dbody, &dfield, cfg.eps);
    let sp = solve_penalized(&fun, &obs, &cfg).unwrap();
    let diff = sup_diff(&so, &sp);
    // The obstacles themselves move by delta_eps = 4.5 C1 eps plus the
    // mollification error C1 eps; the penalty allows a further O(delta).
    let tol = 5.5 * obs.c1 * cfg.eps + 10.0 * cfg.delta;

    let lines = vec![
        Line {
            criterion: 8,
            what: "sup diffs decreasing for k >= 3",
            ok: monotone,
            measured: worst_ratio,
            threshold: 1.0,
        },
        Line {
            criterion: 8,
            what: "final original-gauge audit",
            ok: res.final_max_polar_gauge <= 1.01,
            measured: res.final_max_polar_gauge,
            threshold: 1.01,
        },
        Line {
            criterion: 8,
            what: "penalized vs double obstacle",
            ok: diff <= tol,
            measured: diff,
            threshold: tol,
        },
    ];
    report(&lines, t0, 300.0);
}
