//! Module-level tests with independent finite-difference and closed-form
//! oracles.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use torsion2d::body::ConvexBody;
use torsion2d::distance::{
    self, closest_points, grad_distance, hess_distance, laplacian_distance, ridge_residual,
    sample_field, CellLabel, DistanceOpts,
};
use torsion2d::domain::{
    annulus_sector_domain, disk_domain, rectangle_domain, BoundaryArc, CornerClass, Domain,
    Location,
};
use torsion2d::geom::{v, Vec2};
use torsion2d::grid::Grid;
use torsion2d::problem::ProblemFile;
use torsion2d::solver::{
    beta, build_obstacles, classify_regions, solve_double_obstacle, solve_penalized,sup_diff,
    Discretization, FKind, Functional, GKind, Region, SolverCfg,
};
use torsion2d::verify;

fn fd_grad<F: Fn(Vec2) -> f64>(f: &F, x: Vec2, e: f64) -> Vec2 {
    v(
        (f(x + v(e, 0.0)) - f(x - v(e, 0.0))) / (2.0 * e),
        (f(x + v(0.0, e)) - f(x - v(0.0, e))) / (2.0 * e),
    )
}

fn fd_hess_quad<F: Fn(Vec2) -> f64>(f: &F, x: Vec2, w: Vec2, e: f64) -> f64 {
    // Second directional difference along w.
    (f(x + e * w) - 2.0 * f(x) + f(x - e * w)) / (e * e)
}

// ---------------------------------------------------------------- bodies

#[test]
fn gauge_closed_forms() {
    let disk = ConvexBody::disk(2.0);
    assert!((disk.gauge(v(1.0, 1.0)) - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
    assert!((disk.polar_gauge(v(1.0, 0.0)) - 2.0).abs() < 1e-12);

    let ell = ConvexBody::ellipse(1.5, 0.7);
    assert!((ell.gauge(v(1.0, 1.0)) - 1.576470986404462).abs() < 1e-10);
    assert!((ell.polar_gauge(v(1.0, 1.0)) - 1.6552945357246849).abs() < 1e-10);

    let p4 = ConvexBody::p_ball(4.0);
    assert!((p4.gauge(v(0.3, -0.8)) - 0.8039260819766088).abs() < 1e-10);
    assert!((p4.polar_gauge(v(0.3, -0.8)) - 0.9573063477947734).abs() < 1e-9);

    let sq = ConvexBody::square(1.0);
    assert!((sq.gauge(v(0.4, -0.9)) - 0.9).abs() < 1e-12);
    assert!((sq.polar_gauge(v(0.4, -0.9)) - 1.3).abs() < 1e-12);
}

#[test]
fn gauge_gradients_match_finite_differences() {
    let bodies = [
        ConvexBody::disk(1.0),
        ConvexBody::ellipse(1.5, 0.7),
        ConvexBody::p_ball(4.0),
        ConvexBody::p_ball(1.5),
    ];
    for body in &bodies {
        for k in 0..24 {
            let t = 0.13 + k as f64 * TAU / 24.0;
            let x = (0.5 + 0.1 * (k % 5) as f64) * Vec2::from_angle(t);
            let e = 1e-6;
            let g = body.grad_gauge(x).unwrap();
            let gfd = fd_grad(&|p| body.gauge(p), x, e);
            assert!((g - gfd).norm() < 2e-8, "grad_gauge fd mismatch {:?}", x);
            let gp = body.grad_polar_gauge(x).unwrap();
            let gpfd = fd_grad(&|p| body.polar_gauge(p), x, e);
            assert!((gp - gpfd).norm() < 2e-8, "grad_polar fd mismatch {:?}", x);
            // Polar Hessian against a second difference in the tangent dir.
            let h = body.hess_polar_gauge(x).unwrap();
            let w = x.perp().unit();
            let q = fd_hess_quad(&|p| body.polar_gauge(p), x, w, 1e-4);
            assert!(
                (h.quad(w, w) - q).abs() < 1e-5 * q.abs().max(1.0),
                "hess_polar fd mismatch {:?}",
                x
            );
        }
    }
}

#[test]
fn curvature_radius_closed_forms() {
    let ell = ConvexBody::ellipse(1.5, 0.7);
    assert!((ell.curvature_radius(v(1.0, 0.0)).unwrap() - 0.3266666666666666).abs() < 1e-8);
    assert!((ell.curvature_radius(v(0.0, 1.0)).unwrap() - 3.2142857142857144).abs() < 1e-8);
    let disk = ConvexBody::disk(2.0);
    for k in 0..8 {
        let u = Vec2::from_angle(k as f64 * TAU / 8.0 + 0.1);
        assert!((disk.curvature_radius(u).unwrap() - 2.0).abs() < 1e-9);
    }
}

#[test]
fn polygon_dual_and_ambiguity() {
    let sq = ConvexBody::square(1.0);
    // Generic point: unique supporting edge, grad is that edge normal / h.
    let g = sq.grad_gauge(v(0.9, 0.2)).unwrap();
    assert!((g - v(1.0, 0.0)).norm() < 1e-12);
    // Diagonal: ambiguous normal reported with the edge-fan midpoint.
    assert!(sq.grad_gauge(v(0.7, 0.7)).is_err());
    // Polar of the square is the cross polytope (l1 ball).
    let polar = sq.polar_body();
    assert!((polar.gauge(v(0.25, -0.5)) - 0.75).abs() < 1e-12);
    // Support point duality: <x, D polar(x)> = polar(x).
    let x = v(0.3, 1.1);
    let dp = sq.grad_polar_gauge(x).unwrap();
    assert!((x.dot(dp) - sq.polar_gauge(x)).abs() < 1e-12);
    assert!((sq.gauge(dp) - 1.0).abs() < 1e-12);
}

#[test]
fn p_ball_degenerate_directions() {
    let p4 = ConvexBody::p_ball(4.0);
    // Curvature of the p>2 ball degenerates at the axis contact points.
    assert!(p4.curvature_radius(v(1.0, 0.0)).is_err() || p4.curvature_radius(v(1.0, 0.0)).unwrap() > 1e6);
    // Off-axis directions are fine.
    assert!(p4.curvature_radius(Vec2::from_angle(0.4)).is_ok());
}

#[test]
fn reflection_and_diameter() {
    let ell = ConvexBody::ellipse(1.5, 0.7);
    let r = ell.reflect();
    for k in 0..16 {
        let x = Vec2::from_angle(k as f64 * TAU / 16.0 + 0.05);
        assert!((r.gauge(x) - ell.gauge(-1.0 * x)).abs() < 1e-10);
    }
    assert!((ell.diameter() - 3.0).abs() < 1e-6);
}

#[test]
fn smooth_approximation_disk_is_fixed_point() {
    let disk = ConvexBody::disk(1.3);
    for k in [1u32, 4, 8] {
        let b = disk.smooth_approximation(k).unwrap();
        assert!(disk.hausdorff_distance(&b) < 1e-12);
    }
}

#[test]
fn smooth_approximation_square_posts() {
    let sq = ConvexBody::square(1.0);
    let diam = sq.diameter();
    let mut prev: Option<ConvexBody> = None;
    for k in 1..=6u32 {
        let bk = sq.smooth_approximation(k).unwrap();
        // Containment: every original boundary point lies in B_k.
        for i in 0..512 {
            let t = i as f64 * TAU / 512.0;
            let x = Vec2::from_angle(t);
            let bd = x / sq.gauge(x); // on the square's boundary
            assert!(bk.gauge(bd) <= 1.0 + 1e-9, "containment fails at k={k}");
        }
        // Hausdorff bound.
        let hd = bk.hausdorff_distance(&sq);
        assert!(hd <= 2f64.powi(-(k as i32)) * diam + 1e-12, "hausdorff k={k}: {hd}");
        // Downward nesting via support functions.
        if let Some(p) = &prev {
            for i in 0..512 {
                let u = Vec2::from_angle(i as f64 * TAU / 512.0);
                assert!(
                    bk.polar_gauge(u) <= p.polar_gauge(u) + 1e-9,
                    "nesting fails at k={k}"
                );
            }
        }
        // The approximation is usable as a smooth body.
        assert!(bk.grad_gauge(v(0.9, 0.9)).is_ok());
        prev = Some(bk);
    }
}

// ---------------------------------------------------------------- domains

#[test]
fn rectangle_corners_and_containment() {
    let d = rectangle_domain(-1.0, 1.0, -1.0, 1.0);
    assert_eq!(d.corners.len(), 4);
    for c in &d.corners {
        assert!((c.opening_angle - PI / 2.0).abs() < 1e-12);
        assert!(matches!(c.class, CornerClass::Nonreentrant));
    }
    assert_eq!(d.contains(v(0.0, 0.0), 1e-12), Location::Inside);
    assert_eq!(d.contains(v(2.0, 0.0), 1e-12), Location::Outside);
    assert_eq!(d.contains(v(1.0, 0.0), 1e-9), Location::Boundary);
}

#[test]
fn disk_domain_frame() {
    let d = disk_domain(1.0);
    let f = d.boundary_frame(0, 0.25).unwrap();
    assert!((f.point - v(0.0, 1.0)).norm() < 1e-12);
    // Inward normal points to the center; curvature of the unit circle is 1.
    assert!(f.normal.unit().dot(v(0.0, -1.0)) > 1.0 - 1e-12);
    assert!((f.curvature - 1.0).abs() < 1e-12);
}

#[test]
fn k_curvature_routes_agree() {
    let d = disk_domain(1.0);
    let bodies = [ConvexBody::disk(2.0), ConvexBody::ellipse(1.3, 0.8)];
    for b in &bodies {
        for &t in &[0.1, 0.37, 0.52, 0.9] {
            let k1 = d.k_curvature(b, 0, t).unwrap();
            let k2 = d.k_curvature_hess_route(b, 0, t).unwrap();
            assert!((k1 - k2).abs() < 1e-7 * k1.abs().max(1.0), "routes differ: {k1} {k2}");
        }
    }
    // Euclidean unit disk in the unit disk: curvature 1 times radius 2.
    assert!((d.k_curvature(&ConvexBody::disk(2.0), 0, 0.3).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn annulus_sector_is_c1() {
    let d = annulus_sector_domain(0.5, 1.5, 0.3, 2.2, 0.12).unwrap();
    assert_eq!(d.arcs.len(), 8);
    // All joins are tangent: every corner is a flat (nonstrict) one.
    for c in &d.corners {
        assert!(
            (c.opening_angle - PI).abs() < 1e-9,
            "non-tangent join: {}",
            c.opening_angle
        );
    }
    // Consecutive arc endpoints coincide.
    for lp in &d.loops {
        for w in 0..lp.len() {
            let a = &d.arcs[lp[w]];
            let b = &d.arcs[lp[(w + 1) % lp.len()]];
            assert!(a.point(1.0).dist(b.point(0.0)) < 1e-9);
        }
    }
    // A midpoint of the sector is inside; the hole is outside.
    let mid = 1.0 * Vec2::from_angle(1.25);
    assert_eq!(d.contains(mid, 1e-12), Location::Inside);
    assert_eq!(d.contains(v(0.0, 0.0), 1e-12), Location::Outside);
    assert_eq!(d.contains(0.2 * Vec2::from_angle(1.25), 1e-12), Location::Outside);
}

#[test]
fn reentrant_corner_detection() {
    // L-shaped hexagon with one reentrant corner at the origin.
    let pts = [
        v(0.0, 0.0),
        v(0.0, -1.0),
        v(1.0, -1.0),
        v(1.0, 1.0),
        v(-1.0, 1.0),
        v(-1.0, 0.0),
    ];
    let arcs: Vec<BoundaryArc> = (0..pts.len())
        .map(|i| BoundaryArc::segment(pts[i], pts[(i + 1) % pts.len()]))
        .collect();
    let d = Domain::new(vec![arcs]).unwrap();
    let strict = d
        .corners
        .iter()
        .filter(|c| matches!(c.class, CornerClass::StrictReentrant))
        .count();
    assert_eq!(strict, 1);
    let c = d
        .corners
        .iter()
        .find(|c| matches!(c.class, CornerClass::StrictReentrant))
        .unwrap();
    assert!(c.point.norm() < 1e-12);
    assert!((c.opening_angle - 1.5 * PI).abs() < 1e-9);
}

// --------------------------------------------------------------- distance

#[test]
fn disk_distance_closed_form() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let opts = DistanceOpts::default();
    for k in 1..20 {
        let r = 0.045 * k as f64;
        let x = r * Vec2::from_angle(0.3 + k as f64);
        let d = distance::distance(&dom, &body, x, &opts).unwrap();
        assert!((d - (1.0 - r)).abs() < 1e-10, "d at r={r}");
        if r > 0.02 {
            let g = grad_distance(&dom, &body, x, &opts).unwrap();
            assert!((g + x.unit()).norm() < 1e-8, "grad at r={r}");
            let lap = laplacian_distance(&dom, &body, x, &opts).unwrap();
            assert!((lap + 1.0 / r).abs() < 1e-8 / r, "laplacian at r={r}");
        }
    }
}

#[test]
fn disk_distance_derivatives_match_fd() {
    let dom = disk_domain(1.0);
    let bodies = [ConvexBody::disk(1.0), ConvexBody::ellipse(1.2, 0.8)];
    let opts = DistanceOpts::default();
    for body in &bodies {
        let f = |p: Vec2| distance::boundary_gauge_distance(&dom, body, p, &opts);
        for k in 0..12 {
            let x = (0.15 + 0.05 * (k % 8) as f64) * Vec2::from_angle(0.7 * k as f64);
            let g = grad_distance(&dom, body, x, &opts).unwrap();
            let gfd = fd_grad(&f, x, 1e-6);
            assert!((g - gfd).norm() < 1e-6, "grad fd {:?}", x);
            let h = hess_distance(&dom, body, x, &opts).unwrap();
            let w = v(0.6, -0.8);
            let q = fd_hess_quad(&f, x, w, 1e-4);
            assert!((h.quad(w, w) - q).abs() < 1e-4, "hess fd {:?}", x);
        }
    }
}

#[test]
fn square_domain_multiplicity() {
    let dom = rectangle_domain(-1.0, 1.0, -1.0, 1.0);
    let body = ConvexBody::disk(1.0);
    let opts = DistanceOpts::default();
    // Center is equidistant from all four sides.
    let cp = closest_points(&dom, &body, v(0.0, 0.0), &opts);
    assert_eq!(cp.multiplicity(), 4);
    assert!((cp.distance - 1.0).abs() < 1e-10);
    // On-diagonal points see two sides.
    let cp = closest_points(&dom, &body, v(0.4, 0.4), &opts);
    assert_eq!(cp.multiplicity(), 2);
    // Generic point is unique.
    let cp = closest_points(&dom, &body, v(0.5, 0.2), &opts);
    assert_eq!(cp.multiplicity(), 1);
    assert!((cp.distance - 0.5).abs() < 1e-10);
}

#[test]
fn reentrant_corner_fan_gradient() {
    // L-shaped domain: points in the fan of the reentrant corner at 0 have
    // the corner as unique closest point; derivatives reduce to the gauge.
    let pts = [
        v(0.0, 0.0),
        v(0.0, -2.0),
        v(2.0, -2.0),
        v(2.0, 2.0),
        v(-2.0, 2.0),
        v(-2.0, 0.0),
    ];
    let arcs: Vec<BoundaryArc> = (0..pts.len())
        .map(|i| BoundaryArc::segment(pts[i], pts[(i + 1) % pts.len()]))
        .collect();
    let dom = Domain::new(vec![arcs]).unwrap();
    let body = ConvexBody::ellipse(1.1, 0.9);
    let opts = DistanceOpts::default();
    let x = v(0.5, 0.4); // inside the fan of the corner at the origin
    let cp = closest_points(&dom, &body, x, &opts);
    assert_eq!(cp.multiplicity(), 1);
    assert!(cp.hits[0].point.norm() < 1e-9, "closest point should be the corner");
    let g = grad_distance(&dom, &body, x, &opts).unwrap();
    let gfd = fd_grad(&|p| body.gauge(p), x, 1e-6);
    assert!((g - gfd).norm() < 1e-6);
    let h = hess_distance(&dom, &body, x, &opts).unwrap();
    let w = v(1.0, 0.3);
    let q = fd_hess_quad(&|p| body.gauge(p), x, w, 1e-4);
    assert!((h.quad(w, w) - q).abs() < 1e-4);
}

#[test]
fn ridge_residual_disk2() {
    // disk(2) gauge in the unit disk: residual 1 - kappa_K d = |x|.
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(2.0);
    let opts = DistanceOpts::default();
    for &r in &[0.05, 0.2, 0.5, 0.8] {
        let x = r * Vec2::from_angle(1.1);
        let res = ridge_residual(&dom, &body, x, &opts).unwrap();
        assert!((res - r).abs() < 1e-8, "residual at r={r}: {res}");
    }
}

#[test]
fn field_labels_disk() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(64, 64, [-1.0, 1.0, -1.0, 1.0]);
    // Widen the ridge band to the cell scale so center cells get labeled.
    let opts = DistanceOpts { ridge_band: 2.0 * grid.hx(), ..DistanceOpts::default() };
    let field = sample_field(&dom, &body, grid, &opts);
    // d and dbar agree for a symmetric body; center cells are ridge cells.
    let mut ridge = 0;
    for j in 0..64 {
        for i in 0..64 {
            let idx = grid.idx(i, j);
            assert!((field.d[idx] - field.dbar[idx]).abs() < 1e-9);
            if matches!(
                field.label[idx],
                CellLabel::CurvatureRidge | CellLabel::MultiplicityRidge
            ) {
                ridge += 1;
                assert!(grid.node(i, j).norm() < 0.1, "ridge far from center");
            }
        }
    }
    assert!(ridge >= 1);
}

#[test]
fn csv_roundtrip_header() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(8, 8, [-1.0, 1.0, -1.0, 1.0]);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let mut buf = Vec::new();
    distance::write_field_csv(&field, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# 8 8 "));
    assert_eq!(lines.next().unwrap(), "i,j,x,y,d,dbar,label");
    assert_eq!(lines.count(), 64);
}

// ---------------------------------------------------------------- solver

fn torsion(tau: f64) -> Functional {
    Functional::new(FKind::HalfSquare, GKind::Linear { tau }).unwrap()
}

#[test]
fn torsion_tau1_elastic_small_grid() {
    // tau=1 on the unit disk stays elastic: u = (1 - r^2)/4.
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(96, 96, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let sol = solve_double_obstacle(&disc, &torsion(1.0), &field, &SolverCfg::defaults()).unwrap();
    let mut worst = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if !sol.inside[idx] {
                continue;
            }
            let r2 = grid.node(i, j).norm2();
            worst = worst.max((sol.u[idx] - (1.0 - r2) / 4.0).abs());
        }
    }
    assert!(worst < 4e-3, "tau=1 L-inf error {worst}");
}

#[test]
fn torsion_tau4_free_boundary_small_grid() {
    // tau=4: u = 3/4 - r^2 inside r<1/2, 1-r outside.
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(96, 96, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let sol = solve_double_obstacle(&disc, &torsion(4.0), &field, &SolverCfg::defaults()).unwrap();
    let h = grid.hx();
    let mut worst = 0.0f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if !sol.inside[idx] {
                continue;
            }
            let r = grid.node(i, j).norm();
            let exact = if r < 0.5 { 0.75 - r * r } else { 1.0 - r };
            worst = worst.max((sol.u[idx] - exact).abs());
        }
    }
    assert!(worst < 0.02, "tau=4 L-inf error {worst}");
    // Plastic cells are the outer annulus.
    let regions = classify_regions(&sol, 1e-7);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            let r = grid.node(i, j).norm();
            match regions[idx] {
                Region::PlasticPlus => assert!(r > 0.5 - 3.0 * h, "plastic too deep at r={r}"),
                Region::Elastic => assert!(r < 0.5 + 3.0 * h, "elastic too far at r={r}"),
                _ => {}
            }
        }
    }
}

#[test]
fn penalty_function_shape() {
    let d = 1e-3;
    assert_eq!(beta(-1.0, d), 0.0);
    assert_eq!(beta(0.0, d), 0.0);
    // Quadratic below delta, linear-slope continuation above.
    assert!((beta(d, d) - 1.0).abs() < 1e-12);
    assert!((beta(2.0 * d, d) - 3.0).abs() < 1e-12);
    // C1 at the knee: both one-sided slopes are 2/delta.
    let e = 1e-9;
    let left = (beta(d, d) - beta(d - e, d)) / e;
    let right = (beta(d + e, d) - beta(d, d)) / e;
    let slope = 2.0 / d;
    assert!((left - slope).abs() < 1e-2 * slope);
    assert!((right - slope).abs() < 1e-2 * slope);
}

#[test]
fn penalized_matches_obstacle_tau1() {
    // Fully elastic case: the penalized path should reproduce the obstacle
    // solution up to the mollification scale.
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(96, 96, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let cfg = SolverCfg::defaults();
    let fun = torsion(1.0);
    let so = solve_double_obstacle(&disc, &fun, &field, &cfg).unwrap();
    let obs = build_obstacles(&dom, &body, &field, cfg.eps);
    let sp = solve_penalized(&fun, &obs, &cfg).unwrap();
    let d = sup_diff(&so, &sp);
    assert!(d < 0.12, "penalized vs obstacle sup diff {d}");
}

#[test]
fn obstacle_bounds_respected() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(64, 64, [-1.0, 1.0, -1.0, 1.0]);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let obs = build_obstacles(&dom, &body, &field, 0.02);
    for idx in 0..grid.len() {
        if obs.active[idx] {
            assert!(obs.phi[idx] < obs.psi[idx]);
        }
    }
    // The mollified upper obstacle dominates d - C1 eps and is below d + C1 eps.
    let c1 = body.gauge_bounds.1;
    for idx in 0..grid.len() {
        assert!(obs.psi[idx] >= field.d[idx] - c1 * 0.02 - 1e-9);
        assert!(obs.psi[idx] <= field.d[idx] + c1 * 0.02 + 1e-9);
    }
}

// ---------------------------------------------------------------- verify

#[test]
fn fault_injection_gradient_constraint() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(64, 64, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let cfg = SolverCfg::defaults();
    let mut sol = solve_double_obstacle(&disc, &torsion(4.0), &field, &cfg).unwrap();
    let h = grid.hx();
    let lip = verify::lipschitz_bound(&body);
    let ok = verify::check_gradient_constraint(&sol, &body, 4.0 * h * lip);
    assert_eq!(ok.status, verify::Status::Pass, "honest run must pass");
    for u in &mut sol.u {
        *u *= 1.5;
    }
    let bad = verify::check_gradient_constraint(&sol, &body, 4.0 * h * lip);
    assert_eq!(bad.status, verify::Status::Fail, "scaled run must fail");
}

#[test]
fn zero_solution_passes_trivially() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::disk(1.0);
    let grid = Grid::new(32, 32, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let cfg = SolverCfg::defaults();
    let mut sol = solve_double_obstacle(&disc, &torsion(4.0), &field, &cfg).unwrap();
    sol.u.iter_mut().for_each(|u| *u = 0.0);
    let c = verify::check_gradient_constraint(&sol, &body, 0.0);
    assert_eq!(c.status, verify::Status::Pass);
    assert_eq!(c.measured, 0.0);
}

#[test]
fn square_gauge_skips_strict_convexity_checks() {
    let dom = disk_domain(1.0);
    let body = ConvexBody::square(1.0);
    let grid = Grid::new(64, 64, [-1.0, 1.0, -1.0, 1.0]);
    let disc = Discretization::build(&dom, grid);
    let field = sample_field(&dom, &body, grid, &DistanceOpts::default());
    let cfg = SolverCfg::defaults();
    let fun = torsion(4.0);
    let sol = solve_double_obstacle(&disc, &fun, &field, &cfg).unwrap();
    let report = verify::solution_report(&dom, &body, &disc, &fun, &sol, &field, 1e-7, 0.05);
    // Deterministic: the same inputs give a bit-identical report.
    let report2 = verify::solution_report(&dom, &body, &disc, &fun, &sol, &field, 1e-7, 0.05);
    let j1 = serde_json::to_string(&report).unwrap();
    let j2 = serde_json::to_string(&report2).unwrap();
    assert_eq!(j1, j2);
}

// ---------------------------------------------------------------- problem

const SAMPLE_PROBLEM: &str = r#"
[body]
kind = "disk"
radius = 1.0

[domain]
kind = "disk"
radius = 1.0

[functional]
f = "half_square"
g = "linear"
tau = 4.0

[grid]
nx = 64
ny = 64

[solver]
tol = 1e-9
"#;

#[test]
fn problem_roundtrip() {
    let p = ProblemFile::parse(SAMPLE_PROBLEM).unwrap();
    let echoed = p.to_toml();
    let p2 = ProblemFile::parse(&echoed).unwrap();
    assert_eq!(p, p2);
    let body = p.build_body().unwrap();
    assert!((body.gauge(v(0.5, 0.0)) - 0.5).abs() < 1e-12);
    let dom = p.build_domain().unwrap();
    assert_eq!(dom.contains(v(0.0, 0.0), 1e-12), Location::Inside);
    let grid = p.build_grid(&dom);
    assert_eq!((grid.nx, grid.ny), (64, 64));
    p.build_functional().unwrap();
}

#[test]
fn problem_rejects_unknown_fields() {
    let bad = SAMPLE_PROBLEM.replace("radius = 1.0\n\n[domain]", "radius = 1.0\nbogus = 3\n\n[domain]");
    assert!(ProblemFile::parse(&bad).is_err());
}

// -------------------------------------------------------------- properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_triangle_inequality(ax in -2.0f64..2.0, ay in -2.0f64..2.0,
                                bx in -2.0f64..2.0, by in -2.0f64..2.0) {
        let body = ConvexBody::p_ball(4.0);
        let (x, y) = (v(ax, ay), v(bx, by));
        prop_assert!(body.gauge(x + y) <= body.gauge(x) + body.gauge(y) + 1e-12);
    }

    #[test]
    fn prop_homogeneity(t in 0.01f64..10.0, px in -2.0f64..2.0, py in -2.0f64..2.0) {
        prop_assume!(px.abs() + py.abs() > 1e-3);
        let body = ConvexBody::ellipse(1.5, 0.7);
        let x = v(px, py);
        prop_assert!((body.gauge(t * x) - t * body.gauge(x)).abs() < 1e-9 * (1.0 + t));
    }

    #[test]
    fn prop_cauchy_schwarz(ax in -2.0f64..2.0, ay in -2.0f64..2.0,
                           bx in -2.0f64..2.0, by in -2.0f64..2.0) {
        prop_assume!(ax.abs() + ay.abs() > 1e-3 && bx.abs() + by.abs() > 1e-3);
        let body = ConvexBody::ellipse(1.5, 0.7);
        let (x, y) = (v(ax, ay), v(bx, by));
        prop_assert!(x.dot(y) <= body.gauge(x) * body.polar_gauge(y) + 1e-10);
    }

    #[test]
    fn prop_polygon_gauge_support_duality(px in -2.0f64..2.0, py in -2.0f64..2.0) {
        prop_assume!(px.abs() + py.abs() > 1e-3);
        let body = ConvexBody::square(1.0);
        let x = v(px, py);
        // gauge is the max of <x, n>/h over edges; always <= 1 on K.
        let g = body.gauge(x);
        if g > 0.0 {
            prop_assert!((body.gauge(x / g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prop_distance_monotone_along_normal(r in 0.05f64..0.85, t in 0.0f64..TAU) {
        let dom = disk_domain(1.0);
        let body = ConvexBody::ellipse(1.2, 0.8);
        let opts = DistanceOpts::default();
        let x = r * Vec2::from_angle(t);
        let d0 = distance::distance(&dom, &body, x, &opts).unwrap();
        let x2 = (r + 0.05) * Vec2::from_angle(t);
        let d1 = distance::distance(&dom, &body, x2, &opts).unwrap();
        prop_assert!(d1 < d0);
    }
}
