//! Problem files: a single TOML document with body, domain, functional,
//! grid and solver blocks. Parsing is strict (unknown keys are rejected) and
//! the parsed structure round-trips through `to_toml`.

use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::distance::DistanceOpts;
use crate::domain::{
    annulus_sector_domain, disk_domain, rectangle_domain, BoundaryArc, Domain,
};
use crate::geom::v;
use crate::grid::Grid;
use crate::solver::{FKind, Functional, GKind, SolverCfg};

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("cannot parse problem file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ProblemError {
    ProblemError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BodyBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArcRecord {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xmin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ymin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ymax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fillet: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loops: Option<Vec<Vec<ArcRecord>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FunctionalBlock {
    pub f: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a11: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a22: Option<f64>,
    pub g: String,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge_band: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub body: BodyBlock,
    pub domain: DomainBlock,
    pub functional: FunctionalBlock,
    pub grid: GridBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, ProblemError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files always serialize")
    }

    pub fn build_body(&self) -> Result<ConvexBody, ProblemError> {
        let b = &self.body;
        match b.kind.as_str() {
            "disk" => Ok(ConvexBody::disk(
                b.radius.ok_or_else(|| invalid("disk body needs `radius`"))?,
            )),
            "ellipse" => Ok(ConvexBody::ellipse(
                b.a.ok_or_else(|| invalid("ellipse body needs `a`"))?,
                b.b.ok_or_else(|| invalid("ellipse body needs `b`"))?,
            )),
            "p_ball" => Ok(ConvexBody::p_ball(
                b.p.ok_or_else(|| invalid("p_ball body needs `p`"))?,
            )),
            "square" => Ok(ConvexBody::square(b.half_width.unwrap_or(1.0))),
            "polygon" => {
                let vs = b
                    .vertices
                    .as_ref()
                    .ok_or_else(|| invalid("polygon body needs `vertices`"))?
                    .iter()
                    .map(|&[x, y]| v(x, y))
                    .collect();
                ConvexBody::polygon(vs).map_err(|e| invalid(e.to_string()))
            }
            other => Err(invalid(format!("unknown body kind `{other}`"))),
        }
    }

    pub fn build_domain(&self) -> Result<Domain, ProblemError> {
        let d = &self.domain;
        match d.kind.as_str() {
            "disk" => Ok(disk_domain(
                d.radius.ok_or_else(|| invalid("disk domain needs `radius`"))?,
            )),
            "rectangle" => Ok(rectangle_domain(
                d.xmin.ok_or_else(|| invalid("rectangle needs `xmin`"))?,
                d.xmax.ok_or_else(|| invalid("rectangle needs `xmax`"))?,
                d.ymin.ok_or_else(|| invalid("rectangle needs `ymin`"))?,
                d.ymax.ok_or_else(|| invalid("rectangle needs `ymax`"))?,
            )),
            "annulus_sector" => annulus_sector_domain(
                d.r_in.ok_or_else(|| invalid("annulus_sector needs `r_in`"))?,
                d.r_out.ok_or_else(|| invalid("annulus_sector needs `r_out`"))?,
                d.angle0.ok_or_else(|| invalid("annulus_sector needs `angle0`"))?,
                d.angle1.ok_or_else(|| invalid("annulus_sector needs `angle1`"))?,
                d.fillet.ok_or_else(|| invalid("annulus_sector needs `fillet`"))?,
            )
            .map_err(|e| invalid(e.to_string())),
            "loops" => {
                let loops = d
                    .loops
                    .as_ref()
                    .ok_or_else(|| invalid("loops domain needs `loops`"))?;
                let mut built = Vec::new();
                for lp in loops {
                    let mut arcs = Vec::new();
                    for rec in lp {
                        arcs.push(build_arc(rec)?);
                    }
                    built.push(arcs);
                }
                Domain::new(built).map_err(|e| invalid(e.to_string()))
            }
            other => Err(invalid(format!("unknown domain kind `{other}`"))),
        }
    }

    pub fn build_functional(&self) -> Result<Functional, ProblemError> {
        let fb = &self.functional;
        let f = match fb.f.as_str() {
            "half_square" => FKind::HalfSquare,
            "quadratic_form" => FKind::QuadraticForm {
                a11: fb.a11.ok_or_else(|| invalid("quadratic_form needs `a11`"))?,
                a12: fb.a12.unwrap_or(0.0),
                a22: fb.a22.ok_or_else(|| invalid("quadratic_form needs `a22`"))?,
            },
            other => return Err(invalid(format!("unknown integrand `{other}`"))),
        };
        let g = match fb.g.as_str() {
            "linear" => GKind::Linear { tau: fb.tau },
            "quadratic" => GKind::Quadratic { c: fb.c.unwrap_or(1.0), tau: fb.tau },
            other => return Err(invalid(format!("unknown lower-order term `{other}`"))),
        };
        Functional::new(f, g).map_err(|e| invalid(e.to_string()))
    }

    pub fn build_grid(&self, domain: &Domain) -> Grid {
        let bbox = self.grid.bbox.unwrap_or(domain.bbox);
        Grid::new(self.grid.nx, self.grid.ny, bbox)
    }

    pub fn solver_cfg(&self) -> SolverCfg {
        let mut cfg = SolverCfg::defaults();
        if let Some(s) = &self.solver {
            if let Some(v) = s.max_iters {
                cfg.max_iters = v;
            }
            if let Some(v) = s.tol {
                cfg.tol = v;
            }
            if let Some(v) = s.eps {
                cfg.eps = v;
            }
            if let Some(v) = s.delta {
                cfg.delta = v;
            }
        }
        cfg
    }

    pub fn distance_opts(&self) -> DistanceOpts {
        let mut opts = DistanceOpts::default();
        if let Some(s) = &self.solver {
            if let Some(v) = s.ridge_band {
                opts.ridge_band = v;
            }
        }
        opts
    }
}

fn build_arc(rec: &ArcRecord) -> Result<BoundaryArc, ProblemError> {
    match rec.kind.as_str() {
        "segment" => {
            let p0 = rec.p0.ok_or_else(|| invalid("segment needs `p0`"))?;
            let p1 = rec.p1.ok_or_else(|| invalid("segment needs `p1`"))?;
            Ok(BoundaryArc::segment(v(p0[0], p0[1]), v(p1[0], p1[1])))
        }
        "circular" => {
            let c = rec.center.ok_or_else(|| invalid("circular arc needs `center`"))?;
            Ok(BoundaryArc::circular(
                v(c[0], c[1]),
                rec.radius.ok_or_else(|| invalid("circular arc needs `radius`"))?,
                rec.angle0.ok_or_else(|| invalid("circular arc needs `angle0`"))?,
                rec.angle1.ok_or_else(|| invalid("circular arc needs `angle1`"))?,
            ))
        }
        other => Err(invalid(format!("unknown arc kind `{other}`"))),
    }
}
