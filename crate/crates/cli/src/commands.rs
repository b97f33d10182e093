//! Command implementations. Each returns the process exit code: 0 for
//! success or a passing check, 1 for a failing check, while usage and
//! numeric errors surface as `Err` and are classified in main.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use liftlab_core::catalog::ModelSpec;
use liftlab_core::chart::BundlePoint;
use liftlab_core::dynamics::{
    flow_pushforward_check, integrate, jacobi_direct, jacobi_via_lift, variation_field,
    FlowStatus, Trajectory, VariationConfig,
};
use liftlab_core::fields::{check_homogeneous_scalar, ScalarField, VectorField};
use liftlab_core::sampling::{sample_points, sample_slashed};
use liftlab_core::semispray::{projective_factor, projective_rigidity_check, Semispray};
use liftlab_core::output::{trajectory_csv, TrajectoryRecord};
use liftlab_core::{suite, symmetry};
use serde_json::json;

use crate::config::{JacobiSection, RunConfig};

pub fn version_string() -> String {
    format!("liftlab {}", env!("CARGO_PKG_VERSION"))
}

/// Write failure on a result artifact: exit code 3, unlike config reads.
#[derive(Debug)]
pub struct OutputIo {
    pub path: PathBuf,
    pub source: std::io::Error,
}

impl std::fmt::Display for OutputIo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "writing {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputIo {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn write_output(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|source| {
        anyhow::Error::new(OutputIo {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn csv_path(cfg: &RunConfig) -> Option<&Path> {
    cfg.output.as_ref().and_then(|o| o.csv.as_deref())
}

fn json_path(cfg: &RunConfig) -> Option<&Path> {
    cfg.output.as_ref().and_then(|o| o.json.as_deref())
}

/// Reports go to the configured path, otherwise to standard output.
fn emit_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_output(&text, p),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_for_status(status: &FlowStatus) -> i32 {
    if status.completed() {
        0
    } else {
        3
    }
}

/// CSV to the configured path or standard output; the record JSON (config
/// echo, status, version) to the configured path or a single diagnostic
/// line on standard error, so the status is visible even for an empty
/// trajectory.
fn emit_trajectory(
    traj: &Trajectory,
    level: u8,
    n: usize,
    cfg: &RunConfig,
    command: &str,
) -> Result<()> {
    let csv = trajectory_csv(traj, level, n)?;
    match csv_path(cfg) {
        Some(p) => write_output(&csv, p)?,
        None => print!("{csv}"),
    }
    let value = json!({
        "version": version_string(),
        "command": command,
        "config": cfg,
        "record": TrajectoryRecord::new(traj, level, n),
    });
    match json_path(cfg) {
        Some(p) => {
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            write_output(&text, p)?;
        }
        None => eprintln!("{}", serde_json::to_string(&value)?),
    }
    Ok(())
}

pub fn geodesic(cfg: &RunConfig) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let sec = cfg
        .geodesic
        .as_ref()
        .ok_or_else(|| anyhow!("config needs a [geodesic] section with x0 and v0"))?;
    let n = spray.n();
    let mut init = sec.x0.clone();
    init.extend_from_slice(&sec.v0);
    let p0 = BundlePoint::new(1, n, init)?;
    let traj = integrate(&spray.as_vector_field(), &p0, &cfg.integrator, None)?;
    let code = exit_for_status(&traj.status);
    emit_trajectory(&traj, 1, n, cfg, "geodesic")?;
    Ok(code)
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Route {
    /// Coupled geodesic and variational equations downstairs.
    Direct,
    /// Flow of the complete lift upstairs, projected back.
    Lift,
    /// Both routes, compared.
    Both,
    /// Finite-difference geodesic variation.
    Variation,
}

fn lifted_initial(sec: &JacobiSection, n: usize) -> Result<BundlePoint> {
    let mut xi = sec.x0.clone();
    xi.extend_from_slice(&sec.j0);
    xi.extend_from_slice(&sec.v0);
    xi.extend_from_slice(&sec.jdot0);
    Ok(BundlePoint::new(2, n, xi)?)
}

fn sup_difference(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut sup = 0.0f64;
    for (p, q) in a.points.iter().zip(&b.points) {
        for (x, y) in p.coords().iter().zip(q.coords()) {
            sup = sup.max((x - y).abs());
        }
    }
    sup
}

pub fn jacobi(cfg: &RunConfig, route: Route) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let sec = cfg.jacobi.as_ref().ok_or_else(|| {
        anyhow!("config needs a [jacobi] section with x0, v0, j0, and jdot0")
    })?;
    let n = spray.n();
    match route {
        Route::Direct => {
            let traj = jacobi_direct(&spray, &sec.x0, &sec.v0, &sec.j0, &sec.jdot0, &cfg.integrator)?;
            let code = exit_for_status(&traj.status);
            emit_trajectory(&traj, 1, n, cfg, "jacobi --route direct")?;
            Ok(code)
        }
        Route::Lift => {
            let traj = jacobi_via_lift(&spray, &lifted_initial(sec, n)?, &cfg.integrator)?;
            let code = exit_for_status(&traj.status);
            emit_trajectory(&traj, 1, n, cfg, "jacobi --route lift")?;
            Ok(code)
        }
        Route::Variation => {
            let vcfg = VariationConfig {
                s_offset: sec.s_offset,
                stencil: sec.stencil,
            };
            let traj = variation_field(&spray, &lifted_initial(sec, n)?, &vcfg, &cfg.integrator)?;
            let code = exit_for_status(&traj.status);
            emit_trajectory(&traj, 1, n, cfg, "jacobi --route variation")?;
            Ok(code)
        }
        Route::Both => {
            let direct =
                jacobi_direct(&spray, &sec.x0, &sec.v0, &sec.j0, &sec.jdot0, &cfg.integrator)?;
            let lifted = jacobi_via_lift(&spray, &lifted_initial(sec, n)?, &cfg.integrator)?;
            let sup = sup_difference(&direct, &lifted);
            let both_completed = direct.status.completed() && lifted.status.completed();
            let pass = both_completed && sup <= sec.tol;
            let value = json!({
                "version": version_string(),
                "command": "jacobi --route both",
                "config": cfg,
                "sup_difference": sup,
                "tol": sec.tol,
                "direct_status": direct.status,
                "lift_status": lifted.status,
                "pass": pass,
            });
            emit_json(&value, json_path(cfg))?;
            Ok(if !both_completed {
                3
            } else if pass {
                0
            } else {
                1
            })
        }
    }
}

fn lift_points(
    cfg: &RunConfig,
    level: u8,
    n: usize,
) -> Result<Vec<BundlePoint>> {
    let sec = cfg
        .lift
        .as_ref()
        .ok_or_else(|| anyhow!("config needs a [lift] section with points or count"))?;
    if !sec.points.is_empty() {
        return sec
            .points
            .iter()
            .map(|coords| Ok(BundlePoint::new(level, n, coords.clone())?))
            .collect();
    }
    let count = sec
        .count
        .ok_or_else(|| anyhow!("the [lift] section needs points or a count"))?;
    Ok(sample_slashed(level, n, count, cfg.seed()))
}

pub fn lift(cfg: &RunConfig) -> Result<i32> {
    let spec = cfg.model()?.build()?;
    let n = spec.n();
    let (object, level, points, values) = match &spec {
        ModelSpec::Semispray(s) => {
            let lifted = s.complete_lift()?;
            let points = lift_points(cfg, 2, n)?;
            let values = eval_coeffs(&lifted, &points)?;
            ("semispray-coefficients", 2u8, points, values)
        }
        ModelSpec::Connection(c) => {
            let lifted = c.complete_lift_spray()?;
            let points = lift_points(cfg, 2, n)?;
            let values = eval_coeffs(&lifted, &points)?;
            ("spray-coefficients", 2u8, points, values)
        }
        ModelSpec::Metric(m) => {
            let lifted = m.complete_lift()?;
            let points = lift_points(cfg, 1, n)?;
            let values = points
                .iter()
                .map(|p| lifted.values(p.coords()))
                .collect::<liftlab_core::Result<Vec<_>>>()?;
            ("metric-entries", 1u8, points, values)
        }
        ModelSpec::Lagrangian(l) => {
            let lifted = l.complete_lift()?;
            let points = lift_points(cfg, 2, n)?;
            let values = points
                .iter()
                .map(|p| Ok(vec![lifted.field().value(p)?]))
                .collect::<liftlab_core::Result<Vec<_>>>()?;
            ("lagrangian-value", 2u8, points, values)
        }
    };
    let coords: Vec<Vec<f64>> = points.iter().map(|p| p.coords().to_vec()).collect();
    let value = json!({
        "version": version_string(),
        "command": "lift",
        "config": cfg,
        "object": object,
        "n": n,
        "point_level": level,
        "points": coords,
        "values": values,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(0)
}

fn eval_coeffs(s: &Semispray, points: &[BundlePoint]) -> Result<Vec<Vec<f64>>> {
    points
        .iter()
        .map(|p| {
            s.coeffs()
                .iter()
                .map(|c| Ok(c.value(p)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

fn check_tol(cfg: &RunConfig, fallback: f64) -> f64 {
    cfg.check.as_ref().and_then(|c| c.tol).unwrap_or(fallback)
}

fn check_count(cfg: &RunConfig) -> usize {
    cfg.check.as_ref().and_then(|c| c.count).unwrap_or(100)
}

pub fn check_identities(json_out: Option<&Path>) -> Result<i32> {
    let results: Vec<_> = ["kappa-identities", "lift-algebra"]
        .iter()
        .map(|name| suite::run_named(name).expect("compiled-in criterion"))
        .collect();
    let pass = results.iter().all(|r| r.passed);
    let value = json!({
        "version": version_string(),
        "command": "check identities",
        "criteria": results,
        "pass": pass,
    });
    emit_json(&value, json_out)?;
    Ok(if pass { 0 } else { 1 })
}

pub fn check_homogeneity(cfg: &RunConfig) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let n = spray.n();
    let degree = cfg.check.as_ref().and_then(|c| c.degree).unwrap_or(2.0);
    let tol = check_tol(cfg, 1e-9);
    let samples = sample_slashed(1, n, check_count(cfg), cfg.seed());
    let mut reports = Vec::new();
    let mut pass = true;
    for coeff in spray.coeffs() {
        let rep = check_homogeneous_scalar(coeff, degree, &samples, tol)?;
        pass &= rep.pass;
        reports.push(rep);
    }
    let value = json!({
        "version": version_string(),
        "command": "check homogeneity",
        "config": cfg,
        "degree": degree,
        "coefficients": reports,
        "pass": pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn check_spray(cfg: &RunConfig) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let n = spray.n();
    let tol = check_tol(cfg, 1e-9);
    let count = check_count(cfg);
    let base = spray.is_spray(&sample_slashed(1, n, count, cfg.seed()), tol)?;
    let lifted = spray
        .complete_lift()?
        .is_spray(&sample_slashed(2, n, count, cfg.seed() + 1), tol)?;
    let pass = base.pass && lifted.pass;
    let value = json!({
        "version": version_string(),
        "command": "check spray",
        "config": cfg,
        "base": base,
        "lifted": lifted,
        "pass": pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn check_projective(cfg: &RunConfig) -> Result<i32> {
    let first = cfg.model()?.build()?.semispray()?;
    let other = cfg
        .check
        .as_ref()
        .and_then(|c| c.other.as_ref())
        .ok_or_else(|| anyhow!("the projective check needs a [check.other] model"))?
        .build()?
        .semispray()?;
    let n = first.n();
    let tol = check_tol(cfg, 1e-9);
    let count = check_count(cfg);
    let base_samples = sample_slashed(1, n, count, cfg.seed());
    let lifted_samples = sample_slashed(2, n, count, cfg.seed() + 1);
    let factor = projective_factor(&first, &other, &base_samples, tol)?;
    let rigidity = projective_rigidity_check(&first, &other, &base_samples, &lifted_samples, tol)?;
    let p_at = match &factor {
        Some(pf) => Some(
            base_samples
                .iter()
                .take(5)
                .map(|p| pf.field.value(p))
                .collect::<liftlab_core::Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    let factor_detail = factor.as_ref().map(|pf| {
        json!({
            "max_cross_residual": pf.max_cross_residual,
            "homogeneity": pf.homogeneity,
        })
    });
    let value = json!({
        "version": version_string(),
        "command": "check projective",
        "config": cfg,
        "related": factor.is_some(),
        "P_at": p_at,
        "factor": factor_detail,
        "rigidity": rigidity,
        "pass": rigidity.pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if rigidity.pass { 0 } else { 1 })
}

fn field_sources(cfg: &RunConfig) -> Result<Vec<String>> {
    cfg.check
        .as_ref()
        .and_then(|c| c.field.clone())
        .ok_or_else(|| anyhow!("this check needs a [check] field entry with component expressions"))
}

pub fn check_symmetry(cfg: &RunConfig) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let n = spray.n();
    let sources = field_sources(cfg)?;
    let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
    let a = VectorField::from_sources(0, n, &refs)?;
    let count = check_count(cfg);
    let base_samples = sample_slashed(1, n, count, cfg.seed());
    let lifted_samples = sample_slashed(2, n, count, cfg.seed() + 1);
    let rep = symmetry::lift_symmetry(&spray, &a, &base_samples, &lifted_samples, None)?;
    let pass = rep.pass;
    let value = json!({
        "version": version_string(),
        "command": "check symmetry",
        "config": cfg,
        "report": rep,
        "pass": pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn check_conserved(cfg: &RunConfig) -> Result<i32> {
    let spray = cfg.model()?.build()?.semispray()?;
    let n = spray.n();
    let source = cfg
        .check
        .as_ref()
        .and_then(|c| c.function.clone())
        .ok_or_else(|| anyhow!("the conserved check needs a [check] function expression"))?;
    let f = ScalarField::from_source(1, n, &source)?;
    let count = check_count(cfg);
    let base_samples = sample_points(1, n, count, cfg.seed(), -2.0, 2.0, 0.5);
    let lifted_samples = sample_points(2, n, count, cfg.seed() + 1, -2.0, 2.0, 0.5);
    let base_flow = match &cfg.geodesic {
        Some(sec) => {
            let mut init = sec.x0.clone();
            init.extend_from_slice(&sec.v0);
            Some(integrate(
                &spray.as_vector_field(),
                &BundlePoint::new(1, n, init)?,
                &cfg.integrator,
                None,
            )?)
        }
        None => None,
    };
    let lifted_flow = match &cfg.jacobi {
        Some(sec) => Some(integrate(
            &spray.complete_lift()?.as_vector_field(),
            &lifted_initial(sec, n)?,
            &cfg.integrator,
            None,
        )?),
        None => None,
    };
    let rep = symmetry::lift_constant(
        &spray,
        &f,
        &base_samples,
        &lifted_samples,
        base_flow.as_ref(),
        lifted_flow.as_ref(),
    )?;
    let pass = rep.pass;
    let value = json!({
        "version": version_string(),
        "command": "check conserved",
        "config": cfg,
        "report": rep,
        "pass": pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn check_flow(cfg: &RunConfig) -> Result<i32> {
    let sources = field_sources(cfg)?;
    let n = sources.len();
    let refs: Vec<&str> = sources.iter().map(String::as_str).collect();
    let a = VectorField::from_sources(0, n, &refs)?;
    let sec = cfg
        .check
        .as_ref()
        .ok_or_else(|| anyhow!("the flow check needs a [check] section"))?;
    let xi = sec
        .xi
        .clone()
        .ok_or_else(|| anyhow!("the flow check needs a [check] xi initial condition"))?;
    let t = sec.t.unwrap_or(cfg.integrator.t_span.1);
    let tol = check_tol(cfg, 1e-6);
    let rep = flow_pushforward_check(&a, t, &BundlePoint::new(1, n, xi)?, &cfg.integrator, None)?;
    let pass = rep.domains_consistent && rep.residual.is_none_or(|r| r <= tol);
    let value = json!({
        "version": version_string(),
        "command": "check flow",
        "config": cfg,
        "report": rep,
        "tol": tol,
        "pass": pass,
    });
    emit_json(&value, json_path(cfg))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn suite(json_out: Option<&Path>) -> Result<i32> {
    let results = suite::run_all();
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("criterion {:02} {}: {} ({})", r.index, r.name, verdict, r.detail);
    }
    let pass = results.iter().all(|r| r.passed);
    if let Some(path) = json_out {
        let value = json!({
            "version": version_string(),
            "command": "suite",
            "criteria": results,
            "pass": pass,
        });
        emit_json(&value, Some(path))?;
    }
    Ok(if pass { 0 } else { 1 })
}
