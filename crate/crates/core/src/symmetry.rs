//! Conserved quantities and Lie symmetries of semisprays, their behavior
//! under vertical and complete lifts, and energy conservation for
//! Lagrangian semisprays.

use crate::chart::BundlePoint;
use crate::dynamics::{integrate, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{lie_bracket, ScalarField, VectorField};
use crate::models::Lagrangian;
use crate::semispray::Semispray;

/// Tolerance for jet-based pointwise residuals.
pub const POINTWISE_TOL: f64 = 1e-9;
/// Tolerance for the structural lift identities, which hold exactly.
pub const LIFT_IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for drifts accumulated along integrated flows.
pub const DRIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConservationReport {
    /// Max |X(f)| over the sample set.
    pub residual_pointwise: f64,
    /// Max |f(c(t)) - f(c(0))| along the supplied flow, when given.
    pub drift_along_flow: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SymmetryReport {
    /// Max infinity norm of the Lie bracket over the sample set.
    pub bracket_residual: f64,
    pub pass: bool,
}

fn max_scalar_abs(f: &ScalarField, samples: &[BundlePoint]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        worst = worst.max(f.value(p)?.abs());
    }
    Ok(worst)
}

fn max_vector_abs(v: &VectorField, samples: &[BundlePoint]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        for c in v.value(p)? {
            worst = worst.max(c.abs());
        }
    }
    Ok(worst)
}

fn drift(f: &ScalarField, flow: &Trajectory) -> Result<f64> {
    let first = flow
        .points
        .first()
        .ok_or_else(|| Error::Input("drift check needs a nonempty trajectory".into()))?;
    let reference = f.value(first)?;
    let mut worst = 0.0f64;
    for p in &flow.points {
        worst = worst.max((f.value(p)? - reference).abs());
    }
    Ok(worst)
}

/// Checks that `f` is constant along the flow of `field`: pointwise via
/// the derivation X(f) over the samples, and optionally as a drift along
/// an integrated trajectory.
pub fn check_constant(
    field: &VectorField,
    f: &ScalarField,
    samples: &[BundlePoint],
    flow: Option<&Trajectory>,
) -> Result<ConservationReport> {
    let derivative = field.apply(f)?;
    let residual_pointwise = max_scalar_abs(&derivative, samples)?;
    let drift_along_flow = flow.map(|tr| drift(f, tr)).transpose()?;
    let pass = residual_pointwise < POINTWISE_TOL
        && drift_along_flow.is_none_or(|d| d < DRIFT_TOL);
    Ok(ConservationReport {
        residual_pointwise,
        drift_along_flow,
        pass,
    })
}

/// Checks that the field `a`, living one level below, generates a Lie
/// symmetry of `field`: the bracket [field, a^c] vanishes on the samples.
pub fn check_lie_symmetry(
    field: &VectorField,
    a: &VectorField,
    samples: &[BundlePoint],
) -> Result<SymmetryReport> {
    if a.level() + 1 != field.level() || a.n() != field.n() {
        return Err(Error::LevelMismatch(
            "symmetry candidate must live one level below the field".into(),
        ));
    }
    let bracket = lie_bracket(field, &a.clift()?)?;
    let bracket_residual = max_vector_abs(&bracket, samples)?;
    Ok(SymmetryReport {
        pass: bracket_residual < POINTWISE_TOL,
        bracket_residual,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LiftedConservationReport {
    /// f along the semispray itself.
    pub base: ConservationReport,
    /// f^v along the complete lift.
    pub vlift: ConservationReport,
    /// f^c along the complete lift.
    pub clift: ConservationReport,
    pub pass: bool,
}

/// Lifts a conserved quantity: if S(f) = 0 then both f^v and f^c are
/// constants of the complete lift. Base samples live at the semispray's
/// level, lifted samples one above; the optional flows supply drifts.
pub fn lift_constant(
    s: &Semispray,
    f: &ScalarField,
    base_samples: &[BundlePoint],
    lifted_samples: &[BundlePoint],
    base_flow: Option<&Trajectory>,
    lifted_flow: Option<&Trajectory>,
) -> Result<LiftedConservationReport> {
    let base = check_constant(&s.as_vector_field(), f, base_samples, base_flow)?;
    let lifted = s.complete_lift()?.as_vector_field();
    let vlift = check_constant(&lifted, &f.vlift()?, lifted_samples, lifted_flow)?;
    let clift = check_constant(&lifted, &f.clift()?, lifted_samples, lifted_flow)?;
    let pass = base.pass && vlift.pass && clift.pass;
    Ok(LiftedConservationReport {
        base,
        vlift,
        clift,
        pass,
    })
}

/// Max residual of the derivation identities S^c(f^v) = (S(f))^v and
/// S^c(f^c) = (S(f))^c over the lifted samples. These hold for every f,
/// conserved or not.
pub fn lift_derivation_residual(
    s: &Semispray,
    f: &ScalarField,
    lifted_samples: &[BundlePoint],
) -> Result<f64> {
    let svf = s.as_vector_field();
    let lifted = s.complete_lift()?.as_vector_field();
    let sf = svf.apply(f)?;
    let mut worst = 0.0f64;
    for (lhs, rhs) in [
        (lifted.apply(&f.vlift()?)?, sf.vlift()?),
        (lifted.apply(&f.clift()?)?, sf.clift()?),
    ] {
        let diff = ScalarField::difference(lhs, rhs)?;
        worst = worst.max(max_scalar_abs(&diff, lifted_samples)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LiftedSymmetryReport {
    /// [S, A^c] at the semispray's level.
    pub base: SymmetryReport,
    /// Max |[S^c, (A^c)^v]| over the lifted samples.
    pub vlift_bracket: f64,
    /// Max |[S^c, (A^c)^c]| over the lifted samples.
    pub clift_bracket: f64,
    /// Sup distance between translated geodesics and geodesics from
    /// translated initial conditions, when the spot check ran.
    pub translated_sup: Option<f64>,
    pub pass: bool,
}

/// Lifts a Lie symmetry: if [S, A^c] = 0 then both (A^c)^v and (A^c)^c
/// commute with S^c. Optionally spot-checks that the phase flow of A^c
/// maps integral curves of S to integral curves: `translation` supplies
/// the phase initial condition, the symmetry flow time, and the
/// integrator setup.
pub fn lift_symmetry(
    s: &Semispray,
    a: &VectorField,
    base_samples: &[BundlePoint],
    lifted_samples: &[BundlePoint],
    translation: Option<(&BundlePoint, f64, &IntegratorConfig)>,
) -> Result<LiftedSymmetryReport> {
    let svf = s.as_vector_field();
    let base = check_lie_symmetry(&svf, a, base_samples)?;
    let ac = a.clift()?;
    let lifted = s.complete_lift()?.as_vector_field();
    let vlift_bracket = max_vector_abs(&lie_bracket(&lifted, &ac.vlift()?)?, lifted_samples)?;
    let clift_bracket = max_vector_abs(&lie_bracket(&lifted, &ac.clift()?)?, lifted_samples)?;
    let translated_sup = translation
        .map(|(xi0, flow_time, cfg)| translated_trajectory_sup(&svf, &ac, xi0, flow_time, cfg))
        .transpose()?;
    let pass = base.pass
        && vlift_bracket < POINTWISE_TOL
        && clift_bracket < POINTWISE_TOL
        && translated_sup.is_none_or(|d| d < DRIFT_TOL);
    Ok(LiftedSymmetryReport {
        base,
        vlift_bracket,
        clift_bracket,
        translated_sup,
        pass,
    })
}

/// Flows xi0 by the symmetry's phase lift, runs the semispray flow from
/// both points, and compares translating-then-flowing with
/// flowing-then-translating at a thinned set of sample times.
fn translated_trajectory_sup(
    svf: &VectorField,
    ac: &VectorField,
    xi0: &BundlePoint,
    flow_time: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(flow_time > 0.0) {
        return Err(Error::Input("symmetry flow time must be positive".into()));
    }
    let shift_cfg = cfg.clone().with_span(0.0, flow_time);
    let shift = |p: &BundlePoint| -> Result<BundlePoint> {
        let tr = integrate(ac, p, &shift_cfg, None)?;
        tr.end()
            .cloned()
            .ok_or_else(|| Error::Input("symmetry flow produced no samples".into()))
    };
    let original = integrate(svf, xi0, cfg, None)?;
    let translated = integrate(svf, &shift(xi0)?, cfg, None)?;
    if !(original.status.completed() && translated.status.completed()) {
        return Err(Error::Input(
            "translated-trajectory check needs both flows to complete".into(),
        ));
    }
    let stride = (original.points.len() / 16).max(1);
    let mut worst = 0.0f64;
    for i in (0..original.points.len()).step_by(stride) {
        let moved = shift(&original.points[i])?;
        for (x, y) in moved.coords().iter().zip(translated.points[i].coords()) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyReport {
    /// Max |S(E)| over the base samples.
    pub pointwise_residual: f64,
    /// E along the Lagrangian semispray's flow.
    pub drift_base: f64,
    /// E^v along the complete lift's flow.
    pub drift_vlift: f64,
    /// E^c along the complete lift's flow.
    pub drift_clift: f64,
    /// Energy of the lifted Lagrangian along the same flow.
    pub drift_lifted_energy: f64,
    /// Max |E^c - E_lifted| over the lifted samples.
    pub lift_identity_residual: f64,
    pub pass: bool,
}

/// Energy conservation for a Lagrangian semispray, upstairs and down: the
/// energy is conserved, its lifts are conserved by the complete lift, and
/// the complete lift of the energy is the energy of the lifted Lagrangian.
pub fn energy_conservation_suite(
    l: &Lagrangian,
    phase0: &BundlePoint,
    lifted0: &BundlePoint,
    cfg: &IntegratorConfig,
    base_samples: &[BundlePoint],
    lifted_samples: &[BundlePoint],
) -> Result<EnergyReport> {
    let s = l.semispray()?;
    let svf = s.as_vector_field();
    let energy = l.energy()?;
    let pointwise_residual = max_scalar_abs(&svf.apply(&energy)?, base_samples)?;
    let base_flow = integrate(&svf, phase0, cfg, None)?;
    let drift_base = drift(&energy, &base_flow)?;
    let lifted_field = s.complete_lift()?.as_vector_field();
    let lifted_flow = integrate(&lifted_field, lifted0, cfg, None)?;
    let drift_vlift = drift(&energy.vlift()?, &lifted_flow)?;
    let energy_clift = energy.clift()?;
    let drift_clift = drift(&energy_clift, &lifted_flow)?;
    let lifted_energy = l.complete_lift()?.energy()?;
    let drift_lifted_energy = drift(&lifted_energy, &lifted_flow)?;
    let identity = ScalarField::difference(energy_clift, lifted_energy)?;
    let lift_identity_residual = max_scalar_abs(&identity, lifted_samples)?;
    let pass = pointwise_residual < POINTWISE_TOL
        && drift_base < DRIFT_TOL
        && drift_vlift < DRIFT_TOL
        && drift_clift < DRIFT_TOL
        && drift_lifted_energy < DRIFT_TOL
        && lift_identity_residual < LIFT_IDENTITY_TOL;
    Ok(EnergyReport {
        pointwise_residual,
        drift_base,
        drift_vlift,
        drift_clift,
        drift_lifted_energy,
        lift_identity_residual,
        pass,
    })
}
