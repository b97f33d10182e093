//! Deterministic self-check battery: eleven criteria spanning the chart
//! layer, the lift algebra, both Jacobi routes, flow pushforwards, model
//! lift commutation, spray structure, projective recovery, energy
//! conservation, closed-form integration oracles, and the parser. Every
//! criterion uses fixed seeds and compiled-in models, so repeated runs
//! produce identical results.

use crate::catalog;
use crate::chart::{dprojection, kappa, project, BundlePoint};
use crate::dynamics::{
    flow_pushforward_check, geodesic, integrate, jacobi_direct, jacobi_via_lift, variation_field,
    FlowStatus, IntegratorConfig, Stencil, VariationConfig,
};
use crate::error::{Error, Result};
use crate::fields::{lie_bracket, ScalarField, VectorField};
use crate::models::{max_coeff_difference, Connection};
use crate::sampling::{sample_points, sample_slashed};
use crate::semispray::{is_semispray, projective_factor, projective_rigidity_check, Semispray};
use crate::symmetry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 11] = [
    ("kappa-identities", kappa_identities),
    ("lift-algebra", lift_algebra),
    ("jacobi-routes", jacobi_routes),
    ("variation-field", variation_convergence),
    ("flow-pushforward", flow_pushforward),
    ("model-lift-commutation", model_lift_commutation),
    ("spray-structure", spray_structure),
    ("projective-recovery", projective_recovery),
    ("energy-conservation", energy_conservation),
    ("integration-oracles", integration_oracles),
    ("parser-and-jets", parser_and_jets),
];

fn run_check(index: usize, name: &'static str, check: Check) -> CriterionResult {
    match check() {
        Ok((passed, detail)) => CriterionResult {
            index,
            name,
            passed,
            detail,
        },
        Err(e) => CriterionResult {
            index,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs all criteria in order. Construction or evaluation errors inside a
/// criterion mark it failed rather than aborting the battery.
pub fn run_all() -> Vec<CriterionResult> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| run_check(i + 1, name, *check))
        .collect()
}

/// Runs a single criterion by name, if it exists.
pub fn run_named(name: &str) -> Option<CriterionResult> {
    CHECKS
        .iter()
        .enumerate()
        .find(|(_, (candidate, _))| *candidate == name)
        .map(|(i, (candidate, check))| run_check(i + 1, candidate, *check))
}

/// The criterion names in battery order.
pub fn criterion_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(name, _)| *name).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}

fn max_scalar_rel(a: &ScalarField, b: &ScalarField, samples: &[BundlePoint]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        worst = worst.max(rel(a.value(p)?, b.value(p)?));
    }
    Ok(worst)
}

fn max_vector_rel(a: &VectorField, b: &VectorField, samples: &[BundlePoint]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in samples {
        let av = a.value(p)?;
        let bv = b.value(p)?;
        for (x, y) in av.iter().zip(&bv) {
            worst = worst.max(rel(*x, *y));
        }
    }
    Ok(worst)
}

// Criterion 1: the canonical involution is bit-exact: applying it twice is
// the identity, it fixes the base block, and the tangent projection
// factors through it, on 1000 points per level and dimension.

fn kappa_identities() -> Result<(bool, String)> {
    let mut checked = 0usize;
    for level in 2u8..=3 {
        for n in 1usize..=3 {
            let points = sample_points(level, n, 1000, 100 + n as u64, -5.0, 5.0, 0.0);
            let base_block = if level == 2 { n } else { 2 * n };
            for p in &points {
                let k = kappa(p)?;
                let kk = kappa(&k)?;
                if kk.coords() != p.coords() {
                    return Ok((false, format!("involution broken at level {level}, n = {n}")));
                }
                if k.coords()[..base_block] != p.coords()[..base_block] {
                    return Ok((false, format!("base block moved at level {level}, n = {n}")));
                }
                let via_kappa = project(&k)?;
                let direct = dprojection(p)?;
                if via_kappa.coords() != direct.coords() {
                    return Ok((false, format!("projection mismatch at level {level}, n = {n}")));
                }
                checked += 1;
            }
        }
    }
    Ok((true, format!("{checked} points, all identities bit-exact")))
}

// Criterion 2: ten lift-algebra identities hold to 1e-10 relative error on
// 100 points for base levels 0 and 1, n up to 3.

fn algebra_objects(
    level: u8,
    n: usize,
) -> Result<(ScalarField, ScalarField, VectorField, VectorField)> {
    let (f_src, g_src, a_srcs, b_srcs) = if level == 0 {
        (
            format!("sin(x1) + x1*x{n}"),
            format!("x1^2 - 2*x{n}"),
            (1..=n).map(|i| format!("x{i}^2 + x1")).collect::<Vec<_>>(),
            (1..=n)
                .map(|i| format!("sin(x{i}) + 2*x{n}"))
                .collect::<Vec<_>>(),
        )
    } else {
        let mut a = (1..=n).map(|i| format!("x{i}*y1 + x1")).collect::<Vec<_>>();
        a.extend((1..=n).map(|i| format!("y{i} + x{i}^2")));
        let mut b = (1..=n)
            .map(|i| format!("cos(x{i}) + y{i}"))
            .collect::<Vec<_>>();
        b.extend((1..=n).map(|i| format!("x1*y{i}")));
        (
            format!("sin(x1)*y1 + x{n}"),
            format!("x1*y{n} + y1^2"),
            a,
            b,
        )
    };
    let f = ScalarField::from_source(level, n, &f_src)?;
    let g = ScalarField::from_source(level, n, &g_src)?;
    let a_refs: Vec<&str> = a_srcs.iter().map(|s| s.as_str()).collect();
    let b_refs: Vec<&str> = b_srcs.iter().map(|s| s.as_str()).collect();
    let a = VectorField::from_sources(level, n, &a_refs)?;
    let b = VectorField::from_sources(level, n, &b_refs)?;
    Ok((f, g, a, b))
}

fn scalar_times_vector(f: &ScalarField, v: &VectorField) -> Result<VectorField> {
    let comps = v
        .comps()
        .iter()
        .map(|c| ScalarField::product(f.clone(), c.clone()))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(v.level(), v.n(), comps)
}

fn algebra_residual(
    f: &ScalarField,
    g: &ScalarField,
    a: &VectorField,
    b: &VectorField,
    samples: &[BundlePoint],
) -> Result<f64> {
    let mut worst = 0.0f64;
    let fg = ScalarField::product(f.clone(), g.clone())?;
    let af = a.apply(f)?;
    let ab = lie_bracket(a, b)?;
    let zero_s = ScalarField::constant(f.level() + 1, f.n(), 0.0);

    // (fg)^v = f^v g^v and the Leibniz rule for (fg)^c.
    worst = worst.max(max_scalar_rel(
        &fg.vlift()?,
        &ScalarField::product(f.vlift()?, g.vlift()?)?,
        samples,
    )?);
    worst = worst.max(max_scalar_rel(
        &fg.clift()?,
        &ScalarField::sum(vec![
            ScalarField::product(f.clift()?, g.vlift()?)?,
            ScalarField::product(f.vlift()?, g.clift()?)?,
        ])?,
        samples,
    )?);
    // The four derivation rules between lifted fields and lifted functions.
    worst = worst.max(max_scalar_rel(&a.vlift()?.apply(&f.vlift()?)?, &zero_s, samples)?);
    worst = worst.max(max_scalar_rel(&a.vlift()?.apply(&f.clift()?)?, &af.vlift()?, samples)?);
    worst = worst.max(max_scalar_rel(&a.clift()?.apply(&f.vlift()?)?, &af.vlift()?, samples)?);
    worst = worst.max(max_scalar_rel(&a.clift()?.apply(&f.clift()?)?, &af.clift()?, samples)?);
    // Bracket relations for the three lift pairings.
    let zero_v = VectorField::new(
        a.level() + 1,
        a.n(),
        (0..2 * a.dim())
            .map(|_| ScalarField::constant(a.level() + 1, a.n(), 0.0))
            .collect(),
    )?;
    worst = worst.max(max_vector_rel(
        &lie_bracket(&a.vlift()?, &b.vlift()?)?,
        &zero_v,
        samples,
    )?);
    worst = worst.max(max_vector_rel(
        &lie_bracket(&a.clift()?, &b.vlift()?)?,
        &ab.vlift()?,
        samples,
    )?);
    worst = worst.max(max_vector_rel(
        &lie_bracket(&a.clift()?, &b.clift()?)?,
        &ab.clift()?,
        samples,
    )?);
    // Module rule: (f A)^c = f^c A^v + f^v A^c.
    let lhs = scalar_times_vector(f, a)?.clift()?;
    let av = a.vlift()?;
    let ac = a.clift()?;
    let rhs_comps = av
        .comps()
        .iter()
        .zip(ac.comps())
        .map(|(v, c)| {
            ScalarField::sum(vec![
                ScalarField::product(f.clift()?, v.clone())?,
                ScalarField::product(f.vlift()?, c.clone())?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let rhs = VectorField::new(a.level() + 1, a.n(), rhs_comps)?;
    worst = worst.max(max_vector_rel(&lhs, &rhs, samples)?);
    Ok(worst)
}

fn lift_algebra() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for level in 0u8..=1 {
        for n in 1usize..=3 {
            let (f, g, a, b) = algebra_objects(level, n)?;
            let seed = 210 + level as u64 * 10 + n as u64;
            let samples = sample_points(level + 1, n, 100, seed, -2.0, 2.0, 0.0);
            worst = worst.max(algebra_residual(&f, &g, &a, &b, &samples)?);
        }
    }
    Ok((
        worst < 1e-10,
        format!("ten identities, worst relative residual {worst:.2e}"),
    ))
}

// Criterion 3: the coupled variational route and the complete-lift route
// produce the same Jacobi fields: five catalog models, twenty initial
// conditions each, sup difference below 1e-7 on [0, 5] at h = 1e-3.

struct RouteModel {
    name: &'static str,
    spray: Semispray,
    x_amp: f64,
    v_lo: f64,
    v_hi: f64,
    signed_v: bool,
    jk_amp: f64,
}

fn route_models() -> Result<Vec<RouteModel>> {
    Ok(vec![
        RouteModel {
            name: "euclidean-2",
            spray: catalog::euclidean(2)?,
            x_amp: 0.5,
            v_lo: 0.0,
            v_hi: 1.0,
            signed_v: true,
            jk_amp: 1.0,
        },
        RouteModel {
            name: "oscillator",
            spray: catalog::oscillator()?,
            x_amp: 0.5,
            v_lo: 0.0,
            v_hi: 1.0,
            signed_v: true,
            jk_amp: 1.0,
        },
        RouteModel {
            name: "funk-2",
            spray: catalog::funk(2)?,
            x_amp: 0.4,
            v_lo: 0.3,
            v_hi: 1.0,
            signed_v: true,
            jk_amp: 0.5,
        },
        RouteModel {
            name: "diag-metric",
            spray: catalog::diag_metric()?.geodesic_spray()?,
            x_amp: 0.5,
            v_lo: 0.0,
            v_hi: 1.0,
            signed_v: true,
            jk_amp: 1.0,
        },
        RouteModel {
            name: "log-affine",
            spray: catalog::log_affine()?.spray()?,
            x_amp: 0.3,
            v_lo: 0.25,
            v_hi: 0.9,
            signed_v: false,
            jk_amp: 1.0,
        },
    ])
}

fn jacobi_routes() -> Result<(bool, String)> {
    let cfg = IntegratorConfig::default().with_span(0.0, 5.0);
    let mut worst = 0.0f64;
    let mut worst_model = "";
    for (mi, model) in route_models()?.iter().enumerate() {
        let n = model.spray.n();
        let mut rng = ChaCha8Rng::seed_from_u64(300 + mi as u64);
        for _ in 0..20 {
            let x0: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-model.x_amp..model.x_amp))
                .collect();
            let v0: Vec<f64> = (0..n)
                .map(|_| {
                    let mag = rng.random_range(model.v_lo..model.v_hi);
                    if model.signed_v && rng.random_range(0.0..1.0) < 0.5 {
                        -mag
                    } else {
                        mag
                    }
                })
                .collect();
            let j0: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-model.jk_amp..model.jk_amp))
                .collect();
            let k0: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-model.jk_amp..model.jk_amp))
                .collect();
            let direct = jacobi_direct(&model.spray, &x0, &v0, &j0, &k0, &cfg)?;
            let mut xi = x0.clone();
            xi.extend_from_slice(&j0);
            xi.extend_from_slice(&v0);
            xi.extend_from_slice(&k0);
            let lifted = jacobi_via_lift(&model.spray, &BundlePoint::new(2, n, xi)?, &cfg)?;
            if !(direct.status.completed() && lifted.status.completed()) {
                return Ok((
                    false,
                    format!(
                        "{}: routes stopped early ({:?} / {:?})",
                        model.name, direct.status, lifted.status
                    ),
                ));
            }
            for (a, b) in direct.points.iter().zip(&lifted.points) {
                for (x, y) in a.coords().iter().zip(b.coords()) {
                    let d = (x - y).abs();
                    if d > worst {
                        worst = d;
                        worst_model = model.name;
                    }
                }
            }
        }
    }
    let at = if worst_model.is_empty() {
        String::new()
    } else {
        format!(" (worst on {worst_model})")
    };
    Ok((
        worst < 1e-7,
        format!("5 models x 20 initial conditions, sup route difference {worst:.2e}{at}"),
    ))
}

// Criterion 4: finite-difference geodesic variations converge to the
// Jacobi field: sup error below 1e-6 at displacement 1e-4, and halving
// the displacement on the curved model shrinks the defect by about 4.

fn variation_case(
    spray: &Semispray,
    x0: &[f64],
    v0: &[f64],
    j0: &[f64],
    k0: &[f64],
    s_offset: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let n = spray.n();
    let direct = jacobi_direct(spray, x0, v0, j0, k0, cfg)?;
    let mut xi = x0.to_vec();
    xi.extend_from_slice(j0);
    xi.extend_from_slice(v0);
    xi.extend_from_slice(k0);
    let vcfg = VariationConfig {
        s_offset,
        stencil: Stencil::Central2,
    };
    let var = variation_field(spray, &BundlePoint::new(2, n, xi)?, &vcfg, cfg)?;
    let mut sup = 0.0f64;
    for (a, b) in direct.points.iter().zip(&var.points) {
        for i in 0..n {
            sup = sup.max((a.coords()[n + i] - b.coords()[n + i]).abs());
        }
    }
    Ok(sup)
}

fn variation_convergence() -> Result<(bool, String)> {
    let cfg = IntegratorConfig::default().with_span(0.0, 2.0);
    let mut sup = 0.0f64;
    let cases: Vec<(Semispray, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = vec![
        (
            catalog::oscillator()?,
            vec![0.0],
            vec![1.0],
            vec![0.0],
            vec![1.0],
        ),
        (
            catalog::euclidean(2)?,
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.3, -0.2],
        ),
        (
            catalog::diag_metric()?.geodesic_spray()?,
            vec![0.5, 0.0],
            vec![0.3, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 0.5],
        ),
    ];
    for (spray, x0, v0, j0, k0) in &cases {
        sup = sup.max(variation_case(spray, x0, v0, j0, k0, 1e-4, &cfg)?);
    }
    let (spray, x0, v0, j0, k0) = &cases[2];
    let coarse = variation_case(spray, x0, v0, j0, k0, 1e-3, &cfg)?;
    let fine = variation_case(spray, x0, v0, j0, k0, 5e-4, &cfg)?;
    let ratio = coarse / fine;
    let pass = sup < 1e-6 && (3.5..=4.5).contains(&ratio);
    Ok((
        pass,
        format!("sup error {sup:.2e} at displacement 1e-4, halving ratio {ratio:.2}"),
    ))
}

// Criterion 5: the complete lift's flow is the differential of the base
// flow: residual below 1e-6 for translation, linear, and rotation fields
// at t = 0.1 and t = 1.0, and blow-ups happen at matching times.

fn flow_pushforward() -> Result<(bool, String)> {
    let cfg = IntegratorConfig::default();
    let mut worst = 0.0f64;
    let cases: Vec<(VectorField, BundlePoint)> = vec![
        (
            VectorField::from_sources(0, 1, &["1"])?,
            BundlePoint::new(1, 1, vec![0.2, 0.7])?,
        ),
        (
            VectorField::from_sources(0, 1, &["x1"])?,
            BundlePoint::new(1, 1, vec![0.2, 0.7])?,
        ),
        (
            VectorField::from_sources(0, 2, &["x2", "-x1"])?,
            BundlePoint::new(1, 2, vec![0.4, -0.3, 0.25, 0.6])?,
        ),
    ];
    for (field, xi) in &cases {
        for t in [0.1, 1.0] {
            let rep = flow_pushforward_check(field, t, xi, &cfg, None)?;
            let r = rep
                .residual
                .ok_or_else(|| Error::Input("pushforward flow stopped unexpectedly".into()))?;
            worst = worst.max(r);
            if !rep.domains_consistent {
                return Ok((false, "inconsistent flow domains on a complete field".into()));
            }
        }
    }
    // Quadratic field: the solution from x0 = 1 leaves every bound near
    // t = 1, and the lifted flow must stop in the same window.
    let q = VectorField::from_sources(0, 1, &["x1^2"])?;
    let xi = BundlePoint::new(1, 1, vec![1.0, 0.5])?;
    let mut bcfg = IntegratorConfig::default().with_span(0.0, 1.2);
    bcfg.blowup_bound = 1e8;
    let rep = flow_pushforward_check(&q, 1.2, &xi, &bcfg, None)?;
    let window = 10.0 * bcfg.h;
    let co_occur = match (rep.base_status, rep.lifted_status) {
        (FlowStatus::BlowUp { t: tb }, FlowStatus::BlowUp { t: tl }) => {
            (tb - 1.0).abs() <= window && (tl - 1.0).abs() <= window
        }
        _ => false,
    };
    let pass = worst < 1e-6 && co_occur && rep.domains_consistent;
    Ok((
        pass,
        format!("worst residual {worst:.2e}; blow-up co-occurrence within 10h: {co_occur}"),
    ))
}

// Criterion 6: building the model first and lifting second agrees with
// lifting first and building second, for metrics and Lagrangians, and the
// lifted connection spray keeps the spray structure.

fn model_lift_commutation() -> Result<(bool, String)> {
    let metric = catalog::diag_metric()?;
    let lifted_samples = sample_slashed(2, metric.n(), 100, 610);
    let metric_diff = max_coeff_difference(
        &metric.geodesic_spray()?.complete_lift()?,
        &metric.complete_lift()?.geodesic_spray()?,
        &lifted_samples,
    )?;

    let lagrangian = catalog::oscillator_lagrangian()?;
    let l_samples = sample_slashed(2, 1, 100, 611);
    let lagrangian_diff = max_coeff_difference(
        &lagrangian.semispray()?.complete_lift()?,
        &lagrangian.complete_lift()?.semispray()?,
        &l_samples,
    )?;

    let conn = Connection::from_sources(2, &["x2", "x1", "x1", "0", "1", "0", "0", "x1"])?;
    let lifted_spray = conn.complete_lift_spray()?;
    let c_samples = sample_slashed(2, 2, 100, 612);
    let report = lifted_spray.is_spray(&c_samples, 1e-9)?;
    let structural = is_semispray(&lifted_spray.as_vector_field(), &c_samples, 1e-9)?;

    let log_lift = catalog::log_affine()?.complete_lift_spray()?;
    let log_samples = sample_slashed(2, 1, 100, 613);
    let log_report = log_lift.is_spray(&log_samples, 1e-9)?;

    let pass = metric_diff < 1e-9
        && lagrangian_diff < 1e-9
        && report.pass
        && structural
        && log_report.pass;
    Ok((
        pass,
        format!(
            "metric commutation {metric_diff:.2e}, Lagrangian commutation {lagrangian_diff:.2e}, lifted connection sprays pass: {}",
            report.pass && log_report.pass
        ),
    ))
}

// Criterion 7: the positively 2-homogeneous catalog model is a spray, its
// complete lift is again a spray, and both coefficient sets satisfy the
// degree-2 criteria below 1e-9.

fn spray_structure() -> Result<(bool, String)> {
    let funk = catalog::funk(2)?;
    let base = funk.is_spray(&sample_slashed(1, 2, 100, 710), 1e-9)?;
    let lifted = funk
        .complete_lift()?
        .is_spray(&sample_slashed(2, 2, 100, 711), 1e-9)?;
    let pass = base.pass && lifted.pass;
    Ok((
        pass,
        format!(
            "base euler residual {:.2e}, lifted euler residual {:.2e}",
            base.coefficient_euler_residual, lifted.coefficient_euler_residual
        ),
    ))
}

// Criterion 8: projective factor recovery and lifted rigidity: the factor
// between the flat spray and the homogeneous one is |y| (value 5 at a
// 3-4-5 fiber), the complete lifts are not projectively related, and the
// equal case recovers the zero factor.

fn projective_recovery() -> Result<(bool, String)> {
    let eu = catalog::euclidean(2)?;
    let funk = catalog::funk(2)?;
    let base_samples = sample_slashed(1, 2, 100, 810);
    let lifted_samples = sample_slashed(2, 2, 100, 811);

    let pf = projective_factor(&eu, &funk, &base_samples, 1e-9)?
        .ok_or_else(|| Error::Input("expected a projective factor".into()))?;
    let probe = BundlePoint::new(1, 2, vec![0.0, 0.0, 3.0, 4.0])?;
    let p_err = (pf.field.value(&probe)? - 5.0).abs();
    let reversed = projective_factor(&funk, &eu, &base_samples, 1e-9)?
        .ok_or_else(|| Error::Input("expected the reversed factor".into()))?;
    let anti_err = (reversed.field.value(&probe)? + 5.0).abs();

    let rigidity = projective_rigidity_check(&eu, &funk, &base_samples, &lifted_samples, 1e-9)?;
    let distinct_ok = rigidity.pass && !rigidity.lifted_related && !rigidity.base_coeffs_equal;

    let equal = projective_factor(&funk, &funk, &base_samples, 1e-9)?
        .ok_or_else(|| Error::Input("expected the zero factor".into()))?;
    let mut zero_sup = 0.0f64;
    for p in &base_samples {
        zero_sup = zero_sup.max(equal.field.value(p)?.abs());
    }
    let equal_rigidity =
        projective_rigidity_check(&funk, &funk, &base_samples, &lifted_samples, 1e-9)?;
    let equal_ok = equal_rigidity.pass
        && equal_rigidity.lifted_related
        && equal_rigidity.base_coeffs_equal
        && zero_sup < 1e-10;

    let pass = p_err < 1e-9 && anti_err < 1e-9 && distinct_ok && equal_ok;
    Ok((
        pass,
        format!(
            "factor error {p_err:.2e}, antisymmetry {anti_err:.2e}, rigidity distinct/equal: {distinct_ok}/{equal_ok}"
        ),
    ))
}

// Criterion 9: energy conservation upstairs and down for the Lagrangian
// model, with the structural identity between the lifted energy and the
// energy of the lifted Lagrangian, plus failing negative controls.

fn energy_conservation() -> Result<(bool, String)> {
    let l = catalog::oscillator_lagrangian()?;
    let base_samples = sample_points(1, 1, 100, 910, -2.0, 2.0, 0.0);
    let lifted_samples = sample_points(2, 1, 100, 911, -2.0, 2.0, 0.0);
    let cfg = IntegratorConfig::default().with_span(0.0, 10.0);
    let phase0 = BundlePoint::new(1, 1, vec![0.0, 1.0])?;
    let lifted0 = BundlePoint::new(2, 1, vec![0.0, 0.2, 1.0, -0.1])?;
    let rep = symmetry::energy_conservation_suite(
        &l,
        &phase0,
        &lifted0,
        &cfg,
        &base_samples,
        &lifted_samples,
    )?;

    let s = l.semispray()?;
    let not_conserved = ScalarField::from_source(1, 1, "x1")?;
    let neg_const =
        symmetry::check_constant(&s.as_vector_field(), &not_conserved, &base_samples, None)?;
    let translation = VectorField::from_sources(0, 1, &["1"])?;
    let neg_sym = symmetry::check_lie_symmetry(&s.as_vector_field(), &translation, &base_samples)?;
    let rotation = VectorField::from_sources(0, 2, &["x2", "-x1"])?;
    let pos_sym = symmetry::check_lie_symmetry(
        &catalog::euclidean(2)?.as_vector_field(),
        &rotation,
        &sample_points(1, 2, 50, 912, -2.0, 2.0, 0.0),
    )?;

    let pass = rep.pass && !neg_const.pass && !neg_sym.pass && pos_sym.pass;
    Ok((
        pass,
        format!(
            "pointwise {:.2e}, worst drift {:.2e}, lift identity {:.2e}, controls behave: {}",
            rep.pointwise_residual,
            rep.drift_base
                .max(rep.drift_vlift)
                .max(rep.drift_clift)
                .max(rep.drift_lifted_energy),
            rep.lift_identity_residual,
            !neg_const.pass && !neg_sym.pass && pos_sym.pass
        ),
    ))
}

// Criterion 10: closed-form integration oracles: trigonometric flow for
// the oscillator, logarithmic flow for the affine model, exact lines for
// the flat spray.

fn integration_oracles() -> Result<(bool, String)> {
    let cfg = IntegratorConfig::default();
    let osc = integrate(
        &catalog::oscillator()?.as_vector_field(),
        &BundlePoint::new(1, 1, vec![0.0, 1.0])?,
        &cfg,
        None,
    )?;
    let end = osc
        .end()
        .ok_or_else(|| Error::Input("empty oscillator flow".into()))?
        .coords();
    let osc_err = (end[0] - 1f64.sin()).abs().max((end[1] - 1f64.cos()).abs());

    let log = geodesic(
        &catalog::log_affine()?.spray()?,
        &[0.0],
        &[1.0],
        &cfg,
        None,
    )?;
    let log_err = (log
        .end()
        .ok_or_else(|| Error::Input("empty affine flow".into()))?
        .coords()[0]
        - 2f64.ln())
    .abs();

    let flat = geodesic(
        &catalog::euclidean(3)?,
        &[0.1, -0.2, 0.3],
        &[1.0, 0.5, -0.25],
        &cfg,
        None,
    )?;
    let fc = flat
        .end()
        .ok_or_else(|| Error::Input("empty flat flow".into()))?
        .coords();
    let flat_err = (fc[0] - 1.1)
        .abs()
        .max((fc[1] - 0.3).abs())
        .max((fc[2] - 0.05).abs());

    let pass = osc_err < 1e-9 && log_err < 1e-8 && flat_err < 1e-12;
    Ok((
        pass,
        format!(
            "oscillator {osc_err:.2e}, affine log {log_err:.2e}, flat {flat_err:.2e}"
        ),
    ))
}

// Criterion 11: parser corpus with byte-exact error offsets, plus
// finite-difference validation of the automatic first and second
// derivatives.

enum Expect {
    Accept(Option<f64>),
    RejectParse(usize),
    RejectVariable(usize),
    RejectFunction(usize),
}

fn parser_corpus() -> Vec<(&'static str, Expect)> {
    use Expect::*;
    let x1 = 0.3f64;
    let x2 = -0.4f64;
    let y1 = 0.7f64;
    let y2 = 0.2f64;
    vec![
        ("x1", Accept(Some(x1))),
        ("3", Accept(Some(3.0))),
        ("-x1^2", Accept(Some(-(x1 * x1)))),
        ("x1^-2", Accept(Some(x1.powi(-2)))),
        ("2.5e-1 + x2", Accept(Some(0.25 + x2))),
        ("sin(x1)*cos(y1) + exp(x2)", Accept(None)),
        ("sqrt(x1^2 + y1^2 + 1)", Accept(None)),
        ("log(exp(1) + x1^2)", Accept(None)),
        ("abs_smooth(x1, 0.5)", Accept(None)),
        ("abs_smooth(y2)", Accept(Some(y2))),
        ("(x1 + y1)*(x1 - y1)/2", Accept(Some((x1 + y1) * (x1 - y1) / 2.0))),
        ("1/(1 + x1^2)", Accept(Some(1.0 / (1.0 + x1 * x1)))),
        ("x1*y2 - x2*y1", Accept(Some(x1 * y2 - x2 * y1))),
        ("2^x1", Accept(Some(2f64.powf(x1)))),
        ("y1^3 - 2*y1 + 1", Accept(None)),
        ("x1 - -x2", Accept(Some(x1 + x2))),
        ("  x1\t+ y1 ", Accept(Some(x1 + y1))),
        ("1e3 * 1.5E-2", Accept(Some(15.0))),
        ("", RejectParse(0)),
        ("x1 +", RejectParse(4)),
        ("(x1", RejectParse(3)),
        ("x1)", RejectParse(2)),
        ("1..2", RejectParse(2)),
        ("x9", RejectVariable(0)),
        ("foo(x1)", RejectFunction(0)),
        ("x1 @ y1", RejectParse(3)),
        ("sin()", RejectParse(4)),
        ("sin(x1, 2)", RejectParse(6)),
        ("^2", RejectParse(0)),
        ("2 3", RejectParse(2)),
        ("x1 y1", RejectParse(3)),
        ("log()", RejectParse(4)),
        ("*x1", RejectParse(0)),
        ("x1 / / y1", RejectParse(5)),
        ("abs_smooth(x1, x2)", RejectParse(15)),
        ("x1 + (y1", RejectParse(8)),
        ("y1 + x3", RejectVariable(5)),
        ("sqrt 2", RejectVariable(0)),
        ("exp(2", RejectParse(5)),
    ]
}

fn parser_and_jets() -> Result<(bool, String)> {
    let probe = BundlePoint::new(1, 2, vec![0.3, -0.4, 0.7, 0.2])?;
    let mut cases = 0usize;
    for (src, expect) in parser_corpus() {
        cases += 1;
        let parsed = ScalarField::from_source(1, 2, src);
        let ok = match (&parsed, &expect) {
            (Ok(field), Expect::Accept(value)) => {
                let v = field.value(&probe)?;
                v.is_finite()
                    && match value {
                        Some(want) => (v - want).abs() < 1e-12,
                        None => true,
                    }
            }
            (Err(Error::Parse { offset, .. }), Expect::RejectParse(want)) => offset == want,
            (Err(Error::UnknownVariable { offset, .. }), Expect::RejectVariable(want)) => {
                offset == want
            }
            (Err(Error::UnknownFunction { offset, .. }), Expect::RejectFunction(want)) => {
                offset == want
            }
            _ => false,
        };
        if !ok {
            return Ok((false, format!("corpus case `{src}` misbehaved: {parsed:?}")));
        }
    }

    // Finite-difference validation of the automatic jets.
    let sources = [
        "sin(x1)*y1 + x1^3*y2^2",
        "exp(x2)*cos(y1) + x1*x2",
        "sqrt(1 + x1^2 + y1^2)",
        "1/(1 + x1^2 + y2^2)",
    ];
    let points = sample_points(1, 2, 5, 990, -1.0, 1.0, 0.0);
    let mut grad_worst = 0.0f64;
    let mut hess_worst = 0.0f64;
    for src in sources {
        let field = ScalarField::from_source(1, 2, src)?;
        let value_at = |c: &[f64]| -> Result<f64> {
            field.value(&BundlePoint::new(1, 2, c.to_vec())?)
        };
        for p in &points {
            let jet = field.jet2(p)?;
            let c = p.coords();
            let hg = 1e-5;
            let hh = 1e-4;
            for i in 0..4 {
                let mut up = c.to_vec();
                let mut dn = c.to_vec();
                up[i] += hg;
                dn[i] -= hg;
                let fd = (value_at(&up)? - value_at(&dn)?) / (2.0 * hg);
                grad_worst = grad_worst.max((jet.grad[i] - fd).abs());
            }
            for i in 0..4 {
                for j in i..4 {
                    let fd = if i == j {
                        let mut up = c.to_vec();
                        let mut dn = c.to_vec();
                        up[i] += hh;
                        dn[i] -= hh;
                        (value_at(&up)? - 2.0 * value_at(c)? + value_at(&dn)?) / (hh * hh)
                    } else {
                        let mut pp = c.to_vec();
                        let mut pm = c.to_vec();
                        let mut mp = c.to_vec();
                        let mut mm = c.to_vec();
                        pp[i] += hh;
                        pp[j] += hh;
                        pm[i] += hh;
                        pm[j] -= hh;
                        mp[i] -= hh;
                        mp[j] += hh;
                        mm[i] -= hh;
                        mm[j] -= hh;
                        (value_at(&pp)? - value_at(&pm)? - value_at(&mp)? + value_at(&mm)?)
                            / (4.0 * hh * hh)
                    };
                    hess_worst = hess_worst.max((jet.hess.get(i, j) - fd).abs());
                }
            }
        }
    }
    let pass = grad_worst < 1e-6 && hess_worst < 1e-4;
    Ok((
        pass,
        format!(
            "{cases} corpus cases exact; gradient FD gap {grad_worst:.2e}, Hessian FD gap {hess_worst:.2e}"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // The full battery runs in the acceptance test; here only the cheap
    // structural criteria are exercised directly.

    #[test]
    fn cheap_criteria_pass() {
        for check in [
            kappa_identities,
            lift_algebra,
            spray_structure,
            projective_recovery,
            parser_and_jets,
        ] {
            let (pass, detail) = check().unwrap();
            assert!(pass, "{detail}");
        }
    }

    #[test]
    fn results_are_shaped_and_ordered() {
        // Only shape, not content: the expensive criteria run in the
        // dedicated acceptance test.
        let names: Vec<&str> = [
            "kappa-identities",
            "lift-algebra",
            "jacobi-routes",
            "variation-field",
            "flow-pushforward",
            "model-lift-commutation",
            "spray-structure",
            "projective-recovery",
            "energy-conservation",
            "integration-oracles",
            "parser-and-jets",
        ]
        .to_vec();
        assert_eq!(names.len(), 11);
    }
}
