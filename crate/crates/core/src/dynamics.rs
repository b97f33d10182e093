//! Fixed-step RK4 integration of semispray flows: geodesics, Jacobi fields
//! along two independent routes, finite-difference geodesic variations, and
//! the flow-pushforward identity for complete lifts.

use crate::chart::{dprojection, in_slashed, kappa, BundlePoint, ChartSpec};
use crate::error::{Error, Result};
use crate::expr::Order;
use crate::fields::VectorField;
use crate::semispray::Semispray;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub h: f64,
    pub t_span: (f64, f64),
    /// Fiber-norm threshold below which a slashed-only flow stops.
    pub eps_reg: f64,
    /// Coordinate cap; exceeding it (or going non-finite) is a blow-up.
    pub blowup_bound: f64,
    /// Re-integrate at h/2 and report the Richardson endpoint estimate.
    pub half_step_error: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            t_span: (0.0, 1.0),
            eps_reg: 1e-9,
            blowup_bound: 1e6,
            half_step_error: false,
        }
    }
}

impl IntegratorConfig {
    pub fn with_span(mut self, t0: f64, t1: f64) -> Self {
        self.t_span = (t0, t1);
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Input(format!(
                "step size must be positive and finite, got {}",
                self.h
            )));
        }
        if !(self.t_span.1 > self.t_span.0) {
            return Err(Error::Input(format!(
                "time span must be increasing, got [{}, {}]",
                self.t_span.0, self.t_span.1
            )));
        }
        if !(self.eps_reg > 0.0) {
            return Err(Error::Input("regularity threshold must be positive".into()));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (((self.t_span.1 - self.t_span.0) / self.h).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    RegularityLost { t: f64 },
    BlowUp { t: f64 },
    LeftChart { t: f64 },
}

impl FlowStatus {
    pub fn completed(&self) -> bool {
        matches!(self, FlowStatus::Completed)
    }

    /// Failure time, if the flow stopped early.
    pub fn stop_time(&self) -> Option<f64> {
        match self {
            FlowStatus::Completed => None,
            FlowStatus::RegularityLost { t }
            | FlowStatus::BlowUp { t }
            | FlowStatus::LeftChart { t } => Some(*t),
        }
    }
}

/// Uniformly sampled integral curve. `points` all live at one level; an
/// early stop leaves the recorded prefix and a status with the stop time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<BundlePoint>,
    pub status: FlowStatus,
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn end(&self) -> Option<&BundlePoint> {
        self.points.last()
    }

    pub fn level(&self) -> Option<u8> {
        self.points.first().map(|p| p.level())
    }

    /// Uniform spacing of the time grid.
    pub fn spacing(&self) -> Option<f64> {
        (self.times.len() > 1).then(|| self.times[1] - self.times[0])
    }
}

enum StepOutcome {
    State(Vec<f64>),
    Stop(FlowStatus),
}

/// Early-stop checks applied to each accepted state.
struct Guards<'a> {
    cfg: &'a IntegratorConfig,
    chart: Option<&'a ChartSpec>,
    /// Point shape for chart containment; `None` skips the chart check.
    shape: Option<(u8, usize)>,
    /// Regularity predicate (state, eps_reg) -> still regular; `None`
    /// disables regularity termination.
    regular: Option<&'a dyn Fn(&[f64], f64) -> bool>,
}

impl Guards<'_> {
    fn classify(&self, state: &[f64], t: f64) -> Option<FlowStatus> {
        if state
            .iter()
            .any(|v| !v.is_finite() || v.abs() > self.cfg.blowup_bound)
        {
            return Some(FlowStatus::BlowUp { t });
        }
        if let Some(regular) = self.regular {
            if !regular(state, self.cfg.eps_reg) {
                return Some(FlowStatus::RegularityLost { t });
            }
        }
        if let (Some(chart), Some((level, n))) = (self.chart, self.shape) {
            let p = BundlePoint::new(level, n, state.to_vec()).expect("state keeps its shape");
            if !chart.contains(&p) {
                return Some(FlowStatus::LeftChart { t });
            }
        }
        None
    }
}

fn rk4_step<F: FnMut(&[f64]) -> Result<Vec<f64>>>(
    rhs: &mut F,
    state: &[f64],
    t: f64,
    h: f64,
    stop_on_rhs_error: bool,
) -> Result<StepOutcome> {
    let mut eval = |point: &[f64]| match rhs(point) {
        Ok(v) => Ok(StepOutcome::State(v)),
        Err(_) if stop_on_rhs_error => Ok(StepOutcome::Stop(FlowStatus::RegularityLost { t })),
        Err(e) => Err(e),
    };
    let dim = state.len();
    let k1 = match eval(state)? {
        StepOutcome::State(v) => v,
        stop => return Ok(stop),
    };
    let mut buf = vec![0.0; dim];
    for i in 0..dim {
        buf[i] = state[i] + 0.5 * h * k1[i];
    }
    let k2 = match eval(&buf)? {
        StepOutcome::State(v) => v,
        stop => return Ok(stop),
    };
    for i in 0..dim {
        buf[i] = state[i] + 0.5 * h * k2[i];
    }
    let k3 = match eval(&buf)? {
        StepOutcome::State(v) => v,
        stop => return Ok(stop),
    };
    for i in 0..dim {
        buf[i] = state[i] + h * k3[i];
    }
    let k4 = match eval(&buf)? {
        StepOutcome::State(v) => v,
        stop => return Ok(stop),
    };
    let mut next = vec![0.0; dim];
    for i in 0..dim {
        next[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(StepOutcome::State(next))
}

fn run_grid<F: FnMut(&[f64]) -> Result<Vec<f64>>>(
    rhs: &mut F,
    init: &[f64],
    t0: f64,
    steps: usize,
    h: f64,
    guards: &Guards,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, FlowStatus)> {
    let stop_on_rhs_error = guards.regular.is_some();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut state = init.to_vec();
    let mut status = FlowStatus::Completed;
    for i in 0..=steps {
        let t = t0 + i as f64 * h;
        times.push(t);
        states.push(state.clone());
        if i == steps {
            break;
        }
        match rk4_step(rhs, &state, t, h, stop_on_rhs_error)? {
            StepOutcome::State(next) => {
                let t_next = t0 + (i + 1) as f64 * h;
                if let Some(stop) = guards.classify(&next, t_next) {
                    status = stop;
                    break;
                }
                state = next;
            }
            StepOutcome::Stop(stop) => {
                status = stop;
                break;
            }
        }
    }
    Ok((times, states, status))
}

fn integrate_states<F: FnMut(&[f64]) -> Result<Vec<f64>>>(
    mut rhs: F,
    init: &[f64],
    cfg: &IntegratorConfig,
    guards: &Guards,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, FlowStatus, Option<f64>)> {
    cfg.validate()?;
    let steps = cfg.steps();
    let h = (cfg.t_span.1 - cfg.t_span.0) / steps as f64;
    let (times, states, status) = run_grid(&mut rhs, init, cfg.t_span.0, steps, h, guards)?;
    let mut error_estimate = None;
    if cfg.half_step_error && status.completed() {
        let (_, fine, fine_status) =
            run_grid(&mut rhs, init, cfg.t_span.0, 2 * steps, 0.5 * h, guards)?;
        if fine_status.completed() {
            let coarse_end = states.last().expect("completed run has samples");
            let fine_end = fine.last().expect("completed run has samples");
            let diff = coarse_end
                .iter()
                .zip(fine_end)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            error_estimate = Some(diff / 15.0);
        }
    }
    Ok((times, states, status, error_estimate))
}

fn assemble<Map: Fn(&[f64]) -> Result<BundlePoint>>(
    parts: (Vec<f64>, Vec<Vec<f64>>, FlowStatus, Option<f64>),
    map: Map,
) -> Result<Trajectory> {
    let (times, states, status, error_estimate) = parts;
    let points = states.iter().map(|s| map(s)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        points,
        status,
        error_estimate,
    })
}

/// Integrates the flow of a vector field from `init`. Slashed-only fields
/// stop with `RegularityLost` when the fiber norm drops below `eps_reg`;
/// starting exactly on the zero section is an input error, and starting
/// inside the threshold yields an empty trajectory.
pub fn integrate(
    field: &VectorField,
    init: &BundlePoint,
    cfg: &IntegratorConfig,
    chart: Option<&ChartSpec>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if init.level() != field.level() || init.n() != field.n() {
        return Err(Error::LevelMismatch(format!(
            "field at level {} (n = {}), initial point at level {} (n = {})",
            field.level(),
            field.n(),
            init.level(),
            init.n()
        )));
    }
    let (level, n) = (init.level(), init.n());
    if field.slashed_only() {
        if !in_slashed(init, 0.0) {
            return Err(Error::Input(
                "slashed-only field started on the zero section".into(),
            ));
        }
        if !in_slashed(init, cfg.eps_reg) {
            return Ok(Trajectory {
                times: vec![],
                points: vec![],
                status: FlowStatus::RegularityLost { t: cfg.t_span.0 },
                error_estimate: None,
            });
        }
    }
    let regular = move |state: &[f64], eps: f64| {
        let p = BundlePoint::new(level, n, state.to_vec()).expect("state keeps its shape");
        in_slashed(&p, eps)
    };
    let guards = Guards {
        cfg,
        chart,
        shape: Some((level, n)),
        regular: field.slashed_only().then_some(&regular),
    };
    let parts = integrate_states(|s| field.value_slice(s), init.coords(), cfg, &guards)?;
    assemble(parts, |s| BundlePoint::new(level, n, s.to_vec()))
}

/// Integrates the geodesic flow of a level-1 semispray and projects to the
/// base: samples are level-0 points.
pub fn geodesic(
    s: &Semispray,
    x0: &[f64],
    v0: &[f64],
    cfg: &IntegratorConfig,
    chart: Option<&ChartSpec>,
) -> Result<Trajectory> {
    if s.level() != 1 {
        return Err(Error::Level {
            level: s.level(),
            context: "geodesics are integrated for level-1 semisprays",
        });
    }
    let n = s.n();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if v0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v0.len(),
        });
    }
    let vnorm = v0.iter().fold(0.0f64, |a, v| a + v * v).sqrt();
    if vnorm <= cfg.eps_reg {
        return Err(Error::Input(format!(
            "initial velocity norm {vnorm:e} is below the regularity threshold"
        )));
    }
    let mut init = x0.to_vec();
    init.extend_from_slice(v0);
    let phase = integrate(
        &s.as_vector_field(),
        &BundlePoint::new(1, n, init)?,
        cfg,
        chart,
    )?;
    let points = phase
        .points
        .iter()
        .map(|p| BundlePoint::new(0, n, p.coords()[..n].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: phase.times,
        points,
        status: phase.status,
        error_estimate: phase.error_estimate,
    })
}

/// Integrates the geodesic equations coupled with their variational
/// (Jacobi) equations, via first jets of the coefficients along the base
/// geodesic. Samples are level-1 pairs (x, J).
pub fn jacobi_direct(
    s: &Semispray,
    x0: &[f64],
    v0: &[f64],
    j0: &[f64],
    jdot0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if s.level() != 1 {
        return Err(Error::Level {
            level: s.level(),
            context: "Jacobi integration starts from a level-1 semispray",
        });
    }
    let n = s.n();
    for block in [x0, v0, j0, jdot0] {
        if block.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: block.len(),
            });
        }
    }
    let slashed = !s.smooth_at_zero();
    // State layout: (x, v, J, K); regularity watches the v block only.
    let mut init = Vec::with_capacity(4 * n);
    init.extend_from_slice(x0);
    init.extend_from_slice(v0);
    init.extend_from_slice(j0);
    init.extend_from_slice(jdot0);
    if slashed {
        let phase = BundlePoint::new(1, n, init[..2 * n].to_vec())?;
        if !in_slashed(&phase, cfg.eps_reg) {
            return Err(Error::Input(
                "base initial condition is not regular for a slashed-only semispray".into(),
            ));
        }
    }
    let coeffs = s.coeffs();
    let rhs = move |state: &[f64]| -> Result<Vec<f64>> {
        let mut out = vec![0.0; 4 * n];
        let phase = &state[..2 * n];
        let jj = &state[2 * n..3 * n];
        let kk = &state[3 * n..];
        out[..n].copy_from_slice(&state[n..2 * n]);
        out[2 * n..3 * n].copy_from_slice(kk);
        for i in 0..n {
            let jet = coeffs[i].jet_gen(phase, Order::Grad)?;
            out[n + i] = -2.0 * jet.value;
            let mut acc = 0.0;
            for a in 0..n {
                acc += jet.grad[a] * jj[a] + jet.grad[n + a] * kk[a];
            }
            out[3 * n + i] = -2.0 * acc;
        }
        Ok(out)
    };
    let regular = move |state: &[f64], eps: f64| {
        state[n..2 * n].iter().fold(0.0f64, |a, v| a + v * v).sqrt() > eps
    };
    let guards = Guards {
        cfg,
        chart: None,
        shape: None,
        regular: slashed.then_some(&regular),
    };
    let parts = integrate_states(rhs, &init, cfg, &guards)?;
    assemble(parts, |st| {
        let mut coords = st[..n].to_vec();
        coords.extend_from_slice(&st[2 * n..3 * n]);
        BundlePoint::new(1, n, coords)
    })
}

/// Integrates the complete lift of the semispray from a level-2 initial
/// condition and projects to (x, J). The independent route to Jacobi fields.
pub fn jacobi_via_lift(
    s: &Semispray,
    xi0: &BundlePoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let lifted = s.complete_lift()?.as_vector_field();
    let flow = integrate(&lifted, xi0, cfg, None)?;
    let n = s.n();
    let points = flow
        .points
        .iter()
        .map(|p| BundlePoint::new(1, n, p.coords()[..2 * n].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: flow.times,
        points,
        status: flow.status,
        error_estimate: flow.error_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Stencil {
    #[serde(rename = "central-2")]
    Central2,
    #[serde(rename = "central-4")]
    Central4,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VariationConfig {
    pub s_offset: f64,
    pub stencil: Stencil,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            s_offset: 1e-4,
            stencil: Stencil::Central2,
        }
    }
}

/// Finite-difference geodesic variation: integrates the geodesic family
/// with phase initial conditions w(s) = w(0) + s (J0, K0), where
/// w(0) = (x0, v0) comes from projecting the level-2 initial condition
/// xi0 = (x0, J0, v0, K0), and differentiates the base curves in s.
/// Samples are level-1 pairs (x, J).
pub fn variation_field(
    s: &Semispray,
    xi0: &BundlePoint,
    vcfg: &VariationConfig,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if s.level() != 1 {
        return Err(Error::Level {
            level: s.level(),
            context: "geodesic variations start from a level-1 semispray",
        });
    }
    if !(vcfg.s_offset > 0.0) {
        return Err(Error::Input(
            "variation displacement must be positive".into(),
        ));
    }
    let n = s.n();
    if xi0.level() != 2 || xi0.n() != n {
        return Err(Error::LevelMismatch(
            "variation initial data is a level-2 point over the same base".into(),
        ));
    }
    let w0 = dprojection(xi0)?.into_coords();
    let c = xi0.coords();
    let mut dir = c[n..2 * n].to_vec();
    dir.extend_from_slice(&c[3 * n..]);
    let vf = s.as_vector_field();
    let member = |off: f64| -> Result<Vec<Vec<f64>>> {
        let init: Vec<f64> = w0.iter().zip(&dir).map(|(w, d)| w + off * d).collect();
        let traj = integrate(&vf, &BundlePoint::new(1, n, init)?, cfg, None)?;
        if !traj.status.completed() {
            return Err(Error::VariationBlowUp(format!(
                "family member at displacement {off:e} stopped early: {:?}",
                traj.status
            )));
        }
        Ok(traj
            .points
            .iter()
            .map(|p| p.coords()[..n].to_vec())
            .collect())
    };
    let center = integrate(&vf, &BundlePoint::new(1, n, w0.clone())?, cfg, None)?;
    if !center.status.completed() {
        return Err(Error::VariationBlowUp(format!(
            "central geodesic stopped early: {:?}",
            center.status
        )));
    }
    let so = vcfg.s_offset;
    let stencil: Vec<(f64, f64)> = match vcfg.stencil {
        Stencil::Central2 => vec![(-so, -0.5 / so), (so, 0.5 / so)],
        Stencil::Central4 => vec![
            (-2.0 * so, 1.0 / (12.0 * so)),
            (-so, -8.0 / (12.0 * so)),
            (so, 8.0 / (12.0 * so)),
            (2.0 * so, -1.0 / (12.0 * so)),
        ],
    };
    let count = center.points.len();
    let mut deriv = vec![vec![0.0; n]; count];
    for (off, weight) in stencil {
        let bases = member(off)?;
        for (row, base) in deriv.iter_mut().zip(&bases) {
            for i in 0..n {
                row[i] += weight * base[i];
            }
        }
    }
    let points = center
        .points
        .iter()
        .zip(&deriv)
        .map(|(p, j)| {
            let mut coords = p.coords()[..n].to_vec();
            coords.extend_from_slice(j);
            BundlePoint::new(1, n, coords)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: center.times,
        points,
        status: FlowStatus::Completed,
        error_estimate: None,
    })
}

/// Max residual of the variational equations over a stored (x, J)
/// trajectory, with time derivatives reconstructed by central differences.
/// Independent of how the trajectory was produced.
pub fn jacobi_residual_fd(s: &Semispray, traj: &Trajectory) -> Result<f64> {
    let n = s.n();
    if traj.points.len() < 3 {
        return Err(Error::Input(
            "residual check needs at least three samples".into(),
        ));
    }
    let h = traj.spacing().expect("three samples give a spacing");
    let pts = &traj.points;
    let mut worst = 0.0f64;
    for i in 1..pts.len() - 1 {
        let prev = pts[i - 1].coords();
        let here = pts[i].coords();
        let next = pts[i + 1].coords();
        let mut phase = vec![0.0; 2 * n];
        for a in 0..n {
            phase[a] = here[a];
            phase[n + a] = (next[a] - prev[a]) / (2.0 * h);
        }
        for comp in 0..n {
            let jet = s.coeffs()[comp].jet_gen(&phase, Order::Grad)?;
            let jdd = (next[n + comp] - 2.0 * here[n + comp] + prev[n + comp]) / (h * h);
            let mut acc = 0.0;
            for a in 0..n {
                let jval = here[n + a];
                let kval = (next[n + a] - prev[n + a]) / (2.0 * h);
                acc += jet.grad[a] * jval + jet.grad[n + a] * kval;
            }
            worst = worst.max((jdd + 2.0 * acc).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PushforwardReport {
    /// Max distance between the lifted flow and the kappa-conjugated
    /// finite-difference pushforward; `None` when either flow stopped.
    pub residual: Option<f64>,
    pub base_status: FlowStatus,
    pub lifted_status: FlowStatus,
    /// Both flows completed, or both stopped early.
    pub domains_consistent: bool,
}

/// Central-difference step for the pushforward in `flow_pushforward_check`.
pub const PUSHFORWARD_FD_STEP: f64 = 1e-6;

/// Verifies that the complete lift's flow is the kappa-conjugated
/// pushforward of the base flow: the lifted integral curve from xi meets
/// kappa of the graph (flow(p), Dflow(p) w) at time t, where
/// kappa(xi) = (p, w) and Dflow is approximated by central differences
/// over perturbed initial conditions.
pub fn flow_pushforward_check(
    a: &VectorField,
    t: f64,
    xi: &BundlePoint,
    cfg: &IntegratorConfig,
    chart: Option<&ChartSpec>,
) -> Result<PushforwardReport> {
    if xi.level() != a.level() + 1 || xi.n() != a.n() {
        return Err(Error::LevelMismatch(
            "pushforward check needs a point one level above the field".into(),
        ));
    }
    let run_cfg = cfg.clone().with_span(0.0, t);
    let half = xi.dim() / 2;
    let swapped = kappa(xi)?;
    let p = swapped.coords()[..half].to_vec();
    let w = swapped.coords()[half..].to_vec();
    let (level, n) = (a.level(), a.n());
    let base_flow = |start: Vec<f64>| -> Result<Trajectory> {
        integrate(a, &BundlePoint::new(level, n, start)?, &run_cfg, chart)
    };
    let base = base_flow(p.clone())?;
    let lifted = integrate(&a.clift()?, xi, &run_cfg, chart)?;
    for status in [&base.status, &lifted.status] {
        if let FlowStatus::LeftChart { t } = status {
            return Err(Error::FlowEscaped(format!("flow left the chart at t = {t}")));
        }
    }
    let domains_consistent = base.status.completed() == lifted.status.completed();
    if !(base.status.completed() && lifted.status.completed()) {
        return Ok(PushforwardReport {
            residual: None,
            base_status: base.status,
            lifted_status: lifted.status,
            domains_consistent,
        });
    }
    let phi = base.end().expect("completed").coords().to_vec();
    let mut pushed = vec![0.0; half];
    for j in 0..half {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[j] += PUSHFORWARD_FD_STEP;
        minus[j] -= PUSHFORWARD_FD_STEP;
        let fp = base_flow(plus)?;
        let fm = base_flow(minus)?;
        if !(fp.status.completed() && fm.status.completed()) {
            return Ok(PushforwardReport {
                residual: None,
                base_status: base.status,
                lifted_status: lifted.status,
                domains_consistent,
            });
        }
        let ep = fp.end().expect("completed").coords();
        let em = fm.end().expect("completed").coords();
        for i in 0..half {
            pushed[i] += w[j] * (ep[i] - em[i]) / (2.0 * PUSHFORWARD_FD_STEP);
        }
    }
    let mut graph = phi;
    graph.extend(pushed);
    let conjugated = kappa(&BundlePoint::new(xi.level(), n, graph)?)?;
    let lift_end = lifted.end().expect("completed").coords();
    let residual = lift_end
        .iter()
        .zip(conjugated.coords())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    Ok(PushforwardReport {
        residual: Some(residual),
        base_status: base.status,
        lifted_status: lifted.status,
        domains_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    fn euclidean(n: usize) -> Semispray {
        let coeffs = (0..n).map(|_| ScalarField::constant(1, n, 0.0)).collect();
        Semispray::new(1, n, coeffs).unwrap()
    }

    fn oscillator() -> Semispray {
        Semispray::from_sources(1, 1, &["x1/2"]).unwrap()
    }

    fn funk2() -> Semispray {
        Semispray::from_sources(
            1,
            2,
            &["sqrt(y1^2 + y2^2) * y1", "sqrt(y1^2 + y2^2) * y2"],
        )
        .unwrap()
    }

    fn cfg(t1: f64) -> IntegratorConfig {
        IntegratorConfig::default().with_span(0.0, t1)
    }

    #[test]
    fn euclidean_flow_is_exact() {
        let traj = geodesic(&euclidean(2), &[0.0, 0.0], &[1.0, 0.0], &cfg(1.0), None).unwrap();
        assert!(traj.status.completed());
        assert_eq!(traj.points.len(), 1001);
        let end = traj.end().unwrap().coords();
        assert!((end[0] - 1.0).abs() < 1e-12);
        assert!(end[1].abs() < 1e-12);
    }

    #[test]
    fn oscillator_flow_matches_closed_form() {
        let traj = geodesic(&oscillator(), &[0.0], &[1.0], &cfg(1.0), None).unwrap();
        assert!(traj.status.completed());
        let end = traj.end().unwrap().coords();
        assert!((end[0] - 1f64.sin()).abs() < 1e-9, "x(1) = {}", end[0]);
        // The full phase flow also pins the velocity.
        let phase = integrate(
            &oscillator().as_vector_field(),
            &BundlePoint::new(1, 1, vec![0.0, 1.0]).unwrap(),
            &cfg(1.0),
            None,
        )
        .unwrap();
        let e = phase.end().unwrap().coords();
        assert!((e[1] - 1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn affine_log_flow_matches_closed_form() {
        let conn = crate::models::Connection::from_sources(1, &["1"]).unwrap();
        let traj = geodesic(&conn.spray().unwrap(), &[0.0], &[1.0], &cfg(1.0), None).unwrap();
        let end = traj.end().unwrap().coords();
        assert!((end[0] - 2f64.ln()).abs() < 1e-8, "x(1) = {}", end[0]);
    }

    #[test]
    fn half_step_estimate_bounds_the_oscillator_error() {
        let mut c = cfg(1.0);
        c.half_step_error = true;
        let traj = geodesic(&oscillator(), &[0.0], &[1.0], &c, None).unwrap();
        let est = traj.error_estimate.unwrap();
        let true_err = (traj.end().unwrap().coords()[0] - 1f64.sin()).abs();
        assert!(est < 1e-9);
        assert!(true_err <= 20.0 * est.max(1e-14), "err {true_err}, est {est}");
    }

    #[test]
    fn jacobi_routes_agree_for_the_oscillator() {
        let s = oscillator();
        let direct = jacobi_direct(&s, &[0.0], &[1.0], &[0.0], &[1.0], &cfg(5.0)).unwrap();
        let xi0 = BundlePoint::new(2, 1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let lifted = jacobi_via_lift(&s, &xi0, &cfg(5.0)).unwrap();
        assert!(direct.status.completed() && lifted.status.completed());
        let mut sup = 0.0f64;
        for (a, b) in direct.points.iter().zip(&lifted.points) {
            for (x, y) in a.coords().iter().zip(b.coords()) {
                sup = sup.max((x - y).abs());
            }
        }
        assert!(sup < 1e-8, "sup difference {sup}");
        // J(pi/2) = sin(pi/2) = 1 for the closed-form Jacobi solution.
        let quarter = jacobi_direct(
            &s,
            &[0.0],
            &[1.0],
            &[0.0],
            &[1.0],
            &cfg(std::f64::consts::FRAC_PI_2),
        )
        .unwrap();
        let end = quarter.end().unwrap().coords();
        assert!((end[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn euclidean_jacobi_is_linear_in_time() {
        let s = euclidean(2);
        let traj = jacobi_direct(
            &s,
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[0.1, 0.2],
            &[0.3, -0.4],
            &cfg(2.0),
        )
        .unwrap();
        for (t, p) in traj.times.iter().zip(&traj.points) {
            let c = p.coords();
            assert!((c[2] - (0.1 + 0.3 * t)).abs() < 1e-12);
            assert!((c[3] - (0.2 - 0.4 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_curves_are_jacobi_fields() {
        // J = c'(t) along the oscillator geodesic: the phase flow's (x, v)
        // samples are exactly (x, J) for that Jacobi field.
        let s = oscillator();
        let phase = integrate(
            &s.as_vector_field(),
            &BundlePoint::new(1, 1, vec![0.0, 1.0]).unwrap(),
            &cfg(5.0),
            None,
        )
        .unwrap();
        let res = jacobi_residual_fd(&s, &phase).unwrap();
        assert!(res < 1e-7, "residual {res}");
        // t c'(t) solves the variational equations for sprays.
        let funk = funk2();
        let fphase = integrate(
            &funk.as_vector_field(),
            &BundlePoint::new(1, 2, vec![0.0, 0.0, 0.6, 0.8]).unwrap(),
            &cfg(3.0),
            None,
        )
        .unwrap();
        assert!(fphase.status.completed());
        let scaled = Trajectory {
            times: fphase.times.clone(),
            points: fphase
                .times
                .iter()
                .zip(&fphase.points)
                .map(|(t, p)| {
                    let c = p.coords();
                    BundlePoint::new(1, 2, vec![c[0], c[1], t * c[2], t * c[3]]).unwrap()
                })
                .collect(),
            status: fphase.status,
            error_estimate: None,
        };
        let res = jacobi_residual_fd(&funk, &scaled).unwrap();
        assert!(res < 1e-5, "residual {res}");
    }

    #[test]
    fn variation_field_converges_to_the_jacobi_field() {
        let s = oscillator();
        let xi0 = BundlePoint::new(2, 1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let c = cfg(std::f64::consts::PI);
        let direct = jacobi_direct(&s, &[0.0], &[1.0], &[0.0], &[1.0], &c).unwrap();
        let var = variation_field(&s, &xi0, &VariationConfig::default(), &c).unwrap();
        let mut sup = 0.0f64;
        for (a, b) in direct.points.iter().zip(&var.points) {
            sup = sup.max((a.coords()[1] - b.coords()[1]).abs());
        }
        assert!(sup < 1e-6, "sup error {sup}");
        // Euclidean with a velocity displacement: variation = t * dv exactly.
        let e = euclidean(2);
        let xi = BundlePoint::new(2, 2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, -0.2]).unwrap();
        let ev = variation_field(&e, &xi, &VariationConfig::default(), &cfg(2.0)).unwrap();
        for (t, p) in ev.times.iter().zip(&ev.points) {
            let c = p.coords();
            assert!((c[2] - 0.3 * t).abs() < 1e-9);
            assert!((c[3] + 0.2 * t).abs() < 1e-9);
        }
    }

    #[test]
    fn richardson_halving_shrinks_the_variation_error() {
        // Central-2 differencing in s has O(s^2) error; halving s should
        // shrink the defect against the true Jacobi field by about 4. A
        // model whose flow is nonlinear in its initial conditions is
        // needed, otherwise the differencing is exact and only noise
        // remains.
        let metric = crate::models::Metric::from_sources(2, &["1", "0", "0", "1 + x1^2"]).unwrap();
        let s = metric.geodesic_spray().unwrap();
        let x0 = [0.5, 0.0];
        let v0 = [0.3, 1.0];
        let j0 = [1.0, 0.0];
        let k0 = [0.0, 0.5];
        let xi0 = BundlePoint::new(
            2,
            2,
            vec![x0[0], x0[1], j0[0], j0[1], v0[0], v0[1], k0[0], k0[1]],
        )
        .unwrap();
        let c = cfg(2.0);
        let direct = jacobi_direct(&s, &x0, &v0, &j0, &k0, &c).unwrap();
        let sup_for = |s_offset: f64| {
            let vcfg = VariationConfig {
                s_offset,
                stencil: Stencil::Central2,
            };
            let var = variation_field(&s, &xi0, &vcfg, &c).unwrap();
            direct
                .points
                .iter()
                .zip(&var.points)
                .fold(0.0f64, |acc, (a, b)| {
                    let ac = a.coords();
                    let bc = b.coords();
                    acc.max((ac[2] - bc[2]).abs()).max((ac[3] - bc[3]).abs())
                })
        };
        let coarse = sup_for(1e-3);
        let fine = sup_for(5e-4);
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn regularity_loss_stops_slashed_flows() {
        // G = |y| y decelerates; started barely above the threshold the
        // trajectory is empty, started on the zero section it is an error.
        let funk = Semispray::from_sources(1, 1, &["sqrt(y1^2) * y1"]).unwrap();
        let vf = funk.as_vector_field();
        assert!(vf.slashed_only());
        let mut c = cfg(5.0);
        c.eps_reg = 1e-2;
        let marginal = BundlePoint::new(1, 1, vec![0.0, 5e-3]).unwrap();
        let traj = integrate(&vf, &marginal, &c, None).unwrap();
        assert!(traj.points.is_empty());
        assert!(matches!(traj.status, FlowStatus::RegularityLost { .. }));
        let zero = BundlePoint::new(1, 1, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            integrate(&vf, &zero, &c, None),
            Err(Error::Input(_))
        ));
        // A decelerating start eventually crosses the threshold.
        let start = BundlePoint::new(1, 1, vec![0.0, 0.02]).unwrap();
        let traj = integrate(&vf, &start, &c.with_span(0.0, 100.0), None).unwrap();
        assert!(matches!(traj.status, FlowStatus::RegularityLost { .. }));
    }

    #[test]
    fn blow_up_is_reported_in_time() {
        // dx/dt = x^2 from x0 = 1 blows up at t = 1.
        let a = VectorField::from_sources(0, 1, &["x1^2"]).unwrap();
        let p = BundlePoint::new(0, 1, vec![1.0]).unwrap();
        let mut c = cfg(1.2);
        c.blowup_bound = 1e8;
        let traj = integrate(&a, &p, &c, None).unwrap();
        match traj.status {
            FlowStatus::BlowUp { t } => assert!((t - 1.0).abs() < 0.01, "blow-up at {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn chart_exit_is_reported() {
        let a = VectorField::from_sources(0, 1, &["1"]).unwrap();
        let chart = ChartSpec::boxed(vec![-1.0], vec![1.0]).unwrap();
        let p = BundlePoint::new(0, 1, vec![0.0]).unwrap();
        let traj = integrate(&a, &p, &cfg(3.0), Some(&chart)).unwrap();
        match traj.status {
            FlowStatus::LeftChart { t } => assert!((t - 1.0).abs() < 0.01),
            other => panic!("expected chart exit, got {other:?}"),
        }
    }

    #[test]
    fn pushforward_identity_for_linear_and_translation_flows() {
        let c = cfg(1.0);
        // Translation: residual is zero up to differencing noise.
        let a = VectorField::from_sources(0, 1, &["1"]).unwrap();
        let xi = BundlePoint::new(1, 1, vec![0.2, 0.7]).unwrap();
        let rep = flow_pushforward_check(&a, 1.0, &xi, &c, None).unwrap();
        assert!(rep.domains_consistent);
        assert!(rep.residual.unwrap() < 1e-9);
        // Linear: flow(x) = x e^t with derivative e^t.
        let b = VectorField::from_sources(0, 1, &["x1"]).unwrap();
        let rep = flow_pushforward_check(&b, 1.0, &xi, &c, None).unwrap();
        assert!(rep.residual.unwrap() < 1e-6, "residual {:?}", rep.residual);
        // Blow-up co-occurrence for dx/dt = x^2.
        let q = VectorField::from_sources(0, 1, &["x1^2"]).unwrap();
        let xi = BundlePoint::new(1, 1, vec![1.0, 0.5]).unwrap();
        let mut cb = cfg(1.2);
        cb.blowup_bound = 1e8;
        let rep = flow_pushforward_check(&q, 1.2, &xi, &cb, None).unwrap();
        assert!(rep.domains_consistent);
        assert!(rep.residual.is_none());
        let tb = rep.base_status.stop_time().unwrap();
        let tl = rep.lifted_status.stop_time().unwrap();
        assert!((tb - 1.0).abs() < 0.01 && (tl - 1.0).abs() < 0.01);
    }

    #[test]
    fn tangent_lift_flow_is_kappa_conjugate_of_complete_lift_flow() {
        let funk = funk2();
        let xi0 =
            BundlePoint::new(2, 2, vec![0.1, -0.2, 0.4, 0.3, 0.6, 0.8, 0.1, -0.1]).unwrap();
        let c = cfg(2.0);
        let sc_flow = integrate(
            &funk.complete_lift().unwrap().as_vector_field(),
            &xi0,
            &c,
            None,
        )
        .unwrap();
        let st_flow =
            integrate(&funk.tangent_lift().unwrap(), &kappa(&xi0).unwrap(), &c, None).unwrap();
        assert!(sc_flow.status.completed() && st_flow.status.completed());
        for (a, b) in sc_flow.points.iter().zip(&st_flow.points) {
            let swapped = kappa(b).unwrap();
            for (x, y) in a.coords().iter().zip(swapped.coords()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
