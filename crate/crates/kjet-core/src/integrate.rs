//! Fixed-step integration of k-path and autoparallel systems, trajectory
//! residuals, and CSV export.

use std::io::Write;

use crate::context::Context;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::phase::PhasePoint;
use crate::sample::DEFAULT_MARGIN;
use crate::semispray::KSemispray;

/// A first-order ODE system on the `(k+1) n` dimensional state
/// `(x, y(1), ..., y(k))`, with symbolic right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    pub ctx: Context,
    pub rhs: Vec<Expr>,
}

impl OdeSystem {
    pub fn new(ctx: Context, rhs: Vec<Expr>) -> Result<OdeSystem> {
        if rhs.len() != ctx.slots() {
            return Err(Error::ShapeMismatch(format!(
                "system has {} equations, state dimension is {}",
                rhs.len(),
                ctx.slots()
            )));
        }
        Ok(OdeSystem { ctx, rhs })
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.rhs
            .iter()
            .map(|e| e.evaluate_slots(self.ctx, state))
            .collect()
    }
}

/// The k-path system of a semispray: the assembled field components read as
/// state derivatives, `dx/dt = y(1), ..., dy(k)/dt = -(k+1) G`.
pub fn kpath_system(s: &KSemispray) -> OdeSystem {
    let field = s.assemble_field();
    OdeSystem {
        ctx: s.ctx,
        rhs: field.components,
    }
}

/// Fixed-step configuration for the classical 4-stage Runge-Kutta method.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub step: f64,
    /// Slit margin; a state whose y(1) block drops below it stops the run.
    pub margin: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-3,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// A trajectory on a uniform grid. `slit_exit` carries the time at which the
/// state left the slit domain, if it did; the flagged state is the last one.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub ctx: Context,
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub slit_exit: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &PhasePoint {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Classical 4-stage fixed-step Runge-Kutta. The grid `(t1 - t0)/step` must
/// be an integer count; global error is O(step^4).
pub fn integrate(
    sys: &OdeSystem,
    init: &PhasePoint,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    init.check_shape(sys.ctx)?;
    if !init.admissible(cfg.margin) {
        return Err(Error::Invalid(format!(
            "initial state is inside the slit margin {}",
            cfg.margin
        )));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::Invalid("step must be positive".to_string()));
    }
    if t1 < t0 {
        return Err(Error::Invalid("t1 must be >= t0".to_string()));
    }
    let raw = (t1 - t0) / cfg.step;
    let count = raw.round() as usize;
    if (raw - count as f64).abs() > 1e-9 * (1.0 + raw.abs()) {
        return Err(Error::Invalid(format!(
            "(t1 - t0)/step = {raw} is not an integer step count"
        )));
    }
    let mut times = Vec::with_capacity(count + 1);
    let mut states = Vec::with_capacity(count + 1);
    let mut state = init.flatten();
    times.push(t0);
    states.push(init.clone());
    let h = cfg.step;
    let mut slit_exit = None;
    for step_idx in 0..count {
        let t = t0 + h * step_idx as f64;
        let next = rk4_step(sys, &state, h).map_err(|e| Error::Eval(format!("{e} at t = {t}")))?;
        state = next;
        let point = PhasePoint::from_flat(sys.ctx, &state)?;
        times.push(t0 + h * (step_idx + 1) as f64);
        let admissible = point.admissible(cfg.margin);
        states.push(point);
        if !admissible {
            slit_exit = Some(t0 + h * (step_idx + 1) as f64);
            break;
        }
    }
    Ok(Trajectory {
        ctx: sys.ctx,
        times,
        states,
        slit_exit,
    })
}

fn rk4_step(sys: &OdeSystem, state: &[f64], h: f64) -> Result<Vec<f64>> {
    let dim = state.len();
    let k1 = sys.eval(state)?;
    let mut tmp = vec![0.0; dim];
    for i in 0..dim {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    let k2 = sys.eval(&tmp)?;
    for i in 0..dim {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    let k3 = sys.eval(&tmp)?;
    for i in 0..dim {
        tmp[i] = state[i] + h * k3[i];
    }
    let k4 = sys.eval(&tmp)?;
    let mut out = vec![0.0; dim];
    for i in 0..dim {
        out[i] = state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Maximum over interior grid points of the sup-norm gap between the central
/// difference of the trajectory and the system right-hand side; measures
/// whether a trajectory of one system satisfies another.
pub fn residual_along(traj: &Trajectory, sys: &OdeSystem) -> Result<f64> {
    if traj.states.is_empty() {
        return Err(Error::Invalid("empty trajectory".to_string()));
    }
    if traj.states.len() < 3 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    let flat: Vec<Vec<f64>> = traj.states.iter().map(|s| s.flatten()).collect();
    for i in 1..flat.len() - 1 {
        let h = traj.times[i + 1] - traj.times[i - 1];
        let rhs = sys.eval(&flat[i])?;
        for c in 0..rhs.len() {
            let diff = (flat[i + 1][c] - flat[i - 1][c]) / h;
            worst = worst.max((diff - rhs[c]).abs());
        }
    }
    Ok(worst)
}

/// CSV export: header `t,x1..xn,y1_1..y1_n,...,yk_1..yk_n`, one row per grid
/// point, 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    let ctx = traj.ctx;
    let mut header = String::from("t");
    for label in state_labels(ctx) {
        header.push(',');
        header.push_str(&label);
    }
    writeln!(out, "{header}")?;
    for (t, state) in traj.times.iter().zip(traj.states.iter()) {
        let mut row = format!("{:.16e}", t);
        for v in state.flatten() {
            row.push_str(&format!(",{:.16e}", v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// State labels matching the CSV column order.
pub fn state_labels(ctx: Context) -> Vec<String> {
    let mut labels = Vec::with_capacity(ctx.slots());
    for i in 1..=ctx.n {
        labels.push(format!("x{i}"));
    }
    for m in 1..=ctx.k {
        for i in 1..=ctx.n {
            labels.push(format!("y{m}_{i}"));
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn ctx12() -> Context {
        Context::new(1, 2).unwrap()
    }

    fn spray(g: &str) -> KSemispray {
        KSemispray::new(ctx12(), vec![parse_expr(g, ctx12()).unwrap()]).unwrap()
    }

    fn init011() -> PhasePoint {
        PhasePoint::new(vec![0.0], vec![vec![1.0], vec![1.0]])
    }

    #[test]
    fn kpath_system_rhs() {
        let sys = kpath_system(&spray("0"));
        assert_eq!(sys.rhs[0], parse_expr("y(1,1)", ctx12()).unwrap());
        assert_eq!(sys.rhs[1], parse_expr("2*y(2,1)", ctx12()).unwrap());
        assert!(sys.rhs[2].is_zero());

        let sys = kpath_system(&spray("-y(1,1)/3"));
        assert_eq!(sys.rhs[2], parse_expr("y(1,1)", ctx12()).unwrap());

        let sys = kpath_system(&spray("y(1,1)^3"));
        assert_eq!(sys.rhs[2], parse_expr("-3*y(1,1)^3", ctx12()).unwrap());
    }

    #[test]
    fn free_kpath_hits_closed_form() {
        // G = 0: x(t) = t^2 + t, y1 = 1 + 2t, y2 = 1 from (0, 1, 1)
        let sys = kpath_system(&spray("0"));
        let traj = integrate(&sys, &init011(), 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        let last = traj.final_state();
        assert!((last.x[0] - 2.0).abs() < 1e-8);
        assert!((last.y[0][0] - 3.0).abs() < 1e-8);
        assert!((last.y[1][0] - 1.0).abs() < 1e-8);
        assert_eq!(traj.times.len(), 1001);
        assert!(traj.slit_exit.is_none());
    }

    #[test]
    fn zero_length_interval() {
        let sys = kpath_system(&spray("0"));
        let traj = integrate(&sys, &init011(), 0.0, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0], init011());
    }

    #[test]
    fn inadmissible_init_is_rejected() {
        let sys = kpath_system(&spray("0"));
        let bad = PhasePoint::new(vec![0.0], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            integrate(&sys, &bad, 0.0, 1.0, &IntegratorConfig::default()),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn slit_exit_stops_and_flags() {
        // dy(1)/dt = -1 forces y(1) through the margin
        let ctx = Context::new(1, 1).unwrap();
        let sys = OdeSystem::new(
            ctx,
            vec![parse_expr("y(1,1)", ctx).unwrap(), Expr::int(-1)],
        )
        .unwrap();
        let init = PhasePoint::new(vec![0.0], vec![vec![0.5]]);
        let cfg = IntegratorConfig {
            step: 0.01,
            ..Default::default()
        };
        let traj = integrate(&sys, &init, 0.0, 1.0, &cfg).unwrap();
        assert!(traj.slit_exit.is_some());
        assert!(traj.times.len() < 101);
    }

    #[test]
    fn self_residual_is_discretization_level() {
        let sys = kpath_system(&spray("y(1,1)*y(2,1)"));
        let traj = integrate(&sys, &init011(), 0.0, 0.5, &IntegratorConfig::default()).unwrap();
        let r = residual_along(&traj, &sys).unwrap();
        assert!(r <= 1e-5, "self residual {r}");
    }

    #[test]
    fn constant_trajectory_against_zero_system() {
        let ctx = Context::new(1, 1).unwrap();
        let zero_sys = OdeSystem::new(ctx, vec![Expr::zero(), Expr::zero()]).unwrap();
        let state = PhasePoint::new(vec![1.0], vec![vec![1.0]]);
        let traj = Trajectory {
            ctx,
            times: vec![0.0, 0.1, 0.2, 0.3],
            states: vec![state.clone(), state.clone(), state.clone(), state],
            slit_exit: None,
        };
        assert_eq!(residual_along(&traj, &zero_sys).unwrap(), 0.0);
    }

    #[test]
    fn cross_residual_detects_different_systems() {
        // G = 0 trajectory measured against the G = y^3 system: the gap in
        // the top equation is 3 |y(1)|^3 > 0 on the slit domain
        let free = kpath_system(&spray("0"));
        let cubic = kpath_system(&spray("y(1,1)^3"));
        let traj = integrate(&free, &init011(), 0.0, 0.5, &IntegratorConfig::default()).unwrap();
        let r = residual_along(&traj, &cubic).unwrap();
        assert!(r >= 3.0, "expected at least 3|y1|^3 >= 3, got {r}");
    }

    #[test]
    fn fourth_order_convergence() {
        // G = -y/3 has the closed form through exp(+-sqrt(2) t)
        let sys = kpath_system(&spray("-y(1,1)/3"));
        let exact = |t: f64| -> [f64; 3] {
            let s2 = 2.0f64.sqrt();
            let (x0, u0, v0) = (0.0, 1.0, 1.0);
            let a = (u0 + s2 * v0) / 2.0;
            let b = (u0 - s2 * v0) / 2.0;
            let ep = (s2 * t).exp();
            let em = (-s2 * t).exp();
            [
                x0 + (a * (ep - 1.0) - b * (em - 1.0)) / s2,
                a * ep + b * em,
                (s2 / 2.0) * (a * ep - b * em),
            ]
        };
        let run = |h: f64| -> f64 {
            let cfg = IntegratorConfig {
                step: h,
                ..Default::default()
            };
            let traj = integrate(&sys, &init011(), 0.0, 1.0, &cfg).unwrap();
            let last = traj.final_state().flatten();
            let want = exact(1.0);
            last.iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = run(0.05);
        let fine = run(0.025);
        assert!(
            coarse / fine >= 12.0,
            "expected 4th-order improvement, got {coarse:.3e} / {fine:.3e}"
        );
    }

    #[test]
    fn csv_format() {
        let sys = kpath_system(&spray("0"));
        let cfg = IntegratorConfig {
            step: 0.5,
            ..Default::default()
        };
        let traj = integrate(&sys, &init011(), 0.0, 1.0, &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,y1_1,y2_1");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 4);
        assert_eq!(text.lines().count(), 4);
    }
}
