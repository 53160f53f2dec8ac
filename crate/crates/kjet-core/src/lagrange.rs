//! Lagrange and Finsler structures of order k: the metric tensor, regularity,
//! the canonical semispray, the Finsler axioms, and the Cartan nonlinear
//! connection.

use nalgebra::DMatrix;

use crate::connections::{miron_connection, DualCoefficients, ExprMatrix};
use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::phase::{euler_degree, gamma_operator, PhasePoint};
use crate::report::{CheckReport, CheckStatus, WorstResidual};
use crate::sample::{sample_points, SampleBox, DEFAULT_MARGIN};
use crate::semispray::KSemispray;

pub const REGULARITY_THRESHOLD: f64 = 1e-8;

/// An order-k Lagrangian with its sampling domain. With `finsler` set the
/// expression is read as the squared fundamental function F^2 and the
/// Finsler axioms become checkable.
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    pub ctx: Context,
    pub l: Expr,
    pub finsler: bool,
    pub domain: SampleBox,
}

impl LagrangianSpec {
    pub fn new(ctx: Context, l: Expr, finsler: bool, domain: SampleBox) -> Result<LagrangianSpec> {
        domain.validate(ctx)?;
        if l.max_level().is_some_and(|lv| lv > ctx.k) {
            return Err(Error::CoordOutOfRange(format!(
                "Lagrangian '{l}' leaves the ambient context"
            )));
        }
        Ok(LagrangianSpec { ctx, l, finsler, domain })
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
        sample_points(&self.domain, self.ctx, count, seed, DEFAULT_MARGIN)
    }
}

/// The metric tensor `g(i,j) = (1/2) d^2 L / dy(k,i) dy(k,j)` together with
/// its inverse strategy: symbolic adjugate over determinant for n <= 3,
/// per-point LU beyond that.
#[derive(Debug, Clone)]
pub struct MetricTensor {
    pub ctx: Context,
    pub g: ExprMatrix,
    pub det: Expr,
    /// Symbolic inverse, present for n <= 3 with a nonzero determinant.
    pub inverse: Option<ExprMatrix>,
}

pub fn metric_tensor(spec: &LagrangianSpec) -> MetricTensor {
    let ctx = spec.ctx;
    let half = Expr::rational(1, 2);
    let g: ExprMatrix = (1..=ctx.n)
        .map(|i| {
            (1..=ctx.n)
                .map(|j| {
                    Expr::mul(
                        half.clone(),
                        spec.l
                            .differentiate(CoordId::velocity(ctx.k, i))
                            .differentiate(CoordId::velocity(ctx.k, j)),
                    )
                })
                .collect()
        })
        .collect();
    let det = symbolic_det(&g);
    let inverse = if ctx.n <= 3 && !det.is_zero() {
        Some(symbolic_inverse(&g, &det))
    } else {
        None
    };
    MetricTensor { ctx, g, det, inverse }
}

fn symbolic_det(g: &ExprMatrix) -> Expr {
    match g.len() {
        1 => g[0][0].clone(),
        2 => Expr::sub(
            Expr::mul(g[0][0].clone(), g[1][1].clone()),
            Expr::mul(g[0][1].clone(), g[1][0].clone()),
        ),
        n => {
            // cofactor expansion along the first row
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                let minor: ExprMatrix = (1..n)
                    .map(|r| {
                        (0..n)
                            .filter(|c| *c != j)
                            .map(|c| g[r][c].clone())
                            .collect()
                    })
                    .collect();
                let term = Expr::mul(g[0][j].clone(), symbolic_det(&minor));
                terms.push(if j % 2 == 0 { term } else { Expr::neg(term) });
            }
            Expr::sum(terms)
        }
    }
}

fn symbolic_inverse(g: &ExprMatrix, det: &Expr) -> ExprMatrix {
    let n = g.len();
    let mut inv = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            // adjugate entry (i, j) = cofactor (j, i)
            let minor: ExprMatrix = (0..n)
                .filter(|r| *r != j)
                .map(|r| {
                    (0..n)
                        .filter(|c| *c != i)
                        .map(|c| g[r][c].clone())
                        .collect()
                })
                .collect();
            let cof = if minor.is_empty() {
                Expr::one()
            } else {
                symbolic_det(&minor)
            };
            let signed = if (i + j) % 2 == 0 { cof } else { Expr::neg(cof) };
            inv[i][j] = Expr::quotient(signed, det.clone());
        }
    }
    inv
}

impl MetricTensor {
    pub fn eval(&self, p: &PhasePoint) -> Result<DMatrix<f64>> {
        let flat = p.flatten();
        let n = self.ctx.n;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self.g[i][j].evaluate_slots(self.ctx, &flat)?;
            }
        }
        Ok(out)
    }

    /// Per-point numeric inverse with partial pivoting; the fallback used
    /// when no symbolic inverse is stored.
    pub fn inverse_at(&self, p: &PhasePoint) -> Result<DMatrix<f64>> {
        let m = self.eval(p)?;
        let lu = m.lu();
        let det = lu.determinant();
        if det.abs() < REGULARITY_THRESHOLD {
            return Err(Error::SingularMetric(format!(
                "determinant {det:.3e} at {:?}",
                p.flatten()
            )));
        }
        lu.try_inverse()
            .ok_or_else(|| Error::SingularMetric("inverse failed".to_string()))
    }
}

/// Regularity: `|det g| > threshold` at every sample; the report carries the
/// minimum determinant magnitude and the point where it occurred.
pub fn regularity_check(m: &MetricTensor, points: &[PhasePoint]) -> CheckReport {
    let name = "metric_regularity".to_string();
    let mut min_det = f64::INFINITY;
    let mut min_point = None;
    for p in points {
        let det = match m.eval(p) {
            Ok(mat) => mat.determinant(),
            Err(e) => return CheckReport::error(name, e),
        };
        if det.abs() < min_det {
            min_det = det.abs();
            min_point = Some(p.flatten());
        }
    }
    let mut rep = if min_det > REGULARITY_THRESHOLD {
        CheckReport::pass(name, min_det)
    } else {
        CheckReport::fail(name, min_det)
    };
    rep.point = min_point;
    rep.notes.push(format!("min |det g| = {min_det:.6e}"));
    rep
}

/// Constant-signature check: the sign pattern of the leading principal
/// minors must not change across the sampled domain.
pub fn signature_check(m: &MetricTensor, points: &[PhasePoint]) -> CheckReport {
    let name = "metric_signature".to_string();
    let mut reference: Option<Vec<bool>> = None;
    for p in points {
        let mat = match m.eval(p) {
            Ok(mat) => mat,
            Err(e) => return CheckReport::error(name, e),
        };
        let signs: Vec<bool> = (1..=m.ctx.n)
            .map(|d| mat.view((0, 0), (d, d)).determinant() > 0.0)
            .collect();
        match &reference {
            None => reference = Some(signs),
            Some(r) if *r != signs => {
                return CheckReport::fail(name, 1.0).at_point(p.flatten());
            }
            _ => {}
        }
    }
    CheckReport::pass(name, 0.0)
}

fn euler_lagrange_forces(spec: &LagrangianSpec) -> Vec<Expr> {
    let ctx = spec.ctx;
    let gamma = gamma_operator(ctx);
    (1..=ctx.n)
        .map(|j| {
            let top = spec.l.differentiate(CoordId::velocity(ctx.k, j));
            let lower = if ctx.k >= 2 {
                spec.l.differentiate(CoordId::velocity(ctx.k - 1, j))
            } else {
                spec.l.differentiate(CoordId::base(j))
            };
            Expr::sub(gamma.apply(&top), lower)
        })
        .collect()
}

/// The canonical semispray of a regular Lagrangian:
/// `(k+1) G(i) = (1/2) g^(i j) { Gamma(dL/dy(k,j)) - dL/dy(k-1,j) }`.
/// Symbolic for n <= 3; use [`canonical_spray_evaluator`] beyond that.
pub fn canonical_semispray(spec: &LagrangianSpec) -> Result<KSemispray> {
    let ctx = spec.ctx;
    let metric = metric_tensor(spec);
    if metric.det.is_zero() {
        return Err(Error::SingularMetric(
            "Hessian determinant is identically zero".to_string(),
        ));
    }
    let points = spec.sample(25, 42)?;
    let reg = regularity_check(&metric, &points);
    if reg.status != CheckStatus::Pass {
        return Err(Error::SingularMetric(format!(
            "regularity fails on the declared domain ({})",
            reg.notes.join("; ")
        )));
    }
    let inverse = metric.inverse.clone().ok_or_else(|| {
        Error::SingularMetric(format!(
            "no symbolic inverse for n = {}; use the per-point evaluator",
            ctx.n
        ))
    })?;
    let forces = euler_lagrange_forces(spec);
    let scale = Expr::rational(1, 2 * (ctx.k as i64 + 1));
    let g = (0..ctx.n)
        .map(|i| {
            let contracted = Expr::sum(
                (0..ctx.n)
                    .map(|j| Expr::mul(inverse[i][j].clone(), forces[j].clone()))
                    .collect(),
            );
            Expr::mul(scale.clone(), contracted)
        })
        .collect();
    KSemispray::new(ctx, g)
}

/// Per-point evaluator of the canonical coefficients, for dimensions where
/// the symbolic inverse is not materialized.
pub struct CanonicalSprayEvaluator {
    ctx: Context,
    metric: MetricTensor,
    forces: Vec<Expr>,
}

impl CanonicalSprayEvaluator {
    pub fn g_at(&self, p: &PhasePoint) -> Result<Vec<f64>> {
        let inv = self.metric.inverse_at(p)?;
        let flat = p.flatten();
        let force_vals: Vec<f64> = self
            .forces
            .iter()
            .map(|f| f.evaluate_slots(self.ctx, &flat))
            .collect::<Result<_>>()?;
        let scale = 1.0 / (2.0 * (self.ctx.k as f64 + 1.0));
        Ok((0..self.ctx.n)
            .map(|i| scale * (0..self.ctx.n).map(|j| inv[(i, j)] * force_vals[j]).sum::<f64>())
            .collect())
    }
}

pub fn canonical_spray_evaluator(spec: &LagrangianSpec) -> Result<CanonicalSprayEvaluator> {
    let metric = metric_tensor(spec);
    if metric.det.is_zero() {
        return Err(Error::SingularMetric(
            "Hessian determinant is identically zero".to_string(),
        ));
    }
    Ok(CanonicalSprayEvaluator {
        ctx: spec.ctx,
        forces: euler_lagrange_forces(spec),
        metric,
    })
}

/// Finsler axioms at the sampled points: `F^2 > 0`, `F^2` is 2k-homogeneous,
/// and the Hessian is positive definite (all leading principal minors
/// positive).
pub fn finsler_check(spec: &LagrangianSpec, points: &[PhasePoint], euler_tol: f64) -> CheckReport {
    let name = "finsler_axioms".to_string();
    if !spec.finsler {
        return CheckReport::error(name, "spec is not flagged as Finsler");
    }
    let ctx = spec.ctx;
    let metric = metric_tensor(spec);
    let mut worst = WorstResidual::default();
    let mut failures = Vec::new();
    for p in points {
        let flat = p.flatten();
        let f2 = match spec.l.evaluate_slots(ctx, &flat) {
            Ok(v) => v,
            Err(e) => return CheckReport::error(name, e),
        };
        if f2 <= 0.0 {
            failures.push(format!("F^2 = {f2:.6e} not positive at {flat:?}"));
            worst.update(1.0, &flat);
            continue;
        }
        let mat = match metric.eval(p) {
            Ok(m) => m,
            Err(e) => return CheckReport::error(name, e),
        };
        for d in 1..=ctx.n {
            let minor = mat.view((0, 0), (d, d)).determinant();
            if minor <= 0.0 {
                failures.push(format!(
                    "leading minor {d} = {minor:.6e} not positive at {flat:?}"
                ));
                worst.update(1.0, &flat);
            }
        }
    }
    let euler = euler_degree(&spec.l, 2 * ctx.k as i64, ctx, points, euler_tol);
    match euler.status {
        CheckStatus::Error => {
            return CheckReport::error(name, format!("homogeneity check: {:?}", euler.notes))
        }
        CheckStatus::Fail => {
            failures.push(format!(
                "F^2 is not {}-homogeneous (residual {:.3e})",
                2 * ctx.k,
                euler.residual.unwrap_or(f64::NAN)
            ));
            if let (Some(r), Some(pt)) = (euler.residual, euler.point.as_deref()) {
                worst.update(r, pt);
            }
        }
        CheckStatus::Pass => {
            if let (Some(r), Some(pt)) = (euler.residual, euler.point.as_deref()) {
                worst.update(r, pt);
            }
        }
    }
    let mut rep = if failures.is_empty() {
        let mut r = CheckReport::pass(name, worst.residual);
        r.point = worst.point;
        r
    } else {
        let mut r = CheckReport::fail(name, worst.residual.max(1.0));
        r.point = worst.point;
        r
    };
    rep.notes = failures;
    rep
}

/// The Cartan nonlinear connection of a Finsler structure: the Miron
/// construction applied to the canonical semispray of F^2. The Finsler
/// axioms are re-checked first.
pub fn cartan_connection(spec: &LagrangianSpec) -> Result<(KSemispray, DualCoefficients)> {
    let points = spec.sample(50, 42)?;
    let axioms = finsler_check(spec, &points, 1e-9);
    match axioms.status {
        CheckStatus::Pass => {}
        CheckStatus::Fail => {
            return Err(Error::FinslerAxiomViolation(axioms.notes.join("; ")))
        }
        CheckStatus::Error => {
            return Err(Error::FinslerAxiomViolation(format!(
                "axiom check errored: {}",
                axioms.notes.join("; ")
            )))
        }
    }
    let s = canonical_semispray(spec)?;
    let cartan = miron_connection(&s);
    Ok((s, cartan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::bucataru_connection;
    use crate::parse::parse_expr;
    use crate::phase::default_points;

    fn ctx12() -> Context {
        Context::new(1, 2).unwrap()
    }

    fn spec(l: &str, ctx: Context, finsler: bool) -> LagrangianSpec {
        LagrangianSpec::new(
            ctx,
            parse_expr(l, ctx).unwrap(),
            finsler,
            SampleBox::default_for(ctx),
        )
        .unwrap()
    }

    fn e(s: &str, ctx: Context) -> Expr {
        parse_expr(s, ctx).unwrap()
    }

    #[test]
    fn metric_of_pure_acceleration_is_unit() {
        let m = metric_tensor(&spec("y(2,1)^2", ctx12(), false));
        assert!(m.g[0][0].is_one());
        assert!(m.det.is_one());
    }

    #[test]
    fn metric_mixed_partials() {
        let c = Context::new(2, 2).unwrap();
        let m = metric_tensor(&spec("y(2,1)*y(2,2)", c, false));
        assert!(m.g[0][0].is_zero());
        assert_eq!(m.g[0][1], Expr::rational(1, 2));
        assert_eq!(m.g[1][0], Expr::rational(1, 2));
        assert!(m.g[1][1].is_zero());
    }

    #[test]
    fn metric_coefficient_pullout() {
        let m = metric_tensor(&spec("x(1)*y(2,1)^2", ctx12(), false));
        assert_eq!(m.g[0][0], e("x(1)", ctx12()));
    }

    #[test]
    fn metric_symmetry_for_generated_lagrangians() {
        let c = Context::new(2, 2).unwrap();
        for l in [
            "y(2,1)^2 + y(2,2)^2 + y(2,1)*y(2,2)*x(1)",
            "y(2,1)^2*y(1,1) + y(2,2)^2 + exp(x(2))*y(2,1)*y(2,2)",
        ] {
            let m = metric_tensor(&spec(l, c, false));
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(m.g[i][j], m.g[j][i], "asymmetry in {l}");
                }
            }
        }
    }

    #[test]
    fn regularity_distinguishes_domains() {
        let good = LagrangianSpec::new(
            ctx12(),
            e("x(1)*y(2,1)^2", ctx12()),
            false,
            SampleBox {
                x: (0.5, 2.0),
                y: vec![(0.5, 1.5), (0.5, 1.5)],
            },
        )
        .unwrap();
        let m = metric_tensor(&good);
        let pts = good.sample(40, 42).unwrap();
        assert!(regularity_check(&m, &pts).passed());

        let bad = LagrangianSpec::new(
            ctx12(),
            e("x(1)*y(2,1)^2", ctx12()),
            false,
            SampleBox {
                x: (-1.0, 1.0),
                y: vec![(0.5, 1.5), (0.5, 1.5)],
            },
        )
        .unwrap();
        let pts = bad.sample(200, 42).unwrap();
        let rep = regularity_check(&m, &pts);
        // det = x(1) gets arbitrarily small near 0
        assert!(rep.residual.unwrap() < 0.1, "{rep:?}");
    }

    #[test]
    fn canonical_semispray_worked_examples() {
        // L = y(2,1)^2: Gamma(2 y(2)) = 0 and dL/dy(1) = 0, so G = 0
        let s = canonical_semispray(&spec("y(2,1)^2", ctx12(), false)).unwrap();
        assert!(s.g[0].is_zero());

        // L = y(2,1)^2 + y(1,1)^2: 3G = (1/2)(0 - 2 y(1,1))
        let s = canonical_semispray(&spec("y(2,1)^2 + y(1,1)^2", ctx12(), false)).unwrap();
        assert_eq!(s.g[0], e("-1/3*y(1,1)", ctx12()));

        // L = x(1): zero Hessian
        assert!(matches!(
            canonical_semispray(&spec("x(1)", ctx12(), false)),
            Err(Error::SingularMetric(_))
        ));
    }

    #[test]
    fn numeric_evaluator_matches_symbolic_route() {
        let c = Context::new(2, 2).unwrap();
        let sp = spec("y(2,1)^2 + y(2,2)^2 + y(1,1)^2*x(2)^2", c, false);
        let symbolic = canonical_semispray(&sp).unwrap();
        let evaluator = canonical_spray_evaluator(&sp).unwrap();
        for p in default_points(c, 20, 3) {
            let via_eval = evaluator.g_at(&p).unwrap();
            for i in 0..2 {
                let via_sym = symbolic.g[i].evaluate(c, &p).unwrap();
                assert!(
                    (via_eval[i] - via_sym).abs() < 1e-12,
                    "mismatch at {:?}",
                    p.flatten()
                );
            }
        }
    }

    #[test]
    fn finsler_worked_example_passes() {
        let sp = spec("y(1,1)^4 + y(2,1)^2", ctx12(), true);
        let pts = sp.sample(50, 42).unwrap();
        assert!(finsler_check(&sp, &pts, 1e-9).passed());

        let c11 = Context::new(1, 1).unwrap();
        let euclid = spec("y(1,1)^2", c11, true);
        let pts = euclid.sample(50, 42).unwrap();
        assert!(finsler_check(&euclid, &pts, 1e-9).passed());
    }

    #[test]
    fn finsler_rejects_negative_forms() {
        let sp = spec("-y(2,1)^2", ctx12(), true);
        let pts = sp.sample(50, 42).unwrap();
        let rep = finsler_check(&sp, &pts, 1e-9);
        assert_eq!(rep.status, CheckStatus::Fail);
    }

    #[test]
    fn cartan_of_quartic_finsler() {
        // F^2 = y(1,1)^4 + y(2,1)^2: G = -(2/3) y(1,1)^3 and the Cartan
        // coefficients vanish since G has no top-level dependence.
        let sp = spec("y(1,1)^4 + y(2,1)^2", ctx12(), true);
        let (s, cartan) = cartan_connection(&sp).unwrap();
        assert_eq!(s.g[0], e("-2/3*y(1,1)^3", ctx12()));
        assert!(cartan.m[0][0][0].is_zero());
        assert!(cartan.m[1][0][0].is_zero());

        // Bucataru of the same structure: M*(1) = 0, M*(2) = -2 y(1,1)^2
        let bucataru = bucataru_connection(&s);
        assert!(bucataru.m[0][0][0].is_zero());
        assert_eq!(bucataru.m[1][0][0], e("-2*y(1,1)^2", ctx12()));
        let pts = sp.sample(50, 42).unwrap();
        assert!(euler_degree(&bucataru.m[1][0][0], 2, ctx12(), &pts, 1e-9).passed());

        // flat Euclidean case, k = 1
        let c11 = Context::new(1, 1).unwrap();
        let euclid = spec("y(1,1)^2", c11, true);
        let (s, cartan) = cartan_connection(&euclid).unwrap();
        assert!(s.g[0].is_zero());
        assert!(cartan.m[0][0][0].is_zero());
    }

    #[test]
    fn cartan_refuses_non_finsler_input() {
        let sp = spec("-y(2,1)^2", ctx12(), true);
        assert!(matches!(
            cartan_connection(&sp),
            Err(Error::FinslerAxiomViolation(_))
        ));
    }

    #[test]
    fn signature_is_constant_on_good_domains() {
        let sp = spec("y(2,1)^2 + y(1,1)^2", ctx12(), false);
        let m = metric_tensor(&sp);
        let pts = sp.sample(30, 42).unwrap();
        assert!(signature_check(&m, &pts).passed());
    }
}
