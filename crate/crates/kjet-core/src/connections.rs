//! Nonlinear connections via primal and dual coefficients: the Miron and
//! Bucataru constructions from a semispray, adapted frames and coframes,
//! chart covariance of the coefficients, and the autoparallel systems.

use nalgebra::DMatrix;

use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::integrate::OdeSystem;
use crate::phase::{prolong_chart, ChartMap, PhasePoint};
use crate::report::{CheckReport, WorstResidual};
use crate::semispray::KSemispray;

pub type ExprMatrix = Vec<Vec<Expr>>;

fn zeros(n: usize) -> ExprMatrix {
    vec![vec![Expr::zero(); n]; n]
}

/// Matrix product of expression matrices, `(a b)(i,j) = a(i,r) b(r,j)`.
fn mat_mul(a: &ExprMatrix, b: &ExprMatrix) -> ExprMatrix {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = Expr::sum(
                (0..n)
                    .map(|r| Expr::mul(a[i][r].clone(), b[r][j].clone()))
                    .collect(),
            );
        }
    }
    out
}

fn mat_eval(m: &ExprMatrix, ctx: Context, slots: &[f64]) -> Result<DMatrix<f64>> {
    let n = m.len();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[i][j].evaluate_slots(ctx, slots)?;
        }
    }
    Ok(out)
}

/// Dual coefficients `M(m)(i,j)` of a nonlinear connection, `m = 1..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCoefficients {
    pub ctx: Context,
    pub m: Vec<ExprMatrix>,
}

/// Primal coefficients `N(m)(i,j)` of a nonlinear connection, `m = 1..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalCoefficients {
    pub ctx: Context,
    pub n: Vec<ExprMatrix>,
}

impl DualCoefficients {
    pub fn new(ctx: Context, m: Vec<ExprMatrix>) -> Result<DualCoefficients> {
        check_shape(ctx, &m)?;
        Ok(DualCoefficients { ctx, m })
    }

    pub fn zero(ctx: Context) -> DualCoefficients {
        DualCoefficients {
            ctx,
            m: vec![zeros(ctx.n); ctx.k],
        }
    }
}

impl PrimalCoefficients {
    pub fn new(ctx: Context, n: Vec<ExprMatrix>) -> Result<PrimalCoefficients> {
        check_shape(ctx, &n)?;
        Ok(PrimalCoefficients { ctx, n })
    }
}

fn check_shape(ctx: Context, mats: &[ExprMatrix]) -> Result<()> {
    if mats.len() != ctx.k
        || mats
            .iter()
            .any(|m| m.len() != ctx.n || m.iter().any(|row| row.len() != ctx.n))
    {
        return Err(Error::ShapeMismatch(format!(
            "coefficients must be k = {} matrices of shape {n} x {n}",
            ctx.k,
            n = ctx.n
        )));
    }
    Ok(())
}

/// Miron's construction: `M(1) = dG/dy(k)` and
/// `M(m) = (1/m) (S M(m-1) + M(1) M(m-1))`, with `S` acting as a derivation
/// through the assembled semispray field.
pub fn miron_connection(s: &KSemispray) -> DualCoefficients {
    let ctx = s.ctx;
    let field = s.assemble_field();
    let mut levels: Vec<ExprMatrix> = Vec::with_capacity(ctx.k);
    let first: ExprMatrix = (0..ctx.n)
        .map(|i| {
            (1..=ctx.n)
                .map(|j| s.g[i].differentiate(CoordId::velocity(ctx.k, j)))
                .collect()
        })
        .collect();
    levels.push(first);
    for m in 2..=ctx.k {
        let prev = &levels[m - 2];
        let product = mat_mul(&levels[0], prev);
        let mut next = zeros(ctx.n);
        for i in 0..ctx.n {
            for j in 0..ctx.n {
                next[i][j] = Expr::mul(
                    Expr::rational(1, m as i64),
                    Expr::add(field.apply(&prev[i][j]), product[i][j].clone()),
                );
            }
        }
        levels.push(next);
    }
    DualCoefficients { ctx, m: levels }
}

/// Bucataru's construction: `M*(m) = dG/dy(k - m + 1)`.
pub fn bucataru_connection(s: &KSemispray) -> DualCoefficients {
    let ctx = s.ctx;
    let m = (1..=ctx.k)
        .map(|level| {
            (0..ctx.n)
                .map(|i| {
                    (1..=ctx.n)
                        .map(|j| s.g[i].differentiate(CoordId::velocity(ctx.k - level + 1, j)))
                        .collect()
                })
                .collect()
        })
        .collect();
    DualCoefficients { ctx, m }
}

/// `N(1) = M(1)`, `N(m) = M(m) - sum_{a=1..m-1} N(m-a) M(a)`.
pub fn dual_to_primal(d: &DualCoefficients) -> PrimalCoefficients {
    let mut out: Vec<ExprMatrix> = Vec::with_capacity(d.ctx.k);
    for m in 1..=d.ctx.k {
        let mut acc = d.m[m - 1].clone();
        for a in 1..m {
            let correction = mat_mul(&out[m - a - 1], &d.m[a - 1]);
            for i in 0..d.ctx.n {
                for j in 0..d.ctx.n {
                    acc[i][j] = Expr::sub(acc[i][j].clone(), correction[i][j].clone());
                }
            }
        }
        out.push(acc);
    }
    PrimalCoefficients { ctx: d.ctx, n: out }
}

/// Inverse recursion: `M(1) = N(1)`, `M(m) = N(m) + sum_{a=1..m-1} N(m-a) M(a)`.
pub fn primal_to_dual(p: &PrimalCoefficients) -> DualCoefficients {
    let mut out: Vec<ExprMatrix> = Vec::with_capacity(p.ctx.k);
    for m in 1..=p.ctx.k {
        let mut acc = p.n[m - 1].clone();
        for a in 1..m {
            let correction = mat_mul(&p.n[m - a - 1], &out[a - 1]);
            for i in 0..p.ctx.n {
                for j in 0..p.ctx.n {
                    acc[i][j] = Expr::add(acc[i][j].clone(), correction[i][j].clone());
                }
            }
        }
        out.push(acc);
    }
    DualCoefficients { ctx: p.ctx, m: out }
}

/// Adapted frame of a nonlinear connection. Basis and cobasis rows are
/// coefficient rows over the natural frame and coframe, `(k+1) n` entries
/// each, in slot order.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    pub ctx: Context,
    pub basis: Vec<Vec<Expr>>,
    pub cobasis: Vec<Vec<Expr>>,
}

/// Build the adapted basis (primal coefficients, derived internally) and
/// cobasis (dual coefficients):
/// `delta/delta y(m,i) = d/dy(m,i) - N(a)(j,i) d/dy(m+a,j)` and
/// `delta y(m,i) = dy(m,i) + M(a)(i,j) dy(m-a,j)` with `y(0) = x`.
pub fn adapted_frame(d: &DualCoefficients) -> AdaptedFrame {
    let ctx = d.ctx;
    let p = dual_to_primal(d);
    let slots = ctx.slots();
    let mut basis = vec![vec![Expr::zero(); slots]; slots];
    let mut cobasis = vec![vec![Expr::zero(); slots]; slots];
    for level in 0..=ctx.k {
        for i in 1..=ctx.n {
            let row = ctx.slot_of(CoordId { level, index: i });
            basis[row][row] = Expr::one();
            cobasis[row][row] = Expr::one();
            for a in 1..=(ctx.k - level) {
                for j in 1..=ctx.n {
                    let col = ctx.slot_of(CoordId {
                        level: level + a,
                        index: j,
                    });
                    basis[row][col] = Expr::neg(p.n[a - 1][j - 1][i - 1].clone());
                }
            }
            for a in 1..=level {
                for j in 1..=ctx.n {
                    let col = ctx.slot_of(CoordId {
                        level: level - a,
                        index: j,
                    });
                    cobasis[row][col] = d.m[a - 1][i - 1][j - 1].clone();
                }
            }
        }
    }
    AdaptedFrame { ctx, basis, cobasis }
}

/// Numeric duality check: `< cobasis row a, basis row b > = delta(a,b)` at
/// every sampled point.
pub fn verify_frame_duality(frame: &AdaptedFrame, points: &[PhasePoint], tol: f64) -> CheckReport {
    let name = "frame_duality".to_string();
    let ctx = frame.ctx;
    let slots = ctx.slots();
    let mut worst = WorstResidual::default();
    for p in points {
        let flat = p.flatten();
        let eval_rows = |rows: &Vec<Vec<Expr>>| -> Result<Vec<Vec<f64>>> {
            rows.iter()
                .map(|row| {
                    row.iter()
                        .map(|e| e.evaluate_slots(ctx, &flat))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect()
        };
        let (basis, cobasis) = match (eval_rows(&frame.basis), eval_rows(&frame.cobasis)) {
            (Ok(b), Ok(c)) => (b, c),
            (Err(e), _) | (_, Err(e)) => return CheckReport::error(name, e),
        };
        for a in 0..slots {
            for b in 0..slots {
                let pairing: f64 = (0..slots).map(|c| cobasis[a][c] * basis[b][c]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                worst.update((pairing - expected).abs(), &flat);
            }
        }
    }
    worst.into_report(name, tol)
}

/// Solve the dual transformation law for the tilde coefficients at a point.
/// In matrix form with `J0 = dx~/dx` and `Ja = dy~(a)/dx`:
/// `M~(m) = (J0 M(m) - sum_{a=1..m-1} M~(m-a) Ja - Jm) J0^{-1}`.
fn solve_dual_law(j: &[DMatrix<f64>], m_vals: &[DMatrix<f64>], k: usize) -> Result<Vec<DMatrix<f64>>> {
    let j0_inv = j[0]
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian("chart Jacobian not invertible".to_string()))?;
    let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(k);
    for m in 1..=k {
        let mut rhs = &j[0] * &m_vals[m - 1];
        for a in 1..m {
            rhs -= &out[m - a - 1] * &j[a];
        }
        rhs -= &j[m];
        out.push(rhs * &j0_inv);
    }
    Ok(out)
}

/// Solve the primal transformation law:
/// `N~(m) = (J0 N(m) + sum_{a=1..m-1} Ja N(m-a) - Jm) J0^{-1}`.
fn solve_primal_law(j: &[DMatrix<f64>], n_vals: &[DMatrix<f64>], k: usize) -> Result<Vec<DMatrix<f64>>> {
    let j0_inv = j[0]
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularJacobian("chart Jacobian not invertible".to_string()))?;
    let mut out = Vec::with_capacity(k);
    for m in 1..=k {
        let mut rhs = &j[0] * &n_vals[m - 1];
        for a in 1..m {
            rhs += &j[a] * &n_vals[m - a - 1];
        }
        rhs -= &j[m];
        out.push(rhs * &j0_inv);
    }
    Ok(out)
}

/// Jacobian blocks `J0 = dx~/dx, Ja = dy~(a)/dx` of a prolonged chart, as
/// expression matrices.
fn prolonged_jacobians(chart: &ChartMap, ctx: Context) -> Result<Vec<ExprMatrix>> {
    let levels = prolong_chart(chart, ctx)?;
    let mut out: Vec<ExprMatrix> = vec![chart.jacobian()];
    for level in &levels {
        out.push(
            (0..ctx.n)
                .map(|i| {
                    (1..=ctx.n)
                        .map(|j| level[i].differentiate(CoordId::base(j)))
                        .collect()
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Covariance of the coefficient transformation laws: at each sampled point
/// the tilde duals are solved from the dual law, the tilde primals from the
/// primal law, and the two are cross-checked through the dual/primal
/// recursion (both laws must describe the same connection). The reported
/// residual is the worst mismatch.
pub fn verify_coefficient_transformation(
    d: &DualCoefficients,
    chart: &ChartMap,
    points: &[PhasePoint],
    tol: f64,
) -> CheckReport {
    let name = "coefficient_transformation".to_string();
    let inner = || -> Result<CheckReport> {
        let ctx = d.ctx;
        let primal = dual_to_primal(d);
        let jac_exprs = prolonged_jacobians(chart, ctx)?;
        let mut worst = WorstResidual::default();
        for p in points {
            let flat = p.flatten();
            let j: Vec<DMatrix<f64>> = jac_exprs
                .iter()
                .map(|m| mat_eval(m, ctx, &flat))
                .collect::<Result<_>>()?;
            let det = j[0].determinant();
            if det.abs() <= 1e-10 {
                return Err(Error::SingularJacobian(format!(
                    "determinant {det:.3e} at {flat:?}"
                )));
            }
            let m_vals: Vec<DMatrix<f64>> = d
                .m
                .iter()
                .map(|m| mat_eval(m, ctx, &flat))
                .collect::<Result<_>>()?;
            let n_vals: Vec<DMatrix<f64>> = primal
                .n
                .iter()
                .map(|m| mat_eval(m, ctx, &flat))
                .collect::<Result<_>>()?;
            let m_tilde = solve_dual_law(&j, &m_vals, ctx.k)?;
            let n_tilde = solve_primal_law(&j, &n_vals, ctx.k)?;
            // rebuild duals from the solved primals; must agree with m_tilde
            let mut rebuilt: Vec<DMatrix<f64>> = Vec::with_capacity(ctx.k);
            for m in 1..=ctx.k {
                let mut acc = n_tilde[m - 1].clone();
                for a in 1..m {
                    acc += &n_tilde[m - a - 1] * &rebuilt[a - 1];
                }
                rebuilt.push(acc);
            }
            for m in 0..ctx.k {
                let residual = (&rebuilt[m] - &m_tilde[m]).abs().max();
                worst.update(residual, &flat);
            }
        }
        Ok(worst.into_report(name.clone(), tol))
    };
    inner().unwrap_or_else(|e| CheckReport::error(name, e))
}

/// Tilde dual coefficients at one point, solved from the transformation law.
pub fn transformed_duals_at(
    d: &DualCoefficients,
    chart: &ChartMap,
    p: &PhasePoint,
) -> Result<Vec<DMatrix<f64>>> {
    let ctx = d.ctx;
    let flat = p.flatten();
    let jac_exprs = prolonged_jacobians(chart, ctx)?;
    let j: Vec<DMatrix<f64>> = jac_exprs
        .iter()
        .map(|m| mat_eval(m, ctx, &flat))
        .collect::<Result<_>>()?;
    let m_vals: Vec<DMatrix<f64>> = d
        .m
        .iter()
        .map(|m| mat_eval(m, ctx, &flat))
        .collect::<Result<_>>()?;
    solve_dual_law(&j, &m_vals, ctx.k)
}

/// The autoparallel flow of the connection, solved from the horizontality
/// chain top-down: `dx/dt = y(1)`, and row m gives
/// `dy(m)/dt = -sum_{a=1..m} M(a) d(level m-a)/dt` with the lower-level
/// derivatives already determined by the previous rows.
pub fn autoparallel_rhs(d: &DualCoefficients) -> OdeSystem {
    let ctx = d.ctx;
    let mut rhs: Vec<Vec<Expr>> = Vec::with_capacity(ctx.k + 1);
    rhs.push(
        (1..=ctx.n)
            .map(|i| Expr::coord(CoordId::velocity(1, i)))
            .collect(),
    );
    for m in 1..=ctx.k {
        let mut level: Vec<Expr> = Vec::with_capacity(ctx.n);
        for i in 0..ctx.n {
            let mut terms = Vec::new();
            for a in 1..=m {
                for j in 0..ctx.n {
                    terms.push(Expr::neg(Expr::mul(
                        d.m[a - 1][i][j].clone(),
                        rhs[m - a][j].clone(),
                    )));
                }
            }
            level.push(Expr::sum(terms));
        }
        rhs.push(level);
    }
    OdeSystem::new(ctx, rhs.into_iter().flatten().collect()).expect("shape by construction")
}

/// The first-order system characterizing autoparallel curves through their
/// k-extensions: the extension identities `dx/dt = y(1)`,
/// `dy(m)/dt = (m+1) y(m+1)` for m < k, plus the top horizontality row
/// `dy(k)/dt = -sum_{a=1..k} M(a) d(level k-a)/dt` with those identities
/// substituted. Trajectories of this system are the ones compared against
/// k-paths.
pub fn autoparallel_curve_system(d: &DualCoefficients) -> OdeSystem {
    let ctx = d.ctx;
    let mut rhs: Vec<Vec<Expr>> = Vec::with_capacity(ctx.k + 1);
    for m in 0..ctx.k {
        rhs.push(
            (1..=ctx.n)
                .map(|i| {
                    Expr::mul(
                        Expr::int((m + 1) as i64),
                        Expr::coord(CoordId::velocity(m + 1, i)),
                    )
                })
                .collect(),
        );
    }
    let mut top: Vec<Expr> = Vec::with_capacity(ctx.n);
    for i in 0..ctx.n {
        let mut terms = Vec::new();
        for a in 1..=ctx.k {
            for j in 0..ctx.n {
                terms.push(Expr::neg(Expr::mul(
                    d.m[a - 1][i][j].clone(),
                    rhs[ctx.k - a][j].clone(),
                )));
            }
        }
        top.push(Expr::sum(terms));
    }
    rhs.push(top);
    OdeSystem::new(ctx, rhs.into_iter().flatten().collect()).expect("shape by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;
    use crate::phase::default_points;
    use crate::sample::SampleBox;

    fn ctx12() -> Context {
        Context::new(1, 2).unwrap()
    }

    fn e(s: &str, ctx: Context) -> Expr {
        parse_expr(s, ctx).unwrap()
    }

    fn spray(g: &str) -> KSemispray {
        KSemispray::new(ctx12(), vec![e(g, ctx12())]).unwrap()
    }

    #[test]
    fn miron_of_zero_semispray_vanishes() {
        let d = miron_connection(&spray("0"));
        assert!(d.m.iter().flatten().flatten().all(|m| m.is_zero()));
    }

    #[test]
    fn miron_of_product_semispray() {
        // G = y(1,1) y(2,1): M(1) = y(1,1) and, since S(y(1,1)) = 2 y(2,1)
        // from the assembled field, M(2) = y(2,1) + 1/2 y(1,1)^2.
        let d = miron_connection(&spray("y(1,1)*y(2,1)"));
        assert_eq!(d.m[0][0][0], e("y(1,1)", ctx12()));
        assert_eq!(d.m[1][0][0], e("y(2,1) + 1/2*y(1,1)^2", ctx12()));
    }

    #[test]
    fn miron_collapses_without_top_dependence() {
        let d = miron_connection(&spray("-y(1,1)/3"));
        assert!(d.m[0][0][0].is_zero());
        assert!(d.m[1][0][0].is_zero());
    }

    #[test]
    fn bucataru_is_direct_partials() {
        let d = bucataru_connection(&spray("y(1,1)*y(2,1)"));
        assert_eq!(d.m[0][0][0], e("y(1,1)", ctx12()));
        assert_eq!(d.m[1][0][0], e("y(2,1)", ctx12()));

        let z = bucataru_connection(&spray("0"));
        assert!(z.m.iter().flatten().flatten().all(|m| m.is_zero()));
    }

    #[test]
    fn miron_and_bucataru_differ_at_level_two() {
        let s = spray("y(1,1)*y(2,1)");
        let miron = miron_connection(&s);
        let bucataru = bucataru_connection(&s);
        assert_eq!(miron.m[0], bucataru.m[0]);
        let diff = Expr::sub(miron.m[1][0][0].clone(), bucataru.m[1][0][0].clone());
        assert_eq!(diff, e("1/2*y(1,1)^2", ctx12()));
    }

    #[test]
    fn dual_to_primal_examples() {
        let d = DualCoefficients::new(
            ctx12(),
            vec![
                vec![vec![e("y(1,1)", ctx12())]],
                vec![vec![e("y(2,1)", ctx12())]],
            ],
        )
        .unwrap();
        let p = dual_to_primal(&d);
        assert_eq!(p.n[0][0][0], e("y(1,1)", ctx12()));
        assert_eq!(p.n[1][0][0], e("y(2,1) - y(1,1)^2", ctx12()));

        let z = dual_to_primal(&DualCoefficients::zero(ctx12()));
        assert!(z.n.iter().flatten().flatten().all(|m| m.is_zero()));

        let c11 = Context::new(1, 1).unwrap();
        let d = DualCoefficients::new(c11, vec![vec![vec![e("x(1)", c11)]]]).unwrap();
        assert_eq!(dual_to_primal(&d).n[0][0][0], e("x(1)", c11));
    }

    #[test]
    fn primal_to_dual_one_step() {
        // N(1) = c constant: M(1) = c, M(2) = N(2) + c^2
        let c = ctx12();
        let p = PrimalCoefficients::new(
            c,
            vec![vec![vec![Expr::int(3)]], vec![vec![e("y(2,1)", c)]]],
        )
        .unwrap();
        let d = primal_to_dual(&p);
        assert_eq!(d.m[0][0][0], Expr::int(3));
        assert_eq!(d.m[1][0][0], e("y(2,1) + 9", c));
    }

    #[test]
    fn roundtrips_are_identities() {
        let s = spray("y(1,1)*y(2,1)");
        let d = miron_connection(&s);
        let back = primal_to_dual(&dual_to_primal(&d));
        assert_eq!(back.m, d.m);

        let n2 = Context::new(2, 3).unwrap();
        let g = vec![
            e("y(1,1)*y(3,2) + y(2,1)^2", n2),
            e("x(1)*y(3,1) + y(1,2)^3", n2),
        ];
        let s = KSemispray::new(n2, g).unwrap();
        for d in [miron_connection(&s), bucataru_connection(&s)] {
            let back = primal_to_dual(&dual_to_primal(&d));
            assert_eq!(back.m, d.m);
        }
    }

    #[test]
    fn adapted_frame_of_zero_connection_is_natural() {
        let frame = adapted_frame(&DualCoefficients::zero(ctx12()));
        for (r, row) in frame.basis.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if r == c {
                    assert!(v.is_one());
                } else {
                    assert!(v.is_zero());
                }
            }
        }
        assert_eq!(frame.basis, frame.cobasis);
    }

    #[test]
    fn adapted_frame_k1_hand_pairing() {
        // n = 1, k = 1, M(1) = m(x, y): delta/delta x = d/dx - m d/dy,
        // delta y = dy + m dx; the 2x2 pairing is the identity.
        let c11 = Context::new(1, 1).unwrap();
        let m = e("x(1)*y(1,1)", c11);
        let d = DualCoefficients::new(c11, vec![vec![vec![m.clone()]]]).unwrap();
        let frame = adapted_frame(&d);
        assert_eq!(frame.basis[0], vec![Expr::one(), Expr::neg(m.clone())]);
        assert_eq!(frame.cobasis[1], vec![m, Expr::one()]);
        let pts = default_points(c11, 20, 4);
        assert!(verify_frame_duality(&frame, &pts, 1e-10).passed());
    }

    #[test]
    fn frame_duality_for_worked_connection() {
        let d = miron_connection(&spray("y(1,1)*y(2,1)"));
        let pts = default_points(ctx12(), 20, 4);
        let rep = verify_frame_duality(&adapted_frame(&d), &pts, 1e-10);
        assert!(rep.passed(), "{rep:?}");
    }

    fn chart(target: &str) -> ChartMap {
        let domain = SampleBox {
            x: (0.5, 1.5),
            y: vec![(0.5, 1.5), (0.5, 1.5)],
        };
        ChartMap::new(ctx12(), vec![e(target, ctx12())], domain).unwrap()
    }

    #[test]
    fn coefficient_transformation_identity_chart() {
        let d = miron_connection(&spray("y(1,1)*y(2,1)"));
        let pts = default_points(ctx12(), 20, 5);
        let c = chart("x(1)");
        let rep = verify_coefficient_transformation(&d, &c, &pts, 1e-10);
        assert!(rep.passed(), "{rep:?}");
        // tilde coefficients equal the originals under the identity chart
        let p = &pts[0];
        let tilde = transformed_duals_at(&d, &c, p).unwrap();
        let flat = p.flatten();
        for m in 0..2 {
            let original = d.m[m][0][0].evaluate_slots(ctx12(), &flat).unwrap();
            assert!((tilde[m][(0, 0)] - original).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_transformation_linear_chart() {
        let d = DualCoefficients::new(
            ctx12(),
            vec![
                vec![vec![e("y(1,1)", ctx12())]],
                vec![vec![e("y(2,1)", ctx12())]],
            ],
        )
        .unwrap();
        let pts = default_points(ctx12(), 20, 6);
        let rep = verify_coefficient_transformation(&d, &chart("2*x(1)"), &pts, 1e-10);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // x~ = x^2 has a Jacobian zero at x = 0; hand the check a point there
        let d = DualCoefficients::zero(ctx12());
        let c = chart("x(1)^2");
        let bad = PhasePoint::new(vec![0.0], vec![vec![1.0], vec![1.0]]);
        let rep = verify_coefficient_transformation(&d, &c, &[bad], 1e-10);
        assert_eq!(rep.status, crate::report::CheckStatus::Error);
    }

    #[test]
    fn autoparallel_chain_examples() {
        // zero coefficients: all correction terms vanish
        let sys = autoparallel_rhs(&DualCoefficients::zero(ctx12()));
        assert_eq!(sys.rhs[0], e("y(1,1)", ctx12()));
        assert!(sys.rhs[1].is_zero());
        assert!(sys.rhs[2].is_zero());

        // k = 1, constant coefficient: dy/dt = -c y
        let c11 = Context::new(1, 1).unwrap();
        let d = DualCoefficients::new(c11, vec![vec![vec![Expr::int(3)]]]).unwrap();
        let sys = autoparallel_rhs(&d);
        assert_eq!(sys.rhs[1], e("-3*y(1,1)", c11));

        // k = 2 chain: dy(1)/dt = -M(1) y(1), and the second row reuses it
        let d = DualCoefficients::new(
            ctx12(),
            vec![
                vec![vec![e("y(1,1)", ctx12())]],
                vec![vec![e("y(2,1)", ctx12())]],
            ],
        )
        .unwrap();
        let sys = autoparallel_rhs(&d);
        assert_eq!(sys.rhs[1], e("-y(1,1)^2", ctx12()));
        assert_eq!(sys.rhs[2], e("y(1,1)^3 - y(1,1)*y(2,1)", ctx12()));
    }

    #[test]
    fn curve_system_uses_extension_rows() {
        let d = DualCoefficients::new(
            ctx12(),
            vec![
                vec![vec![e("y(1,1)", ctx12())]],
                vec![vec![e("y(2,1)", ctx12())]],
            ],
        )
        .unwrap();
        let sys = autoparallel_curve_system(&d);
        assert_eq!(sys.rhs[0], e("y(1,1)", ctx12()));
        assert_eq!(sys.rhs[1], e("2*y(2,1)", ctx12()));
        assert_eq!(sys.rhs[2], e("-3*y(1,1)*y(2,1)", ctx12()));
    }
}
