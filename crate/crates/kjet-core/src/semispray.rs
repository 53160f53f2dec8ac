//! k-semisprays: assembly of the full field, the JS = Gamma^(k) criterion,
//! the homogeneity (k-spray) test, chart covariance of the coefficients, and
//! the iteration producing the semispray sequence.

use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::phase::{
    euler_degree, gamma_operator, liouville_field, prolong_chart, tangent_structure_apply,
    ChartMap, PhasePoint, VectorField,
};
use crate::report::{CheckReport, CheckStatus, WorstResidual};

/// A k-semispray, determined by its n coefficient functions `G(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSemispray {
    pub ctx: Context,
    pub g: Vec<Expr>,
}

impl KSemispray {
    pub fn new(ctx: Context, g: Vec<Expr>) -> Result<KSemispray> {
        if g.len() != ctx.n {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for base dimension {}",
                g.len(),
                ctx.n
            )));
        }
        for gi in &g {
            if gi.max_level().is_some_and(|l| l > ctx.k) {
                return Err(Error::CoordOutOfRange(format!(
                    "coefficient '{gi}' leaves the ambient context"
                )));
            }
        }
        Ok(KSemispray { ctx, g })
    }

    /// The full vector field: level-0 block `y(1,i)`, level-m block
    /// `(m+1) y(m+1,i)` for m < k, level-k block `-(k+1) G(i)`.
    pub fn assemble_field(&self) -> VectorField {
        let ctx = self.ctx;
        let mut components = Vec::with_capacity(ctx.slots());
        for m in 0..ctx.k {
            for i in 1..=ctx.n {
                components.push(Expr::mul(
                    Expr::int((m + 1) as i64),
                    Expr::coord(CoordId::velocity(m + 1, i)),
                ));
            }
        }
        for gi in &self.g {
            components.push(Expr::mul(Expr::int(-(ctx.k as i64 + 1)), gi.clone()));
        }
        VectorField { ctx, components }
    }

    /// Homogeneity test: every coefficient must have anisotropic degree k+1.
    pub fn is_kspray(&self, points: &[PhasePoint], tol: f64) -> CheckReport {
        let mut worst = CheckReport::pass("is_kspray", 0.0);
        for (i, gi) in self.g.iter().enumerate() {
            let rep = euler_degree(gi, self.ctx.k as i64 + 1, self.ctx, points, tol);
            if rep.status == CheckStatus::Error {
                return CheckReport::error("is_kspray", format!("G({}): {:?}", i + 1, rep.notes));
            }
            if rep.residual > worst.residual {
                worst.residual = rep.residual;
                worst.point = rep.point.clone();
            }
            if !rep.passed() {
                worst.status = CheckStatus::Fail;
                worst
                    .notes
                    .push(format!("G({}) is not (k+1)-homogeneous", i + 1));
            }
        }
        worst.name = "is_kspray".to_string();
        worst
    }

    /// One step of the semispray iteration:
    /// `G_next(i) = (1/(k+1)) Gamma^(k) G(i)`.
    pub fn next_semispray(&self) -> KSemispray {
        let gk = liouville_field(self.ctx.k, self.ctx).expect("k is in range");
        let scale = Expr::rational(1, self.ctx.k as i64 + 1);
        let g = self
            .g
            .iter()
            .map(|gi| Expr::mul(scale.clone(), gk.apply(gi)))
            .collect();
        KSemispray { ctx: self.ctx, g }
    }

    /// The first `m` elements of the semispray sequence; element 1 is `self`.
    pub fn sequence(&self, m: usize) -> Vec<KSemispray> {
        assert!(m >= 1, "sequence length must be at least 1");
        let mut out = Vec::with_capacity(m);
        out.push(self.clone());
        for _ in 1..m {
            let next = out.last().unwrap().next_semispray();
            out.push(next);
        }
        out
    }

    /// Transformed coefficients under a chart, pulled back to the original
    /// coordinates: `G~(i) = G(j) dx~(i)/dx(j) - (1/(k+1)) Gamma(y~(k,i))`.
    pub fn transform_coefficients(&self, chart: &ChartMap) -> Result<Vec<Expr>> {
        let ctx = self.ctx;
        let jac = chart.jacobian();
        let levels = prolong_chart(chart, ctx)?;
        let gamma = gamma_operator(ctx);
        let scale = Expr::rational(1, ctx.k as i64 + 1);
        let mut out = Vec::with_capacity(ctx.n);
        for i in 0..ctx.n {
            let pushed = Expr::sum(
                (0..ctx.n)
                    .map(|j| Expr::mul(self.g[j].clone(), jac[i][j].clone()))
                    .collect(),
            );
            let correction = Expr::mul(scale.clone(), gamma.apply(&levels[ctx.k - 1][i]));
            out.push(Expr::sub(pushed, correction));
        }
        Ok(out)
    }
}

/// The semispray criterion: `X` is a k-semispray exactly when `J X` equals
/// the top Liouville field as canonical expressions. The report lists the
/// offending blocks otherwise.
pub fn verify_semispray(x: &VectorField) -> CheckReport {
    let ctx = x.ctx;
    let jx = tangent_structure_apply(x);
    let gk = liouville_field(ctx.k, ctx).expect("context has k >= 1");
    let mut bad = Vec::new();
    for level in 0..=ctx.k {
        for i in 1..=ctx.n {
            let c = CoordId { level, index: i };
            if jx.component(c) != gk.component(c) {
                bad.push(format!(
                    "level {level} index {i}: J(X) = {}, required {}",
                    jx.component(c),
                    gk.component(c)
                ));
            }
        }
    }
    if bad.is_empty() {
        CheckReport::pass("semispray_criterion", 0.0)
    } else {
        let mut rep = CheckReport::fail("semispray_criterion", bad.len() as f64);
        rep.notes = bad;
        rep
    }
}

/// Numeric covariance check for the coefficient transformation law: the
/// pushforward of the assembled field through the prolonged chart must match
/// the semispray form with the transformed coefficients at the image point.
pub fn verify_coefficient_covariance(
    s: &KSemispray,
    chart: &ChartMap,
    points: &[PhasePoint],
    tol: f64,
) -> CheckReport {
    let name = "semispray_covariance".to_string();
    let inner = || -> Result<CheckReport> {
        let ctx = s.ctx;
        let field = s.assemble_field();
        let levels = prolong_chart(chart, ctx)?;
        let transformed = s.transform_coefficients(chart)?;
        // full prolonged chart map, slot order
        let mut chart_exprs: Vec<Expr> = chart.targets.clone();
        for level in &levels {
            chart_exprs.extend(level.iter().cloned());
        }
        // partials of every tilde slot with respect to every original slot
        let partials: Vec<Vec<Expr>> = chart_exprs
            .iter()
            .map(|t| {
                (0..ctx.slots())
                    .map(|b| t.differentiate(ctx.coord_of_slot(b)))
                    .collect()
            })
            .collect();
        let mut worst = WorstResidual::default();
        for p in points {
            let slots = p.flatten();
            let tilde_slots: Vec<f64> = chart_exprs
                .iter()
                .map(|e| e.evaluate_slots(ctx, &slots))
                .collect::<Result<_>>()?;
            let field_vals: Vec<f64> = field
                .components
                .iter()
                .map(|e| e.evaluate_slots(ctx, &slots))
                .collect::<Result<_>>()?;
            for target_slot in 0..ctx.slots() {
                let mut pushed = 0.0;
                for b in 0..ctx.slots() {
                    if field_vals[b] == 0.0 {
                        continue;
                    }
                    pushed +=
                        partials[target_slot][b].evaluate_slots(ctx, &slots)? * field_vals[b];
                }
                let c = ctx.coord_of_slot(target_slot);
                let expected = if c.level < ctx.k {
                    let above = ctx.slot_of(CoordId {
                        level: c.level + 1,
                        index: c.index,
                    });
                    (c.level + 1) as f64 * tilde_slots[above]
                } else {
                    -((ctx.k + 1) as f64)
                        * transformed[c.index - 1].evaluate_slots(ctx, &slots)?
                };
                let residual = (pushed - expected).abs() / (1.0 + expected.abs());
                worst.update(residual, &slots);
            }
        }
        Ok(worst.into_report(name.clone(), tol))
    };
    inner().unwrap_or_else(|e| CheckReport::error(name, e))
}
