//! Coordinate model of the order-k phase space: points, vector fields in the
//! natural frame, chart prolongation, the level-shift operator, Liouville
//! fields, the tangent structure, curve extension, and the homogeneity test.

use std::collections::BTreeMap;

use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::report::{CheckReport, WorstResidual};
use crate::sample::{sample_points, Minstd, SampleBox};

/// A numeric point of the phase space: `x[i-1]` and `y[m-1][i-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<Vec<f64>>) -> PhasePoint {
        PhasePoint { x, y }
    }

    pub fn shape_matches(&self, ctx: Context) -> bool {
        self.x.len() == ctx.n
            && self.y.len() == ctx.k
            && self.y.iter().all(|level| level.len() == ctx.n)
    }

    pub fn check_shape(&self, ctx: Context) -> Result<()> {
        if self.shape_matches(ctx) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "point shape does not match n = {}, k = {}",
                ctx.n, ctx.k
            )))
        }
    }

    /// Membership in the slit bundle: `max_i |y(1,i)| >= margin`.
    pub fn admissible(&self, margin: f64) -> bool {
        self.y
            .first()
            .is_some_and(|y1| y1.iter().fold(0.0f64, |m, v| m.max(v.abs())) >= margin)
    }

    /// Slot-ordered flat vector `(x, y(1), ..., y(k))`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x.len() * (self.y.len() + 1));
        out.extend_from_slice(&self.x);
        for level in &self.y {
            out.extend_from_slice(level);
        }
        out
    }

    pub fn from_flat(ctx: Context, slots: &[f64]) -> Result<PhasePoint> {
        if slots.len() != ctx.slots() {
            return Err(Error::ShapeMismatch(format!(
                "flat state has {} slots, context needs {}",
                slots.len(),
                ctx.slots()
            )));
        }
        let x = slots[..ctx.n].to_vec();
        let y = (1..=ctx.k)
            .map(|m| slots[m * ctx.n..(m + 1) * ctx.n].to_vec())
            .collect();
        Ok(PhasePoint { x, y })
    }
}

impl Expr {
    pub fn evaluate(&self, ctx: Context, p: &PhasePoint) -> Result<f64> {
        p.check_shape(ctx)?;
        self.evaluate_slots(ctx, &p.flatten())
    }
}

/// A vector field in the natural frame: one component expression per slot,
/// ordered `(d/dx(1)..d/dx(n), d/dy(1,1).., ..., d/dy(k,n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub ctx: Context,
    pub components: Vec<Expr>,
}

impl VectorField {
    pub fn new(ctx: Context, components: Vec<Expr>) -> Result<VectorField> {
        if components.len() != ctx.slots() {
            return Err(Error::ShapeMismatch(format!(
                "vector field has {} components, context needs {}",
                components.len(),
                ctx.slots()
            )));
        }
        Ok(VectorField { ctx, components })
    }

    pub fn zero(ctx: Context) -> VectorField {
        VectorField {
            ctx,
            components: vec![Expr::zero(); ctx.slots()],
        }
    }

    /// Apply the field to a scalar as a derivation:
    /// `sum_c component_c * d(e)/d(coord_c)`, canonicalized.
    pub fn apply(&self, e: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (slot, comp) in self.components.iter().enumerate() {
            if comp.is_zero() {
                continue;
            }
            let d = e.differentiate(self.ctx.coord_of_slot(slot));
            if d.is_zero() {
                continue;
            }
            terms.push(Expr::mul(comp.clone(), d));
        }
        Expr::sum(terms)
    }

    pub fn eval(&self, p: &PhasePoint) -> Result<Vec<f64>> {
        let slots = p.flatten();
        self.components
            .iter()
            .map(|c| c.evaluate_slots(self.ctx, &slots))
            .collect()
    }

    /// Component at (level, index).
    pub fn component(&self, c: CoordId) -> &Expr {
        &self.components[self.ctx.slot_of(c)]
    }
}

/// The level-shift operator `Gamma` (not a vector field geometrically, but
/// its components act as a derivation): `y(1,i) d/dx(i) + 2 y(2,i) d/dy(1,i)
/// + ... + k y(k,i) d/dy(k-1,i)`.
pub fn gamma_operator(ctx: Context) -> VectorField {
    let mut components = vec![Expr::zero(); ctx.slots()];
    for level in 0..ctx.k {
        for i in 1..=ctx.n {
            let target = CoordId {
                level,
                index: i,
            };
            let source = CoordId {
                level: level + 1,
                index: i,
            };
            components[ctx.slot_of(target)] =
                Expr::mul(Expr::int((level + 1) as i64), Expr::coord(source));
        }
    }
    VectorField { ctx, components }
}

/// The m-th Liouville field: `sum_{a=1..m} a y(a,i) d/dy(k-m+a, i)`.
/// `liouville_field(k, ctx)` generates the anisotropic scaling used by the
/// Euler homogeneity test.
pub fn liouville_field(m: usize, ctx: Context) -> Result<VectorField> {
    if m == 0 || m > ctx.k {
        return Err(Error::IndexOutOfRange(format!(
            "Liouville index {m} outside 1..={}",
            ctx.k
        )));
    }
    let mut components = vec![Expr::zero(); ctx.slots()];
    for a in 1..=m {
        for i in 1..=ctx.n {
            let target = CoordId {
                level: ctx.k - m + a,
                index: i,
            };
            let source = CoordId { level: a, index: i };
            components[ctx.slot_of(target)] =
                Expr::mul(Expr::int(a as i64), Expr::coord(source));
        }
    }
    Ok(VectorField { ctx, components })
}

/// The tangent structure J: block at level m of the result is the block at
/// level m-1 of the input; the level-0 block is zero.
pub fn tangent_structure_apply(x: &VectorField) -> VectorField {
    let ctx = x.ctx;
    let n = ctx.n;
    let mut components = vec![Expr::zero(); ctx.slots()];
    for m in 1..=ctx.k {
        for i in 0..n {
            components[m * n + i] = x.components[(m - 1) * n + i].clone();
        }
    }
    VectorField { ctx, components }
}

/// A change of base coordinates `x~(i) = x~(i)(x(1)..x(n))` together with the
/// box on which its Jacobian is certified invertible.
#[derive(Debug, Clone)]
pub struct ChartMap {
    pub ctx: Context,
    pub targets: Vec<Expr>,
    pub domain: SampleBox,
}

const CHART_DET_THRESHOLD: f64 = 1e-8;
const CHART_VALIDATION_SEED: u64 = 7;
const CHART_VALIDATION_POINTS: usize = 25;

impl ChartMap {
    /// Validates that targets depend only on base coordinates and that the
    /// Jacobian determinant clears `1e-8` on sampled points of the box.
    pub fn new(ctx: Context, targets: Vec<Expr>, domain: SampleBox) -> Result<ChartMap> {
        if targets.len() != ctx.n {
            return Err(Error::InvalidChart(format!(
                "chart has {} components, base dimension is {}",
                targets.len(),
                ctx.n
            )));
        }
        for t in &targets {
            if t.max_level().is_some_and(|l| l >= 1) {
                return Err(Error::InvalidChart(format!(
                    "chart component '{t}' mentions a level >= 1 coordinate"
                )));
            }
        }
        let chart = ChartMap { ctx, targets, domain };
        chart.check_jacobian()?;
        Ok(chart)
    }

    fn check_jacobian(&self) -> Result<()> {
        let points = sample_points(
            &self.domain,
            self.ctx,
            CHART_VALIDATION_POINTS,
            CHART_VALIDATION_SEED,
            crate::sample::DEFAULT_MARGIN,
        )?;
        let jac = self.jacobian();
        for p in &points {
            let slots = p.flatten();
            let mut m = nalgebra::DMatrix::zeros(self.ctx.n, self.ctx.n);
            for i in 0..self.ctx.n {
                for j in 0..self.ctx.n {
                    m[(i, j)] = jac[i][j].evaluate_slots(self.ctx, &slots)?;
                }
            }
            let det = m.determinant();
            if det.abs() <= CHART_DET_THRESHOLD {
                return Err(Error::InvalidChart(format!(
                    "Jacobian determinant {det:.3e} below threshold at {slots:?}"
                )));
            }
        }
        Ok(())
    }

    /// Symbolic Jacobian `d x~(i) / d x(j)`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        (0..self.ctx.n)
            .map(|i| {
                (1..=self.ctx.n)
                    .map(|j| self.targets[i].differentiate(CoordId::base(j)))
                    .collect()
            })
            .collect()
    }
}

/// Prolong a base chart to all velocity levels:
/// `y~(1,i) = (d x~(i)/d x(j)) y(1,j)` and `m y~(m,i) = Gamma(y~(m-1,i))`.
/// Returns the levels 1..=k as expressions in the original coordinates.
pub fn prolong_chart(chart: &ChartMap, ctx: Context) -> Result<Vec<Vec<Expr>>> {
    let gamma = gamma_operator(ctx);
    let jac = chart.jacobian();
    let mut levels: Vec<Vec<Expr>> = Vec::with_capacity(ctx.k);
    let first: Vec<Expr> = (0..ctx.n)
        .map(|i| {
            let terms = (1..=ctx.n)
                .map(|j| {
                    Expr::mul(
                        jac[i][j - 1].clone(),
                        Expr::coord(CoordId::velocity(1, j)),
                    )
                })
                .collect();
            Expr::sum(terms)
        })
        .collect();
    levels.push(first);
    for m in 2..=ctx.k {
        let prev = &levels[m - 2];
        let next = prev
            .iter()
            .map(|e| Expr::mul(Expr::rational(1, m as i64), gamma.apply(e)))
            .collect();
        levels.push(next);
    }
    Ok(levels)
}

/// Euler homogeneity test: `f` has anisotropic degree `r` when the top
/// Liouville derivation satisfies `Gamma^(k) f = r f`. Reports the maximum
/// residual `|Gamma^(k) f - r f| / (1 + |f|)` over the samples.
pub fn euler_degree(
    f: &Expr,
    expected_r: i64,
    ctx: Context,
    points: &[PhasePoint],
    tol: f64,
) -> CheckReport {
    let name = format!("euler_degree[r={expected_r}]");
    let gk = match liouville_field(ctx.k, ctx) {
        Ok(g) => g,
        Err(e) => return CheckReport::error(name, e),
    };
    let derived = gk.apply(f);
    let mut worst = WorstResidual::default();
    for p in points {
        let slots = p.flatten();
        let fv = match f.evaluate_slots(ctx, &slots) {
            Ok(v) => v,
            Err(e) => {
                return CheckReport::error(name, format!("{e} at {slots:?}"));
            }
        };
        let dv = match derived.evaluate_slots(ctx, &slots) {
            Ok(v) => v,
            Err(e) => {
                return CheckReport::error(name, format!("{e} at {slots:?}"));
            }
        };
        let residual = (dv - expected_r as f64 * fv).abs() / (1.0 + fv.abs());
        worst.update(residual, &slots);
    }
    worst.into_report(name, tol)
}

/// The k-extension of a base curve `x(i) = curve[i](t)`: level m carries
/// `(1/m!) d^m x / dt^m`. The parameter `t` must be a base coordinate of the
/// (possibly extended) context; levels 0..=k are returned.
pub fn k_extension(curve: &[Expr], t: CoordId, ctx: Context) -> Result<Vec<Vec<Expr>>> {
    ctx.check(t)?;
    if t.level != 0 {
        return Err(Error::Invalid(
            "curve parameter must be a base coordinate".to_string(),
        ));
    }
    let mut levels: Vec<Vec<Expr>> = vec![curve.to_vec()];
    let mut factorial: i64 = 1;
    for m in 1..=ctx.k {
        factorial *= m as i64;
        let derived: Vec<Expr> = curve
            .iter()
            .map(|x| {
                let mut d = x.clone();
                for _ in 0..m {
                    d = d.differentiate(t);
                }
                Expr::mul(Expr::rational(1, factorial), d)
            })
            .collect();
        levels.push(derived);
    }
    Ok(levels)
}

/// Gamma-operator transformation law: for a scalar written in tilde
/// coordinates and pulled back through the prolonged chart, `Gamma f` equals
/// `Gamma~ f~` at the image point plus the correction
/// `Gamma(y~(k,j)) * (d f~ / d y~(k,j))`. Checked numerically.
pub fn verify_gamma_transformation(
    chart: &ChartMap,
    scalar_tilde: &Expr,
    ctx: Context,
    points: &[PhasePoint],
    tol: f64,
) -> CheckReport {
    let name = "gamma_transformation".to_string();
    let inner = || -> Result<CheckReport> {
        let gamma = gamma_operator(ctx);
        let levels = prolong_chart(chart, ctx)?;
        // pullback bindings: coord -> chart expression
        let mut bindings = BTreeMap::new();
        for i in 1..=ctx.n {
            bindings.insert(CoordId::base(i), chart.targets[i - 1].clone());
            for m in 1..=ctx.k {
                bindings.insert(CoordId::velocity(m, i), levels[m - 1][i - 1].clone());
            }
        }
        let pulled = scalar_tilde.substitute(&bindings, ctx)?;
        let lhs = gamma.apply(&pulled);
        let gamma_tilde_f = gamma.apply(scalar_tilde);
        let corrections: Vec<Expr> = (1..=ctx.n)
            .map(|j| gamma.apply(&levels[ctx.k - 1][j - 1]))
            .collect();
        let top_partials: Vec<Expr> = (1..=ctx.n)
            .map(|j| scalar_tilde.differentiate(CoordId::velocity(ctx.k, j)))
            .collect();
        let mut worst = WorstResidual::default();
        for p in points {
            let slots = p.flatten();
            // image of the point under the prolonged chart
            let mut tilde_slots = Vec::with_capacity(ctx.slots());
            for t in &chart.targets {
                tilde_slots.push(t.evaluate_slots(ctx, &slots)?);
            }
            for level in &levels {
                for e in level {
                    tilde_slots.push(e.evaluate_slots(ctx, &slots)?);
                }
            }
            let lhs_v = lhs.evaluate_slots(ctx, &slots)?;
            let mut rhs_v = gamma_tilde_f.evaluate_slots(ctx, &tilde_slots)?;
            for j in 0..ctx.n {
                rhs_v += corrections[j].evaluate_slots(ctx, &slots)?
                    * top_partials[j].evaluate_slots(ctx, &tilde_slots)?;
            }
            let residual = (lhs_v - rhs_v).abs() / (1.0 + lhs_v.abs());
            worst.update(residual, &slots);
        }
        Ok(worst.into_report(name.clone(), tol))
    };
    inner().unwrap_or_else(|e| CheckReport::error(name, e))
}

/// Numeric linear independence of the Liouville fields at sampled points:
/// the k x (k+1)n component matrix must have rank k.
pub fn liouville_independence(ctx: Context, points: &[PhasePoint]) -> CheckReport {
    let name = "liouville_independence".to_string();
    let fields: Vec<VectorField> = match (1..=ctx.k)
        .map(|m| liouville_field(m, ctx))
        .collect::<Result<_>>()
    {
        Ok(f) => f,
        Err(e) => return CheckReport::error(name, e),
    };
    for p in points {
        let mut m = nalgebra::DMatrix::zeros(ctx.k, ctx.slots());
        for (row, field) in fields.iter().enumerate() {
            let vals = match field.eval(p) {
                Ok(v) => v,
                Err(e) => return CheckReport::error(name, e),
            };
            for (col, v) in vals.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        if m.rank(1e-10) != ctx.k {
            return CheckReport::fail(name, 1.0).at_point(p.flatten());
        }
    }
    CheckReport::pass(name, 0.0)
}

/// Deterministic helper for tests and the verify suite: `count` admissible
/// points from the default box.
pub fn default_points(ctx: Context, count: usize, seed: u64) -> Vec<PhasePoint> {
    sample_points(
        &SampleBox::default_for(ctx),
        ctx,
        count,
        seed,
        crate::sample::DEFAULT_MARGIN,
    )
    .expect("default box is always admissible")
}

/// Scale `(x, y(1), ..., y(k))` to `(x, t y(1), t^2 y(2), ..., t^k y(k))`;
/// the anisotropic action whose infinitesimal generator is the top Liouville
/// field.
pub fn scale_point(p: &PhasePoint, lambda: f64) -> PhasePoint {
    let mut out = p.clone();
    let mut factor = 1.0;
    for level in out.y.iter_mut() {
        factor *= lambda;
        for v in level.iter_mut() {
            *v *= factor;
        }
    }
    out
}

/// Drop-in RNG re-export for callers building custom generators.
pub type SampleRng = Minstd;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn ctx12() -> Context {
        Context::new(1, 2).unwrap()
    }

    fn e(s: &str, ctx: Context) -> Expr {
        parse_expr(s, ctx).unwrap()
    }

    #[test]
    fn gamma_operator_components() {
        let g = gamma_operator(ctx12());
        assert_eq!(g.components[0], e("y(1,1)", ctx12()));
        assert_eq!(g.components[1], e("2*y(2,1)", ctx12()));
        assert!(g.components[2].is_zero());

        let c21 = Context::new(2, 1).unwrap();
        let g = gamma_operator(c21);
        assert_eq!(g.components[0], e("y(1,1)", c21));
        assert_eq!(g.components[1], e("y(1,2)", c21));
        assert!(g.components[2].is_zero());
        assert!(g.components[3].is_zero());
    }

    #[test]
    fn gamma_annihilates_top_level() {
        let g = gamma_operator(ctx12());
        assert!(g.apply(&e("2*y(2,1)", ctx12())).is_zero());
        assert_eq!(g.apply(&e("x(1)", ctx12())), e("y(1,1)", ctx12()));
    }

    #[test]
    fn liouville_rows_match_displayed_pattern() {
        let g1 = liouville_field(1, ctx12()).unwrap();
        assert!(g1.components[0].is_zero());
        assert!(g1.components[1].is_zero());
        assert_eq!(g1.components[2], e("y(1,1)", ctx12()));

        let g2 = liouville_field(2, ctx12()).unwrap();
        assert!(g2.components[0].is_zero());
        assert_eq!(g2.components[1], e("y(1,1)", ctx12()));
        assert_eq!(g2.components[2], e("2*y(2,1)", ctx12()));

        assert!(liouville_field(3, ctx12()).is_err());
    }

    #[test]
    fn liouville_scaling_derivation() {
        // Gamma^(2) applied to y(1,1)^3 gives 3 y(1,1)^3 (hand expansion)
        let g2 = liouville_field(2, ctx12()).unwrap();
        let f = e("y(1,1)^3", ctx12());
        assert_eq!(g2.apply(&f), e("3*y(1,1)^3", ctx12()));
    }

    #[test]
    fn tangent_structure_shifts_blocks() {
        let x = VectorField::new(
            ctx12(),
            vec![e("x(1)", ctx12()), e("y(1,1)", ctx12()), e("y(2,1)", ctx12())],
        )
        .unwrap();
        let jx = tangent_structure_apply(&x);
        assert!(jx.components[0].is_zero());
        assert_eq!(jx.components[1], e("x(1)", ctx12()));
        assert_eq!(jx.components[2], e("y(1,1)", ctx12()));
    }

    #[test]
    fn tangent_structure_is_nilpotent() {
        let g = gamma_operator(ctx12());
        let j3 = tangent_structure_apply(&tangent_structure_apply(&tangent_structure_apply(&g)));
        assert!(j3.components.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn j_chains_liouville_fields() {
        // J(Gamma^(m)) = Gamma^(m-1), J(Gamma^(1)) = 0
        let ctx = Context::new(2, 3).unwrap();
        for m in 2..=3 {
            let gm = liouville_field(m, ctx).unwrap();
            let prev = liouville_field(m - 1, ctx).unwrap();
            assert_eq!(tangent_structure_apply(&gm).components, prev.components);
        }
        let g1 = liouville_field(1, ctx).unwrap();
        assert!(tangent_structure_apply(&g1)
            .components
            .iter()
            .all(|c| c.is_zero()));
    }

    #[test]
    fn j_on_top_liouville_gives_previous() {
        let g2 = liouville_field(2, ctx12()).unwrap();
        let g1 = liouville_field(1, ctx12()).unwrap();
        assert_eq!(tangent_structure_apply(&g2).components, g1.components);
    }

    fn chart(expr_text: &str) -> ChartMap {
        let domain = SampleBox {
            x: (0.5, 1.5),
            y: vec![(0.5, 1.5), (0.5, 1.5)],
        };
        ChartMap::new(ctx12(), vec![e(expr_text, ctx12())], domain).unwrap()
    }

    #[test]
    fn prolong_identity_chart_is_identity() {
        let c = chart("x(1)");
        let levels = prolong_chart(&c, ctx12()).unwrap();
        assert_eq!(levels[0][0], e("y(1,1)", ctx12()));
        assert_eq!(levels[1][0], e("y(2,1)", ctx12()));
    }

    #[test]
    fn prolong_linear_chart() {
        let c = chart("2*x(1)");
        let levels = prolong_chart(&c, ctx12()).unwrap();
        assert_eq!(levels[0][0], e("2*y(1,1)", ctx12()));
        assert_eq!(levels[1][0], e("2*y(2,1)", ctx12()));
    }

    #[test]
    fn prolong_quadratic_chart_point_values() {
        // x~ = x^2 at (x, y1, y2) = (1, 1, 1): y~(1) = 2, y~(2) = 3
        // (2 y~(2) = 2 y1 * y1 + 2 * 2x * y2, evaluated by hand)
        let c = chart("x(1)^2");
        let levels = prolong_chart(&c, ctx12()).unwrap();
        let slots = [1.0, 1.0, 1.0];
        assert_eq!(levels[0][0].evaluate_slots(ctx12(), &slots).unwrap(), 2.0);
        assert_eq!(levels[1][0].evaluate_slots(ctx12(), &slots).unwrap(), 3.0);
    }

    #[test]
    fn invalid_chart_is_rejected() {
        let domain = SampleBox {
            x: (0.5, 1.5),
            y: vec![(0.5, 1.5), (0.5, 1.5)],
        };
        // mentions a velocity coordinate
        assert!(matches!(
            ChartMap::new(ctx12(), vec![e("x(1) + y(1,1)", ctx12())], domain.clone()),
            Err(Error::InvalidChart(_))
        ));
        // degenerate Jacobian (constant map)
        assert!(matches!(
            ChartMap::new(ctx12(), vec![e("3", ctx12())], domain),
            Err(Error::InvalidChart(_))
        ));
    }

    #[test]
    fn euler_degrees_of_simple_functions() {
        let pts = default_points(ctx12(), 30, 42);
        let sq = e("y(1,1)^2", ctx12());
        assert!(euler_degree(&sq, 2, ctx12(), &pts, 1e-9).passed());
        let cube = e("y(1,1)^3", ctx12());
        assert!(euler_degree(&cube, 3, ctx12(), &pts, 1e-9).passed());
        let base = e("x(1)", ctx12());
        assert!(euler_degree(&base, 0, ctx12(), &pts, 1e-9).passed());
        // wrong degree fails
        assert!(!euler_degree(&cube, 2, ctx12(), &pts, 1e-9).passed());
    }

    #[test]
    fn k_extension_of_polynomial_and_exponential_curves() {
        let ctx = ctx12();
        let ext = ctx.extended(1);
        let t = CoordId::base(2);
        let curve = vec![Expr::pow(Expr::coord(t), 2)];
        let levels = k_extension(&curve, t, ext).unwrap();
        assert_eq!(levels[0][0], Expr::pow(Expr::coord(t), 2));
        assert_eq!(levels[1][0], Expr::mul(Expr::int(2), Expr::coord(t)));
        assert!(levels[2][0].is_one());

        let linear = vec![Expr::coord(t)];
        let levels = k_extension(&linear, t, ext).unwrap();
        assert_eq!(levels[1][0], Expr::one());
        assert!(levels[2][0].is_zero());

        let exp_curve = vec![Expr::func(crate::expr::UnaryFn::Exp, Expr::coord(t))];
        let levels = k_extension(&exp_curve, t, ext).unwrap();
        assert_eq!(levels[1][0], exp_curve[0].clone());
        assert_eq!(
            levels[2][0],
            Expr::mul(Expr::rational(1, 2), exp_curve[0].clone())
        );
    }

    #[test]
    fn liouville_fields_are_independent_on_slit() {
        let ctx = Context::new(2, 3).unwrap();
        let pts = default_points(ctx, 50, 11);
        assert!(liouville_independence(ctx, &pts).passed());
    }

    #[test]
    fn gamma_transformation_law_holds() {
        for target in ["2*x(1)", "x(1) + x(1)^3/10"] {
            let c = chart(target);
            let pts = default_points(ctx12(), 50, 5);
            for scalar in ["x(1)^2", "x(1)*y(1,1)", "y(2,1) + y(1,1)^2"] {
                let f = e(scalar, ctx12());
                let rep = verify_gamma_transformation(&c, &f, ctx12(), &pts, 1e-8);
                assert!(
                    rep.passed(),
                    "gamma transformation failed for chart {target} scalar {scalar}: {rep:?}"
                );
            }
        }
    }
}
