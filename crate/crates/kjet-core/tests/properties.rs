//! Property tests for the symbolic kernel and the coefficient recursions.

use proptest::prelude::*;

use kjet_core::calculus::central_difference;
use kjet_core::connections::{
    dual_to_primal, primal_to_dual, DualCoefficients, PrimalCoefficients,
};
use kjet_core::phase::{default_points, euler_degree, gamma_operator, liouville_field};
use kjet_core::{parse_expr, Context, CoordId, Expr, UnaryFn};

fn ctx() -> Context {
    Context::new(2, 2).unwrap()
}

fn arb_coord() -> impl Strategy<Value = CoordId> {
    (0usize..=2, 1usize..=2).prop_map(|(level, index)| CoordId { level, index })
}

/// Arbitrary canonical expression, including functions and quotients.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..=4).prop_map(Expr::int),
        ((1i64..=5), (1i64..=5)).prop_map(|(p, q)| Expr::rational(p, q)),
        arb_coord().prop_map(Expr::coord),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::sum),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::product),
            (inner.clone(), 2i64..=3).prop_map(|(b, e)| Expr::pow(b, e)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::quotient(a, b)),
            inner.clone().prop_map(|a| Expr::func(UnaryFn::Sin, a)),
            inner.clone().prop_map(|a| Expr::func(UnaryFn::Exp, a)),
        ]
    })
}

/// Polynomial-only expressions: safe to differentiate and evaluate anywhere.
fn arb_poly() -> impl Strategy<Value = Expr> {
    let monomial = (
        -3i64..=3,
        prop::collection::vec((arb_coord(), 1i64..=2), 0..3),
    )
        .prop_map(|(coeff, powers)| {
            let mut factors = vec![Expr::int(coeff)];
            for (c, p) in powers {
                factors.push(Expr::pow(Expr::coord(c), p));
            }
            Expr::product(factors)
        });
    prop::collection::vec(monomial, 1..4).prop_map(Expr::sum)
}

proptest! {
    /// Printing and reparsing reproduces the same canonical tree, which also
    /// certifies canonicalization idempotence.
    #[test]
    fn print_parse_roundtrip(e in arb_expr()) {
        let text = e.to_string();
        let reparsed = parse_expr(&text, ctx())
            .unwrap_or_else(|err| panic!("'{text}' failed to reparse: {err}"));
        prop_assert_eq!(reparsed, e);
    }

    /// Symbolic derivatives agree with the central-difference oracle on
    /// polynomials.
    #[test]
    fn derivative_matches_finite_difference(e in arb_poly(), v in arb_coord(), seed in 0u64..1000) {
        let points = default_points(ctx(), 1, seed + 1);
        let flat = points[0].flatten();
        let sym = e.differentiate(v).evaluate_slots(ctx(), &flat).unwrap();
        let fd = central_difference(&e, v, ctx(), &flat, 1e-5).unwrap();
        prop_assert!((sym - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
            "d({e})/d{v} = {sym} vs fd {fd}");
    }

    /// lie_apply is linear over rational constants, as canonical expressions.
    #[test]
    fn lie_apply_linearity(e1 in arb_poly(), e2 in arb_poly(), p in -3i64..=3, q in 1i64..=4) {
        let a = Expr::rational(p, q);
        for field in [gamma_operator(ctx()), liouville_field(2, ctx()).unwrap()] {
            let lhs = field.apply(&Expr::add(Expr::mul(a.clone(), e1.clone()), e2.clone()));
            let rhs = Expr::add(Expr::mul(a.clone(), field.apply(&e1)), field.apply(&e2));
            prop_assert_eq!(lhs, rhs);
        }
    }

    /// Leibniz rule for lie_apply, evaluated numerically.
    #[test]
    fn lie_apply_leibniz(e1 in arb_poly(), e2 in arb_poly(), seed in 0u64..100) {
        let field = gamma_operator(ctx());
        let lhs = field.apply(&Expr::mul(e1.clone(), e2.clone()));
        let rhs = Expr::add(
            Expr::mul(field.apply(&e1), e2.clone()),
            Expr::mul(e1.clone(), field.apply(&e2)),
        );
        for point in default_points(ctx(), 5, seed + 7) {
            let l = lhs.evaluate(ctx(), &point).unwrap();
            let r = rhs.evaluate(ctx(), &point).unwrap();
            prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs().max(r.abs())),
                "Leibniz gap {l} vs {r}");
        }
    }

    /// Homogeneity degrees are additive under products.
    #[test]
    fn euler_degree_multiplicative(
        p1 in prop::collection::vec((arb_coord(), 1i64..=2), 1..3),
        p2 in prop::collection::vec((arb_coord(), 1i64..=2), 1..3),
    ) {
        let build = |powers: &[(CoordId, i64)]| {
            let mut degree = 0;
            let mut factors = vec![Expr::int(2)];
            for (c, p) in powers {
                degree += c.level as i64 * p;
                factors.push(Expr::pow(Expr::coord(*c), *p));
            }
            (Expr::product(factors), degree)
        };
        let (f, rf) = build(&p1);
        let (g, rg) = build(&p2);
        let points = default_points(ctx(), 20, 5);
        prop_assert!(euler_degree(&f, rf, ctx(), &points, 1e-9).passed());
        prop_assert!(euler_degree(&g, rg, ctx(), &points, 1e-9).passed());
        let product = Expr::mul(f, g);
        prop_assert!(euler_degree(&product, rf + rg, ctx(), &points, 1e-9).passed());
    }

    /// Dual -> primal -> dual and primal -> dual -> primal are identities.
    #[test]
    fn dual_primal_roundtrip(
        entries in prop::collection::vec(arb_poly(), 12),
        k in 1usize..=3,
        n in 1usize..=2,
    ) {
        let c = Context::new(n, k).unwrap();
        let mut iter = entries.into_iter().cycle();
        let mats: Vec<Vec<Vec<Expr>>> = (0..k)
            .map(|_| (0..n).map(|_| (0..n).map(|_| iter.next().unwrap()).collect()).collect())
            .collect();
        let d = DualCoefficients::new(c, mats.clone()).unwrap();
        prop_assert_eq!(primal_to_dual(&dual_to_primal(&d)).m, d.m);
        let p = PrimalCoefficients::new(c, mats).unwrap();
        prop_assert_eq!(dual_to_primal(&primal_to_dual(&p)).n, p.n);
    }
}
