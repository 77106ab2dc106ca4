use goursat2d::bielecki::{ac_norm, classical_norm, weighted_l2_norm};
use goursat2d::expr::parse;
use goursat2d::grid::{
    cum_integral_2d, cum_integral_x, cum_integral_y, reconstruct_state, Grid, GridField, StateTriple,
};
use goursat2d::operator::OperatorContext;
use goursat2d::problem::{
    builtin_example_4_6, probe_assumptions, Coefficient, Nonlinearity, Poly2, ProblemDocument, ProblemSpec,
};
use goursat2d::sampling::random_smooth_field;
use goursat2d::solvers::{auto_weight, estimate_contraction, solve_linearized, SolverConfig, WeightChoice};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn smooth(cells: usize, dim: usize, seed: u64) -> GridField {
    random_smooth_field(Grid::new(cells).unwrap(), dim, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Smooth expressions of `x, y, z1, z2` without kinks or poles.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z1".to_string()),
        Just("z2".to_string()),
        (0.1f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (1 + {b}^2))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("atan({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + {a}^2)")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.prop_map(|a| format!("{a}^3")),
        ]
    })
}

/// Expressions that may include kinks and faults.
fn any_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z1".to_string()),
        Just("z2".to_string()),
        (0.0f64..1e4).prop_map(|c| format!("{c}")),
        (1e-8f64..1.0).prop_map(|c| format!("{c:e}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let func = prop_oneof![
            Just("sin"),
            Just("cos"),
            Just("tan"),
            Just("exp"),
            Just("log"),
            Just("sqrt"),
            Just("abs"),
            Just("atan")
        ];
        let op = prop_oneof![Just("+"), Just("-"), Just("*"), Just("/"), Just("^")];
        prop_oneof![
            (inner.clone(), op, inner.clone()).prop_map(|(a, o, b)| format!("{a} {o} {b}")),
            (func, inner.clone()).prop_map(|(f, a)| format!("{f}({a})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.prop_map(|a| format!("({a})")),
        ]
    })
}

fn point() -> impl Strategy<Value = (f64, f64, [f64; 2])> {
    (0.0f64..=1.0, 0.0f64..=1.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, a, b)| (x, y, [a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn dual_partials_match_central_differences(src in smooth_expr(), (x, y, z) in point(), k in 0usize..2) {
        let e = parse(&src, 2).unwrap();
        let d = e.eval_dual(x, y, &z);
        prop_assume!(d.is_ok());
        let d = d.unwrap();
        let step = 1e-6;
        let mut zp = z;
        let mut zm = z;
        zp[k] += step;
        zm[k] -= step;
        let (fp, fm) = (e.eval(x, y, &zp), e.eval(x, y, &zm));
        prop_assume!(fp.is_ok() && fm.is_ok());
        let fd = (fp.unwrap() - fm.unwrap()) / (2.0 * step);
        // Rounding in the difference grows with |f|/step.
        let rounding = 4.0 * f64::EPSILON * d.value.abs().max(1.0) / step;
        let partial = d.partials[k];
        prop_assert!(
            (partial - fd).abs() <= 1e-6 * (1.0 + partial.abs()) + rounding,
            "{src} at {:?}: dual {partial}, fd {fd}", (x, y, z)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dual_value_is_the_plain_value(src in any_expr(), (x, y, z) in point()) {
        let Ok(e) = parse(&src, 2) else { return Ok(()); };
        match (e.eval(x, y, &z), e.eval_dual(x, y, &z)) {
            (Ok(v), Ok(d)) => prop_assert_eq!(v.to_bits(), d.value.to_bits()),
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "{src}: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn parse_print_parse_is_identity(src in any_expr()) {
        let Ok(e) = parse(&src, 2) else { return Ok(()); };
        let printed = e.to_string();
        let again = parse(&printed, 2).unwrap();
        prop_assert_eq!(&again, &e, "{} printed as {}", src, printed);
        prop_assert_eq!(again.to_string(), printed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cumulative_integrals_commute(seed in any::<u64>(), cells in 2usize..40, dim in 1usize..3) {
        let g = smooth(cells, dim, seed).scale(1e3);
        let j = cum_integral_2d(&g);
        let xy = cum_integral_x(&cum_integral_y(&g));
        let yx = cum_integral_y(&cum_integral_x(&g));
        let scale = cum_integral_2d(&g.map(f64::abs));
        for ((a, (b, c)), s) in j.values().iter().zip(xy.values().iter().zip(yx.values())).zip(scale.values()) {
            let tol = 2.0 * f64::EPSILON * s * (cells as f64);
            prop_assert!((a - b).abs() <= tol && (a - c).abs() <= tol, "{a} {b} {c} (tol {tol})");
        }
    }

    #[test]
    fn reconstructed_states_vanish_on_the_axes(seed in any::<u64>(), cells in 2usize..30) {
        let s = reconstruct_state(&smooth(cells, 2, seed));
        for k in 0..=cells {
            prop_assert!(s.z.at(0, k).iter().chain(s.z.at(k, 0)).all(|v| *v == 0.0));
            prop_assert!(s.zx.at(k, 0).iter().all(|v| *v == 0.0));
            prop_assert!(s.zy.at(0, k).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn quadrature_is_second_order(a in 0.5f64..4.0, b in -1.0f64..1.0, c in 0.5f64..4.0, d in -1.0f64..1.0) {
        let error = |cells: usize| {
            let grid = Grid::new(cells).unwrap();
            let g = GridField::from_fn(grid, 1, |x, y, o| o[0] = (a * x + b).cos() * (c * y + d).cos());
            let exact = GridField::from_fn(grid, 1, |x, y, o| {
                o[0] = ((a * x + b).sin() - b.sin()) / a * ((c * y + d).sin() - d.sin()) / c;
            });
            cum_integral_2d(&g).sub(&exact).unwrap().max_abs()
        };
        let order = (error(16) / error(32)).log2();
        prop_assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn integration_by_parts_holds_to_second_order(seed in any::<u64>()) {
        // J(A z_x) = ∫₀ʸ A z dt - J(A_x z) for A = sin(p x + q) cos(r y).
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q, r): (f64, f64, f64) = (
            rand::Rng::gen_range(&mut rng, 0.5..3.0),
            rand::Rng::gen_range(&mut rng, -1.0..1.0),
            rand::Rng::gen_range(&mut rng, 0.5..3.0),
        );
        let defect = |cells: usize| {
            let grid = Grid::new(cells).unwrap();
            let g = random_smooth_field(grid, 1, &mut ChaCha8Rng::seed_from_u64(seed));
            let s = reconstruct_state(&g);
            let a = GridField::from_fn(grid, 1, |x, y, o| o[0] = (p * x + q).sin() * (r * y).cos());
            let ax = GridField::from_fn(grid, 1, |x, y, o| o[0] = p * (p * x + q).cos() * (r * y).cos());
            let times = |u: &GridField, v: &GridField| {
                GridField::from_values(grid, 1, u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect()).unwrap()
            };
            let lhs = cum_integral_2d(&times(&a, &s.zx));
            let rhs = cum_integral_y(&times(&a, &s.z)).sub(&cum_integral_2d(&times(&ax, &s.z))).unwrap();
            lhs.sub(&rhs).unwrap().max_abs()
        };
        let (coarse, fine) = (defect(16), defect(32));
        prop_assert!(fine <= coarse / 3.0 || fine < 1e-13, "{coarse} -> {fine}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_norm_decreases_in_m(seed in any::<u64>(), m1 in 0.0f64..30.0, dm in 0.0f64..30.0) {
        let f = smooth(16, 2, seed);
        let (a, b) = (weighted_l2_norm(&f, m1).unwrap(), weighted_l2_norm(&f, m1 + dm).unwrap());
        prop_assert!(b <= a * (1.0 + 4.0 * f64::EPSILON), "{a} -> {b}");
    }

    #[test]
    fn ac_norm_sandwich(seed in any::<u64>(), m in 0.0f64..20.0) {
        let g = smooth(16, 1, seed);
        let (w, c) = (ac_norm(&g, m).unwrap(), ac_norm(&g, 0.0).unwrap());
        prop_assert!((-2.0 * m).exp() * c <= w && w <= c * (1.0 + 4.0 * f64::EPSILON));
    }

    #[test]
    fn ac_norm_is_a_norm(seeds in any::<[u64; 2]>(), c in -10.0f64..10.0, m in 0.0f64..20.0) {
        let (f, g) = (smooth(16, 2, seeds[0]), smooth(16, 2, seeds[1]));
        let nf = ac_norm(&f, m).unwrap();
        let scaled = ac_norm(&f.scale(c), m).unwrap();
        prop_assert!((scaled - c.abs() * nf).abs() <= 8.0 * f64::EPSILON * scaled.max(1e-300));
        let sum = ac_norm(&f.add(&g).unwrap(), m).unwrap();
        prop_assert!(sum <= (nf + ac_norm(&g, m).unwrap()) * (1.0 + 8.0 * f64::EPSILON));
        prop_assert_eq!(ac_norm(&f.scale(0.0), m).unwrap(), 0.0);
    }
}

fn coefficient_expr() -> impl Strategy<Value = String> {
    prop_oneof![
        (-2.0f64..2.0).prop_map(|c| format!("{c}")),
        (-2.0f64..2.0, 0u32..3).prop_map(|(c, p)| format!("{c} * x^{p} + y")),
        (0.1f64..2.0).prop_map(|c| format!("sin({c} * x) * cos(y)")),
    ]
}

prop_compose! {
    fn problem_document()(
        f in proptest::collection::vec(smooth_expr(), 4),
        a in proptest::collection::vec(coefficient_expr(), 16),
        growth in 0.0f64..50.0,
    ) -> ProblemDocument {
        let mut doc = ProblemDocument::zero(2);
        doc.meta.growth = growth;
        doc.meta.b = "1 + x * y".into();
        doc.functions.f1 = f[..2].iter().cloned().collect();
        doc.functions.f2 = f[2..].iter().cloned().collect();
        let matrix = |k: usize| -> goursat2d::problem::ExprMatrix {
            serde_json::from_value(serde_json::json!([[a[k], a[k + 1]], [a[k + 2], a[k + 3]]])).unwrap()
        };
        doc.coefficients.a1 = matrix(0);
        doc.coefficients.a2 = matrix(4);
        doc.coefficients.a1x = matrix(8);
        doc.coefficients.a2y = matrix(12);
        doc
    }
}

fn evaluations(spec: &ProblemSpec, x: f64, y: f64, z: &[f64]) -> Vec<Option<u64>> {
    let mut out = Vec::new();
    let mut buf2 = [0.0; 2];
    let mut buf4 = [0.0; 4];
    for which in [Nonlinearity::F1, Nonlinearity::F2] {
        let ok = spec.eval_nonlinearity(which, x, y, z, &mut buf2).is_ok();
        out.extend(buf2.iter().map(|v| ok.then_some(v.to_bits())));
        let ok = spec.eval_jacobian(which, x, y, z, &mut buf4).is_ok();
        out.extend(buf4.iter().map(|v| ok.then_some(v.to_bits())));
    }
    for which in Coefficient::ALL {
        spec.eval_coefficient(which, x, y, &mut buf4).unwrap();
        out.extend(buf4.iter().map(|v| Some(v.to_bits())));
    }
    out.push(Some(spec.eval_majorant(x, y).unwrap().to_bits()));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn problem_round_trip_evaluates_identically(doc in problem_document(), seed in any::<u64>()) {
        let Ok(spec) = doc.compile(None) else { return Ok(()); };
        let text = spec.to_document().to_json();
        let again = ProblemSpec::load(&text, None).unwrap();
        prop_assert_eq!(again.growth_constant(), spec.growth_constant());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let (x, y): (f64, f64) = (rand::Rng::gen(&mut rng), rand::Rng::gen(&mut rng));
            let z = [rand::Rng::gen_range(&mut rng, -3.0..3.0), rand::Rng::gen_range(&mut rng, -3.0..3.0)];
            prop_assert_eq!(evaluations(&spec, x, y, &z), evaluations(&again, x, y, &z));
        }
    }

    #[test]
    fn zero_problem_probe_passes_for_any_growth(growth in 1e-6f64..1e3, n in 1usize..4) {
        let mut doc = ProblemDocument::zero(n);
        doc.meta.growth = growth;
        let report = probe_assumptions(&doc.compile(None).unwrap(), &[1.0, 3.0], 32).unwrap();
        prop_assert!(report.pass);
    }
}

fn example_ctx(cells: usize, m: f64) -> OperatorContext {
    let w1 = Poly2::new([(1.0, 1, 0)]);
    let w2 = Poly2::new([(1.0, 0, 1)]);
    let a1 = Poly2::new([(1.0, 0, 0), (0.5, 1, 1)]);
    let a2 = Poly2::new([(-0.5, 0, 2)]);
    let spec = builtin_example_4_6(3, 2, &w1, &w2, &a1, &a2).unwrap();
    OperatorContext::new(spec, Grid::new(cells).unwrap(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_causal(seed in any::<u64>(), i0 in 0usize..=8, j0 in 0usize..=8, bump in -5.0f64..5.0) {
        let ctx = example_ctx(8, 1.0);
        let g = smooth(8, 1, seed);
        let mut perturbed = g.clone();
        for i in 0..=8 {
            for j in 0..=8 {
                if i > i0 || j > j0 {
                    perturbed.at_mut(i, j)[0] += bump * (1.0 + (i * j) as f64);
                }
            }
        }
        let (a, b) = (ctx.apply_f(&g).unwrap(), ctx.apply_f(&perturbed).unwrap());
        for i in 0..=i0 {
            for j in 0..=j0 {
                prop_assert_eq!(a.at(i, j)[0].to_bits(), b.at(i, j)[0].to_bits(), "node ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn linear_specs_are_their_own_linearization(seeds in any::<[u64; 3]>(), a in -3.0f64..3.0, c in -3.0f64..3.0) {
        let mut doc = ProblemDocument::zero(1);
        doc.functions.f1 = [format!("{a} * z1 + x")].into_iter().collect();
        doc.functions.f2 = [format!("{c} * z1 - y")].into_iter().collect();
        doc.coefficients.a1 = goursat2d::problem::ExprMatrix::One("1 + x * y".into());
        doc.coefficients.a2 = goursat2d::problem::ExprMatrix::One("-2".into());
        doc.coefficients.a1x = goursat2d::problem::ExprMatrix::One("y".into());
        doc.meta.growth = 3.0;
        let ctx = OperatorContext::new(doc.compile(None).unwrap(), Grid::new(12).unwrap(), 2.0).unwrap();
        let (g1, g2, z) = (smooth(12, 1, seeds[0]), smooth(12, 1, seeds[1]), smooth(12, 1, seeds[2]));
        let lhs = ctx.apply_f(&g1).unwrap().sub(&ctx.apply_f(&g2).unwrap()).unwrap();
        let lin = ctx.linearize(&reconstruct_state(&z)).unwrap();
        let rhs = ctx.apply_linearized(&lin, &g1.sub(&g2).unwrap()).unwrap();
        let scale = classical_norm(&g1).max(classical_norm(&g2)).max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn merit_is_half_squared_residual(seeds in any::<[u64; 2]>()) {
        let ctx = example_ctx(8, 3.0);
        let (g, v) = (smooth(8, 1, seeds[0]), smooth(8, 1, seeds[1]));
        let merit = ctx.merit(&g, &v).unwrap();
        let r = ctx.residual(&g, &v).unwrap();
        prop_assert!(merit >= 0.0);
        prop_assert!((merit - 0.5 * r.classical * r.classical).abs() <= 1e-15 * merit.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// With the automatic weight the iteration contracts and its residual
    /// ratios stay within the measured factor.
    #[test]
    fn chosen_weight_contracts(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, p in -2.0f64..2.0, q in -2.0f64..2.0) {
        let mut doc = ProblemDocument::zero(1);
        doc.functions.f1 = [format!("{a} * sin(z1) + {b} * z1")].into_iter().collect();
        doc.functions.f2 = [format!("{c} * z1 / (1 + z1^2)")].into_iter().collect();
        doc.coefficients.a1 = goursat2d::problem::ExprMatrix::One(format!("{p}"));
        doc.coefficients.a2 = goursat2d::problem::ExprMatrix::One(format!("{q}"));
        doc.meta.growth = (a.abs() + b.abs()).max(c.abs()).max(p.abs()).max(q.abs());
        let spec = doc.compile(None).unwrap();
        let grid = Grid::new(16).unwrap();
        let ctx = OperatorContext::new(spec, grid, 1.0).unwrap();
        let z0 = StateTriple::zero(grid, 1);
        let weight = auto_weight(&ctx, &z0, 128).unwrap();
        let cfg = SolverConfig { m: WeightChoice::Fixed(weight.m), ..SolverConfig::default() };
        let estimate = estimate_contraction(&ctx.with_weight(weight.m).unwrap(), &z0, &cfg, 10).unwrap();
        prop_assert!(estimate.contractive, "rho {} at m {}", estimate.rho_hat, weight.m);
        let v = GridField::from_fn(grid, 1, |x, y, o| o[0] = 1.0 + x - y * y);
        let report = solve_linearized(&ctx, &z0, &v, &cfg).unwrap();
        for r in report.trace.iter().filter_map(|r| r.ratio) {
            prop_assert!(r <= estimate.rho_hat + 0.05, "ratio {r} vs rho {}", estimate.rho_hat);
        }
    }
}
