use c11fit::cutplane::{self, Halfspace, OracleResponse, Outcome, SolverConfig};
use c11fit::erm::{self, RegressionProblem, SolveOptions};
use c11fit::gamma::{gamma1, gamma1_bruteforce, pair_stats};
use c11fit::lp::{self, LpOutcome};
use c11fit::wells;
use c11fit::{OneField, PointSet};
use proptest::prelude::*;

fn coords(d: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, d)
}

/// Points with pairwise distance at least `sep`, values and gradients in
/// `[-1, 1]`.
fn field(n: std::ops::RangeInclusive<usize>, d: usize, sep: f64) -> impl Strategy<Value = OneField> {
    n.prop_flat_map(move |n| {
        (
            prop::collection::vec(coords(d, -1.0, 1.0), n),
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(coords(d, -1.0, 1.0), n),
        )
    })
    .prop_filter_map("points too close", move |(pts, vals, grads)| {
        let base = PointSet::new(pts).ok()?;
        (base.separation() >= sep).then(|| OneField::new(base, vals, grads).unwrap())
    })
}

fn map_field(f: &OneField, point: impl Fn(&[f64]) -> Vec<f64>, jet: impl Fn(usize) -> (f64, Vec<f64>)) -> OneField {
    let base = PointSet::new(f.base().points().iter().map(|p| point(p)).collect()).unwrap();
    let (values, grads) = (0..f.len()).map(jet).unzip();
    OneField::new(base, values, grads).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_certificate_is_consistent(f in field(2..=6, 2, 0.05)) {
        let (value, cert) = gamma1(&f);
        prop_assert!(value >= 0.0);
        let cert = cert.unwrap();
        prop_assert!(cert.gamma >= cert.a_stat.abs() && cert.b_stat >= 0.0);
        let (a, b) = (f.point(cert.a_idx), f.point(cert.b_idx));
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let r = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / 2.0;
        let off = cert.z.iter().zip(&mid).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(off <= r + 1e-9);
        if value > 0.0 {
            prop_assert!(close(cert.ratio_at(&f, &cert.z), value, 1e-9));
        }
    }

    #[test]
    fn gamma_ignores_added_affine_function(
        f in field(2..=6, 2, 0.05), c in -2.0..2.0f64, v in coords(2, -2.0, 2.0)
    ) {
        let g = map_field(&f, |p| p.to_vec(), |i| {
            let p = f.point(i);
            let value = f.value(i) + c + v[0] * p[0] + v[1] * p[1];
            (value, f.gradient(i).iter().zip(&v).map(|(a, b)| a + b).collect())
        });
        for i in 0..f.len() {
            for j in 0..f.len() {
                if i != j {
                    let (a0, b0) = pair_stats(&f, i, j).unwrap();
                    let (a1, b1) = pair_stats(&g, i, j).unwrap();
                    prop_assert!(close(a0, a1, 1e-9) && close(b0, b1, 1e-9));
                }
            }
        }
        prop_assert!(close(gamma1(&f).0, gamma1(&g).0, 1e-9));
    }

    #[test]
    fn gamma_is_translation_invariant(f in field(2..=6, 2, 0.05), t in coords(2, -3.0, 3.0)) {
        // P'_{a+t}(x) = P_a(x - t): same values and gradients at moved points
        let g = map_field(&f, |p| vec![p[0] + t[0], p[1] + t[1]], |i| (f.value(i), f.gradient(i).to_vec()));
        for i in 0..f.len() {
            let x = [0.2, -0.4];
            let moved = [x[0] + t[0], x[1] + t[1]];
            prop_assert!(close(g.jet(i, &moved), f.jet(i, &x), 1e-12));
        }
        prop_assert!(close(gamma1(&f).0, gamma1(&g).0, 1e-9));
    }

    #[test]
    fn gamma_is_scale_invariant(f in field(2..=6, 2, 0.05)) {
        let lambda = 2.0;
        let g = map_field(&f, |p| p.iter().map(|x| lambda * x).collect(), |i| {
            (lambda * lambda * f.value(i), f.gradient(i).iter().map(|x| lambda * x).collect())
        });
        prop_assert!(close(gamma1(&f).0, gamma1(&g).0, 1e-12));
    }

    #[test]
    fn bruteforce_is_a_lower_bound(f in field(2..=5, 2, 0.05)) {
        prop_assert!(gamma1_bruteforce(&f, 40).unwrap() <= gamma1(&f).0 + 1e-12);
    }

    #[test]
    fn feasibility_cuts_keep_feasible_fields(f in field(3..=5, 2, 0.05), q in field(3..=5, 2, 0.05)) {
        prop_assume!(f.len() == q.len());
        let m = 0.5 * gamma1(&f).0;
        prop_assume!(m > 0.0);
        let OracleResponse::Cut(cut) = erm::feasibility_oracle(&f, m) else {
            return Err(TestCaseError::fail("field above M must be cut"));
        };
        prop_assert!(cut.slack(&f.to_flat()) < 0.0);
        // a field on the same points scaled into K1(M)
        let same_base = OneField::new(f.base().clone(), q.values().to_vec(), q.gradients().to_vec()).unwrap();
        let gq = gamma1(&same_base).0;
        let s = if gq > 0.0 { m / gq } else { 1.0 };
        let feasible: Vec<f64> = same_base.to_flat().iter().map(|v| v * s).collect();
        prop_assert!(cut.slack(&feasible) >= -1e-12);
        prop_assert!(cut.slack(&vec![0.0; feasible.len()]) >= 0.0);
    }

    #[test]
    fn small_jets_are_inside_the_ball(f in field(2..=6, 2, 0.2), m in 0.1..5.0f64) {
        let r = f.base().separation();
        let n = f.len();
        let rho1 = erm::inner_radius(r, m, n);
        let flat = f.to_flat();
        let scale = rho1 / flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shrunk = OneField::from_flat(f.base().clone(), &flat.iter().map(|v| v * scale).collect::<Vec<_>>()).unwrap();
        prop_assert!(gamma1(&shrunk).0 <= m * (1.0 + 1e-12));
    }

    #[test]
    fn objective_gradient_matches_differences(f in field(2..=6, 2, 0.05), y in prop::collection::vec(-1.0..1.0f64, 6)) {
        let y = &y[..f.len()];
        let (_, grad) = erm::objective_oracle(&f, y).unwrap();
        let flat = f.to_flat();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut p = flat.clone();
            let mut q = flat.clone();
            p[i] += h;
            q[i] -= h;
            let gp = erm::objective_oracle(&OneField::from_flat(f.base().clone(), &p).unwrap(), y).unwrap().0;
            let gq = erm::objective_oracle(&OneField::from_flat(f.base().clone(), &q).unwrap(), y).unwrap().0;
            prop_assert!(((gp - gq) / (2.0 * h) - grad[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn lp_matches_vertex_enumeration(
        rows in prop::collection::vec((coords(2, -1.0, 1.0), 0.0..2.0f64), 1..6),
        c in coords(2, -1.0, 1.0),
    ) {
        // bounded by x, y <= 3
        let mut a: Vec<Vec<f64>> = rows.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = rows.iter().map(|(_, v)| *v).collect();
        a.push(vec![1.0, 0.0]);
        a.push(vec![0.0, 1.0]);
        b.extend([3.0, 3.0]);
        let LpOutcome::Optimal { x, value } = lp::maximize(&c, &a, &b).unwrap() else {
            return Err(TestCaseError::fail("bounded program reported unbounded"));
        };
        // all constraints including x >= 0, as (row, rhs)
        let mut all: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
        all.push((vec![-1.0, 0.0], 0.0));
        all.push((vec![0.0, -1.0], 0.0));
        let feasible = |p: &[f64]| all.iter().all(|(r, v)| r[0] * p[0] + r[1] * p[1] <= v + 1e-9);
        prop_assert!(feasible(&x));
        prop_assert!((c[0] * x[0] + c[1] * x[1] - value).abs() <= 1e-9);
        let mut best = f64::NEG_INFINITY;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let (r1, v1) = &all[i];
                let (r2, v2) = &all[j];
                let det = r1[0] * r2[1] - r1[1] * r2[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = [(v1 * r2[1] - v2 * r1[1]) / det, (r1[0] * v2 - r2[0] * v1) / det];
                if feasible(&p) {
                    best = best.max(c[0] * p[0] + c[1] * p[1]);
                }
            }
        }
        prop_assert!((best - value).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn feasibility_finds_small_boxes(c in coords(3, -0.5, 0.5)) {
        let k = 3;
        let target = c.clone();
        let mut oracle = |x: &[f64]| {
            for i in 0..k {
                if x[i] > target[i] + 0.1 {
                    let mut w = vec![0.0; k];
                    w[i] = 1.0;
                    return OracleResponse::Cut(Halfspace::new(w, target[i] + 0.1).unwrap());
                }
                if x[i] < target[i] - 0.1 {
                    let mut w = vec![0.0; k];
                    w[i] = -1.0;
                    return OracleResponse::Cut(Halfspace::new(w, -(target[i] - 0.1)).unwrap());
                }
            }
            OracleResponse::Inside
        };
        let cfg = SolverConfig::for_problem(k, 1.0, 10.0).unwrap();
        let budget = cfg.max_iters;
        match cutplane::run_feasibility(&mut oracle, k, cfg).unwrap() {
            Outcome::Feasible { point, iterations } => {
                prop_assert!(iterations <= budget);
                prop_assert!(point.iter().zip(&c).all(|(p, t)| (p - t).abs() <= 0.1));
            }
            other => return Err(TestCaseError::fail(format!("{other:?}"))),
        }
    }

    #[test]
    fn solve_output_respects_the_bound(f in field(3..=4, 1, 0.1), m in 0.5..4.0f64) {
        let problem = RegressionProblem::new(f.base().clone(), f.values().to_vec(), m).unwrap();
        let report = erm::solve_with(&problem, SolveOptions { max_iters: Some(3000), ..SolveOptions::default() }).unwrap();
        prop_assert!(gamma1(&report.field).0 <= m * (1.0 + 1e-9));
        prop_assert!(report.objective <= f.values().iter().map(|v| v * v).sum::<f64>() / f.len() as f64 + 1e-12);
        prop_assert!(report.stats.max_constraints <= 201 * problem.k());
    }

    #[test]
    fn extension_interpolates_and_is_c11(f in field(2..=7, 2, 0.05), pad in 0.0..0.5f64) {
        let m = gamma1(&f).0 * (1.0 + pad) + 1e-9;
        let cx = wells::build_complex(&f, m).unwrap();
        for i in 0..f.len() {
            let e = cx.eval(f.point(i)).unwrap();
            prop_assert!((e.value - f.value(i)).abs() <= 1e-9 * (1.0 + f.value(i).abs()));
            for (g, t) in e.gradient.iter().zip(f.gradient(i)) {
                prop_assert!((g - t).abs() <= 1e-7 * (1.0 + t.abs()));
            }
        }
        prop_assert!(wells::lip_gradient_estimate(&cx, 2000, 1).unwrap() <= m * (1.0 + 1e-6));
    }

    #[test]
    fn extension_is_continuous_and_covers(f in field(2..=6, 2, 0.05), seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let m = gamma1(&f).0 * 1.1 + 1e-9;
        let cx = wells::build_complex(&f, m).unwrap();
        let (lo, hi) = cx.sampling_box();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-6;
        for _ in 0..200 {
            let x: Vec<f64> = (0..2).map(|c| rng.random_range(lo[c]..hi[c])).collect();
            let dir: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let xh: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + h * b / len).collect();
            let e = cx.eval(&x).unwrap();
            let eh = cx.eval(&xh).unwrap();
            let grad_norm = e.gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((eh.value - e.value).abs() <= (grad_norm + m * h) * h * (1.0 + 1e-6));
        }
    }

    #[test]
    fn reflected_data_give_reflected_extension(f in field(2..=5, 2, 0.05)) {
        let mirror = |p: &[f64]| vec![-p[0], p[1]];
        let g = map_field(&f, mirror, |i| (f.value(i), vec![-f.gradient(i)[0], f.gradient(i)[1]]));
        let m = gamma1(&f).0 * 1.05 + 1e-9;
        let (cf, cg) = (wells::build_complex(&f, m).unwrap(), wells::build_complex(&g, m).unwrap());
        prop_assert_eq!(cf.cells.len(), cg.cells.len());
        for x in [[0.3, -0.2], [-0.7, 0.5], [1.5, 1.5]] {
            let a = cf.eval(&x).unwrap();
            let b = cg.eval(&mirror(&x)).unwrap();
            prop_assert!((a.value - b.value).abs() <= 1e-9 * (1.0 + a.value.abs()));
        }
    }
}
