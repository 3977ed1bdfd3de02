use proptest::prelude::*;

use phd_core::deformation::{graph_lift, psi, Jet1, NewtonConfig};
use phd_core::geometry::{
    compute_q, domain_margin, make_pushforward_structure, make_q_structure, make_standard_structure, nijenhuis,
    AntilinearField, Domain, Monomial, PolyDiffeo,
};
use phd_core::injectivity::{cubic_perturb, find_self_intersections, phi_alpha, CubicShift, RefineConfig};
use phd_core::kernel::{fit_grid, CollocationGrid, PolyDiskMap, PolyDiskMapFile};
use phd_core::linalg::{j0, max_abs, C64};
use phd_core::pseudonorm::{compare_norms, kobayashi_norm, poincare_distance, NormConfig, NormContext};
use phd_core::solver::{Solver, SolverConfig};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn complex(bound: f64) -> impl Strategy<Value = C64> {
    (-bound..bound, -bound..bound).prop_map(|(a, b)| c(a, b))
}

/// Random polynomial disk maps with `n = 2`, given as a term list.
fn terms(degree: usize, bound: f64) -> impl Strategy<Value = Vec<(usize, usize, Vec<C64>)>> {
    let pairs: Vec<(usize, usize)> =
        (0..=degree).flat_map(|s| (0..=s).map(move |k| (s - k, k))).collect();
    let count = pairs.len();
    prop::collection::vec(prop::collection::vec(complex(bound), 2), count).prop_map(move |cs| {
        pairs.iter().zip(cs).map(|(&(j, k), v)| (j, k, v)).collect()
    })
}

fn poly(degree: usize, bound: f64) -> impl Strategy<Value = PolyDiskMap> {
    terms(degree, bound).prop_map(move |t| PolyDiskMap::from_terms(2, 1.0, degree, &t).unwrap())
}

/// A small antilinear field on `C^2` with constant and linear terms.
fn q_field() -> impl Strategy<Value = AntilinearField> {
    prop::collection::vec(complex(0.05), 12).prop_map(|a| {
        let m = |o: usize| vec![vec![a[o], a[o + 1]], vec![a[o + 2], a[o + 3]]];
        AntilinearField::from_complex(
            2,
            vec![
                (Monomial(vec![0, 0, 0, 0]), m(0)),
                (Monomial(vec![1, 0, 0, 0]), m(4)),
                (Monomial(vec![0, 0, 0, 1]), m(8)),
            ],
            2.0,
        )
        .unwrap()
    })
}

fn probe() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_structures_are_almost_complex(field in q_field(), p in probe()) {
        let s = make_q_structure(field.clone()).unwrap();
        let j = s.j_at(&p).unwrap();
        let id = nalgebra::DMatrix::<f64>::identity(4, 4);
        prop_assert!(max_abs(&(&j * &j + &id)) <= 1e-10);
        let q = compute_q(&s, &p).unwrap();
        prop_assert!(max_abs(&(&q * j0(2) + j0(2) * &q)) <= 1e-10);
        prop_assert!(max_abs(&(q - field.eval(&p))) <= 1e-12);
    }

    #[test]
    fn nijenhuis_is_antisymmetric(field in q_field(), p in probe(), x in probe(), y in probe()) {
        let s = make_q_structure(field).unwrap();
        let xy = nijenhuis(&s, &p, &x, &y, 1e-4).unwrap();
        let yx = nijenhuis(&s, &p, &y, &x, 1e-4).unwrap();
        for (a, b) in xy.iter().zip(&yx) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn d_bar_inverts_t(f in poly(10, 1.0)) {
        let back = f.green_t().d_bar().with_degree(f.degree());
        for (a, b) in back.raw().iter().zip(f.raw()) {
            prop_assert!((a - b).norm() <= 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn wirtinger_derivatives_commute(f in poly(8, 1.0)) {
        // the integer factors j and k are applied in opposite orders
        let (a, b) = (f.d().d_bar(), f.d_bar().d());
        for (x, y) in a.raw().iter().zip(b.raw()) {
            prop_assert!((x - y).norm() <= 4.0 * f64::EPSILON * y.norm());
        }
    }

    #[test]
    fn evaluation_ignores_term_order(t in terms(6, 1.0), z in complex(0.7)) {
        let f = PolyDiskMap::from_terms(2, 1.0, 6, &t).unwrap();
        let mut reversed = t.clone();
        reversed.reverse();
        let g = PolyDiskMap::from_terms(2, 1.0, 6, &reversed).unwrap();
        prop_assert_eq!(f.eval(z).unwrap(), g.eval(z).unwrap());
    }

    #[test]
    fn file_format_round_trips(f in poly(5, 3.0)) {
        let text = serde_json::to_string(&PolyDiskMapFile::from(&f)).unwrap();
        let back = PolyDiskMap::try_from(serde_json::from_str::<PolyDiskMapFile>(&text).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn cubic_perturbation_keeps_the_jet(f in poly(4, 1.0), w in prop::collection::vec(complex(0.1), 4)) {
        let shift = CubicShift { w2: w[..2].to_vec(), w3: w[2..].to_vec(), magnitude: 0.1 };
        let g = cubic_perturb(&f, &shift);
        for (j, k) in [(0, 0), (1, 0), (0, 1)] {
            prop_assert_eq!(g.coeff(j, k), f.coeff(j, k));
        }
    }

    #[test]
    fn poincare_distance_is_mobius_invariant(z in complex(0.6), w in complex(0.6), a in complex(0.6)) {
        let m = |x: C64| (x - a) / (C64::new(1.0, 0.0) - a.conj() * x);
        let d = poincare_distance(z, w);
        prop_assert!((d - poincare_distance(w, z)).abs() <= 1e-12);
        prop_assert!((d - poincare_distance(m(z), m(w))).abs() <= 1e-9 * (1.0 + d));
    }

    #[test]
    fn polydisk_margin_is_lipschitz(p in prop::collection::vec(complex(3.0), 2), q in prop::collection::vec(complex(3.0), 2)) {
        let d = Domain::polydisk(vec![c(0.0, 0.0); 2], vec![1.0, 2.0]).unwrap();
        let dist = p.iter().zip(&q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((domain_margin(&d, &p) - domain_margin(&d, &q)).abs() <= dist + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fit_inverts_grid_evaluation(f in poly(8, 1.0)) {
        let grid = CollocationGrid::new(1.0, 24, 64).unwrap();
        let back = fit_grid(&grid, &grid.eval(&f), 8).unwrap();
        for (a, b) in back.raw().iter().zip(f.raw()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn standard_solve_returns_its_data(t in terms(3, 1.0)) {
        let holo: Vec<_> = t.into_iter().filter(|(_, k, _)| *k == 0).collect();
        let h = PolyDiskMap::from_terms(2, 1.0, 16, &holo).unwrap();
        let solver = Solver::new(SolverConfig::default()).unwrap();
        let out = solver.solve_from_h(&h, &make_standard_structure(2).unwrap()).unwrap();
        prop_assert_eq!(out.report.iterations, 1);
        prop_assert_eq!(out.disk, h);
    }

    #[test]
    fn solutions_reproduce_their_data(field in q_field(), v in complex(1.0)) {
        let s = make_q_structure(field).unwrap();
        let solver = Solver::new(SolverConfig::default()).unwrap();
        let h = PolyDiskMap::linear(&[c(0.1, 0.0), c(0.0, 0.0)], &[v, c(0.2, 0.0)], 1.0, 16);
        let out = solver.solve_from_h(&h, &s).unwrap().require_converged().unwrap();
        let back = solver.phi_forward(&out.disk, &s).unwrap();
        let grid = solver.grid(1.0).unwrap();
        let err = grid.eval(&back).sup_dist(&grid.eval(&h));
        prop_assert!(err <= 10.0 * 1e-10 * (1.0 + grid.eval(&h).sup_norm()), "{err}");
        let tail = &out.report.step_history[out.report.step_history.len() / 2..];
        for w in tail.windows(2) {
            if w[0] > 1e-13 {
                prop_assert!(w[1] <= 0.9 * w[0], "{:?}", out.report.step_history);
            }
        }
    }

    #[test]
    fn psi_is_identity_for_standard_structure(a in prop::collection::vec(complex(0.5), 2), v in prop::collection::vec(complex(1.0), 2)) {
        let z = Jet1::new(a, v).unwrap();
        let solver = Solver::new(SolverConfig::default()).unwrap();
        prop_assert_eq!(psi(&z, &make_standard_structure(2).unwrap(), 1.0, &solver).unwrap(), z);
    }

    #[test]
    fn double_point_of_phi_alpha(modulus in 1.5..3.0f64, angle in 0.0..std::f64::consts::TAU) {
        let alpha = C64::from_polar(modulus, angle);
        let scan = find_self_intersections(&phi_alpha(alpha).unwrap(), &RefineConfig::default());
        prop_assert_eq!(scan.intersections.len(), 1);
        let x = &scan.intersections[0];
        prop_assert!(x.transversal);
        prop_assert!(x.z1.norm().min(x.z2.norm()) <= 1e-8);
        let other = if x.z1.norm() < x.z2.norm() { x.z2 } else { x.z1 };
        prop_assert!((other - 1.0 / alpha).norm() <= 1e-8);
    }

    #[test]
    fn graph_lifts_are_injective(f in poly(3, 1.0)) {
        let s = make_standard_structure(2).unwrap();
        let (lifted, _) = graph_lift(&f, &s);
        prop_assert!(find_self_intersections(&lifted, &RefineConfig::default()).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hahn_dominates_kobayashi_and_scales(p in prop::collection::vec(complex(0.3), 2), v in prop::collection::vec(complex(1.0), 2)) {
        prop_assume!(v.iter().map(|x| x.norm_sqr()).sum::<f64>() > 0.01);
        let small = Domain::ball(vec![c(0.0, 0.0); 2], 1.0).unwrap();
        let large = Domain::ball(vec![c(0.0, 0.0); 2], 1.5).unwrap();
        let s = make_standard_structure(2).unwrap();
        let solver = Solver::new(SolverConfig::default()).unwrap();
        let (newton, refine, config) = (NewtonConfig::default(), RefineConfig::default(), NormConfig::default());
        let ctx = |domain| NormContext { domain, structure: &s, solver: &solver, newton: &newton, refine: &refine, config: &config };
        let jet = Jet1::new(p.clone(), v.clone()).unwrap();
        let row = &compare_norms(&ctx(&small), &[jet]).unwrap()[0];
        prop_assert!(row.s_hat >= row.f_hat);
        let wide = kobayashi_norm(&ctx(&large), &p, &v).unwrap();
        prop_assert!(wide.value <= row.f_hat * (1.0 + 1e-2));
        let doubled: Vec<C64> = v.iter().map(|x| x * 2.0).collect();
        let scaled = kobayashi_norm(&ctx(&small), &p, &doubled).unwrap();
        prop_assert!((scaled.value - 2.0 * row.f_hat).abs() <= 0.01 * 2.0 * row.f_hat);
    }
}

#[test]
fn pushforward_structures_are_integrable() {
    let phi = PolyDiffeo::new(
        2,
        vec![(Monomial(vec![2, 0, 0, 0]), vec![0.0, 0.0, 0.1, 0.0]), (Monomial(vec![1, 1, 0, 0]), vec![0.0, 0.0, 0.0, 0.1])],
        2.0,
    )
    .unwrap();
    let s = make_pushforward_structure(phi).unwrap();
    let e = |i: usize| {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v
    };
    for p in [[0.3, -0.2, 0.1, 0.4], [-0.5, 0.2, 0.0, 0.0]] {
        for (i, k) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
            let n = nijenhuis(&s, &p, &e(i), &e(k), 1e-4).unwrap();
            assert!(n.iter().all(|x| x.abs() <= 1e-5), "{n:?}");
        }
    }
}
