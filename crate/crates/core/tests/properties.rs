//! Randomized invariants.

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use surfstokes::basis::LagrangeBasis;
use surfstokes::quadrature::{monomial_integral, MAX_DEGREE};
use surfstokes::solver::AugmentedSystem;
use surfstokes::*;

fn reference_point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| if a + b <= 1.0 { [a, b] } else { [1.0 - a, 1.0 - b] })
}

fn sphere_geometry(kg: usize) -> &'static ParametricGeometry {
    static GEOMS: OnceLock<Vec<ParametricGeometry>> = OnceLock::new();
    let all = GEOMS.get_or_init(|| {
        let mesh = Arc::new(build_icosphere(1).unwrap());
        (1..=4).map(|k| lift_geometry(mesh.clone(), Arc::new(UnitSphere), k).unwrap()).collect()
    });
    &all[kg - 1]
}

struct Small {
    system: StokesSystem,
    aug: AugmentedSystem,
}

fn small() -> &'static Small {
    static SMALL: OnceLock<Small> = OnceLock::new();
    SMALL.get_or_init(|| {
        let geom = lift_geometry(Arc::new(build_icosphere(0).unwrap()), Arc::new(UnitSphere), 2).unwrap();
        let mixed = build_pair(PairTag::TaylorHood(2), &geom, false).unwrap();
        let cfg = SystemConfig { form_a: FormA::A1, form_b: FormB::B1, eta: 1.0, curvature: None, quad_degree: None };
        let b = benchmark();
        let system = assemble_system(&mixed, &geom, &cfg, &|x| b.load(x)).unwrap();
        let aug = AugmentedSystem::new(&system.velocity_block(), &system.b, &system.mean).unwrap();
        Small { system, aug }
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rules_integrate_polynomials_exactly(
        degree in 1..=MAX_DEGREE,
        coeffs in prop::collection::vec(-1.0..1.0f64, 231),
    ) {
        let rule = triangle_rule(degree).unwrap();
        let mut terms = Vec::new();
        for a in 0..=degree {
            for b in 0..=degree - a {
                terms.push((a, b));
            }
        }
        let exact: f64 = terms.iter().zip(&coeffs).map(|(&(a, b), c)| c * monomial_integral(a, b)).sum();
        let got = rule.integrate(|xi| {
            terms.iter().zip(&coeffs).map(|(&(a, b), c)| c * xi[0].powi(a as i32) * xi[1].powi(b as i32)).sum()
        });
        prop_assert!((got - exact).abs() <= 1e-12 * coeffs.iter().map(|c| c.abs()).sum::<f64>());
    }

    #[test]
    fn lagrange_partition_of_unity(order in 1usize..=5, xi in reference_point()) {
        let s = LagrangeBasis::new(order).eval(xi, true);
        let sum: f64 = s.values.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for d in 0..2 {
            prop_assert!(s.grads.iter().map(|g| g[d]).sum::<f64>().abs() < 1e-10);
        }
        for h in [[0, 0], [0, 1], [1, 1]] {
            prop_assert!(s.hessians.iter().map(|m| m[h[0]][h[1]]).sum::<f64>().abs() < 1e-8);
        }
    }

    #[test]
    fn projection_algebra_on_curved_elements(
        kg in 1usize..=4,
        element in 0usize..80,
        xi in reference_point(),
        dir in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let geom = sphere_geometry(kg);
        let d = geom.data_with(element, xi, &geom.tabulate(xi)).unwrap();
        prop_assert!((d.p + d.q - Mat3::identity()).norm() < 1e-12);
        prop_assert!((d.p * d.q).norm() < 1e-12);
        prop_assert!((d.normal.norm() - 1.0).abs() < 1e-12);
        let t = d.df * nalgebra::Vector2::new(dir.0, dir.1);
        prop_assert!((d.p * t - t).norm() <= 1e-12 * t.norm().max(1.0));
        prop_assert!(d.mu > 0.0);
    }

    #[test]
    fn transpose_and_products(
        entries in prop::collection::vec((0usize..7, 0usize..5, -1.0..1.0f64), 0..40),
        x in prop::collection::vec(-1.0..1.0f64, 5),
        y in prop::collection::vec(-1.0..1.0f64, 7),
    ) {
        let m = CsrMatrix::from_triplets(7, 5, &entries);
        let t = m.transpose();
        prop_assert_eq!(t.transpose(), m.clone());
        let ytmx: f64 = y.iter().zip(m.mul_vec(&x)).map(|(a, b)| a * b).sum();
        let xtty: f64 = x.iter().zip(t.mul_vec(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((ytmx - xtty).abs() < 1e-12);
        let dense = m.to_dense();
        for &(r, c, _) in &entries {
            prop_assert_eq!(m.get(r, c), dense[(r, c)]);
        }
    }

    #[test]
    fn eoc_of_power_laws(order in 0.5..5.0f64, scale in 1e-6..1e3f64, ratio in 1.5..3.0f64) {
        let hs: Vec<f64> = (0..4).map(|l| 0.5 / ratio.powi(l)).collect();
        let errs: Vec<f64> = hs.iter().map(|h| scale * h.powf(order)).collect();
        for r in eoc(&errs, &hs).unwrap() {
            prop_assert!((r - order).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn augmented_solve_meets_constraints(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let Small { system, aug } = small();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u0: Vec<f64> = (0..system.velocity_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f: Vec<f64> = (0..system.velocity_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = system.b.mul_vec(&u0);
        let s = aug.solve(&f, &g).unwrap();
        let mp: f64 = system.mean.iter().zip(&s.p).map(|(m, p)| m * p).sum();
        prop_assert!(mp.abs() <= 1e-10 * norm(&system.mean) * norm(&s.p));
        let bu = system.b.mul_vec(&s.u);
        let d: Vec<f64> = bu.iter().zip(&system.mean).zip(&g).map(|((a, m), b)| a + m * s.lambda - b).collect();
        prop_assert!(norm(&d) <= 1e-10 * (norm(&g) + system.b.max_abs() * norm(&s.u)));
    }
}
