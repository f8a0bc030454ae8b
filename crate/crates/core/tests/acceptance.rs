//! One test per acceptance criterion. Each check prints a PASS/FAIL line and each
//! test ends with a criterion verdict.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfstokes::analysis::CSV_HEADER;
use surfstokes::basis::LagrangeBasis;
use surfstokes::quadrature::{monomial_integral, MAX_DEGREE};
use surfstokes::solver::AugmentedSystem;
use surfstokes::*;

const LEVELS: std::ops::RangeInclusive<usize> = 1..=4;

/// Large runs hold this lock so only one of them is resident at a time.
static HEAVY: Mutex<()> = Mutex::new(());
static STUDIES: Mutex<Option<HashMap<String, Arc<StudyReport>>>> = Mutex::new(None);

fn heavy() -> MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

struct Criterion {
    id: u8,
    failed: usize,
}

impl Criterion {
    fn new(id: u8) -> Self {
        Criterion { id, failed: 0 }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        println!("[criterion {}] {} {label}: {detail}", self.id, if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }

    fn near(&mut self, label: &str, measured: f64, target: f64, tol: f64) {
        let pass = (measured - target).abs() <= tol;
        self.check(label, pass, format!("measured {measured:.3}, expected {target:.2} ± {tol}"));
    }

    fn at_most(&mut self, label: &str, measured: f64, bound: f64) {
        self.check(label, measured <= bound, format!("measured {measured:.3e}, bound {bound:.1e}"));
    }

    fn at_least(&mut self, label: &str, measured: f64, bound: f64) {
        self.check(label, measured >= bound, format!("measured {measured:.3}, bound {bound}"));
    }

    fn finish(self) {
        let verdict = if self.failed == 0 { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict}", self.id);
        assert_eq!(self.failed, 0, "criterion {} has {} failing checks", self.id, self.failed);
    }
}

fn study(element: &str, kg: usize, form_a: FormA, form_b: FormB, curvature: CurvatureMode) -> Arc<StudyReport> {
    let mut c = StudyConfig::new(element.parse().unwrap(), kg);
    c.form_a = form_a;
    c.form_b = form_b;
    c.curvature = curvature;
    c.levels = LEVELS;
    c.inf_sup = false;
    let key = c.echo();
    let _guard = heavy();
    let mut cache = STUDIES.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(r) = cache.get_or_insert_with(HashMap::new).get(&key) {
        return r.clone();
    }
    drop(cache);
    let report = Arc::new(run_study(&c).unwrap());
    let mut cache = STUDIES.lock().unwrap_or_else(|e| e.into_inner());
    cache.get_or_insert_with(HashMap::new).insert(key, report.clone());
    report
}

fn finest(orders: &[f64]) -> f64 {
    *orders.last().unwrap()
}

fn form_label(form_b: FormB) -> &'static str {
    match form_b {
        FormB::B1 => "(a1,b1)",
        FormB::B2 => "(a1,b2)",
    }
}

#[test]
fn criterion_01_benchmark_consistency() {
    let mut c = Criterion::new(1);
    let mesh = Arc::new(build_icosphere(3).unwrap());
    let geom = lift_geometry(mesh, Arc::new(UnitSphere), 3).unwrap();
    let b = benchmark();
    for degree in [10, 12] {
        let rule = triangle_rule(degree).unwrap();
        let sq = |second: bool| {
            integrate_surface(&geom, &rule, |d| {
                let (r1, r2) = b.strong_residuals(&d.x.normalize());
                if second {
                    r2.norm_squared()
                } else {
                    r1.norm_squared()
                }
            })
            .unwrap()
            .sqrt()
        };
        c.at_most(&format!("symmetric-gradient residual, degree {degree}"), sq(false), 1e-8);
        c.at_most(&format!("curvature identity residual, degree {degree}"), sq(true), 1e-8);
    }
    c.finish();
}

#[test]
fn criterion_02_tangential_velocity_orders() {
    let mut c = Criterion::new(2);
    let cases: [(&str, usize, f64); 6] =
        [("th:2", 1, 1.0), ("th:2", 2, 3.0), ("th:3", 3, 4.0), ("mini", 2, 2.0), ("p2p0", 2, 2.0), ("cr", 2, 3.0)];
    for (element, kg, expected) in cases {
        let tol = if expected >= 4.0 { 0.3 } else { 0.25 };
        let tag: PairTag = element.parse().unwrap();
        let forms: &[FormB] = if tag.pressure_continuous() { &[FormB::B1, FormB::B2] } else { &[FormB::B1] };
        for &form_b in forms {
            let r = study(element, kg, FormA::A1, form_b, CurvatureMode::Intrinsic);
            assert_eq!(r.predicted.tangential_l2, expected, "predicted order of {element}/kg={kg}");
            let label = format!("{element} k_g={kg} {} tangential L2 EOC", form_label(form_b));
            c.near(&label, finest(&r.eocs.tangential_l2), expected, tol);
        }
    }
    c.finish();
}

#[test]
fn criterion_03_pressure_orders() {
    let mut c = Criterion::new(3);
    for (element, kg, expected) in [("th:2", 1, 1.0), ("th:2", 2, 2.0), ("cr", 2, 2.0), ("p2p0", 2, 1.0)] {
        let r = study(element, kg, FormA::A1, FormB::B1, CurvatureMode::Intrinsic);
        assert_eq!(r.predicted.pressure, expected);
        c.near(&format!("{element} k_g={kg} pressure L2 EOC"), finest(&r.eocs.pressure), expected, 0.25);
    }
    c.finish();
}

#[test]
fn criterion_04_energy_order() {
    let mut c = Criterion::new(4);
    let r = study("th:2", 2, FormA::A1, FormB::B1, CurvatureMode::Intrinsic);
    assert_eq!(r.predicted.energy, 1.5);
    c.near("th:2 k_g=2 energy EOC", finest(&r.eocs.energy), 1.5, 0.3);
    c.finish();
}

#[test]
fn criterion_05_normal_order() {
    let mut c = Criterion::new(5);
    let r = study("th:2", 2, FormA::A1, FormB::B1, CurvatureMode::Intrinsic);
    assert_eq!(r.predicted.normal, 2.0);
    c.near("th:2 k_g=2 normal L2 EOC", finest(&r.eocs.normal), 2.0, 0.3);
    c.finish();
}

#[test]
fn criterion_06_curvature_limitation() {
    let mut c = Criterion::new(6);
    let intrinsic = study("th:3", 3, FormA::A2, FormB::B1, CurvatureMode::Intrinsic);
    c.near("th:3 k_g=3 a2 intrinsic tangential EOC", finest(&intrinsic.eocs.tangential_l2), 2.0, 0.3);
    let exact = study("th:3", 3, FormA::A2, FormB::B1, CurvatureMode::Exact);
    c.near("th:3 k_g=3 a2 exact tangential EOC", finest(&exact.eocs.tangential_l2), 4.0, 0.3);
    let even = study("th:2", 2, FormA::A2, FormB::B1, CurvatureMode::Intrinsic);
    // With k_K = 2 the tangential order is min{k_u + 1, k_g + 1, 2k_g − 1, k_K} = 2.
    assert_eq!(even.predicted.tangential_l2, 2.0);
    c.near("th:2 k_g=2 a2 intrinsic tangential EOC", finest(&even.eocs.tangential_l2), 2.0, 0.3);
    c.finish();
}

fn scan(element: &str, kg: usize) -> Vec<InfSupRow> {
    let mut c = StudyConfig::new(element.parse().unwrap(), kg);
    c.levels = LEVELS;
    let _guard = heavy();
    inf_sup_scan(&c).unwrap()
}

#[test]
fn criterion_07_inf_sup_stability() {
    let mut c = Criterion::new(7);
    for element in ["th:2", "mini", "cr", "p2p0"] {
        for kg in [1, 2] {
            let betas: Vec<f64> = scan(element, kg).iter().map(|r| r.beta_h).collect();
            let lo = betas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = betas.iter().copied().fold(0.0, f64::max);
            let label = format!("{element} k_g={kg} beta_h {betas:.3?}");
            c.at_least(&format!("{label} minimum"), lo, 0.05);
            c.check(&format!("{label} spread"), hi < 2.0 * lo, format!("max/min {:.3}, bound 2", hi / lo));
        }
    }
    for kg in [1, 2] {
        let betas: Vec<f64> = scan("p1p1-unsafe", kg).iter().map(|r| r.beta_h).collect();
        for (l, w) in betas.windows(2).enumerate() {
            let ratio = w[1] / w[0];
            let label = format!("p1p1 k_g={kg} beta_h ratio levels {}-{}", l + 1, l + 2);
            c.check(&label, ratio < 0.8, format!("measured {ratio:.3}, bound < 0.8"));
        }
    }
    c.finish();
}

#[test]
fn criterion_08_geometry_rates() {
    let mut c = Criterion::new(8);
    let r = {
        let _guard = heavy();
        patch_rate_study(2, LEVELS).unwrap()
    };
    c.at_least("|mu_bar - 1| exponent", r.mu_bar, 1.8);
    c.at_least("flattening deviation exponent", r.flattening, 0.9);
    c.at_least("|mu_h - 1| exponent", r.mu_h, 1.8);
    c.at_least("|[D F_h]| exponent", r.df_jump, 0.9);
    c.at_least("|D mu_h| exponent", r.dmu_h, 0.9);
    c.finish();
}

fn smooth_velocity(x: &Vec3) -> Vec3 {
    Vec3::new(1.0 + 0.5 * x.x + 0.3 * x.y * x.z, x.y + 0.2, -x.x * x.z + 0.1)
}

fn smooth_pressure(x: &Vec3) -> f64 {
    (0.7 * x.x).exp() + x.y * x.y - 0.4 * x.z + 0.3
}

#[test]
fn criterion_09_form_discrepancy() {
    let mut c = Criterion::new(9);
    for kg in 1..=3 {
        let rows: Vec<_> = {
            let _guard = heavy();
            LEVELS
                .map(|l| form_discrepancy(PairTag::TaylorHood(2), kg, l, smooth_velocity, smooth_pressure).unwrap())
                .collect()
        };
        let n = rows.len();
        let rate = |f: fn(&surfstokes::analysis::FormDiscrepancy) -> f64| {
            (f(&rows[n - 2]) / f(&rows[n - 1])).ln() / (rows[n - 2].h / rows[n - 1].h).ln()
        };
        let constant = rate(|r| r.b1_constant);
        let difference = rate(|r| r.b1_minus_b2);
        let (pc, pd) = ((kg + 1) as f64, kg as f64);
        if kg % 2 == 1 {
            c.near(&format!("k_g={kg} |b1(v_h,1)| exponent"), constant, pc, 0.3);
            c.near(&format!("k_g={kg} |b1 - b2| exponent"), difference, pd, 0.3);
        } else {
            // Even k_g on the sphere gains one order; the bounds still hold.
            c.at_least(&format!("k_g={kg} |b1(v_h,1)| exponent {constant:.3}, bound"), constant, pc - 0.3);
            c.at_least(&format!("k_g={kg} |b1 - b2| exponent {difference:.3}, bound"), difference, pd - 0.3);
        }
    }
    c.finish();
}

#[test]
fn criterion_10_property_suites() {
    let mut c = Criterion::new(10);

    let mut worst: f64 = 0.0;
    for degree in 1..=MAX_DEGREE {
        let rule = triangle_rule(degree).unwrap();
        for a in 0..=degree {
            for b in 0..=degree - a {
                let exact = monomial_integral(a, b);
                let got = rule.integrate(|xi| xi[0].powi(a as i32) * xi[1].powi(b as i32));
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    c.at_most(&format!("quadrature exactness for degrees 1..={MAX_DEGREE}"), worst, 1e-12);

    let mesh = Arc::new(build_icosphere(1).unwrap());
    let geom = lift_geometry(mesh.clone(), Arc::new(UnitSphere), 3).unwrap();
    let rule = triangle_rule(6).unwrap();
    let defect = integrate_surface(&geom, &rule, |d| {
        let id = Mat3::identity();
        (d.p * d.p - d.p).norm_squared()
            + (d.p * d.normal).norm_squared()
            + (d.p + d.q - id).norm_squared()
            + (d.p - d.p.transpose()).norm_squared()
            + (d.normal.norm() - 1.0).powi(2)
            + (d.p * d.df - d.df).norm_squared()
    })
    .unwrap();
    c.at_most("projection algebra defect", defect.sqrt(), 1e-12);

    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let basis = LagrangeBasis::new(k);
        for q in triangle_rule(8).unwrap().points {
            let s = basis.eval(q, false);
            let sum: f64 = s.values.iter().sum();
            let g = s.grads.iter().fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
            worst = worst.max((sum - 1.0).abs()).max(g[0].abs()).max(g[1].abs());
        }
    }
    c.at_most("partition of unity for orders 1..=5", worst, 1e-12);

    let geom2 = lift_geometry(Arc::new(build_icosphere(0).unwrap()), Arc::new(UnitSphere), 2).unwrap();
    let mixed = build_pair(PairTag::TaylorHood(2), &geom2, false).unwrap();
    let cfg = SystemConfig { form_a: FormA::A1, form_b: FormB::B1, eta: 1.0, curvature: None, quad_degree: None };
    let b = benchmark();
    let system = assemble_system(&mixed, &geom2, &cfg, &|x| b.load(x)).unwrap();
    for (name, m) in [("A", &system.a), ("S", &system.s), ("Mp", &system.mp), ("N1", &system.n1)] {
        c.at_most(&format!("{name} relative asymmetry"), m.relative_asymmetry(), 1e-12);
        let eig = nalgebra::SymmetricEigen::new(m.to_dense()).eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(0.0, f64::max);
        c.check(
            &format!("{name} positive semidefinite"),
            min >= -1e-12 * max,
            format!("λ_min/λ_max {:.2e}", min / max),
        );
    }

    let velocity = system.velocity_block();
    let aug = AugmentedSystem::new(&velocity, &system.b, &system.mean).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u0: Vec<f64> = (0..system.velocity_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p0: Vec<f64> = (0..system.pressure_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mm: f64 = system.mean.iter().map(|m| m * m).sum();
    let mp: f64 = system.mean.iter().zip(&p0).map(|(m, p)| m * p).sum();
    p0.iter_mut().zip(&system.mean).for_each(|(p, m)| *p -= mp / mm * m);
    let bt = system.b.transpose().mul_vec(&p0);
    let f: Vec<f64> = velocity.mul_vec(&u0).iter().zip(&bt).map(|(a, b)| a + b).collect();
    let s = aug.solve(&f, &system.b.mul_vec(&u0)).unwrap();
    let rel = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (d / y.iter().map(|v| v * v).sum::<f64>()).sqrt()
    };
    c.at_most("manufactured round trip, velocity", rel(&s.u, &u0), 1e-8);
    c.at_most("manufactured round trip, pressure", rel(&s.p, &p0), 1e-8);

    let mut config = StudyConfig::new(PairTag::TaylorHood(2), 2);
    config.levels = 0..=2;
    let csv = |config: &StudyConfig| {
        let mut out = Vec::new();
        write_csv(&run_study(config).unwrap(), &mut out).unwrap();
        out
    };
    let (first, second) = (csv(&config), csv(&config));
    c.check("CSV reproduction", first == second, format!("{} bytes", first.len()));
    let text = String::from_utf8(first).unwrap();
    c.check("CSV header", text.lines().nth(1) == Some(CSV_HEADER), "fixed column list".into());
    c.finish();
}
