use std::fmt::Write as _;
use std::io::Write;
use std::ops::RangeInclusive;
use std::sync::Arc;

use super::{compute_errors, eoc, predicted_orders, ErrorRow, PredictedOrders};
use crate::assembly::{
    assemble_b, assemble_norm1, assemble_pressure_mass, assemble_pressure_stiffness, assemble_system,
    assemble_velocity_form, FormA, FormB, StokesSystem, SystemConfig, VelocityForm,
};
use crate::error::{Error, Result};
use crate::geometry::{
    curvature_field, lift_geometry, CurvatureMode, ParametricGeometry, RateReport, UnitSphere, MAX_GEOMETRY_ORDER,
};
use crate::mesh::{build_icosphere, mesh_size, MAX_LEVEL};
use crate::solver::{estimate_inf_sup, solve_stokes};
use crate::spaces::{build_pair, MixedSpace, PairTag};
use crate::Vec3;

use super::benchmark;

/// Fixed CSV columns of a convergence study.
pub const CSV_HEADER: &str = "level,h,dofs_u,dofs_p,err_u_tan_l2,eoc_u_tan_l2,err_u_tan_h1,eoc_u_tan_h1,\
err_u_normal,eoc_u_normal,err_p_l2,eoc_p_l2,err_energy,eoc_energy,beta_h";

/// One convergence study on the sphere benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub element: PairTag,
    pub kg: usize,
    pub form_a: FormA,
    pub form_b: FormB,
    /// Only used by the a₂ form.
    pub curvature: CurvatureMode,
    pub eta: f64,
    pub levels: RangeInclusive<usize>,
    /// Estimate β_h on every level.
    pub inf_sup: bool,
}

impl StudyConfig {
    pub fn new(element: PairTag, kg: usize) -> Self {
        StudyConfig {
            element,
            kg,
            form_a: FormA::A1,
            form_b: FormB::B1,
            curvature: CurvatureMode::Intrinsic,
            eta: 1.0,
            levels: 1..=4,
            inf_sup: true,
        }
    }

    /// Check every setting before any mesh is built.
    pub fn validate(&self) -> Result<()> {
        self.element.validate(true)?;
        if !(1..=MAX_GEOMETRY_ORDER).contains(&self.kg) {
            return Err(Error::Config(format!("geometry order {} outside 1..={MAX_GEOMETRY_ORDER}", self.kg)));
        }
        if self.form_b == FormB::B2 && !self.element.pressure_continuous() {
            return Err(Error::Config(format!(
                "the b2 form integrates the pressure gradient, but the {} pressure is discontinuous",
                self.element
            )));
        }
        if let CurvatureMode::Lifted(k) = self.curvature {
            if k <= self.kg || k > MAX_GEOMETRY_ORDER {
                return Err(Error::Config(format!(
                    "lifted curvature order {k} must lie in {}..={MAX_GEOMETRY_ORDER}",
                    self.kg + 1
                )));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("penalty weight must be positive and finite, got {}", self.eta)));
        }
        if self.levels.is_empty() {
            return Err(Error::Config(format!("empty level range {:?}", self.levels)));
        }
        if *self.levels.end() > MAX_LEVEL {
            return Err(Error::Resource(format!("level {} exceeds the limit {MAX_LEVEL}", self.levels.end())));
        }
        Ok(())
    }

    /// One-line description used as the CSV comment row.
    pub fn echo(&self) -> String {
        format!(
            "element={} kg={} form_a={} form_b={} curvature={} eta={} levels={}:{}",
            self.element,
            self.kg,
            self.form_a,
            self.form_b,
            self.curvature,
            self.eta,
            self.levels.start(),
            self.levels.end()
        )
    }
}

/// Orders between consecutive levels; each list has one entry fewer than the rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EocTable {
    pub tangential_l2: Vec<f64>,
    pub tangential_h1: Vec<f64>,
    pub normal: Vec<f64>,
    pub pressure: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Rows, orders and predictions of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<ErrorRow>,
    pub eocs: EocTable,
    pub predicted: PredictedOrders,
    pub k_u: usize,
}

impl StudyReport {
    /// Measured vs predicted orders on the finest level pair.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
        let p = &self.predicted;
        let _ = writeln!(s, "{}  (k_u = {})", self.config.echo(), self.k_u);
        let _ = writeln!(s, "{:<18}{:>10}{:>10}  per level", "quantity", "predicted", "final");
        let lines: [(&str, f64, &[f64]); 5] = [
            ("tangential L2", p.tangential_l2, &self.eocs.tangential_l2),
            ("tangential H1", f64::NAN, &self.eocs.tangential_h1),
            ("normal L2", p.normal, &self.eocs.normal),
            ("pressure L2", p.pressure, &self.eocs.pressure),
            ("energy", p.energy, &self.eocs.energy),
        ];
        for (name, pred, e) in lines {
            let pred = if pred.is_nan() { "-".to_string() } else { format!("{pred:.2}") };
            let all: Vec<String> = e.iter().map(|v| format!("{v:.2}")).collect();
            let _ = writeln!(s, "{name:<18}{pred:>10}{:>10.2}  {}", last(e), all.join(" "));
        }
        let betas: Vec<String> =
            self.rows.iter().map(|r| r.beta_h.map_or("-".to_string(), |b| format!("{b:.4}"))).collect();
        let _ = writeln!(s, "{:<18}{}", "beta_h", betas.join(" "));
        s
    }
}

/// Run a study, calling `inspect` on each level's geometry and system before solving.
pub fn run_study_with(
    config: &StudyConfig,
    inspect: &mut dyn FnMut(&ParametricGeometry, &MixedSpace, &StokesSystem) -> Result<()>,
) -> Result<StudyReport> {
    config.validate()?;
    let bench = benchmark();
    let mut rows = Vec::new();
    let mut k_u = 0;
    for level in config.levels.clone() {
        let mesh = Arc::new(build_icosphere(level)?);
        let geom = lift_geometry(mesh, Arc::new(UnitSphere), config.kg)?;
        let mixed = build_pair(config.element, &geom, true)?;
        k_u = mixed.k_u;
        let curvature = match config.form_a {
            FormA::A2 => Some(curvature_field(&geom, config.curvature)?),
            FormA::A1 => None,
        };
        let sc = SystemConfig {
            form_a: config.form_a,
            form_b: config.form_b,
            eta: config.eta,
            curvature: curvature.as_ref(),
            quad_degree: None,
        };
        let system = assemble_system(&mixed, &geom, &sc, &|y| bench.load(y))?;
        inspect(&geom, &mixed, &system)?;
        let solution = solve_stokes(&system)?;
        let mut row = compute_errors(&solution, &mixed, &geom, &system, &bench)?;
        if config.inf_sup {
            row.beta_h = Some(estimate_inf_sup(&system.b, &system.n1, &system.mp, &system.mean)?.beta);
        }
        rows.push(row);
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let orders = |f: fn(&ErrorRow) -> f64| -> Result<Vec<f64>> {
        if rows.len() < 2 {
            return Ok(Vec::new());
        }
        eoc(&rows.iter().map(f).collect::<Vec<_>>(), &hs)
    };
    let eocs = EocTable {
        tangential_l2: orders(|r| r.tangential_l2)?,
        tangential_h1: orders(|r| r.tangential_h1)?,
        normal: orders(|r| r.normal_l2)?,
        pressure: orders(|r| r.pressure_l2)?,
        energy: orders(|r| r.energy)?,
    };
    Ok(StudyReport {
        config: config.clone(),
        rows,
        eocs,
        predicted: predicted_orders(config.form_a, k_u, config.kg, config.curvature),
        k_u,
    })
}

/// Run a convergence study on the sphere benchmark.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    run_study_with(config, &mut |_, _, _| Ok(()))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.11e}")
    }
}

/// Write the comment row, header and one row per level.
pub fn write_csv<W: Write>(report: &StudyReport, mut out: W) -> Result<()> {
    writeln!(out, "# {}", report.config.echo())?;
    writeln!(out, "{CSV_HEADER}")?;
    for (l, r) in report.rows.iter().enumerate() {
        let e = |v: &[f64]| if l == 0 { String::new() } else { num(v[l - 1]) };
        let t = &report.eocs;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            r.dofs_u,
            r.dofs_p,
            num(r.tangential_l2),
            e(&t.tangential_l2),
            num(r.tangential_h1),
            e(&t.tangential_h1),
            num(r.normal_l2),
            e(&t.normal),
            num(r.pressure_l2),
            e(&t.pressure),
            num(r.energy),
            e(&t.energy),
            r.beta_h.map(num).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// Fixed CSV columns of an inf-sup scan.
pub const INF_SUP_HEADER: &str = "level,h,dofs_u,dofs_p,beta_h,ratio,iterations";

/// Fixed CSV columns of a patch-rate study.
pub const RATE_HEADER: &str = "level,h,mu_bar,flattening,mu_h,dmu_h,df_jump";

/// β_h on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupRow {
    pub level: usize,
    pub h: f64,
    pub dofs_u: usize,
    pub dofs_p: usize,
    pub beta_h: f64,
    pub iterations: usize,
}

/// β_h over a level range, without solving the Stokes problem.
pub fn inf_sup_scan(config: &StudyConfig) -> Result<Vec<InfSupRow>> {
    config.validate()?;
    let bench = benchmark();
    let mut rows = Vec::new();
    for level in config.levels.clone() {
        let mesh = Arc::new(build_icosphere(level)?);
        let geom = lift_geometry(mesh, Arc::new(UnitSphere), config.kg)?;
        let mixed = build_pair(config.element, &geom, true)?;
        let curvature = match config.form_a {
            FormA::A2 => Some(curvature_field(&geom, config.curvature)?),
            FormA::A1 => None,
        };
        let sc = SystemConfig {
            form_a: config.form_a,
            form_b: config.form_b,
            eta: config.eta,
            curvature: curvature.as_ref(),
            quad_degree: None,
        };
        let system = assemble_system(&mixed, &geom, &sc, &|y| bench.load(y))?;
        let est = estimate_inf_sup(&system.b, &system.n1, &system.mp, &system.mean)?;
        rows.push(InfSupRow {
            level,
            h: system.h,
            dofs_u: mixed.velocity_dim(),
            dofs_p: mixed.pressure_dim(),
            beta_h: est.beta,
            iterations: est.iterations,
        });
    }
    Ok(rows)
}

/// Comment row, header and one row per level; `ratio` is β_h over the previous level's value.
pub fn write_inf_sup_csv<W: Write>(config: &StudyConfig, rows: &[InfSupRow], mut out: W) -> Result<()> {
    writeln!(out, "# {}", config.echo())?;
    writeln!(out, "{INF_SUP_HEADER}")?;
    for (l, r) in rows.iter().enumerate() {
        let ratio = if l == 0 { String::new() } else { num(r.beta_h / rows[l - 1].beta_h) };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            r.dofs_u,
            r.dofs_p,
            num(r.beta_h),
            ratio,
            r.iterations
        )?;
    }
    Ok(())
}

/// Comment row, header, one row per level and a trailing row of fitted exponents.
pub fn write_rate_csv<W: Write>(
    kg: usize,
    levels: &RangeInclusive<usize>,
    report: &RateReport,
    mut out: W,
) -> Result<()> {
    writeln!(out, "# mode=georates kg={kg} levels={}:{}", levels.start(), levels.end())?;
    writeln!(out, "{RATE_HEADER}")?;
    for (l, m) in levels.clone().zip(&report.levels) {
        writeln!(
            out,
            "{l},{},{},{},{},{},{}",
            num(m.h),
            num(m.mu_bar),
            num(m.flattening),
            num(m.mu_h),
            num(m.dmu_h),
            num(m.df_jump)
        )?;
    }
    writeln!(
        out,
        "exponent,,{},{},{},{},{}",
        num(report.mu_bar),
        num(report.flattening),
        num(report.mu_h),
        num(report.dmu_h),
        num(report.df_jump)
    )?;
    Ok(())
}

/// Measured differences between the two divergence forms on one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormDiscrepancy {
    pub h: f64,
    /// ‖B₁ᵀ1‖ / (tr N₀)^½, the root-mean-square of |b₁(v_h, 1)| over |||v_h|||₀ for
    /// velocity coefficients drawn independently with zero mean.
    pub b1_constant: f64,
    /// |b₁(v_h, q_h) − b₂(v_h, q_h)| / ((h‖∇q_h‖ + ‖q_h‖)·|||v_h|||₁) for the interpolants of `v` and `q`.
    pub b1_minus_b2: f64,
}

/// Compare the two divergence forms on one level.
pub fn form_discrepancy(
    element: PairTag,
    kg: usize,
    level: usize,
    v: impl Fn(&Vec3) -> Vec3,
    q: impl Fn(&Vec3) -> f64,
) -> Result<FormDiscrepancy> {
    if !element.pressure_continuous() {
        return Err(Error::Config(format!("{element} has no continuous pressure for the b2 form")));
    }
    let mesh = Arc::new(build_icosphere(level)?);
    let h = mesh_size(&mesh);
    let geom = lift_geometry(mesh, Arc::new(UnitSphere), kg)?;
    let mixed = build_pair(element, &geom, true)?;
    let b1 = assemble_b(FormB::B1, &mixed, &geom, None)?;
    let b2 = assemble_b(FormB::B2, &mixed, &geom, None)?;
    let n0 = assemble_velocity_form(
        VelocityForm { mass: 1.0, normal: 1.0 / (h * h), ..Default::default() },
        &mixed,
        &geom,
        None,
        None,
    )?;
    let n1 = assemble_norm1(&mixed, &geom, h)?;
    let (mp, _) = assemble_pressure_mass(&mixed, &geom)?;
    let kp = assemble_pressure_stiffness(&mixed, &geom)?;

    let w = b1.transpose().mul_vec(&vec![1.0; mixed.pressure_dim()]);
    let trace: f64 = (0..n0.nrows).map(|i| n0.get(i, i)).sum();
    let b1_constant = w.iter().map(|x| x * x).sum::<f64>().sqrt() / trace.sqrt();

    let vh = mixed.interpolate_velocity(&geom, v);
    let qh = mixed.pressure.lagrange_interpolate(&geom, q);
    let diff = b1.add(1.0, &b2, -1.0)?.quad_form(&qh, &vh).abs();
    let qnorm = h * kp.quad_form(&qh, &qh).max(0.0).sqrt() + mp.quad_form(&qh, &qh).max(0.0).sqrt();
    let vnorm = n1.quad_form(&vh, &vh).max(0.0).sqrt();
    if !(qnorm > 0.0 && vnorm > 0.0) {
        return Err(Error::Config("form discrepancy needs nonzero velocity and pressure data".into()));
    }
    Ok(FormDiscrepancy { h, b1_constant, b1_minus_b2: diff / (qnorm * vnorm) })
}
