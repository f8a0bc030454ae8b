//! Error norms against the sphere benchmark, convergence orders and study reports.

mod benchmark;
mod study;

use rayon::prelude::*;

pub use benchmark::{benchmark, BenchmarkSolution};
pub use study::{
    form_discrepancy, inf_sup_scan, run_study, run_study_with, write_csv, write_inf_sup_csv, write_rate_csv, EocTable,
    FormDiscrepancy, InfSupRow, StudyConfig, StudyReport, CSV_HEADER, INF_SUP_HEADER, RATE_HEADER,
};

use crate::assembly::{default_quadrature_degree, FormA, StokesSystem};
use crate::error::{Error, Result};
use crate::geometry::{CurvatureMode, ParametricGeometry};
use crate::quadrature::{triangle_rule, MAX_DEGREE};
use crate::solver::SaddleSolution;
use crate::spaces::MixedSpace;
use crate::{Mat3, Vec3};

/// Errors of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub level: usize,
    pub h: f64,
    pub dofs_u: usize,
    pub dofs_p: usize,
    /// ‖P_h(u^e − u_h)‖ on Γ_h.
    pub tangential_l2: f64,
    /// ‖P(u^e − u_h)‖ on Γ_h with the exact projection.
    pub tangential_l2_exact: f64,
    /// ‖P(∇_Γ u^e − ∇_{Γ_h} u_h)P‖ on Γ_h with the exact projection.
    pub tangential_h1: f64,
    /// ‖n·(u^e − u_h)‖ with the exact normal.
    pub normal_l2: f64,
    /// Pressure error after removing both Γ_h-means.
    pub pressure_l2: f64,
    /// Velocity–pressure energy error.
    pub energy: f64,
    /// s_h(u_h, u_h)^½
    pub penalty_energy: f64,
    pub beta_h: Option<f64>,
}

/// Quadrature exactness used for error integrals.
pub fn error_quadrature_degree(mixed: &MixedSpace, geom: &ParametricGeometry) -> usize {
    (default_quadrature_degree(mixed, geom) + 2).min(MAX_DEGREE)
}

/// Compare a discrete solution with the benchmark on Γ_h.
pub fn compute_errors(
    solution: &SaddleSolution,
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    system: &StokesSystem,
    bench: &BenchmarkSolution,
) -> Result<ErrorRow> {
    let nv = mixed.velocity.dim();
    if solution.u.len() != mixed.velocity_dim()
        || solution.p.len() != mixed.pressure_dim()
        || system.velocity_dim() != mixed.velocity_dim()
    {
        return Err(Error::Mismatch("solution, system and spaces have different dimensions".into()));
    }
    let rule = triangle_rule(error_quadrature_degree(mixed, geom))?;
    let vel: Vec<_> = rule.points.iter().map(|&xi| mixed.velocity.element.eval(xi)).collect();
    let pre: Vec<_> = rule.points.iter().map(|&xi| mixed.pressure.element.eval(xi)).collect();
    let tab: Vec<_> = rule.points.iter().map(|&xi| geom.tabulate(xi)).collect();
    let oracle = geom.oracle();
    let penalty = system.eta / system.h;

    // [tan, tan exact, h1, normal, energy velocity part, ∫p^e, ∫p_h, area]
    let sums = |t: usize| -> Result<[f64; 8]> {
        let mut s = [0.0; 8];
        let dofs = mixed.velocity.element_dofs(t);
        let pdofs = mixed.pressure.element_dofs(t);
        for q in 0..rule.len() {
            let d = geom.data_with(t, rule.points[q], &tab[q])?;
            let w = rule.weights[q] * d.mu;
            let mut uh = Vec3::zeros();
            let mut duh = Mat3::zeros();
            for (i, &dof) in dofs.iter().enumerate() {
                let g = d.surface_gradient(vel[q].grads[i]);
                let coef = Vec3::new(solution.u[dof], solution.u[nv + dof], solution.u[2 * nv + dof]);
                uh += coef * vel[q].values[i];
                duh += coef * g.transpose();
            }
            let ph: f64 = pdofs.iter().zip(&pre[q].values).map(|(&k, v)| solution.p[k] * v).sum();
            let y = d.exact.point;
            let ue = bench.velocity(&y);
            let due = bench.velocity_jacobian(&y) * oracle.projection_jacobian(&d.x) * d.p;
            let err = ue - uh;
            let pe = d.exact.projection;
            let grad_err = d.p * (due - duh) * d.p + d.weingarten * err.dot(&d.normal);
            let exact_cov = pe * (bench.velocity_jacobian(&y) * pe) - pe * duh * d.p * pe;
            s[0] += w * (d.p * err).norm_squared();
            s[1] += w * (pe * err).norm_squared();
            s[2] += w * exact_cov.norm_squared();
            s[3] += w * d.exact.normal.dot(&err).powi(2);
            s[4] += w * (grad_err.norm_squared() + (d.p * err).norm_squared() + penalty * err.dot(&d.normal).powi(2));
            s[5] += w * bench.pressure(&y);
            s[6] += w * ph;
            s[7] += w;
        }
        Ok(s)
    };
    let parts = (0..geom.num_elements()).into_par_iter().map(sums).collect::<Result<Vec<_>>>()?;
    let mut tot = [0.0; 8];
    for p in &parts {
        for k in 0..8 {
            tot[k] += p[k];
        }
    }
    let (mean_e, mean_h) = (tot[5] / tot[7], tot[6] / tot[7]);
    let perr = (0..geom.num_elements())
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let pdofs = mixed.pressure.element_dofs(t);
            let mut s = 0.0;
            for q in 0..rule.len() {
                let d = geom.data_with(t, rule.points[q], &tab[q])?;
                let ph: f64 = pdofs.iter().zip(&pre[q].values).map(|(&k, v)| solution.p[k] * v).sum();
                let diff = (bench.pressure(&d.exact.point) - mean_e) - (ph - mean_h);
                s += rule.weights[q] * d.mu * diff * diff;
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum::<f64>();
    Ok(ErrorRow {
        level: geom.mesh().level,
        h: system.h,
        dofs_u: mixed.velocity_dim(),
        dofs_p: mixed.pressure_dim(),
        tangential_l2: tot[0].sqrt(),
        tangential_l2_exact: tot[1].sqrt(),
        tangential_h1: tot[2].sqrt(),
        normal_l2: tot[3].sqrt(),
        pressure_l2: perr.sqrt(),
        energy: (tot[4] + perr).sqrt(),
        penalty_energy: system.s.quad_form(&solution.u, &solution.u).max(0.0).sqrt(),
        beta_h: None,
    })
}

/// Experimental orders log(e_ℓ/e_{ℓ+1}) / log(h_ℓ/h_{ℓ+1}); NaN marks a non-positive error.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::Config(format!(
            "orders need at least two levels with matching mesh sizes, got {} errors and {} sizes",
            errors.len(),
            hs.len()
        )));
    }
    Ok((0..errors.len() - 1)
        .map(|l| {
            let (e0, e1) = (errors[l], errors[l + 1]);
            if !(e0 > 0.0 && e1 > 0.0) {
                return f64::NAN;
            }
            (e0 / e1).ln() / (hs[l] / hs[l + 1]).ln()
        })
        .collect())
}

/// Accuracy order of K♯_h; the Gauss curvature of an order-k surface converges with
/// order k − 1, improved to k for even k. Exact curvature gives ∞.
pub fn curvature_order(mode: CurvatureMode, kg: usize) -> f64 {
    let rule = |k: usize| if k.is_multiple_of(2) { k as f64 } else { k as f64 - 1.0 };
    match mode {
        CurvatureMode::Intrinsic => rule(kg),
        CurvatureMode::Lifted(k) => rule(k),
        CurvatureMode::Exact => f64::INFINITY,
    }
}

/// Orders predicted by the a priori estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedOrders {
    /// m_i
    pub energy: f64,
    /// m̂_i
    pub pressure: f64,
    /// l_i
    pub tangential_l2: f64,
    /// m_i + ½
    pub normal: f64,
}

pub fn predicted_orders(form_a: FormA, k_u: usize, kg: usize, curvature: CurvatureMode) -> PredictedOrders {
    let (ku, k) = (k_u as f64, kg as f64);
    let kk = match form_a {
        FormA::A1 => f64::INFINITY,
        FormA::A2 => curvature_order(curvature, kg),
    };
    let m = ku.min(k - 0.5).min(kk);
    let m_hat = ku.min(k).min(kk);
    let l = (ku + 1.0).min(k + 1.0).min(2.0 * k - 1.0).min(kk);
    PredictedOrders { energy: m, pressure: m_hat, tangential_l2: l, normal: m + 0.5 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[0.1, 0.025], &[1.0, 0.5]).unwrap()[0] - 2.0).abs() < 1e-14);
        assert_eq!(eoc(&[0.3, 0.3], &[1.0, 0.5]).unwrap()[0], 0.0);
        assert!((eoc(&[8e-3, 1e-3], &[0.2, 0.1]).unwrap()[0] - 3.0).abs() < 1e-14);
        assert!(eoc(&[0.0, 1e-3], &[0.2, 0.1]).unwrap()[0].is_nan());
        assert!(eoc(&[1.0], &[1.0]).is_err());
        assert!(eoc(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn predicted_examples() {
        let p = predicted_orders(FormA::A1, 2, 2, CurvatureMode::Intrinsic);
        assert_eq!((p.energy, p.pressure, p.tangential_l2, p.normal), (1.5, 2.0, 3.0, 2.0));
        assert_eq!(predicted_orders(FormA::A1, 2, 1, CurvatureMode::Intrinsic).tangential_l2, 1.0);
        assert_eq!(predicted_orders(FormA::A1, 3, 3, CurvatureMode::Intrinsic).tangential_l2, 4.0);
        assert_eq!(predicted_orders(FormA::A2, 3, 3, CurvatureMode::Intrinsic).tangential_l2, 2.0);
        assert_eq!(predicted_orders(FormA::A2, 3, 3, CurvatureMode::Exact).tangential_l2, 4.0);
        assert_eq!(predicted_orders(FormA::A2, 3, 3, CurvatureMode::Lifted(4)).tangential_l2, 4.0);
        assert_eq!(predicted_orders(FormA::A2, 2, 2, CurvatureMode::Intrinsic).tangential_l2, 2.0);
        assert_eq!(predicted_orders(FormA::A2, 2, 2, CurvatureMode::Intrinsic).pressure, 2.0);
    }

    #[test]
    fn curvature_orders() {
        assert_eq!(curvature_order(CurvatureMode::Intrinsic, 1), 0.0);
        assert_eq!(curvature_order(CurvatureMode::Intrinsic, 2), 2.0);
        assert_eq!(curvature_order(CurvatureMode::Intrinsic, 3), 2.0);
        assert_eq!(curvature_order(CurvatureMode::Lifted(3), 2), 2.0);
        assert!(curvature_order(CurvatureMode::Exact, 1).is_infinite());
    }
}
