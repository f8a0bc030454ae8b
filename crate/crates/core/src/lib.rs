//! Parametric surface finite elements for the tangential Stokes equations.
//!
//! The pipeline is: [`mesh`] builds a flat icosphere, [`geometry`] lifts it to
//! an order-k_g surface, [`spaces`] sets up a mixed velocity/pressure pair,
//! [`assembly`] builds the discrete forms, [`solver`] solves the saddle-point
//! system and estimates inf-sup constants, and [`analysis`] compares against
//! the sphere benchmark and computes convergence orders.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod error;
pub mod factor;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Mat3x2 = nalgebra::Matrix3x2<f64>;

pub use analysis::{
    benchmark, compute_errors, eoc, form_discrepancy, inf_sup_scan, predicted_orders, run_study, run_study_with,
    write_csv, write_inf_sup_csv, write_rate_csv, BenchmarkSolution, ErrorRow, InfSupRow, PredictedOrders, StudyConfig,
    StudyReport,
};
pub use assembly::{assemble_system, FormA, FormB, StokesSystem, SystemConfig};
pub use error::{Error, Result};
pub use geometry::{
    curvature_field, lift_geometry, CurvatureApproximation, CurvatureMode, GeometryData, ParametricGeometry,
    SurfaceOracle, UnitSphere,
};
pub use geometry::{patch_rate_study, RateReport};
pub use mesh::{build_icosphere, mesh_size, vertex_star_partitioning, FlatMesh, Macroelement};
pub use quadrature::{integrate_surface, triangle_rule, QuadratureRule};
pub use solver::{brezzi_check, estimate_inf_sup, solve_stokes, InfSupEstimate, SaddleSolution};
pub use spaces::{build_pair, MixedSpace, PairTag};
pub use sparse::CsrMatrix;
