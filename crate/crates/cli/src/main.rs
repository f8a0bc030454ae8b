//! `surfstokes`: convergence studies, inf-sup scans and geometry-rate checks on the sphere.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use surfstokes::{
    inf_sup_scan, patch_rate_study, run_study_with, write_csv, write_inf_sup_csv, write_rate_csv, CsrMatrix,
    CurvatureMode, Error, FormA, FormB, PairTag, Result, StudyConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Converge,
    Infsup,
    Georates,
}

#[derive(Debug, Parser)]
#[command(
    name = "surfstokes",
    version,
    about = "Parametric surface finite elements for tangential Stokes on the sphere"
)]
struct Cli {
    #[arg(long, value_enum, default_value = "converge")]
    mode: Mode,
    /// th:k, mini, cr, p2p0 or p1p1-unsafe
    #[arg(long)]
    element: Option<String>,
    /// Geometry order
    #[arg(long, default_value_t = 2)]
    kg: usize,
    /// Viscous form: 1 (symmetric gradient) or 2 (full gradient with curvature)
    #[arg(long)]
    form_a: Option<u8>,
    /// Divergence form: 1 or 2
    #[arg(long)]
    form_b: Option<u8>,
    /// intrinsic, lifted:k or exact
    #[arg(long)]
    curvature: Option<String>,
    /// Penalty weight
    #[arg(long)]
    eta: Option<f64>,
    /// Level range a:b
    #[arg(long, default_value = "1:4")]
    levels: String,
    /// CSV output path; stdout if absent
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the finest discrete surface as OFF
    #[arg(long)]
    dump_mesh: Option<PathBuf>,
    /// Write system matrices of every level in MatrixMarket format
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
    /// Skip the β_h estimate in converge mode
    #[arg(long)]
    no_inf_sup: bool,
}

fn parse_levels(s: &str) -> Result<RangeInclusive<usize>> {
    let bad = || Error::Config(format!("levels must look like a:b with a ≤ b, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn study_config(cli: &Cli) -> Result<StudyConfig> {
    let element: PairTag = cli.element.as_deref().unwrap_or("th:2").parse()?;
    let mut c = StudyConfig::new(element, cli.kg);
    c.form_a = FormA::try_from(cli.form_a.unwrap_or(1))?;
    c.form_b = FormB::try_from(cli.form_b.unwrap_or(1))?;
    if let Some(k) = &cli.curvature {
        c.curvature = k.parse::<CurvatureMode>()?;
    }
    if cli.curvature.is_some() && c.form_a == FormA::A1 {
        return Err(Error::Config("--curvature only applies to --form-a 2".into()));
    }
    c.eta = cli.eta.unwrap_or(1.0);
    c.levels = parse_levels(&cli.levels)?;
    c.inf_sup = !cli.no_inf_sup;
    c.validate()?;
    Ok(c)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn dump_matrix(dir: &Path, name: &str, m: &CsrMatrix) -> Result<()> {
    let mut w = create(&dir.join(name))?;
    m.write_matrix_market(&mut w)?;
    w.flush()?;
    Ok(())
}

fn emit(cli: &Cli, csv: &[u8]) -> Result<()> {
    match &cli.output {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(csv)?;
            w.flush()?;
        }
        None => std::io::stdout().write_all(csv)?,
    }
    Ok(())
}

fn converge(cli: &Cli) -> Result<()> {
    let config = study_config(cli)?;
    if let Some(dir) = &cli.dump_matrices {
        std::fs::create_dir_all(dir)?;
    }
    let finest = *config.levels.end();
    let report = run_study_with(&config, &mut |geom, _, system| {
        let level = geom.mesh().level;
        if let Some(dir) = &cli.dump_matrices {
            dump_matrix(dir, &format!("level{level}_A.mtx"), &system.a)?;
            dump_matrix(dir, &format!("level{level}_S.mtx"), &system.s)?;
            dump_matrix(dir, &format!("level{level}_B.mtx"), &system.b)?;
            dump_matrix(dir, &format!("level{level}_Mp.mtx"), &system.mp)?;
        }
        if let (Some(path), true) = (&cli.dump_mesh, level == finest) {
            let mut w = create(path)?;
            geom.write_off(&mut w)?;
            w.flush()?;
        }
        Ok(())
    })?;
    let mut csv = Vec::new();
    write_csv(&report, &mut csv)?;
    emit(cli, &csv)?;
    eprint!("{}", report.summary());
    Ok(())
}

fn infsup(cli: &Cli) -> Result<()> {
    if cli.dump_mesh.is_some() || cli.dump_matrices.is_some() || cli.no_inf_sup {
        return Err(Error::Config("infsup mode takes no --dump-mesh, --dump-matrices or --no-inf-sup".into()));
    }
    let config = study_config(cli)?;
    let rows = inf_sup_scan(&config)?;
    let mut csv = Vec::new();
    write_inf_sup_csv(&config, &rows, &mut csv)?;
    emit(cli, &csv)?;
    eprintln!("{}", config.echo());
    eprintln!("{:>6}{:>12}{:>10}{:>10}{:>12}", "level", "h", "dofs_u", "dofs_p", "beta_h");
    for r in &rows {
        eprintln!("{:>6}{:>12.4e}{:>10}{:>10}{:>12.6}", r.level, r.h, r.dofs_u, r.dofs_p, r.beta_h);
    }
    Ok(())
}

fn georates(cli: &Cli) -> Result<()> {
    let unused = [
        ("--element", cli.element.is_some()),
        ("--form-a", cli.form_a.is_some()),
        ("--form-b", cli.form_b.is_some()),
        ("--curvature", cli.curvature.is_some()),
        ("--eta", cli.eta.is_some()),
        ("--dump-mesh", cli.dump_mesh.is_some()),
        ("--dump-matrices", cli.dump_matrices.is_some()),
        ("--no-inf-sup", cli.no_inf_sup),
    ];
    if let Some((flag, _)) = unused.iter().find(|(_, set)| *set) {
        return Err(Error::Config(format!("{flag} does not apply to georates mode")));
    }
    let levels = parse_levels(&cli.levels)?;
    if levels.clone().count() < 3 {
        return Err(Error::Config(format!("georates needs at least 3 levels, got {}", cli.levels)));
    }
    if *levels.start() == 0 {
        return Err(Error::Config("level 0 patches are too curved to flatten; start at level 1".into()));
    }
    let report = patch_rate_study(cli.kg, levels.clone())?;
    let mut csv = Vec::new();
    write_rate_csv(cli.kg, &levels, &report, &mut csv)?;
    emit(cli, &csv)?;
    eprintln!("mode=georates kg={} levels={}", cli.kg, cli.levels);
    eprintln!("{:<28}{:>10}", "quantity", "exponent");
    for (name, v) in [
        ("|mu_bar - 1|", report.mu_bar),
        ("flattening deviation", report.flattening),
        ("|mu_h - 1|", report.mu_h),
        ("|D mu_h|", report.dmu_h),
        ("|[D F_h]|", report.df_jump),
    ] {
        eprintln!("{name:<28}{v:>10.3}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.mode {
        Mode::Converge => converge(&cli),
        Mode::Infsup => infsup(&cli),
        Mode::Georates => georates(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
