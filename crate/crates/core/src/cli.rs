//! Configuration-driven front end: meshing, solving, evaluation and studies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    amplification_spectrum, energy_error, fit_singular_exponent, hz_to_omega, interpolation_lemma_study,
    l2_spacetime_error, peak_band_contrast, ExponentFit, Section, Spectrum, StudyReport, StudyRow,
};
use crate::assembly::{
    assemble_adjoint_double_layer_halfspace, assemble_dtn_blocks, assemble_hypersingular, assemble_rhs,
    assemble_single_layer, AssemblyOptions, LagMatrixSequence, OperatorId, RhsId, RhsTimeSeries,
};
use crate::error::{Error, Result};
use crate::geometry::{
    graded_disc_mesh_with_sectors, graded_square_mesh, horn_surface_mesh_with, HornParams, Mesh, MeshFile,
    DEFAULT_DISC_SECTORS,
};
use crate::mot::{march, march_dtn, DensityHistory, HistoryHeader, StepSolverConfig};
use crate::potentials::{evaluate_halfspace_pressure, evaluate_single_layer, EvalOptions, FieldProbe};
use crate::timegrid::{cfl_ratio, TimeGrid};

/// Screen geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScreenConfig {
    Square,
    Disc {
        #[serde(default = "default_sectors")]
        sectors: usize,
    },
    Horn(HornParams),
}

fn default_sectors() -> usize {
    DEFAULT_DISC_SECTORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub sections: Vec<Section>,
    pub times: Vec<f64>,
    pub max_distance: f64,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig {
            sections: vec![Section::EdgeY0, Section::CornerDiagonal],
            times: vec![0.5, 0.75, 1.0],
            max_distance: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpConfig {
    pub a: f64,
    pub betas: Vec<f64>,
    pub levels: Vec<usize>,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { a: 0.5, betas: vec![1.0, 2.0], levels: vec![16, 32, 64, 128] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HornConfig {
    pub source: [f64; 3],
    pub receiver: [f64; 3],
    /// Time steps compared by the horn study.
    pub dts: Vec<f64>,
    pub band_hz: [f64; 2],
    /// Speed of sound in metres per second.
    pub speed_of_sound: f64,
    /// Metres per mesh length unit.
    pub length_unit: f64,
    /// Half width of the peak band in angular frequency (mesh units).
    pub peak_half_width: f64,
}

impl Default for HornConfig {
    fn default() -> Self {
        HornConfig {
            source: [0.08, 0.0, 0.0],
            receiver: [1.0, 0.0, 0.0],
            dts: vec![0.04, 0.01, 0.005],
            band_hz: [200.0, 2000.0],
            speed_of_sound: 343.0,
            length_unit: 1.0,
            peak_half_width: 1.0,
        }
    }
}

/// Everything a run needs. Echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub study_id: String,
    pub screen: ScreenConfig,
    pub beta: f64,
    /// Refinement ladder; single runs use the last entry.
    pub levels: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub operator: OperatorId,
    pub rhs: RhsId,
    pub assembly: AssemblyOptions,
    pub solver: StepSolverConfig,
    pub evaluation: EvalOptions,
    pub probes: Vec<[f64; 3]>,
    pub exponent: ExponentConfig,
    pub interp: InterpConfig,
    pub horn: HornConfig,
    /// Worker threads; `None` keeps the rayon default.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            study_id: "study".into(),
            screen: ScreenConfig::Square,
            beta: 2.0,
            levels: vec![4],
            dt: 0.05,
            t_end: 1.0,
            operator: OperatorId::SingleLayer,
            rhs: RhsId::PlaneWavePacket { k: [0.2, 0.2, 0.2] },
            assembly: AssemblyOptions::default(),
            solver: StepSolverConfig::default(),
            evaluation: EvalOptions::default(),
            probes: Vec::new(),
            exponent: ExponentConfig::default(),
            interp: InterpConfig::default(),
            horn: HornConfig::default(),
            threads: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl StudyConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(s)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.beta >= 1.0) || !self.beta.is_finite() {
            return bad(format!("beta must be >= 1, got {}", self.beta));
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return bad("levels must be a nonempty list of positive integers".into());
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return bad("dt and t_end must be positive".into());
        }
        if !(self.t_end / self.dt).is_finite() || (self.t_end / self.dt).round() < 1.0 {
            return bad("t_end must cover at least one step".into());
        }
        if self.study_id.is_empty() || self.study_id.contains(['/', '\\']) {
            return bad("study_id must be a nonempty file name fragment".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        let horn_screen = matches!(self.screen, ScreenConfig::Horn(_));
        if horn_screen != (self.operator == OperatorId::HornAdjointDL) {
            return bad("the horn screen goes with the horn_adjoint_dl operator and only with it".into());
        }
        if self.horn.dts.iter().any(|d| !(*d > 0.0)) || !(self.horn.speed_of_sound > 0.0) || !(self.horn.length_unit > 0.0) {
            return bad("horn time steps, speed of sound and length unit must be positive".into());
        }
        if !(self.horn.band_hz[0] < self.horn.band_hz[1]) || !(self.horn.band_hz[0] >= 0.0) {
            return bad("horn band must be an increasing pair of frequencies".into());
        }
        if !(self.exponent.max_distance > 0.0) {
            return bad("exponent max_distance must be positive".into());
        }
        self.assembly.quadrature.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Short SHA-256 digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.grid_with(self.dt)
    }

    pub fn grid_with(&self, dt: f64) -> Result<TimeGrid> {
        TimeGrid::new(dt, (self.t_end / dt).round() as usize)
    }

    pub fn mesh(&self, level: usize) -> Result<Mesh> {
        match self.screen {
            ScreenConfig::Square => graded_square_mesh(level, self.beta),
            ScreenConfig::Disc { sectors } => graded_disc_mesh_with_sectors(level, self.beta, sectors),
            ScreenConfig::Horn(p) => horn_surface_mesh_with(&p),
        }
    }

    fn finest(&self) -> usize {
        *self.levels.last().expect("validated")
    }

    fn tag(&self, level: usize, dt: f64) -> String {
        format!("{}_{}_b{}_N{}_dt{}", self.study_id, self.operator.name(), self.beta, level, dt)
    }
}

/// Assembled system, load and marched density of one run.
pub struct Solution {
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub system: LagMatrixSequence,
    pub rhs: RhsTimeSeries,
    pub history: DensityHistory,
}

/// Assemble and march one problem.
pub fn solve_problem(
    mesh: Mesh,
    grid: TimeGrid,
    operator: OperatorId,
    rhs: &RhsId,
    opts: &AssemblyOptions,
    solver: &StepSolverConfig,
) -> Result<Solution> {
    let ratio = cfl_ratio(&grid, &mesh);
    if ratio > 1.0 {
        log::warn!("dt / h_min = {ratio:.2} exceeds 1");
    }
    let system = match operator {
        OperatorId::SingleLayer => assemble_single_layer(&mesh, &grid, opts)?,
        OperatorId::Hypersingular => assemble_hypersingular(&mesh, &grid, opts)?,
        OperatorId::DtN => assemble_dtn_blocks(&mesh, &grid, opts)?,
        OperatorId::HornAdjointDL => assemble_adjoint_double_layer_halfspace(&mesh, &grid, opts)?,
    };
    let load = assemble_rhs(&mesh, &grid, operator, rhs, &opts.quadrature)?;
    let mut history = match operator {
        OperatorId::DtN => march_dtn(&system, &load, solver)?,
        _ => march(&system, &load, solver)?,
    };
    history.header.mesh_hash = mesh.hash_hex();
    Ok(Solution { mesh, grid, system, rhs: load, history })
}

impl StudyConfig {
    /// Solve on the mesh of `level` with time step `dt`.
    pub fn solve_level(&self, level: usize, dt: f64) -> Result<Solution> {
        let mesh = self.mesh(level)?;
        log::info!(
            "{} level {level}: {} triangles, dt {dt}",
            self.operator.name(),
            mesh.num_triangles()
        );
        let mut sol = solve_problem(mesh, self.grid_with(dt)?, self.operator, &self.rhs, &self.assembly, &self.solver)?;
        sol.history.header.config_hash = Some(self.hash());
        Ok(sol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScreenArg {
    Square,
    Disc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    Convergence,
    Exponent,
    Interp,
    Horn,
}

/// Flags that override config values.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file; missing keys take the defaults listed below
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma separated refinement levels
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub study_id: Option<String>,
}

impl Overrides {
    pub fn load(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(p) => StudyConfig::from_json(&fs::read_to_string(p)?)?,
            None => StudyConfig::default(),
        };
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(l) = &self.levels {
            cfg.levels = l.clone();
        }
        if let Some(d) = self.dt {
            cfg.dt = d;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(s) = &self.study_id {
            cfg.study_id = s.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tdbem", version, about = "Time-domain Galerkin BEM for the wave equation on screens")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug)
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a graded mesh as JSON
    Mesh {
        #[arg(long, value_enum, default_value = "square")]
        screen: ScreenArg,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Output file; stdout when absent
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Assemble and march the finest level, write the density
    Solve(Overrides),
    /// Evaluate the field of a solved density at the configured probes
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Density CSV written by `solve` (its JSON header sits next to it)
        #[arg(long)]
        density: PathBuf,
    },
    /// Run a study and write its report
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the default config
    Defaults,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let defaults = serde_json::to_string_pretty(&StudyConfig::default()).expect("config serializes");
    let cmd = Cli::command().after_long_help(format!("Default config:\n{defaults}"));
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                2
            } else {
                3
            }
        }
    }
}

fn setup(cfg: &StudyConfig) -> Result<()> {
    if let Some(n) = cfg.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(())
}

/// Execute one subcommand.
pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Mesh { screen, beta, levels, out } => {
            let mesh = match screen {
                ScreenArg::Square => graded_square_mesh(levels, beta)?,
                ScreenArg::Disc => graded_disc_mesh_with_sectors(levels, beta, DEFAULT_DISC_SECTORS)?,
            };
            let json = mesh.to_json()?;
            match out {
                Some(p) => fs::write(p, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Solve(o) => {
            let cfg = o.load()?;
            setup(&cfg)?;
            cmd_solve(&cfg).map(|_| ())
        }
        Command::Evaluate { overrides, density } => {
            let cfg = overrides.load()?;
            setup(&cfg)?;
            cmd_evaluate(&cfg, &density).map(|_| ())
        }
        Command::Study { kind, overrides } => {
            let cfg = overrides.load()?;
            setup(&cfg)?;
            let report = match kind {
                StudyKind::Convergence => study_convergence(&cfg)?,
                StudyKind::Exponent => study_exponent(&cfg)?,
                StudyKind::Interp => study_interp(&cfg)?,
                StudyKind::Horn => study_horn(&cfg)?,
            };
            for (k, f) in &report.fits {
                println!("{k}: slope {:.4} (r2 {:.4}, {} levels)", f.slope, f.r_squared, f.points);
            }
            for n in &report.notes {
                println!("{n}");
            }
            Ok(())
        }
        Command::Defaults => {
            println!("{}", serde_json::to_string_pretty(&StudyConfig::default())?);
            Ok(())
        }
    }
}

fn create(path: &Path, hash: &str) -> Result<fs::File> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# config_hash {hash}")?;
    Ok(f)
}

fn write_json<T: Serialize>(path: &Path, value: &T, cfg: &StudyConfig) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("config_hash".into(), cfg.hash().into());
        m.insert("config".into(), serde_json::to_value(cfg)?);
    }
    fs::write(path, serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

/// Paths `(csv, json)` of the density written by `solve`.
pub fn density_paths(cfg: &StudyConfig) -> (PathBuf, PathBuf) {
    let tag = cfg.tag(cfg.finest(), cfg.dt);
    (cfg.output_dir.join(format!("{tag}.density.csv")), cfg.output_dir.join(format!("{tag}.density.json")))
}

pub fn cmd_solve(cfg: &StudyConfig) -> Result<Solution> {
    let sol = cfg.solve_level(cfg.finest(), cfg.dt)?;
    let (csv_path, json_path) = density_paths(cfg);
    let hash = cfg.hash();
    sol.history.write_csv(create(&csv_path, &hash)?)?;
    write_json(&json_path, &sol.history.header, cfg)?;
    let mesh_path = cfg.output_dir.join(format!("{}.mesh.json", cfg.tag(cfg.finest(), cfg.dt)));
    write_json(&mesh_path, &MeshFile::from(&sol.mesh), cfg)?;
    let worst = sol.history.residuals.iter().fold(0.0f64, |a, &b| a.max(b));
    println!(
        "{}: {} steps, {} dofs, max step residual {worst:.2e}, wrote {}",
        cfg.operator.name(),
        sol.history.n_steps(),
        sol.history.header.size,
        csv_path.display()
    );
    Ok(sol)
}

pub fn cmd_evaluate(cfg: &StudyConfig, density: &Path) -> Result<FieldProbe> {
    if cfg.probes.is_empty() {
        return Err(Error::InvalidParameter("no probe points configured".into()));
    }
    let header_path = density.with_extension("json");
    let header: HistoryHeader = {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&header_path)?)?;
        serde_json::from_value(v)?
    };
    let hist = DensityHistory::read_csv(header, fs::File::open(density)?)?;
    let mesh = cfg.mesh(cfg.finest())?;
    if hist.header.mesh_hash != mesh.hash_hex() {
        return Err(Error::DimensionMismatch("density was computed on a different mesh".into()));
    }
    let times: Vec<f64> = (0..=hist.n_steps()).map(|n| n as f64 * hist.dt()).collect();
    let probe = match hist.header.operator {
        OperatorId::SingleLayer => evaluate_single_layer(&hist, &mesh, &cfg.probes, &times, &cfg.evaluation)?,
        OperatorId::HornAdjointDL => evaluate_halfspace_pressure(&hist, &mesh, &cfg.probes, &times, &cfg.evaluation)?,
        op => {
            return Err(Error::InvalidParameter(format!("field evaluation is not available for {}", op.name())));
        }
    };
    let path = cfg.output_dir.join(format!("{}.probe.csv", cfg.tag(cfg.finest(), hist.dt())));
    probe.write_csv(create(&path, &cfg.hash())?)?;
    println!("wrote {}", path.display());
    Ok(probe)
}

fn dof_count(sol: &Solution) -> usize {
    sol.history.header.blocks.map_or(sol.history.header.size, |b| b.0)
}

fn finish_report(cfg: &StudyConfig, mut rep: StudyReport, columns: &[&str]) -> Result<StudyReport> {
    for c in columns {
        match rep.fit_column(c) {
            Ok(_) => {}
            Err(Error::InsufficientData(m)) => rep.notes.push(format!("{c}: no slope ({m})")),
            Err(e) => return Err(e),
        }
    }
    let stem = format!("{}_{}", cfg.study_id, rep.study_id);
    let hash = cfg.hash();
    rep.write_csv(create(&cfg.output_dir.join(format!("{stem}.csv")), &hash)?)?;
    write_json(&cfg.output_dir.join(format!("{stem}.json")), &rep, cfg)?;
    Ok(rep)
}

fn convergence_protocol(op: OperatorId) -> Result<&'static str> {
    Ok(match op {
        OperatorId::SingleLayer => {
            "sqrt|E(lifted coarse) - E(reference)| with the reference system; pressure L2([0,T]) errors at the probes"
        }
        OperatorId::Hypersingular => {
            "sqrt|E(lifted coarse) - E(reference)| with the reference system; L2([0,T] x screen) error at reference quadrature points"
        }
        OperatorId::DtN => "L2([0,T] x screen) error of the Dirichlet block at reference quadrature points",
        OperatorId::HornAdjointDL => {
            return Err(Error::InvalidParameter("use the horn study for the horn operator".into()))
        }
    })
}

/// Errors of every level against the finest one.
pub fn study_convergence(cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.levels.len() < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least two levels".into()));
    }
    let protocol = convergence_protocol(cfg.operator)?;
    let reference = cfg.solve_level(cfg.finest(), cfg.dt)?;
    convergence_against(cfg, &reference, protocol)
}

/// [`study_convergence`] with the finest level already solved.
pub fn study_convergence_with(cfg: &StudyConfig, reference: &Solution) -> Result<StudyReport> {
    if cfg.levels.len() < 2 {
        return Err(Error::InvalidParameter("a convergence study needs at least two levels".into()));
    }
    let protocol = convergence_protocol(cfg.operator)?;
    if reference.history.header.operator != cfg.operator {
        return Err(Error::InvalidParameter("reference solves a different operator".into()));
    }
    convergence_against(cfg, reference, protocol)
}

fn convergence_against(cfg: &StudyConfig, reference: &Solution, protocol: &str) -> Result<StudyReport> {
    let mut rep = StudyReport::new("convergence", protocol, serde_json::to_value(cfg)?);
    let t_end = reference.grid.end_time();
    let times: Vec<f64> = (0..=reference.grid.n_steps).map(|n| reference.grid.t(n)).collect();
    let ref_probe = if cfg.operator == OperatorId::SingleLayer && !cfg.probes.is_empty() {
        Some(evaluate_single_layer(&reference.history, &reference.mesh, &cfg.probes, &times, &cfg.evaluation)?)
    } else {
        None
    };
    let ref_primary = reference.history.primary_block();
    let mut columns = Vec::new();
    for &level in &cfg.levels[..cfg.levels.len() - 1] {
        let sol = cfg.solve_level(level, cfg.dt)?;
        let mut values = std::collections::BTreeMap::new();
        match cfg.operator {
            OperatorId::SingleLayer | OperatorId::Hypersingular => {
                let e = energy_error(
                    &reference.system,
                    &reference.rhs,
                    (&sol.history, &sol.mesh),
                    (&reference.history, &reference.mesh),
                )?;
                values.insert("energy".to_string(), e);
            }
            _ => {}
        }
        if cfg.operator != OperatorId::SingleLayer {
            let coarse = sol.history.primary_block();
            let e = l2_spacetime_error((&coarse, &sol.mesh), (&ref_primary, &reference.mesh), t_end)?;
            values.insert("l2".to_string(), e);
        }
        if let Some(rp) = &ref_probe {
            let p = evaluate_single_layer(&sol.history, &sol.mesh, &cfg.probes, &times, &cfg.evaluation)?;
            for i in 0..cfg.probes.len() {
                let e: f64 = p.series(i).iter().zip(rp.series(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                values.insert(format!("pressure_{i}"), (e * reference.grid.dt).sqrt());
            }
        }
        for k in values.keys() {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
        rep.rows.push(StudyRow {
            label: format!("N={level}"),
            dofs: dof_count(&sol),
            h_max: sol.mesh.h_max,
            values,
        });
    }
    rep.notes.push(format!(
        "reference: N={} with {} dofs, dt {}",
        cfg.finest(),
        dof_count(&reference),
        cfg.dt
    ));
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    finish_report(cfg, rep, &cols)
}

/// Singular exponents of the finest-level density.
pub fn study_exponent(cfg: &StudyConfig) -> Result<StudyReport> {
    let sol = cfg.solve_level(cfg.finest(), cfg.dt)?;
    let psi = sol.history.primary_block();
    let mut rep = StudyReport::new(
        "exponent",
        "least-squares slope of log|density| against log(distance) beyond the two nearest samples and below max_distance",
        serde_json::to_value(cfg)?,
    );
    let mut fits: Vec<ExponentFit> = Vec::new();
    for &section in &cfg.exponent.sections {
        for &t in &cfg.exponent.times {
            if t > sol.grid.end_time() + 1e-12 {
                return Err(Error::InvalidParameter(format!("exponent time {t} beyond t_end")));
            }
            let fit = fit_singular_exponent(&psi, &sol.mesh, section, t, cfg.exponent.max_distance)?;
            let name = match section {
                Section::EdgeY0 => "edge_y0".to_string(),
                Section::CornerDiagonal => "corner".to_string(),
                Section::EdgeXConst { x } => format!("edge_x{x}"),
            };
            let path = cfg.output_dir.join(format!("{}_{name}_T{t}.samples.csv", cfg.tag(cfg.finest(), cfg.dt)));
            let mut wr = csv::Writer::from_writer(create(&path, &cfg.hash())?);
            wr.write_record(["distance", "value"])?;
            for s in &fit.samples {
                wr.serialize(s)?;
            }
            wr.flush()?;
            let mut values = std::collections::BTreeMap::new();
            values.insert("exponent".to_string(), fit.exponent);
            values.insert("r_squared".to_string(), fit.r_squared);
            values.insert("window_lo".to_string(), fit.window.0);
            values.insert("window_hi".to_string(), fit.window.1);
            rep.rows.push(StudyRow {
                label: format!("{name} T={t}"),
                dofs: dof_count(&sol),
                h_max: sol.mesh.h_max,
                values,
            });
            rep.notes.push(format!("{name} at T={t}: exponent {:.4}", fit.exponent));
            fits.push(fit);
        }
    }
    finish_report(cfg, rep, &[])
}

/// Interpolation rates of `y^a` on graded 1D meshes, one row per beta and level.
pub fn study_interp(cfg: &StudyConfig) -> Result<StudyReport> {
    let mut rep = StudyReport::new(
        "interp",
        "L2(0,1) error of the piecewise linear interpolant of y^a on (k/N)^beta nodes, slope against N",
        serde_json::to_value(cfg)?,
    );
    let mut columns = Vec::new();
    for &beta in &cfg.interp.betas {
        let sub = interpolation_lemma_study(cfg.interp.a, beta, &cfg.interp.levels)?;
        let col = format!("l2_error_beta{beta}");
        for (i, r) in sub.rows.into_iter().enumerate() {
            let v = r.values["l2_error"];
            if let Some(row) = rep.rows.get_mut(i) {
                row.values.insert(col.clone(), v);
            } else {
                let mut values = std::collections::BTreeMap::new();
                values.insert(col.clone(), v);
                rep.rows.push(StudyRow { label: r.label, dofs: r.dofs, h_max: r.h_max, values });
            }
        }
        rep.notes.extend(sub.notes.into_iter().map(|n| format!("beta {beta}: {n}")));
        columns.push(col);
    }
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    finish_report(cfg, rep, &cols)
}

/// Scattered pressure at the receiver for one time step.
pub fn horn_scattered_series(cfg: &StudyConfig, dt: f64) -> Result<Vec<f64>> {
    let ScreenConfig::Horn(params) = cfg.screen else {
        return Err(Error::InvalidParameter("horn study needs a horn screen".into()));
    };
    let mesh = horn_surface_mesh_with(&params)?;
    let rhs = RhsId::PointSourceDirac { y_src: cfg.horn.source };
    let grid = cfg.grid_with(dt)?;
    log::info!("horn: {} triangles, dt {dt}, {} steps", mesh.num_triangles(), grid.n_steps);
    let sol = solve_problem(mesh, grid, OperatorId::HornAdjointDL, &rhs, &cfg.assembly, &cfg.solver)?;
    let times: Vec<f64> = (0..=grid.n_steps).map(|n| grid.t(n)).collect();
    let probe = evaluate_halfspace_pressure(&sol.history, &sol.mesh, &[cfg.horn.receiver], &times, &cfg.evaluation)?;
    Ok(probe.values[0].clone())
}

/// Amplification spectra for each configured time step.
pub fn study_horn(cfg: &StudyConfig) -> Result<StudyReport> {
    let band = (
        hz_to_omega(cfg.horn.band_hz[0], cfg.horn.speed_of_sound, cfg.horn.length_unit),
        hz_to_omega(cfg.horn.band_hz[1], cfg.horn.speed_of_sound, cfg.horn.length_unit),
    );
    let mut rep = StudyReport::new(
        "horn",
        "FFT of the scattered receiver pressure (rectangular window, zero padded) against the analytic incident field",
        serde_json::to_value(cfg)?,
    );
    rep.notes.push("incident spectrum is the exact transform of the Dirac pulse and its image".into());
    let mut spectra: Vec<(f64, Spectrum)> = Vec::new();
    for &dt in &cfg.horn.dts {
        let series = horn_scattered_series(cfg, dt)?;
        let spec = amplification_spectrum(&series, dt, &cfg.horn.source, &cfg.horn.receiver, band)?;
        let path = cfg.output_dir.join(format!("{}_horn_dt{dt}.spectrum.csv", cfg.study_id));
        spec.write_csv(create(&path, &cfg.hash())?)?;
        let mut values = std::collections::BTreeMap::new();
        let max = spec.delta_l_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        values.insert("max_delta_l_db".to_string(), max);
        rep.rows.push(StudyRow { label: format!("dt={dt}"), dofs: 0, h_max: 0.0, values });
        spectra.push((dt, spec));
    }
    if spectra.len() >= 2 {
        spectra.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let others: Vec<&Spectrum> = spectra[1..].iter().map(|s| &s.1).collect();
        match peak_band_contrast(&spectra[0].1, &others, cfg.horn.peak_half_width) {
            Ok((on, off)) => rep.notes.push(format!(
                "mean |dL| near peaks {on:.3} dB, away from peaks {off:.3} dB, ratio {:.2}",
                on / off
            )),
            Err(e) => rep.notes.push(format!("no peak contrast: {e}")),
        }
    }
    finish_report(cfg, rep, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_cfg(dir: &Path) -> StudyConfig {
        StudyConfig {
            levels: vec![1],
            dt: 0.25,
            t_end: 1.0,
            output_dir: dir.to_path_buf(),
            ..StudyConfig::default()
        }
    }

    #[test]
    fn defaults_roundtrip_and_validate() {
        let d = StudyConfig::default();
        d.validate().unwrap();
        let back = StudyConfig::from_json(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.hash(), d.hash());
        assert!(StudyConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let partial = StudyConfig::from_json(r#"{"beta": 1.0, "screen": {"kind": "disc"}}"#).unwrap();
        assert_eq!(partial.screen, ScreenConfig::Disc { sectors: DEFAULT_DISC_SECTORS });
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let mut c = StudyConfig { beta: 0.5, ..StudyConfig::default() };
        assert!(c.validate().unwrap_err().is_config_error());
        c.beta = 2.0;
        c.operator = OperatorId::HornAdjointDL;
        assert!(c.validate().is_err());
        c.operator = OperatorId::SingleLayer;
        c.levels = vec![];
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = StudyConfig::default();
        let b = StudyConfig { dt: 0.01, ..StudyConfig::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn zero_rhs_solve_writes_zero_density() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StudyConfig { rhs: RhsId::Zero, ..temp_cfg(dir.path()) };
        let sol = cmd_solve(&cfg).unwrap();
        assert!(sol.history.coefficients.iter().flatten().all(|v| *v == 0.0));
        let (csv_path, json_path) = density_paths(&cfg);
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with(&format!("# config_hash {}", cfg.hash())));
        assert!(fs::read_to_string(json_path).unwrap().contains(&cfg.hash()));
    }

    #[test]
    fn solve_is_reproducible_and_evaluates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StudyConfig { probes: vec![[0.0, 0.0, 1.0]], ..temp_cfg(dir.path()) };
        cmd_solve(&cfg).unwrap();
        let (csv_path, _) = density_paths(&cfg);
        let first = fs::read(&csv_path).unwrap();
        cmd_solve(&cfg).unwrap();
        assert_eq!(first, fs::read(&csv_path).unwrap());
        let probe = cmd_evaluate(&cfg, &csv_path).unwrap();
        assert_eq!(probe.values[0].len(), 5);
        assert_eq!(probe.values[0][0], 0.0);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.json");
        let ok = main_with_args(["tdbem", "mesh", "--screen", "square", "--beta", "2", "--levels", "4", "-o", out.to_str().unwrap()]);
        assert_eq!(ok, 0);
        let mesh = Mesh::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(mesh.num_triangles(), 128);
        assert_eq!(main_with_args(["tdbem", "mesh", "--beta", "0.5"]), 2);
        assert_eq!(main_with_args(["tdbem", "nonsense"]), 2);
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"dt": -1}"#).unwrap();
        assert_eq!(main_with_args(["tdbem", "solve", "-c", cfg.to_str().unwrap()]), 2);
    }

    #[test]
    fn interp_study_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = temp_cfg(dir.path());
        let rep = study_interp(&cfg).unwrap();
        assert!((rep.fits["l2_error_beta2"].slope + 2.0).abs() < 0.15);
        assert!((rep.fits["l2_error_beta1"].slope + 1.0).abs() < 0.15);
        let json = fs::read_to_string(dir.path().join("study_interp.json")).unwrap();
        assert!(json.contains(&cfg.hash()));
    }
}
