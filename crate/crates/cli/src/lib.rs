//! Reproducible pipelines over the texture set: render it, simulate a
//! cohort, analyze grouping sessions, embed a matrix, serve live sessions and
//! export the characterization sweep.
//!
//! Every command is a pure function of its config and seeds, so reruns write
//! byte-identical files.

pub mod config;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use texture_space::export::{
    angles_csv, bode_csv, correlations_csv, current_csv, dissimilarity_csv, labels_csv, parse_matrix_csv,
    projection_svgs, report_json, report_tables, samples_csv, scree_csv, similarity_csv,
    similarity_to_dissimilarity, solution_csv, solution_json, vectors_csv, wav_bytes, Manifest,
};
use texture_space::grouping::{DissimilarityMatrix, GroupingSession};
use texture_space::mds::{scree, scree_points};
use texture_space::pipeline::{analyze_sessions, simulate_study};
use texture_space::spectrum::{estimate_response, generate_sweep, scan_velocity};
use texture_space::synthesis::{design_bandpass, filter_apply, to_current, TextureSet, FREQUENCIES_HZ, IRREGULARITIES};
use texture_space_service::{AppState, Catalog, SessionStore};

pub use config::PipelineConfig;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] texture_space::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<texture_space_service::StoreError> for CliError {
    fn from(e: texture_space_service::StoreError) -> Self {
        match e {
            texture_space_service::StoreError::Io { path, source } => CliError::Io { path, source },
            corrupt => CliError::Validation(corrupt.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "texture-space", version, about = "Fine-texture design space: synthesis, grouping study and embedding")]
pub struct Cli {
    /// TOML pipeline config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for this command's randomness (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: `<config out>/<command>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    /// Largest dimensionality on the scree plot.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Starts per dimensionality.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Dimensionality to report.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the texture set to WAV and CSV files with a JSON manifest.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate participants grouping the textures in a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Texture manifest (default: `<config out>/synth/manifest.json`).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        participants: Option<usize>,
    },
    /// Score, embed and analyze a directory of session JSON files.
    Analyze {
        /// Session files (default: `<config out>/simulate`).
        sessions: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mds: MdsArgs,
        /// Manifest whose parameters the vectors are fitted to; the configured
        /// set otherwise.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Embed a square similarity or dissimilarity matrix CSV.
    Mds {
        matrix: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mds: MdsArgs,
        /// Treat the matrix as dissimilarities rather than similarity counts.
        #[arg(long)]
        dissimilarity: bool,
    },
    /// Serve texture previews and record live sessions over HTTP.
    Serve {
        /// Id seed for new sessions.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        addr: Option<SocketAddr>,
        /// Session log directory (overrides the config).
        #[arg(long)]
        sessions_dir: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Export the logarithmic sweep and each filter's estimated response.
    ExportSweep {
        #[command(flatten)]
        common: Common,
    },
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Set described by `manifest`, checked against what its settings rebuild.
fn set_from_manifest(path: &Path) -> Result<TextureSet> {
    let manifest = read_manifest(path)?;
    let catalog =
        Catalog::from_manifest(manifest).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(catalog.into_set())
}

/// Reads every `*.json` file in `dir` in name order; a file that does not
/// parse or validate is reported by name alongside all the others.
pub fn read_sessions(dir: &Path) -> Result<Vec<GroupingSession>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Validation(format!("{}: no session files", dir.display())));
    }
    let mut sessions = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        let parsed = serde_json::from_str::<GroupingSession>(&read_text(&path)?)
            .map_err(|e| e.to_string())
            .and_then(|s| s.validate().map(|()| s).map_err(|e| e.to_string()));
        match parsed {
            Ok(s) => sessions.push(s),
            Err(e) => failures.push(format!("{}: {e}", path.display())),
        }
    }
    if failures.is_empty() {
        Ok(sessions)
    } else {
        Err(CliError::Validation(format!("invalid session files:\n  {}", failures.join("\n  "))))
    }
}

/// Runs one command; returns a short summary for the terminal.
pub fn run(cli: Cli) -> Result<String> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { common } => {
            if let Some(seed) = common.seed {
                cfg.synthesis.base_seed = seed;
            }
            let out = common.out.unwrap_or_else(|| cfg.out_dir("synth"));
            synth(&cfg, &out)
        }
        Command::Simulate { common, manifest, participants } => {
            if let Some(seed) = common.seed {
                cfg.experiment.seed = seed;
            }
            if let Some(p) = participants {
                cfg.experiment.participants = p;
            }
            let manifest = manifest.unwrap_or_else(|| cfg.out_dir("synth").join("manifest.json"));
            let out = common.out.unwrap_or_else(|| cfg.out_dir("simulate"));
            simulate(&cfg, &manifest, &out)
        }
        Command::Analyze { sessions, common, mds, manifest } => {
            apply_mds_args(&mut cfg, common.seed, &mds);
            let sessions = sessions.unwrap_or_else(|| cfg.out_dir("simulate"));
            let out = common.out.unwrap_or_else(|| cfg.out_dir("analyze"));
            analyze(&cfg, &sessions, manifest.as_deref(), &out)
        }
        Command::Mds { matrix, common, mds, dissimilarity } => {
            apply_mds_args(&mut cfg, common.seed, &mds);
            let out = common.out.unwrap_or_else(|| cfg.out_dir("mds"));
            embed(&cfg, &matrix, dissimilarity, &out)
        }
        Command::Serve { seed, addr, sessions_dir, manifest } => {
            if let Some(addr) = addr {
                cfg.serve.addr = addr;
            }
            if sessions_dir.is_some() {
                cfg.serve.sessions_dir = sessions_dir;
            }
            serve(&cfg, seed.unwrap_or(0), manifest.as_deref())
        }
        Command::ExportSweep { common } => {
            let out = common.out.unwrap_or_else(|| cfg.out_dir("export-sweep"));
            export_sweep(&cfg, &out)
        }
    }
}

fn apply_mds_args(cfg: &mut PipelineConfig, seed: Option<u64>, args: &MdsArgs) {
    if let Some(seed) = seed {
        cfg.mds.seed = seed;
    }
    if let Some(k_max) = args.kmax {
        cfg.mds.k_max = k_max;
        cfg.mds.k = cfg.mds.k.min(k_max);
    }
    if let Some(r) = args.restarts {
        cfg.mds.restarts = r;
    }
    if let Some(k) = args.k {
        cfg.mds.k = k;
    }
}

pub fn synth(cfg: &PipelineConfig, out: &Path) -> Result<String> {
    let set = cfg.synthesis.texture_set()?;
    let signals = set.synthesize_all()?;
    let wav_rate = cfg.synthesis.fs as u32;
    let manifest = Manifest::for_set(&set, wav_rate, cfg.synthesis.current_csv);
    create_dir(out)?;
    for (entry, signal) in manifest.textures.iter().zip(&signals) {
        write(out, &entry.wav, wav_bytes(&signal.samples, wav_rate)?)?;
        write(out, &entry.csv, samples_csv(&signal.samples))?;
        if let Some(name) = &entry.current_csv {
            let current = to_current(&signal.samples, signal.fs, cfg.synthesis.center_ma, cfg.synthesis.span_ma)?;
            write(out, name, current_csv(&current.samples))?;
        }
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = write(out, "manifest.json", json + "\n")?;
    Ok(format!("wrote {} textures and {}", manifest.textures.len(), path.display()))
}

pub fn simulate(cfg: &PipelineConfig, manifest: &Path, out: &Path) -> Result<String> {
    let set = set_from_manifest(manifest)?;
    let sessions = simulate_study(&set, &cfg.experiment.model, cfg.experiment.participants, cfg.experiment.seed)?;
    create_dir(out)?;
    for s in &sessions {
        let json = serde_json::to_string_pretty(s).expect("session serializes");
        write(out, &format!("{}.json", s.participant_id), json + "\n")?;
    }
    Ok(format!("wrote {} sessions to {}", sessions.len(), out.display()))
}

pub fn analyze(cfg: &PipelineConfig, sessions_dir: &Path, manifest: Option<&Path>, out: &Path) -> Result<String> {
    let set = match manifest {
        Some(path) => set_from_manifest(path)?,
        None => cfg.synthesis.texture_set()?,
    };
    let sessions = read_sessions(sessions_dir)?;
    let study = analyze_sessions(&set, &sessions, &cfg.analysis_config())?;
    let report = &study.report;
    create_dir(out)?;
    write(out, "similarity.csv", similarity_csv(&study.similarity))?;
    write(out, "dissimilarity.csv", dissimilarity_csv(&study.dissimilarity))?;
    write(out, "scree.csv", scree_csv(&report.scree))?;
    write(out, "solution.csv", solution_csv(study.solution()))?;
    write(out, "solution.json", solution_json(study.solution())?)?;
    write(out, "report.json", report_json(report)?)?;
    write(out, "vectors.csv", vectors_csv(report))?;
    write(out, "angles.csv", angles_csv(report))?;
    write(out, "correlations.csv", correlations_csv(report))?;
    write(out, "labels.csv", labels_csv(report))?;
    let tables = report_tables(report);
    write(out, "tables.txt", &tables)?;
    for (name, svg) in projection_svgs(report, &study.solution().coordinates)? {
        write(out, &name, svg)?;
    }
    Ok(format!("{tables}\nwrote analysis of {} sessions to {}", sessions.len(), out.display()))
}

pub fn embed(cfg: &PipelineConfig, matrix: &Path, is_dissimilarity: bool, out: &Path) -> Result<String> {
    let text = read_text(matrix)?;
    let (ids, values) = parse_matrix_csv(&text).map_err(|e| CliError::Validation(format!("{}: {e}", matrix.display())))?;
    let diss = if is_dissimilarity {
        DissimilarityMatrix::new(ids, values)?
    } else {
        similarity_to_dissimilarity(ids, &values)?
    };
    let k = cfg.mds.k;
    if k == 0 || k > cfg.mds.k_max {
        return Err(CliError::Validation(format!("need 1 <= k <= kmax = {}, got {k}", cfg.mds.k_max)));
    }
    let solutions = scree(&diss, cfg.mds.k_max, &cfg.mds.options())?;
    let points = scree_points(&solutions);
    let chosen = &solutions[k - 1];
    create_dir(out)?;
    write(out, "scree.csv", scree_csv(&points))?;
    write(out, "solution.csv", solution_csv(chosen))?;
    write(out, "solution.json", solution_json(chosen)?)?;
    let scree_line: Vec<String> = points.iter().map(|p| format!("k={} {:.4}", p.k, p.stress)).collect();
    Ok(format!("stress {}\nwrote k={k} solution to {}", scree_line.join(", "), out.display()))
}

pub fn serve(cfg: &PipelineConfig, seed: u64, manifest: Option<&Path>) -> Result<String> {
    let catalog = match manifest {
        Some(path) => Catalog::from_manifest(read_manifest(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => Catalog::from_set(cfg.synthesis.texture_set()?),
    };
    let store = match &cfg.serve.sessions_dir {
        Some(dir) => SessionStore::open(dir, seed)?,
        None => SessionStore::in_memory(seed),
    };
    let addr = cfg.serve.addr;
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: PathBuf::from("<runtime>"), source })?;
    eprintln!("listening on http://{addr}");
    runtime
        .block_on(texture_space_service::serve(addr, AppState::new(catalog, store)))
        .map_err(|source| CliError::Io { path: PathBuf::from(addr.to_string()), source })?;
    Ok("server stopped".into())
}

pub fn export_sweep(cfg: &PipelineConfig, out: &Path) -> Result<String> {
    let s = &cfg.sweep;
    let fs = cfg.synthesis.fs;
    cfg.synthesis.texture_set()?;
    let sweep = generate_sweep(s.f_start_hz, s.f_end_hz, s.duration_s, fs)?;
    create_dir(out)?;
    write(out, "sweep.wav", wav_bytes(&sweep.samples, fs as u32)?)?;
    let mut written = 1;
    for &f0 in &FREQUENCIES_HZ {
        for &r in &IRREGULARITIES {
            let filter = design_bandpass(f0, r, fs)?;
            let response = estimate_response(&sweep.samples, &filter_apply(&filter, &sweep.samples)?, fs)?;
            write(out, &format!("bode_f{f0}_r{r}.csv"), bode_csv(&response))?;
            written += 1;
        }
    }
    let info = serde_json::json!({
        "f_start_hz": s.f_start_hz,
        "f_end_hz": s.f_end_hz,
        "duration_s": s.duration_s,
        "fs": fs,
        "rpm": s.rpm,
        "radius_mm": s.radius_mm,
        "scan_velocity_mm_s": scan_velocity(s.rpm, s.radius_mm),
    });
    write(out, "sweep.json", serde_json::to_string_pretty(&info).expect("json") + "\n")?;
    Ok(format!("wrote {} files to {}", written + 1, out.display()))
}
