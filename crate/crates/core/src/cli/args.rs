use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::RunConfig;
use super::error::CliError;
use super::pipeline::{
    cmd_align_crop, cmd_edma_compare, cmd_geom_compare, cmd_gpa_analyze, cmd_pipeline, write_file,
};
use super::synth::{write_synthetic_study, SynthMethod, SynthStudyOptions};
use crate::geomeval::Direction;
use crate::meshio::{read_ply, validate_mesh};

#[derive(Debug, Parser)]
#[command(name = "facegm", version, about = "Evaluate 3D facial reconstructions against a ground-truth scan")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and write report.json.
    Run(RunArgs),
    /// Align and crop all meshes; writes align_crop.json and the normalized files.
    AlignCrop(RunArgs),
    /// Point-to-point and surface deviation; writes geometric.json and deviation meshes.
    GeomCompare(RunArgs),
    /// CS/PPD correlations, GPA, PCA, hull overlap and permutation tests; writes morphometric.json.
    GpaAnalyze(RunArgs),
    /// EDMA form difference between the two groups; writes edma.json and fdm.csv files.
    EdmaCompare(RunArgs),
    /// Write a synthetic study (meshes, landmarks and config.toml).
    Synth(SynthArgs),
    /// Check a PLY file and print its validation findings.
    Validate { path: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    SourceToTarget,
    TargetToSource,
}

/// Flags override the matching config fields.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(short, long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub crop_radius: Option<f64>,
    #[arg(long)]
    pub nose_tip_name: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub align_landmark_names: Option<Vec<String>>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub top_n: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    #[arg(long)]
    pub skip_alignment: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to create the study in.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values = ["copy", "noisy"])]
    pub methods: Vec<SynthMethodArg>,
    #[arg(long, default_value_t = 999)]
    pub n_perm: usize,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthMethodArg {
    Copy,
    Noisy,
}

impl RunArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(v) = &self.output_dir {
            // Relative to the working directory, unlike paths in the file.
            cfg.output_dir = std::path::absolute(v)
                .map_err(|e| CliError::config(format!("bad output directory: {e}")))?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.crop_radius {
            cfg.crop_radius = v;
        }
        if let Some(v) = &self.nose_tip_name {
            cfg.nose_tip_name = v.clone();
        }
        if let Some(v) = &self.align_landmark_names {
            cfg.align_landmark_names = v.clone();
        }
        if let Some(v) = self.n_perm {
            cfg.permutation.n_perm = v;
        }
        if let Some(v) = self.n_boot {
            cfg.edma.n_boot = v;
        }
        if let Some(v) = self.alpha {
            cfg.edma.alpha = v;
        }
        if let Some(v) = &self.top_n {
            cfg.edma.top_n = v.clone();
        }
        if let Some(d) = self.direction {
            cfg.direction = match d {
                DirectionArg::SourceToTarget => Direction::SourceToTarget,
                DirectionArg::TargetToSource => Direction::TargetToSource,
            };
        }
        if self.skip_alignment {
            cfg.skip_alignment = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_fragment<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = cfg.output_path().join(name);
    let mut text = serde_json::to_string_pretty(value).expect("fragment serializes");
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

fn with_threads<R>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn print_table(report: &super::report::EvaluationReport) {
    println!("method,avg,sd,max");
    for m in &report.geometric.methods {
        println!("{},{:.4},{:.4},{:.4}", m.method, m.pooled.mean, m.pooled.sd, m.pooled.max);
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => {
            let cfg = a.load()?;
            let report = with_threads(a.threads, || cmd_pipeline(&cfg))?;
            print_table(&report);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("report: {}", cfg.output_path().join("report.json").display());
        }
        Command::AlignCrop(a) => {
            let cfg = a.load()?;
            let r = with_threads(a.threads, || cmd_align_crop(&cfg))?;
            println!("wrote {}", write_fragment(&cfg, "align_crop.json", &r)?.display());
        }
        Command::GeomCompare(a) => {
            let cfg = a.load()?;
            let r = with_threads(a.threads, || cmd_geom_compare(&cfg))?;
            println!("wrote {}", write_fragment(&cfg, "geometric.json", &r)?.display());
        }
        Command::GpaAnalyze(a) => {
            let cfg = a.load()?;
            let (r, warnings) = with_threads(a.threads, || cmd_gpa_analyze(&cfg))?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", write_fragment(&cfg, "morphometric.json", &r)?.display());
        }
        Command::EdmaCompare(a) => {
            let cfg = a.load()?;
            let r = with_threads(a.threads, || cmd_edma_compare(&cfg))?;
            println!("wrote {}", write_fragment(&cfg, "edma.json", &r)?.display());
        }
        Command::Synth(a) => {
            let opts = SynthStudyOptions {
                subjects: a.subjects,
                seed: a.seed,
                methods: a
                    .methods
                    .iter()
                    .map(|m| match m {
                        SynthMethodArg::Copy => SynthMethod::Copy,
                        SynthMethodArg::Noisy => SynthMethod::Noisy,
                    })
                    .collect(),
                n_perm: a.n_perm,
                n_boot: a.n_boot,
                ..SynthStudyOptions::default()
            };
            write_synthetic_study(&a.out, &opts)?;
            println!("wrote {}", a.out.join("config.toml").display());
        }
        Command::Validate { path } => validate_file(&path)?,
    }
    Ok(())
}

fn validate_file(path: &Path) -> Result<(), CliError> {
    let mesh = read_ply(path)?;
    let report = validate_mesh(&mesh);
    println!(
        "{}: {} vertices, {} faces",
        path.display(),
        mesh.vertex_count(),
        mesh.face_count()
    );
    for f in report.errors.iter() {
        println!("error {}: {}", f.code, f.message);
    }
    for f in report.warnings.iter() {
        println!("warning {}: {}", f.code, f.message);
    }
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::data("mesh failed validation"))
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("facegm: {e}");
            e.exit_code()
        }
    }
}
