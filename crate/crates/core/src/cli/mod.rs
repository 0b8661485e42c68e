//! Command-line front end.

pub mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alignment::TransitionForm;
use crate::features::{TimeBase, WordCountPolicy};
use crate::geometry::RadiiForm;
use crate::ingest::{self, IngestError, Scores, Session};
use crate::pipeline::{analyze_sessions, SessionAnalysis};
use crate::report::{self, ComparisonBlock};
use crate::stats::{compare_all, split_groups, Alternative, EqualMeanPolicy, FeatureMatrix, Phase, ScoreKind, StatsError};
use crate::synth::{self, SynthConfig};
use config::{parse_enum, resolve, ConfigFile, FlagOverrides, GeometryFile, PolicyFile, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("{0}")]
    Stats(#[from] StatsError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn input(path: &Path, source: std::io::Error) -> Self {
        CliError::Input {
            path: path.to_owned(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 2,
            CliError::Parse { .. } => 3,
            CliError::Stats(StatsError::MissingFeatures(_)) => 3,
            CliError::Stats(_) => 4,
            CliError::Config(_) | CliError::Output { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "readseq", version, about = "Reading-sequence detection and reading-feature comparison for eye-tracking data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with [geometry], [policy] and [synth] tables
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Display geometry overrides, e.g. `diagonal=24,width=1920,height=1080,distance=65,foveal=2,parafoveal=7`
    #[arg(long, global = true, value_parser = GeometryFile::parse_flag)]
    pub geometry: Option<GeometryFile>,
    /// Minimum number of fixations per reading sequence
    #[arg(long, global = true)]
    pub min_seq_len: Option<usize>,
    /// Minimum number of distinct words per reading sequence
    #[arg(long, global = true)]
    pub min_seq_words: Option<usize>,
    /// Word-spacing term of the alignment cost: difference | sum
    #[arg(long, global = true, value_parser = parse_enum::<TransitionForm>)]
    pub spacing_form: Option<TransitionForm>,
    /// Parafoveal radius formula: additive | direct
    #[arg(long, global = true, value_parser = parse_enum::<RadiiForm>)]
    pub radii_form: Option<RadiiForm>,
    /// Words-read counting: traversed | fixated
    #[arg(long, global = true, value_parser = parse_enum::<WordCountPolicy>)]
    pub nwords: Option<WordCountPolicy>,
    /// Time base of per-second rates: reading | wallclock
    #[arg(long, global = true, value_parser = parse_enum::<TimeBase>)]
    pub time_base: Option<TimeBase>,
    /// Participants scoring exactly the mean: exclude | low | high
    #[arg(long, global = true, value_parser = parse_enum::<EqualMeanPolicy>)]
    pub equal_mean: Option<EqualMeanPolicy>,
    /// Test direction: two-sided | less | greater
    #[arg(long, global = true, value_parser = parse_enum::<Alternative>)]
    pub alternative: Option<Alternative>,
    /// Worker threads for per-participant work (0 = all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct AnalysisInputs {
    /// Fixation log (comma or tab delimited)
    #[arg(long)]
    pub fixations: PathBuf,
    /// Word layout document (JSON)
    #[arg(long)]
    pub layout: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindSel {
    Mcq,
    Essay,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PhaseSel {
    Pre,
    Post,
    Kg,
    All,
}

#[derive(Debug, Args)]
pub struct CompareSelection {
    #[arg(long, value_enum, default_value = "all")]
    pub score_kind: KindSel,
    #[arg(long, value_enum, default_value = "all")]
    pub phase: PhaseSel,
    /// Also write summary.txt with knowledge-gain and prior-knowledge rows
    #[arg(long)]
    pub summary_table: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align fixations to words and dump aligned fixations and sequences
    Align(AnalysisInputs),
    /// Compute the per-participant feature matrix
    Features(AnalysisInputs),
    /// Compare Low/High groups on an existing feature matrix
    Compare {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        selection: CompareSelection,
    },
    /// Generate synthetic fixations, layout, ground truth and scores
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        participants: usize,
        /// Gaze jitter in pixels
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        n_fixations: Option<usize>,
    },
    /// Align, extract features and (with scores) compare groups
    Pipeline {
        #[command(flatten)]
        inputs: AnalysisInputs,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        selection: CompareSelection,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Align(_) => "align",
            Command::Features(_) => "features",
            Command::Compare { .. } => "compare",
            Command::Synth { .. } => "synth",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    settings: &'a Settings,
    r_foveal_px_rounded: f64,
    r_parafoveal_px_rounded: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    synth: Option<&'a SynthConfig>,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    generated_unix_s: u64,
}

/// Collects files of one run and writes each atomically (temp file + rename).
struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output {
            path: dir.to_owned(),
            message: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_owned(),
            written: Vec::new(),
        })
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<&mut File>) -> Result<(), IngestError>,
    {
        let target = self.dir.join(name);
        let err = |message: String| CliError::Output {
            path: target.clone(),
            message,
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| err(e.to_string()))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            body(&mut w).map_err(|e| err(e.to_string()))?;
            w.flush().map_err(|e| err(e.to_string()))?;
        }
        tmp.persist(&target).map_err(|e| err(e.to_string()))?;
        self.written.push(name.to_owned());
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::input(path, e))
}

fn parse_with<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T, IngestError>) -> Result<T, CliError> {
    f(open(path)?).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })
}

fn load_sessions(inputs: &AnalysisInputs, scores: &[Scores]) -> Result<Vec<Session>, CliError> {
    let fixations = parse_with(&inputs.fixations, ingest::parse_fixations)?;
    let layouts = parse_with(&inputs.layout, ingest::parse_layout)?;
    ingest::assemble_sessions(fixations, &layouts, scores).map_err(|source| CliError::Parse {
        path: inputs.fixations.clone(),
        source,
    })
}

fn analyze(inputs: &AnalysisInputs, scores: &[Scores], settings: &Settings) -> Result<Vec<SessionAnalysis>, CliError> {
    let sessions = load_sessions(inputs, scores)?;
    let analyses = analyze_sessions(sessions, &settings.analysis(), settings.threads);
    for a in &analyses {
        if a.dropped_fixations > 0 {
            log::info!(
                "participant {}: dropped {} fixations on {} non-content pages",
                a.participant_id,
                a.dropped_fixations,
                a.dropped_pages
            );
        }
    }
    Ok(analyses)
}

fn selected(selection: &CompareSelection) -> Vec<(ScoreKind, Phase)> {
    let kinds: &[ScoreKind] = match selection.score_kind {
        KindSel::Mcq => &[ScoreKind::Mcq],
        KindSel::Essay => &[ScoreKind::Essay],
        KindSel::All => &ScoreKind::ALL,
    };
    let phases: &[Phase] = match selection.phase {
        PhaseSel::Pre => &[Phase::Pre],
        PhaseSel::Post => &[Phase::Post],
        PhaseSel::Kg => &[Phase::Kg],
        PhaseSel::All => &Phase::ALL,
    };
    phases
        .iter()
        .flat_map(|&p| kinds.iter().map(move |&k| (k, p)))
        .collect()
}

fn compare_blocks(
    matrix: &FeatureMatrix,
    scores: &[Scores],
    selection: &CompareSelection,
    settings: &Settings,
) -> Result<Vec<ComparisonBlock>, CliError> {
    selected(selection)
        .into_iter()
        .map(|(kind, phase)| {
            let split = split_groups(scores, kind, phase, settings.equal_mean)?;
            if !split.excluded.is_empty() {
                log::info!("{kind}/{phase}: {} participants at the mean excluded", split.excluded.len());
            }
            let comparisons = compare_all(matrix, &split, settings.alternative)?;
            Ok(ComparisonBlock { split, comparisons })
        })
        .collect()
}

fn write_comparison_outputs(
    out: &mut OutputDir,
    blocks: &[ComparisonBlock],
    selection: &CompareSelection,
) -> Result<(), CliError> {
    out.write("comparison.csv", |w| report::write_comparisons(w, blocks))?;
    out.write_text("comparison.txt", &report::render_comparisons(blocks))?;
    out.write_text("groups.txt", &report::render_group_counts(blocks))?;
    if selection.summary_table {
        out.write_text("summary.txt", &report::render_summary_table(blocks))?;
    }
    Ok(())
}

fn write_analysis_dumps(out: &mut OutputDir, analyses: &[SessionAnalysis]) -> Result<(), CliError> {
    out.write("aligned.csv", |w| report::write_aligned_dump(w, analyses))?;
    out.write("sequences.csv", |w| report::write_sequence_dump(w, analyses))
}

fn flag_overrides(g: &GlobalArgs) -> FlagOverrides {
    FlagOverrides {
        geometry: g.geometry.clone(),
        policy: PolicyFile {
            spacing_form: g.spacing_form,
            radii_form: g.radii_form,
            nwords: g.nwords,
            time_base: g.time_base,
            min_seq_len: g.min_seq_len,
            min_seq_words: g.min_seq_words,
            equal_mean: g.equal_mean,
            alternative: g.alternative,
            threads: g.threads,
        },
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let settings = resolve(&file, &flag_overrides(&cli.global))?;
    log::info!(
        "radii: foveal {:.2} px, parafoveal {:.2} px, candidate {:.2} px",
        settings.radii.r_foveal_px,
        settings.radii.r_parafoveal_px,
        settings.radii.candidate_radius_px
    );

    let mut inputs: Vec<&Path> = Vec::new();
    let mut synth_config = None;
    let out_dir: &Path;
    let mut out;

    match &cli.command {
        Command::Align(args) => {
            inputs.extend([args.fixations.as_path(), args.layout.as_path()]);
            let analyses = analyze(args, &[], &settings)?;
            out_dir = &args.out;
            out = OutputDir::create(out_dir)?;
            write_analysis_dumps(&mut out, &analyses)?;
        }
        Command::Features(args) => {
            inputs.extend([args.fixations.as_path(), args.layout.as_path()]);
            let analyses = analyze(args, &[], &settings)?;
            out_dir = &args.out;
            out = OutputDir::create(out_dir)?;
            let rows: Vec<_> = analyses.into_iter().map(|a| a.features).collect();
            out.write("features.csv", |w| report::write_feature_matrix(w, &rows))?;
        }
        Command::Compare {
            features,
            scores,
            out: dir,
            selection,
        } => {
            inputs.extend([features.as_path(), scores.as_path()]);
            let matrix = parse_with(features, report::read_feature_matrix)?;
            let scores = parse_with(scores, ingest::parse_scores)?;
            let blocks = compare_blocks(&matrix, &scores, selection, &settings)?;
            out_dir = dir;
            out = OutputDir::create(out_dir)?;
            write_comparison_outputs(&mut out, &blocks, selection)?;
        }
        Command::Synth {
            out: dir,
            seed,
            participants,
            sigma,
            n_fixations,
        } => {
            let mut config = file.synth.clone().unwrap_or_default();
            if let Some(seed) = seed {
                config.seed = *seed;
            }
            if let Some(sigma) = sigma {
                config.noise_sigma_px = *sigma;
            }
            if let Some(n) = n_fixations {
                config.n_fixations = *n;
            }
            let study = synth::generate_study(&config, *participants).map_err(|e| CliError::Config(e.to_string()))?;
            out_dir = dir;
            out = OutputDir::create(out_dir)?;
            out.write("fixations.csv", |w| ingest::write_fixations(w, &study.fixations))?;
            out.write("layout.json", |w| ingest::write_layout(w, std::slice::from_ref(&study.layout)))?;
            out.write("scores.csv", |w| ingest::write_scores(w, &study.scores))?;
            out.write("truth.csv", |w| write_truth(w, &study.truth))?;
            synth_config = Some(config);
        }
        Command::Pipeline {
            inputs: args,
            scores,
            selection,
        } => {
            inputs.extend([args.fixations.as_path(), args.layout.as_path()]);
            let scores = match scores {
                Some(path) => {
                    inputs.push(path);
                    Some(parse_with(path, ingest::parse_scores)?)
                }
                None => None,
            };
            let analyses = analyze(args, scores.as_deref().unwrap_or_default(), &settings)?;
            let rows: Vec<_> = analyses.iter().map(|a| a.features.clone()).collect();
            let blocks = match &scores {
                Some(scores) => Some(compare_blocks(&report::to_matrix(&rows), scores, selection, &settings)?),
                None => None,
            };
            out_dir = &args.out;
            out = OutputDir::create(out_dir)?;
            write_analysis_dumps(&mut out, &analyses)?;
            out.write("features.csv", |w| report::write_feature_matrix(w, &rows))?;
            if let Some(blocks) = &blocks {
                write_comparison_outputs(&mut out, blocks, selection)?;
            }
        }
    }

    let inputs = inputs
        .into_iter()
        .map(|p| {
            Ok(InputRecord {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name(),
        settings: &settings,
        r_foveal_px_rounded: settings.radii.r_foveal_px.round(),
        r_parafoveal_px_rounded: settings.radii.r_parafoveal_px.round(),
        synth: synth_config.as_ref(),
        inputs,
        outputs: out.written.clone(),
        generated_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    out.write("manifest.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        Ok(w.write_all(b"\n")?)
    })?;
    log::info!("wrote {} files to {}", out.written.len(), out_dir.display());
    Ok(())
}

fn write_truth<W: Write>(sink: W, truth: &[(String, synth::GroundTruth)]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    let opt = |v: Option<String>| v.unwrap_or_default();
    w.write_record(["participant_id", "fixation", "word_index", "sequence", "regression"])
        .map_err(|e| IngestError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
    for (p, t) in truth {
        w.write_record([
            p.clone(),
            t.fixation.to_string(),
            opt(t.word_index.map(|v| v.to_string())),
            opt(t.sequence.map(|v| v.to_string())),
            t.regression.to_string(),
        ])
        .map_err(|e| IngestError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Entry point shared by the binary: parses arguments, runs, maps errors to
/// exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
