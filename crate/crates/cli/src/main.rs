use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context};
use clap::{Parser, Subcommand};
use fleet_select::io::{read_monitors_csv, read_records_csv, read_weights_csv, write_records_csv};
use fleet_select::{
    baseline_max_points, baseline_random_mp, build_coverage, evaluate_methods, gen_fleet,
    greedy_incremental, greedy_max_coverage, greedy_min_budget, ingest, load_custom_strata,
    make_grid, percentage_coverage, ColocationProfile, CoverageExport, CoverageMatrix,
    EvaluationConfig, FleetSpec, IngestReport, MobilityStore, SelectionConfig, SelectionResult,
    Stratification, WeightMap,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

mod config;

use config::{Algorithm, EvalArgs, PipelineArgs, RunConfig, SelectArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "fleet-select",
    version,
    about = "Pick fleet vehicles that maximize drive-by sensing coverage"
)]
struct Cli {
    /// TOML or JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the strata document for a grid or a custom polygon file.
    Stratify {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Ingest records and write each vehicle's coverage cells.
    Coverage {
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Reference monitors CSV, used for the colocation profile.
        #[arg(long)]
        monitors: Option<PathBuf>,
        /// Also write reference and pairwise colocation counts here.
        #[arg(long)]
        colocations_out: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run a selection algorithm over a coverage file.
    Select {
        #[arg(long)]
        coverage: PathBuf,
        /// Colocation profile written by `coverage --colocations-out`.
        #[arg(long)]
        colocations: Option<PathBuf>,
        #[command(flatten)]
        select: SelectArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Select on a training period and score every method on a test period.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        monitors: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Generate a synthetic fleet from a JSON or TOML fleet spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fleet-select: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Stratify { pipeline, output } => {
            pipeline.apply(&mut cfg)?;
            let strata = load_strata(&cfg)?;
            write_json(&output, &strata.to_geojson())
        }
        Command::Coverage {
            records,
            pipeline,
            monitors,
            colocations_out,
            output,
        } => {
            pipeline.apply(&mut cfg)?;
            cmd_coverage(
                &cfg,
                &records,
                monitors.as_deref(),
                colocations_out.as_deref(),
                &output,
            )
        }
        Command::Select {
            coverage,
            colocations,
            select,
            output,
        } => {
            select.apply(&mut cfg);
            cmd_select(&cfg, &coverage, colocations.as_deref(), &output)
        }
        Command::Evaluate {
            train,
            test,
            monitors,
            pipeline,
            select,
            eval,
            output,
        } => {
            pipeline.apply(&mut cfg)?;
            select.apply(&mut cfg);
            eval.apply(&mut cfg);
            cmd_evaluate(&cfg, &train, &test, monitors.as_deref(), &output)
        }
        Command::Synth { spec, output } => cmd_synth(&spec, &output),
    }
}

fn load_strata(cfg: &RunConfig) -> anyhow::Result<Stratification> {
    if let Some(path) = &cfg.strata_file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading strata {}", path.display()))?;
        return load_custom_strata(&text)
            .with_context(|| format!("loading strata {}", path.display()));
    }
    let Some(extent) = cfg.extent else {
        bail!("a grid needs --extent (or pass --strata-file)");
    };
    Ok(make_grid(extent, cfg.spatial_granularity_m)?)
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_store(
    cfg: &RunConfig,
    strata: &Stratification,
    path: &Path,
) -> anyhow::Result<(MobilityStore, IngestReport)> {
    let (records, malformed) =
        read_records_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    let store = ingest(&records, strata, cfg.store_config())?;
    let mut report = store.report();
    report.malformed += malformed;
    Ok((store, report))
}

/// Only `coverage` is required when reading, so hand-written files work.
#[derive(Serialize, Deserialize)]
struct CoverageFile {
    #[serde(default)]
    version: String,
    #[serde(default)]
    config: RunConfig,
    #[serde(default)]
    ingest: IngestReport,
    coverage: CoverageExport,
}

fn cmd_coverage(
    cfg: &RunConfig,
    records: &Path,
    monitors: Option<&Path>,
    colocations_out: Option<&Path>,
    output: &Path,
) -> anyhow::Result<()> {
    ensure!(
        monitors.is_none() || colocations_out.is_some(),
        "--monitors has no effect without --colocations-out"
    );
    let strata = load_strata(cfg)?;
    let (store, report) = load_store(cfg, &strata, records)?;
    if report.malformed > 0 || report.out_of_extent > 0 {
        eprintln!(
            "fleet-select: skipped {} malformed and {} out-of-extent records",
            report.malformed, report.out_of_extent
        );
    }
    let matrix = build_coverage(&store);
    write_json(
        output,
        &CoverageFile {
            version: VERSION.into(),
            config: cfg.clone(),
            ingest: report,
            coverage: matrix.to_export(),
        },
    )?;
    if let Some(path) = colocations_out {
        let monitors = match monitors {
            Some(p) => {
                read_monitors_csv(open(p)?).with_context(|| format!("reading {}", p.display()))?
            }
            None => Vec::new(),
        };
        write_json(path, &ColocationProfile::from_store(&store, &monitors))?;
    }
    Ok(())
}

fn load_weights(cfg: &RunConfig) -> anyhow::Result<WeightMap> {
    match &cfg.weights_file {
        Some(p) => read_weights_csv(open(p)?).with_context(|| format!("reading {}", p.display())),
        None => Ok(WeightMap::uniform()),
    }
}

fn run_algorithm(
    cfg: &RunConfig,
    m: &CoverageMatrix,
    profile: &ColocationProfile,
) -> anyhow::Result<SelectionResult> {
    let selection = SelectionConfig {
        budget: cfg.budget,
        constraints: cfg.constraints(),
        weights: load_weights(cfg)?,
    };
    Ok(match cfg.algorithm {
        Algorithm::Greedy => greedy_max_coverage(m, profile, &selection),
        Algorithm::MinBudget => {
            let Some(k) = cfg.coverage_target else {
                bail!("min-budget needs --coverage-target");
            };
            greedy_min_budget(m, profile, &selection.weights, k, selection.constraints)
        }
        Algorithm::Incremental => {
            greedy_incremental(m, profile, &cfg.existing, cfg.budget, &selection)?
        }
        Algorithm::RandomMp => baseline_random_mp(m, cfg.k_min_records, cfg.budget, cfg.seed),
        Algorithm::MaxPoints => baseline_max_points(m, cfg.budget),
    })
}

fn cmd_select(
    cfg: &RunConfig,
    coverage: &Path,
    colocations: Option<&Path>,
    output: &Path,
) -> anyhow::Result<()> {
    let file: CoverageFile = read_json(coverage)?;
    let m = CoverageMatrix::from_export(&file.coverage)?;
    let profile = match colocations {
        Some(p) => read_json(p)?,
        None if cfg.constraints().is_active() => {
            bail!("colocation constraints are set but no --colocations file was given")
        }
        None => ColocationProfile::default(),
    };
    let result = run_algorithm(cfg, &m, &profile)?;
    let mut all: Vec<u64> = result.chosen.clone();
    if cfg.algorithm == Algorithm::Incremental {
        all.extend(&cfg.existing);
    }
    write_json(
        output,
        &json!({
            "version": VERSION,
            "config": cfg,
            "result": result,
            "percentage_coverage": percentage_coverage(&m, &all),
        }),
    )
}

fn cmd_evaluate(
    cfg: &RunConfig,
    train: &Path,
    test: &Path,
    monitors: Option<&Path>,
    output: &Path,
) -> anyhow::Result<()> {
    let strata = load_strata(cfg)?;
    let (train_store, train_report) = load_store(cfg, &strata, train)?;
    let (test_store, test_report) = load_store(cfg, &strata, test)?;
    ensure!(
        !train_store.is_empty(),
        "training records are empty after ingest"
    );
    ensure!(
        !test_store.is_empty(),
        "test records are empty after ingest"
    );

    let profile = if cfg.constraints().is_active() {
        let monitors = match monitors {
            Some(p) => read_monitors_csv(open(p)?)?,
            None => Vec::new(),
        };
        ColocationProfile::from_store(&train_store, &monitors)
    } else {
        ColocationProfile::default()
    };
    let selection = SelectionConfig {
        budget: 0,
        constraints: cfg.constraints(),
        weights: load_weights(cfg)?,
    };
    let eval = EvaluationConfig {
        budgets: cfg.budgets.clone(),
        random_mp_runs: cfg.random_mp_runs,
        k_min_records: cfg.k_min_records,
        seed: cfg.seed,
        metric: cfg.metric,
    };
    let report = evaluate_methods(
        &build_coverage(&train_store),
        &build_coverage(&test_store),
        &profile,
        &selection,
        &eval,
    );
    write_json(
        output,
        &json!({
            "version": VERSION,
            "config": cfg,
            "train_ingest": train_report,
            "test_ingest": test_report,
            "report": report,
        }),
    )
}

fn cmd_synth(spec_path: &Path, output: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: FleetSpec = if spec_path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text)?
    } else {
        serde_json::from_str(&text)?
    };
    let records = gen_fleet(&spec)?;
    let f = File::create(output).with_context(|| format!("creating {}", output.display()))?;
    write_records_csv(BufWriter::new(f), &records)?;
    Ok(())
}
