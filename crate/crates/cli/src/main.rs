//! `hte`: command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 data
//! error, 5 estimation error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hte_core::index::IndexModel;
use hte_core::panel::{Column, ColumnRole, PanelDataset};
use hte_core::pipeline::{run_pipeline, run_placebo, PipelineConfig, ResultsFile, RunManifest, StageTiming};
use hte_core::synth::{generate_panel, truth_csv};
use hte_core::weather::{growing_season_treatments, read_household_windows, ClimateGrid};
use hte_core::{Error, ErrorKind};

mod output;
mod report;

use output::OutputDir;

#[derive(Parser)]
#[command(name = "hte", version, about = "Heterogeneous weather effects on household panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for every forest and the synthetic generator; for `placebo`, the
    /// permutation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also run the placebo permutation with this seed (`fit` only).
    #[arg(long, global = true)]
    placebo_seed: Option<u64>,
    /// Write the main table to stdout as well.
    #[arg(long, global = true)]
    stdout: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Growing-season SPEI per household interval.
    Spei,
    /// Composite indices appended to the panel.
    Index,
    /// Full estimation pipeline.
    Fit,
    /// Pipeline rerun with permuted treatment.
    Placebo,
    /// Synthetic panel, truth table and a matching config.
    Synth,
    /// Human-readable summary of a previous `fit`.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spei => "spei",
            Command::Index => "index",
            Command::Fit => "fit",
            Command::Placebo => "placebo",
            Command::Synth => "synth",
            Command::Report => "report",
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Config => 3,
        ErrorKind::Data => 4,
        ErrorKind::Estimation => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hte {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed.filter(|_| cli.command != Command::Placebo) {
        cfg.set_seed(seed);
    }
    if let Some(seed) = cli.placebo_seed {
        cfg.placebo_seed = Some(seed);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Spei => spei(cli, &cfg),
        Command::Index => index(cli, &cfg),
        Command::Fit => fit(cli, &cfg),
        Command::Placebo => {
            let seed = cli
                .seed
                .or(cfg.placebo_seed)
                .ok_or_else(|| Error::Config("placebo needs --seed or placebo_seed in the config".into()))?;
            let ds = load_data(&cfg)?;
            placebo(cli, &cfg, &ds, seed, &cli.out.join("placebo"))
        }
        Command::Synth => synth(cli, &cfg),
        Command::Report => {
            let text = report::render(&read_results(&cli.out)?);
            let mut dir = OutputDir::create(&cli.out)?;
            dir.write("report.txt", &text)?;
            if cli.stdout {
                print!("{text}");
            }
            Ok(())
        }
    }
}

fn data_path(cfg: &PipelineConfig) -> Result<&Path, Error> {
    cfg.data
        .as_deref()
        .ok_or_else(|| Error::Config("config has no `data` path".into()))
}

fn load_data(cfg: &PipelineConfig) -> Result<PanelDataset, Error> {
    PanelDataset::load(data_path(cfg)?, &cfg.roles)
}

fn read_results(dir: &Path) -> Result<ResultsFile, Error> {
    let path = dir.join("results.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn manifest(cli: &Cli, cfg: &PipelineConfig) -> Result<RunManifest, Error> {
    RunManifest::new(env!("CARGO_PKG_VERSION"), cli.command.name(), cfg)
}

fn fit(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Error> {
    let ds = load_data(cfg)?;
    let out = run_pipeline(&ds, cfg)?;
    for w in &out.metadata.warnings {
        eprintln!("warning: {w}");
    }
    let mut dir = OutputDir::create(&cli.out)?;
    for (name, contents) in out.output_files()? {
        dir.write(&name, &contents)?;
    }
    if cli.stdout {
        print!("{}", out.effects.to_csv());
    }
    let mut m = manifest(cli, cfg)?;
    m.record("", &out);
    dir.write("manifest.json", &m.to_json()?)?;
    eprintln!(
        "ATE {:.4} (SE {:.4}) per treatment unit; outputs in {}",
        out.effects.ate.estimate,
        out.effects.ate.std_err,
        cli.out.display()
    );
    if let Some(seed) = cfg.placebo_seed {
        placebo(cli, cfg, &ds, seed, &cli.out.join("placebo"))?;
    }
    Ok(())
}

fn placebo(cli: &Cli, cfg: &PipelineConfig, ds: &PanelDataset, seed: u64, out_dir: &Path) -> Result<(), Error> {
    let out = run_placebo(ds, cfg, seed)?;
    let mut dir = OutputDir::create(out_dir)?;
    for (name, contents) in out.output_files()? {
        dir.write(&name, &contents)?;
    }
    let mut placebo_cfg = cfg.clone();
    placebo_cfg.placebo_seed = Some(seed);
    let mut m = RunManifest::new(env!("CARGO_PKG_VERSION"), "placebo", &placebo_cfg)?;
    m.record("", &out);
    dir.write("manifest.json", &m.to_json()?)?;
    if cli.stdout && cli.command == Command::Placebo {
        print!("{}", out.effects.to_csv());
    }
    eprintln!(
        "placebo ATE {:.4} (SE {:.4}); outputs in {}",
        out.effects.ate.estimate,
        out.effects.ate.std_err,
        out_dir.display()
    );
    Ok(())
}

fn synth(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Error> {
    let start = Instant::now();
    let panel = generate_panel(&cfg.synth)?;
    let mut dir = OutputDir::create(&cli.out)?;
    let csv = panel.dataset.to_csv_string();
    dir.write("panel.csv", &csv)?;
    dir.write("truth.csv", &truth_csv(&panel.truth)?)?;
    let mut fit_cfg = cfg.clone();
    fit_cfg.data = Some(PathBuf::from("panel.csv"));
    dir.write("config.toml", &fit_cfg.to_toml()?)?;
    if cli.stdout {
        print!("{csv}");
    }
    let mut m = manifest(cli, cfg)?;
    m.data_fingerprints
        .insert("panel.csv".into(), panel.dataset.fingerprint());
    m.stage_timings.push(StageTiming {
        stage: "synth".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    if panel.clip_rate > 0.0 {
        m.warnings.push(format!(
            "{:.2}% of outcome probabilities were clipped",
            100.0 * panel.clip_rate
        ));
    }
    dir.write("manifest.json", &m.to_json()?)?;
    eprintln!(
        "{} rows for {} households written to {}",
        panel.dataset.n_rows(),
        panel.dataset.n_units(),
        cli.out.display()
    );
    Ok(())
}

fn spei(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Error> {
    let start = Instant::now();
    let climate = cfg
        .spei
        .climate
        .as_deref()
        .ok_or_else(|| Error::Config("config has no `spei.climate` path".into()))?;
    let households = cfg
        .spei
        .households
        .as_deref()
        .ok_or_else(|| Error::Config("config has no `spei.households` path".into()))?;
    let grid = ClimateGrid::load(climate, cfg.spei.reference)?;
    let file = std::fs::File::open(households)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", households.display())))?;
    let windows = read_household_windows(file)?;
    let rows = growing_season_treatments(&grid, &windows, &cfg.spei.growing_months, cfg.spei.reversed)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Data(format!("csv buffer: {e}")))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    let mut dir = OutputDir::create(&cli.out)?;
    dir.write("gs_spei.csv", &text)?;
    if cli.stdout {
        print!("{text}");
    }
    let mut m = manifest(cli, cfg)?;
    for (name, path) in [("climate", climate), ("households", households)] {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        m.data_fingerprints
            .insert(name.into(), hte_core::stats::sha256_hex(&bytes));
    }
    if grid.clamped_months > 0 {
        m.warnings.push(format!(
            "{} monthly SPEI values hit the CDF clamp",
            grid.clamped_months
        ));
    }
    m.stage_timings.push(StageTiming {
        stage: "spei".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    dir.write("manifest.json", &m.to_json()?)?;
    eprintln!("{} household intervals written", rows.len());
    Ok(())
}

fn index(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Error> {
    if cfg.indices.is_empty() {
        return Err(Error::Config("config lists no `[[indices]]`".into()));
    }
    let start = Instant::now();
    let mut ds = load_data(cfg)?;
    let mut models = Vec::new();
    for spec in &cfg.indices {
        let fit_rows = if spec.fit_waves.is_empty() {
            ds.clone()
        } else {
            let rows: Vec<usize> = (0..ds.n_rows())
                .filter(|&r| spec.fit_waves.contains(&ds.waves()[r]))
                .collect();
            if rows.is_empty() {
                return Err(Error::Data(format!("index `{}`: no rows in fit_waves", spec.name)));
            }
            ds.select_rows(&rows)?
        };
        let model = IndexModel::fit(&fit_rows, &spec.items)?;
        let scores = model.score_dataset(&ds)?;
        ds = ds.with_column(Column::numeric(&spec.name, ColumnRole::Auxiliary, scores))?;
        models.push((spec.name.clone(), model));
    }
    let csv = ds.to_csv_string();
    let mut dir = OutputDir::create(&cli.out)?;
    dir.write("indexed.csv", &csv)?;
    let json = serde_json::to_string_pretty(
        &models.into_iter().collect::<std::collections::BTreeMap<_, _>>(),
    )
    .map_err(|e| Error::Estimation(format!("cannot serialize index models: {e}")))?;
    dir.write("index_models.json", &(json + "\n"))?;
    if cli.stdout {
        print!("{csv}");
    }
    let mut m = manifest(cli, cfg)?;
    m.data_fingerprints.insert("data".into(), ds.fingerprint());
    m.stage_timings.push(StageTiming {
        stage: "index".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    dir.write("manifest.json", &m.to_json()?)?;
    Ok(())
}
