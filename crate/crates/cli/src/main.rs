//! Command-line driver: synthetic data generation, seeded multi-trial
//! experiments, cross-dataset runs, parameter sweeps, and PRED-EGA
//! evaluation of externally produced predictions.
//!
//! Conventions: exit 0 on success, 1 on data/runtime errors, 2 on usage or
//! configuration errors. Warnings go to stderr; stdout carries nothing but a
//! final summary line; all results go to files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bgpredict::data::{load_series, series_to_csv, synth_series, GlucoseSeries};
use bgpredict::error::Error;
use bgpredict::experiment::{cross_dataset, run_experiment, sweep, ConfigFile, SweepPoint};
use bgpredict::pred_ega::{
    build_grid, central_rates, Averaging, EvalPoint, RateDenominator, ZoneTables,
};
use bgpredict::report::{
    emit_cross_report, emit_experiment_report, emit_sweep_report, grid_csv, text_table,
};

#[derive(Parser)]
#[command(
    name = "bgpredict",
    version,
    about = "Localized Hermite-kernel blood-glucose prediction with PRED-EGA evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CGM dataset in the canonical CSV schema.
    Synth(SynthArgs),
    /// Run the multi-trial experiment on one dataset and write reports.
    Run(RunArgs),
    /// Train on one dataset, evaluate on another.
    Cross(CrossArgs),
    /// Sweep kernel degrees (and optionally q) and write a ranked table.
    Sweep(SweepArgs),
    /// PRED-EGA on an externally produced prediction CSV.
    Evaluate(EvaluateArgs),
}

/// Flags shared by every experiment-driving subcommand; each mirrors a
/// config-file key one to one and overrides it when set.
#[derive(Args, Clone, Default)]
struct ParamFlags {
    /// Config file (TOML or JSON) with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window length (number of past readings).
    #[arg(long)]
    d: Option<usize>,
    /// Prediction horizon in samples (6, 12, or 18 for 30/60/90 minutes).
    #[arg(long)]
    h: Option<usize>,
    /// Training percentage in (0, 100).
    #[arg(long)]
    c_percent: Option<f64>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    n_hypo: Option<u32>,
    #[arg(long)]
    n_eu: Option<u32>,
    #[arg(long)]
    n_hyper: Option<u32>,
    #[arg(long)]
    alpha_hypo: Option<f64>,
    #[arg(long)]
    alpha_eu: Option<f64>,
    #[arg(long)]
    alpha_hyper: Option<f64>,
    /// Manifold dimension (required, directly or via the config file).
    #[arg(long)]
    q: Option<u32>,
    /// Master seed; trial seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Rate-of-change denominator: "paper" or "central".
    #[arg(long)]
    rate_denominator: Option<String>,
    /// Grid averaging: "trials" (equal weight) or "pooled".
    #[arg(long)]
    averaging: Option<String>,
}

impl ParamFlags {
    /// File config overlaid with flag overrides.
    fn to_config_file(&self) -> Result<ConfigFile, Error> {
        let base = match &self.config {
            Some(path) => ConfigFile::from_path(path)?,
            None => ConfigFile::default(),
        };
        let overrides = ConfigFile {
            d: self.d,
            h: self.h,
            c_percent: self.c_percent,
            trials: self.trials,
            n_hypo: self.n_hypo,
            n_eu: self.n_eu,
            n_hyper: self.n_hyper,
            alpha_hypo: self.alpha_hypo,
            alpha_eu: self.alpha_eu,
            alpha_hyper: self.alpha_hyper,
            q: self.q,
            seed: self.seed,
            rate_denominator: self
                .rate_denominator
                .as_deref()
                .map(parse_rate_denominator)
                .transpose()?,
            averaging: self.averaging.as_deref().map(parse_averaging).transpose()?,
            input: None,
            train_input: None,
            test_input: None,
            output_dir: None,
        };
        Ok(base.merged_with(overrides))
    }
}

fn parse_rate_denominator(s: &str) -> Result<RateDenominator, Error> {
    match s {
        "paper" => Ok(RateDenominator::Paper),
        "central" => Ok(RateDenominator::Central),
        other => Err(Error::Config(format!(
            "rate_denominator must be \"paper\" or \"central\", got {other:?}"
        ))),
    }
}

fn parse_averaging(s: &str) -> Result<Averaging, Error> {
    match s {
        "trials" => Ok(Averaging::Trials),
        "pooled" => Ok(Averaging::Pooled),
        other => Err(Error::Config(format!(
            "averaging must be \"trials\" or \"pooled\", got {other:?}"
        ))),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Number of patients.
    #[arg(long, default_value_t = 25)]
    patients: usize,
    /// Readings per patient (5-minute spacing).
    #[arg(long, default_value_t = 240)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Input CSV (overrides the config's `input`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Training dataset CSV (overrides the config's `train_input`).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test dataset CSV (overrides the config's `test_input`).
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamFlags,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Inclusive degree range "lo:hi" applied to all three ranges.
    #[arg(long, default_value = "3:7")]
    n_range: String,
    /// Optional inclusive manifold-dimension range "lo:hi".
    #[arg(long)]
    q_range: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV with columns patient_id,timestamp_min,predicted,reference.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rate-of-change denominator: "paper" or "central".
    #[arg(long, default_value = "paper")]
    rate_denominator: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
        Command::Cross(args) => cmd_cross(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn read_dataset(path: &Path) -> Result<Vec<GlucoseSeries>, Error> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_series(file)
}

fn write_text(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_synth(args: SynthArgs) -> Result<String, Error> {
    if args.patients == 0 || args.length == 0 {
        return Err(Error::InvalidInput(
            "--patients and --length must be positive".into(),
        ));
    }
    let series = synth_series(args.seed, args.patients, args.length);
    write_text(&args.output, &series_to_csv(&series))?;
    Ok(format!(
        "synth: wrote {} readings for {} patients to {}",
        args.patients * args.length,
        args.patients,
        args.output.display()
    ))
}

fn cmd_run(args: RunArgs) -> Result<String, Error> {
    let file = args.params.to_config_file()?;
    let input = args.input.or_else(|| file.input.clone()).ok_or_else(|| {
        Error::Config("an input dataset is required (--input or config `input`)".into())
    })?;
    let out = args
        .out
        .or_else(|| file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let config = file.resolve()?;

    let series = read_dataset(&input)?;
    let report = run_experiment(&config, &series)?;
    emit_experiment_report(&out, "ours", &report)?;
    Ok(format!(
        "run: {} trials on {} patients (h={}, q={}); reports in {}",
        config.trials,
        series.len(),
        config.h,
        config.q,
        out.display()
    ))
}

fn cmd_cross(args: CrossArgs) -> Result<String, Error> {
    let file = args.params.to_config_file()?;
    let train_path = args
        .train
        .or_else(|| file.train_input.clone())
        .ok_or_else(|| {
            Error::Config("a training dataset is required (--train or config `train_input`)".into())
        })?;
    let test_path = args
        .test
        .or_else(|| file.test_input.clone())
        .ok_or_else(|| {
            Error::Config("a test dataset is required (--test or config `test_input`)".into())
        })?;
    let out = args
        .out
        .or_else(|| file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let config = file.resolve()?;

    let train_series = read_dataset(&train_path)?;
    let test_series = read_dataset(&test_path)?;
    let report = cross_dataset(&config, &train_series, &test_series)?;
    emit_cross_report(&out, "ours-cross", &report)?;
    Ok(format!(
        "cross: trained on {} patients, evaluated on {} patients{}; reports in {}",
        train_series.len(),
        test_series.len(),
        if report.in_sample { " (in-sample)" } else { "" },
        out.display()
    ))
}

/// Parses an inclusive "lo:hi" range.
fn parse_range(spec: &str, what: &str) -> Result<Vec<u32>, Error> {
    let err = || {
        Error::Config(format!(
            "{what} range must look like \"lo:hi\" with lo ≤ hi, got {spec:?}"
        ))
    };
    let (lo, hi) = spec.split_once(':').ok_or_else(err)?;
    let lo: u32 = lo.trim().parse().map_err(|_| err())?;
    let hi: u32 = hi.trim().parse().map_err(|_| err())?;
    if lo == 0 || lo > hi {
        return Err(err());
    }
    Ok((lo..=hi).collect())
}

fn cmd_sweep(args: SweepArgs) -> Result<String, Error> {
    let file = args.params.to_config_file()?;
    let input = args.input.or_else(|| file.input.clone()).ok_or_else(|| {
        Error::Config("an input dataset is required (--input or config `input`)".into())
    })?;
    let out = args
        .out
        .or_else(|| file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let ns = parse_range(&args.n_range, "--n-range")?;
    let qs = match &args.q_range {
        Some(spec) => parse_range(spec, "--q-range")?,
        None => vec![],
    };
    // When no q range is swept, the single configured q applies.
    let file = if qs.is_empty() && file.q.is_none() {
        return Err(Error::Config(
            "q is required: set --q, config `q`, or sweep with --q-range".into(),
        ));
    } else if file.q.is_none() {
        ConfigFile {
            q: Some(qs[0]),
            ..file
        }
    } else {
        file
    };
    let config = file.resolve()?;
    let q_values = if qs.is_empty() { vec![config.q] } else { qs };

    let mut points = Vec::new();
    for &q in &q_values {
        for &n_hypo in &ns {
            for &n_eu in &ns {
                for &n_hyper in &ns {
                    points.push(SweepPoint {
                        n_hypo,
                        n_eu,
                        n_hyper,
                        q,
                    });
                }
            }
        }
    }

    let series = read_dataset(&input)?;
    let rows = sweep(&config, &series, &points)?;
    emit_sweep_report(&out, &rows)?;
    let best = rows[0].point;
    Ok(format!(
        "sweep: {} configurations ranked; best n=({},{},{}) q={}; table in {}",
        rows.len(),
        best.n_hypo,
        best.n_eu,
        best.n_hyper,
        best.q,
        out.display()
    ))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<String, Error> {
    let denominator = parse_rate_denominator(&args.rate_denominator)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("out"));

    let file =
        std::fs::File::open(&args.predictions).map_err(|e| Error::io(&args.predictions, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    {
        let headers = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            msg: format!("cannot read header: {e}"),
        })?;
        let expected = ["patient_id", "timestamp_min", "predicted", "reference"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {expected:?}, got {got:?}"),
            });
        }
    }

    let mut per_patient: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_field = |idx: usize, name: &str| -> Result<f64, Error> {
            record[idx].parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad {name} {:?}: {e}", &record[idx]),
            })
        };
        let t = parse_field(1, "timestamp_min")?;
        let predicted = parse_field(2, "predicted")?;
        let reference = parse_field(3, "reference")?;
        if !t.is_finite() || !predicted.is_finite() || !reference.is_finite() {
            return Err(Error::Data(format!("line {line}: non-finite value")));
        }
        per_patient
            .entry(record[0].to_string())
            .or_default()
            .push((t, predicted, reference));
    }

    let mut points: Vec<EvalPoint> = Vec::new();
    for (patient, mut rows) in per_patient {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Data(format!(
                    "patient {patient}: duplicate timestamp {}",
                    w[0].0
                )));
            }
        }
        let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let predicted: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let reference: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let pred_rates = central_rates(&predicted, &times, denominator)?;
        let ref_rates = central_rates(&reference, &times, denominator)?;
        for i in 0..rows.len() {
            points.push(EvalPoint {
                predicted: predicted[i],
                reference: reference[i],
                predicted_rate: pred_rates[i],
                reference_rate: ref_rates[i],
            });
        }
    }

    let grid = build_grid(&points, ZoneTables::embedded());
    write_text(&out.join("grid.csv"), &grid_csv(&grid))?;
    write_text(
        &out.join("summary.txt"),
        &text_table(&[("external".to_string(), &grid)]),
    )?;
    Ok(format!(
        "evaluate: {} points classified ({} excluded at endpoints); grid in {}",
        grid.total_points(),
        grid.hypo.n_excluded + grid.eu.n_excluded + grid.hyper.n_excluded,
        out.display()
    ))
}
