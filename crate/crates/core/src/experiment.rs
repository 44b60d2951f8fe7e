//! End-to-end experiment pipeline: per-trial patient split → windowing →
//! stratification → scaling → per-range kernel estimation → PRED-EGA, with
//! multi-trial averaging, cross-dataset runs, and parameter sweeps.
//!
//! Trials are independent and run in parallel; each derives its own seed from
//! the master seed via [`crate::seed::mix_seed`], so extending the trial
//! count reproduces earlier trials unchanged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_scaling, fit_scaling, make_windows, split_patients, stratify_training, GlucoseSeries,
    GlycemicRange, SampleWindow, ScalingParams, SplitSpec,
};
use crate::error::{Error, Result};
use crate::kernel::{Estimator, KernelParams, LabeledSample};
use crate::pred_ega::{
    average_grids, build_grid, central_rates, Averaging, EvalPoint, PredEgaGrid, RateDenominator,
    ZoneTables,
};
use crate::seed::mix_seed;

/// Fully-resolved experiment parameters. `q` has no default: the manifold
/// dimension is not derivable from the data and must be chosen by the user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub h: usize,
    pub c_percent: f64,
    pub trials: u32,
    pub n_hypo: u32,
    pub n_eu: u32,
    pub n_hyper: u32,
    pub alpha_hypo: f64,
    pub alpha_eu: f64,
    pub alpha_hyper: f64,
    pub q: u32,
    pub seed: u64,
    pub rate_denominator: RateDenominator,
    pub averaging: Averaging,
}

impl ExperimentConfig {
    /// Defaults: d = 7 (30-minute sampling horizon), h = 6 (30-minute
    /// prediction horizon), 50% training split, 100 trials, n = 5 per range,
    /// α = 1.
    pub fn with_q(q: u32) -> ExperimentConfig {
        ExperimentConfig {
            d: 7,
            h: 6,
            c_percent: 50.0,
            trials: 100,
            n_hypo: 5,
            n_eu: 5,
            n_hyper: 5,
            alpha_hypo: 1.0,
            alpha_eu: 1.0,
            alpha_hyper: 1.0,
            q,
            seed: 0,
            rate_denominator: RateDenominator::Paper,
            averaging: Averaging::Trials,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config(
                "d must be ≥ 2 (rate evaluation needs neighbors)".into(),
            ));
        }
        if self.h < 1 {
            return Err(Error::Config("h must be ≥ 1".into()));
        }
        if !(self.c_percent > 0.0 && self.c_percent < 100.0) {
            return Err(Error::Config(format!(
                "c_percent must lie in (0, 100), got {}",
                self.c_percent
            )));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        if self.q as usize > self.d {
            return Err(Error::Config(format!(
                "q = {} exceeds the window length d = {}",
                self.q, self.d
            )));
        }
        for (n, alpha) in [
            (self.n_hypo, self.alpha_hypo),
            (self.n_eu, self.alpha_eu),
            (self.n_hyper, self.alpha_hyper),
        ] {
            KernelParams::new(n, alpha, self.q)?;
        }
        Ok(())
    }

    fn params_for(&self, range: GlycemicRange) -> Result<KernelParams> {
        let (n, alpha) = match range {
            GlycemicRange::Hypo => (self.n_hypo, self.alpha_hypo),
            GlycemicRange::Eu => (self.n_eu, self.alpha_eu),
            GlycemicRange::Hyper => (self.n_hyper, self.alpha_hyper),
        };
        KernelParams::new(n, alpha, self.q)
    }
}

/// On-disk configuration: flat keys, TOML or JSON. Unknown keys are
/// rejected. All fields are optional so files and flag overrides merge.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub d: Option<usize>,
    pub h: Option<usize>,
    pub c_percent: Option<f64>,
    pub trials: Option<u32>,
    pub n_hypo: Option<u32>,
    pub n_eu: Option<u32>,
    pub n_hyper: Option<u32>,
    pub alpha_hypo: Option<f64>,
    pub alpha_eu: Option<f64>,
    pub alpha_hyper: Option<f64>,
    pub q: Option<u32>,
    pub seed: Option<u64>,
    pub rate_denominator: Option<RateDenominator>,
    pub averaging: Option<Averaging>,
    pub input: Option<PathBuf>,
    pub train_input: Option<PathBuf>,
    pub test_input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    /// Reads a TOML (`.toml`) or JSON (`.json`) config; other extensions are
    /// tried as TOML first, then JSON.
    pub fn from_path(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => {
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
            _ => toml::from_str(&text).or_else(|toml_err| {
                serde_json::from_str(&text).map_err(|json_err| {
                    Error::Config(format!(
                        "{}: not valid TOML ({toml_err}) nor JSON ({json_err})",
                        path.display()
                    ))
                })
            }),
        }
    }

    /// Overlays `other` on top of `self`: any key set in `other` wins.
    pub fn merged_with(mut self, other: ConfigFile) -> ConfigFile {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            d,
            h,
            c_percent,
            trials,
            n_hypo,
            n_eu,
            n_hyper,
            alpha_hypo,
            alpha_eu,
            alpha_hyper,
            q,
            seed,
            rate_denominator,
            averaging,
            input,
            train_input,
            test_input,
            output_dir
        );
        self
    }

    /// Resolves defaults and validates; `q` is required.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let q = self
            .q
            .ok_or_else(|| Error::Config("q (manifold dimension) is required".into()))?;
        let mut cfg = ExperimentConfig::with_q(q);
        if let Some(d) = self.d {
            cfg.d = d;
        }
        if let Some(h) = self.h {
            cfg.h = h;
        }
        if let Some(c) = self.c_percent {
            cfg.c_percent = c;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(n) = self.n_hypo {
            cfg.n_hypo = n;
        }
        if let Some(n) = self.n_eu {
            cfg.n_eu = n;
        }
        if let Some(n) = self.n_hyper {
            cfg.n_hyper = n;
        }
        if let Some(a) = self.alpha_hypo {
            cfg.alpha_hypo = a;
        }
        if let Some(a) = self.alpha_eu {
            cfg.alpha_eu = a;
        }
        if let Some(a) = self.alpha_hyper {
            cfg.alpha_hyper = a;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.rate_denominator {
            cfg.rate_denominator = r;
        }
        if let Some(a) = self.averaging {
            cfg.averaging = a;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Per-range training state: scaled samples and kernel parameters.
struct RangeSlot {
    samples: Vec<LabeledSample>,
    params: KernelParams,
}

/// Trained state of one trial: scaling constants plus the three stratified,
/// scaled training sets. Immutable after `train`; prediction is pure.
pub struct RangedModel {
    pub scaling: ScalingParams,
    slots: BTreeMap<GlycemicRange, RangeSlot>,
    pub train_counts: BTreeMap<GlycemicRange, usize>,
    pub train_excluded: usize,
    pub disabled_ranges: Vec<GlycemicRange>,
}

/// One test-window prediction, with the bookkeeping needed for rate
/// evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub patient_id: String,
    pub index: usize,
    pub base_time: f64,
    pub reference: f64,
    pub reference_time: f64,
    pub predicted: f64,
    pub routed: GlycemicRange,
    pub used: GlycemicRange,
}

/// Fits the ranged model: scaling constants over all training features,
/// targets stratified at 70/180/450 mg/dL, per-range kernel parameters from
/// the configuration. Empty ranges are disabled with a warning on stderr;
/// predictions routed there fall back to a neighboring range.
pub fn train(
    config: &ExperimentConfig,
    training_windows: Vec<SampleWindow>,
) -> Result<RangedModel> {
    config.validate()?;
    let scaling = fit_scaling(&training_windows)?;
    let sets = stratify_training(training_windows);

    let mut slots = BTreeMap::new();
    let mut train_counts = BTreeMap::new();
    let mut disabled = Vec::new();
    for range in GlycemicRange::ALL {
        let windows = sets.get(range);
        train_counts.insert(range, windows.len());
        if windows.is_empty() {
            disabled.push(range);
            continue;
        }
        let samples = windows
            .iter()
            .map(|w| {
                let scaled = apply_scaling(&scaling, w);
                debug_assert!(scaled.features.iter().all(|x| (-0.5..=0.5).contains(x)));
                LabeledSample::new(scaled.features, w.target)
            })
            .collect::<Result<Vec<_>>>()?;
        slots.insert(
            range,
            RangeSlot {
                samples,
                params: config.params_for(range)?,
            },
        );
    }
    if slots.is_empty() {
        return Err(Error::Data("no training windows in any range".into()));
    }
    for range in &disabled {
        eprintln!(
            "warning: training range {} is empty; routed predictions will fall back",
            range.label()
        );
    }
    Ok(RangedModel {
        scaling,
        slots,
        train_counts,
        train_excluded: sets.excluded,
        disabled_ranges: disabled,
    })
}

impl RangedModel {
    /// Range actually used for a window routed to `range`: the range itself
    /// when trained, otherwise hypo/hyper fall back to eu (then to the
    /// opposite extreme), and eu falls back to the larger neighbor.
    fn effective_range(&self, range: GlycemicRange) -> GlycemicRange {
        if self.slots.contains_key(&range) {
            return range;
        }
        let count = |r: GlycemicRange| self.train_counts.get(&r).copied().unwrap_or(0);
        let pick = |candidates: &[GlycemicRange]| {
            candidates
                .iter()
                .copied()
                .find(|r| self.slots.contains_key(r))
        };
        let fallback = match range {
            GlycemicRange::Hypo => pick(&[GlycemicRange::Eu, GlycemicRange::Hyper]),
            GlycemicRange::Hyper => pick(&[GlycemicRange::Eu, GlycemicRange::Hypo]),
            GlycemicRange::Eu => {
                if count(GlycemicRange::Hyper) >= count(GlycemicRange::Hypo) {
                    pick(&[GlycemicRange::Hyper, GlycemicRange::Hypo])
                } else {
                    pick(&[GlycemicRange::Hypo, GlycemicRange::Hyper])
                }
            }
        };
        fallback.expect("train() guarantees at least one non-empty range")
    }

    pub fn sample_count(&self) -> usize {
        self.slots.values().map(|s| s.samples.len()).sum()
    }
}

/// Predicts every test window: route by the BG at time t_j, scale the
/// features with the training constants, and evaluate that range's
/// estimator. Pure; window order is preserved.
pub fn predict(model: &RangedModel, test_windows: &[SampleWindow]) -> Result<Vec<Prediction>> {
    let mut estimators: BTreeMap<GlycemicRange, Estimator<'_>> = BTreeMap::new();
    for (range, slot) in &model.slots {
        estimators.insert(*range, Estimator::new(&slot.samples, slot.params)?);
    }
    test_windows
        .par_iter()
        .map(|w| {
            let routed = GlycemicRange::of_bg(w.last_feature());
            let used = model.effective_range(routed);
            let scaled = apply_scaling(&model.scaling, w);
            let predicted = estimators[&used].eval(&scaled.features)?;
            Ok(Prediction {
                patient_id: w.patient_id.clone(),
                index: w.index,
                base_time: w.base_time,
                reference: w.target,
                reference_time: w.target_time,
                predicted,
                routed,
                used,
            })
        })
        .collect()
}

/// Size bookkeeping for one trial.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrialCounts {
    pub n_train_windows: usize,
    pub n_test_windows: usize,
    pub train_hypo: usize,
    pub train_eu: usize,
    pub train_hyper: usize,
    pub train_excluded: usize,
    pub test_hypo: usize,
    pub test_eu: usize,
    pub test_hyper: usize,
    pub fallback_predictions: usize,
}

/// Wall-clock per phase; informational only, never serialized into reports.
#[derive(Debug, Clone, Default)]
pub struct PhaseTimings {
    pub train: Duration,
    pub predict: Duration,
    pub evaluate: Duration,
}

/// Outcome of one trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub grid: PredEgaGrid,
    pub split: SplitSpec,
    pub counts: TrialCounts,
    #[serde(skip)]
    pub timing: PhaseTimings,
}

fn check_unique_patients(series: &[GlucoseSeries]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for s in series {
        if !seen.insert(s.patient_id.as_str()) {
            return Err(Error::Data(format!(
                "patient id {} appears in more than one series",
                s.patient_id
            )));
        }
    }
    Ok(())
}

/// Pairs predictions with references and both central rates, forming rate
/// pairs only between consecutive window indices within one patient.
pub fn evaluate_predictions(
    predictions: &[Prediction],
    denominator: RateDenominator,
) -> Result<Vec<EvalPoint>> {
    let mut by_patient: BTreeMap<&str, Vec<&Prediction>> = BTreeMap::new();
    for p in predictions {
        by_patient.entry(&p.patient_id).or_default().push(p);
    }
    let mut points = Vec::with_capacity(predictions.len());
    for (_, mut preds) in by_patient {
        preds.sort_by_key(|p| p.index);
        let mut run_start = 0;
        for i in 0..=preds.len() {
            let contiguous =
                i < preds.len() && (i == run_start || preds[i].index == preds[i - 1].index + 1);
            if contiguous {
                continue;
            }
            let run = &preds[run_start..i];
            if !run.is_empty() {
                let predicted: Vec<f64> = run.iter().map(|p| p.predicted).collect();
                let reference: Vec<f64> = run.iter().map(|p| p.reference).collect();
                let times: Vec<f64> = run.iter().map(|p| p.base_time).collect();
                let pred_rates = central_rates(&predicted, &times, denominator)?;
                let ref_rates = central_rates(&reference, &times, denominator)?;
                for (k, p) in run.iter().enumerate() {
                    points.push(EvalPoint {
                        predicted: p.predicted,
                        reference: p.reference,
                        predicted_rate: pred_rates[k],
                        reference_rate: ref_rates[k],
                    });
                }
            }
            run_start = i;
        }
    }
    Ok(points)
}

/// Runs one complete trial with the given seed: split → window → stratify →
/// scale → train → predict → PRED-EGA.
pub fn run_trial(
    config: &ExperimentConfig,
    all_series: &[GlucoseSeries],
    trial_seed: u64,
) -> Result<TrialReport> {
    config.validate()?;
    check_unique_patients(all_series)?;
    let ids: Vec<String> = all_series.iter().map(|s| s.patient_id.clone()).collect();
    let split = split_patients(&ids, config.c_percent, trial_seed)?;

    let mut train_windows = Vec::new();
    let mut test_windows = Vec::new();
    for series in all_series {
        let windows = make_windows(series, config.d, config.h);
        if series.len() < config.d + config.h {
            eprintln!(
                "warning: series {} has {} readings, too short for d+h = {}; skipped",
                series.patient_id,
                series.len(),
                config.d + config.h
            );
        }
        if split.train_patients.contains(&series.patient_id) {
            train_windows.extend(windows);
        } else {
            test_windows.extend(windows);
        }
    }
    // No-leakage invariant.
    assert!(
        train_windows
            .iter()
            .all(|w| split.train_patients.contains(&w.patient_id))
            && test_windows
                .iter()
                .all(|w| split.test_patients.contains(&w.patient_id)),
        "train/test windows leaked across the patient split"
    );

    let mut counts = TrialCounts {
        n_train_windows: train_windows.len(),
        n_test_windows: test_windows.len(),
        ..TrialCounts::default()
    };

    let t0 = Instant::now();
    let model = train(config, train_windows)?;
    let t1 = Instant::now();
    counts.train_hypo = model.train_counts[&GlycemicRange::Hypo];
    counts.train_eu = model.train_counts[&GlycemicRange::Eu];
    counts.train_hyper = model.train_counts[&GlycemicRange::Hyper];
    counts.train_excluded = model.train_excluded;

    let predictions = predict(&model, &test_windows)?;
    let t2 = Instant::now();
    for p in &predictions {
        match p.routed {
            GlycemicRange::Hypo => counts.test_hypo += 1,
            GlycemicRange::Eu => counts.test_eu += 1,
            GlycemicRange::Hyper => counts.test_hyper += 1,
        }
        if p.used != p.routed {
            counts.fallback_predictions += 1;
        }
    }

    let points = evaluate_predictions(&predictions, config.rate_denominator)?;
    let grid = build_grid(&points, ZoneTables::embedded());
    let t3 = Instant::now();

    Ok(TrialReport {
        grid,
        split,
        counts,
        timing: PhaseTimings {
            train: t1 - t0,
            predict: t2 - t1,
            evaluate: t3 - t2,
        },
    })
}

/// Multi-trial result: the averaged grid plus every per-trial report.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub averaged: PredEgaGrid,
    pub trials: Vec<TrialReport>,
}

/// Runs `config.trials` independent trials in parallel (seeds derived from
/// the master seed) and averages the grids.
pub fn run_experiment(
    config: &ExperimentConfig,
    all_series: &[GlucoseSeries],
) -> Result<ExperimentReport> {
    config.validate()?;
    let trials: Vec<TrialReport> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, all_series, mix_seed(config.seed, t)))
        .collect::<Result<Vec<_>>>()?;
    let grids: Vec<PredEgaGrid> = trials.iter().map(|t| t.grid.clone()).collect();
    let averaged = average_grids(&grids, config.averaging)?;
    Ok(ExperimentReport { averaged, trials })
}

/// Cross-dataset result.
#[derive(Debug, Clone, Serialize)]
pub struct CrossReport {
    pub grid: PredEgaGrid,
    /// True when the two datasets share patient ids (in-sample evaluation).
    pub in_sample: bool,
    pub counts: TrialCounts,
}

/// Trains on every patient of `train_series` (no split) and evaluates on
/// every patient of `test_series`; scaling constants come from the training
/// data only. Shared patient ids are flagged, not rejected.
pub fn cross_dataset(
    config: &ExperimentConfig,
    train_series: &[GlucoseSeries],
    test_series: &[GlucoseSeries],
) -> Result<CrossReport> {
    config.validate()?;
    check_unique_patients(train_series)?;
    check_unique_patients(test_series)?;
    let train_ids: std::collections::BTreeSet<&str> =
        train_series.iter().map(|s| s.patient_id.as_str()).collect();
    let in_sample = test_series
        .iter()
        .any(|s| train_ids.contains(s.patient_id.as_str()));
    if in_sample {
        eprintln!("warning: train and test datasets share patient ids; evaluation is in-sample");
    }

    let train_windows: Vec<SampleWindow> = train_series
        .iter()
        .flat_map(|s| make_windows(s, config.d, config.h))
        .collect();
    let test_windows: Vec<SampleWindow> = test_series
        .iter()
        .flat_map(|s| make_windows(s, config.d, config.h))
        .collect();

    let mut counts = TrialCounts {
        n_train_windows: train_windows.len(),
        n_test_windows: test_windows.len(),
        ..TrialCounts::default()
    };
    let model = train(config, train_windows)?;
    counts.train_hypo = model.train_counts[&GlycemicRange::Hypo];
    counts.train_eu = model.train_counts[&GlycemicRange::Eu];
    counts.train_hyper = model.train_counts[&GlycemicRange::Hyper];
    counts.train_excluded = model.train_excluded;

    let predictions = predict(&model, &test_windows)?;
    for p in &predictions {
        match p.routed {
            GlycemicRange::Hypo => counts.test_hypo += 1,
            GlycemicRange::Eu => counts.test_eu += 1,
            GlycemicRange::Hyper => counts.test_hyper += 1,
        }
        if p.used != p.routed {
            counts.fallback_predictions += 1;
        }
    }
    let points = evaluate_predictions(&predictions, config.rate_denominator)?;
    let grid = build_grid(&points, ZoneTables::embedded());
    Ok(CrossReport {
        grid,
        in_sample,
        counts,
    })
}

/// One sweep coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepPoint {
    pub n_hypo: u32,
    pub n_eu: u32,
    pub n_hyper: u32,
    pub q: u32,
}

/// One sweep result row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub grid: PredEgaGrid,
}

/// Runs a full experiment per sweep point and ranks rows by the
/// hypoglycemia-Accurate percentage (the primary clinical criterion),
/// descending; ties break on the parameters for a stable order.
pub fn sweep(
    config: &ExperimentConfig,
    all_series: &[GlucoseSeries],
    points: &[SweepPoint],
) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(points.len());
    for &point in points {
        let mut cfg = config.clone();
        cfg.n_hypo = point.n_hypo;
        cfg.n_eu = point.n_eu;
        cfg.n_hyper = point.n_hyper;
        cfg.q = point.q;
        let report = run_experiment(&cfg, all_series)?;
        rows.push(SweepRow {
            point,
            grid: report.averaged,
        });
    }
    rows.sort_by(|a, b| {
        let key = |r: &SweepRow| r.grid.hypo.accurate_pct.unwrap_or(-1.0);
        key(b).total_cmp(&key(a)).then_with(|| {
            (a.point.n_hypo, a.point.n_eu, a.point.n_hyper, a.point.q).cmp(&(
                b.point.n_hypo,
                b.point.n_eu,
                b.point.n_hyper,
                b.point.q,
            ))
        })
    });
    Ok(rows)
}
