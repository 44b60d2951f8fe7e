//! Glucose time-series ingestion, sliding-window sample construction,
//! patient-level train/test splitting, glycemic-range stratification, and the
//! affine feature scaling.
//!
//! Input CSV schema (UTF-8, header required):
//! `patient_id,timestamp_min,glucose_mgdl` — timestamps are minutes as reals,
//! glucose in mg/dL. The synthetic generator emits the same schema.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix_seed;

/// Glucose validity bounds in mg/dL; readings outside are rejected.
pub const BG_MIN_EXCLUSIVE: f64 = 0.0;
pub const BG_MAX_INCLUSIVE: f64 = 500.0;

/// Glycemic range thresholds in mg/dL.
pub const HYPO_MAX: f64 = 70.0;
pub const EU_MAX: f64 = 180.0;
/// Targets above this bound are excluded from training.
pub const TRAIN_TARGET_MAX: f64 = 450.0;

/// The three clinical BG ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlycemicRange {
    Hypo,
    Eu,
    Hyper,
}

impl GlycemicRange {
    /// Range of a BG value by the 70/180 thresholds.
    pub fn of_bg(bg: f64) -> GlycemicRange {
        if bg <= HYPO_MAX {
            GlycemicRange::Hypo
        } else if bg <= EU_MAX {
            GlycemicRange::Eu
        } else {
            GlycemicRange::Hyper
        }
    }

    pub const ALL: [GlycemicRange; 3] =
        [GlycemicRange::Hypo, GlycemicRange::Eu, GlycemicRange::Hyper];

    pub fn label(&self) -> &'static str {
        match self {
            GlycemicRange::Hypo => "hypo",
            GlycemicRange::Eu => "eu",
            GlycemicRange::Hyper => "hyper",
        }
    }
}

/// One patient's timestamped BG readings, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct GlucoseSeries {
    pub patient_id: String,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
}

impl GlucoseSeries {
    pub fn new(patient_id: String, timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() || timestamps.len() != values.len() {
            return Err(Error::Data(format!(
                "series {patient_id}: need equal, non-zero numbers of timestamps and values"
            )));
        }
        for w in timestamps.windows(2) {
            // NaN timestamps fail this comparison too.
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Data(format!(
                    "series {patient_id}: timestamps must be strictly increasing (found {} after {})",
                    w[1], w[0]
                )));
            }
        }
        for &v in &values {
            if !v.is_finite() || v <= BG_MIN_EXCLUSIVE || v > BG_MAX_INCLUSIVE {
                return Err(Error::Data(format!(
                    "series {patient_id}: glucose {v} outside ({BG_MIN_EXCLUSIVE}, {BG_MAX_INCLUSIVE}] mg/dL"
                )));
            }
        }
        Ok(GlucoseSeries {
            patient_id,
            timestamps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A (features, target) pair: `features` holds the d readings up to time t_j,
/// `target` the reading at t_{j+h}. Indices are 1-based over the series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub patient_id: String,
    pub index: usize,
    pub base_time: f64,
    pub features: Vec<f64>,
    pub target: f64,
    pub target_time: f64,
}

impl SampleWindow {
    /// BG at time t_j — the last feature component, used to route test windows.
    pub fn last_feature(&self) -> f64 {
        *self.features.last().expect("features are non-empty")
    }
}

/// Affine scaling constants fit on training features only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub max_val: f64,
    pub min_val: f64,
}

impl ScalingParams {
    /// x ↦ (2x − (M+m)) / (2(M−m)), computed as (x−m)/(M−m) − 1/2 so the
    /// training extremes land on ±1/2 exactly; maps [m, M] onto [−1/2, 1/2].
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.min_val) / (self.max_val - self.min_val) - 0.5
    }

    /// Inverse of `scale`.
    pub fn unscale(&self, s: f64) -> f64 {
        (s + 0.5) * (self.max_val - self.min_val) + self.min_val
    }
}

/// A patient-level train/test split: C ∪ Q = all patients, C ∩ Q = ∅.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_patients: BTreeSet<String>,
    pub test_patients: BTreeSet<String>,
    pub percent: f64,
}

/// Training windows partitioned by target range; targets above 450 mg/dL are
/// excluded and counted.
#[derive(Debug, Clone, Default)]
pub struct RangedTrainingSets {
    pub hypo: Vec<SampleWindow>,
    pub eu: Vec<SampleWindow>,
    pub hyper: Vec<SampleWindow>,
    pub excluded: usize,
}

impl RangedTrainingSets {
    pub fn get(&self, range: GlycemicRange) -> &[SampleWindow] {
        match range {
            GlycemicRange::Hypo => &self.hypo,
            GlycemicRange::Eu => &self.eu,
            GlycemicRange::Hyper => &self.hyper,
        }
    }
}

/// Parses the CSV schema into one series per patient, rows sorted by
/// timestamp. Duplicate (patient, timestamp) pairs are rejected.
pub fn load_series<R: Read>(source: R) -> Result<Vec<GlucoseSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    {
        let headers = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            msg: format!("cannot read header: {e}"),
        })?;
        let expected = ["patient_id", "timestamp_min", "glucose_mgdl"];
        let got: Vec<&str> = headers.iter().collect();
        if !got.is_empty() && got != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {expected:?}, got {got:?}"),
            });
        }
    }

    let mut per_patient: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let patient = record[0].to_string();
        if patient.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty patient_id".into(),
            });
        }
        let t: f64 = record[1].parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp_min {:?}: {e}", &record[1]),
        })?;
        let v: f64 = record[2].parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad glucose_mgdl {:?}: {e}", &record[2]),
        })?;
        if !t.is_finite() {
            return Err(Error::Parse {
                line,
                msg: format!("timestamp {t} is not finite"),
            });
        }
        if !v.is_finite() || v <= BG_MIN_EXCLUSIVE || v > BG_MAX_INCLUSIVE {
            return Err(Error::Data(format!(
                "line {line}: glucose {v} outside ({BG_MIN_EXCLUSIVE}, {BG_MAX_INCLUSIVE}] mg/dL"
            )));
        }
        per_patient.entry(patient).or_default().push((t, v));
    }

    let mut out = Vec::with_capacity(per_patient.len());
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
        let (timestamps, values) = rows.into_iter().unzip();
        out.push(GlucoseSeries::new(patient, timestamps, values)?);
    }
    Ok(out)
}

/// Builds sliding windows for j = d..=N−h (1-based): features are the d
/// readings ending at t_j, the target is the reading at t_{j+h}.
///
/// Windows whose feature block contains an inter-sample gap above twice the
/// series' median gap are discarded (irregular sampling guard); series
/// shorter than d+h yield an empty list.
pub fn make_windows(series: &GlucoseSeries, d: usize, h: usize) -> Vec<SampleWindow> {
    assert!(d >= 1 && h >= 1, "window length and horizon must be ≥ 1");
    let n = series.len();
    if n < d + h {
        return Vec::new();
    }

    let max_gap = median_gap(&series.timestamps).map(|g| 2.0 * g);

    let mut out = Vec::with_capacity(n - d - h + 1);
    // 1-based j; 0-based feature slice is (j-d)..j, target at j+h-1.
    for j in d..=(n - h) {
        let feat_range = (j - d)..j;
        if let Some(limit) = max_gap {
            let gaps_ok = series.timestamps[feat_range.clone()]
                .windows(2)
                .all(|w| w[1] - w[0] <= limit);
            if !gaps_ok {
                continue;
            }
        }
        out.push(SampleWindow {
            patient_id: series.patient_id.clone(),
            index: j,
            base_time: series.timestamps[j - 1],
            features: series.values[feat_range].to_vec(),
            target: series.values[j + h - 1],
            target_time: series.timestamps[j + h - 1],
        });
    }
    out
}

fn median_gap(timestamps: &[f64]) -> Option<f64> {
    if timestamps.len() < 2 {
        return None;
    }
    let mut gaps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    Some(gaps[gaps.len() / 2])
}

/// Selects round(c% · |P|) patients (half-up) uniformly at random as the
/// training set C; the rest form Q. Deterministic given the seed.
pub fn split_patients(patient_ids: &[String], c: f64, rng_seed: u64) -> Result<SplitSpec> {
    if !(c > 0.0 && c < 100.0) {
        return Err(Error::Config(format!(
            "training percent must lie in (0, 100), got {c}"
        )));
    }
    let unique: BTreeSet<&String> = patient_ids.iter().collect();
    if unique.len() < 2 {
        return Err(Error::Config(
            "need at least 2 distinct patients to split".into(),
        ));
    }
    let mut ids: Vec<String> = unique.into_iter().cloned().collect();
    let k = (c * ids.len() as f64 / 100.0 + 0.5).floor() as usize;
    if k == 0 || k == ids.len() {
        return Err(Error::Config(format!(
            "split of {c}% over {} patients leaves an empty side",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    ids.shuffle(&mut rng);
    let train_patients: BTreeSet<String> = ids[..k].iter().cloned().collect();
    let test_patients: BTreeSet<String> = ids[k..].iter().cloned().collect();
    Ok(SplitSpec {
        train_patients,
        test_patients,
        percent: c,
    })
}

/// Partitions training windows by target: hypo iff y ≤ 70, eu iff
/// 70 < y ≤ 180, hyper iff 180 < y ≤ 450; targets above 450 are excluded
/// and counted.
pub fn stratify_training(windows: Vec<SampleWindow>) -> RangedTrainingSets {
    let mut sets = RangedTrainingSets::default();
    for w in windows {
        if w.target > TRAIN_TARGET_MAX {
            sets.excluded += 1;
        } else {
            match GlycemicRange::of_bg(w.target) {
                GlycemicRange::Hypo => sets.hypo.push(w),
                GlycemicRange::Eu => sets.eu.push(w),
                GlycemicRange::Hyper => sets.hyper.push(w),
            }
        }
    }
    sets
}

/// Partitions test windows by the BG at time t_j (the last feature
/// component), the best measurement available at prediction time. Values
/// above 450 route to the hyperglycemic set.
pub fn stratify_test(
    windows: Vec<SampleWindow>,
) -> (Vec<SampleWindow>, Vec<SampleWindow>, Vec<SampleWindow>) {
    let mut hypo = Vec::new();
    let mut eu = Vec::new();
    let mut hyper = Vec::new();
    for w in windows {
        match GlycemicRange::of_bg(w.last_feature()) {
            GlycemicRange::Hypo => hypo.push(w),
            GlycemicRange::Eu => eu.push(w),
            GlycemicRange::Hyper => hyper.push(w),
        }
    }
    (hypo, eu, hyper)
}

/// Fits M = max and m = min over all feature components of the training
/// windows.
pub fn fit_scaling(training_windows: &[SampleWindow]) -> Result<ScalingParams> {
    if training_windows.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit scaling on zero windows".into(),
        ));
    }
    let mut max_val = f64::NEG_INFINITY;
    let mut min_val = f64::INFINITY;
    for w in training_windows {
        for &x in &w.features {
            max_val = max_val.max(x);
            min_val = min_val.min(x);
        }
    }
    if max_val == min_val {
        return Err(Error::Degenerate(format!(
            "all training feature components equal {max_val} mg/dL"
        )));
    }
    Ok(ScalingParams { max_val, min_val })
}

/// Applies the affine map to every feature component; the target is left in
/// mg/dL. Test components outside [m, M] map outside [−1/2, 1/2], which is
/// allowed — the estimator is defined on all of ℝ^d.
pub fn apply_scaling(params: &ScalingParams, window: &SampleWindow) -> SampleWindow {
    let mut out = window.clone();
    for x in &mut out.features {
        *x = params.scale(*x);
    }
    out
}

/// Deterministic synthetic CGM-like series: slow sinusoids plus alternating
/// meal spikes and hypoglycemic dips, with bounded noise, on a 5-minute grid,
/// clipped to [40, 400] mg/dL.
///
/// Spikes and dips alternate on one timeline with gaps of 2–3.3 hours, so
/// they never cancel each other; any series of six hours or more visits all
/// three glycemic ranges.
pub fn synth_series(seed: u64, n_patients: usize, length: usize) -> Vec<GlucoseSeries> {
    assert!(n_patients >= 1 && length >= 1, "arguments must be positive");
    let mut out = Vec::with_capacity(n_patients);
    for p in 0..n_patients {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, p as u64));
        let phase1 = rng.gen_range(0.0..std::f64::consts::TAU);
        let phase2 = rng.gen_range(0.0..std::f64::consts::TAU);

        // (center, target level, width); excursions pull the value toward
        // the target with a Gaussian profile.
        let horizon = 5.0 * length as f64;
        let mut spikes: Vec<(f64, f64, f64)> = Vec::new();
        let mut dips: Vec<(f64, f64, f64)> = Vec::new();
        let mut t_event = rng.gen_range(60.0..120.0);
        let mut is_dip = false;
        while t_event < horizon {
            if is_dip {
                dips.push((
                    t_event,
                    rng.gen_range(48.0..62.0),
                    rng.gen_range(18.0..30.0),
                ));
            } else {
                spikes.push((
                    t_event,
                    rng.gen_range(220.0..320.0),
                    rng.gen_range(22.0..35.0),
                ));
            }
            is_dip = !is_dip;
            t_event += rng.gen_range(120.0..200.0);
        }

        let mut timestamps = Vec::with_capacity(length);
        let mut values = Vec::with_capacity(length);
        for i in 0..length {
            let t = 5.0 * i as f64;
            let mut v = 125.0
                + 35.0 * (std::f64::consts::TAU * t / 360.0 + phase1).sin()
                + 15.0 * (std::f64::consts::TAU * t / 150.0 + phase2).sin();
            for &(c, target, w) in &spikes {
                let weight = (-(t - c) * (t - c) / (2.0 * w * w)).exp();
                v += weight * (target - v);
            }
            for &(c, target, w) in &dips {
                let weight = (-(t - c) * (t - c) / (2.0 * w * w)).exp();
                v += weight * (target - v);
            }
            v += rng.gen_range(-4.0..4.0);
            timestamps.push(t);
            values.push(v.clamp(40.0, 400.0));
        }
        out.push(GlucoseSeries {
            patient_id: format!("synth-{p:03}"),
            timestamps,
            values,
        });
    }
    out
}

/// Serializes series to the canonical CSV schema.
pub fn series_to_csv(series: &[GlucoseSeries]) -> String {
    let mut out = String::from("patient_id,timestamp_min,glucose_mgdl\n");
    for s in series {
        for (t, v) in s.timestamps.iter().zip(&s.values) {
            out.push_str(&format!("{},{},{}\n", s.patient_id, t, v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> GlucoseSeries {
        GlucoseSeries::new(
            "p1".into(),
            (0..n).map(|i| 5.0 * i as f64).collect(),
            (0..n).map(|i| 100.0 + i as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn load_groups_and_sorts() {
        let csv = "patient_id,timestamp_min,glucose_mgdl\n\
                   a,10,120\n\
                   b,0,90\n\
                   a,0,100\n\
                   a,5,110\n";
        let all = load_series(csv.as_bytes()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].patient_id, "a");
        assert_eq!(all[0].values, vec![100.0, 110.0, 120.0]);
        assert_eq!(all[1].patient_id, "b");
    }

    #[test]
    fn load_empty_file_gives_empty_list() {
        assert!(load_series(&b""[..]).unwrap().is_empty());
        let only_header = "patient_id,timestamp_min,glucose_mgdl\n";
        assert!(load_series(only_header.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn load_rejects_out_of_range_glucose() {
        let csv = "patient_id,timestamp_min,glucose_mgdl\na,0,600\n";
        assert!(matches!(load_series(csv.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn load_rejects_malformed_row_with_line_number() {
        let csv = "patient_id,timestamp_min,glucose_mgdl\na,0,100\na,xyz,100\n";
        match load_series(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_timestamps() {
        let csv = "patient_id,timestamp_min,glucose_mgdl\na,0,100\na,0,110\n";
        assert!(matches!(load_series(csv.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn load_25_patients_total_5542() {
        let mut csv = String::from("patient_id,timestamp_min,glucose_mgdl\n");
        // 25 series with lengths summing to 5542 (17 of 222, 8 of 221).
        let mut total = 0;
        for p in 0..25 {
            let len = if p < 17 { 222 } else { 221 };
            total += len;
            for i in 0..len {
                csv.push_str(&format!("p{p:02},{},{}\n", 5 * i, 100 + (i % 50)));
            }
        }
        assert_eq!(total, 5542);
        let all = load_series(csv.as_bytes()).unwrap();
        assert_eq!(all.len(), 25);
        assert_eq!(all.iter().map(|s| s.len()).sum::<usize>(), 5542);
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(&series(20), 7, 6).len(), 8);
        assert_eq!(make_windows(&series(13), 7, 6).len(), 1);
        assert_eq!(make_windows(&series(12), 7, 6).len(), 0);
    }

    #[test]
    fn window_contents_line_up_with_series() {
        let s = series(20);
        for w in make_windows(&s, 7, 6) {
            assert_eq!(w.features.len(), 7);
            assert_eq!(w.last_feature(), s.values[w.index - 1]);
            assert_eq!(w.target, s.values[w.index + 6 - 1]);
            assert_eq!(w.base_time, s.timestamps[w.index - 1]);
            assert_eq!(w.target_time, s.timestamps[w.index + 6 - 1]);
        }
    }

    #[test]
    fn windows_spanning_large_gaps_are_discarded() {
        // 5-minute grid with one 60-minute hole in the middle.
        let mut ts: Vec<f64> = (0..10).map(|i| 5.0 * i as f64).collect();
        for t in ts.iter_mut().skip(5) {
            *t += 60.0;
        }
        let s = GlucoseSeries::new("g".into(), ts, vec![100.0; 10]).unwrap();
        let windows = make_windows(&s, 3, 1);
        // Feature blocks covering the hole (ending at j = 5, 6, 7) are gone.
        let kept: Vec<usize> = windows.iter().map(|w| w.index).collect();
        assert_eq!(kept, vec![3, 4, 5, 8, 9]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ids: Vec<String> = (0..25).map(|i| format!("p{i}")).collect();
        let s = split_patients(&ids, 50.0, 7).unwrap();
        assert_eq!(s.train_patients.len(), 13); // round(12.5) half-up
        assert_eq!(s.test_patients.len(), 12);
        assert_eq!(split_patients(&ids, 50.0, 7).unwrap(), s);

        let s30 = split_patients(&ids, 30.0, 7).unwrap();
        assert_eq!(s30.train_patients.len(), 8); // round(7.5) half-up

        assert!(s.train_patients.is_disjoint(&s.test_patients));
        let union: BTreeSet<_> = s.train_patients.union(&s.test_patients).cloned().collect();
        assert_eq!(union.len(), 25);
    }

    #[test]
    fn split_rejects_degenerate_requests() {
        let ids: Vec<String> = (0..2).map(|i| format!("p{i}")).collect();
        assert!(split_patients(&ids, 0.0, 1).is_err());
        assert!(split_patients(&ids, 100.0, 1).is_err());
        assert!(split_patients(&ids[..1], 50.0, 1).is_err());
        // 10% of 2 patients rounds to 0 → empty training side.
        assert!(split_patients(&ids, 10.0, 1).is_err());
    }

    fn window_with(target: f64, last: f64) -> SampleWindow {
        SampleWindow {
            patient_id: "p".into(),
            index: 7,
            base_time: 30.0,
            features: vec![100.0, 100.0, 100.0, 100.0, 100.0, 100.0, last],
            target,
            target_time: 60.0,
        }
    }

    #[test]
    fn training_stratification_thresholds() {
        let sets = stratify_training(vec![
            window_with(70.0, 100.0),
            window_with(70.0001, 100.0),
            window_with(180.0, 100.0),
            window_with(181.0, 100.0),
            window_with(451.0, 100.0),
        ]);
        assert_eq!(sets.hypo.len(), 1);
        assert_eq!(sets.eu.len(), 2);
        assert_eq!(sets.hyper.len(), 1);
        assert_eq!(sets.excluded, 1);
    }

    #[test]
    fn test_stratification_by_last_feature() {
        let (o, e, r) = stratify_test(vec![
            window_with(100.0, 65.0),
            window_with(100.0, 100.0),
            window_with(100.0, 200.0),
            window_with(100.0, 470.0), // above 450 routes to hyper
        ]);
        assert_eq!(o.len(), 1);
        assert_eq!(e.len(), 1);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn scaling_endpoints_and_outliers() {
        let p = ScalingParams {
            max_val: 356.0,
            min_val: 40.0,
        };
        assert_eq!(p.scale(356.0), 0.5);
        assert_eq!(p.scale(40.0), -0.5);
        assert_eq!(p.scale((356.0 + 40.0) / 2.0), 0.0);
        let out = p.scale(400.0);
        assert!((out - (800.0 - 396.0) / 632.0).abs() < 1e-15);
        assert!(out > 0.5);
    }

    #[test]
    fn fit_scaling_bounds_and_errors() {
        let w1 = window_with(100.0, 120.0); // features contain 100s and 120
        let mut w2 = window_with(100.0, 80.0);
        w2.features[0] = 80.0;
        let p = fit_scaling(&[w1, w2]).unwrap();
        assert_eq!(p.max_val, 120.0);
        assert_eq!(p.min_val, 80.0);

        let constant = SampleWindow {
            patient_id: "p".into(),
            index: 7,
            base_time: 0.0,
            features: vec![90.0; 7],
            target: 100.0,
            target_time: 30.0,
        };
        assert!(matches!(
            fit_scaling(&[constant]),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_scaling(&[]).is_err());
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let a = synth_series(9, 10, 240);
        let b = synth_series(9, 10, 240);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        for s in &a {
            assert_eq!(s.len(), 240);
            assert!(s.values.iter().all(|&v| (40.0..=400.0).contains(&v)));
        }
    }

    #[test]
    fn synth_covers_all_ranges() {
        for s in synth_series(3, 10, 240) {
            let mut seen = BTreeSet::new();
            for &v in &s.values {
                seen.insert(GlycemicRange::of_bg(v));
            }
            assert_eq!(seen.len(), 3, "patient {} misses a range", s.patient_id);
        }
    }

    #[test]
    fn synth_round_trips_through_csv() {
        let a = synth_series(1, 3, 50);
        let loaded = load_series(series_to_csv(&a).as_bytes()).unwrap();
        assert_eq!(a, loaded);
    }
}
