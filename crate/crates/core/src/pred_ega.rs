//! Prediction error-grid analysis: central rate-of-change comparison,
//! point-error and rate-error zoning, range-stratified classification into
//! Accurate / Benign / Erroneous, and grid aggregation.
//!
//! The clinical zone boundaries are not algorithmic constants of this crate;
//! they ship as a versioned, human-readable data file
//! (`data/pred_ega_zones.json`, embedded at compile time) with per-rule
//! source annotations, and can be replaced at runtime via
//! [`ZoneTables::from_json`]. Rules are evaluated in order, first match wins;
//! the loader verifies that the rule lists end with a catch-all and that the
//! combination matrices are total.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::GlycemicRange;
use crate::error::{Error, Result};

/// Error-grid zone labels shared by the point and rate grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    #[serde(rename = "uC")]
    UpperC,
    #[serde(rename = "lC")]
    LowerC,
    #[serde(rename = "uD")]
    UpperD,
    #[serde(rename = "lD")]
    LowerD,
    #[serde(rename = "uE")]
    UpperE,
    #[serde(rename = "lE")]
    LowerE,
}

impl Zone {
    pub const ALL: [Zone; 8] = [
        Zone::A,
        Zone::B,
        Zone::UpperC,
        Zone::LowerC,
        Zone::UpperD,
        Zone::LowerD,
        Zone::UpperE,
        Zone::LowerE,
    ];

    /// True for uE and lE, the rise/fall confusion zones.
    pub fn is_e_family(&self) -> bool {
        matches!(self, Zone::UpperE | Zone::LowerE)
    }
}

/// Clinical outcome categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Accurate,
    Benign,
    Erroneous,
}

/// Which denominator the rate of change uses. `Paper` divides the central
/// difference by twice the full span, exactly as the source formula prints
/// it; `Central` is the textbook central difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateDenominator {
    #[default]
    Paper,
    Central,
}

/// How multi-trial grids are combined: equal weight per trial, or pooling
/// all classified points before taking percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Trials,
    Pooled,
}

/// One prediction paired with its reference value and the two rates of
/// change. Rates are absent exactly at sequence endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub predicted: f64,
    pub reference: f64,
    pub predicted_rate: Option<f64>,
    pub reference_rate: Option<f64>,
}

// ---------------------------------------------------------------------------
// Zone rule engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Var {
    Pred,
    Ref,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
}

/// One linear inequality: `value(on) OP ref_coef·ref + const + upper·ΔU + lower·ΔL`.
#[derive(Debug, Clone, Deserialize)]
struct Atom {
    on: Var,
    op: Op,
    #[serde(default)]
    ref_coef: f64,
    #[serde(default, rename = "const")]
    constant: f64,
    #[serde(default)]
    upper: f64,
    #[serde(default)]
    lower: f64,
}

impl Atom {
    fn holds(&self, pred: f64, reference: f64, du: f64, dl: f64) -> bool {
        let lhs = match self.on {
            Var::Pred => pred,
            Var::Ref => reference,
        };
        let rhs = self.ref_coef * reference + self.constant + self.upper * du + self.lower * dl;
        match self.op {
            Op::Lt => lhs < rhs,
            Op::Le => lhs <= rhs,
            Op::Gt => lhs > rhs,
            Op::Ge => lhs >= rhs,
        }
    }
}

/// Ordered rule: a disjunction of conjunctions of atoms.
#[derive(Debug, Clone, Deserialize)]
struct Rule {
    zone: Zone,
    #[allow(dead_code)]
    source: String,
    any: Vec<Vec<Atom>>,
}

impl Rule {
    fn matches(&self, pred: f64, reference: f64, du: f64, dl: f64) -> bool {
        self.any
            .iter()
            .any(|conj| conj.iter().all(|a| a.holds(pred, reference, du, dl)))
    }
}

#[derive(Debug, Clone, Deserialize)]
struct UpperStep {
    #[serde(default)]
    if_rate_lt: Option<f64>,
    #[serde(default)]
    if_rate_le: Option<f64>,
    expand: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct LowerStep {
    #[serde(default)]
    if_rate_gt: Option<f64>,
    #[serde(default)]
    if_rate_ge: Option<f64>,
    expand: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct RateAdjustments {
    #[serde(default, rename = "comment")]
    _comment: Option<String>,
    upper: Vec<UpperStep>,
    lower: Vec<LowerStep>,
}

impl RateAdjustments {
    fn expansions(&self, reference_rate: f64) -> (f64, f64) {
        let mut du = 0.0;
        for step in &self.upper {
            let hit = match (step.if_rate_lt, step.if_rate_le) {
                (Some(b), _) => reference_rate < b,
                (None, Some(b)) => reference_rate <= b,
                (None, None) => false,
            };
            if hit {
                du = step.expand;
                break;
            }
        }
        let mut dl = 0.0;
        for step in &self.lower {
            let hit = match (step.if_rate_gt, step.if_rate_ge) {
                (Some(b), _) => reference_rate > b,
                (None, Some(b)) => reference_rate >= b,
                (None, None) => false,
            };
            if hit {
                dl = step.expand;
                break;
            }
        }
        (du, dl)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct CombinationFile {
    #[serde(default, rename = "comment")]
    _comment: Option<String>,
    hypo: BTreeMap<Zone, BTreeMap<Zone, Category>>,
    eu: BTreeMap<Zone, BTreeMap<Zone, Category>>,
    hyper: BTreeMap<Zone, BTreeMap<Zone, Category>>,
}

#[derive(Debug, Clone, Deserialize)]
struct ZoneFile {
    version: String,
    #[allow(dead_code)]
    source: String,
    rate_adjustments: RateAdjustments,
    point_rules: Vec<Rule>,
    rate_rules: Vec<Rule>,
    combination: CombinationFile,
}

/// The embedded transcription of the clinical zone tables.
pub const EMBEDDED_ZONES_JSON: &str = include_str!("../data/pred_ega_zones.json");

/// Loaded zone tables: point rules, rate rules, and the three combination
/// matrices. Immutable after load; classification is pure.
#[derive(Debug, Clone)]
pub struct ZoneTables {
    file: ZoneFile,
}

impl ZoneTables {
    /// The tables shipped with the crate.
    pub fn embedded() -> &'static ZoneTables {
        static TABLES: OnceLock<ZoneTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            ZoneTables::from_json(EMBEDDED_ZONES_JSON).expect("embedded zone tables are valid")
        })
    }

    /// Parses and validates a zone-table file: both rule lists must end in a
    /// catch-all rule and every (point zone, rate zone) pair must map to a
    /// category in each range matrix.
    pub fn from_json(text: &str) -> Result<ZoneTables> {
        let file: ZoneFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("zone tables: {e}")))?;
        for (name, rules) in [
            ("point_rules", &file.point_rules),
            ("rate_rules", &file.rate_rules),
        ] {
            let last = rules
                .last()
                .ok_or_else(|| Error::Data(format!("zone tables: {name} is empty")))?;
            if !last.any.iter().any(|conj| conj.is_empty()) {
                return Err(Error::Data(format!(
                    "zone tables: {name} must end with a catch-all rule"
                )));
            }
        }
        for (range, matrix) in [
            ("hypo", &file.combination.hypo),
            ("eu", &file.combination.eu),
            ("hyper", &file.combination.hyper),
        ] {
            for p in Zone::ALL {
                let row = matrix.get(&p).ok_or_else(|| {
                    Error::Data(format!(
                        "zone tables: {range} matrix misses point row {p:?}"
                    ))
                })?;
                for r in Zone::ALL {
                    if !row.contains_key(&r) {
                        return Err(Error::Data(format!(
                            "zone tables: {range} matrix misses cell ({p:?}, {r:?})"
                        )));
                    }
                }
            }
        }
        Ok(ZoneTables { file })
    }

    pub fn version(&self) -> &str {
        &self.file.version
    }

    /// Point-error zone of (predicted, reference), with boundaries expanded
    /// according to the reference rate of change.
    pub fn point_zone(&self, predicted: f64, reference: f64, reference_rate: f64) -> Zone {
        let (du, dl) = self.file.rate_adjustments.expansions(reference_rate);
        lookup(&self.file.point_rules, predicted, reference, du, dl)
    }

    /// Rate-error zone of (predicted_rate, reference_rate).
    pub fn rate_zone(&self, predicted_rate: f64, reference_rate: f64) -> Zone {
        lookup(
            &self.file.rate_rules,
            predicted_rate,
            reference_rate,
            0.0,
            0.0,
        )
    }

    /// Combination matrix lookup for the reference's glycemic range.
    pub fn classify(&self, point_z: Zone, rate_z: Zone, reference: f64) -> Category {
        let matrix = match GlycemicRange::of_bg(reference) {
            GlycemicRange::Hypo => &self.file.combination.hypo,
            GlycemicRange::Eu => &self.file.combination.eu,
            GlycemicRange::Hyper => &self.file.combination.hyper,
        };
        matrix[&point_z][&rate_z]
    }

    /// Full classification of one evaluation point; `None` when either rate
    /// is absent.
    pub fn classify_point(&self, point: &EvalPoint) -> Option<Category> {
        let pr = point.predicted_rate?;
        let rr = point.reference_rate?;
        let pz = self.point_zone(point.predicted, point.reference, rr);
        let rz = self.rate_zone(pr, rr);
        Some(self.classify(pz, rz, point.reference))
    }
}

fn lookup(rules: &[Rule], pred: f64, reference: f64, du: f64, dl: f64) -> Zone {
    for rule in rules {
        if rule.matches(pred, reference, du, dl) {
            return rule.zone;
        }
    }
    // Unreachable: the loader guarantees a catch-all.
    Zone::B
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

/// Central rates of change: at interior position j the rate is
/// (v_{j+1} − v_{j−1}) / (2·(t_{j+1} − t_{j−1})) for the `Paper` denominator,
/// or divided by (t_{j+1} − t_{j−1}) for `Central`. Endpoints are absent.
pub fn central_rates(
    values: &[f64],
    timestamps: &[f64],
    denominator: RateDenominator,
) -> Result<Vec<Option<f64>>> {
    if values.len() != timestamps.len() {
        return Err(Error::InvalidInput(format!(
            "values ({}) and timestamps ({}) differ in length",
            values.len(),
            timestamps.len()
        )));
    }
    let n = values.len();
    let mut out = vec![None; n];
    for j in 1..n.saturating_sub(1) {
        let span = timestamps[j + 1] - timestamps[j - 1];
        if span == 0.0 {
            return Err(Error::Data(format!(
                "zero time span around position {j}: t[{}] == t[{}]",
                j + 1,
                j - 1
            )));
        }
        let denom = match denominator {
            RateDenominator::Paper => 2.0 * span,
            RateDenominator::Central => span,
        };
        out[j] = Some((values[j + 1] - values[j - 1]) / denom);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Tally and percentages for one reference range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub n_points: u64,
    pub n_excluded: u64,
    pub n_accurate: u64,
    pub n_benign: u64,
    pub n_erroneous: u64,
    pub accurate_pct: Option<f64>,
    pub benign_pct: Option<f64>,
    pub erroneous_pct: Option<f64>,
}

impl RangeStats {
    fn finalize_from_counts(&mut self) {
        if self.n_points > 0 {
            let n = self.n_points as f64;
            self.accurate_pct = Some(100.0 * self.n_accurate as f64 / n);
            self.benign_pct = Some(100.0 * self.n_benign as f64 / n);
            self.erroneous_pct = Some(100.0 * self.n_erroneous as f64 / n);
        } else {
            self.accurate_pct = None;
            self.benign_pct = None;
            self.erroneous_pct = None;
        }
    }
}

/// The 3×3 PRED-EGA result: per reference range, percentages of Accurate,
/// Benign, and Erroneous predictions (absent for empty ranges), plus counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredEgaGrid {
    pub hypo: RangeStats,
    pub eu: RangeStats,
    pub hyper: RangeStats,
}

impl PredEgaGrid {
    pub fn range(&self, range: GlycemicRange) -> &RangeStats {
        match range {
            GlycemicRange::Hypo => &self.hypo,
            GlycemicRange::Eu => &self.eu,
            GlycemicRange::Hyper => &self.hyper,
        }
    }

    fn range_mut(&mut self, range: GlycemicRange) -> &mut RangeStats {
        match range {
            GlycemicRange::Hypo => &mut self.hypo,
            GlycemicRange::Eu => &mut self.eu,
            GlycemicRange::Hyper => &mut self.hyper,
        }
    }

    /// Total classified points across ranges.
    pub fn total_points(&self) -> u64 {
        self.hypo.n_points + self.eu.n_points + self.hyper.n_points
    }
}

/// Classifies and tallies evaluation points per reference range. Points
/// lacking either rate are excluded from classification and counted against
/// their reference range.
pub fn build_grid(points: &[EvalPoint], tables: &ZoneTables) -> PredEgaGrid {
    let mut grid = PredEgaGrid::default();
    for p in points {
        let stats = grid.range_mut(GlycemicRange::of_bg(p.reference));
        match tables.classify_point(p) {
            None => stats.n_excluded += 1,
            Some(cat) => {
                stats.n_points += 1;
                match cat {
                    Category::Accurate => stats.n_accurate += 1,
                    Category::Benign => stats.n_benign += 1,
                    Category::Erroneous => stats.n_erroneous += 1,
                }
            }
        }
    }
    for r in GlycemicRange::ALL {
        grid.range_mut(r).finalize_from_counts();
    }
    grid
}

/// Combines per-trial grids. `Trials` averages percentages with equal trial
/// weight, skipping trials whose range is empty; `Pooled` sums counts across
/// trials and recomputes percentages. Counts are summed in both modes.
pub fn average_grids(grids: &[PredEgaGrid], mode: Averaging) -> Result<PredEgaGrid> {
    if grids.is_empty() {
        return Err(Error::InvalidInput("no grids to average".into()));
    }
    let mut out = PredEgaGrid::default();
    for range in GlycemicRange::ALL {
        let cell = out.range_mut(range);
        for g in grids {
            let s = g.range(range);
            cell.n_points += s.n_points;
            cell.n_excluded += s.n_excluded;
            cell.n_accurate += s.n_accurate;
            cell.n_benign += s.n_benign;
            cell.n_erroneous += s.n_erroneous;
        }
        match mode {
            Averaging::Pooled => cell.finalize_from_counts(),
            Averaging::Trials => {
                let occupied: Vec<&RangeStats> = grids
                    .iter()
                    .map(|g| g.range(range))
                    .filter(|s| s.n_points > 0)
                    .collect();
                if occupied.is_empty() {
                    cell.accurate_pct = None;
                    cell.benign_pct = None;
                    cell.erroneous_pct = None;
                } else {
                    let n = occupied.len() as f64;
                    cell.accurate_pct =
                        Some(occupied.iter().filter_map(|s| s.accurate_pct).sum::<f64>() / n);
                    cell.benign_pct =
                        Some(occupied.iter().filter_map(|s| s.benign_pct).sum::<f64>() / n);
                    cell.erroneous_pct =
                        Some(occupied.iter().filter_map(|s| s.erroneous_pct).sum::<f64>() / n);
                }
            }
        }
    }
    Ok(out)
}
