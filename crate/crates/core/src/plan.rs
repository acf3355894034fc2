//! Step, document and storage accounting for pretraining phases.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effective batch for corpora of at least [`SMALL_CORPUS_DOCS`] documents.
pub const LARGE_BATCH: u64 = 2048;
/// Batch used below the threshold.
pub const SMALL_BATCH: u64 = 256;
pub const SMALL_CORPUS_DOCS: u64 = 5_000;
/// Fixed length of the domain-adaptive phase.
pub const DAPT_STEPS: u64 = 12_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Dapt,
    Tapt,
    KnnTapt(usize),
    RandTapt(usize),
    CuratedTapt,
    DaptThenTapt,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Dapt => write!(f, "DAPT"),
            Phase::Tapt => write!(f, "TAPT"),
            Phase::KnnTapt(k) => write!(f, "KNN_TAPT({k})"),
            Phase::RandTapt(k) => write!(f, "RAND_TAPT({k})"),
            Phase::CuratedTapt => write!(f, "CURATED_TAPT"),
            Phase::DaptThenTapt => write!(f, "DAPT_THEN_TAPT"),
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("unknown phase `{s}`"));
        let with_k = |prefix: &str| -> Option<Result<usize>> {
            let inner = s.strip_prefix(prefix)?.strip_suffix(')')?;
            Some(inner.parse::<usize>().ok().filter(|&k| k > 0).ok_or_else(bad))
        };
        match s {
            "DAPT" => Ok(Phase::Dapt),
            "TAPT" => Ok(Phase::Tapt),
            "CURATED_TAPT" => Ok(Phase::CuratedTapt),
            "DAPT_THEN_TAPT" => Ok(Phase::DaptThenTapt),
            _ => {
                if let Some(k) = with_k("KNN_TAPT(") {
                    Ok(Phase::KnnTapt(k?))
                } else if let Some(k) = with_k("RAND_TAPT(") {
                    Ok(Phase::RandTapt(k?))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOverrides {
    /// Replaces the computed step count.
    pub fixed_steps: Option<u64>,
}

impl PlanOverrides {
    /// The fixed-length domain-adaptive phase.
    pub fn dapt() -> Self {
        PlanOverrides {
            fixed_steps: Some(DAPT_STEPS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlan {
    pub phase: Phase,
    pub docs: u64,
    pub epochs: u64,
    pub batch: u64,
    pub steps: u64,
    pub steps_display: String,
    pub storage_bytes: u64,
}

pub fn batch_for(docs: u64) -> u64 {
    if docs < SMALL_CORPUS_DOCS {
        SMALL_BATCH
    } else {
        LARGE_BATCH
    }
}

/// `ceil(docs * epochs / batch)`, one document per training sequence.
pub fn steps_for(docs: u64, epochs: u64, batch: u64) -> u64 {
    (docs * epochs).div_ceil(batch)
}

/// Steps in thousands at one decimal, rounded half up: 196 -> "0.2K".
pub fn display_steps(steps: u64) -> String {
    let tenths = (steps + 50) / 100;
    format!("{}.{}K", tenths / 10, tenths % 10)
}

pub fn plan_phase(
    phase: Phase,
    docs: u64,
    epochs: u64,
    storage_bytes: u64,
    overrides: PlanOverrides,
) -> Result<PhasePlan> {
    if phase == Phase::DaptThenTapt {
        return Err(Error::InvalidParam(
            "DAPT_THEN_TAPT is composed from two plans; use plan_sequence".into(),
        ));
    }
    if docs == 0 {
        return Err(Error::InvalidParam("docs must be >= 1".into()));
    }
    if epochs == 0 {
        return Err(Error::InvalidParam("epochs must be >= 1".into()));
    }
    let epochs = if phase == Phase::Dapt { 1 } else { epochs };
    if docs.checked_mul(epochs).is_none() {
        return Err(Error::InvalidParam("docs * epochs overflows".into()));
    }
    let batch = batch_for(docs);
    let steps = match overrides.fixed_steps {
        Some(0) => return Err(Error::InvalidParam("fixed steps must be >= 1".into())),
        Some(s) => s,
        None => steps_for(docs, epochs, batch),
    };
    Ok(PhasePlan {
        phase,
        docs,
        epochs,
        batch,
        steps,
        steps_display: display_steps(steps),
        storage_bytes,
    })
}

/// A domain-adaptive phase followed by a task-adaptive one; steps add up.
pub fn plan_sequence(dapt: &PhasePlan, tapt: &PhasePlan) -> PhasePlan {
    let steps = dapt.steps + tapt.steps;
    PhasePlan {
        phase: Phase::DaptThenTapt,
        docs: dapt.docs,
        epochs: dapt.epochs,
        batch: dapt.batch,
        steps,
        steps_display: display_steps(steps),
        storage_bytes: dapt.storage_bytes.max(tapt.storage_bytes),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub plan: PhasePlan,
    /// Steps relative to the cheapest plan.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanComparison {
    pub rows: Vec<ComparisonRow>,
}

impl PlanComparison {
    pub fn ratio_of(&self, phase: Phase) -> Option<f64> {
        self.rows.iter().find(|r| r.plan.phase == phase).map(|r| r.ratio)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<16} {:>8} {:>12} {:>6} {:>8} {:>14}\n",
            "phase", "steps", "docs", "batch", "ratio", "storage_bytes"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>12} {:>6} {:>7.1}x {:>14}",
                r.plan.phase.to_string(),
                r.plan.steps_display,
                r.plan.docs,
                r.plan.batch,
                r.ratio,
                r.plan.storage_bytes
            );
        }
        out
    }
}

/// Sorts plans by steps (ties by phase name) and expresses each as a
/// multiple of the cheapest.
pub fn compare_plans(plans: &[PhasePlan]) -> Result<PlanComparison> {
    if plans.len() < 2 {
        return Err(Error::TooFew {
            what: "plans",
            needed: 2,
            got: plans.len(),
        });
    }
    let mut sorted = plans.to_vec();
    sorted.sort_by(|a, b| {
        a.steps
            .cmp(&b.steps)
            .then_with(|| a.phase.to_string().cmp(&b.phase.to_string()))
    });
    let min = sorted[0].steps.max(1) as f64;
    Ok(PlanComparison {
        rows: sorted
            .into_iter()
            .map(|plan| ComparisonRow {
                ratio: plan.steps as f64 / min,
                plan,
            })
            .collect(),
    })
}

/// The computational-requirements comparison for a 500-document task in the
/// biomedical domain, with the document counts of each phase.
pub fn reference_plans() -> Vec<PhasePlan> {
    let tapt = |phase, docs| plan_phase(phase, docs, 100, 0, PlanOverrides::default()).expect("valid");
    let t = tapt(Phase::Tapt, 500);
    let dapt = plan_phase(Phase::Dapt, 25_000_000, 1, 0, PlanOverrides::dapt()).expect("valid");
    let both = plan_sequence(&dapt, &t);
    vec![
        t,
        tapt(Phase::KnnTapt(50), 24_000),
        tapt(Phase::KnnTapt(150), 66_000),
        tapt(Phase::KnnTapt(500), 185_000),
        tapt(Phase::CuratedTapt, 180_000),
        dapt,
        both,
    ]
}
