//! Label construction for the two-class pain task.
//!
//! Three target-encoding modes are supported: hard one-hot labels, uniform
//! label smoothing (LSR), and soft labels derived from NFCS pain scores via
//! a sigmoid centered at the clinical decision point of 2.5 units.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Binary outcome of the pain assessment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "no_pain")]
    NoPain,
    #[serde(rename = "pain")]
    Pain,
}

impl ClassLabel {
    /// Index of this class in a two-entry distribution: NoPain = 0, Pain = 1.
    pub fn index(self) -> usize {
        match self {
            ClassLabel::NoPain => 0,
            ClassLabel::Pain => 1,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::NoPain => write!(f, "no_pain"),
            ClassLabel::Pain => write!(f, "pain"),
        }
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pain" => Ok(ClassLabel::Pain),
            "no_pain" => Ok(ClassLabel::NoPain),
            other => Err(Error::Domain(format!(
                "unknown class label {other:?}; expected \"pain\" or \"no_pain\""
            ))),
        }
    }
}

/// NFCS pain score: the count of observed facial action units, 0 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct NfcsScore(u8);

impl NfcsScore {
    pub const MAX: u8 = 5;

    /// Validates the 0..=5 range. Scores outside it are rejected, not clamped.
    pub fn new(value: u8) -> Result<Self> {
        if value <= Self::MAX {
            Ok(NfcsScore(value))
        } else {
            Err(Error::Domain(format!(
                "NFCS score {value} outside the supported range 0..=5"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for NfcsScore {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        NfcsScore::new(value)
    }
}

impl From<NfcsScore> for u8 {
    fn from(score: NfcsScore) -> u8 {
        score.0
    }
}

/// Two-entry probability vector `[p(NoPain), p(Pain)]`.
///
/// Constructors guarantee both entries lie in [0,1] and sum to 1 within
/// 1e-12, so downstream code may rely on complementarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub p_no_pain: f64,
    pub p_pain: f64,
}

impl LabelDistribution {
    const SUM_TOLERANCE: f64 = 1e-12;

    /// Builds a distribution, checking range and complementarity.
    pub fn new(p_no_pain: f64, p_pain: f64) -> Result<Self> {
        let in_range = (0.0..=1.0).contains(&p_no_pain) && (0.0..=1.0).contains(&p_pain);
        if !in_range || (p_no_pain + p_pain - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "[{p_no_pain}, {p_pain}] is not a two-class probability vector"
            )));
        }
        Ok(LabelDistribution { p_no_pain, p_pain })
    }

    /// Builds the distribution `[1 - p, p]` from the pain probability.
    pub fn from_pain_probability(p_pain: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_pain) {
            return Err(Error::Domain(format!(
                "pain probability {p_pain} outside [0,1]"
            )));
        }
        Ok(LabelDistribution {
            p_no_pain: 1.0 - p_pain,
            p_pain,
        })
    }

    /// One-hot encoding of a hard label.
    pub fn one_hot(label: ClassLabel) -> Self {
        match label {
            ClassLabel::NoPain => LabelDistribution {
                p_no_pain: 1.0,
                p_pain: 0.0,
            },
            ClassLabel::Pain => LabelDistribution {
                p_no_pain: 0.0,
                p_pain: 1.0,
            },
        }
    }

    /// Entries in index order `[p(NoPain), p(Pain)]`.
    pub fn as_array(&self) -> [f64; 2] {
        [self.p_no_pain, self.p_pain]
    }

    /// Probability assigned to a class by its index.
    pub fn probability(&self, label: ClassLabel) -> f64 {
        match label {
            ClassLabel::NoPain => self.p_no_pain,
            ClassLabel::Pain => self.p_pain,
        }
    }

    /// Thresholded decision: Pain iff `p(Pain) >= threshold`.
    ///
    /// The boundary is inclusive, so a 50% confidence counts as Pain.
    pub fn classify(&self, threshold: f64) -> Result<ClassLabel> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "decision threshold {threshold} outside [0,1]"
            )));
        }
        Ok(if self.p_pain >= threshold {
            ClassLabel::Pain
        } else {
            ClassLabel::NoPain
        })
    }
}

/// Sigmoid mapping a pain score in [0,5] to a pain probability.
///
/// `S(n) = 1 / (1 + e^(-n + 2.5))`, strictly increasing, with S(2.5) = 0.5
/// at the midpoint between the integer scores 2 and 3. Integer scores never
/// hit 0.5 exactly, which keeps soft and hard labels consistent across the
/// whole scale.
pub fn pain_sigmoid(score: f64) -> Result<f64> {
    if !(0.0..=5.0).contains(&score) {
        return Err(Error::Domain(format!(
            "pain score {score} outside the sigmoid domain [0,5]"
        )));
    }
    Ok(1.0 / (1.0 + (-score + 2.5).exp()))
}

/// `pain_sigmoid` specialized to validated integer NFCS scores.
pub fn nfcs_sigmoid(score: NfcsScore) -> f64 {
    // The score type already guarantees the [0,5] domain.
    pain_sigmoid(f64::from(score.value())).expect("NfcsScore is within the sigmoid domain")
}

/// Soft label `[1 - S(score), S(score)]` for an NFCS score.
pub fn nfcs_soft_label(score: NfcsScore) -> LabelDistribution {
    let s = nfcs_sigmoid(score);
    LabelDistribution {
        p_no_pain: 1.0 - s,
        p_pain: s,
    }
}

/// Hard label from an NFCS score: Pain iff score >= 3.
pub fn nfcs_hard_label(score: NfcsScore) -> ClassLabel {
    if score.value() >= 3 {
        ClassLabel::Pain
    } else {
        ClassLabel::NoPain
    }
}

/// Uniform label smoothing over the two classes.
///
/// The off class receives eps/2 and the true class the remainder. Computing
/// the true-class mass as `1 - eps/2` keeps pairs like [0.1, 0.9] exact in
/// 64-bit arithmetic.
pub fn lsr_smooth(hard: ClassLabel, epsilon: f64) -> Result<LabelDistribution> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!(
            "smoothing epsilon {epsilon} outside [0,1)"
        )));
    }
    let off = epsilon / 2.0;
    let on = 1.0 - off;
    Ok(match hard {
        ClassLabel::NoPain => LabelDistribution {
            p_no_pain: on,
            p_pain: off,
        },
        ClassLabel::Pain => LabelDistribution {
            p_no_pain: off,
            p_pain: on,
        },
    })
}

/// Target-encoding mode used during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LabelMode {
    /// One-hot targets.
    Hard,
    /// Uniformly smoothed targets with the given epsilon.
    Lsr { epsilon: f64 },
    /// Sigmoid soft labels from NFCS scores; unscored samples are skipped.
    NfcsSoft,
}

impl LabelMode {
    /// Training target for a sample, or `None` when the mode cannot label it.
    ///
    /// Only `NfcsSoft` ever returns `None`: samples without an NFCS score
    /// are excluded from training in that mode (they still participate in
    /// testing, where hard labels are used).
    pub fn target(&self, hard: ClassLabel, nfcs: Option<NfcsScore>) -> Option<LabelDistribution> {
        match self {
            LabelMode::Hard => Some(LabelDistribution::one_hot(hard)),
            LabelMode::Lsr { epsilon } => {
                Some(lsr_smooth(hard, *epsilon).expect("validated at construction"))
            }
            LabelMode::NfcsSoft => nfcs.map(nfcs_soft_label),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelMode::Hard => write!(f, "hard"),
            LabelMode::Lsr { epsilon } => write!(f, "{epsilon}"),
            LabelMode::NfcsSoft => write!(f, "nfcs"),
        }
    }
}

impl FromStr for LabelMode {
    type Err = Error;

    /// Accepts `hard`, `nfcs`, or a bare epsilon such as `0.3`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(LabelMode::Hard),
            "nfcs" => Ok(LabelMode::NfcsSoft),
            other => {
                let epsilon: f64 = other.parse().map_err(|_| {
                    Error::Config(format!(
                        "label mode {other:?} is not \"hard\", \"nfcs\", or an epsilon in [0,1)"
                    ))
                })?;
                if !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::Config(format!(
                        "smoothing epsilon {epsilon} outside [0,1)"
                    )));
                }
                Ok(LabelMode::Lsr { epsilon })
            }
        }
    }
}
