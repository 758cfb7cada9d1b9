//! Classification metrics, paired significance testing, and calibration.
//!
//! All calibration machinery shares one binning rule ([`bin_index`]):
//! K equal-width bins over [0,1], left-closed right-open, with the last
//! bin closed so confidence 1.0 belongs to bin K. Every bin reports the
//! mean confidence of its members rather than its geometric center.

use crate::error::{Error, Result};
use crate::labels::ClassLabel;
use serde::{Deserialize, Serialize};

/// Default bin count for reliability curves, ECE, and histograms.
pub const DEFAULT_BINS: usize = 10;

/// One scored prediction on a held-out image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    /// Model confidence for the positive (Pain) class.
    pub confidence_pain: f64,
    pub true_label: ClassLabel,
    pub fold: usize,
    pub subject_id: String,
}

/// Accuracy, F1, precision, and recall with Pain as the positive class.
///
/// A ratio whose denominator is zero is reported as 0 with its degenerate
/// flag set, so aggregation never sees NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
}

/// Computes the four headline metrics at the 0.5 decision threshold.
pub fn classification_metrics(records: &[PredictionRecord]) -> Result<ClassificationMetrics> {
    if records.is_empty() {
        return Err(Error::Domain("no prediction records to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for record in records {
        let predicted_pain = record.confidence_pain >= 0.5;
        match (predicted_pain, record.true_label) {
            (true, ClassLabel::Pain) => tp += 1,
            (true, ClassLabel::NoPain) => fp += 1,
            (false, ClassLabel::Pain) => fn_ += 1,
            (false, ClassLabel::NoPain) => tn += 1,
        }
    }
    let total = records.len() as f64;
    let accuracy = (tp + tn) as f64 / total;

    let precision_degenerate = tp + fp == 0;
    let precision = if precision_degenerate {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall_degenerate = tp + fn_ == 0;
    let recall = if recall_degenerate {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1_degenerate = precision + recall == 0.0;
    let f1 = if f1_degenerate {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    Ok(ClassificationMetrics {
        accuracy,
        f1,
        precision,
        recall,
        precision_degenerate,
        recall_degenerate,
        f1_degenerate,
    })
}

/// Outcome of a two-tailed paired t-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    /// Set when the differences have zero variance but a nonzero mean,
    /// which makes the statistic unbounded; p is reported as 0.
    pub degenerate: bool,
}

/// Paired t-test over per-fold metric pairs (two-tailed).
pub fn paired_t_test(metric_a: &[f64], metric_b: &[f64]) -> Result<TTestResult> {
    if metric_a.len() != metric_b.len() {
        return Err(Error::Domain(format!(
            "paired samples differ in length: {} vs {}",
            metric_a.len(),
            metric_b.len()
        )));
    }
    let n = metric_a.len();
    if n < 2 {
        return Err(Error::Domain(
            "paired t-test needs at least two pairs".into(),
        ));
    }
    let diffs: Vec<f64> = metric_a.iter().zip(metric_b).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();

    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t_statistic: 0.0,
                p_value: 1.0,
                degenerate: false,
            }
        } else {
            TTestResult {
                t_statistic: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
                degenerate: true,
            }
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let dof = (n - 1) as f64;
    // Two-tailed p folds directly into one incomplete-beta evaluation.
    let p = incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
    Ok(TTestResult {
        t_statistic: t,
        p_value: p,
        degenerate: false,
    })
}

/// ln Gamma(x) by the Lanczos approximation, accurate to ~1e-13 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 14] = [
        57.156_235_665_862_92,
        -59.597_960_355_475_49,
        14.136_097_974_741_746,
        -0.491_913_816_097_620_2,
        3.399_464_998_481_189e-5,
        4.652_362_892_704_858e-5,
        -9.837_447_530_487_956e-5,
        1.580_887_032_249_125e-4,
        -2.102_644_417_241_049e-4,
        2.174_396_181_152_126e-4,
        -1.643_181_065_367_639e-4,
        8.441_822_398_385_275e-5,
        -2.619_083_840_158_141e-5,
        3.689_918_265_953_162e-6,
    ];
    let y = x;
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut series = 0.999_999_999_999_997_1;
    let mut denom = y;
    for c in COEFFS {
        denom += 1.0;
        series += c / denom;
    }
    tmp + (2.506_628_274_631_000_5 * series / x).ln()
}

/// Regularized incomplete beta function I_x(a, b) by continued fraction.
fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Lentz's algorithm for the continued fraction of the incomplete beta.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..200 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Canonical bin assignment shared by every calibration consumer:
/// `min(floor(confidence * bins), bins - 1)`.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    ((confidence * bins as f64).floor() as usize).min(bins - 1)
}

/// One reliability-curve bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    /// Mean confidence of the bin's members (0 when empty).
    pub mean_confidence: f64,
    /// Empirical frequency of true Pain among members (0 when empty).
    pub frequency: f64,
    pub count: usize,
}

/// Reliability curve plus its expected calibration error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Exactly `bin_count` entries; empty bins carry count 0 and are
    /// skipped when exporting the plottable curve.
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
    pub bin_count: usize,
}

impl CalibrationReport {
    /// Plot-ready CSV of the occupied bins (1-based bin ids).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,mean_confidence,frequency,count\n");
        for (index, bin) in self.bins.iter().enumerate() {
            if bin.count == 0 {
                continue;
            }
            out.push_str(&format!(
                "{},{},{},{}\n",
                index + 1,
                bin.mean_confidence,
                bin.frequency,
                bin.count
            ));
        }
        out
    }
}

/// Builds the reliability curve and ECE in one pass.
pub fn calibration_curve(records: &[PredictionRecord], bins: usize) -> Result<CalibrationReport> {
    if records.is_empty() {
        return Err(Error::Domain("no prediction records to calibrate".into()));
    }
    if bins == 0 {
        return Err(Error::Config("bin count must be positive".into()));
    }
    let mut sums = vec![0.0f64; bins];
    let mut positives = vec![0usize; bins];
    let mut counts = vec![0usize; bins];
    for record in records {
        let bin = bin_index(record.confidence_pain, bins);
        sums[bin] += record.confidence_pain;
        counts[bin] += 1;
        if record.true_label == ClassLabel::Pain {
            positives[bin] += 1;
        }
    }
    let total = records.len() as f64;
    let mut report_bins = Vec::with_capacity(bins);
    let mut ece = 0.0;
    for bin in 0..bins {
        if counts[bin] == 0 {
            report_bins.push(CalibrationBin {
                mean_confidence: 0.0,
                frequency: 0.0,
                count: 0,
            });
            continue;
        }
        let mean_confidence = sums[bin] / counts[bin] as f64;
        let frequency = positives[bin] as f64 / counts[bin] as f64;
        ece += counts[bin] as f64 / total * (frequency - mean_confidence).abs();
        report_bins.push(CalibrationBin {
            mean_confidence,
            frequency,
            count: counts[bin],
        });
    }
    Ok(CalibrationReport {
        bins: report_bins,
        ece,
        bin_count: bins,
    })
}

/// Expected calibration error alone.
pub fn ece(records: &[PredictionRecord], bins: usize) -> Result<f64> {
    Ok(calibration_curve(records, bins)?.ece)
}

/// Confidence histogram: member counts per bin, summing to the record count.
pub fn confidence_histogram(records: &[PredictionRecord], bins: usize) -> Result<Vec<usize>> {
    if records.is_empty() {
        return Err(Error::Domain("no prediction records to bin".into()));
    }
    if bins == 0 {
        return Err(Error::Config("bin count must be positive".into()));
    }
    let mut counts = vec![0usize; bins];
    for record in records {
        counts[bin_index(record.confidence_pain, bins)] += 1;
    }
    Ok(counts)
}

/// Plot-ready CSV for a confidence histogram (1-based bin ids).
pub fn histogram_to_csv(counts: &[usize]) -> String {
    let mut out = String::from("bin,count\n");
    for (index, count) in counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", index + 1, count));
    }
    out
}
