//! Confusion counts and the accuracy / precision / recall / F1 report.

use std::fmt;

use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    /// Counts with `positive` treated as the positive class.
    pub fn from_predictions(actual: &[Label], predicted: &[Label], positive: Label) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels vs {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a == positive, p == positive) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn scaled(&self, k: u64) -> Self {
        ConfusionCounts::new(self.tp * k, self.fp * k, self.fn_ * k, self.tn * k)
    }
}

/// Exact ratio of two counts; `None` when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Decimal rendering with `digits` places, rounding half away from zero
    /// in exact integer arithmetic.
    pub fn format_rounded(&self, digits: u32) -> String {
        let scale = 10u128.pow(digits);
        let (num, den) = (self.num as u128, self.den as u128);
        let scaled = (2 * num * scale + den) / (2 * den);
        let int = scaled / scale;
        let frac = scaled % scale;
        if digits == 0 {
            format!("{int}")
        } else {
            format!("{int}.{frac:0width$}", width = digits as usize)
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<Ratio> {
    (den != 0).then_some(Ratio { num, den })
}

/// A metric that may be undefined (0/0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Defined(f64),
    Undefined,
}

impl Metric {
    pub const MARKER: &'static str = "undefined";

    pub fn value(&self) -> Option<f64> {
        match *self {
            Metric::Defined(v) => Some(v),
            Metric::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Metric::Defined(_))
    }
}

impl From<Option<Ratio>> for Metric {
    fn from(r: Option<Ratio>) -> Self {
        r.map_or(Metric::Undefined, |r| Metric::Defined(r.value()))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Defined(v) => write!(f, "{v:.3}"),
            Metric::Undefined => f.write_str(Metric::MARKER),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

struct ExactMetrics {
    accuracy: Ratio,
    precision: Option<Ratio>,
    recall: Option<Ratio>,
    f1: Option<Ratio>,
}

fn exact(c: &ConfusionCounts) -> Result<ExactMetrics> {
    if c.total() == 0 {
        return Err(Error::InvalidArgument("confusion counts are all zero".into()));
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); it needs both P and R and a nonzero sum.
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_).filter(|r| r.num > 0),
        _ => None,
    };
    Ok(ExactMetrics {
        accuracy: Ratio { num: c.tp + c.tn, den: c.total() },
        precision,
        recall,
        f1,
    })
}

/// Accuracy `(TP+TN)/N`, precision `TP/(TP+FP)`, recall `TP/(TP+FN)`, and the
/// harmonic F1 `2PR/(P+R)`. F1 is undefined when P or R is, or when both are zero.
pub fn metrics(counts: &ConfusionCounts) -> Result<MetricsReport> {
    let e = exact(counts)?;
    Ok(MetricsReport {
        accuracy: e.accuracy.value(),
        precision: e.precision.into(),
        recall: e.recall.into(),
        f1: e.f1.into(),
    })
}

/// `precision / (recall + precision)`, a commonly misprinted F1 formula. It does
/// not reproduce published F1 values and is never used in reports.
#[cfg(feature = "printed-f1")]
pub fn printed_f1_ratio(precision: f64, recall: f64) -> f64 {
    precision / (recall + precision)
}

pub const REPORT_HEADER: &str = "class,tp,fp,fn,tn,accuracy,precision,recall,f1";

/// Comma-separated per-class report with a header line. Ratios are rounded to
/// three decimals, half away from zero, from the exact counts.
pub fn report_table(rows: &[(String, ConfusionCounts)]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("report needs at least one row".into()));
    }
    let fmt = |r: Option<Ratio>| r.map_or_else(|| Metric::MARKER.to_string(), |r| r.format_rounded(3));
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (name, c) in rows {
        if name.trim().is_empty() {
            return Err(Error::InvalidArgument("class name must not be empty".into()));
        }
        if name.contains([',', '\n']) {
            return Err(Error::InvalidArgument(format!("class name `{name}` contains a separator")));
        }
        let e = exact(c)?;
        out.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{}\n",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            e.accuracy.format_rounded(3),
            fmt(e.precision),
            fmt(e.recall),
            fmt(e.f1),
        ));
    }
    Ok(out)
}
