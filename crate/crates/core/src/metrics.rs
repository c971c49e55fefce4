//! Confusion matrices and per-class precision / recall / F1.
//!
//! For class `k` with confusion counts `c[i][j]` (true class `i` predicted
//! as `j`):
//!
//! ```text
//! precision = TP / (TP + FP)    TP = c[k][k], FP = column k minus TP
//! recall    = TP / (TP + FN)    FN = row k minus TP
//! F1        = 2*P*R / (P + R)
//! ```
//!
//! Degenerate denominators yield 0 and flag the class in the report.

use crate::error::{Error, Result};

/// K x K tally of true class against predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<usize>,
    classes: usize,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::argument("need at least one class".to_string()));
        }
        let classes = class_names.len();
        Ok(ConfusionMatrix {
            counts: vec![0; classes * classes],
            classes,
            class_names,
        })
    }

    /// Tallies `(true, predicted)` label pairs into a fresh matrix.
    pub fn from_labels(
        true_labels: &[usize],
        predicted_labels: &[usize],
        class_names: Vec<String>,
    ) -> Result<Self> {
        if true_labels.len() != predicted_labels.len() {
            return Err(Error::argument(format!(
                "{} true labels but {} predictions",
                true_labels.len(),
                predicted_labels.len()
            )));
        }
        let mut matrix = ConfusionMatrix::new(class_names)?;
        for (&truth, &prediction) in true_labels.iter().zip(predicted_labels) {
            matrix.record(truth, prediction)?;
        }
        Ok(matrix)
    }

    pub fn record(&mut self, true_label: usize, predicted_label: usize) -> Result<()> {
        if true_label >= self.classes || predicted_label >= self.classes {
            return Err(Error::argument(format!(
                "label pair ({true_label}, {predicted_label}) out of range for {} classes",
                self.classes
            )));
        }
        self.counts[true_label * self.classes + predicted_label] += 1;
        Ok(())
    }

    /// Adds another matrix's counts; class sets must match.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::argument("cannot merge matrices over different classes".to_string()));
        }
        for (slot, &count) in self.counts.iter_mut().zip(&other.counts) {
            *slot += count;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    #[inline]
    pub fn count(&self, true_label: usize, predicted_label: usize) -> usize {
        self.counts[true_label * self.classes + predicted_label]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, true_label: usize) -> usize {
        (0..self.classes).map(|j| self.count(true_label, j)).sum()
    }

    pub fn column_sum(&self, predicted_label: usize) -> usize {
        (0..self.classes).map(|i| self.count(i, predicted_label)).sum()
    }

    /// Raw counts as CSV with a leading `true\predicted` label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.classes {
            out.push_str(&self.class_names[i]);
            for j in 0..self.classes {
                out.push_str(&format!(",{}", self.count(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// `TP / (TP + FP)`; 0 when class `k` is never predicted.
pub fn precision(cm: &ConfusionMatrix, k: usize) -> f64 {
    let tp = cm.count(k, k);
    let denominator = cm.column_sum(k);
    if denominator == 0 {
        0.0
    } else {
        tp as f64 / denominator as f64
    }
}

/// `TP / (TP + FN)`; 0 when class `k` has no true samples.
pub fn recall(cm: &ConfusionMatrix, k: usize) -> f64 {
    let tp = cm.count(k, k);
    let denominator = cm.row_sum(k);
    if denominator == 0 {
        0.0
    } else {
        tp as f64 / denominator as f64
    }
}

/// Harmonic mean `2*P*R / (P + R)`; 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class metrics for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when a zero denominator forced a metric to the 0 convention.
    pub degenerate: bool,
}

/// Full report: per-class rows plus unweighted macro averages and accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub per_class: Vec<ClassRow>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Builds the metrics report; the matrix must contain at least one sample.
pub fn report(cm: &ConfusionMatrix) -> Result<ClassMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::argument("confusion matrix is empty".to_string()));
    }
    let mut per_class = Vec::with_capacity(cm.classes());
    for k in 0..cm.classes() {
        let p = precision(cm, k);
        let r = recall(cm, k);
        per_class.push(ClassRow {
            name: cm.class_names()[k].clone(),
            precision: p,
            recall: r,
            f1: f1(p, r),
            degenerate: cm.column_sum(k) == 0 || cm.row_sum(k) == 0,
        });
    }
    let n = per_class.len() as f64;
    let trace: usize = (0..cm.classes()).map(|k| cm.count(k, k)).sum();
    Ok(ClassMetrics {
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / n,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / n,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / n,
        accuracy: trace as f64 / total as f64,
        per_class,
    })
}

impl ClassMetrics {
    /// CSV report: one row per class, a macro-average row, and an accuracy
    /// row, all printed with three decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1\n");
        for row in &self.per_class {
            let flag = if row.degenerate { " (degenerate)" } else { "" };
            out.push_str(&format!(
                "{}{},{:.3},{:.3},{:.3}\n",
                row.name, flag, row.precision, row.recall, row.f1
            ));
        }
        out.push_str(&format!(
            "macro,{:.3},{:.3},{:.3}\n",
            self.macro_precision, self.macro_recall, self.macro_f1
        ));
        out.push_str(&format!("accuracy,{:.3},,\n", self.accuracy));
        out
    }
}
