use std::fs;
use std::path::Path;

use log::warn;

use crate::embedstore::format_sig6;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub condition: String,
    pub value: f64,
}

/// Table of `(metric, condition, value)` rows. Rows are sorted on output,
/// so the order in which they were added does not matter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Non-finite values are dropped with a warning.
    pub fn push(&mut self, metric: impl Into<String>, condition: impl Into<String>, value: f64) {
        let (metric, condition) = (metric.into(), condition.into());
        if !value.is_finite() {
            warn!("dropping non-finite report value for {metric}/{condition}");
            return;
        }
        self.rows.push(ReportRow {
            metric,
            condition,
            value,
        });
    }

    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    pub fn get(&self, metric: &str, condition: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.condition == condition)
            .map(|r| r.value)
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `metric<TAB>condition<TAB>value`, six significant digits.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.metric
                .cmp(&b.metric)
                .then_with(|| natural_cmp(&a.condition, &b.condition))
        });
        let mut out = String::new();
        for r in rows {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                r.metric,
                r.condition,
                format_sig6(r.value)
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Orders embedded numbers by value so `size=16` sorts after `size=2`.
fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    if a.is_empty() || b.is_empty() {
        return a.cmp(b);
    }
    for (x, y) in chunks(a).into_iter().zip(chunks(b)) {
        let ord = match (x, y) {
            ((true, p), (true, q)) => p
                .parse::<u128>()
                .unwrap_or(u128::MAX)
                .cmp(&q.parse::<u128>().unwrap_or(u128::MAX))
                .then_with(|| p.cmp(q)),
            ((_, p), (_, q)) => p.cmp(q),
        };
        if ord.is_ne() {
            return ord;
        }
    }
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}
