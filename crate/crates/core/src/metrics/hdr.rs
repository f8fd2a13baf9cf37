use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Ordinal;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.25, 0.5];

/// Thresholded ordinal of a prediction pair; `|p_b - p_a| <= tau` is equal.
pub fn ordinal_of(p_a: f64, p_b: f64, tau: f64) -> Ordinal {
    let d = p_b - p_a;
    if d > tau {
        Ordinal::BMore
    } else if d < -tau {
        Ordinal::AMore
    } else {
        Ordinal::Equal
    }
}

/// Disagreement rates at one threshold. Split rates are `None` when no
/// label of that class exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdrRow {
    pub tau: f64,
    pub hdr: f64,
    pub hdr_eq: Option<f64>,
    pub hdr_neq: Option<f64>,
    pub n: usize,
    pub n_eq: usize,
    pub n_neq: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdrReport {
    pub rows: Vec<HdrRow>,
}

impl HdrReport {
    pub fn at(&self, tau: f64) -> Option<&HdrRow> {
        self.rows.iter().find(|r| (r.tau - tau).abs() < 1e-12)
    }

    /// One JSON object per threshold.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut out = String::from("  tau     HDR   HDR_eq  HDR_neq      N   N_eq  N_neq\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:5.2}  {:6.3}  {:>7}  {:>7}  {:5}  {:5}  {:5}",
                r.tau,
                r.hdr,
                fmt(r.hdr_eq),
                fmt(r.hdr_neq),
                r.n,
                r.n_eq,
                r.n_neq
            );
        }
        out
    }
}

/// Fraction of pairs whose thresholded prediction ordinal differs from the
/// label, overall and split by equality / inequality labels.
pub fn hdr(predictions: &[(f64, f64)], labels: &[Ordinal], taus: &[f64]) -> Result<HdrReport> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptySet);
    }
    let n_eq = labels.iter().filter(|t| t.is_equality()).count();
    let n = labels.len();
    let n_neq = n - n_eq;
    let rows = taus
        .iter()
        .map(|&tau| {
            let (mut wrong_eq, mut wrong_neq) = (0usize, 0usize);
            for (&(pa, pb), &t) in predictions.iter().zip(labels) {
                if ordinal_of(pa, pb, tau) != t {
                    if t.is_equality() {
                        wrong_eq += 1;
                    } else {
                        wrong_neq += 1;
                    }
                }
            }
            let rate = |w: usize, d: usize| (d > 0).then(|| w as f64 / d as f64);
            HdrRow {
                tau,
                hdr: (wrong_eq + wrong_neq) as f64 / n as f64,
                hdr_eq: rate(wrong_eq, n_eq),
                hdr_neq: rate(wrong_neq, n_neq),
                n,
                n_eq,
                n_neq,
            }
        })
        .collect();
    Ok(HdrReport { rows })
}
