//! Per-episode metrics rows and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CmdpError, Result};

/// Column order of every per-seed CSV.
pub const COLUMNS: [&str; 11] = [
    "k",
    "v_est_r",
    "v_est_g",
    "v_true_r",
    "v_true_g",
    "v_star_r",
    "y",
    "regret",
    "violation",
    "checks",
    "optimistic",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    pub k: usize,
    /// Learner's optimistic `V_{k,1}(s1)`; NaN for runs without estimates.
    pub v_est_r: f64,
    pub v_est_g: f64,
    /// Exact `V_1^{r^k, pi^k}(s1)`.
    pub v_true_r: f64,
    pub v_true_g: f64,
    /// Comparator value under `r^k`.
    pub v_star_r: f64,
    pub y: f64,
    pub regret: f64,
    pub violation: f64,
    /// Inline assertions evaluated during the episode (all passed).
    pub checks: u64,
    /// Bit 0: reward estimate optimistic; bit 1: constraint estimate optimistic.
    pub optimistic: u8,
}

impl EpisodeRow {
    fn same_bits(&self, other: &Self) -> bool {
        let f = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.k == other.k
            && f(self.v_est_r, other.v_est_r)
            && f(self.v_est_g, other.v_est_g)
            && f(self.v_true_r, other.v_true_r)
            && f(self.v_true_g, other.v_true_g)
            && f(self.v_star_r, other.v_star_r)
            && f(self.y, other.y)
            && f(self.regret, other.regret)
            && f(self.violation, other.violation)
            && self.checks == other.checks
            && self.optimistic == other.optimistic
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsSeries {
    pub rows: Vec<EpisodeRow>,
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl MetricsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    pub fn final_violation(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.violation)
    }

    pub fn total_checks(&self) -> u64 {
        self.rows.iter().map(|r| r.checks).sum()
    }

    /// Fraction of episodes whose estimate upper-bounds the exact value
    /// (`bit` 0 for reward, 1 for constraint).
    pub fn optimism_fraction(&self, bit: u8) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let hits = self.rows.iter().filter(|r| r.optimistic >> bit & 1 == 1).count();
        hits as f64 / self.rows.len() as f64
    }

    /// Bitwise equality, treating NaN entries as equal to themselves.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_bits(b))
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.v_est_r),
                fmt_f64(r.v_est_g),
                fmt_f64(r.v_true_r),
                fmt_f64(r.v_true_g),
                fmt_f64(r.v_star_r),
                fmt_f64(r.y),
                fmt_f64(r.regret),
                fmt_f64(r.violation),
                r.checks,
                r.optimistic,
            );
        }
        out
    }

    pub fn from_csv(text: &str, path: &str) -> Result<Self> {
        let err = |line: usize, reason: String| CmdpError::Csv {
            path: path.to_string(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == COLUMNS.join(",") => {}
            _ => return Err(err(1, "unexpected header".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != COLUMNS.len() {
                return Err(err(i + 1, format!("expected {} fields, got {}", COLUMNS.len(), fields.len())));
            }
            let num = |j: usize| -> Result<f64> {
                fields[j]
                    .parse::<f64>()
                    .map_err(|e| err(i + 1, format!("column {}: {e}", COLUMNS[j])))
            };
            let int = |j: usize| -> Result<u64> {
                fields[j]
                    .parse::<u64>()
                    .map_err(|e| err(i + 1, format!("column {}: {e}", COLUMNS[j])))
            };
            rows.push(EpisodeRow {
                k: int(0)? as usize,
                v_est_r: num(1)?,
                v_est_g: num(2)?,
                v_true_r: num(3)?,
                v_true_g: num(4)?,
                v_star_r: num(5)?,
                y: num(6)?,
                regret: num(7)?,
                violation: num(8)?,
                checks: int(9)?,
                optimistic: int(10)? as u8,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CmdpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(f64::NAN), -10.0f64..10.0]
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            vals in proptest::collection::vec((finite(), finite(), finite(), any::<u32>(), 0u8..4), 1..20)
        ) {
            let rows = vals
                .iter()
                .enumerate()
                .map(|(i, (a, b, c, n, o))| EpisodeRow {
                    k: i + 1,
                    v_est_r: *a,
                    v_est_g: *b,
                    v_true_r: *c,
                    v_true_g: *a,
                    v_star_r: *b,
                    y: *c,
                    regret: *a,
                    violation: *b,
                    checks: *n as u64,
                    optimistic: *o,
                })
                .collect();
            let series = MetricsSeries { rows };
            let back = MetricsSeries::from_csv(&series.to_csv(), "mem").unwrap();
            prop_assert!(series.bit_identical(&back));
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(MetricsSeries::from_csv("a,b\n1,2\n", "mem").is_err());
        let header = COLUMNS.join(",");
        let text = format!("{header}\n1,2,3\n");
        match MetricsSeries::from_csv(&text, "mem") {
            Err(CmdpError::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
