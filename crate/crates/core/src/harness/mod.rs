//! Verification campaigns over scenario corpora and their CSV reports.

mod campaign;
mod svg;

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub use campaign::{
    allocation_shift_mismatches, pattern_discrepancy, run_campaign, shift_sample, verify_balance_report,
    verify_equivariance, Campaign, CampaignOptions, Pipeline,
};
pub use svg::histogram_svg;

/// Outcome of one check on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub seed: u64,
    /// Distinguishes repeated checks on one seed, such as successive shifts.
    pub case: u32,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckRecord {
    pub fn new(check: &str, seed: u64, case: u32, passed: bool, value: f64, tolerance: f64) -> Self {
        Self { check: check.to_string(), seed, case, passed, value, tolerance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub campaign: String,
    records: Vec<CheckRecord>,
    pub runtime: Duration,
}

const CSV_HEADER: &str = "check,seed,case,status,value,tolerance";
const TIMING_TAG: &str = "# timing";

impl VerificationReport {
    /// Sorts the records by `(check, seed, case)`, so the report does not depend on
    /// the order in which workers finished.
    pub fn new(campaign: &str, mut records: Vec<CheckRecord>, runtime: Duration) -> Self {
        records.sort_by(|a, b| (&a.check, a.seed, a.case).cmp(&(&b.check, b.seed, b.case)));
        Self { campaign: campaign.to_string(), records, runtime }
    }

    pub fn records(&self) -> &[CheckRecord] {
        &self.records
    }

    pub fn passed(&self) -> usize {
        self.records.iter().filter(|r| r.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.records.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }

    /// Records of one check.
    pub fn check(&self, id: &str) -> impl Iterator<Item = &CheckRecord> {
        let id = id.to_string();
        self.records.iter().filter(move |r| r.check == id)
    }

    /// Largest value recorded for a check.
    pub fn worst(&self, id: &str) -> Option<f64> {
        self.check(id).map(|r| r.value).reduce(f64::max)
    }

    /// Everything except the trailing timing line; two runs on the same corpus agree
    /// on this byte for byte.
    pub fn deterministic_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# campaign {}", self.campaign).unwrap();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.check,
                r.seed,
                r.case,
                if r.passed { "pass" } else { "fail" },
                fmt_f64(r.value),
                fmt_f64(r.tolerance)
            )
            .unwrap();
        }
        writeln!(s, "# summary checks={} passed={} failed={}", self.records.len(), self.passed(), self.failed())
            .unwrap();
        s
    }

    pub fn to_csv(&self) -> String {
        let finished = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut s = self.deterministic_csv();
        writeln!(s, "{TIMING_TAG} elapsed_ms={} finished_unix={finished}", self.runtime.as_millis()).unwrap();
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate();
        let campaign = match lines.next() {
            Some((_, l)) if l.starts_with("# campaign ") => l["# campaign ".len()..].to_string(),
            _ => return Err(bad(1, "expected `# campaign <name>`")),
        };
        match lines.next() {
            Some((_, l)) if l == CSV_HEADER => {}
            _ => return Err(bad(2, "unexpected column header")),
        }
        let mut records = Vec::new();
        let mut runtime = Duration::ZERO;
        for (i, l) in lines {
            if let Some(rest) = l.strip_prefix(TIMING_TAG) {
                let ms = rest
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("elapsed_ms="))
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| bad(i + 1, "bad timing line"))?;
                runtime = Duration::from_millis(ms);
                continue;
            }
            if l.starts_with('#') || l.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 1, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
            let passed = match f[3] {
                "pass" => true,
                "fail" => false,
                _ => return Err(bad(i + 1, "status must be pass or fail")),
            };
            records.push(CheckRecord {
                check: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad(i + 1, "bad seed"))?,
                case: f[2].parse().map_err(|_| bad(i + 1, "bad case"))?,
                passed,
                value: num(f[4])?,
                tolerance: num(f[5])?,
            });
        }
        Ok(Self::new(&campaign, records, runtime))
    }

    /// Plain-text summary: one line per check id with pass counts and the worst value.
    pub fn summary(&self) -> String {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.check.as_str()).collect();
        ids.dedup();
        let mut s = String::new();
        writeln!(s, "campaign {}: {} checks, {} failed", self.campaign, self.records.len(), self.failed()).unwrap();
        for id in ids {
            let n = self.check(id).count();
            let ok = self.check(id).filter(|r| r.passed).count();
            writeln!(s, "  {id}: {ok}/{n} passed, worst {:e}", self.worst(id).unwrap_or(0.0)).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_order() {
        let recs = vec![
            CheckRecord::new("b", 2, 0, true, 0.5, 1.0),
            CheckRecord::new("a", 9, 1, false, 3.0, 1.0),
            CheckRecord::new("a", 9, 0, true, 0.0, 1.0),
        ];
        let r = VerificationReport::new("demo", recs, Duration::from_millis(12));
        assert_eq!(r.records()[0].case, 0);
        assert_eq!(r.records()[2].check, "b");
        let back = VerificationReport::parse_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.failed(), 1);
        assert!(!r.deterministic_csv().contains("timing"));
    }
}
