//! Check records, the sign ledger and run reports shared by the library and CLI.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
    /// Certified p-adic digits (or series terms) behind the verdict, when meaningful.
    pub precision: Option<i64>,
}

impl Check {
    pub fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
            precision: None,
        }
    }

    pub fn pass(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, true, detail)
    }

    pub fn fail(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(name, false, detail)
    }

    pub fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check {
            status: Status::Skip,
            ..Self::new(name, true, detail)
        }
    }

    pub fn with_precision(mut self, k: i64) -> Self {
        self.precision = Some(k);
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// One named global sign with the evidence that fixed it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignEntry {
    pub name: String,
    pub value: i8,
    pub evidence: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignLedger {
    pub entries: Vec<SignEntry>,
    /// Names whose observations disagreed.
    pub conflicts: Vec<String>,
}

impl SignLedger {
    /// Record an observation; returns false if it contradicts an earlier one.
    pub fn record(&mut self, name: &str, value: i8, evidence: impl Into<String>) -> bool {
        let evidence = evidence.into();
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(e) if e.value == value => {
                e.evidence.push(evidence);
                true
            }
            Some(e) => {
                e.evidence.push(format!("CONFLICT ({value:+}): {evidence}"));
                if !self.conflicts.iter().any(|c| c == name) {
                    self.conflicts.push(name.to_string());
                }
                false
            }
            None => {
                self.entries.push(SignEntry {
                    name: name.to_string(),
                    value,
                    evidence: vec![evidence],
                });
                true
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<i8> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value)
    }

    pub fn merge(&mut self, other: &SignLedger) {
        for e in &other.entries {
            for ev in &e.evidence {
                self.record(&e.name, e.value, ev.clone());
            }
        }
        for c in &other.conflicts {
            if !self.conflicts.contains(c) {
                self.conflicts.push(c.clone());
            }
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.conflicts.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub input_digest: String,
    pub checks: Vec<Check>,
    pub signs: SignLedger,
    pub elapsed_ms: u64,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        RunReport {
            command: command.into(),
            input_digest: String::new(),
            checks: Vec::new(),
            signs: SignLedger::default(),
            elapsed_ms: 0,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed) && self.signs.is_consistent()
    }

    /// Plain-text table over the same records.
    pub fn render_table(&self) -> String {
        let mut out = format!("== {} ==\n", self.command);
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            let prec = c
                .precision
                .map(|k| format!(" [prec {k}]"))
                .unwrap_or_default();
            out.push_str(&format!("{tag}  {}{prec}: {}\n", c.name, c.detail));
        }
        for e in &self.signs.entries {
            out.push_str(&format!(
                "sign {} = {:+} ({} observations)\n",
                e.name,
                e.value,
                e.evidence.len()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_detects_conflicts() {
        let mut l = SignLedger::default();
        assert!(l.record("eps", -1, "p=3"));
        assert!(l.record("eps", -1, "p=7"));
        assert!(l.is_consistent());
        assert!(!l.record("eps", 1, "p=11"));
        assert!(!l.is_consistent());
        assert_eq!(l.get("eps"), Some(-1));
    }

    #[test]
    fn skip_counts_as_passing() {
        let mut r = RunReport::new("x");
        r.push(Check::skip("a", "n/a"));
        r.push(Check::pass("b", ""));
        assert!(r.all_passed());
        r.push(Check::fail("c", "boom"));
        assert!(!r.all_passed());
        assert!(r.render_table().contains("FAIL  c: boom"));
    }
}
