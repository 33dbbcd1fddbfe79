use std::fmt;

use serde::{Deserialize, Serialize};

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// Outcome of one mechanical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl VerificationVerdict {
    /// Passes iff `statistic <= threshold`. NaN never passes.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self::new(name.into(), statistic, threshold, Comparison::AtMost)
    }

    /// Passes iff `statistic >= threshold`.
    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self::new(name.into(), statistic, threshold, Comparison::AtLeast)
    }

    fn new(name: String, statistic: f64, threshold: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::AtMost => statistic <= threshold,
            Comparison::AtLeast => statistic >= threshold,
        };
        Self {
            name,
            pass,
            statistic,
            threshold,
            comparison,
            seed: None,
            warning: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warning = Some(warning.into());
        self
    }
}

impl fmt::Display for VerificationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        write!(
            f,
            "[{}] {}: {:.6e} {op} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.threshold
        )?;
        if let Some(seed) = self.seed {
            write!(f, " (seed {seed})")?;
        }
        if let Some(w) = &self.warning {
            write!(f, " warning: {w}")?;
        }
        Ok(())
    }
}
