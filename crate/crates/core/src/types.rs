//! Small enums shared by the marketplace, the lab simulator and sealing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestType {
    Pcr,
    Antigen,
    Antibody,
}

impl TestType {
    pub const ALL: [TestType; 3] = [TestType::Pcr, TestType::Antigen, TestType::Antibody];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestType::Pcr => "PCR",
            TestType::Antigen => "Antigen",
            TestType::Antibody => "Antibody",
        }
    }
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown test type {s:?}"))
    }
}

/// Ordered negative < inconclusive < positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnostic {
    Negative,
    Inconclusive,
    Positive,
}

impl Diagnostic {
    pub const ALL: [Diagnostic; 3] = [Diagnostic::Negative, Diagnostic::Inconclusive, Diagnostic::Positive];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnostic::Negative => "negative",
            Diagnostic::Inconclusive => "inconclusive",
            Diagnostic::Positive => "positive",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Diagnostic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown diagnostic {s:?}"))
    }
}
