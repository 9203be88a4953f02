use std::collections::BTreeMap;

use serde::Serialize;

use crate::lang::{is_letter, Script};

/// Fraction of letters per script. Non-letters are excluded from the
/// denominator; text without letters is `{Other: 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptProfile {
    pub fractions: BTreeMap<Script, f64>,
    pub letters: usize,
}

impl ScriptProfile {
    pub fn fraction(&self, script: Script) -> f64 {
        self.fractions.get(&script).copied().unwrap_or(0.0)
    }

    /// Script with the largest share; ties resolve to the earlier script.
    pub fn dominant(&self) -> Script {
        let mut best = (Script::Other, f64::NEG_INFINITY);
        for (&s, &f) in &self.fractions {
            if f > best.1 {
                best = (s, f);
            }
        }
        best.0
    }
}

pub fn detect_script(text: &str) -> ScriptProfile {
    let mut counts: BTreeMap<Script, usize> = BTreeMap::new();
    let mut letters = 0usize;
    for c in text.chars().filter(|&c| is_letter(c)) {
        *counts.entry(Script::of(c)).or_default() += 1;
        letters += 1;
    }
    if letters == 0 {
        return ScriptProfile {
            fractions: BTreeMap::from([(Script::Other, 1.0)]),
            letters: 0,
        };
    }
    let fractions = counts
        .into_iter()
        .map(|(s, n)| (s, n as f64 / letters as f64))
        .collect();
    ScriptProfile { fractions, letters }
}
