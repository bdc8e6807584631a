//! Small corpora for unit tests.

use std::fmt::Write as _;

use crate::survey::SurveyCorpus;
use crate::synth::{SynthPaper, SyntheticSurvey};

/// Two-level taxonomy from `(group, children)` pairs; a group without
/// children is itself a leaf. Each profile lists marked leaf indices.
pub fn corpus_from(groups: &[(&str, &[&str])], profiles: &[&[usize]]) -> SurveyCorpus {
    let mut outline = String::new();
    for (group, children) in groups {
        let _ = writeln!(outline, "{group}");
        for c in *children {
            let _ = writeln!(outline, "  {c}");
        }
    }
    let mut s = SyntheticSurvey::new("test", &outline);
    for (i, p) in profiles.iter().enumerate() {
        s = s.with_paper(SynthPaper::new(format!("Paper {i}"), 2000 + i as i32, p));
    }
    s.corpus()
}
