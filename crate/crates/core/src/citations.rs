//! Citation network from extracted paper text: find the reference section,
//! split it into entries and fuzzy-match each entry against corpus titles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survey::{PaperId, SurveyCorpus};

pub const DEFAULT_THRESHOLD: f64 = 0.25;
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.15, 0.25, 0.35];
const MIN_ENTRY_CHARS: usize = 20;
const HEADINGS: [&str; 3] = ["references", "bibliography", "literature cited"];

#[derive(Debug, Error)]
pub enum CitationError {
    #[error("text for paper {0}, which is not in the corpus")]
    UnknownPaper(PaperId),
    #[error("threshold {0} is outside (0, 1)")]
    Threshold(f64),
    #[error("`{0}` is not named <paper_id>.txt")]
    FileName(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentText {
    pub paper_id: PaperId,
    pub body: String,
}

/// The reference section of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSection<'a> {
    pub text: &'a str,
    /// No heading was found and `text` is the whole body.
    pub fallback: bool,
}

static NUMBERING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\d+|[ivxlcdm]+)(?:\.\d+)*\.?\s+").unwrap());
static BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+)\]").unwrap());
static NUMBERED_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(\d+)\.[ \t]").unwrap());
static BLANK_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[ \t]*\r?\n").unwrap());

fn is_heading(line: &str) -> bool {
    let lower = line.trim().to_lowercase();
    let body = NUMBERING.replace(&lower, "");
    let body = body.trim().trim_end_matches(':').trim_end();
    HEADINGS.contains(&body)
}

/// Text after the last reference heading, or the whole body if none.
pub fn locate_references(body: &str) -> ReferenceSection<'_> {
    let mut start = None;
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        offset += line.len();
        if is_heading(line) {
            start = Some(offset);
        }
    }
    match start {
        Some(s) => ReferenceSection {
            text: &body[s..],
            fallback: false,
        },
        None => ReferenceSection {
            text: body,
            fallback: true,
        },
    }
}

/// Byte offsets `(marker_start, text_start)` of markers numbered consecutively
/// from the first one.
fn ascending(markers: impl Iterator<Item = (usize, usize, u64)>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut expect = None;
    for (start, end, n) in markers {
        if expect.is_none_or(|e| e == n) {
            out.push((start, end));
            expect = Some(n + 1);
        }
    }
    out
}

fn cut(section: &str, marks: &[(usize, usize)]) -> Vec<String> {
    marks
        .iter()
        .enumerate()
        .map(|(i, &(_, from))| {
            let to = marks.get(i + 1).map_or(section.len(), |m| m.0);
            section[from..to].to_string()
        })
        .collect()
}

pub fn split_references(section: &str) -> Vec<String> {
    let bracket = ascending(BRACKET.captures_iter(section).filter_map(|c| {
        let m = c.get(0)?;
        Some((m.start(), m.end(), c[1].parse().ok()?))
    }));
    let numbered = ascending(NUMBERED_LINE.captures_iter(section).filter_map(|c| {
        let m = c.get(0)?;
        Some((m.start(), m.end(), c[1].parse().ok()?))
    }));
    let raw = if bracket.len() >= 3 {
        cut(section, &bracket)
    } else if numbered.len() >= 3 {
        cut(section, &numbered)
    } else {
        BLANK_LINE.split(section).map(str::to_string).collect()
    };
    raw.into_iter()
        .map(|e| e.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|e| e.chars().count() >= MIN_ENTRY_CHARS)
        .collect()
}

/// Lowercase, drop everything but letters, digits and whitespace, and
/// collapse runs of whitespace.
pub fn normalize(text: &str) -> String {
    let kept: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Edit distance, giving up with `None` once it must exceed `bound`.
fn levenshtein_within(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > bound {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > bound {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= bound).then_some(d)
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    levenshtein_within(&a, &b, usize::MAX).expect("unbounded")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub score: f64,
    /// The normalized window of the reference that attains `score`.
    pub span: String,
}

/// Best window score of `title` inside `reference`, if it is at most `max`.
/// Windows start at token boundaries and span as many characters as the
/// normalized title.
pub fn match_within(reference: &str, title: &str, max: f64) -> Option<Match> {
    let title: Vec<char> = normalize(title).chars().collect();
    let reference: Vec<char> = normalize(reference).chars().collect();
    best_window(&reference, &title, max)
}

fn best_window(reference: &[char], title: &[char], max: f64) -> Option<Match> {
    if title.is_empty() {
        return None;
    }
    let len = title.len();
    // The epsilon keeps thresholds like 0.15 * 20 from rounding down.
    let mut bound = (max * len as f64 + 1e-9).floor() as usize;
    let mut best: Option<(usize, usize)> = None;
    let starts = std::iter::once(0).chain(
        reference
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == ' ')
            .map(|(i, _)| i + 1),
    );
    for s in starts {
        let window = &reference[s..(s + len).min(reference.len())];
        if let Some(d) = levenshtein_within(window, title, bound) {
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s));
                bound = d;
                if d == 0 {
                    break;
                }
            }
        }
        if s + len >= reference.len() {
            break;
        }
    }
    best.map(|(d, s)| Match {
        score: d as f64 / len as f64,
        span: reference[s..(s + len).min(reference.len())].iter().collect(),
    })
}

/// Full score in `[0, 1]`; 0 means the normalized title occurs verbatim.
pub fn match_score(reference: &str, title: &str) -> f64 {
    match_within(reference, title, f64::INFINITY).map_or(1.0, |m| m.score.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationEdge {
    pub from: PaperId,
    pub to: PaperId,
    pub score: f64,
    pub matched_span: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationGraph {
    pub threshold: f64,
    pub nodes: Vec<PaperId>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<CitationEdge>,
    /// Documents where no reference heading was found.
    pub fallback_documents: Vec<PaperId>,
}

/// One edge per citing/cited pair at most: each reference goes to its
/// best-scoring other paper (lowest id on ties) when that score is within
/// `threshold`.
pub fn build_graph(
    corpus: &SurveyCorpus,
    texts: &[DocumentText],
    threshold: f64,
) -> Result<CitationGraph, CitationError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CitationError::Threshold(threshold));
    }
    for t in texts {
        if corpus.paper(t.paper_id).is_none() {
            return Err(CitationError::UnknownPaper(t.paper_id));
        }
    }
    let titles: Vec<(PaperId, Vec<char>)> = corpus
        .papers
        .iter()
        .map(|p| (p.id, normalize(&p.title).chars().collect::<Vec<char>>()))
        .filter(|(_, t)| !t.is_empty())
        .collect();

    let per_doc: Vec<(PaperId, bool, Vec<CitationEdge>)> = texts
        .par_iter()
        .map(|doc| {
            let section = locate_references(&doc.body);
            let mut edges = Vec::new();
            for entry in split_references(section.text) {
                let reference: Vec<char> = normalize(&entry).chars().collect();
                let mut best: Option<(PaperId, Match)> = None;
                for (id, title) in &titles {
                    if *id == doc.paper_id {
                        continue;
                    }
                    let cap = best.as_ref().map_or(threshold, |(_, m)| m.score.min(threshold));
                    if let Some(m) = best_window(&reference, title, cap) {
                        if best.as_ref().is_none_or(|(_, b)| m.score < b.score) {
                            best = Some((*id, m));
                        }
                    }
                }
                if let Some((to, m)) = best {
                    edges.push(CitationEdge {
                        from: doc.paper_id,
                        to,
                        score: m.score,
                        matched_span: m.span,
                    });
                }
            }
            (doc.paper_id, section.fallback, edges)
        })
        .collect();

    let mut pairs: BTreeMap<(PaperId, PaperId), CitationEdge> = BTreeMap::new();
    let mut fallback_documents = Vec::new();
    for (id, fallback, edges) in per_doc {
        if fallback {
            fallback_documents.push(id);
        }
        for e in edges {
            let key = (e.from, e.to);
            let keep = pairs.get(&key).is_none_or(|old| {
                e.score < old.score || (e.score == old.score && e.matched_span < old.matched_span)
            });
            if keep {
                pairs.insert(key, e);
            }
        }
    }
    fallback_documents.sort_unstable();
    fallback_documents.dedup();
    Ok(CitationGraph {
        threshold,
        nodes: corpus.papers.iter().map(|p| p.id).collect(),
        edges: pairs.into_values().collect(),
        fallback_documents,
    })
}

/// Read every `<paper_id>.txt` in `dir`, sorted by id.
pub fn load_documents(dir: &Path) -> Result<Vec<DocumentText>, CitationError> {
    let io = |path: &Path, source| CitationError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut docs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        let paper_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or(CitationError::FileName(name))?;
        let bytes = std::fs::read(&path).map_err(|e| io(&path, e))?;
        docs.push(DocumentText {
            paper_id,
            body: String::from_utf8_lossy(&bytes).into_owned(),
        });
    }
    docs.sort_by_key(|d| d.paper_id);
    Ok(docs)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl CitationGraph {
    pub fn to_dot(&self, corpus: &SurveyCorpus) -> String {
        let mut out = String::from("digraph citations {\n");
        for id in &self.nodes {
            let title = corpus.paper(*id).map_or("", |p| p.title.as_str());
            let _ = writeln!(out, "  p{id} [label=\"{}\"];", dot_escape(title));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  p{} -> p{} [label=\"{:.3}\"];", e.from, e.to, e.score);
        }
        out.push_str("}\n");
        out
    }
}
