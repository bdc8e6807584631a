//! Profiles for papers nobody has written yet: greedy preference conditioning
//! over the compiled theory, plus nearest known neighbours for each result.

use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::dnnf::{compile_with, CompileError, CompileOptions, Cnf};
use crate::dsl::ClassTerm;
use crate::logic::{CnfTheory, Lit, LogicError};
use crate::survey::{PaperId, SurveyCorpus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecommendError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("preference line {line}: {message}")]
    Preference { line: usize, message: String },
    #[error("focus term `{term}`: {source}")]
    Focus { term: String, source: LogicError },
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Parse a preference list: one signed classpath per line, order significant.
/// Blank lines and `#` comments are skipped.
pub fn parse_preferences(text: &str, theory: &CnfTheory) -> Result<Vec<Lit>, RecommendError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RecommendError::Preference {
            line: i + 1,
            message,
        };
        let term: ClassTerm = line.parse().map_err(|e| err(format!("{e}")))?;
        let lit = theory.resolve(&term).map_err(|e| err(e.to_string()))?;
        if !seen.insert(lit.unsigned_abs()) {
            return Err(err(format!("`{}` already has a preference", term.classpath())));
        }
        out.push(lit);
    }
    Ok(out)
}

/// Every variable negative, in variable order.
pub fn default_preferences(theory: &CnfTheory) -> Vec<Lit> {
    theory.variables.iter().map(|v| -(v.index as Lit)).collect()
}

/// Resolve signed classpath strings such as `~Trace > Full`.
pub fn resolve_terms(theory: &CnfTheory, terms: &[String]) -> Result<Vec<Lit>, RecommendError> {
    terms
        .iter()
        .map(|t| {
            let focus_err = |source: LogicError| RecommendError::Focus {
                term: t.clone(),
                source,
            };
            let term: ClassTerm = t
                .parse()
                .map_err(|e: crate::dsl::TermError| focus_err(LogicError::UnknownClass(e.to_string())))?;
            theory.resolve(&term).map_err(focus_err)
        })
        .collect()
}

pub fn render_lit(theory: &CnfTheory, lit: Lit) -> String {
    let cp = &theory.variable(lit.unsigned_abs()).classpath;
    if lit < 0 {
        format!("~{cp}")
    } else {
        cp.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neighbor {
    pub paper_id: PaperId,
    pub title: String,
    pub year: Option<i32>,
    pub distance: usize,
    /// Leaves the neighbour would have to add.
    pub extend: Vec<String>,
    /// Leaves the neighbour would have to drop.
    pub relax: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    /// Leaf assignment in leaf order.
    pub leaves: Vec<bool>,
    /// Classpaths of the true leaves.
    pub profile: Vec<String>,
    pub satisfied_preferences: Vec<String>,
    pub rejected_preferences: Vec<String>,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecommendOutcome {
    pub recommendations: Vec<Recommendation>,
    /// Set when the theory ran out of unblocked models before `k` was reached.
    pub exhausted: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RecommendOptions {
    pub k: usize,
    pub focus: Vec<Lit>,
    pub neighbor_limit: Option<usize>,
    pub compile: CompileOptions,
}

pub const DEFAULT_NEIGHBORS: usize = 3;

/// Generate up to `opts.k` profiles. Each round recompiles the theory with
/// the focus units and the blocking clauses of earlier rounds, then applies
/// preferences greedily in order.
pub fn recommend(
    theory: &CnfTheory,
    corpus: &SurveyCorpus,
    preferences: &[Lit],
    opts: &RecommendOptions,
) -> Result<RecommendOutcome, RecommendError> {
    if opts.k == 0 {
        return Err(RecommendError::ZeroK);
    }
    let mut cnf = theory.to_cnf();
    for &f in &opts.focus {
        cnf.clauses.push(vec![f]);
    }
    let wanted: HashMap<u32, bool> = preferences
        .iter()
        .map(|&l| (l.unsigned_abs(), l > 0))
        .collect();
    let limit = opts.neighbor_limit.unwrap_or(DEFAULT_NEIGHBORS);
    let mut out = Vec::new();
    for _ in 0..opts.k {
        let Some(rec) = recommend_one(theory, &cnf, preferences, &wanted, &opts.compile)? else {
            return Ok(RecommendOutcome {
                recommendations: out,
                exhausted: true,
            });
        };
        cnf.clauses
            .push(theory.blocking_clause(&rec.0).lits().to_vec());
        let (leaves, satisfied, rejected) = rec;
        out.push(Recommendation {
            profile: leaf_names(theory, &leaves),
            neighbors: nearest_neighbors(&leaves, corpus, limit),
            satisfied_preferences: satisfied.iter().map(|&l| render_lit(theory, l)).collect(),
            rejected_preferences: rejected.iter().map(|&l| render_lit(theory, l)).collect(),
            leaves,
        });
    }
    Ok(RecommendOutcome {
        recommendations: out,
        exhausted: false,
    })
}

type Round = (Vec<bool>, Vec<Lit>, Vec<Lit>);

fn recommend_one(
    theory: &CnfTheory,
    cnf: &Cnf,
    preferences: &[Lit],
    wanted: &HashMap<u32, bool>,
    compile: &CompileOptions,
) -> Result<Option<Round>, RecommendError> {
    let mut g = compile_with(cnf, compile)?;
    if !g.is_consistent() {
        return Ok(None);
    }
    let (mut satisfied, mut rejected) = (Vec::new(), Vec::new());
    for &p in preferences {
        let c = g.condition(p);
        if c.is_consistent() {
            g = c;
            satisfied.push(p);
        } else {
            rejected.push(p);
        }
    }
    let model = g
        .extract_model(wanted)
        .expect("conditioning kept the graph consistent");
    Ok(Some((theory.leaf_profile(&model), satisfied, rejected)))
}

fn leaf_names(theory: &CnfTheory, leaves: &[bool]) -> Vec<String> {
    theory
        .leaf_vars
        .iter()
        .zip(leaves)
        .filter(|(_, &b)| b)
        .map(|(&v, _)| theory.variable(v).classpath.clone())
        .collect()
}

/// Known papers closest to `leaves` by Hamming distance; ties go to the more
/// recent paper, then by title, then by id.
pub fn nearest_neighbors(leaves: &[bool], corpus: &SurveyCorpus, limit: usize) -> Vec<Neighbor> {
    let names: Vec<String> = corpus
        .taxonomy()
        .leaves()
        .iter()
        .map(|l| l.classpath())
        .collect();
    assert_eq!(leaves.len(), names.len(), "profile length differs from leaf count");
    let mut ranked: Vec<(usize, usize)> = (0..corpus.papers.len())
        .map(|i| {
            let row = corpus.profile(i);
            (i, row.iter().zip(leaves).filter(|(a, b)| a != b).count())
        })
        .collect();
    ranked.sort_by_key(|&(i, d)| {
        let p = &corpus.papers[i];
        (d, Reverse(p.year.unwrap_or(i32::MIN)), p.title.clone(), p.id)
    });
    ranked
        .into_iter()
        .take(limit)
        .map(|(i, distance)| {
            let p = &corpus.papers[i];
            let row = corpus.profile(i);
            let pick = |want: bool| -> Vec<String> {
                (0..names.len())
                    .filter(|&j| leaves[j] == want && row[j] != want)
                    .map(|j| names[j].clone())
                    .collect()
            };
            Neighbor {
                paper_id: p.id,
                title: p.title.clone(),
                year: p.year,
                distance,
                extend: pick(true),
                relax: pick(false),
            }
        })
        .collect()
}
