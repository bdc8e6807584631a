//! JSON payloads shared by the command line and the HTTP API. Both front
//! ends render these values with [`to_json`], so identical inputs give
//! byte-identical output.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analytics::{
    class_insights, class_tree, filter_papers, project_tags, tag_frequencies, timeline_series, treemap,
    AnalyticsError, PaperFilter, SearchMode, TAG_SUMMARY_SIZE,
};
use crate::citations::{CitationGraph, DEFAULT_THRESHOLD};
use crate::dnnf::{CompileError, CompileOptions};
use crate::dsl::{parse_constraints, ConstraintDirective};
use crate::logic::validate_papers;
use crate::recommend::{parse_preferences, recommend as run_recommend, resolve_terms, RecommendError, RecommendOptions};
use crate::snapshot::Snapshot;
use crate::survey::{PaperId, SurveyCorpus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ViewError {
    #[error("{field}: {message}")]
    BadRequest { field: String, message: String },
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Capacity(String),
}

impl ViewError {
    pub fn bad(field: &str, message: impl Into<String>) -> Self {
        ViewError::BadRequest {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ViewError::BadRequest { .. } => "bad_request",
            ViewError::NotFound(_) => "not_found",
            ViewError::Capacity(_) => "capacity",
        }
    }

    /// `{error, detail}` envelope used for every failure.
    pub fn envelope(&self) -> Value {
        error_envelope(self.kind(), &self.to_string())
    }
}

pub fn error_envelope(kind: &str, detail: &str) -> Value {
    json!({ "error": kind, "detail": detail })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("view types serialize")
}

pub fn survey(snap: &Snapshot) -> Value {
    let c = &snap.corpus;
    json!({
        "tab_name": c.tab_name,
        "title_text": c.title_text,
        "paper_count": c.papers.len(),
        "tag_count": c.membership().leaf_count(),
        "taxonomies": c.taxonomies.iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
        "default_taxonomy": c.taxonomy().name,
        "thresholds": snap.citations.iter().map(|g| g.threshold).collect::<Vec<_>>(),
    })
}

/// Query parameters shared by the paper list and the timeline.
pub fn parse_filter(params: &BTreeMap<String, String>) -> Result<PaperFilter, ViewError> {
    let year = |field: &str| -> Result<Option<i32>, ViewError> {
        match params.get(field).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| ViewError::bad(field, format!("`{s}` is not a year"))),
        }
    };
    let list = |field: &str| -> Vec<String> {
        params
            .get(field)
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    };
    let mode = match params.get("mode").map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => SearchMode::All,
        Some(m) => m.parse().map_err(|e: String| ViewError::bad("mode", e))?,
    };
    let f = PaperFilter {
        terms: list("q"),
        mode,
        year_min: year("year_min")?,
        year_max: year("year_max")?,
        tags: list("tags"),
    };
    if let (Some(lo), Some(hi)) = (f.year_min, f.year_max) {
        if lo > hi {
            return Err(ViewError::bad("year_min", format!("{lo} is after year_max {hi}")));
        }
    }
    Ok(f)
}

fn analytics_err(field: &str) -> impl Fn(AnalyticsError) -> ViewError + '_ {
    move |e| ViewError::bad(field, e.to_string())
}

fn paper_json(snap: &Snapshot, id: PaperId) -> Value {
    let c = &snap.corpus;
    let i = c.paper_index(id).expect("ids come from the corpus");
    let p = &c.papers[i];
    json!({
        "id": p.id,
        "title": p.title,
        "authors": p.authors,
        "venue": p.venue,
        "year": p.year,
        "abstract": p.abstract_text,
        "tags": c.paper_tags(i),
    })
}

pub fn papers(snap: &Snapshot, f: &PaperFilter) -> Result<Value, ViewError> {
    let ids = filter_papers(&snap.corpus, f).map_err(analytics_err("tags"))?;
    Ok(json!({
        "count": ids.len(),
        "papers": ids.iter().map(|&id| paper_json(snap, id)).collect::<Vec<_>>(),
    }))
}

pub fn timeline(snap: &Snapshot, f: &PaperFilter) -> Result<Value, ViewError> {
    let t = timeline_series(&snap.corpus, f).map_err(analytics_err("tags"))?;
    Ok(json!({
        "series": t.series.iter().map(|(y, n)| json!({"year": y, "count": n})).collect::<Vec<_>>(),
        "undated": t.undated,
    }))
}

fn taxonomy_named<'a>(snap: &'a Snapshot, name: Option<&str>) -> Result<&'a crate::survey::Taxonomy, ViewError> {
    let name = name.unwrap_or("default");
    snap.corpus
        .taxonomy_named(name)
        .ok_or_else(|| ViewError::bad("name", format!("no taxonomy named `{name}`")))
}

pub fn taxonomy(snap: &Snapshot, name: Option<&str>) -> Result<Value, ViewError> {
    let t = taxonomy_named(snap, name)?;
    Ok(json!({
        "name": t.name,
        "default": t.is_default,
        "tree": value(&class_tree(&snap.corpus, t)),
    }))
}

pub fn treemap_view(snap: &Snapshot, name: Option<&str>, level: Option<&str>) -> Result<Value, ViewError> {
    let t = taxonomy_named(snap, name).map_err(|e| match e {
        ViewError::BadRequest { message, .. } => ViewError::bad("taxonomy", message),
        other => other,
    })?;
    let level = match level.map(str::trim).filter(|s| !s.is_empty()) {
        None => 1,
        Some(s) => match s.parse::<usize>() {
            Ok(l) if l >= 1 => l,
            _ => return Err(ViewError::bad("level", format!("`{s}` is not a level (1 or more)"))),
        },
    };
    Ok(json!({
        "taxonomy": t.name,
        "level": level,
        "cells": value(&treemap(&snap.corpus, t, level)),
    }))
}

/// Citation graph at a precomputed threshold (the default one if absent).
pub fn network(snap: &Snapshot, threshold: Option<&str>) -> Result<Value, ViewError> {
    let available: Vec<f64> = snap.citations.iter().map(|g| g.threshold).collect();
    let t = match threshold.map(str::trim).filter(|s| !s.is_empty()) {
        None if available.contains(&DEFAULT_THRESHOLD) => DEFAULT_THRESHOLD,
        None => *available
            .first()
            .ok_or_else(|| ViewError::NotFound("snapshot has no citation graphs".into()))?,
        Some(s) => s
            .parse()
            .map_err(|_| ViewError::bad("threshold", format!("`{s}` is not a number")))?,
    };
    let g = snap.citation_graph(t).ok_or_else(|| {
        ViewError::bad(
            "threshold",
            format!("{t} is not precomputed; available: {available:?}"),
        )
    })?;
    Ok(citation_graph(g))
}

pub fn affinity(snap: &Snapshot) -> Value {
    let c = &snap.corpus;
    match &snap.projections.affinity {
        None => json!({ "points": [], "degenerate": true, "variance": [0.0, 0.0], "total_variance": 0.0 }),
        Some(p) => {
            let points: Vec<Value> = p
                .points
                .iter()
                .map(|pt| {
                    let tags = pt
                        .paper_id
                        .and_then(|id| c.paper_index(id))
                        .map(|i| c.paper_tags(i))
                        .unwrap_or_default();
                    json!({ "paper_id": pt.paper_id, "x": pt.x, "y": pt.y, "tags": tags })
                })
                .collect();
            json!({
                "points": points,
                "degenerate": p.degenerate,
                "variance": p.variance,
                "total_variance": p.total_variance,
            })
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRequest {
    pub paper_ids: Vec<PaperId>,
}

pub fn affinity_summary(snap: &Snapshot, req: &SummaryRequest) -> Result<Value, ViewError> {
    if let Some(bad) = req.paper_ids.iter().find(|id| snap.corpus.paper(**id).is_none()) {
        return Err(ViewError::bad("paper_ids", format!("unknown paper {bad}")));
    }
    let tags = tag_frequencies(&snap.corpus, &req.paper_ids, TAG_SUMMARY_SIZE);
    Ok(json!({
        "selected": req.paper_ids.len(),
        "tags": tags.iter().map(|(cp, n)| json!({"classpath": cp, "count": n})).collect::<Vec<_>>(),
    }))
}

pub fn insights(snap: &Snapshot) -> Value {
    let i = class_insights(&snap.corpus, TAG_SUMMARY_SIZE);
    json!({
        "most_popular": value(&i.most_popular),
        "least_popular": value(&i.least_popular),
        "no_papers_yet": i.no_papers_yet,
        "distinct_profiles": i.distinct_profiles,
        "unwritten_papers": snap.model_count.to_string(),
    })
}

pub fn count(snap: &Snapshot) -> Value {
    let t = snap.theory();
    json!({
        "tag_count": t.leaf_count(),
        "variables": t.var_count(),
        "known_papers": snap.corpus.papers.len(),
        "distinct_profiles": snap.corpus.distinct_profiles().len(),
        "clauses": {
            "structural": t.structural.len(),
            "semantic": t.semantic.len(),
            "blocking": t.blocking.len(),
        },
        "model_count": snap.model_count.to_string(),
    })
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    /// Constraint text to check instead of the snapshot's own.
    #[serde(default)]
    pub constraints: Option<String>,
}

pub fn validate(snap: &Snapshot, req: &ValidateRequest) -> Result<Value, ViewError> {
    match &req.constraints {
        Some(text) => {
            let directives = parse_constraints(text).map_err(|e| ViewError::bad("constraints", e.to_string()))?;
            violations(&snap.corpus, &directives)
        }
        None => violations(&snap.corpus, &snap.directives),
    }
}

/// Papers whose profiles break a hierarchy rule or a directive.
pub fn violations(corpus: &SurveyCorpus, directives: &[ConstraintDirective]) -> Result<Value, ViewError> {
    let found = validate_papers(corpus, directives).map_err(|e| ViewError::bad("constraints", e.to_string()))?;
    let rows: Vec<Value> = found
        .iter()
        .map(|v| {
            let title = corpus.paper(v.paper_id).map(|p| p.title.clone());
            json!({
                "paper_id": v.paper_id,
                "title": title,
                "clause": v.clause_text,
                "sources": value(&v.provenance),
            })
        })
        .collect();
    Ok(json!({ "violation_count": rows.len(), "violations": rows }))
}

/// A citation graph exactly as `/api/network` returns it.
pub fn citation_graph(g: &CitationGraph) -> Value {
    value(g)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    #[serde(default = "one")]
    pub k: usize,
    /// Signed classpaths in priority order; the snapshot's list when absent.
    #[serde(default)]
    pub preferences: Option<Vec<String>>,
    #[serde(default)]
    pub focus: Vec<String>,
}

fn one() -> usize {
    1
}

impl Default for RecommendRequest {
    fn default() -> Self {
        RecommendRequest {
            k: 1,
            preferences: None,
            focus: Vec::new(),
        }
    }
}

pub fn recommend(snap: &Snapshot, req: &RecommendRequest, deadline: Option<Instant>) -> Result<Value, ViewError> {
    let theory = snap.theory();
    if req.k == 0 {
        return Err(ViewError::bad("k", "must be at least 1"));
    }
    let preferences = match &req.preferences {
        None => snap.preferences.clone(),
        Some(lines) => parse_preferences(&lines.join("\n"), theory)
            .map_err(|e| ViewError::bad("preferences", e.to_string()))?,
    };
    let focus = resolve_terms(theory, &req.focus).map_err(|e| ViewError::bad("focus", e.to_string()))?;
    let opts = RecommendOptions {
        k: req.k,
        focus,
        neighbor_limit: None,
        compile: CompileOptions {
            deadline,
            ..CompileOptions::default()
        },
    };
    let out = run_recommend(theory, &snap.corpus, &preferences, &opts).map_err(|e| match e {
        RecommendError::Compile(CompileError::Deadline) => {
            ViewError::Capacity("recommendation did not finish within the time limit".into())
        }
        RecommendError::Compile(c) => ViewError::Capacity(c.to_string()),
        other => ViewError::bad("request", other.to_string()),
    })?;
    let extra: Vec<Vec<bool>> = out.recommendations.iter().map(|r| r.leaves.clone()).collect();
    let coords = project_tags(&snap.corpus, &extra).ok();
    let known = snap.corpus.papers.len();
    let recs: Vec<Value> = out
        .recommendations
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = value(r);
            let point = coords
                .as_ref()
                .map(|p| json!({ "x": p.points[known + i].x, "y": p.points[known + i].y }));
            v["coordinates"] = point.unwrap_or(Value::Null);
            v
        })
        .collect();
    Ok(json!({ "exhausted": out.exhausted, "recommendations": recs }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::fixture;

    fn snap() -> Snapshot {
        Snapshot::build(&fixture::inputs()).unwrap().0
    }

    fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn output_is_sorted_and_stable() {
        let s = snap();
        let text = to_json(&count(&s));
        assert_eq!(text, to_json(&count(&s)));
        let keys: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(count(&s)["model_count"], "3");
    }

    #[test]
    fn filter_parsing() {
        let f = parse_filter(&params(&[("q", "plan, trace"), ("mode", "any"), ("year_min", "2019")])).unwrap();
        assert_eq!(f.terms, ["plan", "trace"]);
        assert_eq!(f.mode, SearchMode::Any);
        let bad = parse_filter(&params(&[("year_min", "2021"), ("year_max", "2020")]));
        assert!(matches!(bad, Err(ViewError::BadRequest { field, .. }) if field == "year_min"));
        let bad = parse_filter(&params(&[("mode", "some")]));
        assert!(matches!(bad, Err(ViewError::BadRequest { field, .. }) if field == "mode"));
        let bad = parse_filter(&params(&[("year_max", "soon")]));
        assert!(matches!(bad, Err(ViewError::BadRequest { field, .. }) if field == "year_max"));
    }

    #[test]
    fn papers_and_timeline() {
        let s = snap();
        let all = papers(&s, &PaperFilter::default()).unwrap();
        assert_eq!(all["count"], 3);
        assert_eq!(all["papers"][0]["title"], "Full trace methods");
        let t = timeline(&s, &PaperFilter::default()).unwrap();
        assert_eq!(t["series"].as_array().unwrap().len(), 3);
        let bad = papers(&s, &PaperFilter { tags: vec!["Nope".into()], ..Default::default() });
        assert!(matches!(bad, Err(ViewError::BadRequest { .. })));
    }

    #[test]
    fn network_thresholds() {
        let s = snap();
        assert_eq!(network(&s, None).unwrap()["threshold"], 0.25);
        assert_eq!(network(&s, Some("0.15")).unwrap()["edges"].as_array().unwrap().len(), 2);
        assert!(matches!(network(&s, Some("0.2")), Err(ViewError::BadRequest { .. })));
        assert!(matches!(network(&s, Some("x")), Err(ViewError::BadRequest { .. })));
    }

    #[test]
    fn recommendations_carry_coordinates() {
        let s = snap();
        let out = recommend(&s, &RecommendRequest { k: 2, ..Default::default() }, None).unwrap();
        let recs = out["recommendations"].as_array().unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0]["coordinates"]["x"].is_number());
        let exhausted = recommend(&s, &RecommendRequest { k: 9, ..Default::default() }, None).unwrap();
        assert_eq!(exhausted["exhausted"], true);
        assert_eq!(exhausted["recommendations"].as_array().unwrap().len(), 3);
        let bad = recommend(&s, &RecommendRequest { k: 0, ..Default::default() }, None);
        assert!(matches!(bad, Err(ViewError::BadRequest { field, .. }) if field == "k"));
        let bad = recommend(
            &s,
            &RecommendRequest { focus: vec!["Trace > Nope".into()], ..Default::default() },
            None,
        );
        assert!(matches!(bad, Err(ViewError::BadRequest { field, .. }) if field == "focus"));
        let late = recommend(&s, &RecommendRequest::default(), Some(Instant::now()));
        assert!(matches!(late, Err(ViewError::Capacity(_))));
    }

    #[test]
    fn validation_and_insights() {
        let s = snap();
        assert_eq!(validate(&s, &ValidateRequest::default()).unwrap()["violation_count"], 0);
        let req = ValidateRequest {
            constraints: Some("implies:Trace > Full,Cost\n".into()),
        };
        let v = validate(&s, &req).unwrap();
        assert_eq!(v["violation_count"], 0);
        let req = ValidateRequest {
            constraints: Some("\nimplies:Trace > Partial,Cost\n".into()),
        };
        let v = validate(&s, &req).unwrap();
        assert_eq!(v["violation_count"], 1);
        assert_eq!(v["violations"][0]["sources"][0]["line"], 2);
        let i = insights(&s);
        assert_eq!(i["unwritten_papers"], "3");
        assert_eq!(i["no_papers_yet"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn summary_and_taxonomy() {
        let s = snap();
        let ids: Vec<PaperId> = s.corpus.papers.iter().map(|p| p.id).collect();
        let v = affinity_summary(&s, &SummaryRequest { paper_ids: ids.clone() }).unwrap();
        assert_eq!(v["tags"][0]["classpath"], "Cost");
        assert!(affinity_summary(&s, &SummaryRequest { paper_ids: vec![999] }).is_err());
        assert_eq!(taxonomy(&s, None).unwrap()["tree"]["paper_count"], 3);
        assert!(taxonomy(&s, Some("other")).is_err());
        assert_eq!(treemap_view(&s, None, Some("1")).unwrap()["cells"].as_array().unwrap().len(), 2);
        assert!(matches!(treemap_view(&s, None, Some("0")), Err(ViewError::BadRequest { field, .. }) if field == "level"));
        assert_eq!(affinity(&s)["points"].as_array().unwrap().len(), 3);
    }
}
