//! Plain-text renderings of the JSON views.

use std::fmt::Write;

use gapscope_core::citations::CitationGraph;
use gapscope_core::logic::Source;
use gapscope_core::survey::{Diagnostic, SurveyCorpus};
use serde_json::Value;

pub fn warn(diagnostics: &[Diagnostic]) {
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
}

fn strings(v: &Value) -> Vec<&str> {
    v.as_array()
        .map(|a| a.iter().filter_map(Value::as_str).collect())
        .unwrap_or_default()
}

fn list(v: &Value) -> String {
    let items = strings(v);
    if items.is_empty() {
        "-".into()
    } else {
        items.join(", ")
    }
}

pub fn count(v: &Value) -> String {
    let c = &v["clauses"];
    format!(
        "tags              {}\nknown profiles    {}\nunwritten papers  {}\nclauses           {} structural, {} semantic, {} blocking\n",
        v["tag_count"], v["distinct_profiles"], v["model_count"].as_str().unwrap_or("?"),
        c["structural"], c["semantic"], c["blocking"],
    )
}

pub fn violations(v: &Value) -> String {
    let rows = v["violations"].as_array().cloned().unwrap_or_default();
    if rows.is_empty() {
        return "no violations\n".into();
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:<40} {:<40} SOURCE", "PAPER", "TITLE", "CLAUSE");
    for r in rows {
        let sources: Vec<Source> = serde_json::from_value(r["sources"].clone()).unwrap_or_default();
        let sources: Vec<String> = sources.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            out,
            "{:<6} {:<40} {:<40} {}",
            r["paper_id"],
            r["title"].as_str().unwrap_or(""),
            r["clause"].as_str().unwrap_or(""),
            sources.join("; ")
        );
    }
    out
}

pub fn recommendations(v: &Value) -> String {
    let recs = v["recommendations"].as_array().cloned().unwrap_or_default();
    let mut out = String::new();
    for (i, r) in recs.iter().enumerate() {
        let _ = writeln!(out, "#{}  {}", i + 1, list(&r["profile"]));
        let _ = writeln!(out, "    preferences kept:    {}", list(&r["satisfied_preferences"]));
        let _ = writeln!(out, "    preferences dropped: {}", list(&r["rejected_preferences"]));
        for n in r["neighbors"].as_array().into_iter().flatten() {
            let year = n["year"].as_i64().map_or_else(|| "n.d.".to_string(), |y| y.to_string());
            let _ = writeln!(
                out,
                "    [{}] {} ({year}), distance {}",
                n["paper_id"],
                n["title"].as_str().unwrap_or(""),
                n["distance"]
            );
            let _ = writeln!(out, "        extend: {}", list(&n["extend"]));
            let _ = writeln!(out, "        relax:  {}", list(&n["relax"]));
        }
    }
    if v["exhausted"].as_bool() == Some(true) {
        let _ = writeln!(out, "no further papers remain");
    }
    out
}

pub fn citations(g: &CitationGraph, corpus: &SurveyCorpus) -> String {
    let title = |id| corpus.paper(id).map_or("?", |p| p.title.as_str());
    let mut out = String::new();
    for e in &g.edges {
        let _ = writeln!(out, "{} -> {}\t{:.3}\t{} -> {}", e.from, e.to, e.score, title(e.from), title(e.to));
    }
    let _ = writeln!(out, "{} edges at threshold {}", g.edges.len(), g.threshold);
    out
}
