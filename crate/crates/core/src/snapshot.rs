//! The snapshot directory: everything the batch stages produce and the
//! server consumes, as plain JSON files.
//!
//! ```text
//! corpus.json         papers, taxonomies, membership
//! theory.json         constraint text, preferences, clauses with provenance
//! citations-<t>.json  one citation graph per threshold
//! projections.json    tag-space and affinity coordinates
//! meta.json           source digests, file digests, build time
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{affinity_coordinates, parse_embeddings, project_tags, AnalyticsError, Projection};
use crate::citations::{build_graph, CitationError, CitationGraph, DocumentText};
use crate::dnnf::{compile_with, CompileError, CompileOptions, DnnfGraph};
use crate::dsl::{parse_constraints, ConstraintDirective, DslError};
use crate::logic::{build_theory, CnfTheory, Lit, LogicError};
use crate::recommend::{default_preferences, parse_preferences, RecommendError};
use crate::survey::{
    load_corpus, parse_config, ConfigError, Diagnostic, LoadError, Sheet, SheetError, SurveyCorpus,
};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("sheet: {0}")]
    Sheet(#[from] SheetError),
    #[error("corpus: {0}")]
    Load(#[from] LoadError),
    #[error("constraints: {0}")]
    Dsl(#[from] DslError),
    #[error("constraints: {0}")]
    Logic(#[from] LogicError),
    #[error("preferences: {0}")]
    Preferences(#[from] RecommendError),
    #[error("citations: {0}")]
    Citations(#[from] CitationError),
    #[error("projection: {0}")]
    Analytics(#[from] AnalyticsError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("{file} does not match the digest recorded in meta.json")]
    Digest { file: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw inputs for a snapshot build.
#[derive(Debug, Clone, Default)]
pub struct BuildInputs {
    pub config: String,
    pub sheet_csv: String,
    pub constraints: Option<String>,
    pub preferences: Option<String>,
    pub documents: Vec<DocumentText>,
    pub embeddings: Option<String>,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryFile {
    /// Constraint DSL source as given.
    pub constraints: String,
    /// Preference list source, if one was supplied.
    pub preferences: Option<String>,
    pub theory: CnfTheory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub tags: Option<Projection>,
    pub affinity: Option<Projection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// SHA-256 of each input, keyed by role.
    pub sources: BTreeMap<String, String>,
    /// SHA-256 of each snapshot file except this one.
    pub files: BTreeMap<String, String>,
    pub built_at_unix: u64,
    pub thresholds: Vec<f64>,
    pub diagnostics: Vec<String>,
}

/// A loaded snapshot with the base theory compiled.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub corpus: SurveyCorpus,
    pub theory_file: TheoryFile,
    pub directives: Vec<ConstraintDirective>,
    pub preferences: Vec<Lit>,
    pub citations: Vec<CitationGraph>,
    pub projections: Projections,
    pub meta: Meta,
    pub base: DnnfGraph,
    pub model_count: BigUint,
}

pub fn threshold_file_name(t: f64) -> String {
    format!("citations-{t}.json")
}

impl Snapshot {
    pub fn theory(&self) -> &CnfTheory {
        &self.theory_file.theory
    }

    pub fn build(inputs: &BuildInputs) -> Result<(Snapshot, Vec<Diagnostic>), SnapshotError> {
        let config = parse_config(&inputs.config)?;
        let sheet = Sheet::parse_csv(&inputs.sheet_csv)?;
        let report = load_corpus(&config, &sheet)?;
        let corpus = report.corpus;
        let constraints = inputs.constraints.clone().unwrap_or_default();
        let directives = parse_constraints(&constraints)?;
        let theory = build_theory(&corpus, &directives)?;
        let preferences = match &inputs.preferences {
            Some(text) => parse_preferences(text, &theory)?,
            None => default_preferences(&theory),
        };

        let mut citations = Vec::new();
        if !inputs.documents.is_empty() {
            for &t in &inputs.thresholds {
                citations.push(build_graph(&corpus, &inputs.documents, t)?);
            }
        }
        let tags = project_tags(&corpus, &[]).ok();
        let affinity = match &inputs.embeddings {
            Some(text) => Some(affinity_coordinates(&corpus, Some(&parse_embeddings(text)?))?),
            None => tags.clone(),
        };

        let mut sources = BTreeMap::new();
        sources.insert("config".to_string(), sha256_hex(inputs.config.as_bytes()));
        sources.insert("sheet".to_string(), sha256_hex(inputs.sheet_csv.as_bytes()));
        if let Some(c) = &inputs.constraints {
            sources.insert("constraints".into(), sha256_hex(c.as_bytes()));
        }
        if let Some(p) = &inputs.preferences {
            sources.insert("preferences".into(), sha256_hex(p.as_bytes()));
        }
        if let Some(e) = &inputs.embeddings {
            sources.insert("embeddings".into(), sha256_hex(e.as_bytes()));
        }
        for d in &inputs.documents {
            sources.insert(format!("texts/{}.txt", d.paper_id), sha256_hex(d.body.as_bytes()));
        }
        let built_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let meta = Meta {
            sources,
            files: BTreeMap::new(),
            built_at_unix,
            thresholds: citations.iter().map(|g| g.threshold).collect(),
            diagnostics: report.diagnostics.iter().map(|d| d.to_string()).collect(),
        };
        let theory_file = TheoryFile {
            constraints,
            preferences: inputs.preferences.clone(),
            theory,
        };
        let snap = Snapshot::assemble(
            corpus,
            theory_file,
            directives,
            preferences,
            citations,
            Projections { tags, affinity },
            meta,
        )?;
        Ok((snap, report.diagnostics))
    }

    fn assemble(
        corpus: SurveyCorpus,
        theory_file: TheoryFile,
        directives: Vec<ConstraintDirective>,
        preferences: Vec<Lit>,
        citations: Vec<CitationGraph>,
        projections: Projections,
        meta: Meta,
    ) -> Result<Snapshot, SnapshotError> {
        let base = compile_with(&theory_file.theory.to_cnf(), &CompileOptions::default())?;
        let model_count = base.count_models();
        Ok(Snapshot {
            corpus,
            theory_file,
            directives,
            preferences,
            citations,
            projections,
            meta,
            base,
            model_count,
        })
    }

    pub fn citation_graph(&self, threshold: f64) -> Option<&CitationGraph> {
        self.citations.iter().find(|g| g.threshold == threshold)
    }

    fn files(&self) -> Vec<(String, String)> {
        let pretty = |v: &serde_json::Value| {
            let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
            s.push('\n');
            s
        };
        let mut files = vec![
            ("corpus.json".to_string(), pretty(&self.corpus.to_json_value())),
            ("theory.json".to_string(), pretty(&to_value(&self.theory_file))),
            ("projections.json".to_string(), pretty(&to_value(&self.projections))),
        ];
        for g in &self.citations {
            files.push((threshold_file_name(g.threshold), pretty(&to_value(g))));
        }
        files
    }

    /// Write the snapshot to `dir`, replacing any previous one. Files are
    /// staged in a sibling directory and moved into place at the end, so a
    /// failed write never leaves a partial snapshot behind.
    pub fn save(&self, dir: &Path) -> Result<(), SnapshotError> {
        let files = self.files();
        let mut meta = self.meta.clone();
        meta.files = files
            .iter()
            .map(|(name, body)| (name.clone(), sha256_hex(body.as_bytes())))
            .collect();
        let staging = sibling(dir, "tmp");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        let write = |name: &str, body: &str| {
            let path = staging.join(name);
            fs::write(&path, body).map_err(io_err(&path))
        };
        for (name, body) in &files {
            write(name, body)?;
        }
        let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        meta_json.push('\n');
        write("meta.json", &meta_json)?;

        let old = sibling(dir, "old");
        if dir.exists() {
            if old.exists() {
                fs::remove_dir_all(&old).map_err(io_err(&old))?;
            }
            fs::rename(dir, &old).map_err(io_err(dir))?;
        }
        fs::rename(&staging, dir).map_err(io_err(dir))?;
        if old.exists() {
            fs::remove_dir_all(&old).map_err(io_err(&old))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Snapshot, SnapshotError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(io_err(&path))
        };
        let format_err = |file: &str| {
            let file = file.to_string();
            move |e: serde_json::Error| SnapshotError::Format {
                file,
                message: e.to_string(),
            }
        };
        let meta: Meta = serde_json::from_str(&read("meta.json")?).map_err(format_err("meta.json"))?;
        let mut bodies = BTreeMap::new();
        for (name, digest) in &meta.files {
            let body = read(name)?;
            if &sha256_hex(body.as_bytes()) != digest {
                return Err(SnapshotError::Digest { file: name.clone() });
            }
            bodies.insert(name.clone(), body);
        }
        let get = |name: &str| {
            bodies.get(name).ok_or_else(|| SnapshotError::Format {
                file: name.to_string(),
                message: "missing from meta.json".into(),
            })
        };
        let corpus = SurveyCorpus::from_json_str(get("corpus.json")?)?;
        let theory_file: TheoryFile =
            serde_json::from_str(get("theory.json")?).map_err(format_err("theory.json"))?;
        let projections: Projections =
            serde_json::from_str(get("projections.json")?).map_err(format_err("projections.json"))?;
        let directives = parse_constraints(&theory_file.constraints)?;
        let preferences = match &theory_file.preferences {
            Some(text) => parse_preferences(text, &theory_file.theory)?,
            None => default_preferences(&theory_file.theory),
        };
        let mut citations = Vec::new();
        for &t in &meta.thresholds {
            let name = threshold_file_name(t);
            citations.push(serde_json::from_str(get(&name)?).map_err(format_err(&name))?);
        }
        Snapshot::assemble(corpus, theory_file, directives, preferences, citations, projections, meta)
    }
}

fn sibling(dir: &Path, tag: &str) -> PathBuf {
    let name = dir.file_name().map_or_else(|| "snapshot".into(), |n| n.to_string_lossy().to_string());
    dir.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

fn to_value<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).expect("snapshot types serialize")
}
