use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use gapscope_core::citations::{build_graph, load_documents};
use gapscope_core::dnnf::{compile, Cnf};
use gapscope_core::dsl::parse_constraints;
use gapscope_core::logic::export_dimacs;
use gapscope_core::snapshot::{BuildInputs, Snapshot};
use gapscope_core::survey::{load_corpus, parse_config, Sheet, SurveyCorpus};
use gapscope_core::views::{self, RecommendRequest, ValidateRequest};
use gapscope_server::ServerOptions;
use serde_json::json;

use crate::failure::Failure;
use crate::render;
use crate::{CitationArgs, CountArgs, ExportArgs, IngestArgs, RecommendArgs, ServeArgs, Source};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_opt(path: Option<&PathBuf>) -> Result<Option<String>> {
    path.map(|p| read(p)).transpose()
}

/// The sheet given on the command line, or the one the config names,
/// resolved next to the config file.
fn sheet_text(config_path: &Path, config_text: &str, sheet: Option<&PathBuf>) -> Result<String> {
    if let Some(s) = sheet {
        return read(s);
    }
    let config = parse_config(config_text).with_context(|| format!("parsing {}", config_path.display()))?;
    let named = &config.input_file.filename;
    let path = if named.is_absolute() {
        named.clone()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(named)
    };
    read(&path)
}

/// Write `text` to `path` through a sibling temp file, or to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    let name = path.file_name().map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let written = fs::write(&tmp, text).and_then(|()| fs::rename(&tmp, path));
    if written.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    written.with_context(|| format!("writing {}", path.display()))
}

fn no_source() -> anyhow::Error {
    Failure::usage("give --snapshot <dir> or -c <config> [-s <sheet>] [-x <constraints>]").into()
}

impl Source {
    fn config_path(&self) -> Result<&PathBuf> {
        self.config.as_ref().ok_or_else(no_source)
    }

    /// Load the snapshot, or build one in memory from the raw inputs.
    pub fn snapshot(&self) -> Result<Snapshot> {
        if let Some(dir) = &self.snapshot {
            return Snapshot::load(dir).with_context(|| format!("loading snapshot {}", dir.display()));
        }
        let config_path = self.config_path()?;
        let config = read(config_path)?;
        let inputs = BuildInputs {
            sheet_csv: sheet_text(config_path, &config, self.sheet.as_ref())?,
            config,
            constraints: read_opt(self.constraints.as_ref())?,
            ..BuildInputs::default()
        };
        let (snap, diagnostics) = Snapshot::build(&inputs)?;
        render::warn(&diagnostics);
        Ok(snap)
    }

    /// Just the corpus, without compiling anything.
    pub fn corpus(&self) -> Result<SurveyCorpus> {
        if self.snapshot.is_some() {
            return Ok(self.snapshot()?.corpus);
        }
        let config_path = self.config_path()?;
        let text = read(config_path)?;
        let config = parse_config(&text).with_context(|| format!("parsing {}", config_path.display()))?;
        let sheet = Sheet::parse_csv(&sheet_text(config_path, &text, self.sheet.as_ref())?)?;
        let report = load_corpus(&config, &sheet)?;
        render::warn(&report.diagnostics);
        Ok(report.corpus)
    }
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let config = read(&a.config)?;
    let documents = match &a.texts {
        Some(dir) => load_documents(dir)?,
        None => Vec::new(),
    };
    if a.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Failure::usage("thresholds must lie in [0, 1]").into());
    }
    let inputs = BuildInputs {
        sheet_csv: sheet_text(&a.config, &config, a.sheet.as_ref())?,
        config,
        constraints: read_opt(a.constraints.as_ref())?,
        preferences: read_opt(a.preferences.as_ref())?,
        documents,
        embeddings: read_opt(a.embeddings.as_ref())?,
        thresholds: a.thresholds.clone(),
    };
    let (snap, diagnostics) = Snapshot::build(&inputs)?;
    render::warn(&diagnostics);
    snap.save(&a.out)?;
    println!(
        "wrote {}: {} papers, {} tags, {} unwritten profiles, {} citation graphs",
        a.out.display(),
        snap.corpus.papers.len(),
        snap.theory().leaf_count(),
        snap.model_count,
        snap.citations.len()
    );
    Ok(())
}

pub fn validate(source: &Source, json: bool) -> Result<()> {
    let report = match &source.snapshot {
        Some(_) => views::validate(&source.snapshot()?, &ValidateRequest::default())?,
        None => {
            let corpus = source.corpus()?;
            let directives = match &source.constraints {
                Some(p) => parse_constraints(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => Vec::new(),
            };
            views::violations(&corpus, &directives)?
        }
    };
    if json {
        print!("{}", views::to_json(&report));
    } else {
        print!("{}", render::violations(&report));
    }
    match report["violation_count"].as_u64().unwrap_or(0) {
        0 => Ok(()),
        n => Err(Failure::domain("violations", format!("{n} violation(s) found")).into()),
    }
}

pub fn count(a: &CountArgs) -> Result<()> {
    let Some(path) = &a.dimacs else {
        let v = views::count(&a.source.snapshot()?);
        print!("{}", if a.json { views::to_json(&v) } else { render::count(&v) });
        return Ok(());
    };
    let cnf = Cnf::parse_dimacs(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(bad) = a.assume.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > cnf.var_count) {
        return Err(Failure::usage(format!("--assume {bad} is not a literal over {} variables", cnf.var_count)).into());
    }
    let graph = compile(&cnf)?.condition_all(&a.assume);
    let audit = a
        .audit
        .then(|| graph.audit().map_or_else(|e| e.to_string(), |()| "ok".to_string()));
    let v = json!({
        "variables": cnf.var_count,
        "clauses": cnf.clauses.len(),
        "assumed": a.assume,
        "nodes": graph.nodes().len(),
        "edges": graph.edge_count(),
        "model_count": graph.count_models().to_string(),
        "audit": audit,
    });
    if a.json {
        print!("{}", views::to_json(&v));
    } else {
        println!("models: {}", v["model_count"].as_str().unwrap_or_default());
        if let Some(r) = &audit {
            println!("audit: {r}");
        }
    }
    match audit {
        Some(r) if r != "ok" => Err(Failure::domain("audit", r).into()),
        _ => Ok(()),
    }
}

pub fn recommend(a: &RecommendArgs) -> Result<()> {
    let snap = a.source.snapshot()?;
    let preferences = match &a.preferences {
        Some(p) => Some(read(p)?.lines().map(str::to_string).collect()),
        None => None,
    };
    let req = RecommendRequest {
        k: a.k,
        preferences,
        focus: a.focus.clone(),
    };
    let deadline = Instant::now() + Duration::from_secs(a.timeout_secs);
    let v = views::recommend(&snap, &req, Some(deadline))?;
    print!("{}", if a.json { views::to_json(&v) } else { render::recommendations(&v) });
    let made = v["recommendations"].as_array().map_or(0, Vec::len);
    if made == 0 {
        return Err(Failure::domain("exhausted", "no papers remain to be written").into());
    }
    if made < a.k {
        eprintln!("note: only {made} of {} requested profiles remain", a.k);
    }
    Ok(())
}

pub fn citations(a: &CitationArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(Failure::usage(format!("--threshold {} must lie in [0, 1]", a.threshold)).into());
    }
    let corpus = a.source.corpus()?;
    let docs = load_documents(&a.texts)?;
    let graph = build_graph(&corpus, &docs, a.threshold)?;
    let text = if a.json {
        views::to_json(&views::citation_graph(&graph))
    } else if a.dot {
        graph.to_dot(&corpus)
    } else {
        render::citations(&graph, &corpus)
    };
    emit(a.out.as_deref(), &text)
}

pub fn export(a: &ExportArgs) -> Result<()> {
    let snap = a.source.snapshot()?;
    let text = if a.dimacs {
        export_dimacs(snap.theory())
    } else {
        snap.base.to_string()
    };
    emit(a.out.as_deref(), &text)
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let snap = Snapshot::load(&a.snapshot).with_context(|| format!("loading snapshot {}", a.snapshot.display()))?;
    let options = ServerOptions {
        snapshot_dir: Some(a.snapshot.clone()),
        recommend_timeout: Duration::from_secs(a.recommend_timeout_secs),
        workers: a.workers,
        cors_origin: a.cors_origin.clone(),
        static_dir: a.static_dir.clone(),
    };
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    eprintln!("serving {} on port {}", a.snapshot.display(), a.port);
    runtime.block_on(gapscope_server::serve(snap, a.port, options))?;
    Ok(())
}
