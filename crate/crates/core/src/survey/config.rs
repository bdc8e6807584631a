//! Survey configuration: where the paper list and the taxonomy headers live
//! in the exported spreadsheet.
//!
//! All row and column indices are 0-based and every range is inclusive on
//! both ends, so `title: 3` names the fourth column of the sheet.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("range `{key}` has start {start} after stop {stop}")]
    RangeOrder { key: String, start: usize, stop: usize },
    #[error("excluded row {row} lies outside paper rows {start}..={stop}")]
    ExcludeOutOfRange { row: usize, start: usize, stop: usize },
    #[error("{0} taxonomies are marked default; exactly one is allowed")]
    DefaultCount(usize),
    #[error("duplicate taxonomy name `{0}`")]
    DuplicateTaxonomy(String),
}

/// Inclusive index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub stop: usize,
}

impl Span {
    pub fn new(start: usize, stop: usize) -> Self {
        Span { start, stop }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.stop
    }

    pub fn len(&self) -> usize {
        self.stop - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.stop
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub filename: PathBuf,
    pub active_worksheet: Option<String>,
}

/// Columns holding paper metadata. Only the title is mandatory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMap {
    pub title: usize,
    pub abstract_text: Option<usize>,
    pub authors: Option<usize>,
    pub venue: Option<usize>,
    pub year: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRows {
    pub span: Span,
    pub exclude: BTreeSet<usize>,
}

impl PaperRows {
    /// Rows that hold candidate papers, ascending.
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.span.iter().filter(|r| !self.exclude.contains(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomySpec {
    pub name: String,
    pub default: bool,
    pub header_rows: Span,
    pub columns: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub tab_name: String,
    pub title_text: String,
    pub input_file: InputFile,
    pub key_map: KeyMap,
    pub paper_rows: PaperRows,
    pub taxonomies: Vec<TaxonomySpec>,
}

impl SurveyConfig {
    pub fn default_taxonomy(&self) -> &TaxonomySpec {
        self.taxonomies
            .iter()
            .find(|t| t.default)
            .expect("validated config has a default taxonomy")
    }
}

// Raw document shape, everything optional so that missing keys get our own
// diagnostics instead of serde's.

#[derive(Deserialize)]
struct RawConfig {
    tab_name: Option<String>,
    title_text: Option<String>,
    input_file: Option<RawInputFile>,
    papers_list: Option<RawPapersList>,
    taxonomy: Option<OneOrMany<RawTaxonomy>>,
}

#[derive(Deserialize)]
struct RawInputFile {
    filename: Option<String>,
    active_worksheet: Option<String>,
}

#[derive(Deserialize)]
struct RawPapersList {
    key_map: Option<RawKeyMap>,
    rows: Option<RawRange>,
}

#[derive(Deserialize)]
struct RawKeyMap {
    title: Option<usize>,
    #[serde(rename = "abstract")]
    abstract_text: Option<usize>,
    authors: Option<usize>,
    venue: Option<usize>,
    year: Option<usize>,
}

#[derive(Deserialize)]
struct RawRange {
    start: Option<usize>,
    stop: Option<usize>,
    exclude: Option<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawTaxonomy {
    name: Option<String>,
    default: Option<bool>,
    rows: Option<RawRange>,
    columns: Option<RawRange>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn required<T>(value: Option<T>, key: &str) -> Result<T, ConfigError> {
    value.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
}

fn span(raw: Option<RawRange>, key: &str) -> Result<(Span, Option<Vec<usize>>), ConfigError> {
    let raw = required(raw, key)?;
    let start = required(raw.start, &format!("{key}.start"))?;
    let stop = required(raw.stop, &format!("{key}.stop"))?;
    if start > stop {
        return Err(ConfigError::RangeOrder {
            key: key.to_string(),
            start,
            stop,
        });
    }
    Ok((Span { start, stop }, raw.exclude))
}

/// Parse the YAML survey configuration.
pub fn parse_config(text: &str) -> Result<SurveyConfig, ConfigError> {
    let raw: RawConfig =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let tab_name = required(raw.tab_name, "tab_name")?;
    let title_text = raw.title_text.unwrap_or_default();
    let input = required(raw.input_file, "input_file")?;
    let input_file = InputFile {
        filename: PathBuf::from(required(input.filename, "input_file.filename")?),
        active_worksheet: input.active_worksheet,
    };

    let papers = required(raw.papers_list, "papers_list")?;
    let km = required(papers.key_map, "papers_list.key_map")?;
    let key_map = KeyMap {
        title: required(km.title, "papers_list.key_map.title")?,
        abstract_text: km.abstract_text,
        authors: km.authors,
        venue: km.venue,
        year: km.year,
    };
    let (rows, exclude) = span(papers.rows, "papers_list.rows")?;
    let exclude: BTreeSet<usize> = exclude.unwrap_or_default().into_iter().collect();
    if let Some(&row) = exclude.iter().find(|r| !rows.contains(**r)) {
        return Err(ConfigError::ExcludeOutOfRange {
            row,
            start: rows.start,
            stop: rows.stop,
        });
    }

    let raw_taxonomies = match required(raw.taxonomy, "taxonomy")? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(ts) => ts,
    };
    if raw_taxonomies.is_empty() {
        return Err(ConfigError::MissingKey("taxonomy".into()));
    }
    let multiple = raw_taxonomies.len() > 1;
    let mut taxonomies = Vec::with_capacity(raw_taxonomies.len());
    for (i, t) in raw_taxonomies.into_iter().enumerate() {
        let name = match t.name {
            Some(n) => n,
            None if multiple => format!("{tab_name} {}", i + 1),
            None => tab_name.clone(),
        };
        let (header_rows, _) = span(t.rows, "taxonomy.rows")?;
        let (columns, _) = span(t.columns, "taxonomy.columns")?;
        if taxonomies.iter().any(|s: &TaxonomySpec| s.name == name) {
            return Err(ConfigError::DuplicateTaxonomy(name));
        }
        taxonomies.push(TaxonomySpec {
            name,
            default: t.default.unwrap_or(false),
            header_rows,
            columns,
        });
    }
    match taxonomies.iter().filter(|t| t.default).count() {
        0 => taxonomies[0].default = true,
        1 => {}
        n => return Err(ConfigError::DefaultCount(n)),
    }

    Ok(SurveyConfig {
        tab_name,
        title_text,
        input_file,
        key_map,
        paper_rows: PaperRows {
            span: rows,
            exclude,
        },
        taxonomies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_CONFIG: &str = "\
tab_name: Taxonomy
title_text: Taxonomy View of Robot Interface Design Elements
input_file:
  filename: /path/to/spreadsheet.xlsx
  active_worksheet: main
papers_list:
  key_map:
    title: 3
    abstract:
    authors: 2
    venue: 1
    year: 0
  rows:
    start: 7
    stop: 184
    exclude:
      - 141
      - 151
taxonomy:
  rows:
    start: 1
    stop: 4
  columns:
    start: 69
    stop: 146
";

    #[test]
    fn parses_reference_layout() {
        let cfg = parse_config(SAMPLE_CONFIG).unwrap();
        assert_eq!(cfg.tab_name, "Taxonomy");
        assert_eq!(cfg.paper_rows.span, Span::new(7, 184));
        assert_eq!(cfg.paper_rows.exclude, BTreeSet::from([141, 151]));
        assert_eq!(cfg.paper_rows.rows().count(), 176);
        assert_eq!(cfg.key_map.title, 3);
        assert_eq!(cfg.key_map.venue, Some(1));
        assert_eq!(cfg.key_map.year, Some(0));
        assert_eq!(cfg.key_map.authors, Some(2));
        assert_eq!(cfg.key_map.abstract_text, None);
        assert_eq!(cfg.taxonomies.len(), 1);
        let t = cfg.default_taxonomy();
        assert_eq!(t.header_rows, Span::new(1, 4));
        assert_eq!(t.columns, Span::new(69, 146));
        assert_eq!(t.name, "Taxonomy");
        assert_eq!(cfg.input_file.active_worksheet.as_deref(), Some("main"));
    }

    #[test]
    fn exclude_defaults_to_empty() {
        let text = SAMPLE_CONFIG.replace("    exclude:\n      - 141\n      - 151\n", "");
        let cfg = parse_config(&text).unwrap();
        assert!(cfg.paper_rows.exclude.is_empty());
        assert_eq!(cfg.paper_rows.rows().count(), 178);
    }

    #[test]
    fn rejects_reversed_range() {
        let text = SAMPLE_CONFIG.replace("    start: 7\n    stop: 184", "    stop: 4\n    start: 7");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::RangeOrder {
                key: "papers_list.rows".into(),
                start: 7,
                stop: 4
            })
        );
    }

    #[test]
    fn rejects_missing_keys_and_bad_types() {
        let text = SAMPLE_CONFIG.replace("tab_name: Taxonomy\n", "");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::MissingKey("tab_name".into()))
        );
        let text = SAMPLE_CONFIG.replace("title: 3", "");
        assert!(matches!(parse_config(&text), Err(ConfigError::MissingKey(k)) if k.ends_with("title")));
        let text = SAMPLE_CONFIG.replace("stop: 184", "stop: lots");
        assert!(matches!(parse_config(&text), Err(ConfigError::Syntax(_))));
        let text = SAMPLE_CONFIG.split("taxonomy:").next().unwrap().to_string();
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::MissingKey("taxonomy".into()))
        );
    }

    #[test]
    fn exclude_must_lie_in_range() {
        let text = SAMPLE_CONFIG.replace("- 151", "- 190");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::ExcludeOutOfRange { row: 190, .. })
        ));
    }

    #[test]
    fn multiple_taxonomies() {
        let base = SAMPLE_CONFIG.split("taxonomy:").next().unwrap();
        let text = format!(
            "{base}taxonomy:
  - name: Design
    rows: {{start: 1, stop: 4}}
    columns: {{start: 69, stop: 100}}
  - name: Evaluation
    default: true
    rows: {{start: 1, stop: 2}}
    columns: {{start: 101, stop: 146}}
"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.taxonomies.len(), 2);
        assert_eq!(cfg.default_taxonomy().name, "Evaluation");
        assert!(!cfg.taxonomies[0].default);

        let both = text.replace("  - name: Design\n", "  - name: Design\n    default: true\n");
        assert_eq!(parse_config(&both), Err(ConfigError::DefaultCount(2)));
    }
}
