use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::SurveyConfig;
use super::sheet::Sheet;
use super::taxonomy::{build_taxonomy, TaxonomyError, TaxonomyNode};

pub type PaperId = usize;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("sheet has {rows} rows but the config reads up to row {needed}")]
    SheetTooSmall { rows: usize, needed: usize },
    #[error("taxonomy `{name}`: {source}")]
    Taxonomy {
        name: String,
        #[source]
        source: TaxonomyError,
    },
    #[error("taxonomy `{name}` overlaps the metadata column {col}")]
    MetadataOverlap { name: String, col: usize },
    #[error("corpus JSON: {0}")]
    Json(String),
}

/// A non-fatal problem found while reading the sheet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Row rejected because its title cell is blank.
    EmptyTitle { row: usize },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::EmptyTitle { row } => write!(f, "row {row}: empty title, row rejected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    /// Spreadsheet row index.
    pub id: PaperId,
    pub title: String,
    pub authors: String,
    pub venue: String,
    pub year: Option<i32>,
    #[serde(rename = "abstract")]
    pub abstract_text: Option<String>,
}

/// Papers × leaf classes, leaves in column order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Membership {
    leaf_count: usize,
    rows: Vec<Vec<bool>>,
}

impl Membership {
    pub fn new(leaf_count: usize, rows: Vec<Vec<bool>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == leaf_count));
        Membership { leaf_count, rows }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn paper_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, paper_index: usize) -> &[bool] {
        &self.rows[paper_index]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn get(&self, paper_index: usize, leaf: usize) -> bool {
        self.rows[paper_index][leaf]
    }

    /// Per-paper lists of marked leaf indices.
    pub fn to_index_lists(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
            .collect()
    }

    pub fn from_index_lists(leaf_count: usize, lists: &[Vec<usize>]) -> Option<Self> {
        let mut rows = Vec::with_capacity(lists.len());
        for list in lists {
            let mut row = vec![false; leaf_count];
            for &i in list {
                *row.get_mut(i)? = true;
            }
            rows.push(row);
        }
        Some(Membership { leaf_count, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub name: String,
    pub is_default: bool,
    pub root: TaxonomyNode,
    pub membership: Membership,
}

impl Taxonomy {
    pub fn leaves(&self) -> Vec<&TaxonomyNode> {
        self.root.leaves()
    }

    /// Every class except the synthetic root, preorder.
    pub fn classes(&self) -> Vec<&TaxonomyNode> {
        self.root.preorder().into_iter().skip(1).collect()
    }

    pub fn find_classpath(&self, classpath: &str) -> Option<&TaxonomyNode> {
        let segments: Vec<String> = classpath
            .split('>')
            .map(|s| s.trim().to_string())
            .collect();
        if segments.iter().any(String::is_empty) {
            return None;
        }
        self.root.find(&segments)
    }

    /// Leaf indices (column order) covered by `node`.
    pub fn leaf_range(&self, node: &TaxonomyNode) -> std::ops::Range<usize> {
        let leaves = self.leaves();
        let lo = leaves
            .iter()
            .position(|l| l.column_span.0 >= node.column_span.0)
            .unwrap_or(leaves.len());
        let hi = leaves
            .iter()
            .position(|l| l.column_span.0 > node.column_span.1)
            .unwrap_or(leaves.len());
        lo..hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyCorpus {
    pub tab_name: String,
    pub title_text: String,
    pub papers: Vec<Paper>,
    pub taxonomies: Vec<Taxonomy>,
    default_index: usize,
}

impl SurveyCorpus {
    pub fn new(
        tab_name: String,
        title_text: String,
        papers: Vec<Paper>,
        taxonomies: Vec<Taxonomy>,
    ) -> Self {
        let default_index = taxonomies
            .iter()
            .position(|t| t.is_default)
            .expect("one default taxonomy");
        SurveyCorpus {
            tab_name,
            title_text,
            papers,
            taxonomies,
            default_index,
        }
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomies[self.default_index]
    }

    pub fn taxonomy_named(&self, name: &str) -> Option<&Taxonomy> {
        if name == "default" {
            return Some(self.taxonomy());
        }
        self.taxonomies.iter().find(|t| t.name == name)
    }

    /// Membership matrix of the default taxonomy.
    pub fn membership(&self) -> &Membership {
        &self.taxonomy().membership
    }

    pub fn paper_index(&self, id: PaperId) -> Option<usize> {
        self.papers.binary_search_by_key(&id, |p| p.id).ok()
    }

    pub fn paper(&self, id: PaperId) -> Option<&Paper> {
        self.paper_index(id).map(|i| &self.papers[i])
    }

    /// Leaf profile of the paper at `index` in the default taxonomy.
    pub fn profile(&self, index: usize) -> &[bool] {
        self.membership().row(index)
    }

    /// Classpaths of the default-taxonomy leaves marked for a paper.
    pub fn paper_tags(&self, index: usize) -> Vec<String> {
        let leaves = self.taxonomy().leaves();
        self.profile(index)
            .iter()
            .zip(leaves)
            .filter(|(&b, _)| b)
            .map(|(_, l)| l.classpath())
            .collect()
    }

    /// Distinct leaf profiles of the known papers.
    pub fn distinct_profiles(&self) -> BTreeSet<Vec<bool>> {
        self.membership().rows().iter().cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: SurveyCorpus,
    pub diagnostics: Vec<Diagnostic>,
}

fn parse_year(cell: &str) -> Option<i32> {
    let cell = cell.trim();
    if let Ok(y) = cell.parse::<i32>() {
        return Some(y);
    }
    // Numeric cells sometimes export as `2019.0`.
    let f: f64 = cell.parse().ok()?;
    (f.fract() == 0.0 && f.abs() < 1e6).then_some(f as i32)
}

fn optional_text(sheet: &Sheet, row: usize, col: Option<usize>) -> Option<String> {
    col.and_then(|c| sheet.value(row, c)).map(str::to_string)
}

/// Read papers, taxonomies and membership marks as laid out by `config`.
pub fn load_corpus(config: &SurveyConfig, sheet: &Sheet) -> Result<LoadReport, LoadError> {
    let needed = config
        .taxonomies
        .iter()
        .map(|t| t.header_rows.stop)
        .chain([config.paper_rows.span.stop])
        .max()
        .unwrap_or(0);
    if sheet.row_count() <= needed {
        return Err(LoadError::SheetTooSmall {
            rows: sheet.row_count(),
            needed,
        });
    }

    let km = &config.key_map;
    let metadata_cols: Vec<usize> = [Some(km.title), km.abstract_text, km.authors, km.venue, km.year]
        .into_iter()
        .flatten()
        .collect();

    let mut papers = Vec::new();
    let mut diagnostics = Vec::new();
    let mut rows = Vec::new();
    for row in config.paper_rows.rows() {
        let Some(title) = sheet.value(row, km.title) else {
            diagnostics.push(Diagnostic::EmptyTitle { row });
            continue;
        };
        papers.push(Paper {
            id: row,
            title: title.to_string(),
            authors: optional_text(sheet, row, km.authors).unwrap_or_default(),
            venue: optional_text(sheet, row, km.venue).unwrap_or_default(),
            year: km.year.and_then(|c| sheet.value(row, c)).and_then(parse_year),
            abstract_text: optional_text(sheet, row, km.abstract_text),
        });
        rows.push(row);
    }

    let mut taxonomies = Vec::with_capacity(config.taxonomies.len());
    for spec in &config.taxonomies {
        if let Some(&col) = metadata_cols.iter().find(|&&c| spec.columns.contains(c)) {
            return Err(LoadError::MetadataOverlap {
                name: spec.name.clone(),
                col,
            });
        }
        let root = build_taxonomy(&spec.name, sheet, spec.header_rows, spec.columns).map_err(
            |source| LoadError::Taxonomy {
                name: spec.name.clone(),
                source,
            },
        )?;
        let leaf_cols: Vec<usize> = root.leaves().iter().map(|l| l.column_span.0).collect();
        let matrix = rows
            .iter()
            .map(|&r| leaf_cols.iter().map(|&c| sheet.value(r, c).is_some()).collect())
            .collect();
        taxonomies.push(Taxonomy {
            name: spec.name.clone(),
            is_default: spec.default,
            membership: Membership::new(leaf_cols.len(), matrix),
            root,
        });
    }

    Ok(LoadReport {
        corpus: SurveyCorpus::new(
            config.tab_name.clone(),
            config.title_text.clone(),
            papers,
            taxonomies,
        ),
        diagnostics,
    })
}

// Canonical JSON export.

#[derive(Serialize, Deserialize)]
struct CorpusJson {
    tab_name: String,
    title_text: String,
    papers: Vec<Paper>,
    taxonomies: Vec<TaxonomyJson>,
    /// Default taxonomy membership as per-paper leaf-index lists.
    membership: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyJson {
    name: String,
    default: bool,
    root: NodeJson,
    membership: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    label: String,
    columns: (usize, usize),
    children: Vec<NodeJson>,
}

impl From<&TaxonomyNode> for NodeJson {
    fn from(n: &TaxonomyNode) -> Self {
        NodeJson {
            label: n.label.clone(),
            columns: n.column_span,
            children: n.children.iter().map(NodeJson::from).collect(),
        }
    }
}

impl NodeJson {
    fn into_node(self) -> TaxonomyNode {
        TaxonomyNode {
            id: 0,
            label: self.label,
            path: Vec::new(),
            column_span: self.columns,
            children: self.children.into_iter().map(NodeJson::into_node).collect(),
        }
    }
}

impl SurveyCorpus {
    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = CorpusJson {
            tab_name: self.tab_name.clone(),
            title_text: self.title_text.clone(),
            papers: self.papers.clone(),
            taxonomies: self
                .taxonomies
                .iter()
                .map(|t| TaxonomyJson {
                    name: t.name.clone(),
                    default: t.is_default,
                    root: NodeJson::from(&t.root),
                    membership: t.membership.to_index_lists(),
                })
                .collect(),
            membership: self.membership().to_index_lists(),
        };
        serde_json::to_value(doc).expect("corpus serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, LoadError> {
        let doc: CorpusJson =
            serde_json::from_str(text).map_err(|e| LoadError::Json(e.to_string()))?;
        let mut taxonomies = Vec::with_capacity(doc.taxonomies.len());
        for t in doc.taxonomies {
            let mut root = t.root.into_node();
            root.renumber();
            let leaves = root.leaves().len();
            if t.membership.len() != doc.papers.len() {
                return Err(LoadError::Json(format!(
                    "taxonomy `{}` has {} membership rows for {} papers",
                    t.name,
                    t.membership.len(),
                    doc.papers.len()
                )));
            }
            let membership = Membership::from_index_lists(leaves, &t.membership).ok_or_else(
                || LoadError::Json(format!("taxonomy `{}`: leaf index out of range", t.name)),
            )?;
            taxonomies.push(Taxonomy {
                name: t.name,
                is_default: t.default,
                root,
                membership,
            });
        }
        if taxonomies.iter().filter(|t| t.is_default).count() != 1 {
            return Err(LoadError::Json("exactly one default taxonomy required".into()));
        }
        if !doc.papers.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(LoadError::Json("paper ids must be strictly ascending".into()));
        }
        let corpus = SurveyCorpus::new(doc.tab_name, doc.title_text, doc.papers, taxonomies);
        if corpus.membership().to_index_lists() != doc.membership {
            return Err(LoadError::Json(
                "top-level membership disagrees with the default taxonomy".into(),
            ));
        }
        Ok(corpus)
    }
}
