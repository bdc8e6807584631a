//! Taxonomy trees recovered from merged-cell header rows.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::Span;
use super::sheet::Sheet;

/// Separator between classpath segments.
pub const PATH_SEPARATOR: &str = " > ";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error(
        "inconsistent hierarchy: run `{label}` at row {row} crosses the parent boundary at column {col}"
    )]
    CrossesParent { row: usize, col: usize, label: String },
    #[error("inconsistent hierarchy: column {col} is unlabeled at row {row} while its parent `{parent}` has labeled children")]
    PartialChildren { row: usize, col: usize, parent: String },
    #[error("inconsistent hierarchy: labels below row {row} under unlabeled cells of `{parent}`")]
    LabelBelowGap { row: usize, parent: String },
    #[error("leaf `{classpath}` spans columns {first}..={last}; leaves must span one column")]
    WideLeaf {
        classpath: String,
        first: usize,
        last: usize,
    },
    #[error("duplicate classpath `{0}`")]
    DuplicateClasspath(String),
    #[error("taxonomy has no labeled classes")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    /// Preorder index; the synthetic root is 0.
    pub id: usize,
    pub label: String,
    /// Labels from the first real level down to this node. Empty for the root.
    pub path: Vec<String>,
    pub children: Vec<TaxonomyNode>,
    /// First and last spreadsheet column covered, inclusive.
    pub column_span: (usize, usize),
}

impl TaxonomyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn classpath(&self) -> String {
        self.path.join(PATH_SEPARATOR)
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Preorder traversal including `self`.
    pub fn preorder(&self) -> Vec<&TaxonomyNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Leaves left to right.
    pub fn leaves(&self) -> Vec<&TaxonomyNode> {
        self.preorder().into_iter().filter(|n| n.is_leaf()).collect()
    }

    pub fn find(&self, path: &[String]) -> Option<&TaxonomyNode> {
        let mut node = self;
        for seg in path {
            node = node.children.iter().find(|c| &c.label == seg)?;
        }
        Some(node)
    }

    /// Reassign preorder ids and paths below `self`, which becomes id 0.
    pub(crate) fn renumber(&mut self) {
        fn walk(node: &mut TaxonomyNode, next: &mut usize, prefix: &[String]) {
            node.id = *next;
            *next += 1;
            node.path = prefix.to_vec();
            for child in &mut node.children {
                let mut p = prefix.to_vec();
                p.push(child.label.clone());
                walk(child, next, &p);
            }
        }
        let mut next = 0;
        walk(self, &mut next, &[]);
    }
}

/// Recover the class hierarchy from the header block `rows` × `cols`.
///
/// A blank cell continues the run to its left, but only within the span of
/// its parent on the row above. Every distinct run becomes a child of the
/// node covering it one row up; a synthetic root named `name` spans all
/// columns.
pub fn build_taxonomy(
    name: &str,
    grid: &Sheet,
    rows: Span,
    cols: Span,
) -> Result<TaxonomyNode, TaxonomyError> {
    let mut root = TaxonomyNode {
        id: 0,
        label: name.to_string(),
        path: Vec::new(),
        children: Vec::new(),
        column_span: (cols.start, cols.stop),
    };
    let header = Header { grid, rows, cols };
    root.children = header.level(rows.start, cols.start, cols.stop, &root)?;
    if root.children.is_empty() {
        return Err(TaxonomyError::Empty);
    }
    root.renumber();

    let mut seen = BTreeSet::new();
    for node in root.preorder().into_iter().skip(1) {
        let cp = node.classpath();
        if !seen.insert(cp.clone()) {
            return Err(TaxonomyError::DuplicateClasspath(cp));
        }
    }
    Ok(root)
}

struct Header<'a> {
    grid: &'a Sheet,
    rows: Span,
    cols: Span,
}

impl Header<'_> {
    fn level(
        &self,
        row: usize,
        first: usize,
        last: usize,
        parent: &TaxonomyNode,
    ) -> Result<Vec<TaxonomyNode>, TaxonomyError> {
        let grid = self.grid;
        if row > self.rows.stop {
            return Ok(Vec::new());
        }
        if (first..=last).all(|c| grid.value(row, c).is_none()) {
            let below = (row + 1..=self.rows.stop)
                .any(|r| (first..=last).any(|c| grid.value(r, c).is_some()));
            if below {
                return Err(TaxonomyError::LabelBelowGap {
                    row,
                    parent: parent.label.clone(),
                });
            }
            return Ok(Vec::new());
        }

        if grid.value(row, first).is_none() {
            // A blank first cell could only continue a run from outside the parent.
            let left = (self.cols.start..first).rev().find_map(|c| grid.value(row, c));
            return Err(match left {
                Some(label) => TaxonomyError::CrossesParent {
                    row,
                    col: first,
                    label: label.to_string(),
                },
                None => TaxonomyError::PartialChildren {
                    row,
                    col: first,
                    parent: parent.label.clone(),
                },
            });
        }

        let mut runs: Vec<(String, usize, usize)> = Vec::new();
        for col in first..=last {
            match grid.value(row, col) {
                Some(label) if runs.last().is_none_or(|(l, _, _)| l != label) => {
                    runs.push((label.to_string(), col, col))
                }
                _ => runs.last_mut().expect("first cell is labeled").2 = col,
            }
        }

        let mut nodes = Vec::with_capacity(runs.len());
        for (label, a, b) in runs {
            let mut path = parent.path.clone();
            path.push(label.clone());
            let mut node = TaxonomyNode {
                id: 0,
                label,
                path,
                children: Vec::new(),
                column_span: (a, b),
            };
            node.children = self.level(row + 1, a, b, &node)?;
            if node.children.is_empty() && a != b {
                return Err(TaxonomyError::WideLeaf {
                    classpath: node.classpath(),
                    first: a,
                    last: b,
                });
            }
            nodes.push(node);
        }
        Ok(nodes)
    }
}
