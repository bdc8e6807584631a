//! Synthetic surveys: build a spreadsheet export and its configuration from an
//! indented class outline and a list of papers. Used for fixtures, demos and
//! the scale benchmarks.

use std::fmt::Write as _;

use crate::survey::{load_corpus, parse_config, Sheet, SurveyCorpus};

/// One class in an outline; leaves have no children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlineNode {
    pub label: String,
    pub children: Vec<OutlineNode>,
}

impl OutlineNode {
    fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    fn leaf_count(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(|c| c.leaf_count()).sum()
        }
    }

    fn leaf_paths(&self, prefix: &str, out: &mut Vec<String>) {
        let path = if prefix.is_empty() {
            self.label.clone()
        } else {
            format!("{prefix} > {}", self.label)
        };
        if self.children.is_empty() {
            out.push(path);
        } else {
            for c in &self.children {
                c.leaf_paths(&path, out);
            }
        }
    }
}

/// Parse an outline where each level is indented by two more spaces.
///
/// ```text
/// Trace
///   Partial
///   Full
/// Uncertainty
/// ```
pub fn parse_outline(text: &str) -> Vec<OutlineNode> {
    fn insert(nodes: &mut Vec<OutlineNode>, level: usize, label: String) {
        if level == 0 {
            nodes.push(OutlineNode {
                label,
                children: Vec::new(),
            });
        } else {
            let parent = nodes.last_mut().expect("indented line without a parent");
            insert(&mut parent.children, level - 1, label);
        }
    }
    let mut roots = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let indent = line.len() - line.trim_start().len();
        insert(&mut roots, indent / 2, line.trim().to_string());
    }
    roots
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaper {
    pub title: String,
    pub authors: String,
    pub venue: String,
    pub year: Option<i32>,
    /// Marked leaf indices, leaves numbered left to right.
    pub leaves: Vec<usize>,
}

impl SynthPaper {
    pub fn new(title: impl Into<String>, year: i32, leaves: &[usize]) -> Self {
        SynthPaper {
            title: title.into(),
            authors: String::new(),
            venue: String::new(),
            year: Some(year),
            leaves: leaves.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSurvey {
    pub name: String,
    pub classes: Vec<OutlineNode>,
    pub papers: Vec<SynthPaper>,
}

const META_COLUMNS: usize = 4;

impl SyntheticSurvey {
    pub fn new(name: &str, outline: &str) -> Self {
        SyntheticSurvey {
            name: name.to_string(),
            classes: parse_outline(outline),
            papers: Vec::new(),
        }
    }

    pub fn with_paper(mut self, paper: SynthPaper) -> Self {
        self.papers.push(paper);
        self
    }

    fn depth(&self) -> usize {
        self.classes.iter().map(|c| c.depth()).max().unwrap_or(1)
    }

    pub fn leaf_count(&self) -> usize {
        self.classes.iter().map(|c| c.leaf_count()).sum()
    }

    /// Leaf classpaths, left to right.
    pub fn leaf_classpaths(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.classes {
            c.leaf_paths("", &mut out);
        }
        out
    }

    /// Row index of the first paper.
    pub fn first_paper_row(&self) -> usize {
        self.depth() + 1
    }

    pub fn config_yaml(&self) -> String {
        let depth = self.depth();
        let mut y = String::new();
        let _ = writeln!(y, "tab_name: {}", self.name);
        let _ = writeln!(y, "title_text: Synthetic survey {}", self.name);
        let _ = writeln!(y, "input_file:\n  filename: sheet.csv\n  active_worksheet: main");
        let _ = writeln!(
            y,
            "papers_list:\n  key_map:\n    year: 0\n    title: 1\n    authors: 2\n    venue: 3\n    abstract:"
        );
        let start = self.first_paper_row();
        let stop = start + self.papers.len().max(1) - 1;
        let _ = writeln!(y, "  rows:\n    start: {start}\n    stop: {stop}");
        let _ = writeln!(
            y,
            "taxonomy:\n  rows:\n    start: 0\n    stop: {}\n  columns:\n    start: {META_COLUMNS}\n    stop: {}",
            depth - 1,
            META_COLUMNS + self.leaf_count() - 1
        );
        y
    }

    pub fn sheet(&self) -> Sheet {
        let depth = self.depth();
        let width = META_COLUMNS + self.leaf_count();
        let mut rows = vec![vec![String::new(); width]; depth];
        fn place(
            node: &OutlineNode,
            level: usize,
            col: &mut usize,
            rows: &mut [Vec<String>],
        ) {
            rows[level][*col] = node.label.clone();
            if node.children.is_empty() {
                *col += 1;
            } else {
                for c in &node.children {
                    place(c, level + 1, col, rows);
                }
            }
        }
        let mut col = META_COLUMNS;
        for c in &self.classes {
            place(c, 0, &mut col, &mut rows);
        }
        let mut heading = vec![String::new(); width];
        heading[..META_COLUMNS]
            .clone_from_slice(&["year", "title", "authors", "venue"].map(String::from));
        rows.push(heading);
        for p in &self.papers {
            let mut row = vec![String::new(); width];
            row[0] = p.year.map(|y| y.to_string()).unwrap_or_default();
            row[1] = p.title.clone();
            row[2] = p.authors.clone();
            row[3] = p.venue.clone();
            for &l in &p.leaves {
                row[META_COLUMNS + l] = "x".into();
            }
            rows.push(row);
        }
        if self.papers.is_empty() {
            rows.push(vec![String::new(); width]);
        }
        Sheet::from_rows(rows)
    }

    pub fn corpus(&self) -> SurveyCorpus {
        let cfg = parse_config(&self.config_yaml()).expect("synthetic config parses");
        load_corpus(&cfg, &self.sheet())
            .expect("synthetic sheet loads")
            .corpus
    }
}

/// A randomly generated survey plus constraint text, sized like a mid-sized
/// real survey. Leaves are split evenly into groups; constraints are
/// leaf-to-leaf implications, pairwise exclusions and three-way coverings.
/// Every generated paper satisfies every constraint and has a distinct profile.
pub fn benchmark_survey(
    seed: u64,
    groups: usize,
    leaves_per_group: usize,
    semantic: usize,
    papers: usize,
) -> (SyntheticSurvey, String) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut outline = String::new();
    let mut names = Vec::new();
    for g in 0..groups {
        let _ = writeln!(outline, "G{g}");
        for l in 0..leaves_per_group {
            let _ = writeln!(outline, "  L{g}_{l}");
            names.push(format!("G{g} > L{g}_{l}"));
        }
    }
    let n = names.len();
    let other_group = |rng: &mut rand_chacha::ChaCha8Rng, a: usize| loop {
        let b = rng.gen_range(0..n);
        if b / leaves_per_group != a / leaves_per_group {
            return b;
        }
    };
    // Clauses over leaf indices: (negative literals, positive literals).
    let mut clauses: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut directives = String::new();
    while clauses.len() < semantic {
        let a = rng.gen_range(0..n);
        let (clause, line) = match clauses.len() % 6 {
            0..=3 => {
                let b = other_group(&mut rng, a);
                ((vec![a], vec![b]), format!("implies:{},{}", names[a], names[b]))
            }
            4 => {
                let b = other_group(&mut rng, a);
                let (lo, hi) = (a.min(b), a.max(b));
                ((vec![lo, hi], vec![]), format!("atmostone:{},{}", names[lo], names[hi]))
            }
            _ => {
                let mut ts = vec![a, other_group(&mut rng, a), other_group(&mut rng, a)];
                ts.sort_unstable();
                ts.dedup();
                if ts.len() < 3 {
                    continue;
                }
                let line = format!("atleastone:{}", ts.iter().map(|&t| names[t].as_str()).collect::<Vec<_>>().join(","));
                ((vec![], ts), line)
            }
        };
        if !clauses.contains(&clause) {
            clauses.push(clause);
            directives.push_str(&line);
            directives.push('\n');
        }
    }
    let holds = |p: &[bool]| {
        clauses
            .iter()
            .all(|(neg, pos)| neg.iter().any(|&i| !p[i]) || pos.iter().any(|&i| p[i]))
    };
    let mut survey = SyntheticSurvey::new("bench", &outline);
    let mut seen = std::collections::HashSet::new();
    while survey.papers.len() < papers {
        let mut p: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        // Cover unmet disjunctions, close under the implications, and keep
        // the profile only if that satisfied everything.
        for _ in 0..4 {
            for (neg, pos) in &clauses {
                if neg.is_empty() && !pos.iter().any(|&i| p[i]) {
                    p[pos[rng.gen_range(0..pos.len())]] = true;
                }
            }
            loop {
                let mut changed = false;
                for (neg, pos) in &clauses {
                    if neg.len() == 1 && pos.len() == 1 && p[neg[0]] && !p[pos[0]] {
                        p[pos[0]] = true;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        if !holds(&p) || !seen.insert(p.clone()) {
            continue;
        }
        let leaves: Vec<usize> = (0..n).filter(|&i| p[i]).collect();
        let i = survey.papers.len();
        survey = survey.with_paper(SynthPaper::new(format!("Synthetic paper {i}"), 1990 + (i % 35) as i32, &leaves));
    }
    (survey, directives)
}
