//! Aggregations behind the hierarchy, timeline, affinity and insights views.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survey::{PaperId, SurveyCorpus, Taxonomy, TaxonomyNode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("unknown classpath `{0}`")]
    UnknownClass(String),
    #[error("projection needs at least {need} {what}, found {found}")]
    TooSmall {
        what: &'static str,
        need: usize,
        found: usize,
    },
    #[error("embedding line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("embedding file has no vector for paper {0}")]
    MissingEmbedding(PaperId),
    #[error("embedding file has a vector for unknown paper {0}")]
    ExtraEmbedding(PaperId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassStats {
    pub classpath: String,
    pub label: String,
    pub depth: usize,
    pub is_leaf: bool,
    pub paper_count: usize,
    pub papers: Vec<PaperId>,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    /// No paper carries this class.
    pub gap: bool,
}

/// Indices of papers tagged with any leaf under `node`.
fn papers_under(corpus: &SurveyCorpus, taxonomy: &Taxonomy, node: &TaxonomyNode) -> Vec<usize> {
    let range = taxonomy.leaf_range(node);
    (0..corpus.papers.len())
        .filter(|&i| taxonomy.membership.row(i)[range.clone()].iter().any(|&b| b))
        .collect()
}

fn stats_for(corpus: &SurveyCorpus, taxonomy: &Taxonomy, node: &TaxonomyNode) -> ClassStats {
    let idx = papers_under(corpus, taxonomy, node);
    let years: Vec<i32> = idx.iter().filter_map(|&i| corpus.papers[i].year).collect();
    ClassStats {
        classpath: node.classpath(),
        label: node.label.clone(),
        depth: node.depth(),
        is_leaf: node.is_leaf(),
        paper_count: idx.len(),
        papers: idx.iter().map(|&i| corpus.papers[i].id).collect(),
        first_year: years.iter().min().copied(),
        last_year: years.iter().max().copied(),
        gap: idx.is_empty(),
    }
}

/// Stats for every class, preorder. A paper counts once per class even when
/// it carries several leaves beneath it.
pub fn class_stats(corpus: &SurveyCorpus, taxonomy: &Taxonomy) -> Vec<ClassStats> {
    taxonomy
        .classes()
        .into_iter()
        .map(|n| stats_for(corpus, taxonomy, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTree {
    pub label: String,
    pub classpath: String,
    pub paper_count: usize,
    pub gap: bool,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub children: Vec<ClassTree>,
}

/// The taxonomy as a nested tree with per-node counts; the root covers
/// every tagged paper.
pub fn class_tree(corpus: &SurveyCorpus, taxonomy: &Taxonomy) -> ClassTree {
    fn walk(corpus: &SurveyCorpus, taxonomy: &Taxonomy, node: &TaxonomyNode) -> ClassTree {
        let s = stats_for(corpus, taxonomy, node);
        ClassTree {
            label: node.label.clone(),
            classpath: s.classpath,
            paper_count: s.paper_count,
            gap: s.gap,
            first_year: s.first_year,
            last_year: s.last_year,
            children: node
                .children
                .iter()
                .map(|c| walk(corpus, taxonomy, c))
                .collect(),
        }
    }
    walk(corpus, taxonomy, &taxonomy.root)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreemapCell {
    pub classpath: String,
    pub label: String,
    pub parent: String,
    pub paper_count: usize,
}

/// Cells for classes at `level` (1 = top-level classes). Leaves shallower
/// than `level` are carried down so the map still covers every paper.
pub fn treemap(corpus: &SurveyCorpus, taxonomy: &Taxonomy, level: usize) -> Vec<TreemapCell> {
    fn collect<'a>(node: &'a TaxonomyNode, level: usize, out: &mut Vec<&'a TaxonomyNode>) {
        for c in &node.children {
            if c.depth() == level || c.is_leaf() {
                out.push(c);
            } else {
                collect(c, level, out);
            }
        }
    }
    let mut nodes = Vec::new();
    collect(&taxonomy.root, level.max(1), &mut nodes);
    nodes
        .into_iter()
        .map(|n| {
            let parent = &n.path[..n.path.len() - 1];
            TreemapCell {
                classpath: n.classpath(),
                label: n.label.clone(),
                parent: parent.join(crate::survey::PATH_SEPARATOR),
                paper_count: papers_under(corpus, taxonomy, n).len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    All,
    Any,
}

impl std::str::FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(SearchMode::All),
            "any" => Ok(SearchMode::Any),
            other => Err(format!("expected `all` or `any`, got `{other}`")),
        }
    }
}

fn by_recency(corpus: &SurveyCorpus, idx: &mut [usize]) {
    idx.sort_by_key(|&i| {
        let p = &corpus.papers[i];
        (Reverse(p.year.unwrap_or(i32::MIN)), p.title.clone(), p.id)
    });
}

fn matches_terms(corpus: &SurveyCorpus, i: usize, terms: &[String], mode: SearchMode) -> bool {
    let p = &corpus.papers[i];
    let abstract_text = p.abstract_text.as_deref().unwrap_or("");
    let hay = [p.title.as_str(), &p.authors, &p.venue, abstract_text]
        .map(str::to_lowercase)
        .join("\n");
    let mut hits = terms.iter().map(|t| hay.contains(&t.to_lowercase()));
    match mode {
        SearchMode::All => hits.all(|h| h),
        SearchMode::Any => hits.any(|h| h),
    }
}

/// Case-insensitive substring search over title, authors, venue and
/// abstract, newest first, then by title.
pub fn search(corpus: &SurveyCorpus, terms: &[String], mode: SearchMode) -> Vec<PaperId> {
    let filter = PaperFilter {
        terms: terms.to_vec(),
        mode,
        ..Default::default()
    };
    filter_papers(corpus, &filter).expect("no tag filter")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PaperFilter {
    pub terms: Vec<String>,
    pub mode: SearchMode,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    /// Classpaths of the default taxonomy; a paper must carry every one.
    pub tags: Vec<String>,
}

impl PaperFilter {
    fn has_years(&self) -> bool {
        self.year_min.is_some() || self.year_max.is_some()
    }
}

fn filtered_indices(corpus: &SurveyCorpus, f: &PaperFilter) -> Result<Vec<usize>, AnalyticsError> {
    let tax = corpus.taxonomy();
    let ranges = f
        .tags
        .iter()
        .map(|t| {
            tax.find_classpath(t)
                .map(|n| tax.leaf_range(n))
                .ok_or_else(|| AnalyticsError::UnknownClass(t.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut idx: Vec<usize> = (0..corpus.papers.len())
        .filter(|&i| f.terms.is_empty() || matches_terms(corpus, i, &f.terms, f.mode))
        .filter(|&i| {
            let row = corpus.profile(i);
            ranges.iter().all(|r| row[r.clone()].iter().any(|&b| b))
        })
        .filter(|&i| {
            if !f.has_years() {
                return true;
            }
            corpus.papers[i].year.is_some_and(|y| {
                f.year_min.is_none_or(|lo| y >= lo) && f.year_max.is_none_or(|hi| y <= hi)
            })
        })
        .collect();
    by_recency(corpus, &mut idx);
    Ok(idx)
}

/// Papers passing every part of the filter, newest first.
pub fn filter_papers(corpus: &SurveyCorpus, f: &PaperFilter) -> Result<Vec<PaperId>, AnalyticsError> {
    Ok(filtered_indices(corpus, f)?
        .into_iter()
        .map(|i| corpus.papers[i].id)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Timeline {
    /// `(year, papers)` for every year in range, zeros included.
    pub series: Vec<(i32, usize)>,
    /// Filtered papers left out for lack of a year.
    pub undated: usize,
}

pub fn timeline_series(corpus: &SurveyCorpus, f: &PaperFilter) -> Result<Timeline, AnalyticsError> {
    let idx = filtered_indices(corpus, f)?;
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    let mut undated = 0;
    for i in idx {
        match corpus.papers[i].year {
            Some(y) => *counts.entry(y).or_default() += 1,
            None => undated += 1,
        }
    }
    let lo = f.year_min.or(counts.keys().next().copied());
    let hi = f.year_max.or(counts.keys().next_back().copied());
    let series = match (lo, hi) {
        (Some(lo), Some(hi)) if lo <= hi => (lo..=hi)
            .map(|y| (y, counts.get(&y).copied().unwrap_or(0)))
            .collect(),
        _ => Vec::new(),
    };
    Ok(Timeline { series, undated })
}

/// Leaf tags among the given papers, most frequent first, ties by classpath.
pub fn tag_frequencies(corpus: &SurveyCorpus, ids: &[PaperId], top: usize) -> Vec<(String, usize)> {
    let leaves = corpus.taxonomy().leaves();
    let mut counts = vec![0usize; leaves.len()];
    for &id in ids {
        if let Some(i) = corpus.paper_index(id) {
            for (c, &b) in counts.iter_mut().zip(corpus.profile(i)) {
                *c += usize::from(b);
            }
        }
    }
    let mut out: Vec<(String, usize)> = leaves
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(l, c)| (l.classpath(), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(top);
    out
}

pub const TAG_SUMMARY_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCount {
    pub classpath: String,
    pub paper_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassInsights {
    pub most_popular: Vec<ClassCount>,
    /// Least popular among classes that have at least one paper.
    pub least_popular: Vec<ClassCount>,
    pub no_papers_yet: Vec<String>,
    pub distinct_profiles: usize,
}

pub fn class_insights(corpus: &SurveyCorpus, top: usize) -> ClassInsights {
    let stats = class_stats(corpus, corpus.taxonomy());
    let mut used: Vec<ClassCount> = stats
        .iter()
        .filter(|s| !s.gap)
        .map(|s| ClassCount {
            classpath: s.classpath.clone(),
            paper_count: s.paper_count,
        })
        .collect();
    used.sort_by(|a, b| b.paper_count.cmp(&a.paper_count).then_with(|| a.classpath.cmp(&b.classpath)));
    let most_popular = used.iter().take(top).cloned().collect();
    used.sort_by(|a, b| a.paper_count.cmp(&b.paper_count).then_with(|| a.classpath.cmp(&b.classpath)));
    let least_popular = used.into_iter().take(top).collect();
    ClassInsights {
        most_popular,
        least_popular,
        no_papers_yet: stats.into_iter().filter(|s| s.gap).map(|s| s.classpath).collect(),
        distinct_profiles: corpus.distinct_profiles().len(),
    }
}

pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITERATIONS: usize = 10_000;

/// Top-two principal components of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    /// Variance along each axis.
    pub variance: [f64; 2],
    pub total_variance: f64,
    /// Every fitted row is identical.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize_vec(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Deterministic start vector with no special symmetry.
fn start_vector(d: usize) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
    normalize_vec(&mut v);
    v
}

fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Dominant eigenpair of symmetric `m`, kept orthogonal to `against`.
fn power_iteration(m: &[Vec<f64>], against: &[&[f64]]) -> (Vec<f64>, f64) {
    let d = m.len();
    let project_out = |v: &mut Vec<f64>| {
        for a in against {
            let c = dot(v, a);
            v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= c * y);
        }
    };
    let mut v = start_vector(d);
    project_out(&mut v);
    if normalize_vec(&mut v) == 0.0 {
        return (vec![0.0; d], 0.0);
    }
    let mut lambda = 0.0;
    for _ in 0..PCA_MAX_ITERATIONS {
        let mut w: Vec<f64> = m.iter().map(|row| dot(row, &v)).collect();
        project_out(&mut w);
        let norm = normalize_vec(&mut w);
        if norm == 0.0 {
            return (v, 0.0);
        }
        lambda = norm;
        // Compare up to sign so oscillating iterates still count as settled.
        let diff = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let flip = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a + b).powi(2))
            .sum::<f64>()
            .sqrt();
        v = w;
        if diff.min(flip) < PCA_TOLERANCE {
            break;
        }
    }
    // Rayleigh quotient is more accurate than the last norm.
    let mv: Vec<f64> = m.iter().map(|row| dot(row, &v)).collect();
    let rq = dot(&v, &mv);
    (v, if rq.is_finite() { rq } else { lambda })
}

impl Pca {
    /// Fit on `rows` (each of the same length `d ≥ 1`).
    pub fn fit(rows: &[Vec<f64>]) -> Pca {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        if n > 0 {
            mean.iter_mut().for_each(|m| *m /= n as f64);
        }
        let denom = (n.max(2) - 1) as f64;
        let mut cov = vec![vec![0.0; d]; d];
        for r in rows {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += c[i] * c[j] / denom;
                }
            }
        }
        let total_variance: f64 = (0..d).map(|i| cov[i][i]).sum();
        let negligible = |l: f64| l <= 1e-12 * total_variance.max(f64::MIN_POSITIVE);
        if total_variance <= 1e-15 {
            return Pca {
                mean,
                axes: [vec![0.0; d], vec![0.0; d]],
                variance: [0.0, 0.0],
                total_variance,
                degenerate: true,
            };
        }
        let (mut a1, l1) = power_iteration(&cov, &[]);
        fix_sign(&mut a1);
        let (mut a2, mut l2) = if d >= 2 {
            // Deflate, and re-orthogonalise against the first axis as we go.
            let deflated: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| cov[i][j] - l1 * a1[i] * a1[j]).collect())
                .collect();
            power_iteration(&deflated, &[&a1])
        } else {
            (vec![0.0; d], 0.0)
        };
        if negligible(l2) {
            a2 = vec![0.0; d];
            l2 = 0.0;
        }
        fix_sign(&mut a2);
        Pca {
            mean,
            axes: [a1, a2],
            variance: [l1, l2.max(0.0)],
            total_variance,
            degenerate: false,
        }
    }

    pub fn project(&self, row: &[f64]) -> (f64, f64) {
        let c: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        (dot(&c, &self.axes[0]), dot(&c, &self.axes[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<PaperId>,
    /// Index into the hypothetical profiles, for points that are not papers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothetical: Option<usize>,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    pub variance: [f64; 2],
    pub total_variance: f64,
    pub degenerate: bool,
}

fn bool_row(r: &[bool]) -> Vec<f64> {
    r.iter().map(|&b| f64::from(u8::from(b))).collect()
}

fn project_rows(
    ids: &[PaperId],
    rows: &[Vec<f64>],
    passive: &[Vec<f64>],
) -> Projection {
    let pca = Pca::fit(rows);
    // Round away floating noise so tiny negative zeros do not leak out.
    let clean = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let mut points: Vec<ProjectedPoint> = ids
        .iter()
        .zip(rows)
        .map(|(&id, r)| {
            let (x, y) = pca.project(r);
            ProjectedPoint {
                paper_id: Some(id),
                hypothetical: None,
                x: clean(x),
                y: clean(y),
            }
        })
        .collect();
    for (k, r) in passive.iter().enumerate() {
        let (x, y) = pca.project(r);
        points.push(ProjectedPoint {
            paper_id: None,
            hypothetical: Some(k),
            x: clean(x),
            y: clean(y),
        });
    }
    Projection {
        points,
        variance: pca.variance,
        total_variance: pca.total_variance,
        degenerate: pca.degenerate,
    }
}

/// Papers projected from their leaf profiles; `extra` profiles are placed
/// on the same map without influencing its axes.
pub fn project_tags(corpus: &SurveyCorpus, extra: &[Vec<bool>]) -> Result<Projection, AnalyticsError> {
    let leaves = corpus.membership().leaf_count();
    if corpus.papers.len() < 2 {
        return Err(AnalyticsError::TooSmall {
            what: "papers",
            need: 2,
            found: corpus.papers.len(),
        });
    }
    if leaves < 2 {
        return Err(AnalyticsError::TooSmall {
            what: "leaf classes",
            need: 2,
            found: leaves,
        });
    }
    let ids: Vec<PaperId> = corpus.papers.iter().map(|p| p.id).collect();
    let rows: Vec<Vec<f64>> = (0..ids.len()).map(|i| bool_row(corpus.profile(i))).collect();
    let passive: Vec<Vec<f64>> = extra.iter().map(|r| bool_row(r)).collect();
    Ok(project_rows(&ids, &rows, &passive))
}

/// Per-paper vectors read from `<paper_id> v1 v2 ... vd` lines.
pub fn parse_embeddings(text: &str) -> Result<BTreeMap<PaperId, Vec<f64>>, AnalyticsError> {
    let mut out = BTreeMap::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| AnalyticsError::Embedding {
            line: i + 1,
            message,
        };
        let mut toks = line.split_whitespace();
        let Some(id) = toks.next() else { continue };
        let id: PaperId = id.parse().map_err(|_| err(format!("bad paper id `{id}`")))?;
        let v = toks
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err("non-numeric component".into()))?;
        if v.is_empty() {
            return Err(err("no components".into()));
        }
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(err(format!("expected {d} components, found {}", v.len())))
            }
            _ => {}
        }
        if out.insert(id, v).is_some() {
            return Err(err(format!("paper {id} appears twice")));
        }
    }
    Ok(out)
}

/// Affinity map: PCA of the supplied embeddings, or the tag projection when
/// there are none.
pub fn affinity_coordinates(
    corpus: &SurveyCorpus,
    embeddings: Option<&BTreeMap<PaperId, Vec<f64>>>,
) -> Result<Projection, AnalyticsError> {
    let Some(emb) = embeddings else {
        return project_tags(corpus, &[]);
    };
    let ids: Vec<PaperId> = corpus.papers.iter().map(|p| p.id).collect();
    if let Some(extra) = emb.keys().find(|k| corpus.paper(**k).is_none()) {
        return Err(AnalyticsError::ExtraEmbedding(*extra));
    }
    let rows = ids
        .iter()
        .map(|id| emb.get(id).cloned().ok_or(AnalyticsError::MissingEmbedding(*id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(project_rows(&ids, &rows, &[]))
}
