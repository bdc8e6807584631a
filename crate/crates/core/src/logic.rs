//! The CNF theory of a survey: one boolean variable per taxonomy class,
//! hierarchy clauses, author constraints, and clauses blocking every known
//! feature profile.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnnf::Cnf;
use crate::dsl::{ClassTerm, ConstraintDirective, DirectiveKind};
use crate::survey::{PaperId, SurveyCorpus, TaxonomyNode};

/// Signed variable index; positive means true.
pub type Lit = i32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("line {line}: classpath `{classpath}` does not name a class of the default taxonomy")]
    UnresolvedClasspath { line: usize, classpath: String },
    #[error("unknown classpath `{0}`")]
    UnknownClass(String),
}

/// A disjunction of literals, sorted by variable with duplicates removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Clause(Vec<Lit>);

impl Clause {
    /// `None` for tautologies (a literal and its complement).
    pub fn new(lits: impl IntoIterator<Item = Lit>) -> Option<Clause> {
        let mut v: Vec<Lit> = lits.into_iter().collect();
        assert!(v.iter().all(|&l| l != 0), "literal 0 is not a variable");
        v.sort_unstable_by_key(|&l| (l.unsigned_abs(), l > 0));
        v.dedup();
        if v.windows(2).any(|w| w[0] == -w[1]) {
            return None;
        }
        Some(Clause(v))
    }

    pub fn lits(&self) -> &[Lit] {
        &self.0
    }

    /// `assignment[v - 1]` is the value of variable `v`.
    pub fn is_satisfied(&self, assignment: &[bool]) -> bool {
        self.0
            .iter()
            .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub index: u32,
    pub classpath: String,
    pub is_leaf: bool,
}

/// Where a clause came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// `child → parent`.
    ChildImpliesParent { child: String, parent: String },
    /// `parent → child₁ ∨ … ∨ childₖ`.
    ParentCovered { parent: String },
    Directive { line: usize, text: String },
    /// Feature profile shared by these papers.
    KnownPapers { ids: Vec<PaperId> },
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::ChildImpliesParent { child, parent } => {
                write!(f, "hierarchy: {child} implies {parent}")
            }
            Source::ParentCovered { parent } => {
                write!(f, "hierarchy: {parent} needs one of its children")
            }
            Source::Directive { line, text } => write!(f, "constraint line {line}: {text}"),
            Source::KnownPapers { ids } => {
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "known paper profile: {}", ids.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoryClause {
    pub clause: Clause,
    pub sources: Vec<Source>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Structural,
    Semantic,
    Blocking,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfTheory {
    pub variables: Vec<Variable>,
    /// Variable index of each leaf, in leaf (column) order.
    pub leaf_vars: Vec<u32>,
    /// For each internal variable, its children's variables.
    pub children: Vec<(u32, Vec<u32>)>,
    pub structural: Vec<TheoryClause>,
    pub semantic: Vec<TheoryClause>,
    pub blocking: Vec<TheoryClause>,
}

impl CnfTheory {
    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_vars.len()
    }

    pub fn variable(&self, index: u32) -> &Variable {
        &self.variables[index as usize - 1]
    }

    pub fn var_of(&self, classpath: &str) -> Option<u32> {
        let norm = normalize_classpath(classpath);
        self.variables
            .iter()
            .find(|v| v.classpath == norm)
            .map(|v| v.index)
    }

    pub fn resolve(&self, term: &ClassTerm) -> Result<Lit, LogicError> {
        let var = self
            .var_of(&term.classpath())
            .ok_or_else(|| LogicError::UnknownClass(term.classpath()))?;
        Ok(if term.negated { -(var as Lit) } else { var as Lit })
    }

    /// Structural and semantic clauses.
    pub fn constraint_clauses(&self) -> impl Iterator<Item = &TheoryClause> {
        self.structural.iter().chain(&self.semantic)
    }

    pub fn all_clauses(&self) -> impl Iterator<Item = &TheoryClause> {
        self.constraint_clauses().chain(&self.blocking)
    }

    /// The whole theory as a plain CNF for the compiler.
    pub fn to_cnf(&self) -> Cnf {
        Cnf::new(
            self.var_count(),
            self.all_clauses().map(|c| c.clause.lits().to_vec()).collect(),
        )
    }

    /// Full assignment from a leaf profile: internal classes are the OR of
    /// their descendant leaves.
    pub fn expand_profile(&self, leaves: &[bool]) -> Vec<bool> {
        assert_eq!(leaves.len(), self.leaf_count());
        let mut full = vec![false; self.var_count()];
        for (&v, &b) in self.leaf_vars.iter().zip(leaves) {
            full[v as usize - 1] = b;
        }
        // Children have larger indices than parents, so walk bottom-up.
        for (parent, kids) in self.children.iter().rev() {
            full[*parent as usize - 1] = kids.iter().any(|&k| full[k as usize - 1]);
        }
        full
    }

    pub fn leaf_profile(&self, full: &[bool]) -> Vec<bool> {
        self.leaf_vars.iter().map(|&v| full[v as usize - 1]).collect()
    }

    /// The clause excluded by exactly the given leaf profile (over leaves).
    pub fn blocking_clause(&self, leaves: &[bool]) -> Clause {
        Clause::new(
            self.leaf_vars
                .iter()
                .zip(leaves)
                .map(|(&v, &b)| if b { -(v as Lit) } else { v as Lit }),
        )
        .expect("distinct variables never form a tautology")
    }

    pub fn render_clause(&self, clause: &Clause) -> String {
        clause
            .lits()
            .iter()
            .map(|&l| {
                let cp = &self.variable(l.unsigned_abs()).classpath;
                if l < 0 {
                    format!("~{cp}")
                } else {
                    cp.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }

    /// Leaf profiles currently blocked, in clause order.
    pub fn blocked_profiles(&self) -> Vec<Vec<bool>> {
        self.blocking
            .iter()
            .map(|c| {
                let mut full = vec![false; self.var_count()];
                for &l in c.clause.lits() {
                    full[l.unsigned_abs() as usize - 1] = l < 0;
                }
                self.leaf_profile(&full)
            })
            .collect()
    }

    /// Returns a copy with the structural and semantic clauses only.
    pub fn without_blocking(&self) -> CnfTheory {
        CnfTheory {
            blocking: Vec::new(),
            ..self.clone()
        }
    }
}

fn normalize_classpath(cp: &str) -> String {
    cp.split('>')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(crate::survey::PATH_SEPARATOR)
}

struct Builder {
    theory: CnfTheory,
    index: HashMap<Clause, (Group, usize)>,
}

impl Builder {
    fn add(&mut self, group: Group, lits: Vec<Lit>, source: Source) {
        let Some(clause) = Clause::new(lits) else {
            return;
        };
        if let Some(&(g, i)) = self.index.get(&clause) {
            let tc = &mut self.group_mut(g)[i];
            if !tc.sources.contains(&source) {
                tc.sources.push(source);
            }
            return;
        }
        let list = self.group_mut(group);
        list.push(TheoryClause {
            clause: clause.clone(),
            sources: vec![source],
        });
        let i = list.len() - 1;
        self.index.insert(clause, (group, i));
    }

    fn group_mut(&mut self, g: Group) -> &mut Vec<TheoryClause> {
        match g {
            Group::Structural => &mut self.theory.structural,
            Group::Semantic => &mut self.theory.semantic,
            Group::Blocking => &mut self.theory.blocking,
        }
    }
}

/// Encode taxonomy, author constraints and known papers.
pub fn build_theory(
    corpus: &SurveyCorpus,
    directives: &[ConstraintDirective],
) -> Result<CnfTheory, LogicError> {
    let mut b = constraint_builder(corpus, directives)?;
    let taxonomy = corpus.taxonomy();
    let mut groups: Vec<(Vec<bool>, Vec<PaperId>)> = Vec::new();
    for (i, paper) in corpus.papers.iter().enumerate() {
        let profile = taxonomy.membership.row(i);
        match groups.iter_mut().find(|(p, _)| p == profile) {
            Some((_, ids)) => ids.push(paper.id),
            None => groups.push((profile.to_vec(), vec![paper.id])),
        }
    }
    for (profile, ids) in groups {
        let clause = b.theory.blocking_clause(&profile);
        b.add(
            Group::Blocking,
            clause.lits().to_vec(),
            Source::KnownPapers { ids },
        );
    }
    Ok(b.theory)
}

fn constraint_builder(
    corpus: &SurveyCorpus,
    directives: &[ConstraintDirective],
) -> Result<Builder, LogicError> {
    let taxonomy = corpus.taxonomy();
    let classes = taxonomy.classes();
    // Preorder ids start at 1 below the root, so they double as variable indices.
    let variables: Vec<Variable> = classes
        .iter()
        .map(|n| Variable {
            index: n.id as u32,
            classpath: n.classpath(),
            is_leaf: n.is_leaf(),
        })
        .collect();
    let leaf_vars = taxonomy.leaves().iter().map(|n| n.id as u32).collect();
    let children = classes
        .iter()
        .filter(|n| !n.is_leaf())
        .map(|n| (n.id as u32, n.children.iter().map(|c| c.id as u32).collect()))
        .collect();

    let mut b = Builder {
        theory: CnfTheory {
            variables,
            leaf_vars,
            children,
            structural: Vec::new(),
            semantic: Vec::new(),
            blocking: Vec::new(),
        },
        index: HashMap::new(),
    };

    for node in &classes {
        if node.is_leaf() {
            continue;
        }
        let p = node.id as Lit;
        for child in &node.children {
            b.add(
                Group::Structural,
                vec![-(child.id as Lit), p],
                Source::ChildImpliesParent {
                    child: child.classpath(),
                    parent: node.classpath(),
                },
            );
        }
        let mut cover = vec![-p];
        cover.extend(node.children.iter().map(|c| c.id as Lit));
        b.add(
            Group::Structural,
            cover,
            Source::ParentCovered {
                parent: node.classpath(),
            },
        );
    }

    for d in directives {
        let source = Source::Directive {
            line: d.source_line,
            text: d.to_string(),
        };
        let mut resolved: Vec<(Lit, &TaxonomyNode)> = Vec::with_capacity(d.terms.len());
        for term in &d.terms {
            let node = taxonomy.root.find(&term.segments).filter(|n| n.id != 0);
            let node = node.ok_or_else(|| LogicError::UnresolvedClasspath {
                line: d.source_line,
                classpath: term.classpath(),
            })?;
            let var = node.id as Lit;
            resolved.push((if term.negated { -var } else { var }, node));
        }
        match d.kind {
            DirectiveKind::Implies => {
                for w in resolved.windows(2) {
                    b.add(Group::Semantic, vec![-w[0].0, w[1].0], source.clone());
                }
            }
            DirectiveKind::AtLeastOne => {
                b.add(
                    Group::Semantic,
                    resolved.iter().map(|r| r.0).collect(),
                    source.clone(),
                );
            }
            DirectiveKind::AtMostOne => {
                let lits: Vec<Lit> = match resolved.as_slice() {
                    [(_, node)] if !node.is_leaf() => {
                        node.children.iter().map(|c| c.id as Lit).collect()
                    }
                    _ => resolved.iter().map(|r| r.0).collect(),
                };
                for i in 0..lits.len() {
                    for j in i + 1..lits.len() {
                        b.add(Group::Semantic, vec![-lits[i], -lits[j]], source.clone());
                    }
                }
            }
        }
    }
    Ok(b)
}

/// A known paper whose documented features break a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub paper_id: PaperId,
    pub clause: Clause,
    /// Human-readable clause over classpaths.
    pub clause_text: String,
    pub provenance: Vec<Source>,
}

/// Check every paper's full assignment against hierarchy and author clauses.
pub fn validate_papers(
    corpus: &SurveyCorpus,
    directives: &[ConstraintDirective],
) -> Result<Vec<Violation>, LogicError> {
    let theory = constraint_builder(corpus, directives)?.theory;
    let mut out = Vec::new();
    for (i, paper) in corpus.papers.iter().enumerate() {
        let full = theory.expand_profile(corpus.profile(i));
        for tc in theory.constraint_clauses() {
            if !tc.clause.is_satisfied(&full) {
                out.push(Violation {
                    paper_id: paper.id,
                    clause: tc.clause.clone(),
                    clause_text: theory.render_clause(&tc.clause),
                    provenance: tc.sources.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// DIMACS CNF with the variable map and clause provenance as comments.
pub fn export_dimacs(theory: &CnfTheory) -> String {
    let mut out = String::new();
    for v in &theory.variables {
        let kind = if v.is_leaf { "leaf" } else { "class" };
        let _ = writeln!(out, "c var {} {} {}", v.index, kind, v.classpath);
    }
    let clauses: Vec<&TheoryClause> = theory.all_clauses().collect();
    for (i, tc) in clauses.iter().enumerate() {
        for s in &tc.sources {
            let _ = writeln!(out, "c clause {} {}", i + 1, s);
        }
    }
    let _ = writeln!(out, "p cnf {} {}", theory.var_count(), clauses.len());
    for tc in clauses {
        for l in tc.clause.lits() {
            let _ = write!(out, "{l} ");
        }
        out.push_str("0\n");
    }
    out
}
