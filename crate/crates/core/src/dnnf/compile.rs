//! Exhaustive DPLL with unit propagation, component decomposition and a
//! component cache, emitting a hash-consed d-DNNF.

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use super::{Cnf, DnnfGraph, GraphBuilder, NodeId};
use crate::logic::Lit;

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Abort once the graph holds more nodes than this.
    pub node_limit: Option<usize>,
    pub use_cache: bool,
    pub deadline: Option<Instant>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            node_limit: None,
            use_cache: true,
            deadline: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("compiled graph exceeded the node limit of {limit}")]
    NodeLimit { limit: usize },
    #[error("compilation did not finish before the deadline")]
    Deadline,
}

pub fn compile(cnf: &Cnf) -> Result<DnnfGraph, CompileError> {
    compile_with(cnf, &CompileOptions::default())
}

pub fn compile_with(cnf: &Cnf, opts: &CompileOptions) -> Result<DnnfGraph, CompileError> {
    let mut clauses = Vec::with_capacity(cnf.clauses.len());
    for c in &cnf.clauses {
        let mut c = c.clone();
        c.sort_unstable();
        c.dedup();
        if c.iter().any(|l| c.contains(&-l)) {
            continue;
        }
        clauses.push(c);
    }
    let mut compiler = Compiler {
        builder: GraphBuilder::default(),
        cache: HashMap::new(),
        opts,
        steps: 0,
    };
    let root = compiler.formula(clauses)?;
    Ok(compiler.builder.finish(root, cnf.var_count))
}

type Clauses = Vec<Vec<Lit>>;

struct Compiler<'a> {
    builder: GraphBuilder,
    cache: HashMap<Clauses, NodeId>,
    opts: &'a CompileOptions,
    steps: u64,
}

/// Set `lit` true: drop satisfied clauses, shrink the rest.
/// Returns `None` when a clause becomes empty.
fn assign(clauses: &[Vec<Lit>], lit: Lit) -> Option<Clauses> {
    let mut out = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.contains(&lit) {
            continue;
        }
        if c.contains(&-lit) {
            let rest: Vec<Lit> = c.iter().copied().filter(|&l| l != -lit).collect();
            if rest.is_empty() {
                return None;
            }
            out.push(rest);
        } else {
            out.push(c.clone());
        }
    }
    Some(out)
}

/// Unit propagation to fixpoint. Returns the implied literals and the residual
/// clauses, or `None` on conflict.
fn propagate(mut clauses: Clauses) -> Option<(Vec<Lit>, Clauses)> {
    let mut units = Vec::new();
    if clauses.iter().any(|c| c.is_empty()) {
        return None;
    }
    while let Some(unit) = clauses.iter().find(|c| c.len() == 1).map(|c| c[0]) {
        units.push(unit);
        clauses = assign(&clauses, unit)?;
    }
    Some((units, clauses))
}

/// Partition clauses into groups sharing no variable.
fn components(clauses: Clauses) -> Vec<Clauses> {
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut vars: Vec<u32> = clauses.iter().flatten().map(|l| l.unsigned_abs()).collect();
    vars.sort_unstable();
    vars.dedup();
    for (i, &v) in vars.iter().enumerate() {
        index.insert(v, i);
    }
    let mut parent: Vec<usize> = (0..vars.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in &clauses {
        let first = index[&c[0].unsigned_abs()];
        for l in &c[1..] {
            let a = find(&mut parent, first);
            let b = find(&mut parent, index[&l.unsigned_abs()]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Clauses)> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for c in clauses {
        let r = find(&mut parent, index[&c[0].unsigned_abs()]);
        let s = *slot.entry(r).or_insert_with(|| {
            groups.push((r, Vec::new()));
            groups.len() - 1
        });
        groups[s].1.push(c);
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Most frequent variable, lowest index on ties.
fn branch_var(clauses: &[Vec<Lit>]) -> u32 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for l in clauses.iter().flatten() {
        *counts.entry(l.unsigned_abs()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(v, _)| v)
        .expect("component has at least one literal")
}

impl Compiler<'_> {
    fn check_limits(&mut self) -> Result<(), CompileError> {
        if let Some(limit) = self.opts.node_limit {
            if self.builder.len() > limit {
                return Err(CompileError::NodeLimit { limit });
            }
        }
        self.steps += 1;
        if self.steps % 256 == 1 {
            if let Some(d) = self.opts.deadline {
                if Instant::now() >= d {
                    return Err(CompileError::Deadline);
                }
            }
        }
        Ok(())
    }

    fn formula(&mut self, clauses: Clauses) -> Result<NodeId, CompileError> {
        self.check_limits()?;
        let Some((units, residual)) = propagate(clauses) else {
            return Ok(self.builder.constant(false));
        };
        let mut children: Vec<NodeId> = units
            .into_iter()
            .map(|l| self.builder.add(super::Node::Lit(l)))
            .collect();
        for comp in components(residual) {
            let id = self.component(comp)?;
            if self.builder.is(id, &super::Node::False) {
                return Ok(id);
            }
            children.push(id);
        }
        Ok(self.builder.and(children))
    }

    fn component(&mut self, mut clauses: Clauses) -> Result<NodeId, CompileError> {
        for c in clauses.iter_mut() {
            c.sort_unstable();
        }
        clauses.sort_unstable();
        clauses.dedup();
        if self.opts.use_cache {
            if let Some(&id) = self.cache.get(&clauses) {
                return Ok(id);
            }
        }
        let var = branch_var(&clauses);
        let v = var as Lit;
        let branch = |this: &mut Self, lit: Lit| -> Result<NodeId, CompileError> {
            match assign(&clauses, lit) {
                None => Ok(this.builder.constant(false)),
                Some(rest) => {
                    let sub = this.formula(rest)?;
                    let l = this.builder.add(super::Node::Lit(lit));
                    Ok(this.builder.and(vec![l, sub]))
                }
            }
        };
        let lo = branch(self, -v)?;
        let hi = branch(self, v)?;
        let id = self.builder.or(var, lo, hi);
        if self.opts.use_cache {
            self.cache.insert(clauses, id);
        }
        Ok(id)
    }
}

#[cfg(test)]
mod tests {
    use super::super::oracle::*;
    use super::*;
    use num_bigint::BigUint;
    use std::time::Duration;

    #[test]
    fn components_split_on_shared_variables() {
        let groups = components(vec![vec![1, 2], vec![3, 4], vec![-2, 5], vec![4, -6]]);
        assert_eq!(groups, vec![vec![vec![1, 2], vec![-2, 5]], vec![vec![3, 4], vec![4, -6]]]);
    }

    #[test]
    fn propagation_reaches_fixpoint_or_conflict() {
        let (units, rest) = propagate(vec![vec![1], vec![-1, 2], vec![-2, 3, 4]]).unwrap();
        assert_eq!(units, [1, 2]);
        assert_eq!(rest, vec![vec![3, 4]]);
        assert!(propagate(vec![vec![1], vec![-1, 2], vec![-2]]).is_none());
    }

    #[test]
    fn branch_prefers_frequent_then_low() {
        assert_eq!(branch_var(&[vec![3, 2], vec![-3, 1], vec![2, 4]]), 2);
        assert_eq!(branch_var(&[vec![5, 4]]), 4);
    }

    #[test]
    fn cache_does_not_change_counts() {
        let no_cache = CompileOptions {
            use_cache: false,
            ..Default::default()
        };
        for seed in 0..40 {
            let cnf = random_cnf(77 + seed, 12, 20, 3);
            let a = compile(&cnf).unwrap();
            let b = compile_with(&cnf, &no_cache).unwrap();
            assert_eq!(a.count_models(), b.count_models());
            assert!(a.nodes().len() <= b.nodes().len());
        }
    }

    #[test]
    fn tautologies_and_duplicates_are_ignored() {
        let g = compile(&Cnf::new(2, vec![vec![1, -1], vec![2, 2]])).unwrap();
        assert_eq!(g.count_models(), BigUint::from(2u32));
    }

    #[test]
    fn node_limit_is_reported() {
        let clauses: Vec<Vec<Lit>> = (1..16).map(|v| vec![v, v + 1]).collect();
        let cnf = Cnf::new(16, clauses);
        let opts = CompileOptions {
            node_limit: Some(3),
            ..Default::default()
        };
        assert_eq!(compile_with(&cnf, &opts), Err(CompileError::NodeLimit { limit: 3 }));
    }

    #[test]
    fn expired_deadline_is_reported() {
        // Wide pairwise-disjoint chains keep the compiler busy enough to poll.
        let vars = 60;
        let clauses: Vec<Vec<Lit>> = (1..vars).map(|v| vec![v, v + 1]).collect();
        let opts = CompileOptions {
            deadline: Some(Instant::now() - Duration::from_secs(1)),
            use_cache: false,
            ..Default::default()
        };
        assert_eq!(
            compile_with(&Cnf::new(vars as usize, clauses), &opts),
            Err(CompileError::Deadline)
        );
    }
}
