//! Deterministic decomposable NNF: compilation from CNF and the queries the
//! recommender needs (counting, conditioning, consistency, model extraction).

mod compile;
mod nnf;

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

pub use compile::{compile, compile_with, CompileError, CompileOptions};
pub use nnf::{parse_nnf, NnfError};

use crate::logic::Lit;

/// A plain clause list over variables `1..=var_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub var_count: usize,
    pub clauses: Vec<Vec<Lit>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {0}: missing or malformed `p cnf` header")]
    Header(usize),
    #[error("line {line}: bad literal `{token}`")]
    Literal { line: usize, token: String },
    #[error("literal {lit} exceeds the declared {vars} variables")]
    OutOfRange { lit: Lit, vars: usize },
}

impl Cnf {
    pub fn new(var_count: usize, clauses: Vec<Vec<Lit>>) -> Self {
        debug_assert!(clauses
            .iter()
            .flatten()
            .all(|&l| l != 0 && l.unsigned_abs() as usize <= var_count));
        Cnf { var_count, clauses }
    }

    /// `assignment[v - 1]` is the value of variable `v`.
    pub fn is_satisfied(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }

    pub fn with_clause(mut self, clause: Vec<Lit>) -> Self {
        self.clauses.push(clause);
        self
    }

    pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') || t.starts_with('%') {
                continue;
            }
            if t.starts_with('p') {
                let parts: Vec<&str> = t.split_whitespace().collect();
                match parts.as_slice() {
                    ["p", "cnf", v, c] => {
                        let v = v.parse().map_err(|_| DimacsError::Header(line_no))?;
                        let c = c.parse().map_err(|_| DimacsError::Header(line_no))?;
                        header = Some((v, c));
                    }
                    _ => return Err(DimacsError::Header(line_no)),
                }
                continue;
            }
            let (vars, _) = header.ok_or(DimacsError::Header(line_no))?;
            for tok in t.split_whitespace() {
                let lit: Lit = tok.parse().map_err(|_| DimacsError::Literal {
                    line: line_no,
                    token: tok.to_string(),
                })?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else if lit.unsigned_abs() as usize > vars {
                    return Err(DimacsError::OutOfRange { lit, vars });
                } else {
                    current.push(lit);
                }
            }
        }
        let (vars, _) = header.ok_or(DimacsError::Header(0))?;
        if !current.is_empty() {
            clauses.push(current);
        }
        Ok(Cnf::new(vars, clauses))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.var_count, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    Lit(Lit),
    /// Children have pairwise disjoint variables.
    And(Vec<NodeId>),
    /// Decision node: `lo` entails `¬var`, `hi` entails `var`.
    Or { var: u32, lo: NodeId, hi: NodeId },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::And(c) => c,
            _ => &[],
        }
    }

    fn child_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        let pair = match self {
            Node::Or { lo, hi, .. } => [Some(*lo), Some(*hi)],
            _ => [None, None],
        };
        self.children().iter().copied().chain(pair.into_iter().flatten())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DnnfError {
    #[error("theory is inconsistent; there is no model to extract")]
    Inconsistent,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("node {node} references child {child} that does not precede it")]
    Order { node: NodeId, child: NodeId },
    #[error("and-node {node} is not decomposable: variable {var} is shared by children")]
    NotDecomposable { node: NodeId, var: u32 },
    #[error("or-node {node} on variable {var} is not a decision node")]
    NotDeterministic { node: NodeId, var: u32 },
    #[error("literal {lit} out of range for {vars} variables")]
    OutOfRange { lit: Lit, vars: usize },
    #[error("conditioned variable {var} still occurs in the graph")]
    ConditionedVarPresent { var: u32 },
}

/// A compiled d-DNNF. Nodes are stored children-first; `assumed` holds the
/// literals fixed by conditioning, which no longer occur in the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnnfGraph {
    nodes: Vec<Node>,
    root: NodeId,
    var_count: usize,
    assumed: Vec<Lit>,
}

/// Dense set of variables, one bit per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
struct VarSet(Vec<u64>);

impl VarSet {
    fn empty(vars: usize) -> Self {
        VarSet(vec![0; vars.div_ceil(64).max(1)])
    }

    fn insert(&mut self, var: u32) {
        let i = var as usize - 1;
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn union_with(&mut self, other: &VarSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    fn first_common(&self, other: &VarSet) -> Option<u32> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .find_map(|(w, (a, b))| {
                let c = a & b;
                (c != 0).then(|| (w * 64 + c.trailing_zeros() as usize + 1) as u32)
            })
    }

    fn contains(&self, var: u32) -> bool {
        let i = var as usize - 1;
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

impl DnnfGraph {
    pub(crate) fn from_parts(nodes: Vec<Node>, root: NodeId, var_count: usize) -> Self {
        DnnfGraph {
            nodes,
            root,
            var_count,
            assumed: Vec::new(),
        }
    }

    pub fn constant(value: bool, var_count: usize) -> Self {
        let node = if value { Node::True } else { Node::False };
        DnnfGraph::from_parts(vec![node], 0, var_count)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    /// Literals fixed by conditioning, sorted by variable.
    pub fn assumed(&self) -> &[Lit] {
        &self.assumed
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.child_ids().count()).sum()
    }

    fn scopes(&self) -> Vec<VarSet> {
        let mut scopes: Vec<VarSet> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut s = VarSet::empty(self.var_count);
            match node {
                Node::True | Node::False => {}
                Node::Lit(l) => s.insert(l.unsigned_abs()),
                Node::And(children) => {
                    for &c in children {
                        s.union_with(&scopes[c as usize]);
                    }
                }
                Node::Or { var, lo, hi } => {
                    s.insert(*var);
                    s.union_with(&scopes[*lo as usize]);
                    s.union_with(&scopes[*hi as usize]);
                }
            }
            scopes.push(s);
        }
        scopes
    }

    fn satisfiable(&self) -> Vec<bool> {
        let mut sat: Vec<bool> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::True | Node::Lit(_) => true,
                Node::False => false,
                Node::And(c) => c.iter().all(|&i| sat[i as usize]),
                Node::Or { lo, hi, .. } => sat[*lo as usize] || sat[*hi as usize],
            };
            sat.push(v);
        }
        sat
    }

    /// Exact number of models over the variables that are not conditioned.
    pub fn count_models(&self) -> BigUint {
        let mut counts: Vec<BigUint> = Vec::with_capacity(self.nodes.len());
        let mut sizes: Vec<u32> = Vec::with_capacity(self.nodes.len());
        let scopes = self.scopes();
        for (i, node) in self.nodes.iter().enumerate() {
            let size = scopes[i].len();
            let c = match node {
                Node::True | Node::Lit(_) => BigUint::one(),
                Node::False => BigUint::zero(),
                Node::And(children) => children
                    .iter()
                    .fold(BigUint::one(), |acc, &c| acc * &counts[c as usize]),
                Node::Or { lo, hi, .. } => {
                    let (lo, hi) = (*lo as usize, *hi as usize);
                    (&counts[lo] << (size - sizes[lo])) + (&counts[hi] << (size - sizes[hi]))
                }
            };
            counts.push(c);
            sizes.push(size);
        }
        let root = self.root as usize;
        let free = self.var_count as u32 - self.assumed.len() as u32 - sizes[root];
        std::mem::take(&mut counts[root]) << free
    }

    pub fn is_consistent(&self) -> bool {
        self.satisfiable()[self.root as usize]
    }

    /// Fix `lit` to true and simplify. Counts on the result range over the
    /// remaining free variables.
    pub fn condition(&self, lit: Lit) -> DnnfGraph {
        let var = lit.unsigned_abs();
        assert!(
            lit != 0 && var as usize <= self.var_count,
            "literal {lit} out of range"
        );
        if self.assumed.contains(&lit) {
            return self.clone();
        }
        let mut assumed = self.assumed.clone();
        assumed.push(lit);
        assumed.sort_unstable_by_key(|l| l.unsigned_abs());
        if self.assumed.contains(&-lit) {
            let mut g = DnnfGraph::constant(false, self.var_count);
            g.assumed = assumed;
            return g;
        }

        let mut b = GraphBuilder::default();
        let mut map: Vec<NodeId> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let id = match node {
                Node::True => b.constant(true),
                Node::False => b.constant(false),
                Node::Lit(l) if *l == lit => b.constant(true),
                Node::Lit(l) if *l == -lit => b.constant(false),
                Node::Lit(l) => b.add(Node::Lit(*l)),
                Node::And(children) => {
                    b.and(children.iter().map(|&c| map[c as usize]).collect())
                }
                Node::Or { var: v, lo, hi } => {
                    let (lo, hi) = (map[*lo as usize], map[*hi as usize]);
                    if *v == var {
                        if lit > 0 {
                            hi
                        } else {
                            lo
                        }
                    } else {
                        b.or(*v, lo, hi)
                    }
                }
            };
            map.push(id);
        }
        let root = map[self.root as usize];
        let mut g = b.finish(root, self.var_count);
        g.assumed = assumed;
        g
    }

    /// Condition on each literal in turn.
    pub fn condition_all(&self, lits: &[Lit]) -> DnnfGraph {
        lits.iter().fold(self.clone(), |g, &l| g.condition(l))
    }

    /// Pick one model. At each decision node the branch matching
    /// `preferred[var]` is taken when it is satisfiable, otherwise the
    /// false branch first. Variables the graph leaves free are false unless
    /// a preference says otherwise.
    pub fn extract_model(&self, preferred: &HashMap<u32, bool>) -> Result<Vec<bool>, DnnfError> {
        let sat = self.satisfiable();
        if !sat[self.root as usize] {
            return Err(DnnfError::Inconsistent);
        }
        let mut model: Vec<bool> = (1..=self.var_count as u32)
            .map(|v| preferred.get(&v).copied().unwrap_or(false))
            .collect();
        for &l in &self.assumed {
            model[l.unsigned_abs() as usize - 1] = l > 0;
        }
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id as usize] {
                Node::True => {}
                Node::False => unreachable!("walk only enters satisfiable nodes"),
                Node::Lit(l) => model[l.unsigned_abs() as usize - 1] = *l > 0,
                Node::And(children) => stack.extend(children.iter().copied()),
                Node::Or { var, lo, hi } => {
                    let want_hi = preferred.get(var).copied().unwrap_or(false);
                    let (first, second) = if want_hi { (*hi, *lo) } else { (*lo, *hi) };
                    stack.push(if sat[first as usize] { first } else { second });
                }
            }
        }
        Ok(model)
    }

    /// Check topological order, decomposability and decision determinism.
    pub fn audit(&self) -> Result<(), AuditError> {
        for (i, node) in self.nodes.iter().enumerate() {
            for c in node.child_ids() {
                if c as usize >= i {
                    return Err(AuditError::Order {
                        node: i as NodeId,
                        child: c,
                    });
                }
            }
            let lit = match node {
                Node::Lit(l) => Some(*l),
                Node::Or { var, .. } => Some(*var as Lit),
                _ => None,
            };
            if let Some(l) = lit {
                if l == 0 || l.unsigned_abs() as usize > self.var_count {
                    return Err(AuditError::OutOfRange {
                        lit: l,
                        vars: self.var_count,
                    });
                }
            }
        }
        let scopes = self.scopes();
        for &l in &self.assumed {
            if scopes[self.root as usize].contains(l.unsigned_abs()) {
                return Err(AuditError::ConditionedVarPresent {
                    var: l.unsigned_abs(),
                });
            }
        }
        // Literals every model of a node must satisfy; `None` means unsatisfiable.
        let mut implied: Vec<Option<Vec<Lit>>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let set = match node {
                Node::True => Some(Vec::new()),
                Node::False => None,
                Node::Lit(l) => Some(vec![*l]),
                Node::And(children) => {
                    let mut seen = VarSet::empty(self.var_count);
                    for &c in children {
                        if let Some(var) = seen.first_common(&scopes[c as usize]) {
                            return Err(AuditError::NotDecomposable {
                                node: i as NodeId,
                                var,
                            });
                        }
                        seen.union_with(&scopes[c as usize]);
                    }
                    let mut acc = Some(Vec::new());
                    for &c in children {
                        acc = match (acc, &implied[c as usize]) {
                            (Some(mut a), Some(s)) => {
                                a.extend_from_slice(s);
                                Some(a)
                            }
                            _ => None,
                        };
                    }
                    acc.map(|mut a| {
                        a.sort_unstable();
                        a
                    })
                }
                Node::Or { var, lo, hi } => {
                    let v = *var as Lit;
                    let lo_ok = implied[*lo as usize].as_ref().is_none_or(|s| s.contains(&-v));
                    let hi_ok = implied[*hi as usize].as_ref().is_none_or(|s| s.contains(&v));
                    if !lo_ok || !hi_ok {
                        return Err(AuditError::NotDeterministic {
                            node: i as NodeId,
                            var: *var,
                        });
                    }
                    match (&implied[*lo as usize], &implied[*hi as usize]) {
                        (None, None) => None,
                        (Some(s), None) | (None, Some(s)) => Some(s.clone()),
                        (Some(a), Some(b)) => {
                            Some(a.iter().filter(|l| b.binary_search(l).is_ok()).copied().collect())
                        }
                    }
                }
            };
            implied.push(set);
        }
        Ok(())
    }
}

impl fmt::Display for DnnfGraph {
    /// c2d NNF text format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&nnf::write_nnf(self))
    }
}

/// Hash-consing node store used by the compiler and by conditioning.
#[derive(Default)]
pub(crate) struct GraphBuilder {
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeId>,
}

impl GraphBuilder {
    pub(crate) fn len(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn add(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.unique.get(&node) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(node.clone());
        self.unique.insert(node, id);
        id
    }

    pub(crate) fn constant(&mut self, value: bool) -> NodeId {
        self.add(if value { Node::True } else { Node::False })
    }

    fn is(&self, id: NodeId, node: &Node) -> bool {
        &self.nodes[id as usize] == node
    }

    pub(crate) fn and(&mut self, children: Vec<NodeId>) -> NodeId {
        let mut kids = Vec::with_capacity(children.len());
        for c in children {
            if self.is(c, &Node::False) {
                return self.constant(false);
            }
            if self.is(c, &Node::True) {
                continue;
            }
            // Flatten nested conjunctions.
            match &self.nodes[c as usize] {
                Node::And(inner) => kids.extend(inner.iter().copied()),
                _ => kids.push(c),
            }
        }
        kids.sort_unstable();
        kids.dedup();
        match kids.len() {
            0 => self.constant(true),
            1 => kids[0],
            _ => self.add(Node::And(kids)),
        }
    }

    pub(crate) fn or(&mut self, var: u32, lo: NodeId, hi: NodeId) -> NodeId {
        let lo_false = self.is(lo, &Node::False);
        let hi_false = self.is(hi, &Node::False);
        match (lo_false, hi_false) {
            (true, true) => self.constant(false),
            (true, false) => hi,
            (false, true) => lo,
            (false, false) => self.add(Node::Or { var, lo, hi }),
        }
    }

    pub(crate) fn finish(self, root: NodeId, var_count: usize) -> DnnfGraph {
        DnnfGraph::from_parts(self.nodes, root, var_count)
    }
}
