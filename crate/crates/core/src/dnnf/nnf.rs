//! c2d-compatible NNF text format.
//!
//! ```text
//! nnf <nodes> <edges> <vars>
//! L <lit>
//! A <n> <child>...
//! O <var> <n> <child>...
//! ```
//! `A 0` is true and `O 0 0` is false. The last node is the root.

use thiserror::Error;

use super::{DnnfGraph, Node, NodeId};
use crate::logic::Lit;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnfError {
    #[error("missing `nnf` header")]
    Header,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("header declares {declared} nodes but {found} were read")]
    NodeCount { declared: usize, found: usize },
}

pub(super) fn write_nnf(g: &DnnfGraph) -> String {
    let mut lines: Vec<String> = Vec::with_capacity(g.nodes.len() + g.assumed.len() + 2);
    let mut edges = 0;
    for node in &g.nodes {
        lines.push(match node {
            Node::True => "A 0".to_string(),
            Node::False => "O 0 0".to_string(),
            Node::Lit(l) => format!("L {l}"),
            Node::And(children) => {
                edges += children.len();
                let ids: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                format!("A {} {}", children.len(), ids.join(" "))
            }
            Node::Or { var, lo, hi } => {
                edges += 2;
                format!("O {var} 2 {lo} {hi}")
            }
        });
    }
    // Conditioned literals become an explicit conjunction at the top.
    let mut root = g.root as usize;
    if !g.assumed.is_empty() {
        let mut ids = vec![root];
        for l in &g.assumed {
            ids.push(lines.len());
            lines.push(format!("L {l}"));
        }
        edges += ids.len();
        let ids: Vec<String> = ids.iter().map(|c| c.to_string()).collect();
        root = lines.len();
        lines.push(format!("A {} {}", ids.len(), ids.join(" ")));
    }
    if root + 1 != lines.len() {
        // The root must be last; repeat it as a one-child conjunction.
        edges += 1;
        lines.push(format!("A 1 {root}"));
    }
    let mut out = format!("nnf {} {} {}\n", lines.len(), edges, g.var_count);
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Parse NNF text. Disjunctions must be decision nodes (`O j 2 a b` with
/// `j > 0`) or the false constant.
pub fn parse_nnf(text: &str) -> Result<DnnfGraph, NnfError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('c'));
    let (_, header) = lines.next().ok_or(NnfError::Header)?;
    let head: Vec<usize> = header
        .split_whitespace()
        .skip(1)
        .map(|t| t.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| NnfError::Header)?;
    if !header.trim_start().starts_with("nnf") || head.len() != 3 {
        return Err(NnfError::Header);
    }
    let (declared, var_count) = (head[0], head[2]);
    let mut nodes: Vec<Node> = Vec::with_capacity(declared);
    for (i, line) in lines {
        let err = |message: String| NnfError::Line {
            line: i + 1,
            message,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let nums: Vec<i64> = toks[1..]
            .iter()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| err(format!("non-numeric field in `{}`", line.trim())))?;
        let child = |x: i64| -> Result<NodeId, NnfError> {
            if x < 0 || x as usize >= nodes.len() {
                Err(err(format!("child {x} does not refer to an earlier node")))
            } else {
                Ok(x as NodeId)
            }
        };
        let node = match (toks[0], nums.as_slice()) {
            ("L", [l]) if *l != 0 && l.unsigned_abs() as usize <= var_count => Node::Lit(*l as Lit),
            ("L", _) => return Err(err("bad literal".into())),
            ("A", [0]) => Node::True,
            ("A", [n, rest @ ..]) if *n as usize == rest.len() => Node::And(
                rest.iter().map(|&c| child(c)).collect::<Result<_, _>>()?,
            ),
            ("O", [0, 0]) => Node::False,
            ("O", [j, 2, a, b]) if *j > 0 && *j as usize <= var_count => {
                let (a, b) = (child(*a)?, child(*b)?);
                let var = *j as u32;
                // Work out which child carries the negative literal.
                let a_has_neg = entails(&nodes, a, -(var as Lit));
                let (lo, hi) = if a_has_neg { (a, b) } else { (b, a) };
                Node::Or { var, lo, hi }
            }
            ("O", _) => return Err(err("only decision disjunctions are supported".into())),
            (kind, _) => return Err(err(format!("unknown node kind `{kind}`"))),
        };
        nodes.push(node);
    }
    if nodes.len() != declared {
        return Err(NnfError::NodeCount {
            declared,
            found: nodes.len(),
        });
    }
    if nodes.is_empty() {
        return Err(NnfError::Header);
    }
    let root = (nodes.len() - 1) as NodeId;
    Ok(DnnfGraph::from_parts(nodes, root, var_count))
}

/// Whether `lit` appears as a conjunct on every path below `root`.
fn entails(nodes: &[Node], root: NodeId, lit: Lit) -> bool {
    let mut memo: Vec<Option<bool>> = vec![None; root as usize + 1];
    fn go(nodes: &[Node], id: NodeId, lit: Lit, memo: &mut [Option<bool>]) -> bool {
        if let Some(v) = memo[id as usize] {
            return v;
        }
        let v = match &nodes[id as usize] {
            Node::Lit(l) => *l == lit,
            Node::False => true,
            Node::True => false,
            Node::And(children) => children.iter().any(|&c| go(nodes, c, lit, memo)),
            Node::Or { lo, hi, .. } => go(nodes, *lo, lit, memo) && go(nodes, *hi, lit, memo),
        };
        memo[id as usize] = Some(v);
        v
    }
    go(nodes, root, lit, &mut memo)
}

#[cfg(test)]
mod tests {
    use super::super::oracle::random_cnf;
    use super::super::{compile, Cnf};
    use super::*;

    #[test]
    fn round_trip_preserves_counts_and_structure() {
        for seed in 0..30 {
            let g = compile(&random_cnf(900 + seed, 9, 14, 3)).unwrap();
            let text = g.to_string();
            let back = parse_nnf(&text).unwrap();
            back.audit().unwrap();
            assert_eq!(back.count_models(), g.count_models());
            assert_eq!(back.to_string(), text);
        }
    }

    #[test]
    fn conditioned_graph_exports_its_assumptions() {
        let g = compile(&Cnf::new(3, vec![vec![1, 2], vec![-2, 3]])).unwrap();
        let c = g.condition(2);
        let back = parse_nnf(&c.to_string()).unwrap();
        back.audit().unwrap();
        assert_eq!(back.count_models(), c.count_models());
    }

    #[test]
    fn literal_format() {
        let g = compile(&Cnf::new(2, vec![vec![1, 2]])).unwrap();
        let text = g.to_string();
        assert!(text.starts_with("nnf "));
        assert!(text.lines().any(|l| l.starts_with("O 1 2 ")));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(parse_nnf(""), Err(NnfError::Header));
        assert!(matches!(parse_nnf("nnf 1 0 2\nL 3\n"), Err(NnfError::Line { line: 2, .. })));
        assert!(matches!(parse_nnf("nnf 1 1 2\nA 1 0\n"), Err(NnfError::Line { .. })));
        assert!(matches!(
            parse_nnf("nnf 3 2 2\nL 1\nL 2\nO 0 2 0 1\n"),
            Err(NnfError::Line { .. })
        ));
        assert_eq!(
            parse_nnf("nnf 2 0 1\nL 1\n"),
            Err(NnfError::NodeCount { declared: 2, found: 1 })
        );
    }
}
