//! Line-oriented semantic constraint files.
//!
//! ```text
//! atmostone:Rationality
//! implies:Trace > Partial,Trace > Full
//! atleastone:Fluent Observability > Unobservable,Fluent Observability > Partially Observable,
//!     Fluent Observability > Fully Observable
//! ```
//!
//! A line that starts with whitespace continues the term list of the
//! directive above it. Lines starting with `#` are comments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survey::PATH_SEPARATOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectiveKind {
    Implies,
    AtMostOne,
    AtLeastOne,
}

impl DirectiveKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DirectiveKind::Implies => "implies",
            DirectiveKind::AtMostOne => "atmostone",
            DirectiveKind::AtLeastOne => "atleastone",
        }
    }
}

impl FromStr for DirectiveKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "implies" => Ok(DirectiveKind::Implies),
            "atmostone" => Ok(DirectiveKind::AtMostOne),
            "atleastone" => Ok(DirectiveKind::AtLeastOne),
            _ => Err(()),
        }
    }
}

/// A possibly negated reference to a taxonomy class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassTerm {
    pub negated: bool,
    /// Trimmed path segments, first level first.
    pub segments: Vec<String>,
}

impl ClassTerm {
    pub fn classpath(&self) -> String {
        self.segments.join(PATH_SEPARATOR)
    }
}

impl fmt::Display for ClassTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("~")?;
        }
        f.write_str(&self.classpath())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct TermError(String);

impl FromStr for ClassTerm {
    type Err = TermError;

    /// Parses `[~]segment > segment > ...`.
    fn from_str(s: &str) -> Result<Self, TermError> {
        let s = s.trim();
        let (negated, body) = match s.strip_prefix('~') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, s),
        };
        if body.is_empty() {
            return Err(TermError("empty term".into()));
        }
        let segments: Vec<String> = body.split('>').map(|seg| seg.trim().to_string()).collect();
        if segments.iter().any(String::is_empty) {
            return Err(TermError(format!("empty path segment in `{s}`")));
        }
        Ok(ClassTerm { negated, segments })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintDirective {
    pub kind: DirectiveKind,
    pub terms: Vec<ClassTerm>,
    /// 1-based line of the keyword.
    pub source_line: usize,
}

impl fmt::Display for ConstraintDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.kind.keyword())?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("line {line}: unknown directive `{keyword}`")]
    UnknownDirective { line: usize, keyword: String },
    #[error("line {line}: expected `kind:terms`")]
    MissingColon { line: usize },
    #[error("line {line}: empty term")]
    EmptyTerm { line: usize },
    #[error("line {line}: {message}")]
    BadTerm { line: usize, message: String },
    #[error("line {line}: `{kind}` does not accept negated terms")]
    NegatedTerm { line: usize, kind: &'static str },
    #[error("line {line}: implies needs at least two terms, found {found}")]
    TooFewTerms { line: usize, found: usize },
    #[error("line {line}: continuation line without a directive")]
    OrphanContinuation { line: usize },
}

struct Pending {
    kind: DirectiveKind,
    line: usize,
    terms: Vec<ClassTerm>,
    trailing_comma: Option<usize>,
}

impl Pending {
    /// Adds the comma-separated terms of one physical line.
    fn push_terms(&mut self, text: &str, line: usize) -> Result<(), DslError> {
        let text = text.trim();
        self.trailing_comma = None;
        if text.is_empty() {
            return Ok(());
        }
        let (body, trailing) = match text.strip_suffix(',') {
            Some(b) => (b, true),
            None => (text, false),
        };
        for piece in body.split(',') {
            if piece.trim().is_empty() {
                return Err(DslError::EmptyTerm { line });
            }
            let term = piece.parse().map_err(|TermError(message)| DslError::BadTerm {
                line,
                message,
            })?;
            self.terms.push(term);
        }
        if trailing {
            self.trailing_comma = Some(line);
        }
        Ok(())
    }

    fn finish(self) -> Result<ConstraintDirective, DslError> {
        let line = self.line;
        if let Some(l) = self.trailing_comma {
            return Err(DslError::EmptyTerm { line: l });
        }
        if self.terms.is_empty() {
            return Err(DslError::EmptyTerm { line });
        }
        match self.kind {
            DirectiveKind::Implies if self.terms.len() < 2 => {
                return Err(DslError::TooFewTerms {
                    line,
                    found: self.terms.len(),
                })
            }
            DirectiveKind::AtMostOne | DirectiveKind::AtLeastOne
                if self.terms.iter().any(|t| t.negated) =>
            {
                return Err(DslError::NegatedTerm {
                    line,
                    kind: self.kind.keyword(),
                })
            }
            _ => {}
        }
        Ok(ConstraintDirective {
            kind: self.kind,
            terms: self.terms,
            source_line: line,
        })
    }
}

/// Parse a constraint file into directives, in file order.
pub fn parse_constraints(text: &str) -> Result<Vec<ConstraintDirective>, DslError> {
    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if raw.starts_with(char::is_whitespace) {
            let p = pending
                .as_mut()
                .ok_or(DslError::OrphanContinuation { line })?;
            p.push_terms(raw, line)?;
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        if let Some(p) = pending.take() {
            out.push(p.finish()?);
        }
        let (keyword, rest) = raw
            .split_once(':')
            .ok_or(DslError::MissingColon { line })?;
        let kind = keyword
            .trim()
            .parse()
            .map_err(|()| DslError::UnknownDirective {
                line,
                keyword: keyword.trim().to_string(),
            })?;
        let mut p = Pending {
            kind,
            line,
            terms: Vec::new(),
            trailing_comma: None,
        };
        p.push_terms(rest, line)?;
        pending = Some(p);
    }
    if let Some(p) = pending {
        out.push(p.finish()?);
    }
    Ok(out)
}

/// Render directives back into the file format, one per line.
pub fn render_constraints(directives: &[ConstraintDirective]) -> String {
    directives.iter().map(|d| format!("{d}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE_CONSTRAINTS: &str = "\
atmostone:Rationality

implies:Uncertainty > Probabilistic,Uncertainty > Non-deterministic,Uncertainty > Deterministic
atleastone:Uncertainty > Probabilistic,Uncertainty > Non-deterministic,Uncertainty > Deterministic

implies:Fluent Observability > Partially Observable,Fluent Observability > Fully Observable
implies:Fluent Observability > Unobservable,~Fluent Observability > Partially Observable
implies:Fluent Observability > Unobservable,~Fluent Observability > Fully Observable
atleastone:Fluent Observability > Unobservable,Fluent Observability > Partially Observable,
    Fluent Observability > Fully Observable

implies:Trace > Partial,Trace > Full
atleastone:Trace > Partial,Trace > Full

implies:Actions > Typing,Actions > Parameterized
implies:Predicates > Parameters Typed,Predicates > Parameterized
implies:Predicate Information > Typing,Predicate Information > Parameterized
implies:Action Information > Typing,Action Information > Parameterized
";

    fn term(s: &str) -> ClassTerm {
        s.parse().unwrap()
    }

    #[test]
    fn simple_implies() {
        let d = parse_constraints("implies:Trace > Partial,Trace > Full").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DirectiveKind::Implies);
        assert_eq!(d[0].terms, [term("Trace > Partial"), term("Trace > Full")]);
        assert_eq!(d[0].terms[0].segments, ["Trace", "Partial"]);
        assert_eq!(d[0].source_line, 1);
    }

    #[test]
    fn negated_second_term() {
        let d = parse_constraints(
            "implies:Fluent Observability > Unobservable,~Fluent Observability > Partially Observable",
        )
        .unwrap();
        assert!(!d[0].terms[0].negated);
        assert!(d[0].terms[1].negated);
        assert_eq!(d[0].terms[1].classpath(), "Fluent Observability > Partially Observable");
    }

    #[test]
    fn whole_reference_file() {
        let d = parse_constraints(SAMPLE_CONSTRAINTS).unwrap();
        assert_eq!(d.len(), 13);
        assert_eq!(d[0].kind, DirectiveKind::AtMostOne);
        assert_eq!(d[0].terms, [term("Rationality")]);
        let wrapped = &d[6];
        assert_eq!(wrapped.kind, DirectiveKind::AtLeastOne);
        assert_eq!(wrapped.terms.len(), 3);
        assert_eq!(wrapped.source_line, 9);
        assert_eq!(wrapped.terms[2].classpath(), "Fluent Observability > Fully Observable");
        assert_eq!(d[7].source_line, 12);
    }

    #[test]
    fn errors_carry_physical_lines() {
        assert_eq!(parse_constraints("atmostone:"), Err(DslError::EmptyTerm { line: 1 }));
        assert_eq!(
            parse_constraints("\n\nfoo:A"),
            Err(DslError::UnknownDirective {
                line: 3,
                keyword: "foo".into()
            })
        );
        assert_eq!(
            parse_constraints("atleastone:A,\n  B,,C"),
            Err(DslError::EmptyTerm { line: 2 })
        );
        assert_eq!(
            parse_constraints("atleastone:A,~B"),
            Err(DslError::NegatedTerm {
                line: 1,
                kind: "atleastone"
            })
        );
        assert_eq!(
            parse_constraints("# c\nimplies:A"),
            Err(DslError::TooFewTerms { line: 2, found: 1 })
        );
        assert_eq!(
            parse_constraints("  A,B"),
            Err(DslError::OrphanContinuation { line: 1 })
        );
        assert_eq!(parse_constraints("implies A,B"), Err(DslError::MissingColon { line: 1 }));
        assert!(matches!(
            parse_constraints("implies:A >  > B,C"),
            Err(DslError::BadTerm { line: 1, .. })
        ));
        assert_eq!(parse_constraints("atmostone:A,B,"), Err(DslError::EmptyTerm { line: 1 }));
    }

    #[test]
    fn comments_and_blank_lines() {
        let d = parse_constraints("# header\n\n  \natmostone:A\n# between\natleastone:A,B\n")
            .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].source_line, 6);
    }

    #[test]
    fn segments_are_trimmed() {
        let d = parse_constraints("implies:  Trace>Partial , ~ Trace >  Full ").unwrap();
        assert_eq!(d[0].terms[0].classpath(), "Trace > Partial");
        assert_eq!(d[0].terms[1].to_string(), "~Trace > Full");
    }

    fn arb_segment() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9 -]{0,10}[A-Za-z0-9]".prop_map(|s| s.trim().to_string())
    }

    fn arb_directive() -> impl Strategy<Value = ConstraintDirective> {
        let term = (any::<bool>(), prop::collection::vec(arb_segment(), 1..4));
        (0..3usize, prop::collection::vec(term, 2..5)).prop_map(|(k, terms)| {
            let kind = [
                DirectiveKind::Implies,
                DirectiveKind::AtMostOne,
                DirectiveKind::AtLeastOne,
            ][k];
            ConstraintDirective {
                kind,
                terms: terms
                    .into_iter()
                    .map(|(neg, segments)| ClassTerm {
                        negated: neg && kind == DirectiveKind::Implies,
                        segments,
                    })
                    .collect(),
                source_line: 0,
            }
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(ds in prop::collection::vec(arb_directive(), 0..6)) {
            let text = render_constraints(&ds);
            let parsed = parse_constraints(&text).unwrap();
            let strip = |v: &[ConstraintDirective]| -> Vec<(DirectiveKind, Vec<ClassTerm>)> {
                v.iter().map(|d| (d.kind, d.terms.clone())).collect()
            };
            prop_assert_eq!(strip(&parsed), strip(&ds));
            prop_assert_eq!(render_constraints(&parsed), text);
        }
    }
}
