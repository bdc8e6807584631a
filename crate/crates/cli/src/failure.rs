use std::fmt;
use std::process::ExitCode;

use gapscope_core::dnnf::CompileError;
use gapscope_core::snapshot::SnapshotError;
use gapscope_core::views::{error_envelope, ViewError};

pub const DOMAIN: u8 = 1;
pub const USAGE: u8 = 2;
pub const RESOURCE: u8 = 3;

/// A failure with its exit code, printed as one JSON line on stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub detail: String,
}

impl Failure {
    pub fn domain(kind: &'static str, detail: impl Into<String>) -> Self {
        Failure { code: DOMAIN, kind, detail: detail.into() }
    }

    pub fn usage(detail: impl Into<String>) -> Self {
        Failure { code: USAGE, kind: "usage", detail: detail.into() }
    }

    pub fn resource(detail: impl Into<String>) -> Self {
        Failure { code: RESOURCE, kind: "resource", detail: detail.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

impl std::error::Error for Failure {}

impl From<ViewError> for Failure {
    fn from(e: ViewError) -> Self {
        match &e {
            ViewError::BadRequest { .. } => Failure::usage(e.to_string()),
            ViewError::NotFound(_) => Failure::domain("not_found", e.to_string()),
            ViewError::Capacity(_) => Failure::resource(e.to_string()),
        }
    }
}

/// The context chain joined with `: `, skipping causes whose text the
/// previous message already repeats.
fn chain_text(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if parts.last().is_none_or(|p| !p.contains(&s)) {
            parts.push(s);
        }
    }
    parts.join(": ")
}

/// Pick the exit code for an error, looking through its context chain.
pub fn classify(e: &anyhow::Error) -> Failure {
    let detail = chain_text(e);
    for cause in e.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return Failure { detail: if f.detail.is_empty() { detail } else { f.detail.clone() }, ..f.clone() };
        }
        if let Some(v) = cause.downcast_ref::<ViewError>() {
            return v.clone().into();
        }
        if cause.downcast_ref::<CompileError>().is_some()
            || matches!(cause.downcast_ref::<SnapshotError>(), Some(SnapshotError::Compile(_)))
        {
            return Failure::resource(detail);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return Failure::domain("io", detail);
        }
    }
    Failure::domain("input", detail)
}

pub fn report(f: &Failure) -> ExitCode {
    eprintln!("{}", error_envelope(f.kind, &f.detail));
    ExitCode::from(f.code)
}
