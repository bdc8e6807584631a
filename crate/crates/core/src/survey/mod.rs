//! Survey ingestion: configuration, sheet export, taxonomy recovery and the
//! resulting corpus.

mod config;
mod corpus;
mod sheet;
mod taxonomy;

pub use config::{
    parse_config, ConfigError, InputFile, KeyMap, PaperRows, Span, SurveyConfig, TaxonomySpec,
};
pub use corpus::{
    load_corpus, Diagnostic, LoadError, LoadReport, Membership, Paper, PaperId, SurveyCorpus,
    Taxonomy,
};
pub use sheet::{Sheet, SheetError};
pub use taxonomy::{build_taxonomy, TaxonomyError, TaxonomyNode, PATH_SEPARATOR};
