//! On-disk formats: the `FSTO` feature store, label/relevance/flag CSVs and
//! the `WCLS` classifier weight file.
//!
//! Loaders never panic on malformed input; every failure is a typed
//! [`FormatError`](crate::FormatError) carrying a byte offset or line number.

mod cursor;
mod features;
mod flags;
mod labels;
mod relevance;
mod weights;

pub use features::{
    decode_feature_store, encode_feature_store, read_feature_store, write_feature_store, FeatureStore,
    FEATURE_MAGIC, FEATURE_VERSION,
};
pub use flags::{format_flags, parse_flags, read_flags, write_flags, Truth, TruthTable};
pub use labels::{format_labels, parse_labels, read_labels, write_labels, LabelRow, LabelTable, Provenance};
pub use relevance::{format_relevance, format_relevance_value, parse_relevance, read_relevance, write_relevance, RELEVANCE_HEADER};
pub use weights::{decode_weights, encode_weights, read_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
