use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::cleaners::{RelevanceEntry, RelevanceMap};
use crate::error::{Error, FormatError, Result};
use crate::io::labels::{csv_reader, for_each_record, header_columns};
use crate::io::Provenance;

pub const RELEVANCE_HEADER: &str = "id,class,relevance,provenance";

/// Six-decimal rendering of a relevance value, clamped to `[0, 1]` first so
/// that rounding never leaves the unit interval.
pub fn format_relevance_value(r: f64) -> String {
    format!("{:.6}", r.clamp(0.0, 1.0) + 0.0)
}

/// Serializes relevance maps as CSV with six decimals. An optional seed is
/// echoed as a leading `# seed=` comment.
pub fn format_relevance(maps: &[RelevanceMap], seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed={seed}\n"));
    }
    out.push_str(RELEVANCE_HEADER);
    out.push('\n');
    for map in maps {
        for e in map.entries() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.id,
                map.class(),
                format_relevance_value(e.relevance),
                e.provenance
            ));
        }
    }
    out
}

pub fn write_relevance(path: impl AsRef<Path>, maps: &[RelevanceMap], seed: Option<u64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_relevance(maps, seed)).map_err(|e| Error::io(path, e))
}

/// Parses relevance CSV into one map per class, classes in order of first
/// appearance. Values outside `[0, 1]` and clean rows other than 1 are rejected.
pub fn parse_relevance<R: Read>(input: R) -> Result<Vec<RelevanceMap>> {
    let mut reader = csv_reader(input);
    let cols = header_columns(&mut reader, &["id", "class", "relevance", "provenance"])?;
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<RelevanceEntry>> = HashMap::new();
    for_each_record(&mut reader, |line, rec| {
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let parse_err = |message: String| Error::from(FormatError::Parse { line, message });
        let id = field(0);
        let class = field(1);
        if id.is_empty() || class.is_empty() {
            return Err(parse_err("empty id or class".into()));
        }
        let relevance: f64 = field(2)
            .parse()
            .map_err(|_| parse_err(format!("invalid relevance {:?}", field(2))))?;
        if !(0.0..=1.0).contains(&relevance) {
            return Err(parse_err(format!("relevance {relevance} outside [0, 1]")));
        }
        let provenance: Provenance = field(3).parse().map_err(parse_err)?;
        if provenance == Provenance::Clean && relevance != 1.0 {
            return Err(parse_err(format!("clean example {id} has relevance {relevance}")));
        }
        let entries = grouped.entry(class.to_owned()).or_insert_with(|| {
            order.push(class.to_owned());
            Vec::new()
        });
        if entries.iter().any(|e| e.id == id) {
            return Err(parse_err(format!("duplicate entry ({id}, {class})")));
        }
        entries.push(RelevanceEntry {
            id: id.to_owned(),
            relevance,
            provenance,
        });
        Ok(())
    })?;
    order
        .into_iter()
        .map(|class| {
            let entries = grouped.remove(&class).unwrap_or_default();
            RelevanceMap::new(class, entries)
        })
        .collect()
}

pub fn read_relevance(path: impl AsRef<Path>) -> Result<Vec<RelevanceMap>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_relevance(std::io::BufReader::new(file))
}
