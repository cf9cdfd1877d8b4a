use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

/// Whether a label was manually verified or inferred from weak signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Clean,
    Noisy,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Clean => "clean",
            Provenance::Noisy => "noisy",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "clean" => Ok(Provenance::Clean),
            "noisy" => Ok(Provenance::Noisy),
            other => Err(format!("unknown source {other:?} (expected clean or noisy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub id: String,
    pub class: String,
    pub source: Provenance,
}

/// `(id, class, source)` rows. An id may carry several classes, but each
/// `(id, class)` pair appears once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    rows: Vec<LabelRow>,
}

impl LabelTable {
    pub fn new(rows: Vec<LabelRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.id.is_empty() || row.class.is_empty() {
                return Err(Error::contract(format!("label row {i} has an empty id or class")));
            }
            if !seen.insert((row.id.as_str(), row.class.as_str())) {
                return Err(Error::contract(format!(
                    "duplicate label ({}, {})",
                    row.id, row.class
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[LabelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct classes in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.class.as_str()))
            .map(|r| r.class.clone())
            .collect()
    }

    /// Ids labeled in `class` with the given provenance, in file order.
    pub fn ids_for(&self, class: &str, source: Provenance) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| r.class == class && r.source == source)
            .map(|r| r.id.as_str())
            .collect()
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io("<labels>", err),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => FormatError::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        }
        .into(),
        csv::ErrorKind::Utf8 { .. } => FormatError::Parse {
            line,
            message: "invalid UTF-8".into(),
        }
        .into(),
        other => FormatError::Parse {
            line,
            message: format!("{other:?}"),
        }
        .into(),
    }
}

/// Positions of the named columns in a CSV header.
pub(crate) fn header_columns(
    reader: &mut csv::Reader<impl Read>,
    required: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader.headers().map_err(csv_error)?.clone();
    required
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                FormatError::Parse {
                    line: 1,
                    message: format!("missing column {name:?}"),
                }
                .into()
            })
        })
        .collect()
}

pub(crate) fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Iterates data records with their 1-based line numbers.
pub(crate) fn for_each_record<R: Read>(
    reader: &mut csv::Reader<R>,
    mut f: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                f(line, &record)?;
            }
            Ok(false) => return Ok(()),
            Err(e) => return Err(csv_error(e)),
        }
    }
}

pub fn parse_labels<R: Read>(input: R) -> Result<LabelTable> {
    let mut reader = csv_reader(input);
    let cols = header_columns(&mut reader, &["id", "class", "source"])?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for_each_record(&mut reader, |line, rec| {
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let (id, class) = (field(0), field(1));
        if id.is_empty() || class.is_empty() {
            return Err(FormatError::Parse {
                line,
                message: "empty id or class".into(),
            }
            .into());
        }
        let source = field(2)
            .parse::<Provenance>()
            .map_err(|message| FormatError::Parse { line, message })?;
        if !seen.insert((id.to_owned(), class.to_owned())) {
            return Err(FormatError::Parse {
                line,
                message: format!("duplicate label ({id}, {class})"),
            }
            .into());
        }
        rows.push(LabelRow {
            id: id.to_owned(),
            class: class.to_owned(),
            source,
        });
        Ok(())
    })?;
    Ok(LabelTable { rows })
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(std::io::BufReader::new(file))
}

pub fn format_labels(table: &LabelTable, seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed={seed}\n"));
    }
    out.push_str("id,class,source\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{}\n", r.id, r.class, r.source));
    }
    out
}

pub fn write_labels(path: impl AsRef<Path>, table: &LabelTable, seed: Option<u64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_labels(table, seed)).map_err(|e| Error::io(path, e))
}
