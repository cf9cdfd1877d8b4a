use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, FormatError, Result};
use crate::io::labels::{csv_reader, for_each_record, header_columns};

/// Ground-truth status of a noisy label: does the example really belong to the class?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truth {
    Positive,
    Negative,
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::Positive => "positive",
            Truth::Negative => "negative",
        })
    }
}

impl FromStr for Truth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Truth::Positive),
            "negative" => Ok(Truth::Negative),
            other => Err(format!("unknown truth {other:?} (expected positive or negative)")),
        }
    }
}

/// `(id, class) → truth`, kept in insertion order for stable output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthTable {
    rows: Vec<(String, String, Truth)>,
    index: HashMap<(String, String), usize>,
}

impl TruthTable {
    pub fn insert(&mut self, id: &str, class: &str, truth: Truth) {
        let key = (id.to_owned(), class.to_owned());
        match self.index.get(&key) {
            Some(&i) => self.rows[i].2 = truth,
            None => {
                self.index.insert(key, self.rows.len());
                self.rows.push((id.to_owned(), class.to_owned(), truth));
            }
        }
    }

    pub fn get(&self, id: &str, class: &str) -> Option<Truth> {
        self.index
            .get(&(id.to_owned(), class.to_owned()))
            .map(|&i| self.rows[i].2)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, Truth)> {
        self.rows.iter().map(|(i, c, t)| (i.as_str(), c.as_str(), *t))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn format_flags(table: &TruthTable, seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        out.push_str(&format!("# seed={seed}\n"));
    }
    out.push_str("id,class,truth\n");
    for (id, class, truth) in table.rows() {
        out.push_str(&format!("{id},{class},{truth}\n"));
    }
    out
}

pub fn write_flags(path: impl AsRef<Path>, table: &TruthTable, seed: Option<u64>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_flags(table, seed)).map_err(|e| Error::io(path, e))
}

pub fn parse_flags<R: Read>(input: R) -> Result<TruthTable> {
    let mut reader = csv_reader(input);
    let cols = header_columns(&mut reader, &["id", "class", "truth"])?;
    let mut table = TruthTable::default();
    for_each_record(&mut reader, |line, rec| {
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let truth = field(2)
            .parse::<Truth>()
            .map_err(|message| FormatError::Parse { line, message })?;
        table.insert(field(0), field(1), truth);
        Ok(())
    })?;
    Ok(table)
}

pub fn read_flags(path: impl AsRef<Path>) -> Result<TruthTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_flags(std::io::BufReader::new(file))
}
