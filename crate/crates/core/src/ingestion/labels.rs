use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{FlickError, Result};

/// Record id to class index, plus the ordered class names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTable {
    entries: IndexMap<String, usize>,
    class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LabelLine {
    id: String,
    label: String,
}

impl LabelTable {
    pub fn new(entries: IndexMap<String, usize>, class_names: Vec<String>) -> Result<Self> {
        if let Some((id, &c)) = entries.iter().find(|(_, &c)| c >= class_names.len()) {
            return Err(FlickError::Data(format!(
                "id {id:?} has class {c} but only {} classes exist",
                class_names.len()
            )));
        }
        Ok(LabelTable {
            entries,
            class_names,
        })
    }

    /// Builds a table from `(id, class name)` pairs. Class names are the
    /// sorted set of distinct names.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let pairs: Vec<(String, String)> = pairs
            .into_iter()
            .map(|(i, l)| (i.into(), l.into()))
            .collect();
        let class_names: Vec<String> = pairs
            .iter()
            .map(|(_, l)| l.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut entries = IndexMap::with_capacity(pairs.len());
        for (id, label) in pairs {
            let class = class_names.binary_search(&label).expect("name collected above");
            if entries.insert(id.clone(), class).is_some() {
                return Err(FlickError::Data(format!("duplicate id {id:?}")));
            }
        }
        Ok(LabelTable {
            entries,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_of(&self, id: &str) -> Option<usize> {
        self.entries.get(id).copied()
    }

    /// `(id, class)` in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Re-indexes this table against another class list, e.g. to align a
    /// held-out table with the training table. Unknown names are an error.
    pub fn reindexed(&self, class_names: &[String]) -> Result<LabelTable> {
        let mut entries = IndexMap::with_capacity(self.entries.len());
        for (id, &c) in &self.entries {
            let name = &self.class_names[c];
            let idx = class_names.iter().position(|n| n == name).ok_or_else(|| {
                FlickError::Data(format!("class {name:?} of id {id:?} is not a known class"))
            })?;
            entries.insert(id.clone(), idx);
        }
        LabelTable::new(entries, class_names.to_vec())
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FlickError::io(path, e))?;
    parse_labels(BufReader::new(file))
}

pub fn parse_labels<R: BufRead>(reader: R) -> Result<LabelTable> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FlickError::Format(format!("line {}: {e}", lineno + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelLine = serde_json::from_str(&line)
            .map_err(|e| FlickError::Format(format!("line {}: {e}", lineno + 1)))?;
        pairs.push((rec.id, rec.label));
    }
    LabelTable::from_pairs(pairs)
}

pub fn write_labels(table: &LabelTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FlickError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, class) in table.iter() {
        let line = LabelLine {
            id: id.to_string(),
            label: table.class_names[class].clone(),
        };
        serde_json::to_writer(&mut w, &line).expect("string fields always serialize");
        w.write_all(b"\n").map_err(|e| FlickError::io(path, e))?;
    }
    w.flush().map_err(|e| FlickError::io(path, e))
}
