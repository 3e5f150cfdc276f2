//! JSONL passage and query records.

use std::collections::HashSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub id: String,
    pub article_id: String,
    pub title: String,
    pub text: String,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
}

trait Record: DeserializeOwned {
    fn id(&self) -> &str;
    fn check(&self) -> Option<&'static str>;
}

impl Record for PassageRecord {
    fn id(&self) -> &str {
        &self.id
    }

    fn check(&self) -> Option<&'static str> {
        self.text.is_empty().then_some("passage text is empty")
    }
}

impl Record for QueryRecord {
    fn id(&self) -> &str {
        &self.id
    }

    fn check(&self) -> Option<&'static str> {
        self.answers.is_empty().then_some("answers list is empty")
    }
}

fn parse_jsonl<T: Record>(text: &str) -> Result<Vec<T>> {
    let mut out: Vec<T> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| Error::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(problem) = rec.check() {
            return Err(Error::Line {
                line: line_no,
                message: problem.to_string(),
            });
        }
        if !seen.insert(rec.id().to_owned()) {
            return Err(Error::Line {
                line: line_no,
                message: format!("duplicate id {:?}", rec.id()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = util::read_file(path)?;
    String::from_utf8(bytes).map_err(|e| Error::format(e.utf8_error().valid_up_to() as u64, "file is not valid UTF-8"))
}

pub fn parse_passages(text: &str) -> Result<Vec<PassageRecord>> {
    parse_jsonl(text)
}

pub fn parse_queries(text: &str) -> Result<Vec<QueryRecord>> {
    parse_jsonl(text)
}

pub fn load_passages(path: &Path) -> Result<Vec<PassageRecord>> {
    parse_passages(&read_text(path)?)
}

pub fn load_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    parse_queries(&read_text(path)?)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_jsonl<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    util::write_atomic(path, to_jsonl(records).as_bytes())
}

/// Reads a newline-separated id list, skipping blank lines.
pub fn load_id_list(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn save_id_list(ids: &[String], path: &Path) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    util::write_atomic(path, text.as_bytes())
}
