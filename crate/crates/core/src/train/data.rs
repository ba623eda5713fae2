use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::program::{Program, Step};

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetExample {
    pub question: String,
    #[serde(default)]
    pub program: Option<Vec<Step>>,
    #[serde(default)]
    pub answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Line { path: String, line: usize, message: String },
}

impl DatasetExample {
    pub fn with_program(question: impl Into<String>, program: &Program, answers: Option<Vec<String>>) -> Self {
        DatasetExample { question: question.into(), program: Some(program.steps.clone()), answers, domain: None }
    }

    pub fn with_answers(question: impl Into<String>, answers: Vec<String>) -> Self {
        DatasetExample { question: question.into(), program: None, answers: Some(answers), domain: None }
    }

    pub fn program(&self) -> Option<Program> {
        self.program.as_ref().map(|s| Program::new(s.clone()))
    }

    pub fn check(&self) -> Result<(), String> {
        if self.question.trim().is_empty() {
            return Err("empty question".into());
        }
        if self.program.is_none() && self.answers.is_none() {
            return Err("example has neither a program nor answers".into());
        }
        Ok(())
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DatasetExample>, DataError> {
    let p = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io { path: p.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io { path: p.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: DatasetExample =
            serde_json::from_str(&line).map_err(|e| DataError::Line { path: p.clone(), line: i + 1, message: e.to_string() })?;
        ex.check().map_err(|message| DataError::Line { path: p.clone(), line: i + 1, message })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn to_jsonl(examples: &[DatasetExample]) -> String {
    let mut s = String::new();
    for ex in examples {
        s.push_str(&serde_json::to_string(ex).expect("serializable"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl(path: &Path, examples: &[DatasetExample]) -> Result<(), DataError> {
    let p = path.display().to_string();
    let mut f = std::fs::File::create(path).map_err(|source| DataError::Io { path: p.clone(), source })?;
    f.write_all(to_jsonl(examples).as_bytes()).map_err(|source| DataError::Io { path: p, source })
}
