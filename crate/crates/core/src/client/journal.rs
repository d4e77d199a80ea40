//! Append-only exchange journal: one JSON record per line, one file per
//! population. Appends are single writes so a crash never leaves a torn
//! record ahead of intact ones.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{ClientError, PromptRecord};
use crate::types::PopulationId;

/// Journal file for one population: `<population_id>.journal` inside `dir`.
pub fn journal_path(dir: &Path, population: &PopulationId) -> PathBuf {
    dir.join(format!("{}.journal", population.label()))
}

/// Serializes all appends for one journal file through one handle.
#[derive(Debug)]
pub struct JournalWriter {
    file: Mutex<File>,
    path: PathBuf,
}

impl JournalWriter {
    pub fn open(path: &Path) -> Result<JournalWriter, ClientError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JournalWriter { file: Mutex::new(file), path: path.to_owned() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// One record becomes one line via a single write, so concurrent writers
    /// on the same path never interleave partial records.
    pub fn append(&self, record: &PromptRecord) -> Result<(), ClientError> {
        let mut line = serde_json::to_string(record)
            .map_err(|e| ClientError::MalformedResponse(format!("unserializable record: {e}")))?;
        line.push('\n');
        let mut file = self.file.lock().expect("journal writer lock");
        file.write_all(line.as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

fn parse_line(line: &str, line_number: usize) -> Result<PromptRecord, ClientError> {
    let record: PromptRecord = serde_json::from_str(line)
        .map_err(|e| ClientError::CorruptRecord { line: line_number, reason: e.to_string() })?;
    if let Some(score) = record.parsed_score {
        if !(1..=5).contains(&score) {
            return Err(ClientError::CorruptRecord {
                line: line_number,
                reason: format!("parsed_score {score} outside 1..5"),
            });
        }
    }
    Ok(record)
}

fn load_lines(path: &Path, tolerate_torn_tail: bool) -> Result<(Vec<PromptRecord>, bool), ClientError> {
    let content = match std::fs::read_to_string(path) {
        Ok(content) => content,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            log::debug!("journal {} does not exist; treating as empty", path.display());
            return Ok((Vec::new(), false));
        }
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<(usize, &str)> = content
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line))
        .filter(|(_, line)| !line.trim().is_empty())
        .collect();
    let mut records = Vec::with_capacity(lines.len());
    let mut dropped_tail = false;
    for (position, (line_number, line)) in lines.iter().enumerate() {
        match parse_line(line, *line_number) {
            Ok(record) => records.push(record),
            Err(e) if tolerate_torn_tail && position == lines.len() - 1 => {
                log::warn!("journal {}: dropping torn final record: {e}", path.display());
                dropped_tail = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((records, dropped_tail))
}

/// Loads a journal strictly: any corrupt line is an error naming its line
/// number; a missing file is an empty journal (with a warning).
pub fn journal_load(path: &Path) -> Result<Vec<PromptRecord>, ClientError> {
    load_lines(path, false).map(|(records, _)| records)
}

/// Loads a journal for resumption: a torn FINAL line (the crash case the
/// append contract permits) is dropped with a warning instead of failing.
/// Returns the records and whether a torn tail was dropped.
pub fn journal_recover(path: &Path) -> Result<(Vec<PromptRecord>, bool), ClientError> {
    load_lines(path, true)
}
