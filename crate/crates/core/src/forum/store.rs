//! Write-ahead log persistence for the forum.
//!
//! The log is a JSON-lines file. Line 1 is a header carrying the schema
//! version; each following line is one record. A topic and its opening post
//! are written with a single `write_all`, and a topic without an opening
//! post after replay (torn tail) is discarded.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Account, Board, Post, Topic};

pub const WAL_SCHEMA: &str = "forumbot-wal";
pub const WAL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt log {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unsupported log schema {schema} v{version}")]
    Version { schema: String, version: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum WalRecord {
    Header { schema: String, version: u32 },
    Account(Account),
    Board(Board),
    Topic(Topic),
    Post(Post),
}

pub struct Wal {
    path: PathBuf,
    file: File,
}

impl Wal {
    /// Opens (or creates) the log and returns every record after the header.
    pub fn open(path: &Path) -> Result<(Wal, Vec<WalRecord>), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut records = Vec::new();
        let exists = path.exists() && std::fs::metadata(path).map_err(io)?.len() > 0;
        if exists {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            let mut lines = reader.lines().enumerate().peekable();
            while let Some((idx, line)) = lines.next() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: WalRecord = match serde_json::from_str(&line) {
                    Ok(r) => r,
                    // a partial final line is a torn write; anything earlier is corruption
                    Err(_) if lines.peek().is_none() => break,
                    Err(e) => {
                        return Err(StoreError::Corrupt {
                            path: path.to_path_buf(),
                            line: idx + 1,
                            message: e.to_string(),
                        })
                    }
                };
                if idx == 0 {
                    match rec {
                        WalRecord::Header { schema, version }
                            if schema == WAL_SCHEMA && version == WAL_VERSION => {}
                        WalRecord::Header { schema, version } => {
                            return Err(StoreError::Version { schema, version })
                        }
                        _ => {
                            return Err(StoreError::Corrupt {
                                path: path.to_path_buf(),
                                line: 1,
                                message: "missing header".into(),
                            })
                        }
                    }
                } else {
                    records.push(rec);
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if !exists {
            let header = WalRecord::Header {
                schema: WAL_SCHEMA.into(),
                version: WAL_VERSION,
            };
            writeln!(file, "{}", serde_json::to_string(&header).expect("header")).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        Ok((
            Wal {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    /// Appends records as one write and syncs.
    pub fn append(&mut self, records: &[WalRecord]) -> Result<(), StoreError> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).expect("record serializes"));
            buf.push('\n');
        }
        let io = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(buf.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}
