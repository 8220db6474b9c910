//! Line-delimited file helpers shared by the loaders.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum LineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Iterate over `(1-based line number, line)` pairs, skipping blank lines.
pub fn open_lines(
    path: &Path,
) -> Result<impl Iterator<Item = Result<(usize, String), LineError>>, LineError> {
    let file = File::open(path).map_err(|source| LineError::Io {
        path: path.to_owned(),
        source,
    })?;
    let owned = path.to_owned();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(source) => Some(Err(LineError::Io {
                path: owned.clone(),
                source,
            })),
        }))
}

pub fn parse_json_line<T: DeserializeOwned>(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<T, LineError> {
    serde_json::from_str(line).map_err(|e| LineError::Parse {
        path: path.to_owned(),
        line: line_no,
        message: e.to_string(),
    })
}
