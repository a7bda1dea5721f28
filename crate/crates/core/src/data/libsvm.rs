//! LIBSVM sparse text format.
//!
//! ```text
//! <label> <index>:<value> <index>:<value> ... # optional comment
//! ```
//!
//! Indices are 1-based on the wire and strictly increasing within a line.
//! They are stored 0-based in [`SparseExample`].

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{Dataset, SparseExample};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: invalid label `{token}`")]
    Label { line: usize, token: String },
    #[error("line {line}: token `{token}` is not of the form index:value")]
    MissingColon { line: usize, token: String },
    #[error("line {line}: invalid feature index `{token}`")]
    Index { line: usize, token: String },
    #[error("line {line}: feature index {index} is below 1")]
    IndexBelowOne { line: usize, index: i64 },
    #[error("line {line}: feature index {index} does not increase (previous {previous})")]
    NonIncreasing {
        line: usize,
        index: u64,
        previous: u64,
    },
    #[error("line {line}: invalid feature value `{token}`")]
    Value { line: usize, token: String },
    #[error("line {line}: i/o error: {source}")]
    Io {
        line: usize,
        #[source]
        source: io::Error,
    },
}

impl ParseError {
    /// 1-based line number the error refers to.
    pub fn line(&self) -> usize {
        match self {
            ParseError::Label { line, .. }
            | ParseError::MissingColon { line, .. }
            | ParseError::Index { line, .. }
            | ParseError::IndexBelowOne { line, .. }
            | ParseError::NonIncreasing { line, .. }
            | ParseError::Value { line, .. }
            | ParseError::Io { line, .. } => *line,
        }
    }
}

fn parse_finite(token: &str) -> Option<f64> {
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_line(content: &str, line: usize) -> Result<Option<SparseExample>, ParseError> {
    let content = match content.find('#') {
        Some(pos) => &content[..pos],
        None => content,
    };
    let mut tokens = content.split_ascii_whitespace();
    let Some(label_tok) = tokens.next() else {
        return Ok(None);
    };
    let label = parse_finite(label_tok).ok_or_else(|| ParseError::Label {
        line,
        token: label_tok.to_string(),
    })?;

    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut previous: Option<u64> = None;
    for token in tokens {
        let (idx_tok, val_tok) = token.split_once(':').ok_or_else(|| ParseError::MissingColon {
            line,
            token: token.to_string(),
        })?;
        let idx: i64 = idx_tok.parse().map_err(|_| ParseError::Index {
            line,
            token: idx_tok.to_string(),
        })?;
        if idx < 1 {
            return Err(ParseError::IndexBelowOne { line, index: idx });
        }
        let idx = idx as u64;
        if idx > u32::MAX as u64 {
            return Err(ParseError::Index {
                line,
                token: idx_tok.to_string(),
            });
        }
        if let Some(prev) = previous {
            if idx <= prev {
                return Err(ParseError::NonIncreasing {
                    line,
                    index: idx,
                    previous: prev,
                });
            }
        }
        previous = Some(idx);
        let value = parse_finite(val_tok).ok_or_else(|| ParseError::Value {
            line,
            token: val_tok.to_string(),
        })?;
        indices.push((idx - 1) as u32);
        values.push(value);
    }
    Ok(Some(SparseExample {
        indices,
        values,
        label,
    }))
}

/// Reads a whole LIBSVM stream in a single pass.
pub fn parse_libsvm<R: BufRead>(mut reader: R) -> Result<Dataset, ParseError> {
    let mut examples = Vec::new();
    let mut n_features = 0usize;
    let mut buf = String::new();
    let mut line = 0usize;
    loop {
        buf.clear();
        line += 1;
        let read = reader
            .read_line(&mut buf)
            .map_err(|source| ParseError::Io { line, source })?;
        if read == 0 {
            break;
        }
        if let Some(example) = parse_line(&buf, line)? {
            if let Some(&last) = example.indices.last() {
                n_features = n_features.max(last as usize + 1);
            }
            examples.push(example);
        }
    }
    Ok(Dataset {
        examples,
        n_features,
        label_map: None,
    })
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset, ParseError> {
    parse_libsvm(text.as_bytes())
}

pub fn read_libsvm_file(path: impl AsRef<Path>) -> crate::Result<Dataset> {
    let file = File::open(path)?;
    Ok(parse_libsvm(BufReader::new(file))?)
}

/// Writes examples using the shortest round-trip representation of every value.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut out: W) -> io::Result<()> {
    for e in &dataset.examples {
        write!(out, "{}", e.label)?;
        for (j, v) in e.iter() {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_lines() {
        let ds = parse_libsvm_str("1 1:0.5 3:-2\n-1 2:1").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features, 3);
        assert_eq!(ds.examples[0].indices, vec![0, 2]);
        assert_eq!(ds.examples[0].values, vec![0.5, -2.0]);
        assert_eq!(ds.distinct_labels(), vec![-1.0, 1.0]);
    }

    #[test]
    fn empty_input() {
        let ds = parse_libsvm_str("").unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.n_features, 0);
    }

    #[test]
    fn comments_and_blank_lines() {
        let ds = parse_libsvm_str("# header\n\n+1 4:1 # trailing\n   \n-1\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_features, 4);
        assert!(ds.examples[1].indices.is_empty());
    }

    #[test]
    fn error_lines() {
        let cases = [
            ("1 1:1\nx 1:2\n", 2),
            ("1 1:1\n1 2:1\n1 3:a\n", 3),
            ("1 0:1\n", 1),
            ("1 2:1 2:3\n", 1),
            ("1 3:1 2:3\n", 1),
            ("\n\n1 5\n", 3),
            ("1 q:1\n", 1),
        ];
        for (text, line) in cases {
            let err = parse_libsvm_str(text).unwrap_err();
            assert_eq!(err.line(), line, "{text:?} -> {err}");
        }
    }

    #[test]
    fn writer_output() {
        let ds = parse_libsvm_str("1 1:0.5 3:-2\n-1 2:1\n").unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 1:0.5 3:-2\n-1 2:1\n");
    }
}
