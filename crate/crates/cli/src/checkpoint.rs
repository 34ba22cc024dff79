//! Text checkpoint format.
//!
//! Line 1: `stackrnn-ckpt v1`
//! Line 2: `kind=<k> m=<m> d=<d> S=<S> k=<k> noop=<0|1> useR=<0|1>`
//! Line 3: `vocab=` followed by space-separated tokens
//! Then each matrix as `matrix <name> <rows> <cols>` followed by its rows,
//! decimal values with 17 significant digits so 64-bit floats round-trip
//! exactly. Matrix order: embed, recur, out, then per unit act<j>/write<j>,
//! then memin.

use stackrnn_core::model::{ModelConfig, ModelKind, Parameters};
use stackrnn_core::numerics::Mat;
use stackrnn_core::tasks::Vocab;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &str = "stackrnn-ckpt v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint or unsupported version (expected `{MAGIC}`)")]
    VersionMismatch,
    #[error("truncated checkpoint: expected {0}")]
    Truncated(String),
    #[error("malformed {what} on line {line}")]
    Malformed { what: String, line: usize },
    #[error("shape mismatch for matrix {name}: expected {expect_rows}x{expect_cols}, found {found}")]
    ShapeMismatch {
        name: String,
        expect_rows: usize,
        expect_cols: usize,
        found: String,
    },
    #[error("non-finite value in matrix {0}")]
    NonFinite(String),
}

#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Parameters,
}

fn matrix_names(config: &ModelConfig) -> Vec<String> {
    let mut names = vec!["embed".to_string(), "recur".to_string(), "out".to_string()];
    for j in 0..config.units {
        names.push(format!("act{j}"));
        names.push(format!("write{j}"));
    }
    names.push("memin".to_string());
    names
}

pub fn render(config: &ModelConfig, vocab: &Vocab, params: &Parameters) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "kind={} m={} d={} S={} k={} noop={} useR={}",
        config.kind.name(),
        config.hidden,
        config.vocab,
        config.units,
        config.read_depth,
        config.use_noop as u8,
        config.use_recurrence as u8,
    );
    let _ = writeln!(out, "vocab={}", vocab.labels().join(" "));
    let names = matrix_names(config);
    let mut idx = 0;
    params.for_each_mat(|m| {
        let _ = writeln!(out, "matrix {} {} {}", names[idx], m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        idx += 1;
    });
    out
}

pub fn save(path: &Path, config: &ModelConfig, vocab: &Vocab, params: &Parameters) -> Result<(), CheckpointError> {
    std::fs::write(path, render(config, vocab, params))?;
    Ok(())
}

pub fn parse(text: &str) -> Result<Checkpoint, CheckpointError> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines
        .next()
        .ok_or_else(|| CheckpointError::Truncated("header".into()))?;
    if magic.trim_end() != MAGIC {
        return Err(CheckpointError::VersionMismatch);
    }

    let (lno, header) = lines
        .next()
        .ok_or_else(|| CheckpointError::Truncated("config line".into()))?;
    let mut fields = std::collections::HashMap::new();
    for part in header.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| CheckpointError::Malformed {
            what: "config field".into(),
            line: lno + 1,
        })?;
        fields.insert(k, v);
    }
    let get = |key: &str| -> Result<&str, CheckpointError> {
        fields.get(key).copied().ok_or_else(|| CheckpointError::Malformed {
            what: format!("missing config field `{key}`"),
            line: lno + 1,
        })
    };
    let parse_usize = |key: &str| -> Result<usize, CheckpointError> {
        get(key)?.parse().map_err(|_| CheckpointError::Malformed {
            what: format!("config field `{key}`"),
            line: lno + 1,
        })
    };
    let kind = ModelKind::parse(get("kind")?).map_err(|_| CheckpointError::Malformed {
        what: "model kind".into(),
        line: lno + 1,
    })?;
    let mut config = ModelConfig::new(kind, parse_usize("m")?, parse_usize("d")?, parse_usize("S")?);
    config.read_depth = parse_usize("k")?;
    config.use_noop = get("noop")? == "1";
    config.use_recurrence = get("useR")? == "1";

    let (vno, vocab_line) = lines
        .next()
        .ok_or_else(|| CheckpointError::Truncated("vocabulary line".into()))?;
    let vocab_str = vocab_line
        .strip_prefix("vocab=")
        .ok_or_else(|| CheckpointError::Malformed {
            what: "vocabulary line".into(),
            line: vno + 1,
        })?;
    let vocab = Vocab::new(vocab_str.split_whitespace().map(|s| s.to_string()).collect());
    if vocab.len() != config.vocab {
        return Err(CheckpointError::Malformed {
            what: format!(
                "vocabulary has {} tokens but the header says d={}",
                vocab.len(),
                config.vocab
            ),
            line: vno + 1,
        });
    }

    let mut params = Parameters::zeros(&config);
    let names = matrix_names(&config);
    let mut expected: Vec<(usize, usize)> = Vec::with_capacity(names.len());
    params.for_each_mat(|m| expected.push((m.rows(), m.cols())));
    let mut mats: Vec<Mat> = Vec::with_capacity(names.len());
    for name in &names {
        let (hno, header) = lines
            .next()
            .ok_or_else(|| CheckpointError::Truncated(format!("matrix {name}")))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "matrix" {
            return Err(CheckpointError::Malformed {
                what: format!("matrix header for {name}"),
                line: hno + 1,
            });
        }
        if parts[1] != name {
            return Err(CheckpointError::Malformed {
                what: format!("expected matrix {name}, found {}", parts[1]),
                line: hno + 1,
            });
        }
        let rows: usize = parts[2].parse().map_err(|_| CheckpointError::Malformed {
            what: format!("row count of {name}"),
            line: hno + 1,
        })?;
        let cols: usize = parts[3].parse().map_err(|_| CheckpointError::Malformed {
            what: format!("column count of {name}"),
            line: hno + 1,
        })?;
        let expect = expected[mats.len()];
        if (rows, cols) != expect {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expect_rows: expect.0,
                expect_cols: expect.1,
                found: format!("{rows}x{cols}"),
            });
        }
        let mut mat = Mat::zeros(rows, cols);
        for r in 0..rows {
            let (rno, line) = lines
                .next()
                .ok_or_else(|| CheckpointError::Truncated(format!("row {r} of matrix {name}")))?;
            let mut count = 0;
            for (c, cell) in line.split_whitespace().enumerate() {
                if c >= cols {
                    return Err(CheckpointError::ShapeMismatch {
                        name: name.clone(),
                        expect_rows: rows,
                        expect_cols: cols,
                        found: format!("row {r} has more than {cols} values"),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| CheckpointError::Malformed {
                    what: format!("value in matrix {name}"),
                    line: rno + 1,
                })?;
                if !v.is_finite() {
                    return Err(CheckpointError::NonFinite(name.clone()));
                }
                mat.set(r, c, v);
                count += 1;
            }
            if count != cols {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.clone(),
                    expect_rows: rows,
                    expect_cols: cols,
                    found: format!("row {r} has {count} values"),
                });
            }
        }
        mats.push(mat);
    }
    let mut it = mats.into_iter();
    params.for_each_mat_mut(|m| *m = it.next().expect("matrix count checked"));
    Ok(Checkpoint {
        config,
        vocab,
        params,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    parse(&std::fs::read_to_string(path)?)
}
