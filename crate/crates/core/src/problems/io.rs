//! Instance bundles and solution documents on disk.
//!
//! An instance bundle is a Matrix Market file (`.mtx`, symmetric, coordinate
//! or array format) holding Q, plus a plain-text sidecar (`.rhs`) with the
//! radius on the first line and the linear-term entries following. Floats
//! are written in shortest round-trip form, so read(write(x)) reproduces the
//! numeric payload bitwise.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dual::{ProblemError, ProblemInstance};
use crate::matrix::{MatrixError, SymMatrix};
use crate::solver::Solution;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
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
    #[error("{path}: matrix is not symmetric (header says '{found}')")]
    NotSymmetric { path: PathBuf, found: String },
    #[error("{path}: instance validation failed: {source}")]
    Validation {
        path: PathBuf,
        #[source]
        source: ProblemError,
    },
    #[error("{path}: matrix data invalid: {source}")]
    Matrix {
        path: PathBuf,
        #[source]
        source: MatrixError,
    },
}

/// Output encoding of a solution document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionFormat {
    Text,
    Json,
}

/// Sidecar path next to a Matrix Market file.
pub fn sidecar_path(mtx: &Path) -> PathBuf {
    mtx.with_extension("rhs")
}

/// Read an instance bundle given the path of its `.mtx` file.
pub fn read_instance(path: &Path) -> Result<ProblemInstance, IoError> {
    let q = read_matrix_market(path)?;
    let rhs_path = sidecar_path(path);
    let (r, f) = read_sidecar(&rhs_path, q.n())?;
    ProblemInstance::new(q, f, r).map_err(|source| IoError::Validation {
        path: path.to_path_buf(),
        source,
    })
}

/// Write an instance bundle (`path` gets Q, the sidecar gets r and f).
pub fn write_instance(prob: &ProblemInstance, path: &Path) -> Result<(), IoError> {
    write_matrix_market(prob.q(), path)?;
    let mut out = String::new();
    let _ = writeln!(out, "{}", prob.r());
    for (i, v) in prob.f().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
    fs::write(sidecar_path(path), out).map_err(|source| IoError::File {
        path: sidecar_path(path),
        source,
    })
}

/// Render a solution document.
pub fn render_solution(sol: &Solution, format: SolutionFormat) -> String {
    match format {
        SolutionFormat::Json => {
            serde_json::to_string_pretty(sol).expect("solution serializes") + "\n"
        }
        SolutionFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "case {:?}", sol.case);
            let _ = writeln!(s, "sigma {}", sol.sigma);
            let _ = writeln!(s, "primal_value {}", sol.primal_value);
            let _ = writeln!(s, "dual_value {}", sol.dual_value);
            let _ = writeln!(s, "gap {}", sol.gap);
            let _ = writeln!(s, "psi_final {}", sol.psi_final);
            let _ = writeln!(s, "dist_boundary {}", sol.dist_boundary);
            let _ = writeln!(s, "iterations_bisect {}", sol.iterations_bisect);
            let _ = writeln!(s, "iterations_scan {}", sol.iterations_scan);
            let _ = writeln!(s, "kkt_stationarity {}", sol.kkt.stationarity);
            let _ = writeln!(s, "kkt_feasibility {}", sol.kkt.feasibility);
            let _ = writeln!(s, "kkt_dual_feas_sigma {}", sol.kkt.dual_feas_sigma);
            let _ = writeln!(s, "kkt_curvature_cert {}", sol.kkt.curvature_cert);
            let _ = writeln!(s, "kkt_complementarity {}", sol.kkt.complementarity);
            if let Some(p) = &sol.perturbation {
                let _ = writeln!(s, "perturbation_alpha {}", p.alpha);
            }
            let _ = write!(s, "x");
            for v in &sol.x {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
            s
        }
    }
}

/// Write a solution document to a file.
pub fn write_solution(sol: &Solution, path: &Path, format: SolutionFormat) -> Result<(), IoError> {
    fs::write(path, render_solution(sol, format)).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Read a symmetric Matrix Market file (coordinate or array, real/integer).
pub fn read_matrix_market(path: &Path) -> Result<SymMatrix, IoError> {
    let content = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = content.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 4 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix ...' header"));
    }
    let format = tokens[2].as_str();
    let field = tokens[3].as_str();
    let symmetry = tokens.get(4).map(String::as_str).unwrap_or("general");
    if !matches!(format, "coordinate" | "array") {
        return Err(parse_err(path, 1, format!("unsupported format '{format}'")));
    }
    if !matches!(field, "real" | "integer") {
        return Err(parse_err(path, 1, format!("unsupported field '{field}'")));
    }
    if symmetry != "symmetric" {
        return Err(IoError::NotSymmetric {
            path: path.to_path_buf(),
            found: symmetry.to_string(),
        });
    }

    // Skip comments, find the size line.
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        size_line = Some((idx + 1, line));
        break;
    }
    let (size_no, size_line) = size_line.ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();

    match format {
        "coordinate" => {
            if dims.len() != 3 {
                return Err(parse_err(path, size_no, "size line must be 'rows cols nnz'"));
            }
            let rows: usize = dims[0]
                .parse()
                .map_err(|_| parse_err(path, size_no, "bad row count"))?;
            let cols: usize = dims[1]
                .parse()
                .map_err(|_| parse_err(path, size_no, "bad column count"))?;
            let nnz: usize = dims[2]
                .parse()
                .map_err(|_| parse_err(path, size_no, "bad entry count"))?;
            if rows != cols {
                return Err(parse_err(path, size_no, "matrix must be square"));
            }
            let mut entries = Vec::with_capacity(nnz);
            let mut seen = 0usize;
            for (idx, line) in lines {
                let line_no = idx + 1;
                if line.starts_with('%') || line.trim().is_empty() {
                    continue;
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, line_no, "expected 'i j value'"));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad row index"))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad column index"))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, line_no, "bad value"))?;
                if i == 0 || j == 0 || i > rows || j > rows {
                    return Err(parse_err(path, line_no, "index out of bounds (1-based)"));
                }
                if j > i {
                    return Err(parse_err(
                        path,
                        line_no,
                        "symmetric coordinate entries must satisfy row >= column",
                    ));
                }
                entries.push((i - 1, j - 1, v));
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    size_no,
                    format!("declared {nnz} entries, found {seen}"),
                ));
            }
            SymMatrix::from_triplets(rows, &entries).map_err(|source| IoError::Matrix {
                path: path.to_path_buf(),
                source,
            })
        }
        _ => {
            if dims.len() != 2 {
                return Err(parse_err(path, size_no, "size line must be 'rows cols'"));
            }
            let rows: usize = dims[0]
                .parse()
                .map_err(|_| parse_err(path, size_no, "bad row count"))?;
            let cols: usize = dims[1]
                .parse()
                .map_err(|_| parse_err(path, size_no, "bad column count"))?;
            if rows != cols {
                return Err(parse_err(path, size_no, "matrix must be square"));
            }
            // Array symmetric: lower triangle in column-major order.
            let need = rows * (rows + 1) / 2;
            let mut values = Vec::with_capacity(need);
            for (idx, line) in lines {
                let line_no = idx + 1;
                if line.starts_with('%') || line.trim().is_empty() {
                    continue;
                }
                for tok in line.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(path, line_no, "bad value"))?;
                    values.push(v);
                }
            }
            if values.len() != need {
                return Err(parse_err(
                    path,
                    size_no,
                    format!("expected {need} lower-triangle values, found {}", values.len()),
                ));
            }
            let mut entries = Vec::with_capacity(need);
            let mut it = values.into_iter();
            for j in 0..rows {
                for i in j..rows {
                    entries.push((i, j, it.next().expect("length checked")));
                }
            }
            SymMatrix::from_triplets_dense(rows, &entries).map_err(|source| IoError::Matrix {
                path: path.to_path_buf(),
                source,
            })
        }
    }
}

/// Write a symmetric Matrix Market file: array format for dense storage,
/// coordinate format for sparse.
pub fn write_matrix_market(q: &SymMatrix, path: &Path) -> Result<(), IoError> {
    let n = q.n();
    let mut out = String::new();
    if q.is_dense() {
        let _ = writeln!(out, "%%MatrixMarket matrix array real symmetric");
        let _ = writeln!(out, "{n} {n}");
        for j in 0..n {
            for i in j..n {
                let _ = writeln!(out, "{}", q.get(i, j));
            }
        }
    } else {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        q.for_each_lower(|i, j, v| {
            if v != 0.0 {
                entries.push((i, j, v));
            }
        });
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate real symmetric");
        let _ = writeln!(out, "{n} {n} {}", entries.len());
        for (i, j, v) in entries {
            let _ = writeln!(out, "{} {} {v}", i + 1, j + 1);
        }
    }
    fs::write(path, out).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn read_sidecar(path: &Path, n: usize) -> Result<(f64, Vec<f64>), IoError> {
    let content = fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = content.lines().enumerate();
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty sidecar"))?;
    let r: f64 = first
        .trim()
        .parse()
        .map_err(|_| parse_err(path, first_no + 1, "first line must be the radius"))?;
    let mut f = Vec::with_capacity(n);
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad linear-term value '{tok}'")))?;
            f.push(v);
        }
    }
    if f.len() != n {
        return Err(parse_err(
            path,
            1,
            format!("expected {n} linear-term entries, found {}", f.len()),
        ));
    }
    Ok((r, f))
}
