//! Matrix CSV and state-file I/O.
//!
//! Matrices are plain CSV, one row per line, no header, written with 17
//! significant digits so every `f64` survives a round trip exactly.

use std::fs;
use std::path::{Path, PathBuf};

use covpath::SymMatrix;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, InputError};

/// Relative asymmetry tolerated (and averaged away) in covariance input.
pub const ASYMMETRY_TOL: f64 = 1e-6;

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => InputError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => InputError::Invalid {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| InputError::Parse {
            path: path.to_path_buf(),
            row: r + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| InputError::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: c + 1,
                    message: format!("`{field}` is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(InputError::Ragged {
                    path: path.to_path_buf(),
                    row: r + 1,
                    got: row.len(),
                    expected: first,
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(InputError::Invalid {
            path: path.to_path_buf(),
            message: "file contains no data".into(),
        });
    }
    Ok(rows)
}

fn to_dense(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Reads a square CSV matrix, symmetrizes it, and checks its diagonal.
pub fn load_covariance(path: &Path) -> Result<SymMatrix, InputError> {
    let rows = read_rows(path)?;
    let m = to_dense(&rows);
    if m.nrows() != m.ncols() {
        return Err(InputError::NotSquare {
            path: path.to_path_buf(),
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let max_asymmetry = (&m - m.transpose()).amax();
    let tolerance = ASYMMETRY_TOL * m.amax();
    if max_asymmetry > tolerance {
        return Err(InputError::AsymmetricInput {
            path: path.to_path_buf(),
            max_asymmetry,
            tolerance,
        });
    }
    let sym = SymMatrix::symmetrize(&m);
    check_diagonal(path, &sym)?;
    Ok(sym)
}

fn check_diagonal(path: &Path, m: &SymMatrix) -> Result<(), InputError> {
    for (index, &value) in m.diagonal().iter().enumerate() {
        if !(value > 0.0) {
            return Err(InputError::NonPositiveDiagonal {
                path: path.to_path_buf(),
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Reads an `m × n` data matrix (one observation per row) and returns the
/// centered sample covariance `(1/m) Σ (xᵢ - x̄)(xᵢ - x̄)ᵀ`.
pub fn load_samples(path: &Path) -> Result<SymMatrix, InputError> {
    let rows = read_rows(path)?;
    if rows.len() < 2 {
        return Err(InputError::Invalid {
            path: path.to_path_buf(),
            message: "need at least two samples".into(),
        });
    }
    let cov = sample_covariance(&to_dense(&rows));
    check_diagonal(path, &cov)?;
    Ok(cov)
}

pub fn sample_covariance(data: &DMatrix<f64>) -> SymMatrix {
    let m = data.nrows() as f64;
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    SymMatrix::symmetrize(&((centered.transpose() * &centered) / m))
}

/// Reads a square symmetric perturbation matrix (diagonal unconstrained).
pub fn load_perturbation(path: &Path) -> Result<SymMatrix, InputError> {
    let rows = read_rows(path)?;
    let m = to_dense(&rows);
    if m.nrows() != m.ncols() {
        return Err(InputError::NotSquare {
            path: path.to_path_buf(),
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let max_asymmetry = (&m - m.transpose()).amax();
    let tolerance = ASYMMETRY_TOL * m.amax();
    if max_asymmetry > tolerance {
        return Err(InputError::AsymmetricInput {
            path: path.to_path_buf(),
            max_asymmetry,
            tolerance,
        });
    }
    Ok(SymMatrix::symmetrize(&m))
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_csv(m: &SymMatrix) -> String {
    let mut out = String::new();
    for row in m.to_rows() {
        let line: Vec<String> = row.into_iter().map(format_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<(), CliError> {
    write_file(path, &matrix_csv(m))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub const STATE_SCHEMA: &str = "covpath/state/1";

/// Solver state carried from a path run to an online re-solve.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct State {
    pub schema: String,
    pub rho: f64,
    pub t: f64,
    pub sigma: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl State {
    pub fn new(sigma: &SymMatrix, u: &SymMatrix, rho: f64, t: f64) -> Self {
        Self {
            schema: STATE_SCHEMA.into(),
            rho,
            t,
            sigma: sigma.to_rows(),
            u: u.to_rows(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = fs::read_to_string(path).map_err(|source| InputError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let state: State = serde_json::from_str(&text).map_err(|e| InputError::Parse {
            path: path.to_path_buf(),
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if state.schema != STATE_SCHEMA {
            return Err(InputError::Invalid {
                path: path.to_path_buf(),
                message: format!("unsupported state schema `{}`", state.schema),
            });
        }
        Ok(state)
    }

    pub fn matrices(&self, path: &Path) -> Result<(SymMatrix, SymMatrix), InputError> {
        let invalid = |e: covpath::Error| InputError::Invalid {
            path: PathBuf::from(path),
            message: e.to_string(),
        };
        let sigma = SymMatrix::from_rows(&self.sigma).map_err(invalid)?;
        let u = SymMatrix::from_rows(&self.u).map_err(invalid)?;
        if sigma.dim() != u.dim() {
            return Err(InputError::Invalid {
                path: path.to_path_buf(),
                message: format!("sigma is {0}x{0} but u is {1}x{1}", sigma.dim(), u.dim()),
            });
        }
        Ok((sigma, u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_small_covariance() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "s.csv", "1,0.5\n0.5,2\n");
        let m = load_covariance(&p).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 0.5], vec![0.5, 2.0]]);
    }

    #[test]
    fn tiny_asymmetry_is_averaged() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "s.csv", "1,0.5\n0.5000001,2\n");
        let m = load_covariance(&p).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!((m.get(0, 1) - 0.50000005).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = TempDir::new().unwrap();
        let cases = [
            ("1,0.5\n0.6,2\n", "asym"),
            ("1,0\n0,0\n", "diag"),
            ("1,0,0\n0,1,0\n", "square"),
            ("1,x\n0,1\n", "parse"),
            ("1,0\n0\n", "ragged"),
            ("", "empty"),
        ];
        for (body, tag) in cases {
            let p = write(&dir, &format!("{tag}.csv"), body);
            let err = load_covariance(&p).unwrap_err();
            let ok = match tag {
                "asym" => matches!(err, InputError::AsymmetricInput { .. }),
                "diag" => matches!(err, InputError::NonPositiveDiagonal { .. }),
                "square" => matches!(err, InputError::NotSquare { .. }),
                "parse" => matches!(err, InputError::Parse { row: 1, column: 2, .. }),
                "ragged" => matches!(err, InputError::Ragged { .. }),
                _ => matches!(err, InputError::Invalid { .. }),
            };
            assert!(ok, "{tag}: {err}");
        }
        assert!(matches!(
            load_covariance(&dir.path().join("missing.csv")),
            Err(InputError::Io { .. })
        ));
    }

    #[test]
    fn sample_covariance_matches_two_pass() {
        let data = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, 3.0, -1.0, 0.0, 2.0, 0.0, 1.5, -1.0, 4.0, 2.0]);
        let cov = sample_covariance(&data);
        for a in 0..3 {
            for b in 0..3 {
                let ma = (0..4).map(|r| data[(r, a)]).sum::<f64>() / 4.0;
                let mb = (0..4).map(|r| data[(r, b)]).sum::<f64>() / 4.0;
                let want = (0..4).map(|r| (data[(r, a)] - ma) * (data[(r, b)] - mb)).sum::<f64>() / 4.0;
                assert!((cov.get(a, b) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn samples_file() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "x.csv", "1,2\n3,2\n");
        assert!(matches!(load_samples(&p), Err(InputError::NonPositiveDiagonal { index: 1, .. })));
        let p = write(&dir, "y.csv", "1,2\n3,5\n");
        let c = load_samples(&p).unwrap();
        assert_eq!(c.to_rows(), vec![vec![1.0, 1.5], vec![1.5, 2.25]]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = TempDir::new().unwrap();
        let m = SymMatrix::from_fn(5, |i, j| (1.0 + i as f64).sqrt() / (3.0 + j as f64) + if i == j { 1.0 } else { 1e-300 });
        let p = dir.path().join("m.csv");
        write_matrix(&p, &m).unwrap();
        assert_eq!(load_covariance(&p).unwrap(), m);
    }

    #[test]
    fn state_round_trip() {
        let dir = TempDir::new().unwrap();
        let sigma = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let u = SymMatrix::from_rows(&[vec![1.5, 0.1], vec![0.1, 2.5]]).unwrap();
        let state = State::new(&sigma, &u, 0.7, 1e-5);
        let p = dir.path().join("state.json");
        write_file(&p, &serde_json::to_string(&state).unwrap()).unwrap();
        let back = State::load(&p).unwrap();
        assert_eq!(back, state);
        let (s2, u2) = back.matrices(&p).unwrap();
        assert_eq!((s2, u2), (sigma, u));
    }
}
