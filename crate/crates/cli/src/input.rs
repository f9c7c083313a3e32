//! Reading inputs and parsing option values.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use modelmap::bootstrap::default_n_grid;
use modelmap::io::{digest_matrix, parse_f64, read_binary_values, read_labelled, split_line, BINARY_MAGIC};
use modelmap::mapalign::Embedding2D;
use modelmap::matrix::{apply_threshold, clip_lower_percentile, double_center};
use modelmap::{CenteredMatrix, Error, LikelihoodMatrix};
use ndarray::Array2;

use crate::{Failure, InputArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Auto,
    Delimited,
    Binary,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Format::Auto),
            "delimited" | "csv" => Ok(Format::Delimited),
            "binary" | "bin" => Ok(Format::Binary),
            _ => Err(format!("unknown format {s:?} (auto, delimited, binary)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Benchmark,
    LogLikelihood,
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "benchmark" => Ok(Target::Benchmark),
            "log-likelihood" | "loglik" => Ok(Target::LogLikelihood),
            _ => Err(format!("unknown target {s:?} (benchmark, log-likelihood)")),
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::Benchmark => "benchmark",
            Target::LogLikelihood => "log-likelihood",
        })
    }
}

/// Strictly ascending grid of resample sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGrid(pub Vec<usize>);

impl FromStr for NGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("invalid n grid {s:?}");
        let grid: Vec<usize> = if let Some((a, b)) = s.split_once(':') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
            default_n_grid().into_iter().filter(|n| (a..=b).contains(n)).collect()
        } else {
            let mut v = s
                .split(',')
                .map(|x| x.trim().parse::<usize>().map_err(bad))
                .collect::<Result<Vec<_>, _>>()?;
            v.sort_unstable();
            v.dedup();
            v
        };
        if grid.is_empty() || grid[0] == 0 {
            return Err(format!("n grid {s:?} is empty or contains 0"));
        }
        Ok(NGrid(grid))
    }
}

impl std::fmt::Display for NGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Row ids, column ids and values.
pub type Labelled = (Vec<String>, Vec<String>, Array2<f64>);

/// Format detected from the magic bytes when `Auto`.
pub fn read_raw(path: &Path, format: Format) -> Result<Labelled, Failure> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    let binary = match format {
        Format::Auto => bytes.starts_with(BINARY_MAGIC),
        Format::Binary => true,
        Format::Delimited => false,
    };
    if binary {
        let values = read_binary_values(&bytes[..])?;
        let rows = (0..values.nrows()).map(|i| format!("m{i}")).collect();
        let cols = (0..values.ncols()).map(|j| format!("t{j}")).collect();
        Ok((rows, cols, values))
    } else {
        Ok(read_labelled(&bytes[..])?)
    }
}

pub struct Prepared {
    /// Clipped log-likelihoods; absent for pre-centered input.
    pub clipped: Option<LikelihoodMatrix>,
    pub q: CenteredMatrix,
    pub threshold: Option<f64>,
    pub digest: String,
}

pub fn prepare(args: &InputArgs) -> Result<Prepared, Failure> {
    let (rows, cols, values) = read_raw(&args.input, args.format)?;
    let digest = digest_matrix(values.view(), &rows, &cols);
    if args.centered {
        let q = CenteredMatrix::new(values, rows, cols)?;
        return Ok(Prepared {
            clipped: None,
            q,
            threshold: None,
            digest,
        });
    }
    let l = LikelihoodMatrix::new(values, rows, cols)?;
    let l = match (args.clip_pct, args.threshold) {
        (Some(pct), _) => clip_lower_percentile(&l, pct)?,
        (None, Some(t)) => apply_threshold(&l, t)?,
        (None, None) => l,
    };
    let q = double_center(&l);
    Ok(Prepared {
        threshold: l.clip_threshold(),
        clipped: Some(l),
        q,
        digest,
    })
}

/// Trials from a `trial_id,model_id,x,y` table, in order of first appearance.
/// Every trial must list the models of the first trial in the same order.
pub fn read_trials(path: &Path) -> Result<(Vec<Embedding2D>, String), Failure> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    let digest = modelmap::io::digest_bytes(&bytes);
    let mut trials: Vec<(String, Vec<String>, Vec<f64>)> = Vec::new();
    let mut seen_header = false;
    for (lineno, line) in BufReader::new(&bytes[..]).lines().enumerate() {
        let line = line?;
        let row = lineno + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        let cells = split_line(&line);
        if cells.len() != 4 {
            return Err(Error::Parse {
                row,
                col: cells.len(),
                msg: "expected trial_id,model_id,x,y".into(),
            }
            .into());
        }
        let (x, y) = (parse_f64(cells[2], row, 3)?, parse_f64(cells[3], row, 4)?);
        match trials.iter_mut().find(|t| t.0 == cells[0]) {
            Some(t) => {
                t.1.push(cells[1].to_string());
                t.2.extend([x, y]);
            }
            None => trials.push((cells[0].to_string(), vec![cells[1].to_string()], vec![x, y])),
        }
    }
    let embeddings = trials
        .into_iter()
        .map(|(id, models, xy)| {
            let coords = Array2::from_shape_vec((models.len(), 2), xy).expect("two values per row");
            Embedding2D::new(coords, models, id)
        })
        .collect::<modelmap::Result<Vec<_>>>()?;
    Ok((embeddings, digest))
}

pub fn read_scores(path: &Path) -> Result<(modelmap::predict::ScoreTable, String), Failure> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes)?;
    let digest = modelmap::io::digest_bytes(&bytes);
    Ok((modelmap::predict::ScoreTable::read(&bytes[..])?, digest))
}
