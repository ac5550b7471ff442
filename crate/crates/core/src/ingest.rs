//! Reading benchmark artifacts: pre-tallied win counts, or per-dataset score
//! matrices that are turned into wins and ranks.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::baselines::RankMatrix;
use crate::error::{Error, Result};
use crate::rng::{domain, substream};
use crate::subset::WinCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "higher_better" | "higher" => Ok(Direction::HigherBetter),
            "lower_better" | "lower" => Ok(Direction::LowerBetter),
            other => Err(Error::input(format!(
                "unknown direction '{other}' (expected higher_better|lower_better)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// One uniformly chosen winner among the tied set.
    #[default]
    Random,
    /// Lowest column index wins.
    First,
    /// 1/|ties| credit each, rounded by largest remainder.
    AllFractionalRounded,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TiePolicy::Random),
            "first" => Ok(TiePolicy::First),
            "all_fractional_rounded" => Ok(TiePolicy::AllFractionalRounded),
            other => Err(Error::input(format!(
                "unknown tie policy '{other}' (expected random|first|all_fractional_rounded)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMatrix {
    pub datasets: Vec<String>,
    pub algorithms: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    pub direction: Direction,
    /// Rows discarded because a cell was empty.
    pub dropped_rows: usize,
}

impl ScoreMatrix {
    pub fn new(
        datasets: Vec<String>,
        algorithms: Vec<String>,
        scores: Vec<Vec<f64>>,
        direction: Direction,
    ) -> Result<Self> {
        if algorithms.len() < 2 {
            return Err(Error::input(
                "score matrix needs at least two algorithm columns",
            ));
        }
        if scores.is_empty() {
            return Err(Error::input("score matrix has no complete rows"));
        }
        if datasets.len() != scores.len() {
            return Err(Error::input("dataset ids and score rows differ in length"));
        }
        for (i, row) in scores.iter().enumerate() {
            if row.len() != algorithms.len() {
                return Err(Error::input(format!(
                    "row {i} has {} scores, expected {}",
                    row.len(),
                    algorithms.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("row {i} contains a non-finite score")));
            }
        }
        Ok(ScoreMatrix {
            datasets,
            algorithms,
            scores,
            direction,
            dropped_rows: 0,
        })
    }

    fn oriented(&self, x: f64) -> f64 {
        match self.direction {
            Direction::HigherBetter => x,
            Direction::LowerBetter => -x,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut text = String::new();
    std::fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?
        .read_to_string(&mut text)?;
    Ok(text
        .strip_prefix('\u{feff}')
        .map(str::to_string)
        .unwrap_or(text))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Parse an `algorithm,count` CSV, keeping file order.
pub fn parse_counts_str(text: &str) -> Result<WinCounts> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "algorithm" || &headers[1] != "count" {
        return Err(Error::input("counts CSV header must be 'algorithm,count'"));
    }
    let mut labels = Vec::new();
    let mut counts = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let label = record.get(0).unwrap_or("").to_string();
        let raw = record.get(1).unwrap_or("");
        if label.is_empty() {
            return Err(Error::input(format!(
                "row {} has an empty algorithm name",
                line + 1
            )));
        }
        if !seen.insert(label.clone()) {
            return Err(Error::input(format!("duplicate label '{label}'")));
        }
        let count = match raw.parse::<u64>() {
            Ok(c) => c,
            Err(_) => {
                return Err(match raw.parse::<f64>() {
                    Ok(x) if x < 0.0 => Error::input(format!("negative count {raw} for '{label}'")),
                    Ok(_) => Error::input(format!("non-integer count {raw} for '{label}'")),
                    Err(_) => Error::input(format!("count '{raw}' for '{label}' is not a number")),
                })
            }
        };
        labels.push(label);
        counts.push(count);
    }
    if labels.is_empty() {
        return Err(Error::input("counts CSV is empty"));
    }
    WinCounts::new(labels, counts)
}

pub fn parse_counts_csv(path: impl AsRef<Path>) -> Result<WinCounts> {
    parse_counts_str(&read_to_string(path.as_ref())?)
}

/// Parse a `dataset,<alg1>,<alg2>,...` CSV. Rows with an empty cell are dropped.
pub fn parse_scores_str(text: &str, direction: Direction) -> Result<ScoreMatrix> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("dataset") {
        return Err(Error::input(
            "scores CSV must start with a 'dataset' column",
        ));
    }
    let algorithms: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if algorithms.len() < 2 {
        return Err(Error::input(
            "scores CSV needs at least two algorithm columns",
        ));
    }
    let mut seen = HashSet::new();
    for a in &algorithms {
        if !seen.insert(a.as_str()) {
            return Err(Error::input(format!("duplicate algorithm column '{a}'")));
        }
    }
    let mut datasets = Vec::new();
    let mut scores = Vec::new();
    let mut dropped = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != algorithms.len() + 1 {
            return Err(Error::input(format!(
                "row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                algorithms.len() + 1
            )));
        }
        if record.iter().skip(1).any(str::is_empty) {
            dropped += 1;
            continue;
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::input(format!("row {}: score '{cell}' is not a number", line + 1))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        datasets.push(record[0].to_string());
        scores.push(row);
    }
    let mut m = ScoreMatrix::new(datasets, algorithms, scores, direction)?;
    m.dropped_rows = dropped;
    Ok(m)
}

pub fn parse_scores_csv(path: impl AsRef<Path>, direction: Direction) -> Result<ScoreMatrix> {
    parse_scores_str(&read_to_string(path.as_ref())?, direction)
}

#[derive(Debug, Clone, Serialize)]
pub struct TieAudit {
    pub policy: TiePolicy,
    pub seed: u64,
    pub tied_rows: usize,
}

/// Largest-remainder rounding of non-negative reals to integers summing to `total`.
fn largest_remainder(values: &[f64], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = values.iter().map(|v| v.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = values[i] - values[i].floor();
        let rj = values[j] - values[j].floor();
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

/// Win tallies from a score matrix.
pub fn wins_from_scores(
    scores: &ScoreMatrix,
    policy: TiePolicy,
    seed: u64,
) -> Result<(WinCounts, TieAudit)> {
    let a = scores.algorithms.len();
    let mut counts = vec![0u64; a];
    let mut fractional = vec![0.0f64; a];
    let mut tied_rows = 0;
    for (row_index, row) in scores.scores.iter().enumerate() {
        let best = row
            .iter()
            .map(|&x| scores.oriented(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..a)
            .filter(|&j| scores.oriented(row[j]) == best)
            .collect();
        if tied.len() > 1 {
            tied_rows += 1;
        }
        match policy {
            TiePolicy::First => counts[tied[0]] += 1,
            TiePolicy::Random => {
                let pick = if tied.len() == 1 {
                    tied[0]
                } else {
                    let mut rng = substream(seed, domain::TIE_BREAK, row_index as u64);
                    tied[rng.random_range(0..tied.len())]
                };
                counts[pick] += 1;
            }
            TiePolicy::AllFractionalRounded => {
                let share = 1.0 / tied.len() as f64;
                for &j in &tied {
                    fractional[j] += share;
                }
            }
        }
    }
    if policy == TiePolicy::AllFractionalRounded {
        counts = largest_remainder(&fractional, scores.scores.len() as u64);
    }
    let wins = WinCounts::new(scores.algorithms.clone(), counts)?;
    Ok((
        wins,
        TieAudit {
            policy,
            seed,
            tied_rows,
        },
    ))
}

/// Per-row ranks (1 = best) with midranks for ties.
pub fn ranks_from_scores(scores: &ScoreMatrix) -> Result<RankMatrix> {
    let ranks = scores
        .scores
        .iter()
        .map(|row| {
            let oriented: Vec<f64> = row.iter().map(|&x| scores.oriented(x)).collect();
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&i, &j| oriented[j].total_cmp(&oriented[i]));
            let mut out = vec![0.0; row.len()];
            let mut start = 0;
            while start < order.len() {
                let mut end = start + 1;
                while end < order.len() && oriented[order[end]] == oriented[order[start]] {
                    end += 1;
                }
                // Positions start..end share ranks start+1..=end.
                let midrank = (start + 1 + end) as f64 / 2.0;
                for &j in &order[start..end] {
                    out[j] = midrank;
                }
                start = end;
            }
            out
        })
        .collect();
    RankMatrix::new(scores.algorithms.clone(), ranks)
}
