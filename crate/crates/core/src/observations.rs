//! Observation files and the per-experiment data they describe.
//!
//! Files are CSV with a header `game,role,choice,count`:
//!
//! | game                  | role      | choice                 | count |
//! |-----------------------|-----------|------------------------|-------|
//! | `market:block1:c3`    | `player`  | `enter` or `stay`      | 7     |
//! | `beauty:lab`          | `player`  | guess in `[0, 100]`    | 2     |
//! | `centipede:4`         | `outcome` | `take1`..`take4`, `pass` | 12  |
//! | `ultimatum:10-10`     | `p1`      | request in `[0, 100]`  | 1     |
//! | `twostage:D0.9`       | `p1`      | request in `[0, 100]`  | 3     |
//!
//! Each record stands for `count` raw observations ("units"). Market units
//! belong to the cell of their capacity; the other games have one cell.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{evaluate, fit_kde, BandwidthRule, DensityError};
use crate::experiment::{GameClass, GameKey};
use crate::games::{centipede_outcome_labels, MarketSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("cannot read observations: {0}")]
    Io(String),
    #[error("record {record}: {message}")]
    Schema { record: usize, message: String },
    #[error("{experiment}: no observations")]
    Empty { experiment: String },
    #[error("{experiment}: {message}")]
    Insufficient { experiment: String, message: String },
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub game: String,
    pub role: String,
    pub choice: String,
    pub count: i64,
}

/// A raw observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unit {
    pub cell: usize,
    /// Market: 1 for enter, 0 for stay. Centipede: outcome index.
    /// Beauty and bargaining: the chosen number.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub key: GameKey,
    /// Market capacities, one per cell (empty for other games).
    pub capacities: Vec<usize>,
    pub units: Vec<Unit>,
}

impl ExperimentData {
    pub fn n_cells(&self) -> usize {
        self.capacities.len().max(1)
    }

    /// Whether targets are density-smoothed.
    pub fn is_smoothed(&self) -> bool {
        matches!(self.key.class(), GameClass::Beauty | GameClass::Bargaining)
    }

    /// Target distribution built from the units at `idx`.
    pub fn target(&self, idx: &[usize], rule: BandwidthRule) -> Result<Vec<f64>, DataError> {
        let insufficient = |message: String| DataError::Insufficient {
            experiment: self.key.to_string(),
            message,
        };
        match self.key {
            GameKey::Market { .. } => {
                let mut enter = vec![0.0; self.n_cells()];
                let mut total = vec![0.0; self.n_cells()];
                for &i in idx {
                    let u = self.units[i];
                    enter[u.cell] += u.value;
                    total[u.cell] += 1.0;
                }
                enter
                    .iter()
                    .zip(&total)
                    .enumerate()
                    .map(|(c, (e, t))| {
                        if *t > 0.0 {
                            Ok(e / t)
                        } else {
                            Err(insufficient(format!("capacity {} has no observations", self.capacities[c])))
                        }
                    })
                    .collect()
            }
            GameKey::Centipede { moves } => {
                if idx.is_empty() {
                    return Err(insufficient("no observations".into()));
                }
                let mut freq = vec![0.0; moves + 1];
                for &i in idx {
                    freq[self.units[i].value as usize] += 1.0;
                }
                let n = idx.len() as f64;
                Ok(freq.into_iter().map(|f| f / n).collect())
            }
            _ => {
                let samples: Vec<f64> = idx.iter().map(|&i| self.units[i].value).collect();
                Ok(evaluate(&fit_kde(&samples, rule)?))
            }
        }
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.units.len()).collect()
    }
}

/// Observations grouped by experiment, in report order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    pub experiments: Vec<ExperimentData>,
}

impl ObservationSet {
    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<ObservationRecord>().enumerate() {
            let rec = row.map_err(|e| DataError::Schema {
                record: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::from_records(&records)
    }

    /// Validates records (numbered from 1) and groups them.
    pub fn from_records(records: &[ObservationRecord]) -> Result<Self, DataError> {
        // experiment key -> (key, market cells: capacity -> units, other units)
        let mut groups: BTreeMap<String, (GameKey, BTreeMap<usize, Vec<f64>>, Vec<f64>)> = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            let record = i + 1;
            let bad = |message: String| DataError::Schema { record, message };
            if rec.count < 0 {
                return Err(bad(format!("negative count {}", rec.count)));
            }
            let key: GameKey = rec.game.parse().map_err(|e| bad(format!("{e}")))?;
            let expected_role = match key.class() {
                GameClass::Market | GameClass::Beauty => "player",
                GameClass::Centipede => "outcome",
                GameClass::Bargaining => "p1",
            };
            if rec.role != expected_role {
                return Err(bad(format!("role '{}' invalid for {}, expected '{expected_role}'", rec.role, rec.game)));
            }
            let entry = groups
                .entry(key.experiment_key().to_string())
                .or_insert_with(|| (key.experiment_key(), BTreeMap::new(), Vec::new()));
            let n = rec.count as usize;
            match key {
                GameKey::Market { capacity, .. } => {
                    let c = capacity.ok_or_else(|| bad("market records need a capacity, e.g. market:block1:c3".into()))?;
                    let v = match rec.choice.as_str() {
                        "enter" => 1.0,
                        "stay" => 0.0,
                        other => return Err(bad(format!("market choice must be enter or stay, got '{other}'"))),
                    };
                    entry.1.entry(c).or_default().extend(std::iter::repeat(v).take(n));
                }
                GameKey::Centipede { moves } => {
                    let labels = centipede_outcome_labels(moves);
                    let v = labels
                        .iter()
                        .position(|l| *l == rec.choice)
                        .ok_or_else(|| bad(format!("centipede outcome must be one of {labels:?}, got '{}'", rec.choice)))?;
                    entry.2.extend(std::iter::repeat(v as f64).take(n));
                }
                _ => {
                    let v: f64 = rec
                        .choice
                        .parse()
                        .ok()
                        .filter(|v: &f64| (0.0..=100.0).contains(v))
                        .ok_or_else(|| bad(format!("choice must be a number in [0, 100], got '{}'", rec.choice)))?;
                    entry.2.extend(std::iter::repeat(v).take(n));
                }
            }
        }
        let mut experiments: Vec<ExperimentData> = groups
            .into_values()
            .map(|(key, mut cells, mut other)| {
                // canonical unit order, independent of record order
                other.sort_by(f64::total_cmp);
                cells.values_mut().for_each(|v| v.sort_by(f64::total_cmp));
                if matches!(key, GameKey::Market { .. }) {
                    let valid = MarketSpec::default().capacities;
                    let capacities: Vec<usize> = cells.keys().copied().filter(|c| valid.contains(c)).collect();
                    let units = cells
                        .values()
                        .enumerate()
                        .flat_map(|(cell, vs)| vs.iter().map(move |&value| Unit { cell, value }))
                        .collect();
                    ExperimentData { key, capacities, units }
                } else {
                    ExperimentData {
                        key,
                        capacities: Vec::new(),
                        units: other.into_iter().map(|value| Unit { cell: 0, value }).collect(),
                    }
                }
            })
            .collect();
        for e in &experiments {
            if e.units.is_empty() {
                return Err(DataError::Empty {
                    experiment: e.key.to_string(),
                });
            }
        }
        experiments.sort_by(|a, b| a.key.report_order(&b.key));
        Ok(ObservationSet { experiments })
    }

    /// Inverse of [`ObservationSet::from_records`], aggregating equal choices.
    pub fn to_records(&self) -> Vec<ObservationRecord> {
        let mut out = Vec::new();
        for e in &self.experiments {
            match e.key {
                GameKey::Market { block, .. } => {
                    for (cell, &c) in e.capacities.iter().enumerate() {
                        let game = GameKey::Market { block, capacity: Some(c) }.to_string();
                        let enter = e.units.iter().filter(|u| u.cell == cell && u.value == 1.0).count();
                        let stay = e.units.iter().filter(|u| u.cell == cell && u.value == 0.0).count();
                        for (choice, n) in [("enter", enter), ("stay", stay)] {
                            out.push(ObservationRecord {
                                game: game.clone(),
                                role: "player".into(),
                                choice: choice.into(),
                                count: n as i64,
                            });
                        }
                    }
                }
                GameKey::Centipede { moves } => {
                    for (i, label) in centipede_outcome_labels(moves).into_iter().enumerate() {
                        let n = e.units.iter().filter(|u| u.value as usize == i).count();
                        out.push(ObservationRecord {
                            game: e.key.to_string(),
                            role: "outcome".into(),
                            choice: label,
                            count: n as i64,
                        });
                    }
                }
                _ => {
                    let role = if e.key.class() == GameClass::Beauty { "player" } else { "p1" };
                    let mut values: Vec<f64> = e.units.iter().map(|u| u.value).collect();
                    values.sort_by(f64::total_cmp);
                    let mut i = 0;
                    while i < values.len() {
                        let j = values[i..].iter().take_while(|&&v| v == values[i]).count();
                        out.push(ObservationRecord {
                            game: e.key.to_string(),
                            role: role.into(),
                            choice: values[i].to_string(),
                            count: j as i64,
                        });
                        i += j;
                    }
                }
            }
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in self.to_records() {
            wtr.serialize(r).map_err(|e| DataError::Io(e.to_string()))?;
        }
        wtr.flush().map_err(|e| DataError::Io(e.to_string()))
    }
}
