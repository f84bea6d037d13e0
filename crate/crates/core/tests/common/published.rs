//! Published cross-validation errors with their printed ranks.

use quantal_hierarchy::eval::{ErrorRow, RankTable};

const TABLE: &str = include_str!("../fixtures/published_rmse.csv");

pub struct Published {
    pub models: Vec<String>,
    pub rows: Vec<ErrorRow>,
    /// Printed rank of every model, per row.
    pub ranks: Vec<Vec<f64>>,
    pub class_averages: Vec<(String, Vec<f64>)>,
    pub overall: Vec<f64>,
}

pub fn load() -> Published {
    let mut reader = csv::Reader::from_reader(TABLE.as_bytes());
    let mut p = Published {
        models: Vec::new(),
        rows: Vec::new(),
        ranks: Vec::new(),
        class_averages: Vec::new(),
        overall: Vec::new(),
    };
    for rec in reader.records() {
        let rec = rec.unwrap();
        let (class, exp, model) = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        let rank: f64 = rec[5].parse().unwrap();
        if !p.models.contains(&model) {
            p.models.push(model);
        }
        match exp.as_str() {
            "overall" => p.overall.push(rank),
            "average" => match p.class_averages.last_mut() {
                Some((c, v)) if *c == class => v.push(rank),
                _ => p.class_averages.push((class, vec![rank])),
            },
            _ => {
                let err: f64 = rec[3].parse().unwrap();
                match p.rows.last_mut() {
                    Some((_, e, v)) if *e == exp => {
                        v.push(err);
                        p.ranks.last_mut().unwrap().push(rank);
                    }
                    _ => {
                        p.rows.push((class, exp, vec![err]));
                        p.ranks.push(vec![rank]);
                    }
                }
            }
        }
    }
    p
}

/// Every printed rank that `table` does not reproduce.
pub fn mismatches(table: &RankTable, p: &Published) -> Vec<String> {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let mut out = Vec::new();
    for (row, want) in table.rows.iter().zip(&p.ranks) {
        for (m, (g, w)) in row.ranks.iter().zip(want).enumerate() {
            if !close(*g, *w) {
                out.push(format!("{} {}: {g} vs printed {w}", row.experiment, p.models[m]));
            }
        }
    }
    for ((class, got), (_, want)) in table.class_averages.iter().zip(&p.class_averages) {
        for (m, (g, w)) in got.iter().zip(want).enumerate() {
            if !close(*g, *w) {
                out.push(format!("{class} average {}: {g} vs printed {w}", p.models[m]));
            }
        }
    }
    for (m, (g, w)) in table.overall.iter().zip(&p.overall).enumerate() {
        if !close(*g, *w) {
            out.push(format!("overall {}: {g} vs printed {w}", p.models[m]));
        }
    }
    out
}
