//! Error metrics, tie-averaged ranking and report tables.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite error for model {model} in {experiment}")]
    NonFiniteError { experiment: String, model: String },
    #[error("rank table needs at least one model and one row")]
    Empty,
    #[error("row {experiment} has {got} errors for {expected} models")]
    RowWidth { experiment: String, expected: usize, got: usize },
}

/// Root mean squared elementwise difference.
pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64, EvalError> {
    Ok(mse(predicted, observed)?.sqrt())
}

pub fn mse(predicted: &[f64], observed: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != observed.len() {
        return Err(EvalError::LengthMismatch(predicted.len(), observed.len()));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok(s / predicted.len() as f64)
}

/// Ranks (1 = lowest value); tied values share the average of their ranks.
pub fn tied_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let j = order[i..].iter().take_while(|&&k| values[k] == values[order[i]]).count();
        // positions i+1 ..= i+j
        let avg = (2 * i + j + 1) as f64 / 2.0;
        for &k in &order[i..i + j] {
            ranks[k] = avg;
        }
        i += j;
    }
    ranks
}

/// One experiment's errors and ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct RankRow {
    pub class: String,
    pub experiment: String,
    pub errors: Vec<f64>,
    pub ranks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankTable {
    pub models: Vec<String>,
    pub rows: Vec<RankRow>,
    /// Per class (in first-appearance order) the average rank of every model.
    pub class_averages: Vec<(String, Vec<f64>)>,
    /// Mean of the class averages, classes weighted equally.
    pub overall: Vec<f64>,
}

/// Input row for [`rank_models`]: `(class, experiment, error per model)`.
pub type ErrorRow = (String, String, Vec<f64>);

/// How class averages and the overall rank are carried.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AverageRounding {
    /// Full precision throughout.
    #[default]
    Exact,
    /// Class averages are rounded to this many decimals before the overall
    /// mean is taken, and the overall mean is rounded the same way. Ties
    /// round down, which is how tables built from already-printed class
    /// averages come out.
    HalfDown(u32),
}

impl AverageRounding {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            AverageRounding::Exact => x,
            AverageRounding::HalfDown(d) => {
                let scale = 10f64.powi(d as i32);
                let y = x * scale;
                let f = y.floor();
                // near-ties count as ties so summation noise cannot tip them
                let r = if y - f > 0.5 + 1e-9 { f + 1.0 } else { f };
                r / scale
            }
        }
    }
}

pub fn rank_models(models: &[String], rows: &[ErrorRow]) -> Result<RankTable, EvalError> {
    rank_models_with(models, rows, AverageRounding::Exact)
}

pub fn rank_models_with(models: &[String], rows: &[ErrorRow], rounding: AverageRounding) -> Result<RankTable, EvalError> {
    if models.is_empty() || rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out_rows = Vec::with_capacity(rows.len());
    for (class, experiment, errors) in rows {
        if errors.len() != models.len() {
            return Err(EvalError::RowWidth {
                experiment: experiment.clone(),
                expected: models.len(),
                got: errors.len(),
            });
        }
        if let Some(m) = errors.iter().position(|e| !e.is_finite()) {
            return Err(EvalError::NonFiniteError {
                experiment: experiment.clone(),
                model: models[m].clone(),
            });
        }
        out_rows.push(RankRow {
            class: class.clone(),
            experiment: experiment.clone(),
            errors: errors.clone(),
            ranks: tied_ranks(errors),
        });
    }
    let mut classes: Vec<String> = Vec::new();
    for r in &out_rows {
        if !classes.contains(&r.class) {
            classes.push(r.class.clone());
        }
    }
    let class_averages: Vec<(String, Vec<f64>)> = classes
        .into_iter()
        .map(|c| {
            let members: Vec<&RankRow> = out_rows.iter().filter(|r| r.class == c).collect();
            let avg = (0..models.len())
                .map(|m| rounding.apply(members.iter().map(|r| r.ranks[m]).sum::<f64>() / members.len() as f64))
                .collect();
            (c, avg)
        })
        .collect();
    let overall = (0..models.len())
        .map(|m| rounding.apply(class_averages.iter().map(|(_, a)| a[m]).sum::<f64>() / class_averages.len() as f64))
        .collect();
    Ok(RankTable {
        models: models.to_vec(),
        rows: out_rows,
        class_averages,
        overall,
    })
}

/// Best, median and worst per-experiment rank of each model.
pub fn rank_range_summary(table: &RankTable) -> Vec<(f64, f64, f64)> {
    (0..table.models.len())
        .map(|m| {
            let mut r: Vec<f64> = table.rows.iter().map(|row| row.ranks[m]).collect();
            r.sort_by(f64::total_cmp);
            let n = r.len();
            let median = if n % 2 == 1 {
                r[n / 2]
            } else {
                0.5 * (r[n / 2 - 1] + r[n / 2])
            };
            (r[0], median, r[n - 1])
        })
        .collect()
}

/// Per-(experiment, model) cross-validation summary.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportCell {
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

/// Machine-readable report: one line per (experiment, model), then class
/// averages and overall ranks with empty error columns.
pub fn report_csv(table: &RankTable, cells: &[Vec<ReportCell>]) -> String {
    let mut s = String::from("game_class,experiment,model,rmse_mean,rmse_std,rank\n");
    for (row, cs) in table.rows.iter().zip(cells) {
        for (m, model) in table.models.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{}",
                csv_field(&row.class),
                csv_field(&row.experiment),
                csv_field(model),
                cs[m].rmse_mean,
                cs[m].rmse_std,
                fmt_rank(row.ranks[m])
            );
        }
    }
    for (class, avg) in &table.class_averages {
        for (m, model) in table.models.iter().enumerate() {
            let _ = writeln!(s, "{},average,{},,,{}", csv_field(class), csv_field(model), fmt_rank(avg[m]));
        }
    }
    for (m, model) in table.models.iter().enumerate() {
        let _ = writeln!(s, "overall,overall,{},,,{}", csv_field(model), fmt_rank(table.overall[m]));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_rank(r: f64) -> String {
    let s = format!("{r:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Aligned human-readable table: `rmse (rank)` per model.
pub fn report_text(table: &RankTable, cells: &[Vec<ReportCell>]) -> String {
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["class".to_string(), "experiment".to_string()];
    header.extend(table.models.iter().cloned());
    grid.push(header);
    let mut last_class = "";
    for (row, cs) in table.rows.iter().zip(cells) {
        let mut line = vec![
            if row.class != last_class { row.class.clone() } else { String::new() },
            row.experiment.clone(),
        ];
        last_class = &row.class;
        line.extend(
            cs.iter()
                .zip(&row.ranks)
                .map(|(c, r)| format!("{:.3} ({})", c.rmse_mean, fmt_rank(*r))),
        );
        grid.push(line);
        if table.rows.iter().filter(|r| r.class == row.class).last() == Some(row) {
            if let Some((_, avg)) = table.class_averages.iter().find(|(c, _)| *c == row.class) {
                let mut line = vec![String::new(), "Average Rank".to_string()];
                line.extend(avg.iter().map(|a| fmt_avg(*a)));
                grid.push(line);
            }
        }
    }
    let mut line = vec!["Overall".to_string(), "Rank".to_string()];
    line.extend(table.overall.iter().map(|a| fmt_avg(*a)));
    grid.push(line);

    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &grid {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c < 2 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Two-decimal display with trailing zeros removed (1.40 -> 1.4).
pub fn fmt_avg(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
