//! Synthetic observation sets drawn from a model's predictions.

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::experiment::{Experiment, GameKey, PredictError};
use crate::model::ModelSpec;
use crate::observations::{ExperimentData, ObservationSet, Unit};

/// Draws `n_units` observations per cell from `model`'s prediction on
/// `experiment`. Market cells draw entry decisions; the other games draw
/// outcomes or grid choices from the predicted distribution.
pub fn synthesize(
    experiment: &Experiment<f64>,
    model: &ModelSpec,
    n_units: usize,
    seed: u64,
) -> Result<ExperimentData, PredictError> {
    let pred = experiment.predict(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units = match experiment.key {
        GameKey::Market { .. } => pred
            .iter()
            .enumerate()
            .flat_map(|(cell, &p)| {
                (0..n_units)
                    .map(|_| Unit {
                        cell,
                        value: if rng.gen::<f64>() < p { 1.0 } else { 0.0 },
                    })
                    .collect::<Vec<_>>()
            })
            .collect(),
        _ => {
            let dist = WeightedIndex::new(pred.iter().map(|&p| p.max(0.0))).expect("prediction has positive mass");
            let mut values: Vec<f64> = (0..n_units).map(|_| rng.sample(&dist) as f64).collect();
            values.sort_by(f64::total_cmp);
            values.into_iter().map(|value| Unit { cell: 0, value }).collect()
        }
    };
    let mut data = ExperimentData {
        key: experiment.key.experiment_key(),
        capacities: experiment.capacities(),
        units,
    };
    // canonical order within cells, matching loaded data
    data.units.sort_by(|a, b| a.cell.cmp(&b.cell).then(a.value.total_cmp(&b.value)));
    Ok(data)
}

/// Bundle of synthetic experiments, one per `(key, model)` pair.
pub fn synthesize_set(
    specs: &[(GameKey, ModelSpec)],
    n_units: usize,
    seed: u64,
) -> Result<ObservationSet, PredictError> {
    let mut experiments = Vec::with_capacity(specs.len());
    for (i, (key, model)) in specs.iter().enumerate() {
        let exp = Experiment::build(*key)?;
        experiments.push(synthesize(&exp, model, n_units, seed.wrapping_add(i as u64))?);
    }
    experiments.sort_by(|a, b| a.key.report_order(&b.key));
    Ok(ObservationSet { experiments })
}
