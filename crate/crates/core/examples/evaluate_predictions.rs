//! Scores noisy predictions against ground truth with 5-fold aggregation and
//! prints the report next to the published reference numbers.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use bodydims::bodygen::{generate_body, sample_population, PopulationConfig};
use bodydims::dataset::kfold_split;
use bodydims::measure::{measure_all, AnnotationConfig, MeasurementSet};
use bodydims::metrics::{evaluate_folds, reference, render_text, MeasurementTable};

fn main() {
    let pop = PopulationConfig {
        segments: 32,
        ..Default::default()
    };
    let params: Vec<_> = sample_population(25, &pop, 9).collect();
    let rows: Vec<MeasurementSet> = params
        .iter()
        .map(|p| measure_all(&generate_body(p).unwrap(), &AnnotationConfig::default()).unwrap())
        .collect();
    let ids: Vec<String> = (0..rows.len()).map(|i| format!("{i:06}")).collect();
    let genders: Vec<_> = params.iter().map(|p| p.gender).collect();
    let truth = MeasurementTable::new(ids.clone(), rows);

    // a stand-in estimator: truth plus 6 mm Gaussian noise
    let noise = Normal::new(0.0, 6.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let split = kfold_split(&ids, Some(&genders), 5, 0).unwrap();
    let mut preds = BTreeMap::new();
    for (f, fold) in split.folds.iter().enumerate() {
        let mut t = truth.subset(fold).unwrap();
        for row in &mut t.rows {
            row.0.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        preds.insert(f, t);
    }

    let (_, all) = evaluate_folds(&truth, &split.folds, &preds, &[20.0, 10.0]).unwrap();
    print!("{}", render_text(&all));
    println!();
    println!("{}", reference::NOTE);
}
