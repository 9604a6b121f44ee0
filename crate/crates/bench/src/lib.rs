//! Fixtures shared by the benchmarks.

use rankhaz::randkit::RngStream;
use rankhaz::simlab::{generate, Coarsening, Family, ScenarioSpec};
use rankhaz::SurvivalDataset;

/// Weibull data with `n` subjects, coarsened to a grid of width `width` when given.
pub fn weibull_data(n: usize, width: Option<f64>, seed: u64) -> SurvivalDataset {
    let mut spec = ScenarioSpec::new(Family::weibull(1.0, 10.0));
    spec.n = n;
    if let Some(w) = width {
        spec.coarsening = Some(Coarsening::Round { width: w });
    }
    let mut rng = RngStream::new(seed, 0).rng();
    generate(&spec, &mut rng).expect("fixture generation")
}
