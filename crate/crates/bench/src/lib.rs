//! Shared fixtures for the benchmarks.

use mecke_core::levy_systems::LevyMeasureSpec;
use mecke_core::{IntensitySpec, ProcessCatalog, ProcessSpec, Window};

/// Uniform intensity of the given mass on the unit interval.
pub fn unit_intensity(mass: f64) -> IntensitySpec {
    IntensitySpec::uniform(Window::unit(1), mass).expect("valid intensity")
}

/// `f(x₁, x₂; ω) = (0.5 + x₁)(0.5 + x₂) ω([0, 1])`
pub fn count_weighted_pair() -> ProcessSpec {
    ProcessSpec::from_catalog(ProcessCatalog::CountWeighted {
        exponents: vec![1.0, 1.0],
        shift: 0.5,
        lo: None,
        hi: None,
        off_diagonal: false,
    })
    .expect("valid catalog process")
}

/// Uniform jumps on `[-1, 1]` with total mass 2.
pub fn uniform_jumps() -> LevyMeasureSpec {
    LevyMeasureSpec::uniform(1, -1.0, 1.0, 1.0, 0.0).expect("valid Lévy measure")
}
