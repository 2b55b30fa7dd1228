//! Shared fixtures for the benchmarks.

use kufarev::{DrivingMeasure, FlowSettings};

/// The sin² measure on [0, 1].
pub fn example() -> DrivingMeasure {
    DrivingMeasure::example(0.0, 1.0)
}

/// Flow settings at a coarser step than the default, for quick iterations.
pub fn quick_flow(n: usize) -> FlowSettings {
    FlowSettings { dt: 2e-3, n, ..FlowSettings::default() }
}
