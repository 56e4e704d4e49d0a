//! Benchmark fixtures shared by the criterion targets.

use chemoshear::SimParams;

/// The L = 50 configuration with chemotaxis used throughout the benches.
pub fn chemotactic_params(amplitude: f64) -> SimParams {
    let mut p = SimParams::with_box(50.0);
    p.amplitude = amplitude;
    p.chi = 500.0;
    p.v_max = 5.0;
    p
}
