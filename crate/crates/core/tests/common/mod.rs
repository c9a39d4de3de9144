#![allow(dead_code)]

use stand_core::model::{DominantHeight, Environment, GrowthEnergy, GrowthFunction, Scenario, StandParams, StandState};

/// Stand with `q = 1.6`, `A = 0.011`, `n_min = 400`, `n(0) = 1000`, `s(0) = 0.02`
/// and exponential energy `v0 exp(-lambda t)`.
pub fn stand(growth: GrowthFunction<f64>, e_max: f64, t_star: f64, v0: f64, lambda: f64) -> Scenario<f64> {
    Scenario::new(
        StandParams::new(1.6, 0.011, 400.0, e_max, t_star).unwrap(),
        growth,
        Environment::new(
            GrowthEnergy::Exponential { v0, lambda },
            DominantHeight::Saturating { h_inf: 30.0, tau: 40.0 },
        )
        .unwrap(),
        StandState::new(0.0, 0.02, 1000.0),
    )
    .unwrap()
}

/// Audit presets: long validity horizon, fast-decaying energy.
pub fn audit_preset(growth: GrowthFunction<f64>) -> Scenario<f64> {
    stand(growth, 100.0, 200.0, 2.0, 0.05)
}

/// Optimization presets (same stand as the bundled regime files).
pub fn regime_stand(theta: f64) -> Scenario<f64> {
    stand(GrowthFunction::power(theta).unwrap(), 100.0, 100.0, 2.0, 0.01)
}

/// Test-local `V(a; b)` for exponential energy.
pub fn exp_energy(v0: f64, lambda: f64, a: f64, b: f64) -> f64 {
    v0 / lambda * ((-lambda * a).exp() - (-lambda * b).exp())
}

/// Time `t` with `V(from; t) = target` for exponential energy.
pub fn exp_energy_inverse(v0: f64, lambda: f64, from: f64, target: f64) -> f64 {
    -((-lambda * from).exp() - lambda * target / v0).ln() / lambda
}

/// Test-local competition functions.
pub fn g_power(theta: f64, r: f64) -> f64 {
    r.powf(1.0 - theta)
}

pub fn g_fagacees(p: f64, r: f64) -> f64 {
    r * (1.0 + p) / (r + p)
}
