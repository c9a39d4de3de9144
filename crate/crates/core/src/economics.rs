//! Timber price model and the discounted harvest revenue.
//!
//! The net unit price of a tree of basal area `s` at time `t` is
//! `P(s, t) = k s^alpha h0(t) e^(-delta t)`. A thinning plan is valued by
//! the revenue of the trees removed over `[0, T]` plus the clear-cut value
//! of the trees left at `T`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{growth_rate, Piece, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Environment, Scenario};
use crate::numerics::simpson_nonuniform;
use crate::scalar::Scalar;

/// Price scale `k`, basal-area price exponent `alpha` and discount rate `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicModel<F> {
    pub k: F,
    pub alpha: F,
    pub delta: F,
}

impl<F: Scalar> EconomicModel<F> {
    pub fn new(k: F, alpha: F, delta: F) -> Result<Self> {
        let econ = Self { k, alpha, delta };
        econ.validate()?;
        Ok(econ)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > F::zero() && self.k.is_finite()) {
            return Err(Error::invalid("k", "k > 0", self.k.as_f64()));
        }
        if !(self.alpha > F::zero() && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "alpha > 0", self.alpha.as_f64()));
        }
        if !(self.delta >= F::zero() && self.delta.is_finite()) {
            return Err(Error::invalid("delta", "delta >= 0", self.delta.as_f64()));
        }
        Ok(())
    }

    /// Basal-area price `p(s) = k s^alpha`.
    #[inline]
    pub fn size_price(&self, s: F) -> F {
        self.k * s.powf(self.alpha)
    }

    /// Discounted unit price `P(s, t) = k s^alpha h0(t) e^(-delta t)`.
    #[inline]
    pub fn price(&self, env: &Environment<F>, s: F, t: F) -> F {
        self.size_price(s) * env.height(t) * (-self.delta * t).exp()
    }

    /// Partial derivative of the price in time, `k s^alpha e^(-delta t) (h0' - delta h0)`.
    #[inline]
    pub fn price_time_derivative(&self, env: &Environment<F>, s: F, t: F) -> F {
        self.size_price(s) * (-self.delta * t).exp() * (env.h0.derivative(t) - self.delta * env.height(t))
    }

    /// Partial derivative of the price in basal area, `alpha P / s`.
    #[inline]
    pub fn price_size_derivative(&self, env: &Environment<F>, s: F, t: F) -> F {
        self.alpha * self.price(env, s, t) / s
    }

    /// Effective discount rate `delta - h0'(t) / h0(t)`; singular where `h0 = 0`.
    pub fn delta_h(&self, env: &Environment<F>, t: F) -> Result<F> {
        let h = env.height(t);
        if !(h > F::zero()) {
            return Err(Error::Domain(format!(
                "effective discount is singular at t = {t} where h0(t) = {h}"
            )));
        }
        Ok(self.delta - env.h0.derivative(t) / h)
    }
}

/// Integrates `f(piece, sample index)` over each control piece with Simpson's rule.
fn integrate_pieces<F: Scalar>(traj: &Trajectory<F>, mut f: impl FnMut(&Piece<F>, usize) -> F) -> F {
    let mut total = F::zero();
    for piece in &traj.pieces {
        if piece.end <= piece.start {
            continue;
        }
        let t: Vec<F> = (piece.start..=piece.end).map(|i| traj.samples[i].state.t).collect();
        let y: Vec<F> = (piece.start..=piece.end).map(|i| f(piece, i)).collect();
        total = total + simpson_nonuniform(&t, &y);
    }
    total
}

/// Revenue `int_0^T P(s, t) e dt + P(s(T), T) n(T)` of an integrated run.
///
/// `T` is the last sample time; thinning rates come from the control law of
/// each piece, so jumps of `e` at breakpoints are integrated exactly.
pub fn objective<F: Scalar>(scenario: &Scenario<F>, econ: &EconomicModel<F>, traj: &Trajectory<F>) -> F {
    let env = &scenario.env;
    let thinning = integrate_pieces(traj, |piece, i| {
        let st = traj.samples[i].state;
        econ.price(env, st.s, st.t) * piece.law.rate(scenario, st.s, st.t)
    });
    let fin = traj.final_state();
    thinning + econ.price(env, fin.s, fin.t) * fin.n
}

/// Same revenue through integration by parts:
/// `int_0^T (dP/dt) n dt + P(s(0), 0) n(0)` with
/// `(dP/dt) n = alpha P g(r) V / s + P_t n`.
pub fn objective_ibp<F: Scalar>(scenario: &Scenario<F>, econ: &EconomicModel<F>, traj: &Trajectory<F>) -> F {
    let env = &scenario.env;
    let body = integrate_pieces(traj, |_, i| {
        let st = traj.samples[i].state;
        let ds = growth_rate(scenario, st.t, st.s, st.n);
        econ.price_size_derivative(env, st.s, st.t) * ds * st.n + econ.price_time_derivative(env, st.s, st.t) * st.n
    });
    let init = traj.first().state;
    body + econ.price(env, init.s, init.t) * init.n
}

/// Integrand of the revenue written in `y = n s^b`:
/// `z(y, s, t) = alpha s^(alpha-1) g(A y s^(q/2 - b)) V(t) - delta_h(t) y s^(alpha - b)`,
/// up to the positive factor `k h0(t) e^(-delta t)`.
pub fn integrand_z<F: Scalar>(scenario: &Scenario<F>, econ: &EconomicModel<F>, y: F, s: F, t: F, b: F) -> Result<F> {
    let p = &scenario.params;
    let r = p.a * y * s.powf(p.half_q() - b);
    let g = scenario.growth.g(r)?;
    let a = econ.alpha;
    Ok(a * s.powf(a - F::one()) * g * scenario.env.v_at(t) - econ.delta_h(&scenario.env, t)? * y * s.powf(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, Level, Policy};
    use crate::model::{DominantHeight, GrowthEnergy, GrowthFunction, StandParams, StandState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario() -> Scenario<f64> {
        Scenario::new(
            StandParams::new(1.6, 0.011, 400.0, 100.0, 200.0).unwrap(),
            GrowthFunction::power(0.3).unwrap(),
            Environment::new(
                GrowthEnergy::Exponential { v0: 2.0, lambda: 0.01 },
                DominantHeight::Saturating { h_inf: 30.0, tau: 40.0 },
            )
            .unwrap(),
            StandState::new(0.0, 0.02, 1000.0),
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(EconomicModel::new(0.0, 1.0, 0.0).is_err());
        assert!(EconomicModel::new(1.0, 0.0, 0.0).is_err());
        assert!(EconomicModel::new(1.0, 1.0, -0.1).is_err());
        assert!(EconomicModel::new(1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn price_examples() {
        let sc = scenario();
        let econ = EconomicModel::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(econ.price(&sc.env, 0.3, 0.0), 0.0);
        let t = 12.0;
        assert!((econ.price(&sc.env, 0.3, t) - 0.3 * sc.env.height(t)).abs() < 1e-15);
    }

    #[test]
    fn price_time_derivative_is_minus_delta_h_price() {
        let sc = scenario();
        let econ = EconomicModel::new(2.0, 1.7, 0.03).unwrap();
        for t in [0.5, 3.0, 20.0, 80.0] {
            let dh = econ.delta_h(&sc.env, t).unwrap();
            let h = 1e-5;
            let fd = (econ.price(&sc.env, 0.2, t + h) - econ.price(&sc.env, 0.2, t - h)) / (2.0 * h);
            let p = econ.price(&sc.env, 0.2, t);
            assert!((fd + dh * p).abs() < 1e-8 * p.abs().max(1.0));
            assert!((econ.price_time_derivative(&sc.env, 0.2, t) + dh * p).abs() < 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn delta_h_saturating_closed_form() {
        let sc = scenario();
        let econ = EconomicModel::new(1.0, 1.0, 0.04).unwrap();
        for t in [0.1, 1.0, 10.0, 100.0] {
            let expected = 0.04 - 40.0 / (t * (t + 40.0));
            assert!((econ.delta_h(&sc.env, t).unwrap() - expected).abs() < 1e-12);
        }
        assert!(econ.delta_h(&sc.env, 0.0).is_err());
        let zero = EconomicModel::new(1.0, 1.0, 0.0).unwrap();
        assert!(zero.delta_h(&sc.env, 5.0).unwrap() < 0.0);
        assert!((econ.delta_h(&sc.env, 1e7).unwrap() - 0.04).abs() < 1e-9);
    }

    #[test]
    fn zero_policy_objective_is_terminal_value() {
        let sc = scenario();
        let econ = EconomicModel::new(1.0, 1.5, 0.02).unwrap();
        let h = 5.0;
        let traj = integrate(&sc, &Policy::Zero, h, h / 512.0).unwrap();
        let fin = traj.final_state();
        let v = objective(&sc, &econ, &traj);
        assert_eq!(v, econ.price(&sc.env, fin.s, h) * 1000.0);
        assert!((objective_ibp(&sc, &econ, &traj) - v).abs() < 1e-6 * v);
        let double = EconomicModel::new(2.0, 1.5, 0.02).unwrap();
        assert!((objective(&sc, &double, &traj) - 2.0 * v).abs() < 1e-12 * v);
    }

    #[test]
    fn both_forms_agree_on_switching_policies() {
        let sc = scenario();
        let econ = EconomicModel::new(1.0, 2.0, 0.03).unwrap();
        let h = 40.0;
        let policies = [
            Policy::Max,
            Policy::BoundaryHold,
            Policy::piecewise(
                vec![7.3, 21.0],
                vec![Level::Rate(30.0), Level::Hold, Level::Rate(100.0)],
            )
            .unwrap(),
        ];
        for p in policies {
            let traj = integrate(&sc, &p, h, h / 4096.0).unwrap();
            assert!(traj.completed());
            let a = objective(&sc, &econ, &traj);
            let b = objective_ibp(&sc, &econ, &traj);
            assert!((a - b).abs() <= 1e-5 * a.abs(), "{}: {a} vs {b}", p.label());
        }
    }

    #[test]
    fn z_increases_in_y_under_discount_condition() {
        let sc = scenario();
        let theta = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tested = 0;
        for _ in 0..2000 {
            let alpha = rng.random_range(0.5..4.0);
            let econ = EconomicModel::new(1.0, alpha, rng.random_range(0.0..0.1)).unwrap();
            let b = rng.random_range(0.2..3.0);
            let s: f64 = rng.random_range(0.01..0.5);
            let t = rng.random_range(0.5..100.0);
            let r: f64 = rng.random_range(0.05..0.95);
            let n = r / (sc.params.a * s.powf(0.8));
            let y = n * s.powf(b);
            let xi = sc.growth.value(r) * sc.env.v_at(t) / (n * s);
            let dh = econ.delta_h(&sc.env, t).unwrap();
            if dh >= alpha * (1.0 - theta) * xi {
                continue;
            }
            let h = 1e-6 * y;
            let up = integrand_z(&sc, &econ, y + h, s, t, b);
            let dn = integrand_z(&sc, &econ, y - h, s, t, b);
            if let (Ok(up), Ok(dn)) = (up, dn) {
                assert!(up > dn, "z not increasing at y={y}, s={s}, t={t}");
                tested += 1;
            }
        }
        assert!(tested > 500);
    }
}
