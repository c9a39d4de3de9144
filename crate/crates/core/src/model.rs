//! Domain types and pointwise formulas of the stand model.
//!
//! A stand is described by the basal area per tree `s` and the tree count
//! `n`. Crowding is measured by the relative density index
//! `r(n, s) = A n s^(q/2)`, which must never exceed one. The growth energy
//! `V(t)` available at full density is shared between trees after a
//! reduction by the competition function `g(r)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, QUAD_REL_TOL};
use crate::scalar::Scalar;

/// Species and management constants of the stand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandParams<F> {
    /// Self-thinning (Reineke) exponent, `1 < q < 2`.
    pub q: F,
    /// Self-thinning coefficient `A = exp(-C0)`.
    pub a: F,
    /// Minimum tree count to be preserved.
    pub n_min: F,
    /// Maximum thinning rate (trees per year).
    pub e_max: F,
    /// End of the model validity horizon.
    pub t_star: F,
}

impl<F: Scalar> StandParams<F> {
    pub fn new(q: F, a: F, n_min: F, e_max: F, t_star: F) -> Result<Self> {
        let params = Self {
            q,
            a,
            n_min,
            e_max,
            t_star,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > F::one() && self.q < F::two()) {
            return Err(Error::invalid("q", "1 < q < 2", self.q.as_f64()));
        }
        if !(self.a > F::zero() && self.a.is_finite()) {
            return Err(Error::invalid("a", "A > 0", self.a.as_f64()));
        }
        if !(self.n_min > F::zero() && self.n_min.is_finite()) {
            return Err(Error::invalid("n_min", "n_min > 0", self.n_min.as_f64()));
        }
        if !(self.e_max > F::zero()) {
            return Err(Error::invalid("e_max", "e_max > 0", self.e_max.as_f64()));
        }
        if !(self.t_star > F::zero() && self.t_star.is_finite()) {
            return Err(Error::invalid("t_star", "t_star > 0", self.t_star.as_f64()));
        }
        let s_bar = self.s_bar();
        if !(s_bar.is_finite() && s_bar > F::zero()) {
            return Err(Error::invalid(
                "a",
                "s_bar = (A n_min)^(-2/q) finite and positive",
                s_bar.as_f64(),
            ));
        }
        Ok(())
    }

    /// Half the Reineke exponent, the power of `s` in the density index.
    #[inline]
    pub fn half_q(&self) -> F {
        self.q * F::half()
    }

    /// Largest basal area compatible with `r <= 1` at the minimum tree count.
    pub fn s_bar(&self) -> F {
        self.s_at_full_density(self.n_min)
    }

    /// Basal area at which `n` trees reach `r = 1`.
    #[inline]
    pub fn s_at_full_density(&self, n: F) -> F {
        (self.a * n).powf(-F::two() / self.q)
    }

    /// Tree count at which trees of basal area `s` reach `r = 1`.
    #[inline]
    pub fn n_at_full_density(&self, s: F) -> F {
        F::one() / (self.a * s.powf(self.half_q()))
    }

    /// Relative density index `A n s^(q/2)`.
    pub fn rdi(&self, n: F, s: F) -> Result<F> {
        if !(n > F::zero()) || !(s > F::zero()) {
            return Err(Error::Domain(format!(
                "rdi requires n > 0 and s > 0 (got n = {n}, s = {s})"
            )));
        }
        Ok(self.rdi_unchecked(n, s))
    }

    #[inline]
    pub(crate) fn rdi_unchecked(&self, n: F, s: F) -> F {
        self.a * n * s.powf(self.half_q())
    }

    /// Time `(n0 - n) / e_max` needed to thin from `n0` down to `n` at full rate.
    pub fn time_to_count(&self, n0: F, n: F) -> Result<F> {
        if n > n0 {
            return Err(Error::Domain(format!(
                "time_to_count requires n <= n0 (got n = {n}, n0 = {n0})"
            )));
        }
        Ok((n0 - n) / self.e_max)
    }
}

/// Instantaneous stand state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandState<F> {
    pub t: F,
    /// Basal area per tree.
    pub s: F,
    /// Tree count.
    pub n: F,
}

impl<F: Scalar> StandState<F> {
    pub fn new(t: F, s: F, n: F) -> Self {
        Self { t, s, n }
    }

    pub fn rdi(&self, params: &StandParams<F>) -> F {
        params.rdi_unchecked(self.n, self.s)
    }
}

/// Shape of the competition function `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrowthKind<F> {
    /// `g(r) = (1 + p) r / (r + p)`.
    Fagacees { p: F },
    /// `g(r) = r^(1 - theta)`.
    Power { theta: F },
    /// `g(r) = r`.
    Linear,
}

/// Competition function together with the bounds of its elasticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFunction<F> {
    pub kind: GrowthKind<F>,
    /// Infimum of the elasticity `r g'(r) / g(r)` over `(0, 1)`.
    pub gamma_lower: F,
    /// Supremum of the elasticity over `(0, 1)`.
    pub gamma_upper: F,
}

/// Inner margin of the elasticity sampling grid.
pub const GAMMA_GRID_EPS: f64 = 1e-6;
/// Number of points of the elasticity sampling grid.
pub const GAMMA_GRID_POINTS: usize = 10_000;
/// Safety margin applied to sampled elasticity bounds.
pub const GAMMA_SAFETY: f64 = 1e-9;

impl<F: Scalar> GrowthFunction<F> {
    pub fn new(kind: GrowthKind<F>) -> Result<Self> {
        match kind {
            GrowthKind::Fagacees { p } => {
                if !(p > F::zero() && p.is_finite()) {
                    return Err(Error::invalid("p", "p > 0", p.as_f64()));
                }
            }
            GrowthKind::Power { theta } => {
                if !(theta >= F::zero() && theta < F::one()) {
                    return Err(Error::invalid("theta", "0 <= theta < 1", theta.as_f64()));
                }
            }
            GrowthKind::Linear => {}
        }
        let (gamma_lower, gamma_upper) = match kind {
            GrowthKind::Fagacees { p } => {
                // gamma(r) = p / (r + p) decreases in r
                let eps = F::lit(GAMMA_GRID_EPS);
                (p / (F::one() + p), p / (eps + p))
            }
            GrowthKind::Power { theta } => (F::one() - theta, F::one() - theta),
            GrowthKind::Linear => (F::one(), F::one()),
        };
        Ok(Self {
            kind,
            gamma_lower,
            gamma_upper,
        })
    }

    pub fn fagacees(p: F) -> Result<Self> {
        Self::new(GrowthKind::Fagacees { p })
    }

    pub fn power(theta: F) -> Result<Self> {
        Self::new(GrowthKind::Power { theta })
    }

    pub fn linear() -> Self {
        Self::new(GrowthKind::Linear).expect("linear growth is always valid")
    }

    /// Exponent `theta` when `g(r) = r^(1 - theta)` (the linear case is `theta = 0`).
    pub fn power_theta(&self) -> Option<F> {
        match self.kind {
            GrowthKind::Power { theta } => Some(theta),
            GrowthKind::Linear => Some(F::zero()),
            GrowthKind::Fagacees { .. } => None,
        }
    }

    fn check_unit(r: F) -> Result<()> {
        if r >= F::zero() && r <= F::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("density must lie in [0, 1] (got {r})")))
        }
    }

    fn check_positive(r: F) -> Result<()> {
        if r > F::zero() && r <= F::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("density must lie in (0, 1] (got {r})")))
        }
    }

    /// `g(r)` for `r` in `[0, 1]`.
    pub fn g(&self, r: F) -> Result<F> {
        Self::check_unit(r)?;
        Ok(self.value(r))
    }

    /// `g'(r)` for `r` in `[0, 1]`; infinite at `r = 0` for power growth with `theta > 0`.
    pub fn g_prime(&self, r: F) -> Result<F> {
        Self::check_unit(r)?;
        Ok(self.derivative(r))
    }

    /// `d/dr [r / g(r)] = (g - r g') / g^2`.
    pub fn script_g(&self, r: F) -> Result<F> {
        Self::check_positive(r)?;
        Ok(self.script_g_unchecked(r))
    }

    /// Elasticity `r g'(r) / g(r)`.
    pub fn gamma(&self, r: F) -> Result<F> {
        Self::check_positive(r)?;
        Ok(self.gamma_unchecked(r))
    }

    /// `g` without domain checks; extends the closed form slightly past 1.
    #[inline]
    pub fn value(&self, r: F) -> F {
        match self.kind {
            GrowthKind::Fagacees { p } => (F::one() + p) * r / (r + p),
            GrowthKind::Power { theta } => {
                if r <= F::zero() {
                    F::zero()
                } else {
                    r.powf(F::one() - theta)
                }
            }
            GrowthKind::Linear => r,
        }
    }

    #[inline]
    pub fn derivative(&self, r: F) -> F {
        match self.kind {
            GrowthKind::Fagacees { p } => {
                let d = r + p;
                (F::one() + p) * p / (d * d)
            }
            GrowthKind::Power { theta } => {
                if theta == F::zero() {
                    F::one()
                } else if r <= F::zero() {
                    F::infinity()
                } else {
                    (F::one() - theta) * r.powf(-theta)
                }
            }
            GrowthKind::Linear => F::one(),
        }
    }

    pub(crate) fn script_g_unchecked(&self, r: F) -> F {
        match self.kind {
            GrowthKind::Fagacees { p } => F::one() / (F::one() + p),
            GrowthKind::Power { theta } => {
                if theta == F::zero() {
                    F::zero()
                } else {
                    theta * r.powf(theta - F::one())
                }
            }
            GrowthKind::Linear => F::zero(),
        }
    }

    pub(crate) fn gamma_unchecked(&self, r: F) -> F {
        match self.kind {
            GrowthKind::Fagacees { p } => p / (r + p),
            GrowthKind::Power { theta } => F::one() - theta,
            GrowthKind::Linear => F::one(),
        }
    }

    /// Elasticity bounds estimated on a uniform grid over `(eps, 1 - eps)`,
    /// widened by a small safety margin.
    pub fn sampled_gamma_bounds(&self) -> (F, F) {
        let eps = F::lit(GAMMA_GRID_EPS);
        let span = F::one() - eps - eps;
        let last = F::from_usize_lossy(GAMMA_GRID_POINTS - 1);
        let (lo, hi) = (0..GAMMA_GRID_POINTS)
            .map(|i| {
                let r = eps + span * F::from_usize_lossy(i) / last;
                self.gamma_unchecked(r)
            })
            .fold((F::infinity(), F::neg_infinity()), |(lo, hi), g| (lo.min(g), hi.max(g)));
        let margin = F::lit(GAMMA_SAFETY);
        (lo - margin, (hi + margin).min(F::one()))
    }
}

/// Growth energy available at full density, `V(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrowthEnergy<F> {
    /// `v0 exp(-lambda t)`.
    Exponential { v0: F, lambda: F },
    /// `v0 / (1 + lambda t)`.
    Hyperbolic { v0: F, lambda: F },
}

impl<F: Scalar> GrowthEnergy<F> {
    #[inline]
    pub fn value(&self, t: F) -> F {
        match *self {
            GrowthEnergy::Exponential { v0, lambda } => v0 * (-lambda * t).exp(),
            GrowthEnergy::Hyperbolic { v0, lambda } => v0 / (F::one() + lambda * t),
        }
    }

    /// Closed-form antiderivative difference over `[t0, t1]`.
    pub fn integral(&self, t0: F, t1: F) -> F {
        match *self {
            GrowthEnergy::Exponential { v0, lambda } => {
                if lambda == F::zero() {
                    v0 * (t1 - t0)
                } else {
                    // exp(-l t0) (1 - exp(-l (t1 - t0))) / l, written to avoid cancellation
                    v0 * (-lambda * t0).exp() * -(-lambda * (t1 - t0)).exp_m1() / lambda
                }
            }
            GrowthEnergy::Hyperbolic { v0, lambda } => {
                if lambda == F::zero() {
                    v0 * (t1 - t0)
                } else {
                    v0 / lambda * (lambda * (t1 - t0) / (F::one() + lambda * t0)).ln_1p()
                }
            }
        }
    }

    pub fn with_scaled_v0(&self, factor: F) -> Self {
        match *self {
            GrowthEnergy::Exponential { v0, lambda } => GrowthEnergy::Exponential {
                v0: v0 * factor,
                lambda,
            },
            GrowthEnergy::Hyperbolic { v0, lambda } => GrowthEnergy::Hyperbolic {
                v0: v0 * factor,
                lambda,
            },
        }
    }

    fn parameters(&self) -> (F, F) {
        match *self {
            GrowthEnergy::Exponential { v0, lambda } | GrowthEnergy::Hyperbolic { v0, lambda } => (v0, lambda),
        }
    }
}

/// Dominant height `h0(t)`, independent of thinning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DominantHeight<F> {
    /// `h_inf t / (t + tau)`.
    Saturating { h_inf: F, tau: F },
}

impl<F: Scalar> DominantHeight<F> {
    #[inline]
    pub fn value(&self, t: F) -> F {
        match *self {
            DominantHeight::Saturating { h_inf, tau } => h_inf * t / (t + tau),
        }
    }

    #[inline]
    pub fn derivative(&self, t: F) -> F {
        match *self {
            DominantHeight::Saturating { h_inf, tau } => {
                let d = t + tau;
                h_inf * tau / (d * d)
            }
        }
    }
}

/// Non-fatal remarks recorded when an environment is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentWarning {
    /// `lambda = 0`: `V` is constant, only weakly decreasing.
    WeaklyDecreasingEnergy,
    /// `v0 = 0`: no growth at all.
    ZeroEnergy,
}

/// Growth energy and dominant height of the site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment<F> {
    pub v: GrowthEnergy<F>,
    pub h0: DominantHeight<F>,
    #[serde(default)]
    pub warnings: Vec<EnvironmentWarning>,
}

impl<F: Scalar> Environment<F> {
    pub fn new(v: GrowthEnergy<F>, h0: DominantHeight<F>) -> Result<Self> {
        let (v0, lambda) = v.parameters();
        if !(v0 >= F::zero() && v0.is_finite()) {
            return Err(Error::invalid("v0", "v0 >= 0", v0.as_f64()));
        }
        if !(lambda >= F::zero() && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "lambda >= 0", lambda.as_f64()));
        }
        match h0 {
            DominantHeight::Saturating { h_inf, tau } => {
                if !(h_inf > F::zero() && h_inf.is_finite()) {
                    return Err(Error::invalid("h_inf", "h_inf > 0", h_inf.as_f64()));
                }
                if !(tau > F::zero() && tau.is_finite()) {
                    return Err(Error::invalid("tau", "tau > 0", tau.as_f64()));
                }
            }
        }
        let mut warnings = Vec::new();
        if v0 == F::zero() {
            warnings.push(EnvironmentWarning::ZeroEnergy);
        } else if lambda == F::zero() {
            warnings.push(EnvironmentWarning::WeaklyDecreasingEnergy);
        }
        Ok(Self { v, h0, warnings })
    }

    #[inline]
    pub fn v_at(&self, t: F) -> F {
        self.v.value(t)
    }

    #[inline]
    pub fn height(&self, t: F) -> F {
        self.h0.value(t)
    }

    /// Energy available for growth over `[t0, t1]`.
    pub fn energy(&self, t0: F, t1: F) -> Result<F> {
        if !(t0 >= F::zero() && t1 >= t0) {
            return Err(Error::Domain(format!(
                "energy requires 0 <= t0 <= t1 (got t0 = {t0}, t1 = {t1})"
            )));
        }
        Ok(self.v.integral(t0, t1))
    }

    /// Energy over `[t0, t1]` by adaptive quadrature of `V`.
    pub fn energy_by_quadrature(&self, t0: F, t1: F) -> F {
        adaptive_simpson(|u| self.v.value(u), t0, t1, F::lit(QUAD_REL_TOL))
    }
}

/// Thinning rate `(q/2) V(t) / s` that keeps the density index constant at one.
pub fn boundary_control<F: Scalar>(params: &StandParams<F>, env: &Environment<F>, s: F, t: F) -> Result<F> {
    if !(s > F::zero()) || !(t >= F::zero()) {
        return Err(Error::Domain(format!(
            "boundary control requires s > 0 and t >= 0 (got s = {s}, t = {t})"
        )));
    }
    Ok(boundary_rate(params, env, s, t))
}

#[inline]
pub(crate) fn boundary_rate<F: Scalar>(params: &StandParams<F>, env: &Environment<F>, s: F, t: F) -> F {
    params.half_q() * env.v_at(t) / s
}

/// Complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<F> {
    pub params: StandParams<F>,
    pub growth: GrowthFunction<F>,
    pub env: Environment<F>,
    pub initial: StandState<F>,
}

impl<F: Scalar> Scenario<F> {
    pub fn new(
        params: StandParams<F>,
        growth: GrowthFunction<F>,
        env: Environment<F>,
        initial: StandState<F>,
    ) -> Result<Self> {
        let scenario = Self {
            params,
            growth,
            env,
            initial,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let init = &self.initial;
        if init.t != F::zero() {
            return Err(Error::invalid("t", "initial time t = 0", init.t.as_f64()));
        }
        if !(init.s > F::zero() && init.s.is_finite()) {
            return Err(Error::invalid("s", "initial s > 0", init.s.as_f64()));
        }
        if !(init.n >= self.params.n_min) {
            return Err(Error::invalid("n", "initial n >= n_min", init.n.as_f64()));
        }
        let r0 = self.params.rdi_unchecked(init.n, init.s);
        if !(r0 < F::one()) {
            return Err(Error::invalid("s", "initial rdi(n, s) < 1", r0.as_f64()));
        }
        Ok(())
    }

    pub fn initial_rdi(&self) -> F {
        self.initial.rdi(&self.params)
    }

    pub fn boundary_control(&self, s: F, t: F) -> Result<F> {
        boundary_control(&self.params, &self.env, s, t)
    }

    /// Density index at the minimum tree count and the initial basal area.
    pub fn rdi_min_count_initial_size(&self) -> F {
        self.params.rdi_unchecked(self.params.n_min, self.initial.s)
    }

    /// Same scenario with the growth energy scaled by `factor`.
    pub fn with_scaled_energy(&self, factor: F) -> Self {
        let mut out = self.clone();
        out.env.v = self.env.v.with_scaled_v0(factor);
        out
    }
}
