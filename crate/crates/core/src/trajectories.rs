//! Canonical thinning strategies and their characteristic times.
//!
//! * `E0` thins at the maximum rate until the minimum count, then stops.
//! * `E^0` (here `Esup`) does not thin until the density index reaches one,
//!   then follows the boundary arc `r = 1` down to the minimum count.
//! * `E_T` reaches the minimum count exactly at `T` while thinning as late
//!   as possible.
//!
//! Characteristic times are obtained from the energy function by bracketed
//! bisection; integration is used only for the minimal exit time, which has
//! no algebraic characterization for general competition functions.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, CanonicalKind, Level, Policy, Schedule, Segment, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::model::{GrowthKind, Scenario};
use crate::numerics::{adaptive_simpson, bisect, increasing_root, QUAD_REL_TOL, TIME_TOL};
use crate::scalar::Scalar;

/// A time that may not be reached within the validity horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reach<F> {
    At(F),
    Unreachable,
}

impl<F: Scalar> Reach<F> {
    pub fn time(&self) -> Option<F> {
        match *self {
            Reach::At(t) => Some(t),
            Reach::Unreachable => None,
        }
    }

    pub fn is_reachable(&self) -> bool {
        matches!(self, Reach::At(_))
    }
}

impl<F: Scalar> From<Result<F>> for Reach<F> {
    fn from(r: Result<F>) -> Self {
        r.map(Reach::At).unwrap_or(Reach::Unreachable)
    }
}

impl<F: Scalar> Serialize for Reach<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Reach::At(t) => t.serialize(serializer),
            Reach::Unreachable => serializer.serialize_str("unreachable"),
        }
    }
}

impl<'de, F: Scalar> Deserialize<'de> for Reach<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ReachVisitor<F>(std::marker::PhantomData<F>);

        impl<F: Scalar> Visitor<'_> for ReachVisitor<F> {
            type Value = Reach<F>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a time or the string \"unreachable\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Reach::At(F::lit(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(Reach::At(F::lit(v as f64)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(Reach::At(F::lit(v as f64)))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "unreachable" {
                    Ok(Reach::Unreachable)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(ReachVisitor(std::marker::PhantomData))
    }
}

/// Characteristic times of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CharacteristicTimes<F> {
    /// Time to thin from the initial count to `n_min` at full rate.
    pub t0_n: F,
    /// First time the density index reaches one without thinning.
    pub t_sup0: Reach<F>,
    /// Time at which the boundary arc started at `t_sup0` reaches `n_min`.
    pub t_cap0: Reach<F>,
    /// Boundary-exit switch time of `E_T` for the requested horizon, if any.
    pub t_star_switch: Option<Reach<F>>,
    /// Minimal time to reach the exit point.
    pub t_lower: Reach<F>,
    /// Maximal time to reach the exit point.
    pub t_upper: Reach<F>,
    /// `t_lower` is the exit time of `E0`, proven minimal only for power growth.
    pub lower_is_heuristic: bool,
}

/// `(n0 - n) / e_max`.
pub fn time_to_count<F: Scalar>(scenario: &Scenario<F>, n0: F, n: F) -> Result<F> {
    scenario.params.time_to_count(n0, n)
}

/// `int_{r0}^{1} u^(2/q - 1) / g(u) du` for the initial density `r0`.
pub fn density_integral<F: Scalar>(scenario: &Scenario<F>) -> F {
    let r0 = scenario.initial_rdi();
    let expo = F::two() / scenario.params.q - F::one();
    let growth = scenario.growth;
    adaptive_simpson(
        |u: F| u.powf(expo) / growth.value(u),
        r0,
        F::one(),
        F::lit(QUAD_REL_TOL),
    )
}

/// Time at which the density index reaches one under zero thinning.
pub fn t_sup0<F: Scalar>(scenario: &Scenario<F>) -> Result<F> {
    let p = &scenario.params;
    let n0 = scenario.initial.n;
    let two_over_q = F::two() / p.q;
    let coef = p.half_q() * n0.powf(two_over_q - F::one()) * p.a.powf(two_over_q);
    let target = density_integral(scenario) / coef;
    solve_energy(scenario, F::zero(), target).ok_or(Error::NoCrossing {
        t_star: p.t_star.as_f64(),
    })
}

/// Energy that the boundary arc needs to go from `n_from` down to `n_to` trees.
pub fn arc_energy<F: Scalar>(scenario: &Scenario<F>, n_from: F, n_to: F) -> F {
    let p = &scenario.params;
    let expo = F::one() - F::two() / p.q;
    (n_to.powf(expo) - n_from.powf(expo)) / (p.a.powf(F::two() / p.q) * (F::one() - p.half_q()))
}

/// Tree count along the boundary arc entered at `t_entry` with `n_entry` trees.
pub fn arc_count<F: Scalar>(scenario: &Scenario<F>, t_entry: F, n_entry: F, t: F) -> F {
    let p = &scenario.params;
    let expo = F::one() - F::two() / p.q;
    let energy = scenario.env.v.integral(t_entry, t);
    (n_entry.powf(expo) + p.a.powf(F::two() / p.q) * (F::one() - p.half_q()) * energy).powf(F::one() / expo)
}

/// Time at which the boundary arc started at `t_sup0` reaches `n_min`.
pub fn t_cap0<F: Scalar>(scenario: &Scenario<F>) -> Result<F> {
    let t0 = t_sup0(scenario)?;
    t_cap0_from(scenario, t0)
}

fn t_cap0_from<F: Scalar>(scenario: &Scenario<F>, t_sup: F) -> Result<F> {
    let target = arc_energy(scenario, scenario.initial.n, scenario.params.n_min);
    solve_energy(scenario, t_sup, target).ok_or(Error::NoReach {
        t_star: scenario.params.t_star.as_f64(),
    })
}

/// Smallest `T` in `[start, t_star]` with `V(start; T) >= target`.
fn solve_energy<F: Scalar>(scenario: &Scenario<F>, start: F, target: F) -> Option<F> {
    if target <= F::zero() {
        return Some(start);
    }
    let v = &scenario.env.v;
    increasing_root(|t| v.integral(start, t) - target, start, scenario.params.t_star)
}

/// Switch time `t_*` of `E_T` on its long-horizon branch: the boundary arc is
/// left at `t_*` so that thinning at full rate reaches `n_min` exactly at `horizon`.
pub fn et_switch_time<F: Scalar>(scenario: &Scenario<F>, horizon: F) -> Result<F> {
    let p = &scenario.params;
    let n0 = scenario.initial.n;
    let t_sup = t_sup0(scenario)?;
    let t0n = p.time_to_count(n0, p.n_min)?;
    if !(horizon > t0n + t_sup) {
        return Err(Error::Domain(format!(
            "t_* only exists for horizons beyond t0_n + t_sup0 = {}",
            t0n + t_sup
        )));
    }
    let gap = |t: F| (horizon - t) * p.e_max - (arc_count(scenario, t_sup, n0, t) - p.n_min);
    if gap(horizon) >= F::zero() {
        return Err(Error::Domain(format!(
            "horizon {horizon} lies beyond the boundary exit time"
        )));
    }
    bisect(gap, t_sup, horizon, F::lit(TIME_TOL))
}

/// Builds the explicit schedule of a canonical strategy.
pub fn build_policy<F: Scalar>(scenario: &Scenario<F>, kind: CanonicalKind<F>) -> Result<Policy<F>> {
    let p = &scenario.params;
    let schedule = match kind {
        // the count clamp at n_min ends the full-rate phase at t0_n
        CanonicalKind::E0 => Schedule::constant(Level::Rate(p.e_max)),
        CanonicalKind::Esup => Schedule::constant(Level::Hold),
        CanonicalKind::Et { horizon } => et_schedule(scenario, horizon)?,
    };
    Ok(Policy::Canonical { kind, schedule })
}

fn et_schedule<F: Scalar>(scenario: &Scenario<F>, horizon: F) -> Result<Schedule<F>> {
    let p = &scenario.params;
    let n0 = scenario.initial.n;
    if !(horizon > F::zero() && horizon <= p.t_star) {
        return Err(Error::Domain(format!("E_T needs 0 < T <= t_star (got T = {horizon})")));
    }
    let t0n = p.time_to_count(n0, p.n_min)?;
    if horizon <= t0n {
        return Ok(Schedule::constant(Level::Rate(p.e_max)));
    }
    let t_sup = t_sup0(scenario).ok();
    if let Some(t_sup) = t_sup {
        if let Ok(t_cap) = t_cap0_from(scenario, t_sup) {
            if horizon > t_cap + F::lit(TIME_TOL) {
                return Err(Error::Domain(format!(
                    "E_T needs T <= T0 = {t_cap} (got T = {horizon})"
                )));
            }
            if horizon >= t_cap - F::lit(TIME_TOL) {
                return Ok(Schedule::constant(Level::Hold));
            }
        }
    }
    match t_sup {
        Some(t_sup) if horizon > t0n + t_sup => {
            let t_switch = et_switch_time(scenario, horizon)?;
            Ok(Schedule {
                segments: vec![
                    Segment {
                        end: t_switch,
                        level: Level::Hold,
                    },
                    Segment {
                        end: F::infinity(),
                        level: Level::Rate(p.e_max),
                    },
                ],
            })
        }
        _ => Ok(Schedule {
            segments: vec![
                Segment {
                    end: horizon - t0n,
                    level: Level::Rate(F::zero()),
                },
                Segment {
                    end: F::infinity(),
                    level: Level::Rate(p.e_max),
                },
            ],
        }),
    }
}

/// Minimal and maximal times to reach the exit point `(r, n) = (1, n_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExtremalTimes<F> {
    pub lower: Reach<F>,
    pub upper: Reach<F>,
    pub lower_is_heuristic: bool,
}

/// Exit time of `E0` (minimal for power growth) and of `E^0` (maximal).
///
/// With `theta = 0` the basal area does not depend on the cutting, so every
/// policy exits at the same time and both bounds take the closed form.
pub fn extremal_times<F: Scalar>(scenario: &Scenario<F>) -> ExtremalTimes<F> {
    let upper = Reach::from(t_cap0(scenario));
    if scenario.growth.power_theta() == Some(F::zero()) {
        return ExtremalTimes {
            lower: upper,
            upper,
            lower_is_heuristic: false,
        };
    }
    let t_star = scenario.params.t_star;
    let lower = build_policy(scenario, CanonicalKind::E0)
        .and_then(|e0| integrate(scenario, &e0, t_star, t_star / F::from_usize_lossy(4 * DEFAULT_STEPS)))
        .ok()
        .and_then(|traj| traj.exit_time())
        .map(Reach::At)
        .unwrap_or(Reach::Unreachable);
    ExtremalTimes {
        lower,
        upper,
        lower_is_heuristic: matches!(scenario.growth.kind, GrowthKind::Fagacees { .. }),
    }
}

/// All characteristic times; `horizon` selects the `E_T` switch time.
pub fn characteristic_times<F: Scalar>(scenario: &Scenario<F>, horizon: Option<F>) -> CharacteristicTimes<F> {
    let p = &scenario.params;
    let t0_n = (scenario.initial.n - p.n_min) / p.e_max;
    let t_sup = t_sup0(scenario);
    let t_cap = t_sup.clone().and_then(|t| t_cap0_from(scenario, t));
    let extremal = extremal_times(scenario);
    let t_star_switch = horizon.map(|h| Reach::from(et_switch_time(scenario, h)));
    CharacteristicTimes {
        t0_n,
        t_sup0: Reach::from(t_sup),
        t_cap0: Reach::from(t_cap),
        t_star_switch,
        t_lower: extremal.lower,
        t_upper: extremal.upper,
        lower_is_heuristic: extremal.lower_is_heuristic,
    }
}

/// Verdict of the sufficient validity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityVerdict {
    /// Enough energy: every policy reaches the exit point before `t_star`.
    ExitReachable,
    /// Too little energy: the density index never reaches one before `t_star`.
    ExitUnreachable,
    /// Neither sufficient bound is conclusive.
    Inconclusive,
}

/// Sufficient bounds on the total energy `V(0; t_star)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityDiagnostic<F> {
    pub total_energy: F,
    /// `s(0)^(1-q/2) + A (1-q/2) V(0; t_star)`, a lower bound of `s(t_star)^(1-q/2)`.
    pub size_lower_bound: F,
    /// `s_bar^(1-q/2)`, which no valid trajectory can exceed.
    pub size_ceiling: F,
    /// `r(n(0), s(0) + V(0; t_star) / n_min)`, an upper bound of the density index.
    pub density_upper_bound: F,
    pub verdict: ValidityVerdict,
}

pub fn validity_diagnostic<F: Scalar>(scenario: &Scenario<F>) -> ValidityDiagnostic<F> {
    let p = &scenario.params;
    let init = &scenario.initial;
    let expo = F::one() - p.half_q();
    let total_energy = scenario.env.v.integral(F::zero(), p.t_star);
    let size_lower_bound = init.s.powf(expo) + p.a * expo * total_energy;
    let size_ceiling = p.s_bar().powf(expo);
    let density_upper_bound = p.rdi_unchecked(init.n, init.s + total_energy / p.n_min);
    let verdict = if size_lower_bound > size_ceiling {
        ValidityVerdict::ExitReachable
    } else if density_upper_bound < F::one() {
        ValidityVerdict::ExitUnreachable
    } else {
        ValidityVerdict::Inconclusive
    };
    ValidityDiagnostic {
        total_energy,
        size_lower_bound,
        size_ceiling,
        density_upper_bound,
        verdict,
    }
}
