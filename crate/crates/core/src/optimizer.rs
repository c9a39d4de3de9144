//! Policy search for the discounted revenue and sufficient optimality conditions.
//!
//! The brute-force search enumerates every assignment of a small level set
//! to equal-length intervals, together with the canonical strategies. The
//! condition checker evaluates the closed-form criteria under which `E0`
//! (cut early) or `E^0` / `E_T` (cut late) is optimal.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{b_star, check_hypotheses, ReferenceEnvelopes, CHECK_GRID_POINTS};
use crate::dynamics::{growth_rate, integrate, CanonicalKind, Level, Policy, Trajectory, DEFAULT_STEPS};
use crate::economics::{objective, EconomicModel};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::scalar::Scalar;
use crate::trajectories::{build_policy, extremal_times};

/// Largest number of enumerated candidates (`3^10`).
pub const MAX_CANDIDATES: usize = 59_049;
/// Largest number of equal intervals.
pub const MAX_INTERVALS: usize = 10;
/// Relative tolerance on `n(T) = n_min` for the terminal constraint.
pub const TERMINAL_TOL: f64 = 1e-6;

/// Which closed-form optimality criterion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalityBranch {
    /// Convex enough price, small discount, power growth: cut early.
    E0Optimal,
    /// Weakly convex price, small discount: grow first, then ride the boundary.
    EsupOptimal,
    /// As `EsupOptimal` under the terminal constraint `n(T) = n_min`.
    EtOptimal,
    None,
}

/// Outcome of the optimality criteria with their margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport<F> {
    pub branch: OptimalityBranch,
    pub horizon: F,
    pub terminal: bool,
    pub hypotheses_hold: bool,
    /// `horizon <= T_upper` (always true when `T_upper` is unreachable).
    pub within_upper_time: bool,
    pub alpha: F,
    /// `1 + (b_* - q/2)(1 - theta)`, power growth with `theta > 0` only.
    pub alpha_star: Option<F>,
    /// `(1 - (q/2) gamma_lower) / (1 - gamma_lower)`.
    pub alpha_ceiling: F,
    /// `min_t [alpha (1 - theta) xi_m(t) - delta_h(t)]`, power growth only.
    pub early_discount_margin: Option<F>,
    /// `min_t [alpha gamma_lower xi_m(t) - delta_h(t)]`.
    pub late_discount_margin: F,
}

impl<F: Scalar> OptimalityReport<F> {
    /// `alpha - alpha_*` (positive when the early-cut price condition holds).
    pub fn early_alpha_margin(&self) -> Option<F> {
        self.alpha_star.map(|a| self.alpha - a)
    }

    /// `alpha_ceiling - alpha` (positive when the late-cut price condition holds).
    pub fn late_alpha_margin(&self) -> F {
        self.alpha_ceiling - self.alpha
    }
}

/// Evaluates the sufficient optimality criteria on a uniform grid of `(0, horizon]`.
pub fn check_optimality_conditions<F: Scalar>(
    scenario: &Scenario<F>,
    econ: &EconomicModel<F>,
    horizon: F,
    terminal: bool,
) -> Result<OptimalityReport<F>> {
    let p = &scenario.params;
    let c = p.half_q();
    let gl = scenario.growth.gamma_lower;
    let alpha = econ.alpha;
    let hypotheses_hold = check_hypotheses(scenario).iter().all(|f| f.pass);
    let within_upper_time = extremal_times(scenario)
        .upper
        .time()
        .is_none_or(|t_up| horizon <= t_up + F::lit(1e-9) * t_up);
    let theta = scenario.growth.power_theta();
    let alpha_star = match (theta, b_star(scenario)) {
        (Some(th), Ok(b)) if th > F::zero() => Some(F::one() + (b.b_star - c) * (F::one() - th)),
        _ => None,
    };
    let alpha_ceiling = if gl >= F::one() {
        F::infinity()
    } else {
        (F::one() - c * gl) / (F::one() - gl)
    };

    let refs = ReferenceEnvelopes::new(scenario, horizon, horizon / F::from_usize_lossy(DEFAULT_STEPS))?;
    let mut early = F::infinity();
    let mut late = F::infinity();
    let points = F::from_usize_lossy(CHECK_GRID_POINTS);
    for i in 1..=CHECK_GRID_POINTS {
        let t = horizon * F::from_usize_lossy(i) / points;
        let dh = econ.delta_h(&scenario.env, t)?;
        let up = refs.upper.state_at(scenario, t);
        let lo = refs.lower.state_at(scenario, t);
        let ds_up = growth_rate(scenario, t, up.s, up.n);
        let cap = if theta.is_some() { lo.s } else { p.s_bar() };
        let xi_m = ds_up / (up.s.powf(c) * cap.powf(F::one() - c));
        if let Some(th) = theta {
            early = early.min(alpha * (F::one() - th) * xi_m - dh);
        }
        late = late.min(alpha * gl * xi_m - dh);
    }
    let early_discount_margin = theta.map(|_| early);

    let base = hypotheses_hold && within_upper_time;
    let early_ok =
        base && alpha_star.is_some_and(|a| alpha > a) && early_discount_margin.is_some_and(|m| m >= F::zero());
    let late_ok = base && alpha < alpha_ceiling && late >= F::zero();
    let branch = if early_ok {
        OptimalityBranch::E0Optimal
    } else if late_ok && terminal {
        OptimalityBranch::EtOptimal
    } else if late_ok {
        OptimalityBranch::EsupOptimal
    } else {
        OptimalityBranch::None
    };
    Ok(OptimalityReport {
        branch,
        horizon,
        terminal,
        hypotheses_hold,
        within_upper_time,
        alpha,
        alpha_star,
        alpha_ceiling,
        early_discount_margin,
        late_discount_margin: late,
    })
}

/// No thinning, full rate and boundary hold.
pub fn standard_levels<F: Scalar>(e_max: F) -> Vec<Level<F>> {
    vec![Level::Rate(F::zero()), Level::Rate(e_max), Level::Hold]
}

/// Five evenly spaced constant rates from 0 to `e_max`.
pub fn fine_levels<F: Scalar>(e_max: F) -> Vec<Level<F>> {
    (0..5)
        .map(|i| Level::Rate(e_max * F::from_usize_lossy(i) / F::lit(4.0)))
        .collect()
}

/// Tunables of [`brute_force`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions<F> {
    pub intervals: usize,
    pub levels: Vec<Level<F>>,
    /// Keep only runs ending at `n_min`.
    pub terminal: bool,
    /// Lattice steps of the enumeration pass.
    pub coarse_steps: usize,
    /// Lattice steps used to re-evaluate the finalists.
    pub fine_steps: usize,
    /// Number of enumerated finalists re-evaluated at the fine step.
    pub finalists: usize,
    /// Keep the coarse value of every candidate in the result.
    pub keep_candidates: bool,
}

impl<F: Scalar> SearchOptions<F> {
    pub fn new(intervals: usize, levels: Vec<Level<F>>) -> Self {
        Self {
            intervals,
            levels,
            terminal: false,
            coarse_steps: 1024,
            fine_steps: DEFAULT_STEPS,
            finalists: 16,
            keep_candidates: false,
        }
    }

    pub fn candidate_count(&self) -> Option<usize> {
        let mut total: usize = 1;
        for _ in 0..self.intervals {
            total = total.checked_mul(self.levels.len())?;
        }
        Some(total)
    }
}

/// Coarse evaluation of one enumerated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateValue<F> {
    pub label: String,
    pub value: Option<F>,
}

/// Outcome of [`brute_force`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SearchResult<F> {
    pub best_policy: Policy<F>,
    pub best_label: String,
    pub best_value: F,
    /// Fine-step value of each canonical strategy; `None` when infeasible.
    pub canonical_values: BTreeMap<String, Option<F>>,
    pub condition_report: Option<OptimalityReport<F>>,
    /// `best_value - max(canonical values)`.
    pub gap: F,
    /// Number of enumerated candidates (canonical strategies excluded).
    pub candidates_evaluated: usize,
    pub feasible: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_values: Option<Vec<CandidateValue<F>>>,
}

/// Canonical strategies in tie-break order.
fn canonical_candidates<F: Scalar>(scenario: &Scenario<F>, horizon: F) -> Vec<(String, Policy<F>)> {
    let mut out = Vec::new();
    for kind in [CanonicalKind::E0, CanonicalKind::Et { horizon }, CanonicalKind::Esup] {
        if let Ok(p) = build_policy(scenario, kind) {
            out.push((kind.label().to_string(), p));
        }
    }
    out.push(("zero".into(), Policy::Zero));
    out.push(("max".into(), Policy::Max));
    out
}

fn level_label<F: Scalar>(level: &Level<F>) -> String {
    match level {
        Level::Rate(c) => format!("{c}"),
        Level::Hold => "hold".into(),
    }
}

/// Per-interval label and piecewise policy of the `index`-th level
/// assignment; equal neighbouring levels are merged in the policy.
fn enumerated_policy<F: Scalar>(
    index: usize,
    horizon: F,
    intervals: usize,
    levels: &[Level<F>],
) -> (String, Policy<F>) {
    let mut rest = index;
    let mut assigned = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        assigned.push(levels[rest % levels.len()]);
        rest /= levels.len();
    }
    assigned.reverse();
    let label = format!("pw[{}]", assigned.iter().map(level_label).collect::<Vec<_>>().join(","));
    let width = horizon / F::from_usize_lossy(intervals);
    let mut breakpoints = Vec::new();
    let mut merged: Vec<Level<F>> = Vec::new();
    for (i, level) in assigned.into_iter().enumerate() {
        if merged.last() == Some(&level) {
            continue;
        }
        if i > 0 {
            breakpoints.push(width * F::from_usize_lossy(i));
        }
        merged.push(level);
    }
    (
        label,
        Policy::PiecewiseConstant {
            breakpoints,
            levels: merged,
        },
    )
}

fn feasible_run<F: Scalar>(scenario: &Scenario<F>, traj: &Trajectory<F>, horizon: F, terminal: bool) -> bool {
    let fin = traj.final_state();
    let reached = traj.completed() || (traj.exit_time().is_some() && fin.t >= horizon * (F::one() - F::lit(1e-9)));
    if !reached {
        return false;
    }
    let n_min = scenario.params.n_min;
    !terminal || (fin.n - n_min).abs() <= F::lit(TERMINAL_TOL) * n_min
}

fn evaluate<F: Scalar>(
    scenario: &Scenario<F>,
    econ: &EconomicModel<F>,
    policy: &Policy<F>,
    horizon: F,
    steps: usize,
    terminal: bool,
) -> Option<(F, Trajectory<F>)> {
    let traj = integrate(scenario, policy, horizon, horizon / F::from_usize_lossy(steps)).ok()?;
    if !feasible_run(scenario, &traj, horizon, terminal) {
        return None;
    }
    Some((objective(scenario, econ, &traj), traj))
}

/// Cumulative harvest at `marks` equally spaced times; larger early harvest means earlier cutting.
fn harvest_profile<F: Scalar>(scenario: &Scenario<F>, traj: &Trajectory<F>, horizon: F, marks: usize) -> Vec<F> {
    let n0 = scenario.initial.n;
    (1..=marks)
        .map(|j| {
            n0 - traj
                .state_at(scenario, horizon * F::from_usize_lossy(j) / F::from_usize_lossy(marks))
                .n
        })
        .collect()
}

fn compare_tol<F: Scalar>(a: F, b: F) -> Ordering {
    if (a - b).abs() <= F::lit(TIE_REL_TOL) * a.abs().max(b.abs()) {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

/// `Greater` when `a` should win over `b`; values within [`TIE_REL_TOL`]
/// fall through to the earlier cumulative harvest.
fn compare_finalists<F: Scalar>(a: &(F, Vec<F>), b: &(F, Vec<F>)) -> Ordering {
    compare_tol(a.0, b.0).then_with(|| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| compare_tol(*x, *y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

/// Exhaustive search over level assignments on equal intervals plus the
/// canonical strategies.
///
/// Candidates are screened at `horizon / coarse_steps`; the best
/// `finalists` and all canonical strategies are re-integrated at
/// `horizon / fine_steps` and the winner is taken among them. Equal values
/// (within [`TIE_REL_TOL`]) are broken toward the earlier cumulative
/// harvest, then toward the canonical strategies.
pub fn brute_force<F: Scalar>(
    scenario: &Scenario<F>,
    econ: &EconomicModel<F>,
    horizon: F,
    options: &SearchOptions<F>,
) -> Result<SearchResult<F>> {
    if options.intervals == 0 || options.intervals > MAX_INTERVALS {
        return Err(Error::Domain(format!(
            "intervals must lie in 1..={MAX_INTERVALS} (got {})",
            options.intervals
        )));
    }
    if options.levels.is_empty() {
        return Err(Error::Domain("level set is empty".into()));
    }
    let count = options
        .candidate_count()
        .filter(|&c| c <= MAX_CANDIDATES)
        .ok_or_else(|| {
            Error::Domain(format!(
                "{} levels on {} intervals exceed {MAX_CANDIDATES} candidates",
                options.levels.len(),
                options.intervals
            ))
        })?;
    let e_max = scenario.params.e_max;
    for level in &options.levels {
        if let Level::Rate(c) = level {
            if !(*c >= F::zero() && *c <= e_max) {
                return Err(Error::Domain(format!("level {c} outside [0, e_max = {e_max}]")));
            }
        }
    }

    let coarse: Vec<(String, Policy<F>, Option<F>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (label, policy) = enumerated_policy(i, horizon, options.intervals, &options.levels);
            let value = evaluate(scenario, econ, &policy, horizon, options.coarse_steps, options.terminal).map(|v| v.0);
            (label, policy, value)
        })
        .collect();
    let feasible = coarse.iter().filter(|c| c.2.is_some()).count();

    let mut ranked: Vec<usize> = (0..coarse.len()).filter(|&i| coarse[i].2.is_some()).collect();
    ranked.sort_by(|&a, &b| {
        coarse[b]
            .2
            .partial_cmp(&coarse[a].2)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked.truncate(options.finalists);

    let canon = canonical_candidates(scenario, horizon);
    let mut finalists: Vec<(String, Policy<F>)> = canon.clone();
    finalists.extend(ranked.iter().map(|&i| (coarse[i].0.clone(), coarse[i].1.clone())));

    let marks = options.intervals.max(16);
    let fine: Vec<Option<(F, Vec<F>)>> = finalists
        .par_iter()
        .map(|(_, policy)| {
            evaluate(scenario, econ, policy, horizon, options.fine_steps, options.terminal)
                .map(|(v, traj)| (v, harvest_profile(scenario, &traj, horizon, marks)))
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, cand) in fine.iter().enumerate() {
        let Some(cand) = cand else { continue };
        let better = match best {
            None => true,
            Some(b) => compare_finalists(cand, fine[b].as_ref().expect("best is feasible")) == Ordering::Greater,
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::NoFeasiblePolicy {
        candidates: count + canon.len(),
    })?;
    let best_value = fine[best].as_ref().expect("best is feasible").0;

    let canonical_values: BTreeMap<String, Option<F>> = canon
        .iter()
        .enumerate()
        .map(|(i, (label, _))| (label.clone(), fine[i].as_ref().map(|f| f.0)))
        .collect();
    let max_canonical = canonical_values
        .values()
        .flatten()
        .fold(F::neg_infinity(), |m, &v| m.max(v));
    let gap = if max_canonical.is_finite() {
        best_value - max_canonical
    } else {
        F::zero()
    };

    Ok(SearchResult {
        best_policy: finalists[best].1.clone(),
        best_label: finalists[best].0.clone(),
        best_value,
        canonical_values,
        condition_report: check_optimality_conditions(scenario, econ, horizon, options.terminal).ok(),
        gap,
        candidates_evaluated: count,
        feasible,
        candidate_values: options.keep_candidates.then(|| {
            coarse
                .iter()
                .map(|(label, _, v)| CandidateValue {
                    label: label.clone(),
                    value: *v,
                })
                .collect()
        }),
    })
}

/// Ordering of `E0` against the best late-cut strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Dominates,
    Dominated,
    Tie,
    Undetermined,
}

/// Values of the canonical strategies over one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalComparison<F> {
    pub horizon: F,
    pub values: BTreeMap<String, Option<F>>,
    /// `E0` against the better of `E_T` and `E^0`.
    pub early_cut: Dominance,
    /// `(E0 - best late) / |best late|`.
    pub relative_margin: Option<F>,
}

/// Relative difference under which two revenues are considered equal.
pub const TIE_REL_TOL: f64 = 1e-9;

pub fn compare_canonicals<F: Scalar>(
    scenario: &Scenario<F>,
    econ: &EconomicModel<F>,
    horizon: F,
) -> CanonicalComparison<F> {
    let values: BTreeMap<String, Option<F>> = canonical_candidates(scenario, horizon)
        .par_iter()
        .map(|(label, policy)| {
            (
                label.clone(),
                evaluate(scenario, econ, policy, horizon, DEFAULT_STEPS, false).map(|v| v.0),
            )
        })
        .collect();
    let e0 = values.get("E0").copied().flatten();
    let late = ["ET", "Esup"]
        .iter()
        .filter_map(|k| values.get(*k).copied().flatten())
        .fold(None, |m: Option<F>, v| Some(m.map_or(v, |m| m.max(v))));
    let (early_cut, relative_margin) = match (e0, late) {
        (Some(a), Some(b)) => {
            let margin = (a - b) / b.abs().max(F::min_positive_value());
            let d = if margin.abs() <= F::lit(TIE_REL_TOL) {
                Dominance::Tie
            } else if margin > F::zero() {
                Dominance::Dominates
            } else {
                Dominance::Dominated
            };
            (d, Some(margin))
        }
        _ => (Dominance::Undetermined, None),
    };
    CanonicalComparison {
        horizon,
        values,
        early_cut,
        relative_margin,
    }
}

/// Restriction of a policy to `[0, horizon]`, as an explicit piecewise plan.
pub fn restrict_policy<F: Scalar>(policy: &Policy<F>, e_max: F, horizon: F) -> Result<Policy<F>> {
    let schedule = policy.schedule(e_max)?;
    let mut breakpoints = Vec::new();
    let mut levels = Vec::new();
    for seg in &schedule.segments {
        levels.push(seg.level);
        if seg.end >= horizon {
            break;
        }
        breakpoints.push(seg.end);
    }
    Policy::piecewise(breakpoints, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DominantHeight, Environment, GrowthEnergy, GrowthFunction, StandParams, StandState};

    fn scenario(growth: GrowthFunction<f64>) -> Scenario<f64> {
        Scenario::new(
            StandParams::new(1.6, 0.011, 400.0, 100.0, 200.0).unwrap(),
            growth,
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
    fn enumeration_covers_every_assignment() {
        let levels = standard_levels(100.0);
        let mut labels: Vec<String> = (0..27).map(|i| enumerated_policy(i, 30.0, 3, &levels).0).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 27);
        let (label, all_max) = enumerated_policy(13, 30.0, 3, &levels);
        assert_eq!(label, "pw[100,100,100]");
        assert_eq!(all_max.schedule(100.0).unwrap(), Policy::Max.schedule(100.0).unwrap());
    }

    #[test]
    fn two_candidates_for_one_interval() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let econ = EconomicModel::new(1.0, 1.2, 0.0).unwrap();
        let opts = SearchOptions::new(1, vec![Level::Rate(0.0), Level::Rate(100.0)]);
        let res = brute_force(&sc, &econ, 5.0, &opts).unwrap();
        assert_eq!(res.candidates_evaluated, 2);
    }

    #[test]
    fn rejects_oversized_searches() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let econ = EconomicModel::new(1.0, 1.2, 0.0).unwrap();
        let opts = SearchOptions::new(11, standard_levels(100.0));
        assert!(brute_force(&sc, &econ, 5.0, &opts).is_err());
        let opts = SearchOptions::new(7, fine_levels(100.0));
        assert!(brute_force(&sc, &econ, 5.0, &opts).is_err());
    }

    #[test]
    fn best_value_bounds_canonicals() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let econ = EconomicModel::new(1.0, 2.0, 0.02).unwrap();
        let h = 20.0;
        let res = brute_force(&sc, &econ, h, &SearchOptions::new(4, standard_levels(100.0))).unwrap();
        for v in res.canonical_values.values().flatten() {
            assert!(res.best_value >= *v - 1e-9 * v.abs());
        }
        assert!(res.gap >= 0.0);
    }

    #[test]
    fn larger_level_set_never_loses() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let econ = EconomicModel::new(1.0, 2.0, 0.02).unwrap();
        let h = 20.0;
        let small = brute_force(
            &sc,
            &econ,
            h,
            &SearchOptions::new(3, vec![Level::Rate(0.0), Level::Rate(100.0)]),
        )
        .unwrap();
        let large = brute_force(&sc, &econ, h, &SearchOptions::new(3, standard_levels(100.0))).unwrap();
        assert!(large.best_value >= small.best_value * (1.0 - 1e-12));
    }

    #[test]
    fn alpha_thresholds() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let h = 20.0;
        let early = check_optimality_conditions(&sc, &EconomicModel::new(1.0, 12.0, 0.0).unwrap(), h, false).unwrap();
        let a_star = early.alpha_star.unwrap();
        assert!(a_star > 1.0);
        let b = b_star(&sc).unwrap().b_star;
        assert!((a_star - (1.0 + (b - 0.8) * 0.7)).abs() < 1e-12);
        assert!((early.alpha_ceiling - (1.0 - 0.8 * 0.7) / 0.3).abs() < 1e-12);
        let mid = EconomicModel::new(1.0, 0.5 * (a_star + early.alpha_ceiling), 0.0).unwrap();
        assert_eq!(
            check_optimality_conditions(&sc, &mid, h, false).unwrap().branch,
            OptimalityBranch::None
        );
    }

    #[test]
    fn restriction_keeps_prefix() {
        let p = Policy::piecewise(
            vec![5.0, 10.0, 15.0],
            vec![Level::Rate(100.0), Level::Hold, Level::Rate(0.0), Level::Hold],
        )
        .unwrap();
        let r = restrict_policy(&p, 100.0, 10.0).unwrap();
        assert_eq!(
            r,
            Policy::piecewise(vec![5.0], vec![Level::Rate(100.0), Level::Hold]).unwrap()
        );
    }

    fn regime_horizon(sc: &Scenario<f64>) -> f64 {
        0.5 * extremal_times(sc).lower.time().unwrap()
    }

    #[test]
    fn convex_price_selects_early_cut() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let h = regime_horizon(&sc);
        let probe = check_optimality_conditions(&sc, &EconomicModel::new(1.0, 1.0, 0.0).unwrap(), h, false).unwrap();
        let econ = EconomicModel::new(1.0, probe.alpha_star.unwrap() + 0.5, 0.0).unwrap();
        let report = check_optimality_conditions(&sc, &econ, h, false).unwrap();
        assert!(report.hypotheses_hold && report.within_upper_time);
        assert_eq!(report.branch, OptimalityBranch::E0Optimal);
        let res = brute_force(&sc, &econ, h, &SearchOptions::new(6, standard_levels(100.0))).unwrap();
        assert_eq!(res.best_label, "E0");
    }

    #[test]
    fn weakly_convex_price_selects_late_cut() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let h = regime_horizon(&sc);
        let econ = EconomicModel::new(1.0, 1.2, 0.0).unwrap();
        assert_eq!(
            check_optimality_conditions(&sc, &econ, h, false).unwrap().branch,
            OptimalityBranch::EsupOptimal
        );
        assert_eq!(
            check_optimality_conditions(&sc, &econ, h, true).unwrap().branch,
            OptimalityBranch::EtOptimal
        );
        let res = brute_force(&sc, &econ, h, &SearchOptions::new(6, standard_levels(100.0))).unwrap();
        assert_eq!(res.best_label, "Esup");
    }

    #[test]
    fn heavy_discount_voids_conditions() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let econ = EconomicModel::new(1.0, 1.2, 2.0).unwrap();
        let report = check_optimality_conditions(&sc, &econ, regime_horizon(&sc), false).unwrap();
        assert!(report.late_discount_margin < 0.0);
        assert_eq!(report.branch, OptimalityBranch::None);
    }

    #[test]
    fn canonical_comparison_flags_early_cut() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let h = regime_horizon(&sc);
        let cmp = compare_canonicals(&sc, &EconomicModel::new(1.0, 12.0, 0.0).unwrap(), h);
        assert_eq!(cmp.early_cut, Dominance::Dominates);
        let cmp = compare_canonicals(&sc, &EconomicModel::new(1.0, 1.2, 0.0).unwrap(), h);
        assert_eq!(cmp.early_cut, Dominance::Dominated);
    }
}
