//! Hypothesis checks, growth-elasticity thresholds and sampled envelope audits.
//!
//! The audits compare an integrated trajectory against the reference
//! trajectories `E0` (lower envelope, `n_0`, `s_0`), `E^0` (upper envelope,
//! `n^0`, `s^0`) and, for runs ending at the minimum count, `E_T`. All
//! comparisons are made at shared lattice points so that identical control
//! prefixes yield bit-identical states.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    growth_rate, integrate, integrate_with, CanonicalKind, IntegrateOptions, Level, Policy, Sample, Trajectory,
    DEFAULT_STEPS,
};
use crate::error::{Error, Result};
use crate::model::{GrowthKind, Scenario};
use crate::scalar::Scalar;
use crate::trajectories::{build_policy, extremal_times, t_cap0};

/// Relative tolerance of every sampled inequality.
pub const AUDIT_REL_TOL: f64 = 1e-6;
/// Number of grid points of the hypothesis checks.
pub const CHECK_GRID_POINTS: usize = 1024;
/// Elasticity bound above which the reversed-product threshold is undefined.
pub const GAMMA_UPPER_LIMIT: f64 = 1.0 - 1e-9;
/// Number of stored points of the relative-growth floor.
const XI_SERIES_POINTS: usize = 64;
/// Violations kept verbatim in a report; further ones are only counted.
const MAX_STORED_VIOLATIONS: usize = 256;

fn grid<F: Scalar>(a: F, b: F, points: usize) -> impl Iterator<Item = F> {
    let last = F::from_usize_lossy(points - 1);
    (0..points).map(move |i| a + (b - a) * F::from_usize_lossy(i) / last)
}

/// Outcome of one modeling hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFlag<F> {
    /// `energy_shape`, `competition_shape`, `boundary_feasible` or `elasticity_floor`.
    pub name: String,
    pub pass: bool,
    /// Time or density at which the check is tightest or fails.
    pub witness: Option<F>,
    pub detail: String,
}

/// Sampled feasibility of the boundary rate along a size lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFeasibility<F> {
    pub pass: bool,
    /// `min_t (e_max - (q/2) V(t) / s_m(t))`.
    pub margin: F,
    pub worst_t: F,
}

/// Checks `(q/2) V(t) / s_m(t) < e_max` on a uniform grid over `[0, t_star]`.
pub fn check_h3<F: Scalar>(scenario: &Scenario<F>, s_m: impl Fn(F) -> F) -> BoundaryFeasibility<F> {
    let p = &scenario.params;
    let (margin, worst_t) = grid(F::zero(), p.t_star, CHECK_GRID_POINTS)
        .map(|t| (p.e_max - p.half_q() * scenario.env.v_at(t) / s_m(t), t))
        .fold(
            (F::infinity(), F::zero()),
            |acc, cur| if cur.0 < acc.0 { cur } else { acc },
        );
    BoundaryFeasibility {
        pass: margin > F::zero(),
        margin,
        worst_t,
    }
}

/// Basal-area path of `E^0`, the smallest size any policy can produce.
/// Falls back to the constant `s(0)` when `E^0` cannot be integrated.
pub fn minimal_size_path<F: Scalar>(scenario: &Scenario<F>) -> impl Fn(F) -> F + '_ {
    let t_star = scenario.params.t_star;
    let traj = build_policy(scenario, CanonicalKind::Esup)
        .and_then(|esup| integrate(scenario, &esup, t_star, t_star / F::from_usize_lossy(DEFAULT_STEPS)))
        .ok();
    let s0 = scenario.initial.s;
    move |t| match &traj {
        Some(traj) => traj.state_at(scenario, t).s.max(s0),
        None => s0,
    }
}

/// Checks every modeling hypothesis on sampling grids.
pub fn check_hypotheses<F: Scalar>(scenario: &Scenario<F>) -> Vec<HypothesisFlag<F>> {
    vec![
        check_energy_shape(scenario),
        check_competition_shape(scenario),
        {
            let h3 = check_h3(scenario, minimal_size_path(scenario));
            HypothesisFlag {
                name: "boundary_feasible".into(),
                pass: h3.pass,
                witness: Some(h3.worst_t),
                detail: format!("min margin e_max - e_r(s_m(t), t) = {}", h3.margin),
            }
        },
        {
            let gl = scenario.growth.gamma_lower;
            HypothesisFlag {
                name: "elasticity_floor".into(),
                pass: gl > F::zero(),
                witness: None,
                detail: format!("gamma_lower = {gl}"),
            }
        },
    ]
}

fn check_energy_shape<F: Scalar>(scenario: &Scenario<F>) -> HypothesisFlag<F> {
    let v = |t: F| scenario.env.v_at(t);
    let ts: Vec<F> = grid(F::zero(), scenario.params.t_star, CHECK_GRID_POINTS).collect();
    let rel = F::lit(1e-12);
    let fail = |witness: F, detail: String| HypothesisFlag {
        name: "energy_shape".into(),
        pass: false,
        witness: Some(witness),
        detail,
    };
    for (i, &t) in ts.iter().enumerate() {
        if !(v(t) > F::zero()) {
            return fail(t, format!("V({t}) = {} is not positive", v(t)));
        }
        if i + 1 < ts.len() && v(ts[i + 1]) > v(t) * (F::one() + rel) {
            return fail(t, "V increases".into());
        }
        if i > 0 && i + 1 < ts.len() {
            let chord = (v(ts[i - 1]) + v(ts[i + 1])) * F::half();
            if v(t) > chord * (F::one() + rel) {
                return fail(t, "V is not convex".into());
            }
        }
    }
    HypothesisFlag {
        name: "energy_shape".into(),
        pass: true,
        witness: None,
        detail: "V positive, non-increasing and convex on the sampling grid".into(),
    }
}

fn check_competition_shape<F: Scalar>(scenario: &Scenario<F>) -> HypothesisFlag<F> {
    let g = &scenario.growth;
    let tol = F::lit(1e-12);
    let strict = !matches!(g.kind, GrowthKind::Linear | GrowthKind::Power { .. })
        || g.power_theta().is_some_and(|th| th > F::zero());
    let fail = |witness: F, detail: &str| HypothesisFlag {
        name: "competition_shape".into(),
        pass: false,
        witness: Some(witness),
        detail: detail.into(),
    };
    if g.value(F::zero()).abs() > tol || (g.value(F::one()) - F::one()).abs() > tol {
        return fail(F::zero(), "g(0) = 0 and g(1) = 1 required");
    }
    let rs: Vec<F> = grid(F::zero(), F::one(), CHECK_GRID_POINTS).collect();
    for i in 1..rs.len() - 1 {
        let (a, r, b) = (rs[i - 1], rs[i], rs[i + 1]);
        if !(g.value(b) > g.value(r)) {
            return fail(r, "g is not increasing");
        }
        if g.value(r) < (g.value(a) + g.value(b)) * F::half() - tol {
            return fail(r, "g is not concave");
        }
        let above = if strict { g.value(r) > r } else { g.value(r) >= r - tol };
        if !above {
            return fail(r, "g(r) > r fails");
        }
    }
    HypothesisFlag {
        name: "competition_shape".into(),
        pass: true,
        witness: None,
        detail: "g increasing, concave, above the diagonal".into(),
    }
}

/// Exponent threshold above which `n s^b` is ordered opposite to the count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BStar<F> {
    pub b_star: F,
    pub a_star: F,
    /// `q/2`.
    pub c: F,
    /// `1 / g(r(n_min, s(0)))`.
    pub g_inv: F,
    pub gamma_lower: F,
    pub gamma_upper: F,
}

impl<F: Scalar> BStar<F> {
    /// Exponent bound making the count derivative negative, increasing in `a`.
    pub fn b1(&self, a: F) -> F {
        self.c * (F::one() - a) / (F::one() - a - self.gamma_upper) * self.g_inv
    }

    /// Exponent bound making the size derivative positive, decreasing in `a`.
    pub fn b2(&self, a: F) -> F {
        self.c * self.g_inv + (F::one() - self.c * self.gamma_lower) / a
    }
}

/// Threshold `b_*` together with the optimizing `a_*`.
pub fn b_star<F: Scalar>(scenario: &Scenario<F>) -> Result<BStar<F>> {
    let g = &scenario.growth;
    let (gl, gu) = (g.gamma_lower, g.gamma_upper);
    if gu >= F::lit(GAMMA_UPPER_LIMIT) {
        return Err(Error::Undefined(format!("b_* needs gamma_upper < 1 (got {gu})")));
    }
    let p = &scenario.params;
    let c = p.half_q();
    let r_floor = p.rdi_unchecked(p.n_min, scenario.initial.s);
    let g_inv = F::one() / g.value(r_floor);
    let b_star = (F::one() + c * (g_inv - gl)) / (F::one() - gu);
    let a_star = (F::one() - gu) * (F::one() - c * gl) / (F::one() + c * (gu * g_inv - gl));
    Ok(BStar {
        b_star,
        a_star,
        c,
        g_inv,
        gamma_lower: gl,
        gamma_upper: gu,
    })
}

/// Upper limit `(1 - (q/2) gamma_upper) / (1 - gamma_lower)` of exponents `b`
/// for which `n s^b` is ordered like the count; infinite when `gamma_lower = 1`.
pub fn product_threshold<F: Scalar>(scenario: &Scenario<F>) -> F {
    let g = &scenario.growth;
    let den = F::one() - g.gamma_lower;
    if den <= F::zero() {
        F::infinity()
    } else {
        (F::one() - scenario.params.half_q() * g.gamma_upper) / den
    }
}

/// Reference trajectories integrated on a common lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEnvelopes<F> {
    pub horizon: F,
    pub step: F,
    /// `E0`: smallest count, largest size.
    pub lower: Trajectory<F>,
    /// `E^0`: largest count, smallest size.
    pub upper: Trajectory<F>,
    /// `E_T` for `T = horizon`, when defined.
    pub terminal: Option<Trajectory<F>>,
}

impl<F: Scalar> ReferenceEnvelopes<F> {
    pub fn new(scenario: &Scenario<F>, horizon: F, step: F) -> Result<Self> {
        let run = |kind| build_policy(scenario, kind).and_then(|p| integrate(scenario, &p, horizon, step));
        Ok(Self {
            horizon,
            step,
            lower: run(CanonicalKind::E0)?,
            upper: run(CanonicalKind::Esup)?,
            terminal: run(CanonicalKind::Et { horizon }).ok(),
        })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round().to_usize().unwrap_or(0)
    }
}

fn xi_floor<F: Scalar>(scenario: &Scenario<F>, up: &Sample<F>, lo_s: F) -> F {
    let c = scenario.params.half_q();
    let s_up = up.state.s;
    let ds_up = growth_rate(scenario, up.state.t, s_up, up.state.n);
    let cap = match scenario.growth.power_theta() {
        Some(_) => lo_s,
        None => scenario.params.s_bar(),
    };
    ds_up / (s_up.powf(c) * cap.powf(F::one() - c))
}

/// Lower bound `xi_m(t)` of the relative basal-area growth `s'(t) / s(t)`.
///
/// Uses `s^0` and its derivative, and `s_0` for power growth or `s_bar` otherwise.
pub fn xi_m<F: Scalar>(scenario: &Scenario<F>, refs: &ReferenceEnvelopes<F>, t: F) -> F {
    let up = refs.upper.state_at(scenario, t);
    let lo_s = refs.lower.state_at(scenario, t).s;
    let sample = Sample {
        state: up,
        e: F::zero(),
        r: F::zero(),
        drdt: F::zero(),
        dsdt: F::zero(),
        lattice: None,
    };
    xi_floor(scenario, &sample, lo_s)
}

/// Exponents used by the product checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions<F> {
    pub tol: F,
    /// Exponents below [`product_threshold`].
    pub product_exponents: Vec<F>,
    /// Exponents above `b_*`.
    pub reversed_exponents: Vec<F>,
}

impl<F: Scalar> AuditOptions<F> {
    /// `q/2` and half the threshold for the direct products; `1.5 b_*` for
    /// the reversed one when `b_*` is defined.
    pub fn for_scenario(scenario: &Scenario<F>) -> Self {
        let c = scenario.params.half_q();
        let limit = product_threshold(scenario);
        let mut product_exponents = Vec::new();
        if c < limit {
            product_exponents.push(c);
        }
        let mid = if limit.is_finite() { limit * F::half() } else { F::one() };
        if (mid - c).abs() > F::lit(1e-9) {
            product_exponents.push(mid);
        }
        let reversed_exponents = b_star(scenario)
            .map(|b| vec![b.b_star * F::lit(1.5)])
            .unwrap_or_default();
        Self {
            tol: F::lit(AUDIT_REL_TOL),
            product_exponents,
            reversed_exponents,
        }
    }
}

/// A sampled inequality `lhs <= rhs` that failed beyond tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation<F> {
    pub policy: Option<usize>,
    pub t: F,
    pub quantity: String,
    pub lhs: F,
    pub rhs: F,
}

/// Counts for one family of sampled inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckTally {
    pub checked: usize,
    pub violations: usize,
    /// Largest `ln(lhs / rhs)` seen (or `lhs - rhs` for logarithmic quantities).
    pub worst_excess: f64,
}

/// Result of an envelope audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<F> {
    pub hypothesis_flags: Vec<HypothesisFlag<F>>,
    pub b_star: Option<F>,
    pub a_star: Option<F>,
    pub product_threshold: F,
    /// `(t, xi_m(t))` on a coarse subset of the lattice.
    pub xi_m: Vec<(F, F)>,
    pub checks: BTreeMap<String, CheckTally>,
    /// First violations found; `violation_count` has the total.
    pub envelope_violations: Vec<Violation<F>>,
    pub violation_count: usize,
    pub policies_audited: usize,
}

impl<F: Scalar> BoundReport<F> {
    fn empty(scenario: &Scenario<F>, refs: &ReferenceEnvelopes<F>) -> Self {
        let bs = b_star(scenario).ok();
        let steps = refs.steps();
        let xi_m = (0..=XI_SERIES_POINTS)
            .filter_map(|i| {
                let k = i * steps / XI_SERIES_POINTS;
                let up = refs.upper.lattice_sample(k)?;
                let lo = refs.lower.lattice_sample(k)?;
                Some((up.state.t, xi_floor(scenario, up, lo.state.s)))
            })
            .collect();
        Self {
            hypothesis_flags: check_hypotheses(scenario),
            b_star: bs.map(|b| b.b_star),
            a_star: bs.map(|b| b.a_star),
            product_threshold: product_threshold(scenario),
            xi_m,
            checks: BTreeMap::new(),
            envelope_violations: Vec::new(),
            violation_count: 0,
            policies_audited: 0,
        }
    }

    /// `true` when no sampled inequality failed.
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    /// Violations summed over the checks whose name starts with `prefix`.
    pub fn violations_in(&self, prefix: &str) -> usize {
        self.checks
            .iter()
            .filter(|(name, _)| name.starts_with(prefix))
            .map(|(_, t)| t.violations)
            .sum()
    }

    /// Checks performed over the names starting with `prefix`.
    pub fn checked_in(&self, prefix: &str) -> usize {
        self.checks
            .iter()
            .filter(|(name, _)| name.starts_with(prefix))
            .map(|(_, t)| t.checked)
            .sum()
    }

    fn absorb(&mut self, part: Tally<F>) {
        for (name, t) in part.checks {
            let entry = self.checks.entry(name).or_default();
            entry.checked += t.checked;
            entry.violations += t.violations;
            entry.worst_excess = entry.worst_excess.max(t.worst_excess);
        }
        self.violation_count += part.violation_count;
        for v in part.violations {
            if self.envelope_violations.len() < MAX_STORED_VIOLATIONS {
                self.envelope_violations.push(v);
            }
        }
        self.policies_audited += 1;
    }
}

struct Tally<F> {
    tol_ln: F,
    policy: Option<usize>,
    checks: BTreeMap<String, CheckTally>,
    violations: Vec<Violation<F>>,
    violation_count: usize,
}

impl<F: Scalar> Tally<F> {
    fn new(tol: F, policy: Option<usize>) -> Self {
        Self {
            tol_ln: tol.ln_1p(),
            policy,
            checks: BTreeMap::new(),
            violations: Vec::new(),
            violation_count: 0,
        }
    }

    /// `lhs <= rhs` for positive quantities, in relative terms.
    fn le(&mut self, name: &str, t: F, lhs: F, rhs: F) {
        self.record(name, t, lhs.ln() - rhs.ln(), lhs, rhs);
    }

    /// `lhs <= rhs` for quantities that are already logarithms.
    fn le_log(&mut self, name: &str, t: F, lhs: F, rhs: F) {
        self.record(name, t, lhs - rhs, lhs, rhs);
    }

    fn record(&mut self, name: &str, t: F, excess: F, lhs: F, rhs: F) {
        let entry = match self.checks.get_mut(name) {
            Some(e) => e,
            None => self.checks.entry(name.to_string()).or_insert(CheckTally {
                worst_excess: f64::NEG_INFINITY,
                ..CheckTally::default()
            }),
        };
        entry.checked += 1;
        entry.worst_excess = entry.worst_excess.max(excess.as_f64());
        if !(excess <= self.tol_ln) {
            entry.violations += 1;
            self.violation_count += 1;
            if self.violations.len() < MAX_STORED_VIOLATIONS {
                self.violations.push(Violation {
                    policy: self.policy,
                    t,
                    quantity: name.to_string(),
                    lhs,
                    rhs,
                });
            }
        }
    }
}

fn crowding<F: Scalar>(scenario: &Scenario<F>, s: &Sample<F>) -> F {
    scenario.growth.value(s.r.min(F::one())) / s.state.n
}

fn log_product<F: Scalar>(s: &Sample<F>, b: F) -> F {
    s.state.n.ln() + b * s.state.s.ln()
}

fn audit_into<F: Scalar>(
    scenario: &Scenario<F>,
    refs: &ReferenceEnvelopes<F>,
    traj: &Trajectory<F>,
    opts: &AuditOptions<F>,
    tally: &mut Tally<F>,
) {
    let power = scenario.growth.power_theta().is_some();
    let n_min = scenario.params.n_min;
    let fin = traj.final_state();
    let ends_at_min = traj.completed() && (fin.n - n_min).abs() <= F::lit(AUDIT_REL_TOL) * n_min;
    let terminal = if ends_at_min { refs.terminal.as_ref() } else { None };

    for k in 0..=refs.steps() {
        let (Some(x), Some(lo), Some(up)) = (
            traj.lattice_sample(k),
            refs.lower.lattice_sample(k),
            refs.upper.lattice_sample(k),
        ) else {
            continue;
        };
        let t = x.state.t;
        tally.le("count_lower_envelope", t, lo.state.n, x.state.n);
        tally.le("count_upper_envelope", t, x.state.n, up.state.n);
        tally.le("size_lower_envelope", t, up.state.s, x.state.s);
        if power {
            tally.le("size_upper_envelope", t, x.state.s, lo.state.s);
        }
        if let Some(term) = terminal.and_then(|tr| tr.lattice_sample(k)) {
            tally.le("terminal_count_envelope", t, x.state.n, term.state.n);
            if power {
                // fewer trees than E_T at all times means at least its size
                tally.le("terminal_size_envelope", t, term.state.s, x.state.s);
            }
        }

        let cx = crowding(scenario, x);
        tally.le("crowding_lower", t, crowding(scenario, up), cx);
        if power {
            tally.le("crowding_upper", t, cx, crowding(scenario, lo));
        }
        for &b in &opts.product_exponents {
            let px = log_product(x, b);
            if power {
                tally.le_log(&format!("product_lower[b={}]", b.as_f64()), t, log_product(lo, b), px);
            }
            tally.le_log(&format!("product_upper[b={}]", b.as_f64()), t, px, log_product(up, b));
        }
        for &b in &opts.reversed_exponents {
            let px = log_product(x, b);
            tally.le_log(
                &format!("reversed_product_lower[b={}]", b.as_f64()),
                t,
                log_product(up, b),
                px,
            );
            if power {
                tally.le_log(
                    &format!("reversed_product_upper[b={}]", b.as_f64()),
                    t,
                    px,
                    log_product(lo, b),
                );
            }
        }
        let xi = growth_rate(scenario, t, x.state.s, x.state.n) / x.state.s;
        tally.le("relative_growth", t, xi_floor(scenario, up, lo.state.s), xi);
    }

    for w in traj.samples.windows(2) {
        tally.le(
            "crowding_monotone",
            w[1].state.t,
            crowding(scenario, &w[0]),
            crowding(scenario, &w[1]),
        );
    }
}

/// Audits one trajectory integrated on the lattice of `refs`.
pub fn audit_trajectory<F: Scalar>(
    scenario: &Scenario<F>,
    refs: &ReferenceEnvelopes<F>,
    traj: &Trajectory<F>,
    opts: &AuditOptions<F>,
) -> BoundReport<F> {
    let mut report = BoundReport::empty(scenario, refs);
    let mut tally = Tally::new(opts.tol, None);
    audit_into(scenario, refs, traj, opts, &mut tally);
    report.absorb(tally);
    report
}

/// Horizon used for audits: just below the earliest exit time, or `t_star`.
pub fn audit_horizon<F: Scalar>(scenario: &Scenario<F>) -> F {
    let t_star = scenario.params.t_star;
    let lower = extremal_times(scenario).lower.time().unwrap_or(t_star);
    let upper = t_cap0(scenario).unwrap_or(t_star);
    (F::lit(0.95) * lower.min(upper)).min(t_star)
}

/// Random piecewise-constant thinning plan with up to eight segments.
///
/// Levels are drawn among no thinning, full rate, boundary hold and a
/// uniform intermediate rate; consecutive equal levels are merged.
pub fn random_policy<F: Scalar, R: Rng>(rng: &mut R, horizon: F, e_max: F) -> Policy<F> {
    let k: usize = rng.random_range(1..=8);
    let mut cuts: Vec<f64> = (1..k).map(|_| rng.random_range(0.02..0.98)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();
    let mut breakpoints: Vec<F> = Vec::new();
    let mut levels: Vec<Level<F>> = Vec::new();
    for i in 0..=cuts.len() {
        let u: f64 = rng.random();
        let level = if u < 0.25 {
            Level::Rate(e_max)
        } else if u < 0.45 {
            Level::Rate(F::zero())
        } else if u < 0.75 {
            Level::Hold
        } else {
            Level::Rate(e_max * F::lit(rng.random::<f64>()))
        };
        if levels.last() == Some(&level) {
            continue;
        }
        if i > 0 {
            breakpoints.push(horizon * F::lit(cuts[i - 1]));
        }
        levels.push(level);
    }
    Policy::PiecewiseConstant { breakpoints, levels }
}

/// Draws random policies (deterministically from `seed`) until `count` of
/// them stay inside the validity domain over `[0, horizon]`.
pub fn random_admissible_policies<F: Scalar>(
    scenario: &Scenario<F>,
    horizon: F,
    options: &IntegrateOptions<F>,
    count: usize,
    seed: u64,
) -> Result<Vec<(Policy<F>, Trajectory<F>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(count);
    let max_draws = 200 * count.max(1);
    let mut drawn = 0;
    while kept.len() < count && drawn < max_draws {
        let batch: Vec<Policy<F>> = (0..(2 * count).max(8))
            .map(|_| random_policy(&mut rng, horizon, scenario.params.e_max))
            .collect();
        drawn += batch.len();
        let runs: Vec<Option<Trajectory<F>>> = batch
            .par_iter()
            .map(|p| integrate_with(scenario, p, horizon, options).ok())
            .collect();
        for (policy, traj) in batch.into_iter().zip(runs) {
            if let Some(traj) = traj {
                if !traj.violated_density() && kept.len() < count {
                    kept.push((policy, traj));
                }
            }
        }
    }
    if kept.len() < count {
        return Err(Error::NoFeasiblePolicy { candidates: drawn });
    }
    Ok(kept)
}

/// Audits `count` random admissible policies over `horizon`.
///
/// `growth_fault` multiplies every basal-area increment of the audited
/// trajectories (not of the references); `1` means a correct integrator.
pub fn audit_random_policies<F: Scalar>(
    scenario: &Scenario<F>,
    horizon: F,
    count: usize,
    seed: u64,
    opts: &AuditOptions<F>,
    growth_fault: F,
) -> Result<BoundReport<F>> {
    let step = horizon / F::from_usize_lossy(DEFAULT_STEPS);
    let refs = ReferenceEnvelopes::new(scenario, horizon, step)?;
    let options = IntegrateOptions { step, growth_fault };
    let runs = random_admissible_policies(scenario, horizon, &options, count, seed)?;
    let tallies: Vec<Tally<F>> = runs
        .par_iter()
        .enumerate()
        .map(|(i, (_, traj))| {
            let mut tally = Tally::new(opts.tol, Some(i));
            audit_into(scenario, &refs, traj, opts, &mut tally);
            tally
        })
        .collect();
    let mut report = BoundReport::empty(scenario, &refs);
    for tally in tallies {
        report.absorb(tally);
    }
    Ok(report)
}
