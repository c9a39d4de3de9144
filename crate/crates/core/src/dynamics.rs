//! Controlled stand dynamics.
//!
//! The state `(s, n)` evolves as
//!
//! ```text
//! ds/dt = g(r(n, s)) V(t) / n
//! dn/dt = -e(t)
//! ```
//!
//! under `0 <= e <= e_max`, `n >= n_min` and `r(n, s) <= 1`. Integration is
//! classic fixed-step RK4 on a uniform time lattice. Steps are shortened at
//! policy breakpoints and at events (density index reaching one, tree count
//! reaching its minimum), which are localized by bisection. While a policy
//! holds the stand on the boundary `r = 1` the control is the boundary rate
//! `(q/2) V(t) / s` and the basal area is projected back onto `r = 1` after
//! every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{boundary_rate, Scenario, StandState};
use crate::numerics::{bisect, TIME_TOL};
use crate::scalar::Scalar;

/// Default number of lattice steps over a horizon.
pub const DEFAULT_STEPS: usize = 4096;
/// Relative tolerance under which `r = 1` and `n = n_min` count as simultaneous.
pub const EXIT_TIE_TOL: f64 = 1e-7;
/// Relative slack on `e_max` before the boundary arc is declared infeasible.
const BOUNDARY_SLACK: f64 = 1e-12;
/// Fraction of a lattice step under which two times are identified.
const SNAP_FRACTION: f64 = 1e-6;

/// Thinning level applied on a policy segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level<F> {
    /// Constant thinning rate.
    Rate(F),
    /// No thinning while `r < 1`, then the boundary rate that keeps `r = 1`.
    Hold,
}

/// Level in force until `end` (exclusive). The last segment has `end = +inf`,
/// written as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Segment<F> {
    #[serde(with = "open_end")]
    pub end: F,
    pub level: Level<F>,
}

mod open_end {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<F: Scalar, S: Serializer>(end: &F, serializer: S) -> Result<S::Ok, S::Error> {
        if end.is_infinite() && *end > F::zero() {
            serializer.serialize_none()
        } else {
            serializer.serialize_some(&end.as_f64())
        }
    }

    pub fn deserialize<'de, F: Scalar, D: Deserializer<'de>>(deserializer: D) -> Result<F, D::Error> {
        Ok(Option::<f64>::deserialize(deserializer)?.map_or(F::infinity(), F::lit))
    }
}

/// Right-continuous piecewise thinning plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Schedule<F> {
    pub segments: Vec<Segment<F>>,
}

impl<F: Scalar> Schedule<F> {
    pub fn constant(level: Level<F>) -> Self {
        Self {
            segments: vec![Segment {
                end: F::infinity(),
                level,
            }],
        }
    }

    /// Builds a plan from interior switch times and one level per segment.
    pub fn from_breakpoints(breakpoints: &[F], levels: &[Level<F>]) -> Result<Self> {
        if levels.is_empty() || breakpoints.len() + 1 != levels.len() {
            return Err(Error::Domain(format!(
                "piecewise policy needs one more level than breakpoints (got {} breakpoints, {} levels)",
                breakpoints.len(),
                levels.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain("breakpoints must be strictly increasing".into()));
            }
        }
        if breakpoints.iter().any(|b| !(b.is_finite() && *b > F::zero())) {
            return Err(Error::Domain("breakpoints must be finite and positive".into()));
        }
        let segments = levels
            .iter()
            .enumerate()
            .map(|(i, &level)| Segment {
                end: breakpoints.get(i).copied().unwrap_or_else(F::infinity),
                level,
            })
            .collect();
        Ok(Self { segments })
    }

    pub fn level_at(&self, t: F) -> Level<F> {
        self.segments
            .iter()
            .find(|seg| t < seg.end)
            .or(self.segments.last())
            .map(|seg| seg.level)
            .expect("schedule has at least one segment")
    }

    fn validate(&self, e_max: F) -> Result<()> {
        for seg in &self.segments {
            if let Level::Rate(c) = seg.level {
                if !(c >= F::zero() && c <= e_max) {
                    return Err(Error::Domain(format!(
                        "thinning level {c} outside [0, e_max = {e_max}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Canonical thinning strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalKind<F> {
    /// Thin at the maximum rate down to the minimum count, then stop.
    E0,
    /// Reach the minimum count exactly at `horizon`, thinning as late as possible.
    Et { horizon: F },
    /// Grow freely, then ride the boundary `r = 1` down to the minimum count.
    Esup,
}

impl<F: Scalar> CanonicalKind<F> {
    pub fn label(&self) -> &'static str {
        match self {
            CanonicalKind::E0 => "E0",
            CanonicalKind::Et { .. } => "ET",
            CanonicalKind::Esup => "Esup",
        }
    }
}

/// Thinning control `e(.)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", bound = "F: Scalar")]
pub enum Policy<F> {
    Zero,
    Max,
    /// Canonical strategy resolved into an explicit schedule for a scenario.
    Canonical {
        kind: CanonicalKind<F>,
        schedule: Schedule<F>,
    },
    PiecewiseConstant {
        breakpoints: Vec<F>,
        levels: Vec<Level<F>>,
    },
    BoundaryHold,
}

impl<F: Scalar> Policy<F> {
    pub fn piecewise(breakpoints: Vec<F>, levels: Vec<Level<F>>) -> Result<Self> {
        Schedule::from_breakpoints(&breakpoints, &levels)?;
        for level in &levels {
            if let Level::Rate(c) = level {
                if !(*c >= F::zero()) {
                    return Err(Error::Domain(format!("negative thinning level {c}")));
                }
            }
        }
        Ok(Policy::PiecewiseConstant { breakpoints, levels })
    }

    /// Equal-length intervals over `[0, horizon)`, one level each.
    pub fn equal_intervals(horizon: F, levels: Vec<Level<F>>) -> Result<Self> {
        let k = levels.len();
        let breakpoints = (1..k)
            .map(|i| horizon * F::from_usize_lossy(i) / F::from_usize_lossy(k))
            .collect();
        Self::piecewise(breakpoints, levels)
    }

    pub fn schedule(&self, e_max: F) -> Result<Schedule<F>> {
        let schedule = match self {
            Policy::Zero => Schedule::constant(Level::Rate(F::zero())),
            Policy::Max => Schedule::constant(Level::Rate(e_max)),
            Policy::BoundaryHold => Schedule::constant(Level::Hold),
            Policy::Canonical { schedule, .. } => schedule.clone(),
            Policy::PiecewiseConstant { breakpoints, levels } => Schedule::from_breakpoints(breakpoints, levels)?,
        };
        schedule.validate(e_max)?;
        Ok(schedule)
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Zero => "zero".into(),
            Policy::Max => "max".into(),
            Policy::BoundaryHold => "hold".into(),
            Policy::Canonical { kind, .. } => kind.label().into(),
            Policy::PiecewiseConstant { levels, .. } => {
                let parts: Vec<String> = levels
                    .iter()
                    .map(|l| match l {
                        Level::Rate(c) => format!("{c}"),
                        Level::Hold => "hold".into(),
                    })
                    .collect();
                format!("pw[{}]", parts.join(","))
            }
        }
    }
}

/// Control law applied over a run of integration steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw<F> {
    Constant(F),
    /// Boundary rate `(q/2) V(t) / s`.
    Boundary,
}

impl<F: Scalar> ControlLaw<F> {
    #[inline]
    pub fn rate(&self, scenario: &Scenario<F>, s: F, t: F) -> F {
        match *self {
            ControlLaw::Constant(c) => c,
            ControlLaw::Boundary => boundary_rate(&scenario.params, &scenario.env, s, t),
        }
    }
}

/// Maximal run of samples `start..=end` integrated under one control law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece<F> {
    pub start: usize,
    pub end: usize,
    pub law: ControlLaw<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    RdiHitOne,
    NMinHit,
    ExitPoint,
    HorizonEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event<F> {
    pub t: F,
    pub kind: EventKind,
}

/// Trajectory sample. `e` is the thinning rate of the step that ends here
/// (the control of the first step for the initial sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample<F> {
    pub state: StandState<F>,
    pub e: F,
    pub r: F,
    pub drdt: F,
    pub dsdt: F,
    /// Index `k` when the sample lies on the lattice point `k * step`.
    pub lattice: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<F> {
    pub samples: Vec<Sample<F>>,
    pub pieces: Vec<Piece<F>>,
    pub events: Vec<Event<F>>,
    /// Last time at which the solution is inside the validity domain.
    pub validity_end: F,
    pub horizon: F,
    pub step: F,
}

impl<F: Scalar> Trajectory<F> {
    pub fn first(&self) -> &Sample<F> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<F> {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> StandState<F> {
        self.last().state
    }

    pub fn event(&self, kind: EventKind) -> Option<&Event<F>> {
        self.events.iter().find(|e| e.kind == kind)
    }

    pub fn times(&self) -> Vec<F> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    /// `true` when integration reached the horizon without leaving the domain.
    pub fn completed(&self) -> bool {
        self.event(EventKind::HorizonEnd).is_some()
    }

    /// `true` when an exit point or a constraint violation stopped the run.
    pub fn stopped_early(&self) -> bool {
        !self.completed()
    }

    /// Trajectory reached the exit point `(r, n) = (1, n_min)`.
    pub fn exit_time(&self) -> Option<F> {
        self.event(EventKind::ExitPoint).map(|e| e.t)
    }

    /// Run stopped because a non-holding control pushed `r` above one.
    pub fn violated_density(&self) -> bool {
        !self.completed() && self.exit_time().is_none()
    }

    pub fn piece_of_step(&self, i: usize) -> &Piece<F> {
        self.pieces
            .iter()
            .find(|p| p.start <= i && i < p.end)
            .or(self.pieces.last())
            .expect("trajectory has at least one piece")
    }

    /// Sample index at lattice point `k`, if present.
    pub fn lattice_sample(&self, k: usize) -> Option<&Sample<F>> {
        // lattice samples are ordered; binary search on the index
        let idx = self
            .samples
            .binary_search_by(|s| match s.lattice {
                Some(j) => j.cmp(&k),
                None => {
                    // a non-lattice sample sits strictly between two lattice points
                    let pos = s.state.t / self.step;
                    if pos < F::from_usize_lossy(k) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                }
            })
            .ok()?;
        Some(&self.samples[idx])
    }

    /// Cubic Hermite interpolation of the state at time `t`.
    pub fn state_at(&self, scenario: &Scenario<F>, t: F) -> StandState<F> {
        let first = self.first();
        if t <= first.state.t {
            return first.state;
        }
        let last = self.last();
        if t >= last.state.t {
            return StandState { t, ..last.state };
        }
        let i = match self
            .samples
            .binary_search_by(|s| s.state.t.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => return self.samples[i].state,
            Err(i) => i - 1,
        };
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let h = b.state.t - a.state.t;
        let u = (t - a.state.t) / h;
        let law = self.piece_of_step(i).law;
        let e_a = law.rate(scenario, a.state.s, a.state.t);
        let e_b = law.rate(scenario, b.state.s, b.state.t);
        let s = hermite(a.state.s, a.dsdt, b.state.s, b.dsdt, h, u);
        let n = hermite(a.state.n, -e_a, b.state.n, -e_b, h, u);
        StandState { t, s, n }
    }
}

fn hermite<F: Scalar>(y0: F, d0: F, y1: F, d1: F, h: F, u: F) -> F {
    let u2 = u * u;
    let u3 = u2 * u;
    let two = F::two();
    let three = F::lit(3.0);
    let h00 = two * u3 - three * u2 + F::one();
    let h10 = u3 - two * u2 + u;
    let h01 = -two * u3 + three * u2;
    let h11 = u3 - u2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Right-hand side `(ds/dt, dn/dt)` for a state and a thinning rate.
pub fn rhs<F: Scalar>(scenario: &Scenario<F>, state: &StandState<F>, e: F) -> Result<(F, F)> {
    check_rate_and_state(scenario, state, e)?;
    Ok((growth_rate(scenario, state.t, state.s, state.n), -e))
}

/// Rate of change of the density index, `(r/n) [(q/2) g(r) V / s - e]`.
pub fn drdt<F: Scalar>(scenario: &Scenario<F>, state: &StandState<F>, e: F) -> Result<F> {
    check_rate_and_state(scenario, state, e)?;
    Ok(density_rate(scenario, state.t, state.s, state.n, e))
}

fn check_rate_and_state<F: Scalar>(scenario: &Scenario<F>, state: &StandState<F>, e: F) -> Result<()> {
    if !(state.n > F::zero()) || !(state.s > F::zero()) {
        return Err(Error::Domain(format!(
            "state requires n > 0 and s > 0 (got n = {}, s = {})",
            state.n, state.s
        )));
    }
    if !(e >= F::zero() && e <= scenario.params.e_max) {
        return Err(Error::Domain(format!(
            "thinning rate {e} outside [0, e_max = {}]",
            scenario.params.e_max
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn growth_rate<F: Scalar>(scenario: &Scenario<F>, t: F, s: F, n: F) -> F {
    let r = scenario.params.rdi_unchecked(n, s);
    scenario.growth.value(r) / n * scenario.env.v_at(t)
}

#[inline]
pub(crate) fn density_rate<F: Scalar>(scenario: &Scenario<F>, t: F, s: F, n: F, e: F) -> F {
    let r = scenario.params.rdi_unchecked(n, s);
    r / n * (scenario.params.half_q() * scenario.growth.value(r) / s * scenario.env.v_at(t) - e)
}

/// Tunables of [`integrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions<F> {
    pub step: F,
    /// Multiplies every basal-area increment. `1` is the correct integrator;
    /// other values deliberately corrupt it (fault injection for audits).
    pub growth_fault: F,
}

impl<F: Scalar> IntegrateOptions<F> {
    pub fn with_step(step: F) -> Self {
        Self {
            step,
            growth_fault: F::one(),
        }
    }

    pub fn for_horizon(horizon: F) -> Self {
        Self::with_step(horizon / F::from_usize_lossy(DEFAULT_STEPS))
    }
}

/// Integrates the stand under `policy` over `[0, horizon]` with lattice step `step`.
pub fn integrate<F: Scalar>(scenario: &Scenario<F>, policy: &Policy<F>, horizon: F, step: F) -> Result<Trajectory<F>> {
    integrate_with(scenario, policy, horizon, &IntegrateOptions::with_step(step))
}

/// [`integrate`] with explicit options.
pub fn integrate_with<F: Scalar>(
    scenario: &Scenario<F>,
    policy: &Policy<F>,
    horizon: F,
    options: &IntegrateOptions<F>,
) -> Result<Trajectory<F>> {
    let params = &scenario.params;
    if !(horizon > F::zero() && horizon <= params.t_star) {
        return Err(Error::Domain(format!(
            "horizon must lie in (0, t_star = {}] (got {horizon})",
            params.t_star
        )));
    }
    if !(options.step > F::zero() && options.step.is_finite()) {
        return Err(Error::Domain(format!("step must be positive (got {})", options.step)));
    }
    let schedule = policy.schedule(params.e_max)?;
    let init = scenario.initial;
    if init.n < params.n_min * (F::one() - F::lit(EXIT_TIE_TOL)) {
        return Err(Error::NonViable {
            t: init.t.as_f64(),
            reason: format!("initial tree count {} below n_min = {}", init.n, params.n_min),
        });
    }
    if init.rdi(params) > F::one() + F::lit(EXIT_TIE_TOL) {
        return Err(Error::NonViable {
            t: init.t.as_f64(),
            reason: "initial density index above one".into(),
        });
    }
    Integrator::new(scenario, schedule, horizon, *options).run()
}

struct Integrator<'a, F> {
    scenario: &'a Scenario<F>,
    schedule: Schedule<F>,
    horizon: F,
    options: IntegrateOptions<F>,
    snap: F,
    t: F,
    s: F,
    n: F,
    on_boundary: bool,
    seg: usize,
    next_k: usize,
    samples: Vec<Sample<F>>,
    pieces: Vec<Piece<F>>,
    events: Vec<Event<F>>,
}

enum Flow {
    Continue,
    Stop,
}

impl<'a, F: Scalar> Integrator<'a, F> {
    fn new(scenario: &'a Scenario<F>, schedule: Schedule<F>, horizon: F, options: IntegrateOptions<F>) -> Self {
        let init = scenario.initial;
        Self {
            scenario,
            schedule,
            horizon,
            options,
            snap: options.step * F::lit(SNAP_FRACTION),
            t: init.t,
            s: init.s,
            n: init.n,
            on_boundary: init.rdi(&scenario.params) >= F::one() - F::lit(EXIT_TIE_TOL),
            seg: 0,
            next_k: 1,
            samples: Vec::new(),
            pieces: Vec::new(),
            events: Vec::new(),
        }
    }

    fn n_min(&self) -> F {
        self.scenario.params.n_min
    }

    fn at_min_count(&self, n: F) -> bool {
        n <= self.n_min() * (F::one() + F::lit(EXIT_TIE_TOL))
    }

    fn rdi(&self, n: F, s: F) -> F {
        self.scenario.params.rdi_unchecked(n, s)
    }

    fn lattice_time(&self, k: usize) -> F {
        F::from_usize_lossy(k) * self.options.step
    }

    fn push_sample(&mut self, law: ControlLaw<F>, lattice: Option<usize>) {
        let (t, s, n) = (self.t, self.s, self.n);
        let e = law.rate(self.scenario, s, t);
        let sample = Sample {
            state: StandState { t, s, n },
            e,
            r: self.rdi(n, s),
            drdt: density_rate(self.scenario, t, s, n, e),
            dsdt: growth_rate(self.scenario, t, s, n),
            lattice,
        };
        self.samples.push(sample);
        let idx = self.samples.len() - 1;
        match self.pieces.last_mut() {
            Some(p) if p.law == law => p.end = idx,
            Some(p) => {
                let start = p.end;
                self.pieces.push(Piece { start, end: idx, law });
            }
            None => self.pieces.push(Piece {
                start: idx,
                end: idx,
                law,
            }),
        }
    }

    /// Switches the law of the current (last) sample's outgoing steps.
    fn open_piece(&mut self, law: ControlLaw<F>) {
        let idx = self.samples.len() - 1;
        match self.pieces.last_mut() {
            Some(p) if p.law == law => {}
            Some(p) if p.start == p.end && p.end == idx => {
                p.law = law;
                self.samples[idx].e = law.rate(self.scenario, self.s, self.t);
            }
            _ => self.pieces.push(Piece {
                start: idx,
                end: idx,
                law,
            }),
        }
    }

    fn event(&mut self, kind: EventKind) {
        self.events.push(Event { t: self.t, kind });
    }

    fn level(&mut self) -> Level<F> {
        while self.seg + 1 < self.schedule.segments.len() && self.t >= self.schedule.segments[self.seg].end - self.snap
        {
            self.seg += 1;
        }
        self.schedule.segments[self.seg].level
    }

    fn segment_end(&self) -> F {
        self.schedule.segments[self.seg].end
    }

    /// One RK4 step of size `dt` under `law`, projected onto `r = 1` for the boundary law.
    fn rk4(&self, law: ControlLaw<F>, t: F, s: F, n: F, dt: F) -> (F, F) {
        let sc = self.scenario;
        let field = |t: F, s: F, n: F| (growth_rate(sc, t, s, n), -law.rate(sc, s, t));
        let half = F::half();
        let (k1s, k1n) = field(t, s, n);
        let (k2s, k2n) = field(t + half * dt, s + half * dt * k1s, n + half * dt * k1n);
        let (k3s, k3n) = field(t + half * dt, s + half * dt * k2s, n + half * dt * k2n);
        let (k4s, k4n) = field(t + dt, s + dt * k3s, n + dt * k3n);
        let sixth = dt / F::lit(6.0);
        let ds = sixth * (k1s + F::two() * (k2s + k3s) + k4s) * self.options.growth_fault;
        let n1 = match law {
            ControlLaw::Constant(c) => n - c * dt,
            ControlLaw::Boundary => n + sixth * (k1n + F::two() * (k2n + k3n) + k4n),
        };
        let s1 = match law {
            ControlLaw::Constant(_) => s + ds,
            ControlLaw::Boundary => sc.params.s_at_full_density(n1),
        };
        (s1, n1)
    }

    fn run(mut self) -> Result<Trajectory<F>> {
        let level = self.level();
        let first_law = self.law_for(level);
        self.push_sample(first_law.unwrap_or(ControlLaw::Constant(F::zero())), Some(0));
        let max_iters = (self.horizon / self.options.step).to_usize().unwrap_or(usize::MAX / 8) * 8 + 10_000;
        let mut validity_end = self.horizon;
        for _ in 0..max_iters {
            if self.t >= self.horizon - self.snap {
                self.event(EventKind::HorizonEnd);
                break;
            }
            match self.advance()? {
                Flow::Continue => {}
                Flow::Stop => {
                    validity_end = self.t;
                    break;
                }
            }
        }
        Ok(Trajectory {
            samples: self.samples,
            pieces: self.pieces,
            events: self.events,
            validity_end,
            horizon: self.horizon,
            step: self.options.step,
        })
    }

    /// Control law for the next step, or `None` if the level would push `r` above one.
    fn law_for(&self, level: Level<F>) -> Option<ControlLaw<F>> {
        let sc = self.scenario;
        let cut_allowed = !self.at_min_count(self.n);
        if self.on_boundary {
            let e_r = boundary_rate(&sc.params, &sc.env, self.s, self.t);
            match level {
                Level::Hold => Some(ControlLaw::Boundary),
                Level::Rate(c) => {
                    let c = if cut_allowed { c } else { F::zero() };
                    if c >= e_r * (F::one() - F::lit(BOUNDARY_SLACK)) {
                        Some(ControlLaw::Constant(c))
                    } else {
                        None
                    }
                }
            }
        } else {
            match level {
                Level::Hold => Some(ControlLaw::Constant(F::zero())),
                Level::Rate(c) => Some(ControlLaw::Constant(if cut_allowed { c } else { F::zero() })),
            }
        }
    }

    fn advance(&mut self) -> Result<Flow> {
        let level = self.level();
        let law = match self.law_for(level) {
            Some(law) => law,
            None => {
                // a non-holding level on the boundary would push r above one
                if !self
                    .events
                    .iter()
                    .any(|e| e.kind == EventKind::RdiHitOne && e.t == self.t)
                {
                    self.event(EventKind::RdiHitOne);
                }
                return Ok(Flow::Stop);
            }
        };
        if let ControlLaw::Constant(_) = law {
            self.on_boundary = false;
        }
        self.open_piece(law);
        if law == ControlLaw::Boundary {
            if self.at_min_count(self.n) {
                self.event(EventKind::ExitPoint);
                return Ok(Flow::Stop);
            }
            let sc = self.scenario;
            let required = boundary_rate(&sc.params, &sc.env, self.s, self.t);
            if required > sc.params.e_max * (F::one() + F::lit(BOUNDARY_SLACK)) {
                return Err(Error::InfeasibleBoundary {
                    t: self.t.as_f64(),
                    required: required.as_f64(),
                    e_max: sc.params.e_max.as_f64(),
                });
            }
        }

        // step target: next lattice point, segment end or horizon
        let lattice_t = self.lattice_time(self.next_k);
        let mut target = lattice_t.min(self.horizon);
        let mut lands_on_lattice = target == lattice_t || (lattice_t - self.horizon).abs() <= self.snap;
        if (lattice_t - self.horizon).abs() <= self.snap {
            target = self.horizon;
        }
        let seg_end = self.segment_end();
        if seg_end < target - self.snap {
            target = seg_end;
            lands_on_lattice = false;
        }
        let dt = target - self.t;
        if dt <= F::zero() {
            // already at the target within snapping distance
            if lands_on_lattice {
                self.next_k += 1;
            }
            self.t = target;
            return Ok(Flow::Continue);
        }

        match law {
            ControlLaw::Boundary => self.boundary_step(dt, lands_on_lattice),
            ControlLaw::Constant(c) => self.constant_step(c, dt, lands_on_lattice),
        }
    }

    fn finish_step(&mut self, law: ControlLaw<F>, t1: F, s1: F, n1: F, on_lattice: bool) {
        let lattice_t = self.lattice_time(self.next_k);
        let mut lattice = None;
        let mut t1 = t1;
        if on_lattice || (lattice_t - t1).abs() <= self.snap {
            if (lattice_t - t1).abs() <= self.snap {
                t1 = if (self.horizon - lattice_t).abs() <= self.snap {
                    self.horizon
                } else {
                    lattice_t
                };
            }
            lattice = Some(self.next_k);
            self.next_k += 1;
        }
        self.t = t1;
        self.s = s1;
        self.n = n1;
        self.push_sample(law, lattice);
    }

    fn boundary_step(&mut self, dt: F, on_lattice: bool) -> Result<Flow> {
        let law = ControlLaw::Boundary;
        let (t0, s0, n0) = (self.t, self.s, self.n);
        let n_min = self.n_min();
        let (s1, n1) = self.rk4(law, t0, s0, n0, dt);
        if n1 > n_min {
            self.finish_step(law, t0 + dt, s1, n1, on_lattice);
            return Ok(Flow::Continue);
        }
        let tau = bisect(
            |tau| {
                let (_, n) = self.rk4(law, t0, s0, n0, tau);
                n - n_min
            },
            F::zero(),
            dt,
            F::lit(TIME_TOL),
        )?;
        let s_exit = self.scenario.params.s_at_full_density(n_min);
        self.finish_step(law, t0 + tau, s_exit, n_min, false);
        self.event(EventKind::ExitPoint);
        Ok(Flow::Stop)
    }

    fn constant_step(&mut self, c: F, dt: F, on_lattice: bool) -> Result<Flow> {
        let law = ControlLaw::Constant(c);
        let (t0, s0, n0) = (self.t, self.s, self.n);
        let n_min = self.n_min();
        let mut step = dt;
        let mut count_event = false;
        if c > F::zero() {
            let dt_n = (n0 - n_min) / c;
            if dt_n <= dt + self.snap {
                step = dt_n.max(F::zero());
                count_event = true;
            }
        }
        let (s1, n1) = self.rk4(law, t0, s0, n0, step);
        let r1 = self.rdi(n1, s1);
        if r1 > F::one() {
            let r0 = self.rdi(n0, s0);
            let tau = if r0 >= F::one() {
                F::zero()
            } else {
                bisect(
                    |tau| {
                        let (s, n) = self.rk4(law, t0, s0, n0, tau);
                        self.rdi(n, s) - F::one()
                    },
                    F::zero(),
                    step,
                    F::lit(TIME_TOL),
                )?
            };
            let (_, n_hit) = self.rk4(law, t0, s0, n0, tau);
            let s_hit = self.scenario.params.s_at_full_density(n_hit);
            self.finish_step(law, t0 + tau, s_hit, n_hit, false);
            if self.at_min_count(n_hit) {
                self.event(EventKind::ExitPoint);
                return Ok(Flow::Stop);
            }
            self.event(EventKind::RdiHitOne);
            self.on_boundary = true;
            let next = self.level();
            return Ok(match self.law_for(next) {
                Some(_) => Flow::Continue,
                None => Flow::Stop,
            });
        }
        if count_event {
            self.finish_step(law, t0 + step, s1, n_min, false);
            self.event(EventKind::NMinHit);
            if self.rdi(self.n, self.s) >= F::one() - F::lit(EXIT_TIE_TOL) {
                self.event(EventKind::ExitPoint);
                return Ok(Flow::Stop);
            }
            return Ok(Flow::Continue);
        }
        self.finish_step(law, t0 + step, s1, n1, on_lattice);
        Ok(Flow::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DominantHeight, Environment, GrowthEnergy, GrowthFunction, StandParams};

    fn scenario(growth: GrowthFunction<f64>) -> Scenario<f64> {
        Scenario::new(
            StandParams::new(1.6, 0.011, 400.0, 40.0, 200.0).unwrap(),
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
    fn rhs_examples() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let s_full = sc.params.s_at_full_density(800.0);
        let st = StandState::new(5.0, s_full, 800.0);
        let (ds, dn) = rhs(&sc, &st, 0.0).unwrap();
        assert!((ds - sc.env.v_at(5.0) / 800.0).abs() < 1e-15);
        assert_eq!(dn, 0.0);
        let lin = scenario(GrowthFunction::linear());
        for n in [500.0, 900.0] {
            let st = StandState::new(2.0, 0.07, n);
            let (ds, _) = rhs(&lin, &st, 10.0).unwrap();
            let expected = lin.params.a * 0.07f64.powf(0.8) * lin.env.v_at(2.0);
            assert!((ds - expected).abs() < 1e-15);
        }
        assert!(rhs(&sc, &StandState::new(0.0, 0.1, 0.0), 0.0).is_err());
        assert!(rhs(&sc, &st, 41.0).is_err());
    }

    #[test]
    fn drdt_examples() {
        let sc = scenario(GrowthFunction::fagacees(2.0).unwrap());
        let s_full = sc.params.s_at_full_density(700.0);
        let st = StandState::new(3.0, s_full, 700.0);
        let e_r = sc.boundary_control(s_full, 3.0).unwrap();
        assert!(drdt(&sc, &st, e_r).unwrap().abs() < 1e-12);
        let st = StandState::new(3.0, 0.05, 900.0);
        assert!(drdt(&sc, &st, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(Policy::<f64>::piecewise(vec![2.0, 1.0], vec![Level::Hold; 3]).is_err());
        assert!(Policy::<f64>::piecewise(vec![1.0], vec![Level::Hold]).is_err());
        assert!(Policy::<f64>::piecewise(vec![1.0], vec![Level::Rate(-1.0), Level::Hold]).is_err());
        let p = Policy::piecewise(vec![1.0], vec![Level::Rate(50.0), Level::Hold]).unwrap();
        assert!(p.schedule(40.0).is_err());
        let sched = Policy::equal_intervals(8.0, vec![Level::Rate(1.0), Level::Hold])
            .unwrap()
            .schedule(40.0)
            .unwrap();
        assert_eq!(sched.level_at(3.9), Level::Rate(1.0));
        assert_eq!(sched.level_at(4.0), Level::Hold);
    }

    #[test]
    fn zero_policy_keeps_count() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let traj = integrate(&sc, &Policy::Zero, 20.0, 20.0 / 512.0).unwrap();
        assert!(traj.samples.iter().all(|s| s.state.n == 1000.0));
        assert!(traj.completed());
    }

    #[test]
    fn max_policy_depletes_linearly() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let traj = integrate(&sc, &Policy::Max, 10.0, 10.0 / 1000.0).unwrap();
        assert!((traj.final_state().n - 600.0).abs() < 1e-9);
        let traj = integrate(&sc, &Policy::Max, 30.0, 30.0 / 1000.0).unwrap();
        let hit = traj.event(EventKind::NMinHit).unwrap();
        assert!((hit.t - 15.0).abs() < 1e-9);
        assert_eq!(traj.final_state().n, 400.0);
    }

    #[test]
    fn zero_policy_stops_when_density_reaches_one() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let traj = integrate(&sc, &Policy::Zero, 200.0, 200.0 / 4096.0).unwrap();
        assert!(traj.violated_density());
        let hit = traj.event(EventKind::RdiHitOne).unwrap();
        assert!((traj.last().r - 1.0).abs() < 1e-12);
        assert_eq!(traj.validity_end, hit.t);
    }

    #[test]
    fn hold_rides_boundary_until_exit() {
        let sc = scenario(GrowthFunction::fagacees(3.0).unwrap());
        let traj = integrate(&sc, &Policy::BoundaryHold, 200.0, 200.0 / 4096.0).unwrap();
        let exit = traj.exit_time().expect("exit reached");
        let last = traj.last();
        assert!((last.r - 1.0).abs() < 1e-9);
        assert_eq!(last.state.n, 400.0);
        assert!(exit < 200.0);
        for p in traj.pieces.iter().filter(|p| p.law == ControlLaw::Boundary) {
            for s in &traj.samples[p.start + 1..=p.end] {
                let e_r = sc.boundary_control(s.state.s, s.state.t).unwrap();
                assert!((s.e - e_r).abs() <= 1e-12 * e_r);
            }
        }
    }

    #[test]
    fn infeasible_boundary_is_reported() {
        let mut sc = scenario(GrowthFunction::fagacees(3.0).unwrap());
        sc.params.e_max = 1.0;
        let err = integrate(&sc, &Policy::BoundaryHold, 200.0, 200.0 / 4096.0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleBoundary { .. }));
    }

    #[test]
    fn horizon_beyond_validity_is_rejected() {
        let sc = scenario(GrowthFunction::linear());
        assert!(integrate(&sc, &Policy::Zero, 250.0, 1.0).is_err());
        assert!(integrate(&sc, &Policy::Zero, 20.0, 0.0).is_err());
    }

    #[test]
    fn lattice_samples_are_indexed() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let pol = Policy::piecewise(vec![3.3], vec![Level::Rate(40.0), Level::Rate(0.0)]).unwrap();
        let traj = integrate(&sc, &pol, 10.0, 0.5).unwrap();
        let s = traj.lattice_sample(7).unwrap();
        assert_eq!(s.state.t, 3.5);
        assert_eq!(traj.lattice_sample(20).unwrap().state.t, 10.0);
        assert!(traj.samples.iter().any(|s| s.state.t == 3.3 && s.lattice.is_none()));
        assert!(traj.lattice_sample(21).is_none());
    }

    #[test]
    fn state_interpolation_tracks_samples() {
        let sc = scenario(GrowthFunction::power(0.3).unwrap());
        let coarse = integrate(&sc, &Policy::Max, 12.0, 0.25).unwrap();
        let fine = integrate(&sc, &Policy::Max, 12.0, 0.125).unwrap();
        for s in fine.samples.iter().skip(1).step_by(2) {
            let interp = coarse.state_at(&sc, s.state.t);
            assert!((interp.s - s.state.s).abs() / s.state.s < 1e-7);
            assert!((interp.n - s.state.n).abs() < 1e-9);
        }
    }

    #[test]
    fn open_ended_schedule_round_trips() {
        let policy = Policy::Canonical {
            kind: CanonicalKind::E0,
            schedule: Schedule::constant(Level::Rate(40.0)),
        };
        let text = serde_json::to_string(&policy).unwrap();
        assert!(text.contains("\"end\":null"), "{text}");
        let back: Policy<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, policy);
        assert!(back.schedule(40.0).unwrap().segments[0].end.is_infinite());
    }
}
