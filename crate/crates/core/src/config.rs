//! Scenario files.
//!
//! A scenario file is TOML with the sections `[stand]`, `[growth]`,
//! `[environment]`, `[initial]`, and the optional `[economics]` and `[run]`.
//! Unknown keys are rejected and every invariant of the parsed types is
//! re-validated; errors name the offending line.
//!
//! ```toml
//! [stand]
//! q = 1.6
//! a = 0.011
//! n_min = 400.0
//! e_max = 100.0
//! t_star = 100.0
//!
//! [growth]
//! kind = "power"      # "power" (theta), "linear" or "fagacees" (p)
//! theta = 0.3
//!
//! [environment]
//! energy = "exponential"   # or "hyperbolic"
//! v0 = 2.0
//! lambda = 0.01
//! h_inf = 30.0
//! tau = 40.0
//!
//! [initial]
//! s = 0.02
//! n = 1000.0
//!
//! [economics]
//! k = 1.0
//! alpha = 1.2
//! delta = 0.0
//!
//! [run]
//! horizon = 28.0
//! intervals = 8
//! levels = "0,max,hold"
//! ```

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::dynamics::{CanonicalKind, Level, Policy};
use crate::economics::EconomicModel;
use crate::error::{Error, Result};
use crate::model::{
    DominantHeight, Environment, GrowthEnergy, GrowthFunction, GrowthKind, Scenario, StandParams, StandState,
};
use crate::trajectories::build_policy;

type Num = Spanned<f64>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    stand: RawStand,
    growth: RawGrowth,
    environment: RawEnvironment,
    initial: RawInitial,
    economics: Option<RawEconomics>,
    #[serde(default)]
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStand {
    q: Num,
    a: Num,
    n_min: Num,
    e_max: Num,
    t_star: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    kind: Spanned<String>,
    theta: Option<Num>,
    p: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    energy: Spanned<String>,
    v0: Num,
    lambda: Num,
    h_inf: Num,
    tau: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    s: Num,
    n: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEconomics {
    k: Num,
    alpha: Num,
    delta: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: Option<Num>,
    step: Option<Num>,
    policies: Option<usize>,
    seed: Option<u64>,
    intervals: Option<usize>,
    levels: Option<Spanned<String>>,
    terminal: Option<bool>,
}

/// Run settings; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    /// Random policies audited by `verify`.
    pub policies: usize,
    pub seed: u64,
    /// Equal intervals of the policy search.
    pub intervals: usize,
    /// Level set of the policy search, e.g. `"0,max,hold"`.
    pub levels: Option<String>,
    /// Require `n(T) = n_min` in the policy search.
    pub terminal: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            horizon: None,
            step: None,
            policies: 100,
            seed: 0,
            intervals: 8,
            levels: None,
            terminal: false,
        }
    }
}

/// Parsed and validated scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: Scenario<f64>,
    pub economics: Option<EconomicModel<f64>>,
    pub run: RunSettings,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Locator<'a> {
    text: &'a str,
    origin: &'a str,
    spans: HashMap<&'static str, Range<usize>>,
}

impl Locator<'_> {
    fn at(&self, span: &Range<usize>, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("{}:{}: {msg}", self.origin, line_of(self.text, span.start)))
    }

    fn wrap(&self, err: Error) -> Error {
        let field = match &err {
            Error::InvalidParameter { field, .. } => Some(*field),
            _ => None,
        };
        match field.and_then(|f| self.spans.get(f)) {
            Some(span) => self.at(span, err),
            None => Error::Config(format!("{}: {err}", self.origin)),
        }
    }

    fn num(&mut self, name: &'static str, v: &Num) -> f64 {
        self.spans.insert(name, v.span());
        *v.get_ref()
    }
}

/// Parses scenario text; `origin` prefixes error messages (usually the path).
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| format!(":{}", line_of(text, s.start)))
            .unwrap_or_default();
        Error::Config(format!("{origin}{line}: {}", e.message()))
    })?;
    let mut loc = Locator {
        text,
        origin,
        spans: HashMap::new(),
    };

    let st = &raw.stand;
    let params = StandParams {
        q: loc.num("q", &st.q),
        a: loc.num("a", &st.a),
        n_min: loc.num("n_min", &st.n_min),
        e_max: loc.num("e_max", &st.e_max),
        t_star: loc.num("t_star", &st.t_star),
    };
    params.validate().map_err(|e| loc.wrap(e))?;

    let g = &raw.growth;
    let need = |loc: &mut Locator, name: &'static str, v: &Option<Num>| -> Result<f64> {
        match v {
            Some(v) => Ok(loc.num(name, v)),
            None => Err(loc.at(
                &g.kind.span(),
                format!("growth kind `{}` requires `{name}`", g.kind.get_ref()),
            )),
        }
    };
    let reject = |loc: &Locator, name: &str, v: &Option<Num>| -> Result<()> {
        match v {
            Some(v) => Err(loc.at(
                &v.span(),
                format!("`{name}` does not apply to growth kind `{}`", g.kind.get_ref()),
            )),
            None => Ok(()),
        }
    };
    let kind = match g.kind.get_ref().as_str() {
        "power" => {
            reject(&loc, "p", &g.p)?;
            GrowthKind::Power {
                theta: need(&mut loc, "theta", &g.theta)?,
            }
        }
        "linear" => {
            reject(&loc, "p", &g.p)?;
            reject(&loc, "theta", &g.theta)?;
            GrowthKind::Linear
        }
        "fagacees" => {
            reject(&loc, "theta", &g.theta)?;
            GrowthKind::Fagacees {
                p: need(&mut loc, "p", &g.p)?,
            }
        }
        other => {
            return Err(loc.at(
                &g.kind.span(),
                format!("unknown growth kind `{other}` (expected power, linear or fagacees)"),
            ))
        }
    };
    let growth = GrowthFunction::new(kind).map_err(|e| loc.wrap(e))?;

    let en = &raw.environment;
    let v0 = loc.num("v0", &en.v0);
    let lambda = loc.num("lambda", &en.lambda);
    let energy = match en.energy.get_ref().as_str() {
        "exponential" => GrowthEnergy::Exponential { v0, lambda },
        "hyperbolic" => GrowthEnergy::Hyperbolic { v0, lambda },
        other => {
            return Err(loc.at(
                &en.energy.span(),
                format!("unknown energy `{other}` (expected exponential or hyperbolic)"),
            ))
        }
    };
    let height = DominantHeight::Saturating {
        h_inf: loc.num("h_inf", &en.h_inf),
        tau: loc.num("tau", &en.tau),
    };
    let env = Environment::new(energy, height).map_err(|e| loc.wrap(e))?;

    let initial = StandState::new(0.0, loc.num("s", &raw.initial.s), loc.num("n", &raw.initial.n));
    let scenario = Scenario::new(params, growth, env, initial).map_err(|e| loc.wrap(e))?;

    let economics = match &raw.economics {
        Some(ec) => {
            let model = EconomicModel {
                k: loc.num("k", &ec.k),
                alpha: loc.num("alpha", &ec.alpha),
                delta: loc.num("delta", &ec.delta),
            };
            model.validate().map_err(|e| loc.wrap(e))?;
            Some(model)
        }
        None => None,
    };

    let rr = &raw.run;
    let defaults = RunSettings::default();
    let positive = |loc: &mut Locator, name: &'static str, v: &Option<Num>| -> Result<Option<f64>> {
        match v {
            Some(v) => {
                let x = loc.num(name, v);
                if x > 0.0 && x.is_finite() {
                    Ok(Some(x))
                } else {
                    Err(loc.at(&v.span(), format!("`{name}` requires {name} > 0 (got {x})")))
                }
            }
            None => Ok(None),
        }
    };
    let run = RunSettings {
        horizon: positive(&mut loc, "horizon", &rr.horizon)?,
        step: positive(&mut loc, "step", &rr.step)?,
        policies: rr.policies.unwrap_or(defaults.policies),
        seed: rr.seed.unwrap_or(defaults.seed),
        intervals: rr.intervals.unwrap_or(defaults.intervals),
        levels: match &rr.levels {
            Some(l) => {
                parse_levels(l.get_ref(), scenario.params.e_max).map_err(|e| loc.at(&l.span(), e))?;
                Some(l.get_ref().clone())
            }
            None => None,
        },
        terminal: rr.terminal.unwrap_or(defaults.terminal),
    };
    Ok(ScenarioFile {
        scenario,
        economics,
        run,
    })
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string())
}

fn parse_level(token: &str, e_max: f64) -> Result<Level<f64>> {
    match token.trim() {
        "max" => Ok(Level::Rate(e_max)),
        "hold" => Ok(Level::Hold),
        t => {
            let c: f64 = t
                .parse()
                .map_err(|_| Error::Config(format!("level `{t}` is not a number, `max` or `hold`")))?;
            if !(0.0..=e_max).contains(&c) {
                return Err(Error::Config(format!("level {c} outside [0, e_max = {e_max}]")));
            }
            Ok(Level::Rate(c))
        }
    }
}

/// Comma-separated level set: numbers in `[0, e_max]`, `max` or `hold`.
pub fn parse_levels(spec: &str, e_max: f64) -> Result<Vec<Level<f64>>> {
    let levels = spec
        .split(',')
        .map(|t| parse_level(t, e_max))
        .collect::<Result<Vec<_>>>()?;
    let mut seen: Vec<Level<f64>> = Vec::new();
    for l in &levels {
        if seen.contains(l) {
            return Err(Error::Config(format!("duplicate level in `{spec}`")));
        }
        seen.push(*l);
    }
    Ok(levels)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLevel {
    Number(f64),
    Word(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    breakpoints: Vec<f64>,
    levels: Vec<RawLevel>,
}

/// Piecewise-constant plan file:
///
/// ```toml
/// breakpoints = [10.0, 20.0]
/// levels = ["max", "hold", 0.0]
/// ```
pub fn parse_plan(text: &str, origin: &str, e_max: f64) -> Result<Policy<f64>> {
    let raw: RawPlan = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {}", e.message())))?;
    let levels = raw
        .levels
        .iter()
        .map(|l| match l {
            RawLevel::Number(c) => parse_level(&c.to_string(), e_max),
            RawLevel::Word(w) => parse_level(w, e_max),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    Policy::piecewise(raw.breakpoints, levels).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Policy named on the command line: `zero`, `max`, `hold`, `e0`, `et:T`,
/// `esup` or `pw:FILE` (relative to `base_dir`).
pub fn parse_policy_spec(spec: &str, scenario: &Scenario<f64>, base_dir: &Path) -> Result<Policy<f64>> {
    let canonical = |kind| build_policy(scenario, kind);
    match spec {
        "zero" => Ok(Policy::Zero),
        "max" => Ok(Policy::Max),
        "hold" => Ok(Policy::BoundaryHold),
        "e0" => canonical(CanonicalKind::E0),
        "esup" => canonical(CanonicalKind::Esup),
        _ => {
            if let Some(t) = spec.strip_prefix("et:") {
                let horizon: f64 = t
                    .parse()
                    .map_err(|_| Error::Config(format!("`{spec}`: horizon `{t}` is not a number")))?;
                if !(horizon > 0.0 && horizon.is_finite()) {
                    return Err(Error::Config(format!("`{spec}`: horizon must be positive")));
                }
                canonical(CanonicalKind::Et { horizon })
            } else if let Some(file) = spec.strip_prefix("pw:") {
                let path = base_dir.join(file);
                let text =
                    std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                parse_plan(&text, &path.display().to_string(), scenario.params.e_max)
            } else {
                Err(Error::Config(format!(
                    "unknown policy `{spec}` (expected zero, max, hold, e0, et:T, esup or pw:FILE)"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"[stand]
q = 1.6
a = 0.011
n_min = 400.0
e_max = 100.0
t_star = 100.0

[growth]
kind = "power"
theta = 0.3

[environment]
energy = "exponential"
v0 = 2.0
lambda = 0.01
h_inf = 30.0
tau = 40.0

[initial]
s = 0.02
n = 1000.0
"#;

    #[test]
    fn parses_minimal_file() {
        let f = parse_scenario(BASE, "base.toml").unwrap();
        assert_eq!(f.scenario.params.q, 1.6);
        assert_eq!(f.scenario.growth.power_theta(), Some(0.3));
        assert!(f.economics.is_none());
        assert_eq!(f.run, RunSettings::default());
    }

    #[test]
    fn invalid_q_names_line_and_invariant() {
        let text = BASE.replace("q = 1.6", "q = 2.5");
        let err = parse_scenario(&text, "bad.toml").unwrap_err().to_string();
        assert!(err.starts_with("bad.toml:2:"), "{err}");
        assert!(err.contains("1 < q < 2"), "{err}");
    }

    #[test]
    fn invalid_initial_density_points_at_size() {
        let text = BASE.replace("s = 0.02", "s = 0.05");
        let err = parse_scenario(&text, "x").unwrap_err().to_string();
        assert!(err.starts_with("x:20:"), "{err}");
        assert!(err.contains("rdi"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("theta = 0.3", "theta = 0.3\nbeta = 1.0");
        let err = parse_scenario(&text, "x").unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
        assert!(err.starts_with("x:11:"), "{err}");
        let text = format!("{BASE}\n[extra]\nfoo = 1\n");
        assert!(parse_scenario(&text, "x").is_err());
    }

    #[test]
    fn growth_parameters_match_kind() {
        let text = BASE.replace("kind = \"power\"\ntheta = 0.3", "kind = \"fagacees\"\ntheta = 0.3");
        assert!(parse_scenario(&text, "x")
            .unwrap_err()
            .to_string()
            .contains("does not apply"));
        let text = BASE.replace("kind = \"power\"\ntheta = 0.3", "kind = \"fagacees\"\np = 3.0");
        assert!(parse_scenario(&text, "x")
            .unwrap()
            .scenario
            .growth
            .power_theta()
            .is_none());
        let text = BASE.replace("theta = 0.3", "theta = 1.0");
        assert!(parse_scenario(&text, "x")
            .unwrap_err()
            .to_string()
            .contains("0 <= theta < 1"));
    }

    #[test]
    fn run_and_economics_sections() {
        let text = format!(
            "{BASE}\n[economics]\nk = 1.0\nalpha = 1.2\ndelta = 0.0\n\n[run]\nhorizon = 20.0\nlevels = \"0,max,hold\"\nterminal = true\n"
        );
        let f = parse_scenario(&text, "x").unwrap();
        assert_eq!(f.economics.unwrap().alpha, 1.2);
        assert_eq!(f.run.horizon, Some(20.0));
        assert!(f.run.terminal);
        let text = format!("{BASE}\n[economics]\nk = 1.0\nalpha = -1.0\ndelta = 0.0\n");
        assert!(parse_scenario(&text, "x")
            .unwrap_err()
            .to_string()
            .contains("alpha > 0"));
        let text = format!("{BASE}\n[run]\nlevels = \"0,max,200\"\n");
        assert!(parse_scenario(&text, "x").unwrap_err().to_string().contains("outside"));
    }

    #[test]
    fn level_sets() {
        assert_eq!(
            parse_levels("0,max", 100.0).unwrap(),
            vec![Level::Rate(0.0), Level::Rate(100.0)]
        );
        assert_eq!(
            parse_levels("hold, 25", 100.0).unwrap(),
            vec![Level::Hold, Level::Rate(25.0)]
        );
        assert!(parse_levels("0,0", 100.0).is_err());
        assert!(parse_levels("fast", 100.0).is_err());
    }

    #[test]
    fn policy_specs() {
        let sc = parse_scenario(BASE, "x").unwrap().scenario;
        let dir = Path::new(".");
        assert_eq!(parse_policy_spec("zero", &sc, dir).unwrap(), Policy::Zero);
        assert_eq!(parse_policy_spec("e0", &sc, dir).unwrap().label(), "E0");
        assert_eq!(parse_policy_spec("et:20", &sc, dir).unwrap().label(), "ET");
        assert!(parse_policy_spec("et:x", &sc, dir).is_err());
        assert!(parse_policy_spec("bogus", &sc, dir).is_err());
        let plan = parse_plan("breakpoints = [5.0]\nlevels = [\"max\", 0]\n", "p", 100.0).unwrap();
        assert_eq!(
            plan,
            Policy::piecewise(vec![5.0], vec![Level::Rate(100.0), Level::Rate(0.0)]).unwrap()
        );
    }
}
