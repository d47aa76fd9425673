//! JSON run configuration: parsing, default filling and validation.

use std::fmt;

use dpd_core::analysis::SpotCheck;
use dpd_core::{
    Atom, GameSpec, GeneralGame, Graph, InitialMeasure, MixedStrategy, ParticleState, PdPayoffs, PositionLaw, Scale,
    Space, Wealth,
};
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

/// A configuration problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// An exact rational written as `[numerator, denominator]`. The pair is
/// kept as written, so serialization reproduces the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl TryFrom<[i64; 2]> for Rational {
    type Error = String;

    fn try_from([num, den]: [i64; 2]) -> Result<Self, String> {
        if den == 0 {
            return Err("denominator must be nonzero".into());
        }
        Ok(Rational { num, den })
    }
}

impl From<Rational> for [i64; 2] {
    fn from(r: Rational) -> Self {
        [r.num, r.den]
    }
}

impl Rational {
    pub fn ratio(self) -> Ratio<i64> {
        Ratio::new(self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Pd,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Spatial,
    Matching,
    Meanfield,
    Homogenization,
    Chaos,
    Occupation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payoffs {
    #[serde(rename = "R")]
    pub reward: Rational,
    #[serde(rename = "S")]
    pub sucker: Rational,
    #[serde(rename = "T")]
    pub temptation: Rational,
    #[serde(rename = "P")]
    pub punishment: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub weights: Vec<Rational>,
    pub death_threshold: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralSpec {
    /// `matrix[a][b]`: payoff to the player using action `a` against `b`.
    pub matrix: Vec<Vec<Rational>>,
    pub strategies: Vec<StrategySpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSpec {
    Torus(usize),
    Explicit { vertices: usize, edges: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionSpec {
    Stationary,
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub wealth: Rational,
    pub strategy: usize,
    pub prob: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub position: usize,
    pub wealth: Rational,
    pub strategy: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<ParticleSpec>>,
    #[serde(default = "stationary")]
    pub positions: PositionSpec,
}

fn stationary() -> PositionSpec {
    PositionSpec::Stationary
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub replicas: usize,
    pub tolerance: f64,
}

/// Settings read only by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub d_grid: Vec<f64>,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub bootstrap: usize,
    pub z: f64,
    /// Test functional threshold: `f = 1{alive, wealth > threshold}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spot: Option<SpotSpec>,
    pub slope_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Vec<usize>>>,
    pub tolerance: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub engine: EngineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Payoffs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GeneralSpec>,
    #[serde(rename = "N")]
    pub n: usize,
    pub graph: GraphSpec,
    pub d: f64,
    pub lambda: f64,
    pub slowed: bool,
    pub horizon: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub max_states: usize,
    pub snapshot_times: Vec<f64>,
    pub initial: InitialSpec,
    pub seed: u64,
    pub replicas: usize,
    pub experiment: ExperimentSpec,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// A default filled in during parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultUsed {
    pub field: String,
    pub value: Value,
}

fn top_level_defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("model", json!("pd")),
        ("engine", json!("spatial")),
        ("N", json!(16)),
        ("graph", json!({"torus": 3})),
        ("d", json!(1.0)),
        ("lambda", json!(1.0)),
        ("slowed", json!(false)),
        ("horizon", json!(1.0)),
        ("dt", json!(0.001)),
        ("epsilon", json!(1e-10)),
        ("max_states", json!(1_000_000)),
        ("seed", json!(0)),
        ("replicas", json!(100)),
        ("output", json!("out")),
    ]
}

fn experiment_defaults() -> Vec<(&'static str, Value)> {
    vec![
        ("d_grid", json!([1.0, 4.0, 16.0, 64.0])),
        ("N_grid", json!([8, 32, 128])),
        ("bootstrap", json!(200)),
        ("z", json!(2.0)),
        ("slope_range", json!([-1.6, -0.4])),
        ("tolerance", json!(0.02)),
        ("batches", json!(20)),
    ]
}

fn fill(obj: &mut Map<String, Value>, prefix: &str, defaults: Vec<(&'static str, Value)>, used: &mut Vec<DefaultUsed>) {
    for (key, value) in defaults {
        if !obj.contains_key(key) {
            used.push(DefaultUsed { field: format!("{prefix}{key}"), value: value.clone() });
            obj.insert(key.to_string(), value);
        }
    }
}

/// Parses and validates a configuration, returning it with every default
/// made explicit, plus the list of defaults that were applied.
pub fn parse_config(text: &str) -> Result<(RunConfig, Vec<DefaultUsed>), ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::at("", format!("invalid JSON: {e}")))?;
    let Value::Object(obj) = &mut value else {
        return Err(ConfigError::at("", "configuration must be a JSON object"));
    };
    let mut used = Vec::new();
    fill(obj, "", top_level_defaults(), &mut used);
    if !obj.contains_key("snapshot_times") {
        let horizon = obj["horizon"].clone();
        used.push(DefaultUsed { field: "snapshot_times".into(), value: json!([horizon]) });
        obj.insert("snapshot_times".into(), json!([horizon]));
    }
    let experiment = obj.entry("experiment").or_insert_with(|| json!({}));
    match experiment {
        Value::Object(e) => fill(e, "experiment.", experiment_defaults(), &mut used),
        _ => return Err(ConfigError::at("experiment", "expected an object")),
    }

    let mut cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ConfigError::at(path, e.into_inner().to_string())
    })?;

    if cfg.experiment.threshold.is_none() {
        if let Some(atoms) = &cfg.initial.atoms {
            let half_mean =
                half_mean_wealth(atoms).ok_or_else(|| ConfigError::at("initial.atoms", "mean wealth overflows"))?;
            used.push(DefaultUsed {
                field: "experiment.threshold".into(),
                value: serde_json::to_value(half_mean).unwrap(),
            });
            cfg.experiment.threshold = Some(half_mean);
        }
    }
    cfg.resolve()?;
    Ok((cfg, used))
}

/// Half the mean initial wealth, the default test-functional threshold.
fn half_mean_wealth(atoms: &[AtomSpec]) -> Option<Rational> {
    let mut acc = Ratio::<i128>::zero();
    for a in atoms {
        let w = Ratio::new(i128::from(a.wealth.num), i128::from(a.wealth.den));
        let p = Ratio::new(i128::from(a.prob.num), i128::from(a.prob.den));
        acc = acc.checked_add(&w.checked_mul(&p)?)?;
    }
    let half = acc / 2;
    Some(Rational { num: i64::try_from(*half.numer()).ok()?, den: i64::try_from(*half.denom()).ok()? })
}

/// Everything the engines need, in core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub game: GameSpec,
    pub scale: Scale,
    pub space: Space,
    pub measure: Option<InitialMeasure>,
    pub particles: Option<Vec<ParticleState>>,
    pub positions: PositionLaw,
    pub threshold: Option<Wealth>,
}

fn nonnegative(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::at(path, format!("must be finite and nonnegative, got {x}")))
    }
}

impl RunConfig {
    fn rationals(&self) -> Vec<Ratio<i64>> {
        let mut out = Vec::new();
        if let Some(p) = &self.payoffs {
            out.extend([p.reward, p.sucker, p.temptation, p.punishment].map(Rational::ratio));
        }
        if let Some(g) = &self.game {
            out.extend(g.matrix.iter().flatten().map(|r| r.ratio()));
            out.extend(g.strategies.iter().map(|s| s.death_threshold.ratio()));
        }
        for a in self.initial.atoms.iter().flatten() {
            out.push(a.wealth.ratio());
        }
        for p in self.initial.particles.iter().flatten() {
            out.push(p.wealth.ratio());
        }
        out
    }

    /// Validates the configuration and converts it to core types.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::at("N", "must be at least 1"));
        }
        nonnegative("d", self.d)?;
        nonnegative("lambda", self.lambda)?;
        nonnegative("horizon", self.horizon)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::at("dt", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ConfigError::at("epsilon", "must lie in (0, 1)"));
        }
        if self.max_states == 0 {
            return Err(ConfigError::at("max_states", "must be at least 1"));
        }
        if self.replicas == 0 {
            return Err(ConfigError::at("replicas", "must be at least 1"));
        }
        let times = &self.snapshot_times;
        if times.windows(2).any(|w| !(w[0] <= w[1])) || times.iter().any(|&t| !(t >= 0.0 && t <= self.horizon)) {
            return Err(ConfigError::at("snapshot_times", "must be sorted and lie in [0, horizon]"));
        }
        self.check_experiment()?;

        let scale = Scale::for_rationals(self.rationals().iter()).map_err(|e| ConfigError::at("", e.to_string()))?;
        let amount =
            |path: &str, r: Rational| scale.amount_of(&r.ratio()).map_err(|e| ConfigError::at(path, e.to_string()));

        let game = match self.model {
            Model::Pd => {
                if self.game.is_some() {
                    return Err(ConfigError::at("game", "only allowed with model \"general\""));
                }
                let p = self.payoffs.ok_or_else(|| ConfigError::at("payoffs", "required for model \"pd\""))?;
                let (r, s, t, pp) = (p.reward.ratio(), p.sucker.ratio(), p.temptation.ratio(), p.punishment.ratio());
                if !r.is_positive() {
                    return Err(ConfigError::at("payoffs.R", "R must be positive"));
                }
                if t <= r {
                    return Err(ConfigError::at("payoffs.T", "T must exceed R"));
                }
                if !pp.is_positive() {
                    return Err(ConfigError::at("payoffs.P", "P must be positive"));
                }
                if s <= pp {
                    return Err(ConfigError::at("payoffs.S", "S must exceed P"));
                }
                let payoffs = PdPayoffs::new(
                    amount("payoffs.R", p.reward)?,
                    amount("payoffs.S", p.sucker)?,
                    amount("payoffs.T", p.temptation)?,
                    amount("payoffs.P", p.punishment)?,
                )
                .map_err(|e| ConfigError::at("payoffs", e.to_string()))?;
                GameSpec::Pd(payoffs)
            }
            Model::General => {
                if self.payoffs.is_some() {
                    return Err(ConfigError::at("payoffs", "only allowed with model \"pd\""));
                }
                let g = self.game.as_ref().ok_or_else(|| ConfigError::at("game", "required for model \"general\""))?;
                let mut matrix = Vec::with_capacity(g.matrix.len());
                for (a, row) in g.matrix.iter().enumerate() {
                    let row: Result<Vec<Wealth>, _> =
                        row.iter().enumerate().map(|(b, &x)| amount(&format!("game.matrix[{a}][{b}]"), x)).collect();
                    matrix.push(row?);
                }
                let mut strategies = Vec::with_capacity(g.strategies.len());
                for (k, s) in g.strategies.iter().enumerate() {
                    let path = format!("game.strategies[{k}]");
                    let c = amount(&format!("{path}.death_threshold"), s.death_threshold)?;
                    let weights = s.weights.iter().map(|w| w.ratio()).collect();
                    strategies.push(
                        MixedStrategy::new(weights, c)
                            .map_err(|e| ConfigError::at(format!("{path}.weights"), e.to_string()))?,
                    );
                }
                GameSpec::General(
                    GeneralGame::new(matrix, strategies).map_err(|e| ConfigError::at("game", e.to_string()))?,
                )
            }
        };

        let space = match &self.graph {
            GraphSpec::Torus(m) => Space::torus(*m),
            GraphSpec::Explicit { vertices, edges } => {
                let edges: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                Graph::from_edges(*vertices, &edges).and_then(Space::graph)
            }
        }
        .map_err(|e| ConfigError::at("graph", e.to_string()))?;

        let positions = match self.initial.positions {
            PositionSpec::Stationary => PositionLaw::Stationary,
            PositionSpec::Vertex(v) => {
                if v >= space.vertex_count() {
                    return Err(ConfigError::at("initial.positions", format!("vertex {v} outside the graph")));
                }
                PositionLaw::Vertex(v)
            }
        };
        let strategies = game.strategy_count();
        let (measure, particles) = match (&self.initial.atoms, &self.initial.particles) {
            (Some(atoms), None) => {
                let mut out = Vec::with_capacity(atoms.len());
                for (k, a) in atoms.iter().enumerate() {
                    if a.strategy >= strategies {
                        return Err(ConfigError::at(format!("initial.atoms[{k}].strategy"), "no such strategy"));
                    }
                    let wealth = amount(&format!("initial.atoms[{k}].wealth"), a.wealth)?;
                    out.push(Atom { wealth, strategy: a.strategy, prob: a.prob.ratio() });
                }
                let m = InitialMeasure::new(out, &game).map_err(|e| ConfigError::at("initial.atoms", e.to_string()))?;
                (Some(m), None)
            }
            (None, Some(ps)) => {
                if ps.len() != self.n {
                    return Err(ConfigError::at(
                        "initial.particles",
                        format!("{} particles given for N = {}", ps.len(), self.n),
                    ));
                }
                let mut out = Vec::with_capacity(ps.len());
                for (k, p) in ps.iter().enumerate() {
                    if p.strategy >= strategies {
                        return Err(ConfigError::at(format!("initial.particles[{k}].strategy"), "no such strategy"));
                    }
                    if p.position >= space.vertex_count() {
                        return Err(ConfigError::at(format!("initial.particles[{k}].position"), "outside the graph"));
                    }
                    let wealth = amount(&format!("initial.particles[{k}].wealth"), p.wealth)?;
                    out.push(game.settle(ParticleState::new(p.position, wealth, p.strategy)));
                }
                (None, Some(out))
            }
            _ => return Err(ConfigError::at("initial", "give exactly one of \"atoms\" or \"particles\"")),
        };

        let threshold = match self.experiment.threshold {
            // wealth > x on the tick lattice is wealth > floor(x · q)
            Some(r) => {
                let ticks = (Ratio::new(i128::from(r.num), i128::from(r.den)) * i128::from(scale.q())).floor();
                let ticks = i64::try_from(*ticks.numer())
                    .map_err(|_| ConfigError::at("experiment.threshold", "out of range"))?;
                Some(Wealth::from_ticks(ticks))
            }
            None => None,
        };
        if let Some(sites) = &self.experiment.sites {
            if let Some(v) = sites.iter().flatten().find(|&&v| v >= space.vertex_count()) {
                return Err(ConfigError::at("experiment.sites", format!("site {v} outside the graph")));
            }
        }
        Ok(Resolved { game, scale, space, measure, particles, positions, threshold })
    }

    fn check_experiment(&self) -> Result<(), ConfigError> {
        let e = &self.experiment;
        if e.d_grid.iter().any(|&d| !(d.is_finite() && d >= 0.0)) {
            return Err(ConfigError::at("experiment.d_grid", "entries must be finite and nonnegative"));
        }
        if e.n_grid.contains(&0) {
            return Err(ConfigError::at("experiment.N_grid", "entries must be at least 1"));
        }
        if !(e.z > 0.0 && e.z.is_finite()) {
            return Err(ConfigError::at("experiment.z", "must be positive"));
        }
        if e.bootstrap < 2 {
            return Err(ConfigError::at("experiment.bootstrap", "must be at least 2"));
        }
        if !(e.slope_range[0] <= e.slope_range[1]) {
            return Err(ConfigError::at("experiment.slope_range", "must be [low, high] with low <= high"));
        }
        nonnegative("experiment.tolerance", e.tolerance)?;
        if e.batches < 2 {
            return Err(ConfigError::at("experiment.batches", "must be at least 2"));
        }
        if let Some(s) = e.spot {
            if s.n == 0 || s.replicas < 2 {
                return Err(ConfigError::at("experiment.spot", "needs N >= 1 and at least 2 replicas"));
            }
            nonnegative("experiment.spot.tolerance", s.tolerance)?;
        }
        Ok(())
    }

    pub fn spot(&self) -> Option<SpotCheck> {
        self.experiment.spot.map(|s| SpotCheck { n: s.n, replicas: s.replicas, tolerance: s.tolerance })
    }
}
