//! Random iterations X_{t+1} = f(X_t, Y_t, ε_{t+1}) driven by uniform noise.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::law::Law;
use crate::rng::{derive_stream, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct StateValue(pub Vec<f64>);

impl StateValue {
    pub fn scalar(x: f64) -> Self {
        StateValue(vec![x])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnvValue {
    Real(f64),
    Symbol { index: usize, value: f64 },
}

impl EnvValue {
    pub fn value(&self) -> f64 {
        match self {
            EnvValue::Real(v) => *v,
            EnvValue::Symbol { value, .. } => *value,
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            EnvValue::Symbol { index, .. } => Some(*index),
            EnvValue::Real(_) => None,
        }
    }
}

/// ε_0, ε_1, ... drawn from one stream; ε_0 is drawn but never consumed by `iterate`.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub values: Vec<f64>,
    pub stream_id: u64,
    pub master_seed: u64,
}

impl NoisePath {
    pub fn generate(master_seed: u64, stream_id: u64, len: usize) -> Self {
        let mut rng = derive_stream(master_seed, stream_id);
        NoisePath { values: (0..len).map(|_| rng.uniform()).collect(), stream_id, master_seed }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        NoisePath { values, stream_id: 0, master_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Iid {
        law: Law,
    },
    FiniteMarkov {
        alphabet: Vec<f64>,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    /// Y_n = Z_{n-m} + ... + Z_n with i.i.d. Z.
    MovingSum {
        order: usize,
        base: Law,
    },
    /// Independent draws with a per-index law; indices past either end reuse the end law.
    Scripted {
        laws: Vec<Law>,
    },
}

fn check_prob_vector(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !(*x >= 0.0)) {
        return invalid(format!("{what} has a negative or NaN entry"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return invalid(format!("{what} sums to {s}, not 1"));
    }
    Ok(())
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if cum >= u && *p > 0.0 {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn merge_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    v
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvironmentSpec::Iid { law } => law.validate(),
            EnvironmentSpec::FiniteMarkov { alphabet, transition, initial } => {
                let k = alphabet.len();
                if k == 0 || transition.len() != k || initial.len() != k {
                    return invalid("alphabet, transition rows and initial law must have equal length");
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != k {
                        return invalid(format!("transition row {i} has {} entries, expected {k}", row.len()));
                    }
                    check_prob_vector(row, &format!("transition row {i}"))?;
                }
                check_prob_vector(initial, "initial law")?;
                if alphabet.iter().any(|a| !a.is_finite()) {
                    return invalid("alphabet values must be finite");
                }
                Ok(())
            }
            EnvironmentSpec::MovingSum { order, base } => {
                if *order < 1 {
                    return invalid("moving-sum order must be at least 1");
                }
                base.validate()
            }
            EnvironmentSpec::Scripted { laws } => {
                if laws.is_empty() {
                    return invalid("scripted environment needs at least one law");
                }
                laws.iter().try_for_each(Law::validate)
            }
        }
    }

    /// Sorted alphabet for finite-valued specs.
    pub fn alphabet(&self) -> Option<Vec<f64>> {
        match self {
            EnvironmentSpec::Iid { law } => Some(merge_sorted(law.atoms()?.0)),
            EnvironmentSpec::FiniteMarkov { alphabet, .. } => Some(alphabet.clone()),
            EnvironmentSpec::MovingSum { order, base } => {
                let (vals, _) = base.atoms()?;
                let mut sums = vec![0.0];
                for _ in 0..=*order {
                    sums = merge_sorted(sums.iter().flat_map(|s| vals.iter().map(move |v| s + v)).collect());
                }
                Some(sums)
            }
            EnvironmentSpec::Scripted { laws } => {
                let mut all = Vec::new();
                for l in laws {
                    all.extend(l.atoms()?.0);
                }
                Some(merge_sorted(all))
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alphabet().is_some()
    }

    /// Smallest and largest attainable values.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            EnvironmentSpec::Iid { law } => law.support(),
            EnvironmentSpec::FiniteMarkov { alphabet, .. } => {
                alphabet.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
            }
            EnvironmentSpec::MovingSum { order, base } => {
                let (lo, hi) = base.support();
                ((*order + 1) as f64 * lo, (*order + 1) as f64 * hi)
            }
            EnvironmentSpec::Scripted { laws } => laws
                .iter()
                .map(Law::support)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| (a.min(l), b.max(h))),
        }
    }

    /// Whether the law of (Y_t) is shift invariant.
    pub fn is_stationary(&self) -> bool {
        match self {
            EnvironmentSpec::Iid { .. } | EnvironmentSpec::MovingSum { .. } => true,
            EnvironmentSpec::FiniteMarkov { transition, initial, .. } => {
                let k = initial.len();
                (0..k).all(|j| {
                    let next: f64 = (0..k).map(|i| initial[i] * transition[i][j]).sum();
                    (next - initial[j]).abs() < 1e-12
                })
            }
            EnvironmentSpec::Scripted { laws } => laws.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn spec_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn scripted_law(laws: &[Law], index: i64) -> &Law {
        &laws[index.clamp(0, laws.len() as i64 - 1) as usize]
    }
}

/// Values Y_start, ..., Y_{start+horizon}.
///
/// Draw order: i.i.d. and scripted specs use one uniform per index through the
/// law's quantile; finite Markov specs use one uniform per index (the first for
/// the initial law at `start`); moving sums draw the base values
/// Z_{start-m}, ..., Z_{start+horizon} in index order.
pub fn gen_environment_values(
    spec: &EnvironmentSpec,
    start: i64,
    horizon: usize,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let len = horizon + 1;
    Ok(match spec {
        EnvironmentSpec::Iid { law } => (0..len).map(|_| law.quantile(rng.uniform())).collect(),
        EnvironmentSpec::FiniteMarkov { alphabet, transition, initial } => {
            let mut out = Vec::with_capacity(len);
            let mut state = sample_index(initial, rng.uniform());
            out.push(alphabet[state]);
            for _ in 1..len {
                state = sample_index(&transition[state], rng.uniform());
                out.push(alphabet[state]);
            }
            out
        }
        EnvironmentSpec::MovingSum { order, base } => {
            let z: Vec<f64> = (0..len + order).map(|_| base.quantile(rng.uniform())).collect();
            z.windows(order + 1).map(|w| w.iter().sum()).collect()
        }
        EnvironmentSpec::Scripted { laws } => (0..len)
            .map(|i| EnvironmentSpec::scripted_law(laws, start + i as i64).quantile(rng.uniform()))
            .collect(),
    })
}

/// Like [`gen_environment_values`], tagging finite-alphabet values with their symbol index.
pub fn gen_environment(
    spec: &EnvironmentSpec,
    start: i64,
    horizon: usize,
    rng: &mut StreamRng,
) -> Result<Vec<EnvValue>> {
    let values = gen_environment_values(spec, start, horizon, rng)?;
    Ok(match spec.alphabet() {
        None => values.into_iter().map(EnvValue::Real).collect(),
        Some(alpha) => values.into_iter().map(|v| symbolize(&alpha, v)).collect::<Result<_>>()?,
    })
}

pub fn symbolize(alphabet: &[f64], v: f64) -> Result<EnvValue> {
    let pos = alphabet.partition_point(|a| *a < v - 1e-9 * (1.0 + v.abs()));
    match alphabet.get(pos) {
        Some(a) if (a - v).abs() <= 1e-9 * (1.0 + v.abs()) => Ok(EnvValue::Symbol { index: pos, value: *a }),
        _ => {
            // Markov alphabets need not be sorted.
            match alphabet.iter().position(|a| *a == v) {
                Some(index) => Ok(EnvValue::Symbol { index, value: v }),
                None => invalid(format!("value {v} outside the declared alphabet")),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    Real,
    NonNegative,
}

pub trait IterationMap: Sync {
    fn update(&self, x: &StateValue, y: &EnvValue, u: f64) -> StateValue;

    fn state_space(&self) -> StateSpace {
        StateSpace::Real
    }
}

/// An [`IterationMap`] backed by a closure.
pub struct FnMap<F> {
    f: F,
    space: StateSpace,
}

impl<F> FnMap<F>
where
    F: Fn(&StateValue, &EnvValue, f64) -> StateValue + Sync,
{
    pub fn new(f: F) -> Self {
        FnMap { f, space: StateSpace::Real }
    }

    pub fn nonnegative(f: F) -> Self {
        FnMap { f, space: StateSpace::NonNegative }
    }
}

impl<F> IterationMap for FnMap<F>
where
    F: Fn(&StateValue, &EnvValue, f64) -> StateValue + Sync,
{
    fn update(&self, x: &StateValue, y: &EnvValue, u: f64) -> StateValue {
        (self.f)(x, y, u)
    }

    fn state_space(&self) -> StateSpace {
        self.space
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<StateValue>,
    pub env: Vec<EnvValue>,
    pub start_index: usize,
    pub master_seed: u64,
    pub stream_ids: Vec<u64>,
}

fn check_state(map: &dyn IterationMap, x: &StateValue) -> Result<()> {
    if x.0.iter().any(|v| !v.is_finite()) {
        return invalid("state has a non-finite component");
    }
    if map.state_space() == StateSpace::NonNegative && x.0.iter().any(|v| *v < 0.0) {
        return invalid("negative state in a nonnegative state space");
    }
    Ok(())
}

fn run(
    map: &dyn IterationMap,
    x0: StateValue,
    from: usize,
    env: &[EnvValue],
    noise: &NoisePath,
    horizon: usize,
) -> Result<Vec<StateValue>> {
    if env.len() < horizon {
        return Err(Error::HorizonMismatch { needed: horizon, got: env.len() });
    }
    if noise.values.len() < horizon + 1 {
        return Err(Error::HorizonMismatch { needed: horizon + 1, got: noise.values.len() });
    }
    check_state(map, &x0)?;
    let mut states = Vec::with_capacity(horizon + 1 - from);
    states.push(x0);
    for t in from..horizon {
        let next = map.update(states.last().unwrap(), &env[t], noise.values[t + 1]);
        check_state(map, &next)?;
        states.push(next);
    }
    Ok(states)
}

/// X_0 = x0 and X_{t+1} = f(X_t, Y_t, ε_{t+1}) for t < horizon.
pub fn iterate(
    map: &dyn IterationMap,
    x0: StateValue,
    env: &[EnvValue],
    noise: &NoisePath,
    horizon: usize,
) -> Result<Trajectory> {
    let states = run(map, x0, 0, env, noise, horizon)?;
    Ok(Trajectory {
        states,
        env: env[..env.len().min(horizon + 1)].to_vec(),
        start_index: 0,
        master_seed: noise.master_seed,
        stream_ids: vec![noise.stream_id],
    })
}

/// Z^x_{s,t} for t = s..=horizon, sharing env and noise with the reference chain.
pub fn anchored_window(
    map: &dyn IterationMap,
    anchor: StateValue,
    s: usize,
    env: &[EnvValue],
    noise: &NoisePath,
    horizon: usize,
) -> Result<Trajectory> {
    if s > horizon {
        return Err(Error::OutOfRange(format!("anchor time {s} beyond horizon {horizon}")));
    }
    let states = run(map, anchor, s, env, noise, horizon)?;
    Ok(Trajectory {
        states,
        env: env[s.min(env.len())..env.len().min(horizon + 1)].to_vec(),
        start_index: s,
        master_seed: noise.master_seed,
        stream_ids: vec![noise.stream_id],
    })
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.start_index + self.states.len() - 1
    }

    /// CSV with header `t,state_0..state_{d-1},env`.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(1, StateValue::dim);
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",state_{i}"));
        }
        out.push_str(",env\n");
        for (k, x) in self.states.iter().enumerate() {
            out.push_str(&(self.start_index + k).to_string());
            for v in &x.0 {
                out.push_str(&format!(",{v}"));
            }
            match self.env.get(k) {
                Some(y) => out.push_str(&format!(",{}\n", y.value())),
                None => out.push_str(",\n"),
            }
        }
        out
    }

    /// Writes `<stem>.csv` and the metadata sidecar `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str, spec: &EnvironmentSpec) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(self.to_csv().as_bytes())?;
        let meta = serde_json::json!({
            "master_seed": self.master_seed,
            "stream_id": self.stream_ids.first().copied().unwrap_or(0),
            "spec_hash": spec.spec_hash(),
        });
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}
