//! Network instances: gains, noise levels, per-pair constraints, unit
//! conversions, Rayleigh channel generation and the scenario file format.
//!
//! Everything inside a [`Scenario`] is linear (watts, W/W, plain ratios).
//! dB and dBm only appear in the file format and at the CLI.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Name of the generator used for every seeded draw in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3, seed_from_u64, stream = trial index)";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::InvalidField { field: field.into(), reason: reason.into() }
    }

    /// The offending field, when the error is a validation error.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            ScenarioError::InvalidField { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> Result<f64, ScenarioError> {
    if !(watt > 0.0) || !watt.is_finite() {
        return Err(ScenarioError::field("power", format!("{watt} W has no dBm value")));
    }
    Ok(10.0 * watt.log10() + 30.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> Result<f64, ScenarioError> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(ScenarioError::field("ratio", format!("{ratio} has no dB value")));
    }
    Ok(10.0 * ratio.log10())
}

/// Per-pair noise levels and QoS/EH requirements, all linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    /// Antenna noise power δ² per destination (W).
    pub antenna_noise: Vec<f64>,
    /// Baseband noise of the information decoder σ² per destination (W).
    pub id_noise: Vec<f64>,
    /// Minimum SINR γ per destination (linear).
    pub sinr_threshold: Vec<f64>,
    /// Minimum harvested power per destination (W).
    pub eh_threshold: Vec<f64>,
    /// RF-to-DC conversion efficiency η, shared by every destination.
    pub efficiency: f64,
}

impl Constraints {
    pub fn uniform(
        n_pairs: usize,
        antenna_noise: f64,
        id_noise: f64,
        sinr_threshold: f64,
        eh_threshold: f64,
        efficiency: f64,
    ) -> Self {
        Constraints {
            antenna_noise: vec![antenna_noise; n_pairs],
            id_noise: vec![id_noise; n_pairs],
            sinr_threshold: vec![sinr_threshold; n_pairs],
            eh_threshold: vec![eh_threshold; n_pairs],
            efficiency,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.sinr_threshold.len()
    }

    pub fn validate(&self, n_pairs: usize) -> Result<(), ScenarioError> {
        let check = |field: &str, v: &[f64], strict: bool| -> Result<(), ScenarioError> {
            if v.len() != n_pairs {
                return Err(ScenarioError::field(field, format!("expected {n_pairs} entries, got {}", v.len())));
            }
            for (i, &x) in v.iter().enumerate() {
                let ok = x.is_finite() && if strict { x > 0.0 } else { x >= 0.0 };
                if !ok {
                    let bound = if strict { "> 0" } else { ">= 0" };
                    return Err(ScenarioError::field(field, format!("entry {i} is {x}, must be finite and {bound}")));
                }
            }
            Ok(())
        };
        check("antenna_noise", &self.antenna_noise, true)?;
        check("id_noise", &self.id_noise, true)?;
        check("sinr_threshold", &self.sinr_threshold, true)?;
        check("eh_threshold", &self.eh_threshold, false)?;
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(ScenarioError::field("efficiency", format!("{} is outside (0, 1)", self.efficiency)));
        }
        Ok(())
    }
}

/// A complete N-pair network instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    n_pairs: usize,
    /// Row-major, source-major: `gains[m * n_pairs + n]` is source m to destination n.
    gains: Vec<f64>,
    constraints: Constraints,
}

impl Scenario {
    /// Builds a scenario from a flat source-major gain matrix and linear constraints.
    pub fn new(n_pairs: usize, gains: Vec<f64>, constraints: Constraints) -> Result<Self, ScenarioError> {
        if n_pairs == 0 {
            return Err(ScenarioError::field("n_pairs", "must be at least 1"));
        }
        if gains.len() != n_pairs * n_pairs {
            return Err(ScenarioError::field(
                "gains",
                format!("expected {} entries, got {}", n_pairs * n_pairs, gains.len()),
            ));
        }
        for m in 0..n_pairs {
            for n in 0..n_pairs {
                let g = gains[m * n_pairs + n];
                if !g.is_finite() || g < 0.0 {
                    return Err(ScenarioError::field(
                        "gains",
                        format!("gain from source {m} to destination {n} is {g}, must be finite and >= 0"),
                    ));
                }
                if m == n && g <= 0.0 {
                    return Err(ScenarioError::field("gains", format!("direct gain of pair {n} must be > 0")));
                }
            }
        }
        constraints.validate(n_pairs)?;
        Ok(Scenario { n_pairs, gains, constraints })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    /// Gain from source `from` to destination `to`.
    #[inline]
    pub fn gain(&self, from: usize, to: usize) -> f64 {
        self.gains[from * self.n_pairs + to]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn antenna_noise(&self, n: usize) -> f64 {
        self.constraints.antenna_noise[n]
    }

    pub fn id_noise(&self, n: usize) -> f64 {
        self.constraints.id_noise[n]
    }

    pub fn sinr_threshold(&self, n: usize) -> f64 {
        self.constraints.sinr_threshold[n]
    }

    pub fn eh_threshold(&self, n: usize) -> f64 {
        self.constraints.eh_threshold[n]
    }

    pub fn efficiency(&self) -> f64 {
        self.constraints.efficiency
    }

    /// Same channel, different requirements.
    pub fn with_constraints(&self, constraints: Constraints) -> Result<Self, ScenarioError> {
        Scenario::new(self.n_pairs, self.gains.clone(), constraints)
    }

    /// Interference seen at destination `n` plus its antenna noise, for the
    /// given power vector: `sum_{m != n} p_m G_mn + δ²_n`.
    pub fn interference_plus_noise(&self, n: usize, powers: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (m, &p) in powers.iter().enumerate() {
            if m != n {
                acc += p * self.gain(m, n);
            }
        }
        acc + self.antenna_noise(n)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let value: Value = serde_json::from_str(text)?;
        ScenarioFile::from_value(&value)?.resolve()
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, ScenarioError> {
        Scenario::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the explicit-gains form of the scenario file.
    pub fn to_json_value(&self) -> Value {
        let db = |v: &[f64], f: fn(f64) -> Result<f64, ScenarioError>| -> Vec<Value> {
            v.iter().map(|&x| f(x).map(Value::from).unwrap_or(Value::Null)).collect()
        };
        let rows: Vec<Value> = (0..self.n_pairs)
            .map(|m| Value::from(self.gains[m * self.n_pairs..(m + 1) * self.n_pairs].to_vec()))
            .collect();
        let c = &self.constraints;
        serde_json::json!({
            "n_pairs": self.n_pairs,
            "gains": rows,
            "antenna_noise_dbm": db(&c.antenna_noise, watt_to_dbm),
            "id_noise_dbm": db(&c.id_noise, watt_to_dbm),
            "sinr_threshold_db": db(&c.sinr_threshold, linear_to_db),
            "eh_threshold_dbm": db(&c.eh_threshold, watt_to_dbm),
            "efficiency": c.efficiency,
        })
    }
}

/// Link distances for the path-loss model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distances {
    /// One direct-link distance for every pair, one cross-link distance for every interfering link.
    Uniform { inner: f64, inter: f64 },
    /// Full N×N matrix (source-major, row-major); the diagonal holds direct-link distances.
    Matrix(Vec<Vec<f64>>),
}

impl Distances {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        match self {
            Distances::Uniform { inner, inter } => {
                if from == to {
                    *inner
                } else {
                    *inter
                }
            }
            Distances::Matrix(rows) => rows[from][to],
        }
    }
}

/// Path-loss and fading parameters for random scenario generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n_pairs: usize,
    pub distances: Distances,
    /// Path-loss exponent ζ.
    pub path_loss_exponent: f64,
    /// Mean power gain at 1 m.
    pub attenuation_at_1m: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn uniform(n_pairs: usize, inner: f64, inter: f64, path_loss_exponent: f64, seed: u64) -> Self {
        ChannelConfig {
            n_pairs,
            distances: Distances::Uniform { inner, inter },
            path_loss_exponent,
            attenuation_at_1m: 1e-3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_pairs == 0 {
            return Err(ScenarioError::field("n_pairs", "must be at least 1"));
        }
        if !(2.0..=5.0).contains(&self.path_loss_exponent) {
            return Err(ScenarioError::field(
                "zeta",
                format!("path-loss exponent {} is outside [2, 5]", self.path_loss_exponent),
            ));
        }
        if !(self.attenuation_at_1m > 0.0 && self.attenuation_at_1m.is_finite()) {
            return Err(ScenarioError::field("attenuation_at_1m", "must be finite and > 0"));
        }
        if let Distances::Matrix(rows) = &self.distances {
            if rows.len() != self.n_pairs || rows.iter().any(|r| r.len() != self.n_pairs) {
                return Err(ScenarioError::field("distances", format!("expected a {0}x{0} matrix", self.n_pairs)));
            }
        }
        for m in 0..self.n_pairs {
            for n in 0..self.n_pairs {
                let d = self.distances.get(m, n);
                if !(d > 0.0 && d.is_finite()) {
                    return Err(ScenarioError::field(
                        "distances",
                        format!("distance from source {m} to destination {n} is {d}, must be > 0"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Mean power gain `attenuation_at_1m * d^-ζ` of a link.
    pub fn mean_gain(&self, from: usize, to: usize) -> f64 {
        self.attenuation_at_1m * self.distances.get(from, to).powf(-self.path_loss_exponent)
    }

    /// A fresh generator seeded from `seed`, positioned on stream 0.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Draws an exponential variate with the given mean (power of a Rayleigh amplitude).
#[inline]
pub fn exponential_gain<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    // gen() is in [0, 1), so 1 - u is in (0, 1] and the log is finite.
    let u: f64 = rng.gen();
    -mean * (1.0 - u).ln()
}

/// Draws unit-mean fading coefficients for an N-pair network.
///
/// Links are visited so that the leading k×k block is the same for every
/// N >= k: for each new pair k, the cross links between k and the earlier
/// pairs come first (j→k then k→j), then the direct link k→k.
pub fn draw_unit_fading<R: Rng + ?Sized>(n_pairs: usize, rng: &mut R) -> Vec<f64> {
    let mut fading = vec![0.0; n_pairs * n_pairs];
    for k in 0..n_pairs {
        for j in 0..k {
            fading[j * n_pairs + k] = exponential_gain(1.0, rng);
            fading[k * n_pairs + j] = exponential_gain(1.0, rng);
        }
        fading[k * n_pairs + k] = exponential_gain(1.0, rng);
    }
    fading
}

/// Quasi-static flat Rayleigh fading: every gain is exponential with mean
/// `attenuation_at_1m * d^-ζ` for its link distance.
pub fn generate_rayleigh_scenario<R: Rng + ?Sized>(
    cfg: &ChannelConfig,
    constraints: Constraints,
    rng: &mut R,
) -> Result<Scenario, ScenarioError> {
    cfg.validate()?;
    let n = cfg.n_pairs;
    let mut gains = draw_unit_fading(n, rng);
    for m in 0..n {
        for k in 0..n {
            gains[m * n + k] *= cfg.mean_gain(m, k);
        }
    }
    // A zero draw has probability ~2^-53; keep the direct-link invariant regardless.
    for k in 0..n {
        if gains[k * n + k] <= 0.0 {
            gains[k * n + k] = f64::MIN_POSITIVE;
        }
    }
    Scenario::new(n, gains, constraints)
}

/// Raw, field-by-field view of a scenario document.
///
/// Either `gains` (explicit form) or `distances` + `zeta` + `seed`
/// (generated form) must be present.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub n_pairs: usize,
    pub gains: Option<Vec<f64>>,
    pub channel: Option<ChannelConfig>,
    pub constraints: Constraints,
}

fn per_pair(obj: &Map<String, Value>, field: &str, n: usize) -> Result<Vec<f64>, ScenarioError> {
    let value = obj.get(field).ok_or_else(|| ScenarioError::field(field, "missing"))?;
    let number = |v: &Value| -> Result<Option<f64>, ScenarioError> {
        match v {
            Value::Null => Ok(None),
            Value::Number(x) => Ok(x.as_f64()),
            other => Err(ScenarioError::field(field, format!("expected a number, got {other}"))),
        }
    };
    let lift = |x: Option<f64>| -> Result<f64, ScenarioError> {
        x.ok_or_else(|| ScenarioError::field(field, "null is only accepted for eh_threshold_dbm"))
    };
    let values: Vec<Option<f64>> = match value {
        Value::Array(items) => {
            if items.len() != n {
                return Err(ScenarioError::field(field, format!("expected {n} entries, got {}", items.len())));
            }
            items.iter().map(number).collect::<Result<_, _>>()?
        }
        scalar => vec![number(scalar)?; n],
    };
    if field == "eh_threshold_dbm" {
        // null means "no harvesting requirement"
        return Ok(values.into_iter().map(|v| v.map(dbm_to_watt).unwrap_or(0.0)).collect());
    }
    values.into_iter().map(lift).collect()
}

fn finite(field: &str, xs: &[f64]) -> Result<(), ScenarioError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(ScenarioError::field(field, format!("entry {i} is not finite"))),
        None => Ok(()),
    }
}

fn matrix(field: &str, value: &Value, n: usize) -> Result<Vec<f64>, ScenarioError> {
    let as_num =
        |v: &Value| v.as_f64().ok_or_else(|| ScenarioError::field(field, format!("expected a number, got {v}")));
    let items = value.as_array().ok_or_else(|| ScenarioError::field(field, "expected an array"))?;
    if items.len() == n * n && items.iter().all(Value::is_number) {
        return items.iter().map(as_num).collect();
    }
    if items.len() != n {
        return Err(ScenarioError::field(field, format!("expected {n} rows or {} entries", n * n)));
    }
    let mut out = Vec::with_capacity(n * n);
    for (i, row) in items.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == n)
            .ok_or_else(|| ScenarioError::field(field, format!("row {i} must have {n} entries")))?;
        for v in row {
            out.push(as_num(v)?);
        }
    }
    Ok(out)
}

impl ScenarioFile {
    const FIELDS: [&'static str; 11] = [
        "n_pairs",
        "gains",
        "distances",
        "zeta",
        "seed",
        "attenuation_at_1m",
        "antenna_noise_dbm",
        "id_noise_dbm",
        "sinr_threshold_db",
        "eh_threshold_dbm",
        "efficiency",
    ];

    pub fn from_value(value: &Value) -> Result<Self, ScenarioError> {
        let obj = value.as_object().ok_or_else(|| ScenarioError::field("<root>", "expected a JSON object"))?;
        if let Some(unknown) = obj.keys().find(|k| !Self::FIELDS.contains(&k.as_str())) {
            return Err(ScenarioError::field(unknown.clone(), "unknown field"));
        }
        let n_pairs =
            obj.get("n_pairs")
                .and_then(Value::as_u64)
                .filter(|&n| n >= 1)
                .ok_or_else(|| ScenarioError::field("n_pairs", "must be a positive integer"))? as usize;

        let antenna = per_pair(obj, "antenna_noise_dbm", n_pairs)?;
        let id = per_pair(obj, "id_noise_dbm", n_pairs)?;
        let sinr = per_pair(obj, "sinr_threshold_db", n_pairs)?;
        let eh = per_pair(obj, "eh_threshold_dbm", n_pairs)?;
        finite("antenna_noise_dbm", &antenna)?;
        finite("id_noise_dbm", &id)?;
        finite("sinr_threshold_db", &sinr)?;
        let efficiency = obj
            .get("efficiency")
            .and_then(Value::as_f64)
            .ok_or_else(|| ScenarioError::field("efficiency", "missing or not a number"))?;
        let constraints = Constraints {
            antenna_noise: antenna.into_iter().map(dbm_to_watt).collect(),
            id_noise: id.into_iter().map(dbm_to_watt).collect(),
            sinr_threshold: sinr.into_iter().map(db_to_linear).collect(),
            eh_threshold: eh,
            efficiency,
        };

        let gains = match obj.get("gains") {
            Some(v) => Some(matrix("gains", v, n_pairs)?),
            None => None,
        };
        let channel = match obj.get("distances") {
            None => None,
            Some(d) => {
                let distances = match d {
                    Value::Object(o) => {
                        let get = |k: &str| {
                            o.get(k).and_then(Value::as_f64).ok_or_else(|| {
                                ScenarioError::field("distances", format!("`{k}` missing or not a number"))
                            })
                        };
                        Distances::Uniform { inner: get("inner")?, inter: get("inter")? }
                    }
                    other => {
                        let flat = matrix("distances", other, n_pairs)?;
                        Distances::Matrix(flat.chunks(n_pairs).map(<[f64]>::to_vec).collect())
                    }
                };
                let zeta = obj
                    .get("zeta")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| ScenarioError::field("zeta", "required with `distances`"))?;
                let seed = obj
                    .get("seed")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| ScenarioError::field("seed", "required with `distances`, as a u64"))?;
                let attenuation = match obj.get("attenuation_at_1m") {
                    None => 1e-3,
                    Some(v) => v.as_f64().ok_or_else(|| ScenarioError::field("attenuation_at_1m", "not a number"))?,
                };
                Some(ChannelConfig {
                    n_pairs,
                    distances,
                    path_loss_exponent: zeta,
                    attenuation_at_1m: attenuation,
                    seed,
                })
            }
        };
        match (&gains, &channel) {
            (Some(_), Some(_)) => Err(ScenarioError::field("gains", "give either `gains` or `distances`, not both")),
            (None, None) => Err(ScenarioError::field("gains", "missing (or give `distances`, `zeta` and `seed`)")),
            _ => Ok(ScenarioFile { n_pairs, gains, channel, constraints }),
        }
    }

    pub fn resolve(self) -> Result<Scenario, ScenarioError> {
        match (self.gains, self.channel) {
            (Some(gains), _) => Scenario::new(self.n_pairs, gains, self.constraints),
            (None, Some(cfg)) => {
                let mut rng = cfg.rng();
                generate_rayleigh_scenario(&cfg, self.constraints, &mut rng)
            }
            (None, None) => unreachable!("checked in from_value"),
        }
    }
}
