//! Flat JSON experiment configs. Keys carry their unit; dB quantities are
//! converted to linear here and nowhere else.

use mmwave_assoc::channel::{db_to_linear, dbm_per_mhz_to_mw_per_hz, linear_to_db};
use mmwave_assoc::sim::ExactMode;
use mmwave_assoc::ExperimentConfig;
use serde_json::{Map, Value};

/// Every accepted key, in the order they are documented.
pub const ACCEPTED_KEYS: &[&str] = &[
    "n_aps",
    "n_clients",
    "slots",
    "seed",
    "daa_iters",
    "step_scale",
    "target_snr_db",
    "ap_spacing_factor",
    "demand_max_bps",
    "wavelength_m",
    "noise_dbm_per_mhz",
    "bandwidth_hz",
    "ref_distance_m",
    "path_loss_exp",
    "tx_power_mw",
    "tx_gain_db",
    "rx_gain_db",
    "interference_dbm_per_mhz",
    "exact",
    "exact_budget",
    "resample_topology",
    "record_curves",
];

#[derive(Debug)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub unknown_keys: Vec<String>,
}

fn field_err(key: &str, expected: &str, got: &Value) -> String {
    format!("config field `{key}`: expected {expected}, got {got}")
}

fn as_f64(key: &str, v: &Value) -> Result<f64, String> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| field_err(key, "a finite number", v))
}

fn as_count(key: &str, v: &Value) -> Result<usize, String> {
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| field_err(key, "a nonnegative integer", v))
}

fn as_bool(key: &str, v: &Value) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| field_err(key, "true or false", v))
}

pub fn parse_exact_mode(s: &str) -> Option<ExactMode> {
    match s {
        "off" => Some(ExactMode::Off),
        "auto" => Some(ExactMode::Auto),
        "forced" => Some(ExactMode::Forced),
        _ => None,
    }
}

/// Library defaults, with the convergence curves switched on.
pub fn cli_defaults() -> ExperimentConfig {
    ExperimentConfig {
        record_curves: true,
        ..Default::default()
    }
}

/// Parses a flat config document on top of [`cli_defaults`]. Unknown
/// keys are returned, not rejected. Range checks are left to
/// [`ExperimentConfig::validate`].
pub fn parse_config(text: &str) -> Result<ParsedConfig, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let Value::Object(map) = doc else {
        return Err("config must be a JSON object of key/value pairs".into());
    };
    from_map(&map)
}

fn from_map(map: &Map<String, Value>) -> Result<ParsedConfig, String> {
    let mut cfg = cli_defaults();
    let mut unknown_keys = Vec::new();
    for (key, v) in map {
        let k = key.as_str();
        match k {
            "n_aps" => cfg.n_aps = as_count(k, v)?,
            "n_clients" => cfg.n_clients = as_count(k, v)?,
            "slots" => cfg.slots = as_count(k, v)?,
            "seed" => cfg.seed = v.as_u64().ok_or_else(|| field_err(k, "a nonnegative integer", v))?,
            "daa_iters" => cfg.daa_iters = as_count(k, v)?,
            "step_scale" => cfg.step_scale = as_f64(k, v)?,
            "target_snr_db" => cfg.target_snr_db = as_f64(k, v)?,
            "ap_spacing_factor" => cfg.ap_spacing_factor = as_f64(k, v)?,
            "demand_max_bps" => cfg.demand_max = as_f64(k, v)?,
            "wavelength_m" => cfg.channel.wavelength = as_f64(k, v)?,
            "noise_dbm_per_mhz" => cfg.channel.noise_density = dbm_per_mhz_to_mw_per_hz(as_f64(k, v)?),
            "bandwidth_hz" => cfg.channel.bandwidth = as_f64(k, v)?,
            "ref_distance_m" => cfg.channel.ref_distance = as_f64(k, v)?,
            "path_loss_exp" => cfg.channel.path_loss_exp = as_f64(k, v)?,
            "tx_power_mw" => cfg.channel.tx_power = as_f64(k, v)?,
            "tx_gain_db" => cfg.channel.tx_gain = db_to_linear(as_f64(k, v)?),
            "rx_gain_db" => cfg.channel.rx_gain = db_to_linear(as_f64(k, v)?),
            "interference_dbm_per_mhz" => {
                cfg.channel.interference_density = match v {
                    Value::Null => 0.0,
                    _ => dbm_per_mhz_to_mw_per_hz(as_f64(k, v)?),
                }
            }
            "exact" => {
                cfg.exact = v
                    .as_str()
                    .and_then(parse_exact_mode)
                    .ok_or_else(|| field_err(k, "one of \"off\", \"auto\", \"forced\"", v))?
            }
            "exact_budget" => cfg.exact_budget = v.as_u64().ok_or_else(|| field_err(k, "a nonnegative integer", v))?,
            "resample_topology" => cfg.resample_topology = as_bool(k, v)?,
            "record_curves" => cfg.record_curves = as_bool(k, v)?,
            _ => unknown_keys.push(key.clone()),
        }
    }
    Ok(ParsedConfig { config: cfg, unknown_keys })
}

/// The flat, unit-suffixed view of a config, as embedded in outputs.
pub fn to_flat(cfg: &ExperimentConfig) -> Map<String, Value> {
    let ch = &cfg.channel;
    let mw_per_hz_to_dbm_per_mhz = |x: f64| linear_to_db(x * 1e6);
    let exact = match cfg.exact {
        ExactMode::Off => "off",
        ExactMode::Auto => "auto",
        ExactMode::Forced => "forced",
    };
    let interference = if ch.interference_density > 0.0 {
        Value::from(mw_per_hz_to_dbm_per_mhz(ch.interference_density))
    } else {
        Value::Null
    };
    let pairs: Vec<(&str, Value)> = vec![
        ("n_aps", cfg.n_aps.into()),
        ("n_clients", cfg.n_clients.into()),
        ("slots", cfg.slots.into()),
        ("seed", cfg.seed.into()),
        ("daa_iters", cfg.daa_iters.into()),
        ("step_scale", cfg.step_scale.into()),
        ("target_snr_db", cfg.target_snr_db.into()),
        ("ap_spacing_factor", cfg.ap_spacing_factor.into()),
        ("demand_max_bps", cfg.demand_max.into()),
        ("wavelength_m", ch.wavelength.into()),
        ("noise_dbm_per_mhz", mw_per_hz_to_dbm_per_mhz(ch.noise_density).into()),
        ("bandwidth_hz", ch.bandwidth.into()),
        ("ref_distance_m", ch.ref_distance.into()),
        ("path_loss_exp", ch.path_loss_exp.into()),
        ("tx_power_mw", ch.tx_power.into()),
        ("tx_gain_db", linear_to_db(ch.tx_gain).into()),
        ("rx_gain_db", linear_to_db(ch.rx_gain).into()),
        ("interference_dbm_per_mhz", interference),
        ("exact", exact.into()),
        ("exact_budget", cfg.exact_budget.into()),
        ("resample_topology", cfg.resample_topology.into()),
        ("record_curves", cfg.record_curves.into()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
