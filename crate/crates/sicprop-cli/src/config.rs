//! Run configuration: a flat `key = value` file, overridden by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const OUT_DIR_ENV: &str = "SICPROP_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "sicprop-out";

/// Keys a config file may set besides `tol.<name>`.
const GLOBAL_KEYS: &[&str] = &["seed", "max_dim", "output", "out_dir", "sequential"];

/// Default tolerances, overridable with `tol.<name> = value` or `--tol name=value`.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("oracle", 1e-12),
    ("synthesis", 1e-10),
    ("green", 1e-12),
    ("caustic", 1e-8),
    ("compose", 1e-9),
    ("pathint_slope", 0.2),
    ("pathint_free", 1e-6),
    ("perturb_slope", 0.25),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Csv,
    Json,
    Both,
}

impl FromStr for OutputMode {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            _ => Err(UsageError(format!("output must be csv, json or both, got '{s}'"))),
        }
    }
}

impl OutputMode {
    pub fn csv(self) -> bool {
        self != Self::Json
    }

    pub fn json(self) -> bool {
        self != Self::Csv
    }
}

/// Raw `key = value` pairs from a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Blank lines and `#` comments are skipped; repeated keys keep the last value.
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key=value", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(UsageError(format!("config line {}: empty key", n + 1)));
            }
            entries.insert(normalize(key), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// Rejects keys that are neither global, `tol.*`, nor in `command_keys`.
    pub fn check_keys(&self, command_keys: &[&str]) -> Result<(), UsageError> {
        for key in self.entries.keys() {
            let known = GLOBAL_KEYS.contains(&key.as_str()) || key.starts_with("tol.") || command_keys.iter().any(|k| normalize(k) == *key);
            if !known {
                return Err(UsageError(format!("unknown config key '{key}'")));
            }
        }
        Ok(())
    }
}

/// Config keys may be spelled like their flags: `x-min` and `x_min` are one key.
fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

pub fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, UsageError> {
    raw.parse().map_err(|_| UsageError(format!("invalid value '{raw}' for '{key}'")))
}

/// Flag value if given, else the config entry, else the default.
pub fn resolve<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T, UsageError> {
    match (flag, cfg.get(key)) {
        (Some(v), _) => Ok(v),
        (None, Some(raw)) => parse_value(key, raw),
        (None, None) => Ok(default),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub max_dim: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub output: OutputMode,
    pub out_dir: PathBuf,
    pub sequential: bool,
}

/// Global options as they arrive from the command line.
#[derive(Debug, Clone, Default)]
pub struct GlobalFlags {
    pub seed: Option<u64>,
    pub max_dim: Option<usize>,
    pub output: Option<OutputMode>,
    pub out_dir: Option<PathBuf>,
    pub tol: Vec<String>,
    pub sequential: bool,
}

impl RunConfig {
    /// Precedence: flag, then `SICPROP_OUT_DIR` (out_dir only), then file, then default.
    pub fn resolve(flags: &GlobalFlags, cfg: &ConfigFile, env_out_dir: Option<String>) -> Result<Self, UsageError> {
        let seed = resolve(flags.seed, cfg, "seed", 0)?;
        let max_dim = resolve(flags.max_dim, cfg, "max_dim", sicprop::hilbert_core::DEFAULT_MAX_DIM)?;
        let output = resolve(flags.output, cfg, "output", OutputMode::Both)?;
        let sequential = flags.sequential || resolve(None, cfg, "sequential", false)?;
        let out_dir = match (&flags.out_dir, env_out_dir.filter(|s| !s.is_empty()), cfg.get("out_dir")) {
            (Some(p), _, _) => p.clone(),
            (None, Some(env), _) => PathBuf::from(env),
            (None, None, Some(file)) => PathBuf::from(file),
            (None, None, None) => PathBuf::from(DEFAULT_OUT_DIR),
        };

        let mut tolerances: BTreeMap<String, f64> = DEFAULT_TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let from_file = cfg.entries.iter().filter_map(|(k, v)| k.strip_prefix("tol.").map(|name| (name.to_string(), v.clone())));
        let from_flags = flags
            .tol
            .iter()
            .map(|t| t.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())).ok_or_else(|| UsageError(format!("--tol expects name=value, got '{t}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        for (name, raw) in from_file.chain(from_flags) {
            if !tolerances.contains_key(&name) {
                return Err(UsageError(format!("unknown tolerance '{name}'")));
            }
            let v: f64 = parse_value(&format!("tol.{name}"), &raw)?;
            if !(v > 0.0) {
                return Err(UsageError(format!("tolerance '{name}' must be positive")));
            }
            tolerances.insert(name, v);
        }
        Ok(Self { seed, max_dim, tolerances, output, out_dir, sequential })
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    pub fn exec(&self) -> sicprop::Exec {
        if self.sequential {
            sicprop::Exec::Sequential
        } else {
            sicprop::Exec::Parallel
        }
    }
}
