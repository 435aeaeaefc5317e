//! Run configuration: built-in defaults, an optional `key = value` file and
//! command-line flags, merged in that order of increasing precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analysis::{RooftopModel, SuccessMethod};
use crate::error::{usage, Result};
use crate::gaussian::lambda_from_mean;

/// Every key understood by the configuration file and the flags.
pub const KEYS: &[&str] = &[
    "lambda",
    "mbar",
    "g",
    "t",
    "t-max",
    "t-steps",
    "eta",
    "nmax",
    "n3max",
    "method",
    "pairs",
    "out",
    "cache",
    "threads",
    "mbar-min",
    "mbar-max",
    "steps",
    "shells",
    "grid-tmax",
    "collection",
    "prob",
    "rep-rate",
    "alpha",
    "beta",
    "build",
    "plot",
];

/// Defaults, also shown by `--help`.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("mbar", "1"),
    ("g", "1"),
    ("t-max", "20"),
    ("t-steps", "200"),
    ("n3max", "150"),
    ("method", "hybrid"),
    ("pairs", "1,1;1,3;3,3"),
    ("mbar-min", "0"),
    ("mbar-max", "5"),
    ("steps", "101"),
    ("shells", "100,200,300"),
    ("grid-tmax", "200"),
    ("collection", "0.05"),
    ("prob", "0.03125"),
    ("rep-rate", "769230.7692307692"),
];

/// Raw settings with the precedence already applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parse a flat `key = value` file; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            check_key(&k)?;
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(usage(format!("config line {}: duplicate key {k}", i + 1)));
            }
        }
        Self::from_map(values)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::parse_file_text(&std::fs::read_to_string(path)?)
    }

    /// Settings from explicit pairs, e.g. collected command-line flags.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, v) in pairs {
            check_key(k)?;
            values.insert(k.to_string(), v);
        }
        Self::from_map(values)
    }

    fn from_map(values: BTreeMap<String, String>) -> Result<Self> {
        if values.contains_key("lambda") && values.contains_key("mbar") {
            return Err(usage("give either lambda or mbar, not both"));
        }
        Ok(Self { values })
    }

    pub fn defaults() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// `self` overridden by `over`; setting either drive key replaces the other.
    pub fn overridden_by(mut self, over: &Settings) -> Self {
        for drive in ["lambda", "mbar"] {
            if over.values.contains_key(drive) {
                self.values.remove(if drive == "lambda" { "mbar" } else { "lambda" });
            }
        }
        self.values.extend(over.values.clone());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

fn check_key(k: &str) -> Result<()> {
    if KEYS.contains(&k) {
        Ok(())
    } else {
        Err(usage(format!("unknown setting `{k}`")))
    }
}

/// Method names accepted by `--method`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodName {
    Exact,
    Rooftop,
    Hybrid,
}

/// Typed configuration of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub m_bar: f64,
    pub g: f64,
    /// A single time instead of the `t-max`/`t-steps` grid.
    pub t: Option<f64>,
    pub t_max: f64,
    pub t_steps: usize,
    /// Empty when not given; each subcommand then picks its own list.
    pub etas: Vec<f64>,
    pub n_max: Option<usize>,
    pub n3_max: usize,
    pub method: MethodName,
    pub pairs: Vec<(u32, u32)>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub threads: Option<usize>,
    pub m_bar_min: f64,
    pub m_bar_max: f64,
    pub steps: usize,
    pub shells: Vec<usize>,
    pub grid_t_max: usize,
    pub collection: f64,
    pub prob: f64,
    pub rep_rate: f64,
    pub rooftop: RooftopModel,
    pub build: bool,
    pub plot: bool,
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| usage(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" | "" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

/// Parse `"1,1;1,3"` into count pairs.
pub fn parse_pairs(v: &str) -> Result<Vec<(u32, u32)>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|p| match list::<u32>("pairs", p)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(usage(format!("`pairs`: `{p}` is not n1,n2"))),
        })
        .collect()
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let get = |k: &str| s.get(k);
        let req = |k: &str| get(k).ok_or_else(|| usage(format!("missing setting `{k}`")));
        let (lambda, m_bar) = match (get("lambda"), get("mbar")) {
            (Some(l), None) => {
                let l: f64 = num("lambda", l)?;
                crate::gaussian::EprParams::from_lambda(l)?;
                (l, crate::gaussian::mean_from_lambda(l))
            }
            (None, Some(m)) => {
                let m: f64 = num("mbar", m)?;
                (lambda_from_mean(m)?, m)
            }
            _ => return Err(usage("exactly one of lambda or mbar is required")),
        };
        let method = match req("method")? {
            "exact" => MethodName::Exact,
            "rooftop" => MethodName::Rooftop,
            "hybrid" => MethodName::Hybrid,
            other => return Err(usage(format!("unknown method `{other}`; use exact, rooftop or hybrid"))),
        };
        let default_roof = RooftopModel::default();
        let cfg = RunConfig {
            lambda,
            m_bar,
            g: num("g", req("g")?)?,
            t: get("t").map(|v| num("t", v)).transpose()?,
            t_max: num("t-max", req("t-max")?)?,
            t_steps: num("t-steps", req("t-steps")?)?,
            etas: get("eta").map(|v| list("eta", v)).transpose()?.unwrap_or_default(),
            n_max: get("nmax").map(|v| num("nmax", v)).transpose()?,
            n3_max: num("n3max", req("n3max")?)?,
            method,
            pairs: parse_pairs(req("pairs")?)?,
            out: get("out").map(PathBuf::from),
            cache: get("cache").map(PathBuf::from),
            threads: get("threads").map(|v| num("threads", v)).transpose()?,
            m_bar_min: num("mbar-min", req("mbar-min")?)?,
            m_bar_max: num("mbar-max", req("mbar-max")?)?,
            steps: num("steps", req("steps")?)?,
            shells: list("shells", req("shells")?)?,
            grid_t_max: num("grid-tmax", req("grid-tmax")?)?,
            collection: num("collection", req("collection")?)?,
            prob: num("prob", req("prob")?)?,
            rep_rate: num("rep-rate", req("rep-rate")?)?,
            rooftop: RooftopModel {
                alpha: get("alpha")
                    .map(|v| num("alpha", v))
                    .transpose()?
                    .unwrap_or(default_roof.alpha),
                beta: get("beta")
                    .map(|v| num("beta", v))
                    .transpose()?
                    .unwrap_or(default_roof.beta),
            },
            build: get("build").map(|v| flag("build", v)).transpose()?.unwrap_or(false),
            plot: get("plot").map(|v| flag("plot", v)).transpose()?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(usage("g must be positive"));
        }
        if !(self.t_max >= 0.0) || self.t.is_some_and(|t| !(t >= 0.0)) {
            return Err(usage("times must be nonnegative"));
        }
        if self.etas.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(usage("every eta must lie in (0, 1]"));
        }
        if !(self.m_bar_min >= 0.0 && self.m_bar_max >= self.m_bar_min) || self.steps == 0 {
            return Err(usage("need 0 ≤ mbar-min ≤ mbar-max and steps ≥ 1"));
        }
        if self.n3_max == 0 || self.pairs.is_empty() || self.threads == Some(0) {
            return Err(usage("n3max, pairs and threads must be nonempty / positive"));
        }
        Ok(())
    }

    /// Success-probability method for a table of `n3_max` shells.
    pub fn success_method(&self) -> SuccessMethod {
        match self.method {
            MethodName::Exact => SuccessMethod::ExactTruncated(None),
            MethodName::Rooftop => SuccessMethod::Rooftop,
            MethodName::Hybrid => SuccessMethod::Hybrid(self.n3_max),
        }
    }

    /// `steps` evenly spaced mean photon numbers in `[mbar-min, mbar-max]`.
    pub fn m_bar_grid(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.m_bar_min];
        }
        let span = self.m_bar_max - self.m_bar_min;
        (0..self.steps)
            .map(|i| self.m_bar_min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }

    /// The single `t`, or `t-steps + 1` points on `[0, t-max]`.
    pub fn time_grid(&self) -> Vec<f64> {
        match self.t {
            Some(t) => vec![t],
            None => (0..=self.t_steps)
                .map(|i| self.t_max * i as f64 / self.t_steps.max(1) as f64)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(file: &str, flags: &[(&str, &str)]) -> Result<RunConfig> {
        let file = Settings::parse_file_text(file)?;
        let flags = Settings::from_pairs(flags.iter().map(|(k, v)| (*k, v.to_string())))?;
        RunConfig::from_settings(&Settings::defaults().overridden_by(&file).overridden_by(&flags))
    }

    #[test]
    fn precedence_is_flags_then_file_then_defaults() {
        let c = cfg("g = 2\nn3max = 40 # small\n", &[("g", "3")]).unwrap();
        assert_eq!((c.g, c.n3_max, c.t_max), (3.0, 40, 20.0));
        let c = cfg("mbar = 2", &[("lambda", "0.5")]).unwrap();
        assert_eq!(c.lambda, 0.5);
        let c = cfg("lambda = 0.5", &[]).unwrap();
        assert!((c.m_bar - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(cfg("lambda = 0.5\nmbar = 1", &[]).is_err());
        assert!(cfg("bogus = 1", &[]).is_err());
        assert!(cfg("g = 1\ng = 2", &[]).is_err());
        assert!(cfg("", &[("eta", "0.5,1.2")]).is_err());
        assert!(cfg("", &[("method", "magic")]).is_err());
        assert!(cfg("", &[("lambda", "1.0")]).is_err());
        assert!(cfg("", &[("pairs", "1,1;3")]).is_err());
    }

    #[test]
    fn grids_and_lists() {
        let c = cfg(
            "",
            &[
                ("pairs", "1,1;3,5"),
                ("eta", "1,0.1"),
                ("steps", "3"),
                ("mbar-max", "2"),
            ],
        )
        .unwrap();
        assert_eq!(c.pairs, vec![(1, 1), (3, 5)]);
        assert_eq!(c.etas, vec![1.0, 0.1]);
        assert_eq!(c.m_bar_grid(), vec![0.0, 1.0, 2.0]);
        assert_eq!(c.success_method(), SuccessMethod::Hybrid(150));
        assert_eq!(c.time_grid().len(), 201);
    }
}
