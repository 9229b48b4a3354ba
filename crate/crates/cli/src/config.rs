//! Pipeline configuration.
//!
//! A config file holds one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored. Command-line flags are merged into the same
//! key space, then the whole map is validated before any computation starts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use seqom::agreement::EmiMode;
use seqom::align::Normalization;
use seqom::cluster::Init;
use seqom::cost::{localized_constraint_holds, Denominator, Measure};
use seqom::seq::Format;

use crate::error::{CliError, Result};

/// Every key the pipeline understands, with its default (empty: no default).
pub const KEYS: &[(&str, &str)] = &[
    ("input", ""),
    ("format", "long"),
    ("scheme", ""),
    ("strict", "true"),
    ("measure", ""),
    ("substitution", ""),
    ("indel", "1"),
    ("q", "1"),
    ("e", ""),
    ("g", ""),
    ("denominator", "successor"),
    ("weighted", "true"),
    ("normalize_max2", "true"),
    ("normalize", "none"),
    ("dedupe", "true"),
    ("k", ""),
    ("k_range", ""),
    ("seed", "1"),
    ("init", "build"),
    ("benchmark", ""),
    ("emi", "rounded"),
    ("e_grid", "0:0.4:0.01"),
    ("threads", ""),
    ("matrix_format", "text"),
    ("out", ""),
];

/// Raw key/value settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config("config", format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if map.0.contains_key(key) {
                return Err(CliError::config("config", format!("line {}: duplicate key `{key}`", n + 1)));
            }
            map.set(key, value.trim())?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::config("config", format!("unknown key `{key}`")));
        }
        self.0.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn value(&self, key: &str) -> Option<&str> {
        self.get(key).or_else(|| {
            KEYS.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, d)| *d)
                .filter(|d| !d.is_empty())
        })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.value(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::config("config", format!("`{key}`: cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| CliError::config("config", format!("missing required key `{key}`")))
    }
}

/// Inclusive `a:b` range of cluster counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KRange {
    pub start: usize,
    pub end: usize,
}

impl KRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).collect()
    }
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or("expected `a:b`")?;
        let start: usize = a.trim().parse().map_err(|_| format!("bad start `{a}`"))?;
        let end: usize = b.trim().parse().map_err(|_| format!("bad end `{b}`"))?;
        if start < 2 || end < start {
            return Err(format!("need 2 <= a <= b, got {start}:{end}"));
        }
        Ok(KRange { start, end })
    }
}

/// `start:stop:step` grid of the localized `e` parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl EGrid {
    /// Grid points, rounded to 12 decimals so that `0.01 * i` style values are exact decimals.
    pub fn values(&self) -> Vec<f64> {
        let count = if self.stop > self.start {
            ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
        } else {
            1
        };
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

impl FromStr for EGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err("expected `start:stop:step`".into());
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}`"));
        let grid = EGrid {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        if !(0.0 <= grid.start && grid.start <= grid.stop && grid.stop <= 0.5) {
            return Err(format!("need 0 <= start <= stop <= 0.5, got {s}"));
        }
        if !(grid.step > 0.0 && grid.step.is_finite()) {
            return Err(format!("step must be positive, got {}", grid.step));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Text,
    Binary,
}

impl FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" => Ok(MatrixFormat::Text),
            "binary" => Ok(MatrixFormat::Binary),
            other => Err(format!("unknown matrix format `{other}` (expected text or binary)")),
        }
    }
}

/// Validated pipeline settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: Format,
    pub scheme: Option<PathBuf>,
    pub strict: bool,
    pub measure: Measure,
    pub substitution: Option<PathBuf>,
    pub indel: f64,
    pub q: usize,
    pub e: Option<f64>,
    pub g: Option<f64>,
    pub denominator: Denominator,
    pub weighted: bool,
    pub normalize_max2: bool,
    pub normalize: Normalization,
    pub dedupe: bool,
    pub k: Option<usize>,
    pub k_range: Option<KRange>,
    pub seed: u64,
    pub init: Init,
    pub benchmark: Option<String>,
    pub emi: EmiMode,
    pub e_grid: EGrid,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub matrix_format: MatrixFormat,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let cfg = PipelineConfig {
            input: map.required::<PathBuf>("input")?,
            format: map.required("format")?,
            scheme: map.parsed("scheme")?,
            strict: map.required("strict")?,
            measure: map.required("measure")?,
            substitution: map.parsed("substitution")?,
            indel: map.required("indel")?,
            q: map.required("q")?,
            e: map.parsed("e")?,
            g: map.parsed("g")?,
            denominator: map.required("denominator")?,
            weighted: map.required("weighted")?,
            normalize_max2: map.required("normalize_max2")?,
            normalize: map.required("normalize")?,
            dedupe: map.required("dedupe")?,
            k: map.parsed("k")?,
            k_range: map.parsed("k_range")?,
            seed: map.required("seed")?,
            init: map.required("init")?,
            benchmark: map.parsed("benchmark")?,
            emi: map.required("emi")?,
            e_grid: map.required("e_grid")?,
            threads: map.parsed("threads")?,
            matrix_format: map.required("matrix_format")?,
            out: map.parsed("out")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::config("config", msg));
        if self.q == 0 {
            return bad("`q` must be at least 1".into());
        }
        if self.threads == Some(0) {
            return bad("`threads` must be at least 1".into());
        }
        if self.k == Some(0) {
            return bad("`k` must be at least 1".into());
        }
        match (self.measure, &self.substitution) {
            (Measure::Custom, None) => return bad("measure `custom` needs `substitution`".into()),
            (Measure::Custom, Some(_)) => {
                if !(self.indel > 0.0 && self.indel.is_finite()) {
                    return bad(format!("`indel` must be positive, got {}", self.indel));
                }
            }
            (_, Some(_)) => return bad("`substitution` only applies to measure `custom`".into()),
            _ => {}
        }
        match (self.e, self.g) {
            (Some(e), Some(g)) => {
                if !self.measure.is_localized() && self.measure != Measure::Custom {
                    return bad(format!("`e` and `g` only apply to localized measures, not {}", self.measure));
                }
                if !(e >= 0.0 && g >= 0.0 && e.is_finite() && g.is_finite()) {
                    return bad(format!("`e` and `g` must be finite and non-negative (e = {e}, g = {g})"));
                }
                if !localized_constraint_holds(e, g) {
                    return bad(format!("2e + g ≥ 1 violated: e = {e}, g = {g} gives 2e + g = {}", 2.0 * e + g));
                }
            }
            (None, None) => {
                if self.measure.is_localized() {
                    return bad(format!("measure {} needs `e` and `g`", self.measure));
                }
            }
            _ => return bad("`e` and `g` must be given together".into()),
        }
        Ok(())
    }

    /// Flat `key = value` rendering, accepted back by [`ConfigMap::parse`].
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut m = BTreeMap::new();
        m.insert("input", self.input.display().to_string());
        m.insert("format", self.format.to_string());
        m.insert("scheme", opt(&self.scheme));
        m.insert("strict", self.strict.to_string());
        m.insert("measure", self.measure.to_string());
        m.insert("substitution", opt(&self.substitution));
        m.insert("indel", self.indel.to_string());
        m.insert("q", self.q.to_string());
        m.insert("e", num(self.e));
        m.insert("g", num(self.g));
        m.insert(
            "denominator",
            match self.denominator {
                Denominator::Successor => "successor",
                Denominator::All => "all",
            }
            .into(),
        );
        m.insert("weighted", self.weighted.to_string());
        m.insert("normalize_max2", self.normalize_max2.to_string());
        m.insert(
            "normalize",
            match self.normalize {
                Normalization::None => "none",
                Normalization::MaxLen => "maxlen",
            }
            .into(),
        );
        m.insert("dedupe", self.dedupe.to_string());
        m.insert("k", self.k.map(|k| k.to_string()).unwrap_or_default());
        m.insert(
            "k_range",
            self.k_range.map(|r| format!("{}:{}", r.start, r.end)).unwrap_or_default(),
        );
        m.insert("seed", self.seed.to_string());
        m.insert(
            "init",
            match self.init {
                Init::Build => "build",
                Init::Random => "random",
            }
            .into(),
        );
        m.insert("benchmark", self.benchmark.clone().unwrap_or_default());
        m.insert(
            "emi",
            match self.emi {
                EmiMode::Exact => "exact",
                EmiMode::Rounded => "rounded",
            }
            .into(),
        );
        m.insert(
            "e_grid",
            format!("{}:{}:{}", self.e_grid.start, self.e_grid.stop, self.e_grid.step),
        );
        m.insert(
            "matrix_format",
            match self.matrix_format {
                MatrixFormat::Text => "text",
                MatrixFormat::Binary => "binary",
            }
            .into(),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ConfigMap {
        ConfigMap::parse("input = data.csv\nmeasure = OMlev\nk = 3\n").unwrap()
    }

    #[test]
    fn parses_and_defaults() {
        let cfg = PipelineConfig::from_map(&base()).unwrap();
        assert_eq!(cfg.format, Format::Long);
        assert_eq!(cfg.k, Some(3));
        assert_eq!(cfg.q, 1);
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(ConfigMap::parse("inptu = x").is_err());
        assert!(ConfigMap::parse("k = 1\nk = 2").is_err());
        assert!(ConfigMap::parse("no equals sign").is_err());
    }

    #[test]
    fn localized_constraint() {
        let mut m = base();
        m.set("measure", "LOMtr").unwrap();
        m.set("e", "0.3").unwrap();
        m.set("g", "0.2").unwrap();
        let err = PipelineConfig::from_map(&m).unwrap_err();
        assert!(err.message.contains("2e + g ≥ 1 violated"));
        assert_eq!(err.exit_code(), 2);
        m.set("e", "0.4").unwrap();
        assert!(PipelineConfig::from_map(&m).is_ok());
        m.set("e", "").unwrap();
        assert!(PipelineConfig::from_map(&m).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for (key, value) in [("measure", "OMxx"), ("k_range", "1:4"), ("k_range", "5:3"), ("format", "tall"), ("q", "0"), ("e_grid", "0:0.6:0.1")] {
            let mut m = base();
            m.set(key, value).unwrap();
            assert!(PipelineConfig::from_map(&m).is_err(), "{key} = {value}");
        }
    }

    #[test]
    fn default_grid_has_41_points() {
        let grid: EGrid = "0:0.4:0.01".parse().unwrap();
        let values = grid.values();
        assert_eq!(values.len(), 41);
        assert_eq!(values[10], 0.1);
        assert_eq!(values[40], 0.4);
        let single: EGrid = "0.2:0.2:0.01".parse().unwrap();
        assert_eq!(single.values(), vec![0.2]);
    }

    #[test]
    fn map_round_trip() {
        let cfg = PipelineConfig::from_map(&base()).unwrap();
        let text: String = cfg.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(PipelineConfig::from_map(&ConfigMap::parse(&text).unwrap()).unwrap(), cfg);
    }
}
