//! Experiment configuration: `key = value` lines, `#` comments, with later
//! overrides (command-line flags) taking precedence over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::accel::{GammaMode, Tau};
use crate::error::{Error, Result};
use crate::models::{DesignKind, DesignSpec, ModelKind};
use crate::newton::{
    geometric_checkpoints, MuNuMethod, NewtonConfig, SketchConfig, StepSchedule, DEFAULT_WARMUP,
};
use crate::sketching::{SketchKind, SketchSpec};

/// Every accepted key, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "dim",
    "design",
    "r",
    "sigma2",
    "sketch",
    "columns",
    "tau",
    "gamma_mode",
    "mu_nu",
    "mc_samples_mu_nu",
    "refresh_every",
    "steps",
    "reps",
    "seed",
    "c_phi",
    "phi",
    "q",
    "checkpoints",
    "warmup",
    "out",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckpointSpec {
    /// `{⌈T/2^k⌉ : k = 0..levels}`
    Geometric(u32),
    List(Vec<u64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuNuChoice {
    /// Exact for Kaczmarz, Monte-Carlo otherwise.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub design: DesignKind,
    pub r: f64,
    pub sigma2: f64,
    pub sketch: SketchKind,
    pub columns: usize,
    pub tau: Tau,
    pub gamma_mode: GammaMode,
    pub mu_nu: MuNuChoice,
    pub mc_samples_mu_nu: usize,
    pub refresh_every: u64,
    pub steps: u64,
    pub reps: usize,
    pub seed: u64,
    pub c_phi: f64,
    pub phi: f64,
    pub q: f64,
    pub checkpoints: CheckpointSpec,
    /// Steps whose iterates are kept out of `Σ̂`.
    pub warmup: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Linear,
            dim: 5,
            design: DesignKind::Identity,
            r: 0.4,
            sigma2: 1.0,
            sketch: SketchKind::Kaczmarz,
            columns: 1,
            tau: Tau::Steps(10),
            gamma_mode: GammaMode::Estimated,
            mu_nu: MuNuChoice::Auto,
            mc_samples_mu_nu: crate::accel::DEFAULT_MC_SAMPLES,
            refresh_every: 100,
            steps: 200_000,
            reps: 200,
            seed: 1,
            c_phi: 1.0,
            phi: 0.501,
            q: 0.05,
            checkpoints: CheckpointSpec::Geometric(8),
            warmup: DEFAULT_WARMUP,
            out: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "model" => {
                self.model = match v {
                    "linear" => ModelKind::Linear,
                    "logistic" => ModelKind::Logistic,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected linear|logistic, got `{v}`"),
                        ))
                    }
                }
            }
            "dim" | "d" => self.dim = parse(key, v)?,
            "design" => {
                self.design = match v {
                    "identity" => DesignKind::Identity,
                    "toeplitz" => DesignKind::Toeplitz,
                    "equicorr" => DesignKind::EquiCorr,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected identity|toeplitz|equicorr, got `{v}`"),
                        ))
                    }
                }
            }
            "r" => self.r = parse(key, v)?,
            "sigma2" => self.sigma2 = parse(key, v)?,
            "sketch" => {
                self.sketch = match v {
                    "kaczmarz" => SketchKind::Kaczmarz,
                    "gaussian" => SketchKind::Gaussian,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected kaczmarz|gaussian, got `{v}`"),
                        ))
                    }
                }
            }
            "columns" => self.columns = parse(key, v)?,
            "tau" => {
                self.tau = if v == "exact" {
                    Tau::Exact
                } else {
                    Tau::Steps(parse(key, v)?)
                }
            }
            "gamma_mode" => {
                self.gamma_mode = match v {
                    "estimated" => GammaMode::Estimated,
                    "unit" => GammaMode::Unit,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected estimated|unit, got `{v}`"),
                        ))
                    }
                }
            }
            "mu_nu" => {
                self.mu_nu = match v {
                    "auto" => MuNuChoice::Auto,
                    "exact" => MuNuChoice::Exact,
                    "mc" => MuNuChoice::MonteCarlo,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected auto|exact|mc, got `{v}`"),
                        ))
                    }
                }
            }
            "mc_samples_mu_nu" => self.mc_samples_mu_nu = parse(key, v)?,
            "refresh_every" => self.refresh_every = parse(key, v)?,
            "steps" => self.steps = parse_count(key, v)?,
            "reps" => self.reps = parse_count(key, v)? as usize,
            "seed" => self.seed = parse(key, v)?,
            "c_phi" => self.c_phi = parse(key, v)?,
            "phi" => self.phi = parse(key, v)?,
            "q" => self.q = parse(key, v)?,
            "checkpoints" => {
                self.checkpoints = if let Some(levels) = v.strip_prefix("geom:") {
                    CheckpointSpec::Geometric(parse(key, levels)?)
                } else {
                    CheckpointSpec::List(
                        v.split(',')
                            .map(|s| parse_count(key, s.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
            }
            "warmup" => self.warmup = parse_count(key, v)?,
            "out" => {
                self.out = if v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::config("r", format!("{} outside [0, 1)", self.r)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::config("sigma2", "must be positive"));
        }
        SketchSpec::new(self.sketch, self.columns)
            .map_err(|_| Error::config("columns", "must be positive"))?;
        StepSchedule::new(self.c_phi, self.phi)?;
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config("q", format!("{} outside (0, 1)", self.q)));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        let cps = self.checkpoint_set();
        if cps.is_empty() || cps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "checkpoints",
                "must be a nonempty increasing list",
            ));
        }
        if *cps.last().expect("nonempty") > self.steps {
            return Err(Error::config(
                "checkpoints",
                format!("must not exceed steps = {}", self.steps),
            ));
        }
        if cps[0] <= self.warmup {
            return Err(Error::config(
                "warmup",
                format!(
                    "{} leaves no iterates for Σ̂ at checkpoint {}",
                    self.warmup, cps[0]
                ),
            ));
        }
        if self.mu_nu == MuNuChoice::Exact && self.sketch != SketchKind::Kaczmarz {
            return Err(Error::config("mu_nu", "exact needs kaczmarz sketching"));
        }
        self.newton()?.sketch.validate()
    }

    pub fn checkpoint_set(&self) -> Vec<u64> {
        match &self.checkpoints {
            CheckpointSpec::Geometric(levels) => geometric_checkpoints(self.steps, *levels),
            CheckpointSpec::List(v) => v.clone(),
        }
    }

    pub fn design_spec(&self) -> DesignSpec {
        DesignSpec {
            kind: self.design,
            r: self.r,
            dim: self.dim,
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.c_phi, self.phi)
    }

    pub fn sketch_config(&self) -> Result<SketchConfig> {
        let mu_nu = match (self.mu_nu, self.sketch) {
            (MuNuChoice::Exact, _) | (MuNuChoice::Auto, SketchKind::Kaczmarz) => MuNuMethod::Exact,
            _ => MuNuMethod::MonteCarlo(self.mc_samples_mu_nu),
        };
        Ok(SketchConfig {
            spec: SketchSpec::new(self.sketch, self.columns)?,
            tau: self.tau,
            gamma_mode: self.gamma_mode,
            mu_nu,
            refresh_every: self.refresh_every,
        })
    }

    pub fn newton(&self) -> Result<NewtonConfig> {
        Ok(NewtonConfig {
            model: self.model,
            schedule: self.schedule()?,
            sketch: self.sketch_config()?,
        })
    }

    /// Resolved values of every key, as they would be written in a file.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let lower = |s: &str| s.to_ascii_lowercase();
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("model", lower(&format!("{:?}", self.model)));
        put("dim", self.dim.to_string());
        put("design", lower(&format!("{:?}", self.design)));
        put("r", self.r.to_string());
        put("sigma2", self.sigma2.to_string());
        put("sketch", lower(&format!("{:?}", self.sketch)));
        put("columns", self.columns.to_string());
        put("tau", self.tau.to_string());
        put("gamma_mode", lower(&format!("{:?}", self.gamma_mode)));
        put(
            "mu_nu",
            match self.mu_nu {
                MuNuChoice::Auto => "auto",
                MuNuChoice::Exact => "exact",
                MuNuChoice::MonteCarlo => "mc",
            }
            .into(),
        );
        put("mc_samples_mu_nu", self.mc_samples_mu_nu.to_string());
        put("refresh_every", self.refresh_every.to_string());
        put("steps", self.steps.to_string());
        put("reps", self.reps.to_string());
        put("seed", self.seed.to_string());
        put("c_phi", self.c_phi.to_string());
        put("phi", self.phi.to_string());
        put("q", self.q.to_string());
        put(
            "checkpoints",
            match &self.checkpoints {
                CheckpointSpec::Geometric(l) => format!("geom:{l}"),
                CheckpointSpec::List(v) => {
                    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
                }
            },
        );
        put("warmup", self.warmup.to_string());
        put(
            "out",
            self.out
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        m
    }
}

/// Accepts plain integers and scientific shorthand such as `2e5`.
fn parse_count(key: &str, v: &str) -> Result<u64> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    let f: f64 = parse(key, v)?;
    if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(Error::config(key, format!("`{v}` is not a count")))
    }
}

/// Parses `key = value` text. Blank lines and `#` comments are skipped.
pub fn parse_config_str(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| {
                Error::config(
                    format!("line {}", n + 1),
                    format!("expected key = value, got `{line}`"),
                )
            })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// File values (if any), then `overrides` in order, then validation.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        for (k, v) in parse_config_str(&text)? {
            cfg.set(&k, &v)?;
        }
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(None, &kv(&[("model", "linear"), ("dim", "2")])).unwrap();
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.reps, 200);
        assert_eq!(cfg.phi, 0.501);
        assert_eq!(cfg.tau, Tau::Steps(10));
        assert_eq!(cfg.warmup, DEFAULT_WARMUP);
        assert_eq!(cfg.echo().len(), CONFIG_KEYS.len());
        for k in CONFIG_KEYS {
            assert!(cfg.echo().contains_key(*k), "{k}");
        }
    }

    #[test]
    fn tau_exact_and_counts() {
        let cfg = parse_config(
            None,
            &kv(&[
                ("tau", "exact"),
                ("steps", "2e5"),
                ("checkpoints", "10,100,200000"),
                ("warmup", "5"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.tau, Tau::Exact);
        assert_eq!(cfg.steps, 200_000);
        assert_eq!(cfg.checkpoint_set(), vec![10, 100, 200_000]);
    }

    #[test]
    fn range_violations_name_the_key() {
        for (k, v) in [
            ("phi", "0.4"),
            ("q", "1.0"),
            ("reps", "0"),
            ("r", "1.2"),
            ("columns", "0"),
            ("checkpoints", "5,3"),
            ("warmup", "1e9"),
        ] {
            match parse_config(None, &kv(&[(k, v)])) {
                Err(Error::InvalidConfig { key, .. }) => assert_eq!(key, k),
                other => panic!("{k}={v}: {other:?}"),
            }
        }
        assert!(matches!(
            parse_config(None, &kv(&[("bogus", "1")])),
            Err(Error::InvalidConfig { key, .. }) if key == "bogus"
        ));
        assert!(parse_config(None, &kv(&[("dim", "two")])).is_err());
        assert!(parse_config(None, &kv(&[("sketch", "gaussian"), ("mu_nu", "exact")])).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(
            &path,
            "# linear run\nmodel = logistic\ndim=3 # inline\n\ndesign = toeplitz\n",
        )
        .unwrap();
        let cfg = parse_config(Some(&path), &kv(&[("dim", "4")])).unwrap();
        assert_eq!(cfg.model, ModelKind::Logistic);
        assert_eq!(cfg.design, DesignKind::Toeplitz);
        assert_eq!(cfg.dim, 4);
        assert!(matches!(
            parse_config(Some(&dir.path().join("missing")), &[]),
            Err(Error::Io { .. })
        ));
        std::fs::write(&path, "model linear\n").unwrap();
        assert!(parse_config(Some(&path), &[]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(
            None,
            &kv(&[
                ("sketch", "gaussian"),
                ("columns", "2"),
                ("gamma_mode", "unit"),
                ("checkpoints", "geom:3"),
            ]),
        )
        .unwrap();
        let mut again = ExperimentConfig::default();
        for (k, v) in cfg.echo() {
            again.set(&k, &v).unwrap();
        }
        assert_eq!(again, cfg);
    }
}
