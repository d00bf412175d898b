//! Run configuration: embedded defaults, an optional `key = value` file, then
//! command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fbe_core::ensemble::BootstrapConfig;
use fbe_core::fitter::FitConfig;
use fbe_core::scanner::ScanConfig;
use sha2::{Digest, Sha256};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scan: ScanConfig,
    pub fit: FitConfig,
    pub bootstrap: BootstrapConfig,
    pub seed: u64,
    /// Trailing up-day fraction windows, in observations.
    pub up_windows: Vec<usize>,
    /// Derivative windows, made odd before use.
    pub sg_windows: Vec<usize>,
    pub poly_order: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scan: ScanConfig::default(),
            fit: FitConfig::default(),
            bootstrap: BootstrapConfig::default(),
            seed: DEFAULT_SEED,
            up_windows: vec![30, 60, 90],
            sg_windows: vec![120, 180],
            poly_order: 3,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("invalid value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid value `{value}` for `{key}`: expected true or false"),
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("`{key}` needs at least one value");
    }
    Ok(items)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dt1" => self.scan.dt1 = parse_num(key, v)?,
            "dt2" => self.scan.dt2 = parse_num(key, v)?,
            "min_len" => self.scan.min_len = parse_num(key, v)?,
            "max_len" => self.scan.max_len = parse_num(key, v)?,
            "n_t2" => self.scan.n_t2 = parse_num(key, v)?,
            "top_k" => self.scan.top_k = parse_num(key, v)?,
            "n_starts" => self.fit.n_starts = parse_num(key, v)?,
            "tc_grid" => self.fit.tc_grid = parse_list(key, v)?,
            "alpha_starts" => self.fit.alpha_starts = parse_list(key, v)?,
            "omega_starts" => self.fit.omega_starts = parse_list(key, v)?,
            "max_iterations" => self.fit.max_iterations = parse_num(key, v)?,
            "rel_tol" => self.fit.rel_tol = parse_num(key, v)?,
            "min_observations" => self.fit.min_observations = parse_num(key, v)?,
            "alpha_min" => self.fit.filter.alpha_min = parse_num(key, v)?,
            "alpha_max" => self.fit.filter.alpha_max = parse_num(key, v)?,
            "omega_min" => self.fit.filter.omega_min = parse_num(key, v)?,
            "omega_max" => self.fit.filter.omega_max = parse_num(key, v)?,
            "require_b_negative" => self.fit.filter.require_b_negative = parse_bool(key, v)?,
            "tc_after_t2" => self.fit.filter.tc_after_t2 = parse_bool(key, v)?,
            "tc_max_horizon" => self.fit.filter.tc_max_horizon = parse_num(key, v)?,
            "n_bootstrap" => self.bootstrap.n_bootstrap = parse_num(key, v)?,
            "horizon_days" => self.bootstrap.horizon_days = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "up_windows" => self.up_windows = parse_list(key, v)?,
            "sg_windows" => self.sg_windows = parse_list(key, v)?,
            "poly_order" => self.poly_order = parse_num(key, v)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("{origin}:{}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v)
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Seeds flow into the fitter and bootstrap, then all invariants are
    /// checked.
    pub fn finish(mut self) -> Result<Self> {
        self.fit.seed = self.seed;
        self.bootstrap.seed = self.seed;
        let checks = [
            self.scan.validate(),
            self.fit.validate(),
            self.bootstrap.validate(),
        ];
        for c in checks {
            c.map_err(anyhow::Error::msg)
                .context("invalid configuration")?;
        }
        if self.up_windows.iter().any(|&w| w < 2) {
            bail!("invalid configuration: up_windows must all be >= 2");
        }
        if self.poly_order < 1 {
            bail!("invalid configuration: poly_order must be >= 1");
        }
        if self
            .sg_windows
            .iter()
            .any(|&w| (w | 1) < self.poly_order + 2)
        {
            bail!("invalid configuration: sg_windows too short for poly_order");
        }
        Ok(self)
    }

    /// Every setting as sorted `key = value` lines.
    pub fn render(&self) -> String {
        let f = &self.fit.filter;
        let mut rows = vec![
            ("alpha_max", f.alpha_max.to_string()),
            ("alpha_min", f.alpha_min.to_string()),
            ("alpha_starts", join(&self.fit.alpha_starts)),
            ("dt1", self.scan.dt1.to_string()),
            ("dt2", self.scan.dt2.to_string()),
            ("horizon_days", self.bootstrap.horizon_days.to_string()),
            ("max_iterations", self.fit.max_iterations.to_string()),
            ("max_len", self.scan.max_len.to_string()),
            ("min_len", self.scan.min_len.to_string()),
            ("min_observations", self.fit.min_observations.to_string()),
            ("n_bootstrap", self.bootstrap.n_bootstrap.to_string()),
            ("n_starts", self.fit.n_starts.to_string()),
            ("n_t2", self.scan.n_t2.to_string()),
            ("omega_max", f.omega_max.to_string()),
            ("omega_min", f.omega_min.to_string()),
            ("omega_starts", join(&self.fit.omega_starts)),
            ("poly_order", self.poly_order.to_string()),
            ("rel_tol", self.fit.rel_tol.to_string()),
            ("require_b_negative", f.require_b_negative.to_string()),
            ("seed", self.seed.to_string()),
            ("sg_windows", join(&self.sg_windows)),
            ("tc_after_t2", f.tc_after_t2.to_string()),
            ("tc_grid", join(&self.fit.tc_grid)),
            ("tc_max_horizon", f.tc_max_horizon.to_string()),
            ("top_k", self.scan.top_k.to_string()),
            ("up_windows", join(&self.up_windows)),
        ];
        rows.sort();
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    /// First line of every output file.
    pub fn provenance(&self) -> String {
        format!(
            "# fbe {} seed={} config_sha256={}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.digest()
        )
    }
}
