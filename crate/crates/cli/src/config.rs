//! Flat `section.key = value` run configuration. Every key can also be given
//! on the command line as `--section.key value` or `--section.key=value`;
//! command-line values win over the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Known keys, their defaults and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data.path", "", "input table (comma-separated, header row)"),
    ("data.coords", "", "coordinate columns, time last"),
    ("data.outcomes", "y", "outcome columns; empty cells are missing"),
    ("data.x", "", "covariate columns, repeated for every outcome"),
    ("data.intercept", "false", "add an intercept column to X"),
    ("data.z", "", "columns of Z (single outcome only); empty means Z = I"),
    ("mesh.intervals", "", "intervals per axis"),
    ("mesh.breaks", "equal", "equal | quantile"),
    ("mesh.policy", "observed", "observed | lattice | cover"),
    ("mesh.caching", "true", "reuse factorizations across congruent blocks"),
    (
        "model.family",
        "exponential",
        "exponential | gneiting | gneiting-exp | multivariate | multivariate-exp",
    ),
    (
        "model.theta",
        "",
        "initial covariance parameters; empty means prior midpoint",
    ),
    ("prior.theta_bounds", "", "lo:hi per covariance parameter"),
    ("prior.fixed", "", "covariance parameters held at their initial value"),
    ("prior.tau_a", "2", "inverse-gamma shape for every noise variance"),
    ("prior.tau_b", "1", "inverse-gamma scale for every noise variance"),
    ("prior.beta_var", "100", "prior variance of each regression coefficient"),
    ("mcmc.iter", "1000", "total iterations"),
    ("mcmc.burn", "500", "burn-in iterations"),
    ("mcmc.thin", "1", "keep every this many post-burn-in draws"),
    ("mcmc.seed", "1", "master seed"),
    ("mcmc.threads", "", "worker threads; empty means all cores"),
    ("mcmc.storage", "summary", "summary | full"),
    (
        "mcmc.reservoir",
        "200",
        "whole w draws kept for quantiles and prediction",
    ),
    ("mcmc.adapt", "true", "tune Metropolis steps during burn-in"),
    ("mcmc.log_every", "0", "progress line every this many iterations"),
    (
        "mcmc.checkpoint_every",
        "0",
        "write a checkpoint every this many iterations",
    ),
    (
        "mcmc.resume",
        "false",
        "continue from the checkpoint in the output directory",
    ),
    (
        "predict.locations",
        "fill-missing",
        "fill-missing or a table of new locations",
    ),
    ("predict.level", "0.95", "credible level of reported intervals"),
    ("predict.target", "response", "response | mean"),
    ("predict.seed", "", "seed for predictive draws; empty means mcmc.seed"),
    (
        "predict.out",
        "",
        "predictions file; empty means predictions.csv in the model directory",
    ),
    ("ingest.out", "", "write the parsed table back out here"),
    ("report.truth", "", "table with true outcomes for MAE/RMSE/coverage"),
    ("synth.shape", "40,40,10", "grid points per axis, time last"),
    ("synth.tau2", "0.05", "noise variance"),
    ("synth.c", "5", "spatial decay"),
    ("synth.a1", "50", "temporal range"),
    ("synth.beta1", "0.5", "space-time separability"),
    (
        "synth.sweep",
        "",
        "index 0..80 into the simulation sweep; overrides the four above",
    ),
    ("synth.clouds", "true", "mask cloud discs and blank frames"),
    ("synth.seed", "1", "generation seed"),
    ("synth.force_dense", "false", "dense sampling regardless of size"),
    (
        "synth.intervals",
        "10,10,5",
        "partition for meshed sampling of large grids",
    ),
    ("bench.suite", "all", "scaling | caching | all"),
    ("bench.max_n", "8192", "largest n in the scaling suite"),
    ("output.dir", "qmgp-out", "output directory"),
    (
        "output.dump_dag",
        "false",
        "write the mesh DAG and its coloring to dag.txt",
    ),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unknown configuration key '{key}'")))
    }
}

impl RunConfig {
    /// Parses `key = value` lines. `[section]` headers prefix the keys that
    /// follow; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = s.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            cfg.set(&key, v.trim())
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        known(key)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `--section.key value` / `--section.key=value` pairs.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let body = a
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("unexpected argument '{a}'")))?;
            let (k, v) = match body.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Usage(format!("--{body} needs a value")))?;
                    (body.to_string(), v.clone())
                }
            };
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.get(key).is_empty()
    }

    pub fn parse_as<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{v}'")))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.is_set(key) {
            self.parse_as(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" | "" => Ok(false),
            v => Err(CliError::Usage(format!("{key}: expected true or false, got '{v}'"))),
        }
    }

    /// Comma-separated list; empty value gives an empty list.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn list_as<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.list(key)
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{s}'")))
            })
            .collect()
    }

    /// Canonical text: every key, sorted, one per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Only the keys whose value differs from the default.
    pub fn non_default(&self) -> String {
        let mut s = String::new();
        for (k, d, _) in KEYS {
            let v = self.get(k);
            if v != *d {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// SHA-256 of the canonical text without the `output.*` keys, hex
    /// encoded: the same run written elsewhere has the same hash.
    pub fn hash(&self) -> String {
        let text: String = self
            .canonical()
            .lines()
            .filter(|l| !l.starts_with("output."))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `key  default  description` table for `--help` style output.
pub fn key_table() -> String {
    let mut s = String::new();
    for (k, v, d) in KEYS {
        let _ = writeln!(s, "  --{k:<22} {:<14} {d}", if v.is_empty() { "-" } else { v });
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_flags() {
        let mut c = RunConfig::parse("# run\n[mcmc]\niter = 50 # short\nseed=3\n\nmesh.intervals = 2,2\n").unwrap();
        assert_eq!(c.get("mcmc.iter"), "50");
        assert_eq!(c.get("mcmc.seed"), "3");
        assert_eq!(c.list_as::<usize>("mesh.intervals").unwrap(), vec![2, 2]);
        c.apply_flags(&["--mcmc.iter".into(), "70".into(), "--mcmc.seed=9".into()])
            .unwrap();
        assert_eq!(c.parse_as::<usize>("mcmc.iter").unwrap(), 70);
        assert_eq!(c.get("mcmc.seed"), "9");
        assert_eq!(c.get("mcmc.burn"), "500");
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_usage_errors() {
        assert!(matches!(
            RunConfig::parse("mcmc.iterations = 3"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(RunConfig::parse("just words"), Err(CliError::Usage(_))));
        let mut c = RunConfig::default();
        assert!(c.apply_flags(&["--mcmc.iter".into()]).is_err());
        assert!(c.apply_flags(&["stray".into()]).is_err());
    }

    #[test]
    fn canonical_text_round_trips_and_hash_tracks_content() {
        let mut c = RunConfig::default();
        c.set("mcmc.seed", "42").unwrap();
        let back = RunConfig::parse(&c.canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.set("mcmc.seed", "43").unwrap();
        assert_ne!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let mut moved = c.clone();
        moved.set("output.dir", "elsewhere").unwrap();
        assert_eq!(moved.hash(), c.hash());
    }
}
