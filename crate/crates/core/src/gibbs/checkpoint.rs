//! Plain-text chain checkpoints.
//!
//! One `key values...` line per field. Floats use Rust's shortest
//! round-trip formatting, so a resumed chain continues bit-identically.
//! Only the free covariance parameters are stored; the structural parts of
//! θ (family, lag mode, number of variables) come from a template.

use std::fmt::Write as _;
use std::path::Path;

use crate::covariance::CovParams;
use crate::error::{Error, Result};
use crate::gibbs::ChainState;

pub const CHECKPOINT_VERSION: u32 = 1;

fn line(out: &mut String, key: &str, v: &[f64]) {
    out.push_str(key);
    for x in v {
        write!(out, " {x}").unwrap();
    }
    out.push('\n');
}

pub fn write_checkpoint(path: &Path, state: &ChainState) -> Result<()> {
    let mut s = format!("qmgp-checkpoint {CHECKPOINT_VERSION}\n");
    writeln!(s, "family {}", state.theta.family_name()).unwrap();
    writeln!(s, "iteration {}", state.iteration).unwrap();
    writeln!(s, "accepted {}", state.accepted).unwrap();
    writeln!(s, "proposed {}", state.proposed).unwrap();
    writeln!(s, "window_accepted {}", state.window_accepted).unwrap();
    line(&mut s, "theta", &state.theta.param_vector());
    line(&mut s, "steps", &state.steps);
    line(&mut s, "beta", &state.beta);
    line(&mut s, "tau2", &state.tau2);
    line(&mut s, "w", &state.w);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, s).map_err(|e| Error::Config(format!("writing checkpoint: {e}")))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Config(format!("writing checkpoint: {e}")))
}

pub fn read_checkpoint(path: &Path, template: &CovParams) -> Result<ChainState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("reading checkpoint: {e}")))?;
    let bad = |msg: &str| Error::Config(format!("checkpoint {}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    if header != format!("qmgp-checkpoint {CHECKPOINT_VERSION}") {
        return Err(bad("unsupported version"));
    }
    let mut fields = std::collections::HashMap::new();
    for l in lines {
        let (k, v) = l.split_once(' ').unwrap_or((l, ""));
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| bad(&format!("missing {k}")));
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number in {k}"))))
            .collect()
    };
    let int = |k: &str| -> Result<u64> { get(k)?.trim().parse().map_err(|_| bad(&format!("bad {k}"))) };
    if get("family")?.trim() != template.family_name() {
        return Err(bad("covariance family differs from the configuration"));
    }
    Ok(ChainState {
        theta: template.with_param_vector(&floats("theta")?)?,
        beta: floats("beta")?,
        tau2: floats("tau2")?,
        w: floats("w")?,
        steps: floats("steps")?,
        iteration: int("iteration")?,
        accepted: int("accepted")?,
        proposed: int("proposed")?,
        window_accepted: int("window_accepted")?,
    })
}
