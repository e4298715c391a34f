//! Subcommand implementations. Each takes the resolved configuration and
//! writes its results under `output.dir` (or the model directory).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmgp::covariance::{CovParams, Dissimilarity, GneitingParams, LagMode, MultivariateParams};
use qmgp::data::Dataset;
use qmgp::gibbs::{
    read_checkpoint, run_chain, run_chain_from, ChainOutput, ChainState, Draw, McmcConfig, PriorSpec, Summaries,
    Timings, WStorage,
};
use qmgp::mgp::{GeometryConfig, MeshedModel};
use qmgp::predict::{effective_sample_size, metrics, predict_at, PredRow, Target, ESS_MIN_DRAWS};
use qmgp::synth::{generate as synth_generate, sweep_grid, CloudSpec, SweepPoint, SynthSpec};
use qmgp::tessellation::{BreakRule, ReferencePolicy};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{emit, ingest, num, parse_cell, read_table, write_table, Bindings};

pub const CONFIG_FILE: &str = "config.cfg";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRACE_FILE: &str = "trace.csv";
pub const W_SUMMARY_FILE: &str = "w_summary.csv";
pub const W_DRAWS_FILE: &str = "w_draws.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const DAG_FILE: &str = "dag.txt";

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.get("output.dir"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Covariance family with placeholder values, sized for `q` latent variables.
pub fn family_template(cfg: &RunConfig, q: usize) -> Result<CovParams, CliError> {
    let fam = cfg.get("model.family");
    let lag = if fam.ends_with("-exp") {
        LagMode::Unsquared
    } else {
        LagMode::Squared
    };
    let t = match fam {
        "exponential" => CovParams::exponential(1.0, 1.0),
        "gneiting" | "gneiting-exp" => CovParams::Gneiting(GneitingParams {
            sigma2: 1.0,
            c: 1.0,
            a1: 1.0,
            beta1: 0.5,
            lag,
        }),
        "multivariate" | "multivariate-exp" => {
            let mut psi2 = vec![1.5; q * q];
            for i in 0..q {
                psi2[i * q + i] = 1.0;
            }
            CovParams::Multivariate(MultivariateParams {
                q,
                sigma2: 1.0,
                c: 1.0,
                a1: 1.0,
                beta1: 0.5,
                lag,
                dissimilarity: Dissimilarity::Psi2(psi2),
            })
        }
        f => return Err(CliError::Usage(format!("unknown model.family '{f}'"))),
    };
    if t.q() != q {
        return Err(CliError::Usage(format!(
            "model.family {fam} has {} latent variable(s) but the data bindings give q = {q}",
            t.q()
        )));
    }
    Ok(t)
}

pub fn priors(cfg: &RunConfig, data: &Dataset, template: &CovParams) -> Result<PriorSpec, CliError> {
    let mut pri = PriorSpec::default_for(data.p, data.l, template);
    let names = template.param_names();
    let bounds = cfg.list("prior.theta_bounds");
    if !bounds.is_empty() {
        if bounds.len() != names.len() {
            return Err(CliError::Usage(format!(
                "prior.theta_bounds needs {} entries ({})",
                names.len(),
                names.join(", ")
            )));
        }
        pri.theta_bounds = bounds
            .iter()
            .map(|b| {
                let (lo, hi) = b
                    .split_once(':')
                    .ok_or_else(|| CliError::Usage(format!("prior.theta_bounds: '{b}' is not lo:hi")))?;
                let p = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("prior.theta_bounds: bad number '{s}'")))
                };
                Ok((p(lo)?, p(hi)?))
            })
            .collect::<Result<_, CliError>>()?;
    }
    for f in cfg.list("prior.fixed") {
        let k = names
            .iter()
            .position(|n| *n == f)
            .ok_or_else(|| CliError::Usage(format!("prior.fixed: no parameter '{f}' (have {})", names.join(", "))))?;
        pri.theta_fixed[k] = true;
    }
    pri.a_tau = vec![cfg.parse_as("prior.tau_a")?; data.l];
    pri.b_tau = vec![cfg.parse_as("prior.tau_b")?; data.l];
    let v: f64 = cfg.parse_as("prior.beta_var")?;
    pri.sigma_beta = nalgebra::DMatrix::identity(data.p, data.p) * v;
    pri.validate(data, template)?;
    Ok(pri)
}

pub fn initial_theta(cfg: &RunConfig, template: &CovParams, pri: &PriorSpec) -> Result<CovParams, CliError> {
    if cfg.is_set("model.theta") {
        let v: Vec<f64> = cfg.list_as("model.theta")?;
        Ok(template
            .with_param_vector(&v)
            .map_err(|e| CliError::Usage(format!("model.theta: {e} ({})", template.param_names().join(", "))))?)
    } else {
        Ok(pri.theta_midpoint(template)?)
    }
}

pub fn geometry(cfg: &RunConfig, dim: usize) -> Result<GeometryConfig, CliError> {
    let intervals: Vec<usize> = if cfg.is_set("mesh.intervals") {
        cfg.list_as("mesh.intervals")?
    } else {
        vec![1; dim]
    };
    if intervals.len() != dim || intervals.contains(&0) {
        return Err(CliError::Usage(format!("mesh.intervals needs {dim} entries >= 1")));
    }
    let mut g = GeometryConfig::new(intervals);
    g.rule = match cfg.get("mesh.breaks") {
        "equal" => BreakRule::EqualWidth,
        "quantile" => BreakRule::Quantile,
        v => return Err(CliError::Usage(format!("mesh.breaks: unknown rule '{v}'"))),
    };
    g.policy = match cfg.get("mesh.policy") {
        "observed" => ReferencePolicy::Observed,
        "lattice" => ReferencePolicy::Lattice,
        "cover" => ReferencePolicy::Cover,
        v => return Err(CliError::Usage(format!("mesh.policy: unknown policy '{v}'"))),
    };
    g.caching = cfg.flag("mesh.caching")?;
    Ok(g)
}

pub fn mcmc(cfg: &RunConfig, dir: &Path) -> Result<McmcConfig, CliError> {
    let every: usize = cfg.parse_as("mcmc.checkpoint_every")?;
    let c = McmcConfig {
        n_iter: cfg.parse_as("mcmc.iter")?,
        n_burn: cfg.parse_as("mcmc.burn")?,
        thin: cfg.parse_as("mcmc.thin")?,
        seed: cfg.parse_as("mcmc.seed")?,
        adapt: cfg.flag("mcmc.adapt")?,
        threads: cfg.opt("mcmc.threads")?,
        storage: match cfg.get("mcmc.storage") {
            "summary" => WStorage::Summary,
            "full" => WStorage::Full,
            v => return Err(CliError::Usage(format!("mcmc.storage: unknown mode '{v}'"))),
        },
        reservoir: cfg.parse_as("mcmc.reservoir")?,
        log_every: cfg.parse_as("mcmc.log_every")?,
        checkpoint: (every > 0).then(|| (dir.join(CHECKPOINT_FILE), every)),
        ..McmcConfig::default()
    };
    c.validate()?;
    Ok(c)
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, Bindings), CliError> {
    if !cfg.is_set("data.path") {
        return Err(CliError::Usage("data.path is not set".into()));
    }
    let b = Bindings::from_config(cfg)?;
    let ing = ingest(Path::new(cfg.get("data.path")), &b, true)?;
    for w in &ing.warnings {
        eprintln!("warning: {w}");
    }
    Ok((ing.data, b))
}

fn coord_names(dim: usize, time_last: bool) -> Vec<String> {
    (0..dim)
        .map(|h| {
            if time_last && h + 1 == dim {
                "t".to_string()
            } else {
                format!("s{}", h + 1)
            }
        })
        .collect()
}

/// `generate`: synthetic grid data, the truth behind it and a matching fit
/// configuration.
pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let point = match cfg.opt::<usize>("synth.sweep")? {
        Some(k) => *sweep_grid()
            .get(k)
            .ok_or_else(|| CliError::Usage(format!("synth.sweep must be below 81, got {k}")))?,
        None => SweepPoint {
            tau2: cfg.parse_as("synth.tau2")?,
            a1: cfg.parse_as("synth.a1")?,
            beta1: cfg.parse_as("synth.beta1")?,
            c: cfg.parse_as("synth.c")?,
        },
    };
    let shape: Vec<usize> = cfg.list_as("synth.shape")?;
    let mut spec = SynthSpec::new(
        shape.clone(),
        point.covariance(),
        point.tau2,
        cfg.parse_as("synth.seed")?,
    );
    spec.force_dense = cfg.flag("synth.force_dense")?;
    spec.mgp_intervals = cfg.list_as("synth.intervals")?;
    if cfg.flag("synth.clouds")? {
        spec.clouds = Some(CloudSpec::default());
    }
    let start = Instant::now();
    let syn = synth_generate(&spec)?;
    let names = coord_names(shape.len(), shape.len() >= 3);
    let b = Bindings {
        coords: names.clone(),
        outcomes: vec!["y".into()],
        x: vec![],
        intercept: false,
        z: vec![],
    };
    let data_path = dir.join("data.csv");
    emit(&data_path, &syn.data, &b)?;
    let mut header = names.clone();
    header.extend(["y".to_string(), "w".to_string()]);
    let d = &syn.data;
    write_table(
        &dir.join("truth.csv"),
        &header,
        (0..d.n()).map(|i| {
            let mut r: Vec<String> = d.loc(i).iter().map(|&v| num(v)).collect();
            r.push(num(d.y[i]));
            r.push(num(syn.w_true[i]));
            r
        }),
    )?;
    let mut fit = RunConfig::default();
    let abs = std::fs::canonicalize(&data_path)?;
    fit.set("data.path", &abs.to_string_lossy())?;
    fit.set("data.coords", &names.join(","))?;
    fit.set("mesh.intervals", cfg.get("synth.intervals"))?;
    fit.set("mesh.policy", "lattice")?;
    fit.set("model.family", "gneiting-exp")?;
    fit.set("model.theta", &format!("1,{},{},{}", point.c, point.a1, point.beta1))?;
    fit.set(
        "report.truth",
        &std::fs::canonicalize(dir.join("truth.csv"))?.to_string_lossy(),
    )?;
    std::fs::write(dir.join("fit.cfg"), fit.non_default())?;
    let masked = d.observed.iter().filter(|o| !**o).count();
    eprintln!(
        "generated n={} ({} masked, {} sampling) in {:.2} s -> {}",
        d.n(),
        masked,
        if syn.dense { "dense" } else { "meshed" },
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}

/// `ingest`: parse and validate a table, report its shape, optionally write
/// it back out.
pub fn ingest_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    if !cfg.is_set("data.path") {
        return Err(CliError::Usage("data.path is not set".into()));
    }
    let b = Bindings::from_config(cfg)?;
    let ing = ingest(Path::new(cfg.get("data.path")), &b, true)?;
    for w in &ing.warnings {
        eprintln!("warning: {w}");
    }
    let d = &ing.data;
    eprintln!("n={} dim={} l={} q={} p={}", d.n(), d.dim, d.l, d.q, d.p);
    for (name, f) in b.outcomes.iter().zip(&ing.missing) {
        eprintln!("  {name}: {:.2}% missing", 100.0 * f);
    }
    if cfg.is_set("ingest.out") {
        emit(Path::new(cfg.get("ingest.out")), d, &b)?;
    }
    Ok(())
}

fn dag_dump(model: &MeshedModel) -> String {
    let mut s = model.mesh.edge_list();
    for (j, c) in model.mesh.colors.iter().enumerate() {
        if model.mesh.ref_mask[j] {
            let _ = writeln!(s, "color a{j} {c}");
        }
    }
    s
}

/// `fit`: run the sampler and write trace, summaries, retained draws and the
/// manifest.
pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if cfg.is_set("data.path") {
        let abs = std::fs::canonicalize(cfg.get("data.path"))
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", cfg.get("data.path"))))?;
        cfg.set("data.path", &abs.to_string_lossy())?;
    }
    let dir = out_dir(&cfg)?;
    let (data, b) = load_data(&cfg)?;
    let template = family_template(&cfg, b.q())?;
    let pri = priors(&cfg, &data, &template)?;
    let theta0 = initial_theta(&cfg, &template, &pri)?;
    let geo = geometry(&cfg, data.dim)?;
    let mc = mcmc(&cfg, &dir)?;
    let start = Instant::now();
    let model = MeshedModel::build(&data, &geo)?;
    let build_secs = start.elapsed().as_secs_f64();
    eprintln!(
        "mesh: {} regions, {} reference locations, {} colors, {} locations ({} added by policy), built in {build_secs:.2} s",
        model.mesh.n_regions(),
        model.asg.n_reference(),
        model.mesh.n_colors,
        model.data.n(),
        model.data.n() - data.n()
    );
    if cfg.flag("output.dump_dag")? {
        std::fs::write(dir.join(DAG_FILE), dag_dump(&model))?;
    }
    let ckpt = dir.join(CHECKPOINT_FILE);
    let out = if cfg.flag("mcmc.resume")? && ckpt.exists() {
        let state = read_checkpoint(&ckpt, &template)?;
        eprintln!("resuming from iteration {}", state.iteration);
        run_chain_from(&model, &pri, &mc, state)?
    } else {
        run_chain(&model, &pri, &mc, theta0)?
    };
    write_fit_outputs(&cfg, &dir, &model, &b, &out)?;
    eprintln!(
        "fit done: {} retained draws, {:.2} ms/iteration, acceptance {:.3} -> {}",
        out.draws.len(),
        1e3 * out.timings.per_iter_secs,
        out.acceptance_rate,
        dir.display()
    );
    Ok(())
}

fn trace_header(out: &ChainOutput, p: usize, l: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string()];
    h.extend((0..p).map(|k| format!("beta_{k}")));
    h.extend((0..l).map(|r| format!("tau2_{r}")));
    h.extend(out.theta_names.iter().cloned());
    h
}

fn write_fit_outputs(
    cfg: &RunConfig,
    dir: &Path,
    model: &MeshedModel,
    b: &Bindings,
    out: &ChainOutput,
) -> Result<(), CliError> {
    let d = &model.data;
    std::fs::write(dir.join(CONFIG_FILE), cfg.canonical())?;
    write_table(
        &dir.join(TRACE_FILE),
        &trace_header(out, d.p, d.l),
        out.draws.iter().map(|dr| {
            let mut r = vec![dr.iteration.to_string()];
            r.extend(dr.beta.iter().chain(&dr.tau2).chain(&dr.theta).map(|&v| num(v)));
            r
        }),
    )?;

    let level: f64 = cfg.parse_as("predict.level")?;
    let q = d.q;
    let mut header = b.coords.clone();
    header.extend(["var", "mean", "sd", "lower", "upper"].map(String::from));
    let ws = &out.w_summary;
    write_table(
        &dir.join(W_SUMMARY_FILE),
        &header,
        (0..d.n() * q).map(|j| {
            let mut r: Vec<String> = d.loc(j / q).iter().map(|&v| num(v)).collect();
            let (lo, hi) = ws.interval(j, level);
            r.push((j % q).to_string());
            r.extend([ws.mean[j], ws.sd(j), lo, hi].map(num));
            r
        }),
    )?;

    let (draws, ids): (Vec<&Vec<f64>>, Vec<usize>) = match &out.w_draws {
        Some(all) => (all.iter().collect(), (0..all.len()).collect()),
        None => (ws.retained().iter().collect(), ws.retained_ids().to_vec()),
    };
    let mut header = vec!["draw".to_string()];
    header.extend((0..d.n() * q).map(|j| format!("w_{j}")));
    write_table(
        &dir.join(W_DRAWS_FILE),
        &header,
        draws.iter().zip(&ids).map(|(w, &id)| {
            let mut r = vec![id.to_string()];
            r.extend(w.iter().map(|&v| num(v)));
            r
        }),
    )?;

    let mut m = String::new();
    let _ = writeln!(m, "qmgp_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "config_sha256 = {}", cfg.hash());
    let _ = writeln!(m, "seed = {}", cfg.get("mcmc.seed"));
    let _ = writeln!(m, "n_locations = {}", d.n());
    let _ = writeln!(m, "n_regions = {}", model.mesh.n_regions());
    let _ = writeln!(m, "n_reference_locations = {}", model.asg.n_reference());
    let _ = writeln!(m, "n_colors = {}", model.mesh.n_colors);
    let _ = writeln!(m, "theta_names = {}", out.theta_names.join(","));
    let _ = writeln!(m, "retained_draws = {}", out.draws.len());
    let _ = writeln!(m, "stored_w_draws = {}", ids.len());
    let _ = writeln!(m, "acceptance_rate = {}", num(out.acceptance_rate));
    let _ = writeln!(m, "cache_hit_rate = {}", num(out.cache_hit_rate));
    let _ = writeln!(m, "total_secs = {}", num(out.timings.total_secs));
    let _ = writeln!(m, "per_iter_secs = {}", num(out.timings.per_iter_secs));
    let _ = writeln!(m, "files = {CONFIG_FILE},{TRACE_FILE},{W_SUMMARY_FILE},{W_DRAWS_FILE}");
    std::fs::write(dir.join(MANIFEST_FILE), m)?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))
        .map_err(|e| CliError::Data(format!("missing fit artifacts in {}: {e}", dir.display())))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

/// The fitted model and the chain draws needed for prediction, read back
/// from a model directory.
struct Loaded {
    cfg: RunConfig,
    data: Dataset,
    bindings: Bindings,
    model: MeshedModel,
    template: CovParams,
    chain: ChainOutput,
}

fn load_fit(model_dir: &Path, overrides: &[String]) -> Result<Loaded, CliError> {
    let cfg_path = model_dir.join(CONFIG_FILE);
    if !cfg_path.exists() {
        return Err(CliError::Data(format!(
            "missing fit artifacts: {} not found",
            cfg_path.display()
        )));
    }
    let mut cfg = RunConfig::load(&cfg_path)?;
    cfg.apply_flags(overrides)?;
    let (data, bindings) = load_data(&cfg)?;
    let template = family_template(&cfg, bindings.q())?;
    let model = MeshedModel::build(&data, &geometry(&cfg, data.dim)?)?;
    let manifest = read_manifest(model_dir)?;

    let (header, rows) = read_table(&model_dir.join(TRACE_FILE))?;
    let (p, l) = (model.data.p, model.data.l);
    let nt = template.param_names().len();
    if header.len() != 1 + p + l + nt {
        return Err(CliError::Data(format!(
            "{TRACE_FILE} has {} columns, expected {}",
            header.len(),
            1 + p + l + nt
        )));
    }
    let draws: Vec<Draw> = rows
        .iter()
        .map(|r| {
            let v: Vec<f64> = r[1..]
                .iter()
                .map(|s| parse_cell(s, TRACE_FILE))
                .collect::<Result<_, _>>()?;
            Ok(Draw {
                iteration: r[0]
                    .parse()
                    .map_err(|_| CliError::Data(format!("{TRACE_FILE}: bad iteration '{}'", r[0])))?,
                beta: v[..p].to_vec(),
                tau2: v[p..p + l].to_vec(),
                theta: v[p + l..].to_vec(),
            })
        })
        .collect::<Result<_, CliError>>()?;

    let (_, wrows) = read_table(&model_dir.join(W_DRAWS_FILE))?;
    let nq = model.data.n() * model.data.q;
    let mut kept = Vec::with_capacity(wrows.len());
    let mut w_draws = Vec::with_capacity(wrows.len());
    for r in &wrows {
        let id: usize = r[0]
            .parse()
            .map_err(|_| CliError::Data(format!("{W_DRAWS_FILE}: bad draw id '{}'", r[0])))?;
        let dr = draws
            .get(id)
            .ok_or_else(|| CliError::Data(format!("{W_DRAWS_FILE}: draw {id} not in {TRACE_FILE}")))?;
        if r.len() != nq + 1 {
            return Err(CliError::Data(format!("{W_DRAWS_FILE}: expected {nq} values per draw")));
        }
        w_draws.push(
            r[1..]
                .iter()
                .map(|s| parse_cell(s, W_DRAWS_FILE))
                .collect::<Result<Vec<f64>, _>>()?,
        );
        kept.push(dr.clone());
    }
    let per_iter = manifest
        .get("per_iter_secs")
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN);
    let chain = ChainOutput {
        theta_names: template.param_names(),
        draws: kept,
        w_summary: Summaries::new(nq, 1),
        y_summary: Summaries::new(model.data.n() * l, 1),
        w_draws: Some(w_draws),
        final_state: ChainState::initial(
            &model.data,
            &PriorSpec::default_for(p, l, &template),
            template.clone(),
            vec![],
        ),
        acceptance_rate: manifest
            .get("acceptance_rate")
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN),
        cache_hit_rate: manifest
            .get("cache_hit_rate")
            .and_then(|v| v.parse().ok())
            .unwrap_or(f64::NAN),
        timings: Timings {
            total_secs: f64::NAN,
            per_iter_secs: per_iter,
        },
    };
    Ok(Loaded {
        cfg,
        data,
        bindings,
        model,
        template,
        chain,
    })
}

/// Locations of `data` with at least one missing outcome, all outcomes
/// marked missing.
fn missing_locations(data: &Dataset) -> Result<(Dataset, Vec<usize>), CliError> {
    let idx: Vec<usize> = (0..data.n())
        .filter(|&i| (0..data.l).any(|r| !data.is_observed(i, r)))
        .collect();
    if idx.is_empty() {
        return Err(CliError::Data("fill-missing: the data has no missing entries".into()));
    }
    let (l, q, p) = (data.l, data.q, data.p);
    let coords = idx.iter().flat_map(|&i| data.loc(i).iter().copied()).collect();
    let x = idx
        .iter()
        .flat_map(|&i| (0..l).flat_map(move |r| data.x_row(i, r).iter().copied()))
        .collect();
    let z = idx
        .iter()
        .flat_map(|&i| (0..l).flat_map(move |r| data.z_row(i, r).iter().copied()))
        .collect();
    let q_data = Dataset::new(
        data.dim,
        coords,
        l,
        q,
        p,
        vec![f64::NAN; idx.len() * l],
        vec![false; idx.len() * l],
        x,
        z,
    )?;
    Ok((q_data, idx))
}

/// `predict`: posterior predictive summaries at missing entries or at the
/// locations of a table.
pub fn predict(model_dir: &Path, overrides: &[String]) -> Result<(), CliError> {
    let ld = load_fit(model_dir, overrides)?;
    let cfg = &ld.cfg;
    let level: f64 = cfg.parse_as("predict.level")?;
    let target = match cfg.get("predict.target") {
        "response" => Target::Response,
        "mean" => Target::Mean,
        v => return Err(CliError::Usage(format!("predict.target: unknown target '{v}'"))),
    };
    let seed: u64 = cfg.opt("predict.seed")?.map_or_else(|| cfg.parse_as("mcmc.seed"), Ok)?;
    let fill = cfg.get("predict.locations") == "fill-missing";
    let (query, orig) = if fill {
        let (q, idx) = missing_locations(&ld.data)?;
        (q, Some(idx))
    } else {
        let path = Path::new(cfg.get("predict.locations"));
        (ingest(path, &ld.bindings, false)?.data, None)
    };
    let res = predict_at(&ld.model, &ld.chain, &ld.template, &query, target, level, seed)?;
    let keep = |r: &PredRow| match &orig {
        Some(idx) => !ld.data.is_observed(idx[r.loc], r.var),
        None => true,
    };
    let mut header = ld.bindings.coords.clone();
    header.extend(["var", "mean", "sd", "lower", "upper", "n_draws"].map(String::from));
    let out = if cfg.is_set("predict.out") {
        PathBuf::from(cfg.get("predict.out"))
    } else {
        model_dir.join(PREDICTIONS_FILE)
    };
    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .filter(|r| keep(r))
        .map(|r| {
            let mut row: Vec<String> = query.loc(r.loc).iter().map(|&v| num(v)).collect();
            row.push(ld.bindings.outcomes[r.var].clone());
            row.extend([r.mean, r.sd, r.lower, r.upper].map(num));
            row.push(r.n_draws.to_string());
            row
        })
        .collect();
    let n = rows.len();
    write_table(&out, &header, rows)?;
    eprintln!("{n} predictions at level {level} -> {}", out.display());
    Ok(())
}

fn coord_key(cells: &[String]) -> Result<Vec<u64>, CliError> {
    cells
        .iter()
        .map(|s| parse_cell(s, "coordinate").map(|v| (v + 0.0).to_bits()))
        .collect()
}

/// `report`: parameter posterior summaries with ESS, time per iteration and,
/// given a truth table, MAE/RMSE/coverage of the stored predictions.
pub fn report(model_dir: &Path, overrides: &[String]) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&model_dir.join(CONFIG_FILE))
        .map_err(|_| CliError::Data(format!("missing fit artifacts in {}", model_dir.display())))?;
    cfg.apply_flags(overrides)?;
    let manifest = read_manifest(model_dir)?;
    let (header, rows) = read_table(&model_dir.join(TRACE_FILE))?;
    let mut out: Vec<Vec<String>> = Vec::new();
    for (c, name) in header.iter().enumerate().skip(1) {
        let mut v: Vec<f64> = rows
            .iter()
            .map(|r| parse_cell(&r[c], TRACE_FILE))
            .collect::<Result<_, _>>()?;
        if v.is_empty() {
            continue;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let ess = if v.len() >= ESS_MIN_DRAWS {
            num(effective_sample_size(&v)?)
        } else {
            "NA".into()
        };
        v.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        out.push(vec![name.clone(), num(mean), num(q(0.025)), num(q(0.975)), ess]);
    }
    let scalar = |name: &str, v: String| vec![name.to_string(), v, String::new(), String::new(), String::new()];
    out.push(scalar(
        "per_iter_secs",
        manifest.get("per_iter_secs").cloned().unwrap_or_default(),
    ));
    out.push(scalar("retained_draws", rows.len().to_string()));

    let pred_path = model_dir.join(PREDICTIONS_FILE);
    if cfg.is_set("report.truth") && pred_path.exists() {
        let coords = cfg.list("data.coords");
        let (th, trows) = read_table(Path::new(cfg.get("report.truth")))?;
        let col = |name: &str| {
            th.iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Data(format!("truth table has no column '{name}'")))
        };
        let ccols: Vec<usize> = coords.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
        let outcomes = cfg.list("data.outcomes");
        let ycols: Vec<usize> = outcomes.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
        let mut truth: HashMap<(Vec<u64>, String), f64> = HashMap::new();
        for r in &trows {
            let key = coord_key(&ccols.iter().map(|&c| r[c].clone()).collect::<Vec<_>>())?;
            for (o, &c) in outcomes.iter().zip(&ycols) {
                truth.insert((key.clone(), o.clone()), parse_cell(&r[c], "truth")?);
            }
        }
        let (_, prows) = read_table(&pred_path)?;
        let d = coords.len();
        let mut preds = Vec::new();
        let mut tv = Vec::new();
        for r in &prows {
            let key = coord_key(&r[..d])?;
            if let Some(&t) = truth.get(&(key, r[d].clone())) {
                if t.is_finite() {
                    let f = |k: usize| parse_cell(&r[d + k], PREDICTIONS_FILE);
                    preds.push(PredRow {
                        loc: 0,
                        var: 0,
                        mean: f(1)?,
                        sd: f(2)?,
                        lower: f(3)?,
                        upper: f(4)?,
                        n_draws: 0,
                    });
                    tv.push(t);
                }
            }
        }
        let m = metrics(&preds, &tv, &vec![true; tv.len()])?;
        out.push(scalar("mae", num(m.mae)));
        out.push(scalar("rmse", num(m.rmse)));
        out.push(scalar("coverage", num(m.coverage)));
        out.push(scalar("n_evaluated", m.n.to_string()));
        out.push(scalar("level", cfg.get("predict.level").to_string()));
    }
    let path = model_dir.join(REPORT_FILE);
    for r in &out {
        eprintln!(
            "{:<16} {:>12} [{}, {}] ess {}",
            r[0],
            short(&r[1]),
            short(&r[2]),
            short(&r[3]),
            short(&r[4])
        );
    }
    write_table(&path, &["name", "mean", "lower", "upper", "ess"].map(String::from), out)?;
    eprintln!("report -> {}", path.display());
    Ok(())
}

fn short(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains('e') || s.contains('.') => format!("{v:.4}"),
        _ => s.to_string(),
    }
}

fn uniform_data(n: usize, seed: u64) -> Result<Dataset, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
    let y = (0..n).map(|_| Some(rng.random::<f64>() - 0.5)).collect();
    Ok(Dataset::univariate(2, coords, y)?)
}

fn time_chain(model: &MeshedModel, theta: &CovParams, caching: bool, threads: Option<usize>) -> Result<f64, CliError> {
    let pri = PriorSpec::default_for(model.data.p, model.data.l, theta);
    let mut best = f64::INFINITY;
    for rep in 0..3 {
        let cfg = McmcConfig {
            n_iter: 10,
            n_burn: 2,
            seed: rep,
            reservoir: 2,
            caching: Some(caching),
            threads,
            ..McmcConfig::default()
        };
        best = best.min(run_chain(model, &pri, &cfg, theta.clone())?.timings.per_iter_secs);
    }
    Ok(best)
}

/// `bench`: per-iteration timings for the scaling and caching suites.
pub fn bench(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let suite = cfg.get("bench.suite");
    let threads = cfg.opt("mcmc.threads")?;
    let mut rows = Vec::new();
    if suite == "scaling" || suite == "all" {
        let max_n: usize = cfg.parse_as("bench.max_n")?;
        let theta = CovParams::exponential(1.0, 10.0);
        let mut n = 1024;
        while n <= max_n {
            // about 16 locations per region
            let regions = n / 16;
            let a = (regions as f64).sqrt().floor() as usize;
            let intervals = vec![a.max(1), (regions / a.max(1)).max(1)];
            let data = uniform_data(n, n as u64)?;
            let model = MeshedModel::build(&data, &GeometryConfig::new(intervals))?;
            let t = time_chain(&model, &theta, true, threads)?;
            eprintln!(
                "scaling n={n:>6} regions={:>5} {:.2} ms/iteration",
                model.mesh.n_regions(),
                1e3 * t
            );
            rows.push(vec![
                "scaling".into(),
                n.to_string(),
                model.mesh.n_regions().to_string(),
                "true".into(),
                num(t),
            ]);
            n *= 2;
        }
    }
    if suite == "caching" || suite == "all" {
        let shape = [24usize, 24, 8];
        let coords = qmgp::synth::grid_coords(&shape);
        let n = coords.len() / 3;
        let data = Dataset::univariate(3, coords, vec![Some(0.0); n])?;
        let model = MeshedModel::build(&data, &GeometryConfig::new(vec![6, 6, 2]))?;
        let theta = SweepPoint {
            tau2: 0.05,
            a1: 50.0,
            beta1: 0.5,
            c: 5.0,
        }
        .covariance();
        for caching in [true, false] {
            let t = time_chain(&model, &theta, caching, threads)?;
            eprintln!("caching={caching:<5} n={n} {:.2} ms/iteration", 1e3 * t);
            rows.push(vec![
                "caching".into(),
                n.to_string(),
                model.mesh.n_regions().to_string(),
                caching.to_string(),
                num(t),
            ]);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("bench.suite: unknown suite '{suite}'")));
    }
    let path = dir.join("bench.csv");
    write_table(
        &path,
        &["suite", "n", "regions", "caching", "per_iter_secs"].map(String::from),
        rows,
    )?;
    eprintln!("bench -> {}", path.display());
    Ok(())
}
