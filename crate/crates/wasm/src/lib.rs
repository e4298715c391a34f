//! Browser bindings: simulate a clouded space-time field, fit a meshed GP to
//! it and read back gap-filled frames.

use qmgp::gibbs::{run_chain, McmcConfig, PriorSpec};
use qmgp::mgp::{GeometryConfig, MeshedModel};
use qmgp::predict::{fill_missing, metrics, PredictionResult};
use qmgp::synth::{generate, CloudSpec, SweepPoint, SynthSpec, Synthetic};
use qmgp::tessellation::ReferencePolicy;
use wasm_bindgen::prelude::*;

fn js(e: qmgp::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Layers returned by [`Demo::frame`].
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Latent field used to simulate the data.
    Truth = 0,
    /// Noisy outcomes; masked cells are NaN.
    Observed = 1,
    /// Observed outcomes with masked cells replaced by the posterior
    /// predictive mean.
    Filled = 2,
    /// Posterior predictive standard deviation at masked cells, NaN elsewhere.
    Sd = 3,
}

struct Fit {
    pred: PredictionResult,
    summary: String,
}

#[wasm_bindgen]
pub struct Demo {
    shape: [usize; 3],
    point: SweepPoint,
    syn: Synthetic,
    fit: Option<Fit>,
}

#[wasm_bindgen]
impl Demo {
    /// Simulates an `nx × ny × nt` grid on the unit cube. `clouds` masks
    /// disc-shaped clouds in some frames and blanks two frames almost
    /// entirely.
    #[wasm_bindgen(constructor)]
    pub fn new(
        nx: usize,
        ny: usize,
        nt: usize,
        c: f64,
        a1: f64,
        beta1: f64,
        tau2: f64,
        clouds: bool,
        seed: u64,
    ) -> Result<Demo, JsError> {
        let point = SweepPoint { tau2, a1, beta1, c };
        let mut spec = SynthSpec::new(vec![nx, ny, nt], point.covariance(), tau2, seed);
        if clouds {
            spec.clouds = Some(CloudSpec {
                cloud_frames: (nt * 3 / 5).max(1),
                blank_frames: (nt / 5).min(2),
                ..CloudSpec::default()
            });
        }
        // exact dense sampling is cubic in the grid size; beyond a thousand
        // cells the meshed prior is much faster in the browser
        spec.dense_limit = 1000;
        spec.mgp_intervals = vec![(nx / 4).max(1), (ny / 4).max(1), (nt / 2).max(1)];
        let syn = generate(&spec).map_err(js)?;
        Ok(Demo {
            shape: [nx, ny, nt],
            point,
            syn,
            fit: None,
        })
    }

    pub fn nx(&self) -> usize {
        self.shape[0]
    }

    pub fn ny(&self) -> usize {
        self.shape[1]
    }

    pub fn nt(&self) -> usize {
        self.shape[2]
    }

    pub fn n_masked(&self) -> usize {
        self.syn.data.observed.iter().filter(|o| !**o).count()
    }

    /// Runs the Gibbs sampler on a `ix × iy × it` mesh and fills the masked
    /// cells. Returns a JSON summary of the run.
    pub fn fit(
        &mut self,
        n_iter: usize,
        n_burn: usize,
        ix: usize,
        iy: usize,
        it: usize,
        seed: u64,
    ) -> Result<String, JsError> {
        let data = &self.syn.data;
        let mut g = GeometryConfig::new(vec![ix, iy, it]);
        g.policy = ReferencePolicy::Lattice;
        let model = MeshedModel::build(data, &g).map_err(js)?;
        let template = self.point.covariance();
        let mut pri = PriorSpec::default_for(0, 1, &template);
        pri.theta_bounds = vec![(1e-3, 1e2), (1e-4, 1e4), (1e-4, 1e4), (0.0, 1.0)];
        let theta0 = pri.theta_midpoint(&template).map_err(js)?;
        let cfg = McmcConfig {
            n_iter,
            n_burn,
            seed,
            reservoir: 100,
            ..McmcConfig::default()
        };
        let out = run_chain(&model, &pri, &cfg, theta0).map_err(js)?;
        let pred = fill_missing(&model, &out, 0.95);
        let mask: Vec<bool> = data.observed.iter().map(|o| !o).collect();
        let scores = if mask.iter().any(|m| *m) {
            let m = metrics(&pred.rows, &data.y, &mask).map_err(js)?;
            format!("\"mae\":{},\"rmse\":{},\"coverage\":{}", m.mae, m.rmse, m.coverage)
        } else {
            "\"mae\":null,\"rmse\":null,\"coverage\":null".into()
        };
        let nd = out.draws.len().max(1) as f64;
        let means: Vec<String> = out
            .theta_names
            .iter()
            .enumerate()
            .map(|(k, name)| format!("\"{name}\":{}", out.draws.iter().map(|d| d.theta[k]).sum::<f64>() / nd))
            .collect();
        let tau2 = out.draws.iter().map(|d| d.tau2[0]).sum::<f64>() / nd;
        let summary = format!(
            "{{\"regions\":{},\"colors\":{},\"draws\":{},\"acceptance\":{},\"cache_hit_rate\":{},\"tau2\":{tau2},\"theta\":{{{}}},{scores}}}",
            model.mesh.n_regions(),
            model.mesh.n_colors,
            out.draws.len(),
            out.acceptance_rate,
            out.cache_hit_rate,
            means.join(","),
        );
        self.fit = Some(Fit {
            pred,
            summary: summary.clone(),
        });
        Ok(summary)
    }

    /// Summary of the last fit, or an empty string.
    pub fn summary(&self) -> String {
        self.fit.as_ref().map(|f| f.summary.clone()).unwrap_or_default()
    }

    /// One time slice as `nx · ny` values, row `x`, column `y`.
    pub fn frame(&self, layer: Layer, t: usize) -> Result<Vec<f64>, JsError> {
        let [nx, ny, nt] = self.shape;
        if t >= nt {
            return Err(JsError::new("frame index out of range"));
        }
        let d = &self.syn.data;
        let mut v: Vec<f64> = match layer {
            Layer::Truth => (0..nx * ny).map(|c| self.syn.w_true[c * nt + t]).collect(),
            Layer::Observed | Layer::Filled => (0..nx * ny)
                .map(|c| {
                    let i = c * nt + t;
                    if d.observed[i] {
                        d.y[i]
                    } else {
                        f64::NAN
                    }
                })
                .collect(),
            Layer::Sd => vec![f64::NAN; nx * ny],
        };
        if matches!(layer, Layer::Filled | Layer::Sd) {
            let fit = self.fit.as_ref().ok_or_else(|| JsError::new("no fit yet"))?;
            for r in fit.pred.rows.iter().filter(|r| r.loc % nt == t && !d.observed[r.loc]) {
                v[r.loc / nt] = if layer == Layer::Filled { r.mean } else { r.sd };
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_fit_and_fill() {
        let mut demo = Demo::new(12, 12, 5, 5.0, 50.0, 0.5, 0.05, true, 3).unwrap();
        assert!(demo.n_masked() > 0);
        let s = demo.fit(60, 30, 3, 3, 2, 1).unwrap();
        assert!(s.contains("\"draws\":30"), "{s}");
        for t in 0..demo.nt() {
            let obs = demo.frame(Layer::Observed, t).unwrap();
            let filled = demo.frame(Layer::Filled, t).unwrap();
            let sd = demo.frame(Layer::Sd, t).unwrap();
            assert_eq!(filled.len(), 144);
            for c in 0..144 {
                assert!(filled[c].is_finite());
                if obs[c].is_nan() {
                    assert!(sd[c] > 0.0);
                } else {
                    assert_eq!(filled[c], obs[c]);
                    assert!(sd[c].is_nan());
                }
            }
        }
    }
}
