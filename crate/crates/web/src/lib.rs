//! Browser bindings: the bundled network next to the oracle it was
//! distilled from, for a handful of interactive comparisons.

use loudnet::eval::{bandwidth_curves, clamp_phon, tone_growth_curves, PhonSource};
use loudnet::mlp::{read_model, Workspace};
use loudnet::{MlpModel, Oracle, SpectrumFrame, N_BANDS};
use wasm_bindgen::prelude::*;

static MODEL_BYTES: &[u8] = include_bytes!("../assets/model.ldnn");

fn js_err(e: loudnet::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    oracle: Oracle,
    model: MlpModel,
    ws: Workspace<f32>,
}

impl Demo {
    pub fn load() -> loudnet::Result<Demo> {
        Ok(Demo {
            oracle: Oracle::new()?,
            model: read_model(MODEL_BYTES)?,
            ws: Workspace::new(),
        })
    }

    pub fn tone_growth_curve(&self, freq_hz: f64, levels: &[f64]) -> loudnet::Result<Vec<f64>> {
        let sources: [&dyn PhonSource; 2] = [&self.oracle, &self.model];
        let mut out = Vec::with_capacity(2 * levels.len());
        for s in sources {
            let c = tone_growth_curves(
                s,
                self.oracle.plan(),
                self.oracle.spec(),
                &[freq_hz],
                levels,
            )?;
            out.extend_from_slice(&c[0].y);
        }
        Ok(out)
    }

    pub fn bandwidth_curve(
        &self,
        center_hz: f64,
        overall_spl: f64,
        bandwidths: &[f64],
    ) -> loudnet::Result<Vec<f64>> {
        let c = bandwidth_curves(
            &[&self.oracle, &self.model],
            self.oracle.plan(),
            self.oracle.spec(),
            center_hz,
            overall_spl,
            bandwidths,
        )?;
        Ok(c.iter().flat_map(|s| s.y.iter().copied()).collect())
    }

    pub fn phon_pair(&mut self, levels: &[f64]) -> loudnet::Result<[f64; 2]> {
        let cal = self.oracle.spec();
        let clamped: Vec<f64> = levels.iter().map(|&l| cal.clamp(l)).collect();
        let frame = SpectrumFrame::from_slice(&clamped)?;
        let oracle = self.oracle.loudness_level(&frame)?.phon;
        let dnn = self.model.predict_frame(&frame, &mut self.ws)?;
        Ok([oracle, clamp_phon(dnn as f64)])
    }
}

#[wasm_bindgen]
impl Demo {
    /// Calibrates the oracle (a fraction of a second) and loads the model.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Demo, JsError> {
        Demo::load().map_err(js_err)
    }

    pub fn band_count(&self) -> usize {
        N_BANDS
    }

    /// Band centre frequencies in Hz.
    pub fn band_centers(&self) -> Vec<f64> {
        self.oracle.plan().centers()
    }

    /// Loudness level of a pure tone at each of `levels` dB SPL. Returns the
    /// oracle curve followed by the network curve.
    pub fn tone_growth(&self, freq_hz: f64, levels: &[f64]) -> Result<Vec<f64>, JsError> {
        self.tone_growth_curve(freq_hz, levels).map_err(js_err)
    }

    /// Loudness of pink noise at a fixed overall level as its bandwidth
    /// grows around `center_hz`. Oracle curve first, then the network.
    pub fn bandwidth(
        &self,
        center_hz: f64,
        overall_spl: f64,
        bandwidths: &[f64],
    ) -> Result<Vec<f64>, JsError> {
        self.bandwidth_curve(center_hz, overall_spl, bandwidths)
            .map_err(js_err)
    }

    /// `[oracle, network]` loudness level of an arbitrary band-level
    /// spectrum (dB SPL per band, clamped to the floor).
    pub fn spectrum_phon(&mut self, levels: &[f64]) -> Result<Vec<f64>, JsError> {
        self.phon_pair(levels).map(|p| p.to_vec()).map_err(js_err)
    }
}
