//! Browser bindings: listen to a texture and inspect its spectrum, run a
//! simulated grouping study end to end, and embed a pasted matrix.
//!
//! Results cross into JavaScript as JSON strings or typed arrays.

use serde::Serialize;
use texture_space::export::{parse_matrix_csv, report_tables, resample_loop, similarity_to_dissimilarity, PREVIEW_CUTOFF_HZ, PREVIEW_RATE};
use texture_space::grouping::{DissimilarityMatrix, ParticipantModel};
use texture_space::mds::{scree, scree_points, MdsOptions, MdsSolution};
use texture_space::pipeline::{analyze_sessions, simulate_study, AnalysisConfig};
use texture_space::spectrum::{magnitude_spectrum_with, SpectrumOptions};
use texture_space::synthesis::{build_texture_set, TextureSet, DEFAULT_FS};
use texture_space::Result;
use wasm_bindgen::prelude::*;

/// Spectrum bins shown, in Hz.
const SPECTRUM_BAND_HZ: (f64, f64) = (20.0, 2000.0);
const SPECTRUM_SEGMENT_LEN: usize = 1 << 14;

fn set(seed: u32, duration_s: f64) -> TextureSet {
    build_texture_set(DEFAULT_FS, duration_s, u64::from(seed))
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
struct TextureInfo {
    id: u32,
    f0_hz: f64,
    amplitude: f64,
    irregularity: f64,
}

pub fn texture_list() -> String {
    let list: Vec<TextureInfo> = set(0, 1.0)
        .entries
        .iter()
        .map(|e| TextureInfo { id: e.id, f0_hz: e.params.f0, amplitude: e.params.amplitude, irregularity: e.params.irregularity })
        .collect();
    serde_json::to_string(&list).expect("list serializes")
}

#[derive(Serialize)]
struct Rendered {
    /// Loopable preview at `rate` Hz.
    #[serde(skip)]
    audio: Vec<f32>,
    rate: u32,
    frequencies: Vec<f64>,
    magnitudes: Vec<f64>,
    peak_hz: f64,
}

fn render(id: u32, duration_s: f64, seed: u32) -> Result<Rendered> {
    let set = set(seed, duration_s);
    let entry = set.get(id).ok_or(texture_space::Error::UnknownTexture(id))?;
    let signal = set.synthesize(entry)?;
    let opts = SpectrumOptions { segment_len: SPECTRUM_SEGMENT_LEN, ..SpectrumOptions::default() };
    let spectrum = magnitude_spectrum_with(&signal.samples, signal.fs, &opts)?;
    let (lo, hi) = SPECTRUM_BAND_HZ;
    let peak_hz = spectrum.fitted_peak_in(lo, hi, 3)?;
    let (frequencies, magnitudes) = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.magnitudes)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .map(|(f, m)| (*f, *m))
        .unzip();
    let audio = resample_loop(&signal.samples, DEFAULT_FS as u32, PREVIEW_RATE, PREVIEW_CUTOFF_HZ)?
        .into_iter()
        .map(|v| v as f32)
        .collect();
    Ok(Rendered { audio, rate: PREVIEW_RATE, frequencies, magnitudes, peak_hz })
}

#[derive(Serialize)]
struct Embedding {
    ids: Vec<u32>,
    /// Row-major `ids.len() x k`.
    coordinates: Vec<f64>,
    k: usize,
    stress: f64,
    scree: Vec<f64>,
}

impl Embedding {
    fn new(solutions: &[MdsSolution], k: usize) -> Self {
        let s = &solutions[k - 1];
        Self {
            ids: s.ids.clone(),
            coordinates: s.coordinates.data.clone(),
            k,
            stress: s.stress,
            scree: scree_points(solutions).iter().map(|p| p.stress).collect(),
        }
    }
}

#[derive(Serialize)]
struct Study {
    embedding: Embedding,
    tables: String,
    /// Parameter vectors, in the embedding's axes.
    vectors: Vec<(String, Vec<f64>)>,
}

pub fn run_study(participants: usize, noise_sd: f64, seed: u32, restarts: usize) -> Result<String> {
    let set = set(0, 1.0);
    let model = ParticipantModel { noise_sd, ..ParticipantModel::default() };
    let sessions = simulate_study(&set, &model, participants, u64::from(seed))?;
    let cfg = AnalysisConfig { k_max: 4, mds: MdsOptions { restarts, seed: u64::from(seed), ..MdsOptions::default() }, ..AnalysisConfig::default() };
    let study = analyze_sessions(&set, &sessions, &cfg)?;
    let out = Study {
        embedding: Embedding::new(&study.scree, cfg.k),
        tables: report_tables(&study.report),
        vectors: study.report.vectors.iter().map(|v| (v.name.clone(), v.components.clone())).collect(),
    };
    Ok(serde_json::to_string(&out).expect("study serializes"))
}

/// Scree for `1..=k` and the `k`-dimensional solution.
pub fn embed(csv: &str, is_dissimilarity: bool, k: usize, restarts: usize, seed: u32) -> Result<String> {
    let (ids, values) = parse_matrix_csv(csv)?;
    let diss = if is_dissimilarity { DissimilarityMatrix::new(ids, values)? } else { similarity_to_dissimilarity(ids, &values)? };
    let solutions = scree(&diss, k, &MdsOptions { restarts, seed: u64::from(seed), ..MdsOptions::default() })?;
    Ok(serde_json::to_string(&Embedding::new(&solutions, k)).expect("embedding serializes"))
}

/// The 24 textures and their parameters, as JSON.
#[wasm_bindgen(js_name = textureList)]
pub fn texture_list_js() -> String {
    texture_list()
}

/// A rendered texture: spectrum and peak as JSON, audio through `audio()`.
#[wasm_bindgen]
pub struct RenderedTexture {
    inner: Rendered,
}

#[wasm_bindgen]
impl RenderedTexture {
    pub fn json(&self) -> String {
        serde_json::to_string(&self.inner).expect("render serializes")
    }

    pub fn audio(&self) -> Vec<f32> {
        self.inner.audio.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> u32 {
        self.inner.rate
    }
}

#[wasm_bindgen(js_name = renderTexture)]
pub fn render_texture_js(id: u32, duration_s: f64, seed: u32) -> std::result::Result<RenderedTexture, JsError> {
    to_js(render(id, duration_s, seed)).map(|inner| RenderedTexture { inner })
}

#[wasm_bindgen(js_name = runStudy)]
pub fn run_study_js(participants: usize, noise_sd: f64, seed: u32, restarts: usize) -> std::result::Result<String, JsError> {
    to_js(run_study(participants, noise_sd, seed, restarts))
}

#[wasm_bindgen(js_name = embedMatrix)]
pub fn embed_js(csv: &str, is_dissimilarity: bool, k: usize, restarts: usize, seed: u32) -> std::result::Result<String, JsError> {
    to_js(embed(csv, is_dissimilarity, k, restarts, seed))
}
