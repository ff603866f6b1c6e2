//! File formats: WAV, CSV tables, JSON documents and SVG projections.

mod svg;
mod wav;

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grouping::{DissimilarityMatrix, SimilarityMatrix, TextureId};
use crate::mds::{Configuration, MdsSolution, MdsStatus, ScreePoint};
use crate::space::{perpendicular_projection, AnalysisReport, Parameter};
use crate::spectrum::{BodeData, Spectrum};
use crate::synthesis::TextureSet;

pub use svg::{PlotArrow, PlotPoint, Scatter};
pub use wav::{preview_wav_bytes, read_wav_bytes, resample_loop, wav_bytes, PREVIEW_CUTOFF_HZ, PREVIEW_RATE};

/// One texture's line in the set manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: TextureId,
    pub f0_hz: f64,
    pub amplitude: f64,
    pub irregularity: f64,
    pub seed: u64,
    pub wav: String,
    pub csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fs: f64,
    pub duration_s: f64,
    pub base_seed: u64,
    pub wav_rate: u32,
    pub textures: Vec<ManifestEntry>,
}

impl Manifest {
    /// File names follow `texture_NN.{wav,csv}`; `current` adds `texture_NN_mA.csv`.
    pub fn for_set(set: &TextureSet, wav_rate: u32, current: bool) -> Self {
        let textures = set
            .entries
            .iter()
            .map(|e| ManifestEntry {
                id: e.id,
                f0_hz: e.params.f0,
                amplitude: e.params.amplitude,
                irregularity: e.params.irregularity,
                seed: e.seed,
                wav: format!("texture_{:02}.wav", e.id),
                csv: format!("texture_{:02}.csv", e.id),
                current_csv: current.then(|| format!("texture_{:02}_mA.csv", e.id)),
            })
            .collect();
        Self {
            fs: set.config.fs,
            duration_s: set.config.duration,
            base_seed: set.config.base_seed,
            wav_rate,
            textures,
        }
    }

    pub fn ids(&self) -> Vec<TextureId> {
        self.textures.iter().map(|t| t.id).collect()
    }

    pub fn get(&self, id: TextureId) -> Option<&ManifestEntry> {
        self.textures.iter().find(|t| t.id == id)
    }
}

/// CSV text from a header and rows of already formatted cells.
fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().flexible(false).from_writer(Vec::new());
    let row_err = "in-memory csv write";
    w.write_record(header).expect(row_err);
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>()).expect(row_err);
    }
    String::from_utf8(w.into_inner().expect(row_err)).expect("csv of utf-8 cells")
}

fn dims_header(first: &str, k: usize, last: &[&str]) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=k).map(|d| format!("dim{d}")))
        .chain(last.iter().map(|s| s.to_string()))
        .collect()
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Single-column CSV with a header row.
pub fn column_csv(header: &str, values: &[f64]) -> String {
    table(&[header], values.iter().map(|v| [v.to_string()]))
}

pub fn samples_csv(values: &[f64]) -> String {
    column_csv("value", values)
}

pub fn current_csv(values_ma: &[f64]) -> String {
    column_csv("value_mA", values_ma)
}

fn square_csv(ids: &[TextureId], cell: impl Fn(usize, usize) -> String) -> String {
    let header: Vec<String> = std::iter::once("texture_id".to_string()).chain(ids.iter().map(|i| i.to_string())).collect();
    table(
        &refs(&header),
        ids.iter().enumerate().map(|(i, id)| std::iter::once(id.to_string()).chain((0..ids.len()).map(|j| cell(i, j))).collect::<Vec<_>>()),
    )
}

pub fn similarity_csv(m: &SimilarityMatrix) -> String {
    square_csv(&m.ids, |i, j| m.get(i, j).to_string())
}

pub fn dissimilarity_csv(m: &DissimilarityMatrix) -> String {
    square_csv(&m.ids, |i, j| m.get(i, j).to_string())
}

/// Reads a square matrix CSV with a header row and id column.
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<TextureId>, Vec<f64>)> {
    let bad = |msg: String| invalid("matrix csv", msg);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.is_empty() {
        return Err(Error::EmptyInput("matrix csv"));
    }
    let ids = header
        .iter()
        .skip(1)
        .map(|c| c.parse::<TextureId>().map_err(|_| bad(format!("bad id {c:?} in header"))))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(ids.len() * ids.len());
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let mut cells = record.iter();
        let id: TextureId = cells
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(format!("row {}: bad id", r + 1)))?;
        if ids.get(r) != Some(&id) {
            return Err(bad(format!("row {} is texture {id}, header says {:?}", r + 1, ids.get(r))));
        }
        let row = cells
            .map(|c| c.parse::<f64>().map_err(|_| bad(format!("row {}: bad value {c:?}", r + 1))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != ids.len() {
            return Err(bad(format!("row {} has {} values, expected {}", r + 1, row.len(), ids.len())));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != ids.len() {
        return Err(bad(format!("{rows} rows for {} ids", ids.len())));
    }
    Ok((ids, values))
}

/// A similarity matrix (larger = more alike) as dissimilarities, by
/// subtracting from the largest entry. Nonmetric scaling depends only on
/// the order, so any decreasing map gives the same solution.
pub fn similarity_to_dissimilarity(ids: Vec<TextureId>, values: &[f64]) -> Result<DissimilarityMatrix> {
    let n = ids.len();
    if values.len() != n * n {
        return Err(Error::LengthMismatch { left: values.len(), right: n * n });
    }
    let max = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| values[i * n + j]))
        .fold(f64::NEG_INFINITY, f64::max);
    let converted = (0..n * n)
        .map(|p| if p / n == p % n { 0.0 } else { max - values[p] })
        .collect();
    DissimilarityMatrix::new(ids, converted)
}

pub fn solution_csv(sol: &MdsSolution) -> String {
    let header = dims_header("texture_id", sol.k, &[]);
    table(
        &refs(&header),
        sol.ids.iter().enumerate().map(|(i, id)| {
            std::iter::once(id.to_string()).chain((0..sol.k).map(|d| sol.coordinates.get(i, d).to_string())).collect::<Vec<_>>()
        }),
    )
}

/// The JSON form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub k: usize,
    pub stress: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub status: MdsStatus,
    pub ids: Vec<TextureId>,
    pub coordinates: Vec<Vec<f64>>,
}

impl From<&MdsSolution> for SolutionDocument {
    fn from(s: &MdsSolution) -> Self {
        Self {
            k: s.k,
            stress: s.stress,
            iterations: s.iterations,
            restarts_used: s.restarts_used,
            best_restart: s.best_restart,
            status: s.status,
            ids: s.ids.clone(),
            coordinates: s.coordinates.rows(),
        }
    }
}

pub fn solution_json(sol: &MdsSolution) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SolutionDocument::from(sol))?)
}

pub fn scree_csv(points: &[ScreePoint]) -> String {
    table(&["k", "stress"], points.iter().map(|p| [p.k.to_string(), p.stress.to_string()]))
}

pub fn bode_csv(b: &BodeData) -> String {
    table(
        &["freq_hz", "gain_db", "phase_deg"],
        (0..b.frequencies.len()).map(|i| [b.frequencies[i].to_string(), b.gain_db[i].to_string(), b.phase_deg[i].to_string()]),
    )
}

pub fn spectrum_csv(sp: &Spectrum) -> String {
    table(
        &["freq_hz", "magnitude"],
        sp.frequencies.iter().zip(&sp.magnitudes).map(|(f, m)| [f.to_string(), m.to_string()]),
    )
}

pub fn report_json(r: &AnalysisReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(r)?)
}

pub fn vectors_csv(r: &AnalysisReport) -> String {
    let header = dims_header("parameter", r.k, &["norm"]);
    table(
        &refs(&header),
        r.vectors.iter().map(|v| {
            std::iter::once(v.name.clone())
                .chain(v.components.iter().map(f64::to_string))
                .chain(std::iter::once(v.norm.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn angles_csv(r: &AnalysisReport) -> String {
    table(&["a", "b", "degrees"], r.angles.iter().map(|a| [a.a.clone(), a.b.clone(), a.degrees.to_string()]))
}

/// Empty cells where a dimension has no spread.
pub fn correlations_csv(r: &AnalysisReport) -> String {
    let t = &r.correlations;
    let header = dims_header("parameter", t.dimensions, &[]);
    table(
        &refs(&header),
        t.parameters.iter().enumerate().map(|(p, name)| {
            std::iter::once(name.clone())
                .chain(t.r[p].iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn labels_csv(r: &AnalysisReport) -> String {
    let header = dims_header("participant_id", r.k, &[]);
    let mut header = refs(&header);
    header.splice(1..1, ["round", "group", "label"]);
    table(
        &header,
        r.labels.iter().map(|l| {
            [l.participant_id.clone(), l.round.to_string(), l.group.clone(), l.label.clone()]
                .into_iter()
                .chain(l.position.iter().map(f64::to_string))
                .collect::<Vec<_>>()
        }),
    )
}

/// Plain-text angle and correlation tables. Angles are whole degrees;
/// the strongest correlation in each dimension is starred.
pub fn report_tables(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k = {}, stress-1 = {:.4}{}", r.k, r.stress, if r.meets_cutoff { " (<= 0.15)" } else { "" });
    let _ = writeln!(s, "\nAngles between parameter vectors");
    for a in &r.angles {
        let _ = writeln!(s, "  {:<28} {:>4}°", format!("{} - {}", a.a, a.b), a.degrees.round());
    }
    let t = &r.correlations;
    let _ = write!(s, "\nCorrelations with dimensions\n  {:<14}", "");
    for d in 1..=t.dimensions {
        let _ = write!(s, "{:>9}", format!("dim {d}"));
    }
    s.push('\n');
    for (p, name) in t.parameters.iter().enumerate() {
        let _ = write!(s, "  {name:<14}");
        for (d, v) in t.r[p].iter().enumerate() {
            let cell = match v {
                Some(v) => format!("{v:.2}{}", if t.is_strongest(p, d) { "*" } else { " " }),
                None => "- ".into(),
            };
            let _ = write!(s, "{cell:>9}");
        }
        s.push('\n');
    }
    s
}

/// The three standard views of an analysis: dimensions 1–2, dimensions
/// 2–3, and the plane perpendicular to the irregularity vector. Views that
/// need more dimensions than the solution has are skipped.
pub fn projection_svgs(report: &AnalysisReport, coords: &Configuration) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let labels = |axes: &dyn Fn(&[f64]) -> (f64, f64)| -> Vec<PlotPoint> {
        report
            .labels
            .iter()
            .map(|l| {
                let (x, y) = axes(&l.position);
                PlotPoint { x, y, label: l.label.clone() }
            })
            .collect()
    };
    let points = |c: &Configuration, a: usize, b: usize| -> Vec<PlotPoint> {
        (0..c.n).map(|i| PlotPoint { x: c.get(i, a), y: c.get(i, b), label: report.ids[i].to_string() }).collect()
    };
    for (a, b) in [(0usize, 1usize), (1, 2)] {
        if b >= coords.k {
            continue;
        }
        let plot = Scatter {
            title: format!("Dimensions {} and {}", a + 1, b + 1),
            x_label: format!("dim {}", a + 1),
            y_label: format!("dim {}", b + 1),
            points: points(coords, a, b),
            notes: labels(&|p| (p[a], p[b])),
            arrows: report
                .vectors
                .iter()
                .map(|v| PlotArrow { dx: v.components[a], dy: v.components[b], label: v.name.clone() })
                .collect(),
        };
        out.push((format!("dims_{}_{}.svg", a + 1, b + 1), plot.to_svg()));
    }
    if coords.k >= 3 {
        if let Some(irr) = report.vectors.iter().find(|v| v.name == Parameter::Irregularity.name()) {
            let flat = perpendicular_projection(coords, irr)?;
            let label_coords = Configuration::from_rows(&report.labels.iter().map(|l| l.position.clone()).collect::<Vec<_>>());
            let flat_labels = if report.labels.is_empty() {
                Vec::new()
            } else {
                let lc = perpendicular_projection(&label_coords, irr)?;
                report
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| PlotPoint { x: lc.get(i, 0), y: lc.get(i, 1), label: l.label.clone() })
                    .collect()
            };
            let vec_coords = Configuration::from_rows(&report.vectors.iter().map(|v| v.components.clone()).collect::<Vec<_>>());
            let fv = perpendicular_projection(&vec_coords, irr)?;
            let plot = Scatter {
                title: "Plane perpendicular to irregularity".into(),
                x_label: "u".into(),
                y_label: "v".into(),
                points: points(&flat, 0, 1),
                notes: flat_labels,
                arrows: report
                    .vectors
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.name != irr.name)
                    .map(|(i, v)| PlotArrow { dx: fv.get(i, 0), dy: fv.get(i, 1), label: v.name.clone() })
                    .collect(),
            };
            out.push(("perpendicular_irregularity.svg".into(), plot.to_svg()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{build_texture_set, DEFAULT_FS};

    #[test]
    fn manifest_lists_all_textures() {
        let set = build_texture_set(DEFAULT_FS, 2.0, 3);
        let m = Manifest::for_set(&set, 100_000, false);
        assert_eq!(m.ids(), (1..=24).collect::<Vec<_>>());
        assert!(m.textures.iter().all(|t| !(t.f0_hz == 450.0 && t.amplitude == 0.30)));
        assert_eq!(m.get(1).unwrap().wav, "texture_01.wav");
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"f0_hz\""));
        assert_eq!(serde_json::from_str::<Manifest>(&json).unwrap(), m);
    }

    #[test]
    fn column_headers() {
        assert_eq!(samples_csv(&[0.5, -1.0]), "value\n0.5\n-1\n");
        assert!(current_csv(&[3.0]).starts_with("value_mA\n"));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let d = DissimilarityMatrix::from_fn(vec![3, 5, 9], |i, j| (i + j) as f64 + 0.5).unwrap();
        let text = dissimilarity_csv(&d);
        assert!(text.starts_with("texture_id,3,5,9\n3,0,"));
        let (ids, values) = parse_matrix_csv(&text).unwrap();
        assert_eq!(ids, d.ids);
        assert_eq!(values, d.values);
        assert!(parse_matrix_csv("texture_id,1,2\n1,0,1\n").is_err());
        assert!(parse_matrix_csv("texture_id,1\n2,0\n").is_err());
    }

    #[test]
    fn similarity_conversion_reverses_order() {
        let d = similarity_to_dissimilarity(vec![1, 2, 3], &[0.0, 5.0, 1.0, 5.0, 0.0, 2.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(0, 2), 4.0);
        assert_eq!(d.get(1, 2), 3.0);
        assert_eq!(d.get(1, 1), 0.0);
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        let text = table(&["a", "b"], [["x,y".to_string(), "say \"hi\"".to_string()]]);
        assert_eq!(text, "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    }
}
