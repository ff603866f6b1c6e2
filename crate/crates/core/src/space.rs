//! Relating an MDS embedding back to the engineering parameters: gradient
//! vectors, angles between them, per-dimension correlations and the
//! placement of participants' group names.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grouping::{GroupingSession, TextureId};
use crate::mds::{Configuration, MdsSolution, ScreePoint};
use crate::synthesis::TextureSet;

/// Preprocessing applied to a parameter column before use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Raw,
    Log,
    ZScore,
    /// Natural log, then mean 0 and unit standard deviation.
    #[default]
    LogZScore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    Frequency,
    Amplitude,
    Irregularity,
}

impl Parameter {
    pub const ALL: [Parameter; 3] = [Parameter::Frequency, Parameter::Amplitude, Parameter::Irregularity];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Frequency => "frequency",
            Parameter::Amplitude => "amplitude",
            Parameter::Irregularity => "irregularity",
        }
    }
}

/// One value per texture, in the order of the solution it is used with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterColumn {
    pub name: String,
    pub values: Vec<f64>,
    pub transform: Transform,
}

impl ParameterColumn {
    pub fn new(name: impl Into<String>, values: Vec<f64>, transform: Transform) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(Error::EmptyInput("parameter column"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameter column", format!("{name}: values must be finite")));
        }
        Ok(Self { name, values, transform })
    }

    /// Column of `parameter` for the textures `ids`, in that order.
    pub fn from_set(set: &TextureSet, parameter: Parameter, ids: &[TextureId], transform: Transform) -> Result<Self> {
        let values = ids
            .iter()
            .map(|&id| {
                let e = set.get(id).ok_or(Error::UnknownTexture(id))?;
                Ok(match parameter {
                    Parameter::Frequency => e.params.f0,
                    Parameter::Amplitude => e.params.amplitude,
                    Parameter::Irregularity => e.params.irregularity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parameter.name(), values, transform)
    }

    /// The values after applying the column's transform.
    pub fn transformed(&self) -> Result<Vec<f64>> {
        let log = |v: &[f64]| -> Result<Vec<f64>> {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(invalid("parameter column", format!("{}: log transform needs positive values", self.name)));
            }
            Ok(v.iter().map(|x| x.ln()).collect())
        };
        match self.transform {
            Transform::Raw => Ok(self.values.clone()),
            Transform::Log => log(&self.values),
            Transform::ZScore => z_score(&self.values, &self.name),
            Transform::LogZScore => z_score(&log(&self.values)?, &self.name),
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn z_score(v: &[f64], name: &str) -> Result<Vec<f64>> {
    let m = mean(v);
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    if sd <= 0.0 {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    Ok(v.iter().map(|x| (x - m) / sd).collect())
}

/// Direction of greatest change of one parameter through the space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub name: String,
    pub components: Vec<f64>,
    pub norm: f64,
}

impl ParameterVector {
    pub fn new(name: impl Into<String>, components: Vec<f64>) -> Self {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self { name: name.into(), components, norm }
    }
}

/// `p = sum(q_i x_i) / sum(q_i^2)` over the (transformed) column `q` and the
/// solution coordinates `x`.
pub fn parameter_vector(column: &ParameterColumn, solution: &MdsSolution) -> Result<ParameterVector> {
    gradient(column, &solution.coordinates)
}

/// [`parameter_vector`] against bare coordinates.
pub fn gradient(column: &ParameterColumn, coords: &Configuration) -> Result<ParameterVector> {
    if column.values.len() != coords.n {
        return Err(Error::LengthMismatch { left: column.values.len(), right: coords.n });
    }
    let q = column.transformed()?;
    let qq: f64 = q.iter().map(|v| v * v).sum();
    if qq <= 0.0 {
        return Err(Error::ZeroVector(column.name.clone()));
    }
    let components = (0..coords.k)
        .map(|d| q.iter().enumerate().map(|(i, qi)| qi * coords.get(i, d)).sum::<f64>() / qq)
        .collect();
    Ok(ParameterVector::new(column.name.clone(), components))
}

/// Angle between two vectors in degrees, in `[0, 180]`.
pub fn vector_angle(a: &ParameterVector, b: &ParameterVector) -> Result<f64> {
    if a.components.len() != b.components.len() {
        return Err(Error::LengthMismatch { left: a.components.len(), right: b.components.len() });
    }
    for v in [a, b] {
        if v.norm <= 0.0 {
            return Err(Error::ZeroVector(v.name.clone()));
        }
    }
    let dot: f64 = a.components.iter().zip(&b.components).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0).acos().to_degrees())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleEntry {
    pub a: String,
    pub b: String,
    pub degrees: f64,
}

/// Angles between consecutive vectors, cyclically: with three vectors this
/// is a-b, b-c, c-a.
pub fn angle_table(vectors: &[ParameterVector]) -> Result<Vec<AngleEntry>> {
    let n = vectors.len();
    let pairs: Vec<(usize, usize)> = match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    };
    pairs
        .into_iter()
        .map(|(i, j)| {
            Ok(AngleEntry {
                a: vectors[i].name.clone(),
                b: vectors[j].name.clone(),
                degrees: vector_angle(&vectors[i], &vectors[j])?,
            })
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 3 {
        return Err(invalid("correlation", "need at least 3 values"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ZeroVariance("correlation input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Parameter-by-dimension Pearson correlations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub parameters: Vec<String>,
    pub dimensions: usize,
    /// `r[p][d]`; `None` where dimension `d` has no spread, so no
    /// correlation is defined.
    pub r: Vec<Vec<Option<f64>>>,
    /// For each dimension, the parameter with the largest `|r|`.
    pub strongest: Vec<Option<usize>>,
}

impl CorrelationTable {
    pub fn is_strongest(&self, parameter: usize, dim: usize) -> bool {
        self.strongest.get(dim) == Some(&Some(parameter))
    }

    pub fn get(&self, parameter: usize, dim: usize) -> Option<f64> {
        self.r[parameter][dim]
    }
}

pub fn dim_correlations(columns: &[ParameterColumn], solution: &MdsSolution) -> Result<CorrelationTable> {
    correlations(columns, &solution.coordinates)
}

/// [`dim_correlations`] against bare coordinates.
pub fn correlations(columns: &[ParameterColumn], coords: &Configuration) -> Result<CorrelationTable> {
    if columns.is_empty() {
        return Err(Error::EmptyInput("parameter columns"));
    }
    let dims: Vec<Vec<f64>> = (0..coords.k).map(|d| coords.column(d)).collect();
    let spread: Vec<bool> = dims
        .iter()
        .map(|x| {
            let m = mean(x);
            x.iter().map(|v| (v - m).powi(2)).sum::<f64>() > 0.0
        })
        .collect();
    let mut r = Vec::with_capacity(columns.len());
    for c in columns {
        let q = c.transformed()?;
        if q.iter().all(|&v| v == q[0]) {
            return Err(Error::ZeroVariance(c.name.clone()));
        }
        r.push(
            dims.iter()
                .zip(&spread)
                .map(|(x, &ok)| if ok { pearson(&q, x).map(Some) } else { Ok(None) })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let strongest = (0..coords.k)
        .map(|d| {
            spread[d].then(|| {
                (0..columns.len())
                    .max_by(|&a, &b| {
                        let (ra, rb) = (r[a][d].unwrap_or(0.0).abs(), r[b][d].unwrap_or(0.0).abs());
                        ra.total_cmp(&rb).then(b.cmp(&a))
                    })
                    .expect("nonempty")
            })
        })
        .collect();
    Ok(CorrelationTable {
        parameters: columns.iter().map(|c| c.name.clone()).collect(),
        dimensions: coords.k,
        r,
        strongest,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPlacement {
    pub label: String,
    pub position: Vec<f64>,
    pub participant_id: String,
    pub round: u8,
    pub group: String,
    pub members: Vec<TextureId>,
}

/// One placement per named group of `round`, at the mean of its members.
pub fn label_positions(sessions: &[GroupingSession], round: u8, solution: &MdsSolution) -> Result<Vec<LabelPlacement>> {
    let coords = &solution.coordinates;
    let mut out = Vec::new();
    for s in sessions {
        let Some(record) = s.rounds.iter().find(|r| r.round == round) else {
            continue;
        };
        for (group, label) in &record.names {
            let members = record.groups.get(group).cloned().unwrap_or_default();
            if members.is_empty() {
                return Err(Error::InvalidSession(format!(
                    "{}: named group {group:?} in round {round} has no members",
                    s.participant_id
                )));
            }
            let mut position = vec![0.0; coords.k];
            for &id in &members {
                let i = solution.index_of(id).ok_or(Error::UnknownTexture(id))?;
                for (d, p) in position.iter_mut().enumerate() {
                    *p += coords.get(i, d);
                }
            }
            position.iter_mut().for_each(|p| *p /= members.len() as f64);
            out.push(LabelPlacement {
                label: label.clone(),
                position,
                participant_id: s.participant_id.clone(),
                round,
                group: group.clone(),
                members,
            });
        }
    }
    Ok(out)
}

/// Coordinates in the plane perpendicular to `vector` (k = 3 gives the
/// view along that parameter's axis). The in-plane basis is the two
/// coordinate axes least aligned with `vector`, orthonormalized.
pub fn perpendicular_projection(coords: &Configuration, vector: &ParameterVector) -> Result<Configuration> {
    let k = coords.k;
    if vector.components.len() != k {
        return Err(Error::LengthMismatch { left: vector.components.len(), right: k });
    }
    if k < 3 {
        return Err(invalid("k", "a perpendicular plane needs at least 3 dimensions"));
    }
    if vector.norm <= 0.0 {
        return Err(Error::ZeroVector(vector.name.clone()));
    }
    let u: Vec<f64> = vector.components.iter().map(|c| c / vector.norm).collect();
    let mut axes: Vec<usize> = (0..k).collect();
    axes.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()).then(a.cmp(&b)));
    let mut basis: Vec<Vec<f64>> = vec![u];
    for &axis in &axes {
        if basis.len() == 3 {
            break;
        }
        let mut e = vec![0.0; k];
        e[axis] = 1.0;
        for b in &basis {
            let dot: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            e.iter_mut().for_each(|x| *x /= norm);
            basis.push(e);
        }
    }
    let mut out = Configuration::zeros(coords.n, 2);
    for i in 0..coords.n {
        for (d, b) in basis[1..].iter().enumerate() {
            out.set(i, d, coords.row(i).iter().zip(b).map(|(x, y)| x * y).sum());
        }
    }
    Ok(out)
}

/// Everything the analysis step reports for one solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub participants: u32,
    pub ids: Vec<TextureId>,
    pub k: usize,
    pub stress: f64,
    pub meets_cutoff: bool,
    pub scree: Vec<ScreePoint>,
    pub transform: Transform,
    pub vectors: Vec<ParameterVector>,
    pub angles: Vec<AngleEntry>,
    pub correlations: CorrelationTable,
    pub label_round: u8,
    pub labels: Vec<LabelPlacement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub transform: Transform,
    pub label_round: u8,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { transform: Transform::default(), label_round: 2 }
    }
}

/// Vectors, angles, correlations and label placements for `solution`.
pub fn analyze_solution(
    set: &TextureSet,
    sessions: &[GroupingSession],
    solution: &MdsSolution,
    scree: Vec<ScreePoint>,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let columns = Parameter::ALL
        .iter()
        .map(|&p| ParameterColumn::from_set(set, p, &solution.ids, opts.transform))
        .collect::<Result<Vec<_>>>()?;
    let vectors = columns
        .iter()
        .map(|c| parameter_vector(c, solution))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisReport {
        participants: sessions.len() as u32,
        ids: solution.ids.clone(),
        k: solution.k,
        stress: solution.stress,
        meets_cutoff: solution.stress <= crate::mds::STRESS_CUTOFF,
        scree,
        transform: opts.transform,
        angles: angle_table(&vectors)?,
        correlations: dim_correlations(&columns, solution)?,
        vectors,
        label_round: opts.label_round,
        labels: label_positions(sessions, opts.label_round, solution)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::RoundRecord;
    use crate::mds::MdsStatus;
    use std::collections::BTreeMap;

    fn solution(rows: &[Vec<f64>]) -> MdsSolution {
        let coordinates = Configuration::from_rows(rows);
        MdsSolution {
            ids: (1..=coordinates.n as u32).collect(),
            k: coordinates.k,
            coordinates,
            stress: 0.0,
            iterations: 0,
            restarts_used: 1,
            best_restart: 0,
            status: MdsStatus::Converged,
            history: vec![],
        }
    }

    fn raw(name: &str, v: Vec<f64>) -> ParameterColumn {
        ParameterColumn::new(name, v, Transform::Raw).unwrap()
    }

    #[test]
    fn single_texture_gradient() {
        let sol = solution(&[vec![1.0, 0.0, 0.0]]);
        let p = parameter_vector(&raw("q", vec![2.0]), &sol).unwrap();
        assert_eq!(p.components, vec![0.5, 0.0, 0.0]);
        assert_eq!(p.norm, 0.5);
    }

    #[test]
    fn constant_column_on_centered_coordinates_vanishes() {
        let sol = solution(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, -2.5]]);
        let p = parameter_vector(&raw("q", vec![3.0; 3]), &sol).unwrap();
        assert!(p.norm < 1e-12);
    }

    #[test]
    fn zero_column_rejected() {
        let sol = solution(&[vec![1.0], vec![-1.0]]);
        assert!(matches!(parameter_vector(&raw("q", vec![0.0, 0.0]), &sol), Err(Error::ZeroVector(_))));
        let short = raw("q", vec![1.0]);
        assert!(parameter_vector(&short, &sol).is_err());
    }

    #[test]
    fn angles() {
        let a = ParameterVector::new("a", vec![1.0, 0.0, 0.0]);
        let b = ParameterVector::new("b", vec![0.0, 1.0, 0.0]);
        let neg = ParameterVector::new("-a", vec![-1.0, 0.0, 0.0]);
        assert!((vector_angle(&a, &b).unwrap() - 90.0).abs() < 1e-12);
        assert!((vector_angle(&a, &neg).unwrap() - 180.0).abs() < 1e-12);
        let zero = ParameterVector::new("0", vec![0.0; 3]);
        assert!(vector_angle(&a, &zero).is_err());
        let table = angle_table(&[a, b, neg]).unwrap();
        let names: Vec<_> = table.iter().map(|e| (e.a.as_str(), e.b.as_str())).collect();
        assert_eq!(names, vec![("a", "b"), ("b", "-a"), ("-a", "a")]);
    }

    #[test]
    fn correlation_with_identical_dimension() {
        let q = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let rows: Vec<Vec<f64>> = q.iter().map(|&v| vec![v, (v * 7.0) % 3.0]).collect();
        let sol = solution(&rows);
        let t = dim_correlations(&[raw("q", q.clone())], &sol).unwrap();
        assert!((t.get(0, 0).unwrap() - 1.0).abs() < 1e-12);
        let flipped = solution(&rows.iter().map(|r| vec![-r[0], r[1]]).collect::<Vec<_>>());
        let tf = dim_correlations(&[raw("q", q)], &flipped).unwrap();
        assert!((tf.get(0, 0).unwrap() + 1.0).abs() < 1e-12);
        assert!((tf.get(0, 1).unwrap() - t.get(0, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_correlation_rejected() {
        let sol = solution(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert!(dim_correlations(&[raw("q", vec![1.0; 3])], &sol).is_err());
    }

    #[test]
    fn flat_dimension_has_no_correlation() {
        let sol = solution(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]]);
        let t = dim_correlations(&[raw("q", vec![1.0, 2.0, 3.0])], &sol).unwrap();
        assert!(t.get(0, 0).is_some());
        assert_eq!(t.get(0, 1), None);
        assert_eq!(t.strongest, vec![Some(0), None]);
    }

    #[test]
    fn strongest_flags_per_dimension() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, ((i * 5) % 6) as f64]).collect();
        let sol = solution(&rows);
        let a = raw("a", (0..6).map(|i| i as f64).collect());
        let b = raw("b", (0..6).map(|i| ((i * 5) % 6) as f64).collect());
        let t = dim_correlations(&[a, b], &sol).unwrap();
        assert!(t.is_strongest(0, 0));
        assert!(t.is_strongest(1, 1));
    }

    fn named_session(groups: &[(&str, &[u32], &str)]) -> GroupingSession {
        let mut g = BTreeMap::new();
        let mut names = BTreeMap::new();
        for (label, members, name) in groups {
            g.insert(label.to_string(), members.to_vec());
            names.insert(label.to_string(), name.to_string());
        }
        GroupingSession {
            participant_id: "p1".into(),
            rounds: vec![RoundRecord { round: 2, groups: g, names }],
        }
    }

    #[test]
    fn labels_sit_at_member_means() {
        let sol = solution(&[vec![1.0, 0.0], vec![-1.0, 2.0], vec![0.0, -2.0]]);
        let s = named_session(&[("A", &[1, 2, 3], "all"), ("B", &[2], "one"), ("C", &[1, 3], "two")]);
        let labels = label_positions(&[s], 2, &sol).unwrap();
        let by: BTreeMap<_, _> = labels.iter().map(|l| (l.label.as_str(), l.position.clone())).collect();
        assert!(by["all"].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(by["one"], vec![-1.0, 2.0]);
        assert_eq!(by["two"], vec![0.5, -1.0]);
    }

    #[test]
    fn empty_named_group_rejected() {
        let sol = solution(&[vec![1.0], vec![-1.0]]);
        let s = named_session(&[("A", &[], "nothing")]);
        assert!(label_positions(&[s], 2, &sol).is_err());
    }

    #[test]
    fn transforms() {
        let c = ParameterColumn::new("f", vec![1.0, std::f64::consts::E, 1.0], Transform::Log).unwrap();
        let t = c.transformed().unwrap();
        assert!((t[1] - 1.0).abs() < 1e-12);
        let z = ParameterColumn::new("f", vec![2.0, 4.0], Transform::ZScore).unwrap().transformed().unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
        assert!(ParameterColumn::new("f", vec![-1.0, 1.0], Transform::LogZScore).unwrap().transformed().is_err());
    }

    #[test]
    fn perpendicular_plane_drops_vector_direction() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * 3 % 5) as f64, (i * i % 7) as f64]).collect();
        let c = Configuration::from_rows(&rows);
        let v = ParameterVector::new("z", vec![0.0, 0.0, 2.0]);
        let p = perpendicular_projection(&c, &v).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let mut got = [p.get(i, 0).abs(), p.get(i, 1).abs()];
            got.sort_by(f64::total_cmp);
            let mut want = [row[0].abs(), row[1].abs()];
            want.sort_by(f64::total_cmp);
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
    }
}
