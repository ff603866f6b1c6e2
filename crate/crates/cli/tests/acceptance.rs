//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use texture_space::grouping::*;
use texture_space::mds::*;
use texture_space::pipeline::{analyze_sessions, simulate_study, AnalysisConfig};
use texture_space::space::*;
use texture_space::spectrum::measure_filter;
use texture_space::synthesis::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn default_set() -> TextureSet {
    build_texture_set(DEFAULT_FS, DEFAULT_DURATION_S, 0)
}

fn filter_fidelity() -> Check {
    let start = Instant::now();
    let (mut worst_peak, mut worst_bw) = (0.0f64, 0.0f64);
    for e in &default_set().entries {
        let m = measure_filter(&e.params, DEFAULT_FS, 1 << 20).map_err(|e| e.to_string())?;
        let tol = if e.params.irregularity > 1.0 { 0.15 } else { 0.02 };
        ensure(m.peak_error() < tol, || format!("texture {}: peak {:.2} Hz", e.id, m.measured_peak_hz))?;
        worst_peak = worst_peak.max(m.peak_error());
        if e.params.irregularity <= 0.34 {
            ensure(m.bandwidth_error() < 0.10, || format!("texture {}: bandwidth {:.2} Hz", e.id, m.measured_bandwidth_hz))?;
            worst_bw = worst_bw.max(m.bandwidth_error());
        }
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("worst peak error {:.3}%, worst bandwidth error {:.2}%", 100.0 * worst_peak, 100.0 * worst_bw))
}

fn envelope() -> Check {
    let start = Instant::now();
    let set = default_set();
    let mut worst = 1.0f64;
    for (e, sig) in set.entries.iter().zip(set.synthesize_all().map_err(|e| e.to_string())?) {
        let unit: Vec<f64> = sig.samples.iter().map(|v| v / e.params.amplitude).collect();
        let env = analytic_envelope(&unit).map_err(|e| e.to_string())?;
        let inner = interior(&env, 0.9);
        let flat = inner.iter().filter(|v| (0.9..=1.1).contains(*v)).count() as f64 / inner.len() as f64;
        ensure(flat >= 0.9, || format!("texture {}: {:.1}% flat", e.id, 100.0 * flat))?;
        worst = worst.min(flat);
    }
    within(start.elapsed(), 30.0)?;
    Ok(format!("least flat texture {:.1}%", 100.0 * worst))
}

fn set_construction() -> Check {
    let set = default_set();
    ensure(set.len() == 24, || format!("{} textures", set.len()))?;
    ensure(set.ids() == (1..=24).collect::<Vec<_>>(), || "ids are not 1..24".into())?;
    ensure(FREQUENCIES_HZ == [150.0, 260.0, 450.0], || "frequencies".into())?;
    ensure(AMPLITUDES == [0.30, 0.55, 1.0], || "amplitudes".into())?;
    ensure(IRREGULARITIES == [0.067, 0.34, 1.67], || "irregularities".into())?;
    let mut expected = vec![];
    for f in FREQUENCIES_HZ {
        for r in IRREGULARITIES {
            for a in AMPLITUDES {
                if !(f == 450.0 && a == 0.30) {
                    expected.push((f, r, a));
                }
            }
        }
    }
    let got: Vec<_> = set.entries.iter().map(|e| (e.params.f0, e.params.irregularity, e.params.amplitude)).collect();
    ensure(got == expected, || "parameter grid differs".into())?;
    ensure(!set.entries.iter().any(|e| e.params.f0 == 450.0 && e.params.amplitude == 0.30), || "excluded texture present".into())?;
    Ok("24 textures, (450 Hz, 0.30) absent".into())
}

fn current_mapping() -> Check {
    let set = default_set();
    let mut report = vec![];
    for e in set.entries.iter().filter(|e| e.params.amplitude == 1.0) {
        let current = set.synthesize(e).map_err(|e| e.to_string())?.to_current();
        let (lo, hi) = current.samples.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        let mean = current.samples.iter().sum::<f64>() / current.samples.len() as f64;
        ensure(lo >= 1.0 && hi <= 5.0, || format!("texture {}: range [{lo:.3}, {hi:.3}] mA", e.id))?;
        ensure((mean - 3.0).abs() <= 0.05, || format!("texture {}: mean {mean:.4} mA", e.id))?;
        report.push(mean);
    }
    let far = report.iter().map(|m| (m - 3.0).abs()).fold(0.0, f64::max);
    Ok(format!("{} unit textures in [1, 5] mA, means within {far:.4} mA of 3", report.len()))
}

fn round(n: u8, groups: &[&[u32]]) -> RoundRecord {
    RoundRecord {
        round: n,
        groups: groups.iter().enumerate().map(|(g, m)| (((b'A' + g as u8) as char).to_string(), m.to_vec())).collect(),
        names: BTreeMap::new(),
    }
}

fn scoring_oracle() -> Check {
    let sessions = vec![
        GroupingSession {
            participant_id: "a".into(),
            rounds: vec![round(1, &[&[1, 2], &[3], &[4]]), round(2, &[&[1, 2, 3], &[4]]), round(3, &[&[1, 2, 3, 4]])],
        },
        GroupingSession {
            participant_id: "b".into(),
            rounds: vec![round(1, &[&[1], &[2, 4], &[3]]), round(2, &[&[1, 3], &[2, 4]]), round(3, &[&[1, 3], &[2, 4]])],
        },
    ];
    for s in &sessions {
        s.validate().map_err(|e| e.to_string())?;
    }
    let m = aggregate(&sessions).map_err(|e| e.to_string())?;
    let ids = [1u32, 2, 3, 4];
    let mut brute = vec![0u32; 16];
    for (i, &a) in ids.iter().enumerate() {
        for (j, &b) in ids.iter().enumerate() {
            if i == j {
                continue;
            }
            for s in &sessions {
                if let Some(r) = s.rounds.iter().find(|r| r.groups.values().any(|g| g.contains(&a) && g.contains(&b))) {
                    brute[i * 4 + j] += 4 - u32::from(r.round);
                }
            }
        }
    }
    ensure(m.ids == ids, || format!("ids {:?}", m.ids))?;
    ensure(m.counts == brute, || format!("aggregate {:?} vs enumeration {brute:?}", m.counts))?;
    Ok(format!("all 16 entries equal, e.g. (1,2) = {} and (2,4) = {}", m.get(0, 1), m.get(1, 3)))
}

fn gaussian_config(n: usize, k: usize, seed: u64) -> Configuration {
    let draws = white_noise(n * k, seed);
    Configuration::from_rows(&draws.chunks(k).map(<[f64]>::to_vec).collect::<Vec<_>>())
}

fn euclidean(c: &Configuration, f: impl Fn(f64) -> f64) -> Result<DissimilarityMatrix, String> {
    DissimilarityMatrix::from_fn((1..=c.n as u32).collect(), |i, j| f(c.distance(i, j))).map_err(|e| e.to_string())
}

fn mds_recovery() -> Check {
    let start = Instant::now();
    let truth = gaussian_config(24, 3, 21);
    let diss = euclidean(&truth, |d| d.powi(2) + d.exp())?;
    let sol = nonmetric_mds(&diss, 3, &MdsOptions { restarts: 20, ..MdsOptions::default() }).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let fit = procrustes_align(&truth, &sol.coordinates).map_err(|e| e.to_string())?;
    ensure(sol.restarts_used == 20, || format!("{} restarts", sol.restarts_used))?;
    ensure(sol.stress < 0.01, || format!("stress {:.3e}", sol.stress))?;
    ensure(fit.residual < 1e-2, || format!("procrustes residual {:.3e}", fit.residual))?;
    within(elapsed, 10.0)?;
    Ok(format!("stress {:.2e}, procrustes residual {:.2e}, {:.2} s", sol.stress, fit.residual, elapsed.as_secs_f64()))
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].max(1.0))
}

fn stress_monotonicity() -> Check {
    let set = default_set();
    let sessions = simulate_study(&set, &ParticipantModel::default(), 17, 7).map_err(|e| e.to_string())?;
    let study = to_dissimilarity(&aggregate(&sessions).map_err(|e| e.to_string())?);
    let noisy = {
        let c = gaussian_config(20, 4, 3);
        let jitter = white_noise(400, 4);
        DissimilarityMatrix::from_fn((1..=20).collect(), |i, j| c.distance(i, j) + 0.3 * jitter[i.min(j) * 20 + i.max(j)].abs())
            .map_err(|e| e.to_string())?
    };
    let opts = MdsOptions { restarts: 20, ..MdsOptions::default() };
    let mut runs = 0;
    let mut screes = vec![];
    for diss in [&study, &noisy] {
        // the scree keeps only the best run per k, so check every start as well
        for k in 1..=4 {
            for r in 0..opts.restarts {
                let one = nonmetric_mds(diss, k, &MdsOptions { restarts: 1, seed: r as u64, ..opts.clone() }).map_err(|e| e.to_string())?;
                ensure(non_increasing(&one.history), || format!("k={k} start {r}: stress rose"))?;
                runs += 1;
            }
        }
        let solutions = scree(diss, 6, &opts).map_err(|e| e.to_string())?;
        for s in &solutions {
            ensure(non_increasing(&s.history), || format!("scree k={}: stress rose", s.k))?;
        }
        let stresses: Vec<f64> = solutions.iter().map(|s| s.stress).collect();
        ensure(stresses.windows(2).all(|w| w[1] <= w[0]), || format!("scree rises: {stresses:?}"))?;
        screes.push(stresses);
    }
    let fmt = |v: &[f64]| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(" ");
    Ok(format!("{runs} runs non-increasing; scree {} / {}", fmt(&screes[0]), fmt(&screes[1])))
}

/// Rotated copy of `c` with identity covariance.
fn whitened(c: &Configuration) -> Configuration {
    let mut w = c.to_principal_axes();
    for d in 0..w.k {
        let sd = (w.column(d).iter().map(|v| v * v).sum::<f64>() / w.n as f64).sqrt();
        for i in 0..w.n {
            w.set(i, d, w.get(i, d) / sd);
        }
    }
    w
}

fn orthonormal_basis(seed: u64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = vec![];
    for v in white_noise(9, seed).chunks(3) {
        let mut u = v.to_vec();
        for b in &basis {
            let dot: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(u.iter().map(|x| x / norm).collect());
    }
    basis
}

fn vector_recovery() -> Check {
    let truth = whitened(&gaussian_config(24, 3, 17));
    let sol = nonmetric_mds(&euclidean(&truth, |d| d.powf(1.5))?, 3, &MdsOptions::default()).map_err(|e| e.to_string())?;
    let aligned = procrustes_align(&truth, &sol.coordinates).map_err(|e| e.to_string())?.aligned;
    let mut vectors = vec![];
    let mut worst = 0.0f64;
    for (k, u) in orthonormal_basis(23).into_iter().enumerate() {
        let q: Vec<f64> = (0..24).map(|i| 2.5 * truth.row(i).iter().zip(&u).map(|(x, y)| x * y).sum::<f64>() + 7.0).collect();
        let column = ParameterColumn::new(format!("field {k}"), q, Transform::ZScore).map_err(|e| e.to_string())?;
        let p = gradient(&column, &aligned).map_err(|e| e.to_string())?;
        let angle = vector_angle(&p, &ParameterVector::new("planted", u)).map_err(|e| e.to_string())?;
        ensure(angle < 5.0, || format!("field {k}: {angle:.2}° from planted"))?;
        worst = worst.max(angle);
        vectors.push(p);
    }
    let angles = angle_table(&vectors).map_err(|e| e.to_string())?;
    for e in &angles {
        ensure((e.degrees - 90.0).abs() < 5.0, || format!("{} - {}: {:.2}°", e.a, e.b, e.degrees))?;
    }
    let list: Vec<String> = angles.iter().map(|e| format!("{:.1}°", e.degrees)).collect();
    Ok(format!("worst direction error {worst:.2}°, pairwise {}", list.join(" ")))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let set = default_set();
    let sessions = simulate_study(&set, &ParticipantModel::default(), 17, 0).map_err(|e| e.to_string())?;
    ensure(sessions.iter().all(|s| s.rounds.len() == 3), || "every participant does 3 rounds".into())?;
    let study = analyze_sessions(&set, &sessions, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let r = &study.report;
    ensure(r.participants == 17, || format!("{} participants", r.participants))?;
    ensure(r.k == 3 && study.solution().k == 3, || format!("k = {}", r.k))?;
    ensure(r.stress <= 0.15 && r.meets_cutoff, || format!("k=3 stress {:.4}", r.stress))?;
    ensure(r.vectors.len() == 3 && r.vectors.iter().all(|v| v.components.len() == 3), || "3 vectors of 3 components".into())?;
    ensure(r.angles.len() == 3, || format!("{} angles", r.angles.len()))?;
    let c = &r.correlations;
    ensure(c.r.len() == 3 && c.r.iter().all(|row| row.len() == 3), || "3x3 correlation table".into())?;
    let tables = texture_space::export::report_tables(r);
    ensure(tables.lines().filter(|l| l.contains('°')).count() == 3, || "angle table layout".into())?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("k=3 stress {:.4}, {:.1} s", r.stress, start.elapsed().as_secs_f64()))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn pipeline(root: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_texture-space");
    let o = |sub: &str| root.join(sub).to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--seed".into(), "4".into(), "--out".into(), o("synth")],
        vec!["simulate".into(), "--seed".into(), "5".into(), "--manifest".into(), o("synth/manifest.json"), "--out".into(), o("sessions")],
        vec!["analyze".into(), o("sessions"), "--seed".into(), "6".into(), "--kmax".into(), "5".into(), "--restarts".into(), "20".into(), "--out".into(), o("analysis")],
        vec!["mds".into(), o("analysis/similarity.csv"), "--seed".into(), "7".into(), "--out".into(), o("mds")],
        vec!["export-sweep".into(), "--out".into(), o("sweep")],
    ];
    for args in steps {
        let out = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
    }
    Ok(())
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    ensure(fa.keys().eq(fb.keys()), || "different file sets".into())?;
    for (name, bytes) in &fa {
        ensure(&fb[name] == bytes, || format!("{name} differs between runs"))?;
    }
    let bytes: usize = fa.values().map(Vec::len).sum();
    Ok(format!("{} files ({:.0} MB) identical across two runs of synth, simulate, analyze, mds, export-sweep", fa.len(), bytes as f64 / 1e6))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("filter fidelity", filter_fidelity),
        ("envelope normalization", envelope),
        ("set construction", set_construction),
        ("current mapping", current_mapping),
        ("scoring oracle", scoring_oracle),
        ("MDS recovery", mds_recovery),
        ("stress monotonicity", stress_monotonicity),
        ("parameter vector recovery", vector_recovery),
        ("end-to-end simulated study", end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
