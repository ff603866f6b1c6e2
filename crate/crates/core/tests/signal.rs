use texture_space::spectrum::*;
use texture_space::synthesis::*;

const FS: f64 = DEFAULT_FS;

fn all_params() -> Vec<TextureParams> {
    build_texture_set(FS, 2.0, 0).entries.iter().map(|e| e.params).collect()
}

#[test]
fn filter_spectra_match_closed_form() {
    for p in all_params() {
        let m = measure_filter(&p, FS, 1 << 20).unwrap();
        assert!(m.peak_error() < 0.02, "{m:?}");
        assert!((m.measured_gain - p.amplitude).abs() < 1e-9, "{m:?}");
        let closed = (m.measured_bandwidth_hz / m.closed_form_bandwidth_hz - 1.0).abs();
        assert!(closed < 0.01, "{m:?}");
        if p.irregularity <= 0.34 {
            assert!(m.bandwidth_error() < 0.10, "{m:?}");
        }
    }
}

#[test]
fn measured_bandwidth_grows_with_irregularity() {
    for f0 in FREQUENCIES_HZ {
        let widths: Vec<f64> = IRREGULARITIES
            .iter()
            .map(|&r| {
                let p = TextureParams::new(f0, 1.0, r).unwrap();
                measure_filter(&p, FS, 1 << 20).unwrap().measured_bandwidth_hz
            })
            .collect();
        assert!(widths.windows(2).all(|w| w[0] < w[1]), "{f0} Hz: {widths:?}");
    }
}

#[test]
fn estimated_response_of_filter_matches_closed_form() {
    let sweep = generate_sweep(10.0, 1000.0, 10.0, FS).unwrap();
    for (f0, r) in [(150.0, 0.34), (260.0, 1.67), (450.0, 0.34)] {
        let c = design_bandpass(f0, r, FS).unwrap();
        let out = filter_apply(&c, &sweep.samples).unwrap();
        let bode = estimate_response(&sweep.samples, &out, FS).unwrap();
        let (lo, hi) = c.half_power_edges();
        let mut checked = 0;
        for (i, &f) in bode.frequencies.iter().enumerate() {
            if f >= lo && f <= hi.min(1000.0) {
                let want = 20.0 * c.magnitude_at(f).log10();
                assert!((bode.gain_db[i] - want).abs() < 0.5, "{f0} Hz at {f}: {} vs {want}", bode.gain_db[i]);
                checked += 1;
            }
        }
        assert!(checked > 3, "{f0} Hz: only {checked} bins in the lobe");
    }
}

#[test]
fn rendered_textures_peak_near_center() {
    // long renders so the noisy spectrum settles; one per (f0, R)
    let pairs: Vec<(f64, f64)> = FREQUENCIES_HZ
        .iter()
        .flat_map(|&f| IRREGULARITIES.iter().map(move |&r| (f, r)))
        .collect();
    let results: Vec<(f64, f64, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .iter()
            .map(|&(f0, r)| {
                s.spawn(move || {
                    let p = TextureParams::new(f0, 1.0, r).unwrap();
                    let sig = synthesize_texture(&p, 20.0, FS, 11).unwrap();
                    let spec = magnitude_spectrum(&sig.samples, FS).unwrap();
                    (f0, r, spec.fitted_peak_in(20.0, 5000.0, 5).unwrap())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (f0, r, peak) in results {
        let tol = if r > 1.0 { 0.15 } else { 0.02 };
        assert!((peak / f0 - 1.0).abs() < tol, "f0 {f0} R {r}: peak {peak}");
    }
}

#[test]
fn every_texture_has_a_flat_envelope() {
    let set = build_texture_set(FS, 2.0, 0);
    for (e, sig) in set.entries.iter().zip(set.synthesize_all().unwrap()) {
        let unit: Vec<f64> = sig.samples.iter().map(|v| v / e.params.amplitude).collect();
        let env = analytic_envelope(&unit).unwrap();
        let inner = interior(&env, 0.9);
        let flat = inner.iter().filter(|v| (0.9..=1.1).contains(*v)).count() as f64 / inner.len() as f64;
        assert!(flat >= 0.9, "texture {}: {flat}", e.id);
        assert!(sig.peak() <= e.params.amplitude + 1e-12);
    }
}

#[test]
fn centroid_rises_with_frequency() {
    for r in IRREGULARITIES {
        let c: Vec<f64> = FREQUENCIES_HZ
            .iter()
            .map(|&f0| {
                let sig = synthesize_texture(&TextureParams::new(f0, 1.0, r).unwrap(), 2.0, FS, 3).unwrap();
                spectral_centroid(&magnitude_spectrum(&sig.samples, FS).unwrap()).unwrap()
            })
            .collect();
        assert!(c.windows(2).all(|w| w[0] < w[1]), "R {r}: {c:?}");
    }
}

#[test]
fn unit_texture_current_stays_in_range() {
    let p = TextureParams::new(260.0, 1.0, 0.34).unwrap();
    let current = synthesize_texture(&p, 2.0, FS, 1).unwrap().to_current();
    let mean = current.samples.iter().sum::<f64>() / current.samples.len() as f64;
    assert!(current.samples.iter().all(|v| (1.0..=5.0).contains(v)));
    assert!((mean - 3.0).abs() < 0.05);
}
