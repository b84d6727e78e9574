use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::frontend::N_BANDS;

fn oracle() -> &'static Oracle {
    static ORACLE: OnceLock<Oracle> = OnceLock::new();
    ORACLE.get_or_init(|| Oracle::new().unwrap())
}

#[test]
fn phon_anchor_at_1khz() {
    let o = oracle();
    for l in (10..=90).step_by(10) {
        let phon = o.tone_phon(1000.0, l as f64).unwrap();
        assert!((phon - l as f64).abs() < 0.1, "{l} dB -> {phon} phon");
    }
    // between curve samples too
    for l in [10.5, 33.3, 47.7, 88.2] {
        let phon = o.tone_phon(1000.0, l).unwrap();
        assert!((phon - l).abs() < 0.1, "{l} dB -> {phon} phon");
    }
}

#[test]
fn calibration_targets() {
    let o = oracle();
    let f = SpectrumFrame::tone(o.plan(), 1000.0, 40.0, o.spec());
    let label = o.loudness_level(&f).unwrap();
    assert!((label.sone - 1.0).abs() < 1e-3);
    assert!((label.phon - 40.0).abs() < 1e-9);

    let t1k = o.tone_threshold(1000.0, 0.01).unwrap();
    assert!((1.0..=3.0).contains(&t1k), "1 kHz threshold {t1k}");
    let t100 = o.tone_threshold(100.0, 0.01).unwrap();
    let diff = t100 - t1k;
    assert!((15.0..=25.0).contains(&diff), "100 Hz elevation {diff}");
}

#[test]
fn excitation_normalised_at_threshold() {
    let o = oracle();
    let thr = SpectrumFrame::tone(o.plan(), 1000.0, 2.0, o.spec());
    let ex = o.excitation_pattern(&o.apply_ear_transfer(&thr));
    let (cam, peak) = ex.peak();
    assert!((peak - 1.0).abs() < 1e-12);
    // 21.4 log10(4.37 + 1) = 15.62; the tone band is centred at 970 Hz
    assert!((cam - 15.6).abs() <= 0.3, "peak at {cam} Cam");
    assert!(ex.cam(0) <= 1.8 && ex.cam(ex.values.len() - 1) >= 33.0);
}

#[test]
fn silence_and_linearity() {
    let o = oracle();
    let silent = SpectrumFrame::silent(o.spec());
    let ex = o.excitation_pattern(&o.apply_ear_transfer(&silent));
    assert!(ex.values.iter().all(|&v| v == 0.0));
    assert_eq!(o.loudness_level(&silent).unwrap().phon, 0.0);

    let mut s = SpectrumFrame::silent(o.spec());
    for (i, l) in s.levels.iter_mut().enumerate() {
        *l = 20.0 + (i as f64 * 0.7) % 30.0;
    }
    let mut doubled = s;
    for l in doubled.levels.iter_mut() {
        *l += 10.0 * 2f64.log10();
    }
    let e1 = o.excitation_pattern(&s);
    let e2 = o.excitation_pattern(&doubled);
    for (a, b) in e1.values.iter().zip(&e2.values) {
        assert!((b / a - 2.0).abs() < 1e-9);
    }
}

#[test]
fn specific_loudness_shape() {
    let o = oracle();
    let p = o.params();
    let f = |e: f64| specific_loudness_value(e, 1.0, p.a_ratio, p.alpha, o.calibration().c);
    assert_eq!(f(0.0), 0.0);
    assert_eq!(f(1.0), 0.0);
    let mut prev = 0.0;
    for i in 0..2000 {
        let e = 10f64.powf(i as f64 / 200.0);
        let v = f(e);
        assert!(v >= prev);
        prev = v;
    }
    // compression: second differences negative at large excitation
    let h = 1.0;
    for e in [100.0, 1e3, 1e5, 1e7] {
        let d2 = f(e + h) - 2.0 * f(e) + f(e - h);
        assert!(d2 < 0.0, "second difference at {e}: {d2}");
    }
}

#[test]
fn total_loudness_integral() {
    assert_eq!(
        total_loudness(&SpecificLoudness {
            cam_step: 0.25,
            values: vec![0.0; 10],
        }),
        0.0
    );
    // constant 0.3 over 9 steps of 0.25 Cam = 2.25 Cam
    let v = total_loudness(&SpecificLoudness {
        cam_step: 0.25,
        values: vec![0.3; 10],
    });
    assert!((v - 0.3 * 2.25).abs() < 1e-12);
}

#[test]
fn splitting_power_increases_loudness() {
    let o = oracle();
    let cal = o.spec();
    let plan = o.plan();
    let one = SpectrumFrame::tone(plan, 1000.0, 60.0, cal);
    let mut two = SpectrumFrame::silent(cal);
    let half = 60.0 - 10.0 * 2f64.log10();
    two.levels[plan.band_of(1000.0).unwrap()] = half;
    two.levels[plan.band_of(4000.0).unwrap()] = half - o.params().ear.gain_db(4000.0);
    let n1 = o.loudness_level(&one).unwrap().sone;
    let n2 = o.loudness_level(&two).unwrap().sone;
    assert!(n2 > n1, "{n2} <= {n1}");
}

#[test]
fn sones_to_phons_contract() {
    let o = oracle();
    let curve = o.reference();
    assert!(sones_to_phons(-1.0, curve).is_err());
    assert!(sones_to_phons(f64::NAN, curve).is_err());
    assert_eq!(sones_to_phons(0.0, curve).unwrap(), 0.0);
    let n40 = curve.sones[40];
    assert!((sones_to_phons(n40, curve).unwrap() - 40.0).abs() < 1e-12);
    let mut prev = 0.0;
    for i in 0..4000 {
        let n = 1e-6 * 1.005f64.powi(i);
        let phon = sones_to_phons(n, curve).unwrap();
        assert!(phon >= prev);
        assert!(phon <= MAX_PHON);
        prev = phon;
    }
    // audible sounds are at least at threshold
    assert!(sones_to_phons(1e-12, curve).unwrap() >= curve.threshold_spl);
}

#[test]
fn frequency_ordering_and_compression() {
    let o = oracle();
    for l in (20..=90).step_by(5) {
        let l = l as f64;
        let p3 = o.tone_phon(3000.0, l).unwrap();
        let p1 = o.tone_phon(1000.0, l).unwrap();
        let p100 = o.tone_phon(100.0, l).unwrap();
        assert!(p3 > p1 && p1 > p100, "{l}: {p3} {p1} {p100}");
    }
    let off30 = o.equal_loudness_level(100.0, 30.0, 1e-4).unwrap() - 30.0;
    let off80 = o.equal_loudness_level(100.0, 80.0, 1e-4).unwrap() - 80.0;
    assert!(off30 > off80, "offsets {off30} {off80}");
}

#[test]
fn bounded_output() {
    let o = oracle();
    let loud = SpectrumFrame::filled(MAX_BAND_SPL);
    let l = o.loudness_level(&loud).unwrap();
    assert!(l.phon <= MAX_PHON && l.phon > 100.0);
}

use crate::frontend::MAX_BAND_SPL;

#[test]
fn discretisation_converged() {
    // halving the ERB-number step or doubling the quadrature points moves
    // labels by less than 0.05 phon
    let base = oracle();
    let fine_grid = Oracle::calibrate(OracleParams {
        cam_step: 0.125,
        ..OracleParams::default()
    })
    .unwrap();
    let fine_quad = Oracle::calibrate(OracleParams {
        sub_bands: 16,
        ..OracleParams::default()
    })
    .unwrap();
    let cal = base.spec();
    let mut frames = vec![];
    for &f in &[100.0, 250.0, 1000.0, 3000.0, 6000.0] {
        for &l in &[20.0, 50.0, 80.0] {
            frames.push(SpectrumFrame::tone(base.plan(), f, l, cal));
        }
    }
    let mut flat = SpectrumFrame::filled(30.0);
    flat.levels[0] = cal.floor_spl;
    frames.push(flat);
    for f in &frames {
        let a = base.loudness_level(f).unwrap().phon;
        let b = fine_grid.loudness_level(f).unwrap().phon;
        let c = fine_quad.loudness_level(f).unwrap().phon;
        assert!((a - b).abs() < 0.05, "grid: {a} vs {b}");
        assert!((a - c).abs() < 0.05, "quadrature: {a} vs {c}");
    }
}

#[test]
fn cached_calibration_reproduces_labels() {
    let o = oracle();
    let json = serde_json::to_string(o.calibration()).unwrap();
    let restored = Oracle::from_calibration(serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(restored.version_hash(), o.version_hash());
    let f = SpectrumFrame::tone(o.plan(), 2500.0, 47.0, o.spec());
    assert_eq!(
        o.loudness_level(&f).unwrap().phon.to_bits(),
        restored.loudness_level(&f).unwrap().phon.to_bits()
    );
}

#[test]
fn invalid_params_rejected() {
    assert!(Oracle::calibrate(OracleParams {
        alpha: 1.5,
        ..OracleParams::default()
    })
    .is_err());
    assert!(Oracle::calibrate(OracleParams {
        cam_hi: 30.0,
        ..OracleParams::default()
    })
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn level_monotone_and_bounded(levels in proptest::collection::vec(-10.0f64..110.0, N_BANDS)) {
        let o = oracle();
        let s = SpectrumFrame::from_slice(&levels).unwrap();
        let mut up = s;
        for l in up.levels.iter_mut() {
            if *l > o.spec().floor_spl {
                *l = (*l + 1.0).min(MAX_BAND_SPL);
            }
        }
        let a = o.loudness_level(&s).unwrap();
        let b = o.loudness_level(&up).unwrap();
        prop_assert!(b.phon >= a.phon);
        prop_assert!(a.phon >= 0.0 && a.phon <= MAX_PHON);
        prop_assert_eq!(a.phon.to_bits(), o.loudness_level(&s).unwrap().phon.to_bits());
    }
}
