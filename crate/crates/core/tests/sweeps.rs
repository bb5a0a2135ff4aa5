//! Properties of the sweep drivers: pairing, reproducibility, monotone
//! curves and the training-length study.

use pam4eq::channel::{ChannelConfig, Nonlinearity};
use pam4eq::equalizers::{EqTapConfig, LmsParams, SvmParams};
use pam4eq::metrics::{sweep_snr, sweep_training_length, write_csv, EqualizerSpec, Scenario, SweepPoint};
use pam4eq::txgen::TxConfig;
use pam4eq::Error;

fn scenario(n_symbols: usize) -> Scenario {
    Scenario {
        tx: TxConfig::default(),
        channel: ChannelConfig::default(),
        n_symbols,
        train_length: 5000,
    }
}

fn enhanced_pair() -> Vec<EqualizerSpec> {
    vec![
        EqualizerSpec::svm(EqTapConfig::ENHANCED, SvmParams::default()),
        EqualizerSpec::ffe_dfe(EqTapConfig::ENHANCED, LmsParams::default()),
    ]
}

fn csv(points: &[SweepPoint]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(points, &mut buf).unwrap();
    buf
}

#[test]
fn equalizers_see_identical_streams() {
    let mut eqs = enhanced_pair();
    eqs.push(EqualizerSpec::slicer());
    let points = sweep_snr(&scenario(30_000), &[10.0, 14.0], &eqs, &[1, 2], None).unwrap();
    let mut all_hashes = Vec::new();
    for p in &points {
        for run in &p.runs {
            assert_eq!(run.outcomes.len(), 3);
            assert!(run.outcomes.iter().all(|o| o.stream_hash == run.stream_hash));
            all_hashes.push(run.stream_hash.clone());
        }
    }
    // Different (SNR, seed) units get different noise.
    all_hashes.sort();
    all_hashes.dedup();
    assert_eq!(all_hashes.len(), 4);
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_thread_counts() {
    let eqs = enhanced_pair();
    let s = scenario(20_000);
    let a = csv(&sweep_snr(&s, &[12.0, 8.0], &eqs, &[3, 1], Some(1)).unwrap());
    let b = csv(&sweep_snr(&s, &[12.0, 8.0], &eqs, &[3, 1], Some(3)).unwrap());
    let c = csv(&sweep_snr(&s, &[12.0, 8.0], &eqs, &[3, 1], None).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    // Rows come out sorted by x, seed, equalizer.
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[0].starts_with("snr_db,8,1,ffe_dfe_31_5,"));
    assert!(rows[1].starts_with("snr_db,8,1,svm_31_5,"));
    assert!(rows[2].starts_with("snr_db,8,3,"));
    assert!(rows[7].starts_with("snr_db,12,3,svm_31_5,"));
}

#[test]
fn benign_grid_point_is_error_free() {
    let mut s = scenario(20_000);
    s.channel.f3db_norm = 0.49 * s.tx.sps as f64;
    let mut eqs = enhanced_pair();
    eqs.push(EqualizerSpec::slicer());
    let points = sweep_snr(&s, &[f64::INFINITY], &eqs, &[1, 2], None).unwrap();
    for (name, ber) in points[0].aggregates() {
        assert_eq!(ber.bit_errors, 0, "{name}");
        assert_eq!(ber.ber, 0.0);
    }
}

/// Pooled BER and its binomial standard deviation.
fn ber_and_sigma(p: &SweepPoint, eq: &str) -> (f64, f64) {
    let b = p.aggregate(eq).unwrap();
    let sigma = (b.ber * (1.0 - b.ber) / b.bits_total as f64).sqrt();
    (b.ber, sigma)
}

#[test]
fn ber_decreases_with_snr() {
    let grid = [6.0, 8.0, 10.0, 12.0, 14.0];
    let points = sweep_snr(&scenario(100_000), &grid, &enhanced_pair(), &[1, 2], None).unwrap();
    for eq in ["svm_31_5", "ffe_dfe_31_5"] {
        let mut inversions = 0;
        for w in points.windows(2) {
            let (b0, s0) = ber_and_sigma(&w[0], eq);
            let (b1, s1) = ber_and_sigma(&w[1], eq);
            if b1 > b0 {
                inversions += 1;
                assert!(b1 - b0 <= 2.0 * (s0 * s0 + s1 * s1).sqrt(), "{eq}: {b0} -> {b1}");
            }
        }
        assert!(inversions <= 1, "{eq}: {inversions} inversions");
    }
}

#[test]
fn saturation_raises_the_high_snr_error_rate() {
    let linear = scenario(60_000);
    let mut saturated = linear.clone();
    saturated.channel.nonlinearity = Some(Nonlinearity { sat_level: 0.5 });
    let eqs = enhanced_pair();
    let lin = sweep_snr(&linear, &[30.0], &eqs, &[1], None).unwrap();
    let sat = sweep_snr(&saturated, &[30.0], &eqs, &[1], None).unwrap();
    for eq in ["svm_31_5", "ffe_dfe_31_5"] {
        let (l, s) = (lin[0].aggregate(eq).unwrap(), sat[0].aggregate(eq).unwrap());
        assert!(s.ber > l.ber, "{eq}: saturated {} vs linear {}", s.ber, l.ber);
    }
}

#[test]
fn training_length_study() {
    let mut s = scenario(200_000);
    s.channel.snr_db = 13.0;
    let grid = [250, 500, 1000, 2000, 5000, 10000];
    let points = sweep_training_length(&s, &grid, &enhanced_pair(), &[1, 2], None).unwrap();
    assert_eq!(points.len(), grid.len());
    // Every length is tested on the same tail, so stream hashes repeat.
    for p in &points {
        for (run, first) in p.runs.iter().zip(&points[0].runs) {
            assert_eq!(run.stream_hash, first.stream_hash);
            assert_eq!(run.outcomes[0].ber.symbols_total, first.outcomes[0].ber.symbols_total);
        }
    }
    let at = |l: usize, eq: &str| {
        let p = points.iter().find(|p| p.x_value == l as f64).unwrap();
        ber_and_sigma(p, eq)
    };
    for eq in ["svm_31_5", "ffe_dfe_31_5"] {
        let (longest, s_long) = at(10000, eq);
        let (shortest, s_short) = at(250, eq);
        assert!(
            longest <= shortest + 2.0 * (s_long * s_long + s_short * s_short).sqrt(),
            "{eq}: {longest} at 10000 vs {shortest} at 250"
        );
        // 5000 symbols is past the convergence knee.
        let (knee, _) = at(5000, eq);
        assert!(knee <= 2.0 * longest, "{eq}: {knee} at 5000 vs {longest} at 10000");
    }
}

#[test]
fn training_length_grid_is_checked() {
    let s = scenario(20_000);
    let eqs = enhanced_pair();
    assert!(matches!(
        sweep_training_length(&s, &[0, 100], &eqs, &[1], None),
        Err(Error::TooShort(_))
    ));
    assert!(matches!(
        sweep_training_length(&s, &[500, 250], &eqs, &[1], None),
        Err(Error::InvalidGrid(_))
    ));
    assert!(sweep_training_length(&s, &[20_000], &eqs, &[1], None).is_err());
}

#[test]
fn equal_feature_information() {
    // SVM and FFE&DFE with the same tap configuration see the same window
    // and feedback depth.
    use pam4eq::channel::run_link;
    use pam4eq::equalizers::{build_train_features, lms_train, svm_train};
    use pam4eq::txgen::prbs_frame;
    let frame = prbs_frame(1, 8000).unwrap();
    let ch = ChannelConfig {
        snr_db: 15.0,
        ..ChannelConfig::default()
    };
    let rx = run_link(&frame, &TxConfig::default(), &ch).unwrap();
    for cfg in [EqTapConfig::LIGHTWEIGHT, EqTapConfig::ENHANCED] {
        let (features, labels) = build_train_features(&rx.slice(0..5000), &frame.slice(0..5000), &cfg).unwrap();
        let svm = svm_train(&features, &labels, &SvmParams::default()).unwrap();
        let lms = lms_train(&rx, &frame, &cfg, 5000, &LmsParams::default()).unwrap().model;
        assert!(svm.planes.iter().all(|p| p.w.len() == cfg.dim()));
        assert_eq!(lms.ffe_weights.len() + lms.dfe_weights.len(), cfg.dim());
        assert_eq!(lms.dfe_weights.len(), cfg.dfe_taps);
    }
}
