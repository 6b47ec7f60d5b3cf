mod common;


use lsdd::array::{free_field_steering, ArrayGeometry, DirectionGrid, SteeringVectorSet};
use lsdd::spectrum::cosine_similarity;
use lsdd::stft::{analyze, StftParams, WindowKind};
use lsdd::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture() -> SteeringVectorSet {
    let freqs = StftParams::default().bin_freqs_hz();
    free_field_steering(&common::ring6(), &DirectionGrid::uniform(5.0).unwrap(), &freqs, 343.0).unwrap()
}

#[test]
fn steering_round_trip_is_f32_exact() {
    let dir = tempfile::tempdir().unwrap();
    let sv = fixture();
    let p = dir.path().join("a.lsv");
    sv.save(&p).unwrap();
    let loaded = SteeringVectorSet::load(&p).unwrap();
    assert_eq!(loaded.freqs_hz(), sv.freqs_hz());
    assert_eq!(loaded.grid(), sv.grid());
    assert_eq!(loaded.num_mics(), 6);
    assert_eq!(loaded.geometry_label, sv.geometry_label);
    for (a, b) in loaded.values().iter().zip(sv.values()) {
        assert_eq!(a.re, b.re as f32 as f64);
        assert_eq!(a.im, b.im as f32 as f64);
    }
    let p2 = dir.path().join("b.lsv");
    loaded.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn truncated_payload_is_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.lsv");
    fixture().save(&p).unwrap();
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 8);
    match SteeringVectorSet::from_bytes(&bytes) {
        Err(Error::Format(msg)) => assert!(msg.contains("dimension mismatch"), "{msg}"),
        other => panic!("expected format error, got {other:?}"),
    }
    assert!(matches!(SteeringVectorSet::from_bytes(b"LSDD-STEERING 2\nend\n"), Err(Error::Format(_))));
    assert!(matches!(SteeringVectorSet::load("/nonexistent.lsv"), Err(Error::Io(_))));
}

#[test]
fn six_mic_fixture_covers_the_operating_band() {
    let sv = fixture();
    let params = StftParams::default();
    assert_eq!(sv.freqs_hz().first(), Some(&0.0));
    assert_eq!(sv.freqs_hz().last(), Some(&8000.0));
    let band = lsdd::stft::band_indices(&params.bin_freqs_hz(), 1500.0, 3500.0).unwrap();
    let freqs: Vec<f64> = params.bin_freqs_hz()[band].to_vec();
    let restricted = sv.restrict_to(&freqs, 7.8125).unwrap();
    assert_eq!(restricted.num_freqs(), 129);
}

#[test]
fn entries_have_unit_magnitude() {
    for v in fixture().values() {
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_leaves_similarity_unchanged(
        dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0,
        az in -179.0f64..180.0, f in 100.0f64..8000.0, seed in any::<u64>(),
    ) {
        let geo = common::ring6();
        let moved = geo.translated([dx, dy, dz]).unwrap();
        let grid = DirectionGrid::from_azimuths(vec![az]).unwrap();
        let a = free_field_steering(&geo, &grid, &[f], 343.0).unwrap();
        let b = free_field_steering(&moved, &grid, &[f], 343.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let da = cosine_similarity(&x, a.vector(0, 0)).unwrap();
        let db = cosine_similarity(&x, b.vector(0, 0)).unwrap();
        prop_assert!((da - db).abs() < 1e-10);
        // the two vectors differ by one common unit scalar
        let ratio: Vec<Complex64> = a.vector(0, 0).iter().zip(b.vector(0, 0)).map(|(p, q)| q / p).collect();
        for r in &ratio {
            prop_assert!((r - ratio[0]).norm() < 1e-9);
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_array_is_mirror_symmetric(count in 2usize..8, spacing in 0.01f64..0.2, az in 0.0f64..179.0, f in 0.0f64..8000.0) {
        let geo = ArrayGeometry::linear(count, spacing).unwrap();
        let grid = DirectionGrid::from_azimuths(vec![-az.max(0.5), az.max(0.5)]).unwrap();
        let sv = free_field_steering(&geo, &grid, &[f], 343.0).unwrap();
        for (p, q) in sv.vector(0, 0).iter().zip(sv.vector(1, 0)) {
            prop_assert!((p - q).norm() < 1e-12);
        }
    }
}

fn random_signals(channels: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..channels)
        .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect()
}

#[test]
fn parseval_per_frame() {
    let params = StftParams::default();
    for seed in 0..5 {
        let sig = random_signals(2, 16_000, seed);
        let x = analyze(&sig, params).unwrap();
        let window = WindowKind::Hann.coefficients(params.nfft);
        for m in 0..2 {
            let mut spec_energy = 0.0;
            let mut time_energy = 0.0;
            for t in 0..x.num_frames() {
                for (f, v) in x.frame(m, t).iter().enumerate() {
                    let weight = if f == 0 || f == params.nfft / 2 { 1.0 } else { 2.0 };
                    spec_energy += weight * v.norm_sqr() / params.nfft as f64;
                }
                for i in 0..params.nfft {
                    time_energy += (sig[m][t * params.hop + i] * window[i]).powi(2);
                }
            }
            assert!((spec_energy / time_energy - 1.0).abs() < 0.01);
            assert!((spec_energy / time_energy - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn one_hop_shift_shifts_frames() {
    let params = StftParams::default();
    let sig = random_signals(1, 12_000, 9);
    let shifted = vec![sig[0][params.hop..].to_vec()];
    let a = analyze(&sig, params).unwrap();
    let b = analyze(&shifted, params).unwrap();
    assert_eq!(b.num_frames(), a.num_frames() - 1);
    for t in 0..b.num_frames() {
        for (p, q) in b.frame(0, t).iter().zip(a.frame(0, t + 1)) {
            assert!((p - q).norm() < 1e-10);
        }
    }
}

#[test]
fn stft_container_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let x = analyze(&random_signals(3, 4000, 1), StftParams::default()).unwrap();
    let p = dir.path().join("x.stft");
    x.save(&p).unwrap();
    let y = lsdd::stft::StftTensor::load(&p).unwrap();
    assert_eq!(y.num_mics(), 3);
    assert_eq!(y.frame_times_s, x.frame_times_s);
    for (a, b) in y.values().iter().zip(x.values()) {
        assert_eq!(a.re, b.re as f32 as f64);
    }
}
