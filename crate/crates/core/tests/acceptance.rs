//! Acceptance suite. Built with `harness = false` so every criterion prints a
//! single PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lsdd::angle::circ_dist_deg;
use lsdd::array::{free_field_steering, ArrayGeometry, DirectionGrid, SteeringVectorSet};
use lsdd::clustering::{cluster_interval, DEFAULT_Q_CAP};
use lsdd::pipeline::eval::{subset_metrics, CURVE_PERCENTS};
use lsdd::pipeline::report::{summary_json, write_rows_csv};
use lsdd::pipeline::{
    classify_dynamic, evaluate, prepare_band, run_estimation, segment_intervals, EstimationResult, EvalReport,
    PipelineConfig, QualityMode, WeightMode,
};
use lsdd::scene::{synthesize_with_steering, SceneSpec, SignalKind, SourceRole, SourceSpec};
use lsdd::spectrum::{compute_spectrum, estimate_bins, smooth_spectrum};
use lsdd::stft::{band_indices, StftParams, StftTensor};
use lsdd::timeline::{ActivitySpan, SessionMeta, SpeakerTrack, Trajectory};
use lsdd::udm::{RankScope, Udm, UdmParams};

enum Verdict {
    Pass,
    Fail,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

/// Shared fixture: 6-mic ring, 1° grid, default STFT, free-field steering over
/// all bins and the default UDM over the analysis band.
struct Rig {
    params: StftParams,
    steering: SteeringVectorSet,
    udm: Udm,
}

fn rig() -> &'static Rig {
    static RIG: OnceLock<Rig> = OnceLock::new();
    RIG.get_or_init(|| {
        let params = StftParams::default();
        let freqs = params.bin_freqs_hz();
        let steering = free_field_steering(&common::ring6(), &common::grid1(), &freqs, 343.0).unwrap();
        let band = band_indices(&freqs, 1500.0, 3500.0).unwrap();
        let band_steering = steering.restrict_to(&freqs[band], 0.0).unwrap();
        let udm = Udm::from_steering(&band_steering, UdmParams::default()).unwrap();
        Rig { params, steering, udm }
    })
}

struct Session {
    stft: StftTensor,
    meta: SessionMeta,
}

fn synth(spec: &SceneSpec) -> Session {
    let r = rig();
    let (stft, truth) = synthesize_with_steering(spec, &r.steering, r.params).unwrap();
    Session { stft, meta: truth.meta }
}

fn estimate(s: &Session, cfg: &PipelineConfig) -> EstimationResult {
    let r = rig();
    let intervals = segment_intervals(&s.meta, cfg.interval_s(), cfg.zeta_deg);
    let setup = prepare_band(cfg, &r.steering, Some(&r.udm), &s.stft).unwrap();
    run_estimation(cfg, &setup, &s.stft, &intervals, &s.meta.array_yaw).unwrap()
}

fn process(s: &Session, cfg: &PipelineConfig) -> (EstimationResult, EvalReport) {
    let res = estimate(s, cfg);
    let rep = evaluate(&res, &s.meta, cfg);
    (res, rep)
}

fn report_bytes(rep: &EvalReport) -> (Vec<u8>, String) {
    let mut csv = Vec::new();
    write_rows_csv(&rep.rows, &mut csv).unwrap();
    (csv, summary_json(rep).unwrap())
}

fn cfg(weight: WeightMode, quality: QualityMode) -> PipelineConfig {
    PipelineConfig {
        weight_mode: weight,
        quality_mode: quality,
        ..Default::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn uniform_az(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-180.0..180.0)
}

// ---------------------------------------------------------------------------
// 1. noiseless single source

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let dur = 10.0;
    let s = synth(&common::scene(
        vec![common::static_source("s", 37.0, common::white(), dur)],
        dur,
        None,
        11,
    ));
    let c = PipelineConfig::default();
    let setup = prepare_band(&c, &rig().steering, Some(&rig().udm), &s.stft).unwrap();
    let raw = compute_spectrum(&s.stft, &setup.steering, setup.band.clone()).unwrap();
    let smooth = smooth_spectrum(&raw, c.smoothing_rt, c.smoothing_rf).unwrap();
    let bins = estimate_bins(&smooth, setup.steering.grid(), c.lambda).unwrap();
    let expected_bins = s.stft.num_frames() * (setup.band.end() + 1 - setup.band.start());
    let phi_err = bins.iter().map(|b| circ_dist_deg(b.phi_hat_deg, 37.0)).fold(0.0, f64::max);
    let xi_err = bins.iter().map(|b| (1.0 - b.xi).abs()).fold(0.0, f64::max);
    let all_valid = bins.iter().all(|b| b.valid);

    let (res, rep) = process(&s, &c);
    let worst = rep.rows.iter().map(|r| r.error_deg).fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = bins.len() == expected_bins
        && phi_err == 0.0
        && xi_err <= 1e-12
        && all_valid
        && rep.rows.len() == res.interval_count
        && res.interval_count == 20
        && worst <= 0.5
        && elapsed < 10.0;
    outcome(
        pass,
        format!(
            "{} bins, max|φ̂-φ| = {phi_err}°, max|1-ξ| = {xi_err:.1e}, {} intervals, max|E| = {worst:.3}°, {elapsed:.2} s",
            bins.len(),
            rep.rows.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. random single directions at 20 dB

fn single_source_accuracy() -> Outcome {
    let c = PipelineConfig::default();
    let mut means = Vec::new();
    let mut outliers = 0;
    let mut misses = 0;
    for seed in [1u64, 2, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut errors = Vec::new();
        for i in 0..50 {
            let az = uniform_az(&mut rng);
            let dur = 1.0;
            let s = synth(&common::scene(
                vec![common::static_source("s", az, common::white(), dur)],
                dur,
                Some(20.0),
                seed * 1000 + i,
            ));
            let (_, rep) = process(&s, &c);
            misses += rep.misses;
            errors.extend(rep.rows.iter().map(|r| r.error_deg));
        }
        outliers += errors.iter().filter(|&&e| e > c.outlier_threshold_deg).count();
        means.push(mean(&errors));
    }
    let pass = means[0] <= 2.0 && means.iter().all(|&m| m <= 2.5) && outliers == 0 && misses == 0;
    outcome(
        pass,
        format!("mean |E| per seed = {means:.3?}°, outliers = {outliers}, misses = {misses}"),
    )
}

// ---------------------------------------------------------------------------
// 3. two simultaneous speakers

/// Speech-like sparsity on 2-frame × 8-bin tiles (64 ms × 125 Hz).
fn speech_like() -> SignalKind {
    SignalKind::ModulatedNoise {
        modulation_db: 12.0,
        block_frames: 2,
        block_bins: 8,
    }
}

fn two_speakers() -> Outcome {
    let c = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut intervals, mut separated, mut recovered) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for i in 0..25 {
        let a = uniform_az(&mut rng);
        let sep = rng.random_range(30.0..180.0);
        let b = lsdd::angle::wrap_deg(a + if rng.random_bool(0.5) { sep } else { -sep });
        let dur = 2.0;
        let s = synth(&common::scene(
            vec![
                common::static_source("a", a, speech_like(), dur),
                common::static_source("b", b, speech_like(), dur),
            ],
            dur,
            Some(15.0),
            300 + i,
        ));
        let (res, rep) = process(&s, &c);
        for iv in &res.intervals {
            intervals += 1;
            if iv.clusters.len() == 2 && iv.residual_weight < 0.5 * iv.clusters[1].weight {
                separated += 1;
            }
            let rows: Vec<_> = rep.rows.iter().filter(|r| r.t_mid_s == iv.t_mid_s).collect();
            let e = rows.iter().map(|r| r.error_deg).fold(0.0, f64::max);
            worst = worst.max(e);
            if rows.len() == 2 && rows[0].speaker_id != rows[1].speaker_id && e <= 5.0 {
                recovered += 1;
            }
        }
    }
    let frac = separated as f64 / intervals as f64;
    let pass = recovered == intervals && frac >= 0.9;
    outcome(
        pass,
        format!(
            "{recovered}/{intervals} intervals with both speakers within 5° (max |E| = {worst:.2}°), W3 < W2/2 on {:.1}%",
            100.0 * frac
        ),
    )
}

// ---------------------------------------------------------------------------
// 4 and 5. randomized corpus with interferers and reflections

/// Per-row errors and qualities pooled over the corpus.
struct CorpusRun {
    errors: Vec<f64>,
    qualities: Vec<f64>,
}

/// One 0.5 s interval: a speaker at 0 dB, one or two interferers at -15..-3 dB
/// at least 30° away, a reflection of the speaker (70% of scenes, -9..-3 dB,
/// 2..20 ms), array yaw turning at up to 60°/s and 7..13 dB SNR.
fn corpus_scene(i: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(4000 + i);
    let dur = 0.5;
    let whole = vec![ActivitySpan::new(0.0, dur)];
    let speaker_az = uniform_az(&mut rng);
    let mut sources = vec![SourceSpec {
        id: "s".into(),
        role: SourceRole::Speaker,
        trajectory: Trajectory::constant(speaker_az, dur),
        signal: speech_like(),
        level_db: 0.0,
        active: whole.clone(),
    }];
    let away = |rng: &mut ChaCha8Rng, from: f64| {
        let d = rng.random_range(30.0..180.0);
        lsdd::angle::wrap_deg(from + if rng.random_bool(0.5) { d } else { -d })
    };
    for j in 0..rng.random_range(1..=2) {
        sources.push(SourceSpec {
            id: format!("i{j}"),
            role: SourceRole::Interferer,
            trajectory: Trajectory::constant(away(&mut rng, speaker_az), dur),
            signal: speech_like(),
            level_db: rng.random_range(-15.0..-3.0),
            active: whole.clone(),
        });
    }
    if rng.random_bool(0.7) {
        sources.push(SourceSpec {
            id: "r".into(),
            role: SourceRole::Interferer,
            trajectory: Trajectory::constant(away(&mut rng, speaker_az), dur),
            signal: SignalKind::Reflection {
                of: 0,
                gain_db: rng.random_range(-9.0..-3.0),
                delay_ms: rng.random_range(2.0..20.0),
            },
            level_db: 0.0,
            active: whole.clone(),
        });
    }
    let yaw0 = uniform_az(&mut rng);
    let rate = rng.random_range(-60.0..60.0);
    SceneSpec {
        duration_s: dur,
        sources,
        array_yaw: Trajectory::from_keyframes(vec![(0.0, yaw0), (dur, yaw0 + rate * dur)], dur).unwrap(),
        snr_db: Some(rng.random_range(7.0..13.0)),
        snr_band_hz: (1500.0, 3500.0),
        seed: 4000 + i,
    }
}

const CORPUS_SIZE: u64 = 200;

fn corpus() -> &'static [Session] {
    static CORPUS: OnceLock<Vec<Session>> = OnceLock::new();
    CORPUS.get_or_init(|| (0..CORPUS_SIZE).map(|i| synth(&corpus_scene(i))).collect())
}

fn run_corpus(weight: WeightMode) -> CorpusRun {
    let c = cfg(weight, QualityMode::New);
    let mut run = CorpusRun {
        errors: Vec::new(),
        qualities: Vec::new(),
    };
    for s in corpus() {
        let (_, rep) = process(s, &c);
        for r in &rep.rows {
            run.errors.push(r.error_deg);
            run.qualities.push(r.quality);
        }
    }
    run
}

fn corpus_runs() -> &'static (CorpusRun, CorpusRun) {
    static RUNS: OnceLock<(CorpusRun, CorpusRun)> = OnceLock::new();
    RUNS.get_or_init(|| (run_corpus(WeightMode::Base), run_corpus(WeightMode::New)))
}

/// `(M̄_P, n_P)` at every curve percentage.
fn curve(run: &CorpusRun, mode: QualityMode) -> Vec<(f64, f64)> {
    let q: Vec<f64> = match mode {
        QualityMode::Base => vec![1.0; run.errors.len()],
        _ => run.qualities.clone(),
    };
    CURVE_PERCENTS
        .iter()
        .map(|&p| subset_metrics(&q, &run.errors, p as f64, mode, 25.0).unwrap())
        .collect()
}

fn quality_ranking() -> Outcome {
    let (_, new) = corpus_runs();
    let cv = curve(new, QualityMode::New);
    let (m50, n50) = cv[4];
    let (m100, n100) = cv[9];
    let pass = m50 <= 0.6 * m100 && n50 <= 0.5 * n100;
    outcome(
        pass,
        format!(
            "{} rows: M50 = {m50:.2}°, M100 = {m100:.2}° (ratio {:.2}), n50 = {n50:.3}, n100 = {n100:.3}",
            new.errors.len(),
            m50 / m100
        ),
    )
}

fn variant_ordering() -> Outcome {
    let (base, new) = corpus_runs();
    let b = curve(base, QualityMode::Base);
    let n = curve(new, QualityMode::New);
    let ideal = curve(new, QualityMode::Ideal);
    let mut pass = true;
    for (i, &p) in CURVE_PERCENTS.iter().enumerate() {
        if p <= 70 && n[i].0 > b[i].0 {
            pass = false;
        }
        if ideal[i].0 > n[i].0 {
            pass = false;
        }
    }
    let margin = b[4].0 - n[4].0;
    pass &= margin >= 1.0;
    let fmt = |v: &[(f64, f64)]| v.iter().map(|p| format!("{:.1}", p.0)).collect::<Vec<_>>().join(" ");
    outcome(
        pass,
        format!(
            "M̄_P base [{}] new [{}] ideal [{}], base-new at 50% = {margin:.2}°",
            fmt(&b),
            fmt(&n),
            fmt(&ideal)
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. clustering against a brute-force oracle

fn oracle_label(theta: f64) -> i32 {
    let l = (theta + 0.5).floor() as i64;
    ((l + 179).rem_euclid(360) - 179) as i32
}

fn oracle_wrap(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a <= -180.0 {
        a += 360.0;
    }
    a
}

fn label_dist(a: i32, b: i32) -> i32 {
    let d = (a - b).rem_euclid(360);
    d.min(360 - d)
}

struct OracleCluster {
    center: Option<i32>,
    weight: f64,
    theta: Option<f64>,
}

/// Straight transcription of the greedy window search over labels -179..=180:
/// lexicographic maximum of `(L_δ, L_{δ-1}, ..., L_0)`, first label wins.
fn oracle_clusters(est: &[(f64, f64)], k: usize, delta: i32) -> Vec<OracleCluster> {
    let mut h: BTreeMap<i32, f64> = (-179..=180).map(|l| (l, 0.0)).collect();
    for &(t, w) in est {
        *h.get_mut(&oracle_label(t)).unwrap() += w;
    }
    let wrap_label = |l: i32| (l + 179).rem_euclid(360) - 179;
    let mut claimed: Vec<i32> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..=k {
        let mut best: Option<(i32, Vec<f64>)> = None;
        for i in -179..=180 {
            let key: Vec<f64> = (0..=delta)
                .rev()
                .map(|r| (-r..=r).map(|o| h[&wrap_label(i + o)]).sum())
                .collect();
            let better = match &best {
                None => true,
                Some((_, bk)) => key.iter().zip(bk).find(|(a, b)| a != b).is_some_and(|(a, b)| a > b),
            };
            if better {
                best = Some((i, key));
            }
        }
        let (center, key) = best.unwrap();
        if !(key[0] > 0.0) {
            out.push(OracleCluster {
                center: None,
                weight: 0.0,
                theta: None,
            });
            continue;
        }
        let members: Vec<(f64, f64)> = est
            .iter()
            .copied()
            .filter(|&(t, _)| {
                let l = oracle_label(t);
                label_dist(l, center) <= delta && !claimed.iter().any(|&c| label_dist(l, c) <= delta)
            })
            .collect();
        let total: f64 = members.iter().map(|m| m.1).sum();
        let sum: f64 = members
            .iter()
            .map(|&(t, w)| w * (center as f64 + oracle_wrap(t - center as f64)))
            .sum();
        for o in -delta..=delta {
            *h.get_mut(&wrap_label(center + o)).unwrap() = 0.0;
        }
        claimed.push(center);
        out.push(OracleCluster {
            center: Some(center),
            weight: key[0],
            theta: (total > 0.0).then(|| oracle_wrap(sum / total)),
        });
    }
    out
}

/// Random estimates with dyadic angles and weights, so every sum is exact.
fn random_estimates(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let dyadic = |x: f64| (x * 64.0).round() / 64.0;
    let mut est = Vec::new();
    for _ in 0..rng.random_range(0..=4) {
        let c = uniform_az(rng);
        let spread = Normal::new(0.0, rng.random_range(0.5..12.0)).unwrap();
        for _ in 0..rng.random_range(1..40) {
            let t = oracle_wrap(dyadic(c + spread.sample(rng)));
            est.push((t, rng.random_range(0..=40) as f64 / 4.0));
        }
    }
    for _ in 0..rng.random_range(0..30) {
        est.push((oracle_wrap(dyadic(uniform_az(rng))), rng.random_range(0..=8) as f64 / 4.0));
    }
    if rng.random_bool(0.2) {
        // mirrored copy: equal window sums on both sides of an axis
        let axis = rng.random_range(-179..=180) as f64;
        let mirrored: Vec<_> = est.iter().map(|&(t, w)| (oracle_wrap(2.0 * axis - t), w)).collect();
        est.extend(mirrored);
    }
    est
}

fn clustering_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut first = String::new();
    for case in 0..1000 {
        let est = random_estimates(&mut rng);
        let k = rng.random_range(1..=3);
        let delta = [5usize, 10, 15][rng.random_range(0..3)];
        let got = cluster_interval(&est, k, delta, DEFAULT_Q_CAP);
        let want = oracle_clusters(&est, k, delta as i32);
        let residual = &want[k];
        let mut ok = got.clusters.len() == k
            && got.residual_center_deg == residual.center
            && got.residual_weight == residual.weight;
        for (g, w) in got.clusters.iter().zip(&want) {
            let q = if residual.weight > 0.0 {
                w.weight / residual.weight
            } else if w.weight > 0.0 {
                DEFAULT_Q_CAP
            } else {
                0.0
            };
            ok &= g.center_deg == w.center && g.weight == w.weight && g.theta_hat_deg == w.theta && g.quality == q;
        }
        if !ok {
            mismatches += 1;
            if first.is_empty() {
                first = format!(", first at case {case} (K={k}, δ={delta}, {} estimates)", est.len());
            }
        }
    }
    outcome(mismatches == 0, format!("1000 histograms, {mismatches} mismatches{first}"))
}

// ---------------------------------------------------------------------------
// 7. UDM against a naive transcription

fn naive_similarity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let (mut re, mut im, mut na, mut nb) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
        na += x.re * x.re + x.im * x.im;
        nb += y.re * y.re + y.im * y.im;
    }
    ((re * re + im * im).sqrt() / (na.sqrt() * nb.sqrt())).min(1.0)
}

/// `Ξ` by counting: average ranks as `#less + (#equal + 1) / 2`.
fn naive_udm(sv: &SteeringVectorSet, p: &UdmParams) -> Vec<f64> {
    let grid = sv.grid();
    let (dirs, freqs) = (grid.len(), sv.freqs_hz().len());
    let mut near = vec![0.0; dirs * freqs];
    let mut far = vec![0.0; dirs * freqs];
    for h in 0..dirs {
        for f in 0..freqs {
            for l in 0..dirs {
                if naive_similarity(sv.vector(h, f), sv.vector(l, f)) > p.thr {
                    let d = circ_dist_deg(grid.azimuth(l), grid.azimuth(h));
                    if d < p.delta_near_deg {
                        near[h * freqs + f] += 1.0;
                    }
                    if d > p.delta_far_deg {
                        far[h * freqs + f] += 1.0;
                    }
                }
            }
        }
    }
    let groups: Vec<Vec<usize>> = match p.scope {
        RankScope::Global => vec![(0..dirs * freqs).collect()],
        RankScope::PerDirection => (0..dirs).map(|h| (h * freqs..(h + 1) * freqs).collect()).collect(),
    };
    let mut xi = vec![0.0; dirs * freqs];
    for g in groups {
        let total: Vec<f64> = g
            .iter()
            .map(|&x| {
                let less = g.iter().filter(|&&y| near[y] < near[x]).count() as f64;
                let eq = g.iter().filter(|&&y| near[y] == near[x]).count() as f64;
                let more_far = g.iter().filter(|&&y| far[y] > far[x]).count() as f64;
                let eq_far = g.iter().filter(|&&y| far[y] == far[x]).count() as f64;
                (less + (eq + 1.0) / 2.0) + (more_far + (eq_far + 1.0) / 2.0)
            })
            .collect();
        let lo = total.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = total.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (&x, t) in g.iter().zip(&total) {
            xi[x] = if hi > lo { (t - lo) / (hi - lo) } else { 1.0 };
        }
    }
    xi
}

fn toy_steering(rng: &mut ChaCha8Rng) -> SteeringVectorSet {
    let dirs = rng.random_range(2..=8);
    let freqs = rng.random_range(1..=4);
    let mics = rng.random_range(2..=4);
    let mut az: Vec<f64> = Vec::new();
    while az.len() < dirs {
        let a = rng.random_range(-179..=180) as f64;
        // cluster some directions so the near window is not trivially empty
        let a = if !az.is_empty() && rng.random_bool(0.4) {
            lsdd::angle::wrap_deg(az[0] + rng.random_range(1..12) as f64)
        } else {
            a
        };
        if !az.contains(&a) {
            az.push(a);
        }
    }
    az.sort_by(f64::total_cmp);
    let grid = DirectionGrid::from_azimuths(az).unwrap();
    let hz: Vec<f64> = (0..freqs).map(|i| 500.0 + 900.0 * i as f64 + rng.random_range(0.0..400.0)).collect();
    if rng.random_bool(0.5) {
        let positions = (0..mics)
            .map(|_| [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.0])
            .collect();
        let geo = ArrayGeometry::new(positions, "toy").unwrap();
        free_field_steering(&geo, &grid, &hz, 343.0).unwrap()
    } else {
        let values = (0..dirs * freqs * mics)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SteeringVectorSet::new(values, hz, grid, mics, "toy").unwrap()
    }
}

fn udm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..500 {
        let sv = toy_steering(&mut rng);
        let p = UdmParams {
            thr: [0.3, 0.5, 0.7, 0.85, 0.95][rng.random_range(0..5)],
            delta_near_deg: [5.0, 10.0, 15.0][rng.random_range(0..3)],
            delta_far_deg: [20.0, 25.0, 40.0][rng.random_range(0..3)],
            scope: if rng.random_bool(0.5) {
                RankScope::Global
            } else {
                RankScope::PerDirection
            },
        };
        let got = Udm::from_steering(&sv, p).unwrap();
        if got.xi_map() != naive_udm(&sv, &p).as_slice() {
            mismatches += 1;
        }
    }
    let full = rig().udm.xi_map();
    let lo = full.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let in_range = full.iter().all(|v| (0.0..=1.0).contains(v));
    let pass = mismatches == 0 && in_range && lo == 0.0 && hi == 1.0;
    outcome(
        pass,
        format!(
            "500 toy sets, {mismatches} mismatches; 6-mic map {}x{}: min {lo}, max {hi}, all in [0, 1]: {in_range}",
            rig().udm.grid().len(),
            rig().udm.num_freqs()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. invariants

fn scaled(stft: &StftTensor, c: Complex64) -> StftTensor {
    let values = stft.values().iter().map(|v| v * c).collect();
    StftTensor::from_values(values, stft.num_mics(), stft.num_frames(), stft.params).unwrap()
}

fn invariants() -> Outcome {
    let dur = 2.0;
    let spec = common::scene(
        vec![
            common::static_source("a", -40.0, common::sparse(), dur),
            common::source(
                "b",
                Trajectory::from_keyframes(vec![(0.0, 60.0), (dur, 90.0)], dur).unwrap(),
                common::sparse(),
                dur,
            ),
        ],
        dur,
        Some(10.0),
        88,
    );
    let s = synth(&spec);
    let c = PipelineConfig::default();
    let (res, rep) = process(&s, &c);
    let bytes = report_bytes(&rep);
    let mut failed: Vec<&str> = Vec::new();

    // scale and phase: factors that are exact in binary floating point
    for f in [
        Complex64::new(2.0, 0.0),
        Complex64::new(-0.5, 0.0),
        Complex64::new(0.0, 4.0),
        Complex64::new(0.0, -1.0),
    ] {
        let t = Session {
            stft: scaled(&s.stft, f),
            meta: s.meta.clone(),
        };
        if report_bytes(&process(&t, &c).1) != bytes {
            failed.push("scale/phase");
            break;
        }
    }

    // determinism: fresh synthesis, byte-identical outputs
    if report_bytes(&process(&synth(&spec), &c).1) != bytes {
        failed.push("determinism");
    }

    // λ monotonicity of the valid set and of Pr
    let mut prev: Option<(Vec<(u64, u64)>, f64)> = None;
    for lambda in [0.5, 0.6, 0.7, 0.8, 0.9, 0.95] {
        let cl = PipelineConfig { lambda, ..c.clone() };
        let (r, p) = process(&s, &cl);
        let set: Vec<(u64, u64)> = r
            .intervals
            .iter()
            .flat_map(|iv| iv.valid_bins.iter().map(|b| (b.0.to_bits(), b.1.to_bits())))
            .collect();
        let pr = p.pr.unwrap();
        if let Some((ps, ppr)) = &prev {
            if !set.iter().all(|x| ps.contains(x)) || pr > *ppr {
                failed.push("lambda monotonicity");
                break;
            }
        }
        prev = Some((set, pr));
    }

    // smoothed spectrum stays in [0, 1]
    let setup = prepare_band(&c, &rig().steering, None, &s.stft).unwrap();
    let raw = compute_spectrum(&s.stft, &setup.steering, setup.band.clone()).unwrap();
    let smooth = smooth_spectrum(&raw, 3, 7).unwrap();
    if !smooth.values().iter().all(|v| (0.0..=1.0).contains(v)) {
        failed.push("smoothing range");
    }

    // UDM built from the steering set alone equals the shared one
    let built = estimate(
        &s,
        &PipelineConfig {
            weight_mode: WeightMode::New,
            ..c.clone()
        },
    );
    let setup_none = prepare_band(&c, &rig().steering, None, &s.stft).unwrap();
    let intervals = segment_intervals(&s.meta, c.interval_s(), c.zeta_deg);
    let internal = run_estimation(&c, &setup_none, &s.stft, &intervals, &s.meta.array_yaw).unwrap();
    if built != internal || built != res {
        failed.push("UDM independence");
    }

    // cluster weights: non-increasing, bounded by the total, Θ̂ near its window
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let est = random_estimates(&mut rng);
        let delta = [5usize, 10, 15][rng.random_range(0..3)];
        let set = cluster_interval(&est, 3, delta, DEFAULT_Q_CAP);
        let mut w: Vec<f64> = set.clusters.iter().map(|c| c.weight).collect();
        w.push(set.residual_weight);
        let total: f64 = est.iter().map(|e| e.1).sum();
        let ok = w.windows(2).all(|p| p[0] >= p[1])
            && w.iter().sum::<f64>() <= total
            && set.clusters.iter().all(|c| match (c.center_deg, c.theta_hat_deg) {
                (Some(i), Some(t)) => circ_dist_deg(t, i as f64) <= delta as f64 + 0.5,
                _ => true,
            });
        if !ok {
            failed.push("cluster weights");
            break;
        }
    }

    // ideal curve is non-decreasing in P
    let ideal = evaluate(&res, &s.meta, &PipelineConfig {
        quality_mode: QualityMode::Ideal,
        ..c.clone()
    });
    if !ideal.curves.mean_error_deg.unwrap().windows(2).all(|p| p[0] <= p[1]) {
        failed.push("ideal curve");
    }

    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            "scale/phase, determinism, λ monotonicity, smoothing range, UDM independence, cluster weights, ideal curve".into()
        } else {
            format!("violated: {}", failed.join(", "))
        },
    )
}

// ---------------------------------------------------------------------------
// 9. dynamic-interval classification

fn dynamic_classification() -> Outcome {
    let dur = 10.0;
    let meta = SessionMeta {
        speakers: vec![SpeakerTrack {
            id: "s".into(),
            trajectory: Trajectory::from_keyframes(vec![(0.0, -30.0), (dur, 30.0)], dur).unwrap(),
            spans: vec![ActivitySpan::new(0.0, dur)],
        }],
        array_yaw: Trajectory::constant(0.0, dur),
        duration_s: dur,
    };
    let table = classify_dynamic(&meta, &[500.0], &[2.9, 3.0]);
    let row = &table.percent[0];
    let pass = row[0] == Some(100.0) && row[1] == Some(0.0);
    outcome(
        pass,
        format!("6°/s at 500 ms: ζ = 2.9° → {:?}%, ζ = 3° → {:?}%", row[0], row[1]),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("AC1 noiseless static source", exact_recovery),
        ("AC2 single source at 20 dB", single_source_accuracy),
        ("AC3 two speakers at 15 dB", two_speakers),
        ("AC4 quality ranking", quality_ranking),
        ("AC5 variant ordering", variant_ordering),
        ("AC6 clustering oracle", clustering_oracle),
        ("AC7 UDM oracle", udm_oracle),
        ("AC8 invariants", invariants),
        ("AC9 dynamic intervals", dynamic_classification),
    ];
    // ACCEPTANCE_ONLY=AC3,AC4 runs a subset
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let mut failures = 0;
    for (name, f) in criteria {
        if let Some(o) = &only {
            if !o.split(',').any(|id| name.starts_with(id.trim())) {
                continue;
            }
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = match result.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failures += 1;
                "FAIL"
            }
        };
        println!("{tag} {name}: {} [{:.1} s]", result.detail, start.elapsed().as_secs_f64());
    }
    println!("SKIP AC9 recorded-corpus dynamic share (2.4% at 500 ms, ζ = 5°): needs the recorded dataset");
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

