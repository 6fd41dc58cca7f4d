//! Acceptance run: one PASS/FAIL/SKIP line per criterion.
//!
//! Built with `harness = false` so the verdict lines always reach stdout.
//! The dataset-dependent check reads the 6-class instrument tree from
//! `IRMAS_ROOT` and is skipped when that variable is unset.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use timbre_core::audio_io::AudioClip;
use timbre_core::cluster::{agglomerate, cluster_purity, cut_dendrogram, kmeans, KmeansParams, Linkage};
use timbre_core::dataset::{
    load_feature_csv, scan_instrument_dirs, train_test_split, LabeledDataset, SplitSpec, IRMAS_CLASS_CODES,
    IRMAS_CLASS_COUNTS,
};
use timbre_core::eval::{accuracy, confusion, cross_validate, evaluate_model, micro_precision, micro_recall, precision_recall_f1, ConfusionMatrix};
use timbre_core::features::{dct_ii_matrix, hz_to_mel, mel_to_hz, zero_crossing_rate, ExtractionConfig, FeatureExtractor};
use timbre_core::learn::logistic::{loss_and_gradient, LogisticModel};
use timbre_core::learn::{
    boosting_loss_trace, svm_kkt_report, train, BoostParams, ClassifierSpec, ForestParams, Gamma, Hyperparams,
    LogisticParams, SvmParams, TreeParams,
};
use timbre_core::spectral::fft;
use timbre_core::synth::{gaussian_blobs, tone};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within_budget(start: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let spent = start.elapsed();
    ensure(spent < budget, || format!("{what} took {spent:.2?}, budget {budget:.0?}"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- 1

fn frame_count() -> Check {
    let clip = tone(440.0, 0.5, 0.0, CLIP_SAMPLES);
    let start = Instant::now();
    let extractor = FeatureExtractor::new(ExtractionConfig::default(), 44_100).map_err(|e| e.to_string())?;
    let mfcc = extractor.mfcc_matrix(&clip).map_err(|e| e.to_string())?;
    within_budget(start, Duration::from_secs(1), "MFCC matrix")?;
    let cols: BTreeSet<usize> = mfcc.iter().map(Vec::len).collect();
    ensure(mfcc.len() == 259 && cols == BTreeSet::from([13]), || {
        format!("got {} rows with widths {cols:?}", mfcc.len())
    })?;
    Ok(format!("259 x 13 in {:.1?}", start.elapsed()))
}

// ---------------------------------------------------------------- 2

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    // reduce the index first so the angle stays small and exact
                    let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

/// Orthonormal DCT-II written as the textbook cosine sum with the
/// `2 * sum` convention and explicit normalisation factors.
fn naive_dct(x: &[f64], k: usize) -> f64 {
    let n = x.len() as f64;
    let sum: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
        .sum();
    let f = if k == 0 { (1.0 / (4.0 * n)).sqrt() } else { (1.0 / (2.0 * n)).sqrt() };
    2.0 * sum * f
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Textbook agglomeration: recompute every inter-cluster distance from the
/// raw points and merge the closest pair, `n - 1` times.
fn brute_force_merges(x: &[Vec<f64>], linkage: Linkage) -> Vec<(BTreeSet<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..x.len()).map(|i| vec![i]).collect();
    let centroid = |c: &[usize]| -> Vec<f64> {
        let mut out = vec![0.0; x[0].len()];
        for &i in c {
            for (o, v) in out.iter_mut().zip(&x[i]) {
                *o += v / c.len() as f64;
            }
        }
        out
    };
    let dist = |a: &[usize], b: &[usize]| -> f64 {
        let pairs = || a.iter().flat_map(|&i| b.iter().map(move |&j| euclid(&x[i], &x[j])));
        match linkage {
            Linkage::Single => pairs().fold(f64::INFINITY, f64::min),
            Linkage::Complete => pairs().fold(0.0, f64::max),
            Linkage::Average => pairs().sum::<f64>() / (a.len() * b.len()) as f64,
            Linkage::Ward => {
                let (na, nb) = (a.len() as f64, b.len() as f64);
                (2.0 * na * nb / (na + nb)).sqrt() * euclid(&centroid(a), &centroid(b))
            }
        }
    };
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = dist(&clusters[i], &clusters[j]);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, d) = best;
        let b = clusters.remove(j);
        clusters[i].extend(b);
        merges.push((clusters[i].iter().copied().collect(), d));
    }
    merges
}

fn dendrogram_members(x: &[Vec<f64>], linkage: Linkage) -> Result<Vec<(BTreeSet<usize>, f64)>, String> {
    let d = agglomerate(x, linkage).map_err(|e| e.to_string())?;
    let mut members: Vec<BTreeSet<usize>> = (0..d.n_leaves).map(|i| BTreeSet::from([i])).collect();
    let mut out = Vec::new();
    for m in &d.merges {
        let union: BTreeSet<usize> = members[m.a].union(&members[m.b]).copied().collect();
        ensure(union.len() == m.size, || format!("merge size {} but {} members", m.size, union.len()))?;
        members.push(union.clone());
        out.push((union, m.height));
    }
    Ok(out)
}

fn numeric_oracles() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut worst_fft: f64 = 0.0;
    for log_n in 1..=12 {
        let n = 1usize << log_n;
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let fast = fft(&x).map_err(|e| e.to_string())?;
        let err = fast.iter().zip(naive_dft(&x)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        ensure(err < 1e-9 * n as f64, || format!("FFT n={n}: max error {err:e}"))?;
        worst_fft = worst_fft.max(err / n as f64);
    }

    for (n_out, n_in) in [(13, 40), (13, 13), (20, 128), (1, 1)] {
        let m = dct_ii_matrix(n_out, n_in);
        for _ in 0..5 {
            let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-5.0..5.0)).collect();
            for (k, row) in m.iter().enumerate() {
                let fast: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                let err = (fast - naive_dct(&x, k)).abs();
                ensure(err < 1e-9, || format!("DCT {n_out}x{n_in} row {k}: error {err:e}"))?;
            }
        }
    }

    for i in 0..=2205 {
        let f = i as f64 * 10.0 + 0.123;
        let back = mel_to_hz(hz_to_mel(f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(rel_err(back, f) < 1e-9, || format!("mel round trip at {f} Hz gave {back}"))?;
    }

    let mut cases = 0;
    for n in 2..=12 {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + seed);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            for linkage in Linkage::ALL {
                let expected = brute_force_merges(&x, linkage);
                let got = dendrogram_members(&x, linkage)?;
                for (step, ((eset, eh), (gset, gh))) in expected.iter().zip(&got).enumerate() {
                    ensure(eset == gset && rel_err(*eh, *gh) < 1e-9, || {
                        format!("{} n={n} seed={seed} step {step}: {eset:?}@{eh} vs {gset:?}@{gh}", linkage.as_str())
                    })?;
                }
                ensure(got.len() == n - 1, || format!("{} merges for n={n}", got.len()))?;
                cases += 1;
            }
        }
    }
    within_budget(start, Duration::from_secs(60), "numeric oracles")?;
    Ok(format!("FFT max err/N {worst_fft:.1e}; {cases} dendrograms match brute force"))
}

// ---------------------------------------------------------------- 3

fn feature_sanity() -> Check {
    let extractor = FeatureExtractor::new(ExtractionConfig::default(), 44_100).map_err(|e| e.to_string())?;
    let bin_width = 44_100.0 / 1024.0;

    let mut worst: f64 = 0.0;
    for freq in [500.0, 1000.0, 2500.0, 5000.0, 10_000.0] {
        let fv = extractor.extract(&tone(freq, 0.5, 0.3, CLIP_SAMPLES)).map_err(|e| e.to_string())?;
        let off = (fv.centroid_hz - freq).abs();
        ensure(off <= bin_width, || format!("{freq} Hz tone has centroid {}", fv.centroid_hz))?;
        worst = worst.max(off);
    }

    let silence = AudioClip::new(vec![0.0; 44_100], 44_100, "silence").map_err(|e| e.to_string())?;
    let fv = extractor.extract(&silence).map_err(|e| e.to_string())?;
    ensure([fv.zcr, fv.centroid_hz, fv.bandwidth_hz, fv.rolloff_hz] == [0.0; 4], || {
        format!("silence descriptors {fv:?}")
    })?;

    let zcr_cases: [(&[f64], f64); 5] = [
        (&[1.0, -1.0, 1.0, -1.0, 1.0], 1.0),
        (&[0.5; 8], 0.0),
        (&[1.0, 1.0, -1.0, -1.0, 1.0, 1.0], 2.0 / 5.0),
        (&[-1.0, 0.0, -1.0], 1.0),
        (&[0.0, 0.0], 0.0),
    ];
    for (frame, expected) in zcr_cases {
        let got = zero_crossing_rate(frame).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("ZCR of {frame:?} = {got}, expected {expected}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<f64> = (0..44_100)
        .map(|i| {
            let t = i as f64 / 44_100.0;
            0.3 * (2.0 * std::f64::consts::PI * 330.0 * t).sin()
                + 0.2 * (2.0 * std::f64::consts::PI * 4100.0 * t).sin()
                + rng.random_range(-0.1..0.1)
        })
        .collect();
    let clip = AudioClip::new(samples, 44_100, "mix").map_err(|e| e.to_string())?;
    let base = extractor.extract(&clip).map_err(|e| e.to_string())?;
    let mut worst_scale: f64 = 0.0;
    for gain in [0.37, 1.5, 0.001] {
        let scaled = extractor.extract(&clip.scaled(gain).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for (name, a, b) in [
            ("zcr", base.zcr, scaled.zcr),
            ("centroid", base.centroid_hz, scaled.centroid_hz),
            ("bandwidth", base.bandwidth_hz, scaled.bandwidth_hz),
            ("rolloff", base.rolloff_hz, scaled.rolloff_hz),
        ] {
            let e = rel_err(a, b);
            ensure(e < 1e-9, || format!("{name} moved by {e:e} under gain {gain}"))?;
            worst_scale = worst_scale.max(e);
        }
    }
    Ok(format!("centroid within {worst:.2} Hz (bin {bin_width:.2}); scale drift {worst_scale:.1e}"))
}

// ---------------------------------------------------------------- 4

fn learner_correctness() -> Check {
    let start = Instant::now();
    let blobs = gaussian_blobs(300, 6, 17, 1.0, 7);
    let (train_set, test_set) = train_test_split(&blobs, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for name in ["svm", "forest", "xgboost", "lightgbm"] {
        let hp = Hyperparams::preset(name).ok_or_else(|| format!("no preset {name}"))?;
        let model = train(&ClassifierSpec::new(hp, 42), &train_set).map_err(|e| e.to_string())?;
        let report = evaluate_model(name, &model, &test_set).map_err(|e| e.to_string())?;
        ensure(report.accuracy >= 0.95, || format!("{name} test accuracy {}", report.accuracy))?;
        summary.push(format!("{name} {:.3}", report.accuracy));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y: Vec<usize> = x.iter().map(|r| usize::from(r[0] + r[1] > 0.0) + usize::from(r[2] > 1.0)).collect();
    let (k, d) = (3, 4);
    let flat: Vec<f64> = (0..k * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = LogisticModel::from_flat(&flat, k, d);
    let analytic = loss_and_gradient(&model, &x, &y, 0.05).1.flatten();
    let h = 1e-6;
    for p in 0..flat.len() {
        let shifted = |delta: f64| {
            let mut v = flat.clone();
            v[p] += delta;
            loss_and_gradient(&LogisticModel::from_flat(&v, k, d), &x, &y, 0.05).0
        };
        let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
        let e = (numeric - analytic[p]).abs() / numeric.abs().max(analytic[p].abs()).max(1e-3);
        ensure(e < 1e-5, || format!("logistic gradient param {p}: numeric {numeric}, analytic {}", analytic[p]))?;
    }

    let svm = SvmParams::default();
    for (a, b, violation, balance, converged) in svm_kkt_report(&train_set, svm).map_err(|e| e.to_string())? {
        ensure(converged && violation <= svm.tol && balance < 1e-9, || {
            format!("SMO pair ({a},{b}): violation {violation:e}, balance {balance:e}, converged {converged}")
        })?;
    }

    for params in [BoostParams::xgboost_preset(), BoostParams::lightgbm_preset()] {
        let trace = boosting_loss_trace(&train_set, params, 42).map_err(|e| e.to_string())?;
        if let Some(w) = trace.windows(2).position(|w| w[1] > w[0] + 1e-12) {
            return Err(format!("boosting loss rose at round {}: {} -> {}", w + 1, trace[w], trace[w + 1]));
        }
    }
    within_budget(start, Duration::from_secs(120), "learner suite")?;
    Ok(summary.join(", "))
}

// ---------------------------------------------------------------- 5

fn matrix_from_counts(counts: &[Vec<u64>]) -> Result<ConfusionMatrix, String> {
    let (mut actual, mut predicted) = (Vec::new(), Vec::new());
    for (a, row) in counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            for _ in 0..c {
                actual.push(a);
                predicted.push(p);
            }
        }
    }
    confusion(&actual, &predicted, counts.len()).map_err(|e| e.to_string())
}

fn metrics_suite() -> Check {
    let cm = matrix_from_counts(&[vec![8, 2], vec![3, 7]])?;
    let m = precision_recall_f1(&cm).classes[0];
    let (p, r) = (8.0 / 11.0, 0.8);
    let f1 = 2.0 * p * r / (p + r);
    ensure((m.precision - p).abs() < 1e-12 && (m.recall - r).abs() < 1e-12 && (m.f1 - f1).abs() < 1e-12, || {
        format!("class 0 metrics {m:?}")
    })?;
    ensure((m.precision - 0.727).abs() < 5e-4 && (m.f1 - 0.762).abs() < 5e-4, || format!("rounded {m:?}"))?;
    let acc = accuracy(&cm).map_err(|e| e.to_string())?;
    ensure(acc == 0.75, || format!("accuracy {acc}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let k = rng.random_range(2..8);
        let counts: Vec<Vec<u64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0..20)).collect()).collect();
        let mut counts = counts;
        counts[0][0] += 1;
        let cm = matrix_from_counts(&counts)?;
        let (mp, mr, a) = (
            micro_precision(&cm).map_err(|e| e.to_string())?,
            micro_recall(&cm).map_err(|e| e.to_string())?,
            accuracy(&cm).map_err(|e| e.to_string())?,
        );
        ensure((mp - a).abs() < 1e-12 && (mr - a).abs() < 1e-12, || {
            format!("trial {trial}: micro P {mp}, micro R {mr}, accuracy {a}")
        })?;
    }
    Ok(format!("P={:.3} R={:.3} F1={:.3} acc={acc}; micro identity on 100 matrices", m.precision, m.recall, m.f1))
}

// ---------------------------------------------------------------- 6

fn dataset_reproduction(root: &Path) -> Check {
    let start = Instant::now();
    let codes: Vec<String> = IRMAS_CLASS_CODES.iter().map(|c| c.to_string()).collect();
    let files = scan_instrument_dirs(root, &codes).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 6];
    for (_, label) in &files {
        counts[*label] += 1;
    }
    ensure(counts == IRMAS_CLASS_COUNTS && files.len() == 3846, || {
        format!("class counts {counts:?}, expected {IRMAS_CLASS_COUNTS:?}")
    })?;

    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = work.path().join("features.csv");
    let run = timbre(&["extract", "--root", p(root), "--out", p(&csv)]);
    ensure(run.status.success(), || format!("extract failed: {}", stderr(&run)))?;
    let ds = load_feature_csv(&csv).map_err(|e| e.to_string())?;
    let (train_set, test_set) = train_test_split(&ds, &SplitSpec::default()).map_err(|e| e.to_string())?;

    // pick C and gamma by 5-fold accuracy on the training partition only
    let mut best: Option<(f64, SvmParams)> = None;
    for c in [1.0, 3.0, 10.0, 30.0, 100.0] {
        for gamma in [Gamma::Scale, Gamma::Value(0.02), Gamma::Value(0.05), Gamma::Value(0.1)] {
            let params = SvmParams { c, gamma, ..SvmParams::default() };
            let cv = cross_validate(&ClassifierSpec::new(Hyperparams::SvmRbf(params), 42), &train_set, 5, 42)
                .map_err(|e| e.to_string())?;
            if best.as_ref().is_none_or(|(score, _)| cv.mean > *score) {
                best = Some((cv.mean, params));
            }
        }
    }
    let (_, tuned) = best.expect("non-empty grid");
    let svm_spec = ClassifierSpec::new(Hyperparams::SvmRbf(tuned), 42);

    let holdout = |spec: &ClassifierSpec, name: &str| -> Result<f64, String> {
        let model = train(spec, &train_set).map_err(|e| e.to_string())?;
        Ok(evaluate_model(name, &model, &test_set).map_err(|e| e.to_string())?.accuracy)
    };
    let svm_acc = holdout(&svm_spec, "svm")?;
    let cv = cross_validate(&svm_spec, &ds, 10, 42).map_err(|e| e.to_string())?;
    let other = |hp: Hyperparams, name: &str| holdout(&ClassifierSpec::new(hp, 42), name);
    let forest = other(Hyperparams::Forest(ForestParams::default()), "forest")?;
    let xgb = other(Hyperparams::Boosted(BoostParams::xgboost_preset()), "xgboost")?;
    let lgbm = other(Hyperparams::Boosted(BoostParams::lightgbm_preset()), "lightgbm")?;
    let tree = other(Hyperparams::Tree(TreeParams::default()), "tree")?;
    let logistic = other(Hyperparams::Logistic(LogisticParams::default()), "logistic")?;

    let detail = format!(
        "svm {svm_acc:.3} (C={}, gamma={:?}), cv {:.4}, forest {forest:.3}, xgb {xgb:.3}, lgbm {lgbm:.3}, tree {tree:.3}, logistic {logistic:.3}, {:.0?}",
        tuned.c,
        tuned.gamma,
        cv.mean,
        start.elapsed()
    );
    let middle = [forest, xgb, lgbm];
    let (mid_lo, mid_hi) = middle.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    ensure(svm_acc >= 0.70, || format!("holdout below 0.70: {detail}"))?;
    ensure((cv.mean - 0.7941).abs() <= 0.08, || format!("CV mean off target: {detail}"))?;
    ensure(svm_acc > mid_hi && mid_lo > tree.max(logistic), || format!("ranking differs: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 7

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Check {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = work.path().join("data");
    tone_tree(&root, 4);
    let out = work.path().join("out");
    std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
    let features = out.join("features.csv");
    let blobs = blob_csv(&work.path().join("blobs.csv"), 120, 11);
    let o = |name: &str| out.join(name).to_str().unwrap().to_owned();

    let mut commands: Vec<Vec<String>> = vec![
        vec!["extract".into(), "--root".into(), p(&root).into(), "--out".into(), p(&features).into(), "--classes".into(), "flu,pia,tru".into()],
        vec!["spectrogram".into(), "--wav".into(), p(&root.join("pia/pia_01.wav")).into(), "--out".into(), o("spec.pgm")],
        vec!["evaluate".into(), "--features".into(), p(&blobs).into(), "--out-dir".into(), o("reports"), "--n-trees".into(), "25".into()],
        vec!["crossval".into(), "--features".into(), p(&blobs).into(), "--model".into(), "forest".into(), "--n-trees".into(), "15".into(), "--out".into(), o("cv.csv")],
        vec!["cluster".into(), "--features".into(), p(&blobs).into(), "--method".into(), "hier".into(), "--out".into(), o("hier.csv"), "--dendrogram".into(), o("dendro.csv")],
        vec!["cluster".into(), "--features".into(), p(&blobs).into(), "--method".into(), "kmeans".into(), "--out".into(), o("kmeans.csv")],
    ];
    for kind in ["logistic", "tree", "forest", "xgboost", "lightgbm", "svm"] {
        commands.push(vec!["train".into(), "--features".into(), p(&blobs).into(), "--model".into(), kind.into(), "--out".into(), o(&format!("{kind}.json"))]);
    }
    commands.push(vec!["predict".into(), "--model".into(), o("forest.json"), "--wav".into(), p(&root.join("tru/tru_02.wav")).into()]);

    let run_all = |jobs: &str| -> Result<(Vec<String>, Vec<(String, Vec<u8>)>, Vec<(String, Vec<u8>)>), String> {
        let mut stdouts = Vec::new();
        for cmd in &commands {
            let mut args: Vec<&str> = cmd.iter().map(String::as_str).collect();
            args.extend(["--jobs", jobs]);
            let run = timbre(&args);
            ensure(run.status.success(), || format!("{} failed: {}", cmd[0], stderr(&run)))?;
            // the predict model was trained within this same pass
            stdouts.push(stdout(&run).lines().filter(|l| !l.starts_with("# jobs")).collect::<Vec<_>>().join("\n"));
        }
        Ok((stdouts, snapshot(&out), snapshot(&out.join("reports"))))
    };
    let first = run_all("1")?;
    let second = run_all("4")?;
    let n_files = first.1.len() + first.2.len();
    for (a, b) in first.1.iter().chain(&first.2).zip(second.1.iter().chain(&second.2)) {
        ensure(a == b, || format!("{} differs between runs", a.0))?;
    }
    ensure(first.1.len() == second.1.len() && first.2.len() == second.2.len(), || "file sets differ".into())?;
    for (i, (a, b)) in first.0.iter().zip(&second.0).enumerate() {
        ensure(a == b, || format!("stdout of `{}` differs between runs", commands[i][0]))?;
    }
    Ok(format!("{} commands, {n_files} output files byte-identical across reruns (1 vs 4 threads)", commands.len()))
}

// ---------------------------------------------------------------- 8

fn clustering_behavior() -> Check {
    let blobs: LabeledDataset = gaussian_blobs(300, 6, 17, 1.0, 13);
    let result = kmeans(blobs.features(), &KmeansParams::new(6, 42)).map_err(|e| e.to_string())?;
    let purity = cluster_purity(&result.assignment.labels, blobs.labels()).map_err(|e| e.to_string())?;
    ensure(purity == 1.0, || format!("k-means purity {purity}"))?;

    let mut checked = 0;
    for (n, seed) in [(30, 1), (31, 2), (47, 3), (120, 4), (300, 5)] {
        let ds = gaussian_blobs(n, 4, 5, 2.0, seed);
        for linkage in Linkage::ALL {
            let d = agglomerate(ds.features(), linkage).map_err(|e| e.to_string())?;
            let cut = cut_dendrogram(&d, 30).map_err(|e| e.to_string())?;
            let non_empty = cut.cluster_sizes().iter().filter(|&&s| s > 0).count();
            ensure(non_empty == 30 && cut.labels.iter().all(|&l| l < 30), || {
                format!("{} n={n}: {non_empty} non-empty clusters", linkage.as_str())
            })?;

            let mut coarser = cut_dendrogram(&d, 1).map_err(|e| e.to_string())?.labels;
            for k in 2..=n {
                let finer = cut_dendrogram(&d, k).map_err(|e| e.to_string())?.labels;
                let mut parent = vec![usize::MAX; k];
                for (f, c) in finer.iter().zip(&coarser) {
                    ensure(parent[*f] == usize::MAX || parent[*f] == *c, || {
                        format!("{} n={n}: cut at {k} splits across cut at {}", linkage.as_str(), k - 1)
                    })?;
                    parent[*f] = *c;
                }
                coarser = finer;
            }
            checked += 1;
        }
    }
    Ok(format!("k-means purity 1.0; {checked} dendrograms cut to 30 and nested at every k"))
}

fn main() {
    let irmas = std::env::var_os("IRMAS_ROOT").map(std::path::PathBuf::from);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 frame count", Box::new(|| frame_count().into())),
        ("2 numeric oracles", Box::new(|| numeric_oracles().into())),
        ("3 feature sanity", Box::new(|| feature_sanity().into())),
        ("4 learner correctness", Box::new(|| learner_correctness().into())),
        ("5 metrics", Box::new(|| metrics_suite().into())),
        (
            "6 dataset reproduction",
            Box::new(move || match &irmas {
                Some(root) if root.is_dir() => dataset_reproduction(root).into(),
                Some(root) => Verdict::Skip(format!("IRMAS_ROOT={} is not a directory", root.display())),
                None => Verdict::Skip("IRMAS_ROOT not set".into()),
            }),
        ),
        ("7 determinism", Box::new(|| determinism().into())),
        ("8 clustering", Box::new(|| clustering_behavior().into())),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Verdict::Fail(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
            Verdict::Skip(detail) => println!("SKIP criterion {name}: {detail}"),
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

impl From<Check> for Verdict {
    fn from(check: Check) -> Self {
        match check {
            Ok(detail) => Verdict::Pass(detail),
            Err(detail) => Verdict::Fail(detail),
        }
    }
}
