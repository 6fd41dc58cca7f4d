//! One function per subcommand. Each prints its resolved configuration
//! before doing any work and writes every output file atomically.

use std::path::{Path, PathBuf};

use serde_json::json;

use timbre_core::audio_io::{read_clip, AudioClip, CANONICAL_SAMPLE_RATE};
use timbre_core::cluster::{agglomerate, cluster_purity, cut_dendrogram, kmeans, write_dendrogram_csv, KmeansInit, KmeansParams};
use timbre_core::dataset::{
    irmas_class_name, load_feature_csv, scan_instrument_dirs, train_test_split, write_feature_csv, LabeledDataset,
    Scaler,
};
use timbre_core::eval::{
    cross_validate, evaluate_model, file_stem, write_boxplot_csv, write_confusion_csv, write_model_accuracy_csv,
    write_per_class_metrics_csv, EvalReport, Metric,
};
use timbre_core::features::FeatureExtractor;
use timbre_core::learn::{load_model, train, ClassifierSpec, Hyperparams, ROSTER};
use timbre_core::spectral::power_spectrogram;

use crate::args::{
    ClusterArgs, CrossvalArgs, EvaluateArgs, ExtractArgs, FileConfig, PredictArgs, SpectrogramArgs, TrainArgs,
};
use crate::config::{
    apply_model_overrides, resolve_model, resolve_split, to_value, ClusterMethod, ClusterSettings,
    ExtractionSettings, Globals, Overlay, RunConfig,
};
use crate::error::CliError;
use crate::image::{confusion_heatmap, spectrogram_image};

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn load_table(path: &Path) -> Result<LabeledDataset, CliError> {
    load_feature_csv(path).map_err(|e| CliError::from_table(path, e))
}

fn decode(path: &Path) -> Result<AudioClip, CliError> {
    read_clip(path).map_err(|source| CliError::Decode {
        path: path.to_path_buf(),
        source,
    })
}

/// Path relative to `root` with `/` separators, so tables do not depend on
/// where the dataset lives.
fn relative_name(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

pub fn extract(args: &ExtractArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let settings = ExtractionSettings::resolve(&args.extraction.clone().overlay(&file.extraction))?;
    let run = RunConfig::new(
        "extract",
        globals,
        json!({
            "root": args.root.display().to_string(),
            "out": args.out.display().to_string(),
            "extraction": to_value(&settings),
        }),
    );
    run.print();

    let files = scan_instrument_dirs(&args.root, &settings.classes).map_err(CliError::Layout)?;
    let class_names: Vec<String> = settings
        .classes
        .iter()
        .map(|c| irmas_class_name(c).map_or_else(|| c.clone(), str::to_string))
        .collect();
    log::info!("extracting {} clips with {} workers", files.len(), globals.jobs);

    let extractor = FeatureExtractor::new(settings.config()?, CANONICAL_SAMPLE_RATE)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let pool = thread_pool(globals.jobs)?;
    let rows: Vec<Result<Vec<f64>, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        files
            .par_iter()
            .map(|(path, _)| {
                let clip = decode(path)?;
                let v = extractor.extract(&clip).map_err(|source| CliError::Features {
                    path: path.clone(),
                    source,
                })?;
                log::debug!("{}", path.display());
                Ok(v.to_array().to_vec())
            })
            .collect()
    });
    let features = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<usize> = files.iter().map(|(_, l)| *l).collect();
    let paths: Vec<String> = files.iter().map(|(p, _)| relative_name(p, &args.root)).collect();
    let ds = LabeledDataset::new(features, labels, class_names, paths)
        .map_err(|e| CliError::Training(e.to_string()))?;

    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &ds, &run.output_lines()).map_err(|e| CliError::Schema(e.to_string()))?;
    write_atomic(&args.out, &buf)?;

    let counts = class_distribution(&ds);
    log::info!("clips per class: {counts}");
    println!("extracted {} clips into {} ({counts})", ds.len(), args.out.display());
    Ok(())
}

fn class_distribution(ds: &LabeledDataset) -> String {
    ds.class_names()
        .iter()
        .zip(ds.class_counts())
        .map(|(name, n)| format!("{name}={n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn train_cmd(args: &TrainArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let (name, hp) = resolve_model(&args.model.clone().overlay(&file.model))?;
    let split = resolve_split(&args.split.clone().overlay(&file.split), globals.seed)?;
    let run = RunConfig::new(
        "train",
        globals,
        json!({
            "features": args.features.display().to_string(),
            "out": args.out.display().to_string(),
            "model": to_value(&hp),
            "model_name": name,
            "split": to_value(&split),
        }),
    );
    run.print();

    let ds = load_table(&args.features)?;
    let (train_ds, test_ds) = train_test_split(&ds, &split).map_err(|e| CliError::Training(e.to_string()))?;
    log::info!("training {name} on {} rows ({})", train_ds.len(), class_distribution(&train_ds));
    let model = train(&ClassifierSpec::new(hp, globals.seed), &train_ds)?;
    write_atomic(&args.out, model.to_json()?.as_bytes())?;
    let report = evaluate_model(&name, &model, &test_ds)?;
    print!("{}", report.render_table());
    println!("model written to {}", args.out.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let split = resolve_split(&args.split.clone().overlay(&file.split), globals.seed)?;
    let overrides = args.model.clone().overlay(&file.model);
    let wanted: Vec<String> = args
        .models
        .clone()
        .unwrap_or_else(|| ROSTER.iter().map(|(k, _)| k.to_string()).collect());
    let mut roster = Vec::new();
    for key in &wanted {
        let (_, display) = ROSTER
            .iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| CliError::Config(format!("`{key}` is not in the roster")))?;
        let hp = apply_model_overrides(Hyperparams::preset(key).expect("roster keys are presets"), &overrides)?;
        roster.push((*display, hp));
    }
    let run = RunConfig::new(
        "evaluate",
        globals,
        json!({
            "features": args.features.display().to_string(),
            "out_dir": args.out_dir.display().to_string(),
            "split": to_value(&split),
            "models": roster.iter().map(|(name, hp)| json!({"name": name, "params": to_value(hp)})).collect::<Vec<_>>(),
        }),
    );
    run.print();
    let comments = run.output_lines();

    let ds = load_table(&args.features)?;
    let (train_ds, test_ds) = train_test_split(&ds, &split).map_err(|e| CliError::Training(e.to_string()))?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for (name, hp) in &roster {
        log::info!("training {name}");
        let model = train(&ClassifierSpec::new(*hp, globals.seed), &train_ds)?;
        let report = evaluate_model(name, &model, &test_ds)?;
        print!("{}", report.render_table());
        reports.push(report);
    }

    let out = &args.out_dir;
    let mut buf = Vec::new();
    write_per_class_metrics_csv(&mut buf, &reports, &comments)?;
    write_atomic(&out.join("per_class_metrics.csv"), &buf)?;
    let mut buf = Vec::new();
    write_model_accuracy_csv(&mut buf, &reports, &comments)?;
    write_atomic(&out.join("model_accuracy.csv"), &buf)?;
    for metric in Metric::ALL {
        let mut buf = Vec::new();
        write_boxplot_csv(&mut buf, &reports, metric, &comments)?;
        write_atomic(&out.join(format!("boxplot_{}.csv", metric.as_str())), &buf)?;
    }
    for r in &reports {
        let stem = file_stem(&r.model);
        let mut buf = Vec::new();
        write_confusion_csv(&mut buf, &r.confusion, &comments)?;
        write_atomic(&out.join(format!("confusion_{stem}.csv")), &buf)?;
        write_atomic(&out.join(format!("confusion_{stem}.ppm")), &confusion_heatmap(&r.confusion).to_ppm())?;
    }

    println!("{:<20}  accuracy", "model");
    for r in &reports {
        println!("{:<20}  {:.4}", r.model, r.accuracy);
    }
    println!("reports written to {}", out.display());
    Ok(())
}

pub fn crossval(args: &CrossvalArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let (name, hp) = resolve_model(&args.model.clone().overlay(&file.model))?;
    let split = resolve_split(&args.split.clone().overlay(&file.split), globals.seed)?;
    let run = RunConfig::new(
        "crossval",
        globals,
        json!({
            "features": args.features.display().to_string(),
            "out": args.out.as_ref().map(|p| p.display().to_string()),
            "model": to_value(&hp),
            "model_name": name,
            "folds": split.folds,
        }),
    );
    run.print();

    let ds = load_table(&args.features)?;
    let pool = thread_pool(globals.jobs)?;
    let cv = pool.install(|| cross_validate(&ClassifierSpec::new(hp, globals.seed), &ds, split.folds, globals.seed))?;
    for (i, acc) in cv.fold_accuracies.iter().enumerate() {
        println!("fold {:>2}: {acc:.4}", i + 1);
    }
    println!("mean accuracy: {:.4} ± {:.4} over {} folds", cv.mean, cv.stdev, split.folds);

    if let Some(out) = &args.out {
        let mut text = String::new();
        for line in run.output_lines() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str("fold,accuracy\n");
        for (i, acc) in cv.fold_accuracies.iter().enumerate() {
            text.push_str(&format!("{},{acc}\n", i + 1));
        }
        text.push_str(&format!("mean,{}\nstdev,{}\n", cv.mean, cv.stdev));
        write_atomic(out, text.as_bytes())?;
    }
    Ok(())
}

pub fn predict(args: &PredictArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let settings = ExtractionSettings::resolve(&args.extraction.clone().overlay(&file.extraction))?;
    let mut extraction = to_value(&settings);
    extraction.as_object_mut().expect("settings are an object").remove("classes");
    let run = RunConfig::new(
        "predict",
        globals,
        json!({
            "model": args.model_path.display().to_string(),
            "wav": args.wav.display().to_string(),
            "extraction": extraction,
        }),
    );
    run.print();

    let model = load_model(&args.model_path).map_err(|e| CliError::from_model_load(&args.model_path, e))?;
    let clip = decode(&args.wav)?;
    let extractor = FeatureExtractor::new(settings.config()?, clip.sample_rate_hz())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let features = extractor.extract(&clip).map_err(|source| CliError::Features {
        path: args.wav.clone(),
        source,
    })?;
    let prediction = model
        .predict(&features.to_array())
        .map_err(|e| CliError::Schema(format!("{}: {e}", args.model_path.display())))?;
    println!("prediction: {}", model.class_names[prediction.class]);
    for (name, score) in model.class_names.iter().zip(&prediction.scores) {
        println!("  {name:<16} {score:.6}");
    }
    Ok(())
}

pub fn cluster(args: &ClusterArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let settings = ClusterSettings::resolve(&args.cluster.clone().overlay(&file.cluster))?;
    let run = RunConfig::new(
        "cluster",
        globals,
        json!({
            "features": args.features.display().to_string(),
            "out": args.out.display().to_string(),
            "dendrogram": args.dendrogram.as_ref().map(|p| p.display().to_string()),
            "cluster": to_value(&settings),
        }),
    );
    run.print();

    let mut ds = load_table(&args.features)?;
    if let Some(keep) = &settings.classes {
        ds = ds.restrict_classes(keep).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let scaler = Scaler::fit(ds.features()).map_err(|e| CliError::Training(e.to_string()))?;
    let x = scaler.transform(ds.features());

    let assignment = match settings.method {
        ClusterMethod::Kmeans => {
            let k = settings.k.unwrap_or_else(|| ds.class_counts().iter().filter(|&&c| c > 0).count());
            let params = KmeansParams {
                k,
                max_iter: settings.max_iter,
                n_init: settings.n_init,
                seed: globals.seed,
                init: KmeansInit::PlusPlus,
            };
            let pool = thread_pool(globals.jobs)?;
            let result = pool.install(|| kmeans(&x, &params))?;
            println!("k-means: k = {k}, inertia = {:.6}, converged = {}", result.inertia(), result.converged);
            result.assignment
        }
        ClusterMethod::Hier => {
            let pool = thread_pool(globals.jobs)?;
            let dendrogram = pool.install(|| agglomerate(&x, settings.linkage))?;
            if let Some(path) = &args.dendrogram {
                let mut buf = Vec::new();
                write_dendrogram_csv(&mut buf, &dendrogram).map_err(|e| CliError::io(path, e))?;
                write_atomic(path, &buf)?;
            }
            let cut = cut_dendrogram(&dendrogram, settings.cut)?;
            println!("hierarchical ({}) cut into {} clusters", settings.linkage.as_str(), cut.k);
            cut
        }
    };

    let purity = cluster_purity(&assignment.labels, ds.labels())?;
    let sizes = assignment.cluster_sizes();
    println!("non-empty clusters: {}", sizes.iter().filter(|&&s| s > 0).count());
    println!("cluster sizes: {sizes:?}");
    println!("purity: {purity:.4}");

    let mut text = String::new();
    for line in run.output_lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str("path,label,cluster\n");
    for i in 0..ds.len() {
        text.push_str(&format!(
            "{},{},{}\n",
            csv_field(&ds.paths()[i]),
            csv_field(&ds.class_names()[ds.labels()[i]]),
            assignment.labels[i]
        ));
    }
    write_atomic(&args.out, text.as_bytes())?;
    Ok(())
}

/// Quotes a CSV field when it needs it.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn spectrogram(args: &SpectrogramArgs, globals: &Globals, file: &FileConfig) -> Result<(), CliError> {
    let settings = ExtractionSettings::resolve(&args.extraction.clone().overlay(&file.extraction))?;
    let run = RunConfig::new(
        "spectrogram",
        globals,
        json!({
            "wav": args.wav.display().to_string(),
            "out": args.out.display().to_string(),
            "frame_size": settings.frame_size,
            "hop_size": settings.hop_size,
            "centered": settings.centered,
            "db_floor": settings.log_floor,
        }),
    );
    run.print();

    let clip = decode(&args.wav)?;
    let spec = power_spectrogram(&clip, &settings.frame_plan()?).map_err(|e| CliError::Features {
        path: args.wav.clone(),
        source: e.into(),
    })?;
    let image = spectrogram_image(&spec, settings.log_floor);
    write_atomic(&args.out, &image.to_pgm())?;
    println!("{} x {} spectrogram written to {}", image.width, image.height, args.out.display());
    Ok(())
}
