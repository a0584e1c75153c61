use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gazelab_core::analysis::{
    clean_errors, clean_session, describe, kde, kde_grid, spatial_error_map, SpatialErrorMap,
};
use gazelab_core::augment::{augment_sample_with, save_series, AugmentParams};
use gazelab_core::dataset::{
    aoi_row_col, fill_missing, load_session, save_session, Condition, GazeSession, Platform,
    AOI_COLUMNS, AOI_ROWS,
};
use gazelab_core::evaluate::{
    classification_report, default_grid, grid_search, kfold_cv, learning_curve, stratified_folds,
    write_confusion_csv, write_cv_csv, write_grid_csv, write_learning_curve_csv, write_rates_csv,
    ClassificationReport, ModelSpec,
};
use gazelab_core::features::tsne::{tsne, TsneParams};
use gazelab_core::features::{
    assemble_dataset, read_matrix_csv, shuffle_split_indices, standardize, write_matrix_csv,
    AoiStat, AssembleOptions, Standardizer, Task,
};
use gazelab_core::geometry::{
    aoi_gt_angles, compute_errors, session_angles, Category, ErrorSeries,
};
use gazelab_core::learn::forest::ForestParams;
use gazelab_core::learn::linear::{export_error_model, linear_fit, rmse, LinearOptions, Penalty};
use gazelab_core::learn::mlp::{mlp_fit_regressor, MlpParams};
use gazelab_core::learn::persist::{load_bundle, save_bundle, ModelBundle};
use gazelab_core::learn::svm::SvmParams;
use gazelab_core::learn::Model;
use gazelab_core::seed::derive_seed;
use gazelab_core::stats;
use gazelab_core::synth::{synth_cohort, CohortSpec};
use gazelab_core::{Error, Result};

use crate::svg::{self, Series};
use crate::*;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(&a),
        Command::Clean(a) => clean(&a),
        Command::Stats(a) => stats_cmd(&a),
        Command::Augment(a) => augment(&a),
        Command::Features(a) => features(&a),
        Command::Tsne(a) => tsne_cmd(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Regress(a) => regress(&a),
        Command::Report(a) => report(&a),
    }
}

fn mkdir(p: &Path) -> Result<PathBuf> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    Ok(p.to_path_buf())
}

fn write(p: &Path, s: &str) -> Result<()> {
    fs::write(p, s).map_err(|e| Error::io(p, e))
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    Ok(v)
}

/// Files named by `--input`: plain paths, directories (their `.csv` files)
/// or glob patterns, each group sorted.
fn expand_inputs(inputs: &Inputs, out: &Path) -> Result<Vec<PathBuf>> {
    let specs = if inputs.input.is_empty() {
        vec![out.join("sessions").to_string_lossy().into_owned()]
    } else {
        inputs.input.clone()
    };
    let mut files = Vec::new();
    for s in &specs {
        let p = Path::new(s);
        if p.is_dir() {
            files.extend(csv_files(p)?);
        } else if p.is_file() {
            files.push(p.to_path_buf());
        } else if s.contains(['*', '?', '[']) {
            let mut v: Vec<PathBuf> = glob::glob(s)
                .map_err(|e| Error::usage(format!("bad pattern '{s}': {e}")))?
                .filter_map(|r| r.ok())
                .filter(|p| p.is_file())
                .collect();
            if v.is_empty() {
                return Err(Error::data(format!("pattern '{s}' matched no files")));
            }
            v.sort();
            files.extend(v);
        } else {
            return Err(Error::data(format!("input '{s}' does not exist")));
        }
    }
    if files.is_empty() {
        return Err(Error::data("no input files found"));
    }
    Ok(files)
}

fn load_all(files: &[PathBuf]) -> Result<Vec<GazeSession>> {
    files.iter().map(|f| load_session(f, None, None)).collect()
}

fn filled(s: &GazeSession) -> Result<GazeSession> {
    if s.has_missing() {
        fill_missing(s)
    } else {
        Ok(s.clone())
    }
}

fn platform_title(p: Platform) -> &'static str {
    match p {
        Platform::Desktop => "Desktop",
        Platform::Tablet => "Tablet",
    }
}

fn platform_key(p: Platform) -> &'static str {
    match p {
        Platform::Desktop => "desktop",
        Platform::Tablet => "tablet",
    }
}

/// Row label of the regression coefficient table.
fn condition_title(p: Platform, c: Condition) -> String {
    let s = match c {
        Condition::UD50 => "User distance 50",
        Condition::UD60 => "User distance 60",
        Condition::UD70 => "User distance 70",
        Condition::UD80 => "User distance 80",
        Condition::HeadRoll20 => "Head Roll 20",
        Condition::HeadPitch20 => "Head Pitch 20",
        Condition::HeadYaw20 => "Head Yaw 20",
        Condition::PlatRoll20 => "Platform Roll 20",
        Condition::PlatPitch20 => "Platform Pitch 20",
        Condition::PlatYaw20 => "Platform Yaw 20",
        Condition::Neutral => match p {
            Platform::Desktop => "Head pose neutral",
            Platform::Tablet => "Platform pose neutral",
        },
    };
    format!("{}: {s}", platform_title(p))
}

fn save_svg(dir: &Path, name: &str, svg: String) -> Result<()> {
    write(&dir.join(name), &svg)
}

// ---------------------------------------------------------------- synth

fn synth(a: &SynthArgs) -> Result<()> {
    let platform: Platform = a
        .platform
        .parse()
        .map_err(|e: Error| Error::usage(e.to_string()))?;
    let conditions: Vec<Condition> = if a.conditions.is_empty() {
        Condition::ALL
            .iter()
            .copied()
            .filter(|c| match platform {
                Platform::Desktop => !matches!(
                    c,
                    Condition::PlatRoll20 | Condition::PlatPitch20 | Condition::PlatYaw20
                ),
                Platform::Tablet => !matches!(
                    c,
                    Condition::HeadRoll20 | Condition::HeadPitch20 | Condition::HeadYaw20
                ),
            })
            .collect()
    } else {
        a.conditions
            .iter()
            .map(|c| c.parse().map_err(|e: Error| Error::usage(e.to_string())))
            .collect::<Result<_>>()?
    };
    if a.participants == 0 {
        return Err(Error::usage("--participants must be at least 1"));
    }
    if !(0.0..1.0).contains(&a.missing_frac) {
        return Err(Error::usage("--missing-frac must be in [0, 1)"));
    }
    let mut spec = CohortSpec::new(platform, conditions, a.participants);
    spec.options.samples_per_aoi = a.samples_per_aoi;
    spec.options.missing_frac = a.missing_frac;
    let sessions = synth_cohort(&spec, a.common.seed)?;
    let dir = mkdir(&a.common.out.join("sessions"))?;
    for s in &sessions {
        let name = format!("{}_{}.csv", s.meta.participant_id, s.meta.condition.name());
        save_session(s, dir.join(name))?;
    }
    println!("wrote {} sessions to {}", sessions.len(), dir.display());
    Ok(())
}

// ---------------------------------------------------------------- clean

fn clean(a: &CleanArgs) -> Result<()> {
    let method = a.cleaning.method()?;
    let files = expand_inputs(&a.inputs, &a.common.out)?;
    let dir = mkdir(&a.common.out.join("clean"))?;
    for f in &files {
        let s = filled(&load_session(f, None, None)?)?;
        let c = clean_session(&s, method)?;
        let path = dir.join(format!("{}.csv", stem(f)));
        save_session(&c, &path)?;
        if a.common.plot {
            let (raw, done) = (compute_errors(&s)?, compute_errors(&c)?);
            let trace = |name: &str, e: &ErrorSeries| Series {
                name: name.into(),
                points: e
                    .frontal_err
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64, *v))
                    .collect(),
            };
            let chart = svg::line_chart(
                &format!("{} frontal error", stem(f)),
                "sample",
                "error (deg)",
                &[trace("raw", &raw), trace(&method.to_string(), &done)],
            );
            save_svg(&dir, &format!("{}.svg", stem(f)), chart)?;
        }
        println!("{} -> {}", f.display(), path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------- stats

#[derive(Default)]
struct Group {
    values: [Vec<f64>; 3],
    maps: Vec<SpatialErrorMap>,
}

/// Count-weighted mean of the session maps, cell by cell.
fn pool_maps(maps: &[SpatialErrorMap]) -> SpatialErrorMap {
    let mut out = maps[0].clone();
    for (i, cell) in out.cells.iter_mut().enumerate() {
        let (mut sum, mut n) = (0.0, 0usize);
        for m in maps {
            if let Some(v) = m.cells[i].value {
                sum += v * m.cells[i].count as f64;
                n += m.cells[i].count;
            }
        }
        cell.count = n;
        cell.value = (n > 0).then(|| sum / n as f64);
    }
    out
}

fn stats_cmd(a: &StatsArgs) -> Result<()> {
    let method = a.cleaning.method()?;
    if !(a.bandwidth > 0.0) {
        return Err(Error::usage("--bandwidth must be positive"));
    }
    let files = expand_inputs(&a.inputs, &a.common.out)?;
    let dir = mkdir(&a.common.out.join("stats"))?;
    let mut per_session = String::from(
        "file,participant,platform,condition,category,n,mean,sd,mad,iqr,ci95_low,ci95_high\n",
    );
    let mut groups: BTreeMap<(Platform, Condition), Group> = BTreeMap::new();
    for f in &files {
        let s = filled(&load_session(f, None, None)?)?;
        let errors = clean_errors(&compute_errors(&s)?, method)?;
        let map = spatial_error_map(&errors, &aoi_gt_angles(&s)?)?;
        let g = groups
            .entry((s.meta.platform, s.meta.condition))
            .or_default();
        for (ci, cat) in Category::ALL.iter().enumerate() {
            let x = errors.channel(*cat);
            let d = describe(x)?;
            let _ = writeln!(
                per_session,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                stem(f),
                s.meta.participant_id,
                platform_key(s.meta.platform),
                s.meta.condition.name(),
                cat.name(),
                d.n,
                d.mean,
                d.sd,
                d.mad,
                d.iqr,
                d.ci95_low,
                d.ci95_high
            );
            g.values[ci].extend_from_slice(x);
        }
        g.maps.push(map);
    }
    write(&dir.join("stats.csv"), &per_session)?;

    let mut summary =
        String::from("platform,condition,category,n,mean,sd,mad,iqr,ci95_low,ci95_high\n");
    let mut spatial =
        String::from("platform,condition,aoi_id,row,col,gt_yaw,gt_pitch,mean_abs_error,count\n");
    println!(
        "{:<9} {:<12} {:<8} {:>8} {:>8} {:>8}",
        "platform", "condition", "category", "mean", "mad", "iqr"
    );
    for ((p, c), g) in &groups {
        for (ci, cat) in Category::ALL.iter().enumerate() {
            let d = describe(&g.values[ci])?;
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{},{}",
                platform_key(*p),
                c.name(),
                cat.name(),
                d.n,
                d.mean,
                d.sd,
                d.mad,
                d.iqr,
                d.ci95_low,
                d.ci95_high
            );
            println!(
                "{:<9} {:<12} {:<8} {:>8.3} {:>8.3} {:>8.3}",
                platform_key(*p),
                c.name(),
                cat.name(),
                d.mean,
                d.mad,
                d.iqr
            );
        }
        let pooled = pool_maps(&g.maps);
        let mut grid = vec![vec![None; AOI_COLUMNS]; AOI_ROWS];
        for cell in &pooled.cells {
            let (r, col) = aoi_row_col(cell.aoi_id);
            grid[r][col] = cell.value;
            let _ = writeln!(
                spatial,
                "{},{},{},{},{},{},{},{},{}",
                platform_key(*p),
                c.name(),
                cell.aoi_id,
                r + 1,
                col + 1,
                cell.gt_yaw,
                cell.gt_pitch,
                cell.value.map_or(String::new(), |v| v.to_string()),
                cell.count
            );
        }
        if a.common.plot {
            let rows: Vec<String> = (1..=AOI_ROWS).map(|r| format!("row {r}")).collect();
            let cols: Vec<String> = (1..=AOI_COLUMNS).map(|c| format!("col {c}")).collect();
            let chart = svg::heatmap(
                &format!(
                    "{} {}: mean |frontal error| (deg)",
                    platform_title(*p),
                    c.name()
                ),
                &rows,
                &cols,
                &grid,
            );
            save_svg(
                &dir,
                &format!("spatial_{}_{}.svg", platform_key(*p), c.name()),
                chart,
            )?;
        }
    }
    write(&dir.join("summary.csv"), &summary)?;
    write(&dir.join("spatial.csv"), &spatial)?;

    // KDE curves share one grid per platform and category
    let mut kde_csv = String::from("platform,condition,category,x,density\n");
    let platforms: Vec<Platform> = {
        let mut v: Vec<Platform> = groups.keys().map(|k| k.0).collect();
        v.dedup();
        v
    };
    for p in platforms {
        for (ci, cat) in Category::ALL.iter().enumerate() {
            let all: Vec<f64> = groups
                .iter()
                .filter(|(k, _)| k.0 == p)
                .flat_map(|(_, g)| g.values[ci].iter().copied())
                .collect();
            let grid = kde_grid(&all, a.bandwidth, a.kde_points);
            let mut series = Vec::new();
            for ((_, c), g) in groups.iter().filter(|(k, _)| k.0 == p) {
                let curve = kde(&g.values[ci], a.bandwidth, &grid)?;
                for (x, d) in curve.eval_points.iter().zip(&curve.densities) {
                    let _ = writeln!(
                        kde_csv,
                        "{},{},{},{x},{d}",
                        platform_key(p),
                        c.name(),
                        cat.name()
                    );
                }
                series.push(Series {
                    name: c.name().into(),
                    points: curve
                        .eval_points
                        .iter()
                        .copied()
                        .zip(curve.densities.iter().copied())
                        .collect(),
                });
            }
            if a.common.plot {
                let chart = svg::line_chart(
                    &format!(
                        "{} {} error density (h = {})",
                        platform_title(p),
                        cat.name(),
                        a.bandwidth
                    ),
                    "error (deg)",
                    "density",
                    &series,
                );
                save_svg(
                    &dir,
                    &format!("kde_{}_{}.svg", platform_key(p), cat.name()),
                    chart,
                )?;
            }
        }
    }
    write(&dir.join("kde.csv"), &kde_csv)?;
    println!(
        "wrote statistics for {} sessions to {}",
        files.len(),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- augment

fn augment(a: &AugmentArgs) -> Result<()> {
    let method = a.cleaning.method()?;
    let files = expand_inputs(&a.inputs, &a.common.out)?;
    let dir = mkdir(&a.common.out.join("augment"))?;
    let params = AugmentParams::default();
    for (i, f) in files.iter().enumerate() {
        let s = filled(&load_session(f, None, None)?)?;
        let errors = clean_errors(&compute_errors(&s)?, method)?;
        let set = augment_sample_with(&errors, derive_seed(a.common.seed, i as u64), &params)?;
        let mut series = vec![Series {
            name: "original".into(),
            points: errors
                .frontal_err
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64, *v))
                .collect(),
        }];
        for v in &set.variants {
            save_series(
                &v.series,
                &s.meta,
                &s.screen,
                Some(v.tag),
                dir.join(format!("{}.{}.csv", stem(f), v.tag.name())),
            )?;
            series.push(Series {
                name: v.tag.name().into(),
                points: v
                    .series
                    .frontal_err
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (i as f64, *v))
                    .collect(),
            });
        }
        if a.common.plot {
            let chart = svg::line_chart(
                &format!("{} augmented frontal error", stem(f)),
                "sample",
                "error (deg)",
                &series,
            );
            save_svg(&dir, &format!("{}.svg", stem(f)), chart)?;
        }
        println!("{}: {} variants", f.display(), set.variants.len());
    }
    Ok(())
}

// ---------------------------------------------------------------- features

fn features(a: &FeaturesArgs) -> Result<()> {
    let task: Task = a.task.parse()?;
    let sessions = load_all(&expand_inputs(&a.inputs, &a.common.out)?)?;
    let opts = AssembleOptions {
        augment: !a.no_augment,
        clean: a.cleaning.method()?,
        aoi_stat: if a.signed {
            AoiStat::MeanSigned
        } else {
            AoiStat::MeanAbs
        },
        ..AssembleOptions::default()
    };
    let mut m = assemble_dataset(&sessions, task, &opts, a.common.seed)?;
    if a.reduced {
        m = m.reduced()?;
    }
    let dir = mkdir(&a.common.out.join("features"))?;
    let path = dir.join(format!("{}.csv", task.name()));
    write_matrix_csv(&m, &path)?;
    println!(
        "{} rows x {} features -> {}",
        m.n_rows(),
        m.n_cols(),
        path.display()
    );
    for (name, n) in m.class_names.iter().zip(m.class_counts()) {
        println!("  {name}: {n}");
    }
    Ok(())
}

fn feature_path(features: &Option<PathBuf>, task: &Option<String>, out: &Path) -> Result<PathBuf> {
    match (features, task) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(t)) => {
            let t: Task = t.parse()?;
            Ok(out.join("features").join(format!("{}.csv", t.name())))
        }
        (None, None) => Err(Error::usage("pass --features <csv> or --task <task>")),
    }
}

// ---------------------------------------------------------------- tsne

fn tsne_cmd(a: &TsneArgs) -> Result<()> {
    let path = feature_path(&a.features, &a.task, &a.common.out)?;
    let m = read_matrix_csv(&path, None)?;
    let (z, _) = standardize(&m)?;
    let params = TsneParams {
        perplexity: a.perplexity,
        iterations: a.iterations,
        learning_rate: a.learning_rate,
        ..TsneParams::default()
    };
    let r = tsne(&z, &params, a.common.seed)?;
    let dir = mkdir(&a.common.out.join("tsne"))?;
    let name = stem(&path);
    let mut csv = String::from("x,y,label,participant\n");
    for ((c, l), info) in r.coords.iter().zip(&m.labels).zip(&m.info) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            c[0], c[1], m.class_names[*l], info.participant
        );
    }
    write(&dir.join(format!("{name}.csv")), &csv)?;
    let mut kl = String::from("iteration,kl\n");
    for (it, v) in &r.kl_trace {
        let _ = writeln!(kl, "{it},{v}");
    }
    write(&dir.join(format!("{name}_kl.csv")), &kl)?;
    if a.common.plot {
        let pts: Vec<(f64, f64)> = r.coords.iter().map(|c| (c[0], c[1])).collect();
        let chart = svg::scatter(
            &format!("t-SNE of {name} (perplexity {})", a.perplexity),
            &pts,
            &m.labels,
            &m.class_names,
        );
        save_svg(&dir, &format!("{name}.svg"), chart)?;
    }
    println!(
        "embedded {} rows; KL {:.4} -> {:.4}",
        m.n_rows(),
        r.initial_kl(),
        r.final_kl()
    );
    Ok(())
}

// ---------------------------------------------------------------- train

fn model_spec(a: &ModelArgs) -> Result<ModelSpec> {
    Ok(match a.model.to_ascii_lowercase().as_str() {
        "knn" => ModelSpec::Knn { k: a.k },
        "svm" => ModelSpec::Svm(SvmParams {
            c: a.c,
            gamma: a.gamma,
            ..SvmParams::default()
        }),
        "mlp" => ModelSpec::Mlp(MlpParams {
            hidden: a.layers.clone(),
            l2_alpha: a.alpha,
            epochs: a.epochs,
            ..MlpParams::default()
        }),
        "forest" => ModelSpec::Forest(ForestParams {
            n_estimators: a.trees,
            max_depth: a.max_depth,
            max_features: 0,
        }),
        other => {
            return Err(Error::usage(format!(
                "unknown model '{other}' (knn, svm, mlp or forest)"
            )))
        }
    })
}

fn confusion_svg(title: &str, rep: &ClassificationReport) -> String {
    let cm = &rep.confusion;
    let values: Vec<Vec<Option<f64>>> = cm
        .counts
        .iter()
        .map(|r| r.iter().map(|c| Some(*c as f64)).collect())
        .collect();
    let cols: Vec<String> = cm.class_names.iter().map(|c| format!("pred {c}")).collect();
    svg::heatmap(title, &cm.class_names, &cols, &values)
}

fn print_rates(rep: &ClassificationReport) {
    println!(
        "{:<12} {:>6} {:>6} {:>6} {:>6} {:>9}",
        "class", "tpr", "fpr", "tnr", "fnr", "precision"
    );
    let names = rep.confusion.class_names.iter().map(String::as_str);
    for (name, r) in names
        .zip(&rep.per_class)
        .map(|(n, c)| (n, &c.rates))
        .chain([("macro", &rep.macro_avg)])
    {
        println!(
            "{:<12} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>9.3}",
            name, r.tpr, r.fpr, r.tnr, r.fnr, r.precision
        );
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let path = feature_path(&a.features, &a.task, &a.common.out)?;
    let mut m = read_matrix_csv(&path, None)?;
    if a.reduced {
        m = m.reduced()?;
    }
    let seed = a.common.seed;
    let mut spec = model_spec(&a.model)?;
    let dir = mkdir(&a.common.out.join("train").join(format!(
        "{}_{}",
        stem(&path),
        spec.family()
    )))?;

    if a.grid {
        let g = grid_search(&m, &default_grid(spec.family())?, a.cv, seed)?;
        write_grid_csv(&g, dir.join("grid.csv"))?;
        println!("grid search over {} settings:", g.rows.len());
        for (i, r) in g.rows.iter().enumerate() {
            println!(
                "  {:<32} {:.4} +- {:.4}{}",
                r.spec.param_key(),
                r.mean_accuracy,
                r.sd_accuracy,
                if i == g.best { "  best" } else { "" }
            );
        }
        spec = g.best_spec().clone();
    }

    let cv = kfold_cv(&m, &spec, a.cv, seed)?;
    write_cv_csv(&cv, &spec, dir.join("cv.csv"))?;
    let rep = classification_report(&m.labels, &cv.predictions, &m.class_names)?;
    write_confusion_csv(&rep.confusion, dir.join("confusion.csv"))?;
    write_rates_csv(&rep, dir.join("rates.csv"))?;
    println!(
        "{spec} on {} ({} rows, {}-fold CV)",
        path.display(),
        m.n_rows(),
        a.cv
    );
    println!("fold,accuracy");
    for (f, s) in cv.fold_scores.iter().enumerate() {
        println!("{},{:.4}", f + 1, s);
    }
    println!(
        "mean accuracy {:.4} +- {:.4}",
        cv.mean_accuracy, cv.sd_accuracy
    );
    print_rates(&rep);

    if a.learning_curve {
        let sizes = if a.sizes.is_empty() {
            let folds = stratified_folds(&m.labels, m.n_classes(), a.cv, seed)?;
            let largest = folds.iter().map(Vec::len).max().unwrap_or(0);
            let smallest_train = m.n_rows() - largest;
            let mut s: Vec<usize> = (1..=5)
                .map(|i| smallest_train * i / 5)
                .filter(|s| *s > 0)
                .collect();
            s.dedup();
            s
        } else {
            a.sizes.clone()
        };
        let lc = learning_curve(&m, &spec, &sizes, a.cv, seed)?;
        write_learning_curve_csv(&lc, dir.join("learning_curve.csv"))?;
        if a.common.plot {
            let pts = |v: &[f64]| -> Vec<(f64, f64)> {
                lc.train_sizes
                    .iter()
                    .map(|s| *s as f64)
                    .zip(v.iter().copied())
                    .collect()
            };
            let chart = svg::line_chart(
                &format!("Learning curve: {spec}"),
                "training rows",
                "accuracy",
                &[
                    Series {
                        name: "training".into(),
                        points: pts(&lc.train_scores),
                    },
                    Series {
                        name: "cross-validation".into(),
                        points: pts(&lc.cv_scores),
                    },
                ],
            );
            save_svg(&dir, "learning_curve.svg", chart)?;
        }
    }

    let (z, standardizer) = standardize(&m)?;
    let model = spec.fit(&z, derive_seed(seed, u64::MAX))?;
    if let Model::Forest(f) = &model {
        let mut csv = String::from("feature,importance\n");
        for (name, v) in m.columns.iter().zip(&f.importances) {
            let _ = writeln!(csv, "{name},{v}");
        }
        write(&dir.join("importances.csv"), &csv)?;
    }
    let bundle = ModelBundle {
        model,
        columns: m.columns.clone(),
        class_names: m.class_names.clone(),
        standardizer: Some(standardizer),
        target_scale: None,
    };
    save_bundle(&bundle, dir.join("model.txt"))?;
    if a.common.plot {
        save_svg(
            &dir,
            "confusion.svg",
            confusion_svg(&format!("{spec}: CV confusion"), &rep),
        )?;
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------- evaluate

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let bundle = load_bundle(&a.model_file)?;
    if !bundle.model.is_classifier() {
        return Err(Error::usage(format!(
            "{} holds a regression model",
            a.model_file.display()
        )));
    }
    let m = read_matrix_csv(&a.features, Some(&bundle.class_names))?;
    if m.columns != bundle.columns {
        return Err(Error::data(format!(
            "feature columns of {} do not match the model ({} vs {} columns)",
            a.features.display(),
            m.n_cols(),
            bundle.columns.len()
        )));
    }
    let rows = match &bundle.standardizer {
        Some(s) => s.transform(&m.rows),
        None => m.rows.clone(),
    };
    let pred = bundle.model.predict_labels(&rows)?;
    let rep = classification_report(&m.labels, &pred, &bundle.class_names)?;
    let dir = mkdir(&a.common.out.join("evaluate").join(stem(&a.features)))?;
    let mut csv = String::from("row,participant,category,true,predicted\n");
    for (i, ((t, p), info)) in m.labels.iter().zip(&pred).zip(&m.info).enumerate() {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{}",
            info.participant,
            info.category.map_or("", |c| c.name()),
            m.class_names[*t],
            m.class_names[*p]
        );
    }
    write(&dir.join("predictions.csv"), &csv)?;
    write_confusion_csv(&rep.confusion, dir.join("confusion.csv"))?;
    write_rates_csv(&rep, dir.join("rates.csv"))?;
    if a.common.plot {
        save_svg(
            &dir,
            "confusion.svg",
            confusion_svg("Confusion matrix", &rep),
        )?;
    }
    println!("accuracy {:.4} on {} rows", rep.accuracy, m.n_rows());
    print_rates(&rep);
    println!("outputs in {}", dir.display());
    Ok(())
}

// ---------------------------------------------------------------- regress

fn penalty(kind: &str, alpha: Option<f64>, l1_ratio: f64, n: usize) -> Result<Penalty> {
    let kind = kind.to_ascii_lowercase();
    let alpha = alpha.unwrap_or(if kind == "elasticnet" { 0.5 } else { 0.001 });
    if !(alpha >= 0.0) || !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::usage(
            "--alpha must be >= 0 and --l1-ratio in [0, 1]",
        ));
    }
    Ok(match kind.as_str() {
        "none" => Penalty::None,
        "ridge" => Penalty::Ridge { z: alpha },
        "lasso" => Penalty::elastic_net_per_sample(alpha, 1.0, n),
        "elasticnet" | "elastic_net" => Penalty::elastic_net_per_sample(alpha, l1_ratio, n),
        other => {
            return Err(Error::usage(format!(
                "unknown penalty '{other}' (none, ridge, lasso or elasticnet)"
            )))
        }
    })
}

fn regress(a: &RegressArgs) -> Result<()> {
    let condition: Condition = a
        .condition
        .parse()
        .map_err(|e: Error| Error::usage(e.to_string()))?;
    let platform: Option<Platform> = a
        .platform
        .as_deref()
        .map(|p| p.parse().map_err(|e: Error| Error::usage(e.to_string())))
        .transpose()?;
    if !(a.test_frac > 0.0 && a.test_frac < 1.0) {
        return Err(Error::usage("--test-frac must be in (0, 1)"));
    }
    let method = a.cleaning.method()?;
    let sessions: Vec<GazeSession> = load_all(&expand_inputs(&a.inputs, &a.common.out)?)?
        .into_iter()
        .filter(|s| s.meta.condition == condition && platform.is_none_or(|p| s.meta.platform == p))
        .collect();
    let Some(first) = sessions.first() else {
        return Err(Error::data(format!(
            "no {} sessions among the inputs",
            condition.name()
        )));
    };
    let plat = first.meta.platform;
    if sessions.iter().any(|s| s.meta.platform != plat) {
        return Err(Error::usage(
            "inputs hold desktop and tablet sessions; pass --platform",
        ));
    }

    // inputs are the gaze, yaw and pitch angles; the target is frontal error
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in &sessions {
        let c = clean_session(&filled(s)?, method)?;
        let errors = compute_errors(&c)?;
        for ((g, _), e) in session_angles(&c)?.iter().zip(&errors.frontal_err) {
            x.push(vec![g.theta_gaze, g.theta_yaw, g.theta_pitch]);
            y.push(*e);
        }
    }
    let split = shuffle_split_indices(&vec![0; y.len()], 1, a.test_frac, a.common.seed)?;
    let (mut tr, mut te) = (split.train, split.test);
    tr.sort_unstable();
    te.sort_unstable();
    let pick_x = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|i| x[*i].clone()).collect() };
    let pick_y = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|i| y[*i]).collect() };
    let names: Vec<String> = ["gaze", "yaw", "pitch"].map(String::from).to_vec();
    let sx = Standardizer::fit(&pick_x(&tr), &names)?;
    let (ym, ys) = (
        stats::mean(&pick_y(&tr)),
        stats::population_sd(&pick_y(&tr)),
    );
    if !(ys > 0.0) {
        return Err(Error::data("training target has zero variance"));
    }
    let xtr = sx.transform(&pick_x(&tr));
    let xte = sx.transform(&pick_x(&te));
    let ytr: Vec<f64> = pick_y(&tr).iter().map(|v| (v - ym) / ys).collect();
    let yte: Vec<f64> = pick_y(&te).iter().map(|v| (v - ym) / ys).collect();

    let (model, tag) = match a.model.to_ascii_lowercase().as_str() {
        "linear" => {
            let p = penalty(&a.penalty, a.alpha, a.l1_ratio, xtr.len())?;
            let opts = LinearOptions {
                degree: a.degree,
                ..LinearOptions::default()
            };
            let name = if a.degree > 1 {
                format!("{}_deg{}", p.name(), a.degree)
            } else {
                p.name().to_string()
            };
            (Model::Linear(linear_fit(&xtr, &ytr, p, &opts)?), name)
        }
        "mlp" => {
            let p = MlpParams {
                hidden: a.layers.clone(),
                l2_alpha: a.alpha.unwrap_or(0.001),
                ..MlpParams::default()
            };
            (
                Model::Mlp(mlp_fit_regressor(&xtr, &ytr, &p, a.common.seed)?),
                "mlp".to_string(),
            )
        }
        other => {
            return Err(Error::usage(format!(
                "unknown regression model '{other}' (linear or mlp)"
            )))
        }
    };
    let pred = model.predict_values(&xte)?;
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("regression produced non-finite predictions"));
    }
    let model_rmse = rmse(&pred, &yte)?;
    let base_rmse = rmse(&vec![0.0; yte.len()], &yte)?;

    let dir = mkdir(&a.common.out.join("regress").join(format!(
        "{}_{}_{}",
        platform_key(plat),
        condition.name(),
        tag
    )))?;
    let title = condition_title(plat, condition);
    if let Model::Linear(lm) = &model {
        if lm.degree == 1 {
            let em = export_error_model(lm, &title)?;
            let [b1, b2, b3] = em.coefficients;
            let table = format!(
                "Platform/Condition\tCoefficients B1, B2 and B3\tIntercept B0\n{title}\t[{b1:.8}, {b2:.8}, {b3:.8}]\t{:.8e}\n",
                em.intercept
            );
            write(&dir.join("coefficients.txt"), &table)?;
            write(
                &dir.join("coefficients.csv"),
                &format!(
                    "platform,condition,penalty,b1,b2,b3,intercept\n{},{},{},{b1},{b2},{b3},{}\n",
                    platform_key(plat),
                    condition.name(),
                    lm.penalty.name(),
                    em.intercept
                ),
            )?;
            print!(
                "{}",
                table
                    .lines()
                    .nth(1)
                    .map(|l| format!("{l}\n"))
                    .unwrap_or_default()
            );
        }
    }
    write(
        &dir.join("metrics.csv"),
        &format!(
            "metric,value\nn_train,{}\nn_test,{}\nrmse,{model_rmse}\nbaseline_rmse,{base_rmse}\nrmse_deg,{}\nbaseline_rmse_deg,{}\n",
            tr.len(),
            te.len(),
            model_rmse * ys,
            base_rmse * ys
        ),
    )?;
    let mut csv = String::from("sample,actual,predicted\n");
    let actual: Vec<f64> = yte.iter().map(|v| v * ys + ym).collect();
    let predicted: Vec<f64> = pred.iter().map(|v| v * ys + ym).collect();
    for ((i, t), p) in te.iter().zip(&actual).zip(&predicted) {
        let _ = writeln!(csv, "{i},{t},{p}");
    }
    write(&dir.join("predictions.csv"), &csv)?;
    save_bundle(
        &ModelBundle {
            model,
            columns: names,
            class_names: Vec::new(),
            standardizer: Some(sx),
            target_scale: Some((ym, ys)),
        },
        dir.join("model.txt"),
    )?;
    if a.common.plot {
        let trace = |name: &str, v: &[f64]| Series {
            name: name.into(),
            points: v.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect(),
        };
        let chart = svg::line_chart(
            &format!("{title}: actual and predicted frontal error"),
            "held-out sample",
            "error (deg)",
            &[trace("actual", &actual), trace("predicted", &predicted)],
        );
        save_svg(&dir, "predictions.svg", chart)?;
    }
    println!(
        "RMSE {model_rmse:.4} (standardized), {:.4} deg; mean baseline {base_rmse:.4} (standardized)",
        model_rmse * ys
    );
    Ok(())
}

// ---------------------------------------------------------------- report

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::io(p, e))
}

fn subdirs(p: &Path) -> Result<Vec<PathBuf>> {
    if !p.is_dir() {
        return Ok(Vec::new());
    }
    let mut v: Vec<PathBuf> = fs::read_dir(p)
        .map_err(|e| Error::io(p, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    v.sort();
    Ok(v)
}

/// Floats are shown to four decimals; everything else verbatim.
fn cell(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if s.contains(['.', 'e']) => format!("{v:.4}"),
        _ => s.to_string(),
    }
}

fn csv_table(text: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().filter(|l| !l.is_empty()).enumerate() {
        let cells: Vec<String> = line.split(',').map(cell).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let _ = writeln!(out, "|{}", " --- |".repeat(cells.len()));
        }
    }
    out
}

fn svgs(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            svgs(root, &p, out)?;
        } else if p.extension().is_some_and(|e| e == "svg") {
            out.push(p.strip_prefix(root).unwrap_or(&p).to_path_buf());
        }
    }
    Ok(())
}

/// Value in column `col` of the first row whose first field is `row`.
fn csv_lookup(text: &str, row: &str, col: &str) -> Option<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let j = header.iter().position(|h| *h == col)?;
    lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c.first() == Some(&row))
        .and_then(|c| c.get(j).map(|s| cell(s)))
}

fn report(a: &ReportArgs) -> Result<()> {
    let out = &a.out;
    if !out.is_dir() {
        return Err(Error::data(format!(
            "output directory {} does not exist",
            out.display()
        )));
    }
    let mut md = String::from("# Gaze error analysis report\n\n");

    let sessions = out.join("sessions");
    if sessions.is_dir() {
        let _ = writeln!(md, "Sessions: {}\n", csv_files(&sessions)?.len());
    }

    let summary = out.join("stats").join("summary.csv");
    if summary.is_file() {
        let _ = writeln!(
            md,
            "## Error statistics (degrees)\n\n{}",
            csv_table(&read(&summary)?)
        );
    }

    let feats = out.join("features");
    if feats.is_dir() {
        md.push_str("## Feature matrices\n\n| file | rows |\n| --- | --- |\n");
        for f in csv_files(&feats)? {
            let rows = read(&f)?.lines().count().saturating_sub(1);
            let _ = writeln!(
                md,
                "| {} | {rows} |",
                f.file_name().unwrap_or_default().to_string_lossy()
            );
        }
        md.push('\n');
    }

    let train_dirs = subdirs(&out.join("train"))?;
    if !train_dirs.is_empty() {
        md.push_str("## Classification (cross-validation)\n\n| run | model | params | mean accuracy | sd | macro TPR | macro FPR | macro precision |\n| --- | --- | --- | --- | --- | --- | --- | --- |\n");
        for d in &train_dirs {
            let cv = d.join("cv.csv");
            if !cv.is_file() {
                continue;
            }
            let text = read(&cv)?;
            let rows: Vec<Vec<&str>> = text
                .lines()
                .skip(1)
                .map(|l| l.split(',').collect())
                .collect();
            let field = |fold: &str, j: usize| {
                rows.iter()
                    .find(|r| r.get(2) == Some(&fold))
                    .and_then(|r| r.get(j).map(|s| cell(s)))
                    .unwrap_or_default()
            };
            let rates = read(&d.join("rates.csv")).unwrap_or_default();
            let macro_of = |c: &str| csv_lookup(&rates, "macro", c).unwrap_or_default();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                d.file_name().unwrap_or_default().to_string_lossy(),
                field("mean", 0),
                field("mean", 1),
                field("mean", 3),
                field("sd", 3),
                macro_of("tpr"),
                macro_of("fpr"),
                macro_of("precision")
            );
        }
        md.push('\n');
        for d in &train_dirs {
            let grid = d.join("grid.csv");
            if grid.is_file() {
                let _ = writeln!(
                    md,
                    "### Grid search: {}\n\n{}",
                    d.file_name().unwrap_or_default().to_string_lossy(),
                    csv_table(&read(&grid)?)
                );
            }
        }
    }

    let eval_dirs = subdirs(&out.join("evaluate"))?;
    if !eval_dirs.is_empty() {
        md.push_str("## Evaluation of saved models\n\n| features | macro TPR | macro FPR | macro precision |\n| --- | --- | --- | --- |\n");
        for d in &eval_dirs {
            let rates = read(&d.join("rates.csv")).unwrap_or_default();
            let macro_of = |c: &str| csv_lookup(&rates, "macro", c).unwrap_or_default();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                d.file_name().unwrap_or_default().to_string_lossy(),
                macro_of("tpr"),
                macro_of("fpr"),
                macro_of("precision")
            );
        }
        md.push('\n');
    }

    let reg_dirs = subdirs(&out.join("regress"))?;
    if !reg_dirs.is_empty() {
        md.push_str("## Regression\n\n| run | RMSE (standardized) | RMSE (deg) | baseline (standardized) |\n| --- | --- | --- | --- |\n");
        let mut coefficients = Vec::new();
        for d in &reg_dirs {
            let metrics = read(&d.join("metrics.csv")).unwrap_or_default();
            let get = |k: &str| csv_lookup(&metrics, k, "value").unwrap_or_default();
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                d.file_name().unwrap_or_default().to_string_lossy(),
                get("rmse"),
                get("rmse_deg"),
                get("baseline_rmse")
            );
            let c = d.join("coefficients.txt");
            if c.is_file() {
                if let Some(line) = read(&c)?.lines().nth(1) {
                    coefficients.push(line.split('\t').map(str::to_string).collect::<Vec<_>>());
                }
            }
        }
        if !coefficients.is_empty() {
            md.push_str("\n### Linear error models\n\n| Platform/Condition | Coefficients B1, B2 and B3 | Intercept B0 |\n| --- | --- | --- |\n");
            for c in coefficients {
                let _ = writeln!(md, "| {} |", c.join(" | "));
            }
        }
        md.push('\n');
    }

    let mut plots = Vec::new();
    svgs(out, out, &mut plots)?;
    if !plots.is_empty() {
        md.push_str("## Plots\n\n");
        for p in plots {
            let rel = p.to_string_lossy().replace('\\', "/");
            let _ = writeln!(md, "![{rel}]({rel})\n");
        }
    }
    let path = out.join("report.md");
    write(&path, &md)?;
    println!("wrote {}", path.display());
    Ok(())
}
