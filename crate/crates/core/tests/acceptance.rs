//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (no libtest harness) so the report reads top to bottom.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use gazelab_core::analysis::{
    clean_errors, describe, iqr_outliers, kde, kde_grid, mad_outliers, median_filter, CleanMethod,
};
use gazelab_core::augment::{
    augment_sample, flip_aoi, flip_series, pink_noise, FlipAxis, VARIANTS_PER_SAMPLE,
};
use gazelab_core::dataset::{
    Condition, GazeRecord, GazeSession, Platform, Point, ScreenConfig, SessionMeta, AOI_COUNT,
};
use gazelab_core::evaluate::{
    classification_report, grid_search, kfold_cv, stratified_folds, ModelSpec,
};
use gazelab_core::features::tsne::{conditional_probabilities, tsne_rows};
use gazelab_core::features::{assemble_dataset, standardize, AssembleOptions, Task, TsneParams};
use gazelab_core::geometry::{compute_errors, gt_angles, session_angles, to_angles, Category};
use gazelab_core::learn::linear::Solver;
use gazelab_core::learn::mlp::Targets;
use gazelab_core::learn::svm::solve_binary;
use gazelab_core::learn::{
    forest::forest_fit_rows, linear_fit, rmse, ForestParams, LinearOptions, MlpModel, MlpParams,
    MlpTask, Penalty, SvmParams,
};
use gazelab_core::seed::{derive_seed, rng};
use gazelab_core::stats;
use gazelab_core::synth::{
    inject_spikes, synth_cohort, synth_session, CohortSpec, ConditionProfile, SynthOptions,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn geometry() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let p = Point::new(
            r.random_range(-2000.0..2000.0),
            r.random_range(-1200.0..1200.0),
        );
        let mu: f64 = r.random_range(0.05..0.5);
        let z: f64 = r.random_range(200.0..1200.0);
        let screen = ScreenConfig {
            pixel_pitch_mm: mu,
            ..ScreenConfig::desktop()
        };
        let osd = mu * (p.x * p.x + p.y * p.y).sqrt();
        let expect = [
            (osd / z).atan() * 180.0 / std::f64::consts::PI,
            (mu * p.x / z).atan() * 180.0 / std::f64::consts::PI,
            (mu * p.y / z).atan() * 180.0 / std::f64::consts::PI,
        ];
        for a in [
            to_angles(p, &screen, z).map_err(|e| e.to_string())?,
            gt_angles(p, &screen, z).map_err(|e| e.to_string())?,
        ] {
            for (got, want) in [a.theta_gaze, a.theta_yaw, a.theta_pitch]
                .iter()
                .zip(expect)
            {
                worst = worst.max((got - want).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:e} deg"))?;

    let screen = ScreenConfig::desktop();
    let grid = gazelab_core::dataset::make_aoi_grid(&screen, 0.1).map_err(|e| e.to_string())?;
    let records: Vec<GazeRecord> = (0..AOI_COUNT * 5)
        .map(|i| {
            let g = grid[i / 5];
            GazeRecord {
                timestamp_ms: i as i64 * 33,
                left_x: Some(g.x),
                left_y: Some(g.y),
                right_x: Some(g.x),
                right_y: Some(g.y),
                aoi_id: (i / 5 + 1) as u8,
                gt_x: g.x,
                gt_y: g.y,
            }
        })
        .collect();
    let session = GazeSession::new(
        SessionMeta::new("P01", Platform::Desktop, Condition::UD60),
        screen,
        records,
        grid,
    )
    .map_err(|e| e.to_string())?;
    let e = compute_errors(&session).map_err(|e| e.to_string())?;
    let all_zero = Category::ALL
        .iter()
        .all(|c| e.channel(*c).iter().all(|v| *v == 0.0));
    check(all_zero, "gaze == GT gave non-zero error")?;
    Ok(format!(
        "max deviation {worst:.1e} deg over 1000 triples; gaze==GT error exactly 0"
    ))
}

fn naive_median(x: &[f64], w: usize) -> Vec<f64> {
    let half = w as isize / 2;
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut win: Vec<f64> = (i - half..=i + half)
                .map(|j| x[j.clamp(0, n - 1) as usize])
                .collect();
            win.sort_by(f64::total_cmp);
            win[win.len() / 2]
        })
        .collect()
}

fn cleaning() -> Outcome {
    let mut r = rng(2);
    for _ in 0..200 {
        let n = r.random_range(1..300);
        let w = 2 * r.random_range(0..25) + 1;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let got = median_filter(&x, w).map_err(|e| e.to_string())?;
        check(
            got == naive_median(&x, w),
            format!("median filter mismatch at n={n}, w={w}"),
        )?;

        if n >= 4 {
            let mut s = x.clone();
            s.sort_by(f64::total_cmp);
            let q = |p: f64| {
                let h = (s.len() - 1) as f64 * p;
                let lo = h.floor() as usize;
                s[lo] + (h - lo as f64) * (s[(lo + 1).min(s.len() - 1)] - s[lo])
            };
            let (q1, q3) = (q(0.25), q(0.75));
            let fence: Vec<bool> = x
                .iter()
                .map(|v| *v < q1 - 1.5 * (q3 - q1) || *v > q3 + 1.5 * (q3 - q1))
                .collect();
            check(
                iqr_outliers(&x).map_err(|e| e.to_string())? == fence,
                "IQR mask mismatch",
            )?;
            let med = q(0.5);
            let mut dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
            dev.sort_by(f64::total_cmp);
            let m = dev.len();
            let mad = if m % 2 == 1 {
                dev[m / 2]
            } else {
                (dev[m / 2 - 1] + dev[m / 2]) / 2.0
            };
            let want: Vec<bool> = x.iter().map(|v| (v - med).abs() > 3.0 * mad).collect();
            check(
                mad_outliers(&x, 3.0).map_err(|e| e.to_string())? == want,
                "MAD mask mismatch",
            )?;
        }
    }

    let mut worst = 0.0_f64;
    let method = CleanMethod::Median { kernel: 41 };
    let mut sessions = 0;
    for cond in [
        Condition::UD50,
        Condition::UD60,
        Condition::UD70,
        Condition::UD80,
    ] {
        for _ in 0..10 {
            sessions += 1;
            let profile = ConditionProfile::calibrated(Platform::Desktop, cond);
            let meta = SessionMeta::new("P01", Platform::Desktop, cond);
            let s = synth_session(
                &profile,
                &ScreenConfig::desktop(),
                &meta,
                derive_seed(30, sessions),
                &SynthOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let truth = compute_errors(&s).map_err(|e| e.to_string())?;
            let (spiked, idx) = inject_spikes(&truth, 0.05, 10.0, derive_seed(31, sessions));
            let filtered = clean_errors(&spiked, method).map_err(|e| e.to_string())?;
            let reference = clean_errors(&truth, method).map_err(|e| e.to_string())?;
            for c in Category::ALL {
                for &k in &idx {
                    worst = worst.max((filtered.channel(c)[k] - reference.channel(c)[k]).abs());
                }
            }
        }
    }
    check(
        worst < 1.0,
        format!("residual at spike indices {worst:.3} deg"),
    )?;
    Ok(format!(
        "200 series match oracles; max post-filter residual at 10 deg spikes {worst:.3} deg over {sessions} sessions"
    ))
}

fn kde_check() -> Outcome {
    let mut r = rng(3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let n = r.random_range(1..200);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..8.0)).collect();
        let grid = kde_grid(&x, 0.2, 2000);
        let i = kde(&x, 0.2, &grid).map_err(|e| e.to_string())?.integral();
        lo = lo.min(i);
        hi = hi.max(i);
    }
    check(
        lo >= 0.98 && hi <= 1.02,
        format!("integral range [{lo}, {hi}]"),
    )?;
    let single = kde(&[0.0], 0.2, &[0.0])
        .map_err(|e| e.to_string())?
        .densities[0];
    check(
        (single - 1.9947).abs() < 1e-3,
        format!("single point density {single}"),
    )?;
    Ok(format!(
        "integrals in [{lo:.5}, {hi:.5}]; single point {single:.5}"
    ))
}

fn periodogram_slope(x: &[f64]) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let pts: Vec<(f64, f64)> = (1..n / 2)
        .map(|k| ((k as f64).ln(), buf[k].norm_sqr().ln()))
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn augmentation() -> Outcome {
    let profile = ConditionProfile::calibrated(Platform::Desktop, Condition::HeadYaw20);
    let meta = SessionMeta::new("P01", Platform::Desktop, Condition::HeadYaw20);
    let s = synth_session(
        &profile,
        &ScreenConfig::desktop(),
        &meta,
        4,
        &SynthOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let e = compute_errors(&s).map_err(|e| e.to_string())?;
    let set = augment_sample(&e, 5).map_err(|e| e.to_string())?;
    check(
        set.variants.len() == VARIANTS_PER_SAMPLE && VARIANTS_PER_SAMPLE == 10,
        "variant count",
    )?;

    let mut worst = 0.0_f64;
    for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
        let twice = flip_series(&flip_series(&e, axis), axis);
        check(twice == e, "series flip is not an involution")?;
        for c in Category::ALL {
            let map: Vec<f64> = e
                .per_aoi_mean(c, true)
                .iter()
                .map(|v| v.unwrap_or(0.0))
                .collect();
            let flipped = flip_aoi(&map, axis).map_err(|e| e.to_string())?;
            check(
                flip_aoi(&flipped, axis).map_err(|e| e.to_string())? == map,
                "map flip is not an involution",
            )?;
            for (a, b) in [
                (map.clone(), flipped),
                (
                    e.channel(c).to_vec(),
                    flip_series(&e, axis).channel(c).to_vec(),
                ),
            ] {
                let (da, db) = (
                    describe(&a).map_err(|e| e.to_string())?,
                    describe(&b).map_err(|e| e.to_string())?,
                );
                worst = worst
                    .max((da.mean - db.mean).abs())
                    .max((da.mad - db.mad).abs())
                    .max((da.iqr - db.iqr).abs());
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("flip changed statistics by {worst:e}"),
    )?;

    let slopes: Vec<f64> = (0..20)
        .map(|s| pink_noise(4096, 0.8, 1.0, 100 + s).map(|x| periodogram_slope(&x)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let slope = stats::mean(&slopes);
    check((slope + 0.8).abs() <= 0.2, format!("pink slope {slope:.3}"))?;
    Ok(format!(
        "10 variants; flips are involutions (stat drift {worst:.0e}); pink slope {slope:.3}"
    ))
}

fn cohort(
    platform: Platform,
    conditions: Vec<Condition>,
    seed: u64,
) -> Result<Vec<GazeSession>, String> {
    synth_cohort(&CohortSpec::new(platform, conditions, 20), seed).map_err(|e| e.to_string())
}

fn features() -> Outcome {
    let ud = vec![
        Condition::UD50,
        Condition::UD60,
        Condition::UD70,
        Condition::UD80,
    ];
    let sessions = cohort(Platform::Desktop, ud, 6)?;
    let four = assemble_dataset(
        &sessions,
        Task::UserDistance,
        &AssembleOptions::default(),
        7,
    )
    .map_err(|e| e.to_string())?;
    let mixed_conds = vec![
        Condition::UD50,
        Condition::UD60,
        Condition::UD70,
        Condition::UD80,
        Condition::HeadRoll20,
        Condition::HeadPitch20,
        Condition::HeadYaw20,
    ];
    let sessions = cohort(Platform::Desktop, mixed_conds, 8)?;
    let seven = assemble_dataset(&sessions, Task::Mixed, &AssembleOptions::default(), 9)
        .map_err(|e| e.to_string())?;
    check(
        four.n_rows() == 2400,
        format!("4-class rows {}", four.n_rows()),
    )?;
    check(
        seven.n_rows() == 4200,
        format!("7-class rows {}", seven.n_rows()),
    )?;
    check(
        four.n_classes() == 4 && seven.n_classes() == 7,
        "class counts",
    )?;
    let mut worst = 0.0_f64;
    for m in [&four, &seven] {
        let (z, _) = standardize(m).map_err(|e| e.to_string())?;
        for j in 0..z.n_cols() {
            let col = z.column(j);
            worst = worst
                .max(stats::mean(&col).abs())
                .max((stats::population_sd(&col) - 1.0).abs());
        }
    }
    check(worst < 1e-9, format!("standardization drift {worst:e}"))?;
    Ok(format!(
        "2400 and 4200 rows; standardized column drift {worst:.1e}"
    ))
}

fn tsne_check() -> Outcome {
    let mut worst_perp = 0.0_f64;
    let mut kl_pairs = Vec::new();
    for d in 0..10u64 {
        let mut r = rng(derive_seed(11, d));
        let x: Vec<Vec<f64>> = (0..300)
            .map(|i| {
                (0..5)
                    .map(|_| r.random_range(-1.0..1.0) + (i % 3) as f64)
                    .collect()
            })
            .collect();
        let (_, perp) = conditional_probabilities(&x, 80.0);
        worst_perp = perp.iter().fold(worst_perp, |w, p| w.max((p - 80.0).abs()));
        let res = tsne_rows(&x, &TsneParams::default(), d).map_err(|e| e.to_string())?;
        check(
            res.final_kl() < res.initial_kl(),
            format!("dataset {d}: KL {} -> {}", res.initial_kl(), res.final_kl()),
        )?;
        kl_pairs.push((res.initial_kl(), res.final_kl()));
    }
    check(
        worst_perp <= 1e-3,
        format!("perplexity off by {worst_perp:e}"),
    )?;
    let worst_ratio = kl_pairs.iter().map(|(a, b)| b / a).fold(0.0, f64::max);
    Ok(format!(
        "perplexity within {worst_perp:.1e} of 80; final/initial KL at most {worst_ratio:.3}"
    ))
}

fn models() -> Outcome {
    let mut r = rng(12);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    // MLP central-difference gradient check
    let x: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..3).map(|_| normal.sample(&mut r)).collect())
        .collect();
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let mlp = MlpModel::init(3, &[5, 4], MlpTask::Classifier { n_classes: 3 }, 0.01, 13)
        .map_err(|e| e.to_string())?;
    let (_, grad) = mlp
        .loss_and_gradient(&x, Targets::Labels(&labels))
        .map_err(|e| e.to_string())?;
    let mut grad_err = 0.0_f64;
    for i in 0..mlp.params.len() {
        let h = 1e-6;
        let mut a = mlp.clone();
        a.params[i] += h;
        let mut b = mlp.clone();
        b.params[i] -= h;
        let fa = a
            .loss_and_gradient(&x, Targets::Labels(&labels))
            .map_err(|e| e.to_string())?
            .0;
        let fb = b
            .loss_and_gradient(&x, Targets::Labels(&labels))
            .map_err(|e| e.to_string())?
            .0;
        let fd = (fa - fb) / (2.0 * h);
        grad_err = grad_err.max((fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-8));
    }
    check(
        grad_err < 1e-4,
        format!("MLP gradient relative error {grad_err:e}"),
    )?;

    // SVM on separable blobs
    let mut blobs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..100 {
        let c = if i % 2 == 0 { -1.0 } else { 1.0 };
        blobs.push(vec![
            3.0 * c + 0.5 * normal.sample(&mut r),
            3.0 * c + 0.5 * normal.sample(&mut r),
        ]);
        ys.push(c);
    }
    let p = SvmParams::default();
    let sol = solve_binary(&blobs, &ys, &p).map_err(|e| e.to_string())?;
    let box_ok = sol.alpha.iter().all(|a| *a >= 0.0 && *a <= p.c);
    let eq: f64 = sol.alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
    check(
        box_ok && eq.abs() < 1e-6,
        format!("dual infeasible: sum a*y = {eq:e}"),
    )?;
    let labels01: Vec<usize> = ys.iter().map(|y| usize::from(*y > 0.0)).collect();
    let svm = gazelab_core::learn::svm::svm_fit_rows(&blobs, &labels01, 2, &p)
        .map_err(|e| e.to_string())?;
    check(
        svm.predict(&blobs) == labels01,
        "SVM training accuracy below 100%",
    )?;

    // ridge by coordinate descent vs closed form
    let xr: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..4).map(|_| normal.sample(&mut r)).collect())
        .collect();
    let yr: Vec<f64> = xr
        .iter()
        .map(|v| v[0] - 2.0 * v[1] + 0.5 * v[3] + 0.3 * normal.sample(&mut r))
        .collect();
    let cd = LinearOptions {
        solver: Solver::CoordinateDescent,
        tol: 1e-12,
        ..LinearOptions::default()
    };
    let cf = LinearOptions {
        solver: Solver::ClosedForm,
        ..LinearOptions::default()
    };
    let fit =
        |pen: Penalty, o: &LinearOptions| linear_fit(&xr, &yr, pen, o).map_err(|e| e.to_string());
    let diff = |a: &gazelab_core::learn::LinearModel, b: &gazelab_core::learn::LinearModel| {
        a.weights
            .iter()
            .zip(&b.weights)
            .map(|(u, v)| (u - v).abs())
            .fold((a.intercept - b.intercept).abs(), f64::max)
    };
    let ridge_gap = diff(
        &fit(Penalty::Ridge { z: 3.0 }, &cd)?,
        &fit(Penalty::Ridge { z: 3.0 }, &cf)?,
    );
    check(
        ridge_gap < 1e-6,
        format!("ridge CD vs closed form {ridge_gap:e}"),
    )?;

    // lasso on centered orthonormal columns: w_j = S(x_j'y, z/2)
    let hadamard = |i: usize, j: usize| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let xo: Vec<Vec<f64>> = (0..8)
        .map(|i| (1..4).map(|j| hadamard(i, j) / 8f64.sqrt()).collect())
        .collect();
    let yo: Vec<f64> = (0..8).map(|_| 3.0 * normal.sample(&mut r)).collect();
    let z = 1.5;
    let lasso = linear_fit(&xo, &yo, Penalty::Lasso { z }, &cd).map_err(|e| e.to_string())?;
    let mut lasso_gap = 0.0_f64;
    for j in 0..3 {
        let rho: f64 = xo.iter().zip(&yo).map(|(row, y)| row[j] * y).sum();
        let oracle = rho.signum() * (rho.abs() - z / 2.0).max(0.0);
        lasso_gap = lasso_gap.max((lasso.weights[j] - oracle).abs());
    }
    check(
        lasso_gap < 1e-6,
        format!("lasso vs soft threshold {lasso_gap:e}"),
    )?;

    // elastic net limits
    let en_ridge = diff(
        &fit(Penalty::ElasticNet { z1: 0.0, z2: 3.0 }, &cd)?,
        &fit(Penalty::Ridge { z: 3.0 }, &cf)?,
    );
    let en_lasso = diff(
        &fit(Penalty::ElasticNet { z1: 4.0, z2: 0.0 }, &cd)?,
        &fit(Penalty::Lasso { z: 4.0 }, &cd)?,
    );
    let en_ols = diff(
        &fit(Penalty::ElasticNet { z1: 0.0, z2: 0.0 }, &cd)?,
        &fit(Penalty::None, &cf)?,
    );
    let en_gap = en_ridge.max(en_lasso).max(en_ols);
    check(
        en_gap < 1e-6,
        format!("elastic net limits {en_ridge:e} {en_lasso:e} {en_ols:e}"),
    )?;

    // forest importances with a label-copy column
    let y: Vec<usize> = (0..300).map(|i| i % 2).collect();
    let xf: Vec<Vec<f64>> = y
        .iter()
        .map(|c| {
            std::iter::once(*c as f64)
                .chain((0..4).map(|_| r.random::<f64>()))
                .collect()
        })
        .collect();
    let forest =
        forest_fit_rows(&xf, &y, 2, &ForestParams::default(), 14).map_err(|e| e.to_string())?;
    let sum: f64 = forest.importances.iter().sum();
    check(
        (sum - 1.0).abs() < 1e-9 && forest.importances[0] > 0.8,
        format!("importances {:?}", forest.importances),
    )?;

    Ok(format!(
        "grad err {grad_err:.1e}; SVM feasible (|sum a*y| {:.1e}), 100% train; ridge {ridge_gap:.1e}; lasso {lasso_gap:.1e}; enet {en_gap:.1e}; label-copy importance {:.3}",
        eq.abs(),
        forest.importances[0]
    ))
}

fn evaluation() -> Outcome {
    let mut r = rng(15);
    for t in 0..50 {
        let k = r.random_range(2..11);
        let n = r.random_range(3 * k..200);
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 3, k, t).map_err(|e| e.to_string())?;
        let mut all = folds.concat();
        all.sort_unstable();
        check(
            all == (0..n).collect::<Vec<_>>(),
            format!("folds of n={n}, k={k} are not a partition"),
        )?;
    }
    let names: Vec<String> = ["A", "B", "C", "D"].map(String::from).to_vec();
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let n = r.random_range(1..100);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let rep = classification_report(&truth, &pred, &names).map_err(|e| e.to_string())?;
        for c in &rep.per_class {
            worst = worst
                .max((c.rates.tpr + c.rates.fnr - 1.0).abs())
                .max((c.rates.tnr + c.rates.fpr - 1.0).abs());
        }
    }
    check(worst <= 1e-9, format!("rate identities off by {worst:e}"))?;

    let ab: Vec<String> = ["A", "B"].map(String::from).to_vec();
    let rep =
        classification_report(&[0, 0, 1, 1], &[0, 1, 1, 1], &ab).map_err(|e| e.to_string())?;
    let (a, b) = (rep.per_class[0].rates, rep.per_class[1].rates);
    check(
        a.tpr == 0.5
            && a.fpr == 0.0
            && b.tpr == 1.0
            && b.fpr == 0.5
            && (rep.macro_avg.precision - 0.8333).abs() < 1e-4,
        format!("hand example gave {:?}", rep.per_class),
    )?;

    let sessions = cohort(
        Platform::Desktop,
        vec![
            Condition::UD50,
            Condition::UD60,
            Condition::UD70,
            Condition::UD80,
        ],
        16,
    )?;
    let opts = AssembleOptions {
        augment: false,
        ..AssembleOptions::default()
    };
    let m =
        assemble_dataset(&sessions, Task::UserDistance, &opts, 17).map_err(|e| e.to_string())?;
    let grid: Vec<ModelSpec> = [1, 3, 5]
        .into_iter()
        .map(|k| ModelSpec::Knn { k })
        .collect();
    let g1 = grid_search(&m, &grid, 5, 18).map_err(|e| e.to_string())?;
    let g2 = grid_search(&m, &grid, 5, 18).map_err(|e| e.to_string())?;
    check(
        g1 == g2,
        "grid search differs between runs with the same seed",
    )?;
    Ok(format!(
        "folds partition; rate identities within {worst:.0e}; hand example exact; grid search repeatable (best {})",
        g1.best_spec()
    ))
}

fn classification_e2e() -> Outcome {
    let start = Instant::now();
    let ud = vec![
        Condition::UD50,
        Condition::UD60,
        Condition::UD70,
        Condition::UD80,
    ];
    let sessions = cohort(Platform::Desktop, ud, 19)?;
    let m = assemble_dataset(
        &sessions,
        Task::UserDistance,
        &AssembleOptions::default(),
        20,
    )
    .map_err(|e| e.to_string())?;
    let knn = kfold_cv(&m, &ModelSpec::Knn { k: 3 }, 10, 21).map_err(|e| e.to_string())?;
    let mlp =
        kfold_cv(&m, &ModelSpec::Mlp(MlpParams::default()), 10, 21).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let line = format!(
        "{} rows; KNN(k=3) {:.3}, MLP {:.3} (10-fold CV); {secs:.0} s",
        m.n_rows(),
        knn.mean_accuracy,
        mlp.mean_accuracy
    );
    check(
        knn.mean_accuracy >= 0.85 && mlp.mean_accuracy >= 0.80 && secs <= 300.0,
        line.clone(),
    )?;
    Ok(line)
}

fn zscore(v: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    v.iter().map(|x| (x - mean) / sd).collect()
}

fn regression_e2e() -> Outcome {
    let spec = CohortSpec::new(Platform::Desktop, vec![Condition::HeadRoll20], 20);
    let sessions = synth_cohort(&spec, 22).map_err(|e| e.to_string())?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in &sessions {
        let errors = compute_errors(s).map_err(|e| e.to_string())?;
        for ((gaze, _), err) in session_angles(s)
            .map_err(|e| e.to_string())?
            .iter()
            .zip(&errors.frontal_err)
        {
            x.push(vec![gaze.theta_gaze, gaze.theta_yaw, gaze.theta_pitch]);
            y.push(*err);
        }
    }
    let split = gazelab_core::features::shuffle_split_indices(&vec![0; y.len()], 1, 0.2, 23)
        .map_err(|e| e.to_string())?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|i| x[*i].clone()).collect(),
            idx.iter().map(|i| y[*i]).collect(),
        )
    };
    let (xtr, ytr) = pick(&split.train);
    let (xte, yte) = pick(&split.test);

    // standardize inputs and target with training statistics
    let cols: Vec<(f64, f64)> = (0..3)
        .map(|j| {
            let c: Vec<f64> = xtr.iter().map(|r| r[j]).collect();
            (stats::mean(&c), stats::population_sd(&c))
        })
        .collect();
    let (ym, ys) = (stats::mean(&ytr), stats::population_sd(&ytr));
    let zx = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| (0..3).map(|j| (r[j] - cols[j].0) / cols[j].1).collect())
            .collect()
    };
    let (xtr_z, xte_z) = (zx(&xtr), zx(&xte));
    let (ytr_z, yte_z) = (zscore(&ytr, ym, ys), zscore(&yte, ym, ys));

    let penalty = Penalty::elastic_net_per_sample(0.5, 0.5, xtr_z.len());
    let model = linear_fit(&xtr_z, &ytr_z, penalty, &LinearOptions::default())
        .map_err(|e| e.to_string())?;
    let pred = model.predict(&xte_z).map_err(|e| e.to_string())?;
    let model_rmse = rmse(&pred, &yte_z).map_err(|e| e.to_string())?;
    let base_rmse =
        rmse(&vec![stats::mean(&ytr_z); yte_z.len()], &yte_z).map_err(|e| e.to_string())?;
    let line = format!(
        "intercept {:.1e}; held-out RMSE {model_rmse:.4} vs mean baseline {base_rmse:.4} (standardized units)",
        model.intercept
    );
    check(
        model.intercept.abs() < 1e-10 && model_rmse <= base_rmse,
        line.clone(),
    )?;
    Ok(line)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("geometry", geometry),
        ("cleaning", cleaning),
        ("kde", kde_check),
        ("augmentation", augmentation),
        ("features", features),
        ("tsne", tsne_check),
        ("models", models),
        ("evaluation", evaluation),
        ("classification end-to-end", classification_e2e),
        ("regression end-to-end", regression_e2e),
    ];
    // numeric arguments select criteria, e.g. `cargo test --test acceptance -- 2 8`
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("SKIP  11 published-dataset reproduction: needs the external recorded dataset, not available offline");
    println!("{} of {ran} mandatory criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
