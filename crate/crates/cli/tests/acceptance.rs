//! Acceptance suite: nine numbered criteria covering the full pipeline —
//! gradient correctness, generation label algebra, byte-level
//! determinism, desk-scale training quality, baseline comparisons,
//! histogram structure, and preprocessing semantics. Every criterion
//! prints one pass/fail line; the test fails if any criterion does.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines on success.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use chrseg_core::baselines::{
    enumerate_pairings, find_remarkable_points, fit_threshold, geometric_resolve,
    polygonal_approx, run_threshold, score_merged, trace_contour, DEFAULT_APPROX_EPSILON,
};
use chrseg_core::datagen::{
    build_phantom_set, compose_pair, generate_dataset, place, read_dataset, ChromoImage,
    GenConfig, PhantomParams,
};
use chrseg_core::evaluation::{evaluate_set, intensity_histogram, merge_chromosome_classes};
use chrseg_core::network::{
    backward, forward, init_params, inverse_frequency_weights, predict_dataset, train, NetConfig,
    TrainConfig,
};
use chrseg_core::preprocess::{clean_dataset, crop_dataset, fix_label4, remove_artifacts, split,
    SplitSpec};
use chrseg_core::rng::{seeded_rng, splitmix64};
use chrseg_core::tensor::gradcheck::{max_rel_err, numeric_gradient, DEFAULT_STEP, DEFAULT_TOL};
use chrseg_core::tensor::ops::{
    concat_channels, conv2d_backward, conv2d_forward, maxpool2x2_backward, maxpool2x2_forward,
    relu_backward, relu_forward, softmax_cross_entropy, split_channels, upsample2x_backward,
    upsample2x_nearest,
};
use chrseg_core::tensor::{ConvKernel, Dims4, Tensor4};
use chrseg_core::{Dataset, GrayImage, LabelMap, Mask};

struct Outcome {
    criterion: usize,
    status: &'static str,
    detail: String,
}

fn pass(criterion: usize, detail: String) -> Outcome {
    Outcome { criterion, status: "PASS", detail }
}

fn fail(criterion: usize, detail: String) -> Outcome {
    Outcome { criterion, status: "FAIL", detail }
}

fn gated(criterion: usize, ok: bool, detail: String) -> Outcome {
    if ok {
        pass(criterion, detail)
    } else {
        fail(criterion, detail)
    }
}

// ------------------------------------------------------------------
// Criterion 1: analytic gradients vs central finite differences, f64,
// ≥ 20 randomized instances across every differentiable op plus a
// depth-1 end-to-end model, 1e-4 relative, under a minute.
// ------------------------------------------------------------------

fn random_tensor(r: &mut impl Rng, d: Dims4) -> Tensor4<f64> {
    let data = (0..d.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    Tensor4::from_vec(d, data).unwrap()
}

fn random_kernel(r: &mut impl Rng, out_c: usize, in_c: usize, k: usize) -> ConvKernel<f64> {
    let weights = (0..out_c * in_c * k * k).map(|_| r.gen_range(-1.0..1.0)).collect();
    let bias = (0..out_c).map(|_| r.gen_range(-1.0..1.0)).collect();
    ConvKernel::from_parts(out_c, in_c, k, k, weights, bias).unwrap()
}

/// Scalar objective for vector-valued ops: sum of out ⊙ upstream, whose
/// gradient w.r.t. the op input is exactly the op's backward pass.
fn weighted_sum(out: &Tensor4<f64>, upstream: &Tensor4<f64>) -> f64 {
    out.data().iter().zip(upstream.data()).map(|(&o, &u)| o * u).sum()
}

fn gradient_instances() -> (usize, f64) {
    let mut worst = 0.0f64;
    let mut instances = 0;
    let mut check = |err: f64| {
        worst = worst.max(err);
        instances += 1;
    };

    // conv2d: input, weight, and bias gradients per instance.
    let mut r = seeded_rng(101);
    for _ in 0..6 {
        let d = Dims4::new(r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(4..=6), r.gen_range(4..=6));
        let oc = r.gen_range(1..=2);
        let input = random_tensor(&mut r, d);
        let kernel = random_kernel(&mut r, oc, d.c, 3);
        let upstream = random_tensor(&mut r, Dims4::new(d.n, oc, d.h, d.w));
        let (gi, gk) = conv2d_backward(&input, &kernel, &upstream).unwrap();
        let num_gi = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(d, xs.to_vec()).unwrap();
                weighted_sum(&conv2d_forward(&t, &kernel).unwrap(), &upstream)
            },
            input.data(),
            DEFAULT_STEP,
        );
        let num_gw = numeric_gradient(
            |ws| {
                let k2 = ConvKernel::from_parts(oc, d.c, 3, 3, ws.to_vec(), kernel.bias.clone())
                    .unwrap();
                weighted_sum(&conv2d_forward(&input, &k2).unwrap(), &upstream)
            },
            &kernel.weights,
            DEFAULT_STEP,
        );
        let num_gb = numeric_gradient(
            |bs| {
                let k2 = ConvKernel::from_parts(oc, d.c, 3, 3, kernel.weights.clone(), bs.to_vec())
                    .unwrap();
                weighted_sum(&conv2d_forward(&input, &k2).unwrap(), &upstream)
            },
            &kernel.bias,
            DEFAULT_STEP,
        );
        let err = max_rel_err(gi.data(), &num_gi)
            .max(max_rel_err(&gk.weights, &num_gw))
            .max(max_rel_err(&gk.bias, &num_gb));
        check(err);
    }

    // relu
    let mut r = seeded_rng(102);
    for _ in 0..3 {
        let d = Dims4::new(1, r.gen_range(1..=3), r.gen_range(3..=6), r.gen_range(3..=6));
        let input = random_tensor(&mut r, d);
        let upstream = random_tensor(&mut r, d);
        let gi = relu_backward(&input, &upstream).unwrap();
        let num = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(d, xs.to_vec()).unwrap();
                weighted_sum(&relu_forward(&t), &upstream)
            },
            input.data(),
            DEFAULT_STEP,
        );
        check(max_rel_err(gi.data(), &num));
    }

    // maxpool 2x2
    let mut r = seeded_rng(103);
    for _ in 0..3 {
        let d = Dims4::new(1, r.gen_range(1..=2), 2 * r.gen_range(2..=3), 2 * r.gen_range(2..=3));
        let input = random_tensor(&mut r, d);
        let (out, idx) = maxpool2x2_forward(&input).unwrap();
        let upstream = random_tensor(&mut r, out.dims());
        let gi = maxpool2x2_backward(&upstream, &idx).unwrap();
        let num = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(d, xs.to_vec()).unwrap();
                weighted_sum(&maxpool2x2_forward(&t).unwrap().0, &upstream)
            },
            input.data(),
            DEFAULT_STEP,
        );
        check(max_rel_err(gi.data(), &num));
    }

    // nearest-neighbor 2x upsample
    let mut r = seeded_rng(104);
    for _ in 0..3 {
        let d = Dims4::new(1, r.gen_range(1..=2), r.gen_range(2..=4), r.gen_range(2..=4));
        let input = random_tensor(&mut r, d);
        let upstream = random_tensor(&mut r, Dims4::new(d.n, d.c, d.h * 2, d.w * 2));
        let gi = upsample2x_backward(&upstream).unwrap();
        let num = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(d, xs.to_vec()).unwrap();
                weighted_sum(&upsample2x_nearest(&t), &upstream)
            },
            input.data(),
            DEFAULT_STEP,
        );
        check(max_rel_err(gi.data(), &num));
    }

    // channel concat (backward = split back into the two halves)
    let mut r = seeded_rng(105);
    for _ in 0..2 {
        let ca = r.gen_range(1..=2);
        let cb = r.gen_range(1..=2);
        let (h, w) = (r.gen_range(2..=4), r.gen_range(2..=4));
        let a = random_tensor(&mut r, Dims4::new(1, ca, h, w));
        let b = random_tensor(&mut r, Dims4::new(1, cb, h, w));
        let upstream = random_tensor(&mut r, Dims4::new(1, ca + cb, h, w));
        let (ga, gb) = split_channels(&upstream, ca).unwrap();
        let num_a = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(a.dims(), xs.to_vec()).unwrap();
                weighted_sum(&concat_channels(&t, &b).unwrap(), &upstream)
            },
            a.data(),
            DEFAULT_STEP,
        );
        let num_b = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(b.dims(), xs.to_vec()).unwrap();
                weighted_sum(&concat_channels(&a, &t).unwrap(), &upstream)
            },
            b.data(),
            DEFAULT_STEP,
        );
        check(max_rel_err(ga.data(), &num_a).max(max_rel_err(gb.data(), &num_b)));
    }

    // softmax cross-entropy w.r.t. logits, with class weights
    let mut r = seeded_rng(106);
    for _ in 0..3 {
        let d = Dims4::new(1, 4, r.gen_range(2..=4), r.gen_range(2..=4));
        let logits = random_tensor(&mut r, d);
        let labels: Vec<u8> = (0..d.h * d.w).map(|_| r.gen_range(0..4)).collect();
        let weights = [0.5, 1.5, 1.0, 2.0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels, Some(&weights[..])).unwrap();
        let num = numeric_gradient(
            |xs| {
                let t = Tensor4::from_vec(d, xs.to_vec()).unwrap();
                softmax_cross_entropy(&t, &labels, Some(&weights[..])).unwrap().0
            },
            logits.data(),
            DEFAULT_STEP,
        );
        check(max_rel_err(grad.data(), &num));
    }

    // depth-1 end-to-end model: all parameter gradients at once.
    for seed in [71u64, 73] {
        let cfg = NetConfig { depth: 1, base_filters: 2, ..NetConfig::default() };
        let mut params = init_params::<f64>(&cfg, &mut seeded_rng(seed)).unwrap();
        // Zero biases put dead receptive fields exactly on the ReLU kink;
        // nudge them so the check runs at a differentiable point.
        let mut r = seeded_rng(seed + 1);
        for k in params.kernels_mut() {
            for b in &mut k.bias {
                *b = r.gen_range(0.05..0.15);
            }
        }
        let batch = random_tensor(&mut r, Dims4::new(1, 1, 8, 8));
        let labels: Vec<u8> = (0..64).map(|_| r.gen_range(0..4)).collect();
        let weights = [0.7, 1.3, 1.0, 1.1];
        let (_, grads) = backward(&params, &batch, &labels, Some(&weights[..])).unwrap();
        let analytic: Vec<f64> = grads
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias).copied().collect::<Vec<_>>())
            .collect();
        let flat = params.flatten();
        let num = numeric_gradient(
            |p| {
                let mut m = params.clone();
                m.load_flat(p).unwrap();
                let logits = forward(&m, &batch).unwrap();
                softmax_cross_entropy(&logits, &labels, Some(&weights[..])).unwrap().0
            },
            &flat,
            1e-5,
        );
        check(max_rel_err(&analytic, &num));
    }

    (instances, worst)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (instances, worst) = gradient_instances();
    let secs = start.elapsed().as_secs_f64();
    gated(
        1,
        instances >= 20 && worst < DEFAULT_TOL && secs < 60.0,
        format!(
            "gradients: {instances} randomized instances, max rel err {worst:.2e} \
             (tol {DEFAULT_TOL:.0e}), {secs:.1}s (budget 60s)"
        ),
    )
}

// ------------------------------------------------------------------
// Criterion 2: label algebra on 500 generated samples, checked against
// masks re-derived from each sample's recorded transform.
// ------------------------------------------------------------------

/// Pure integer translation of a mask, dropping pixels shifted off the
/// canvas — the same clipping the generator applies.
fn shift_mask(m: &Mask, dx: i32, dy: i32) -> Mask {
    let mut out = Mask::zeros(m.h, m.w);
    for y in 0..m.h {
        let sy = y as i64 - dy as i64;
        if sy < 0 || sy >= m.h as i64 {
            continue;
        }
        for x in 0..m.w {
            let sx = x as i64 - dx as i64;
            if sx >= 0 && sx < m.w as i64 && m.get(sy as usize, sx as usize) != 0 {
                out.set(y, x, 1);
            }
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let seed = 2024;
    let config = GenConfig::new(500, seed);
    let dataset = generate_dataset(&config).unwrap();
    if dataset.len() != 500 {
        return fail(2, format!("label algebra: expected 500 samples, got {}", dataset.len()));
    }

    // Re-derive each sample's two placed masks from its recorded
    // provenance, using the same source set the generator built.
    let params = PhantomParams {
        canvas_h: config.canvas_h,
        canvas_w: config.canvas_w,
        ..PhantomParams::default()
    };
    let sources = build_phantom_set(12, &params, splitmix64(seed));
    let by_id = |id: u32| -> &ChromoImage {
        sources.iter().find(|c| c.id == id).expect("meta references a generated source")
    };

    let mut violations = 0usize;
    for sample in &dataset.samples {
        let meta = sample.meta.as_ref().expect("generated samples carry provenance");
        let a = place(by_id(meta.pair.0), meta.angles.0, (0, 0), config.canvas_h, config.canvas_w)
            .unwrap();
        let b = place(by_id(meta.pair.1), meta.angles.1, (0, 0), config.canvas_h, config.canvas_w)
            .unwrap();
        let mask_a = shift_mask(&a.mask, meta.offsets.0 .0, meta.offsets.0 .1);
        let mask_b = shift_mask(&b.mask, meta.offsets.1 .0, meta.offsets.1 .1);

        if sample.label.count(3) < config.min_overlap {
            violations += 1;
        }
        for y in 0..config.canvas_h {
            for x in 0..config.canvas_w {
                let in_a = mask_a.get(y, x) != 0;
                let in_b = mask_b.get(y, x) != 0;
                let expected = match (in_a, in_b) {
                    (true, true) => 3,
                    (true, false) => 1,
                    (false, true) => 2,
                    (false, false) => 0,
                };
                if sample.label.get(y, x) != expected {
                    violations += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    gated(
        2,
        violations == 0 && secs < 60.0,
        format!("label algebra: 500 samples, {violations} violations, {secs:.1}s (budget 60s)"),
    )
}

// ------------------------------------------------------------------
// Criterion 3: byte-identical artifacts when the pipeline reruns with
// the same seeds, exercised through the installed binary.
// ------------------------------------------------------------------

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_chrseg"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn run_pipeline_once(dir: &Path) -> bool {
    let p = |name: &str| dir.join(name).display().to_string();
    run_cli(&["gen", "--n", "30", "--seed", "11", "--out", &p("d.chrseg")])
        && run_cli(&["clean", "--input", &p("d.chrseg"), "--out", &p("c.chrseg")])
        && run_cli(&["split", "--input", &p("c.chrseg"), "--out", &p("s"), "--seed", "11"])
        && run_cli(&[
            "train",
            "--train",
            &p("s/train.chrseg"),
            "--val",
            &p("s/val.chrseg"),
            "--out",
            &p("m.ckpt"),
            "--epochs",
            "2",
            "--seed",
            "11",
        ])
        && run_cli(&["eval", "--data", &p("s/test.chrseg"), "--model", &p("m.ckpt"), "--out", &p("r.json")])
}

fn criterion_3() -> Outcome {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    if !run_pipeline_once(t1.path()) || !run_pipeline_once(t2.path()) {
        return fail(3, "determinism: pipeline run failed".to_string());
    }
    let mut same = true;
    let mut diffs = Vec::new();
    for name in ["d.chrseg", "c.chrseg", "s/train.chrseg", "m.ckpt", "r.json"] {
        let a = std::fs::read(t1.path().join(name)).unwrap();
        let b = std::fs::read(t2.path().join(name)).unwrap();
        if a != b {
            same = false;
            diffs.push(name);
        }
    }
    gated(
        3,
        same,
        if same {
            "determinism: dataset, checkpoint, and report byte-identical across reruns"
                .to_string()
        } else {
            format!("determinism: artifacts differ across reruns: {diffs:?}")
        },
    )
}

// ------------------------------------------------------------------
// Criteria 4-6 share the desk-scale pipeline: 800 phantoms, 64/16/20,
// default depth-2 model.
// ------------------------------------------------------------------

struct DeskScale {
    cleaned: Dataset,
    train_set: Dataset,
    test_set: Dataset,
    test_preds: Vec<LabelMap>,
    outcome_4: Outcome,
}

fn desk_scale() -> DeskScale {
    let start = Instant::now();
    let seed = 42;
    let raw = generate_dataset(&GenConfig::new(800, seed)).unwrap();
    let cleaned = crop_dataset(&clean_dataset(&raw), 88, 88).unwrap();
    let (train_set, val_set, test_set) = split(&cleaned, &SplitSpec::new(seed)).unwrap();

    let net = NetConfig::default();
    let params = init_params::<f32>(&net, &mut seeded_rng(seed)).unwrap();
    let tcfg = TrainConfig {
        epochs: 24,
        class_weights: Some(inverse_frequency_weights(&train_set)),
        seed,
        ..TrainConfig::default()
    };
    let (params, _) = train(params, &train_set, &val_set, &tcfg).unwrap();

    let test_preds = predict_dataset(&params, &test_set, tcfg.batch_size).unwrap();
    let truths: Vec<LabelMap> = test_set.samples.iter().map(|s| s.label.clone()).collect();
    let report = evaluate_set(&test_preds, &truths).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let iou = |k: usize| report.per_class_global[k].unwrap_or(0.0);
    let ok = iou(3) >= 0.70 && iou(1) >= 0.60 && iou(2) >= 0.60 && secs < 1800.0;
    let outcome_4 = gated(
        4,
        ok,
        format!(
            "desk-scale training: test IOU bg {:.3} / a {:.3} / b {:.3} / overlap {:.3} \
             (gates 0.60/0.60/0.70), {:.0}s (budget 1800s)",
            iou(0),
            iou(1),
            iou(2),
            iou(3),
            secs
        ),
    );
    DeskScale { cleaned, train_set, test_set, test_preds, outcome_4 }
}

fn criterion_5(desk: &DeskScale) -> Outcome {
    let cnn_merged: Vec<LabelMap> =
        desk.test_preds.iter().map(merge_chromosome_classes).collect();
    let cnn = score_merged(&cnn_merged, &desk.test_set, None).unwrap();
    let model = fit_threshold(&desk.train_set).unwrap();
    let thr_preds = run_threshold(&model, &desk.test_set);
    let thr = score_merged(&thr_preds, &desk.test_set, None).unwrap();

    let cnn_iou = cnn.iou.per_class_global[3].unwrap_or(0.0);
    let thr_iou = thr.iou.per_class_global[3].unwrap_or(0.0);
    let margin = cnn_iou - thr_iou;
    gated(
        5,
        margin >= 0.10,
        format!(
            "merged-task overlap IOU: cnn {cnn_iou:.3} vs threshold {thr_iou:.3} \
             (margin {margin:+.3}, gate +0.10)"
        ),
    )
}

fn criterion_6(desk: &DeskScale) -> Outcome {
    let hist = intensity_histogram(&desk.cleaned);
    let mass = hist.overlap_mass_in_single_support();
    gated(
        6,
        mass >= 0.10,
        format!(
            "histograms: {:.1}% of overlap-class mass inside single-class support (gate 10%)",
            mass * 100.0
        ),
    )
}

// ------------------------------------------------------------------
// Criterion 7: geometric baseline on 50 synthetic two-rectangle
// crosses with exact intersection ground truth.
// ------------------------------------------------------------------

fn bar_chromo(h: usize, w: usize, rect: (usize, usize, usize, usize), v: f32, id: u32) -> ChromoImage {
    let (y0, x0, y1, x1) = rect;
    let mut gray = GrayImage::zeros(h, w);
    let mut mask = Mask::zeros(h, w);
    for y in y0..=y1 {
        for x in x0..=x1 {
            mask.set(y, x, 1);
            gray.set(y, x, v);
        }
    }
    ChromoImage::from_parts(gray, mask, id).unwrap()
}

fn cross_dataset(n: usize, seed: u64) -> Dataset {
    let (h, w) = (64, 64);
    let mut r = seeded_rng(seed);
    let mut ds = Dataset::new(h, w);
    for i in 0..n {
        let ta = r.gen_range(7..=13);
        let tb = r.gen_range(7..=13);
        let ya = r.gen_range(18..=(34 - ta));
        let xb = r.gen_range(18..=(34 - tb));
        let va = r.gen_range(0.5..0.9);
        let vb = r.gen_range(0.5..0.9);
        let a = bar_chromo(h, w, (ya, 6, ya + ta, 57), va, (2 * i) as u32);
        let b = bar_chromo(h, w, (6, xb, 57, xb + tb), vb, (2 * i + 1) as u32);
        let sample = compose_pair(&a, &b, 1).unwrap();
        ds.push(sample).unwrap();
    }
    ds
}

fn matching_covers_all(pairing: &[(usize, usize); 2], ids: [usize; 4]) -> bool {
    let mut seen = [false; 4];
    for &(a, b) in pairing {
        for v in [a, b] {
            let Some(k) = ids.iter().position(|&id| id == v) else { return false };
            if seen[k] {
                return false;
            }
            seen[k] = true;
        }
    }
    seen.iter().all(|&s| s)
}

fn criterion_7() -> Outcome {
    let crosses = cross_dataset(50, 7);
    let model = fit_threshold(&crosses).unwrap();

    let mut applicable_preds = Vec::new();
    let mut applicable_truths = Vec::new();
    let mut pairing_failures = 0usize;
    for (i, s) in crosses.samples.iter().enumerate() {
        let out = geometric_resolve(&s.image, &model, DEFAULT_APPROX_EPSILON);
        if out.applicable {
            applicable_preds.push(out.prediction);
            applicable_truths.push(merge_chromosome_classes(&s.label));
        }

        // Pairing enumeration on this cross's four arm ids: exactly 3
        // mutually exclusive perfect matchings.
        let ids = [4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3];
        let pairings = enumerate_pairings(ids);
        let all_cover = pairings.iter().all(|p| matching_covers_all(p, ids));
        let distinct = pairings[0] != pairings[1]
            && pairings[0] != pairings[2]
            && pairings[1] != pairings[2];
        if pairings.len() != 3 || !all_cover || !distinct {
            pairing_failures += 1;
        }

        // Cross-check the arm-point extraction the resolver builds on: a
        // clean cross silhouette exposes four reflex vertices.
        let mut mask = Mask::zeros(s.image.h, s.image.w);
        for y in 0..s.image.h {
            for x in 0..s.image.w {
                if s.image.get(y, x) > model.t_low {
                    mask.set(y, x, 1);
                }
            }
        }
        let contour = trace_contour(&mask).unwrap();
        let approx = polygonal_approx(&contour, DEFAULT_APPROX_EPSILON);
        let reflex = find_remarkable_points(&approx);
        if reflex.len() != 4 {
            pairing_failures += 1;
        }
    }

    let applicable = applicable_preds.len();
    if applicable == 0 {
        return fail(7, "geometric baseline: no applicable crosses out of 50".to_string());
    }
    let report = evaluate_set(&applicable_preds, &applicable_truths).unwrap();
    let iou = report.per_class_global[3].unwrap_or(0.0);
    gated(
        7,
        iou >= 0.70 && pairing_failures == 0 && applicable > 0,
        format!(
            "geometric baseline: overlap IOU {iou:.3} on {applicable}/50 applicable crosses \
             (gate 0.70); pairing checks {} failures",
            pairing_failures
        ),
    )
}

// ------------------------------------------------------------------
// Criterion 8: cleaning semantics vs a brute-force neighbor oracle on
// 100 random label maps.
// ------------------------------------------------------------------

fn nonzero_neighbors(label: &LabelMap, y: usize, x: usize) -> usize {
    let mut count = 0;
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            if dy == 0 && dx == 0 {
                continue;
            }
            let (ny, nx) = (y as i32 + dy, x as i32 + dx);
            if ny >= 0
                && nx >= 0
                && (ny as usize) < label.h
                && (nx as usize) < label.w
                && label.get(ny as usize, nx as usize) != 0
            {
                count += 1;
            }
        }
    }
    count
}

fn criterion_8() -> Outcome {
    let mut r = seeded_rng(808);
    let mut violations = 0usize;
    for trial in 0..100 {
        let (h, w) = (24, 24);
        // Half the maps dense, half sparse, so both isolated pixels and
        // solid interiors occur.
        let data: Vec<u8> = (0..h * w)
            .map(|_| {
                if trial % 2 == 0 {
                    r.gen_range(0..=4)
                } else if r.gen_bool(0.15) {
                    r.gen_range(1..=4)
                } else {
                    0
                }
            })
            .collect();
        let map = LabelMap::from_vec(h, w, data).unwrap();

        let fixed = fix_label4(&map);
        if fixed.data.contains(&4) {
            violations += 1;
        }

        let cleaned = remove_artifacts(&fixed);
        for y in 0..h {
            for x in 0..w {
                let v = fixed.get(y, x);
                let n = nonzero_neighbors(&fixed, y, x);
                // Isolated single-chromosome pixels must go.
                if (v == 1 || v == 2) && n == 0 && cleaned.get(y, x) != 0 {
                    violations += 1;
                }
                // Well-supported pixels must survive unchanged.
                if n >= 3 && cleaned.get(y, x) != v {
                    violations += 1;
                }
            }
        }
    }
    gated(8, violations == 0, format!("preprocessing oracle: 100 random maps, {violations} violations"))
}

// ------------------------------------------------------------------
// Criterion 9: optional full reproduction on externally converted real
// data. Report-only: prints the measured IOUs against the published
// bands without gating the suite.
// ------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let Ok(path) = std::env::var("CHRSEG_REAL_DATA") else {
        return Outcome {
            criterion: 9,
            status: "SKIP",
            detail: "full reproduction: set CHRSEG_REAL_DATA=<converted .chrseg file> to run \
                     (report-only)"
                .to_string(),
        };
    };
    let Ok(raw) = read_dataset(Path::new(&path)) else {
        return Outcome {
            criterion: 9,
            status: "SKIP",
            detail: format!("full reproduction: could not read {path}"),
        };
    };
    let cleaned = match crop_dataset(&clean_dataset(&raw), 88, 88) {
        Ok(d) => d,
        Err(e) => {
            return Outcome {
                criterion: 9,
                status: "SKIP",
                detail: format!("full reproduction: preprocessing failed: {e}"),
            }
        }
    };
    let (train_set, val_set, test_set) = split(&cleaned, &SplitSpec::new(0)).unwrap();
    let params = init_params::<f32>(&NetConfig::default(), &mut seeded_rng(0)).unwrap();
    let tcfg = TrainConfig {
        epochs: 50,
        class_weights: Some(inverse_frequency_weights(&train_set)),
        ..TrainConfig::default()
    };
    let (params, _) = train(params, &train_set, &val_set, &tcfg).unwrap();
    let preds = predict_dataset(&params, &test_set, tcfg.batch_size).unwrap();
    let truths: Vec<LabelMap> = test_set.samples.iter().map(|s| s.label.clone()).collect();
    let report = evaluate_set(&preds, &truths).unwrap();
    let iou = |k: usize| report.per_class_global[k].unwrap_or(0.0);
    let mut detail = format!(
        "full reproduction: test IOU a {:.3} / b {:.3} / overlap {:.3}; published 0.882-0.944 \
         for chromosomes, 0.947 overlap (±0.05 band",
        iou(1),
        iou(2),
        iou(3)
    );
    let in_band = iou(3) >= 0.947 - 0.05
        && (0.882 - 0.05..=0.944 + 0.05).contains(&iou(1))
        && (0.882 - 0.05..=0.944 + 0.05).contains(&iou(2));
    let _ = write!(detail, "{})", if in_band { ", within" } else { ", outside" });
    Outcome { criterion: 9, status: "REPORT", detail }
}

#[test]
fn acceptance_criteria() {
    // Cheap criteria first; the desk-scale pipeline (4-6) runs last.
    let mut outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_3(),
    ];
    let desk = desk_scale();
    outcomes.push(criterion_5(&desk));
    outcomes.push(criterion_6(&desk));
    outcomes.push(desk.outcome_4);
    outcomes.sort_by_key(|o| o.criterion);

    let mut failed = 0;
    for o in &outcomes {
        println!("criterion {} {} — {}", o.criterion, o.status, o.detail);
        if o.status == "FAIL" {
            failed += 1;
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed (see lines above)");
}
