//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

#![allow(clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saltrk::evalkit::{
    format_results, overlap, precision_curve, success_curve, synth_sequence, SynthConfig, PRECISION_MAX_ERROR,
};
use saltrk::feature_net::{presets, Layer, Network, NetworkSpec, Shape, WeightStore};
use saltrk::localization::{likelihood_map, posterior_and_map, PosteriorGrid};
use saltrk::online_svm::SvmModel;
use saltrk::saliency::aggregate;
use saltrk::segmentation::{grabcut, seeds_from_saliency, FlowNetwork};
use saltrk::{BBox, Grid, Image, TrackerConfig, TrackerSession};
use saltrk_oracles::{brute_force_min_cut, central_difference, max_abs_aggregate, naive_likelihood, smo};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn svm_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let ys = xs
        .iter()
        .map(|x| {
            let s: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    (xs, ys)
}

fn batch_decision(xs: &[Vec<f64>], ys: &[f64], alpha: &[f64], bias: f64, x: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(alpha)
        .map(|((xi, yi), ai)| ai * yi * xi.iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
        .sum::<f64>()
        + bias
}

fn svm_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut worst_obj, mut worst_kkt, mut sign_errors) = (0.0f64, 0.0f64, 0);
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=8);
        let c = [0.1, 1.0, 10.0][case % 3];
        let (xs, ys) = svm_dataset(&mut rng, n, d);
        let mut m = SvmModel::new(c).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            m.learn_one(x, y).unwrap();
            worst_kkt = worst_kkt.max(m.kkt_violation());
        }
        let batch = smo(&xs, &ys, c, 1e-12);
        worst_obj = worst_obj.max(rel(m.dual_objective(), batch.objective));
        for x in &xs {
            let a = m.predict(x).unwrap();
            let b = batch_decision(&xs, &ys, &batch.alpha, batch.bias, x);
            if a.signum() != b.signum() {
                sign_errors += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_obj <= 1e-6 && worst_kkt < 1e-6 && sign_errors == 0 && elapsed < Duration::from_secs(30),
        format!(
            "100 datasets; max objective rel err {worst_obj:.1e}, max KKT residual {worst_kkt:.1e}, \
             {sign_errors} sign disagreements, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn decremental_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    let mut removed_total = 0;
    for case in 0..50 {
        let n = rng.random_range(10..=50);
        let d = rng.random_range(1..=8);
        let c = [0.1, 1.0, 10.0][case % 3];
        let (xs, ys) = svm_dataset(&mut rng, n, d);
        let mut m = SvmModel::new(c).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            m.learn_one(x, y).unwrap();
        }
        let budget = rng.random_range(1..=m.support_count().max(1));
        removed_total += m.prune_to_budget(budget).unwrap();
        let sx: Vec<Vec<f64>> = (0..m.len()).map(|i| m.feature(i).to_vec()).collect();
        let sy: Vec<f64> = (0..m.len()).map(|i| m.label(i)).collect();
        let batch = smo(&sx, &sy, c, 1e-12);
        worst = worst.max(rel(m.dual_objective(), batch.objective));
    }
    outcome(
        worst <= 1e-6,
        format!("50 cases, {removed_total} examples unlearned; max objective rel err {worst:.1e}"),
    )
}

fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let input = Shape::new(16, 16, 3);
    let mut layers = Vec::new();
    let mut shape = input;
    for _ in 0..rng.random_range(1..=3) {
        let k = rng.random_range(1..=3).min(shape.h);
        let stride = if shape.h >= 8 && rng.random_bool(0.3) { 2 } else { 1 };
        let conv = Layer::Conv {
            kh: k,
            kw: k,
            in_channels: shape.c,
            out_channels: rng.random_range(2..=5),
            stride,
            padding: rng.random_range(0..=1),
        };
        shape = conv.output_shape(shape).unwrap();
        layers.push(conv);
        layers.push(Layer::Relu);
        if shape.h >= 4 && rng.random_bool(0.5) {
            let pool = Layer::MaxPool { window: 2, stride: 2 };
            shape = pool.output_shape(shape).unwrap();
            layers.push(pool);
        }
    }
    layers.push(Layer::FullyConnected {
        in_dim: shape.len(),
        out_dim: rng.random_range(3..=8),
    });
    let spec = NetworkSpec::new(input, layers).unwrap();
    let flat: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let weights = WeightStore::from_flat(&spec, &flat).unwrap();
    Network::new(spec, weights).unwrap()
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut short = 0;
    for _ in 0..20 {
        let net = random_network(&mut rng);
        let x: Vec<f64> = (0..net.input_shape().len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let g: Vec<f64> = (0..net.feature_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = net.forward_raw(&x).unwrap();
        let grad = net.backward_to_input(&cache, &g).unwrap();
        let pattern = cache.activation_pattern(net.spec());
        let f = |p: &[f64]| net.forward_raw(p).unwrap().0.dot(&g);
        let mut done = 0;
        let mut attempts = 0;
        // Coordinates whose perturbation crosses a ReLU or pooling switch are redrawn.
        while done < 100 && attempts < 10_000 {
            attempts += 1;
            let i = rng.random_range(0..x.len());
            let smooth = [h, -h].iter().all(|&d| {
                let mut p = x.clone();
                p[i] += d;
                net.forward_raw(&p).unwrap().1.activation_pattern(net.spec()) == pattern
            });
            if !smooth {
                continue;
            }
            let fd = central_difference(f, &x, i, h);
            let an = grad.values()[i];
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-6));
            done += 1;
        }
        checked += done;
        if done < 100 {
            short += 1;
        }
    }
    outcome(
        worst < 1e-3 && short == 0,
        format!("20 nets, {checked} coordinates; max rel err {worst:.1e}"),
    )
}

fn random_signed_grids(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Vec<Grid> {
    (0..n)
        .map(|_| Grid::from_fn(w, h, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-3.0..3.0) }))
        .collect()
}

fn saliency_aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let (mut mismatches, mut decreases) = (0, 0);
    for case in 0..100 {
        let (w, h) = (rng.random_range(1..48), rng.random_range(1..48));
        let n = rng.random_range(0..10);
        let mut grids = random_signed_grids(&mut rng, w, h, n);
        let got = aggregate(&grids, w, h, case).unwrap();
        let raw: Vec<Vec<f64>> = grids.iter().map(|g| g.as_slice().to_vec()).collect();
        if got.values.as_slice() != max_abs_aggregate(&raw, w * h).as_slice() {
            mismatches += 1;
        }
        grids.extend(random_signed_grids(&mut rng, w, h, 1));
        let more = aggregate(&grids, w, h, case).unwrap();
        if more.values.as_slice().iter().zip(got.values.as_slice()).any(|(a, b)| a < b) {
            decreases += 1;
        }
    }
    outcome(
        mismatches == 0 && decreases == 0,
        format!("100 cases; {mismatches} mismatches with brute force, {decreases} monotonicity violations"),
    )
}

fn filter_likelihood_posterior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let floor = 1e-12;
    let mut worst_lik = 0.0f64;
    for case in 0..50 {
        let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let (fw, fh) = (rng.random_range(1..=w.min(16)), rng.random_range(1..=h.min(16)));
        let lo = if case % 2 == 0 { 0.0 } else { -1.0 };
        let sal = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
        let filt = Grid::from_fn(fw, fh, |_, _| rng.random_range(lo..1.0));
        let got = likelihood_map(&filt, &sal, floor).unwrap();
        let want = naive_likelihood(filt.as_slice(), fw, fh, sal.as_slice(), w, h, floor);
        for (a, b) in got.as_slice().iter().zip(&want) {
            worst_lik = worst_lik.max((a - b).abs());
        }
    }

    // Posterior normalization over a full 200-frame tracking run.
    let cfg = SynthConfig { length: 200, ..SynthConfig::default() };
    let seq = synth_sequence(&cfg).unwrap();
    let (mut session, first) =
        TrackerSession::init(TrackerConfig::default(), presets::handcrafted(12), &seq.frames[0], seq.ground_truth[0])
            .unwrap();
    let mut worst_sum = (first.posterior.mass().sum() - 1.0).abs();
    for frame in &seq.frames[1..] {
        let out = session.step(frame).unwrap();
        worst_sum = worst_sum.max((out.posterior.mass().sum() - 1.0).abs());
    }

    let lik = PosteriorGrid::from_weights(Grid::from_fn(40, 30, |_, _| rng.random_range(0.0..1.0))).unwrap();
    let prior = PosteriorGrid::from_weights(Grid::from_fn(40, 30, |_, _| rng.random_range(0.0..1.0))).unwrap();
    let (p1, s1, _) = posterior_and_map(&PosteriorGrid::uniform(40, 30), lik.mass(), 4.0, 4.0).unwrap();
    let (lx, ly) = lik.mass().argmax();
    let uniform_prior =
        p1 == PosteriorGrid::from_weights(lik.mass().clone()).unwrap() && (s1.cx, s1.cy) == (lx as f64, ly as f64);
    let (p2, _, _) = posterior_and_map(&prior, &Grid::filled(40, 30, 1.0 / 1200.0), 4.0, 4.0).unwrap();
    let uniform_lik = p2 == prior;

    outcome(
        worst_lik <= 1e-9 && worst_sum <= 1e-9 && uniform_prior && uniform_lik,
        format!(
            "likelihood max abs err {worst_lik:.1e} on 50 grids; posterior |sum-1| <= {worst_sum:.1e} over 200 frames; \
             uniform prior identity {uniform_prior}, uniform likelihood identity {uniform_lik}"
        ),
    )
}

fn two_region_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (Image, BBox) {
    let fg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let (bw, bh) = (rng.random_range(8..w / 2), rng.random_range(8..h / 2));
    let (bx, by) = (rng.random_range(4..w - bw - 4), rng.random_range(4..h - bh - 4));
    let mut img = Image::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let inside = x >= bx && x < bx + bw && y >= by && y < by + bh;
            let base = if inside { fg } else { bg };
            for c in 0..3 {
                img.set(x, y, c, (base[c] + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0));
            }
        }
    }
    (img, BBox::new(bx as f64, by as f64, bw as f64, bh as f64))
}

fn maxflow_and_grabcut() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut flow_mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(0.35) {
                    edges.push((u, v, rng.random_range(0..=9) as f64));
                }
            }
        }
        let mut net = FlowNetwork::new(n, 0, n - 1);
        for &(u, v, c) in &edges {
            net.add_edge(u, v, c, 0.0);
        }
        if net.max_flow().value != brute_force_min_cut(n, 0, n - 1, &edges) {
            flow_mismatches += 1;
        }
    }
    let mut energy_increases = 0;
    for _ in 0..20 {
        let (img, target) = two_region_image(&mut rng, 56, 48);
        let (cx, cy) = target.center();
        let sal = Grid::from_fn(56, 48, |x, y| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            (-d / 3.0).exp() + rng.random_range(0.0..0.05)
        });
        let loose = BBox::new(target.x - 2.0, target.y - 2.0, target.w + 4.0, target.h + 4.0);
        let seg = grabcut(&img, &seeds_from_saliency(&sal, &loose, 0.7, 8), 5).unwrap();
        if seg.energy.windows(2).any(|p| p[1] > p[0] + 1e-9 * p[0].abs()) {
            energy_increases += 1;
        }
    }
    outcome(
        flow_mismatches == 0 && energy_increases == 0,
        format!("200 graphs, {flow_mismatches} max-flow mismatches; 20 images, {energy_increases} with rising energy"),
    )
}

fn synthetic_tracking() -> Outcome {
    let start = Instant::now();
    let seq = synth_sequence(&SynthConfig::default()).unwrap();
    let gt = &seq.ground_truth;
    let mut boxes = Vec::with_capacity(gt.len());
    let (mut session, first) =
        TrackerSession::init(TrackerConfig::default(), presets::handcrafted(12), &seq.frames[0], gt[0]).unwrap();
    boxes.push(first.record.state.bbox());
    for frame in &seq.frames[1..] {
        boxes.push(session.step(frame).unwrap().record.state.bbox());
    }
    let elapsed = start.elapsed();
    let auc = success_curve(&boxes, gt).unwrap().summary;
    let p20 = precision_curve(&boxes, gt, PRECISION_MAX_ERROR).unwrap().summary;
    let static_auc = success_curve(&vec![gt[0]; gt.len()], gt).unwrap().summary;
    outcome(
        auc >= 0.55 && p20 >= 0.90 && auc - static_auc >= 0.20 && elapsed < Duration::from_secs(120),
        format!(
            "AUC {auc:.3}, precision@20 {p20:.3}, static-box AUC {static_auc:.3}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn metric_correctness() -> Outcome {
    let o = overlap(&BBox::new(0.0, 0.0, 2.0, 2.0), &BBox::new(1.0, 1.0, 2.0, 2.0));
    let gt = vec![BBox::new(0.0, 0.0, 10.0, 10.0); 3];
    // IoUs 1, 0.5 and 0; center errors 0, 10/3 and 40.
    let pred = vec![gt[0], BBox::new(10.0 / 3.0, 0.0, 10.0, 10.0), BBox::new(40.0, 0.0, 10.0, 10.0)];
    let s = success_curve(&pred, &gt).unwrap();
    let p = precision_curve(&pred, &gt, PRECISION_MAX_ERROR).unwrap();
    let success_ok = s.rate_at(0.0) == Some(2.0 / 3.0)
        && s.rate_at(0.45) == Some(2.0 / 3.0)
        && s.rate_at(0.5) == Some(1.0 / 3.0)
        && s.rate_at(0.95) == Some(1.0 / 3.0)
        && s.rate_at(1.0) == Some(0.0);
    let precision_ok = p.rate_at(3.0) == Some(1.0 / 3.0)
        && p.rate_at(4.0) == Some(2.0 / 3.0)
        && p.rate_at(39.0) == Some(2.0 / 3.0)
        && p.rate_at(40.0) == Some(1.0)
        && p.summary == 2.0 / 3.0;
    let identical = success_curve(&gt, &gt).unwrap().summary;
    outcome(
        o == 1.0 / 7.0 && success_ok && precision_ok && identical == 20.0 / 21.0,
        format!(
            "overlap {o} (1/7 = {}), hand-count success {success_ok}, precision {precision_ok}, identical AUC {identical}",
            1.0 / 7.0
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let bin = env!("CARGO_BIN_EXE_saltrk");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let synth = run(&["synth", "--out", seq.to_str().unwrap(), "--frames", "30", "--seed", "4"]);
    if !synth.status.success() {
        return outcome(false, format!("synth failed: {}", String::from_utf8_lossy(&synth.stderr)));
    }
    let net = format!("{},{}", seq.join("net.manifest").display(), seq.join("net.weights").display());
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&[
            "track",
            "--sequence",
            seq.to_str().unwrap(),
            "--net",
            &net,
            "--init",
            "10,10,12,12",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "17",
        ]);
        if !o.status.success() {
            return outcome(false, format!("track failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        outputs.push(std::fs::read(&out).unwrap());
    }
    let rows = String::from_utf8_lossy(&outputs[0]).lines().count();
    let well_formed = format_results(&saltrk::evalkit::parse_results(&String::from_utf8_lossy(&outputs[0])).unwrap())
        .lines()
        .count()
        == rows;
    outcome(
        outputs[0] == outputs[1] && rows == 30 && well_formed,
        format!("two `track` runs with --seed 17: {} bytes each, identical {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("SVM oracle equivalence", svm_oracle_equivalence),
        ("decremental correctness", decremental_correctness),
        ("gradient fidelity", gradient_fidelity),
        ("saliency aggregation", saliency_aggregation),
        ("filter/likelihood/posterior", filter_likelihood_posterior),
        ("max-flow exactness and GrabCut energy", maxflow_and_grabcut),
        ("synthetic end-to-end tracking", synthetic_tracking),
        ("metric correctness", metric_correctness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!("criterion {} {name}: {} ({})", i + 1, if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
