//! Shared oracles and harnesses for the integration and acceptance tests.
#![allow(dead_code)]

use tama_core::encoder::{encode_snapshot, init_encoder, EncoderConfig, EncoderInput, LatentDist};
use tama_core::numerics::gradcheck::{check_params, GradCheckReport};
use tama_core::numerics::{Ew, Mat, ParamStore, Rng, Tape, Var};
use tama_core::tama::{forward_window, gru_cell, memory_update, GruParams, TamaParams, Variant};
use tama_core::training::{loss_total, symmetrize_target};
use tama_core::Result;

pub const FD_STEP: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-7;

/// Uniform in `[-2, 2]`, kept at least 0.05 away from zero so kinks at the
/// origin stay out of reach of the finite-difference step.
pub fn rand_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let v = rng.uniform_in(-2.0, 2.0);
        if v.abs() < 0.05 {
            0.05_f64.copysign(v) + v
        } else {
            v
        }
    })
}

/// `Σ R ⊙ v` for a fixed random `R`, so every output entry matters.
fn weighted_sum(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.shape(v);
    let w = tape.constant(Mat::from_fn(r, c, {
        let mut rng = Rng::new(seed);
        move |_, _| rng.uniform_in(-1.0, 1.0)
    }));
    let p = tape.mul(v, w)?;
    tape.sum(p)
}

type Build = Box<dyn Fn(&ParamStore, &mut Tape) -> Result<Var>>;

/// Central finite-difference check of every differentiable tape operation
/// on random inputs over 5 or 6 nodes. Returns `(op, report)` pairs.
pub fn gradient_suite(seed: u64) -> Vec<(String, GradCheckReport)> {
    let mut rng = Rng::new(seed);
    let n = 5 + rng.below(2);
    let mut cases: Vec<(String, ParamStore, Build)> = Vec::new();

    let mut unary = |name: &str, kind: Ew, rng: &mut Rng| {
        let mut s = ParamStore::new();
        let a = s.add("a", rand_mat(n, 3, rng));
        let b: Build = Box::new(move |st, t| {
            let x = t.param(st, a);
            let y = t.ew(kind, x, None)?;
            weighted_sum(t, y, 1)
        });
        cases.push((name.into(), s, b));
    };
    for (name, kind) in [
        ("scale", Ew::Scale(-1.7)),
        ("sigmoid", Ew::Sigmoid),
        ("relu", Ew::Relu),
        ("tanh", Ew::Tanh),
        ("exp", Ew::Exp),
        ("neg", Ew::Neg),
    ] {
        unary(name, kind, &mut rng);
    }
    for (name, kind) in [("add", Ew::Add), ("sub", Ew::Sub), ("mul", Ew::Mul)] {
        let mut s = ParamStore::new();
        let a = s.add("a", rand_mat(n, 3, &mut rng));
        let b = s.add("b", rand_mat(n, 3, &mut rng));
        cases.push((
            name.into(),
            s,
            Box::new(move |st, t| {
                let (x, y) = (t.param(st, a), t.param(st, b));
                let o = t.ew(kind, x, Some(y))?;
                weighted_sum(t, o, 2)
            }),
        ));
    }

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, 4, &mut rng));
    let b = s.add("b", rand_mat(4, 3, &mut rng));
    cases.push((
        "matmul".into(),
        s,
        Box::new(move |st, t| {
            let (x, y) = (t.param(st, a), t.param(st, b));
            let o = t.matmul(x, y)?;
            weighted_sum(t, o, 3)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, 3, &mut rng));
    let k = s.add("k", Mat::scalar(1.3));
    let bias = s.add("bias", rand_mat(1, 3, &mut rng));
    cases.push((
        "affine/scale_by/add_row_bias".into(),
        s,
        Box::new(move |st, t| {
            let (x, kk, bb) = (t.param(st, a), t.param(st, k), t.param(st, bias));
            let o = t.affine(x, 0.7, -0.2)?;
            let o = t.scale_by(o, kk)?;
            let o = t.add_row_bias(o, bb)?;
            weighted_sum(t, o, 4)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", Mat::from_fn(n, 3, |_, _| rng.uniform_in(-0.9, 0.9)));
    cases.push((
        "clamp/transpose".into(),
        s,
        Box::new(move |st, t| {
            let x = t.param(st, a);
            let o = t.clamp(x, -1.0, 1.0)?;
            let o = t.transpose(o)?;
            weighted_sum(t, o, 5)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, 3, &mut rng));
    cases.push((
        "gram".into(),
        s,
        Box::new(move |st, t| {
            let x = t.param(st, a);
            let o = t.gram(x)?;
            weighted_sum(t, o, 6)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, 3, &mut rng));
    let sc = s.add("s", Mat::scalar(1.4));
    cases.push((
        "l2_normalize_rows".into(),
        s,
        Box::new(move |st, t| {
            let (x, ss) = (t.param(st, a), t.param(st, sc));
            let o = t.l2_normalize_rows(x, ss)?;
            weighted_sum(t, o, 7)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, n, &mut rng));
    let mut mask = Mat::from_fn(n, n, |_, _| if rng.bernoulli(0.6) { 1.0 } else { 0.0 });
    for i in 0..n {
        mask[(i, 0)] = 0.0;
    }
    cases.push((
        "masked_softmax_columns".into(),
        s,
        Box::new(move |st, t| {
            let x = t.param(st, a);
            let o = t.masked_softmax_columns(x, &mask)?;
            weighted_sum(t, o, 8)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("a", rand_mat(n, 3, &mut rng));
    let b = s.add("b", rand_mat(n, 2, &mut rng));
    let c = s.add("c", rand_mat(n, 5, &mut rng));
    cases.push((
        "concat_cols/mean_stack".into(),
        s,
        Box::new(move |st, t| {
            let (x, y, z) = (t.param(st, a), t.param(st, b), t.param(st, c));
            let xy = t.concat_cols(x, y)?;
            let o = t.mean_stack(&[xy, z, xy])?;
            weighted_sum(t, o, 9)
        }),
    ));

    let mut s = ParamStore::new();
    let a = s.add("logits", rand_mat(n, n, &mut rng));
    let targets = Mat::from_fn(n, n, |_, _| if rng.bernoulli(0.3) { 1.0 } else { 0.0 });
    let (sym, bce_mask) = symmetrize_target(&targets);
    cases.push((
        "bce_with_logits".into(),
        s,
        Box::new(move |st, t| {
            let x = t.param(st, a);
            t.bce_with_logits(x, &sym, &bce_mask, 2.5)
        }),
    ));

    let mut s = ParamStore::new();
    let gru = GruParams::init(&mut s, 3, &mut rng);
    let x0 = s.add("x", rand_mat(n, 3, &mut rng));
    let h0 = s.add("h", rand_mat(n, 3, &mut rng));
    cases.push((
        "gru_cell".into(),
        s,
        Box::new(move |st, t| {
            let (x, h) = (t.param(st, x0), t.param(st, h0));
            let h1 = gru_cell(t, st, &gru, x, h)?;
            let h2 = gru_cell(t, st, &gru, x, h1)?;
            weighted_sum(t, h2, 10)
        }),
    ));

    let mut s = ParamStore::new();
    let m = s.add("m", rand_mat(n, n, &mut rng));
    let ah = s.add("a_hat", rand_mat(n, n, &mut rng));
    let g = s.add("raw_gamma", Mat::scalar(0.9));
    cases.push((
        "memory_update".into(),
        s,
        Box::new(move |st, t| {
            let (mm, aa, gg) = (t.param(st, m), t.param(st, ah), t.param(st, g));
            let gamma = t.sigmoid(gg)?;
            let o = memory_update(t, mm, aa, gamma)?;
            weighted_sum(t, o, 11)
        }),
    ));

    let mut s = ParamStore::new();
    let mu = s.add("mu", rand_mat(n, 3, &mut rng));
    let ls = s.add("log_sigma", rand_mat(n, 3, &mut rng).scale(0.5));
    cases.push((
        "kl_divergence".into(),
        s,
        Box::new(move |st, t| {
            let dist = LatentDist {
                mu: t.param(st, mu),
                log_sigma: t.param(st, ls),
                z: t.param(st, mu),
            };
            tama_core::encoder::kl_divergence(t, &dist)
        }),
    ));

    cases
        .into_iter()
        .map(|(name, store, build)| {
            let report = check_params(&store, FD_STEP, ABS_FLOOR, |s, t| build(s, t)).expect("gradient check runs");
            (name, report)
        })
        .collect()
}

pub fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        d_hidden: 6,
        d_z: 4,
        heads: 2,
        layers: 2,
        ..EncoderConfig::default()
    }
}

/// A random directed snapshot on `n` nodes with positive trade weights.
pub fn random_input(n: usize, rng: &mut Rng) -> EncoderInput {
    let mut a = Mat::zeros(n, n);
    let mut t = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.bernoulli(0.4) {
                a[(i, j)] = 1.0;
                t[(i, j)] = rng.uniform_in(0.1, 2.0);
            }
        }
    }
    let x = Mat::from_fn(n, 4, |_, _| rng.uniform_in(-2.0, 2.0));
    EncoderInput::new(x, a, t)
}

/// Finite-difference check of encoder → aggregator → loss over a window of
/// three random snapshots, covering every parameter including the memory
/// decay and mixing weight.
pub fn pipeline_gradient(seed: u64, variant: Variant) -> GradCheckReport {
    pipeline_gradient_with_step(seed, variant, FD_STEP)
}

pub fn pipeline_gradient_with_step(seed: u64, variant: Variant, h: f64) -> GradCheckReport {
    let mut rng = Rng::new(seed);
    let n = 5 + rng.below(2);
    let cfg = small_encoder();
    let inputs: Vec<EncoderInput> = (0..3).map(|_| random_input(n, &mut rng)).collect();
    let target = random_input(n, &mut rng).a;
    let (a_sym, mask) = symmetrize_target(&target);
    let mut store = ParamStore::new();
    let enc = init_encoder(&mut store, &cfg, n, seed).expect("encoder init");
    // A larger node embedding keeps relu inputs away from zero.
    for v in store.get_mut(enc.x_p).value.as_mut_slice() {
        *v *= 50.0;
    }
    let tama = TamaParams::init(&mut store, cfg.d_z, 0.7, 0.6, variant, &mut rng).expect("tama init");
    check_params(&store, h, ABS_FLOOR * h / FD_STEP, |s, tape| {
        let mut sample_rng = Rng::new(seed ^ 0x5eed);
        let mut zs = Vec::new();
        let mut kls = Vec::new();
        for input in &inputs {
            let e = encode_snapshot(tape, s, &enc, &cfg, input, Some(&mut sample_rng))?;
            zs.push(e.z);
            kls.push(e.kl);
        }
        let out = forward_window(tape, s, &tama, &zs, None)?;
        loss_total(tape, out.logits, &a_sym, &mask, &kls, 0.1, 1.0)
    })
    .expect("pipeline gradient check runs")
}

/// Pair-count AUC: ties count one half.
pub fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut total = 0.0;
    for p in pos {
        for q in neg {
            total += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

/// `Σ_k P(k) Δr(k)` over the ranking by descending score, ties broken by
/// ascending key.
pub fn brute_ap(scores: &[f64], labels: &[bool], keys: &[usize]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(keys[a].cmp(&keys[b])));
    let total_pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut ap = 0.0;
    let mut tp = 0.0;
    let mut prev_recall = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1.0;
        }
        let precision = tp / (k + 1) as f64;
        let recall = tp / total_pos;
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    ap
}

/// A random scoring instance with 1..=50 positives and some negatives;
/// scores are drawn from a small grid so ties occur.
pub fn random_metric_instance(rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let np = 1 + rng.below(50);
    let nn = 1 + rng.below(50);
    let grid = |rng: &mut Rng| (rng.below(20) as f64) / 19.0;
    let pos = (0..np).map(|_| grid(rng) * 0.8 + 0.2 * rng.uniform().round()).collect();
    let neg = (0..nn).map(|_| grid(rng)).collect();
    (pos, neg)
}

/// Largest gap between the iterated memory update and its unfolded sum over
/// 100 random `(γ, sequence)` draws with windows up to 16, and the largest
/// gap to `(1 − γᵗ) C` for a constant sequence.
pub fn ema_errors(seed: u64) -> (f64, f64) {
    let mut rng = Rng::new(seed);
    let mut worst_unfold: f64 = 0.0;
    for _ in 0..100 {
        let w = 1 + rng.below(16);
        let n = 2 + rng.below(5);
        let gamma = rng.uniform_in(0.01, 0.99);
        let seq: Vec<Mat> = (0..w).map(|_| Mat::from_fn(n, n, |_, _| rng.uniform())).collect();
        let mut tape = Tape::new();
        let g = tape.constant(Mat::scalar(gamma));
        let mut m = tape.constant(Mat::zeros(n, n));
        for a in &seq {
            let a = tape.constant(a.clone());
            m = memory_update(&mut tape, m, a, g).expect("memory update");
        }
        let oracle = tama_core::tama::memory_unfold_oracle(&seq, gamma).expect("oracle");
        worst_unfold = worst_unfold.max(tape.value(m).zip_map(&oracle, |p, q| p - q).max_abs());
    }
    let mut worst_geometric: f64 = 0.0;
    for _ in 0..100 {
        let gamma = rng.uniform_in(0.01, 0.99);
        let c = Mat::from_fn(3, 3, |_, _| rng.uniform());
        let mut state = tama_core::tama::MemoryState::zeros(3);
        for t in 1..=16 {
            state.update(&c, gamma).expect("memory update");
            let expected = c.scale(1.0 - gamma.powi(t));
            worst_geometric = worst_geometric.max(state.m.zip_map(&expected, |p, q| p - q).max_abs());
        }
    }
    (worst_unfold, worst_geometric)
}

/// `(case, |computed − expected|)` for the hand-derivable closed forms.
pub fn closed_form_errors() -> Vec<(&'static str, f64)> {
    let kl = |mu: f64, log_sigma: f64| {
        let mut t = Tape::new();
        let dist = LatentDist {
            mu: t.constant(Mat::scalar(mu)),
            log_sigma: t.constant(Mat::scalar(log_sigma)),
            z: t.constant(Mat::scalar(mu)),
        };
        let v = tama_core::encoder::kl_divergence(&mut t, &dist).expect("kl");
        t.value(v).item()
    };
    let bce_zero = {
        let mut rng = Rng::new(5);
        let targets = Mat::from_fn(6, 6, |_, _| if rng.bernoulli(0.4) { 1.0 } else { 0.0 });
        let (sym, mask) = symmetrize_target(&targets);
        let mut t = Tape::new();
        let x = t.constant(Mat::zeros(6, 6));
        let kl = t.constant(Mat::scalar(3.0));
        let l = loss_total(&mut t, x, &sym, &mask, &[kl], 0.0, 1.0).expect("loss");
        t.value(l).item()
    };
    let gru_zero = {
        let mut rng = Rng::new(6);
        let mut store = ParamStore::new();
        let gru = GruParams::init(&mut store, 4, &mut rng);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let p = store.get_mut(id);
            p.value = Mat::zeros(p.value.rows(), p.value.cols());
        }
        let h_prev = rand_mat(5, 4, &mut rng);
        let mut t = Tape::new();
        let x = t.constant(rand_mat(5, 4, &mut rng));
        let h = t.constant(h_prev.clone());
        let out = gru_cell(&mut t, &store, &gru, x, h).expect("gru");
        t.value(out).zip_map(&h_prev.scale(0.5), |p, q| p - q).max_abs()
    };
    vec![
        ("KL(μ=0, σ=1) = 0", kl(0.0, 0.0).abs()),
        ("KL(μ=1, σ=1) = 0.5", (kl(1.0, 0.0) - 0.5).abs()),
        (
            "KL(μ=0, σ=2) = 1.5 − ln 2",
            (kl(0.0, 2f64.ln()) - (1.5 - 2f64.ln())).abs(),
        ),
        ("BCE at zero logits = ln 2", (bce_zero - 2f64.ln()).abs()),
        ("GRU with zero weights halves h", gru_zero),
    ]
}
