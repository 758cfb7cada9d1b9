//! Acceptance gate: ten numbered criteria, one test each. Every test ends
//! with a single `criterion NN PASS` line carrying the measured values and
//! its runtime; a failed assertion prints the matching FAIL context. Scales
//! are sized so the whole gate finishes on one laptop core.
//!
//! Run with: cargo test --test acceptance -- --nocapture

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use painscope::attribution::{
    grad_cam, integrate_path_gradients, integrated_gradients, target_logit, DEFAULT_IG_STEPS,
};
use painscope::data::{
    generate_synthetic, generate_synthetic_with_regions, make_folds, BlobRegion, Sample,
};
use painscope::experiment::ModelSize;
use painscope::labels::{
    lsr_smooth, nfcs_sigmoid, nfcs_soft_label, ClassLabel, LabelMode, NfcsScore,
};
use painscope::metrics::{ece, PredictionRecord, DEFAULT_BINS};
use painscope::model::{load_checkpoint, DropoutMode, Model, ModelConfig};
use painscope::seed;
use painscope::tensor::{Tape, Tensor, ValueId};
use painscope::training::{train_fold, OptimizerKind, SchedulerKind, TrainConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 1207;

// ---------------------------------------------------------------- fixtures

/// Per-process scratch root, wiped once at first use.
fn suite_root() -> &'static Path {
    static ROOT: OnceLock<PathBuf> = OnceLock::new();
    ROOT.get_or_init(|| {
        let root = std::env::temp_dir().join("painscope-acceptance");
        if root.exists() {
            std::fs::remove_dir_all(&root).expect("stale scratch root is removable");
        }
        std::fs::create_dir_all(&root).expect("scratch root is creatable");
        root
    })
}

fn painscope_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_painscope"))
        .args(args)
        .env_remove("PAINSCOPE_OUT")
        .output()
        .expect("painscope binary launches")
}

/// Runs the binary, asserting success; returns stdout.
fn painscope_run(args: &[&str]) -> String {
    let out = painscope_cli(args);
    assert!(
        out.status.success(),
        "painscope {:?} exited with {:?}:\n{}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Every checkpoint-producing run directory this process created, so the
/// checkpoint-selection criterion can audit all of them.
fn checkpoint_runs() -> &'static Mutex<Vec<PathBuf>> {
    static RUNS: OnceLock<Mutex<Vec<PathBuf>>> = OnceLock::new();
    RUNS.get_or_init(|| Mutex::new(Vec::new()))
}

fn note_checkpoint_run(dir: &Path) {
    checkpoint_runs().lock().unwrap().push(dir.to_path_buf());
}

struct TrainedPair {
    hard: PathBuf,
    nfcs: PathBuf,
}

/// Two baseline-recipe trainings on the same folds, hard vs NFCS-soft
/// labels. Shared between the trainability and checkpoint criteria.
fn trained_pair() -> &'static TrainedPair {
    static PAIR: OnceLock<TrainedPair> = OnceLock::new();
    PAIR.get_or_init(|| {
        let hard = suite_root().join("train-hard");
        let nfcs = suite_root().join("train-nfcs");
        let base = [
            "train",
            "--preset",
            "original",
            "--model-size",
            "compact",
            "--image-size",
            "24",
            "--subjects",
            "30",
            "--per-subject",
            "6",
            "--folds",
            "5",
            "--augment-count",
            "0",
            "--seed",
            "7",
        ];
        let mut hard_args: Vec<&str> = base.to_vec();
        let hard_out = hard.to_str().unwrap().to_owned();
        hard_args.extend(["--out", &hard_out]);
        painscope_run(&hard_args);
        let mut nfcs_args: Vec<&str> = base.to_vec();
        let nfcs_out = nfcs.to_str().unwrap().to_owned();
        nfcs_args.extend(["--labels", "nfcs", "--out", &nfcs_out]);
        painscope_run(&nfcs_args);
        note_checkpoint_run(&hard);
        note_checkpoint_run(&nfcs);
        TrainedPair { hard, nfcs }
    })
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{} is readable: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{} parses: {e}", path.display()))
}

/// predictions.csv rows as (fold, subject_id).
fn prediction_fold_subjects(dir: &Path) -> Vec<(usize, String)> {
    let text = std::fs::read_to_string(dir.join("predictions.csv")).expect("predictions.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let mut cols = line.split(',');
            let fold = cols.next().unwrap().parse().unwrap();
            let subject = cols.next().unwrap().to_owned();
            (fold, subject)
        })
        .collect()
}

// ----------------------------------------------------- criterion 1 helpers

const FD_STEP: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    let values = (0..len).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), values).unwrap()
}

/// Uniform values kept at least 0.05 from zero, so ReLU kinks sit far
/// outside the finite-difference step.
fn kink_safe_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    let values = (0..len)
        .map(|_| {
            let u: f64 = rng.gen_range(-1.0..1.0);
            u.signum() * (0.05 + u.abs())
        })
        .collect();
    Tensor::new(shape.to_vec(), values).unwrap()
}

/// Shuffled ladder with spacing 0.05 and jitter under 0.02: every pair of
/// values differs by at least 0.03, so pooling maxima cannot flip under FD.
fn distinct_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    use rand::seq::SliceRandom;
    let len: usize = shape.iter().product();
    let mut values: Vec<f64> = (0..len)
        .map(|i| i as f64 * 0.05 - len as f64 * 0.025 + rng.gen_range(0.0..0.02))
        .collect();
    values.shuffle(rng);
    Tensor::new(shape.to_vec(), values).unwrap()
}

/// Backward pass bookkeeping shared by the per-op closures: runs backward
/// from `loss`, returns its value and one gradient vector per leaf.
fn finish(mut tape: Tape, loss: ValueId, ids: &[ValueId]) -> (f64, Vec<Vec<f64>>) {
    tape.backward(loss).unwrap();
    let value = tape.values(loss)[0];
    let grads = ids.iter().map(|&id| tape.grad(id).to_vec()).collect();
    (value, grads)
}

/// Central finite differences on every coordinate of every input, against
/// the closure's analytic gradients. Returns the worst relative error.
fn fd_max_rel(
    inputs: &[Tensor],
    run: &dyn Fn(&[Tensor]) -> (f64, Vec<Vec<f64>>),
    tol: f64,
    op: &str,
) -> f64 {
    let (_, grads) = run(inputs);
    let mut worst = 0.0f64;
    for ti in 0..inputs.len() {
        for j in 0..inputs[ti].len() {
            let mut plus = inputs.to_vec();
            plus[ti].values_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[ti].values_mut()[j] -= FD_STEP;
            let fd = (run(&plus).0 - run(&minus).0) / (2.0 * FD_STEP);
            let err = rel_err(fd, grads[ti][j]);
            assert!(
                err <= tol,
                "criterion 01 FAIL: {op} input {ti} coord {j}: finite difference {fd:.9} \
                 vs recorded gradient {:.9} (rel {err:.2e} > {tol:.0e})",
                grads[ti][j]
            );
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn criterion_01_gradient_correctness() {
    let started = Instant::now();
    const INSTANCES: usize = 100;
    const PER_OP_TOL: f64 = 1e-4;
    const COMPOSED_TOL: f64 = 1e-3;
    let mut rng = seed::stream(MASTER_SEED, "acceptance-fd", &[]);
    let mut worst = 0.0f64;
    let mut ops = 0usize;

    // conv2d, alternating stride/padding geometries.
    for i in 0..INSTANCES {
        let (stride, padding) = if i % 3 == 0 { (2, 0) } else { (1, 1) };
        let out_side = (5 + 2 * padding - 3) / stride + 1;
        let inputs = vec![
            uniform_tensor(&mut rng, &[2, 5, 5], -1.0, 1.0),
            uniform_tensor(&mut rng, &[3, 2, 3, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[3], -0.5, 0.5),
            uniform_tensor(&mut rng, &[3, out_side, out_side], -1.0, 1.0),
        ];
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let conv = tape.conv2d(ids[0], ids[1], ids[2], stride, padding).unwrap();
            let prod = tape.mul(conv, ids[3]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "conv2d"));
    }
    ops += 1;

    // maxpool2d, two window geometries, tie-free inputs.
    for i in 0..INSTANCES {
        let (window, stride, out_side) = if i % 2 == 0 { (2, 2, 3) } else { (3, 3, 2) };
        let inputs = vec![
            distinct_tensor(&mut rng, &[2, 6, 6]),
            uniform_tensor(&mut rng, &[2, out_side, out_side], -1.0, 1.0),
        ];
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let pooled = tape.maxpool2d(ids[0], window, stride).unwrap();
            let prod = tape.mul(pooled, ids[1]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "maxpool2d"));
    }
    ops += 1;

    // relu, inputs held away from the kink.
    for _ in 0..INSTANCES {
        let inputs = vec![
            kink_safe_tensor(&mut rng, &[3, 4, 4]),
            uniform_tensor(&mut rng, &[3, 4, 4], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let act = tape.relu(ids[0]);
            let prod = tape.mul(act, ids[1]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "relu"));
    }
    ops += 1;

    // dense.
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[8], -1.0, 1.0),
            uniform_tensor(&mut rng, &[4, 8], -1.0, 1.0),
            uniform_tensor(&mut rng, &[4], -0.5, 0.5),
            uniform_tensor(&mut rng, &[4], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let out = tape.dense(ids[0], ids[1], ids[2]).unwrap();
            let prod = tape.mul(out, ids[3]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "dense"));
    }
    ops += 1;

    // softmax.
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[4], -2.0, 2.0),
            uniform_tensor(&mut rng, &[4], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let sm = tape.softmax(ids[0]).unwrap();
            let prod = tape.mul(sm, ids[1]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "softmax"));
    }
    ops += 1;

    // cross_entropy on strictly positive inputs.
    for _ in 0..INSTANCES {
        let inputs = vec![uniform_tensor(&mut rng, &[3], 0.2, 1.2)];
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let target: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let loss = tape.cross_entropy(ids[0], &target).unwrap();
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "cross_entropy"));
    }
    ops += 1;

    // dropout with a fixed mask.
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[6], -1.0, 1.0),
            uniform_tensor(&mut rng, &[6], -1.0, 1.0),
        ];
        let mask: Vec<f64> = (0..6)
            .map(|_| if rng.gen_bool(0.5) { 0.0 } else { 2.0 })
            .collect();
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let dropped = tape.dropout(ids[0], mask.clone()).unwrap();
            let prod = tape.mul(dropped, ids[1]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "dropout"));
    }
    ops += 1;

    // concat_channels.
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[1, 3, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[2, 3, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[1, 3, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[4, 3, 3], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let merged = tape.concat_channels(&ids[0..3]).unwrap();
            let prod = tape.mul(merged, ids[3]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "concat_channels"));
    }
    ops += 1;

    // flatten.
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[2, 3, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[18], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let flat = tape.flatten(ids[0]);
            let prod = tape.mul(flat, ids[1]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "flatten"));
    }
    ops += 1;

    // add and mul together: loss = sum((a + b) * c * w).
    for _ in 0..INSTANCES {
        let inputs = vec![
            uniform_tensor(&mut rng, &[2, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[2, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[2, 3], -1.0, 1.0),
            uniform_tensor(&mut rng, &[2, 3], -1.0, 1.0),
        ];
        let run = |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let added = tape.add(ids[0], ids[1]).unwrap();
            let scaled = tape.mul(added, ids[2]).unwrap();
            let prod = tape.mul(scaled, ids[3]).unwrap();
            let loss = tape.sum(prod);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "add+mul"));
    }
    ops += 2;

    // scale and sum.
    for _ in 0..INSTANCES {
        let factor = rng.gen_range(-2.0..2.0);
        let inputs = vec![uniform_tensor(&mut rng, &[7], -1.0, 1.0)];
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let scaled = tape.scale(ids[0], factor);
            let loss = tape.sum(scaled);
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "scale+sum"));
    }
    ops += 2;

    // select.
    for _ in 0..INSTANCES {
        let index = rng.gen_range(0..6);
        let inputs = vec![uniform_tensor(&mut rng, &[6], -1.0, 1.0)];
        let run = move |ts: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<ValueId> = ts.iter().map(|t| tape.leaf(t)).collect();
            let loss = tape.select(ids[0], index).unwrap();
            finish(tape, loss, &ids)
        };
        worst = worst.max(fd_max_rel(&inputs, &run, PER_OP_TOL, "select"));
    }
    ops += 1;

    // Full composed model: cross-entropy loss through all three branches,
    // spot-checking sampled parameter and input coordinates. Every fifth
    // instance samples dropout from a replayable stream.
    let config = ModelConfig {
        input_size: 8,
        input_channels: 1,
        wide_filters: 2,
        wide_kernel: 5,
        narrow_filters: 1,
        narrow_kernel: 3,
        last_conv_filters: 2,
        last_conv_kernel: 3,
        dense_width: 4,
        dropout_rate: 0.5,
    };
    let mut worst_composed = 0.0f64;
    for i in 0..INSTANCES {
        let model = Model::build(config.clone(), MASTER_SEED + i as u64).unwrap();
        let image = uniform_tensor(&mut rng, &[1, 8, 8], 0.0, 1.0);
        let t: f64 = rng.gen_range(0.05..0.95);
        let target = [t, 1.0 - t];
        let with_dropout = i % 5 == 0;
        let dropout_salt = i as u64;

        let eval = |m: &Model, x: &Tensor| -> (f64, Vec<Vec<f64>>, Vec<f64>) {
            let mut tape = Tape::new();
            let binding = m.bind(&mut tape);
            let mut mask_rng = seed::stream(MASTER_SEED, "acceptance-dropout", &[dropout_salt]);
            let mode = if with_dropout {
                DropoutMode::Sampled(&mut mask_rng)
            } else {
                DropoutMode::Disabled
            };
            let trace = m.forward(&mut tape, &binding, x, mode).unwrap();
            let loss = tape.cross_entropy(trace.probabilities, &target).unwrap();
            tape.backward(loss).unwrap();
            let value = tape.values(loss)[0];
            let param_grads = binding
                .ids()
                .iter()
                .map(|&id| tape.grad(id).to_vec())
                .collect();
            let input_grad = tape.grad(trace.input).to_vec();
            (value, param_grads, input_grad)
        };
        let (_, param_grads, input_grad) = eval(&model, &image);

        for _ in 0..10 {
            let p = rng.gen_range(0..model.params().len());
            let c = rng.gen_range(0..model.params()[p].1.len());
            let mut plus = model.clone();
            plus.params_mut()[p].1.values_mut()[c] += FD_STEP;
            let mut minus = model.clone();
            minus.params_mut()[p].1.values_mut()[c] -= FD_STEP;
            let fd = (eval(&plus, &image).0 - eval(&minus, &image).0) / (2.0 * FD_STEP);
            let err = rel_err(fd, param_grads[p][c]);
            assert!(
                err <= COMPOSED_TOL,
                "criterion 01 FAIL: composed model, parameter {} coord {c}: \
                 fd {fd:.9} vs gradient {:.9} (rel {err:.2e} > {COMPOSED_TOL:.0e})",
                model.params()[p].0,
                param_grads[p][c]
            );
            worst_composed = worst_composed.max(err);
        }
        for _ in 0..4 {
            let c = rng.gen_range(0..image.len());
            let mut plus = image.clone();
            plus.values_mut()[c] += FD_STEP;
            let mut minus = image.clone();
            minus.values_mut()[c] -= FD_STEP;
            let fd = (eval(&model, &plus).0 - eval(&model, &minus).0) / (2.0 * FD_STEP);
            let err = rel_err(fd, input_grad[c]);
            assert!(
                err <= COMPOSED_TOL,
                "criterion 01 FAIL: composed model, input coord {c}: \
                 fd {fd:.9} vs gradient {:.9} (rel {err:.2e} > {COMPOSED_TOL:.0e})",
                input_grad[c]
            );
            worst_composed = worst_composed.max(err);
        }
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed <= Duration::from_secs(120),
        "criterion 01 FAIL: gradient checks took {elapsed:?}, budget is 2 min"
    );
    println!(
        "criterion 01 PASS: {ops} ops x {INSTANCES} instances worst rel {worst:.2e} (tol 1e-4); \
         composed model x {INSTANCES} instances worst rel {worst_composed:.2e} (tol 1e-3); {:.1}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_02_sigmoid_fidelity() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for n in 0..=5u8 {
        let score = NfcsScore::new(n).unwrap();
        let direct = (1.0 + (-f64::from(n) + 2.5).exp()).recip();
        let got = nfcs_sigmoid(score);
        let gap = (got - direct).abs();
        assert!(
            gap <= 1e-12,
            "criterion 02 FAIL: sigmoid at score {n}: {got} vs direct {direct} (|diff| {gap:.2e})"
        );
        worst = worst.max(gap);

        let soft = nfcs_soft_label(score);
        assert_eq!(
            soft.p_pain, got,
            "criterion 02 FAIL: soft label pain mass differs from the sigmoid at score {n}"
        );
        assert_eq!(
            soft.p_no_pain,
            1.0 - got,
            "criterion 02 FAIL: soft label complement is not exactly 1 - S at score {n}"
        );
    }
    for n in 0..5u8 {
        let low = nfcs_sigmoid(NfcsScore::new(n).unwrap());
        let high = nfcs_sigmoid(NfcsScore::new(n + 1).unwrap());
        assert!(
            low < high,
            "criterion 02 FAIL: sigmoid not strictly increasing between {n} and {}",
            n + 1
        );
    }
    println!(
        "criterion 02 PASS: scores 0-5 match direct evaluation (worst |diff| {worst:.1e}, \
         tol 1e-12), strictly monotone, [1-S, S] complement exact; {:.2}s",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_03_label_smoothing_fidelity() {
    let started = Instant::now();
    let smoothed = lsr_smooth(ClassLabel::Pain, 0.2).unwrap();
    assert_eq!(
        (smoothed.p_no_pain, smoothed.p_pain),
        (0.1, 0.9),
        "criterion 03 FAIL: smoothing Pain at 0.2 is not exactly [0.1, 0.9]"
    );
    let mirrored = lsr_smooth(ClassLabel::NoPain, 0.2).unwrap();
    assert_eq!(
        (mirrored.p_no_pain, mirrored.p_pain),
        (0.9, 0.1),
        "criterion 03 FAIL: smoothing NoPain at 0.2 is not exactly [0.9, 0.1]"
    );
    for (label, expected) in [(ClassLabel::NoPain, (1.0, 0.0)), (ClassLabel::Pain, (0.0, 1.0))] {
        let onehot = lsr_smooth(label, 0.0).unwrap();
        assert_eq!(
            (onehot.p_no_pain, onehot.p_pain),
            expected,
            "criterion 03 FAIL: epsilon 0 does not reproduce the one-hot target for {label:?}"
        );
    }
    println!(
        "criterion 03 PASS: epsilon 0.2 gives exactly [0.1, 0.9] / [0.9, 0.1], \
         epsilon 0 reproduces one-hot; {:.2}s",
        started.elapsed().as_secs_f64()
    );
}

// ----------------------------------------------------- criterion 4 helpers

/// Brute-force calibration error: scans the records once per bin with
/// interval-membership tests instead of index arithmetic.
fn ece_oracle(records: &[PredictionRecord], bins: usize) -> f64 {
    let total = records.len() as f64;
    let mut value = 0.0;
    for bin in 0..bins {
        let lower = bin as f64 / bins as f64;
        let upper = (bin + 1) as f64 / bins as f64;
        let mut sum_confidence = 0.0;
        let mut count = 0usize;
        let mut hits = 0usize;
        for record in records {
            let inside = record.confidence_pain >= lower
                && (record.confidence_pain < upper || bin + 1 == bins);
            if !inside {
                continue;
            }
            sum_confidence += record.confidence_pain;
            count += 1;
            if record.true_label == ClassLabel::Pain {
                hits += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let mean_confidence = sum_confidence / count as f64;
        let frequency = hits as f64 / count as f64;
        value += count as f64 / total * (frequency - mean_confidence).abs();
    }
    value
}

fn record(confidence: f64, label: ClassLabel) -> PredictionRecord {
    PredictionRecord {
        confidence_pain: confidence,
        true_label: label,
        fold: 0,
        subject_id: "subject_000".into(),
    }
}

#[test]
fn criterion_04_calibration_error_oracle() {
    let started = Instant::now();
    let mut rng = seed::stream(MASTER_SEED, "acceptance-ece", &[]);

    // 1000 random record sets against the independent oracle, exact match.
    for set in 0..1000 {
        let bins = rng.gen_range(2..=20);
        let count = rng.gen_range(1..=200);
        let records: Vec<PredictionRecord> = (0..count)
            .map(|_| {
                let label = if rng.gen_bool(0.5) {
                    ClassLabel::Pain
                } else {
                    ClassLabel::NoPain
                };
                record(rng.gen::<f64>(), label)
            })
            .collect();
        let fast = ece(&records, bins).unwrap();
        let slow = ece_oracle(&records, bins);
        assert_eq!(
            fast, slow,
            "criterion 04 FAIL: set {set} ({count} records, {bins} bins): \
             ece {fast} vs oracle {slow}"
        );
    }

    // Perfectly calibrated stream: labels drawn at the stated confidence.
    let calibrated: Vec<PredictionRecord> = (0..100_000)
        .map(|_| {
            let confidence: f64 = rng.gen();
            let label = if rng.gen::<f64>() < confidence {
                ClassLabel::Pain
            } else {
                ClassLabel::NoPain
            };
            record(confidence, label)
        })
        .collect();
    let calibrated_ece = ece(&calibrated, DEFAULT_BINS).unwrap();
    assert!(
        calibrated_ece <= 0.02,
        "criterion 04 FAIL: calibrated stream of 100000 has ECE {calibrated_ece:.4} > 0.02"
    );

    // Degenerate overconfident stream: confidence 1.0 everywhere, 10%
    // correct. One occupied bin, so ECE is exactly |0.1 - 1.0| = 0.9.
    let degenerate: Vec<PredictionRecord> = (0..1000)
        .map(|i| {
            let label = if i < 100 {
                ClassLabel::Pain
            } else {
                ClassLabel::NoPain
            };
            record(1.0, label)
        })
        .collect();
    let degenerate_ece = ece(&degenerate, DEFAULT_BINS).unwrap();
    assert_eq!(
        degenerate_ece, 0.9,
        "criterion 04 FAIL: overconfident stream ECE {degenerate_ece} is not the closed form 0.9"
    );

    println!(
        "criterion 04 PASS: 1000 random sets equal the brute-force oracle exactly; \
         calibrated n=100000 ECE {calibrated_ece:.4} (<= 0.02); degenerate stream ECE 0.9 exact; {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// -------------------------------------------------- criteria 5, 6 fixtures

/// Small model trained in-process for the attribution criteria.
fn quick_train(
    samples: &[Sample],
    image_size: usize,
    folds: usize,
    epochs: usize,
    seed_value: u64,
) -> Model {
    let plan = make_folds(samples, folds, seed_value).unwrap();
    let config = TrainConfig {
        learning_rate: 5e-3,
        epochs,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        scheduler: SchedulerKind::None,
        label_mode: LabelMode::Hard,
        seed: seed_value,
    };
    let outcome = train_fold(
        &ModelSize::Tiny.config(image_size, 1),
        samples,
        &plan,
        0,
        &config,
        None,
    )
    .unwrap();
    // The final model, not the best checkpoint: attribution wants the
    // most-fitted weights, not the lowest-validation snapshot.
    outcome.final_model
}

#[test]
fn criterion_05_integrated_gradients_completeness() {
    let started = Instant::now();

    // Exactness on linear functions, for several step counts including 1.
    let mut rng = seed::stream(MASTER_SEED, "acceptance-ig-linear", &[]);
    let weights: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let bias = 0.37;
    for &steps in &[1usize, 7, 64] {
        let image: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let baseline: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let linear = |point: &[f64]| {
            let value: f64 = point.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() + bias;
            Ok((weights.clone(), value))
        };
        let (attributions, _) = integrate_path_gradients(&image, &baseline, steps, linear).unwrap();
        for i in 0..6 {
            let exact = (image[i] - baseline[i]) * weights[i];
            assert!(
                (attributions[i] - exact).abs() <= 1e-12,
                "criterion 05 FAIL: linear model, {steps} steps, coord {i}: \
                 attribution {} vs exact {exact}",
                attributions[i]
            );
        }
        let total: f64 = attributions.iter().sum();
        let gap: f64 = image
            .iter()
            .zip(&baseline)
            .zip(&weights)
            .map(|((x, b), w)| (x - b) * w)
            .sum();
        assert!(
            (total - gap).abs() <= 1e-12,
            "criterion 05 FAIL: linear completeness off by {:.2e} at {steps} steps",
            (total - gap).abs()
        );
    }

    // Completeness on a trained model: 50 real images, the sum of
    // attributions must match the logit gap within 1% relative.
    let samples = generate_synthetic(13, 4, 20, MASTER_SEED).unwrap();
    let model = quick_train(&samples, 20, 4, 25, MASTER_SEED);
    let zero_baseline = Tensor::zeros(vec![1, 20, 20]);
    let mut worst_rel = 0.0f64;
    for sample in samples.iter().take(50) {
        let predicted = if model.predict(&sample.image).unwrap().p_pain >= 0.5 {
            ClassLabel::Pain
        } else {
            ClassLabel::NoPain
        };
        let map = integrated_gradients(&model, &sample.image, None, predicted, DEFAULT_IG_STEPS)
            .unwrap();
        let total: f64 = map.values.values().iter().sum();
        let gap = target_logit(&model, &sample.image, predicted).unwrap()
            - target_logit(&model, &zero_baseline, predicted).unwrap();
        let rel = (total - gap).abs() / gap.abs();
        assert!(
            rel <= 0.01,
            "criterion 05 FAIL: {} attribution sum {total:.6} vs logit gap {gap:.6} \
             (rel {rel:.4} > 0.01 at m={DEFAULT_IG_STEPS})",
            sample.subject_id
        );
        worst_rel = worst_rel.max(rel);
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed <= Duration::from_secs(300),
        "criterion 05 FAIL: completeness checks took {elapsed:?}, budget is 5 min"
    );
    println!(
        "criterion 05 PASS: linear attributions exact to 1e-12 at m=1,7,64; \
         50 trained-model inputs complete within 1% at m={DEFAULT_IG_STEPS} \
         (worst rel {worst_rel:.2e}); {:.1}s",
        elapsed.as_secs_f64()
    );
}

/// Mean map value inside the painted blob regions vs outside.
fn region_means(map: &Tensor, regions: &[BlobRegion]) -> (f64, f64) {
    let side = map.shape()[0];
    let (mut inside_sum, mut inside_n, mut outside_sum, mut outside_n) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..side {
        for x in 0..side {
            let value = map.values()[y * side + x];
            // Bare indices, matching how the generator paints pixels.
            let hit = regions.iter().any(|r| r.contains(x as f64, y as f64));
            if hit {
                inside_sum += value;
                inside_n += 1;
            } else {
                outside_sum += value;
                outside_n += 1;
            }
        }
    }
    (inside_sum / inside_n.max(1) as f64, outside_sum / outside_n.max(1) as f64)
}

#[test]
fn criterion_06_class_activation_contracts() {
    let started = Instant::now();
    let image_size = 24;
    let with_regions = generate_synthetic_with_regions(16, 4, image_size, MASTER_SEED).unwrap();
    let samples: Vec<Sample> = with_regions.iter().map(|(s, _)| s.clone()).collect();
    let model = quick_train(&samples, image_size, 4, 40, MASTER_SEED);

    let mut tested = 0usize;
    let mut pain_correct = 0usize;
    let mut localized = 0usize;
    for (sample, regions) in &with_regions {
        let map = grad_cam(&model, &sample.image, ClassLabel::Pain).unwrap();
        // Contracts on every tested input: spatial shape and non-negativity.
        assert_eq!(
            map.values.shape(),
            &[image_size, image_size],
            "criterion 06 FAIL: map shape {:?} does not match the input",
            map.values.shape()
        );
        assert!(
            map.values.values().iter().all(|v| *v >= 0.0 && v.is_finite()),
            "criterion 06 FAIL: negative or non-finite activation value for {}",
            sample.subject_id
        );
        tested += 1;

        // Localization only counts on correctly classified Pain images.
        let predicted_pain = model.predict(&sample.image).unwrap().p_pain >= 0.5;
        if sample.hard_label != ClassLabel::Pain || !predicted_pain {
            continue;
        }
        pain_correct += 1;
        let (inside, outside) = region_means(&map.values, regions);
        if inside > outside {
            localized += 1;
        }
    }

    assert!(
        pain_correct >= 5,
        "criterion 06 FAIL: only {pain_correct} correctly classified Pain images to audit"
    );
    let rate = localized as f64 / pain_correct as f64;
    assert!(
        rate >= 0.8,
        "criterion 06 FAIL: activation mass favors blob regions on only \
         {localized}/{pain_correct} correctly classified Pain images ({rate:.2} < 0.80)"
    );
    println!(
        "criterion 06 PASS: {tested} maps non-negative and input-shaped; \
         blob-region dominance on {localized}/{pain_correct} correct Pain images \
         ({rate:.2} >= 0.80); {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_07_protocol_rehearsal() {
    let started = Instant::now();
    let sweep_dir = suite_root().join("rehearsal-sweep");
    let train_dir = suite_root().join("rehearsal-tuned");

    // Smoothing sweep over the full candidate set on 30 subjects.
    let sweep_out = sweep_dir.to_str().unwrap().to_owned();
    painscope_run(&[
        "sweep",
        "--hyperparameter",
        "label_smoothing",
        "--candidates",
        "0.1,0.3,0.5,nfcs",
        "--model-size",
        "tiny",
        "--image-size",
        "16",
        "--subjects",
        "30",
        "--per-subject",
        "2",
        "--folds",
        "10",
        "--augment-count",
        "0",
        "--epochs",
        "2",
        "--batch-size",
        "8",
        "--optimizer",
        "adam",
        "--learning-rate",
        "5e-3",
        "--seed",
        "7",
        "--out",
        &sweep_out,
    ]);
    let sweep_result = read_json(&sweep_dir.join("sweep_result.json"));
    let candidates = sweep_result["candidates"].as_array().expect("candidate list");
    assert_eq!(
        candidates.len(),
        4,
        "criterion 07 FAIL: sweep scored {} candidates, expected 4",
        candidates.len()
    );
    let table = std::fs::read_to_string(sweep_dir.join("sweep_table.csv")).unwrap();
    for name in ["0.1", "0.3", "0.5", "nfcs"] {
        assert!(
            table.lines().any(|l| l.starts_with(&format!("{name},"))),
            "criterion 07 FAIL: sweep table lacks a row for candidate {name}"
        );
    }

    // The sweep regenerates its folds from the same seed; the plan must
    // partition subjects with disjoint test sets in every candidate run.
    let samples = generate_synthetic(30, 2, 16, 7).unwrap();
    let plan = make_folds(&samples, 10, 7).unwrap();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for fold in &plan.folds {
        for subject in &fold.test_subjects {
            assert!(
                seen.insert(subject),
                "criterion 07 FAIL: subject {subject} appears in two test folds"
            );
            assert!(
                !fold.train_subjects.contains(subject),
                "criterion 07 FAIL: subject {subject} leaks into its own training split"
            );
        }
    }
    assert_eq!(seen.len(), 30, "criterion 07 FAIL: folds do not cover all 30 subjects");

    // Tuned-preset training end to end, echo checked from the manifest.
    let train_out = train_dir.to_str().unwrap().to_owned();
    painscope_run(&[
        "train",
        "--preset",
        "tuned",
        "--model-size",
        "tiny",
        "--image-size",
        "16",
        "--subjects",
        "30",
        "--per-subject",
        "2",
        "--folds",
        "10",
        "--augment-count",
        "0",
        "--seed",
        "7",
        "--out",
        &train_out,
    ]);
    note_checkpoint_run(&train_dir);
    let manifest = read_json(&train_dir.join("run_manifest.json"));
    assert_eq!(
        manifest["train"]["epochs"].as_u64(),
        Some(120),
        "criterion 07 FAIL: tuned preset echoes epochs {:?}, expected 120",
        manifest["train"]["epochs"]
    );
    assert_eq!(
        manifest["train"]["labels"].as_str(),
        Some("0.3"),
        "criterion 07 FAIL: tuned preset echoes labels {:?}, expected smoothing 0.3",
        manifest["train"]["labels"]
    );
    assert_eq!(
        manifest["train"]["scheduler"].as_str(),
        Some("cosine_annealing"),
        "criterion 07 FAIL: tuned preset echoes scheduler {:?}, expected cosine_annealing",
        manifest["train"]["scheduler"]
    );

    // Ten-fold subject disjointness in the training run, from artifacts.
    let rows = prediction_fold_subjects(&train_dir);
    let mut subject_fold: BTreeMap<String, usize> = BTreeMap::new();
    let mut folds_seen: BTreeSet<usize> = BTreeSet::new();
    for (fold, subject) in rows {
        folds_seen.insert(fold);
        if let Some(previous) = subject_fold.insert(subject.clone(), fold) {
            assert_eq!(
                previous, fold,
                "criterion 07 FAIL: subject {subject} was held out in folds {previous} and {fold}"
            );
        }
    }
    assert_eq!(
        subject_fold.len(),
        30,
        "criterion 07 FAIL: held-out predictions cover {} subjects, expected 30",
        subject_fold.len()
    );
    assert_eq!(
        folds_seen.len(),
        10,
        "criterion 07 FAIL: predictions span {} folds, expected 10",
        folds_seen.len()
    );

    let elapsed = started.elapsed();
    assert!(
        elapsed <= Duration::from_secs(1800),
        "criterion 07 FAIL: rehearsal took {elapsed:?}, budget is 30 min"
    );
    let mean_f1 = read_json(&train_dir.join("metrics.json"))["mean_f1"]
        .as_f64()
        .unwrap();
    println!(
        "criterion 07 PASS: smoothing sweep (4 candidates) and tuned training \
         (120 epochs, labels 0.3, cosine_annealing) completed on 30 subjects; \
         10 disjoint folds in both runs; tuned mean F1 {mean_f1:.3}; {:.0}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_08_trainability() {
    let started = Instant::now();
    let pair = trained_pair();
    let hard_f1 = read_json(&pair.hard.join("metrics.json"))["mean_f1"]
        .as_f64()
        .unwrap();
    let nfcs_f1 = read_json(&pair.nfcs.join("metrics.json"))["mean_f1"]
        .as_f64()
        .unwrap();

    assert!(
        hard_f1 >= 0.90,
        "criterion 08 FAIL: baseline-recipe hard-label training reached mean F1 {hard_f1:.4} < 0.90"
    );
    let gap = (hard_f1 - nfcs_f1).abs();
    assert!(
        gap <= 0.05,
        "criterion 08 FAIL: NFCS-soft mean F1 {nfcs_f1:.4} vs hard {hard_f1:.4} (|diff| {gap:.4} > 0.05)"
    );

    // Same seed, same flags: both runs must have held out identical folds.
    let hard_rows = prediction_fold_subjects(&pair.hard);
    let nfcs_rows = prediction_fold_subjects(&pair.nfcs);
    let fold_map = |rows: &[(usize, String)]| -> BTreeMap<String, usize> {
        rows.iter().map(|(f, s)| (s.clone(), *f)).collect()
    };
    assert_eq!(
        fold_map(&hard_rows),
        fold_map(&nfcs_rows),
        "criterion 08 FAIL: hard and NFCS runs held out different folds"
    );

    println!(
        "criterion 08 PASS: baseline recipe mean F1 {hard_f1:.4} (>= 0.90); \
         NFCS-soft {nfcs_f1:.4}, |diff| {gap:.4} (<= 0.05), same folds; {:.0}s",
        started.elapsed().as_secs_f64()
    );
}

// ----------------------------------------------------- criterion 9 helpers

/// Relative path -> absolute path for every file under `root`.
fn dir_files(root: &Path) -> BTreeMap<String, PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, PathBuf>) {
        for entry in std::fs::read_dir(dir).expect("run directory is readable") {
            let path = entry.expect("directory entry").path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_str().unwrap().to_owned();
                out.insert(rel, path);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Asserts the two run directories hold byte-identical files, ignoring the
/// timestamped log sidecar. Returns the number of files compared.
fn assert_identical_runs(a: &Path, b: &Path, command: &str) -> usize {
    let keep = |files: BTreeMap<String, PathBuf>| -> BTreeMap<String, PathBuf> {
        files
            .into_iter()
            .filter(|(rel, _)| !rel.ends_with("run.log"))
            .collect()
    };
    let files_a = keep(dir_files(a));
    let files_b = keep(dir_files(b));
    let names_a: Vec<&String> = files_a.keys().collect();
    let names_b: Vec<&String> = files_b.keys().collect();
    assert_eq!(
        names_a, names_b,
        "criterion 09 FAIL: {command} reruns produced different file sets"
    );
    for (rel, path_a) in &files_a {
        let bytes_a = std::fs::read(path_a).unwrap();
        let bytes_b = std::fs::read(&files_b[rel]).unwrap();
        assert_eq!(
            bytes_a, bytes_b,
            "criterion 09 FAIL: {command} rerun changed the bytes of {rel}"
        );
    }
    files_a.len()
}

#[test]
fn criterion_09_reproducibility() {
    let started = Instant::now();
    let root = suite_root().join("repro");
    std::fs::create_dir_all(&root).unwrap();
    let shared = [
        "--subjects",
        "4",
        "--per-subject",
        "2",
        "--image-size",
        "12",
        "--seed",
        "9",
    ];
    let mut compared = 0usize;
    let mut commands = 0usize;

    // Each command runs twice with identical flags into fresh directories.
    let mut duplicate = |command: &str, extra: &[&str]| -> (PathBuf, PathBuf) {
        let a = root.join(format!("{commands:02}-{command}-a"));
        let b = root.join(format!("{commands:02}-{command}-b"));
        for dir in [&a, &b] {
            let out = dir.to_str().unwrap().to_owned();
            let mut args: Vec<&str> = vec![command];
            args.extend_from_slice(extra);
            args.extend_from_slice(&shared);
            args.extend(["--out", &out]);
            painscope_run(&args);
        }
        compared += assert_identical_runs(&a, &b, command);
        commands += 1;
        (a, b)
    };

    duplicate("generate-data", &[]);
    let (train_a, _) = duplicate(
        "train",
        &[
            "--model-size",
            "tiny",
            "--folds",
            "2",
            "--epochs",
            "2",
            "--batch-size",
            "4",
            "--optimizer",
            "adam",
            "--learning-rate",
            "5e-3",
            "--augment-count",
            "2",
        ],
    );
    note_checkpoint_run(&train_a);
    let checkpoints = train_a.to_str().unwrap().to_owned();
    duplicate(
        "sweep",
        &[
            "--hyperparameter",
            "label_smoothing",
            "--candidates",
            "0.3,nfcs",
            "--model-size",
            "tiny",
            "--folds",
            "2",
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--optimizer",
            "adam",
            "--learning-rate",
            "5e-3",
            "--augment-count",
            "0",
        ],
    );
    duplicate("evaluate", &["--checkpoints", &checkpoints, "--folds", "2"]);
    duplicate(
        "calibrate",
        &["--checkpoints", &checkpoints, "--folds", "2", "--bins", "6"],
    );
    duplicate(
        "explain",
        &[
            "--checkpoints",
            &checkpoints,
            "--folds",
            "2",
            "--fold",
            "0",
            "--count",
            "2",
            "--method",
            "both",
            "--steps",
            "32",
        ],
    );
    duplicate("report", &["--run", &checkpoints]);

    println!(
        "criterion 09 PASS: {commands} commands rerun with identical seed/flags, \
         {compared} artifact files byte-identical (run.log excluded); {:.0}s",
        started.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_10_checkpoint_selection() {
    let started = Instant::now();

    // Library route: the returned checkpoint must carry the minimum of the
    // history it reports.
    let samples = generate_synthetic(6, 2, 12, MASTER_SEED).unwrap();
    let plan = make_folds(&samples, 3, MASTER_SEED).unwrap();
    let config = TrainConfig {
        learning_rate: 5e-3,
        epochs: 6,
        batch_size: 4,
        optimizer: OptimizerKind::Adam,
        scheduler: SchedulerKind::None,
        label_mode: LabelMode::Hard,
        seed: MASTER_SEED,
    };
    let mut folds_checked = 0usize;
    for fold in 0..3 {
        let outcome = train_fold(
            &ModelSize::Tiny.config(12, 1),
            &samples,
            &plan,
            fold,
            &config,
            None,
        )
        .unwrap();
        let minimum = outcome
            .history
            .iter()
            .map(|r| r.test_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(
            outcome.metadata.test_loss, minimum,
            "criterion 10 FAIL: fold {fold} checkpoint loss {} is not the history minimum {minimum}",
            outcome.metadata.test_loss
        );
        folds_checked += 1;
    }

    // Artifact route: every checkpoint-producing run this suite made.
    let _ = trained_pair();
    let runs = checkpoint_runs().lock().unwrap().clone();
    let mut runs_checked = 0usize;
    for run in &runs {
        let mut saw_fold = false;
        for entry in std::fs::read_dir(run).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_owned();
            let Some(stem) = name.strip_suffix(".ckpt") else {
                continue;
            };
            saw_fold = true;
            let (_, metadata) = load_checkpoint(&path).unwrap();
            let history_text =
                std::fs::read_to_string(run.join(format!("{stem}.history.jsonl"))).unwrap();
            let mut minimum = f64::INFINITY;
            let mut at_epoch = None;
            for line in history_text.lines() {
                let record: serde_json::Value = serde_json::from_str(line).unwrap();
                let loss = record["test_loss"].as_f64().unwrap();
                if loss < minimum {
                    minimum = loss;
                    at_epoch = record["epoch"].as_u64();
                }
            }
            assert_eq!(
                metadata.test_loss,
                minimum,
                "criterion 10 FAIL: {} checkpoint loss {} is not its history minimum {minimum}",
                path.display(),
                metadata.test_loss
            );
            assert_eq!(
                Some(metadata.epoch as u64),
                at_epoch,
                "criterion 10 FAIL: {} checkpoint epoch {} disagrees with the history minimum",
                path.display(),
                metadata.epoch
            );
            folds_checked += 1;
        }
        assert!(saw_fold, "criterion 10 FAIL: {} holds no checkpoints", run.display());
        runs_checked += 1;
    }

    println!(
        "criterion 10 PASS: checkpoint loss equals the history minimum in \
         {folds_checked} folds across {runs_checked} artifact runs plus the library route; {:.0}s",
        started.elapsed().as_secs_f64()
    );
}

