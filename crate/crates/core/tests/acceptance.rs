//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dren::affinity::{joint_p, student_t, AffinityMatrix};
use dren::checkpoint;
use dren::compare::{compare_tsne, CompareConfig};
use dren::divergence::{kl_divergence, renyi_divergence, wasserstein1_tv, DivergenceKind};
use dren::encoder::{embed, forward, joint_loss, loss_and_gradients, one_hot, predict, EncoderParams};
use dren::eval::accuracy;
use dren::histlayer::{HistMode, HistParams, DEFAULT_BINS};
use dren::io;
use dren::numerics::{relative_error, sq_euclidean, Matrix, SeededRng};
use dren::synth::{blob_centers, gen_synthetic, SynthSpec};
use dren::trainer::{train_with_classes, Dataset, RunConfig};
use dren::tsne::{lle_weights, lle_weights_batch, oos_embed, tsne_fit, OosConfig, OosEntry, OosWeights, TsneConfig};

// Criterion 2.
const GRAD_INSTANCES: usize = 10;
const GRAD_H: f64 = 1e-6;
const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error. A central difference at
/// `h = 1e-6` on an O(1) loss carries about 5e-10 of round-off, so gradients
/// much below 1e-5 cannot be resolved to 1e-4 relative.
const GRAD_REL_FLOOR: f64 = 1e-5;
/// Tensors up to this size are checked in full.
const GRAD_FULL_TENSOR: usize = 64;
/// Coordinates probed in each larger tensor.
const GRAD_SAMPLES_PER_TENSOR: usize = 256;
/// Instances with a ReLU input or a `p − q` difference this close to zero
/// sit next to a kink that the central difference would straddle; they are
/// redrawn.
const KINK_MARGIN: f64 = 1e-4;
const TIE_MARGIN: f64 = 1e-7;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(60);
/// Diagnostic only: the worst coordinate is re-measured at this step to
/// separate round-off from a wrong derivative.
const GRAD_DIAG_H: f64 = 1e-4;

// Criterion 3.
const AFFINITY_CASES: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;
const ENTROPY_TOL_BITS: f64 = 1e-5;
const AFFINITY_TIME_LIMIT: Duration = Duration::from_secs(10);

// Criterion 4.
const SELF_DIVERGENCE_CASES: usize = 50;
const SELF_DIVERGENCE_TOL: f64 = 1e-12;
const RENYI_KL_CASES: usize = 20;
const RENYI_NEAR_ONE: f64 = 0.999;
const RENYI_KL_REL_TOL: f64 = 0.01;

// Criterion 5.
const LAMBDA_ONE_RUNS: u64 = 40;
const CHANCE_WINDOW: f64 = 0.10;

// Criterion 6.
const DREN_KNN_MIN: f64 = 0.95;
const TSNE_KNN_MIN: f64 = 0.90;
const BENCH_TIME_LIMIT: Duration = Duration::from_secs(300);

// Criterion 7.
const TSNE_KL_RATIO: f64 = 0.5;

// Criterion 8.
const OOS_TOL: f64 = 1e-10;

type Outcome = Result<String, String>;

fn check(cond: bool, pass: String, fail: String) -> Outcome {
    if cond {
        Ok(pass)
    } else {
        Err(fail)
    }
}

type Instance = (EncoderParams, Matrix, Matrix, AffinityMatrix);

fn random_instance(rng: &mut SeededRng, hist: bool) -> Instance {
    let n = 4 + (rng.next_u64() % 5) as usize;
    let d_in = 5 + (rng.next_u64() % 8) as usize;
    let d = 2 + (rng.next_u64() % 2) as usize;
    let c = 2 + (rng.next_u64() % 2) as usize;
    let x = rng.normal_matrix(n, d_in, 1.0);
    let hp = hist.then(|| HistParams::from_data(&x, DEFAULT_BINS, HistMode::Concat).unwrap());
    let mut params = EncoderParams::init(d_in, d, c, hp, rng).unwrap();
    // Move off the zero-bias initialization to a generic point.
    for layer in params.layers.iter_mut().chain(std::iter::once(&mut params.head)) {
        layer.bias.iter_mut().for_each(|b| *b = rng.uniform(-0.1, 0.1));
    }
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let y = one_hot(&labels, c).unwrap();
    let input = params.encoder_input(&x).unwrap();
    let (p, _) = joint_p(&input, 2.0).unwrap();
    (params, x, y, p)
}

fn near_kink(inst: &Instance, kind: DivergenceKind) -> bool {
    let (params, x, _, p) = inst;
    let trace = forward(params, x).unwrap();
    let relu_kink = trace.pre[..3]
        .iter()
        .any(|m| m.as_slice().iter().any(|v| v.abs() < KINK_MARGIN));
    let q = student_t(trace.embedding()).unwrap().q;
    let n = p.n();
    let tie = kind == DivergenceKind::Wasserstein1Tv
        && (0..n).any(|i| (0..n).any(|j| i != j && (p.get(i, j) - q.get(i, j)).abs() < TIE_MARGIN));
    relu_kink || tie
}

struct GradCheck {
    worst: f64,
    /// Relative error of the worst coordinate re-measured at `GRAD_DIAG_H`.
    worst_diag: f64,
    probed: usize,
    redrawn: usize,
}

fn central_difference(
    probe: &mut EncoderParams,
    (t, i): (usize, usize),
    h: f64,
    eval: &dyn Fn(&EncoderParams) -> f64,
) -> f64 {
    let orig = probe.tensors()[t][i];
    probe.tensors_mut()[t][i] = orig + h;
    let plus = eval(probe);
    probe.tensors_mut()[t][i] = orig - h;
    let minus = eval(probe);
    probe.tensors_mut()[t][i] = orig;
    (plus - minus) / (2.0 * h)
}

/// Largest relative error between analytic and central-difference gradients.
fn gradient_error(rng: &mut SeededRng, kind: DivergenceKind, lambda: f64, hist: bool) -> GradCheck {
    let mut redrawn = 0;
    let (params, x, y, p) = loop {
        let inst = random_instance(rng, hist);
        if !near_kink(&inst, kind) {
            break inst;
        }
        redrawn += 1;
    };
    let (_, grads, _) = loss_and_gradients(&params, &x, &y, Some(&p), Some(kind), lambda).unwrap();
    let eval = |m: &EncoderParams| joint_loss(m, &x, &y, &p, kind, lambda).unwrap().total;
    let mut probe = params.clone();
    let mut worst = (0.0f64, (0, 0));
    let mut probed = 0;
    for (t, analytic) in grads.tensors.iter().enumerate() {
        let size = analytic.len();
        let coords: Vec<usize> = if size <= GRAD_FULL_TENSOR {
            (0..size).collect()
        } else {
            (0..GRAD_SAMPLES_PER_TENSOR).map(|_| (rng.next_u64() % size as u64) as usize).collect()
        };
        for i in coords {
            let numeric = central_difference(&mut probe, (t, i), GRAD_H, &eval);
            let err = relative_error(analytic[i], numeric, GRAD_REL_FLOOR);
            if err > worst.0 {
                worst = (err, (t, i));
            }
            probed += 1;
        }
    }
    let (t, i) = worst.1;
    let diag = central_difference(&mut probe, (t, i), GRAD_DIAG_H, &eval);
    GradCheck {
        worst: worst.0,
        worst_diag: relative_error(grads.tensors[t][i], diag, GRAD_REL_FLOOR),
        probed,
        redrawn,
    }
}

fn criterion_1() -> Outcome {
    // The benchmark tables rest on pretrained image backbones that are out of
    // scope; the substitute is construction-based data whose geometry is known.
    let spec = SynthSpec::default();
    let (centers, note) = blob_centers(&spec, &mut SeededRng::new(0));
    let target = spec.separation * 2f64.sqrt();
    let worst = (0..spec.classes)
        .flat_map(|a| (a + 1..spec.classes).map(move |b| (a, b)))
        .map(|(a, b)| (sq_euclidean(centers.row(a), centers.row(b)).sqrt() - target).abs())
        .fold(0.0, f64::max);
    check(
        note.is_none() && worst <= 1e-9,
        format!("benchmark tables need pretrained image features; substitute blobs have center spacing error {worst:.1e} <= 1e-9"),
        format!("substitute blob geometry off by {worst:.3e}"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let kinds = [
        DivergenceKind::Kl,
        DivergenceKind::Renyi { alpha: 0.5 },
        DivergenceKind::Wasserstein1Tv,
    ];
    let mut worst = (0.0f64, 0.0f64, String::new());
    let mut cases = 0;
    let mut probed = 0;
    let mut redrawn = 0;
    for (k, kind) in kinds.iter().enumerate() {
        for (l, &lambda) in [0.0, 0.3, 1.0].iter().enumerate() {
            for hist in [false, true] {
                for inst in 0..GRAD_INSTANCES {
                    let seed = ((k * 3 + l) * 2 + hist as usize) as u64 * 1000 + inst as u64;
                    let mut rng = SeededRng::new(seed);
                    let g = gradient_error(&mut rng, *kind, lambda, hist);
                    probed += g.probed;
                    redrawn += g.redrawn;
                    cases += 1;
                    if g.worst > worst.0 {
                        let at = format!("{kind} lambda={lambda} hist={hist} seed={seed}");
                        worst = (g.worst, g.worst_diag, at);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst.0 <= GRAD_REL_TOL && elapsed <= GRAD_TIME_LIMIT,
        format!(
            "{cases} instances ({redrawn} redrawn near kinks), {probed} coordinates, max relative error {:.2e} <= {GRAD_REL_TOL:e} ({}) in {:.1}s",
            worst.0,
            worst.2,
            elapsed.as_secs_f64()
        ),
        format!(
            "max relative error {:.3e} ({}) over {probed} coordinates in {:.1}s (limits {GRAD_REL_TOL:e}, {}s); same coordinate at h={GRAD_DIAG_H:e}: {:.1e}",
            worst.0,
            worst.2,
            elapsed.as_secs_f64(),
            GRAD_TIME_LIMIT.as_secs(),
            worst.1
        ),
    )
}

fn affinity_defects(m: &AffinityMatrix) -> (f64, f64, f64) {
    let p = m.probs();
    let n = p.rows();
    let mut asym = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..n {
        diag = diag.max(p[(i, i)].abs());
        for j in 0..n {
            asym = asym.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    (asym, diag, (p.sum() - 1.0).abs())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(303);
    let (mut asym, mut diag, mut sum_err, mut entropy_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut flagged = 0;
    for _ in 0..AFFINITY_CASES {
        let n = 6 + (rng.next_u64() % 60) as usize;
        let dim = 2 + (rng.next_u64() % 20) as usize;
        let scale = 10f64.powf(rng.uniform(-2.0, 2.0));
        let x = rng.normal_matrix(n, dim, scale);
        let perplexity = rng.uniform(2.0, (n - 1) as f64 * 0.9);
        let (p, cond) = joint_p(&x, perplexity).unwrap();
        let z = rng.normal_matrix(n, 2, 1.0);
        let q = student_t(&z).unwrap().q;
        for m in [&p, &q] {
            let (a, d, s) = affinity_defects(m);
            asym = asym.max(a);
            diag = diag.max(d);
            sum_err = sum_err.max(s);
        }
        flagged += cond.unconverged.len();
        for i in 0..n {
            if cond.unconverged.contains(&i) {
                continue;
            }
            let h: f64 = cond
                .probs
                .row(i)
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| -v * v.log2())
                .sum();
            entropy_err = entropy_err.max((h - perplexity.log2()).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        asym <= SYMMETRY_TOL
            && diag == 0.0
            && sum_err <= SUM_TOL
            && entropy_err <= ENTROPY_TOL_BITS
            && elapsed <= AFFINITY_TIME_LIMIT,
        format!(
            "{AFFINITY_CASES} P/Q pairs: asymmetry {asym:.1e}, diagonal {diag:.1e}, sum error {sum_err:.1e}, entropy error {entropy_err:.1e} bits, {flagged} rows flagged, {:.1}s",
            elapsed.as_secs_f64()
        ),
        format!(
            "asymmetry {asym:.3e}, diagonal {diag:.3e}, sum error {sum_err:.3e}, entropy error {entropy_err:.3e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_affinity(rng: &mut SeededRng) -> AffinityMatrix {
    let n = 5 + (rng.next_u64() % 30) as usize;
    let x = rng.normal_matrix(n, 4, 1.0);
    let perplexity = rng.uniform(2.0, (n - 1) as f64 * 0.8);
    joint_p(&x, perplexity).unwrap().0
}

fn criterion_4() -> Outcome {
    let mut rng = SeededRng::new(404);
    let mut self_worst = 0.0f64;
    for _ in 0..SELF_DIVERGENCE_CASES {
        let p = random_affinity(&mut rng);
        for v in [
            kl_divergence(&p, &p).unwrap(),
            renyi_divergence(&p, &p, 0.5).unwrap(),
            wasserstein1_tv(&p, &p).unwrap(),
        ] {
            self_worst = self_worst.max(v.abs());
        }
    }
    let mut rel_worst = 0.0f64;
    for _ in 0..RENYI_KL_CASES {
        let p = random_affinity(&mut rng);
        let z = rng.normal_matrix(p.n(), 2, 1.0);
        let q = student_t(&z).unwrap().q;
        let kl = kl_divergence(&p, &q).unwrap();
        let r = renyi_divergence(&p, &q, RENYI_NEAR_ONE).unwrap();
        rel_worst = rel_worst.max((r - kl).abs() / kl.abs());
    }
    check(
        self_worst <= SELF_DIVERGENCE_TOL && rel_worst <= RENYI_KL_REL_TOL,
        format!(
            "max D(P,P) {self_worst:.1e} <= {SELF_DIVERGENCE_TOL:e}; Renyi(0.999) vs KL max relative gap {rel_worst:.2e} <= {RENYI_KL_REL_TOL}"
        ),
        format!("max D(P,P) {self_worst:.3e}; Renyi/KL relative gap {rel_worst:.3e}"),
    )
}

/// 3 classes, D = 50, separation 10, std 1: 300 train and 150 test samples.
fn benchmark_data() -> (Dataset, Dataset) {
    let spec = SynthSpec {
        per_class: 150,
        seed: 0,
        ..SynthSpec::default()
    };
    let data = gen_synthetic(&spec).unwrap().data;
    data.split(1.0 / 3.0, 0).unwrap()
}

fn criterion_5(train: &Dataset, test: &Dataset) -> Outcome {
    let classes = train.classes();
    let base = RunConfig {
        lambda: 0.0,
        seed: 5,
        ..RunConfig::default()
    };
    let with = train_with_classes(&base, &train.features, &train.labels, classes).unwrap();
    let disabled = RunConfig {
        disable_divergence: true,
        ..base.clone()
    };
    let without = train_with_classes(&disabled, &train.features, &train.labels, classes).unwrap();
    let bitwise = with.params == without.params
        && with
            .report
            .history
            .iter()
            .zip(&without.report.history)
            .all(|(a, b)| a.loss.class == b.loss.class && a.val_accuracy == b.val_accuracy);

    let mut accs = Vec::new();
    let mut head_max = 0.0f64;
    for seed in 0..LAMBDA_ONE_RUNS {
        let cfg = RunConfig {
            lambda: 1.0,
            seed,
            ..RunConfig::default()
        };
        let out = train_with_classes(&cfg, &train.features, &train.labels, classes).unwrap();
        head_max = out.report.history.iter().map(|e| e.head_grad_max).fold(head_max, f64::max);
        let pred = predict(&out.params, &test.features).unwrap();
        accs.push(accuracy(&pred, &test.labels).unwrap().accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let chance = 1.0 / classes as f64;
    let (lo, hi) = accs.iter().fold((1.0f64, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
    let summary = format!(
        "lambda=0 bitwise equal to divergence-disabled run: {bitwise}; lambda=1 max |head grad| {head_max:e}; mean test accuracy over {LAMBDA_ONE_RUNS} seeds {mean:.3} (range {lo:.3}..{hi:.3}), chance {chance:.3} +/- {CHANCE_WINDOW}"
    );
    check(
        bitwise && head_max == 0.0 && (mean - chance).abs() <= CHANCE_WINDOW,
        summary.clone(),
        summary,
    )
}

fn criterion_6(train: &Dataset, test: &Dataset) -> Outcome {
    let start = Instant::now();
    let run = RunConfig {
        lambda: 0.5,
        embed_dim: 2,
        divergence: DivergenceKind::Kl,
        epochs: 100,
        seed: 0,
        ..RunConfig::default()
    };
    let cfg = CompareConfig::new(run);
    let cmp = compare_tsne(&cfg, train, test).unwrap();
    let elapsed = start.elapsed();
    let forward_only = cmp.dren_test == embed(&cmp.params, &test.features).unwrap();
    let r = &cmp.report;
    let summary = format!(
        "N={}/{}: DREN 3-NN {:.4} (>= {DREN_KNN_MIN}), t-SNE+OOS 3-NN {:.4} (>= {TSNE_KNN_MIN}), DREN test embedding is the forward pass: {forward_only}, {:.1}s",
        r.train_size,
        r.test_size,
        r.dren_knn_accuracy,
        r.tsne_knn_accuracy,
        elapsed.as_secs_f64()
    );
    check(
        r.train_size == 300
            && r.test_size == 150
            && r.dren_knn_accuracy >= DREN_KNN_MIN
            && r.tsne_knn_accuracy >= TSNE_KNN_MIN
            && forward_only
            && elapsed <= BENCH_TIME_LIMIT,
        summary.clone(),
        summary,
    )
}

/// The committed two-blob instance: 100 points in 10 dimensions.
fn two_blobs() -> Matrix {
    let mut rng = SeededRng::new(1);
    let mut x = rng.normal_matrix(100, 10, 1.0);
    for i in 50..100 {
        x.row_mut(i).iter_mut().for_each(|v| *v += 8.0);
    }
    x
}

fn criterion_7() -> Outcome {
    let x = two_blobs();
    let cfg = TsneConfig {
        perplexity: 8.0,
        seed: 9,
        ..TsneConfig::default()
    };
    let a = tsne_fit(&x, &cfg).unwrap();
    let b = tsne_fit(&x, &cfg).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let same = bits(&a.embedding) == bits(&b.embedding);
    let ratio = a.final_kl / a.initial_kl;
    let summary = format!(
        "KL {:.4} -> {:.4} (ratio {ratio:.3} <= {TSNE_KL_RATIO}), same-seed rerun bitwise identical: {same}",
        a.initial_kl, a.final_kl
    );
    check(ratio <= TSNE_KL_RATIO && same, summary.clone(), summary)
}

fn criterion_8() -> Outcome {
    let mut rng = SeededRng::new(808);
    let x_train = rng.normal_matrix(30, 6, 1.0);
    let x_test = rng.normal_matrix(10, 6, 1.0);
    let z_train = rng.normal_matrix(30, 3, 2.0);

    let k1 = lle_weights_batch(&x_test, &x_train, &OosConfig { k: 1, ..OosConfig::default() }).unwrap();
    let z1 = oos_embed(&k1, &z_train).unwrap();
    let exact = k1
        .entries
        .iter()
        .enumerate()
        .all(|(i, e)| z1.row(i) == z_train.row(e.neighbors[0]));

    let pair = Matrix::from_rows(&[[0.0, 0.0, 0.0], [2.0, 4.0, -2.0], [30.0, 0.0, 0.0]]).unwrap();
    let mid = lle_weights(&[1.0, 2.0, -1.0], &pair, &OosConfig { k: 2, ..OosConfig::default() }).unwrap();
    let mid_err = mid.weights.iter().map(|w| (w - 0.5).abs()).fold(0.0, f64::max);
    let direct = oos_embed(
        &OosWeights {
            entries: vec![OosEntry { neighbors: vec![0, 1], weights: vec![0.5, 0.5] }],
            reg: 0.0,
        },
        &Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap(),
    )
    .unwrap();

    let w = lle_weights_batch(&x_test, &x_train, &OosConfig::default()).unwrap();
    let a = rng.normal_matrix(3, 3, 1.0);
    let b = [rng.normal(0.0, 5.0), rng.normal(0.0, 5.0), rng.normal(0.0, 5.0)];
    let affine = |z: &Matrix| {
        let mut out = z.matmul(&a).unwrap();
        for i in 0..out.rows() {
            for (o, bk) in out.row_mut(i).iter_mut().zip(&b) {
                *o += bk;
            }
        }
        out
    };
    let lhs = oos_embed(&w, &affine(&z_train)).unwrap();
    let rhs = affine(&oos_embed(&w, &z_train).unwrap());
    let affine_err = lhs.max_abs_diff(&rhs);
    let summary = format!(
        "k=1 exact: {exact}; midpoint weight error {mid_err:.1e}; convex midpoint {:?}; affine error {affine_err:.1e} (tolerance {OOS_TOL:e})",
        direct.row(0)
    );
    check(
        exact && mid_err <= OOS_TOL && direct.row(0) == [1.0, 0.0] && affine_err <= OOS_TOL,
        summary.clone(),
        summary,
    )
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dren"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut problems = Vec::new();

    // Library-level round trips.
    let mut rng = SeededRng::new(909);
    let mut x = rng.normal_matrix(12, 5, 100.0);
    x[(0, 0)] = 0.1 + 0.2;
    x[(1, 1)] = -0.0;
    x[(2, 2)] = 1e-300;
    let f = root.join("x.csv");
    io::write_features(&f, &x).unwrap();
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    if bits(&io::read_features(&f).unwrap()) != bits(&x) {
        problems.push("features".to_string());
    }
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let l = root.join("y.csv");
    io::write_labels(&l, &labels).unwrap();
    if io::read_labels(&l).unwrap() != labels {
        problems.push("labels".into());
    }
    let e = io::EmbeddingFile::new(rng.normal_matrix(12, 2, 1.0), Some(&labels)).unwrap();
    let ef = root.join("z.csv");
    io::write_embedding(&ef, &e).unwrap();
    if io::read_embedding(&ef).unwrap() != e {
        problems.push("embedding".into());
    }
    let hp = HistParams::from_data(&x, 8, HistMode::Concat).unwrap();
    let params = EncoderParams::init(5, 2, 3, Some(hp), &mut rng).unwrap();
    let ck = root.join("m.ckpt");
    checkpoint::save(&ck, &params).unwrap();
    if checkpoint::load(&ck).unwrap() != params {
        problems.push("checkpoint".into());
    }
    let cfg = RunConfig {
        divergence: DivergenceKind::Renyi { alpha: 0.25 },
        ..RunConfig::default()
    };
    let jf = root.join("c.json");
    io::write_json(&jf, &cfg).unwrap();
    if io::read_json::<RunConfig>(&jf).unwrap() != cfg {
        problems.push("run config json".into());
    }

    // Every command twice with the same flags.
    let small = ["--synth", "blobs", "--per-class", "40", "--synth-dim", "10"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> {
        small.iter().copied().chain(extra.iter().copied()).collect()
    };
    let synth_dir = root.join("synth");
    let tsne_dir = root.join("tsne_ref");
    let oos_dir = root.join("oos_ref");
    assert!(run_cli(&["synth", "--per-class", "40", "--synth-dim", "10"], &synth_dir));
    let sf = synth_dir.join("features.csv");
    let sl = synth_dir.join("labels.csv");
    let (sf, sl) = (sf.to_str().unwrap(), sl.to_str().unwrap());
    assert!(run_cli(&["tsne", "--features", sf, "--labels", sl, "--iterations", "200"], &tsne_dir));
    let te = tsne_dir.join("tsne_embedding.csv");
    let te = te.to_str().unwrap();
    assert!(run_cli(
        &["embed-oos", "--train-features", sf, "--train-embedding", te, "--test-features", sf, "--test-labels", sl],
        &oos_dir
    ));
    let oe = oos_dir.join("oos_embedding.csv");
    let oe = oe.to_str().unwrap();

    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("train", [&["train"][..], &with(&["--epochs", "15", "--seed", "7"])].concat()),
        (
            "sweep",
            [&["sweep"][..], &with(&["--epochs", "5", "--lambdas", "0,1", "--dims", "2", "--folds", "2"])].concat(),
        ),
        (
            "compare-tsne",
            [&["compare-tsne"][..], &with(&["--epochs", "10", "--tsne-iterations", "200"])].concat(),
        ),
        ("tsne", vec!["tsne", "--features", sf, "--labels", sl, "--iterations", "200"]),
        (
            "embed-oos",
            vec!["embed-oos", "--train-features", sf, "--train-embedding", te, "--test-features", sf],
        ),
        ("knn-eval", vec!["knn-eval", "--train-embedding", te, "--test-embedding", oe]),
        ("synth", vec!["synth", "--generator", "helix", "--synth-dim", "4", "--per-class", "20"]),
    ];
    for (name, args) in &commands {
        let a = root.join(format!("{name}_a"));
        let b = root.join(format!("{name}_b"));
        if !(run_cli(args, &a) && run_cli(args, &b)) {
            problems.push(format!("{name} failed to run"));
            continue;
        }
        if dir_files(&a) != dir_files(&b) {
            problems.push(format!("{name} artifacts differ between runs"));
        }
    }
    // Emitted text files parse back.
    let trained = root.join("train_a");
    if io::read_embedding(&trained.join("embedding.csv")).map(|e| e.z.rows()).ok() != Some(120) {
        problems.push("train embedding.csv".into());
    }
    if io::read_json::<dren::trainer::TrainReport>(&trained.join("report.json")).is_err() {
        problems.push("report.json".into());
    }
    if checkpoint::load(&trained.join("model.ckpt")).is_err() {
        problems.push("model.ckpt".into());
    }
    if io::read_json::<dren::trainer::SweepReport>(&root.join("sweep_a").join("sweep.json")).is_err() {
        problems.push("sweep.json".into());
    }

    check(
        problems.is_empty(),
        format!("5 file formats round-trip bit-exactly; {} commands byte-identical across repeated runs", commands.len()),
        problems.join("; "),
    )
}

fn main() {
    let (train, test) = benchmark_data();
    let criteria: Vec<(usize, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(criterion_2)),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(|| criterion_5(&train, &test))),
        (6, Box::new(|| criterion_6(&train, &test))),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (n, f) in &criteria {
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
            Ok(Ok(msg)) => println!("criterion {n}: PASS: {msg}"),
            Ok(Err(msg)) => {
                failed += 1;
                println!("criterion {n}: FAIL: {msg}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {n}: FAIL: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
