//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! Trained checkpoints are cached in `target/acceptance/<name>-<hash>.bdcd`,
//! keyed by the SHA-256 of the config file, together with the training time.
//! Set `BANDDET_RETRAIN=1` to ignore the cache.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use banddet::channel::{
    complex_normal, draw_doubly_selective_channel, draw_near_banded_rayleigh, substream, underwater_channel_from_paths,
    BandMatrix, DoublySelectiveParams, UnderwaterParams, UnderwaterPath,
};
use banddet::classical::detect_lmmse;
use banddet::detector::{load_detector, preprocess, save_detector, NeuralDetector};
use banddet_harness::checks::{
    conv_oracle_error, gradcheck_suite, solver_oracle_errors, CONV_TOLERANCE, SOLVER_TOLERANCE,
};
use banddet_harness::stats::significantly_fewer;
use banddet_harness::train::initial_detector;
use banddet_harness::{
    evaluate_ber, sha256_hex, train, BerReport, DetectorKind, EvalConfig, HarnessError, NamedDetector, Sample,
    Scenario, StopRule, TrainingConfig,
};
use num_complex::Complex64;
use rand::Rng;

const EVAL_SEED: u64 = 1;
const ORDER_SNRS: [f64; 3] = [9.0, 11.0, 13.0];
const ORDER_BITS: u64 = 1_000_000;

type Verdict = Result<(bool, String), HarnessError>;

struct Trained {
    detector: NeuralDetector<f64>,
    seconds: f64,
    cached: bool,
}

struct Context {
    root: PathBuf,
    cache: PathBuf,
    retrain: bool,
    trained: HashMap<String, Trained>,
}

impl Context {
    fn new() -> Self {
        let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
        let root = manifest.join("../..").canonicalize().unwrap_or_else(|_| manifest.join("../.."));
        let target = std::env::var_os("CARGO_TARGET_DIR").map(PathBuf::from).unwrap_or_else(|| root.join("target"));
        Self {
            cache: target.join("acceptance"),
            root,
            retrain: std::env::var("BANDDET_RETRAIN").is_ok_and(|v| v == "1"),
            trained: HashMap::new(),
        }
    }

    fn config(&self, name: &str) -> Result<TrainingConfig, HarnessError> {
        TrainingConfig::load(&self.root.join("configs").join(format!("{name}.toml")))
    }

    fn trained(&mut self, name: &str) -> Result<&Trained, HarnessError> {
        if !self.trained.contains_key(name) {
            let t = self.load_or_train(name)?;
            self.trained.insert(name.to_string(), t);
        }
        Ok(&self.trained[name])
    }

    fn load_or_train(&self, name: &str) -> Result<Trained, HarnessError> {
        let bytes = fs::read(self.root.join("configs").join(format!("{name}.toml")))?;
        let stem = format!("{name}-{}", &sha256_hex(&bytes)[..12]);
        let ckpt = self.cache.join(format!("{stem}.bdcd"));
        let meta = self.cache.join(format!("{stem}.toml"));
        if !self.retrain && ckpt.is_file() && meta.is_file() {
            let detector = load_detector(fs::read(&ckpt)?.as_slice())?;
            let table: toml::Table =
                fs::read_to_string(&meta)?.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
            let seconds = table.get("seconds").and_then(|v| v.as_float()).unwrap_or(f64::NAN);
            return Ok(Trained { detector, seconds, cached: true });
        }
        let cfg = self.config(name)?;
        eprintln!("training {name} (up to {:.0} s)", cfg.max_train_seconds);
        let outcome = train(&cfg)?;
        fs::create_dir_all(&self.cache)?;
        let mut buf = Vec::new();
        save_detector(&mut buf, &outcome.detector)?;
        fs::write(&ckpt, buf)?;
        let mut trace = Vec::new();
        outcome.write_trace(&mut trace)?;
        fs::write(self.cache.join(format!("{stem}_loss.csv")), trace)?;
        fs::write(
            &meta,
            format!(
                "seconds = {:.3}\nsteps = {}\nstop = \"{:?}\"\nbest_validation_loss = {:e}\n",
                outcome.seconds, outcome.steps, outcome.stop, outcome.best_validation_loss
            ),
        )?;
        Ok(Trained { detector: outcome.detector, seconds: outcome.seconds, cached: false })
    }

    fn training_note(&self, name: &str) -> String {
        let t = &self.trained[name];
        format!("{name} trained in {:.0} s{}", t.seconds, if t.cached { " (cached)" } else { "" })
    }
}

fn evaluate(
    detectors: &[NamedDetector],
    scenario: Scenario,
    snrs: &[f64],
    bits: u64,
) -> Result<BerReport, HarnessError> {
    let mut cfg = EvalConfig::new(scenario, snrs.to_vec(), EVAL_SEED);
    cfg.stop = StopRule::fixed_bits(bits);
    evaluate_ber(detectors, &cfg)
}

fn baselines() -> [NamedDetector; 2] {
    [NamedDetector::new("lmmse", DetectorKind::Lmmse), NamedDetector::new("ls", DetectorKind::Ls)]
}

/// Each detector's BER is below the next one's, with disjoint 95% intervals.
fn ordered_by_intervals(report: &BerReport, order: &[&str], snrs: &[f64]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &snr in snrs {
        let rows: Vec<_> = order.iter().map(|d| report.row(d, snr).expect("row exists")).collect();
        for w in rows.windows(2) {
            ok &= w[0].ci_hi < w[1].ci_lo;
        }
        let bers: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.ber)).collect();
        parts.push(format!("{snr} dB {}", bers.join(" < ")));
    }
    (ok, format!("{} [{}]", parts.join("; "), order.join(" < ")))
}

/// Each detector makes significantly fewer errors than the next on the shared frames.
fn ordered_by_sign_test(report: &BerReport, order: &[&str], snrs: &[f64]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &snr in snrs {
        let mut line = vec![format!("{:.2e}", report.row(order[0], snr).expect("row exists").ber)];
        for w in order.windows(2) {
            let (a_only, b_only) = report.discordance(w[0], w[1], snr).expect("pair exists");
            ok &= significantly_fewer(a_only, b_only, 0.05);
            let p = report.paired_p(w[0], w[1], snr).expect("pair exists");
            line.push(format!("{:.2e} (p={p:.1e})", report.row(w[1], snr).expect("row exists").ber));
        }
        parts.push(format!("{snr} dB {}", line.join(" < ")));
    }
    (ok, format!("{} [{}]", parts.join("; "), order.join(" < ")))
}

fn figure_ordering(ctx: &mut Context, config: &str) -> Verdict {
    let cfg = ctx.config(config)?;
    let det = NamedDetector::neural("cnn", &ctx.trained(config)?.detector);
    let [lmmse, ls] = baselines();
    let start = Instant::now();
    let report = evaluate(&[det, lmmse, ls], Scenario::from_config(&cfg), &ORDER_SNRS, ORDER_BITS)?;
    let eval_seconds = start.elapsed().as_secs_f64();
    let (ok, detail) = ordered_by_intervals(&report, &["cnn", "lmmse", "ls"], &ORDER_SNRS);
    let train_seconds = ctx.trained[config].seconds;
    let within = train_seconds <= 3600.0 && eval_seconds <= 600.0;
    let bits = report.rows[0].bits;
    Ok((
        ok && within,
        format!("{detail}; {bits} bits/point; {}; evaluation {eval_seconds:.0} s", ctx.training_note(config)),
    ))
}

fn criterion_1() -> Verdict {
    let (lmmse, ls) = solver_oracle_errors(11, 100)?;
    Ok((
        lmmse <= SOLVER_TOLERANCE && ls <= SOLVER_TOLERANCE,
        format!("100 cases, max relative error lmmse {lmmse:.1e}, ls {ls:.1e}"),
    ))
}

fn criterion_2() -> Verdict {
    let reports = gradcheck_suite(12)?;
    let worst = reports.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    let checked: usize = reports.iter().map(|(_, r)| r.checked).sum();
    let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
    Ok((
        reports.iter().all(|(_, r)| r.passed()),
        format!(
            "{} networks ({}), {checked} parameters, worst relative error {worst:.1e}",
            reports.len(),
            names.join(", ")
        ),
    ))
}

fn criterion_3() -> Verdict {
    let err = conv_oracle_error(13, 100)?;
    Ok((err <= CONV_TOLERANCE, format!("100 cases, max abs difference {err:.1e}")))
}

fn criterion_4() -> Verdict {
    let snrs = [7.0, 9.0, 11.0];
    let dets = [
        NamedDetector::new("map", DetectorKind::Map),
        NamedDetector::new("lmmse", DetectorKind::Lmmse),
        NamedDetector::new("ls", DetectorKind::Ls),
    ];
    let report = evaluate(&dets, Scenario::banded(10, 1), &snrs, 200_000)?;
    let frames = report.frames[0].frames;
    let (ok, detail) = ordered_by_sign_test(&report, &["map", "lmmse", "ls"], &snrs);
    Ok((ok && frames >= 20_000, format!("{frames} frames; {detail}")))
}

fn criterion_6(ctx: &mut Context) -> Verdict {
    let wide = NamedDetector::neural("ktrain100", &ctx.trained("k100_b1_cnn")?.detector);
    let matched = NamedDetector::neural("ktrain20", &ctx.trained("k20_b1_cnn")?.detector);
    let report = evaluate(&[wide, matched], Scenario::banded(20, 1), &ORDER_SNRS, ORDER_BITS)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for snr in ORDER_SNRS {
        let a = report.row("ktrain100", snr).expect("row exists").ber;
        let b = report.row("ktrain20", snr).expect("row exists").ber;
        let ratio = a.max(b) / a.min(b);
        ok &= ratio <= 1.5;
        parts.push(format!("{snr} dB {a:.2e} vs {b:.2e} (x{ratio:.2})"));
    }
    Ok((
        ok,
        format!(
            "K=20, K_train 100 vs 20: {}; {}; {}",
            parts.join("; "),
            ctx.training_note("k100_b1_cnn"),
            ctx.training_note("k20_b1_cnn")
        ),
    ))
}

fn criterion_9a(ctx: &mut Context) -> Verdict {
    let det = ctx.trained("near_k20_ccnn")?.detector.clone();
    let mut rng = substream(91, 0);
    let mut mismatched = 0;
    for _ in 0..100 {
        let k = rng.random_range(4..=64);
        let shift = rng.random_range(1..k);
        let ch = draw_near_banded_rayleigh(k, 1, &mut rng)?;
        let y: Vec<Complex64> = (0..k).map(|_| complex_normal(&mut rng)).collect();
        let mut y_rot = vec![Complex64::new(0.0, 0.0); k];
        for (i, v) in y.iter().enumerate() {
            y_rot[(i + shift) % k] = *v;
        }
        let soft = det.soft(&ch, &y)?;
        let soft_rot = det.soft(&ch.rotated(shift), &y_rot)?;
        if (0..k).any(|i| soft[i].to_bits() != soft_rot[(i + shift) % k].to_bits()) {
            mismatched += 1;
        }
    }
    Ok((mismatched == 0, format!("{mismatched} of 100 rotated cases differ in any output bit")))
}

fn criterion_9b(ctx: &mut Context) -> Verdict {
    let ccnn = NamedDetector::neural("ccnn", &ctx.trained("near_k20_ccnn")?.detector);
    let cnn = NamedDetector::neural("cnn", &ctx.trained("near_k20_cnn")?.detector);
    let scenario = Scenario::from_config(&ctx.config("near_k20_ccnn")?);
    let report = evaluate(&[ccnn, cnn], scenario, &ORDER_SNRS, 2 * ORDER_BITS)?;
    let (ok, detail) = ordered_by_sign_test(&report, &["ccnn", "cnn"], &ORDER_SNRS);
    Ok((
        ok,
        format!(
            "near-banded K=20: {detail}; {}; {}",
            ctx.training_note("near_k20_ccnn"),
            ctx.training_note("near_k20_cnn")
        ),
    ))
}

fn criterion_9c(ctx: &mut Context) -> Verdict {
    let ccnn = NamedDetector::neural("ccnn", &ctx.trained("near_k100_ccnn")?.detector);
    let cnn = NamedDetector::neural("cnn", &ctx.trained("near_k100_cnn")?.detector);
    let scenario = Scenario::from_config(&ctx.config("near_k100_ccnn")?);
    let report = evaluate(&[ccnn, cnn], scenario, &ORDER_SNRS, ORDER_BITS)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for snr in ORDER_SNRS {
        let a = report.row("ccnn", snr).expect("row exists");
        let b = report.row("cnn", snr).expect("row exists");
        ok &= a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi;
        parts.push(format!(
            "{snr} dB ccnn {:.2e} [{:.2e}, {:.2e}] cnn {:.2e} [{:.2e}, {:.2e}]",
            a.ber, a.ci_lo, a.ci_hi, b.ber, b.ci_lo, b.ci_hi
        ));
    }
    Ok((
        ok,
        format!(
            "near-banded K=100: {}; {}; {}",
            parts.join("; "),
            ctx.training_note("near_k100_ccnn"),
            ctx.training_note("near_k100_cnn")
        ),
    ))
}

fn criterion_10(ctx: &mut Context) -> Verdict {
    let det = NamedDetector::neural("cnn2d", &ctx.trained("tdmr_cnn2d")?.detector);
    let scenario = Scenario { size: 64, grid_rows: 64, ..Scenario::from_config(&ctx.config("tdmr_cnn2d")?) };
    let dets = [
        det,
        NamedDetector::new("local-lmmse", DetectorKind::LocalLmmse),
        NamedDetector::new("local-ls", DetectorKind::LocalLs),
    ];
    let report = evaluate(&dets, scenario, &ORDER_SNRS, ORDER_BITS)?;
    let (a, da) = ordered_by_sign_test(&report, &["cnn2d", "local-lmmse"], &ORDER_SNRS);
    let (b, db) = ordered_by_sign_test(&report, &["cnn2d", "local-ls"], &ORDER_SNRS);
    Ok((a && b, format!("64x64 grid: {da}; {db}; {}", ctx.training_note("tdmr_cnn2d"))))
}

fn criterion_11(ctx: &mut Context) -> Verdict {
    let base = ctx.config("k100_b1_cnn")?;
    let mut sizes = Vec::new();
    for k in [20, 100, 1024] {
        let det = initial_detector::<f64>(&TrainingConfig { k_train: k, ..base.clone() })?;
        let mut buf = Vec::new();
        save_detector(&mut buf, &det)?;
        sizes.push(buf.len());
    }
    let trained = ctx.trained("k100_b1_cnn")?.detector.clone();
    let mut buf = Vec::new();
    save_detector(&mut buf, &trained)?;
    let loaded: NeuralDetector<f64> = load_detector(buf.as_slice())?;
    let mut rng = substream(111, 0);
    let mut runs = Vec::new();
    for k in [20, 100, 1024] {
        let sample = Scenario::banded(k, 1).draw(13.0, &mut rng)?;
        let hard = match &sample {
            Sample::Banded { channel, frame } => loaded.detect(channel, &frame.y)?,
            _ => unreachable!("banded scenario"),
        };
        runs.push(hard.len() == k);
    }
    let same = sizes.iter().all(|&s| s == sizes[0]) && buf.len() == sizes[0];
    Ok((
        same && runs.iter().all(|&r| r),
        format!(
            "checkpoint bytes {:?} for K = 20, 100, 1024, trained {}; trained checkpoint runs at all three",
            sizes,
            buf.len()
        ),
    ))
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(k, t)| (k.ln(), t.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn min_time(reps: usize, mut f: impl FnMut() -> Result<(), HarnessError>) -> Result<f64, HarnessError> {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn criterion_12(ctx: &mut Context) -> Verdict {
    let det: NeuralDetector<f32> = ctx.trained("k100_b1_cnn")?.detector.cast();
    let mut rng = substream(121, 0);
    let (mut cnn, mut lmmse) = (Vec::new(), Vec::new());
    for k in [256, 512, 1024, 2048] {
        let frames: Vec<_> = (0..8)
            .map(|_| match Scenario::banded(k, 1).draw(11.0, &mut rng) {
                Ok(Sample::Banded { channel, frame }) => Ok((channel, frame.y)),
                Ok(_) => unreachable!("banded scenario"),
                Err(e) => Err(e),
            })
            .collect::<Result<_, _>>()?;
        let sigma2 = Scenario::banded(k, 1).sigma2(11.0);
        let t_cnn = min_time(5, || {
            let inputs = frames.iter().map(|(c, y)| preprocess(c, y)).collect::<Result<Vec<_>, _>>()?;
            std::hint::black_box(det.soft_batch(&inputs)?);
            Ok(())
        })?;
        let t_lmmse = min_time(5, || {
            for _ in 0..50 {
                for (c, y) in &frames {
                    std::hint::black_box(detect_lmmse(c, y, sigma2)?);
                }
            }
            Ok(())
        })?;
        cnn.push((k as f64, t_cnn));
        lmmse.push((k as f64, t_lmmse));
    }
    let (a, b) = (slope(&cnn), slope(&lmmse));
    let ok = (a - 1.0).abs() <= 0.15 && (b - 1.0).abs() <= 0.15;
    let ms = |v: &[(f64, f64)]| v.iter().map(|(_, t)| format!("{:.2}", t * 1e3)).collect::<Vec<_>>().join("/");
    Ok((ok, format!("slope cnn {a:.3} ({} ms), lmmse {b:.3} ({} ms) over K = 256..2048", ms(&cnn), ms(&lmmse))))
}

fn criterion_13() -> Verdict {
    let params = DoublySelectiveParams::energy_preserving(128, 0.0, 1)?;
    let mut worst_ds = 0.0f64;
    let mut rng = substream(131, 0);
    for _ in 0..10 {
        let ch = draw_doubly_selective_channel(&params, &mut rng)?;
        let dense = ch.to_dense();
        let k = ch.size();
        for (i, v) in dense.iter().enumerate() {
            if i / k != i % k {
                worst_ds = worst_ds.max(v.norm());
            }
        }
    }
    let uw = UnderwaterParams { subcarriers: 256, ..UnderwaterParams::default() };
    let ch = underwater_channel_from_paths(&uw, &[UnderwaterPath { amplitude: 1.0, delay: 0.0, doppler_rate: 0.0 }])?;
    let dense = ch.to_dense();
    let k = ch.size();
    let worst_uw = dense
        .iter()
        .enumerate()
        .map(|(i, v)| (v - if i / k == i % k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).norm())
        .fold(0.0, f64::max);
    Ok((
        worst_ds < 1e-10 && worst_uw < 1e-10,
        format!("f_d=0 max off-diagonal {worst_ds:.1e}; single-path underwater max |H - I| {worst_uw:.1e}"),
    ))
}

fn main() {
    banddet_harness::tune_allocator();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,banddet_harness::train=info"))
        .init();
    let mut ctx = Context::new();
    eprintln!("checkpoint cache: {}{}", ctx.cache.display(), if ctx.retrain { " (retraining)" } else { "" });

    type Check = fn(&mut Context) -> Verdict;
    // (id, title, check, wall-time limit in seconds)
    let checks: [(&str, &str, Check, Option<f64>); 15] = [
        ("1", "banded solvers match dense oracles", |_| criterion_1(), Some(1.0)),
        ("2", "gradients match finite differences", |_| criterion_2(), Some(10.0)),
        ("3", "convolution matches dense block-banded product", |_| criterion_3(), Some(1.0)),
        ("4", "MAP <= LMMSE <= LS at K=10", |_| criterion_4(), Some(120.0)),
        ("5", "CNN < LMMSE < LS at K=100, B=1", |c| figure_ordering(c, "k100_b1_cnn"), None),
        ("6", "K_train=100 within 1.5x of K_train=20 at K=20", criterion_6, None),
        ("7", "CNN < LMMSE < LS at K=100, B=2", |c| figure_ordering(c, "k100_b2_cnn"), None),
        ("8", "CNN < LMMSE < LS under Gaussian-mixture noise", |c| figure_ordering(c, "k100_b1_gm_cnn"), None),
        ("9a", "cyclic detector is rotation equivariant", criterion_9a, None),
        ("9b", "CCNN <= CNN at near-banded K=20", criterion_9b, None),
        ("9c", "CCNN and CNN intervals overlap at near-banded K=100", criterion_9c, None),
        ("10", "2-D CNN beats local LMMSE and local LS", criterion_10, None),
        ("11", "checkpoint size independent of K", criterion_11, None),
        ("12", "linear inference time in K", criterion_12, None),
        ("13", "channel generators reduce to diagonal/identity", |_| criterion_13(), None),
    ];

    let mut failed = Vec::new();
    for (id, title, check, limit) in checks {
        let start = Instant::now();
        let (mut ok, detail) = match check(&mut ctx) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = limit {
            ok &= secs < limit;
        }
        println!("{} criterion {id:>3}: {title}: {detail} ({secs:.2} s)", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(id);
        }
    }
    // criterion 9 is one criterion with three parts
    let total = 13;
    let failed_criteria: std::collections::BTreeSet<&str> =
        failed.iter().map(|id| id.trim_end_matches(['a', 'b', 'c'])).collect();
    println!("{} of {total} criteria passed", total - failed_criteria.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
