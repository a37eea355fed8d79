//! Release gate: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the libtest harness so the lines are always printed.
//!
//! The slow criteria (6, 7, 8) train real models on synthetic corpora and
//! take several minutes each on one core.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sni_sight::cli;
use sni_sight::corpus::{pair_cover_triples, Dataset, SplitSide, WebsiteUniverse};
use sni_sight::nn::{
    dense_backward, dense_forward, lstm_backward, lstm_forward, sigmoid_ce_loss, Activation, DenseParams, LstmInput,
    LstmParams, Tensor,
};
use sni_sight::pipeline::{
    ablate_scrub, compare_reports, evaluate_dataset, paired_t_test, train_fc, train_lstm, write_predictions,
    EvalOptions, EvalReport, Evaluation, FcModelSpec, LstmModelSpec, TrainOptions,
};
use sni_sight::synth::{generate_corpus, LabelPlan, Preset, SynthConfig};
use sni_sight::tls::{extract_from_bytes, ExtractOptions};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

// 1 ------------------------------------------------------------------------

fn parser_conformance() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, expect) in common::FIXTURES {
        if let Err(e) = common::check_fixture(name, expect) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let took = within(start, Duration::from_secs(1), "fixture suite")?;
    ensure(common::FIXTURES.len() >= 12, || format!("only {} fixtures", common::FIXTURES.len()))?;
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{} fixtures byte-exact in {took:.2?}", common::FIXTURES.len()))
}

// 2 ------------------------------------------------------------------------

fn round_trip() -> Outcome {
    let start = Instant::now();
    let universe = WebsiteUniverse::default_sites();
    let config = SynthConfig::preset(Preset::Default, universe.clone(), 2).map_err(|e| e.to_string())?;
    let labels = LabelPlan::Random { count: 1000 }.labels(&universe, 2).map_err(|e| e.to_string())?;
    let corpus = generate_corpus(&config, &labels, 1).map_err(|e| e.to_string())?;
    ensure(corpus.len() == 1000, || format!("{} traces", corpus.len()))?;
    let (mut mismatches, mut events) = (0, 0);
    for st in &corpus {
        let got = extract_from_bytes(&st.to_pcap(), ExtractOptions::default()).map_err(|e| e.to_string())?.events;
        let got: Vec<(&str, _)> = got.iter().map(|e| (e.server_name.as_str(), e.tls_version)).collect();
        let want: Vec<(&str, _)> = st.trace.events.iter().map(|e| (e.sni.as_str(), e.ver)).collect();
        events += want.len();
        mismatches += (got != want) as usize;
    }
    let took = within(start, Duration::from_secs(30), "round trip")?;
    ensure(mismatches == 0, || format!("{mismatches} of 1000 traces differ"))?;
    Ok(format!("1000 traces, {events} events, 0 mismatches in {took:.2?}"))
}

// 3 ------------------------------------------------------------------------

const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;

/// Central differences of `f` at `x`, compared against `analytic`.
fn fd_error(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let plus = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let minus = f(&probe);
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max(err);
    }
    worst
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

fn with(t: &Tensor, data: &[f64]) -> Tensor {
    Tensor::from_vec(t.shape(), data.to_vec()).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Worst relative error over every LSTM parameter and input; loss is a fixed
/// random projection of all hidden outputs.
fn lstm_check(seed: u64) -> f64 {
    let (t, b, v, h) = (3, 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = LstmParams {
        w_input: random_tensor(&mut rng, &[v, 4 * h], 1.0),
        w_hidden: random_tensor(&mut rng, &[h, 4 * h], 1.0),
        bias: random_tensor(&mut rng, &[4 * h], 1.0),
    };
    let x = random_tensor(&mut rng, &[t, b, v], 1.5);
    let r = random_tensor(&mut rng, &[t, b, h], 1.0);
    let loss = |p: &LstmParams, x: &Tensor| dot(&lstm_forward(p, &LstmInput::Dense(x), None).unwrap().outputs, &r);
    let fwd = lstm_forward(&p, &LstmInput::Dense(&x), None).unwrap();
    let g = lstm_backward(&p, &LstmInput::Dense(&x), &fwd.cache, &r).unwrap();

    let mut worst = fd_error(p.w_input.data(), g.w_input.data(), |d| {
        loss(&LstmParams { w_input: with(&p.w_input, d), ..p.clone() }, &x)
    });
    worst = worst.max(fd_error(p.w_hidden.data(), g.w_hidden.data(), |d| {
        loss(&LstmParams { w_hidden: with(&p.w_hidden, d), ..p.clone() }, &x)
    }));
    worst = worst.max(fd_error(p.bias.data(), g.bias.data(), |d| loss(&LstmParams { bias: with(&p.bias, d), ..p.clone() }, &x)));
    worst = worst.max(fd_error(x.data(), g.d_input.as_ref().unwrap().data(), |d| loss(&p, &with(&x, d))));

    // one-hot input selects rows of w_input
    let idx = [0usize, 1, 1, 0, 1, 0];
    let one_hot = LstmInput::OneHot { batch: b, steps: t, indices: &idx };
    let fwd = lstm_forward(&p, &one_hot, None).unwrap();
    let g = lstm_backward(&p, &one_hot, &fwd.cache, &r).unwrap();
    worst.max(fd_error(p.w_input.data(), g.w_input.data(), |d| {
        let q = LstmParams { w_input: with(&p.w_input, d), ..p.clone() };
        dot(&lstm_forward(&q, &one_hot, None).unwrap().outputs, &r)
    }))
}

fn dense_check(seed: u64) -> f64 {
    let (b, i, o) = (3, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for act in [Activation::Relu, Activation::Identity] {
        // redraw until no pre-activation sits within reach of the ReLU kink
        let (p, x) = loop {
            let p = DenseParams { weight: random_tensor(&mut rng, &[i, o], 1.0), bias: random_tensor(&mut rng, &[o], 1.0) };
            let x = random_tensor(&mut rng, &[b, i], 1.0);
            let (z, _) = dense_forward(&p, &x, Activation::Identity).unwrap();
            if z.data().iter().all(|v| v.abs() > 1e-3) {
                break (p, x);
            }
        };
        let r = random_tensor(&mut rng, &[b, o], 1.0);
        let loss = |p: &DenseParams, x: &Tensor| dot(&dense_forward(p, x, act).unwrap().0, &r);
        let (_, cache) = dense_forward(&p, &x, act).unwrap();
        let g = dense_backward(&p, &cache, &r).unwrap();
        worst = worst.max(fd_error(p.weight.data(), g.weight.data(), |d| {
            loss(&DenseParams { weight: with(&p.weight, d), bias: p.bias.clone() }, &x)
        }));
        worst = worst.max(fd_error(p.bias.data(), g.bias.data(), |d| {
            loss(&DenseParams { weight: p.weight.clone(), bias: with(&p.bias, d) }, &x)
        }));
        worst = worst.max(fd_error(x.data(), g.d_input.data(), |d| loss(&p, &with(&x, d))));
    }
    worst
}

fn loss_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = random_tensor(&mut rng, &[4, 5], 6.0);
    let targets = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.gen_range(0..2) as f64).collect()).unwrap();
    let (_, grad) = sigmoid_ce_loss(&logits, &targets).unwrap();
    fd_error(logits.data(), grad.data(), |d| sigmoid_ce_loss(&with(&logits, d), &targets).unwrap().0)
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    for seed in 0..100 {
        worst[0] = worst[0].max(lstm_check(seed));
        worst[1] = worst[1].max(dense_check(seed));
        worst[2] = worst[2].max(loss_check(seed));
    }
    let took = within(start, Duration::from_secs(10), "gradient checks")?;
    let detail = format!("max rel err lstm {:.1e}, dense {:.1e}, sigmoid-ce {:.1e} over 100 seeds", worst[0], worst[1], worst[2]);
    ensure(worst.iter().all(|&w| w < FD_TOL), || detail.clone())?;
    Ok(format!("{detail} in {took:.2?}"))
}

// 4 ------------------------------------------------------------------------

/// Recounts the confusion totals from the JSONL prediction dump, reading
/// it as untyped JSON, and compares them with the report.
fn recount(report: &EvalReport, dump: &Path) -> Result<u64, String> {
    let n = report.samples.per_class.len();
    let mut per = vec![[0u64; 4]; n]; // tp fp tn fn
    let (mut samples, mut recovered) = (0u64, 0u64);
    let text = std::fs::read_to_string(dump).map_err(|e| e.to_string())?;
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let set = |key: &str| -> BTreeSet<u64> { v[key].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect() };
        let (decision, truth) = (set("decision"), set("truth"));
        samples += 1;
        recovered += decision.intersection(&truth).count() as u64;
        for (i, c) in per.iter_mut().enumerate() {
            let (d, t) = (decision.contains(&(i as u64)), truth.contains(&(i as u64)));
            c[match (t, d) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            }] += 1;
        }
    }
    let s = &report.samples;
    ensure(samples == s.samples, || format!("{samples} dumped samples vs {} reported", s.samples))?;
    ensure(recovered == s.labels_recovered, || format!("labels recovered {recovered} vs {}", s.labels_recovered))?;
    let mut total = [0u64; 4];
    for (c, m) in per.iter().zip(&s.per_class) {
        let t = &m.totals;
        ensure(*c == [t.tp, t.fp, t.tn, t.fn_], || format!("{}: recount {c:?} vs {t:?}", m.site))?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(c[0], c[0] + c[1]), ratio(c[0], c[0] + c[3]));
        let f1 = ratio(2 * c[0], 2 * c[0] + c[1] + c[3]);
        ensure(close(p, m.precision) && close(r, m.recall) && close(f1, m.f1), || format!("{}: rates differ", m.site))?;
        ensure(close(ratio(c[0] + c[2], c.iter().sum()), m.accuracy), || format!("{}: accuracy differs", m.site))?;
        for k in 0..4 {
            total[k] += c[k];
        }
    }
    ensure(total.iter().sum::<u64>() == samples * n as u64, || "slot count".into())?;
    let acc = (total[0] + total[2]) as f64 / (samples * n as u64) as f64;
    ensure(acc == s.accuracy, || format!("accuracy recount {acc} vs {}", s.accuracy))?;
    ensure((recovered as f64 / samples as f64 - s.mean_labels_recovered).abs() < 1e-12, || "mean labels".into())?;
    Ok(samples)
}

/// Every evaluation produced by the gate is audited here.
#[derive(Default)]
struct Audit {
    runs: Vec<(String, Result<u64, String>)>,
}

impl Audit {
    fn check(&mut self, name: &str, evaluation: &Evaluation) {
        let dir = tempfile::tempdir().unwrap();
        let dump = dir.path().join("predictions.jsonl");
        let result = write_predictions(&dump, &evaluation.predictions)
            .map_err(|e| e.to_string())
            .and_then(|()| recount(&evaluation.report, &dump));
        self.runs.push((name.to_string(), result));
    }

    fn outcome(&self) -> Outcome {
        ensure(!self.runs.is_empty(), || "no evaluation runs".into())?;
        let bad: Vec<String> =
            self.runs.iter().filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}"))).collect();
        ensure(bad.is_empty(), || bad.join("; "))?;
        let samples: u64 = self.runs.iter().map(|(_, r)| *r.as_ref().unwrap()).sum();
        Ok(format!("{} evaluation runs, {samples} samples recounted exactly", self.runs.len()))
    }
}

// 5 ------------------------------------------------------------------------

fn covering() -> Outcome {
    let start = Instant::now();
    for n in 3..=12usize {
        let universe = WebsiteUniverse::new((0..n).map(|i| format!("site{i}.example"))).unwrap();
        let triples = pair_cover_triples(&universe).map_err(|e| e.to_string())?;
        ensure(triples.len() == n * (n - 1) / 2, || format!("n = {n}: {} triples", triples.len()))?;
        for t in &triples {
            ensure(t[0] != t[1] && t[1] != t[2] && t[0] != t[2] && t.iter().all(|&s| s < n), || format!("n = {n}: bad triple {t:?}"))?;
        }
        for a in 0..n {
            for b in a + 1..n {
                ensure(triples.iter().any(|t| t.contains(&a) && t.contains(&b)), || format!("n = {n}: pair ({a}, {b}) uncovered"))?;
            }
        }
    }
    let took = within(start, Duration::from_secs(1), "covering check")?;
    Ok(format!("n = 3..=12 exact size and full pair coverage in {took:.2?}"))
}

// 6 ------------------------------------------------------------------------

fn build_dataset(config: &SynthConfig, plan: LabelPlan, repetitions: u64, seed: u64) -> Result<Dataset, String> {
    let labels = plan.labels(&config.universe, seed).map_err(|e| e.to_string())?;
    let corpus = generate_corpus(config, &labels, repetitions).map_err(|e| e.to_string())?;
    let traces = corpus.into_iter().map(|s| s.trace).collect();
    Dataset::build(traces, config.universe.clone(), 20, 0.85, seed).map_err(|e| e.to_string())
}

fn lstm_eval(dataset: &Dataset, spec: &LstmModelSpec, seed: u64) -> Result<Evaluation, String> {
    let run = train_lstm(dataset, spec, seed, TrainOptions::default()).map_err(|e| e.to_string())?;
    evaluate_dataset(&run.model, dataset, SplitSide::Test, &EvalOptions::default()).map_err(|e| e.to_string())
}

fn separable(audit: &mut Audit) -> Outcome {
    let start = Instant::now();
    let seed = 6;
    let config =
        SynthConfig::preset(Preset::Separable, WebsiteUniverse::default_sites(), seed).map_err(|e| e.to_string())?;
    let dataset = build_dataset(&config, LabelPlan::Cover, 11, seed)?;
    ensure(dataset.traces.len() == 2090, || format!("{} traces", dataset.traces.len()))?;
    let evaluation = lstm_eval(&dataset, &LstmModelSpec::default(), seed)?;
    audit.check("separable lstm", &evaluation);
    let took = within(start, Duration::from_secs(15 * 60), "separable run")?;
    let acc = evaluation.report.accuracy();
    ensure(acc >= 0.99, || format!("window accuracy {acc:.4} < 0.99"))?;
    Ok(format!("window accuracy {acc:.4} on {} test windows in {took:.0?}", evaluation.report.samples.samples))
}

// 7 ------------------------------------------------------------------------

/// Five pages per site keeps each seed to a few minutes; every site's
/// page is the same six names in a site-specific order, so frequency
/// vectors carry no label information.
fn order_signal(audit: &mut Audit) -> Outcome {
    let spec = LstmModelSpec { patience: 20, max_steps: 20_000, ..LstmModelSpec::default() };
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 1..=5u64 {
        let mut config =
            SynthConfig::preset(Preset::OrderSignal, WebsiteUniverse::default_sites(), seed).map_err(|e| e.to_string())?;
        config.pages_per_site = 5;
        let dataset = build_dataset(&config, LabelPlan::Cover, 3, seed)?;
        let lstm = lstm_eval(&dataset, &spec, seed)?;
        let fc_run = train_fc(&dataset, &FcModelSpec::default(), seed, TrainOptions::default()).map_err(|e| e.to_string())?;
        let fc = evaluate_dataset(&fc_run.model, &dataset, SplitSide::Test, &EvalOptions::default()).map_err(|e| e.to_string())?;
        audit.check(&format!("order-signal lstm seed {seed}"), &lstm);
        audit.check(&format!("order-signal fc seed {seed}"), &fc);
        let cmp = compare_reports(&lstm.report, &fc.report).map_err(|e| e.to_string())?;
        let pass = cmp.a_overall > cmp.b_overall && cmp.test.t > 0.0 && cmp.test.p < 0.01;
        ok &= pass;
        lines.push(format!("seed {seed}: {:.4} vs {:.4}, p = {:.1e}", cmp.a_overall, cmp.b_overall, cmp.test.p));
        eprintln!("  criterion 7 {}", lines.last().unwrap());
    }
    ensure(ok, || lines.join("; "))?;
    Ok(lines.join("; "))
}

// 8 ------------------------------------------------------------------------

fn scrub_ablation(audit: &mut Audit) -> Outcome {
    let seed = 8;
    let config = SynthConfig::preset(Preset::Default, WebsiteUniverse::default_sites(), seed).map_err(|e| e.to_string())?;
    let dataset = build_dataset(&config, LabelPlan::Cover, 3, seed)?;
    let spec = LstmModelSpec { max_steps: 10_000, ..LstmModelSpec::default() };
    let run = train_lstm(&dataset, &spec, seed, TrainOptions::default()).map_err(|e| e.to_string())?;
    let traces = dataset.traces_of(SplitSide::Test);
    let (ablation, scrubbed) =
        ablate_scrub(&run.model, dataset.vocabulary(), dataset.universe(), &traces, &EvalOptions::default())
            .map_err(|e| e.to_string())?;
    audit.check("scrubbed lstm", &scrubbed);
    let acc = ablation.scrubbed.accuracy();
    let detail = format!(
        "scrubbed {acc:.4} vs unscrubbed {:.4}; {} of {} events removed",
        ablation.unscrubbed.accuracy(),
        ablation.events_removed,
        ablation.events_before
    );
    ensure(ablation.events_removed > 0 && acc >= 0.90, || detail.clone())?;
    Ok(detail)
}

// 9 ------------------------------------------------------------------------

fn cli_ok(args: &[&str]) -> Result<(), String> {
    let code = cli::main_with_args(std::iter::once("sni-sight").chain(args.iter().copied()));
    ensure(code == cli::EXIT_OK, || format!("`{}` exited {code}", args.join(" ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    cli_ok(&["--seed", "9", "synth", "--preset", "default", "--labels", "random", "--count", "40", "--repetitions", "2", "-o", &p("syn")])?;
    cli_ok(&["--seed", "9", "dataset", &p("syn/traces.jsonl"), "-o", &p("ds")])?;
    let mut compared = 0;
    for model in ["lstm", "fc"] {
        let extra: &[&str] = if model == "lstm" { &["--max-steps", "400", "--eval-every", "100"] } else { &["--epochs", "10"] };
        for run in ["a", "b"] {
            let ckpt = p(&format!("{model}_{run}.ckpt"));
            let ds = p("ds");
            let mut args = vec!["--seed", "9", "train", "-d", &ds, "--model", model, "-o", &ckpt];
            args.extend_from_slice(extra);
            cli_ok(&args)?;
            cli_ok(&["eval", "-c", &ckpt, "-d", &p("ds"), "-o", &p(&format!("{model}_{run}_eval"))])?;
        }
        let read = |s: String| std::fs::read(s).map_err(|e| e.to_string());
        for (a, b) in [
            (format!("{model}_a.ckpt"), format!("{model}_b.ckpt")),
            (format!("{model}_a_eval/report.json"), format!("{model}_b_eval/report.json")),
            (format!("{model}_a_eval/predictions.jsonl"), format!("{model}_b_eval/predictions.jsonl")),
        ] {
            let (x, y) = (read(p(&a))?, read(p(&b))?);
            ensure(!x.is_empty() && x == y, || format!("{a} and {b} differ"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} artifact pairs bitwise identical (lstm and fc checkpoints, reports, dumps)"))
}

// 10 -----------------------------------------------------------------------

fn t_tests() -> Outcome {
    // references from scipy.stats.ttest_rel
    let cases: [(&str, &[f64], &[f64], f64, f64, usize); 3] = [
        (
            "sleep",
            &[0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0],
            &[1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4],
            -4.062127683382037,
            0.00283289019738427,
            9,
        ),
        (
            "blood pressure",
            &[200.0, 190.0, 210.0, 220.0, 205.0, 195.0, 180.0, 215.0],
            &[190.0, 185.0, 200.0, 210.0, 200.0, 190.0, 182.0, 205.0],
            4.384166838303505,
            0.0032181249487791943,
            7,
        ),
        (
            "zea mays",
            &[23.5, 12.0, 21.0, 22.0, 19.125, 21.5, 22.125, 20.375, 18.25, 21.625, 23.25, 21.0, 22.125, 23.0, 12.0],
            &[17.375, 20.375, 20.0, 20.0, 18.375, 18.625, 18.625, 15.25, 16.5, 18.0, 16.25, 18.0, 12.75, 15.5, 18.0],
            2.1479874613311205,
            0.0497029440218009,
            14,
        ),
    ];
    let mut worst = 0.0f64;
    for (name, a, b, t, p, df) in cases {
        let r = paired_t_test(a, b).map_err(|e| e.to_string())?;
        ensure(r.df == df, || format!("{name}: df {} vs {df}", r.df))?;
        let err = (r.t - t).abs().max((r.p - p).abs());
        ensure(err < 5e-5, || format!("{name}: t {} p {} vs {t} {p}", r.t, r.p))?;
        worst = worst.max(err);
    }
    Ok(format!("3 reference pairs, max |difference| {worst:.1e}"))
}

// --------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
    })
}

fn main() {
    let mut audit = Audit::default();
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut run = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = guarded(f);
        eprintln!("  criterion {id} finished in {:.1?}", start.elapsed());
        results.push((id, name, outcome));
    };
    run(1, "parser conformance", &mut parser_conformance);
    run(2, "emit/extract round trip", &mut round_trip);
    run(3, "gradient checks", &mut gradient_checks);
    run(5, "pair-covering triples", &mut covering);
    run(6, "separable corpus convergence", &mut || separable(&mut audit));
    run(7, "order-signal separation", &mut || order_signal(&mut audit));
    run(8, "scrub ablation", &mut || scrub_ablation(&mut audit));
    run(9, "training determinism", &mut determinism);
    run(10, "paired t-test references", &mut t_tests);
    let metric = audit.outcome();
    results.push((4, "metric oracle", metric));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  criterion {id:>2}  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {id:>2}  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
