use sni_sight::corpus::{Dataset, OOV_INDEX, WebsiteUniverse};
use sni_sight::nn::{sigmoid, Tensor};
use sni_sight::pipeline::{
    decide, predict, train_fc, train_lstm, FcModelSpec, LstmModelSpec, Network, SampleInput, StopReason, TrainOptions,
};
use sni_sight::synth::{generate_corpus, LabelPlan, Preset, SynthConfig};

fn small_dataset(seed: u64) -> Dataset {
    let universe = WebsiteUniverse::default_sites();
    let config = SynthConfig::preset(Preset::Default, universe.clone(), seed).unwrap();
    let labels = LabelPlan::Random { count: 30 }.labels(&universe, seed).unwrap();
    let traces = generate_corpus(&config, &labels, 2).unwrap().into_iter().map(|s| s.trace).collect();
    Dataset::build(traces, universe, 10, 0.85, seed).unwrap()
}

fn lstm_spec() -> LstmModelSpec {
    LstmModelSpec { hidden: 8, window: 10, max_steps: 200, eval_every: 50, patience: 100, ..LstmModelSpec::default() }
}

fn fc_spec() -> FcModelSpec {
    FcModelSpec { hidden: vec![16, 8], epochs: 12, ..FcModelSpec::default() }
}

fn bytes(run: &sni_sight::pipeline::TrainRun) -> Vec<u8> {
    sni_sight::nn::encode_checkpoint(&run.to_checkpoint().unwrap()).unwrap()
}

#[test]
fn same_seed_same_checkpoint() {
    let ds = small_dataset(1);
    let a = train_lstm(&ds, &lstm_spec(), 4, TrainOptions::default()).unwrap();
    let b = train_lstm(&ds, &lstm_spec(), 4, TrainOptions::default()).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let c = train_lstm(&ds, &lstm_spec(), 5, TrainOptions::default()).unwrap();
    assert_ne!(bytes(&a), bytes(&c));

    let a = train_fc(&ds, &fc_spec(), 4, TrainOptions::default()).unwrap();
    let b = train_fc(&ds, &fc_spec(), 4, TrainOptions::default()).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
}

#[test]
fn zero_patience_stops_at_first_evaluation() {
    let ds = small_dataset(2);
    let spec = LstmModelSpec { patience: 0, ..lstm_spec() };
    let run = train_lstm(&ds, &spec, 1, TrainOptions::default()).unwrap();
    assert_eq!(run.state.step, spec.eval_every);
    assert_eq!(run.state.evaluations, 1);
    assert_eq!(run.state.finished, Some(StopReason::EarlyStopping));
}

#[test]
fn max_steps_caps_the_run() {
    let ds = small_dataset(2);
    let run = train_lstm(&ds, &LstmModelSpec { max_steps: 120, ..lstm_spec() }, 1, TrainOptions::default()).unwrap();
    assert_eq!(run.state.step, 120);
    assert_eq!(run.state.finished, Some(StopReason::MaxSteps));
}

#[test]
fn paused_and_resumed_run_matches_uninterrupted() {
    let ds = small_dataset(3);
    let full = train_lstm(&ds, &lstm_spec(), 7, TrainOptions::default()).unwrap();
    // pause between evaluations so the best-so-far network must survive too
    let paused = train_lstm(&ds, &lstm_spec(), 7, TrainOptions { pause_after: Some(75), ..Default::default() }).unwrap();
    assert_eq!(paused.state.finished, None);
    assert_eq!(paused.model.meta.summary.stop_reason, StopReason::Paused);
    let ckpt = sni_sight::nn::decode_checkpoint(&bytes(&paused)).unwrap();
    let resumed = train_lstm(&ds, &lstm_spec(), 7, TrainOptions { resume: Some(&ckpt), ..Default::default() }).unwrap();
    assert_eq!(bytes(&full), bytes(&resumed));

    let full = train_fc(&ds, &fc_spec(), 7, TrainOptions::default()).unwrap();
    let paused = train_fc(&ds, &fc_spec(), 7, TrainOptions { pause_after: Some(5), ..Default::default() }).unwrap();
    let ckpt = paused.to_checkpoint().unwrap();
    let resumed = train_fc(&ds, &fc_spec(), 7, TrainOptions { resume: Some(&ckpt), ..Default::default() }).unwrap();
    assert_eq!(bytes(&full), bytes(&resumed));
}

#[test]
fn saturated_logits_and_threshold_ties() {
    let ds = small_dataset(4);
    let mut model = train_lstm(&ds, &LstmModelSpec { max_steps: 1, ..lstm_spec() }, 1, TrainOptions::default())
        .unwrap()
        .model;
    let n = ds.universe().len();
    let Network::Lstm(m) = &mut model.net else { panic!("lstm") };
    m.out.weight = Tensor::zeros(m.out.weight.shape());
    let mut bias = vec![0.0; n];
    bias[0] = 40.0;
    bias[1] = -40.0;
    m.out.bias = Tensor::from_vec(&[n], bias).unwrap();

    let window = vec![OOV_INDEX; 10];
    let p = predict(&model, ds.vocabulary(), SampleInput::Window(&window)).unwrap();
    assert!(p.probabilities.iter().all(|q| q.is_finite() && (0.0..=1.0).contains(q)));
    assert!(p.probabilities[0] > 1.0 - 1e-15 && p.probabilities[1] < 1e-15);
    // sigmoid(0) is exactly one half and ties go to the positive side
    assert_eq!(p.probabilities[2], 0.5);
    let bits = p.decision.bits();
    assert!(bits[0] && !bits[1] && bits[2..].iter().all(|&b| b));

    assert_eq!(decide(&[sigmoid(-1e-12), sigmoid(0.0)], 0.5).bits(), &[false, true]);
    assert!(predict(&model, ds.vocabulary(), SampleInput::Window(&window[..9])).is_err());
    assert!(predict(&model, ds.vocabulary(), SampleInput::Frequency(&[0; 3])).is_err());
}
