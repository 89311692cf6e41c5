use std::sync::Arc;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::Embeddings;

fn table(dim: usize, words: &[&str], seed: u64) -> Arc<Embeddings> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Embeddings::new(dim);
    for w in words {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        t.insert(w, &v).unwrap();
    }
    Arc::new(t)
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn sample_input() -> PairInput {
    PairInput::new(toks("cat"), toks("small domestic feline"), toks("animal"), toks("living organism"))
}

const WORDS: [&str; 7] = ["cat", "small", "domestic", "feline", "animal", "living", "organism"];

#[test]
fn classifier_width_tracks_mask() {
    for mask in AblationMask::all() {
        let mut cfg = ModelConfig::new(6);
        cfg.mask = mask;
        let params = ModelParams::init(cfg).unwrap();
        assert_eq!(params.classifier_width(), 6 * mask.active_count(), "{mask}");
    }
    assert_eq!(AblationMask::all().len(), 15);
    assert_eq!(ModelConfig::new(300).classifier_width(), 1200);
}

#[test]
fn mask_parsing() {
    assert_eq!("all".parse::<AblationMask>().unwrap(), AblationMask::default());
    assert_eq!("-wd".parse::<AblationMask>().unwrap(), AblationMask::without(Way::TermDef));
    let m: AblationMask = "ww,dd".parse().unwrap();
    assert_eq!(m.to_string(), "ww,dd");
    assert_eq!(m.to_string().parse::<AblationMask>().unwrap(), m);
    assert!("".parse::<AblationMask>().is_err());
    assert!("xx".parse::<AblationMask>().is_err());
    assert!(AblationMask::new([false; 4]).is_err());
}

#[test]
fn representation_has_active_ways_only() {
    let mut cfg = ModelConfig::new(4);
    cfg.mask = "wd,dd".parse().unwrap();
    let m = Model::init(cfg, table(4, &WORDS, 1)).unwrap();
    let rep = forward_fourway(&m, &sample_input()).unwrap();
    assert!(rep.way(Way::TermTerm).is_none());
    assert!(rep.way(Way::DefTerm).is_none());
    let (wd, dd) = (rep.way(Way::TermDef).unwrap(), rep.way(Way::DefDef).unwrap());
    assert_eq!(rep.p.shape(), (8, 1));
    assert_eq!(&rep.p.as_slice()[..4], wd.as_slice());
    assert_eq!(&rep.p.as_slice()[4..], dd.as_slice());
}

#[test]
fn way_vectors_match_standalone_encoder() {
    let m = Model::init(ModelConfig::new(4), table(4, &WORDS, 2)).unwrap();
    let input = sample_input();
    let rep = m.represent(&input).unwrap();
    let e = m.embeddings();
    let maps = [&input.x, &input.dx, &input.y, &input.dy].map(|s| crate::encoder::embed_sequence(s, e).unwrap());
    for way in Way::ALL {
        let (a, b) = way.operands();
        let expected = crate::encoder::encode_pair(&maps[a], &maps[b], &m.params().encoders[way.index()]).unwrap();
        assert!(rep.way(way).unwrap().max_abs_diff(&expected) < 1e-12, "{}", way.name());
    }
}

#[test]
fn zero_classifier_is_indifferent() {
    let mut m = Model::init(ModelConfig::new(4), table(4, &WORDS, 3)).unwrap();
    m.params_mut().classifier_w = Matrix::zeros(2, 16);
    assert_eq!(m.predict(&sample_input()).unwrap(), 0.5);
}

#[test]
fn predict_proba_is_a_logistic() {
    let m = Model::init(ModelConfig::new(4), table(4, &WORDS, 4)).unwrap();
    let rep = m.represent(&sample_input()).unwrap();
    let p = predict_proba(&rep, m.params()).unwrap();
    // Two-class softmax equals sigmoid of the logit difference.
    let (u, c) = (&m.params().classifier_w, &m.params().classifier_b);
    let z: Vec<f64> = (0..2)
        .map(|r| (0..16).map(|k| u.get(r, k) * rep.p.get(k, 0)).sum::<f64>() + c.get(r, 0))
        .collect();
    assert_relative_eq!(p, 1.0 / (1.0 + (z[0] - z[1]).exp()), epsilon = 1e-14);
    assert_eq!(p, m.predict(&sample_input()).unwrap());
}

#[test]
fn nll_values() {
    assert_eq!(loss_nll(1.0), 0.0);
    assert_relative_eq!(loss_nll(0.5), std::f64::consts::LN_2);
    assert_relative_eq!((loss_nll(1.0) + loss_nll(0.5)) / 2.0, std::f64::consts::LN_2 / 2.0);
    assert_relative_eq!(loss_nll(0.0), -(PROB_FLOOR.ln()));
}

#[test]
fn no_definition_baseline_concatenates_term_vectors() {
    let mut cfg = ModelConfig::new(4);
    cfg.architecture = Architecture::NoDefinition;
    let m = Model::init(cfg, table(4, &WORDS, 5)).unwrap();
    let rep = m.represent(&sample_input()).unwrap();
    let (x, y) = (m.embeddings().get("cat").unwrap(), m.embeddings().get("animal").unwrap());
    assert_eq!(rep.p.as_slice(), [x, y].concat().as_slice());
    // Definitions never enter this architecture.
    let other = PairInput::new(toks("cat"), toks("organism"), toks("animal"), toks("feline"));
    assert_eq!(m.predict(&other).unwrap(), m.predict(&sample_input()).unwrap());
    assert_eq!(
        baseline_no_definition(&m, &toks("cat"), &toks("animal")).unwrap(),
        m.predict(&sample_input()).unwrap()
    );
}

#[test]
fn no_definition_with_zero_classifier() {
    let mut cfg = ModelConfig::new(4);
    cfg.architecture = Architecture::NoDefinition;
    let mut m = Model::init(cfg, table(4, &WORDS, 5)).unwrap();
    m.params_mut().classifier_w = Matrix::zeros(2, 8);
    assert_eq!(baseline_no_definition(&m, &toks("cat"), &toks("animal")).unwrap(), 0.5);
}

#[test]
fn no_attention_baseline_width() {
    let mut cfg = ModelConfig::new(4);
    cfg.architecture = Architecture::NoAttention;
    let m = Model::init(cfg, table(4, &WORDS, 6)).unwrap();
    assert_eq!(m.params().classifier_width(), 16);
    let rep = m.represent(&sample_input()).unwrap();
    assert_eq!(rep.p.rows(), 16);
    let p = baseline_no_attention(&m, &sample_input()).unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(baseline_no_definition(&m, &toks("cat"), &toks("animal")).is_err());
}

#[test]
fn shared_weights_use_one_encoder() {
    let mut cfg = ModelConfig::new(4);
    cfg.share_weights = true;
    let m = Model::init(cfg, table(4, &WORDS, 7)).unwrap();
    assert_eq!(m.params().encoders.len(), 1);
    assert_eq!(m.params().tensors().len(), 4);
}

#[test]
fn dimension_mismatch_is_rejected() {
    assert!(Model::init(ModelConfig::new(8), table(4, &WORDS, 1)).is_err());
    assert!(ModelParams::init(ModelConfig::new(0)).is_err());
}

#[test]
fn initial_loss_is_near_ln2() {
    let words: Vec<String> = (0..40).map(|i| format!("t{i}")).collect();
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let mut cfg = ModelConfig::new(16);
    cfg.seed = 11;
    // Small embeddings keep the initial logits close to zero.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t = Embeddings::new(16);
    for w in &refs {
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-0.1..0.1)).collect();
        t.insert(w, &v).unwrap();
    }
    let m = Model::init(cfg, Arc::new(t)).unwrap();
    let mut total = 0.0;
    let n = 40;
    for i in 0..n {
        let pick = |k: usize| vec![words[(i * 7 + k) % 40].clone()];
        let input = PairInput::new(pick(0), pick(1), pick(2), pick(3));
        total += m.loss_and_gradients(&input, i % 2 == 0).unwrap().0;
    }
    assert!((total / n as f64 - std::f64::consts::LN_2).abs() < 0.05);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..4 {
        let mut cfg = ModelConfig::new(8);
        cfg.seed = trial;
        let m = Model::init(cfg, table(8, &WORDS, 100 + trial)).unwrap();
        let mut pick = |n: usize| -> Vec<String> { (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect() };
        let input = PairInput::new(pick(1), pick(4), pick(2), pick(3));
        let out = m.check_gradients(&input, trial % 2 == 0, 1e-4).unwrap();
        assert!(out.passes(1e-4), "trial {trial}: {out:?}");
        assert!(out.checked > 0);
    }
}

#[test]
fn baseline_gradients_match_finite_differences() {
    for arch in [Architecture::NoDefinition, Architecture::NoAttention] {
        let mut cfg = ModelConfig::new(6);
        cfg.architecture = arch;
        let m = Model::init(cfg, table(6, &WORDS, 31)).unwrap();
        let out = m.check_gradients(&sample_input(), true, 1e-4).unwrap();
        assert!(out.passes(1e-4), "{arch}: {out:?}");
    }
}

#[test]
fn gradient_of_an_unused_way_is_absent() {
    let mut cfg = ModelConfig::new(4);
    cfg.mask = AblationMask::without(Way::DefDef);
    let m = Model::init(cfg, table(4, &WORDS, 8)).unwrap();
    let (_, grads) = m.loss_and_gradients(&sample_input(), true).unwrap();
    // encoder3 serves the dropped (d_x, d_y) way.
    assert_eq!(grads[6].sum(), 0.0);
    assert_eq!(grads[7].sum(), 0.0);
    assert!(grads[0].max_abs_diff(&Matrix::zeros(4, 16)) > 0.0);
}

#[test]
fn long_definitions_are_truncated() {
    let mut cfg = ModelConfig::new(4);
    cfg.max_definition_len = 2;
    let m = Model::init(cfg, table(4, &WORDS, 9)).unwrap();
    let long = PairInput::new(toks("cat"), toks("small domestic feline"), toks("animal"), toks("living organism"));
    let short = PairInput::new(toks("cat"), toks("small domestic"), toks("animal"), toks("living organism"));
    assert_eq!(m.predict(&long).unwrap(), m.predict(&short).unwrap());
}

#[test]
fn training_leaves_embeddings_untouched() {
    let t = table(4, &WORDS, 10);
    let before = t.fingerprint();
    let mut m = Model::init(ModelConfig::new(4), Arc::clone(&t)).unwrap();
    let data: Vec<Instance> = (0..6)
        .map(|i| {
            Instance::new(
                WORDS[i],
                toks(WORDS[(i + 1) % 7]),
                WORDS[(i + 2) % 7],
                toks(WORDS[(i + 3) % 7]),
                i % 2 == 0,
            )
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let report = train(&mut m, &data, &data, &cfg).unwrap();
    assert!(!report.epochs.is_empty());
    assert_eq!(m.embeddings().fingerprint(), before);
    assert_eq!(t.fingerprint(), before);
}

#[test]
fn best_dev_ap_column_never_decreases() {
    let mut m = Model::init(ModelConfig::new(4), table(4, &WORDS, 12)).unwrap();
    let data: Vec<Instance> = (0..8)
        .map(|i| Instance::new(WORDS[i % 7], toks(WORDS[(i + 2) % 7]), WORDS[(i + 4) % 7], toks("small"), i % 3 == 0))
        .collect();
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 3,
        patience: None,
        ..TrainConfig::default()
    };
    let report = train(&mut m, &data, &data, &cfg).unwrap();
    assert_eq!(report.epochs.len(), 6);
    for w in report.epochs.windows(2) {
        assert!(w[1].best_dev_ap >= w[0].best_dev_ap);
    }
    assert!(report.epochs[report.best_epoch - 1].improved);
    assert_eq!(report.epochs[report.best_epoch - 1].dev_ap, report.best_dev_ap);
    assert!(report.to_tsv().starts_with("epoch\t"));
}

#[test]
fn parallel_and_serial_training_agree() {
    let data: Vec<Instance> = (0..10)
        .map(|i| Instance::new(WORDS[i % 7], toks(WORDS[(i + 1) % 7]), WORDS[(i + 3) % 7], toks("living"), i % 2 == 1))
        .collect();
    let run = |parallel: bool| {
        let mut m = Model::init(ModelConfig::new(4), table(4, &WORDS, 13)).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            parallel,
            ..TrainConfig::default()
        };
        train(&mut m, &data, &data, &cfg).unwrap();
        m.params().clone()
    };
    assert_eq!(run(true), run(false));
}

#[test]
fn train_rejects_empty_splits() {
    let mut m = Model::init(ModelConfig::new(4), table(4, &WORDS, 14)).unwrap();
    let one = vec![Instance::new("cat", toks("feline"), "animal", toks("organism"), true)];
    assert!(train(&mut m, &[], &one, &TrainConfig::default()).is_err());
    assert!(train(&mut m, &one, &[], &TrainConfig::default()).is_err());
}

#[test]
fn model_file_round_trip_is_bit_exact() {
    let t = table(4, &WORDS, 15);
    let mut cfg = ModelConfig::new(4);
    cfg.mask = "ww,dw".parse().unwrap();
    let mut m = Model::init(cfg, Arc::clone(&t)).unwrap();
    m.params_mut().threshold = 0.123456789012345;
    let mut buf = Vec::new();
    io::write_model_to(&mut buf, &m).unwrap();
    assert!(buf.starts_with(b"HYPERDEF1\n"));
    let back = io::read_model_from(buf.as_slice(), Arc::clone(&t)).unwrap();
    assert_eq!(back.params(), m.params());
    let mut again = Vec::new();
    io::write_model_to(&mut again, &back).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn model_file_rejects_other_embeddings() {
    let m = Model::init(ModelConfig::new(4), table(4, &WORDS, 16)).unwrap();
    let mut buf = Vec::new();
    io::write_model_to(&mut buf, &m).unwrap();
    let err = io::read_model_from(buf.as_slice(), table(4, &WORDS, 17)).unwrap_err();
    assert_eq!(err.kind(), "fingerprint");
}

#[test]
fn model_file_rejects_damage() {
    let t = table(4, &WORDS, 18);
    let m = Model::init(ModelConfig::new(4), Arc::clone(&t)).unwrap();
    let mut buf = Vec::new();
    io::write_model_to(&mut buf, &m).unwrap();
    let truncated = &buf[..buf.len() - 5];
    assert!(io::read_model_from(truncated, Arc::clone(&t)).is_err());
    let mut extra = buf.clone();
    extra.push(0);
    assert!(io::read_model_from(extra.as_slice(), Arc::clone(&t)).is_err());
    assert!(io::read_model_from(&b"HYPERDEF0\n"[..], t).is_err());
}
