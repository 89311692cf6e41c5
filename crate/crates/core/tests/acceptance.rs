//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and a summary.
//!
//! Run with `cargo test --release --test acceptance`. A FAIL line does not
//! fail the test run unless `HYPERDEF_ACCEPTANCE_STRICT=1` is set, in which
//! case the binary exits nonzero when any criterion fails.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperdef::data::{
    build_instances, split, synthetic, Embeddings, Instance, SplitMode, SplitSpec, SyntheticConfig, SyntheticData,
};
use hyperdef::eval::{
    ap_at_k, average_precision, infer_alldef, infer_topdef, precision_recall_f1, score_instances, EvalReport,
    InferenceMode, ScoredPair, DEFAULT_SENSE_CAP,
};
use hyperdef::model::{
    read_model, train, write_model, AblationMask, Architecture, Model, ModelConfig, PairInput, TrainConfig, Trainer,
};

type Check = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_table(words: &[String], dim: usize, rng: &mut ChaCha8Rng) -> Arc<Embeddings> {
    let mut t = Embeddings::new(dim);
    for w in words {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        t.insert(w, &v).unwrap();
    }
    Arc::new(t)
}

fn gradient_suite() -> Check {
    let words: Vec<String> = (0..12).map(|i| format!("tok{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut checked, mut kinks) = (0.0f64, 0usize, 0usize);
    let mut failures = 0;
    for trial in 0..50 {
        let table = random_table(&words, 8, &mut rng);
        let mut cfg = ModelConfig::new(8);
        cfg.seed = rng.gen();
        let model = Model::init(cfg, table).map_err(err)?;
        let seq = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let n = rng.gen_range(1..=4);
            (0..n).map(|_| words.choose(rng).unwrap().clone()).collect()
        };
        let input = PairInput::new(seq(&mut rng), seq(&mut rng), seq(&mut rng), seq(&mut rng));
        let out = model.check_gradients(&input, rng.gen(), 1e-4).map_err(err)?;
        if !out.passes(1e-4) {
            failures += 1;
            eprintln!("  trial {trial}: max relative error {:.3e} at {:?}", out.max_rel_error, out.worst);
        }
        worst = worst.max(out.max_rel_error);
        checked += out.checked;
        kinks += out.skipped_kinks;
    }
    Ok((
        failures == 0,
        format!("50 configs, {checked} entries checked, {kinks} max-pool kinks skipped, max rel err {worst:.2e} (< 1e-4)"),
    ))
}

/// Independent metrics: every rank is found by counting, not by sorting.
mod oracle {
    use super::ScoredPair;

    fn above(a: &ScoredPair, b: &ScoredPair) -> bool {
        a.score > b.score || (a.score == b.score && a.id < b.id)
    }

    pub fn rank_of(pairs: &[ScoredPair], p: &ScoredPair) -> usize {
        1 + pairs.iter().filter(|q| above(q, p)).count()
    }

    pub fn prf(pairs: &[ScoredPair], t: f64) -> (f64, f64, f64) {
        let tp = pairs.iter().filter(|p| p.gold && p.score >= t).count();
        let predicted = pairs.iter().filter(|p| p.score >= t).count();
        let gold = pairs.iter().filter(|p| p.gold).count();
        let prec = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let rec = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        (prec, rec, f1)
    }

    pub fn ap(pairs: &[ScoredPair], k: Option<usize>) -> f64 {
        let positives: Vec<&ScoredPair> = pairs.iter().filter(|p| p.gold).collect();
        let limit = k.unwrap_or(usize::MAX);
        let mut total = 0.0;
        for p in &positives {
            let r = rank_of(pairs, p);
            if r <= limit {
                let hits = positives.iter().filter(|q| rank_of(pairs, q) <= r).count();
                total += hits as f64 / r as f64;
            }
        }
        total / positives.len().min(limit) as f64
    }
}

fn metric_oracle_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut prf_mismatch, mut worst_ap) = (0usize, 0.0f64);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=40);
        let coarse = rng.gen_bool(0.5);
        let mut ids: Vec<usize> = (0..n).map(|i| i * 3 + 1).collect();
        ids.shuffle(&mut rng);
        let mut pairs: Vec<ScoredPair> = ids
            .into_iter()
            .map(|id| {
                let score = if coarse {
                    f64::from(rng.gen_range(0..=10u8)) / 10.0
                } else {
                    rng.gen()
                };
                ScoredPair::new(id, score, rng.gen_bool(0.4))
            })
            .collect();
        if !pairs.iter().any(|p| p.gold) {
            let i = rng.gen_range(0..n);
            pairs[i].gold = true;
        }
        let t = if coarse { f64::from(rng.gen_range(0..=10u8)) / 10.0 } else { rng.gen() };
        let got = precision_recall_f1(&pairs, t).map_err(err)?;
        if (got.precision, got.recall, got.f1) != oracle::prf(&pairs, t) {
            prf_mismatch += 1;
        }
        let k = rng.gen_range(1..=50);
        let ap = average_precision(&pairs).map_err(err)?;
        let apk = ap_at_k(&pairs, k).map_err(err)?;
        worst_ap = worst_ap
            .max((ap - oracle::ap(&pairs, None)).abs())
            .max((apk - oracle::ap(&pairs, Some(k))).abs());
    }
    Ok((
        prf_mismatch == 0 && worst_ap <= 1e-12,
        format!("1000 lists, P/R/F1 mismatches {prf_mismatch} (exact), max AP/AP@k deviation {worst_ap:.1e} (<= 1e-12)"),
    ))
}

fn overfit_check() -> Check {
    let words: Vec<String> = (0..80).map(|i| format!("v{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let table = random_table(&words, 16, &mut rng);
    let mut pick = |n: usize| -> Vec<String> { (0..n).map(|_| words.choose(&mut rng).unwrap().clone()).collect() };
    let data: Vec<Instance> = (0..50)
        .map(|i| {
            let (x, y) = (pick(1).remove(0), pick(1).remove(0));
            Instance::new(&x, pick(4), &y, pick(4), i % 2 == 0)
        })
        .collect();
    let mut cfg = ModelConfig::new(16);
    cfg.seed = 3;
    let model = Model::init(cfg, table).map_err(err)?;
    let mut trainer = Trainer::new(model, &data, TrainConfig::default()).map_err(err)?;
    for epoch in 1..=200 {
        trainer.run_epoch().map_err(err)?;
        let acc = trainer.train_accuracy().map_err(err)?;
        if acc == 1.0 {
            return Ok((true, format!("training accuracy 1.0 after {epoch} epochs (limit 200)")));
        }
    }
    let acc = trainer.train_accuracy().map_err(err)?;
    Ok((false, format!("training accuracy {acc:.3} after 200 epochs")))
}

/// The synthetic dataset shared by the taxonomy and AllDef criteria.
struct TaxonomyRun {
    data: SyntheticData,
    test: Vec<Instance>,
    model: Option<Model>,
}

fn synthetic_config() -> SyntheticConfig {
    SyntheticConfig {
        taxonomy_size: 1100,
        vocab_size: 1200,
        seed: 7,
        dim: 32,
        ..SyntheticConfig::default()
    }
}

fn fit(arch: Architecture, table: &Arc<Embeddings>, train_set: &[Instance], dev: &[Instance]) -> Result<Model, String> {
    let mut cfg = ModelConfig::new(32);
    cfg.architecture = arch;
    cfg.seed = 11;
    let mut model = Model::init(cfg, Arc::clone(table)).map_err(err)?;
    let tc = TrainConfig {
        seed: 12,
        ..TrainConfig::default()
    };
    let report = train(&mut model, train_set, dev, &tc).map_err(err)?;
    eprintln!(
        "  {arch}: best epoch {} of {}, dev AP {:.4}",
        report.best_epoch,
        report.epochs.len(),
        report.best_dev_ap
    );
    Ok(model)
}

fn taxonomy_check(run: &mut Option<TaxonomyRun>) -> Check {
    let data = synthetic::generate(&synthetic_config()).map_err(err)?;
    let built = build_instances(&data.records, Some(8.0), 7).map_err(err)?;
    let spec = SplitSpec {
        mode: SplitMode::Lexical,
        fractions: [0.8, 0.1, 0.1],
        seed: 7,
    };
    let parts = split(&built.instances, &spec).map_err(err)?;
    let table = Arc::new(data.embeddings.clone());
    let full = fit(Architecture::FourWay, &table, &parts.train, &parts.dev)?;
    let base = fit(Architecture::NoDefinition, &table, &parts.train, &parts.dev)?;
    let f1 = |m: &Model| -> Result<f64, String> {
        let scores = score_instances(m, &parts.test, None, InferenceMode::TopDef, DEFAULT_SENSE_CAP).map_err(err)?;
        Ok(EvalReport::compute(&scores, m.params().threshold, 100).map_err(err)?.f1)
    };
    let (full_f1, base_f1) = (f1(&full)?, f1(&base)?);
    let detail = format!(
        "{} instances, vocab {}, train/dev/test {}/{}/{}: four-way test F1 {full_f1:.3} (>= 0.95), \
         w/o definition {base_f1:.3} (< 0.60), gap {:.3} (>= 0.35)",
        built.instances.len(),
        data.embeddings.len(),
        parts.train.len(),
        parts.dev.len(),
        parts.test.len(),
        full_f1 - base_f1
    );
    *run = Some(TaxonomyRun {
        data,
        test: parts.test,
        model: Some(full),
    });
    Ok((full_f1 >= 0.95 && base_f1 < 0.60 && full_f1 - base_f1 >= 0.35, detail))
}

fn alldef_dominance(run: &Option<TaxonomyRun>) -> Check {
    let run = run.as_ref().ok_or("synthetic taxonomy run did not complete")?;
    let model = run.model.as_ref().ok_or("no trained model")?;
    let max_senses = run.data.lexicon.entries().map(|e| e.senses().len()).max().unwrap_or(1);
    if max_senses > DEFAULT_SENSE_CAP {
        return Err(format!("sense count {max_senses} exceeds the cap"));
    }
    let mut violations = 0;
    let mut strict = 0;
    for inst in &run.test {
        let (x, y) = (run.data.lexicon.lookup(&inst.x), run.data.lexicon.lookup(&inst.y));
        let top = infer_topdef(&x, &y, model).map_err(err)?;
        let all = infer_alldef(&x, &y, model, DEFAULT_SENSE_CAP).map_err(err)?.score;
        if all < top {
            violations += 1;
        }
        if all > top {
            strict += 1;
        }
    }
    Ok((
        violations == 0,
        format!(
            "{} test pairs, {violations} violations, {strict} strictly higher under AllDef (cap {DEFAULT_SENSE_CAP} >= {max_senses} senses)",
            run.test.len()
        ),
    ))
}

fn split_integrity() -> Check {
    let data = synthetic::generate_synthetic(300, 400, 3).map_err(err)?;
    let instances = build_instances(&data.records, Some(8.0), 3).map_err(err)?.instances;
    let n = instances.len() as f64;
    let (mut overlaps, mut size_errors, mut shared_keys) = (0usize, 0usize, 0usize);
    for seed in 0..100u64 {
        let lexical = split(
            &instances,
            &SplitSpec {
                mode: SplitMode::Lexical,
                seed,
                ..SplitSpec::default()
            },
        )
        .map_err(err)?;
        let vocab: Vec<HashSet<&str>> = lexical
            .parts()
            .iter()
            .map(|p| p.iter().flat_map(|i| [i.x.as_str(), i.y.as_str()]).collect())
            .collect();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            overlaps += vocab[a].intersection(&vocab[b]).count();
        }
        let random = split(
            &instances,
            &SplitSpec {
                seed,
                ..SplitSpec::default()
            },
        )
        .map_err(err)?;
        for (part, f) in random.parts().iter().zip([0.8, 0.1, 0.1]) {
            if (part.len() as f64 - n * f).abs() > 1.0 {
                size_errors += 1;
            }
        }
        let mut seen = HashMap::new();
        for (pi, part) in random.parts().iter().chain(lexical.parts().iter()).enumerate() {
            for inst in part.iter() {
                if let Some(prev) = seen.insert((pi / 3, inst.key()), pi) {
                    if prev != pi {
                        shared_keys += 1;
                    }
                }
            }
        }
    }
    Ok((
        overlaps == 0 && size_errors == 0 && shared_keys == 0,
        format!(
            "100 seeds on {} instances: lexical vocabulary overlaps {overlaps}, random-split size errors {size_errors}, \
             instances in two parts {shared_keys}",
            instances.len()
        ),
    ))
}

fn dataset_recipe() -> Check {
    let data = synthetic::generate(&synthetic_config()).map_err(err)?;
    let all = build_instances(&data.records, None, 7).map_err(err)?.instances;
    let negatives: HashSet<_> = all.iter().filter(|i| !i.label).map(|i| i.key()).collect();
    let positives: Vec<&Instance> = all.iter().filter(|i| i.label).collect();
    let missing = positives
        .iter()
        .filter(|p| !negatives.contains(&p.reversed().key()))
        .count();
    let capped = build_instances(&data.records, Some(8.0), 7).map_err(err)?;
    let ratio = capped.stats.negatives as f64 / capped.stats.positives as f64;
    let rel = (ratio - 8.0).abs() / 8.0;
    Ok((
        missing == 0 && rel <= 0.01,
        format!(
            "{} positives, {missing} without a reversed negative; negative:positive {ratio:.4} (cap 8, off by {:.2}%)",
            positives.len(),
            rel * 100.0
        ),
    ))
}

fn determinism_and_persistence() -> Check {
    let data = synthetic::generate_synthetic(120, 220, 9).map_err(err)?;
    let instances = build_instances(&data.records, Some(8.0), 9).map_err(err)?.instances;
    let parts = split(&instances, &SplitSpec::default()).map_err(err)?;
    let table = Arc::new(data.embeddings.clone());
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let mut cfg = ModelConfig::new(data.embeddings.dim());
        cfg.seed = 21;
        let mut model = Model::init(cfg, Arc::clone(&table)).map_err(err)?;
        let tc = TrainConfig {
            epochs: 3,
            seed: 22,
            ..TrainConfig::default()
        };
        train(&mut model, &parts.train, &parts.dev, &tc).map_err(err)?;
        let path = dir.path().join(name);
        write_model(&path, &model).map_err(err)?;
        std::fs::read(&path).map_err(err)
    };
    let (a, b) = (run("a.bin")?, run("b.bin")?);
    let identical = a == b;

    let model = read_model(&dir.path().join("a.bin"), Arc::clone(&table)).map_err(err)?;
    let mut in_memory = Model::init(model.config().clone(), Arc::clone(&table)).map_err(err)?;
    *in_memory.params_mut() = model.params().clone();
    let reloaded = read_model(&dir.path().join("b.bin"), Arc::clone(&table)).map_err(err)?;
    let terms: Vec<String> = data.lexicon.entries().map(|e| e.surface().to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut differing = 0;
    for _ in 0..1000 {
        let (x, y) = (
            data.lexicon.lookup(terms.choose(&mut rng).unwrap()),
            data.lexicon.lookup(terms.choose(&mut rng).unwrap()),
        );
        let p = infer_topdef(&x, &y, &in_memory).map_err(err)?;
        let q = infer_topdef(&x, &y, &reloaded).map_err(err)?;
        if p.to_bits() != q.to_bits() {
            differing += 1;
        }
    }
    Ok((
        identical && differing == 0,
        format!(
            "repeat runs byte-identical: {identical} ({} bytes); 1000 reloaded predictions with differing bits: {differing}",
            a.len()
        ),
    ))
}

fn ablation_shapes() -> Check {
    let data = synthetic::generate_synthetic(60, 120, 4).map_err(err)?;
    let instances = build_instances(&data.records, Some(8.0), 4).map_err(err)?.instances;
    let parts = split(&instances, &SplitSpec::default()).map_err(err)?;
    let table = Arc::new(data.embeddings.clone());
    let d = table.dim();
    let mut bad_width = Vec::new();
    for mask in AblationMask::all() {
        let mut cfg = ModelConfig::new(d);
        cfg.mask = mask;
        let mut model = Model::init(cfg, Arc::clone(&table)).map_err(err)?;
        let tc = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        train(&mut model, &parts.train, &parts.dev, &tc).map_err(|e| format!("mask {mask}: {e}"))?;
        let scores = score_instances(&model, &parts.test, Some(&data.lexicon), InferenceMode::AllDef, 8)
            .map_err(|e| format!("mask {mask}: {e}"))?;
        EvalReport::compute(&scores, model.params().threshold, 100).map_err(|e| format!("mask {mask}: {e}"))?;
        let rep = model.represent(&PairInput::from_instance(&parts.test[0])).map_err(err)?;
        if model.params().classifier_width() != d * mask.active_count() || rep.p.rows() != d * mask.active_count() {
            bad_width.push(mask.to_string());
        }
    }
    Ok((
        bad_width.is_empty(),
        format!("15 masks trained and evaluated at d = {d}; width mismatches: {bad_width:?}"),
    ))
}

fn main() {
    let mut taxonomy = None;
    let mut failed = 0;
    let mut report = |id: u32, name: &str, limit: Option<Duration>, check: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
        println!(
            "[{}] {id}. {name}: {detail} ({:.1}s{budget})",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !ok {
            failed += 1;
        }
    };
    let secs = |s| Some(Duration::from_secs(s));
    report(1, "gradient suite", secs(60), &mut gradient_suite);
    report(2, "metric oracle suite", secs(10), &mut metric_oracle_suite);
    report(3, "overfit check", secs(120), &mut overfit_check);
    report(4, "synthetic taxonomy", secs(300), &mut || taxonomy_check(&mut taxonomy));
    report(5, "AllDef dominance", None, &mut || alldef_dominance(&taxonomy));
    report(6, "split integrity", None, &mut split_integrity);
    report(7, "dataset recipe", None, &mut dataset_recipe);
    report(8, "determinism and persistence", None, &mut determinism_and_persistence);
    report(9, "ablation shapes", None, &mut ablation_shapes);
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    let strict = std::env::var("HYPERDEF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
