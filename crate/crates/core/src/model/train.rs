use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Model, PairInput};
use crate::data::Instance;
use crate::error::{Error, Result};
use crate::eval::{average_precision, select_threshold, ScoredPair};
use crate::numcore::{AdaGradState, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a dev-AP improvement.
    pub patience: Option<usize>,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    pub track_train_accuracy: bool,
    /// Compute per-instance gradients on the rayon pool. The reduction order
    /// is fixed, so results do not depend on this flag.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            patience: Some(5),
            seed: 1,
            track_train_accuracy: false,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: Option<f64>,
    pub dev_ap: f64,
    pub best_dev_ap: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_ap: f64,
    pub threshold: f64,
}

impl TrainReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tloss\ttrain_acc\tdev_ap\tbest_dev_ap\timproved\n");
        for e in &self.epochs {
            let acc = e.train_accuracy.map_or("-".to_string(), |a| format!("{a:.6}"));
            s.push_str(&format!(
                "{}\t{:.8}\t{}\t{:.8}\t{:.8}\t{}\n",
                e.epoch,
                e.mean_loss,
                acc,
                e.dev_ap,
                e.best_dev_ap,
                u8::from(e.improved)
            ));
        }
        s
    }
}

/// Minibatch AdaGrad over a fixed training set. Embeddings are not part of
/// the parameter set and are never touched.
pub struct Trainer {
    model: Model,
    state: AdaGradState,
    rng: ChaCha8Rng,
    data: Vec<(PairInput, bool)>,
    config: TrainConfig,
    epoch: usize,
}

impl Trainer {
    pub fn new(model: Model, train: &[Instance], config: TrainConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if config.batch_size == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        let mc = model.config();
        let state = AdaGradState::new(&model.params().shapes(), mc.learning_rate, mc.epsilon)?;
        let data = train.iter().map(|i| (PairInput::from_instance(i), i.label)).collect();
        Ok(Trainer {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            state,
            data,
            config,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    fn batch_gradients(&self, batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        let per_instance = |&i: &usize| {
            let (input, label) = &self.data[i];
            self.model.loss_and_gradients(input, *label)
        };
        let results: Vec<(f64, Vec<Matrix>)> = if self.config.parallel {
            batch.par_iter().map(per_instance).collect::<Result<_>>()?
        } else {
            batch.iter().map(per_instance).collect::<Result<_>>()?
        };
        let mut iter = results.into_iter();
        let (mut loss, mut total) = iter.next().ok_or(Error::Empty("minibatch"))?;
        for (l, grads) in iter {
            loss += l;
            for (t, g) in total.iter_mut().zip(&grads) {
                t.add_assign(g);
            }
        }
        let scale = 1.0 / batch.len() as f64;
        Ok((loss, total.into_iter().map(|g| g.scale(scale)).collect()))
    }

    /// One pass over the shuffled training data; returns the mean loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            let (loss, grads) = self.batch_gradients(batch)?;
            total += loss;
            let mut params = self.model.params_mut().tensors_mut();
            self.state.step(&mut params, &grads)?;
        }
        self.epoch += 1;
        Ok(total / self.data.len() as f64)
    }

    /// Fraction of training instances classified correctly at probability 0.5.
    pub fn train_accuracy(&self) -> Result<f64> {
        let correct: Vec<bool> = self
            .data
            .par_iter()
            .map(|(input, label)| self.model.predict(input).map(|p| (p >= 0.5) == *label))
            .collect::<Result<_>>()?;
        Ok(correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
    }
}

/// Scores instances in parallel; output order follows the input order.
pub(crate) fn score_all(model: &Model, instances: &[Instance]) -> Result<Vec<ScoredPair>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(id, inst)| {
            model.predict_instance(inst).map(|score| ScoredPair {
                id,
                score,
                gold: inst.label,
            })
        })
        .collect()
}

/// Trains `model` and leaves it at the best dev-AP checkpoint, with its
/// decision threshold chosen on dev.
pub fn train(model: &mut Model, train: &[Instance], dev: &[Instance], config: &TrainConfig) -> Result<TrainReport> {
    if dev.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    if !dev.iter().any(|i| i.label) {
        return Err(Error::Invalid("dev set has no positive instance for AP model selection".into()));
    }
    let mut trainer = Trainer::new(model.clone(), train, config.clone())?;
    let mut best: Option<(f64, usize, crate::model::ModelParams, Vec<ScoredPair>)> = None;
    let mut records = Vec::new();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let mean_loss = trainer.run_epoch()?;
        let train_accuracy = if config.track_train_accuracy {
            Some(trainer.train_accuracy()?)
        } else {
            None
        };
        let scores = score_all(trainer.model(), dev)?;
        let dev_ap = average_precision(&scores)?;
        let improved = best.as_ref().is_none_or(|(ap, ..)| dev_ap > *ap);
        if improved {
            best = Some((dev_ap, epoch, trainer.model().params().clone(), scores));
            stale = 0;
        } else {
            stale += 1;
        }
        let best_dev_ap = best.as_ref().map_or(dev_ap, |b| b.0);
        log::info!("epoch {epoch}: loss {mean_loss:.5} dev AP {dev_ap:.4} (best {best_dev_ap:.4})");
        records.push(EpochRecord {
            epoch,
            mean_loss,
            train_accuracy,
            dev_ap,
            best_dev_ap,
            improved,
        });
        if config.patience.is_some_and(|p| stale >= p) {
            break;
        }
    }
    let (best_dev_ap, best_epoch, mut params, scores) = best.ok_or(Error::Invalid("zero training epochs".into()))?;
    params.threshold = select_threshold(&scores)?;
    let threshold = params.threshold;
    *model.params_mut() = params;
    Ok(TrainReport {
        epochs: records,
        best_epoch,
        best_dev_ap,
        threshold,
    })
}
