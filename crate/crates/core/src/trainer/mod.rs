//! Stochastic maximum-a-posteriori training.
//!
//! Each batch runs against a read-only snapshot of the model: latent sweeps
//! for the batch's tokens and fantasy-particle sweeps run in parallel, each
//! with its own RNG stream derived from `(seed, epoch, batch, index)`, then
//! the gradient is summed in a fixed order and applied. Nothing in the
//! result depends on the number of worker threads.

mod adagrad;
mod gradient;
mod hyper;
mod init;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cardinality::{resample_situation_in_place, sample_cardinality, uniform_entity, UnitPotentials};
use crate::corpus::GraphToken;
use crate::error::{Error, Result};
use crate::mcmc::{average_predicate, sweep_token, LatentState, SweepStats, UnigramSampler, ZRatio};
use crate::model::{Model, Params, Situation};
use crate::rng::{stream_rng, Stream};

pub use adagrad::{apply_update, AdaGradState};
pub use gradient::{negative_gradients, positive_gradients, GradientAccumulator};
pub use hyper::Hyperparams;
pub use init::{init_from_pretrained, init_random, load_pretrained, ppmi};

/// Persistent background chains, one situation per particle.
pub type ParticleSet = Vec<Situation>;

/// Everything needed to continue training bit-exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub adagrad: AdaGradState,
    pub particles: ParticleSet,
    pub latents: Vec<LatentState>,
    /// Next batch to run.
    pub epoch: u64,
    pub batch: u64,
}

impl TrainState {
    /// Fresh state: latent entities drawn from each observed predicate's
    /// own weights, latent predicates from the unigram distribution, particle
    /// shapes resampled from the corpus, particle entities uniform.
    pub fn new(model: Model, tokens: &[GraphToken], hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        if tokens.is_empty() {
            return Err(Error::Data("empty training corpus".into()));
        }
        for t in tokens {
            crate::corpus::validate_links(t.nodes.len(), &t.links, model.labels.len())?;
            if t.nodes.iter().any(|c| c.index() >= model.n_preds()) {
                return Err(Error::Data("token predicate outside vocabulary".into()));
            }
        }
        let (n, c) = (model.n_dims(), model.cardinality());
        let unigram = UnigramSampler::new(&model);
        let latents = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut rng = stream_rng(hp.seed, Stream::LatentInit, [i as u64, 0, 0]);
                let entities = t
                    .nodes
                    .iter()
                    .map(|&p| {
                        let theta = UnitPotentials::new(model.params.pred(p).to_vec());
                        sample_cardinality(&theta, c, &mut rng)
                    })
                    .collect();
                let neg_predicates = t.nodes.iter().map(|_| unigram.sample(&mut rng)).collect();
                LatentState {
                    entities,
                    neg_predicates,
                }
            })
            .collect();
        let mut rng = stream_rng(hp.seed, Stream::ParticleShapes, [0, 0, 0]);
        let particles = (0..hp.n_particles)
            .map(|_| {
                let t = &tokens[rng.random_range(0..tokens.len())];
                Situation {
                    entities: t.nodes.iter().map(|_| uniform_entity(n, c, &mut rng)).collect(),
                    links: t.links.clone(),
                }
            })
            .collect();
        Ok(TrainState {
            adagrad: Params::zeros_like(&model.params),
            model,
            particles,
            latents,
            epoch: 0,
            batch: 0,
        })
    }
}

/// Per-batch diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchReport {
    pub epoch: u64,
    pub batch: u64,
    pub acc_entity: f64,
    pub acc_pred: f64,
    /// Mean `t_c(x)` of observed predicates on their latent entities.
    pub mean_truth: f64,
    pub link_norm: f64,
    pub pred_norm: f64,
}

impl BatchReport {
    /// `epoch batch acc_entity acc_pred mean_truth link_norm pred_norm`
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {:.6} {:.6} {:.6} {:.6} {:.6}",
            self.epoch, self.batch, self.acc_entity, self.acc_pred, self.mean_truth, self.link_norm, self.pred_norm
        )
    }
}

pub trait ProgressSink {
    fn record(&mut self, report: &BatchReport) -> Result<()>;
}

impl ProgressSink for Vec<BatchReport> {
    fn record(&mut self, report: &BatchReport) -> Result<()> {
        self.push(report.clone());
        Ok(())
    }
}

/// Discards reports.
pub struct NullSink;

impl ProgressSink for NullSink {
    fn record(&mut self, _: &BatchReport) -> Result<()> {
        Ok(())
    }
}

/// Writes one line per batch.
pub struct LineSink<W: Write>(pub W);

impl<W: Write> ProgressSink for LineSink<W> {
    fn record(&mut self, report: &BatchReport) -> Result<()> {
        writeln!(self.0, "{}", report.to_line())?;
        Ok(())
    }
}

pub struct Trainer<'a> {
    tokens: &'a [GraphToken],
    hp: Hyperparams,
    state: TrainState,
    unigram: UnigramSampler,
    order: Option<(u64, Vec<usize>)>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, tokens: &'a [GraphToken], hp: Hyperparams) -> Result<Self> {
        let state = TrainState::new(model, tokens, &hp)?;
        Self::resume(state, tokens, hp)
    }

    /// Continue from a saved state. The corpus must be the one the state was
    /// built from.
    pub fn resume(state: TrainState, tokens: &'a [GraphToken], hp: Hyperparams) -> Result<Self> {
        hp.validate()?;
        if state.latents.len() != tokens.len() {
            return Err(Error::Data(format!(
                "state has {} latent tokens, corpus has {}",
                state.latents.len(),
                tokens.len()
            )));
        }
        for (t, l) in tokens.iter().zip(&state.latents) {
            if t.nodes.len() != l.entities.len() {
                return Err(Error::Data("latent state does not match corpus".into()));
            }
        }
        let unigram = UnigramSampler::new(&state.model);
        Ok(Trainer {
            tokens,
            hp,
            state,
            unigram,
            order: None,
        })
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.tokens.len().div_ceil(self.hp.batch_size) as u64
    }

    pub fn is_finished(&self) -> bool {
        self.state.epoch >= self.hp.epochs as u64
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn model(&self) -> &Model {
        &self.state.model
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn epoch_order(&mut self, epoch: u64) -> &[usize] {
        if self.order.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut order: Vec<usize> = (0..self.tokens.len()).collect();
            order.shuffle(&mut stream_rng(self.hp.seed, Stream::Shuffle, [epoch, 0, 0]));
            self.order = Some((epoch, order));
        }
        &self.order.as_ref().expect("just set").1
    }

    /// Run the next batch. Returns `None` once all epochs are done.
    pub fn step(&mut self) -> Result<Option<BatchReport>> {
        if self.is_finished() {
            return Ok(None);
        }
        let (epoch, batch) = (self.state.epoch, self.state.batch);
        let bs = self.hp.batch_size;
        let seed = self.hp.seed;
        let ids: Vec<usize> = {
            let order = self.epoch_order(epoch);
            let start = batch as usize * bs;
            order[start..(start + bs).min(order.len())].to_vec()
        };

        let tokens = self.tokens;
        let batches_per_epoch = self.batches_per_epoch();
        let hp = &self.hp;
        let unigram = &self.unigram;
        let state = &mut self.state;
        let snapshot = &state.model;
        let avg = average_predicate(snapshot, hp.z_ratio_k);
        let z_ratio = if hp.exact_z_ratio {
            ZRatio::Exact
        } else {
            ZRatio::Approx(&avg)
        };

        let mut work: Vec<(usize, LatentState)> = ids
            .iter()
            .map(|&i| (i, std::mem::take(&mut state.latents[i])))
            .collect();
        let sweep_stats: Vec<Result<SweepStats>> = work
            .par_iter_mut()
            .map(|(i, lat)| {
                let mut rng = stream_rng(seed, Stream::Latent, [epoch, *i as u64, 0]);
                sweep_token(
                    &tokens[*i],
                    lat,
                    snapshot,
                    z_ratio,
                    unigram,
                    hp.steps_per_variable,
                    &mut rng,
                )
            })
            .collect();
        state
            .particles
            .par_iter_mut()
            .enumerate()
            .for_each(|(p, s)| {
                let mut rng = stream_rng(seed, Stream::Particle, [epoch, batch, p as u64]);
                resample_situation_in_place(s, snapshot, hp.particle_sweeps_per_batch, &mut rng);
            });

        let mut stats = SweepStats::default();
        let mut acc = Params::zeros_like(&snapshot.params);
        let mut truth_sum = 0.0;
        let mut truth_n = 0usize;
        for ((i, lat), st) in work.iter().zip(sweep_stats) {
            stats.merge(&st?);
            let t = &tokens[*i];
            positive_gradients(t, lat, snapshot, &mut acc);
            for (x, &c) in lat.entities.iter().zip(&t.nodes) {
                truth_sum += snapshot.truth_probability(x, c);
                truth_n += 1;
            }
        }
        let weight = ids.len() as f64 / state.particles.len() as f64;
        negative_gradients(&state.particles, &mut acc, weight);
        for (i, lat) in work {
            state.latents[i] = lat;
        }

        apply_update(&mut state.model, &acc, &mut state.adagrad, hp)?;

        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let report = BatchReport {
            epoch,
            batch,
            acc_entity: stats.entity_rate(),
            acc_pred: stats.pred_rate(),
            mean_truth: if truth_n > 0 { truth_sum / truth_n as f64 } else { 0.0 },
            link_norm: norm(&state.model.params.link_weights),
            pred_norm: norm(&state.model.params.pred_weights),
        };

        state.batch += 1;
        if state.batch >= batches_per_epoch {
            state.batch = 0;
            state.epoch += 1;
        }
        Ok(Some(report))
    }

    /// Run until all epochs are done or `max_batches` more batches have run.
    pub fn run(&mut self, sink: &mut dyn ProgressSink, max_batches: Option<u64>) -> Result<()> {
        let mut done = 0u64;
        while max_batches.is_none_or(|m| done < m) {
            match self.step()? {
                Some(r) => sink.record(&r)?,
                None => break,
            }
            done += 1;
        }
        Ok(())
    }
}

/// Train `model` on `tokens` for `hp.epochs` epochs.
pub fn train(model: Model, tokens: &[GraphToken], hp: &Hyperparams, sink: &mut dyn ProgressSink) -> Result<Model> {
    if hp.epochs == 0 {
        hp.validate()?;
        return Ok(model);
    }
    let mut trainer = Trainer::new(model, tokens, hp.clone())?;
    trainer.run(sink, None)?;
    Ok(trainer.into_state().model)
}

/// Run `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
