//! SGD with truncated backprop through time, hard gradient clipping, the
//! validation-entropy learning-rate schedule, the length curriculum, and
//! random-restart search.

use crate::eval::{det_accuracy, entropy_bits};
use crate::model::{backward, init_params, window_loss, ModelConfig, Parameters, StepState};
use crate::tasks::{make_stream_min_tokens, TaskSpec, TokenStream};
use crate::{Error, Result};
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub lr0: f64,
    /// Hard element-wise gradient clip.
    pub clip: f64,
    /// Tokens consumed per truncated-backprop window.
    pub bptt_window: usize,
    /// Fresh stream tokens per epoch.
    pub epoch_tokens: usize,
    pub max_epochs: usize,
    /// Epochs between curriculum increments.
    pub curriculum_epochs: usize,
    /// Largest training size (sequences stay below 20).
    pub curriculum_cap: usize,
    /// Extra epochs spent at the initial size before the curriculum starts
    /// counting; memory-coordination tasks need the mechanism to form on
    /// short sequences first.
    pub crystallize_epochs: usize,
    /// Multiplied into the rate once the curriculum first advances, so that
    /// growth does not destroy a formed solution. 1.0 leaves the rate alone.
    pub growth_lr_factor: f64,
    pub restarts: usize,
    /// Stop a run once the learning rate falls below this.
    pub lr_halt: f64,
    /// Held-out validation stream size.
    pub val_tokens: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.1,
            clip: 15.0,
            bptt_window: 50,
            epoch_tokens: 10_000,
            max_epochs: 100,
            curriculum_epochs: 2,
            curriculum_cap: 19,
            crystallize_epochs: 0,
            growth_lr_factor: 1.0,
            restarts: 10,
            lr_halt: 1e-5,
            val_tokens: 5_000,
            seed: 1,
        }
    }
}

/// Clamps every gradient coordinate to [-c, +c].
pub fn clip_gradients(grads: &mut Parameters, c: f64) {
    grads.for_each_mat_mut(|m| {
        for v in m.data_mut() {
            *v = v.clamp(-c, c);
        }
    });
}

/// Halves the rate whenever validation entropy fails to decrease by more
/// than 1e-4 bits/token.
pub fn lr_schedule_step(prev_val_entropy: f64, new_val_entropy: f64, lr: f64) -> f64 {
    if new_val_entropy >= prev_val_entropy - 1e-4 {
        lr / 2.0
    } else {
        lr
    }
}

/// Training size for an epoch: starts at 2, +1 every `curriculum_epochs`,
/// capped at `curriculum_cap`. The optional crystallization phase stretches
/// the first stage.
pub fn curriculum_n(epoch: usize, config: &TrainConfig) -> usize {
    let epoch = epoch.saturating_sub(config.crystallize_epochs);
    (2 + epoch / config.curriculum_epochs.max(1)).min(config.curriculum_cap)
}

/// One pass over the stream in consecutive windows of `bptt_window` consumed
/// tokens (plus a one-token lookahead used only as the final target). The
/// carried state crosses window boundaries, gradients do not. Returns the
/// mean negative log-likelihood per scored token (nats).
pub fn train_epoch(
    params: &mut Parameters,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    lr: f64,
    stream: &TokenStream,
) -> Result<f64> {
    if stream.len() < tcfg.bptt_window {
        return Err(Error::InvalidArgument(
            "stream is shorter than the backprop window".into(),
        ));
    }
    let mut state = StepState::fresh(mcfg);
    let mut total = 0.0;
    let mut scored = 0usize;
    let mut pos = 0usize;
    while pos + 1 < stream.len() {
        let end = (pos + tcfg.bptt_window).min(stream.len() - 1);
        let tokens = &stream.tokens[pos..=end];
        let mask = &stream.loss_mask[pos + 1..=end];
        let (loss, cache) = window_loss(params, mcfg, state, tokens, mask)?;
        let mut grads = backward(params, mcfg, &cache);
        clip_gradients(&mut grads, tcfg.clip);
        params.axpy(-lr, &grads);
        total += loss;
        scored += mask.iter().filter(|&&b| b).count();
        state = cache.into_final_state();
        pos = end;
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(if scored == 0 { 0.0 } else { total / scored as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub n_max: usize,
    /// Rate in effect during this epoch.
    pub lr: f64,
    pub train_nll: f64,
    pub val_entropy_bits: f64,
}

/// Everything one restart produced.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Final parameters; None when the run diverged.
    pub params: Option<Parameters>,
    pub val_entropy_bits: f64,
    pub val_det_accuracy: f64,
    pub diverged: bool,
}

const VAL_SEED_MIX: u64 = 0x9E3779B97F4A7C15;

fn stream_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_add((epoch as u64 + 1).wrapping_mul(VAL_SEED_MIX))
}

/// One restart: curriculum over fresh epoch streams, entropy-driven rate
/// halving against a fixed held-out stream, stop at max_epochs or once the
/// rate falls below lr_halt. Any numerical failure marks the run diverged.
pub fn run_training(mcfg: &ModelConfig, task: &TaskSpec, tcfg: &TrainConfig, seed: u64) -> RunRecord {
    let diverged = |epochs: Vec<EpochRecord>| RunRecord {
        seed,
        epochs,
        params: None,
        val_entropy_bits: f64::INFINITY,
        val_det_accuracy: 0.0,
        diverged: true,
    };
    let mut params = init_params(mcfg, seed);
    let mut lr = tcfg.lr0;
    let mut prev_entropy = f64::INFINITY;
    let mut epochs = Vec::new();
    let mut stage = 0usize;
    let mut stage_val: Option<TokenStream> = None;
    for epoch in 0..tcfg.max_epochs {
        let n_max = curriculum_n(epoch, tcfg);
        // The validation stream tracks the current curriculum stage so the
        // entropies the schedule compares measure one distribution; the
        // comparison resets whenever the stage changes.
        if stage_val.is_none() || n_max != stage {
            if stage == 2 && n_max > 2 {
                lr *= tcfg.growth_lr_factor;
            }
            stage = n_max;
            stage_val = match make_stream_min_tokens(task, n_max, tcfg.val_tokens, seed ^ VAL_SEED_MIX)
            {
                Ok(s) => Some(s),
                Err(_) => return diverged(epochs),
            };
            prev_entropy = f64::INFINITY;
        }
        let stream = match make_stream_min_tokens(
            task,
            n_max,
            tcfg.epoch_tokens,
            stream_seed(seed, epoch),
        ) {
            Ok(s) => s,
            Err(_) => return diverged(epochs),
        };
        let nll = match train_epoch(&mut params, mcfg, tcfg, lr, &stream) {
            Ok(v) => v,
            Err(_) => return diverged(epochs),
        };
        let ent = match entropy_bits(&params, mcfg, stage_val.as_ref().unwrap()) {
            Ok(v) => v,
            Err(_) => return diverged(epochs),
        };
        epochs.push(EpochRecord {
            epoch,
            n_max,
            lr,
            train_nll: nll,
            val_entropy_bits: ent,
        });
        // The rate holds steady while the curriculum grows; once it tops out,
        // anneal whenever validation entropy stops decreasing.
        if n_max >= tcfg.curriculum_cap {
            lr = lr_schedule_step(prev_entropy, ent, lr);
        }
        prev_entropy = ent;
        if lr < tcfg.lr_halt {
            break;
        }
    }
    // Selection metrics are always measured on the full-range held-out
    // stream so restarts stopped at different stages stay comparable.
    let full_val = match make_stream_min_tokens(
        task,
        tcfg.curriculum_cap,
        tcfg.val_tokens,
        seed ^ VAL_SEED_MIX,
    ) {
        Ok(s) => s,
        Err(_) => return diverged(epochs),
    };
    let val_det_accuracy = match det_accuracy(&params, mcfg, &full_val) {
        Ok(v) => v,
        Err(_) => return diverged(epochs),
    };
    let val_entropy_bits = match entropy_bits(&params, mcfg, &full_val) {
        Ok(v) => v,
        Err(_) => return diverged(epochs),
    };
    RunRecord {
        seed,
        epochs,
        params: Some(params),
        val_entropy_bits,
        val_det_accuracy,
        diverged: false,
    }
}

/// Fixed-stream variant (language modeling): trains `epochs` passes over
/// `train_stream`, with the rate schedule driven by `val_stream`.
pub fn train_epochs_on_stream(
    params: &mut Parameters,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    train_stream: &TokenStream,
    val_stream: &TokenStream,
    epochs: usize,
) -> Result<Vec<EpochRecord>> {
    let mut lr = tcfg.lr0;
    let mut prev_entropy = f64::INFINITY;
    let mut records = Vec::new();
    for epoch in 0..epochs {
        let nll = train_epoch(params, mcfg, tcfg, lr, train_stream)?;
        let ent = entropy_bits(params, mcfg, val_stream)?;
        records.push(EpochRecord {
            epoch,
            n_max: 0,
            lr,
            train_nll: nll,
            val_entropy_bits: ent,
        });
        lr = lr_schedule_step(prev_entropy, ent, lr);
        prev_entropy = ent;
        if lr < tcfg.lr_halt {
            break;
        }
    }
    Ok(records)
}

/// Index of the best completed run: highest validation deterministic-part
/// accuracy, ties broken by lower validation entropy, then lower seed.
pub fn select_best(records: &[RunRecord]) -> Option<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.diverged && r.params.is_some())
        .max_by(|(_, a), (_, b)| {
            a.val_det_accuracy
                .total_cmp(&b.val_det_accuracy)
                .then(b.val_entropy_bits.total_cmp(&a.val_entropy_bits))
                .then(b.seed.cmp(&a.seed))
        })
        .map(|(i, _)| i)
}

/// Worker count for restart search: STACKRNN_THREADS when set, otherwise the
/// machine's available parallelism, never more than the restart count.
pub fn restart_threads(restarts: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    std::env::var("STACKRNN_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw)
        .min(restarts.max(1))
}

/// Runs `restarts` independent trainings with seeds seed+0..seed+R-1 and
/// returns the best run's parameters plus every record. Restarts run on up
/// to `restart_threads()` workers; the selection is a pure function of the
/// records, so the outcome does not depend on scheduling.
pub fn train_with_restarts(
    mcfg: &ModelConfig,
    task: &TaskSpec,
    tcfg: &TrainConfig,
) -> Result<(Parameters, Vec<RunRecord>)> {
    mcfg.validate()?;
    if task.vocab().len() != mcfg.vocab {
        return Err(Error::VocabMismatch(format!(
            "task `{}` has {} tokens but the model expects {}",
            task.name(),
            task.vocab().len(),
            mcfg.vocab
        )));
    }
    if tcfg.restarts < 1 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let n = tcfg.restarts;
    let threads = restart_threads(n);
    let mut records: Vec<Option<RunRecord>> = (0..n).map(|_| None).collect();
    if threads <= 1 {
        for (r, slot) in records.iter_mut().enumerate() {
            *slot = Some(run_training(mcfg, task, tcfg, tcfg.seed + r as u64));
        }
    } else {
        let next = AtomicUsize::new(0);
        let results = std::sync::Mutex::new(Vec::<(usize, RunRecord)>::new());
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let r = next.fetch_add(1, Ordering::SeqCst);
                    if r >= n {
                        break;
                    }
                    let rec = run_training(mcfg, task, tcfg, tcfg.seed + r as u64);
                    results.lock().unwrap().push((r, rec));
                });
            }
        });
        for (r, rec) in results.into_inner().unwrap() {
            records[r] = Some(rec);
        }
    }
    let records: Vec<RunRecord> = records.into_iter().map(|r| r.unwrap()).collect();
    let best = select_best(&records).ok_or(Error::AllRunsDiverged(n))?;
    let params = records[best].params.clone().expect("selected run completed");
    Ok((params, records))
}
