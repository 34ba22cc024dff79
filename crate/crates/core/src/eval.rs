//! Deterministic-part correctness scoring, per-length generalization tables,
//! entropy/perplexity, and step-by-step action traces.

use crate::memory::{list_action_label, stack_action_label};
use crate::model::{
    forward_step, forward_step_discrete, ModelConfig, ModelKind, Parameters, StepState,
};
use crate::numerics::log_sum_exp;
use crate::tasks::{LabeledSequence, TaskSpec, TokenStream, Vocab};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Runs the model from a fresh state over the sequence and requires the
/// argmax prediction to hit every deterministic position.
pub fn eval_sequence(
    params: &Parameters,
    config: &ModelConfig,
    seq: &LabeledSequence,
    discretize: bool,
) -> Result<bool> {
    let mut state = StepState::fresh(config);
    for t in 0..seq.tokens.len().saturating_sub(1) {
        let (y, _, next) = if discretize {
            forward_step_discrete(params, config, &state, seq.tokens[t])?
        } else {
            forward_step(params, config, &state, seq.tokens[t])?
        };
        if seq.det_mask[t + 1] && argmax(&y) != seq.tokens[t + 1] {
            return Ok(false);
        }
        state = next;
    }
    Ok(true)
}

/// How a scored sequence is embedded at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// The scored sequence sits mid-stream after unscored warmup sequences,
    /// the way the training data presents it; for counting tasks the
    /// boundary token of the next sequence is scored too.
    Stream,
    /// Every sequence starts from a fresh state, nothing is prepended.
    Reset,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Largest size parameter tested.
    pub n_max: usize,
    /// Fresh instances per size for stochastic tasks; deterministic tasks
    /// collapse to a single trial.
    pub trials: usize,
    /// Discretize the controllers (test-time rounding).
    pub discretize: bool,
    pub seed: u64,
    pub mode: EvalMode,
    /// Unscored sequences preceding the scored one in Stream mode.
    pub warmup_sequences: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_max: 60,
            trials: 10,
            discretize: false,
            seed: 7,
            mode: EvalMode::Stream,
            warmup_sequences: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthRow {
    pub n: usize,
    pub trials: usize,
    pub correct: usize,
    /// A size counts as correct only when every trial was correct; sizes
    /// with no feasible instance are vacuously correct.
    pub all_correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<LengthRow>,
    /// 100 * (#sizes fully correct) / n_max.
    pub percent: f64,
    pub discretized: bool,
}

impl EvalReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("   n  trials  correct  n_correct\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:>4}  {:>6}  {:>7}  {:>9}\n",
                r.n,
                r.trials,
                r.correct,
                if r.all_correct { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!(
            "percent of n correct: {:.1}%{}\n",
            self.percent,
            if self.discretized { " (rounded controllers)" } else { "" }
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,trials,correct_trials,n_correct\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.n,
                r.trials,
                r.correct,
                r.all_correct as u8
            ));
        }
        out
    }
}

/// Builds one evaluation instance of exact size n. In Stream mode the scored
/// sequence is preceded by unscored warmup sequences of the same size, as if
/// it sat mid-stream; counting instances additionally score the boundary
/// token of the following sequence.
pub fn eval_instance(
    task: &TaskSpec,
    n: usize,
    mode: EvalMode,
    warmup_sequences: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LabeledSequence> {
    let mut seq = task.generate(n, rng)?;
    if mode == EvalMode::Stream {
        let mut tokens = Vec::new();
        let mut det = Vec::new();
        for _ in 0..warmup_sequences {
            let warm = task.generate(n, rng)?;
            tokens.extend_from_slice(&warm.tokens);
            det.extend(std::iter::repeat(false).take(warm.tokens.len()));
        }
        tokens.extend_from_slice(&seq.tokens);
        det.extend_from_slice(&seq.det_mask);
        if task.is_counting() {
            tokens.push(0); // every counting sequence starts with 'a'
            det.push(seq.next_token_deterministic);
        }
        seq.loss_mask = vec![true; tokens.len()];
        seq.tokens = tokens;
        seq.det_mask = det;
    }
    Ok(seq)
}

/// Per-size generalization table: a size n is correct only if all its trials
/// are predicted perfectly on their deterministic parts.
pub fn eval_per_length(
    params: &Parameters,
    config: &ModelConfig,
    task: &TaskSpec,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if task.vocab().len() != config.vocab {
        return Err(Error::VocabMismatch(format!(
            "task `{}` has {} tokens but the model expects {}",
            task.name(),
            task.vocab().len(),
            config.vocab
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::with_capacity(opts.n_max);
    let mut n_correct = 0;
    for n in 1..=opts.n_max {
        if n < task.min_n() {
            // no instance of this size exists; vacuously correct
            rows.push(LengthRow {
                n,
                trials: 0,
                correct: 0,
                all_correct: true,
            });
            n_correct += 1;
            continue;
        }
        let trials = if task.deterministic_per_n() { 1 } else { opts.trials };
        let mut correct = 0;
        for _ in 0..trials {
            let seq = eval_instance(task, n, opts.mode, opts.warmup_sequences, &mut rng)?;
            if eval_sequence(params, config, &seq, opts.discretize)? {
                correct += 1;
            }
        }
        let all = correct == trials;
        if all {
            n_correct += 1;
        }
        rows.push(LengthRow {
            n,
            trials,
            correct,
            all_correct: all,
        });
    }
    Ok(EvalReport {
        rows,
        percent: 100.0 * n_correct as f64 / opts.n_max as f64,
        discretized: opts.discretize,
    })
}

/// Mean -log2 probability of the next token over loss-masked positions,
/// continuous controllers, fresh state at stream start.
pub fn entropy_bits(params: &Parameters, config: &ModelConfig, stream: &TokenStream) -> Result<f64> {
    if stream.len() < 2 {
        return Err(Error::InvalidArgument("stream needs at least 2 tokens".into()));
    }
    let mut state = StepState::fresh(config);
    let mut bits = 0.0;
    let mut count = 0usize;
    for t in 0..stream.len() - 1 {
        let (_, _, next) = forward_step(params, config, &state, stream.tokens[t])?;
        if stream.loss_mask[t + 1] {
            let logits = params.out.matvec_t(&next.hidden);
            bits += (log_sum_exp(&logits) - logits[stream.tokens[t + 1]]) / std::f64::consts::LN_2;
            count += 1;
        }
        state = next;
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let bits = bits / count as f64;
    if !bits.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(bits)
}

pub fn perplexity(bits_per_token: f64) -> f64 {
    2f64.powf(bits_per_token)
}

/// Fraction of deterministic positions whose argmax prediction is correct,
/// continuous controllers, fresh state at stream start.
pub fn det_accuracy(params: &Parameters, config: &ModelConfig, stream: &TokenStream) -> Result<f64> {
    if stream.len() < 2 {
        return Err(Error::InvalidArgument("stream needs at least 2 tokens".into()));
    }
    let mut state = StepState::fresh(config);
    let mut hits = 0usize;
    let mut total = 0usize;
    for t in 0..stream.len() - 1 {
        let (y, _, next) = forward_step(params, config, &state, stream.tokens[t])?;
        if stream.det_mask[t + 1] {
            total += 1;
            if argmax(&y) == stream.tokens[t + 1] {
                hits += 1;
            }
        }
        state = next;
    }
    Ok(if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    })
}

/// One line of the step-by-step table.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub token: String,
    pub next: Option<String>,
    pub predicted: String,
    pub proba_next: Option<f64>,
    /// Discrete action label per memory unit.
    pub actions: Vec<String>,
    /// Cell on top of / under the head of each unit, after the update.
    pub tops: Vec<f64>,
}

/// Steps through the tokens (discretized controllers by default) and records
/// prediction and action columns; one row per input token.
pub fn trace(
    params: &Parameters,
    config: &ModelConfig,
    vocab: &Vocab,
    tokens: &[usize],
    discretize: bool,
) -> Result<Vec<TraceRow>> {
    if config.units == 0 {
        return Err(Error::InvalidArgument(
            "trace needs a model with at least one memory unit".into(),
        ));
    }
    let label = |id: usize| vocab.label(id).to_string();
    let mut state = StepState::fresh(config);
    let mut rows = Vec::with_capacity(tokens.len());
    for (t, &tok) in tokens.iter().enumerate() {
        let (y, acts, next) = if discretize {
            forward_step_discrete(params, config, &state, tok)?
        } else {
            forward_step(params, config, &state, tok)?
        };
        let actions = acts
            .iter()
            .map(|a| {
                let idx = a.argmax();
                match config.kind {
                    ModelKind::List => list_action_label(idx).to_string(),
                    _ => stack_action_label(idx).to_string(),
                }
            })
            .collect();
        rows.push(TraceRow {
            token: label(tok),
            next: tokens.get(t + 1).map(|&n| label(n)),
            predicted: label(argmax(&y)),
            proba_next: tokens.get(t + 1).map(|&n| y[n]),
            actions,
            tops: next.memories.iter().map(|m| m.top()).collect(),
        });
        state = next;
    }
    Ok(rows)
}

/// Aligned plain-text rendering; -1 marks an empty cell.
pub fn render_trace(rows: &[TraceRow]) -> String {
    let units = rows.first().map(|r| r.actions.len()).unwrap_or(0);
    let mut header = vec![
        "current".to_string(),
        "next".to_string(),
        "prediction".to_string(),
        "proba(next)".to_string(),
    ];
    for j in 1..=units {
        header.push(format!("action{j}"));
    }
    for j in 1..=units {
        header.push(format!("unit{j}[top]"));
    }
    let mut table: Vec<Vec<String>> = vec![header];
    for r in rows {
        let mut line = vec![
            r.token.clone(),
            r.next.clone().unwrap_or_else(|| "-".into()),
            r.predicted.clone(),
            r.proba_next.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into()),
        ];
        for a in &r.actions {
            line.push(a.clone());
        }
        for &t in &r.tops {
            line.push(if t == crate::memory::EMPTY {
                "-1".into()
            } else {
                format!("{t:.2}")
            });
        }
        table.push(line);
    }
    let cols = table[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:>width$}", width = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
