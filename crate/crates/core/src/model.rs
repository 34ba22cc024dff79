//! The three predictors (plain recurrent net, stack-augmented, list-augmented):
//! parameter container, forward step, discretized forward step, windowed
//! cross-entropy loss and the hand-written truncated-backprop backward pass.
//!
//! Within a step the order is normative: memory reads feed the new hidden
//! state, action and write-value heads are computed from that new hidden
//! state, and only then are the memories updated.

use crate::memory::{ActionDist, ListState, MemoryGrad, MemoryState, StackState};
use crate::numerics::{log_sum_exp, sigmoid_scalar, softmax, Mat};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rnn,
    Stack,
    List,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::Stack => "stack",
            ModelKind::List => "list",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ModelKind::Rnn),
            "stack" => Ok(ModelKind::Stack),
            "list" => Ok(ModelKind::List),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Architecture hyper-parameters shared by all operations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Hidden units (m).
    pub hidden: usize,
    /// Vocabulary size (d).
    pub vocab: usize,
    /// Number of memory units in parallel (S); 0 for the plain RNN.
    pub units: usize,
    /// Cells fed from each memory unit into the hidden layer (k).
    pub read_depth: usize,
    /// Adds the NO-OP action to each controller.
    pub use_noop: bool,
    /// Enables the hidden-to-hidden recurrence matrix.
    pub use_recurrence: bool,
    /// Bound on materialized cells per memory unit (per side, for lists).
    pub mem_cap: usize,
}

pub const DEFAULT_MEM_CAP: usize = 512;

impl ModelConfig {
    pub fn new(kind: ModelKind, hidden: usize, vocab: usize, units: usize) -> Self {
        ModelConfig {
            kind,
            hidden,
            vocab,
            units: if kind == ModelKind::Rnn { 0 } else { units },
            read_depth: 2,
            use_noop: false,
            use_recurrence: kind == ModelKind::Rnn,
            mem_cap: DEFAULT_MEM_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 {
            return Err(Error::InvalidArgument("hidden units must be >= 1".into()));
        }
        if self.vocab < 2 {
            return Err(Error::InvalidArgument("vocabulary must have >= 2 tokens".into()));
        }
        if self.read_depth < 1 {
            return Err(Error::InvalidArgument("read depth must be >= 1".into()));
        }
        match self.kind {
            ModelKind::Rnn => {
                if self.units != 0 {
                    return Err(Error::InvalidArgument("rnn takes no memory units".into()));
                }
            }
            _ => {
                if self.units < 1 {
                    return Err(Error::InvalidArgument(
                        "stack/list models need at least one memory unit".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Size of each controller's action set.
    pub fn n_actions(&self) -> usize {
        match self.kind {
            ModelKind::Rnn => 0,
            ModelKind::Stack => 2 + self.use_noop as usize,
            ModelKind::List => 3 + self.use_noop as usize,
        }
    }

    pub fn param_count(&self) -> usize {
        let (m, d, s, k) = (self.hidden, self.vocab, self.units, self.read_depth);
        d * m + m * m + m * d + s * (self.n_actions() * m + m) + m * k * s
    }

    fn fresh_memory(&self) -> Vec<MemoryState> {
        match self.kind {
            ModelKind::Rnn => Vec::new(),
            ModelKind::Stack => (0..self.units)
                .map(|_| MemoryState::Stack(StackState::new()))
                .collect(),
            ModelKind::List => (0..self.units)
                .map(|_| MemoryState::List(ListState::new()))
                .collect(),
        }
    }
}

/// All trainable matrices of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Token embedding, vocab x hidden; applied transposed (row lookup).
    pub embed: Mat,
    /// Hidden-to-hidden recurrence, hidden x hidden; zero when disabled.
    pub recur: Mat,
    /// Hidden-to-logits output map, hidden x vocab.
    pub out: Mat,
    /// Per memory unit: hidden-to-action-logits controller, n_actions x hidden.
    pub act: Vec<Mat>,
    /// Per memory unit: hidden-to-write-value head, 1 x hidden.
    pub write: Vec<Mat>,
    /// Memory-to-hidden map, hidden x (read_depth * units); unit j owns the
    /// column block [j*k, (j+1)*k).
    pub mem_in: Mat,
}

impl Parameters {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (m, d, s, k) = (
            config.hidden,
            config.vocab,
            config.units,
            config.read_depth,
        );
        Parameters {
            embed: Mat::zeros(d, m),
            recur: Mat::zeros(m, m),
            out: Mat::zeros(m, d),
            act: (0..s).map(|_| Mat::zeros(config.n_actions(), m)).collect(),
            write: (0..s).map(|_| Mat::zeros(1, m)).collect(),
            mem_in: Mat::zeros(m, k * s),
        }
    }

    /// Visits every matrix in the fixed serialization order.
    pub fn for_each_mat(&self, mut f: impl FnMut(&Mat)) {
        f(&self.embed);
        f(&self.recur);
        f(&self.out);
        for j in 0..self.act.len() {
            f(&self.act[j]);
            f(&self.write[j]);
        }
        f(&self.mem_in);
    }

    pub fn for_each_mat_mut(&mut self, mut f: impl FnMut(&mut Mat)) {
        f(&mut self.embed);
        f(&mut self.recur);
        f(&mut self.out);
        for j in 0..self.act.len() {
            f(&mut self.act[j]);
            f(&mut self.write[j]);
        }
        f(&mut self.mem_in);
    }

    pub fn n_values(&self) -> usize {
        let mut n = 0;
        self.for_each_mat(|m| n += m.data().len());
        n
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_values());
        self.for_each_mat(|m| out.extend_from_slice(m.data()));
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.for_each_mat_mut(|m| {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        });
        assert_eq!(pos, flat.len());
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_mat(|m| ok &= m.is_finite());
        ok
    }

    /// self <- self + alpha * other, element-wise over all matrices.
    pub fn axpy(&mut self, alpha: f64, other: &Parameters) {
        let flat = other.flatten();
        let mut pos = 0;
        self.for_each_mat_mut(|m| {
            for v in m.data_mut() {
                *v += alpha * flat[pos];
                pos += 1;
            }
        });
    }
}

/// Draws every trainable entry i.i.d. uniform on [-0.1, 0.1] from a ChaCha8
/// stream seeded with `seed`. Fill order: embed, recurrence (skipped and left
/// zero when disabled), out, then per unit (controller, write head), then the
/// memory-to-hidden map.
pub fn init_params(config: &ModelConfig, seed: u64) -> Parameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Parameters::zeros(config);
    let mut fill = |m: &mut Mat| {
        for v in m.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
    };
    fill(&mut params.embed);
    if config.use_recurrence {
        fill(&mut params.recur);
    }
    fill(&mut params.out);
    for j in 0..config.units {
        fill(&mut params.act[j]);
        fill(&mut params.write[j]);
    }
    fill(&mut params.mem_in);
    params
}

/// Hidden vector plus all memory states, carried across time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub hidden: Vec<f64>,
    pub memories: Vec<MemoryState>,
}

impl StepState {
    /// Stream-start state: zero hidden vector, empty memories.
    pub fn fresh(config: &ModelConfig) -> Self {
        StepState {
            hidden: vec![0.0; config.hidden],
            memories: config.fresh_memory(),
        }
    }
}

/// Per-step intermediates kept for the backward pass.
#[derive(Debug, Clone)]
struct StepRecord {
    token: usize,
    /// Memory reads taken from the previous state, one k-vector per unit.
    reads: Vec<Vec<f64>>,
    /// Action distribution per unit (the blend actually applied).
    acts: Vec<ActionDist>,
    /// Write value per unit, after the sigmoid.
    writes: Vec<f64>,
    /// Predicted next-token distribution.
    y: Vec<f64>,
}

fn check_token(config: &ModelConfig, token: usize) -> Result<()> {
    if token >= config.vocab {
        return Err(Error::VocabMismatch(format!(
            "token id {token} outside vocabulary of size {}",
            config.vocab
        )));
    }
    Ok(())
}

/// Shared forward step. When `discretize` is set, each action distribution is
/// replaced by the one-hot argmax (ties to the lowest index) before the memory
/// update; the prediction is unchanged.
fn step_impl(
    params: &Parameters,
    config: &ModelConfig,
    state: &StepState,
    token: usize,
    discretize: bool,
) -> Result<(StepRecord, StepState)> {
    check_token(config, token)?;
    let m = config.hidden;
    let k = config.read_depth;

    // z = embed[token] + recur^T h + sum_j mem_in_j r_j, reads from the
    // previous memories.
    let mut z = params.embed.row(token).to_vec();
    if config.use_recurrence {
        let rh = params.recur.matvec_t(&state.hidden);
        for i in 0..m {
            z[i] += rh[i];
        }
    }
    let reads: Vec<Vec<f64>> = state.memories.iter().map(|mem| mem.read(k)).collect();
    for (j, r) in reads.iter().enumerate() {
        for i in 0..m {
            let row = params.mem_in.row(i);
            let mut acc = 0.0;
            for c in 0..k {
                acc += row[j * k + c] * r[c];
            }
            z[i] += acc;
        }
    }
    let hidden: Vec<f64> = z.iter().map(|&v| sigmoid_scalar(v)).collect();

    // Controllers and memory updates, driven by the new hidden state.
    let mut acts = Vec::with_capacity(config.units);
    let mut writes = Vec::with_capacity(config.units);
    let mut memories = Vec::with_capacity(config.units);
    for (j, mem) in state.memories.iter().enumerate() {
        let logits = params.act[j].matvec(&hidden);
        let probs = ActionDist::from_raw(softmax(&logits));
        let applied = if discretize {
            ActionDist::one_hot(probs.argmax(), probs.len())
        } else {
            probs
        };
        let v = sigmoid_scalar(params.write[j].matvec(&hidden)[0]);
        memories.push(mem.update(&applied, v, config.mem_cap));
        acts.push(applied);
        writes.push(v);
    }

    let y = softmax(&params.out.matvec_t(&hidden));
    Ok((
        StepRecord {
            token,
            reads,
            acts,
            writes,
            y,
        },
        StepState { hidden, memories },
    ))
}

/// One continuous forward step: returns the next-token distribution, the
/// per-unit action distributions and the updated state.
pub fn forward_step(
    params: &Parameters,
    config: &ModelConfig,
    state: &StepState,
    token: usize,
) -> Result<(Vec<f64>, Vec<ActionDist>, StepState)> {
    let (rec, next) = step_impl(params, config, state, token, false)?;
    Ok((rec.y, rec.acts, next))
}

/// Forward step with discretized controllers (test-time rounding).
pub fn forward_step_discrete(
    params: &Parameters,
    config: &ModelConfig,
    state: &StepState,
    token: usize,
) -> Result<(Vec<f64>, Vec<ActionDist>, StepState)> {
    let (rec, next) = step_impl(params, config, state, token, true)?;
    Ok((rec.y, rec.acts, next))
}

/// Everything the backward pass needs about one window.
pub struct WindowCache {
    /// States 0..=T; states[0] is the carried-in state.
    states: Vec<StepState>,
    steps: Vec<StepRecord>,
    mask: Vec<bool>,
    targets: Vec<usize>,
    pub loss: f64,
}

impl WindowCache {
    pub fn final_state(&self) -> &StepState {
        self.states.last().expect("cache holds at least the initial state")
    }

    pub fn into_final_state(mut self) -> StepState {
        self.states.pop().expect("cache holds at least the initial state")
    }
}

/// Runs the window tokens[0..L-1], predicting tokens[1..L]. `loss_mask[t]`
/// selects whether the prediction of tokens[t+1] is scored. Returns the
/// summed negative log-likelihood (natural log) and the cache for `backward`.
pub fn window_loss(
    params: &Parameters,
    config: &ModelConfig,
    state0: StepState,
    tokens: &[usize],
    loss_mask: &[bool],
) -> Result<(f64, WindowCache)> {
    if tokens.len() < 2 {
        return Err(Error::InvalidArgument("window needs at least 2 tokens".into()));
    }
    if loss_mask.len() != tokens.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "loss mask has {} entries for {} prediction positions",
            loss_mask.len(),
            tokens.len() - 1
        )));
    }
    let steps_n = tokens.len() - 1;
    let mut states = Vec::with_capacity(steps_n + 1);
    let mut steps = Vec::with_capacity(steps_n);
    states.push(state0);
    let mut loss = 0.0;
    for t in 0..steps_n {
        check_token(config, tokens[t + 1])?;
        let (rec, next) = step_impl(params, config, &states[t], tokens[t], false)?;
        if loss_mask[t] {
            // -ln y[target], evaluated in log-space for stability
            let h = &next.hidden;
            let logits = params.out.matvec_t(h);
            loss += log_sum_exp(&logits) - logits[tokens[t + 1]];
        }
        states.push(next);
        steps.push(rec);
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((
        loss,
        WindowCache {
            states,
            steps,
            mask: loss_mask.to_vec(),
            targets: tokens[1..].to_vec(),
            loss,
        },
    ))
}

/// Exact gradient of `window_loss` w.r.t. every parameter, truncated at the
/// window boundary: nothing flows into the carried-in state.
pub fn backward(params: &Parameters, config: &ModelConfig, cache: &WindowCache) -> Parameters {
    let m = config.hidden;
    let k = config.read_depth;
    let t_n = cache.steps.len();
    let mut grads = Parameters::zeros(config);

    let mut g_h: Vec<f64> = vec![0.0; m];
    let mut g_mem: Vec<MemoryGrad> = cache
        .states
        .last()
        .map(|s| s.memories.iter().map(|mem| mem.zero_grad()).collect())
        .unwrap_or_default();

    for t in (0..t_n).rev() {
        let rec = &cache.steps[t];
        let h = &cache.states[t + 1].hidden;
        let prev = &cache.states[t];

        // Output head.
        if cache.mask[t] {
            let mut g_o = rec.y.clone();
            g_o[cache.targets[t]] -= 1.0;
            grads.out.add_outer(h, &g_o);
            let vo = params.out.matvec(&g_o);
            for i in 0..m {
                g_h[i] += vo[i];
            }
        }

        // Controllers, write heads, memory adjoints.
        let mut g_mem_prev: Vec<MemoryGrad> =
            prev.memories.iter().map(|mem| mem.zero_grad()).collect();
        for j in 0..config.units {
            let (g_prev_j, g_a, g_v) =
                prev.memories[j].update_adjoint(&rec.acts[j], rec.writes[j], &g_mem[j]);
            g_mem_prev[j] = g_prev_j;

            // softmax backward: g_logits = a .* (g_a - <g_a, a>)
            let a = rec.acts[j].probs();
            let dot: f64 = g_a.iter().zip(a.iter()).map(|(g, p)| g * p).sum();
            let g_logits: Vec<f64> = a.iter().zip(g_a.iter()).map(|(p, g)| p * (g - dot)).collect();
            grads.act[j].add_outer(&g_logits, h);
            let back = params.act[j].matvec_t(&g_logits);
            for i in 0..m {
                g_h[i] += back[i];
            }

            let g_w = g_v * rec.writes[j] * (1.0 - rec.writes[j]);
            let w_row = params.write[j].row(0);
            let gw_row = grads.write[j].row_mut(0);
            for i in 0..m {
                gw_row[i] += g_w * h[i];
                g_h[i] += g_w * w_row[i];
            }
        }

        // Hidden nonlinearity, then the three inputs of z.
        let g_z: Vec<f64> = (0..m).map(|i| g_h[i] * h[i] * (1.0 - h[i])).collect();

        let ge_row = grads.embed.row_mut(rec.token);
        for i in 0..m {
            ge_row[i] += g_z[i];
        }

        let mut g_h_prev = vec![0.0; m];
        if config.use_recurrence {
            grads.recur.add_outer(&prev.hidden, &g_z);
            let back = params.recur.matvec(&g_z);
            for i in 0..m {
                g_h_prev[i] += back[i];
            }
        }

        for j in 0..config.units {
            let r = &rec.reads[j];
            let mut g_r = vec![0.0; k];
            for i in 0..m {
                let gzi = g_z[i];
                let p_row = params.mem_in.row(i);
                let gp_row = grads.mem_in.row_mut(i);
                for c in 0..k {
                    gp_row[j * k + c] += gzi * r[c];
                    g_r[c] += p_row[j * k + c] * gzi;
                }
            }
            prev.memories[j].add_read_grad(&mut g_mem_prev[j], &g_r);
        }

        g_h = g_h_prev;
        g_mem = g_mem_prev;
    }
    grads
}
