//! Command-line driver: train models with random restarts, produce per-length
//! generalization reports, print step-by-step traces, and export task streams.
//!
//! Every command honors --seed and is end-to-end deterministic given it.
//! Errors exit nonzero with a single `error: ...` line on stderr.

mod checkpoint;

use clap::{Args, Parser, Subcommand};
use stackrnn_core::eval::{
    entropy_bits, eval_per_length, perplexity, trace, render_trace, EvalOptions,
};
use stackrnn_core::model::{init_params, ModelConfig, ModelKind, Parameters};
use stackrnn_core::tasks::{
    generate_seeded, text_stream, TaskKind, TaskSpec, TextMode, TokenStream,
};
use stackrnn_core::training::{
    train_epochs_on_stream, train_with_restarts, RunRecord, TrainConfig,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "stackrnn",
    about = "Recurrent sequence predictors with trainable stack/list memory"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train with random restarts and write the best checkpoint
    Train(TrainArgs),
    /// Per-length generalization report for a trained model
    Eval(EvalArgs),
    /// Step-by-step action trace of a trained model
    Trace(TraceArgs),
    /// Generate a task sequence or stream plus its mask sidecar
    Generate(GenerateArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Task name: anbn, anbncn, anbncndn, anb2n, anbmcnm, memorization,
    /// addition, text
    #[arg(long)]
    task: String,
    /// Model kind: rnn, stack or list
    #[arg(long, default_value = "stack")]
    kind: String,
    /// Hidden units
    #[arg(long, default_value_t = 40)]
    hidden: usize,
    /// Memory units (stacks or lists); ignored for rnn
    #[arg(long, default_value_t = 10)]
    units: usize,
    /// Cells read from the top of each memory unit
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Enable the NO-OP action
    #[arg(long)]
    noop: bool,
    /// Enable the hidden-to-hidden recurrence matrix (always on for rnn)
    #[arg(long)]
    use_r: bool,
    /// Materialized-cell bound per memory unit
    #[arg(long, default_value_t = 512)]
    cap: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum training epochs per restart
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Fresh stream tokens per epoch
    #[arg(long, default_value_t = 10_000)]
    epoch_tokens: usize,
    /// Epochs between curriculum increments
    #[arg(long, default_value_t = 2)]
    curriculum_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 15.0)]
    clip: f64,
    /// Truncated-backprop window
    #[arg(long, default_value_t = 50)]
    bptt: usize,
    /// Held-out validation stream size
    #[arg(long, default_value_t = 5_000)]
    val_tokens: usize,
    /// Dictionary size for the memorization task
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// Training text for --task text
    #[arg(long)]
    text_file: Option<PathBuf>,
    /// Character-level instead of word-level text tokens
    #[arg(long)]
    char_level: bool,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
    /// Run log path (default: <out>.log)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    task: String,
    /// Largest size parameter tested
    #[arg(long, default_value_t = 60)]
    max_n: usize,
    /// Instances per size for stochastic tasks
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Discretize the controllers at test time
    #[arg(long)]
    rounding: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// Memory cell bound at evaluation time
    #[arg(long, default_value_t = 512)]
    cap: usize,
    /// Text to score with --task text (prints entropy instead of a table)
    #[arg(long)]
    text_file: Option<PathBuf>,
    #[arg(long)]
    char_level: bool,
    /// Also write the report as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Literal input, one symbol per character
    #[arg(long)]
    input: Option<String>,
    /// Generate the input from a task instead
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// Keep the controllers continuous instead of discretized
    #[arg(long)]
    continuous: bool,
    #[arg(long, default_value_t = 512)]
    cap: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    task: String,
    /// Exact size parameter for a single sequence
    #[arg(long)]
    n: Option<usize>,
    /// Second size parameter (a^n b^m c^{n+m} only)
    #[arg(long)]
    m: Option<usize>,
    /// Number of sequences for a stream (with --max-n)
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 19)]
    max_n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// Write the stream here and the mask to <out>.mask
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Trace(args) => cmd_trace(args),
        Cmd::Generate(args) => cmd_generate(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn parse_task(name: &str, alphabet: usize) -> CliResult<TaskSpec> {
    let mut task = TaskSpec::parse(name)?;
    task.alphabet = alphabet;
    Ok(task)
}

fn run_log(records: &[RunRecord], best_seed: u64) -> String {
    let mut log = String::new();
    for (r, rec) in records.iter().enumerate() {
        let _ = writeln!(
            log,
            "# restart {r} seed={} status={} val_entropy_bits={:.6} val_det_accuracy={:.6}",
            rec.seed,
            if rec.diverged { "diverged" } else { "completed" },
            rec.val_entropy_bits,
            rec.val_det_accuracy,
        );
        for e in &rec.epochs {
            let _ = writeln!(
                log,
                "epoch={} nmax={} lr={} train_nll={:.6} val_entropy_bits={:.6}",
                e.epoch, e.n_max, e.lr, e.train_nll, e.val_entropy_bits
            );
        }
    }
    let _ = writeln!(log, "# best seed={best_seed}");
    log
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let task = parse_task(&args.task, args.alphabet)?;
    let kind = ModelKind::parse(&args.kind)?;
    let tcfg = TrainConfig {
        lr0: args.lr,
        clip: args.clip,
        bptt_window: args.bptt,
        epoch_tokens: args.epoch_tokens,
        max_epochs: args.epochs,
        curriculum_epochs: args.curriculum_epochs,
        restarts: args.restarts,
        seed: args.seed,
        val_tokens: args.val_tokens,
        ..Default::default()
    };
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.log", args.out.display())));

    if task.kind == TaskKind::Text {
        return train_text(&args, kind, &tcfg, &log_path);
    }

    let vocab = task.vocab();
    let mut mcfg = ModelConfig::new(kind, args.hidden, vocab.len(), args.units);
    mcfg.read_depth = args.k;
    mcfg.use_noop = args.noop;
    mcfg.use_recurrence = kind == ModelKind::Rnn || args.use_r;
    mcfg.mem_cap = args.cap;

    let (best, records) = train_with_restarts(&mcfg, &task, &tcfg)?;
    let best_idx = stackrnn_core::training::select_best(&records).expect("a run completed");
    let best_rec = &records[best_idx];

    checkpoint::save(&args.out, &mcfg, &vocab, &best)?;
    std::fs::write(&log_path, run_log(&records, best_rec.seed))?;

    println!(
        "trained {} kind={} hidden={} units={} restarts={}",
        task.name(),
        kind.name(),
        args.hidden,
        mcfg.units,
        tcfg.restarts
    );
    println!(
        "best seed={} val_det_accuracy={:.6} val_entropy_bits={:.6}",
        best_rec.seed, best_rec.val_det_accuracy, best_rec.val_entropy_bits
    );
    println!("checkpoint: {}", args.out.display());
    println!("log: {}", log_path.display());
    Ok(())
}

fn load_text_stream(path: &Path, char_level: bool) -> CliResult<TokenStream> {
    let text = std::fs::read_to_string(path)?;
    let mode = if char_level { TextMode::Char } else { TextMode::Word };
    Ok(text_stream(&text, mode)?)
}

/// Splits a text stream 90/10 into train and validation parts.
fn split_stream(stream: &TokenStream) -> (TokenStream, TokenStream) {
    let cut = (stream.len() * 9 / 10).max(2).min(stream.len() - 2);
    let part = |lo: usize, hi: usize| TokenStream {
        tokens: stream.tokens[lo..hi].to_vec(),
        det_mask: stream.det_mask[lo..hi].to_vec(),
        loss_mask: stream.loss_mask[lo..hi].to_vec(),
        vocab: stream.vocab.clone(),
    };
    (part(0, cut), part(cut, stream.len()))
}

fn train_text(args: &TrainArgs, kind: ModelKind, tcfg: &TrainConfig, log_path: &Path) -> CliResult<()> {
    let path = args
        .text_file
        .as_ref()
        .ok_or("--task text needs --text-file")?;
    let stream = load_text_stream(path, args.char_level)?;
    let (train_stream, val_stream) = split_stream(&stream);
    let mut mcfg = ModelConfig::new(kind, args.hidden, stream.vocab.len(), args.units);
    mcfg.read_depth = args.k;
    mcfg.use_noop = args.noop;
    mcfg.use_recurrence = kind == ModelKind::Rnn || args.use_r;
    mcfg.mem_cap = args.cap;
    mcfg.validate()?;

    let mut records: Vec<RunRecord> = Vec::new();
    for r in 0..tcfg.restarts.max(1) {
        let seed = tcfg.seed + r as u64;
        let mut params = init_params(&mcfg, seed);
        let epochs = train_epochs_on_stream(
            &mut params,
            &mcfg,
            tcfg,
            &train_stream,
            &val_stream,
            tcfg.max_epochs,
        );
        match epochs {
            Ok(epochs) => {
                let ent = epochs
                    .last()
                    .map(|e| e.val_entropy_bits)
                    .unwrap_or(f64::INFINITY);
                records.push(RunRecord {
                    seed,
                    epochs,
                    params: Some(params),
                    val_entropy_bits: ent,
                    val_det_accuracy: 0.0,
                    diverged: false,
                });
            }
            Err(_) => records.push(RunRecord {
                seed,
                epochs: Vec::new(),
                params: None,
                val_entropy_bits: f64::INFINITY,
                val_det_accuracy: 0.0,
                diverged: true,
            }),
        }
    }
    // for language modeling the selection criterion is validation entropy
    let best_idx = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.diverged)
        .min_by(|(_, a), (_, b)| a.val_entropy_bits.total_cmp(&b.val_entropy_bits))
        .map(|(i, _)| i)
        .ok_or_else(|| stackrnn_core::Error::AllRunsDiverged(tcfg.restarts))?;
    let best = &records[best_idx];

    checkpoint::save(
        &args.out,
        &mcfg,
        &stream.vocab,
        best.params.as_ref().expect("selected run completed"),
    )?;
    std::fs::write(log_path, run_log(&records, best.seed))?;
    println!(
        "trained text model: vocab={} tokens={} val_entropy_bits={:.6} perplexity={:.3}",
        stream.vocab.len(),
        stream.len(),
        best.val_entropy_bits,
        perplexity(best.val_entropy_bits)
    );
    println!("checkpoint: {}", args.out.display());
    Ok(())
}

fn load_model(path: &Path, cap: usize) -> CliResult<(ModelConfig, Parameters, stackrnn_core::tasks::Vocab)> {
    let mut ck = checkpoint::load(path)?;
    ck.config.mem_cap = cap;
    Ok((ck.config, ck.params, ck.vocab))
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let (config, params, vocab) = load_model(&args.model, args.cap)?;
    let task = parse_task(&args.task, args.alphabet)?;

    if task.kind == TaskKind::Text {
        let path = args
            .text_file
            .as_ref()
            .ok_or("--task text needs --text-file")?;
        let stream = load_text_stream(path, args.char_level)?;
        if stream.vocab.labels() != vocab.labels() {
            return Err("text vocabulary does not match the checkpoint".into());
        }
        let bits = entropy_bits(&params, &config, &stream)?;
        println!("entropy_bits={bits:.6} perplexity={:.4}", perplexity(bits));
        return Ok(());
    }

    if task.vocab().labels() != vocab.labels() {
        return Err(format!(
            "task `{}` vocabulary does not match the checkpoint",
            task.name()
        )
        .into());
    }
    let opts = EvalOptions {
        n_max: args.max_n,
        trials: args.trials,
        discretize: args.rounding,
        seed: args.seed,
        append_boundary: true,
    };
    let report = eval_per_length(&params, &config, &task, &opts)?;
    print!("{}", report.render_table());
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_csv())?;
        println!("report: {}", out.display());
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> CliResult<()> {
    let (config, params, vocab) = load_model(&args.model, args.cap)?;
    let tokens = match (&args.input, &args.task) {
        (Some(text), _) => vocab.encode_chars(text)?,
        (None, Some(task_name)) => {
            let task = parse_task(task_name, args.alphabet)?;
            let n = args.n.ok_or("--task needs --n")?;
            if task.vocab().labels() != vocab.labels() {
                return Err(format!(
                    "task `{}` vocabulary does not match the checkpoint",
                    task.name()
                )
                .into());
            }
            generate_seeded(&task, n, None, args.seed)?.tokens
        }
        (None, None) => return Err("trace needs --input or --task/--n".into()),
    };
    let rows = trace(&params, &config, &vocab, &tokens, !args.continuous)?;
    print!("{}", render_trace(&rows));
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> CliResult<()> {
    let task = parse_task(&args.task, args.alphabet)?;
    if task.kind == TaskKind::Text {
        return Err("text streams come from a text file, not the generator".into());
    }
    if args.m.is_some() && task.kind != TaskKind::AnBmCnm {
        return Err("--m only applies to anbmcnm".into());
    }
    let stream = match (args.n, args.count) {
        (Some(n), None) => {
            let seq = generate_seeded(&task, n, args.m, args.seed)?;
            TokenStream {
                tokens: seq.tokens,
                det_mask: seq.det_mask,
                loss_mask: seq.loss_mask,
                vocab: task.vocab(),
            }
        }
        (None, Some(count)) => stackrnn_core::tasks::make_stream(&task, args.max_n, count, args.seed)?,
        (Some(_), Some(_)) => return Err("pass either --n or --count, not both".into()),
        (None, None) => return Err("generate needs --n or --count".into()),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, stream.render_tokens())?;
            let mask_path = PathBuf::from(format!("{}.mask", path.display()));
            std::fs::write(&mask_path, stream.render_mask())?;
            println!("stream: {}", path.display());
            println!("mask: {}", mask_path.display());
        }
        None => {
            println!("{}", stream.render_tokens());
            println!("{}", stream.render_mask());
        }
    }
    Ok(())
}
