// temporary training-dynamics probe; not part of the deliverable
use stackrnn_core::eval::{det_accuracy, entropy_bits, eval_per_length, EvalOptions};
use stackrnn_core::model::{ModelConfig, ModelKind};
use stackrnn_core::tasks::{make_stream_min_tokens, TaskSpec};
use stackrnn_core::training::{run_training, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task_name = args.get(1).map(|s| s.as_str()).unwrap_or("anbn");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let hidden: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(40);
    let units: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
    let noop: bool = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(false);
    let max_epochs: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(100);
    let cap: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(19);
    let ce: usize = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(2);
    let crystallize: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0);
    let growth: f64 = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let task = TaskSpec::parse(task_name).unwrap();
    let mut mcfg = ModelConfig::new(ModelKind::Stack, hidden, task.vocab().len(), units);
    mcfg.use_noop = noop;
    mcfg.use_recurrence = false;
    let tcfg = TrainConfig {
        max_epochs,
        curriculum_cap: cap,
        curriculum_epochs: ce,
        crystallize_epochs: crystallize,
        growth_lr_factor: growth,
        ..Default::default()
    };

    let t0 = Instant::now();
    let rec = run_training(&mcfg, &task, &tcfg, seed);
    println!(
        "seed {seed}: {} epochs in {:.1}s diverged={} val_acc={:.4} val_ent={:.4}",
        rec.epochs.len(),
        t0.elapsed().as_secs_f64(),
        rec.diverged,
        rec.val_det_accuracy,
        rec.val_entropy_bits
    );
    for e in rec.epochs.iter() {
        if e.epoch % 5 == 0 || e.epoch == rec.epochs.len() - 1 {
            println!(
                "  epoch={:3} nmax={:2} lr={:<12} nll={:.4} val={:.4}",
                e.epoch, e.n_max, e.lr, e.train_nll, e.val_entropy_bits
            );
        }
    }
    if let Some(params) = rec.params {
        for discretize in [false, true] {
            let opts = EvalOptions {
                discretize,
                ..Default::default()
            };
            let t1 = Instant::now();
            let report = eval_per_length(&params, &mcfg, &task, &opts).unwrap();
            let first_bad = report.rows.iter().find(|r| !r.all_correct).map(|r| r.n);
            println!(
                "eval rounding={discretize}: {:.1}% (first failure at n={first_bad:?}) in {:.1}s",
                report.percent,
                t1.elapsed().as_secs_f64()
            );
        }
        let val = make_stream_min_tokens(&task, 19, 5000, seed ^ 0x9E3779B97F4A7C15).unwrap();
        println!(
            "val det_acc={:.4} entropy={:.4}",
            det_accuracy(&params, &mcfg, &val).unwrap(),
            entropy_bits(&params, &mcfg, &val).unwrap()
        );

        if task_name == "memorization" || task_name == "addition" {
            use rand::SeedableRng;
            use stackrnn_core::eval::eval_sequence;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
            for warm in [0usize, 1, 2] {
                let mut per_n = Vec::new();
                for n in [1usize, 2, 5, 10, 19, 25, 30] {
                    if n < task.min_n() {
                        continue;
                    }
                    let mut ok = 0;
                    for _ in 0..10 {
                        // manual warmup: unscored full sequences prepended
                        let mut tokens = Vec::new();
                        let mut det = Vec::new();
                        for _ in 0..warm {
                            let w = task.generate(n, &mut rng).unwrap();
                            tokens.extend_from_slice(&w.tokens);
                            det.extend(std::iter::repeat(false).take(w.tokens.len()));
                        }
                        let seq = task.generate(n, &mut rng).unwrap();
                        tokens.extend_from_slice(&seq.tokens);
                        det.extend_from_slice(&seq.det_mask);
                        let probe = stackrnn_core::tasks::LabeledSequence {
                            loss_mask: vec![true; tokens.len()],
                            tokens,
                            det_mask: det,
                            next_token_deterministic: false,
                        };
                        if eval_sequence(&params, &mcfg, &probe, false).unwrap() {
                            ok += 1;
                        }
                    }
                    per_n.push(format!("n={n}:{ok}/10"));
                }
                println!("warmup={warm}: {}", per_n.join(" "));
            }
        }
    }
}
