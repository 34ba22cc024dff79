// temporary fine-grained training probe; not part of the deliverable
use stackrnn_core::eval::{det_accuracy, entropy_bits};
use stackrnn_core::model::{init_params, ModelConfig, ModelKind};
use stackrnn_core::tasks::{make_stream_min_tokens, TaskSpec};
use stackrnn_core::training::{train_epoch, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task_name = args.get(1).map(|s| s.as_str()).unwrap_or("memorization");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let hidden: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let units: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
    let noop: bool = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(true);
    let epochs: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(150);
    let n_fixed: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(2);
    let lr: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let epoch_tokens: usize = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(10_000);

    let task = TaskSpec::parse(task_name).unwrap();
    let mut mcfg = ModelConfig::new(ModelKind::Stack, hidden, task.vocab().len(), units);
    mcfg.use_noop = noop;
    mcfg.use_recurrence = false;
    let tcfg = TrainConfig {
        epoch_tokens,
        ..Default::default()
    };
    let grow_every: usize = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grow_from: usize = args.get(11).and_then(|s| s.parse().ok()).unwrap_or(epochs);
    let lr_grow: f64 = args.get(12).and_then(|s| s.parse().ok()).unwrap_or(lr);

    let val = make_stream_min_tokens(&task, 19, 5000, seed ^ 0xABCD).unwrap();
    let mut params = init_params(&mcfg, seed);
    for epoch in 0..epochs {
        let n_max = if grow_every > 0 && epoch >= grow_from {
            (n_fixed + 1 + (epoch - grow_from) / grow_every).min(19)
        } else {
            n_fixed
        };
        let lr = if epoch >= grow_from { lr_grow } else { lr };
        let stream =
            make_stream_min_tokens(&task, n_max, tcfg.epoch_tokens, seed * 7919 + epoch as u64)
                .unwrap();
        let nll = train_epoch(&mut params, &mcfg, &tcfg, lr, &stream).unwrap();
        if epoch % 5 == 0 || epoch == epochs - 1 {
            let val_now = make_stream_min_tokens(&task, n_max, 4000, seed ^ 0xEF01).unwrap();
            let acc = det_accuracy(&params, &mcfg, &val_now).unwrap();
            let acc19 = det_accuracy(&params, &mcfg, &val).unwrap();
            let ent = entropy_bits(&params, &mcfg, &val_now).unwrap();
            println!(
                "epoch={epoch:3} nmax={n_max:2} nll={nll:.4} acc@nmax={acc:.4} acc@19={acc19:.4} ent={ent:.4}"
            );
        }
    }
}
