//! IVON against Adam on the two-spirals MLP (2-16-16-1, tanh), five seeds each.
//!
//! ```text
//! cargo run --release --example ivon_spirals -- [steps] [ivon_lr] [adam_lr]
//! ```

use natvb::deep::{train, AdamConfig, IvonConfig, OptimizerSpec, TrainConfig};
use natvb::models::{two_spirals, Activation, MlpModel};

const N: usize = 200;
const WEIGHT_DECAY: f64 = 1e-4;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let steps = arg(1, 10_000.0) as usize;
    let ivon_lr = arg(2, 0.05);
    let adam_lr = arg(3, 0.05);

    let mlp = MlpModel::new(vec![2, 16, 16, 1], Activation::Tanh, two_spirals(N, 0.0, 0)).unwrap();
    let (mut ivon_losses, mut adam_losses) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let init = mlp.init_params(seed);

        let ivon = IvonConfig {
            seed,
            hess_init: 0.1,
            beta2: 0.999,
            weight_decay: WEIGHT_DECAY,
            ..IvonConfig::new(ivon_lr, 10.0 * N as f64)
        };
        let mut cfg = TrainConfig::new(OptimizerSpec::Ivon(ivon));
        cfg.seed = seed;
        cfg.log_every = steps;
        let a = train(&mlp, init.clone(), &cfg, steps).map_err(|f| f.error).unwrap();

        let mut cfg = TrainConfig::new(OptimizerSpec::Adam(AdamConfig { lr: adam_lr, ..AdamConfig::default() }));
        cfg.seed = seed;
        cfg.weight_decay = WEIGHT_DECAY;
        cfg.log_every = steps;
        let b = train(&mlp, init, &cfg, steps).map_err(|f| f.error).unwrap();

        println!(
            "seed {seed}: ivon loss {:.4} acc {:.3} min(h+δ₀) {:.2e} | adam loss {:.4} acc {:.3}",
            a.final_loss(),
            mlp.accuracy(&a.final_params),
            a.min_scale(),
            b.final_loss(),
            mlp.accuracy(&b.final_params)
        );
        ivon_losses.push(a.final_loss());
        adam_losses.push(b.final_loss());
    }
    let (mi, ma) = (median(ivon_losses), median(adam_losses));
    println!("median final loss: ivon {mi:.4}, adam {ma:.4}, ratio {:.3}", mi / ma);
}
