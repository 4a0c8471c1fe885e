//! Trains the dense network in single precision with early stopping and
//! prints its learning curve.
//!
//! ```text
//! cargo run --release --example train_mlp
//! ```

use rand::Rng;
use spat::features::ScalerParams;
use spat::learners::mlp::{self, validation_mse};
use spat::learners::{MlpConfig, MlpModel};
use spat::rng::rng_from;
use spat::Matrix;

fn dataset(n: usize, seed: u64) -> spat::Result<(Matrix, Vec<f64>)> {
    let mut rng = rng_from(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|r| r[0] * r[1] + r[2].abs() - 0.5 * r[3]).collect();
    Ok((Matrix::from_rows(&rows)?, y))
}

fn main() -> spat::Result<()> {
    let (x_train, y_train) = dataset(1500, 1)?;
    let (x_val, y_val) = dataset(300, 2)?;
    let scaler = ScalerParams::fit(&x_train)?;
    let (x_train, x_val) = (scaler.apply(&x_train)?, scaler.apply(&x_val)?);

    let cfg = MlpConfig {
        input_dim: 8,
        hidden: vec![64, 32],
        max_epochs: 300,
        patience: 20,
        seed: 4,
        ..MlpConfig::default()
    };
    let model = mlp::train(MlpModel::<f32>::init(&cfg)?, &x_train, &y_train, &x_val, &y_val, &cfg)?;
    for r in model.history.iter().filter(|r| r.epoch % 20 == 0) {
        println!("epoch {:>3}: train {:.4}, validation {:.4}", r.epoch, r.train_mse, r.val_mse);
    }
    println!(
        "{} parameters, stopped after {} epochs, best epoch {:?}, validation MSE {:.4}",
        model.n_params(),
        model.history.len(),
        model.best_epoch,
        validation_mse(&model, &x_val, &y_val)
    );
    Ok(())
}
