//! Fits boosted regression trees to a noisy nonlinear function and reports
//! held-out accuracy.
//!
//! ```text
//! cargo run --release --example train_gbdt
//! ```

use rand::Rng;
use spat::learners::{gbdt, GbdtParams};
use spat::rng::rng_from;
use spat::tuning::{compute_metrics, train_test_split};
use spat::Matrix;

fn main() -> spat::Result<()> {
    let mut rng = rng_from(1);
    let rows: Vec<Vec<f64>> = (0..2000).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 90.0 + 20.0 * r[0] + 10.0 * (3.0 * r[1]).sin() - 8.0 * r[2] * r[3] + rng.gen_range(-0.5..0.5))
        .collect();
    let x = Matrix::from_rows(&rows)?;
    let (train, test) = train_test_split(x.rows(), 0.2, 7)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<f64>>();

    let params = GbdtParams {
        n_estimators: 400,
        learning_rate: 0.1,
        max_depth: 5,
        subsample: 0.8,
        colsample_by_tree: 0.8,
        seed: 2,
        ..GbdtParams::default()
    };
    let mut curve = Vec::new();
    let xt = x.select_rows(&train);
    let yt = pick(&train);
    let model = gbdt::train_with(&xt, &yt, &params, |round, pred| {
        if (round + 1) % 100 == 0 {
            let mse = pred.iter().zip(&yt).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yt.len() as f64;
            curve.push((round + 1, mse));
        }
    })?;
    for (round, mse) in curve {
        println!("round {round:>4}: train MSE {mse:.3}");
    }

    let m = compute_metrics(&model.predict(&x.select_rows(&test))?, &pick(&test))?;
    let depth = model.trees.iter().map(|t| t.depth()).max().unwrap_or(0);
    println!("{} trees, max depth {depth}", model.trees.len());
    println!("test MAE {:.3}, R2 {:.4}, {:.1}% within 2 s", m.mae, m.r2.unwrap_or(f64::NAN), 100.0 * m.fraction_within_2s);
    Ok(())
}
