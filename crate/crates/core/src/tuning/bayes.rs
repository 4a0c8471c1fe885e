//! Gaussian-process Bayesian optimisation with expected improvement.
//!
//! Coordinates live in the unit cube (log dimensions are mapped before the
//! surrogate sees them). The surrogate is a zero-mean GP with an isotropic
//! Matérn 5/2 kernel on standardised scores; its length scale is the best of a
//! fixed log-spaced grid by marginal likelihood.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::space::{Assignment, SearchSpace};
use crate::rng::derived_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub n_init: usize,
    pub n_iter: usize,
    /// Local-search restarts when maximising expected improvement.
    pub restarts: usize,
    /// Exploration margin in expected improvement.
    pub xi: f64,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            n_iter: 50,
            restarts: 64,
            xi: 0.0,
            jitter: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub unit: Vec<f64>,
    pub params: Assignment,
    /// `-inf` when the objective returned a non-finite value.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub best: Assignment,
    pub best_score: f64,
    pub history: Vec<Evaluation>,
}

fn matern52(r: f64, ell: f64) -> f64 {
    let s = 5f64.sqrt() * r / ell;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lower Cholesky factor of a symmetric positive definite matrix (row-major).
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn solve_upper_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Fitted surrogate.
#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    pub length_scale: f64,
    y_mean: f64,
    y_std: f64,
}

const LENGTH_SCALE_GRID: usize = 25;

impl Gp {
    pub fn fit(x: &[Vec<f64>], y: &[f64], jitter: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(Error::data("surrogate needs matching, non-empty observations"));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let yn: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut best: Option<(f64, Self)> = None;
        for g in 0..LENGTH_SCALE_GRID {
            // 0.01 .. 10, log-spaced.
            let ell = 10f64.powf(-2.0 + 3.0 * g as f64 / (LENGTH_SCALE_GRID - 1) as f64);
            let Some((gp, lml)) = Self::fit_with(x, &yn, ell, jitter, y_mean, y_std) else {
                continue;
            };
            if best.as_ref().map_or(true, |(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
        best.map(|(_, gp)| gp)
            .ok_or_else(|| Error::data("surrogate kernel matrix is not positive definite"))
    }

    fn fit_with(x: &[Vec<f64>], yn: &[f64], ell: f64, jitter: f64, y_mean: f64, y_std: f64) -> Option<(Self, f64)> {
        let n = yn.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = matern52(dist(&x[i], &x[j]), ell);
            }
            k[i * n + i] += jitter;
        }
        let chol = cholesky(&k, n)?;
        let alpha = solve_upper_t(&chol, n, &solve_lower(&chol, n, yn));
        let fit: f64 = yn.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
        let lml = -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Some((
            Self {
                x: x.to_vec(),
                chol,
                alpha,
                length_scale: ell,
                y_mean,
                y_std,
            },
            lml,
        ))
    }

    /// Posterior mean and standard deviation in the original score units.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let ks: Vec<f64> = self.x.iter().map(|xi| matern52(dist(xi, p), self.length_scale)).collect();
        let mu: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, n, &ks);
        let var = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_std * mu, self.y_std * var.sqrt())
    }
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best` for maximisation.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let imp = mu - best - xi;
    if sigma <= 1e-12 {
        return imp.max(0.0);
    }
    let z = imp / sigma;
    imp * norm_cdf(z) + sigma * norm_pdf(z)
}

/// `n` Latin-hypercube points in `[0, 1]^d`.
pub fn latin_hypercube(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            strata.swap(i, rng.gen_range(0..=i));
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (strata[i] as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    pts
}

/// Compass search from `start`, maximising `f` inside the unit cube.
fn compass_search(start: Vec<f64>, f: &impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut fx = f(&x);
    let mut step = 0.25;
    let mut trial = x.clone();
    while step > 1e-4 {
        let mut improved = false;
        for j in 0..x.len() {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[j] = (x[j] + dir * step).clamp(0.0, 1.0);
                if trial[j] == x[j] {
                    continue;
                }
                let ft = f(&trial);
                if ft > fx {
                    x.copy_from_slice(&trial);
                    fx = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Maximises `objective` over `space`. Non-finite scores are recorded as `-inf`
/// and left out of the surrogate. Evaluation is sequential.
pub fn bayes_optimize<F>(mut objective: F, space: &SearchSpace, cfg: &BoConfig) -> Result<BoResult>
where
    F: FnMut(&Assignment) -> f64,
{
    if space.is_empty() {
        return Err(Error::config("empty search space"));
    }
    if cfg.n_init + cfg.n_iter == 0 {
        return Err(Error::config("optimisation budget is zero"));
    }
    let d = space.len();
    let mut rng = derived_rng(cfg.seed, "bayes-opt");
    let mut history: Vec<Evaluation> = Vec::with_capacity(cfg.n_init + cfg.n_iter);
    let mut evaluate = |u: Vec<f64>, history: &mut Vec<Evaluation>| {
        let params = space.from_unit(&u);
        // Store the coordinates of the point actually evaluated (after rounding).
        let unit = space.to_unit(&params).expect("assignment covers the space");
        let s = objective(&params);
        let score = if s.is_finite() { s } else { f64::NEG_INFINITY };
        log::debug!("bayes-opt eval {}: score {score:.5}", history.len());
        history.push(Evaluation { unit, params, score });
    };

    for u in latin_hypercube(cfg.n_init, d, &mut rng) {
        evaluate(u, &mut history);
    }
    for _ in 0..cfg.n_iter {
        let next = propose(&history, d, cfg, &mut rng);
        evaluate(next, &mut history);
    }

    let best = history
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.score.total_cmp(&b.score).then(j.cmp(i)))
        .map(|(_, e)| e.clone())
        .expect("at least one evaluation");
    Ok(BoResult {
        best: best.params,
        best_score: best.score,
        history,
    })
}

fn propose(history: &[Evaluation], d: usize, cfg: &BoConfig, rng: &mut impl Rng) -> Vec<f64> {
    let finite: Vec<&Evaluation> = history.iter().filter(|e| e.score.is_finite()).collect();
    let random = |rng: &mut dyn rand::RngCore| (0..d).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>();
    if finite.is_empty() {
        return random(rng);
    }
    let x: Vec<Vec<f64>> = finite.iter().map(|e| e.unit.clone()).collect();
    let y: Vec<f64> = finite.iter().map(|e| e.score).collect();
    let Ok(gp) = Gp::fit(&x, &y, cfg.jitter) else {
        return random(rng);
    };
    let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ei = |p: &[f64]| {
        let (mu, sigma) = gp.predict(p);
        expected_improvement(mu, sigma, best, cfg.xi)
    };
    let mut top: Option<(Vec<f64>, f64)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let (p, v) = compass_search(random(rng), &ei);
        if top.as_ref().map_or(true, |(_, b)| v > *b) {
            top = Some((p, v));
        }
    }
    top.expect("at least one restart").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::tuning::space::Dim;

    fn unit_interval() -> SearchSpace {
        SearchSpace::new(vec![Dim::linear("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn finds_quadratic_peak() {
        let space = unit_interval();
        let mut hits = 0;
        for seed in 0..10 {
            let cfg = BoConfig { seed, ..BoConfig::default() };
            let r = bayes_optimize(|a| -(a["x"] - 0.3).powi(2), &space, &cfg).unwrap();
            assert_eq!(r.history.len(), 60);
            if (r.best["x"] - 0.3).abs() < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "{hits} of 10");
    }

    #[test]
    fn constant_objective() {
        let cfg = BoConfig { n_init: 4, n_iter: 4, ..BoConfig::default() };
        let r = bayes_optimize(|_| 1.5, &unit_interval(), &cfg).unwrap();
        assert!(r.history.iter().all(|e| e.score == 1.5));
        assert_eq!(r.best_score, 1.5);
    }

    #[test]
    fn deterministic_and_in_bounds() {
        let space = SearchSpace::cycle_model();
        let cfg = BoConfig { n_init: 5, n_iter: 5, restarts: 8, seed: 3, ..BoConfig::default() };
        let f = |a: &Assignment| -(a["learning_rate"].log10() + 2.0).powi(2) - a["max_depth"] / 20.0;
        let r1 = bayes_optimize(f, &space, &cfg).unwrap();
        let r2 = bayes_optimize(f, &space, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.history.iter().all(|e| space.contains(&e.params)));
    }

    #[test]
    fn non_finite_scores_are_recorded() {
        let cfg = BoConfig { n_init: 3, n_iter: 3, restarts: 4, ..BoConfig::default() };
        let r = bayes_optimize(|a| if a["x"] < 0.5 { f64::NAN } else { a["x"] }, &unit_interval(), &cfg).unwrap();
        // The first Latin-hypercube stratum lies below 0.5.
        assert!(r.history[..3].iter().any(|e| e.score == f64::NEG_INFINITY));
        assert!(r.best_score.is_finite());
    }

    #[test]
    fn log_dimensions_start_log_uniform() {
        // Pooled over 1000 seeds, the decade of each initial learning rate is uniform.
        let space = SearchSpace::new(vec![Dim::log("lr", 1e-4, 1.0)]).unwrap();
        let mut decades = [0usize; 4];
        for seed in 0..1000 {
            let mut rng = rng_from(seed);
            for u in latin_hypercube(1, 1, &mut rng) {
                let v = space.from_unit(&u)["lr"];
                decades[((v.log10() + 4.0).floor() as usize).min(3)] += 1;
            }
        }
        // Kolmogorov-Smirnov on the empirical CDF at decade edges.
        let mut cum = 0;
        for (i, c) in decades.iter().enumerate() {
            cum += c;
            let dev = (cum as f64 / 1000.0 - (i + 1) as f64 / 4.0).abs();
            assert!(dev < 0.043, "decade {i}: {decades:?}");
        }
    }

    #[test]
    fn gp_interpolates_observations() {
        let x = vec![vec![0.1], vec![0.5], vec![0.9]];
        let y = vec![1.0, -2.0, 0.5];
        let gp = Gp::fit(&x, &y, 1e-6).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (mu, sd) = gp.predict(xi);
            assert!((mu - yi).abs() < 1e-3);
            assert!(sd < 1e-2);
        }
    }

    #[test]
    fn ei_reference_values() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5, 0.0), 0.5);
        // z = 0: EI = sigma * phi(0).
        let ei = expected_improvement(0.0, 2.0, 0.0, 0.0);
        assert!((ei - 2.0 * 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_780_1).abs() < 1e-12);
    }
}
