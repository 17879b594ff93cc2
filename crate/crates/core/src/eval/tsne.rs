//! Exact t-SNE with per-point perplexity calibration.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAX_POINTS: usize = 10_000;
const BISECTION_STEPS: usize = 200;
const PERPLEXITY_TOLERANCE: f64 = 1e-6;
const INIT_STD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    /// Iterations run with exaggerated affinities and momentum 0.5.
    pub exaggeration_iterations: usize,
    pub momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// A perplexity is reachable only strictly between 1 and N - 1.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.iterations == 0 || !(self.learning_rate > 0.0) || !(self.exaggeration >= 1.0) {
            return Err(Error::Config(format!("invalid t-SNE config {self:?}")));
        }
        if n > MAX_POINTS {
            return Err(Error::Config(format!("exact t-SNE is limited to {MAX_POINTS} points, got {n}")));
        }
        if !(self.perplexity > 1.0 && self.perplexity < n as f64 - 1.0) {
            return Err(Error::Config(format!(
                "perplexity {} is infeasible for {n} points",
                self.perplexity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    /// N x 2.
    pub coords: Matrix,
    pub labels: Vec<usize>,
    /// Perplexity each row's conditional distribution reached.
    pub row_perplexities: Vec<f64>,
    pub kl_initial: f64,
    pub kl_after_exaggeration: f64,
    pub kl_final: f64,
    /// All inputs identical: coordinates are seeded noise.
    pub degenerate: bool,
}

fn squared_distances(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional distribution of row `i` at precision `beta`; returns the
/// perplexity reached.
fn conditional_row(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let d_min = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, (&dj, o)) in d.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let shifted = dj - d_min;
        *o = (-beta * shifted).exp();
        sum += *o;
        weighted += *o * shifted;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    let entropy = sum.ln() + beta * weighted / sum;
    entropy.exp()
}

/// Bisects each row's precision until its perplexity matches the target.
fn calibrate(d: &[f64], n: usize, target: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n * n];
    let mut reached = Vec::with_capacity(n);
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        let out = &mut p[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut perp = conditional_row(row, i, beta, out);
        for _ in 0..BISECTION_STEPS {
            if (perp - target).abs() < PERPLEXITY_TOLERANCE {
                break;
            }
            // Higher precision narrows the distribution.
            if perp > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            perp = conditional_row(row, i, beta, out);
        }
        reached.push(perp);
    }
    (p, reached)
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &qn)| pij * (pij / (qn / z).max(P_FLOOR)).ln())
        .sum()
}

/// Student-t kernel numerators (zero diagonal) and their sum.
fn low_dim_affinities(y: &[f64], n: usize, num: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let q = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = q;
            num[j * n + i] = q;
            z += 2.0 * q;
        }
    }
    z
}

pub fn tsne(x: &Matrix, labels: &[usize], config: &TsneConfig) -> Result<Projection2D> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if x.cols() == 0 {
        return Err(Error::InsufficientData("t-SNE needs at least one input dimension".into()));
    }
    config.validate(n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("positive std");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();

    let d = squared_distances(x);
    if d.iter().all(|&v| v == 0.0) {
        return Ok(Projection2D {
            coords: Matrix::from_vec(n, 2, y)?,
            labels: labels.to_vec(),
            row_perplexities: vec![(n - 1) as f64; n],
            kl_initial: 0.0,
            kl_after_exaggeration: 0.0,
            kl_final: 0.0,
            degenerate: true,
        });
    }

    let (cond, row_perplexities) = calibrate(&d, n, config.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }

    let mut num = vec![0.0; n * n];
    let mut grad = vec![0.0; 2 * n];
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0_f64; 2 * n];
    let z0 = low_dim_affinities(&y, n, &mut num);
    let kl_initial = kl_divergence(&p, &num, z0);
    let mut kl_after_exaggeration = kl_initial;

    for iter in 0..config.iterations {
        let exaggerating = iter < config.exaggeration_iterations;
        let exag = if exaggerating { config.exaggeration } else { 1.0 };
        let momentum = if exaggerating { config.momentum } else { config.final_momentum };
        let z = low_dim_affinities(&y, n, &mut num);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let m = (exag * p[i * n + j] - q / z) * q;
                gx += m * (y[2 * i] - y[2 * j]);
                gy += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(MIN_GAIN)
            };
            update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        let (mx, my) = (0..n).fold((0.0, 0.0), |(a, b), i| (a + y[2 * i], b + y[2 * i + 1]));
        for i in 0..n {
            y[2 * i] -= mx / n as f64;
            y[2 * i + 1] -= my / n as f64;
        }
        if iter + 1 == config.exaggeration_iterations {
            let z = low_dim_affinities(&y, n, &mut num);
            kl_after_exaggeration = kl_divergence(&p, &num, z);
        }
    }
    let z = low_dim_affinities(&y, n, &mut num);
    let kl_final = kl_divergence(&p, &num, z);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch: config.iterations,
        });
    }
    Ok(Projection2D {
        coords: Matrix::from_vec(n, 2, y)?,
        labels: labels.to_vec(),
        row_perplexities,
        kl_initial,
        kl_after_exaggeration,
        kl_final,
        degenerate: false,
    })
}

/// `id,x,y,label` rows.
pub fn write_tsne_csv(path: &Path, ids: &[String], projection: &Projection2D, class_names: &[String]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "id,x,y,label").expect("in-memory write");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for (i, id) in ids.iter().enumerate() {
        let row = projection.coords.row(i);
        let label = class_names
            .get(projection.labels[i])
            .ok_or_else(|| Error::UnknownClass(projection.labels[i].to_string()))?;
        w.write_record([id.as_str(), &row[0].to_string(), &row[1].to_string(), label])
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
