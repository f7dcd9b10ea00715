//! Naive reference computations on the expanded (one row per raw
//! observation) matrices, written without the library's linear algebra.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Squared-exponential kernel `exp(−‖x−y‖²/(2ℓ²))`.
pub fn se(l: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |x, y| {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        (-d2 / (2.0 * l * l)).exp()
    }
}

/// Matérn-5/2 kernel.
pub fn matern52(l: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |x, y| {
        let r = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / l;
        let a = 5f64.sqrt() * r;
        (1.0 + a + a * a / 3.0) * (-a).exp()
    }
}

/// LU decomposition with partial pivoting; returns `(lu, perm, sign)`.
pub fn lu(mut a: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if p != k {
            a.swap(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            a[i][k] = f;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    (a, perm, sign)
}

pub fn lu_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let (lu, perm, _) = lu(a.to_vec());
    let n = b.len();
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            y[i] -= lu[i][j] * y[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            y[i] -= lu[i][j] * y[j];
        }
        y[i] /= lu[i][i];
    }
    y
}

/// `ln |det a|`.
pub fn log_abs_det(a: &[Vec<f64>]) -> f64 {
    let (lu, _, _) = lu(a.to_vec());
    (0..a.len()).map(|i| lu[i][i].abs().ln()).sum()
}

/// Posterior mean, variance and `½ ln det(I + λ⁻¹K)` from the expanded
/// `t × t` system over raw observations `(x_s, y_s)`.
pub struct Expanded {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub lambda: f64,
}

impl Expanded {
    pub fn mean_var(&self, k: &dyn Fn(&[f64], &[f64]) -> f64, q: &[f64]) -> (f64, f64) {
        let t = self.xs.len();
        if t == 0 {
            return (0.0, k(q, q));
        }
        let a: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                (0..t)
                    .map(|j| k(&self.xs[i], &self.xs[j]) + if i == j { self.lambda } else { 0.0 })
                    .collect()
            })
            .collect();
        let kq: Vec<f64> = self.xs.iter().map(|x| k(x, q)).collect();
        let alpha = lu_solve(&a, &self.ys);
        let mean = kq.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let v = lu_solve(&a, &kq);
        let var = k(q, q) - kq.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        (mean, var)
    }

    pub fn info_gain(&self, k: &dyn Fn(&[f64], &[f64]) -> f64) -> f64 {
        let t = self.xs.len();
        let m: Vec<Vec<f64>> = (0..t)
            .map(|i| {
                (0..t)
                    .map(|j| k(&self.xs[i], &self.xs[j]) / self.lambda + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        0.5 * log_abs_det(&m)
    }
}

/// A random instance: a few distinct points in `[0,1]^dim`, and up to
/// `max_obs` raw observations drawn from them with forced repeats.
pub struct Instance {
    pub distinct: Vec<Vec<f64>>,
    pub raw: Expanded,
    pub queries: Vec<Vec<f64>>,
    pub lengthscale: f64,
}

pub fn random_instance(seed: u64, max_obs: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=3);
    let n_distinct = rng.random_range(1..=6);
    let distinct: Vec<Vec<f64>> = (0..n_distinct)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let n_obs = rng.random_range(n_distinct + 1..=max_obs.max(n_distinct + 1));
    let mut xs = Vec::with_capacity(n_obs);
    // every distinct point at least once, then repeats
    for p in &distinct {
        xs.push(p.clone());
    }
    while xs.len() < n_obs {
        xs.push(distinct[rng.random_range(0..n_distinct)].clone());
    }
    let ys = (0..n_obs).map(|_| rng.random_range(-2.0..2.0)).collect();
    let queries = (0..3)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .chain(std::iter::once(distinct[0].clone()))
        .collect();
    Instance {
        distinct,
        raw: Expanded {
            xs,
            ys,
            lambda: rng.random_range(0.05..2.0),
        },
        queries,
        lengthscale: rng.random_range(0.2..1.0),
    }
}
