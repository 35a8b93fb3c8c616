//! Reference implementations for tests: plain nested vectors, Gauss-Jordan
//! inversion and the recovery quantities written out literally from their
//! definitions, sharing no code with the library.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unmix::Matrix;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

pub fn to_matrix(a: &Dense) -> Matrix {
    let (r, c) = (a.len(), a[0].len());
    Matrix::from_row_major(r, c, a.iter().flatten().copied().collect()).unwrap()
}

pub fn from_matrix(a: &Matrix) -> Dense {
    (0..a.rows())
        .map(|r| (0..a.cols()).map(|c| a.get(r, c)).collect())
        .collect()
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j]).collect())
        .collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    assert_eq!(a[0].len(), k);
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for t in 0..k {
            let x = a[i][t];
            for j in 0..m {
                out[i][j] += x * b[t][j];
            }
        }
    }
    out
}

pub fn add_scaled(a: &Dense, s: f64, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + s * y).collect())
        .collect()
}

pub fn scale(a: &Dense, s: f64) -> Dense {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

/// Gauss-Jordan with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn columns(a: &Dense, idx: &[usize]) -> Dense {
    a.iter().map(|row| idx.iter().map(|&j| row[j]).collect()).collect()
}

pub fn row_sum_norm(a: &Dense) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// `(Id + AA*/β)⁻¹ A`, or `A` when β is `None`.
pub fn regularized(a: &Dense, beta: Option<f64>) -> Dense {
    match beta {
        None => a.clone(),
        Some(b) => {
            let m = a.len();
            let outer = mul(a, &transpose(a));
            let sys = add_scaled(&identity(m), 1.0 / b, &outer);
            mul(&inverse(&sys), a)
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quantities {
    pub q: f64,
    pub n: f64,
    pub sigma: f64,
    pub s: f64,
}

impl Quantities {
    pub fn cd_bound(&self) -> f64 {
        if self.q < 1.0 {
            self.s + self.n * self.sigma / (1.0 - self.q)
        } else {
            f64::INFINITY
        }
    }

    pub fn theta_min(&self) -> f64 {
        if self.q < 1.0 {
            self.n / (1.0 - self.q)
        } else {
            f64::INFINITY
        }
    }
}

/// The four support norms evaluated through the `m`-dimensional products
/// appearing in their definitions.
pub fn quantities(a: &Dense, beta: Option<f64>, support: &[usize]) -> Quantities {
    let nn = a[0].len();
    let m = a.len();
    let comp: Vec<usize> = (0..nn).filter(|j| !support.contains(j)).collect();
    let ab = regularized(a, beta);
    let a_i = columns(a, support);
    let ab_i = columns(&ab, support);
    let ab_j = columns(&ab, &comp);
    let g_inv = inverse(&mul(&transpose(&ab_i), &a_i));
    let q = row_sum_norm(&mul(&mul(&transpose(&ab_j), &a_i), &g_inv));
    // A_I G⁻¹ A_{β,I}* − Id, an m×m matrix
    let proj = add_scaled(&mul(&mul(&a_i, &g_inv), &transpose(&ab_i)), -1.0, &identity(m));
    let n = row_sum_norm(&mul(&mul(&transpose(&ab_j), &proj), a));
    let sigma = row_sum_norm(&g_inv);
    let s = row_sum_norm(&mul(&mul(&g_inv, &transpose(&ab_i)), a));
    Quantities { q, n, sigma, s }
}

/// All size-`k` subsets of `0..n` in lexicographic order, by recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
