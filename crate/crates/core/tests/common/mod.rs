#![allow(dead_code)]

pub mod sdpa;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stabsyn::coprime;
use stabsyn::rng;
use stabsyn::{Matrix, StateSpace};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random `n×n` matrix rescaled to the given spectral radius.
pub fn with_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Matrix {
    loop {
        let a = gaussian(rng, n, n);
        let r = stabsyn::statespace::spectral_radius(&a).unwrap();
        if r > 1e-3 {
            return a * (radius / r);
        }
    }
}

/// Strictly proper plant with spectral radius in `[0.5, 1.5]` whose `(A, B)`
/// is controllable and `(A, C)` observable.
pub fn random_plant(seed: u64, n: usize, m: usize, p: usize) -> StateSpace {
    let mut rng = rng::stream(seed, 500);
    loop {
        let radius = rng.random_range(0.5..1.5);
        let a = with_radius(&mut rng, n, radius);
        let b = gaussian(&mut rng, n, m);
        let c = gaussian(&mut rng, p, n);
        if coprime::controllability_rank(&a, &b) == n
            && coprime::controllability_rank(&a.transpose(), &c.transpose()) == n
        {
            return StateSpace::new(a, b, c, Matrix::zeros(p, m)).unwrap();
        }
    }
}

/// Stable system (spectral radius in `[0.2, 0.9]`) with a random feedthrough.
pub fn random_stable(seed: u64, n: usize, m: usize, p: usize) -> StateSpace {
    let mut rng = rng::stream(seed, 501);
    let radius = rng.random_range(0.2..0.9);
    let a = with_radius(&mut rng, n, radius);
    let b = gaussian(&mut rng, n, m);
    let c = gaussian(&mut rng, p, n);
    let d = gaussian(&mut rng, p, m) * 0.5;
    StateSpace::new(a, b, c, d).unwrap()
}

/// Plant dimensions drawn from `seed`: `n ∈ [1, max_n]`, `m, p ∈ [1, max_io]`.
pub fn dims(seed: u64, max_n: usize, max_io: usize) -> (usize, usize, usize) {
    let mut rng = rng::stream(seed, 502);
    (
        rng.random_range(1..=max_n),
        rng.random_range(1..=max_io),
        rng.random_range(1..=max_io),
    )
}

/// `true` when every entry outside the diagonal blocks is exactly zero.
pub fn off_blocks_zero(m: &Matrix, row_blocks: &[usize], col_blocks: &[usize]) -> bool {
    let owner = |sizes: &[usize], idx: usize| {
        let mut acc = 0;
        for (k, &s) in sizes.iter().enumerate() {
            acc += s;
            if idx < acc {
                return k;
            }
        }
        usize::MAX
    };
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| owner(row_blocks, i) == owner(col_blocks, j) || m[(i, j)] == 0.0))
}
