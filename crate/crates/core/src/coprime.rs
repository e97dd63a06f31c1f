//! Stabilizing gains by pole placement and the state-space doubly-coprime
//! factorization built from them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{self, eigenvalues, numerical_rank, solve_sylvester, LinalgError, Matrix};
use crate::rng;
use crate::statespace::{is_schur_stable, StateSpace, SystemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoprimeError {
    #[error("pair (A, B) is not controllable (rank {rank} < {n})")]
    Uncontrollable { rank: usize, n: usize },
    #[error("pole placement failed after {attempts} attempts (pole error {error:e})")]
    PlacementFailed { attempts: usize, error: f64 },
    #[error("invalid pole set: {0}")]
    InvalidPoles(String),
    #[error("gain does not stabilize: spectral radius of {which} is {radius}")]
    GainNotStabilizing { which: &'static str, radius: f64 },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CoprimeError>;

const MAX_PLACEMENT_ATTEMPTS: usize = 10;
const DUPLICATE_JITTER: f64 = 1e-4;
const POLE_TOLERANCE: f64 = 1e-6;

/// Rank of the controllability matrix `[B, AB, …, Aⁿ⁻¹B]`, with each block
/// column normalized before the singular-value test (threshold `1e-8·σ_max`).
pub fn controllability_rank(a: &Matrix, b: &Matrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    if n == 0 {
        return 0;
    }
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        let norm = block.norm();
        let scaled = if norm > 0.0 { &block / norm } else { block.clone() };
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&scaled);
        block = a * &block;
    }
    numerical_rank(&ctrb, 1e-8)
}

/// `n` real poles drawn uniformly from `[−0.5, 0.5]`.
pub fn random_poles(n: usize, seed: u64, stream: u64) -> Vec<Complex64> {
    let mut r = rng::stream(seed, stream);
    (0..n)
        .map(|_| Complex64::new(r.random_range(-0.5..=0.5), 0.0))
        .collect()
}

fn check_conjugate_closed(poles: &[Complex64]) -> Result<()> {
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] || poles[i].im.abs() <= 1e-12 {
            continue;
        }
        let partner = (0..poles.len()).find(|&j| {
            j != i && !used[j] && (poles[j] - poles[i].conj()).norm() <= 1e-10 * (1.0 + poles[i].norm())
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(CoprimeError::InvalidPoles(format!(
                    "pole {} has no conjugate partner",
                    poles[i]
                )))
            }
        }
    }
    Ok(())
}

/// Separates (near-)coincident poles by `1e-4` steps along the real axis.
fn jitter_duplicates(poles: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(poles.len());
    for &p in poles {
        let mut q = p;
        let mut k = 1.0;
        // conjugate partners keep their imaginary sign, so only same-sign collisions count
        while out
            .iter()
            .any(|o| (o - q).norm() < 0.5 * DUPLICATE_JITTER && o.im.signum() == q.im.signum())
        {
            q = p + Complex64::new(k * DUPLICATE_JITTER, 0.0);
            k += 1.0;
        }
        out.push(q);
    }
    out
}

/// Real block-diagonal matrix with the given (conjugate-closed) spectrum.
fn real_carrier(poles: &[Complex64]) -> Matrix {
    let n = poles.len();
    let mut lam = Matrix::zeros(n, n);
    let mut i = 0;
    let mut idx = 0;
    let mut skip = vec![false; n];
    while idx < n {
        if skip[idx] {
            idx += 1;
            continue;
        }
        let p = poles[idx];
        if p.im.abs() <= 1e-12 {
            lam[(i, i)] = p.re;
            i += 1;
        } else {
            let partner = (idx + 1..n)
                .find(|&j| !skip[j] && (poles[j] - p.conj()).norm() <= 1e-10 * (1.0 + p.norm()))
                .expect("conjugate closure checked");
            skip[partner] = true;
            let (a, b) = (p.re, p.im.abs());
            lam[(i, i)] = a;
            lam[(i, i + 1)] = b;
            lam[(i + 1, i)] = -b;
            lam[(i + 1, i + 1)] = a;
            i += 2;
        }
        idx += 1;
    }
    lam
}

/// Largest distance between requested poles and achieved eigenvalues after
/// greedy nearest-neighbour pairing, relative to `max(1, |pole|)`.
pub fn pole_mismatch(achieved: &[Complex64], requested: &[Complex64]) -> f64 {
    let mut free: Vec<Complex64> = achieved.to_vec();
    let mut worst = 0.0f64;
    for &p in requested {
        let Some((k, d)) = free
            .iter()
            .enumerate()
            .map(|(k, e)| (k, (e - p).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            return f64::INFINITY;
        };
        free.swap_remove(k);
        worst = worst.max(d / p.norm().max(1.0));
    }
    worst
}

fn characteristic_poly(poles: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * p;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

fn ackermann(a: &Matrix, b: &Matrix, poles: &[Complex64]) -> Result<Matrix> {
    let n = a.nrows();
    let mut ctrb = Matrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        ctrb.set_column(k, &col.column(0));
        col = a * &col;
    }
    // φ(A) by Horner in descending powers
    let coeffs = characteristic_poly(poles);
    let mut phi = Matrix::zeros(n, n);
    for &c in &coeffs {
        phi = a * &phi + Matrix::identity(n, n) * c;
    }
    let mut e_n = Matrix::zeros(n, 1);
    e_n[(n - 1, 0)] = 1.0;
    let w = linalg::solve_linear(&ctrb.transpose(), &e_n)?;
    Ok(-(w.transpose() * phi))
}

fn sylvester_placement(a: &Matrix, b: &Matrix, poles: &[Complex64], seed: u64) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.ncols());
    let target = jitter_duplicates(poles);
    let lam = real_carrier(&target);
    let mut last_error = f64::INFINITY;
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut r = rng::stream(seed, 1000 + attempt as u64);
        let g_hat = DMatrix::<f64>::from_fn(m, n, |_, _| r.sample(StandardNormal));
        let x = match solve_sylvester(a, &lam, &(-(b * &g_hat))) {
            Ok(x) => x,
            Err(LinalgError::SpectraOverlap { .. }) => {
                return Err(CoprimeError::InvalidPoles(
                    "requested poles coincide with open-loop eigenvalues".into(),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        if linalg::condition_number(&x) > 1e10 {
            continue;
        }
        let Ok(x_inv) = linalg::inverse(&x) else { continue };
        let f = g_hat * x_inv;
        last_error = pole_mismatch(&eigenvalues(&(a + b * &f))?, &target);
        if last_error <= POLE_TOLERANCE {
            return Ok(f);
        }
    }
    Err(CoprimeError::PlacementFailed {
        attempts: MAX_PLACEMENT_ATTEMPTS,
        error: last_error,
    })
}

/// State-feedback gain `F` with `eig(A + BF)` equal to `poles`.
///
/// Single-input pairs use Ackermann's formula; multi-input pairs (and
/// single-input pairs where Ackermann loses accuracy) solve
/// `AX − XΛ = −BĜ` for a seeded random `Ĝ` and set `F = ĜX⁻¹`.
pub fn place_poles(a: &Matrix, b: &Matrix, poles: &[Complex64], seed: u64) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(SystemError::DimensionMismatch(format!(
            "place_poles: A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        ))
        .into());
    }
    if poles.len() != n {
        return Err(CoprimeError::InvalidPoles(format!(
            "{} poles requested for a state dimension of {n}",
            poles.len()
        )));
    }
    check_conjugate_closed(poles)?;
    if n == 0 {
        return Ok(Matrix::zeros(b.ncols(), 0));
    }
    let rank = controllability_rank(a, b);
    if rank < n {
        return Err(CoprimeError::Uncontrollable { rank, n });
    }
    if b.ncols() == 1 {
        if let Ok(f) = ackermann(a, b, poles) {
            if pole_mismatch(&eigenvalues(&(a + b * &f))?, poles) <= POLE_TOLERANCE {
                return Ok(f);
            }
        }
    }
    sylvester_placement(a, b, poles, seed)
}

/// Observer gain `L` with `eig(A + LC)` equal to `poles`, by duality.
pub fn place_observer_poles(a: &Matrix, c: &Matrix, poles: &[Complex64], seed: u64) -> Result<Matrix> {
    match place_poles(&a.transpose(), &c.transpose(), poles, seed) {
        Ok(l) => Ok(l.transpose()),
        Err(CoprimeError::Uncontrollable { rank, n }) => Err(CoprimeError::Uncontrollable { rank, n }),
        Err(e) => Err(e),
    }
}

/// The eight stable factors of a doubly-coprime factorization, the gains
/// that produced them, and the joint realization of `[M_l, N_l]`.
#[derive(Debug, Clone)]
pub struct DoublyCoprime {
    pub m_l: StateSpace,
    pub n_l: StateSpace,
    pub m_r: StateSpace,
    pub n_r: StateSpace,
    pub u_l: StateSpace,
    pub v_l: StateSpace,
    pub u_r: StateSpace,
    pub v_r: StateSpace,
    pub f: Matrix,
    pub l: Matrix,
    /// `(A + LC, [L, B + LD], C, [I, D])`.
    pub joint_left: StateSpace,
}

impl DoublyCoprime {
    /// Input split of `joint_left`: the first `p` columns drive `M_l`.
    pub fn outputs(&self) -> usize {
        self.m_l.outputs()
    }

    pub fn inputs(&self) -> usize {
        self.n_l.inputs()
    }

    /// Realization pieces `(A, B_M, B_N, C, D_M, D_N)` of the joint left factor.
    pub fn left_data(&self) -> (Matrix, Matrix, Matrix, Matrix, Matrix, Matrix) {
        let p = self.outputs();
        let m = self.inputs();
        let j = &self.joint_left;
        let n = j.states();
        (
            j.a().clone(),
            j.b().view((0, 0), (n, p)).into_owned(),
            j.b().view((0, p), (n, m)).into_owned(),
            j.c().clone(),
            j.d().view((0, 0), (p, p)).into_owned(),
            j.d().view((0, p), (p, m)).into_owned(),
        )
    }
}

/// Builds the factorization from stabilizing gains `F` (for `A + BF`) and
/// `L` (for `A + LC`).
pub fn doubly_coprime(plant: &StateSpace, f: &Matrix, l: &Matrix) -> Result<DoublyCoprime> {
    let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
    if f.shape() != (m, n) || l.shape() != (n, p) {
        return Err(SystemError::DimensionMismatch(format!(
            "gains F {}x{} and L {}x{} for a plant with n={n}, m={m}, p={p}",
            f.nrows(),
            f.ncols(),
            l.nrows(),
            l.ncols()
        ))
        .into());
    }
    let (a, b, c, d) = (plant.a(), plant.b(), plant.c(), plant.d());
    let af = a + b * f;
    let al = a + l * c;
    for (which, m_) in [("A + BF", &af), ("A + LC", &al)] {
        if !is_schur_stable(m_)? {
            return Err(CoprimeError::GainNotStabilizing {
                which,
                radius: crate::statespace::spectral_radius(m_)?,
            });
        }
    }
    let cf = c + d * f;
    let bl = b + l * d;
    let im = Matrix::identity(m, m);
    let ip = Matrix::identity(p, p);

    let m_r = StateSpace::new(af.clone(), b.clone(), f.clone(), im.clone())?;
    let n_r = StateSpace::new(af.clone(), b.clone(), cf.clone(), d.clone())?;
    let v_r = StateSpace::new(af.clone(), -l, f.clone(), Matrix::zeros(m, p))?;
    let u_r = StateSpace::new(af, -l, cf, ip.clone())?;

    let u_l = StateSpace::new(al.clone(), -&bl, f.clone(), im)?;
    let v_l = StateSpace::new(al.clone(), -l, f.clone(), Matrix::zeros(m, p))?;
    let n_l = StateSpace::new(al.clone(), bl.clone(), c.clone(), d.clone())?;
    let m_l = StateSpace::new(al.clone(), l.clone(), c.clone(), ip.clone())?;

    let mut jb = Matrix::zeros(n, p + m);
    jb.view_mut((0, 0), (n, p)).copy_from(l);
    jb.view_mut((0, p), (n, m)).copy_from(&bl);
    let mut jd = Matrix::zeros(p, p + m);
    jd.view_mut((0, 0), (p, p)).copy_from(&ip);
    jd.view_mut((0, p), (p, m)).copy_from(d);
    let joint_left = StateSpace::new(al, jb, c.clone(), jd)?;

    Ok(DoublyCoprime {
        m_l,
        n_l,
        m_r,
        n_r,
        u_l,
        v_l,
        u_r,
        v_r,
        f: f.clone(),
        l: l.clone(),
        joint_left,
    })
}

/// Places `A + BF` and `A + LC` at seeded random poles in `[−0.5, 0.5]` and
/// factors the plant.
pub fn factor_with_random_poles(plant: &StateSpace, seed: u64) -> Result<DoublyCoprime> {
    let n = plant.states();
    let f = place_poles(plant.a(), plant.b(), &random_poles(n, seed, 1), seed ^ 0x5eed_f00d)?;
    let l = place_observer_poles(plant.a(), plant.c(), &random_poles(n, seed, 2), seed ^ 0x0b5e_77e5)?;
    doubly_coprime(plant, &f, &l)
}

fn block2(tl: &crate::CMatrix, tr: &crate::CMatrix, bl: &crate::CMatrix, br: &crate::CMatrix) -> crate::CMatrix {
    let (r1, c1) = tl.shape();
    let (r2, c2) = br.shape();
    let mut out = crate::CMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(tl);
    out.view_mut((0, c1), (r1, c2)).copy_from(tr);
    out.view_mut((r1, 0), (r2, c1)).copy_from(bl);
    out.view_mut((r1, c1), (r2, c2)).copy_from(br);
    out
}

fn bezout_residual_at(dc: &DoublyCoprime, z: Complex64) -> std::result::Result<f64, SystemError> {
    let ul = dc.u_l.evaluate(z)?;
    let vl = dc.v_l.evaluate(z)?;
    let nl = dc.n_l.evaluate(z)?;
    let ml = dc.m_l.evaluate(z)?;
    let mr = dc.m_r.evaluate(z)?;
    let vr = dc.v_r.evaluate(z)?;
    let nr = dc.n_r.evaluate(z)?;
    let ur = dc.u_r.evaluate(z)?;
    let left = block2(&ul, &(-&vl), &(-&nl), &ml);
    let right = block2(&mr, &vr, &nr, &ur);
    let k = left.nrows();
    let bezout = linalg::spectral_norm_complex(&(left * right - crate::CMatrix::identity(k, k)));
    let mr_inv = linalg::solve_linear_complex(&mr, &crate::CMatrix::identity(mr.nrows(), mr.nrows()))
        .map_err(|_| SystemError::NearPole { z })?;
    let ml_inv_nl = linalg::solve_linear_complex(&ml, &nl).map_err(|_| SystemError::NearPole { z })?;
    let consistency = linalg::spectral_norm_complex(&(nr * mr_inv - ml_inv_nl));
    Ok(bezout.max(consistency))
}

/// Worst Bezout-identity residual over `n_samples` points of the unit
/// circle, together with the mismatch between `N_r M_r⁻¹` and `M_l⁻¹ N_l`.
pub fn verify_bezout(dc: &DoublyCoprime, n_samples: usize) -> Result<f64> {
    let n_samples = n_samples.max(1);
    let step = std::f64::consts::TAU / n_samples as f64;
    let mut worst = 0.0f64;
    for k in 0..n_samples {
        let mut theta = k as f64 * step;
        let mut value = None;
        for _ in 0..8 {
            match bezout_residual_at(dc, Complex64::from_polar(1.0, theta)) {
                Ok(v) => {
                    value = Some(v);
                    break;
                }
                Err(SystemError::NearPole { .. }) => theta += 1e-3 * step,
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(v) = value {
            worst = worst.max(v);
        }
    }
    Ok(worst)
}
