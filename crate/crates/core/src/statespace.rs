//! Discrete-time state-space realizations and their algebra.
//!
//! Interconnections never minimize: cascade and concatenation keep every
//! mode of both factors, including uncontrollable or unobservable ones.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, block_diag, condition_number, eigenvalues, spectral_norm_complex, LinalgError, Lu,
    Matrix, CMatrix,
};

/// Schur stability requires every eigenvalue modulus below `1 − STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("feedthrough matrix is singular or ill-conditioned (condition {condition:e})")]
    FeedthroughSingular { condition: f64 },
    #[error("evaluation point {z} is too close to a pole")]
    NearPole { z: Complex64 },
    #[error("plant is not strictly proper (D ≠ 0)")]
    NotStrictlyProper,
    #[error("system is not Schur stable (spectral radius {radius})")]
    Unstable { radius: f64 },
    #[error("realization contains non-finite entries")]
    NonFinite,
    #[error("invalid realization document: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SystemError>;

/// A discrete-time realization `x⁺ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SystemError::DimensionMismatch(format!(
                "A is {}x{}, expected square",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(SystemError::DimensionMismatch(format!(
                "A {n}x{n}, B {}x{}, C {}x{}, D {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        let all_finite = [&a, &b, &c, &d]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(SystemError::NonFinite);
        }
        Ok(Self { a, b, c, d })
    }

    /// A memoryless gain `y = Du`.
    pub fn static_gain(d: Matrix) -> Self {
        let (p, m) = d.shape();
        Self {
            a: Matrix::zeros(0, 0),
            b: Matrix::zeros(0, m),
            c: Matrix::zeros(p, 0),
            d,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::static_gain(Matrix::identity(k, k))
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(Matrix::zeros(outputs, inputs))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (Matrix, Matrix, Matrix, Matrix) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }

    /// `C(zI − A)⁻¹B + D`.
    pub fn evaluate(&self, z: Complex64) -> Result<CMatrix> {
        let d = linalg::to_complex(&self.d);
        let n = self.states();
        if n == 0 {
            return Ok(d);
        }
        let mut resolvent = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            resolvent[(i, i)] += z;
        }
        let lu = match Lu::new(&resolvent, 1e-14) {
            Ok(lu) => lu,
            Err(LinalgError::SingularMatrix { .. }) => return Err(SystemError::NearPole { z }),
            Err(e) => return Err(e.into()),
        };
        let x = lu.solve(&linalg::to_complex(&self.b))?;
        Ok(linalg::to_complex(&self.c) * x + d)
    }

    /// Series connection `self · other` (the signal passes through `other` first).
    pub fn cascade(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.inputs() != other.outputs() {
            return Err(SystemError::DimensionMismatch(format!(
                "cascade: left system takes {} inputs, right system produces {} outputs",
                self.inputs(),
                other.outputs()
            )));
        }
        let (n1, n2) = (self.states(), other.states());
        let mut a = Matrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((0, n1), (n1, n2)).copy_from(&(&self.b * &other.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = Matrix::zeros(n1 + n2, other.inputs());
        b.view_mut((0, 0), (n1, other.inputs())).copy_from(&(&self.b * &other.d));
        b.view_mut((n1, 0), (n2, other.inputs())).copy_from(&other.b);
        let mut c = Matrix::zeros(self.outputs(), n1 + n2);
        c.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.outputs(), n2)).copy_from(&(&self.d * &other.c));
        let d = &self.d * &other.d;
        StateSpace::new(a, b, c, d)
    }

    /// Realization of the inverse system; requires a well-conditioned square `D`.
    pub fn inverse(&self) -> Result<StateSpace> {
        if self.d.nrows() != self.d.ncols() {
            return Err(SystemError::DimensionMismatch(format!(
                "inverse of non-square system ({}x{})",
                self.d.nrows(),
                self.d.ncols()
            )));
        }
        let condition = condition_number(&self.d);
        if !(condition < 1e12) {
            return Err(SystemError::FeedthroughSingular { condition });
        }
        let d_inv = linalg::inverse(&self.d)
            .map_err(|_| SystemError::FeedthroughSingular { condition })?;
        let bd = &self.b * &d_inv;
        StateSpace::new(&self.a - &bd * &self.c, -bd, &d_inv * &self.c, d_inv)
    }

    /// `(TAT⁻¹, TB, CT⁻¹, D)`.
    pub fn similarity(&self, t: &Matrix) -> Result<StateSpace> {
        let n = self.states();
        if t.nrows() != n || t.ncols() != n {
            return Err(SystemError::DimensionMismatch(format!(
                "similarity transform is {}x{}, state dimension is {n}",
                t.nrows(),
                t.ncols()
            )));
        }
        let t_inv = linalg::inverse(t)?;
        StateSpace::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv, self.d.clone())
    }

    /// Stacks outputs: `[self; other]`, shared input.
    pub fn concat_rows(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.inputs() != other.inputs() {
            return Err(SystemError::DimensionMismatch(format!(
                "row concatenation needs equal input counts ({} vs {})",
                self.inputs(),
                other.inputs()
            )));
        }
        let a = block_diag(&[&self.a, &other.a]);
        let mut b = Matrix::zeros(a.nrows(), self.inputs());
        b.view_mut((0, 0), self.b.shape()).copy_from(&self.b);
        b.view_mut((self.states(), 0), other.b.shape()).copy_from(&other.b);
        let c = block_diag(&[&self.c, &other.c]);
        let mut d = Matrix::zeros(self.outputs() + other.outputs(), self.inputs());
        d.view_mut((0, 0), self.d.shape()).copy_from(&self.d);
        d.view_mut((self.outputs(), 0), other.d.shape()).copy_from(&other.d);
        StateSpace::new(a, b, c, d)
    }

    /// Juxtaposes inputs: `[self, other]`, shared output.
    pub fn concat_cols(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.outputs() != other.outputs() {
            return Err(SystemError::DimensionMismatch(format!(
                "column concatenation needs equal output counts ({} vs {})",
                self.outputs(),
                other.outputs()
            )));
        }
        let a = block_diag(&[&self.a, &other.a]);
        let b = block_diag(&[&self.b, &other.b]);
        let mut c = Matrix::zeros(self.outputs(), a.nrows());
        c.view_mut((0, 0), self.c.shape()).copy_from(&self.c);
        c.view_mut((0, self.states()), other.c.shape()).copy_from(&other.c);
        let mut d = Matrix::zeros(self.outputs(), self.inputs() + other.inputs());
        d.view_mut((0, 0), self.d.shape()).copy_from(&self.d);
        d.view_mut((0, self.inputs()), other.d.shape()).copy_from(&other.d);
        StateSpace::new(a, b, c, d)
    }

    /// Block-diagonal interconnection `diag(self, other)`.
    pub fn append(&self, other: &StateSpace) -> StateSpace {
        StateSpace {
            a: block_diag(&[&self.a, &other.a]),
            b: block_diag(&[&self.b, &other.b]),
            c: block_diag(&[&self.c, &other.c]),
            d: block_diag(&[&self.d, &other.d]),
        }
    }

    /// Parallel connection `self + other`.
    pub fn add(&self, other: &StateSpace) -> Result<StateSpace> {
        self.parallel(other, 1.0)
    }

    /// Parallel connection `self − other`.
    pub fn sub(&self, other: &StateSpace) -> Result<StateSpace> {
        self.parallel(other, -1.0)
    }

    fn parallel(&self, other: &StateSpace, sign: f64) -> Result<StateSpace> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(SystemError::DimensionMismatch(format!(
                "parallel connection of {}x{} and {}x{} systems",
                self.outputs(),
                self.inputs(),
                other.outputs(),
                other.inputs()
            )));
        }
        let a = block_diag(&[&self.a, &other.a]);
        let mut b = Matrix::zeros(a.nrows(), self.inputs());
        b.view_mut((0, 0), self.b.shape()).copy_from(&self.b);
        b.view_mut((self.states(), 0), other.b.shape()).copy_from(&other.b);
        let mut c = Matrix::zeros(self.outputs(), a.nrows());
        c.view_mut((0, 0), self.c.shape()).copy_from(&self.c);
        c.view_mut((0, self.states()), other.c.shape())
            .copy_from(&(&other.c * sign));
        StateSpace::new(a, b, c, &self.d + &other.d * sign)
    }

    /// Output scaling `α·G`.
    pub fn scale(&self, alpha: f64) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * alpha,
            d: &self.d * alpha,
        }
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    pub fn is_stable(&self) -> Result<bool> {
        is_schur_stable(&self.a)
    }

    pub fn to_json(&self) -> StateSpaceJson {
        StateSpaceJson {
            a: rows_of(&self.a),
            b: rows_of(&self.b),
            c: rows_of(&self.c),
            d: rows_of(&self.d),
        }
    }

    pub fn from_json(doc: &StateSpaceJson) -> Result<Self> {
        doc.to_state_space()
    }
}

/// JSON form of a realization: row-major nested arrays under keys `A`–`D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(SystemError::Parse(format!(
            "{name} row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl StateSpaceJson {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        let n = self.a.len();
        let p = self.d.len();
        let m = self
            .d
            .first()
            .map(Vec::len)
            .or_else(|| self.b.first().map(Vec::len))
            .unwrap_or(0);
        let a = from_rows("A", &self.a, n)?;
        // a static gain may list B and C as plain empty arrays
        let b = match (n, self.b.is_empty()) {
            (0, true) => Matrix::zeros(0, m),
            _ => from_rows("B", &self.b, m)?,
        };
        let c = match (n, self.c.is_empty()) {
            (0, true) => Matrix::zeros(p, 0),
            _ => from_rows("C", &self.c, n)?,
        };
        let d = from_rows("D", &self.d, m)?;
        if b.nrows() != n || c.nrows() != p {
            return Err(SystemError::Parse(format!(
                "B has {} rows (expected {n}), C has {} rows (expected {p})",
                b.nrows(),
                c.nrows()
            )));
        }
        StateSpace::new(a, b, c, d)
    }
}

pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn is_schur_stable(a: &Matrix) -> Result<bool> {
    Ok(spectral_radius(a)? < 1.0 - STABILITY_MARGIN)
}

fn check_feedback_dims(plant: &StateSpace, k: &StateSpace) -> Result<()> {
    if !plant.is_strictly_proper() {
        return Err(SystemError::NotStrictlyProper);
    }
    if k.inputs() != plant.outputs() || k.outputs() != plant.inputs() {
        return Err(SystemError::DimensionMismatch(format!(
            "controller maps {} outputs to {} inputs, plant has {} outputs and {} inputs",
            k.inputs(),
            k.outputs(),
            plant.outputs(),
            plant.inputs()
        )));
    }
    Ok(())
}

/// Closed-loop state matrix `[[A + B D_K C, B C_K], [B_K C, A_K]]` for
/// positive feedback `u = K y`.
pub fn closed_loop_matrix(plant: &StateSpace, k: &StateSpace) -> Result<Matrix> {
    check_feedback_dims(plant, k)?;
    let (n, q) = (plant.states(), k.states());
    let mut acl = Matrix::zeros(n + q, n + q);
    acl.view_mut((0, 0), (n, n))
        .copy_from(&(plant.a() + plant.b() * k.d() * plant.c()));
    acl.view_mut((0, n), (n, q)).copy_from(&(plant.b() * k.c()));
    acl.view_mut((n, 0), (q, n)).copy_from(&(k.b() * plant.c()));
    acl.view_mut((n, n), (q, q)).copy_from(k.a());
    Ok(acl)
}

/// Closed-loop map from `(δ_y, δ_u)` to `(y, u)`, i.e. `[I, −G; −K, I]⁻¹`.
pub fn closed_loop_system(plant: &StateSpace, k: &StateSpace) -> Result<StateSpace> {
    let acl = closed_loop_matrix(plant, k)?;
    let (n, q) = (plant.states(), k.states());
    let (p, m) = (plant.outputs(), plant.inputs());
    let mut b = Matrix::zeros(n + q, p + m);
    b.view_mut((0, 0), (n, p)).copy_from(&(plant.b() * k.d()));
    b.view_mut((0, p), (n, m)).copy_from(plant.b());
    b.view_mut((n, 0), (q, p)).copy_from(k.b());
    let mut c = Matrix::zeros(p + m, n + q);
    c.view_mut((0, 0), (p, n)).copy_from(plant.c());
    c.view_mut((p, 0), (m, n)).copy_from(&(k.d() * plant.c()));
    c.view_mut((p, n), (m, q)).copy_from(k.c());
    let mut d = Matrix::identity(p + m, p + m);
    d.view_mut((p, 0), (m, p)).copy_from(k.d());
    StateSpace::new(acl, b, c, d)
}

/// Exogenous signals entering the loop. Missing samples count as zero.
#[derive(Debug, Clone, Default)]
pub struct Disturbances {
    pub state: Vec<DVector<f64>>,
    pub output: Vec<DVector<f64>>,
    pub input: Vec<DVector<f64>>,
}

impl Disturbances {
    pub fn none() -> Self {
        Self::default()
    }
}

fn sample(seq: &[DVector<f64>], t: usize, dim: usize) -> Result<DVector<f64>> {
    match seq.get(t) {
        Some(v) if v.len() == dim => Ok(v.clone()),
        Some(v) => Err(SystemError::DimensionMismatch(format!(
            "disturbance sample at t = {t} has length {}, expected {dim}",
            v.len()
        ))),
        None => Ok(DVector::zeros(dim)),
    }
}

/// Closed-loop signals at `t = 0, …, horizon` (horizon + 1 samples each).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub horizon: usize,
    pub states: Vec<DVector<f64>>,
    pub controller_states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

/// Iterates the plant/controller interconnection
///
/// ```text
/// x[t+1] = A x[t] + B u[t] + δx[t],   y[t] = C x[t] + δy[t],
/// ξ[t+1] = A_K ξ[t] + B_K y[t],       u[t] = C_K ξ[t] + D_K y[t] + δu[t].
/// ```
pub fn simulate(
    plant: &StateSpace,
    k: &StateSpace,
    x0: &DVector<f64>,
    xi0: &DVector<f64>,
    disturbances: &Disturbances,
    horizon: usize,
) -> Result<Trajectory> {
    check_feedback_dims(plant, k)?;
    if horizon == 0 {
        return Err(SystemError::DimensionMismatch("horizon must be at least 1".into()));
    }
    if x0.len() != plant.states() || xi0.len() != k.states() {
        return Err(SystemError::DimensionMismatch(format!(
            "initial states have lengths {} and {}, expected {} and {}",
            x0.len(),
            xi0.len(),
            plant.states(),
            k.states()
        )));
    }
    let (n, p, m) = (plant.states(), plant.outputs(), plant.inputs());
    let mut traj = Trajectory {
        horizon,
        states: Vec::with_capacity(horizon + 1),
        controller_states: Vec::with_capacity(horizon + 1),
        outputs: Vec::with_capacity(horizon + 1),
        inputs: Vec::with_capacity(horizon + 1),
    };
    let mut x = x0.clone();
    let mut xi = xi0.clone();
    for t in 0..=horizon {
        let y = plant.c() * &x + sample(&disturbances.output, t, p)?;
        let u = k.c() * &xi + k.d() * &y + sample(&disturbances.input, t, m)?;
        let x_next = plant.a() * &x + plant.b() * &u + sample(&disturbances.state, t, n)?;
        let xi_next = k.a() * &xi + k.b() * &y;
        traj.states.push(std::mem::replace(&mut x, x_next));
        traj.controller_states.push(std::mem::replace(&mut xi, xi_next));
        traj.outputs.push(y);
        traj.inputs.push(u);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy)]
pub struct HinfOptions {
    pub grid_size: usize,
    pub refine_tol: f64,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            grid_size: 1024,
            refine_tol: 1e-6,
        }
    }
}

fn gain_at(g: &StateSpace, theta: f64) -> Result<f64> {
    let z = Complex64::from_polar(1.0, theta);
    Ok(spectral_norm_complex(&g.evaluate(z)?))
}

/// Peak of `σ_max(G(e^{iθ}))` over a uniform grid of `[0, π]`, refined by
/// golden-section search around the best grid point. The result never
/// exceeds the true H∞ norm.
pub fn hinf_norm_sampled(g: &StateSpace, opts: HinfOptions) -> Result<f64> {
    let radius = g.spectral_radius()?;
    if radius >= 1.0 - STABILITY_MARGIN {
        return Err(SystemError::Unstable { radius });
    }
    if g.states() == 0 {
        return Ok(linalg::spectral_norm(g.d()));
    }
    let grid = opts.grid_size.max(2);
    let step = std::f64::consts::PI / (grid - 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..grid {
        let v = gain_at(g, k as f64 * step)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let lo = (best.0 as f64 - 1.0).max(0.0) * step;
    let hi = ((best.0 + 1) as f64 * step).min(std::f64::consts::PI);
    let refined = golden_section_max(|th| gain_at(g, th), lo, hi, opts.refine_tol)?;
    Ok(best.1.max(refined))
}

fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = f1.max(f2).max(f(lo)?).max(f(hi)?);
    while hi - lo > tol.max(1e-15) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

/// Numerator and denominator coefficients (descending powers of `z`) of one
/// scalar channel, via the Leverrier–Faddeev expansion of the resolvent.
/// The denominator is the monic characteristic polynomial of `A`; the
/// numerator has the same length (leading zeros for strictly proper channels).
pub fn tf_coefficients(g: &StateSpace, out_idx: usize, in_idx: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if out_idx >= g.outputs() || in_idx >= g.inputs() {
        return Err(SystemError::DimensionMismatch(format!(
            "channel ({out_idx}, {in_idx}) out of range for {}x{} system",
            g.outputs(),
            g.inputs()
        )));
    }
    let n = g.states();
    let d = g.d()[(out_idx, in_idx)];
    let c = g.c().row(out_idx).into_owned();
    let b = g.b().column(in_idx).into_owned();
    let mut den = vec![1.0; n + 1];
    let mut num = vec![0.0; n + 1];
    num[0] = d;
    let mut adj = Matrix::identity(n, n);
    for k in 1..=n {
        if k > 1 {
            adj = g.a() * &adj + Matrix::identity(n, n) * den[k - 1];
        }
        den[k] = -(g.a() * &adj).trace() / k as f64;
        num[k] = (&c * &adj * &b)[(0, 0)] + d * den[k];
    }
    Ok((num, den))
}

/// Evaluates a polynomial given in descending powers.
pub fn polyval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar(a: f64, b: f64, cc: f64, d: f64) -> StateSpace {
        StateSpace::new(mat(&[&[a]]), mat(&[&[b]]), mat(&[&[cc]]), mat(&[&[d]])).unwrap()
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let err = StateSpace::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(3, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        );
        assert!(matches!(err, Err(SystemError::DimensionMismatch(_))));
        let err = StateSpace::new(mat(&[&[f64::NAN]]), mat(&[&[1.0]]), mat(&[&[1.0]]), mat(&[&[0.0]]));
        assert_eq!(err, Err(SystemError::NonFinite));
    }

    #[test]
    fn evaluate_examples() {
        let g = scalar(-1.0, 1.0, 1.0, 0.0);
        assert!((g.evaluate(c(1.0, 0.0)).unwrap()[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        let s = StateSpace::static_gain(mat(&[&[2.0, 3.0]]));
        assert_eq!(s.evaluate(c(0.3, 0.7)).unwrap()[(0, 1)], c(3.0, 0.0));
        assert!(matches!(g.evaluate(c(-1.0, 0.0)), Err(SystemError::NearPole { .. })));
    }

    #[test]
    fn cascade_of_statics_and_dimensions() {
        let g1 = StateSpace::static_gain(mat(&[&[2.0]]));
        let g2 = StateSpace::static_gain(mat(&[&[3.0]]));
        let g = g1.cascade(&g2).unwrap();
        assert_eq!(g.states(), 0);
        assert_eq!(g.d()[(0, 0)], 6.0);

        let a2 = StateSpace::new(Matrix::identity(2, 2) * 0.1, Matrix::zeros(2, 1), Matrix::zeros(1, 2), Matrix::zeros(1, 1)).unwrap();
        let a3 = StateSpace::new(Matrix::identity(3, 3) * 0.2, Matrix::zeros(3, 1), Matrix::zeros(1, 3), Matrix::zeros(1, 1)).unwrap();
        assert_eq!(a2.cascade(&a3).unwrap().states(), 5);
        assert!(matches!(
            a2.cascade(&StateSpace::zero(2, 1)),
            Err(SystemError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cascade_with_inverse_is_identity() {
        let g = StateSpace::new(
            mat(&[&[0.2, 1.0], &[-0.3, 0.1]]),
            mat(&[&[1.0, 0.0], &[0.5, 1.0]]),
            mat(&[&[1.0, -1.0], &[0.0, 2.0]]),
            mat(&[&[2.0, 0.5], &[0.1, 1.0]]),
        )
        .unwrap();
        let h = g.cascade(&g.inverse().unwrap()).unwrap();
        for z in [c(2.0, 0.0), c(1.0, 1.0), c(-3.0, 0.0)] {
            let v = h.evaluate(z).unwrap();
            let err = (v - CMatrix::identity(2, 2)).norm();
            assert!(err < 1e-9, "z = {z}: {err}");
        }
    }

    #[test]
    fn inverse_examples() {
        // (z + 1)/z inverted is z/(z + 1)
        let ml = scalar(0.0, 1.0, 1.0, 1.0);
        let inv = ml.inverse().unwrap();
        assert!((inv.evaluate(c(1.0, 0.0)).unwrap()[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        let s = StateSpace::static_gain(mat(&[&[4.0]])).inverse().unwrap();
        assert_eq!(s.d()[(0, 0)], 0.25);
        assert!(matches!(
            scalar(0.5, 1.0, 1.0, 0.0).inverse(),
            Err(SystemError::FeedthroughSingular { .. })
        ));
    }

    #[test]
    fn similarity_examples() {
        let g = StateSpace::new(
            mat(&[&[0.5, 0.1], &[0.0, -0.3]]),
            mat(&[&[1.0], &[2.0]]),
            mat(&[&[1.0, 1.0]]),
            mat(&[&[0.0]]),
        )
        .unwrap();
        assert_eq!(g.similarity(&Matrix::identity(2, 2)).unwrap(), g);
        let h = g.similarity(&(Matrix::identity(2, 2) * 2.0)).unwrap();
        assert_relative_eq!(h.a(), g.a(), epsilon = 1e-15);
        assert_relative_eq!(h.b(), &(g.b() * 2.0), epsilon = 1e-15);
        assert_relative_eq!(h.c(), &(g.c() * 0.5), epsilon = 1e-15);
        assert!(g.similarity(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn concatenation() {
        let d1 = StateSpace::static_gain(mat(&[&[1.0, 2.0]]));
        let d2 = StateSpace::static_gain(mat(&[&[3.0, 4.0]]));
        let r = d1.concat_rows(&d2).unwrap();
        assert_eq!(r.d(), &mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        let gg = g.concat_rows(&g).unwrap();
        let z = c(0.3, 0.9);
        let v = gg.evaluate(z).unwrap();
        assert_eq!(v.shape(), (2, 1));
        assert!((v[(0, 0)] - v[(1, 0)]).norm() < 1e-15);
        let cc = g.concat_cols(&scalar(-0.2, 2.0, 1.0, 1.0)).unwrap();
        assert_eq!((cc.states(), cc.inputs(), cc.outputs()), (2, 2, 1));
        assert!(d1.concat_rows(&StateSpace::zero(1, 3)).is_err());
    }

    #[test]
    fn stability_examples() {
        assert_relative_eq!(spectral_radius(&mat(&[&[0.5, 0.0], &[0.0, -0.9]])).unwrap(), 0.9, epsilon = 1e-14);
        assert!(is_schur_stable(&mat(&[&[0.5, 0.0], &[0.0, -0.9]])).unwrap());
        let node = mat(&[&[1.0, 1.0], &[-1.0, 2.0]]);
        assert_relative_eq!(spectral_radius(&node).unwrap(), 3f64.sqrt(), epsilon = 1e-12);
        assert!(!is_schur_stable(&node).unwrap());
        assert_eq!(spectral_radius(&Matrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn closed_loop_examples() {
        let plant = scalar(2.0, 1.0, 1.0, 0.0);
        let k = StateSpace::static_gain(mat(&[&[-1.5]]));
        assert_relative_eq!(closed_loop_matrix(&plant, &k).unwrap()[(0, 0)], 0.5);

        let k = StateSpace::new(mat(&[&[0.3]]), mat(&[&[0.0]]), mat(&[&[0.0]]), mat(&[&[0.0]])).unwrap();
        let acl = closed_loop_matrix(&plant, &k).unwrap();
        let mut ev: Vec<f64> = eigenvalues(&acl).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 2.0, epsilon = 1e-14);

        let improper = scalar(2.0, 1.0, 1.0, 1.0);
        assert_eq!(
            closed_loop_matrix(&improper, &StateSpace::zero(1, 1)),
            Err(SystemError::NotStrictlyProper)
        );
    }

    #[test]
    fn simulate_examples() {
        let plant = scalar(0.5, 1.0, 1.0, 0.0);
        let k = StateSpace::zero(1, 1);
        let x0 = DVector::from_element(1, 1.0);
        let tr = simulate(&plant, &k, &x0, &DVector::zeros(0), &Disturbances::none(), 10).unwrap();
        assert_eq!(tr.states.len(), 11);
        for (t, x) in tr.states.iter().enumerate() {
            assert_relative_eq!(x[0], 0.5f64.powi(t as i32), epsilon = 1e-15);
        }
        let tr = simulate(&plant, &k, &DVector::zeros(1), &DVector::zeros(0), &Disturbances::none(), 5).unwrap();
        assert!(tr.outputs.iter().chain(&tr.inputs).all(|v| v.norm() == 0.0));
        assert!(simulate(&plant, &k, &DVector::zeros(2), &DVector::zeros(0), &Disturbances::none(), 5).is_err());
    }

    #[test]
    fn simulate_applies_disturbances() {
        let plant = scalar(0.0, 1.0, 1.0, 0.0);
        let k = StateSpace::static_gain(mat(&[&[2.0]]));
        let dist = Disturbances {
            state: vec![DVector::from_element(1, 1.0)],
            output: vec![DVector::zeros(1), DVector::from_element(1, 0.5)],
            input: vec![DVector::zeros(1), DVector::zeros(1), DVector::from_element(1, -1.0)],
        };
        let tr = simulate(&plant, &k, &DVector::zeros(1), &DVector::zeros(0), &dist, 3).unwrap();
        // x1 = δx0 = 1; y1 = 1 + 0.5; u1 = 3; x2 = u1 = 3; y2 = 3; u2 = 6 − 1
        assert_eq!(tr.states[1][0], 1.0);
        assert_eq!(tr.outputs[1][0], 1.5);
        assert_eq!(tr.inputs[1][0], 3.0);
        assert_eq!(tr.states[2][0], 3.0);
        assert_eq!(tr.inputs[2][0], 5.0);
    }

    #[test]
    fn hinf_sampled_examples() {
        let delta = scalar(0.0, 1.0, 2.0, 0.0);
        assert_relative_eq!(hinf_norm_sampled(&delta, HinfOptions::default()).unwrap(), 2.0, epsilon = 1e-9);
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        assert_relative_eq!(hinf_norm_sampled(&g, HinfOptions::default()).unwrap(), 2.0, epsilon = 1e-9);
        let s = StateSpace::static_gain(mat(&[&[3.0, 0.0], &[0.0, -4.0]]));
        assert_relative_eq!(hinf_norm_sampled(&s, HinfOptions::default()).unwrap(), 4.0, epsilon = 1e-12);
        assert!(matches!(
            hinf_norm_sampled(&scalar(1.5, 1.0, 1.0, 0.0), HinfOptions::default()),
            Err(SystemError::Unstable { .. })
        ));
    }

    #[test]
    fn hinf_sampled_interior_peak() {
        // resonant pair at θ = π/3 with radius 0.95
        let r: f64 = 0.95;
        let th = std::f64::consts::FRAC_PI_3;
        let a = mat(&[&[2.0 * r * th.cos(), -r * r], &[1.0, 0.0]]);
        let g = StateSpace::new(a, mat(&[&[1.0], &[0.0]]), mat(&[&[0.0, 1.0]]), mat(&[&[0.0]])).unwrap();
        let fine = (0..200_001)
            .map(|k| gain_at(&g, std::f64::consts::PI * k as f64 / 200_000.0).unwrap())
            .fold(0.0, f64::max);
        let est = hinf_norm_sampled(&g, HinfOptions::default()).unwrap();
        assert!(est >= fine - 1e-9 * fine);
        assert!((est - fine).abs() < 1e-6 * fine);
    }

    #[test]
    fn tf_coefficient_examples() {
        let (num, den) = tf_coefficients(&scalar(0.0, 1.0, 1.0, 1.0), 0, 0).unwrap();
        assert_eq!(num, vec![1.0, 1.0]);
        assert_eq!(den, vec![1.0, 0.0]);

        let (num, den) = tf_coefficients(&StateSpace::static_gain(mat(&[&[2.5]])), 0, 0).unwrap();
        assert_eq!((num, den), (vec![2.5], vec![1.0]));

        let node = StateSpace::new(
            mat(&[&[1.0, 1.0], &[-1.0, 2.0]]),
            mat(&[&[0.0], &[1.0]]),
            mat(&[&[0.0, 1.0]]),
            mat(&[&[0.0]]),
        )
        .unwrap();
        let (num, den) = tf_coefficients(&node, 0, 0).unwrap();
        assert_relative_eq!(num.as_slice(), [0.0, 1.0, -1.0].as_slice(), epsilon = 1e-14);
        assert_relative_eq!(den.as_slice(), [1.0, -3.0, 3.0].as_slice(), epsilon = 1e-14);
        assert!(tf_coefficients(&node, 1, 0).is_err());
    }

    #[test]
    fn json_roundtrip_and_static() {
        let g = StateSpace::new(
            mat(&[&[0.5, 0.1], &[0.0, -0.3]]),
            mat(&[&[1.0], &[2.0]]),
            mat(&[&[1.0, 1.0]]),
            mat(&[&[0.25]]),
        )
        .unwrap();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let back: StateSpaceJson = serde_json::from_str(&text).unwrap();
        assert_eq!(StateSpace::from_json(&back).unwrap(), g);

        let s = StateSpace::static_gain(mat(&[&[1.0, 2.0]]));
        let back: StateSpaceJson = serde_json::from_str(&serde_json::to_string(&s.to_json()).unwrap()).unwrap();
        assert_eq!(StateSpace::from_json(&back).unwrap(), s);

        let bad: StateSpaceJson =
            serde_json::from_str(r#"{"A":[[1,2]],"B":[[1]],"C":[[1]],"D":[[0]]}"#).unwrap();
        assert!(matches!(StateSpace::from_json(&bad), Err(SystemError::Parse(_))));
    }
}
