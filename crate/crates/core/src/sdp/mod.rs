//! Primal-dual interior-point solver for the problems built in [`crate::lmi`].
//!
//! The problem is handled in the form
//!
//! ```text
//! minimize bᵀx  s.t.  S_j = C_j + Σ_i x_i A_{j,i} ⪰ 0,   s_k = c_k + a_kᵀx ≥ 0
//! ```
//!
//! with dual variables `Y_j ⪰ 0`, `y_k ≥ 0`. Iterates start infeasible,
//! search directions use the HKM scaling with a Mehrotra predictor-corrector
//! step, and every variable is boxed by `|x_i| ≤ M` so both the primal and
//! the dual have interior points.

mod sdpa;

use nalgebra::linalg::Cholesky;
use nalgebra::{Dyn, SymmetricEigen};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::lmi::SdpProblem;

pub use sdpa::export_sdpa;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("Schur complement lost positive definiteness at iteration {iteration}")]
    NumericalBreakdown { iteration: usize },
    #[error("point has {got} entries, problem has {expected} scalars")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, SdpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    MarginalFailure,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub gap_tol: f64,
    /// Strictness margin, relative to the mean diagonal magnitude of each
    /// block's constant term (never below an absolute scale of 1).
    pub margin_floor: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
    pub var_bound: f64,
    /// Relative primal/dual infeasibility accepted at convergence.
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            margin_floor: 1e-6,
            max_iters: 200,
            step_fraction: 0.98,
            var_bound: 1e6,
            feas_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub status: Status,
    /// Relative duality gap of the last solve.
    pub gap: f64,
    /// Smallest eigenvalue over all LMI blocks (and smallest linear slack) at `x`.
    pub margin: f64,
    pub iterations: usize,
    pub objective: f64,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::Feasible)
    }
}

/// Result of the margin program `max t s.t. F_j(x) ⪰ tI`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginResult {
    /// Achieved margin at `x`: a certified lower bound on the optimum.
    pub t_star: f64,
    /// Dual objective: an upper bound on the optimum (valid once converged).
    pub upper_bound: f64,
    pub x: Vec<f64>,
    pub at_bound: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Sparse symmetric coefficient as upper-triangular triplets.
type Triplets = Vec<(usize, usize, f64)>;

struct StdBlock {
    dim: usize,
    c: Matrix,
    /// (scalar, entries, distinct rows touched)
    coeffs: Vec<(usize, Triplets, Vec<usize>)>,
}

struct StdProblem {
    m: usize,
    b: Vec<f64>,
    blocks: Vec<StdBlock>,
    lin: Vec<(Vec<(usize, f64)>, f64)>,
}

fn touched_rows(entries: &Triplets) -> Vec<usize> {
    let mut rows: Vec<usize> = entries.iter().flat_map(|&(i, j, _)| [i, j]).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Per-block strictness floor: `margin_floor` times the mean absolute
/// diagonal entry of the constant term, falling back to the mean absolute
/// entry when the diagonal vanishes and to 1 for a zero constant.
pub fn block_floor(c: &Matrix, margin_floor: f64) -> f64 {
    let n = c.nrows().max(1) as f64;
    let diag = c.diagonal().iter().map(|v| v.abs()).sum::<f64>() / n;
    let all = c.iter().map(|v| v.abs()).sum::<f64>() / (n * n);
    let scale = if diag > 0.0 {
        diag
    } else if all > 0.0 {
        all
    } else {
        1.0
    };
    margin_floor * scale
}

impl StdProblem {
    /// `shift[j]·I` is subtracted from block `j`; `margin_var` appends a
    /// scalar `t` entering every block as `−tI` and every linear row as `−t`.
    fn from_problem(p: &SdpProblem, shift: &[f64], margin_var: bool, bound: f64) -> Self {
        let m0 = p.n_scalars();
        let m = m0 + usize::from(margin_var);
        let mut blocks = Vec::with_capacity(p.lmi_blocks.len());
        for (blk, &sh) in p.lmi_blocks.iter().zip(shift) {
            let mut c = blk.constant.clone();
            for i in 0..blk.dim {
                c[(i, i)] -= sh;
            }
            let mut coeffs: Vec<(usize, Triplets, Vec<usize>)> = blk
                .terms
                .iter()
                .map(|(&k, t)| (k, t.clone(), touched_rows(t)))
                .collect();
            if margin_var {
                let t: Triplets = (0..blk.dim).map(|i| (i, i, -1.0)).collect();
                let rows = (0..blk.dim).collect();
                coeffs.push((m0, t, rows));
            }
            blocks.push(StdBlock { dim: blk.dim, c, coeffs });
        }
        let mut lin: Vec<(Vec<(usize, f64)>, f64)> = p
            .linear_ineqs
            .iter()
            .map(|l| {
                let mut a = l.coeffs.clone();
                if margin_var {
                    a.push((m0, -1.0));
                }
                (a, l.constant)
            })
            .collect();
        for i in 0..m {
            lin.push((vec![(i, 1.0)], bound));
            lin.push((vec![(i, -1.0)], bound));
        }
        let b = if margin_var {
            let mut b = vec![0.0; m];
            b[m0] = -1.0;
            b
        } else {
            p.objective.clone()
        };
        Self { m, b, blocks, lin }
    }

    fn block_value(&self, j: usize, x: &[f64]) -> Matrix {
        let blk = &self.blocks[j];
        let mut s = blk.c.clone();
        for (k, t, _) in &blk.coeffs {
            let xk = x[*k];
            if xk != 0.0 {
                for &(a, c, v) in t {
                    s[(a, c)] += xk * v;
                    if a != c {
                        s[(c, a)] += xk * v;
                    }
                }
            }
        }
        s
    }

    fn lin_value(&self, x: &[f64]) -> Vec<f64> {
        self.lin
            .iter()
            .map(|(a, c)| c + a.iter().map(|&(k, v)| v * x[k]).sum::<f64>())
            .collect()
    }

    /// `A*(Y)`, `A*(y)`: the adjoint map.
    fn adjoint(&self, ys: &[Matrix], yl: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (blk, y) in self.blocks.iter().zip(ys) {
            for (k, t, _) in &blk.coeffs {
                out[*k] += inner_sym(t, y);
            }
        }
        for ((a, _), &y) in self.lin.iter().zip(yl) {
            for &(k, v) in a {
                out[k] += v * y;
            }
        }
        out
    }

    fn map_dx(&self, j: usize, dx: &[f64]) -> Matrix {
        let blk = &self.blocks[j];
        let mut s = Matrix::zeros(blk.dim, blk.dim);
        for (k, t, _) in &blk.coeffs {
            let d = dx[*k];
            if d != 0.0 {
                for &(a, c, v) in t {
                    s[(a, c)] += d * v;
                    if a != c {
                        s[(c, a)] += d * v;
                    }
                }
            }
        }
        s
    }
}

/// `⟨A, W⟩` for a symmetric `A` given by upper triplets and any square `W`.
fn inner_sym(t: &Triplets, w: &Matrix) -> f64 {
    t.iter()
        .map(|&(a, c, v)| if a == c { v * w[(a, a)] } else { v * (w[(a, c)] + w[(c, a)]) })
        .sum()
}

fn sym(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest `α ≤ 1` (scaled by `frac`) keeping `L·Lᵀ + αD` positive definite.
fn max_step_psd(chol_l: &Matrix, d: &Matrix, frac: f64) -> f64 {
    if d.nrows() == 0 {
        return 1.0;
    }
    let tmp = chol_l.solve_lower_triangular(d).expect("nonsingular factor");
    let w = chol_l.solve_lower_triangular(&tmp.transpose()).expect("nonsingular factor");
    let lmin = SymmetricEigen::new(sym(w)).eigenvalues.min();
    if lmin >= 0.0 {
        1.0
    } else {
        (frac * (-1.0 / lmin)).min(1.0)
    }
}

fn max_step_lin(s: &[f64], ds: &[f64], frac: f64) -> f64 {
    let mut a = f64::INFINITY;
    for (&si, &di) in s.iter().zip(ds) {
        if di < 0.0 {
            a = a.min(-si / di);
        }
    }
    (frac * a).min(1.0)
}

struct IpmOutcome {
    x: Vec<f64>,
    converged: bool,
    iterations: usize,
    pobj: f64,
    dobj: f64,
    rel_gap: f64,
}

fn chol_l(s: &Matrix) -> Option<Matrix> {
    Cholesky::<f64, Dyn>::new(s.clone()).map(|c| c.l())
}

const DUAL_TOL_FACTOR: f64 = 1e3;

/// Ends a run whose factorizations failed: later iterates are reported as
/// the last good point, a failure before the first step is an error.
fn stop(last: IpmOutcome, iteration: usize) -> Result<IpmOutcome> {
    if iteration == 0 {
        Err(SdpError::NumericalBreakdown { iteration })
    } else {
        Ok(last)
    }
}

fn ipm(prob: &StdProblem, opts: &SolverOptions) -> Result<IpmOutcome> {
    let m = prob.m;
    let nb = prob.blocks.len();
    let nl = prob.lin.len();
    let total_dim: usize = prob.blocks.iter().map(|b| b.dim).sum::<usize>() + nl;

    // SDPT3-style starting scales
    let bnorm = prob.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut xi = 10.0f64.max((total_dim as f64).sqrt());
    let mut eta = xi;
    for blk in &prob.blocks {
        eta = eta.max(blk.c.norm());
        for (k, t, _) in &blk.coeffs {
            let an = t
                .iter()
                .map(|&(a, c, v)| if a == c { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt();
            eta = eta.max(an);
            xi = xi.max(blk.dim as f64 * (1.0 + prob.b[*k].abs()) / (1.0 + an));
        }
    }
    for (a, c) in &prob.lin {
        eta = eta.max(c.abs()).max(a.iter().map(|v| v.1 * v.1).sum::<f64>().sqrt());
    }
    let mut x = vec![0.0; m];
    let mut ss: Vec<Matrix> = prob.blocks.iter().map(|b| Matrix::identity(b.dim, b.dim) * eta).collect();
    let mut ys: Vec<Matrix> = prob.blocks.iter().map(|b| Matrix::identity(b.dim, b.dim) * xi).collect();
    let lin0 = prob.lin_value(&x);
    let mut sl: Vec<f64> = lin0.iter().map(|&v| v.max(eta)).collect();
    // centred start: every linear pair begins with the same product ξ·η
    let mut yl: Vec<f64> = sl.iter().map(|&s| xi * eta / s).collect();

    let cnorm: Vec<f64> = prob.blocks.iter().map(|b| 1.0 + b.c.norm()).collect();
    let lnorm = 1.0 + prob.lin.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();

    let mut last = IpmOutcome {
        x: x.clone(),
        converged: false,
        iterations: 0,
        pobj: f64::NAN,
        dobj: f64::NAN,
        rel_gap: f64::INFINITY,
    };
    let mut stalled = 0;
    for it in 0..opts.max_iters {
        // residuals
        let rp: Vec<Matrix> = (0..nb).map(|j| prob.block_value(j, &x) - &ss[j]).collect();
        let lv = prob.lin_value(&x);
        let rpl: Vec<f64> = lv.iter().zip(&sl).map(|(v, s)| v - s).collect();
        let aty = prob.adjoint(&ys, &yl);
        let rd: Vec<f64> = prob.b.iter().zip(&aty).map(|(b, a)| b - a).collect();

        let comp: f64 = (0..nb).map(|j| dot(&ss[j], &ys[j])).sum::<f64>()
            + sl.iter().zip(&yl).map(|(s, y)| s * y).sum::<f64>();
        let mu = comp / total_dim.max(1) as f64;
        let pobj: f64 = prob.b.iter().zip(&x).map(|(b, x)| b * x).sum();
        let dobj: f64 = -(0..nb).map(|j| dot(&prob.blocks[j].c, &ys[j])).sum::<f64>()
            - prob.lin.iter().zip(&yl).map(|((_, c), y)| c * y).sum::<f64>();
        let pinf = (0..nb)
            .map(|j| rp[j].norm() / cnorm[j])
            .fold(rpl.iter().map(|v| v * v).sum::<f64>().sqrt() / lnorm, f64::max);
        let dinf = rd.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
        let rel_gap = comp.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        last = IpmOutcome {
            x: x.clone(),
            converged: false,
            iterations: it,
            pobj,
            dobj,
            rel_gap,
        };
        // the dual iterate loses accuracy as it grows ill-conditioned near the
        // optimum, so its residual is held to a looser tolerance than the primal
        if pinf <= opts.feas_tol && dinf <= DUAL_TOL_FACTOR * opts.feas_tol && rel_gap <= opts.gap_tol {
            last.converged = true;
            return Ok(last);
        }
        if !(pobj.is_finite() && dobj.is_finite()) {
            return Ok(last);
        }

        // factor S and form S⁻¹; iterates that lost definiteness to rounding
        // end the run with the last good point
        let mut s_l = Vec::with_capacity(nb);
        let mut s_inv = Vec::with_capacity(nb);
        let mut y_l = Vec::with_capacity(nb);
        for (s, y) in ss.iter().zip(&ys) {
            let (Some(l), Some(ly)) = (chol_l(s), chol_l(y)) else {
                return stop(last, it);
            };
            let Some(li) = l.clone().try_inverse() else {
                return stop(last, it);
            };
            s_inv.push(li.transpose() * &li);
            s_l.push(l);
            y_l.push(ly);
        }

        // Schur complement M_ij = Tr(A_i S⁻¹ A_j Y) + Σ_k a_ki a_kj y_k/s_k
        let mut mm = Matrix::zeros(m, m);
        for (j, blk) in prob.blocks.iter().enumerate() {
            let y = &ys[j];
            let si = &s_inv[j];
            for (kj, tj, rows) in &blk.coeffs {
                // (A_j Y) restricted to the rows A_j touches
                let mut ay = Matrix::zeros(rows.len(), blk.dim);
                for &(a, c, v) in tj {
                    let ra = rows.binary_search(&a).unwrap();
                    let rc = rows.binary_search(&c).unwrap();
                    for col in 0..blk.dim {
                        ay[(ra, col)] += v * y[(c, col)];
                    }
                    if a != c {
                        for col in 0..blk.dim {
                            ay[(rc, col)] += v * y[(a, col)];
                        }
                    }
                }
                let mut s_cols = Matrix::zeros(blk.dim, rows.len());
                for (r, &row) in rows.iter().enumerate() {
                    s_cols.set_column(r, &si.column(row));
                }
                let g = s_cols * ay;
                for (ki, ti, _) in &blk.coeffs {
                    mm[(*ki, *kj)] += inner_sym(ti, &g);
                }
            }
        }
        for ((a, _), (&s, &y)) in prob.lin.iter().zip(sl.iter().zip(&yl)) {
            let w = y / s;
            for &(p, vp) in a {
                for &(q, vq) in a {
                    mm[(p, q)] += w * vp * vq;
                }
            }
        }
        let mm = sym(mm);
        let chol_m = {
            let mut reg = 0.0;
            let scale = mm.diagonal().max().max(1e-300);
            loop {
                let mut trial = mm.clone();
                for i in 0..m {
                    trial[(i, i)] += reg * scale;
                }
                if let Some(c) = Cholesky::<f64, Dyn>::new(trial) {
                    break Some(c);
                }
                reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
                if reg > 1e-4 {
                    break None;
                }
            }
        };
        let Some(chol_m) = chol_m else {
            return stop(last, it);
        };

        // S⁻¹ Rp Y, reused by both directions
        let srpy: Vec<Matrix> = (0..nb).map(|j| &s_inv[j] * &rp[j] * &ys[j]).collect();

        let direction = |kmat: &[Matrix], kl: &[f64]| {
            // K are the complementarity targets: ΔY = S⁻¹K − Y − S⁻¹ΔS·Y
            let mut rhs: Vec<f64> = prob.b.iter().map(|b| -b).collect();
            let w: Vec<Matrix> = (0..nb).map(|j| &s_inv[j] * &kmat[j] - &srpy[j]).collect();
            for (j, blk) in prob.blocks.iter().enumerate() {
                for (k, t, _) in &blk.coeffs {
                    rhs[*k] += inner_sym(t, &w[j]);
                }
            }
            for (idx, (a, _)) in prob.lin.iter().enumerate() {
                let wl = kl[idx] / sl[idx] - yl[idx] * rpl[idx] / sl[idx];
                for &(k, v) in a {
                    rhs[k] += v * wl;
                }
            }
            // refinement against the unregularized M recovers the accuracy
            // lost to ill-conditioning near the optimum
            let rhs = nalgebra::DVector::from_vec(rhs);
            let mut dx = chol_m.solve(&rhs);
            for _ in 0..2 {
                let r = &rhs - &mm * &dx;
                dx += chol_m.solve(&r);
            }
            let dx: Vec<f64> = dx.iter().copied().collect();
            let ds: Vec<Matrix> = (0..nb).map(|j| &rp[j] + prob.map_dx(j, &dx)).collect();
            let dy: Vec<Matrix> = (0..nb)
                .map(|j| sym(&s_inv[j] * &kmat[j] - &ys[j] - &s_inv[j] * &ds[j] * &ys[j]))
                .collect();
            let dlv = prob.lin_value(&dx);
            let dsl: Vec<f64> = (0..nl).map(|k| rpl[k] + dlv[k] - prob.lin[k].1).collect();
            let dyl: Vec<f64> = (0..nl).map(|k| kl[k] / sl[k] - yl[k] - yl[k] * dsl[k] / sl[k]).collect();
            (dx, ds, dy, dsl, dyl)
        };
        let steps = |ds: &[Matrix], dy: &[Matrix], dsl: &[f64], dyl: &[f64], frac: f64| {
            let mut ap = max_step_lin(&sl, dsl, frac);
            let mut ad = max_step_lin(&yl, dyl, frac);
            for j in 0..nb {
                ap = ap.min(max_step_psd(&s_l[j], &ds[j], frac));
                ad = ad.min(max_step_psd(&y_l[j], &dy[j], frac));
            }
            (ap, ad)
        };

        // predictor
        let zero_k: Vec<Matrix> = prob.blocks.iter().map(|b| Matrix::zeros(b.dim, b.dim)).collect();
        let zero_kl = vec![0.0; nl];
        let (_, ds_a, dy_a, dsl_a, dyl_a) = direction(&zero_k, &zero_kl);
        let (ap, ad) = steps(&ds_a, &dy_a, &dsl_a, &dyl_a, 1.0);
        let comp_aff: f64 = (0..nb)
            .map(|j| dot(&(&ss[j] + &ds_a[j] * ap), &(&ys[j] + &dy_a[j] * ad)))
            .sum::<f64>()
            + (0..nl).map(|k| (sl[k] + ap * dsl_a[k]) * (yl[k] + ad * dyl_a[k])).sum::<f64>();
        let sigma = (comp_aff / comp).clamp(0.0, 1.0).powi(3);
        let target = sigma * mu;

        // corrector
        let kmat: Vec<Matrix> = (0..nb)
            .map(|j| Matrix::identity(prob.blocks[j].dim, prob.blocks[j].dim) * target - &ds_a[j] * &dy_a[j])
            .collect();
        let kl: Vec<f64> = (0..nl).map(|k| target - dsl_a[k] * dyl_a[k]).collect();
        let (dx, ds, dy, dsl, dyl) = direction(&kmat, &kl);
        let (ap, ad) = steps(&ds, &dy, &dsl, &dyl, opts.step_fraction);

        for i in 0..m {
            x[i] += ap * dx[i];
        }
        for j in 0..nb {
            ss[j] = sym(&ss[j] + &ds[j] * ap);
            ys[j] = sym(&ys[j] + &dy[j] * ad);
        }
        for k in 0..nl {
            sl[k] += ap * dsl[k];
            yl[k] += ad * dyl[k];
        }
        if ap.max(ad) < 1e-10 {
            stalled += 1;
            if stalled >= 3 {
                return Ok(last);
            }
        } else {
            stalled = 0;
        }
    }
    last.x = x;
    last.iterations = opts.max_iters;
    Ok(last)
}

fn floors(problem: &SdpProblem, opts: &SolverOptions) -> Vec<f64> {
    problem
        .lmi_blocks
        .iter()
        .map(|b| block_floor(&b.constant, opts.margin_floor))
        .collect()
}

fn lmi_margin(problem: &SdpProblem, x: &[f64]) -> f64 {
    problem
        .lmi_blocks
        .iter()
        .map(|blk| crate::linalg::min_symmetric_eigenvalue(&blk.evaluate(x)))
        .fold(f64::INFINITY, f64::min)
}

/// Margin including the linear inequalities, as maximized by the margin program.
fn achieved_margin(problem: &SdpProblem, x: &[f64]) -> f64 {
    problem
        .linear_ineqs
        .iter()
        .map(|l| l.evaluate(x))
        .fold(lmi_margin(problem, x), f64::min)
}

/// Maximizes `t` subject to `F_j(x) ⪰ tI` for every block, `ℓ_k(x) ≥ t`
/// for every linear inequality and `|x_i| ≤ M`.
pub fn feasibility_margin(problem: &SdpProblem, opts: &SolverOptions) -> Result<MarginResult> {
    let m0 = problem.n_scalars();
    if m0 == 0 {
        let t = achieved_margin(problem, &[]);
        return Ok(MarginResult {
            t_star: t,
            upper_bound: t,
            x: vec![],
            at_bound: false,
            converged: true,
            iterations: 0,
        });
    }
    let shift = vec![0.0; problem.lmi_blocks.len()];
    let std = StdProblem::from_problem(problem, &shift, true, opts.var_bound);
    let out = ipm(&std, opts)?;
    let x: Vec<f64> = out.x[..m0].to_vec();
    let t_star = achieved_margin(problem, &x);
    let at_bound = x.iter().any(|v| v.abs() >= opts.var_bound * (1.0 - 1e-6));
    Ok(MarginResult {
        t_star,
        upper_bound: -out.dobj,
        x,
        at_bound,
        converged: out.converged,
        iterations: out.iterations,
    })
}

fn classify_margin(problem: &SdpProblem, opts: &SolverOptions, r: MarginResult, iterations: usize) -> SdpSolution {
    let floor = floors(problem, opts).into_iter().fold(0.0, f64::max);
    let status = if r.t_star > floor.max(f64::MIN_POSITIVE) && !r.at_bound {
        Status::Feasible
    } else if r.converged && r.upper_bound <= floor {
        Status::Infeasible
    } else if r.t_star > 0.0 || r.at_bound {
        Status::MarginalFailure
    } else if r.converged {
        Status::Infeasible
    } else {
        Status::IterationLimit
    };
    let objective = problem.objective.iter().zip(&r.x).map(|(c, x)| c * x).sum();
    SdpSolution {
        margin: r.t_star,
        x: r.x,
        status,
        gap: (r.upper_bound - r.t_star).abs() / (1.0 + r.t_star.abs()),
        iterations: iterations + r.iterations,
        objective,
    }
}

/// Minimizes the problem's objective with every block held at least at its
/// strictness floor. Pure feasibility problems (zero objective) go through
/// [`feasibility_margin`] directly.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if problem.objective.iter().all(|&c| c == 0.0) {
        let r = feasibility_margin(problem, opts)?;
        return Ok(classify_margin(problem, opts, r, 0));
    }
    let fl = floors(problem, opts);
    let std = StdProblem::from_problem(problem, &fl, false, opts.var_bound);
    let out = ipm(&std, opts)?;
    let margin = lmi_margin(problem, &out.x);
    let at_bound = out.x.iter().any(|v| v.abs() >= opts.var_bound * (1.0 - 1e-6));
    if out.converged && margin > 0.0 && !at_bound {
        return Ok(SdpSolution {
            objective: out.pobj,
            x: out.x,
            status: Status::Optimal,
            gap: out.rel_gap,
            margin,
            iterations: out.iterations,
        });
    }
    // the objective could not be optimized; report the best strictly
    // feasible point instead, as Feasible rather than Optimal
    let r = feasibility_margin(problem, opts)?;
    let mut sol = classify_margin(problem, opts, r, out.iterations);
    if sol.status == Status::Feasible && at_bound {
        sol.status = Status::MarginalFailure;
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub block_min_eigenvalues: Vec<f64>,
    pub min_linear_residual: f64,
    pub passes: bool,
}

/// Recomputes every block's smallest eigenvalue and every linear residual
/// at `x`. Passes iff all eigenvalues are at least `delta` and all
/// residuals at least `−1e-9`.
pub fn check_solution(problem: &SdpProblem, x: &[f64], delta: f64) -> Result<CheckReport> {
    if x.len() != problem.n_scalars() {
        return Err(SdpError::DimensionMismatch {
            expected: problem.n_scalars(),
            got: x.len(),
        });
    }
    let eig: Vec<f64> = problem
        .lmi_blocks
        .iter()
        .map(|b| crate::linalg::min_symmetric_eigenvalue(&b.evaluate(x)))
        .collect();
    let lin = problem
        .linear_ineqs
        .iter()
        .map(|l| l.evaluate(x))
        .fold(f64::INFINITY, f64::min);
    let passes = eig.iter().all(|&e| e >= delta) && lin >= -1e-9;
    Ok(CheckReport {
        block_min_eigenvalues: eig,
        min_linear_residual: lin,
        passes,
    })
}
