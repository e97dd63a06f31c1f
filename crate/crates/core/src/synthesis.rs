//! From plant to certified controller: coprime factors, the stabilization
//! LMI, filter and controller recovery, and closed-loop certificates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coprime::{self, CoprimeError, DoublyCoprime};
use crate::linalg::{self, Matrix};
use crate::lmi::{self, LinearIneq, LmiError, Partition, SdpProblem, Structure};
use crate::sdp::{self, SdpError, SdpSolution, SolverOptions, Status};
use crate::statespace::{self, HinfOptions, StateSpace, SystemError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("plant is not stabilizable: (A, B) has controllability rank {rank} < {n}")]
    Uncontrollable { rank: usize, n: usize },
    #[error("plant is not detectable: (A, C) has observability rank {rank} < {n}")]
    Undetectable { rank: usize, n: usize },
    #[error("stabilization LMI is not strictly feasible (status {status:?}, margin {margin:e})")]
    LmiInfeasible { status: Status, margin: f64 },
    #[error("Z is numerically singular (condition {condition:e})")]
    ZSingular { condition: f64 },
    #[error("recovered filter is unstable (spectral radius {radius})")]
    RecoveredUnstable { radius: f64 },
    #[error("feedthrough D_X is numerically singular (condition {condition:e})")]
    DXSingular { condition: f64 },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error("residual {residual} is not below 1")]
    ResidualNotCertified { residual: f64 },
    #[error(transparent)]
    Coprime(CoprimeError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    System(#[from] SystemError),
}

impl From<CoprimeError> for SynthesisError {
    fn from(e: CoprimeError) -> Self {
        match e {
            CoprimeError::System(s) => SynthesisError::System(s),
            other => SynthesisError::Coprime(other),
        }
    }
}

impl From<linalg::LinalgError> for SynthesisError {
    fn from(e: linalg::LinalgError) -> Self {
        SynthesisError::System(e.into())
    }
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// Sampled H∞ norm of `M_l X − N_l Y − I`.
    pub residual_eps: f64,
    pub closed_loop_radius: f64,
    /// `ε̂/(1−ε̂)·‖[X; Y]‖∞·‖[M_l, N_l]‖∞`.
    pub error_bound_rhs: f64,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub realization: StateSpace,
    pub order: usize,
    pub certificates: Option<Certificates>,
}

impl Controller {
    pub fn uncertified(realization: StateSpace) -> Self {
        Self {
            order: realization.states(),
            realization,
            certificates: None,
        }
    }
}

/// The stable pair `X` (p×p) and `Y` (m×p) sharing one realization whose
/// outputs are stacked as `[X; Y]`.
#[derive(Debug, Clone)]
pub struct FilterPair {
    pub joint: StateSpace,
    pub p: usize,
    pub partition: Option<Partition>,
}

impl FilterPair {
    pub fn m(&self) -> usize {
        self.joint.outputs() - self.p
    }

    fn rows(&self, from: usize, count: usize) -> StateSpace {
        let j = &self.joint;
        StateSpace::new(
            j.a().clone(),
            j.b().clone(),
            j.c().rows(from, count).into_owned(),
            j.d().rows(from, count).into_owned(),
        )
        .expect("row slice of a valid realization")
    }

    pub fn x(&self) -> StateSpace {
        self.rows(0, self.p)
    }

    pub fn y(&self) -> StateSpace {
        self.rows(self.p, self.m())
    }
}

/// Inverse of a matrix that is block diagonal with square blocks `sizes`,
/// computed block by block so the off-block entries stay exactly zero.
/// Fails when any block is worse conditioned than `1e10`.
fn block_inverse(m: &Matrix, sizes: &[usize]) -> std::result::Result<Matrix, f64> {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    let mut o = 0;
    for &s in sizes {
        if s == 0 {
            continue;
        }
        let blk = m.view((o, o), (s, s)).into_owned();
        let cond = linalg::condition_number(&blk);
        if !(cond < MAX_CONDITION) {
            return Err(cond);
        }
        let inv = linalg::inverse(&blk).map_err(|_| cond)?;
        out.view_mut((o, o), (s, s)).copy_from(&inv);
        o += s;
    }
    Ok(out)
}

fn square_blocks(var: &lmi::MatrixVar) -> Vec<usize> {
    match &var.structure {
        Structure::BlockDiagonal { row_blocks, .. } => row_blocks.clone(),
        _ => vec![var.rows],
    }
}

fn partition_of(problem: &SdpProblem) -> Option<Partition> {
    let rows = |name: &str| match problem.var(name).ok().map(|v| &v.structure) {
        Some(Structure::BlockDiagonal { row_blocks, .. }) => Some(row_blocks.clone()),
        _ => None,
    };
    Some(Partition {
        states: rows("Z")?,
        outputs: rows("R_X")?,
        inputs: rows("R_Y")?,
    })
}

/// Realizes the filter from an LMI solution: `Â = UᵀZ⁻¹QU⁻ᵀ`,
/// `B̂ = UᵀZ⁻¹F`, `Ĉ = LU⁻ᵀ`, `D̂ = R`. Works on both the filter problem
/// (`L`, `R`) and the stabilization problem (`[L_X; L_Y]`, `[R_X; R_Y]`).
pub fn recover_filter_realization(problem: &SdpProblem, x: &[f64], u: Option<&Matrix>) -> Result<StateSpace> {
    let zvar = problem.var("Z")?;
    let z = zvar.value(x);
    let q = problem.value("Q", x)?;
    let f = problem.value("F", x)?;
    let (l, r) = if problem.var("L").is_ok() {
        (problem.value("L", x)?, problem.value("R", x)?)
    } else {
        let (lx, ly) = (problem.value("L_X", x)?, problem.value("L_Y", x)?);
        let (rx, ry) = (problem.value("R_X", x)?, problem.value("R_Y", x)?);
        let mut l = Matrix::zeros(lx.nrows() + ly.nrows(), lx.ncols());
        l.rows_mut(0, lx.nrows()).copy_from(&lx);
        l.rows_mut(lx.nrows(), ly.nrows()).copy_from(&ly);
        let mut r = Matrix::zeros(rx.nrows() + ry.nrows(), rx.ncols());
        r.rows_mut(0, rx.nrows()).copy_from(&rx);
        r.rows_mut(rx.nrows(), ry.nrows()).copy_from(&ry);
        (l, r)
    };
    let z_inv = block_inverse(&z, &square_blocks(zvar)).map_err(|condition| SynthesisError::ZSingular { condition })?;
    let (a_hat, b_hat, c_hat) = match u {
        None => (&z_inv * &q, &z_inv * &f, l),
        Some(u) => {
            let u_inv_t = linalg::inverse(u)?.transpose();
            let ut_zi = u.transpose() * &z_inv;
            (&ut_zi * &q * &u_inv_t, &ut_zi * &f, l * &u_inv_t)
        }
    };
    let radius = statespace::spectral_radius(&a_hat)?;
    if radius >= 1.0 {
        return Err(SynthesisError::RecoveredUnstable { radius });
    }
    Ok(StateSpace::new(a_hat, b_hat, c_hat, r)?)
}

/// Filter pair `[X; Y]` from a solution of the stabilization LMI.
pub fn recover_filter(problem: &SdpProblem, x: &[f64], u: Option<&Matrix>) -> Result<FilterPair> {
    let joint = recover_filter_realization(problem, x, u)?;
    let p = problem.var("R_X")?.rows;
    Ok(FilterPair {
        joint,
        p,
        partition: partition_of(problem),
    })
}

/// `K = Y X⁻¹` as `(Â − B̂D̂_X⁻¹Ĉ_X, −B̂D̂_X⁻¹, −Ĉ_Y + D̂_YD̂_X⁻¹Ĉ_X, D̂_YD̂_X⁻¹)`.
pub fn recover_controller(fp: &FilterPair) -> Result<Controller> {
    let x = fp.x();
    let y = fp.y();
    let blocks = fp.partition.as_ref().map_or_else(|| vec![fp.p], |pt| pt.outputs.clone());
    let dx_inv =
        block_inverse(x.d(), &blocks).map_err(|condition| SynthesisError::DXSingular { condition })?;
    let a_hat = x.a();
    let b_hat = x.b();
    let b_dxi = b_hat * &dx_inv;
    let dy_dxi = y.d() * &dx_inv;
    let realization = StateSpace::new(
        a_hat - &b_dxi * x.c(),
        -b_dxi,
        &dy_dxi * x.c() - y.c(),
        dy_dxi,
    )?;
    Ok(Controller::uncertified(realization))
}

/// `[M_l, −N_l]` as one realization, so `P1·[X; Y] = M_l X − N_l Y`.
fn signed_left(dc: &DoublyCoprime) -> Result<StateSpace> {
    let (a, b_m, b_n, c, d_m, d_n) = dc.left_data();
    let (n, p, m) = (a.nrows(), dc.outputs(), dc.inputs());
    let mut b = Matrix::zeros(n, p + m);
    b.columns_mut(0, p).copy_from(&b_m);
    b.columns_mut(p, m).copy_from(&(-b_n));
    let mut d = Matrix::zeros(p, p + m);
    d.columns_mut(0, p).copy_from(&d_m);
    d.columns_mut(p, m).copy_from(&(-d_n));
    Ok(StateSpace::new(a, b, c, d)?)
}

/// `M_l X − N_l Y − I` as a state-space system.
pub fn bezout_residual(dc: &DoublyCoprime, fp: &FilterPair) -> Result<StateSpace> {
    let p1 = signed_left(dc)?;
    Ok(p1.cascade(&fp.joint)?.sub(&StateSpace::identity(fp.p))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub radius: f64,
    pub stable: bool,
    /// All poles of the four closed-loop transfer blocks inside the disk.
    pub transfer_stable: bool,
}

pub fn verify_internal_stability(plant: &StateSpace, k: &StateSpace) -> Result<StabilityReport> {
    let radius = statespace::spectral_radius(&statespace::closed_loop_matrix(plant, k)?)?;
    let joint = statespace::closed_loop_system(plant, k)?;
    let transfer_stable = joint.spectral_radius()? < 1.0;
    Ok(StabilityReport {
        radius,
        stable: radius < 1.0,
        transfer_stable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the true closed-loop map with the ideal one built from the
/// filter, `[[X M_l, X N_l], [Y M_l, I + Y N_l]]`, against the bound
/// `ε̂/(1−ε̂)·‖[X; Y]‖∞·‖[M_l, N_l]‖∞`.
pub fn check_error_bound(
    plant: &StateSpace,
    dc: &DoublyCoprime,
    fp: &FilterPair,
    k: &StateSpace,
    eps_hat: f64,
) -> Result<ErrorBound> {
    if !(eps_hat < 1.0) {
        return Err(SynthesisError::ResidualNotCertified { residual: eps_hat });
    }
    let opts = HinfOptions::default();
    let (p, m) = (fp.p, fp.m());
    let mut offset = Matrix::zeros(p + m, p + m);
    offset.view_mut((p, p), (m, m)).fill_with_identity();
    let ideal = fp
        .joint
        .cascade(&dc.joint_left)?
        .add(&StateSpace::static_gain(offset))?;
    let actual = statespace::closed_loop_system(plant, k)?;
    let lhs = statespace::hinf_norm_sampled(&actual.sub(&ideal)?, opts)?;
    let rhs = eps_hat / (1.0 - eps_hat)
        * statespace::hinf_norm_sampled(&fp.joint, opts)?
        * statespace::hinf_norm_sampled(&dc.joint_left, opts)?;
    Ok(ErrorBound {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-6,
    })
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub epsilon: f64,
    pub partition: Option<Partition>,
    pub regularize: bool,
    pub pole_seed: u64,
    /// Number of pole draws to try before giving up on an ill-conditioned
    /// factorization. Draw `k` uses seed `pole_seed + k * POLE_SEED_STRIDE`.
    pub pole_attempts: usize,
    pub solver: SolverOptions,
}

pub const POLE_SEED_STRIDE: u64 = 1_000_003;

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            partition: None,
            regularize: false,
            pole_seed: 0,
            pole_attempts: 3,
            solver: SolverOptions::default(),
        }
    }
}

/// Everything produced along the way, for reporting and export.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub controller: Controller,
    pub filter: FilterPair,
    pub coprime: DoublyCoprime,
    pub problem: SdpProblem,
    pub solution: SdpSolution,
    pub error_bound: ErrorBound,
    pub solve_seconds: f64,
}

/// Builds the stabilization problem for `dc` with the given options.
pub fn stabilization_problem(dc: &DoublyCoprime, opts: &SynthesisOptions) -> Result<SdpProblem> {
    let prob = lmi::build_stabilization_lmi(dc, opts.epsilon, opts.partition.as_ref())?;
    if opts.regularize {
        Ok(lmi::build_regularizer(prob, &lmi::REGULARIZED_VARS)?)
    } else {
        Ok(prob)
    }
}

fn map_placement(e: CoprimeError, observer: bool) -> SynthesisError {
    match e {
        CoprimeError::Uncontrollable { rank, n } if observer => SynthesisError::Undetectable { rank, n },
        CoprimeError::Uncontrollable { rank, n } => SynthesisError::Uncontrollable { rank, n },
        other => other.into(),
    }
}

/// Gains and coprime factors from seeded random poles in `[−0.5, 0.5]`
/// placed on the whole plant.
pub fn coprime_for(plant: &StateSpace, seed: u64) -> Result<DoublyCoprime> {
    let n = plant.states();
    let f = coprime::place_poles(plant.a(), plant.b(), &coprime::random_poles(n, seed, 1), seed)
        .map_err(|e| map_placement(e, false))?;
    let l = coprime::place_observer_poles(plant.a(), plant.c(), &coprime::random_poles(n, seed, 2), seed.wrapping_add(1))
        .map_err(|e| map_placement(e, true))?;
    Ok(coprime::doubly_coprime(plant, &f, &l)?)
}

/// Block-diagonal gains: each subsystem's poles are placed on its own
/// diagonal blocks `(A_kk, B_kk, C_kk)`, ignoring the coupling. Returns
/// `None` when the coupled loops `A + BF`, `A + LC` come out unstable.
fn local_gains(plant: &StateSpace, pt: &Partition, seed: u64) -> Result<Option<(Matrix, Matrix)>> {
    let (n, m, p) = (plant.states(), plant.inputs(), plant.outputs());
    let mut f = Matrix::zeros(m, n);
    let mut l = Matrix::zeros(n, p);
    let (mut so, mut io, mut oo) = (0, 0, 0);
    for k in 0..pt.len() {
        let (ns, ni, no) = (pt.states[k], pt.inputs[k], pt.outputs[k]);
        let a = plant.a().view((so, so), (ns, ns)).into_owned();
        let b = plant.b().view((so, io), (ns, ni)).into_owned();
        let c = plant.c().view((oo, so), (no, ns)).into_owned();
        let stream = 16 + 2 * k as u64;
        let sub_seed = seed.wrapping_add(stream);
        let fk = coprime::place_poles(&a, &b, &coprime::random_poles(ns, seed, stream), sub_seed)
            .map_err(|e| map_placement(e, false))?;
        let lk = coprime::place_observer_poles(&a, &c, &coprime::random_poles(ns, seed, stream + 1), sub_seed)
            .map_err(|e| map_placement(e, true))?;
        f.view_mut((io, so), (ni, ns)).copy_from(&fk);
        l.view_mut((so, oo), (ns, no)).copy_from(&lk);
        so += ns;
        io += ni;
        oo += no;
    }
    let stable = statespace::is_schur_stable(&(plant.a() + plant.b() * &f))?
        && statespace::is_schur_stable(&(plant.a() + &l * plant.c()))?;
    Ok(stable.then_some((f, l)))
}

/// Coprime factors for synthesis. With a partition, the gains are placed
/// subsystem by subsystem so the factors are as decoupled as the plant
/// allows; if the coupling destabilizes those local loops, the whole-plant
/// placement is used instead.
pub fn coprime_for_synthesis(plant: &StateSpace, seed: u64, partition: Option<&Partition>) -> Result<DoublyCoprime> {
    if let Some(pt) = partition {
        if let Some((f, l)) = local_gains(plant, pt, seed)? {
            return Ok(coprime::doubly_coprime(plant, &f, &l)?);
        }
    }
    coprime_for(plant, seed)
}

fn solve_checked(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let sol = sdp::solve(problem, opts)?;
    if !sol.is_feasible() {
        return Err(SynthesisError::LmiInfeasible {
            status: sol.status,
            margin: sol.margin,
        });
    }
    Ok(sol)
}

/// The full pipeline: pole placement, coprime factors, stabilization LMI
/// (optionally regularized and block-structured), recovery and
/// certification. Fails unless the residual is below 1 and the closed loop
/// is Schur stable.
pub fn synthesize_stabilizing(plant: &StateSpace, opts: &SynthesisOptions) -> Result<Synthesis> {
    let mut attempt = 0;
    let (dc, mut problem, mut solution, mut solve_seconds) = loop {
        let seed = opts.pole_seed.wrapping_add(attempt as u64 * POLE_SEED_STRIDE);
        let dc = coprime_for_synthesis(plant, seed, opts.partition.as_ref())?;
        let problem = stabilization_problem(&dc, opts)?;
        let started = std::time::Instant::now();
        match solve_checked(&problem, &opts.solver) {
            Ok(sol) => break (dc, problem, sol, started.elapsed().as_secs_f64()),
            Err(e @ (SynthesisError::LmiInfeasible { .. } | SynthesisError::Sdp(_))) => {
                attempt += 1;
                if attempt >= opts.pole_attempts.max(1) {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    };

    let rx_cond = linalg::condition_number(&problem.value("R_X", &solution.x)?);
    if !(rx_cond < MAX_CONDITION) {
        // push D_X away from singularity and try once more
        let rx = problem.var("R_X")?;
        let coeffs: Vec<(usize, f64)> = rx
            .free_entries()
            .iter()
            .enumerate()
            .filter(|(_, (i, j))| i == j)
            .map(|(k, _)| (rx.offset + k, 1.0))
            .collect();
        problem.add_linear(LinearIneq {
            coeffs,
            constant: -0.01 * rx.rows as f64,
        });
        let started = std::time::Instant::now();
        solution = solve_checked(&problem, &opts.solver)?;
        solve_seconds += started.elapsed().as_secs_f64();
    }

    let filter = recover_filter(&problem, &solution.x, None)?;
    let mut controller = recover_controller(&filter)?;

    let residual = bezout_residual(&dc, &filter)?;
    let residual_eps = statespace::hinf_norm_sampled(&residual, HinfOptions::default())?;
    let stability = verify_internal_stability(plant, &controller.realization)?;
    if !(residual_eps < 1.0) {
        return Err(SynthesisError::CertificationFailed(format!(
            "Bezout residual norm {residual_eps} is not below 1"
        )));
    }
    if !stability.stable {
        return Err(SynthesisError::CertificationFailed(format!(
            "closed-loop spectral radius {} is not below 1",
            stability.radius
        )));
    }
    let error_bound = check_error_bound(plant, &dc, &filter, &controller.realization, residual_eps)?;
    controller.certificates = Some(Certificates {
        residual_eps,
        closed_loop_radius: stability.radius,
        error_bound_rhs: error_bound.rhs,
    });
    Ok(Synthesis {
        controller,
        filter,
        coprime: dc,
        problem,
        solution,
        error_bound,
        solve_seconds,
    })
}

fn sampled_lower_bound(g: &StateSpace) -> Result<f64> {
    let mut best = linalg::spectral_norm(g.d());
    for k in 0..64 {
        let z = num_complex::Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / 63.0);
        best = best.max(linalg::spectral_norm_complex(&g.evaluate(z)?));
    }
    Ok(best)
}

fn hinf_feasible(g: &StateSpace, mu: f64, opts: &SolverOptions) -> Result<bool> {
    let sol = sdp::solve(&lmi::build_hinf_lmi(g, mu)?, opts)?;
    Ok(sol.status == Status::Feasible)
}

/// H∞ norm by bisection on the bounded-real LMI, to absolute width `tol`.
pub fn hinf_norm_bisection(g: &StateSpace, tol: f64) -> Result<f64> {
    let radius = g.spectral_radius()?;
    if radius >= 1.0 {
        return Err(SystemError::Unstable { radius }.into());
    }
    let opts = SolverOptions {
        margin_floor: 0.0,
        gap_tol: 1e-10,
        feas_tol: 1e-10,
        ..SolverOptions::default()
    };
    let mut lo = sampled_lower_bound(g)?;
    if lo == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 2.0 * lo;
    while !hinf_feasible(g, hi, &opts)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(SynthesisError::CertificationFailed("norm bound search diverged".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if hinf_feasible(g, mid, &opts)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
