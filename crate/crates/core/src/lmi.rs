//! Affine semidefinite constraints over structured matrix variables.
//!
//! Every matrix variable is flattened into free scalars: symmetric
//! variables contribute their lower triangle, block-diagonal variables only
//! their diagonal blocks. Scalars are numbered in declaration order, then
//! column-major within each variable, so two builds of the same problem are
//! identical down to the scalar index.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coprime::DoublyCoprime;
use crate::linalg::Matrix;
use crate::statespace::StateSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("diagonal block {block} of an LMI is not symmetric")]
    NotSymmetric { block: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, LmiError>;

/// Sparsity/symmetry pattern of a matrix variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Full,
    Symmetric,
    /// Nonzero only on the diagonal blocks `row_blocks[k] × col_blocks[k]`.
    BlockDiagonal {
        row_blocks: Vec<usize>,
        col_blocks: Vec<usize>,
        symmetric: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixVar {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub structure: Structure,
    /// Index of this variable's first scalar in the flattened vector.
    pub offset: usize,
    entries: Vec<(usize, usize)>,
}

fn block_index(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
        .collect()
}

impl MatrixVar {
    fn new(name: &str, rows: usize, cols: usize, structure: Structure, offset: usize) -> Result<Self> {
        let entries = match &structure {
            Structure::Full => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
            Structure::Symmetric => {
                if rows != cols {
                    return Err(LmiError::DimensionMismatch(format!(
                        "symmetric variable `{name}` must be square, got {rows}x{cols}"
                    )));
                }
                (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect()
            }
            Structure::BlockDiagonal {
                row_blocks,
                col_blocks,
                symmetric,
            } => {
                if row_blocks.len() != col_blocks.len()
                    || row_blocks.iter().sum::<usize>() != rows
                    || col_blocks.iter().sum::<usize>() != cols
                {
                    return Err(LmiError::PartitionMismatch(format!(
                        "blocks {row_blocks:?} x {col_blocks:?} do not tile `{name}` ({rows}x{cols})"
                    )));
                }
                if *symmetric && row_blocks != col_blocks {
                    return Err(LmiError::PartitionMismatch(format!(
                        "symmetric block-diagonal `{name}` needs square blocks"
                    )));
                }
                let rb = block_index(row_blocks);
                let cb = block_index(col_blocks);
                let mut e = Vec::new();
                for (j, cj) in cb.iter().enumerate() {
                    for (i, ri) in rb.iter().enumerate() {
                        if ri == cj && (!symmetric || i >= j) {
                            e.push((i, j));
                        }
                    }
                }
                e
            }
        };
        Ok(Self {
            name: name.to_string(),
            rows,
            cols,
            structure,
            offset,
            entries,
        })
    }

    pub fn n_scalars(&self) -> usize {
        self.entries.len()
    }

    /// Matrix positions of the free scalars, in flattening order.
    pub fn free_entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(
            self.structure,
            Structure::Symmetric | Structure::BlockDiagonal { symmetric: true, .. }
        )
    }

    pub fn scalar_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.n_scalars()
    }

    /// Value of the variable at the flattened point `x`.
    pub fn value(&self, x: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        let sym = self.is_symmetric();
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            let v = x[self.offset + k];
            m[(i, j)] = v;
            if sym {
                m[(j, i)] = v;
            }
        }
        m
    }

    /// The variable as an affine expression of its own scalars.
    pub fn expr(&self) -> LinExpr {
        let sym = self.is_symmetric();
        let mut terms = BTreeMap::new();
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            let mut c = Matrix::zeros(self.rows, self.cols);
            c[(i, j)] = 1.0;
            if sym {
                c[(j, i)] = 1.0;
            }
            terms.insert(self.offset + k, c);
        }
        LinExpr {
            constant: Matrix::zeros(self.rows, self.cols),
            terms,
        }
    }
}

/// `constant + Σ_k x_k · terms[k]`, a matrix-valued affine function of the
/// scalar vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    pub constant: Matrix,
    pub terms: BTreeMap<usize, Matrix>,
}

impl LinExpr {
    pub fn constant(m: Matrix) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Matrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Matrix::identity(n, n))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(&k, c)| (k, f(c)))
            .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
            .collect();
        Self {
            constant: f(&self.constant),
            terms,
        }
    }

    /// `M · self`
    pub fn lmul(&self, m: &Matrix) -> Self {
        self.map(|c| m * c)
    }

    /// `self · M`
    pub fn rmul(&self, m: &Matrix) -> Self {
        self.map(|c| c * m)
    }

    pub fn transpose(&self) -> Self {
        self.map(|c| c.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c * s)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "LinExpr shape mismatch");
        let mut terms = self.terms.clone();
        for (&k, c) in &other.terms {
            terms
                .entry(k)
                .and_modify(|t| *t += c * sign)
                .or_insert_with(|| c * sign);
        }
        terms.retain(|_, c| c.iter().any(|&v| v != 0.0));
        Self {
            constant: &self.constant + &other.constant * sign,
            terms,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    pub fn add_const(&self, m: &Matrix) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    pub fn vstack(parts: &[&LinExpr]) -> Self {
        let cols = parts[0].shape().1;
        let rows: usize = parts.iter().map(|p| p.shape().0).sum();
        let mut constant = Matrix::zeros(rows, cols);
        let mut terms: BTreeMap<usize, Matrix> = BTreeMap::new();
        let mut r0 = 0;
        for p in parts {
            assert_eq!(p.shape().1, cols, "vstack column mismatch");
            let r = p.shape().0;
            constant.view_mut((r0, 0), (r, cols)).copy_from(&p.constant);
            for (&k, c) in &p.terms {
                terms
                    .entry(k)
                    .or_insert_with(|| Matrix::zeros(rows, cols))
                    .view_mut((r0, 0), (r, cols))
                    .copy_from(c);
            }
            r0 += r;
        }
        Self { constant, terms }
    }

    pub fn value(&self, x: &[f64]) -> Matrix {
        let mut m = self.constant.clone();
        for (&k, c) in &self.terms {
            m += c * x[k];
        }
        m
    }
}

impl std::ops::Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

/// One symmetric LMI `constant + Σ_k x_k·A_k ⪰ 0`. Coefficients are kept as
/// upper-triangular triplets `(i, j, v)` with `i ≤ j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBlock {
    pub dim: usize,
    pub constant: Matrix,
    pub terms: BTreeMap<usize, Vec<(usize, usize, f64)>>,
}

impl AffineBlock {
    /// Assembles a block from its upper block-triangle. `grid[i][j]` for
    /// `j ≥ i` is the `(i, j)` block; `None` means zero. Entries below the
    /// block diagonal are ignored.
    pub fn from_grid(sizes: &[usize], grid: &[Vec<Option<LinExpr>>]) -> Result<Self> {
        let nb = sizes.len();
        let dim: usize = sizes.iter().sum();
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        let mut constant = Matrix::zeros(dim, dim);
        let mut terms: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for bi in 0..nb {
            for bj in bi..nb {
                let Some(e) = grid.get(bi).and_then(|row| row.get(bj)).and_then(|e| e.as_ref()) else {
                    continue;
                };
                if e.shape() != (sizes[bi], sizes[bj]) {
                    return Err(LmiError::DimensionMismatch(format!(
                        "block ({bi},{bj}) is {:?}, expected {}x{}",
                        e.shape(),
                        sizes[bi],
                        sizes[bj]
                    )));
                }
                let diag = bi == bj;
                if diag {
                    let asym = |m: &Matrix| m != &m.transpose();
                    if asym(&e.constant) || e.terms.values().any(asym) {
                        return Err(LmiError::NotSymmetric { block: bi });
                    }
                }
                let (r0, c0) = (offsets[bi], offsets[bj]);
                for i in 0..sizes[bi] {
                    for j in 0..sizes[bj] {
                        let v = e.constant[(i, j)];
                        constant[(r0 + i, c0 + j)] = v;
                        constant[(c0 + j, r0 + i)] = v;
                    }
                }
                for (&k, c) in &e.terms {
                    let list = terms.entry(k).or_default();
                    for j in 0..sizes[bj] {
                        let i_end = if diag { j + 1 } else { sizes[bi] };
                        for i in 0..i_end {
                            let v = c[(i, j)];
                            if v != 0.0 {
                                list.push((r0 + i, c0 + j, v));
                            }
                        }
                    }
                }
            }
        }
        terms.retain(|_, l| !l.is_empty());
        for l in terms.values_mut() {
            l.sort_by_key(|&(i, j, _)| (i, j));
        }
        Ok(Self { dim, constant, terms })
    }

    /// A single symmetric expression as a block.
    pub fn from_expr(e: &LinExpr) -> Result<Self> {
        let n = e.shape().0;
        Self::from_grid(&[n], &[vec![Some(e.clone())]])
    }

    /// Dense symmetric coefficient of scalar `k` (zero if absent).
    pub fn coefficient(&self, k: usize) -> Matrix {
        let mut m = Matrix::zeros(self.dim, self.dim);
        if let Some(list) = self.terms.get(&k) {
            for &(i, j, v) in list {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn evaluate(&self, x: &[f64]) -> Matrix {
        let mut m = self.constant.clone();
        for (&k, list) in &self.terms {
            let xk = x[k];
            for &(i, j, v) in list {
                m[(i, j)] += xk * v;
                if i != j {
                    m[(j, i)] += xk * v;
                }
            }
        }
        m
    }
}

/// `constant + Σ coeffs ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearIneq {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearIneq {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(k, a)| a * x[k]).sum::<f64>()
    }
}

/// Minimize `objective · x` subject to every LMI block being PSD and every
/// linear inequality being nonnegative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub vars: Vec<MatrixVar>,
    pub objective: Vec<f64>,
    pub lmi_blocks: Vec<AffineBlock>,
    pub linear_ineqs: Vec<LinearIneq>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_scalars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, name: &str, rows: usize, cols: usize, structure: Structure) -> Result<MatrixVar> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(LmiError::DuplicateVariable(name.to_string()));
        }
        let v = MatrixVar::new(name, rows, cols, structure, self.n_scalars())?;
        self.objective.resize(self.n_scalars() + v.n_scalars(), 0.0);
        self.vars.push(v.clone());
        Ok(v)
    }

    pub fn var(&self, name: &str) -> Result<&MatrixVar> {
        self.vars
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| LmiError::UnknownVariable(name.to_string()))
    }

    pub fn value(&self, name: &str, x: &[f64]) -> Result<Matrix> {
        Ok(self.var(name)?.value(x))
    }

    /// Adds a block unless it is empty.
    pub fn add_lmi(&mut self, block: AffineBlock) {
        if block.dim > 0 {
            self.lmi_blocks.push(block);
        }
    }

    pub fn add_linear(&mut self, ineq: LinearIneq) {
        self.linear_ineqs.push(ineq);
    }

    /// Total size of all LMI blocks.
    pub fn lmi_dim(&self) -> usize {
        self.lmi_blocks.iter().map(|b| b.dim).sum()
    }
}

impl fmt::Display for SdpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SDP with {} scalars, {} LMI blocks (total dim {}), {} linear inequalities",
            self.n_scalars(),
            self.lmi_blocks.len(),
            self.lmi_dim(),
            self.linear_ineqs.len()
        )
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(LmiError::InvalidParameter(format!("norm bound must be positive, got {mu}")));
    }
    Ok(())
}

fn k(m: &Matrix) -> Option<LinExpr> {
    Some(LinExpr::constant(m.clone()))
}

/// Bounded-real LMI for `‖G‖∞ < μ` in a Lyapunov variable `P`, plus `P ⪰ 0`.
pub fn build_hinf_lmi(g: &StateSpace, mu: f64) -> Result<SdpProblem> {
    check_mu(mu)?;
    let mut prob = SdpProblem::new();
    let (n, m, p) = (g.states(), g.inputs(), g.outputs());
    let pv = prob.add_var("P", n, n, Structure::Symmetric)?.expr();
    let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
    let grid = vec![
        vec![Some(pv.clone()), Some(pv.lmul(a)), k(b), None],
        vec![None, Some(pv.clone()), None, Some(pv.rmul(&c.transpose()))],
        vec![None, None, k(&Matrix::identity(m, m)), k(&d.transpose())],
        vec![None, None, None, k(&(Matrix::identity(p, p) * (mu * mu)))],
    ];
    prob.add_lmi(AffineBlock::from_grid(&[n, n, m, p], &grid)?);
    prob.add_lmi(AffineBlock::from_expr(&pv)?);
    Ok(prob)
}

/// Extended bounded-real LMI with a slack matrix `G` decoupling `P` from the
/// system matrices.
pub fn build_hinf_lmi_extended(g: &StateSpace, mu: f64) -> Result<SdpProblem> {
    check_mu(mu)?;
    let mut prob = SdpProblem::new();
    let (n, m, p) = (g.states(), g.inputs(), g.outputs());
    let pv = prob.add_var("P", n, n, Structure::Symmetric)?.expr();
    let gv = prob.add_var("G", n, n, Structure::Full)?.expr();
    let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
    let grid = vec![
        vec![Some(pv.clone()), Some(gv.lmul(a)), k(b), None],
        vec![
            None,
            Some(gv.add(&gv.transpose()).sub(&pv)),
            None,
            Some(gv.transpose().rmul(&c.transpose())),
        ],
        vec![None, None, k(&Matrix::identity(m, m)), k(&d.transpose())],
        vec![None, None, None, k(&(Matrix::identity(p, p) * (mu * mu)))],
    ];
    prob.add_lmi(AffineBlock::from_grid(&[n, n, m, p], &grid)?);
    prob.add_lmi(AffineBlock::from_expr(&pv)?);
    Ok(prob)
}

fn check_filter_dims(p1: &StateSpace, d2: &Matrix) -> Result<()> {
    if d2.nrows() != p1.outputs() {
        return Err(LmiError::DimensionMismatch(format!(
            "P2 has {} rows but P1 has {} outputs",
            d2.nrows(),
            p1.outputs()
        )));
    }
    Ok(())
}

struct FilterVars {
    x: LinExpr,
    z: LinExpr,
    q: LinExpr,
    f: LinExpr,
    l: LinExpr,
    r: LinExpr,
}

/// The six-block filtering LMI shared by the filter and stabilization
/// builders. `l`, `r` may be stacked expressions.
fn filter_grid(
    a: &Matrix,
    b1: &Matrix,
    c: &Matrix,
    d1: &Matrix,
    d2: &Matrix,
    bound: f64,
    v: &FilterVars,
) -> Result<AffineBlock> {
    let n = a.nrows();
    let (p, r) = d2.shape();
    let ct = c.transpose();
    let d1t = d1.transpose();
    let b1l = v.l.lmul(b1);
    let ltd1t = v.l.transpose().rmul(&d1t);
    let grid = vec![
        vec![
            Some(v.x.clone()),
            Some(v.z.clone()),
            Some(v.x.lmul(a).add(&b1l)),
            Some(v.z.lmul(a).add(&b1l)),
            Some(v.r.lmul(b1)),
            None,
        ],
        vec![None, Some(v.z.clone()), Some(v.q.clone()), Some(v.q.clone()), Some(v.f.clone()), None],
        vec![None, None, Some(v.x.clone()), Some(v.z.clone()), None, Some(v.x.rmul(&ct).add(&ltd1t))],
        vec![None, None, None, Some(v.z.clone()), None, Some(v.z.rmul(&ct).add(&ltd1t))],
        vec![
            None,
            None,
            None,
            None,
            k(&Matrix::identity(r, r)),
            Some(v.r.transpose().rmul(&d1t).add_const(&(-d2.transpose()))),
        ],
        vec![None, None, None, None, None, k(&(Matrix::identity(p, p) * bound))],
    ];
    AffineBlock::from_grid(&[n, n, n, n, r, p], &grid)
}

/// Right H∞ filtering LMI: a stable `F` with `‖P1·F − D2‖∞ < μ` exists iff
/// this problem is strictly feasible. `P1 = (A, B1, C, D1)`; the filter has
/// the same state dimension as `P1`.
pub fn build_filter_lmi(p1: &StateSpace, d2: &Matrix, mu: f64) -> Result<SdpProblem> {
    check_mu(mu)?;
    check_filter_dims(p1, d2)?;
    let (n, q) = (p1.states(), p1.inputs());
    let r = d2.ncols();
    let mut prob = SdpProblem::new();
    let v = FilterVars {
        x: prob.add_var("X", n, n, Structure::Symmetric)?.expr(),
        z: prob.add_var("Z", n, n, Structure::Symmetric)?.expr(),
        q: prob.add_var("Q", n, n, Structure::Full)?.expr(),
        f: prob.add_var("F", n, r, Structure::Full)?.expr(),
        l: prob.add_var("L", q, n, Structure::Full)?.expr(),
        r: prob.add_var("R", q, r, Structure::Full)?.expr(),
    };
    let block = filter_grid(p1.a(), p1.b(), p1.c(), p1.d(), d2, mu * mu, &v)?;
    prob.add_lmi(block);
    Ok(prob)
}

/// Extended filtering LMI with symmetric `E`, `H` and unstructured `X`,
/// `Z`, `N`, `G`.
pub fn build_filter_lmi_extended(p1: &StateSpace, d2: &Matrix, mu: f64) -> Result<SdpProblem> {
    check_mu(mu)?;
    check_filter_dims(p1, d2)?;
    let (n, q) = (p1.states(), p1.inputs());
    let (p, r) = d2.shape();
    let mut prob = SdpProblem::new();
    let e = prob.add_var("E", n, n, Structure::Symmetric)?.expr();
    let h = prob.add_var("H", n, n, Structure::Symmetric)?.expr();
    let x = prob.add_var("X", n, n, Structure::Full)?.expr();
    let z = prob.add_var("Z", n, n, Structure::Full)?.expr();
    let nv = prob.add_var("N", n, n, Structure::Full)?.expr();
    let g = prob.add_var("G", n, n, Structure::Full)?.expr();
    let qv = prob.add_var("Q", n, n, Structure::Full)?.expr();
    let f = prob.add_var("F", n, r, Structure::Full)?.expr();
    let l = prob.add_var("L", q, n, Structure::Full)?.expr();
    let rv = prob.add_var("R", q, r, Structure::Full)?.expr();

    let (a, b1, c, d1) = (p1.a(), p1.b(), p1.c(), p1.d());
    let ct = c.transpose();
    let d1t = d1.transpose();
    let xn = x.sub(&nv);
    let b1l = l.lmul(b1);
    let ltd1t = l.transpose().rmul(&d1t);
    let grid = vec![
        vec![
            Some(e.clone()),
            Some(g.clone()),
            Some(x.lmul(a).add(&b1l)),
            Some(xn.lmul(a).add(&b1l)),
            Some(rv.lmul(b1)),
            None,
        ],
        vec![None, Some(h.clone()), Some(qv.clone()), Some(qv), Some(f), None],
        vec![
            None,
            None,
            Some(x.add(&x.transpose()).sub(&e)),
            Some(xn.add(&z.transpose()).sub(&g)),
            None,
            Some(x.transpose().rmul(&ct).add(&ltd1t)),
        ],
        vec![
            None,
            None,
            None,
            Some(z.add(&z.transpose()).sub(&h)),
            None,
            Some(xn.transpose().rmul(&ct).add(&ltd1t)),
        ],
        vec![
            None,
            None,
            None,
            None,
            k(&Matrix::identity(r, r)),
            Some(rv.transpose().rmul(&d1t).add_const(&(-d2.transpose()))),
        ],
        vec![None, None, None, None, None, k(&(Matrix::identity(p, p) * (mu * mu)))],
    ];
    prob.add_lmi(AffineBlock::from_grid(&[n, n, n, n, r, p], &grid)?);
    Ok(prob)
}

/// Per-subsystem sizes for decentralized synthesis: subsystem `k` owns
/// `states[k]` plant states, `outputs[k]` measurements and `inputs[k]`
/// actuators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub states: Vec<usize>,
    pub outputs: Vec<usize>,
    pub inputs: Vec<usize>,
}

impl Partition {
    pub fn new(states: Vec<usize>, outputs: Vec<usize>, inputs: Vec<usize>) -> Result<Self> {
        if states.len() != outputs.len() || states.len() != inputs.len() || states.is_empty() {
            return Err(LmiError::PartitionMismatch(format!(
                "per-subsystem lists differ in length: {} states, {} outputs, {} inputs",
                states.len(),
                outputs.len(),
                inputs.len()
            )));
        }
        Ok(Self { states, outputs, inputs })
    }

    /// `count` identical subsystems.
    pub fn uniform(count: usize, states: usize, outputs: usize, inputs: usize) -> Result<Self> {
        Self::new(vec![states; count], vec![outputs; count], vec![inputs; count])
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn check(&self, n: usize, p: usize, m: usize) -> Result<()> {
        let sums = (
            self.states.iter().sum::<usize>(),
            self.outputs.iter().sum::<usize>(),
            self.inputs.iter().sum::<usize>(),
        );
        if sums != (n, p, m) {
            return Err(LmiError::PartitionMismatch(format!(
                "partition covers (n, p, m) = {sums:?}, plant has ({n}, {p}, {m})"
            )));
        }
        Ok(())
    }

    fn structure(&self, rows: &[usize], cols: &[usize], symmetric: bool) -> Structure {
        Structure::BlockDiagonal {
            row_blocks: rows.to_vec(),
            col_blocks: cols.to_vec(),
            symmetric,
        }
    }
}

/// Names of the variables penalized by the controller-size regularizer.
pub const REGULARIZED_VARS: [&str; 6] = ["Q", "F", "L_X", "L_Y", "R_X", "R_Y"];

/// Stabilization LMI: strictly feasible iff there are stable `X`, `Y` with
/// `‖M_l·X − N_l·Y − I‖∞ < ε`. With a partition, every filter variable
/// except `X` is block diagonal, which makes the recovered controller
/// decentralized.
pub fn build_stabilization_lmi(dc: &DoublyCoprime, eps: f64, partition: Option<&Partition>) -> Result<SdpProblem> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(LmiError::InvalidParameter(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let (a, b_m, b_n, c, d_m, d_n) = dc.left_data();
    let n = a.nrows();
    let p = dc.outputs();
    let m = dc.inputs();
    let mut prob = SdpProblem::new();
    let (full, sym) = (Structure::Full, Structure::Symmetric);
    let st = |rows: &[usize], cols: &[usize], symmetric: bool, fallback: Structure| match partition {
        Some(pt) => pt.structure(rows, cols, symmetric),
        None => fallback,
    };
    if let Some(pt) = partition {
        pt.check(n, p, m)?;
    }
    let (ps, po, pi) = match partition {
        Some(pt) => (pt.states.clone(), pt.outputs.clone(), pt.inputs.clone()),
        None => (vec![n], vec![p], vec![m]),
    };
    let x = prob.add_var("X", n, n, Structure::Symmetric)?.expr();
    let z = prob.add_var("Z", n, n, st(&ps, &ps, true, sym.clone()))?.expr();
    let q = prob.add_var("Q", n, n, st(&ps, &ps, false, full.clone()))?.expr();
    let f = prob.add_var("F", n, p, st(&ps, &po, false, full.clone()))?.expr();
    let lx = prob.add_var("L_X", p, n, st(&po, &ps, false, full.clone()))?.expr();
    let ly = prob.add_var("L_Y", m, n, st(&pi, &ps, false, full.clone()))?.expr();
    let rx = prob.add_var("R_X", p, p, st(&po, &po, false, full.clone()))?.expr();
    let ry = prob.add_var("R_Y", m, p, st(&pi, &po, false, full))?.expr();

    let mut b1 = Matrix::zeros(n, p + m);
    b1.view_mut((0, 0), (n, p)).copy_from(&b_m);
    b1.view_mut((0, p), (n, m)).copy_from(&(-b_n));
    let mut d1 = Matrix::zeros(p, p + m);
    d1.view_mut((0, 0), (p, p)).copy_from(&d_m);
    d1.view_mut((0, p), (p, m)).copy_from(&(-d_n));
    let v = FilterVars {
        x,
        z,
        q,
        f,
        l: LinExpr::vstack(&[&lx, &ly]),
        r: LinExpr::vstack(&[&rx, &ry]),
    };
    let block = filter_grid(&a, &b1, &c, &d1, &Matrix::identity(p, p), eps * eps, &v)?;
    prob.add_lmi(block);
    Ok(prob)
}

/// Epigraph of `Σ_V max_ij |V_ij|`: one scalar `t_V` per named variable,
/// `−t_V ≤ V_ij ≤ t_V` for each free entry, and `t_V` added to the
/// objective.
pub fn build_regularizer(mut problem: SdpProblem, var_names: &[&str]) -> Result<SdpProblem> {
    for name in var_names {
        problem.var(name)?;
    }
    for name in var_names {
        let range = problem.var(name)?.scalar_range();
        let t = problem.add_var(&format!("t_{name}"), 1, 1, Structure::Full)?.offset;
        problem.objective[t] += 1.0;
        for s in range {
            problem.add_linear(LinearIneq {
                coeffs: vec![(t, 1.0), (s, -1.0)],
                constant: 0.0,
            });
            problem.add_linear(LinearIneq {
                coeffs: vec![(t, 1.0), (s, 1.0)],
                constant: 0.0,
            });
        }
    }
    Ok(problem)
}
