//! The coupled chain of second-order subsystems used for benchmarking
//! decentralized synthesis.
//!
//! Node `i` evolves as `x_i⁺ = [[1, 1], [−1, 2]] x_i + Σ_{j ∈ N_i} α(i, j) x_j + [0; 1] u_i`
//! with `α(i, j) = e^{−(i−j)²}/5` and neighbours `N_i = {i − 1, i + 1}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::lmi::Partition;
use crate::statespace::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Each node measures its second state: `C_i = [0, 1]`.
    Position,
    /// Each node measures its full state: `C_i = I₂`.
    FullState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub nodes: usize,
    pub output_mode: OutputMode,
}

impl ChainSpec {
    pub fn new(nodes: usize, output_mode: OutputMode) -> Self {
        assert!(nodes >= 1, "a chain needs at least one node");
        Self { nodes, output_mode }
    }

    pub fn outputs_per_node(&self) -> usize {
        match self.output_mode {
            OutputMode::Position => 1,
            OutputMode::FullState => 2,
        }
    }

    /// One subsystem per node.
    pub fn partition(&self) -> Partition {
        Partition::uniform(self.nodes, 2, self.outputs_per_node(), 1).expect("nonempty chain")
    }

    /// Every node starts at `[0, 1]ᵀ`.
    pub fn default_initial_state(&self) -> DVector<f64> {
        DVector::from_fn(2 * self.nodes, |i, _| (i % 2) as f64)
    }
}

/// Coupling strength between nodes `i` and `j`.
pub fn coupling(i: usize, j: usize) -> f64 {
    let d = i as f64 - j as f64;
    0.2 * (-d * d).exp()
}

pub fn chain_system(spec: &ChainSpec) -> StateSpace {
    let n = spec.nodes;
    let po = spec.outputs_per_node();
    let mut a = Matrix::zeros(2 * n, 2 * n);
    let mut b = Matrix::zeros(2 * n, n);
    let mut c = Matrix::zeros(po * n, 2 * n);
    for i in 0..n {
        let r = 2 * i;
        a[(r, r)] = 1.0;
        a[(r, r + 1)] = 1.0;
        a[(r + 1, r)] = -1.0;
        a[(r + 1, r + 1)] = 2.0;
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n {
                let alpha = coupling(i, j);
                a[(r, 2 * j)] = alpha;
                a[(r + 1, 2 * j + 1)] = alpha;
            }
        }
        b[(r + 1, i)] = 1.0;
        match spec.output_mode {
            OutputMode::Position => c[(i, r + 1)] = 1.0,
            OutputMode::FullState => {
                c[(2 * i, r)] = 1.0;
                c[(2 * i + 1, r + 1)] = 1.0;
            }
        }
    }
    StateSpace::new(a, b, c, Matrix::zeros(po * n, n)).expect("consistent chain dimensions")
}
