//! Sparse SDPA (`.dat-s`) export.
//!
//! SDPA's primal reads `min cᵀx s.t. Σ F_i x_i − F_0 ⪰ 0`, so `F_0` is the
//! negated constant term and `F_i` the coefficient of scalar `i`. Linear
//! inequalities become one trailing diagonal block, written with a negative
//! size.

use std::fmt::Write;

use crate::lmi::SdpProblem;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Deterministic SDPA text for `problem`. Every value is printed with 17
/// significant digits, so a reader recovers the exact `f64`.
pub fn export_sdpa(problem: &SdpProblem) -> String {
    let m = problem.n_scalars();
    let n_lmi = problem.lmi_blocks.len();
    let has_lin = !problem.linear_ineqs.is_empty();
    let mut out = String::new();
    writeln!(out, "{m}").unwrap();
    writeln!(out, "{}", n_lmi + usize::from(has_lin)).unwrap();
    let mut sizes: Vec<String> = problem.lmi_blocks.iter().map(|b| b.dim.to_string()).collect();
    if has_lin {
        sizes.push(format!("-{}", problem.linear_ineqs.len()));
    }
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let c: Vec<String> = problem.objective.iter().map(|&v| num(v)).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    // F_0
    for (b, blk) in problem.lmi_blocks.iter().enumerate() {
        for i in 0..blk.dim {
            for j in i..blk.dim {
                let v = blk.constant[(i, j)];
                if v != 0.0 {
                    writeln!(out, "0 {} {} {} {}", b + 1, i + 1, j + 1, num(-v)).unwrap();
                }
            }
        }
    }
    for (k, l) in problem.linear_ineqs.iter().enumerate() {
        if l.constant != 0.0 {
            writeln!(out, "0 {} {} {} {}", n_lmi + 1, k + 1, k + 1, num(-l.constant)).unwrap();
        }
    }

    // F_i, collected per scalar so the output is ordered by matrix number
    let mut lin_by_scalar: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (k, l) in problem.linear_ineqs.iter().enumerate() {
        for &(s, v) in &l.coeffs {
            lin_by_scalar[s].push((k, v));
        }
    }
    for (s, lin) in lin_by_scalar.iter_mut().enumerate() {
        for (b, blk) in problem.lmi_blocks.iter().enumerate() {
            if let Some(list) = blk.terms.get(&s) {
                for &(i, j, v) in list {
                    writeln!(out, "{} {} {} {} {}", s + 1, b + 1, i + 1, j + 1, num(v)).unwrap();
                }
            }
        }
        lin.sort_by_key(|&(k, _)| k);
        // duplicate rows within one inequality are merged
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for &(k, v) in lin.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => merged.push((k, v)),
            }
        }
        for (k, v) in merged {
            if v != 0.0 {
                writeln!(out, "{} {} {} {} {}", s + 1, n_lmi + 1, k + 1, k + 1, num(v)).unwrap();
            }
        }
    }
    out
}
