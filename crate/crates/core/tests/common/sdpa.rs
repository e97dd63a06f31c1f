//! A small SDPA sparse-format reader written against the format description
//! only, used to check the exporter from the outside.

use std::collections::BTreeMap;

use stabsyn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpaProblem {
    pub n_vars: usize,
    /// Signed block sizes; negative for diagonal (linear) blocks.
    pub block_sizes: Vec<i64>,
    pub objective: Vec<f64>,
    /// `matrices[k][b]` is `F_k` restricted to block `b`, full symmetric.
    pub matrices: Vec<Vec<Matrix>>,
}

fn numbers(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}' || c == '(' || c == ')')
        .filter(|s| !s.is_empty())
}

pub fn parse(text: &str) -> Result<SdpaProblem, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = || lines.next().ok_or_else(|| "unexpected end of input".to_string());
    let n_vars: usize = numbers(next()?).next().ok_or("missing m")?.parse().map_err(|e| format!("m: {e}"))?;
    let n_blocks: usize = numbers(next()?)
        .next()
        .ok_or("missing nblocks")?
        .parse()
        .map_err(|e| format!("nblocks: {e}"))?;
    let block_sizes: Vec<i64> = numbers(next()?)
        .take(n_blocks)
        .map(|s| s.parse::<i64>().map_err(|e| format!("block size: {e}")))
        .collect::<Result<_, _>>()?;
    if block_sizes.len() != n_blocks {
        return Err("block size count".into());
    }
    let objective: Vec<f64> = numbers(next()?)
        .map(|s| s.parse::<f64>().map_err(|e| format!("objective: {e}")))
        .collect::<Result<_, _>>()?;
    if objective.len() != n_vars {
        return Err(format!("objective has {} entries, expected {n_vars}", objective.len()));
    }
    let dims: Vec<usize> = block_sizes.iter().map(|s| s.unsigned_abs() as usize).collect();
    let mut matrices: Vec<Vec<Matrix>> = (0..=n_vars)
        .map(|_| dims.iter().map(|&d| Matrix::zeros(d, d)).collect())
        .collect();
    let mut seen: BTreeMap<(usize, usize, usize, usize), ()> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = numbers(line).collect();
        if f.len() != 5 {
            return Err(format!("entry line {line:?} has {} fields", f.len()));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("index {s:?}: {e}"));
        let (k, b, i, j) = (idx(f[0])?, idx(f[1])?, idx(f[2])?, idx(f[3])?);
        let v: f64 = f[4].parse().map_err(|e| format!("value {:?}: {e}", f[4]))?;
        if k > n_vars || b == 0 || b > n_blocks || i == 0 || j == 0 || i > j || j > dims[b - 1] {
            return Err(format!("entry out of range: {line:?}"));
        }
        if block_sizes[b - 1] < 0 && i != j {
            return Err(format!("off-diagonal entry in a diagonal block: {line:?}"));
        }
        if seen.insert((k, b, i, j), ()).is_some() {
            return Err(format!("duplicate entry: {line:?}"));
        }
        let m = &mut matrices[k][b - 1];
        m[(i - 1, j - 1)] = v;
        m[(j - 1, i - 1)] = v;
    }
    Ok(SdpaProblem {
        n_vars,
        block_sizes,
        objective,
        matrices,
    })
}
