//! On-disk documents: plants, controllers and the filter data needed to
//! re-check a controller's certificates later.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use stabsyn::lmi::Partition;
use stabsyn::statespace::{self, StateSpaceJson};
use stabsyn::synthesis::{Certificates, Synthesis};
use stabsyn::{Matrix, StateSpace};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelTf {
    pub output: usize,
    pub input: usize,
    /// Coefficients in descending powers of `z`.
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// The stacked filter `[X; Y]` and the gains `F`, `L` of the coprime
/// factorization it was designed against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterDoc {
    pub realization: StateSpaceJson,
    pub p: usize,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerDoc {
    #[serde(flatten)]
    pub realization: StateSpaceJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transfer_functions: Vec<ChannelTf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterDoc>,
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        anyhow::bail!("{name} has rows of unequal length");
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Per-channel transfer functions. A partitioned controller is read block by
/// block, so each channel keeps the order of its own subsystem and channels
/// across subsystems (identically zero) are omitted.
pub fn transfer_functions(k: &StateSpace, partition: Option<&Partition>) -> Result<Vec<ChannelTf>> {
    let mut out = Vec::new();
    let Some(pt) = partition else {
        for o in 0..k.outputs() {
            for i in 0..k.inputs() {
                let (num, den) = statespace::tf_coefficients(k, o, i)?;
                out.push(ChannelTf { output: o, input: i, num, den });
            }
        }
        return Ok(out);
    };
    // K maps measurements (partition outputs) to actuators (partition inputs)
    let (mut so, mut yo, mut uo) = (0, 0, 0);
    for s in 0..pt.len() {
        let (ns, ny, nu) = (pt.states[s], pt.outputs[s], pt.inputs[s]);
        let sub = StateSpace::new(
            k.a().view((so, so), (ns, ns)).into_owned(),
            k.b().view((so, yo), (ns, ny)).into_owned(),
            k.c().view((uo, so), (nu, ns)).into_owned(),
            k.d().view((uo, yo), (nu, ny)).into_owned(),
        )?;
        for o in 0..nu {
            for i in 0..ny {
                let (num, den) = statespace::tf_coefficients(&sub, o, i)?;
                out.push(ChannelTf {
                    output: uo + o,
                    input: yo + i,
                    num,
                    den,
                });
            }
        }
        so += ns;
        yo += ny;
        uo += nu;
    }
    Ok(out)
}

impl ControllerDoc {
    pub fn from_synthesis(syn: &Synthesis) -> Result<Self> {
        let k = &syn.controller.realization;
        let partition = syn.filter.partition.clone();
        Ok(Self {
            realization: k.to_json(),
            certificates: syn.controller.certificates,
            transfer_functions: transfer_functions(k, partition.as_ref())?,
            partition,
            filter: Some(FilterDoc {
                realization: syn.filter.joint.to_json(),
                p: syn.filter.p,
                f: rows(&syn.coprime.f),
                l: rows(&syn.coprime.l),
            }),
        })
    }

    pub fn controller(&self) -> Result<StateSpace> {
        Ok(StateSpace::from_json(&self.realization)?)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn read_plant(path: &Path) -> Result<StateSpace> {
    let doc: StateSpaceJson = read_json(path)?;
    StateSpace::from_json(&doc).with_context(|| format!("invalid plant in {}", path.display()))
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
