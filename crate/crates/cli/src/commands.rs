use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use nalgebra::DVector;
use stabsyn::chain::{self, ChainSpec, OutputMode};
use stabsyn::coprime;
use stabsyn::lmi::Partition;
use stabsyn::sdp;
use stabsyn::statespace::{self, Disturbances, HinfOptions, StateSpace};
use stabsyn::synthesis::{self, FilterPair, SynthesisError, SynthesisOptions};

use crate::doc::{self, ControllerDoc};
use crate::PlantSource;

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome<T> = std::result::Result<T, Failure>;

trait WithCode<T> {
    fn code(self, code: u8) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for std::result::Result<T, E> {
    fn code(self, code: u8) -> Outcome<T> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn fail<T>(code: u8, msg: String) -> Outcome<T> {
    Err(Failure { code, error: anyhow!(msg) })
}

pub fn exit_code(e: &SynthesisError) -> u8 {
    use SynthesisError as E;
    match e {
        E::Uncontrollable { .. } | E::Undetectable { .. } | E::LmiInfeasible { .. } | E::Sdp(_) | E::Coprime(_) => {
            EXIT_INFEASIBLE
        }
        E::ZSingular { .. }
        | E::RecoveredUnstable { .. }
        | E::DXSingular { .. }
        | E::CertificationFailed(_)
        | E::ResidualNotCertified { .. } => EXIT_CERTIFICATION,
        E::Lmi(_) | E::System(_) => EXIT_INPUT,
    }
}

struct LoadedPlant {
    system: StateSpace,
    chain: Option<ChainSpec>,
}

impl PlantSource {
    fn load(&self) -> Outcome<LoadedPlant> {
        match (&self.plant, self.chain) {
            (Some(path), _) => Ok(LoadedPlant {
                system: doc::read_plant(path).code(EXIT_INPUT)?,
                chain: None,
            }),
            (None, Some(0)) => fail(EXIT_INPUT, "--chain needs at least one node".into()),
            (None, Some(n)) => {
                let mode = if self.full_state { OutputMode::FullState } else { OutputMode::Position };
                let spec = ChainSpec::new(n, mode);
                Ok(LoadedPlant {
                    system: chain::chain_system(&spec),
                    chain: Some(spec),
                })
            }
            (None, None) => fail(EXIT_INPUT, "give a plant with --plant FILE or --chain N".into()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub source: PlantSource,
    /// One controller per chain node (block-diagonal decision variables).
    #[arg(long)]
    pub decentralized: bool,
    /// Per-subsystem state, output and input counts for --decentralized on a
    /// plant file, e.g. "2:1:1,2:1:1".
    #[arg(long)]
    pub partition: Option<String>,
    /// Minimize the norms of the filter variables.
    #[arg(long)]
    pub regularize: bool,
    /// Residual bound in the stabilization LMI.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the semidefinite program in SDPA sparse format.
    #[arg(long)]
    pub export_sdpa: Option<PathBuf>,
    /// Controller JSON destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_partition(text: &str) -> Outcome<Partition> {
    let mut sizes = (Vec::new(), Vec::new(), Vec::new());
    for part in text.split(',') {
        let v: Vec<usize> = part
            .split(':')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad partition entry {part:?}"))
            .code(EXIT_INPUT)?;
        let [s, o, i] = v[..] else {
            return fail(EXIT_INPUT, format!("partition entry {part:?} must be states:outputs:inputs"));
        };
        sizes.0.push(s);
        sizes.1.push(o);
        sizes.2.push(i);
    }
    Partition::new(sizes.0, sizes.1, sizes.2).code(EXIT_INPUT)
}

pub fn synthesize(args: &SynthesizeArgs) -> Outcome<()> {
    if !(args.epsilon > 0.0 && args.epsilon <= 1.0) {
        return fail(EXIT_INPUT, format!("--epsilon must lie in (0, 1], got {}", args.epsilon));
    }
    let plant = args.source.load()?;
    let partition = match (&args.partition, args.decentralized, plant.chain) {
        (Some(text), _, _) => Some(parse_partition(text)?),
        (None, true, Some(spec)) => Some(spec.partition()),
        (None, true, None) => return fail(EXIT_INPUT, "--decentralized on a plant file needs --partition".into()),
        (None, false, _) => None,
    };
    let opts = SynthesisOptions {
        epsilon: args.epsilon,
        partition,
        regularize: args.regularize,
        pole_seed: args.seed,
        ..SynthesisOptions::default()
    };
    if let Some(path) = &args.export_sdpa {
        let dc = synthesis::coprime_for_synthesis(&plant.system, opts.pole_seed, opts.partition.as_ref())
            .map_err(|e| Failure { code: exit_code(&e), error: e.into() })?;
        let problem =
            synthesis::stabilization_problem(&dc, &opts).map_err(|e| Failure { code: exit_code(&e), error: e.into() })?;
        doc::write_text(Some(path), &sdp::export_sdpa(&problem)).code(EXIT_INPUT)?;
    }
    let syn = synthesis::synthesize_stabilizing(&plant.system, &opts)
        .map_err(|e| Failure { code: exit_code(&e), error: e.into() })?;
    if let Some(path) = &args.export_sdpa {
        // synthesis may have re-drawn poles or tightened D_X
        doc::write_text(Some(path), &sdp::export_sdpa(&syn.problem)).code(EXIT_INPUT)?;
    }
    if !syn.error_bound.holds {
        return fail(
            EXIT_CERTIFICATION,
            format!("error bound fails: {} > {}", syn.error_bound.lhs, syn.error_bound.rhs),
        );
    }
    let doc = ControllerDoc::from_synthesis(&syn).code(EXIT_CERTIFICATION)?;
    let mut text = serde_json::to_string_pretty(&doc).code(EXIT_INPUT)?;
    text.push('\n');
    doc::write_text(args.out.as_deref(), &text).code(EXIT_INPUT)?;
    let orders = match &syn.filter.partition {
        Some(pt) => format!("{} subsystem controllers of orders {:?}", pt.len(), pt.states),
        None => format!("controller order {}", syn.controller.order),
    };
    if let Some(c) = syn.controller.certificates {
        eprintln!(
            "{orders}, closed-loop radius {:.6}, residual {:.6}",
            c.closed_loop_radius, c.residual_eps
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: PlantSource,
    /// Controller JSON as written by `synthesize`.
    #[arg(long)]
    pub controller: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    /// Initial plant state as comma-separated values; defaults to [0, 1]
    /// for every pair of states.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_vector(text: &str) -> Outcome<DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad vector {text:?}"))
        .code(EXIT_INPUT)?;
    Ok(DVector::from_vec(vals))
}

fn load_controller(path: &Path) -> Outcome<(ControllerDoc, StateSpace)> {
    let doc: ControllerDoc = doc::read_json(path).code(EXIT_INPUT)?;
    let k = doc
        .controller()
        .with_context(|| format!("invalid controller in {}", path.display()))
        .code(EXIT_INPUT)?;
    Ok((doc, k))
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e6)`.
fn number(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV trace with one row per time step `t = 0..=horizon`.
pub fn simulation_csv(plant: &StateSpace, k: &StateSpace, x0: &DVector<f64>, horizon: usize) -> anyhow::Result<String> {
    let traj = statespace::simulate(plant, k, x0, &DVector::zeros(k.states()), &Disturbances::none(), horizon)?;
    let mut out = String::from("t");
    for i in 1..=plant.outputs() {
        write!(out, ",y_{i}")?;
    }
    for i in 1..=plant.inputs() {
        write!(out, ",u_{i}")?;
    }
    out.push('\n');
    for t in 0..=horizon {
        write!(out, "{t}")?;
        for &v in traj.outputs[t].iter().chain(traj.inputs[t].iter()) {
            write!(out, ",{}", number(v))?;
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn simulate(args: &SimulateArgs) -> Outcome<()> {
    let plant = args.source.load()?;
    let (_, k) = load_controller(&args.controller)?;
    let n = plant.system.states();
    let x0 = match &args.x0 {
        Some(text) => parse_vector(text)?,
        None => plant
            .chain
            .map(|c| c.default_initial_state())
            .unwrap_or_else(|| DVector::from_fn(n, |i, _| (i % 2) as f64)),
    };
    let csv = simulation_csv(&plant.system, &k, &x0, args.horizon).code(EXIT_INPUT)?;
    doc::write_text(args.out.as_deref(), &csv).code(EXIT_INPUT)
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Chain sizes to run.
    #[arg(long, value_delimiter = ',', default_values_t = vec![6, 8, 10, 12, 14])]
    pub nodes: Vec<usize>,
    /// Every node measures its full state.
    #[arg(long)]
    pub full_state: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const BENCH_HEADER: &str = "n,lmi_dim,n_scalars,solve_seconds,controller_order,radius,residual,status";

/// One bench row: regularized decentralized synthesis on an `n`-node chain.
/// Failures are reported in the status column with the other result
/// columns left empty.
pub fn bench_row(n: usize, mode: OutputMode, seed: u64) -> String {
    let spec = ChainSpec::new(n, mode);
    let plant = chain::chain_system(&spec);
    let opts = SynthesisOptions {
        partition: Some(spec.partition()),
        regularize: true,
        pole_seed: seed,
        ..SynthesisOptions::default()
    };
    let sizes = synthesis::coprime_for_synthesis(&plant, seed, opts.partition.as_ref())
        .and_then(|dc| synthesis::stabilization_problem(&dc, &opts))
        .map(|p| (p.lmi_dim(), p.n_scalars()));
    let (dim, scalars) = match sizes {
        Ok((d, s)) => (d.to_string(), s.to_string()),
        Err(_) => (String::new(), String::new()),
    };
    match synthesis::synthesize_stabilizing(&plant, &opts) {
        Ok(syn) => {
            let cert = syn.controller.certificates.expect("synthesis certifies");
            let per_node = syn.filter.partition.as_ref().map_or(syn.controller.order, |pt| {
                pt.states.iter().copied().max().unwrap_or(0)
            });
            format!(
                "{n},{dim},{scalars},{:.4},{per_node},{:.6},{:.6},ok",
                syn.solve_seconds, cert.closed_loop_radius, cert.residual_eps
            )
        }
        Err(e) => format!("{n},{dim},{scalars},,,,,{}", failure_tag(&e)),
    }
}

fn failure_tag(e: &SynthesisError) -> &'static str {
    match exit_code(e) {
        EXIT_INFEASIBLE => "infeasible",
        EXIT_CERTIFICATION => "certification_failed",
        _ => "error",
    }
}

pub fn bench(args: &BenchArgs) -> Outcome<()> {
    if args.nodes.contains(&0) {
        return fail(EXIT_INPUT, "chain sizes must be positive".into());
    }
    let mode = if args.full_state { OutputMode::FullState } else { OutputMode::Position };
    let mut nodes = args.nodes.clone();
    nodes.sort_unstable();
    let mut out = format!("{BENCH_HEADER}\n");
    for n in nodes {
        let row = bench_row(n, mode, args.seed);
        eprintln!("{row}");
        out.push_str(&row);
        out.push('\n');
    }
    doc::write_text(args.out.as_deref(), &out).code(EXIT_INPUT)
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: PlantSource,
    #[arg(long)]
    pub controller: PathBuf,
    /// Also compute the closed-loop norm by LMI bisection.
    #[arg(long)]
    pub bisection: bool,
}

pub fn analyze(args: &AnalyzeArgs) -> Outcome<()> {
    let plant = args.source.load()?.system;
    let (doc, k) = load_controller(&args.controller)?;
    let report = synthesis::verify_internal_stability(&plant, &k).code(EXIT_INPUT)?;
    println!("closed_loop_radius: {}", report.radius);
    println!("internally_stable: {}", report.stable);
    if !report.stable {
        return fail(
            EXIT_CERTIFICATION,
            format!("closed loop is unstable (spectral radius {})", report.radius),
        );
    }
    let cl = statespace::closed_loop_system(&plant, &k).code(EXIT_INPUT)?;
    let sampled = statespace::hinf_norm_sampled(&cl, HinfOptions::default()).code(EXIT_CERTIFICATION)?;
    println!("closed_loop_hinf_sampled: {sampled}");
    if args.bisection {
        let lmi = synthesis::hinf_norm_bisection(&cl, 1e-6).code(EXIT_CERTIFICATION)?;
        println!("closed_loop_hinf_bisection: {lmi}");
    }
    let Some(filter) = &doc.filter else {
        return Ok(());
    };
    let f = doc::matrix("F", &filter.f).code(EXIT_INPUT)?;
    let l = doc::matrix("L", &filter.l).code(EXIT_INPUT)?;
    let dc = coprime::doubly_coprime(&plant, &f, &l)
        .context("stored gains do not fit the plant")
        .code(EXIT_INPUT)?;
    let fp = FilterPair {
        joint: StateSpace::from_json(&filter.realization).code(EXIT_INPUT)?,
        p: filter.p,
        partition: doc.partition.clone(),
    };
    let residual = synthesis::bezout_residual(&dc, &fp).code(EXIT_INPUT)?;
    let eps = statespace::hinf_norm_sampled(&residual, HinfOptions::default()).code(EXIT_CERTIFICATION)?;
    println!("residual_eps: {eps}");
    let eb = synthesis::check_error_bound(&plant, &dc, &fp, &k, eps)
        .map_err(|e| Failure { code: EXIT_CERTIFICATION, error: e.into() })?;
    println!("error_bound_lhs: {}", eb.lhs);
    println!("error_bound_rhs: {}", eb.rhs);
    println!("error_bound_holds: {}", eb.holds);
    if eps >= 1.0 || !eb.holds {
        return fail(EXIT_CERTIFICATION, "stored filter does not certify the controller".into());
    }
    Ok(())
}
