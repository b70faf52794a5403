//! The `cmf` command line. Every subcommand accepts `--config <file.toml>` whose keys
//! mirror the long flags (with `_` for `-`); flags win over the file.
//!
//! Exit codes: 0 success, 2 precondition failure, 3 certification failure, 4 oracle failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{certify_remainder, global_lipschitz, BoundOptions, Growth, Shape};
use crate::conjugacy::{normal_form_kc, solve_order_by_order, ConjugacySolution};
use crate::error::{Error, Result};
use crate::oracle::{default_seed, find_period2, trace_heteroclinic, verify_enclosure};
use crate::polyalg::{format_rational, jet_from, parse_rational, IBox, Interval, Jet, JetJson, Layout, RMatrix, Rational};
use crate::rdt_app::{build_box, certify_pipeline, enclosure_report, reports_csv, u_jets, RdtSystem, PipelineConfig};
use crate::splitting::split_spectrum;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "cmf", version, about = "Center-manifold jets, remainder certificates and the lattice period-doubling pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the conjugacy equation order by order and print P_R, P_K.
    Solve(SolveArgs),
    /// Produce remainder certificates.
    Certify(CertifyArgs),
    /// Run the full period-doubling pipeline for the lattice map.
    Rdt(RdtArgs),
    /// Floating-point ground truth: period-2 orbits and heteroclinic traces.
    Oracle(OracleArgs),
    /// Enclosure reports over a λ grid.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// The lattice reaction-diffusion map.
    Rdt,
    /// The linear part of the lattice map alone.
    Zero,
    /// Jets read from `--input`.
    File,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KcChoice {
    Zero,
    /// `k_c = (3/2)x²`
    X2,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTask {
    /// Newton solve for the period-2 orbit and its enclosure check.
    Period2,
    /// Forward and backward orbits from a point between the orbit and the origin.
    Hetero,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML file with default values for the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    /// Truncation order (weighted, λ has weight 2 for the built-in systems).
    #[arg(long)]
    pub order: Option<u32>,
    /// Prescribed center correction.
    #[arg(long, value_enum, conflicts_with = "kc_target")]
    pub kc: Option<KcChoice>,
    /// Choose k_c so that this monomial of R vanishes (`x2` removes x²).
    #[arg(long)]
    pub kc_target: Option<String>,
    /// JSON file `{"matrix": [[..]], "jets": [..]}` for `--system file`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub system: Option<SystemKind>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// Upper end of the parameter range (decimal or p/q).
    #[arg(long)]
    pub lambda_max: Option<String>,
    /// E_R = er_coef·√λ_max.
    #[arg(long)]
    pub er_coef: Option<String>,
    /// E_K = ek_coef·√λ_max.
    #[arg(long)]
    pub ek_coef: Option<String>,
    /// Cutoff ramp width.
    #[arg(long)]
    pub delta: Option<String>,
    /// Remainder order of the certificates.
    #[arg(long)]
    pub remainder_order: Option<u32>,
    /// Number of λ values in the enclosure grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Smallest λ of the geometric grid.
    #[arg(long)]
    pub grid_min: Option<String>,
    /// Bisection steps for the largest certifiable λ_max after a failure.
    #[arg(long)]
    pub bisection_steps: Option<usize>,
    /// Re-certify the remainder at every grid point.
    #[arg(long)]
    pub certify_grid: bool,
}

#[derive(Args, Debug, Clone)]
pub struct RdtArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Also write the enclosure table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(value_enum)]
    pub task: OracleTask,
    /// Parameter value (default 5e-5).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Iterates in each direction for `hetero` (default 10000).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Directory for orbit CSV files (default: current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Values read from a `--config` file.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemKind>,
    pub order: Option<u32>,
    pub kc: Option<KcChoice>,
    pub kc_target: Option<String>,
    pub input: Option<PathBuf>,
    pub lambda: Option<String>,
    pub lambda_max: Option<String>,
    pub er_coef: Option<String>,
    pub ek_coef: Option<String>,
    pub delta: Option<String>,
    pub remainder_order: Option<u32>,
    pub grid_points: Option<usize>,
    pub grid_min: Option<String>,
    pub bisection_steps: Option<usize>,
    pub certify_grid: Option<bool>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(p)?;
        toml::from_str(&text).map_err(|e| Error::Precondition(format!("config {}: {e}", p.display())))
    }
}

/// Header attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub modules: Vec<(String, String)>,
}

fn header(command: &str, effective: &impl Serialize) -> Result<Header> {
    let json = serde_json::to_string(effective)?;
    let digest = Sha256::digest(json.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let v = env!("CARGO_PKG_VERSION").to_string();
    let modules = ["polyalg", "splitting", "conjugacy", "bounds", "cutoff", "rdt_app", "oracle", "cli"]
        .iter()
        .map(|m| (m.to_string(), v.clone()))
        .collect();
    Ok(Header { tool: "cmf".into(), version: v, command: command.into(), config_sha256: hex, modules })
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    header: &'a Header,
    result: &'a T,
}

fn write_json<T: Serialize>(h: &Header, result: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&Output { header: h, result })?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn write_csv(h: &Header, body: &str, path: &Path) -> Result<()> {
    let head = format!("# {} {} {} config_sha256={}\n", h.tool, h.version, h.command, h.config_sha256);
    std::fs::write(path, head + body)?;
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Certification { .. } | Error::NotContraction(_) | Error::MissingConstant(_) => EXIT_CERTIFICATION,
        Error::Newton(_) | Error::Budget(_) => EXIT_ORACLE,
        _ => EXIT_PRECONDITION,
    }
}

fn pick<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn rational(s: &str, name: &str) -> Result<Rational> {
    parse_rational(s).map_err(|_| Error::Precondition(format!("--{name}: cannot parse {s:?}")))
}

fn pipeline_config(p: &PipelineArgs, f: &RunConfig) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(v) = pick(p.lambda_max.clone(), f.lambda_max.clone()) {
        cfg.lambda_max = rational(&v, "lambda-max")?;
        // keep the certified parameter window just above λ_max
        let hi = &cfg.lambda_max * rational("1.001", "lambda-max")?;
        if hi > cfg.window[1] {
            cfg.window[1] = hi;
        }
    }
    if let Some(v) = pick(p.er_coef.clone(), f.er_coef.clone()) {
        cfg.er_coef = rational(&v, "er-coef")?;
    }
    if let Some(v) = pick(p.ek_coef.clone(), f.ek_coef.clone()) {
        cfg.ek_coef = rational(&v, "ek-coef")?;
    }
    if let Some(v) = pick(p.delta.clone(), f.delta.clone()) {
        cfg.delta = rational(&v, "delta")?;
    }
    if let Some(v) = pick(p.remainder_order, f.remainder_order) {
        cfg.remainder_order = v;
    }
    if let Some(v) = pick(p.grid_points, f.grid_points) {
        cfg.grid_points = v;
    }
    if let Some(v) = pick(p.grid_min.clone(), f.grid_min.clone()) {
        cfg.grid_min = rational(&v, "grid-min")?;
    }
    if let Some(v) = pick(p.bisection_steps, f.bisection_steps) {
        cfg.bisection_steps = v;
    }
    cfg.certify_grid = p.certify_grid || f.certify_grid.unwrap_or(false);
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Deserialize)]
struct SystemFile {
    matrix: Vec<Vec<String>>,
    jets: Vec<JetJson>,
}

#[derive(Serialize)]
struct SolveOutput {
    system: SystemKind,
    order: u32,
    p_r: Vec<String>,
    p_k: Vec<String>,
    residual_is_zero: bool,
    solution: ConjugacySolution,
}

fn lattice_linear(layout: &Layout, order: u32) -> Vec<Jet> {
    vec![
        jet_from(layout, order, &[((1, 1), &[0, 0, 1])]),
        jet_from(layout, order, &[((-3, 1), &[0, 0, 1]), ((-2, 1), &[0, 1, 0])]),
    ]
}

fn parse_target(s: &str, nparams: usize, nc: usize) -> Result<Vec<u32>> {
    // `x2`, `x^2` or `x3`: a pure power of the (single) center variable
    let t = s.trim().trim_start_matches('x').trim_start_matches('^');
    let d: u32 = t.parse().map_err(|_| Error::Precondition(format!("--kc-target {s:?}: expected x<degree>")))?;
    if nc != 1 || d < 2 {
        return Err(Error::Precondition(format!("--kc-target {s:?} needs one center variable and degree ≥ 2")));
    }
    let mut e = vec![0; nparams + 1];
    e[nparams] = d;
    Ok(e)
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let f = RunConfig::load(a.common.config.as_deref())?;
    let system = pick(a.system, f.system).unwrap_or(SystemKind::Rdt);
    let order = pick(a.order, f.order).unwrap_or(3);
    let (jets, split) = match system {
        SystemKind::Rdt | SystemKind::Zero => {
            let l = Layout::weighted(1, 2, 2);
            let jets = if system == SystemKind::Rdt { u_jets(&l, order) } else { lattice_linear(&l, order) };
            (jets, RdtSystem::splitting()?)
        }
        SystemKind::File => {
            let path = pick(a.input.clone(), f.input.clone())
                .ok_or_else(|| Error::Precondition("--system file needs --input".into()))?;
            let sf: SystemFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let jets = sf.jets.iter().map(Jet::from_json).collect::<Result<Vec<_>>>()?;
            (jets, split_spectrum(&RMatrix::from_strings(&sf.matrix)?)?)
        }
    };
    let fl = jets.first().ok_or_else(|| Error::Precondition("no jets".into()))?.layout().clone();
    let nc = split.num_center();
    let pw = fl.weights.first().copied().unwrap_or(1);
    let lc = if fl.is_weighted() { Layout::weighted(fl.num_params, nc, pw) } else { Layout::new(fl.num_params, nc) };
    let target = pick(a.kc_target.clone(), f.kc_target.clone());
    let kc = match (pick(a.kc, f.kc), target) {
        (Some(_), Some(_)) => return Err(Error::Precondition("--kc and --kc-target are exclusive".into())),
        (_, Some(t)) => normal_form_kc(&jets, &split, &[(0, parse_target(&t, fl.num_params, nc)?)], order)?,
        (Some(KcChoice::X2), None) => {
            if nc != 1 {
                return Err(Error::Precondition("--kc x2 needs one center variable".into()));
            }
            let mut e = vec![0; fl.num_params + 1];
            e[fl.num_params] = 2;
            vec![Jet::from_terms(&lc, order, vec![(e, crate::polyalg::rat(3, 2))])?]
        }
        (Some(KcChoice::Zero), None) | (None, None) => (0..nc).map(|_| Jet::zero(&lc, order)).collect(),
    };
    let sol = solve_order_by_order(&jets, &split, &kc, order)?;
    let residual_is_zero = sol.residual()?.iter().all(Jet::is_zero);
    for (i, r) in sol.r.iter().enumerate() {
        eprintln!("P_R[{i}] = {r}");
    }
    for (i, k) in sol.k_h().iter().enumerate() {
        eprintln!("P_K[{i}] = {k}");
    }
    let out = SolveOutput {
        system,
        order,
        p_r: sol.r.iter().map(Jet::to_string).collect(),
        p_k: sol.k_h().iter().map(Jet::to_string).collect(),
        residual_is_zero,
        solution: sol,
    };
    let h = header("solve", &(system, order, a.kc, &a.kc_target))?;
    write_json(&h, &out, pick(a.common.out.clone(), f.out).as_deref())?;
    Ok(if residual_is_zero { EXIT_OK } else { EXIT_CERTIFICATION })
}

fn print_failures(b: &crate::rdt_app::PipelineBundle) {
    for s in &b.stages {
        eprintln!("stage {} {}: {}", s.stage, s.name, if s.pass { "pass" } else { "FAIL" });
    }
    for f in &b.failures {
        eprintln!("failed at stage {}: {}", f.stage, f.inequality);
    }
    if !b.passed {
        match b.largest_certifiable {
            Some(l) => eprintln!("largest certifiable lambda_max: {l:e}"),
            None => eprintln!("no certifiable lambda_max found"),
        }
    }
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let f = RunConfig::load(a.common.config.as_deref())?;
    let system = pick(a.system, f.system).unwrap_or(SystemKind::Rdt);
    let out = pick(a.common.out.clone(), f.out.clone());
    match system {
        SystemKind::Zero => {
            let l = Layout::new(1, 2);
            let split = RdtSystem::splitting()?;
            let sol = solve_order_by_order(&lattice_linear(&l, 3), &split, &[Jet::zero(&Layout::new(1, 1), 3)], 3)?;
            let lip = global_lipschitz(&split.norms, Interval::ZERO, Interval::ZERO, 3, true, false)?;
            let dom = IBox::new(vec![Interval { lo: 0.0, hi: 1e-4 }, Interval { lo: -1e-2, hi: 1e-2 }]);
            let opts = BoundOptions { n: 4, shape: Shape::Power, growth: Growth::Taylor, ..BoundOptions::default() };
            let cert = certify_remainder(&sol, &split, &lip.bound_inputs(), &dom, &opts)?;
            let ok = cert.verify();
            eprintln!("remainder constants {:?}, containment {}", cert.c, if ok { "verified" } else { "FAILED" });
            write_json(&header("certify", &"zero")?, &cert, out.as_deref())?;
            Ok(if ok { EXIT_OK } else { EXIT_CERTIFICATION })
        }
        SystemKind::Rdt => {
            let cfg = pipeline_config(&a.pipeline, &f)?;
            let b = certify_pipeline(&cfg)?;
            print_failures(&b);
            write_json(&header("certify", &cfg)?, &b, out.as_deref())?;
            Ok(if b.passed { EXIT_OK } else { EXIT_CERTIFICATION })
        }
        SystemKind::File => Err(Error::Precondition("certify supports --system rdt or zero".into())),
    }
}

fn cmd_rdt(a: &RdtArgs) -> Result<i32> {
    let f = RunConfig::load(a.common.config.as_deref())?;
    let cfg = pipeline_config(&a.pipeline, &f)?;
    let b = certify_pipeline(&cfg)?;
    print_failures(&b);
    eprintln!("E_R = {}  E_K = {}", b.e_r, b.e_k);
    let h = header("rdt", &cfg)?;
    write_json(&h, &b, pick(a.common.out.clone(), f.out).as_deref())?;
    if let Some(p) = pick(a.csv.clone(), f.csv) {
        write_csv(&h, &reports_csv(&b.reports), &p)?;
    }
    Ok(if b.passed { EXIT_OK } else { EXIT_CERTIFICATION })
}

#[derive(Serialize)]
struct OracleVerdict {
    task: OracleTask,
    lambda: String,
    pass: bool,
    detail: serde_json::Value,
}

fn cmd_oracle(a: &OracleArgs) -> Result<i32> {
    let f = RunConfig::load(a.common.config.as_deref())?;
    let cfg = pipeline_config(&a.pipeline, &f)?;
    let lambda = rational(&pick(a.lambda.clone(), f.lambda.clone()).unwrap_or_else(|| "5e-5".into()), "lambda")?;
    let lf = lambda.to_f64().unwrap_or(0.0);
    let dir = pick(a.out_dir.clone(), f.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let h = header("oracle", &(a.task, format_rational(&lambda), &cfg, a.steps))?;
    let (pass, detail) = match a.task {
        OracleTask::Period2 => {
            let orbit = find_period2(&lambda, default_seed(lf))?;
            let rep = enclosure_report(Interval::from_rational(&lambda), cfg.e_r()?, cfg.e_k()?, "oracle")?;
            let check = verify_enclosure(&orbit, &rep)?;
            std::fs::create_dir_all(&dir)?;
            write_csv(&h, &orbit.to_csv(), &dir.join("period2.csv"))?;
            eprintln!("period-2 residual {:e}, smallest margin {:e}", orbit.residual, check.min_margin);
            (check.pass, serde_json::json!({ "orbit": orbit, "check": check }))
        }
        OracleTask::Hetero => {
            let steps = pick(a.steps, f.steps).unwrap_or(10_000);
            let b = build_box(Interval::from_rational(&lambda), cfg.e_r()?, cfg.e_k()?)?;
            let t = trace_heteroclinic(&lambda, &b, steps)?;
            std::fs::create_dir_all(&dir)?;
            write_csv(&h, &t.forward.to_csv(), &dir.join("forward.csv"))?;
            write_csv(&h, &t.backward.to_csv(), &dir.join("backward.csv"))?;
            eprintln!(
                "forward |p| = {:e} (hit {:?}), backward distance = {:e} (hit {:?}), box margin {:e}",
                t.forward_final_norm, t.forward_hit, t.backward_final_distance, t.backward_hit, t.min_box_margin
            );
            if let Err(e) = t.require_converged() {
                eprintln!("{e}");
            }
            let summary = serde_json::json!({
                "start_center": t.start_center,
                "forward_hit": t.forward_hit,
                "forward_final_norm": t.forward_final_norm,
                "forward_rate": t.forward_rate,
                "backward_hit": t.backward_hit,
                "backward_final_distance": t.backward_final_distance,
                "min_box_margin": t.min_box_margin,
                "period2": t.period2,
            });
            (t.converged(), summary)
        }
    };
    let verdict = OracleVerdict { task: a.task, lambda: format_rational(&lambda), pass, detail };
    write_json(&h, &verdict, pick(a.common.out.clone(), f.out).as_deref())?;
    Ok(if pass { EXIT_OK } else { EXIT_ORACLE })
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let f = RunConfig::load(a.common.config.as_deref())?;
    let cfg = pipeline_config(&a.pipeline, &f)?;
    let e_r = cfg.e_r()?;
    let e_k = cfg.e_k()?;
    let grid = cfg.grid();
    let reports = crate::rdt_app::sweep_reports(&grid, e_r, e_k)?;
    let accepted = reports.iter().all(|r| r.accepted);
    eprintln!("{} of {} grid points accepted", reports.iter().filter(|r| r.accepted).count(), reports.len());
    let h = header("sweep", &cfg)?;
    if let Some(p) = pick(a.csv.clone(), f.csv.clone()) {
        write_csv(&h, &reports_csv(&reports), &p)?;
    }
    write_json(&h, &reports, pick(a.common.out.clone(), f.out).as_deref())?;
    Ok(if accepted { EXIT_OK } else { EXIT_CERTIFICATION })
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Rdt(a) => cmd_rdt(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = T>, T: Into<OsString> + Clone>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
