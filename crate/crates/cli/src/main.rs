//! `bvlift`: metric checks, W1 transport, lifts, currents and the example
//! and acceptance runners.
//!
//! Exit codes: 0 when every check passes, 1 on a verification failure,
//! 2 on bad input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use bvlift::current::{current_residual, extract_all, max_abs, speed_identity, RESIDUAL_TOL};
use bvlift::io::{self, read_json, to_json, write_csv, write_json, CurveFile};
use bvlift::lift::{
    adversarial_lift, build_lift, build_lift_on_grid, check_marginals, check_superposition_bound, dyadic_intervals,
    geodesic_lift_check, lift_variation, Lift,
};
use bvlift::registry::{run_example, ExampleName, ExampleParams, ExampleSpec, SigmaKind};
use bvlift::space::{DiscreteMeasure, SpaceDescriptor};
use bvlift::suite::run_suite;
use bvlift::transport::{w1, CouplingEntry};
use bvlift::wcurves::{curve_variation, decompose_variation, increments, is_bv_geodesic, is_constant_speed, MeasureCurve};

#[derive(Parser)]
#[command(name = "bvlift", version, about = "Lifts of BV curves of measures on finite metric spaces")]
struct Cli {
    /// Print the full JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for the JSON report and CSV artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric space checks.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Wasserstein-1 transport.
    #[command(subcommand)]
    W1(W1Cmd),
    /// Build or verify a lift of a curve of measures.
    #[command(subcommand)]
    Lift(LiftCmd),
    /// Variation, decomposition and geodesic checks of a curve.
    #[command(subcommand)]
    Curve(CurveCmd),
    /// Velocity fields of a lift and the discrete current equation.
    #[command(subcommand)]
    Current(CurrentCmd),
    /// Named example pipelines.
    #[command(subcommand)]
    Example(ExampleCmd),
    /// Run every acceptance criterion.
    Suite,
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Check the metric axioms of a space file.
    Validate { file: PathBuf },
}

#[derive(Subcommand)]
enum W1Cmd {
    /// W1 between two measures: `{"space": ..., "mu": [...], "nu": [...]}`.
    Dist {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Args)]
struct CurveArgs {
    /// Curve file: explicit samples or a generator.
    curve: PathBuf,
    /// Resample a generator curve on K uniform cells.
    #[arg(long, value_name = "K", conflicts_with = "level")]
    grid: Option<usize>,
    /// Resample a generator curve on the dyadic grid of level N.
    #[arg(long, value_name = "N")]
    level: Option<u32>,
}

impl CurveArgs {
    fn load(&self) -> Result<MeasureCurve> {
        let file: CurveFile = read_json(&self.curve).with_context(|| format!("reading {}", self.curve.display()))?;
        let cells = match (self.grid, self.level) {
            (_, Some(n)) if n > 20 => bail!(bvlift::Error::Input(format!("level {n} too large"))),
            (_, Some(n)) => Some(1usize << n),
            (k, None) => k,
        };
        Ok(file.build(cells)?)
    }
}

#[derive(Subcommand)]
enum LiftCmd {
    /// Glue optimal couplings into a lift; prints the lift JSON unless `--out` is given.
    Build {
        #[command(flatten)]
        curve: CurveArgs,
        /// Replace the optimal coupling on this step by a shuffled one.
        #[arg(long, value_name = "K")]
        perturb_link: Option<usize>,
    },
    /// Check marginals and the superposition bound of a lift.
    Verify {
        #[command(flatten)]
        curve: CurveArgs,
        /// Lift file, as written by `lift build`.
        #[arg(long)]
        lift: PathBuf,
        /// Also require lift variation = curve variation.
        #[arg(long)]
        optimal: bool,
    },
}

#[derive(Subcommand)]
enum CurveCmd {
    /// W1 variation along the grid.
    Var {
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Split the variation into jump, density and residual parts.
    Decompose {
        #[command(flatten)]
        curve: CurveArgs,
        /// Halvings of every base cell.
        #[arg(long, default_value_t = 10)]
        depth: u32,
    },
    /// BV-geodesic and constant-speed checks, and the lift check with `--lift`.
    Geodesic {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long)]
        lift: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum CurrentCmd {
    /// Per-step velocity fields of a lift.
    Extract {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long)]
        lift: PathBuf,
    },
    /// Residual of the current equation and the speed identity at every step.
    Verify {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long)]
        lift: PathBuf,
        #[arg(long, default_value_t = RESIDUAL_TOL)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum ExampleCmd {
    /// Run an example: nonunique_lifts, ac_not_enough, slice2d, cantor_cs or periodic_sigma.
    Run {
        name: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        depth: Option<u32>,
        /// Sigma0 for periodic_sigma: uniform, dirac or cantor.
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long)]
        sigma_grid: Option<usize>,
        #[arg(long, value_name = "K")]
        grid: Option<usize>,
        #[arg(long, value_name = "N")]
        level: Option<u32>,
        #[arg(long)]
        cells: Option<usize>,
    },
}

/// What a command hands back for printing.
struct Outcome {
    json: String,
    summary: Vec<String>,
    passed: bool,
}

impl Outcome {
    fn new<T: Serialize>(report: &T, summary: Vec<String>, passed: bool) -> Result<Self> {
        Ok(Outcome { json: to_json(report)?, summary, passed })
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct ViolationOut {
    axiom: &'static str,
    message: String,
}

#[derive(Serialize)]
struct SpaceReport {
    points: usize,
    valid: bool,
    violations: Vec<ViolationOut>,
}

fn space_validate(file: &Path) -> Result<Outcome> {
    let desc: SpaceDescriptor = read_json(file)?;
    let violations: Vec<ViolationOut> = desc
        .violations()?
        .into_iter()
        .map(|v| ViolationOut { axiom: v.axiom(), message: v.to_string() })
        .collect();
    let valid = violations.is_empty();
    let mut summary = vec![format!("{} metric on {} points", status(valid), desc.labels.len())];
    summary.extend(violations.iter().map(|v| format!("  {}", v.message)));
    let report = SpaceReport { points: desc.labels.len(), valid, violations };
    Outcome::new(&report, summary, valid)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct W1Input {
    space: SpaceDescriptor,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
}

#[derive(Serialize)]
struct W1Report {
    distance: f64,
    coupling: Vec<CouplingEntry>,
    potential: Vec<f64>,
    duality_gap: f64,
    lipschitz_excess: f64,
    tolerance: f64,
    passed: bool,
}

fn w1_dist(file: &Path, tol: f64) -> Result<Outcome> {
    let input: W1Input = read_json(file)?;
    let space = input.space.build()?;
    let t = w1(&space, &input.mu, &input.nu)?;
    let duality_gap = (t.distance - t.certificate.value(&input.mu, &input.nu)).abs();
    let lipschitz_excess = t.certificate.lipschitz_excess(&space).max(0.0);
    let passed = duality_gap <= tol && lipschitz_excess <= tol;
    let summary = vec![
        format!("W1 = {}", t.distance),
        format!("{} duality gap {duality_gap:e}, Lipschitz excess {lipschitz_excess:e} (tol {tol:e})", status(passed)),
    ];
    let report = W1Report {
        distance: t.distance,
        coupling: t.coupling.to_entries(),
        potential: t.certificate.potential.clone(),
        duality_gap,
        lipschitz_excess,
        tolerance: tol,
        passed,
    };
    Outcome::new(&report, summary, passed)
}

/// Level of a uniform dyadic grid.
fn dyadic_level(mc: &MeasureCurve) -> Option<u32> {
    let cells = mc.grid().len() - 1;
    (cells.is_power_of_two() && mc.is_uniform()).then(|| cells.trailing_zeros())
}

fn lift_build(args: &CurveArgs, perturb: Option<usize>, out: Option<&Path>) -> Result<(Outcome, bool)> {
    let mc = args.load()?;
    let lift = match (perturb, dyadic_level(&mc)) {
        (Some(k), Some(level)) => adversarial_lift(&mc, level, k)?,
        (Some(_), None) => bail!(bvlift::Error::Input("--perturb-link needs a dyadic grid; pass --level".into())),
        (None, Some(level)) => build_lift(&mc, level)?,
        (None, None) => build_lift_on_grid(&mc)?,
    };
    let Some(dir) = out else {
        // the lift itself is the output
        return Ok((Outcome { json: to_json(&lift)?, summary: Vec::new(), passed: true }, true));
    };
    write_json(&dir.join("lift.json"), &lift)?;
    write_csv(&dir.join("lift.csv"), &io::LIFT_HEADER, io::lift_rows(&lift))?;
    let var = lift_variation(&lift, mc.space()).total;
    #[derive(Serialize)]
    struct Built {
        atoms: usize,
        variation: f64,
        pruned_mass: f64,
        marginal_error: f64,
    }
    let report = Built { atoms: lift.len(), variation: var, pruned_mass: lift.pruned_mass(), marginal_error: check_marginals(&lift, &mc) };
    let summary = vec![format!(
        "lift with {} atoms, variation {var}, written to {}",
        lift.len(),
        dir.join("lift.json").display()
    )];
    Ok((Outcome::new(&report, summary, true)?, false))
}

fn read_lift(path: &Path) -> Result<Lift> {
    read_json(path).with_context(|| format!("reading lift {}", path.display()))
}

fn lift_verify(args: &CurveArgs, lift: &Path, optimal: bool) -> Result<Outcome> {
    let mc = args.load()?;
    let lift = read_lift(lift)?;
    let intervals = match dyadic_level(&mc) {
        Some(level) => dyadic_intervals(level),
        None => {
            let g = mc.grid();
            let mut iv: Vec<(f64, f64)> = g.windows(2).map(|w| (w[0], w[1])).collect();
            iv.push((g[0], g[g.len() - 1]));
            iv
        }
    };
    let r = check_superposition_bound(&lift, &mc, &intervals, optimal)?;
    let mut summary = vec![format!("{} superposition check on {} intervals", status(r.passed), intervals.len())];
    if !r.certified {
        summary.push(format!("  lift marginals differ from the curve: TV error {:e}", r.marginal_error));
    }
    if let Some(g) = r.equality_gap {
        summary.push(format!("  lift variation - curve variation = {g:e} (tol {:e})", r.tolerance));
    }
    if let Some(w) = &r.witness {
        summary.push(format!(
            "  witness interval ({}, {}]: curve variation {}, lift mass {}, slack {:e}",
            w.a, w.b, w.curve_variation, w.lift_mass, w.slack
        ));
    }
    Outcome::new(&r, summary, r.passed)
}

fn curve_var(args: &CurveArgs) -> Result<Outcome> {
    let mc = args.load()?;
    #[derive(Serialize)]
    struct Var {
        grid: Vec<f64>,
        increments: Vec<f64>,
        variation: f64,
    }
    let r = Var { grid: mc.grid().to_vec(), increments: increments(&mc)?, variation: curve_variation(&mc)? };
    let summary = vec![format!("variation {} over {} cells", r.variation, r.increments.len())];
    Outcome::new(&r, summary, true)
}

fn curve_decompose(args: &CurveArgs, depth: u32, out: Option<&Path>) -> Result<Outcome> {
    let mc = args.load()?;
    let p = decompose_variation(&mc, depth)?;
    if let Some(dir) = out {
        write_csv(&dir.join("profile.csv"), &io::PROFILE_HEADER, io::profile_rows(&p))?;
    }
    let mut summary = vec![
        format!("variation {} (base {}, tolerance {:e})", p.refined_variation, p.base_variation, p.tolerance),
        format!("  jump part {}", p.atom_mass),
        format!("  absolutely continuous part {}", p.ac_mass),
        format!("  residual (Cantor-type) part {}", p.residual_estimate),
    ];
    summary.extend(p.atom_estimates.iter().map(|a| format!("  atom {} in [{}, {}]", a.mass, a.lo, a.hi)));
    Outcome::new(&p, summary, true)
}

fn curve_geodesic(args: &CurveArgs, lift: Option<&Path>, tol: f64) -> Result<Outcome> {
    let mc = args.load()?;
    #[derive(Serialize)]
    struct Geo {
        variation: f64,
        endpoint_w1: f64,
        bv_geodesic: bool,
        constant_speed: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        lift: Option<bvlift::lift::GeodesicLiftReport>,
        tolerance: f64,
        passed: bool,
    }
    let variation = curve_variation(&mc)?;
    let endpoint_w1 = bvlift::transport::w1_distance(mc.space(), mc.first(), mc.last())?;
    let bv_geodesic = is_bv_geodesic(&mc, tol)?;
    let constant_speed = is_constant_speed(&mc, tol)?;
    let lift = lift.map(|p| read_lift(p).and_then(|l| Ok(geodesic_lift_check(&l, &mc, tol)?))).transpose()?;
    let passed = bv_geodesic && lift.as_ref().is_none_or(|l| l.passed);
    let mut summary = vec![
        format!("{} BV-geodesic: variation {variation}, W1(endpoints) {endpoint_w1}", status(bv_geodesic)),
        format!("     constant speed: {constant_speed}"),
    ];
    if let Some(l) = &lift {
        summary.push(format!("{} lift: geodesic fraction {}, endpoint gap {:e}", status(l.passed), l.fraction, l.gap));
    }
    Outcome::new(&Geo { variation, endpoint_w1, bv_geodesic, constant_speed, lift, tolerance: tol, passed }, summary, passed)
}

fn current_extract(args: &CurveArgs, lift: &Path, out: Option<&Path>) -> Result<Outcome> {
    let mc = args.load()?;
    let field = extract_all(&read_lift(lift)?, &mc)?;
    if let Some(dir) = out {
        write_csv(&dir.join("velocity.csv"), &io::VELOCITY_HEADER, io::velocity_rows(mc.space(), &field.steps))?;
    }
    let entries: usize = field.steps.iter().map(|s| s.entries.len()).sum();
    let summary = vec![format!("{} steps, {entries} nonzero rates", field.steps.len())];
    Outcome::new(&field, summary, true)
}

#[derive(Serialize)]
struct StepCheck {
    step: usize,
    t: f64,
    residual: f64,
    metric_speed: f64,
    action: f64,
}

#[derive(Serialize)]
struct CurrentReport {
    steps: Vec<StepCheck>,
    max_residual: f64,
    tolerance: f64,
    passed: bool,
}

fn current_verify(args: &CurveArgs, lift: &Path, tol: f64) -> Result<Outcome> {
    let mc = args.load()?;
    let field = extract_all(&read_lift(lift)?, &mc)?;
    let mut steps = Vec::with_capacity(field.steps.len());
    for v in &field.steps {
        let s = speed_identity(&mc, v)?;
        steps.push(StepCheck { step: v.step, t: v.t, residual: max_abs(&current_residual(&mc, v)?), metric_speed: s.lhs, action: s.rhs });
    }
    let max_residual = steps.iter().map(|s| s.residual).fold(0.0, f64::max);
    let passed = max_residual <= tol;
    let excess = steps.iter().map(|s| s.action - s.metric_speed).fold(0.0, f64::max);
    let summary = vec![
        format!("{} max current residual {max_residual:e} (tol {tol:e})", status(passed)),
        format!("     largest action excess over metric speed {excess:e}"),
    ];
    Outcome::new(&CurrentReport { steps, max_residual, tolerance: tol, passed }, summary, passed)
}

fn example(cmd: ExampleCmd, out: Option<&Path>) -> Result<Outcome> {
    let ExampleCmd::Run { name, eps, y, depth, sigma, sigma_grid, grid, level, cells } = cmd;
    let name: ExampleName = name.parse()?;
    let sigma = sigma.map(|s| s.parse::<SigmaKind>()).transpose()?;
    let params = ExampleParams { eps, y, depth, sigma, sigma_grid, grid, level, cells };
    let r = run_example(&ExampleSpec { name, params }, out)?;
    let mut summary = vec![format!("{} example {}", status(r.passed), r.name)];
    summary.extend(r.checks.iter().map(|c| format!("  {} {}: {}", status(c.passed), c.name, c.value)));
    summary.extend(r.artifacts.iter().map(|a| format!("  wrote {a}")));
    Outcome::new(&r, summary, r.passed)
}

fn suite() -> Result<Outcome> {
    let r = run_suite();
    let mut summary = Vec::new();
    for c in &r.criteria {
        summary.push(format!("{} criterion {}: {}", status(c.passed), c.id, c.name));
        for k in c.checks.iter().filter(|k| !k.passed) {
            summary.push(format!("  FAIL {}: {} [{}]", k.name, k.value, k.witness.as_deref().unwrap_or("")));
        }
    }
    Outcome::new(&r, summary, r.passed)
}

fn run(cli: Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut raw = false;
    let outcome = match cli.command {
        Command::Space(SpaceCmd::Validate { file }) => space_validate(&file)?,
        Command::W1(W1Cmd::Dist { file, tol }) => w1_dist(&file, tol)?,
        Command::Lift(LiftCmd::Build { curve, perturb_link }) => {
            let (o, is_raw) = lift_build(&curve, perturb_link, out)?;
            raw = is_raw;
            o
        }
        Command::Lift(LiftCmd::Verify { curve, lift, optimal }) => lift_verify(&curve, &lift, optimal)?,
        Command::Curve(CurveCmd::Var { curve }) => curve_var(&curve)?,
        Command::Curve(CurveCmd::Decompose { curve, depth }) => curve_decompose(&curve, depth, out)?,
        Command::Curve(CurveCmd::Geodesic { curve, lift, tol }) => curve_geodesic(&curve, lift.as_deref(), tol)?,
        Command::Current(CurrentCmd::Extract { curve, lift }) => current_extract(&curve, &lift, out)?,
        Command::Current(CurrentCmd::Verify { curve, lift, tol }) => current_verify(&curve, &lift, tol)?,
        Command::Example(cmd) => example(cmd, out)?,
        Command::Suite => suite()?,
    };
    if let (Some(dir), false) = (out, raw) {
        fs::write(dir.join("report.json"), &outcome.json)?;
    }
    if cli.json || raw {
        print!("{}", outcome.json);
    } else {
        for line in &outcome.summary {
            println!("{line}");
        }
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
