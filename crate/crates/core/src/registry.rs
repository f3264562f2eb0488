//! Named example pipelines with their checks and plot data.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::current::{current_residual, extract_all, extract_velocity, max_abs, speed_identity};
use crate::error::{Error, Result};
use crate::io::{self, fmt_float, write_csv};
use crate::lift::{
    build_lift, build_lift_on_grid, canonical_lift, check_marginals, geodesic_lift_check, jump_balance,
    lift_metric_speed, lift_variation, map_lift, Lift, LiftAtom, IDENTITY_TOL, MARGINAL_TOL,
};
use crate::report::{all_passed, Check};
use crate::space::{line_space, DiscreteMeasure, MetricSpace};
use crate::curves::StepCurve;
use crate::transport::{is_optimal, w1_distance, w1_line_oracle, Coupling};
use crate::wcurves::{
    cantor, curve_variation, decompose_variation, dyadic_grid, is_bv_geodesic, is_constant_speed, metric_derivative,
    uniform_grid, Generator, MeasureCurve, PeriodicSigma,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleName {
    NonuniqueLifts,
    AcNotEnough,
    Slice2d,
    CantorCs,
    PeriodicSigma,
}

impl ExampleName {
    pub const ALL: [ExampleName; 5] = [
        ExampleName::NonuniqueLifts,
        ExampleName::AcNotEnough,
        ExampleName::Slice2d,
        ExampleName::CantorCs,
        ExampleName::PeriodicSigma,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleName::NonuniqueLifts => "nonunique_lifts",
            ExampleName::AcNotEnough => "ac_not_enough",
            ExampleName::Slice2d => "slice2d",
            ExampleName::CantorCs => "cantor_cs",
            ExampleName::PeriodicSigma => "periodic_sigma",
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown example {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Uniform,
    Dirac,
    Cantor,
}

impl FromStr for SigmaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SigmaKind::Uniform),
            "dirac" => Ok(SigmaKind::Dirac),
            "cantor" => Ok(SigmaKind::Cantor),
            _ => Err(Error::input(format!("unknown sigma0 {s:?}; expected uniform, dirac or cantor"))),
        }
    }
}

/// Overrides for the example defaults. Unset fields take the defaults of
/// the chosen example.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub eps: Option<f64>,
    pub y: Option<f64>,
    pub depth: Option<u32>,
    pub sigma: Option<SigmaKind>,
    /// Offsets of the periodic sigma grid, for uniform and Dirac sigma0.
    pub sigma_grid: Option<usize>,
    /// Cells of the base time grid.
    pub grid: Option<usize>,
    /// Dyadic lift level, or the refinement depth of a decomposition.
    pub level: Option<u32>,
    /// Cells of the spatial discretisation.
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub name: ExampleName,
    #[serde(default)]
    pub params: ExampleParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleReport {
    pub name: ExampleName,
    /// Parameters after defaults were applied.
    pub params: ExampleParams,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// CSV files written, relative to the output directory.
    pub artifacts: Vec<String>,
}

struct Sink<'a> {
    dir: Option<&'a Path>,
    written: Vec<String>,
}

impl Sink<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        if let Some(dir) = self.dir {
            write_csv(&dir.join(name), header, rows)?;
            self.written.push(name.to_string());
        }
        Ok(())
    }
}

pub fn run_example(spec: &ExampleSpec, out: Option<&Path>) -> Result<ExampleReport> {
    let mut sink = Sink { dir: out, written: Vec::new() };
    let p = &spec.params;
    let (params, checks) = match spec.name {
        ExampleName::NonuniqueLifts => nonunique_lifts(p, &mut sink)?,
        ExampleName::AcNotEnough => ac_not_enough(p, &mut sink)?,
        ExampleName::Slice2d => slice2d(p, &mut sink)?,
        ExampleName::CantorCs => cantor_cs(p, &mut sink)?,
        ExampleName::PeriodicSigma => periodic_sigma(p, &mut sink)?,
    };
    Ok(ExampleReport { name: spec.name, params, passed: all_passed(&checks), checks, artifacts: sink.written })
}

fn reject(p: &ExampleParams, name: ExampleName, allowed: &[&str]) -> Result<()> {
    let set = [
        ("eps", p.eps.is_some()),
        ("y", p.y.is_some()),
        ("depth", p.depth.is_some()),
        ("sigma", p.sigma.is_some()),
        ("sigma_grid", p.sigma_grid.is_some()),
        ("grid", p.grid.is_some()),
        ("level", p.level.is_some()),
        ("cells", p.cells.is_some()),
    ];
    match set.iter().find(|(k, on)| *on && !allowed.contains(k)) {
        Some((k, _)) => Err(Error::input(format!("parameter {k} does not apply to {name}"))),
        None => Ok(()),
    }
}

fn level_in(level: u32, lo: u32, hi: u32) -> Result<u32> {
    if (lo..=hi).contains(&level) {
        Ok(level)
    } else {
        Err(Error::input(format!("level {level} outside {lo}..={hi}")))
    }
}

/// The six-point instance with uniform endpoints on `[-2, -1]` and `[1, 2]`.
pub fn nonunique_instance(level: u32) -> Result<(MeasureCurve, DiscreteMeasure)> {
    let space = line_space(&[-2.0, -1.5, -1.0, 1.0, 1.5, 2.0])?;
    let mu0 = DiscreteMeasure::uniform_on(6, &[0, 1, 2])?;
    let mu1 = DiscreteMeasure::uniform_on(6, &[3, 4, 5])?;
    let g = Generator::Linear { mu0: mu0.clone(), mu1 };
    Ok((MeasureCurve::from_generator(g, Some(space), dyadic_grid(level))?, mu0))
}

/// Monotone and order-reversing transport maps of the six-point instance.
pub const NONUNIQUE_MAPS: [[usize; 6]; 2] = [[3, 4, 5, 3, 4, 5], [5, 4, 3, 3, 4, 5]];

fn nonunique_lifts(p: &ExampleParams, sink: &mut Sink) -> Result<(ExampleParams, Vec<Check>)> {
    reject(p, ExampleName::NonuniqueLifts, &["level"])?;
    let level = level_in(p.level.unwrap_or(6), 1, 12)?;
    let (mc, mu0) = nonunique_instance(level)?;
    let space = mc.space();
    let mut checks = Vec::new();

    let w = w1_distance(space, mc.first(), mc.last())?;
    checks.push(Check::eq("w1(mu0, mu1)", w, 3.0, 1e-9));
    checks.push(Check::eq("w1 line oracle", w1_line_oracle(space, mc.first(), mc.last())?, 3.0, 1e-9));
    let product = Coupling::product(mc.first(), mc.last());
    checks.push(Check::holds("product coupling is optimal", is_optimal(space, &product, 1e-9)?));

    let mono = map_lift(&mu0, &NONUNIQUE_MAPS[0], level)?;
    let rev = map_lift(&mu0, &NONUNIQUE_MAPS[1], level)?;
    let built = build_lift(&mc, level)?;
    checks.push(Check::holds("monotone and reversed lifts differ", !mono.same_atoms(&rev, 1e-12)));
    for (name, lift) in [("monotone", &mono), ("reversed", &rev), ("built", &built)] {
        checks.push(Check::le(format!("{name}: marginal error"), check_marginals(lift, &mc), 0.0, MARGINAL_TOL));
        checks.push(Check::eq(format!("{name}: lift variation"), lift_variation(lift, space).total, w, 1e-9));
        let g = geodesic_lift_check(lift, &mc, 1e-9)?;
        checks.push(Check::eq(format!("{name}: geodesic fraction"), g.fraction, 1.0, 1e-9));
        checks.push(Check::le(format!("{name}: endpoint gap"), g.gap, 0.0, 1e-9));
    }
    sink.csv("nonunique_monotone_lift.csv", &io::LIFT_HEADER, io::lift_rows(&mono))?;
    sink.csv("nonunique_reversed_lift.csv", &io::LIFT_HEADER, io::lift_rows(&rev))?;
    sink.csv("nonunique_curve.csv", &io::MEASURE_HEADER, io::measure_rows(&mc))?;
    Ok((ExampleParams { level: Some(level), ..Default::default() }, checks))
}

/// Points at arclength `k / m` along the unit-length path
/// `(0, 0) -> (1/2, 0) -> (1/2, 1/2)`.
pub fn polyline_space(m: usize) -> Result<MetricSpace> {
    let coords: Vec<Vec<f64>> = (0..=m)
        .map(|k| {
            let s = k as f64 / m as f64;
            if s <= 0.5 {
                vec![s, 0.0]
            } else {
                vec![0.5, s - 0.5]
            }
        })
        .collect();
    MetricSpace::from_coords((0..=m).map(|k| format!("p{k}")).collect(), coords)
}

/// Half a moving point mass from `p_0` to `p_m` plus half the uniform
/// measure on the path.
pub fn ac_not_enough_curve(m: usize) -> Result<MeasureCurve> {
    if m < 2 {
        return Err(Error::input("the path needs at least two cells"));
    }
    let space = polyline_space(m)?;
    let inner: Vec<f64> = (0..=m).map(|k| if k == 0 { 0.0 } else { 0.5 / m as f64 }).collect();
    let mut w0 = inner.clone();
    w0[0] += 0.5;
    let mut w1 = inner;
    w1[m] += 0.5;
    let g = Generator::Linear { mu0: DiscreteMeasure::new(w0)?, mu1: DiscreteMeasure::new(w1)? };
    MeasureCurve::from_generator(g, Some(space), uniform_grid(m))
}

/// The lift that moves along the path one point per time step: half the
/// mass waits at `p_0` and then walks, half walks and then waits at `p_m`.
pub fn path_walking_lift(m: usize) -> Result<Lift> {
    let grid = uniform_grid(m);
    let w = 0.5 / m as f64;
    let mut atoms = Vec::with_capacity(2 * m);
    for a in 0..m {
        let path: Vec<usize> = (0..=m).map(|s| s.saturating_sub(a)).collect();
        atoms.push(LiftAtom { curve: StepCurve::from_grid_path(&grid, &path)?, weight: w });
    }
    for a in 1..=m {
        let path: Vec<usize> = (0..=m).map(|s| (s + a).min(m)).collect();
        atoms.push(LiftAtom { curve: StepCurve::from_grid_path(&grid, &path)?, weight: w });
    }
    Lift::new(atoms)
}

fn max_jump(lift: &Lift, space: &MetricSpace) -> f64 {
    lift.atoms()
        .iter()
        .flat_map(|a| a.curve.jumps().map(|(_, x, y)| space.d(x, y)))
        .fold(0.0, f64::max)
}

fn ac_not_enough(p: &ExampleParams, sink: &mut Sink) -> Result<(ExampleParams, Vec<Check>)> {
    reject(p, ExampleName::AcNotEnough, &["cells"])?;
    let m = p.cells.unwrap_or(8);
    let mc = ac_not_enough_curve(m)?;
    let space = mc.space();
    let mut checks = Vec::new();
    let chord = space.d(0, m);
    let var = curve_variation(&mc)?;
    checks.push(Check::eq("w1(mu0, mu1)", w1_distance(space, mc.first(), mc.last())?, 0.5 * chord, 1e-9));
    checks.push(Check::holds("curve is a BV-geodesic", is_bv_geodesic(&mc, 1e-9)?));
    checks.push(Check::holds("curve has constant speed", is_constant_speed(&mc, 1e-9)?));

    let walk = path_walking_lift(m)?;
    let walk_var = lift_variation(&walk, space).total;
    checks.push(Check::le("path-walking lift: marginal error", check_marginals(&walk, &mc), 0.0, MARGINAL_TOL));
    checks.push(Check::eq("path-walking lift: variation (half the path length)", walk_var, 0.5, 1e-9));
    checks.push(Check::ge("path-walking lift: excess over curve variation", walk_var - var, 1e-3, 0.0));
    checks.push(Check::eq("path-walking lift: largest step", max_jump(&walk, space), 1.0 / m as f64, 1e-12));

    let built = build_lift_on_grid(&mc)?;
    checks.push(Check::le("optimal lift: marginal error", check_marginals(&built, &mc), 0.0, MARGINAL_TOL));
    checks.push(Check::eq("optimal lift: variation", lift_variation(&built, space).total, var, IDENTITY_TOL));
    checks.push(Check::ge("optimal lift: largest jump (teleport p0 -> pM)", max_jump(&built, space), chord, 1e-12));

    sink.csv("ac_not_enough_curve.csv", &io::MEASURE_HEADER, io::measure_rows(&mc))?;
    sink.csv("ac_not_enough_walking_lift.csv", &io::LIFT_HEADER, io::lift_rows(&walk))?;
    sink.csv("ac_not_enough_optimal_lift.csv", &io::LIFT_HEADER, io::lift_rows(&built))?;
    Ok((ExampleParams { cells: Some(m), ..Default::default() }, checks))
}

fn slice2d(p: &ExampleParams, sink: &mut Sink) -> Result<(ExampleParams, Vec<Check>)> {
    reject(p, ExampleName::Slice2d, &["eps", "y", "cells", "grid", "level"])?;
    let eps = p.eps.unwrap_or(0.25);
    let y = p.y.unwrap_or(0.6);
    let cells = p.cells.unwrap_or(20);
    let grid = p.grid.unwrap_or(5);
    let level = level_in(p.level.unwrap_or(10), 5, 14)?;
    let g = Generator::Slice2d { eps, y, cells };
    let mc = MeasureCurve::from_generator(g, None, uniform_grid(grid))?;
    let space = mc.space().clone();
    let jump = 0.5 * (1.0 - eps);
    let mut checks = Vec::new();

    let profile = decompose_variation(&mc, level)?;
    checks.push(Check::eq("decomposition: number of atoms", profile.atom_estimates.len() as f64, 1.0, 0.0));
    if let Some(a) = profile.atom_estimates.first() {
        checks.push(Check::eq("decomposition: atom mass", a.mass, jump, 1e-6));
        checks.push(Check::holds(
            format!("decomposition: atom cell [{}, {}] touches y", a.lo, a.hi),
            a.lo <= y && y <= a.hi,
        ));
    }
    checks.push(Check::le("decomposition: AC mass", profile.ac_mass, 0.0, 1e-9));
    checks.push(Check::eq(
        "decomposition: atoms + AC + residual",
        profile.atom_mass + profile.ac_mass + profile.residual_estimate,
        profile.refined_variation,
        profile.tolerance.abs() + 1e-12,
    ));

    let dyadic = mc.resample(dyadic_grid(level))?;
    let lift = build_lift_on_grid(&dyadic)?;
    let delta = 1.0 / (1u64 << level) as f64;
    let jb = jump_balance(&lift, &space, &profile, y, delta)?;
    checks.push(Check::eq("jump balance: lhs", jb.lhs, jump, 1e-6));
    checks.push(Check::eq("jump balance: rhs", jb.rhs, jump, 1e-6));
    checks.push(Check::le("jump balance: |lhs - rhs|", jb.difference(), 0.0, 1e-6));
    checks.push(Check::le("lift: marginal error", check_marginals(&lift, &dyadic), 0.0, MARGINAL_TOL));
    let single = lift.atoms().iter().all(|a| {
        a.curve.n_jumps() == 0 || (a.curve.n_jumps() == 1 && (a.curve.jump_times()[0] - y).abs() <= delta)
    });
    checks.push(Check::holds("lift: every atom constant or one jump next to y", single));

    // the step whose cell contains y
    let i = dyadic.grid().partition_point(|&t| t <= y).saturating_sub(1);
    let v = extract_velocity(&lift, &dyadic, i)?;
    let strip = (eps * cells as f64).round() as usize;
    let horizontal = v.entries.keys().all(|&(a, b)| a < strip && b >= cells - strip);
    checks.push(Check::holds("velocity at the jump: left strip to right strip only", horizontal && !v.entries.is_empty()));
    checks.push(Check::le("velocity at the jump: residual", max_abs(&current_residual(&dyadic, &v)?), 0.0, 1e-9));
    let s = speed_identity(&dyadic, &v)?;
    checks.push(Check::eq("velocity at the jump: metric speed", s.rhs, s.lhs, 1e-6 * s.lhs.max(1.0)));

    sink.csv("slice2d_profile.csv", &io::PROFILE_HEADER, io::profile_rows(&profile))?;
    sink.csv("slice2d_velocity.csv", &io::VELOCITY_HEADER, io::velocity_rows(&space, &[v]))?;
    let snapshots = mc.resample(vec![0.0, 0.4, 0.8, 1.0])?;
    sink.csv("slice2d_snapshots.csv", &io::MEASURE_HEADER, io::measure_rows(&snapshots))?;
    let params = ExampleParams {
        eps: Some(eps),
        y: Some(y),
        cells: Some(cells),
        grid: Some(grid),
        level: Some(level),
        ..Default::default()
    };
    Ok((params, checks))
}

/// Interior points of removed middle thirds with a step that stays inside.
pub const CANTOR_PLATEAUS: [(f64, f64); 4] = [(0.5, 0.125), (0.5, -0.125), (0.15, 0.05), (0.8, 0.05)];

fn cantor_cs(p: &ExampleParams, sink: &mut Sink) -> Result<(ExampleParams, Vec<Check>)> {
    reject(p, ExampleName::CantorCs, &["depth", "level"])?;
    let depth = p.depth.unwrap_or(8);
    if depth > 20 {
        return Err(Error::input(format!("cantor depth {depth} too large")));
    }
    let level = level_in(p.level.unwrap_or(8), 1, 14)?;
    let g = Generator::Cantor { depth };
    let mc = MeasureCurve::from_generator(g.clone(), None, dyadic_grid(level))?;
    let space = mc.space().clone();
    let mut checks = Vec::new();
    checks.push(Check::eq("variation on the dyadic grid", curve_variation(&mc)?, 1.0, 1e-9));
    let triadic = MeasureCurve::from_generator(g.clone(), None, uniform_grid(3usize.pow(depth.min(6))))?;
    checks.push(Check::eq("variation on the triadic grid", curve_variation(&triadic)?, 1.0, 1e-9));
    if depth >= 2 {
        for (t, h) in CANTOR_PLATEAUS {
            checks.push(Check::le(format!("metric derivative at t = {t}, h = {h}"), metric_derivative(&mc, t, h)?, 0.0, 1e-12));
        }
    }
    let coarse = MeasureCurve::from_generator(g.clone(), None, uniform_grid(9))?;
    checks.push(Check::holds("not constant speed", !is_constant_speed(&coarse, 1e-6)?));

    let base = MeasureCurve::from_generator(g, None, uniform_grid(2))?;
    let profile = decompose_variation(&base, 10)?;
    let bound = 1.0 - (2.0f64 / 3.0).powi(depth as i32);
    checks.push(Check::ge("decomposition: residual", profile.residual_estimate, bound, 1e-6));
    checks.push(Check::le("decomposition: atom mass", profile.atom_mass, 0.0, 1e-9));

    let lift = build_lift(&mc, level)?;
    checks.push(Check::le("lift: marginal error", check_marginals(&lift, &mc), 0.0, MARGINAL_TOL));
    checks.push(Check::eq("lift: variation", lift_variation(&lift, &space).total, 1.0, IDENTITY_TOL));
    let jumps_only = lift.atoms().iter().all(|a| a.curve.n_jumps() == 1 && a.curve.values() == [0, 1]);
    checks.push(Check::holds("lift: every atom is a single jump 0 -> 1", jumps_only));

    let fine = dyadic_grid(10);
    let rows = fine.iter().map(|&t| vec![fmt_float(t), fmt_float(cantor(t, depth))]).collect();
    sink.csv("cantor_function.csv", &["t", "c"], rows)?;
    sink.csv("cantor_profile.csv", &io::PROFILE_HEADER, io::profile_rows(&profile))?;
    Ok((ExampleParams { depth: Some(depth), level: Some(level), ..Default::default() }, checks))
}

/// Sigma0 of the given kind with its default aligned time grid.
pub fn periodic_instance(kind: SigmaKind, sigma_grid: usize, depth: u32) -> Result<(PeriodicSigma, usize)> {
    Ok(match kind {
        SigmaKind::Uniform => (PeriodicSigma::uniform(sigma_grid)?, sigma_grid),
        SigmaKind::Dirac => (PeriodicSigma::dirac(sigma_grid)?, sigma_grid),
        SigmaKind::Cantor => (PeriodicSigma::cantor(depth)?, 3usize.pow(depth.min(4))),
    })
}

/// Checks shared by every periodic sigma curve on a grid aligned with its
/// offsets.
pub fn periodic_checks(sigma: &PeriodicSigma, mc: &MeasureCurve, tag: &str) -> Result<(Vec<Check>, Lift)> {
    let space = mc.space();
    let mut checks = Vec::new();
    checks.push(Check::holds(format!("{tag}: BV-geodesic"), is_bv_geodesic(mc, 1e-6)?));
    checks.push(Check::holds(format!("{tag}: constant speed"), is_constant_speed(mc, 1e-6)?));
    let canonical = canonical_lift(sigma)?;
    let built = build_lift_on_grid(mc)?;
    for (name, lift) in [("translation lift", &canonical), ("built lift", &built)] {
        checks.push(Check::le(format!("{tag}, {name}: marginal error"), check_marginals(lift, mc), 0.0, MARGINAL_TOL));
        checks.push(Check::eq(format!("{tag}, {name}: variation"), lift_variation(lift, space).total, 1.0, IDENTITY_TOL));
        let g = geodesic_lift_check(lift, mc, 1e-6)?;
        checks.push(Check::eq(format!("{tag}, {name}: geodesic fraction"), g.fraction, 1.0, 1e-9));
        checks.push(Check::le(format!("{tag}, {name}: endpoint gap"), g.gap, 0.0, 1e-6));
    }
    let worst = mc
        .grid()
        .windows(2)
        .map(|w| (lift_metric_speed(&built, space, w[0], w[1]) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::le(format!("{tag}, built lift: metric speed deviation from W1"), worst, 0.0, 1e-6));
    let fields = extract_all(&built, mc)?;
    let mut res: f64 = 0.0;
    for v in &fields.steps {
        res = res.max(max_abs(&current_residual(mc, v)?));
    }
    checks.push(Check::le(format!("{tag}: current residual"), res, 0.0, 1e-9));
    Ok((checks, canonical))
}

fn periodic_sigma(p: &ExampleParams, sink: &mut Sink) -> Result<(ExampleParams, Vec<Check>)> {
    reject(p, ExampleName::PeriodicSigma, &["sigma", "sigma_grid", "depth", "grid"])?;
    let kinds = match p.sigma {
        Some(k) => vec![k],
        None => vec![SigmaKind::Uniform, SigmaKind::Dirac, SigmaKind::Cantor],
    };
    let sigma_grid = p.sigma_grid.unwrap_or(16);
    let depth = p.depth.unwrap_or(8);
    let mut checks = Vec::new();
    for kind in &kinds {
        let (sigma, default_cells) = periodic_instance(*kind, sigma_grid, depth)?;
        let cells = p.grid.unwrap_or(default_cells);
        if cells == 0 || sigma.grid() % cells != 0 {
            return Err(Error::input(format!(
                "time grid of {cells} cells is not aligned with the {} sigma offsets",
                sigma.grid()
            )));
        }
        let tag = format!("{kind:?}").to_lowercase();
        let mc = MeasureCurve::from_generator(Generator::PeriodicSigma(sigma.clone()), None, uniform_grid(cells))?;
        let (mut c, canonical) = periodic_checks(&sigma, &mc, &tag)?;
        let n = mc.space().len();
        match kind {
            SigmaKind::Dirac => {
                let worst = mc
                    .grid()
                    .iter()
                    .zip(mc.measures())
                    .map(|(&t, mu)| {
                        DiscreteMeasure::mix(&DiscreteMeasure::dirac(n, 0), &DiscreteMeasure::dirac(n, n - 1), t)
                            .map(|m| m.tv_distance(mu))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                c.push(Check::le("dirac: distance to (1 - t) delta_0 + t delta_1", worst, 0.0, 1e-12));
                let unit = canonical.atoms().iter().all(|a| a.curve.n_jumps() == 1 && a.curve.values() == [0, n - 1]);
                c.push(Check::holds("dirac: every translation curve is one unit jump", unit));
            }
            SigmaKind::Uniform => {
                let worst = mc
                    .grid()
                    .iter()
                    .zip(mc.measures())
                    .map(|(&t, mu)| 1.0 - mu.get((t * (n - 1) as f64).round() as usize))
                    .fold(0.0, f64::max);
                c.push(Check::le("uniform: distance to delta_t", worst, 0.0, 1e-12));
            }
            SigmaKind::Cantor => {
                let big = max_jump(&canonical, mc.space());
                let q = (n - 1) as f64;
                c.push(Check::eq("cantor: largest jump of a translation curve", big, 1.0 / q, 1e-12));
            }
        }
        checks.extend(c);

        let pts = 2 * sigma.grid();
        let rows = (0..pts)
            .map(|j| {
                let m = sigma.counts[j % sigma.grid()] as f64 / sigma.total() as f64;
                vec![fmt_float(j as f64 / sigma.grid() as f64), fmt_float(m)]
            })
            .collect();
        sink.csv(&format!("periodic_{tag}_sigma.csv"), &["x", "mass"], rows)?;
        let stride = (sigma.grid() / 8).max(1);
        let q = sigma.total() as f64;
        let mut traj = Vec::new();
        for (a, atom) in canonical.atoms().iter().enumerate().step_by(stride) {
            let alpha = fmt_float(a as f64 / sigma.grid() as f64);
            traj.push(vec![alpha.clone(), fmt_float(0.0), fmt_float(atom.curve.initial() as f64 / q)]);
            for (t, _, y) in atom.curve.jumps() {
                traj.push(vec![alpha.clone(), fmt_float(t), fmt_float(y as f64 / q)]);
            }
        }
        sink.csv(&format!("periodic_{tag}_trajectories.csv"), &["alpha", "t", "value"], traj)?;
    }
    let params = ExampleParams {
        sigma: (kinds.len() == 1).then(|| kinds[0]),
        sigma_grid: Some(sigma_grid),
        depth: Some(depth),
        grid: p.grid,
        ..Default::default()
    };
    Ok((params, checks))
}
