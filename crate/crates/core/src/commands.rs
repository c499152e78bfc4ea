//! The work behind each CLI verb. Every runner validates its config
//! blocks, computes, and writes its outputs into `output_dir`. Output
//! depends only on the config and its seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    absorbing_radius, absorbing_time, bound_report, optimize_bound, rde_absorbing_envelope, rde_constants,
    rfde_constants, BoundReport, EnvelopeParams, M1Choice, Optimum, SqueezeConstants, Target, Variant,
};
use crate::boxdim::{box_counting_dim, geometric_eps, sample_attractor, BoxCount};
use crate::charroots::{coverage_floor, ordered_spectrum_with, scalar_spectrum, SignConvention, SpectrumTable};
use crate::config::{positive, ConstantsSource, Model, RunConfig};
use crate::covering::{build_net, covering_bound, verify_covering, CoverReport, Net, NetOptions, NormSpec};
use crate::error::{Error, Result};
use crate::history::HistorySegment;
use crate::sim::{check_absorbing, check_envelope, check_squeeze, DichotomyInputs, Flow, RdeParams, RfdeParams, Simulator, Violation};
use crate::spectral::{
    build_decomposition, fit_dichotomy_k, random_segment, trial_rng, validate_dichotomy, DecompositionSummary,
    DelayModes, DichotomyFit, DichotomyValidation, SpectralDecomposition,
};

// Seed salts keep the random streams of different stages apart.
const VALIDATION_SALT: u64 = 0x7661_6c69_6461_7465;
const SIMULATE_SALT: u64 = 0x7369_6d75;
const SQUEEZE_SALT: u64 = 0x7371_7565_657a_65;
const ABSORB_SALT: u64 = 0x6162_736f_7262;
const BOXDIM_SALT: u64 = 0x626f_7864_696d;

/// Allowed excess of the empirical box-counting estimate over the fractal
/// bound in the pipeline's consistency check.
pub const CONSISTENCY_MARGIN: f64 = 0.2;
/// Largest net whose centers are written out.
const CENTER_CSV_LIMIT: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Roots,
    Bounds,
    Optimize,
    Simulate,
    SqueezeCheck,
    AbsorbingCheck,
    Boxdim,
    CoverCheck,
    Pipeline,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Success,
    /// No dimension bound could be evaluated; carries the reasons.
    Infeasible(String),
}

#[derive(Clone, Debug)]
pub struct CommandResult {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    /// One line for the terminal.
    pub summary: String,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<CommandResult> {
    match cmd {
        Command::Roots => cmd_roots(cfg),
        Command::Bounds => cmd_bounds(cfg),
        Command::Optimize => cmd_optimize(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::SqueezeCheck => cmd_squeeze(cfg),
        Command::AbsorbingCheck => cmd_absorbing(cfg),
        Command::Boxdim => cmd_boxdim(cfg),
        Command::CoverCheck => cmd_cover(cfg),
        Command::Pipeline => cmd_pipeline(cfg),
    }
}

/// Collects the files a command writes.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn done(self, outcome: Outcome, summary: String) -> CommandResult {
        CommandResult { outcome, files: self.files, summary }
    }
}

// ---------------------------------------------------------------- spectrum

fn convention(cfg: &RunConfig) -> SignConvention {
    if cfg.spectrum.paper_sign {
        SignConvention::Paper
    } else {
        SignConvention::Physical
    }
}

/// Ordered RDE spectrum per the `spectrum` block.
pub fn rde_spectrum(cfg: &RunConfig, p: &RdeParams) -> Result<SpectrumTable> {
    let max_mode = cfg.spectrum.max_mode.unwrap_or(p.num_modes);
    let floor = cfg.spectrum.floor.unwrap_or_else(|| coverage_floor(p.a, p.b, p.r, max_mode));
    ordered_spectrum_with(p.a, p.b, p.r, max_mode, floor, convention(cfg))
}

#[derive(Clone, Debug, Serialize)]
struct SpectrumSummary {
    convention: SignConvention,
    max_mode: usize,
    floor: f64,
    complete: bool,
    rhos: Vec<f64>,
    multiplicities: Vec<usize>,
    cumulative: Vec<usize>,
}

impl From<&SpectrumTable> for SpectrumSummary {
    fn from(s: &SpectrumTable) -> Self {
        Self {
            convention: s.convention,
            max_mode: s.truncation.max_mode,
            floor: s.truncation.floor,
            complete: s.truncation.complete,
            rhos: s.rhos.clone(),
            multiplicities: s.multiplicities.clone(),
            cumulative: s.cumulative.clone(),
        }
    }
}

pub fn cmd_roots(cfg: &RunConfig) -> Result<CommandResult> {
    let p = cfg.rde()?;
    let table = rde_spectrum(cfg, p)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.write("spectrum.csv", |w| table.write_csv(w))?;
    out.json("spectrum.json", &table)?;
    let summary = format!("{} spectral levels above {:.6}", table.len(), table.truncation.floor);
    Ok(out.done(Outcome::Success, summary))
}

// ----------------------------------------------------------- decomposition

/// A fitted RDE splitting with its held-out check.
pub struct FittedDecomposition {
    pub decomp: SpectralDecomposition,
    pub validation: DichotomyValidation,
}

/// Builds the RDE splitting at `decomposition.m`, fits K on random and
/// extremal histories and re-checks it on held-out trials.
pub fn rde_decomposition(cfg: &RunConfig, p: &RdeParams) -> Result<FittedDecomposition> {
    cfg.validate_decomposition()?;
    if cfg.spectrum.paper_sign {
        return Err(Error::Config("the spectral splitting needs the physical sign convention".into()));
    }
    let plan = &cfg.decomposition;
    let spectrum = rde_spectrum(cfg, p)?;
    if spectrum.truncation.max_mode > p.num_modes {
        return Err(Error::Config(format!(
            "spectrum.max_mode = {} exceeds rde.num_modes = {}",
            spectrum.truncation.max_mode, p.num_modes
        )));
    }
    let grid = crate::history::GridSpec::new(p.r, plan.nodes, p.num_modes)?;
    let decomp = build_decomposition(&spectrum, plan.m, &DelayModes::from_rde(p), grid)?;
    let linear = Simulator::rde(p.linear(), plan.dt)?;
    let horizon = plan.horizon.unwrap_or(10.0 * p.r);
    let fit = fit_dichotomy_k(&decomp, &linear, plan.trials, horizon, cfg.seed)?;
    let validation =
        validate_dichotomy(&decomp, &linear, fit.k_fit, plan.validation_trials, horizon, cfg.seed ^ VALIDATION_SALT)?;
    Ok(FittedDecomposition { decomp: decomp.with_dichotomy(fit), validation })
}

/// Splitting of a scalar RFDE whose projection rank matches the user's
/// dichotomy data.
fn rfde_decomposition(cfg: &RunConfig, p: &RfdeParams, d: &DichotomyInputs) -> Result<SpectralDecomposition> {
    cfg.validate_decomposition()?;
    let (c, b) = p
        .scalar_modes()
        .ok_or_else(|| Error::Config("squeeze checks on an rfde need a scalar equation with lags 0 and r".into()))?;
    let modes = DelayModes::from_rfde(p).expect("scalar equation");
    let floor = cfg.spectrum.floor.unwrap_or(-(c.abs() + 10.0));
    let spectrum = scalar_spectrum(c, b, p.r, floor)?;
    let level = (1..=spectrum.len())
        .find(|&l| spectrum.k(l) == Some(d.m))
        .ok_or_else(|| Error::Config(format!("no spectral cut has rank dichotomy.m = {}", d.m)))?;
    let grid = crate::history::GridSpec::new(p.r, cfg.decomposition.nodes, 1)?;
    build_decomposition(&spectrum, level, &modes, grid)
}

#[derive(Clone, Debug, Serialize)]
struct DecompositionReport {
    summary: DecompositionSummary,
    fit: Option<DichotomyFit>,
    validation: Option<DichotomyValidation>,
}

// --------------------------------------------------------------- constants

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Measured from simulations.
    Fitted,
    /// Computed from other constants or the model.
    Derived,
    /// Taken from the config.
    User,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantRecord {
    pub name: &'static str,
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

fn record(name: &'static str, value: f64, provenance: Provenance, note: &str) -> ConstantRecord {
    ConstantRecord { name, value, provenance, note: note.to_string() }
}

/// What the squeeze constants are computed from.
pub enum ConstantsPlan {
    Raw(SqueezeConstants),
    Rde { fitted: FittedDecomposition, lipschitz: f64, m1: M1Choice },
    Rfde { dichotomy: DichotomyInputs, lipschitz: f64, m1: M1Choice, autonomous: bool },
}

impl ConstantsPlan {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.constants_source()? {
            ConstantsSource::Raw => {
                let sc = cfg.constants.ok_or_else(|| Error::Config("bounds.source is raw but `constants` is missing".into()))?;
                sc.validate()?;
                ConstantsPlan::Raw(sc)
            }
            ConstantsSource::Rde => {
                let p = cfg.rde()?;
                ConstantsPlan::Rde { fitted: rde_decomposition(cfg, p)?, lipschitz: p.lipschitz(), m1: cfg.bounds.m1 }
            }
            ConstantsSource::Rfde => {
                let p = match cfg.model()? {
                    Model::Rfde(p) => p,
                    Model::Rde(_) => return Err(Error::Config("bounds.source is rfde but the system is rde".into())),
                };
                let dichotomy =
                    p.dichotomy.ok_or_else(|| Error::Config("rfde constants need an `rfde.dichotomy` block".into()))?;
                ConstantsPlan::Rfde { dichotomy, lipschitz: p.lipschitz(), m1: cfg.bounds.m1, autonomous: p.is_autonomous() }
            }
        })
    }

    /// Constants at squeezing time `t0`.
    pub fn at(&self, t0: f64) -> Result<SqueezeConstants> {
        match self {
            ConstantsPlan::Raw(sc) => Ok(sc.with_t0(t0)),
            ConstantsPlan::Rde { fitted, lipschitz, m1 } => rde_constants(&fitted.decomp, *lipschitz, t0, *m1),
            ConstantsPlan::Rfde { dichotomy, lipschitz, m1, .. } => rfde_constants(dichotomy, *lipschitz, t0, *m1),
        }
    }

    /// Constants at the configured time; raw constants keep their own `t0`.
    pub fn configured(&self, cfg: &RunConfig) -> Result<SqueezeConstants> {
        match self {
            ConstantsPlan::Raw(sc) => Ok(*sc),
            _ => {
                positive("bounds.t0", cfg.bounds.t0)?;
                self.at(cfg.bounds.t0)
            }
        }
    }

    pub fn variant(&self, cfg: &RunConfig) -> Variant {
        cfg.bounds.variant.unwrap_or(match self {
            ConstantsPlan::Rfde { autonomous: false, .. } => Variant::Nonautonomous,
            _ => Variant::Autonomous,
        })
    }

    pub fn source(&self) -> ConstantsSource {
        match self {
            ConstantsPlan::Raw(_) => ConstantsSource::Raw,
            ConstantsPlan::Rde { .. } => ConstantsSource::Rde,
            ConstantsPlan::Rfde { .. } => ConstantsSource::Rfde,
        }
    }

    pub fn provenance(&self, sc: &SqueezeConstants) -> Vec<ConstantRecord> {
        use Provenance::*;
        let rank = sc.rank as f64;
        match self {
            ConstantsPlan::Raw(_) => vec![
                record("m1", sc.m1, User, ""),
                record("m2", sc.m2, User, ""),
                record("m3", sc.m3, User, ""),
                record("lambda0", sc.lambda0, User, ""),
                record("lambda1", sc.lambda1, User, ""),
                record("rank", rank, User, ""),
                record("t0", sc.t0, User, ""),
            ],
            ConstantsPlan::Rde { fitted, lipschitz, m1 } => {
                let fit = fitted.decomp.dichotomy().expect("fitted");
                vec![
                    record("lipschitz", *lipschitz, Derived, "|kappa| of the nonlinearity"),
                    record("k_fit", fit.k_fit, Fitted, "dichotomy constant from random and extremal histories"),
                    match m1 {
                        M1Choice::Derived => record("m1", sc.m1, Derived, "|rho_m| / |rho_{m+1}|"),
                        M1Choice::Statement => record("m1", sc.m1, User, "fixed value 2"),
                    },
                    record("m2", sc.m2, Fitted, "equals k_fit"),
                    record("m3", sc.m3, Derived, "k_fit L_f / (rho_1 + L_f - rho_m)"),
                    record("lambda0", sc.lambda0, Derived, "L_f + rho_1"),
                    record("lambda1", sc.lambda1, Derived, "rho_m"),
                    record("rank", rank, Derived, "cumulative multiplicity k_m"),
                    record("t0", sc.t0, User, ""),
                ]
            }
            ConstantsPlan::Rfde { m1, lipschitz, .. } => vec![
                record("lipschitz", *lipschitz, Derived, "|kappa| of the nonlinearity"),
                match m1 {
                    M1Choice::Derived => record("m1", sc.m1, Derived, "K0 + K"),
                    M1Choice::Statement => record("m1", sc.m1, User, "fixed value 2"),
                },
                record("m2", sc.m2, User, "dichotomy.k"),
                record("m3", sc.m3, Derived, "K L_f K0 / (-beta - gamma + L_f K0)"),
                record("lambda0", sc.lambda0, Derived, "L_f K0 - gamma"),
                record("lambda1", sc.lambda1, User, "dichotomy.beta"),
                record("rank", rank, User, "dichotomy.m"),
                record("t0", sc.t0, User, ""),
            ],
        }
    }

    fn decomposition_report(&self) -> Option<DecompositionReport> {
        match self {
            ConstantsPlan::Rde { fitted, .. } => Some(DecompositionReport {
                summary: fitted.decomp.summary(),
                fit: fitted.decomp.dichotomy().copied(),
                validation: Some(fitted.validation),
            }),
            _ => None,
        }
    }
}

// ------------------------------------------------------------------ bounds

#[derive(Clone, Debug, Serialize)]
struct BoundsOutput {
    source: ConstantsSource,
    constants: SqueezeConstants,
    provenance: Vec<ConstantRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decomposition: Option<DecompositionReport>,
    report: BoundReport,
}

fn bounds_outcome(report: &BoundReport) -> Outcome {
    if report.any_feasible() {
        Outcome::Success
    } else {
        Outcome::Infeasible(report.reasons.join("; "))
    }
}

fn fmt_bound(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "infeasible".into())
}

pub fn cmd_bounds(cfg: &RunConfig) -> Result<CommandResult> {
    let plan = ConstantsPlan::from_config(cfg)?;
    let sc = plan.configured(cfg)?;
    let report = bound_report(&sc, cfg.bounds.alpha, plan.variant(cfg))?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.json(
        "bounds.json",
        &BoundsOutput {
            source: plan.source(),
            constants: sc,
            provenance: plan.provenance(&sc),
            decomposition: plan.decomposition_report(),
            report: report.clone(),
        },
    )?;
    let summary = format!("hausdorff {}, fractal {}", fmt_bound(report.hausdorff), fmt_bound(report.fractal));
    Ok(out.done(bounds_outcome(&report), summary))
}

// ---------------------------------------------------------------- optimize

fn alpha_range(cfg: &RunConfig, plan: &ConstantsPlan, target: Target) -> Result<(f64, f64)> {
    if let Some(r) = cfg.optimize.alpha_range {
        return Ok(r);
    }
    Ok(match target {
        Target::Hausdorff => (1e-3, 2.0),
        Target::Fractal => {
            let m1 = plan.at(cfg.optimize.t0_range.0)?.m1;
            (1e-3 * m1, m1)
        }
    })
}

#[derive(Clone, Debug, Serialize)]
struct OptimizeOutput {
    target: Target,
    alpha_range: (f64, f64),
    t0_range: (f64, f64),
    optimum: Option<Optimum>,
    min_constraint: f64,
    min_constraint_at: (f64, f64),
    infeasibility: Option<String>,
}

fn optimize(cfg: &RunConfig, plan: &ConstantsPlan, target: Target) -> Result<(OptimizeOutput, crate::bounds::OptimizeReport)> {
    let ar = alpha_range(cfg, plan, target)?;
    let tr = cfg.optimize.t0_range;
    let rep = optimize_bound(|t0| plan.at(t0), ar, tr, target)?;
    let out = OptimizeOutput {
        target,
        alpha_range: ar,
        t0_range: tr,
        optimum: rep.optimum,
        min_constraint: rep.min_constraint,
        min_constraint_at: rep.min_constraint_at,
        infeasibility: rep.infeasibility(),
    };
    Ok((out, rep))
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<CommandResult> {
    let plan = ConstantsPlan::from_config(cfg)?;
    let (summary, rep) = optimize(cfg, &plan, cfg.optimize.target)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.json("optimize.json", &summary)?;
    out.write("optimize_grid.csv", |w| rep.write_grid_csv(w))?;
    Ok(match (&summary.optimum, summary.infeasibility) {
        (Some(o), _) => {
            let line = format!("best {:?} bound {:.6} at alpha {:.6}, t0 {:.6}", summary.target, o.bound, o.alpha, o.t0);
            out.done(Outcome::Success, line)
        }
        (None, reason) => {
            let reason = reason.unwrap_or_default();
            out.done(Outcome::Infeasible(reason.clone()), reason)
        }
    })
}

// -------------------------------------------------------------- simulation

fn flow_for(cfg: &RunConfig, dt: f64) -> Result<Box<dyn Flow>> {
    positive("dt", dt)?;
    Ok(match cfg.model()? {
        Model::Rde(p) => Box::new(Simulator::rde(p.clone(), dt)?),
        Model::Rfde(p) => Box::new(Simulator::rfde(p.clone(), dt)?),
    })
}

/// Smooth random history with sup norm `amplitude`.
fn random_history(flow: &dyn Flow, nodes: usize, amplitude: f64, seed: u64, index: usize) -> Result<HistorySegment> {
    let grid = flow.grid(nodes)?;
    let h = random_segment(&grid, flow.value_norm(), &mut trial_rng(seed, index));
    let norm = h.sup_norm();
    if norm == 0.0 {
        return Err(Error::Numerical("random history vanished".into()));
    }
    Ok(h.scaled(amplitude / norm))
}

#[derive(Clone, Debug, Serialize)]
struct SimulationSummary {
    flow: String,
    horizon: f64,
    steps: usize,
    initial_norm: f64,
    final_norm: f64,
    max_norm: f64,
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<SimulationSummary> {
    let plan = &cfg.simulate;
    positive("simulate.horizon", plan.horizon)?;
    positive("simulate.amplitude", plan.amplitude)?;
    if plan.csv_every == 0 {
        return Err(Error::Config("simulate.csv_every must be at least 1".into()));
    }
    let flow = flow_for(cfg, plan.dt)?;
    let phi = random_history(flow.as_ref(), cfg.decomposition.nodes, plan.amplitude, cfg.seed ^ SIMULATE_SALT, 0)?;
    let traj = flow.evolve(&phi, plan.horizon)?;
    out.write("trajectory.csv", |w| traj.write_csv(w, plan.csv_every, plan.max_coeffs))?;
    let norms: Vec<f64> = (0..=traj.steps()).map(|k| traj.state_norm(k)).collect();
    Ok(SimulationSummary {
        flow: flow.fingerprint(),
        horizon: plan.horizon,
        steps: traj.steps(),
        initial_norm: norms[0],
        final_norm: *norms.last().expect("at least one sample"),
        max_norm: norms.iter().fold(0.0, |a, b| a.max(*b)),
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandResult> {
    let mut out = Outputs::new(&cfg.output_dir)?;
    let summary = simulate(cfg, &mut out)?;
    out.json("simulate.json", &summary)?;
    let line = format!("{} steps, final norm {:.6e}", summary.steps, summary.final_norm);
    Ok(out.done(Outcome::Success, line))
}

// ----------------------------------------------------------------- squeeze

#[derive(Clone, Debug, Serialize)]
pub struct SqueezeSummary {
    pub pairs: usize,
    pub passed_pairs: usize,
    pub samples: usize,
    pub violations: usize,
    pub min_slack_p: f64,
    pub min_slack_q: f64,
    /// Up to five violations, earliest pair first.
    pub examples: Vec<Violation>,
    pub constants: SqueezeConstants,
}

impl SqueezeSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks the squeezing inequalities on `pairs` random pairs of histories
/// evolved by `flow`.
pub fn squeeze_pairs(
    cfg: &RunConfig,
    flow: &dyn Flow,
    decomp: &SpectralDecomposition,
    sc: &SqueezeConstants,
) -> Result<SqueezeSummary> {
    let plan = &cfg.squeeze_check;
    positive("squeeze_check.horizon", plan.horizon)?;
    positive("squeeze_check.amplitude", plan.amplitude)?;
    positive("squeeze_check.separation", plan.separation)?;
    if plan.pairs == 0 || plan.every == 0 {
        return Err(Error::Config("squeeze_check.pairs and squeeze_check.every must be at least 1".into()));
    }
    let nodes = decomp.grid().num_nodes();
    let seed = cfg.seed ^ SQUEEZE_SALT;
    let reports = (0..plan.pairs)
        .into_par_iter()
        .map(|i| {
            let u0 = random_history(flow, nodes, plan.amplitude, seed, 2 * i)?;
            let w0 = random_history(flow, nodes, plan.separation, seed, 2 * i + 1)?;
            let v0 = u0.axpy(1.0, &w0)?;
            let u = flow.evolve(&u0, plan.horizon)?;
            let v = flow.evolve(&v0, plan.horizon)?;
            check_squeeze(&u, &v, decomp, sc, plan.every)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = SqueezeSummary {
        pairs: plan.pairs,
        passed_pairs: 0,
        samples: 0,
        violations: 0,
        min_slack_p: f64::INFINITY,
        min_slack_q: f64::INFINITY,
        examples: Vec::new(),
        constants: *sc,
    };
    for r in reports {
        s.passed_pairs += usize::from(r.passed());
        s.samples += r.samples;
        s.violations += r.violations.len();
        s.min_slack_p = s.min_slack_p.min(r.min_slack_p);
        s.min_slack_q = s.min_slack_q.min(r.min_slack_q);
        let room = 5 - s.examples.len().min(5);
        s.examples.extend(r.violations.into_iter().take(room));
    }
    Ok(s)
}

pub fn cmd_squeeze(cfg: &RunConfig) -> Result<CommandResult> {
    let plan = ConstantsPlan::from_config(cfg)?;
    let sc = plan.configured(cfg)?;
    let flow = flow_for(cfg, cfg.decomposition.dt)?;
    let summary = match (&plan, cfg.model()?) {
        (ConstantsPlan::Rde { fitted, .. }, _) => squeeze_pairs(cfg, flow.as_ref(), &fitted.decomp, &sc)?,
        (ConstantsPlan::Rfde { dichotomy, .. }, Model::Rfde(p)) => {
            let decomp = rfde_decomposition(cfg, p, dichotomy)?;
            squeeze_pairs(cfg, flow.as_ref(), &decomp, &sc)?
        }
        _ => return Err(Error::Config("squeeze checks need constants derived from the model".into())),
    };
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.json("squeeze.json", &summary)?;
    let line = format!(
        "{}/{} pairs passed, min slack P {:.3e}, Q {:.3e}",
        summary.passed_pairs, summary.pairs, summary.min_slack_p, summary.min_slack_q
    );
    Ok(out.done(Outcome::Success, line))
}

// --------------------------------------------------------------- absorbing

#[derive(Clone, Debug, Serialize)]
struct AbsorbingTrial {
    initial_norm: f64,
    first_entry: Option<f64>,
    exits_after_entry: bool,
    final_norm: f64,
    envelope_violations: usize,
    envelope_min_slack: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct AbsorbingOutput {
    system: &'static str,
    radius: Option<f64>,
    /// Predicted entry time for a ball of radius `amplitude`.
    entry_time: Option<f64>,
    /// Entry must happen by this time.
    entry_deadline: Option<f64>,
    envelope: Option<EnvelopeParams>,
    trials: Vec<AbsorbingTrial>,
    passed: bool,
}

pub fn cmd_absorbing(cfg: &RunConfig) -> Result<CommandResult> {
    let plan = &cfg.absorbing_check;
    positive("absorbing_check.horizon", plan.horizon)?;
    positive("absorbing_check.amplitude", plan.amplitude)?;
    if plan.trials == 0 || plan.every == 0 {
        return Err(Error::Config("absorbing_check.trials and absorbing_check.every must be at least 1".into()));
    }
    let flow = flow_for(cfg, cfg.decomposition.dt)?;
    let nodes = cfg.decomposition.nodes;
    let seed = cfg.seed ^ ABSORB_SALT;
    let output = match cfg.model()? {
        Model::Rde(p) => {
            let env = EnvelopeParams {
                a: p.a,
                lipschitz: p.lipschitz(),
                delta: plan.delta.unwrap_or(p.a + 0.5 / p.r),
                c1: p.c1(),
                r: p.r,
            };
            env.validate()?;
            let trials = (0..plan.trials)
                .into_par_iter()
                .map(|i| {
                    let phi = random_history(flow.as_ref(), nodes, plan.amplitude, seed, i)?;
                    let traj = flow.evolve(&phi, plan.horizon)?;
                    let phi_norm = traj.state_norm(0);
                    let rep = check_envelope(&traj, |t| rde_absorbing_envelope(t, phi_norm, &env).unwrap_or(f64::NAN), plan.every);
                    Ok(AbsorbingTrial {
                        initial_norm: phi_norm,
                        first_entry: None,
                        exits_after_entry: false,
                        final_norm: traj.state_norm(traj.steps()),
                        envelope_violations: rep.violations.len(),
                        envelope_min_slack: Some(rep.min_relative_slack),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let passed = trials.iter().all(|t| t.envelope_violations == 0);
            AbsorbingOutput {
                system: "rde",
                radius: env.limit(),
                entry_time: None,
                entry_deadline: None,
                envelope: Some(env),
                trials,
                passed,
            }
        }
        Model::Rfde(p) => {
            let d = p.dichotomy.ok_or_else(|| Error::Config("absorbing checks on an rfde need `rfde.dichotomy`".into()))?;
            let (lf, f0) = (p.lipschitz(), p.f0());
            let radius = absorbing_radius(d.k0, d.gamma, lf, f0)?;
            let entry = absorbing_time(plan.amplitude, d.k0, d.gamma, lf, f0)?;
            let deadline = 1.2 * entry;
            let horizon = plan.horizon.max(deadline + p.r);
            let trials = (0..plan.trials)
                .into_par_iter()
                .map(|i| {
                    let phi = random_history(flow.as_ref(), nodes, plan.amplitude, seed, i)?;
                    let traj = flow.evolve(&phi, horizon)?;
                    let rep = check_absorbing(&traj, radius, plan.every)?;
                    Ok(AbsorbingTrial {
                        initial_norm: traj.state_norm(0),
                        first_entry: rep.first_entry,
                        exits_after_entry: rep.exits_after_entry,
                        final_norm: rep.final_norm,
                        envelope_violations: 0,
                        envelope_min_slack: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let sample_gap = plan.every as f64 * cfg.decomposition.dt;
            let passed = trials
                .iter()
                .all(|t| t.first_entry.is_some_and(|e| e <= deadline + sample_gap) && !t.exits_after_entry);
            AbsorbingOutput {
                system: "rfde",
                radius: Some(radius),
                entry_time: Some(entry),
                entry_deadline: Some(deadline),
                envelope: None,
                trials,
                passed,
            }
        }
    };
    let mut out = Outputs::new(&cfg.output_dir)?;
    out.json("absorbing.json", &output)?;
    let line = format!("{} trials, passed: {}", output.trials.len(), output.passed);
    Ok(out.done(Outcome::Success, line))
}

// ------------------------------------------------------------------ boxdim

#[derive(Clone, Debug, Serialize)]
pub struct BoxdimSummary {
    pub estimate: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    pub suggested_window: Option<(usize, usize)>,
    pub points: usize,
    pub diameter: f64,
    pub counts: Vec<BoxCount>,
}

fn boxdim(cfg: &RunConfig, out: &mut Outputs) -> Result<BoxdimSummary> {
    let plan = &cfg.boxdim;
    positive("boxdim.amplitude", plan.amplitude)?;
    positive("boxdim.stride", plan.stride)?;
    positive("boxdim.eps_span", plan.eps_span)?;
    if plan.initial_conditions == 0 {
        return Err(Error::Config("boxdim.initial_conditions must be at least 1".into()));
    }
    let flow = flow_for(cfg, cfg.simulate.dt)?;
    let seed = cfg.seed ^ BOXDIM_SALT;
    let initial = (0..plan.initial_conditions)
        .map(|i| random_history(flow.as_ref(), plan.nodes, plan.amplitude, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let sample = sample_attractor(flow.as_ref(), &initial, plan.transient, plan.horizon, plan.stride, plan.nodes, None)?;
    let eps = match &plan.eps {
        Some(list) => list.clone(),
        None => {
            let hi = if sample.diameter > 0.0 { sample.diameter / 2.0 } else { 1.0 };
            geometric_eps(hi, hi / plan.eps_span, plan.eps_count)
        }
    };
    let rep = box_counting_dim(&sample, &eps, plan.window)?;
    out.write("boxdim_counts.csv", |w| rep.write_counts_csv(w))?;
    Ok(BoxdimSummary {
        estimate: rep.estimate,
        r_squared: rep.r_squared,
        window: rep.window,
        suggested_window: rep.suggested_window,
        points: rep.points,
        diameter: sample.diameter,
        counts: rep.counts,
    })
}

pub fn cmd_boxdim(cfg: &RunConfig) -> Result<CommandResult> {
    let mut out = Outputs::new(&cfg.output_dir)?;
    let summary = boxdim(cfg, &mut out)?;
    out.json("boxdim.json", &summary)?;
    let line = format!("estimate {:.4} (R^2 {:.4}) from {} points", summary.estimate, summary.r_squared, summary.points);
    Ok(out.done(Outcome::Success, line))
}

// ------------------------------------------------------------------- cover

#[derive(Clone, Debug, Serialize)]
struct CoverOutput {
    norm: NormSpec,
    r1: f64,
    r2: f64,
    lattice: bool,
    bound: f64,
    report: CoverReport,
}

pub fn cmd_cover(cfg: &RunConfig) -> Result<CommandResult> {
    let plan = cfg.cover.as_ref().ok_or_else(|| Error::Config("cover-check needs a `cover` block".into()))?;
    plan.norm.validate()?;
    let opts = NetOptions { random_probes: plan.random_probes, seed: cfg.seed, max_lattice_probes: plan.max_lattice_probes };
    let net = match &plan.centers {
        Some(c) => Net::explicit(plan.norm.clone(), plan.r1, plan.r2, c)?,
        None => build_net(&plan.norm, plan.r1, plan.r2, &opts)?,
    };
    let report = verify_covering(&net, &opts)?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    if net.len() <= CENTER_CSV_LIMIT {
        out.write("cover_centers.csv", |w| net.write_csv(w))?;
    }
    let line = format!("{} centers (bound {:.4e}), passed: {}", net.len(), report.bound, report.passed);
    out.json(
        "cover.json",
        &CoverOutput {
            norm: plan.norm.clone(),
            r1: plan.r1,
            r2: plan.r2,
            lattice: net.is_lattice(),
            bound: covering_bound(plan.norm.dim, plan.r1, plan.r2)?,
            report,
        },
    )?;
    Ok(out.done(Outcome::Success, line))
}

// ---------------------------------------------------------------- pipeline

#[derive(Clone, Debug, Serialize)]
struct Consistency {
    /// Smallest feasible fractal bound among the configured point and the
    /// optimum.
    fractal_bound: Option<f64>,
    estimate: f64,
    margin: f64,
    /// `None` when no fractal bound is feasible.
    consistent: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
struct PipelineReport {
    seed: u64,
    system: RdeParams,
    spectrum: SpectrumSummary,
    decomposition: DecompositionReport,
    constants: SqueezeConstants,
    provenance: Vec<ConstantRecord>,
    bounds: BoundReport,
    optimized_hausdorff: OptimizeOutput,
    optimized_fractal: OptimizeOutput,
    simulation: SimulationSummary,
    squeeze: SqueezeSummary,
    boxdim: BoxdimSummary,
    consistency: Consistency,
}

/// roots, decomposition, constants, bounds, simulation, squeeze check and
/// box counting for the RDE, written as one report plus CSVs.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<CommandResult> {
    let p = cfg.rde()?;
    if cfg.bounds.source.is_some_and(|s| s != ConstantsSource::Rde) {
        return Err(Error::Config("the pipeline derives its constants from the rde".into()));
    }
    let mut out = Outputs::new(&cfg.output_dir)?;
    let fitted = rde_decomposition(cfg, p)?;
    let spectrum = fitted.decomp.spectrum().clone();
    out.write("spectrum.csv", |w| spectrum.write_csv(w))?;
    let plan = ConstantsPlan::Rde { fitted, lipschitz: p.lipschitz(), m1: cfg.bounds.m1 };
    let sc = plan.configured(cfg)?;
    let bounds = bound_report(&sc, cfg.bounds.alpha, Variant::Autonomous)?;
    let (opt_h, _) = optimize(cfg, &plan, Target::Hausdorff)?;
    let (opt_f, _) = optimize(cfg, &plan, Target::Fractal)?;
    let simulation = simulate(cfg, &mut out)?;
    let flow = Simulator::rde(p.clone(), cfg.decomposition.dt)?;
    let ConstantsPlan::Rde { fitted, .. } = &plan else { unreachable!() };
    let squeeze = squeeze_pairs(cfg, &flow, &fitted.decomp, &sc)?;
    let boxdim = boxdim(cfg, &mut out)?;

    let fractal_bound = [bounds.fractal, opt_f.optimum.map(|o| o.bound)].into_iter().flatten().reduce(f64::min);
    let consistency = Consistency {
        fractal_bound,
        estimate: boxdim.estimate,
        margin: CONSISTENCY_MARGIN,
        consistent: fractal_bound.map(|b| boxdim.estimate <= b + CONSISTENCY_MARGIN),
    };
    let outcome = if bounds.any_feasible() || opt_h.optimum.is_some() || opt_f.optimum.is_some() {
        Outcome::Success
    } else {
        Outcome::Infeasible(bounds.reasons.join("; "))
    };
    let line = format!(
        "hausdorff {}, fractal {}, box-counting {:.4}, squeeze {}/{}",
        fmt_bound(opt_h.optimum.map(|o| o.bound)),
        fmt_bound(fractal_bound),
        boxdim.estimate,
        squeeze.passed_pairs,
        squeeze.pairs
    );
    let report = PipelineReport {
        seed: cfg.seed,
        system: p.clone(),
        spectrum: SpectrumSummary::from(&spectrum),
        decomposition: plan.decomposition_report().expect("rde plan"),
        constants: sc,
        provenance: plan.provenance(&sc),
        bounds,
        optimized_hausdorff: opt_h,
        optimized_fractal: opt_f,
        simulation,
        squeeze,
        boxdim,
        consistency,
    };
    out.json("pipeline.json", &report)?;
    Ok(out.done(outcome, line))
}
