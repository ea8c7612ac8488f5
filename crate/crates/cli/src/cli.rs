//! Flag parsing. Every subcommand builds an [`ExperimentConfig`]; flags
//! override values loaded with `--config`.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{CriterionChoice, ExperimentConfig, Expectation, Kind, Preset};

#[derive(Parser, Debug)]
#[command(name = "contint", version, about = "Uniqueness and integrability diagnostics for continuous systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// Base configuration; flags given alongside override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV reports (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Ensemble seed; TOML integers cap it at 2^63 − 1.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Comma-separated list of scales ε.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps: Option<Vec<f64>>,
    /// Grid points per axis of a surface patch or solution lattice.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Sampling lattice points per axis for sup-norm estimates.
    #[arg(long, global = true)]
    pub lattice: Option<usize>,
    /// Exit with status 2 when the verdict contradicts this.
    #[arg(long, global = true, value_enum)]
    pub expect: Option<Expectation>,
    /// Comma-separated coordinate names.
    #[arg(long, global = true, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Osgood or limit-condition check of moduli of continuity.
    Moduli(ModuliArgs),
    /// Mollify a sampled function and measure the derivative bounds.
    Mollify(MollifyArgs),
    /// Frobenius defect of a coframe over a lattice.
    Frobenius(FrobeniusArgs),
    /// Build a surface by composed flows and check its tangency defect.
    Surface(SurfaceArgs),
    /// Uniqueness checks for ODEs with non-Lipschitz right-hand sides.
    #[command(subcommand)]
    Ode(OdeCommand),
    /// Integrability checks for first-order PDE systems.
    #[command(subcommand)]
    Pde(PdeCommand),
    /// Dominated splittings of torus diffeomorphisms.
    #[command(subcommand)]
    Dyn(DynCommand),
    /// Run an experiment described entirely by a config file.
    Run(RunArgs),
}

#[derive(Args, Debug)]
pub struct ModuliArgs {
    #[arg(long)]
    pub modulus: Option<String>,
    /// Second modulus of the limit condition `w1(s)·exp(w2(s)/s)`.
    #[arg(long)]
    pub second: Option<String>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionChoice>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct MollifyArgs {
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub modulus: Option<String>,
    /// Grid spacing.
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct FrobeniusArgs {
    /// A coframe row such as "dz - y*dx"; repeat for several rows.
    #[arg(long = "form")]
    pub forms: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SurfaceExample {
    Contact,
    Involutive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OdeExample {
    PaperEx1,
    Peano,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PdeExample {
    PaperEx2,
    PaperEx3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DynExample {
    CatMap,
    SkewProduct,
}

#[derive(Args, Debug)]
pub struct SurfaceArgs {
    #[arg(long, value_enum)]
    pub example: Option<SurfaceExample>,
    /// Rank of the distribution.
    #[arg(long)]
    pub m: Option<usize>,
    /// Coefficients `a_i1; a_i2; …` of one spanning field; repeat per field.
    #[arg(long = "row")]
    pub rows: Vec<String>,
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Flow step.
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct OdeArgs {
    #[arg(long, value_enum)]
    pub example: Option<OdeExample>,
    /// Right-hand side of one equation; repeat per unknown.
    #[arg(long = "rhs")]
    pub rhs: Vec<String>,
    /// Modulus record for each variable, time first; repeat per variable.
    #[arg(long = "modulus")]
    pub moduli: Vec<String>,
    #[arg(long)]
    pub overall: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct FunnelArgs {
    #[command(flatten)]
    pub ode: OdeArgs,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Strictly descending perturbation sizes.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum OdeCommand {
    /// Certify uniqueness at a point from declared moduli.
    Check(OdeArgs),
    /// Probe for a Peano funnel by perturbation ensembles.
    Funnel(FunnelArgs),
}

#[derive(Args, Debug)]
pub struct PdeArgs {
    #[arg(long, value_enum)]
    pub example: Option<PdeExample>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Exponents a11,a12,a21,a22,b1,b2 of the mixed system.
    #[arg(long, value_delimiter = ',')]
    pub mixed: Option<Vec<f64>>,
    /// Columns of the extended matrix, 1-based.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug)]
pub enum PdeCommand {
    /// Certify uniqueness for a column choice of the extended matrix.
    Check(PdeArgs),
    /// Solve a special-form system on a lattice of the x-box.
    SolveSpecial(PdeArgs),
    /// Mollified frames, their surfaces and the comparison with the exact graph.
    Frames(PdeArgs),
}

#[derive(Args, Debug)]
pub struct DynArgs {
    #[arg(long, value_enum)]
    pub example: Option<DynExample>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug)]
pub enum DynCommand {
    /// Pull a plane field back along orbits and report the step angles.
    Transport(DynArgs),
    /// Norm and conorm growth, domination and the bound quantities.
    Dominate(DynArgs),
    /// Involutivity and regularity traces for each ε.
    Traces(DynArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn set_list<T>(slot: &mut Option<Vec<T>>, value: Vec<T>) {
    if !value.is_empty() {
        *slot = Some(value);
    }
}

impl Common {
    fn base(&self, kind: Kind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if cfg.experiment.kind != kind {
                    bail!(
                        "config describes `{}` but the command runs `{}`",
                        cfg.experiment.kind.name(),
                        kind.name()
                    );
                }
                cfg
            }
            None => ExperimentConfig::new(kind),
        };
        self.apply(&mut cfg);
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.output.dir, self.out.clone());
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
        }
        set(&mut cfg.experiment.expect, self.expect);
        set(&mut cfg.params.eps, self.eps.clone());
        set(&mut cfg.params.grid, self.grid);
        set(&mut cfg.params.lattice, self.lattice);
        set(&mut cfg.system.names, self.names.clone());
        set(&mut cfg.system.lo, self.lo.clone());
        set(&mut cfg.system.hi, self.hi.clone());
        set(&mut cfg.system.point, self.point.clone());
    }
}

fn split_row(row: &str) -> Vec<String> {
    row.split(';').map(|s| s.trim().to_string()).collect()
}

impl OdeArgs {
    fn config(&self, kind: Kind) -> Result<ExperimentConfig> {
        let mut cfg = self.common.base(kind)?;
        set(
            &mut cfg.experiment.preset,
            self.example.map(|e| match e {
                OdeExample::PaperEx1 => Preset::PaperEx1,
                OdeExample::Peano => Preset::Peano,
            }),
        );
        set_list(&mut cfg.system.rhs, self.rhs.clone());
        set_list(&mut cfg.system.moduli, self.moduli.clone());
        set(&mut cfg.system.overall, self.overall.clone());
        set(&mut cfg.params.alpha, self.alpha);
        set(&mut cfg.params.beta, self.beta);
        set(&mut cfg.params.gamma, self.gamma);
        set(&mut cfg.params.delta, self.delta);
        Ok(cfg)
    }
}

impl PdeArgs {
    fn config(&self, kind: Kind) -> Result<ExperimentConfig> {
        let mut cfg = self.common.base(kind)?;
        set(
            &mut cfg.experiment.preset,
            self.example.map(|e| match e {
                PdeExample::PaperEx2 => Preset::PaperEx2,
                PdeExample::PaperEx3 => Preset::PaperEx3,
            }),
        );
        set(&mut cfg.params.alpha, self.alpha);
        set(&mut cfg.params.beta, self.beta);
        set(&mut cfg.params.mixed, self.mixed.clone());
        set(&mut cfg.system.columns, self.columns.clone());
        set(&mut cfg.params.eps1, self.eps1);
        Ok(cfg)
    }
}

impl DynArgs {
    fn config(&self, kind: Kind) -> Result<ExperimentConfig> {
        let mut cfg = self.common.base(kind)?;
        set(
            &mut cfg.experiment.preset,
            self.example.map(|e| match e {
                DynExample::CatMap => Preset::CatMap,
                DynExample::SkewProduct => Preset::SkewProduct,
            }),
        );
        set(&mut cfg.params.k_max, self.k_max);
        Ok(cfg)
    }
}

impl Cli {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        match self.command {
            Command::Moduli(a) => {
                let mut cfg = a.common.base(Kind::ModuliCheck)?;
                set(&mut cfg.system.modulus, a.modulus);
                set(&mut cfg.system.second_modulus, a.second);
                set(&mut cfg.params.criterion, a.criterion);
                set(&mut cfg.params.depth, a.depth);
                Ok(cfg)
            }
            Command::Mollify(a) => {
                let mut cfg = a.common.base(Kind::MollifyVerify)?;
                set(&mut cfg.system.function, a.function);
                set(&mut cfg.system.modulus, a.modulus);
                set(&mut cfg.params.step, a.step);
                Ok(cfg)
            }
            Command::Frobenius(a) => {
                let mut cfg = a.common.base(Kind::Frobenius)?;
                set_list(&mut cfg.system.forms, a.forms);
                Ok(cfg)
            }
            Command::Surface(a) => {
                let mut cfg = a.common.base(Kind::Surface)?;
                set(
                    &mut cfg.experiment.preset,
                    a.example.map(|e| match e {
                        SurfaceExample::Contact => Preset::Contact,
                        SurfaceExample::Involutive => Preset::Involutive,
                    }),
                );
                set(&mut cfg.system.m, a.m);
                set_list(&mut cfg.system.matrix, a.rows.iter().map(|r| split_row(r)).collect());
                set(&mut cfg.params.eps1, a.eps1);
                set(&mut cfg.params.step, a.step);
                Ok(cfg)
            }
            Command::Ode(OdeCommand::Check(a)) => a.config(Kind::OdeCheck),
            Command::Ode(OdeCommand::Funnel(a)) => {
                let mut cfg = a.ode.config(Kind::OdeFunnel)?;
                set(&mut cfg.params.horizon, a.horizon);
                set(&mut cfg.params.deltas, a.deltas);
                set(&mut cfg.params.ensemble, a.ensemble);
                set(&mut cfg.params.step, a.step);
                Ok(cfg)
            }
            Command::Pde(PdeCommand::Check(a)) => a.config(Kind::PdeCheck),
            Command::Pde(PdeCommand::SolveSpecial(a)) => a.config(Kind::PdeSolveSpecial),
            Command::Pde(PdeCommand::Frames(a)) => a.config(Kind::PdeFrames),
            Command::Dyn(DynCommand::Transport(a)) => a.config(Kind::DynTransport),
            Command::Dyn(DynCommand::Dominate(a)) => a.config(Kind::DynDominate),
            Command::Dyn(DynCommand::Traces(a)) => a.config(Kind::DynTraces),
            Command::Run(a) => {
                let Some(path) = &a.common.config else {
                    bail!("`run` needs --config PATH");
                };
                let mut cfg = ExperimentConfig::load(path)?;
                a.common.apply(&mut cfg);
                Ok(cfg)
            }
        }
    }
}
