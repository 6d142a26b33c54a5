use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Master seed used when `--seed` is absent.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "kdesign", version, about = "Low-depth design ensembles and their audits")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; every random stream is derived from it by name.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report file. Without it the report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-field arithmetic.
    #[command(subcommand)]
    Field(FieldCmd),
    /// k-wise independent hash families.
    #[command(subcommand)]
    Kwise(KwiseCmd),
    /// Reversible circuits for hash evaluation.
    #[command(subcommand)]
    Circuit(CircuitCmd),
    /// Depth, ancilla and randomness accounting.
    #[command(subcommand)]
    Resources(ResourcesCmd),
    /// Trace distance between ensemble and Haar state moments.
    StateError(EstimateArgs),
    /// Trace distance between ensemble and Haar Choi operators.
    ChoiError(EstimateArgs),
    /// Distinguishing advantage of one adaptive k-query experiment.
    Measurable(MeasurableArgs),
    /// Numerical checks of operator identities.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Two-copy collision distinguisher against Haar states.
    Distinguish(DistinguishArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Field(FieldCmd::Selftest(_)) => "field selftest",
            Command::Kwise(KwiseCmd::Verify(_)) => "kwise verify",
            Command::Circuit(CircuitCmd::Build(_)) => "circuit build",
            Command::Resources(ResourcesCmd::Table(_)) => "resources table",
            Command::Resources(ResourcesCmd::Design(_)) => "resources design",
            Command::StateError(_) => "state-error",
            Command::ChoiError(_) => "choi-error",
            Command::Measurable(_) => "measurable",
            Command::Verify(VerifyCmd::Fact1(_)) => "verify fact1",
            Command::Verify(VerifyCmd::Fact2(_)) => "verify fact2",
            Command::Verify(VerifyCmd::Fact5(_)) => "verify fact5",
            Command::Verify(VerifyCmd::BlockedIdentity(_)) => "verify blocked-identity",
            Command::Distinguish(_) => "distinguish",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum FieldCmd {
    /// Barrett products against long division.
    Selftest(FieldSelftestArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FieldSelftestArgs {
    /// Field widths; widths up to 4 are checked on every pair.
    #[arg(long = "m", value_delimiter = ',', default_values_t = [1u32, 2, 3, 4, 8, 16, 32])]
    pub widths: Vec<u32>,
    /// Random pairs per wider width.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

#[derive(Debug, Subcommand)]
pub enum KwiseCmd {
    /// Exact output distribution on every point set of size ≤ k.
    Verify(KwiseVerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct KwiseVerifyArgs {
    /// Field width m.
    #[arg(long = "m", visible_alias = "n", default_value_t = 3)]
    pub m: u32,
    /// Independence parameter (number of coefficients).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum CircuitCmd {
    /// Compile polynomial evaluation and check it against the field oracle.
    Build(CircuitBuildArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitMode {
    LowDepth,
    LowAncilla,
}

#[derive(Debug, Args, Serialize)]
pub struct CircuitBuildArgs {
    /// Field width m.
    #[arg(long = "m", visible_alias = "n", default_value_t = 3)]
    pub m: u32,
    /// Number of coefficients.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = CircuitMode::LowDepth)]
    pub mode: CircuitMode,
    /// Random cases compared with the field oracle.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Also write the circuit in text form to this file.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ResourcesCmd {
    /// Global and blocked constructions side by side.
    Table(ResourcesTableArgs),
    /// Full accounting for one blocked family.
    Design(ResourcesDesignArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ResourcesTableArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignFamilyArg {
    BlockedPhase,
    BlockedLrfc,
}

#[derive(Debug, Args, Serialize)]
pub struct ResourcesDesignArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = DesignFamilyArg::BlockedLrfc)]
    pub family: DesignFamilyArg,
    #[arg(long, value_enum, default_value_t = CircuitMode::LowDepth)]
    pub mode: CircuitMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RandomPhase,
    BlockedPhase,
    Pfc,
    Lrfc,
    BlockedLrfc,
    AmplifiedBlockedLrfc,
    Haar,
    Identity,
    /// Collision test only: independent Haar single-qubit states.
    ProductState,
    /// Collision test only: |0…0⟩.
    BasisState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndependenceArg {
    /// Uniformly random truth tables.
    Exact,
    /// Polynomial hashes with 2k coefficients.
    Kwise,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, value_enum, default_value_t = Family::Lrfc)]
    pub family: Family,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Patch width for blocked families.
    #[arg(long, default_value_t = 1)]
    pub xi: usize,
    /// Amplification rounds.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, value_enum, default_value_t = IndependenceArg::Exact)]
    pub independence: IndependenceArg,
    /// Compose this many independent copies.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Full ensemble description as JSON; overrides the flags above.
    #[arg(long)]
    pub spec: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    /// Sum over every outcome of the sampler.
    Exact,
    MonteCarlo,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    /// Moment order.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::MonteCarlo)]
    pub mode: ModeArg,
    /// Monte-Carlo draws.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Leaf budget for exact enumeration.
    #[arg(long, default_value_t = kdesign::designmetrics::DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanArg {
    Identity,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasurableArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub estimate: EstimateArgs,
    /// Ancilla qubits carried between queries.
    #[arg(long, default_value_t = 1)]
    pub m_anc: usize,
    #[arg(long, value_enum, default_value_t = PlanArg::Random)]
    pub plan: PlanArg,
    /// Index of the random plan stream.
    #[arg(long, default_value_t = 0)]
    pub plan_index: u64,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    /// Permutation-phase twirl of a k-copy operator.
    Fact1(SizeArgs),
    /// Twirl of the distinct-subspace projector.
    Fact2(Fact2Args),
    /// Parallel reformulation weight on the distinct subspace.
    Fact5(Fact5Args),
    /// Local distinct projection under blocked phases.
    BlockedIdentity(BlockedIdentityArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlArg {
    Clifford,
    Haar,
}

#[derive(Debug, Args, Serialize)]
pub struct Fact2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub size: SizeArgs,
    #[arg(long, value_enum, default_value_t = TwirlArg::Clifford)]
    pub family: TwirlArg,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct Fact5Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub size: SizeArgs,
    #[arg(long, default_value_t = 1)]
    pub m_anc: usize,
    /// Number of random plans.
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct BlockedIdentityArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub xi: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DistinguishArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    /// Design order used for k-wise seeds.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Patch width L of the test.
    #[arg(long = "patch", default_value_t = 1)]
    pub patch: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Acceptance cut; derived from the patch width when absent.
    #[arg(long)]
    pub s_star: Option<f64>,
    /// Measure in the computational basis.
    #[arg(long)]
    pub computational: bool,
}
