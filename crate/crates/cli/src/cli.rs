use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "dualcert", version, about = "Certified classification experiments", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify test points with the dual classifier and emit certificates.
    Certify(CertifyArgs),
    /// Robust accuracy under PGD restricted to each point's certificate.
    AttackProj(AttackProjArgs),
    /// Robust accuracy under a decision-based boundary attack.
    AttackBb(AttackBbArgs),
    /// Certified accuracy of the randomized-smoothed dual classifier.
    RsCurve(RsCurveArgs),
    /// Robust-risk curve of the spherical-cap example.
    Sphere(SphereArgs),
    /// Robust-risk bound and Monte-Carlo estimate of the cube example.
    Cube(CubeArgs),
    /// Greedy empirical concentration of a dataset.
    Concentration(ConcentrationArgs),
    /// Writes a synthetic dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flat TOML file whose keys mirror the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also render curve tables as SVG.
    #[arg(long)]
    pub svg: bool,
    /// Run per-point work on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// IDX image/label files (train and test pairs) under --data-dir.
    Mnist,
    /// Random union of subspaces.
    Uos,
    /// CSV files written by gen-data.
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value_t = DatasetKind::Mnist)]
    pub dataset: DatasetKind,
    #[arg(long, default_value = "data/mnist-5k")]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub train_csv: Option<PathBuf>,
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// Ambient dimension of a synthetic union of subspaces.
    #[arg(long, default_value_t = 32)]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub subspace_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Noise level of synthetic points.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    /// Dictionary size; defaults to min(2000, training size).
    #[arg(long)]
    pub dict_size: Option<usize>,
    /// Balanced per-class dictionary instead of a uniform sample.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long, default_value_t = 100)]
    pub test_points: usize,
    /// Full-size run: dictionary of 10000 points.
    #[arg(long)]
    pub full_size: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Majority,
    Unanimous,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DualArgs {
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = Rule::Majority)]
    pub rule: Rule,
    /// Active-set tolerance.
    #[arg(long, default_value_t = dualcert::bpdn::DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub dual: DualArgs,
    /// Compute the exact l2 radius of every certificate (small dimensions only).
    #[arg(long)]
    pub radius: bool,
    /// Include inequality normals in the certificate JSON.
    #[arg(long)]
    pub include_inequalities: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Dual,
    Nearest,
    SmoothedNearest,
    SmoothedDual,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SmoothArgs {
    #[arg(long, default_value_t = dualcert::smoothing::DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = dualcert::smoothing::DEFAULT_SAMPLES)]
    pub n0: usize,
    #[arg(long, default_value_t = dualcert::smoothing::DEFAULT_SAMPLES)]
    pub n: usize,
    #[arg(long, default_value_t = dualcert::smoothing::DEFAULT_CONFIDENCE)]
    pub confidence: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AttackProjArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub dual: DualArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long, value_enum, default_value_t = Target::Dual)]
    pub target: Target,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    pub eps_grid: Vec<f64>,
    #[arg(long, default_value_t = dualcert::attacks::DEFAULT_STEPS)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AttackBbArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub dual: DualArgs,
    #[arg(long, value_enum, default_value_t = Target::Dual)]
    pub target: Target,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])]
    pub eps_grid: Vec<f64>,
    #[arg(long, default_value_t = dualcert::attacks::DEFAULT_STEPS)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RsCurveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub dual: DualArgs,
    #[command(flatten)]
    pub smooth: SmoothArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035])]
    pub eps_grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiArg {
    Constant,
    Exp,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SphereArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub theta0: f64,
    #[arg(long, value_enum, default_value_t = PsiArg::Constant)]
    pub psi: PsiArg,
    /// Geodesic budgets; defaults to 0, 0.01, ..., 3.14.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CubeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.05, 0.1])]
    pub eps_grid: Vec<f64>,
    /// Monte-Carlo samples per (alpha, eps), split evenly between classes.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Points per class; defaults to 1, 2, 5, 10, 20, 50, 100.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Vec<usize>,
    /// Nearest neighbours within the class instead of over all points.
    #[arg(long)]
    pub within_class: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    Uos,
    Cube,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = GenKind::Uos)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 32)]
    pub ambient_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub subspace_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 50)]
    pub test_per_class: usize,
    /// Cube example parameter; the slab half-width is exp(-alpha)/2 + eps.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Certify(_) => "certify",
            Command::AttackProj(_) => "attack-proj",
            Command::AttackBb(_) => "attack-bb",
            Command::RsCurve(_) => "rs-curve",
            Command::Sphere(_) => "sphere",
            Command::Cube(_) => "cube",
            Command::Concentration(_) => "concentration",
            Command::GenData(_) => "gen-data",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Certify(a) => &a.common,
            Command::AttackProj(a) => &a.common,
            Command::AttackBb(a) => &a.common,
            Command::RsCurve(a) => &a.common,
            Command::Sphere(a) => &a.common,
            Command::Cube(a) => &a.common,
            Command::Concentration(a) => &a.common,
            Command::GenData(a) => &a.common,
        }
    }

    /// Effective configuration as JSON, for the manifest.
    pub fn snapshot(&self) -> serde_json::Value {
        let v = match self {
            Command::Certify(a) => serde_json::to_value(a),
            Command::AttackProj(a) => serde_json::to_value(a),
            Command::AttackBb(a) => serde_json::to_value(a),
            Command::RsCurve(a) => serde_json::to_value(a),
            Command::Sphere(a) => serde_json::to_value(a),
            Command::Cube(a) => serde_json::to_value(a),
            Command::Concentration(a) => serde_json::to_value(a),
            Command::GenData(a) => serde_json::to_value(a),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}
