use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use slevolve_core::ode::OdeOptions;

/// Construct and verify special Lagrangian submanifolds of C^m obtained by
/// evolving quadrics.
///
/// Every option can also be given in a JSON object passed with --config,
/// keyed by the option name with underscores (`t_span`, `A`, ...). Options
/// on the command line take precedence over the file. JSON results embed
/// the resolved configuration and the library version.
///
/// Exit status: 0 on success, 2 for invalid input or usage, 3 for numerical
/// failures (and for `verify` when the residual exceeds the threshold).
#[derive(Parser, Debug)]
#[command(name = "slevolve", version, max_term_width = 100)]
pub struct Cli {
    /// JSON file of option values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages [default: number of cores]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Output file. Relative paths are taken inside the output directory
    /// when one is set. Without --out, results go to <dir>/<command>.<ext>
    /// or, with no directory, to standard output
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Default output directory
    #[arg(long, global = true, env = "SLEVOLVE_OUT_DIR", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// No progress messages on standard error
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the w-system, or the general flow for an evolution data document
    Evolve(Evolve),
    /// Phase advances beta_j and the period T of a case (d) family
    Betas(Betas),
    /// Limits of beta as A tends to 0 and to A_max
    Limits(Limits),
    /// Search a family for parameters with rational beta_j / pi
    Search(Search),
    /// Sample a family on a grid and export the mesh
    Mesh(MeshCmd),
    /// Special Lagrangian residuals of a mesh file or of a family
    Verify(Verify),
    /// The m = 3 cross-section curve and, given A, the conformal cone map
    Crosssection(Crosssection),
    /// Evolve a paraboloid (non-centred quadric)
    Affine(Affine),
    /// Summary of everything known about one parameter set
    Report(Report),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve(_) => "evolve",
            Command::Betas(_) => "betas",
            Command::Limits(_) => "limits",
            Command::Search(_) => "search",
            Command::Mesh(_) => "mesh",
            Command::Verify(_) => "verify",
            Command::Crosssection(_) => "crosssection",
            Command::Affine(_) => "affine",
            Command::Report(_) => "report",
        }
    }
}

// ---------------------------------------------------------------------------
// value types

fn parse_pair(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|e| format!("bad number {t:?}: {e}"))
    };
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected re or re,im, got {s:?}")),
    }
}

/// A complex number written `re,im`; JSON accepts `[re, im]` too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexArg(pub Complex64);

impl FromStr for ComplexArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_pair(s).map(ComplexArg)
    }
}

impl fmt::Display for ComplexArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0.re, self.0.im)
    }
}

impl Serialize for ComplexArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.re, self.0.im].serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Pair([f64; 2]),
    Real(f64),
    Text(String),
}

impl ComplexRepr {
    fn get(self) -> Result<Complex64, String> {
        match self {
            ComplexRepr::Pair([re, im]) => Ok(Complex64::new(re, im)),
            ComplexRepr::Real(re) => Ok(Complex64::new(re, 0.0)),
            ComplexRepr::Text(s) => parse_pair(&s),
        }
    }
}

impl<'de> Deserialize<'de> for ComplexArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ComplexRepr::deserialize(d)?
            .get()
            .map(ComplexArg)
            .map_err(serde::de::Error::custom)
    }
}

/// Complex numbers `re,im;re,im;...`; JSON accepts `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexList(pub Vec<Complex64>);

impl FromStr for ComplexList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';')
            .filter(|t| !t.trim().is_empty())
            .map(parse_pair)
            .collect::<Result<_, _>>()
            .map(ComplexList)
    }
}

impl Serialize for ComplexList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0
            .iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            List(Vec<ComplexRepr>),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::List(v) => v
                .into_iter()
                .map(ComplexRepr::get)
                .collect::<Result<_, _>>()
                .map(ComplexList)
                .map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Json,
    Obj,
    Ply,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Scan alpha = (1, 2, 2) (m = 3, a = 1)
    Sym,
    /// Scan alpha = (1, s, s/(s-1)) for s in [s_min, s_max] (m = 3, a = 1)
    Line,
    /// Scan A for the given alphas
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    /// Centred quadric evolved by the w-system
    Centred,
    /// Paraboloid evolved by the (w, beta) system
    Affine,
    /// Centred case (c), closed form
    CaseC,
    /// Closed-form m = 3 paraboloid solutions
    Affine3,
    /// m = 3 cone r Phi(s, t) over the cross-section
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    A2,
    A1,
}

// ---------------------------------------------------------------------------
// shared groups

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Centred {
    /// Complex dimension; checked against the number of alphas
    #[arg(long)]
    pub m: Option<usize>,

    /// Number of plus signs in the signature
    #[arg(long)]
    pub a: Option<usize>,

    /// alpha_1,...,alpha_m
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,

    /// Invariant A = Q(u)^(1/2) sin(theta)
    #[arg(long = "A", allow_hyphen_values = true)]
    #[serde(rename = "A")]
    pub big_a: Option<f64>,

    /// Level c of the quadric
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub c: f64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Ode {
    /// Relative tolerance of the integrator
    #[arg(long, default_value = "1e-10")]
    pub rtol: f64,

    /// Absolute tolerance of the integrator
    #[arg(long, default_value = "1e-12")]
    pub atol: f64,

    /// Norm of the state counted as escape to infinity
    #[arg(long, default_value = "1e8")]
    pub blowup: f64,

    /// Step limit per integration
    #[arg(long, default_value = "5000000")]
    pub max_steps: usize,
}

impl Ode {
    pub fn options(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            blowup: Some(self.blowup),
            ..OdeOptions::default()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Surface {
    /// Family to sample
    #[arg(long, value_enum, default_value = "centred")]
    pub kind: SurfaceKind,

    #[command(flatten)]
    #[serde(flatten)]
    pub params: Centred,

    /// Constant C = beta(0) - u(0)/2 of the paraboloid family, as re,im
    #[arg(long = "C", default_value = "0,0", allow_hyphen_values = true)]
    #[serde(rename = "C")]
    pub c_const: ComplexArg,

    /// Variant of the closed-form m = 3 paraboloid family
    #[arg(long, value_enum, default_value = "a2")]
    pub variant: Variant,

    /// w_1(0);w_2(0) for the closed-form family, each as re,im
    #[arg(long, allow_hyphen_values = true)]
    pub w0: Option<ComplexList>,

    /// beta(0) for the closed-form family, as re,im
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub beta0: ComplexArg,

    /// Time range as start,end
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "-1,1",
        allow_hyphen_values = true
    )]
    pub t_span: Vec<f64>,

    /// Truncation radius of the non-compact chart directions (cone: largest r)
    #[arg(long, default_value = "2")]
    pub radius: f64,
}

// ---------------------------------------------------------------------------
// subcommands

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Evolve {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Centred,

    /// Initial letters w_1;...;w_m, each as re,im; replaces --alphas/--A
    #[arg(long, allow_hyphen_values = true)]
    pub w0: Option<ComplexList>,

    /// Evolution data document (slevodata-1); runs the general flow
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Initial map for --data (JSON with n, m, A, t0) [default: diag(w0) or the identity]
    #[arg(long, value_name = "FILE")]
    pub phi0: Option<PathBuf>,

    /// End time (negative runs backwards) [default: one period in case (d), else 10]
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,

    /// Number of output intervals
    #[arg(long, default_value = "200")]
    pub steps: usize,

    /// Points per checkpoint for the membership test of the general flow
    #[arg(long, default_value = "16")]
    pub samples: usize,

    /// Seed for sampled points
    #[arg(long, default_value = "1")]
    pub seed: u64,

    #[arg(long, value_enum, default_value = "json")]
    pub format: TableFormat,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Betas {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Centred,

    /// Also measure T and beta from the w-system
    #[arg(long)]
    pub check_ode: bool,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Limits {
    /// Complex dimension; checked against the number of alphas
    #[arg(long)]
    pub m: Option<usize>,

    /// Number of plus signs in the signature
    #[arg(long)]
    pub a: Option<usize>,

    /// alpha_1,...,alpha_m (normalized)
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Search {
    #[arg(long, default_value = "3")]
    pub m: usize,

    #[arg(long, default_value = "1")]
    pub a: usize,

    #[arg(long, value_enum, default_value = "sym")]
    pub family: FamilyKind,

    /// alpha_1,...,alpha_m for --family fixed
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    /// Lower end of s for --family line
    #[arg(long, default_value = "1.2")]
    pub s_min: f64,

    /// Upper end of s for --family line
    #[arg(long, default_value = "6")]
    pub s_max: f64,

    /// Largest denominator b
    #[arg(long, default_value = "8")]
    pub bmax: i64,

    /// Acceptance threshold for |beta_j - pi a_j / b|
    #[arg(long, default_value = "1e-8")]
    pub tol: f64,

    /// Samples of A / A_max per scan line
    #[arg(long, default_value = "48")]
    pub grid: usize,

    /// Samples of s for --family line
    #[arg(long, default_value = "24")]
    pub s_grid: usize,

    /// Output times per period b T in the re-verification
    #[arg(long, default_value = "64")]
    pub verify_samples: usize,

    /// Largest accepted sign-relation residual in the re-verification
    #[arg(long, default_value = "1e-6")]
    pub verify_tol: f64,

    /// Level c used for the topology label
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub c: f64,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MeshCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: Surface,

    /// Number of time samples
    #[arg(long, default_value = "21")]
    pub nt: usize,

    /// Cells per chart axis
    #[arg(long, default_value = "16")]
    pub res: usize,

    #[arg(long, value_enum, default_value = "json")]
    pub format: MeshFormat,

    /// Map to R^3 for obj/ply: `pca` or three 0-based coordinate indices
    /// [default: pca when m <= 3]
    #[arg(long)]
    pub projection: Option<String>,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Verify {
    /// Mesh document (slmesh-1 JSON); otherwise the family options are sampled
    #[arg(long, value_name = "FILE")]
    pub mesh: Option<PathBuf>,

    /// Estimate tangents from grid neighbours even if analytic residuals are stored
    #[arg(long)]
    pub fd: bool,

    /// Largest accepted residual
    #[arg(long, default_value = "1e-6")]
    pub threshold: f64,

    #[command(flatten)]
    #[serde(flatten)]
    pub surface: Surface,

    /// Random samples for family checks
    #[arg(long, default_value = "1000")]
    pub samples: usize,

    /// Seed for the random samples
    #[arg(long, default_value = "1")]
    pub seed: u64,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Crosssection {
    /// alpha_1,alpha_2,alpha_3 with 1/alpha_1 - 1/alpha_2 - 1/alpha_3 = 0
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    /// Points along one period of the curve
    #[arg(long, default_value = "200")]
    pub samples: usize,

    /// Invariant A; adds the checks of the conformal cone map
    #[arg(long = "A", allow_hyphen_values = true)]
    #[serde(rename = "A")]
    pub big_a: Option<f64>,

    /// Time range of the cone map as start,end
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "-1,1",
        allow_hyphen_values = true
    )]
    pub t_span: Vec<f64>,

    /// Time samples of the cone map
    #[arg(long, default_value = "50")]
    pub nt: usize,

    #[arg(long, value_enum, default_value = "json")]
    pub format: TableFormat,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Affine {
    /// Complex dimension; checked against the number of alphas plus one
    #[arg(long)]
    pub m: Option<usize>,

    /// Number of plus signs among the first m - 1 coordinates
    #[arg(long)]
    pub a: Option<usize>,

    /// alpha_1,...,alpha_{m-1}
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    /// Invariant A
    #[arg(long = "A", allow_hyphen_values = true)]
    #[serde(rename = "A")]
    pub big_a: Option<f64>,

    /// Constant C = beta(0) - u(0)/2, as re,im
    #[arg(long = "C", default_value = "0,0", allow_hyphen_values = true)]
    #[serde(rename = "C")]
    pub c_const: ComplexArg,

    /// End time [default: five periods in case (d), else 5]
    #[arg(long, allow_hyphen_values = true)]
    pub t_end: Option<f64>,

    /// Number of output intervals
    #[arg(long, default_value = "200")]
    pub steps: usize,

    #[arg(long, value_enum, default_value = "json")]
    pub format: TableFormat,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: Centred,

    /// Largest denominator when testing beta / pi for rationality
    #[arg(long, default_value = "8")]
    pub bmax: i64,

    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,

    #[command(flatten)]
    #[serde(flatten)]
    pub ode: Ode,
}
