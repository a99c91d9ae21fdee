//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "mallows",
    version,
    about = "Distances, barycentres and covariances of interval-valued data under latent microdata models"
)]
pub struct Cli {
    /// JSON configuration file; command-line flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Upper bound on worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Directory receiving every artifact. Without it the primary artifact
    /// goes to stdout and secondary ones are not written.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate microdata into an interval CSV.
    Aggregate {
        #[command(flatten)]
        input: InputArgs,
        /// Column encoding of the written intervals.
        #[arg(long, value_enum)]
        encoding: Option<EncodingArg>,
    },
    /// Resolve every variable's latent distribution and report the fits.
    Fit {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Pairwise distance matrix between observations.
    Distance {
        #[command(flatten)]
        input: InputArgs,
        /// Emit squared distances.
        #[arg(long)]
        squared: bool,
    },
    /// Sample barycentre and Fréchet variance.
    Barycentre {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Barycentric covariance matrix.
    Covariance {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        divisor: DivisorArgs,
    },
    /// Correlation matrix derived from the barycentric covariance.
    Correlation {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        divisor: DivisorArgs,
    },
    /// Frobenius distance between the barycentric covariance and a reference.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        divisor: DivisorArgs,
        /// `model7` for the diagonal-corrected centre covariance, or a latent
        /// applied to every variable (e.g. `uniform`).
        #[arg(long, value_name = "REF")]
        reference: Option<String>,
    },
    /// Points of an iso-distance ellipse in the centre-range plane.
    Ellipse {
        /// Reference interval as `lower,upper`.
        #[arg(long, value_name = "A,B", allow_hyphen_values = true)]
        x0: String,
        /// Range weight `Var(U) / 4`.
        #[arg(long, conflicts_with = "latent")]
        delta: Option<f64>,
        /// Mean-zero latent supplying the range weight.
        #[arg(long)]
        latent: Option<String>,
        /// Distance level; repeat for several ellipses.
        #[arg(long, default_value = "1")]
        radius: Vec<f64>,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Rectangle and barycentre coordinates for pairs of variables.
    PairsData {
        #[command(flatten)]
        input: InputArgs,
        /// Variable pair `x,y`; repeat for several. Defaults to all pairs.
        #[arg(long, value_name = "X,Y")]
        pair: Vec<String>,
    },
}

/// Where the interval frame comes from and how latents are chosen.
#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Interval CSV (`name.lo,name.hi` or `name.c,name.r` columns).
    #[arg(long, value_name = "FILE")]
    pub intervals: Option<PathBuf>,
    /// Long-format microdata CSV: group columns, `variable`, `value`.
    #[arg(long, value_name = "FILE")]
    pub microdata: Option<PathBuf>,
    /// Summary statistics CSV: `group,variable,mean,median,min,max`.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    /// Fraction of each microdata cell trimmed from each side.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Keep zero-range microdata cells instead of dropping their group.
    #[arg(long)]
    pub keep_degenerate: bool,
    /// Drop rows whose zero ranges clash with positive ranges.
    #[arg(long)]
    pub drop_degenerate_rows: bool,
    /// Variables to keep, in order (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<String>>,
    /// Latent rule for every variable: a family such as `uniform`,
    /// `triangular:0`, `beta:2,3`, or `fit:beta`, `fit:kde`,
    /// `fit:triangular-pearson`.
    #[arg(long, value_name = "RULE")]
    pub latent: Option<String>,
    /// Latent rule for one variable, `NAME=RULE`; repeatable.
    #[arg(long = "latent-var", value_name = "NAME=RULE")]
    pub latent_var: Vec<String>,
    /// Family-wise level of the mode symmetry tests.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// KDE bandwidth on the latent scale; Silverman's rule when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DivisorArgs {
    /// Sample covariance divisor.
    #[arg(long, value_enum)]
    pub divisor: Option<DivisorArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DivisorArg {
    N,
    #[value(name = "n-1")]
    NMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    LowerUpper,
    CentreRange,
}
