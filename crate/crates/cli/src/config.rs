//! Analysis configuration: a JSON file merged with command-line flags.
//!
//! Every field is optional. Flags win over the file; paths in the file are
//! relative to the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use mallows_core::{Divisor, LatentDistribution, LatentSpec};
use serde::{Deserialize, Serialize};

use crate::args::{DivisorArg, EncodingArg, InputArgs};

/// Default family-wise level of the mode symmetry tests.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub intervals: Option<PathBuf>,
    pub microdata: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub trim: Option<f64>,
    pub keep_degenerate: Option<bool>,
    pub drop_degenerate_rows: Option<bool>,
    pub variables: Option<Vec<String>>,
    /// Rule for variables without an entry in `latents`.
    pub latent: Option<RuleValue>,
    #[serde(default)]
    pub latents: BTreeMap<String, RuleValue>,
    pub alpha: Option<f64>,
    pub bandwidth: Option<f64>,
    pub divisor: Option<Divisor>,
    pub encoding: Option<EncodingValue>,
    pub reference: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// A latent rule written either as a string (`"triangular:0"`,
/// `"fit:beta"`) or as a family object (`{"family": "beta", ...}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleValue {
    Text(String),
    Spec(LatentSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingValue {
    LowerUpper,
    CentreRange,
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.intervals,
            &mut cfg.microdata,
            &mut cfg.summary,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        let resolve_spec = |rule: &mut RuleValue| {
            if let RuleValue::Spec(spec) = rule {
                if let Some(sp) = &spec.sample_path {
                    if Path::new(sp).is_relative() {
                        spec.sample_path = Some(base.join(sp).to_string_lossy().into_owned());
                    }
                }
            }
        };
        cfg.latent.iter_mut().for_each(resolve_spec);
        cfg.latents.values_mut().for_each(resolve_spec);
        Ok(cfg)
    }
}

/// How one variable's latent distribution is obtained.
#[derive(Debug, Clone)]
pub enum LatentRule {
    Family(LatentDistribution),
    FitBeta,
    FitKde,
    FitTriangularPearson,
}

impl LatentRule {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text.trim().to_ascii_lowercase().as_str() {
            "fit:beta" => Self::FitBeta,
            "fit:kde" => Self::FitKde,
            "fit:triangular-pearson" | "fit:triangular_pearson" => Self::FitTriangularPearson,
            other if other.starts_with("fit:") => bail!("unknown fitting rule '{text}'"),
            _ => Self::Family(LatentDistribution::from_str(text)?),
        })
    }

    fn from_value(value: &RuleValue) -> Result<Self> {
        match value {
            RuleValue::Text(t) => Self::parse(t),
            RuleValue::Spec(spec) => Ok(Self::Family(spec.to_distribution(None)?)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Family(d) => d.to_string(),
            Self::FitBeta => "fit:beta".into(),
            Self::FitKde => "fit:kde".into(),
            Self::FitTriangularPearson => "fit:triangular-pearson".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Intervals(PathBuf),
    Microdata(PathBuf),
    Summary(PathBuf),
}

/// Input settings after merging flags over the config file.
#[derive(Debug, Clone)]
pub struct InputSettings {
    pub source: Source,
    pub trim: f64,
    pub keep_degenerate: bool,
    pub drop_degenerate_rows: bool,
    pub variables: Option<Vec<String>>,
    pub default_rule: LatentRule,
    pub var_rules: BTreeMap<String, LatentRule>,
    pub alpha: f64,
    pub bandwidth: Option<f64>,
}

impl InputSettings {
    pub fn merge(flags: &InputArgs, cfg: &AnalysisConfig) -> Result<Self> {
        let flag_sources = [&flags.intervals, &flags.microdata, &flags.summary];
        let (intervals, microdata, summary) = if flag_sources.iter().any(|s| s.is_some()) {
            (flags.intervals.clone(), flags.microdata.clone(), flags.summary.clone())
        } else {
            (cfg.intervals.clone(), cfg.microdata.clone(), cfg.summary.clone())
        };
        let source = match (intervals, microdata, summary) {
            (Some(p), None, None) => Source::Intervals(p),
            (None, Some(p), None) => Source::Microdata(p),
            (None, None, Some(p)) => Source::Summary(p),
            _ => bail!("exactly one of --intervals, --microdata or --summary is required"),
        };
        let trim = flags.trim.or(cfg.trim).unwrap_or(0.0);
        if !(0.0..0.5).contains(&trim) {
            bail!("trim {trim} outside [0, 0.5)");
        }
        let alpha = flags.alpha.or(cfg.alpha).unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("alpha {alpha} outside (0, 1)");
        }
        let default_rule = match (&flags.latent, &cfg.latent) {
            (Some(t), _) => LatentRule::parse(t)?,
            (None, Some(v)) => LatentRule::from_value(v)?,
            (None, None) => LatentRule::Family(LatentDistribution::Uniform),
        };
        let mut var_rules = BTreeMap::new();
        for (name, value) in &cfg.latents {
            let rule = LatentRule::from_value(value).with_context(|| format!("latent for variable '{name}'"))?;
            var_rules.insert(name.clone(), rule);
        }
        for entry in &flags.latent_var {
            let Some((name, rule)) = entry.split_once('=') else {
                bail!("--latent-var expects NAME=RULE, got '{entry}'");
            };
            let rule = LatentRule::parse(rule).with_context(|| format!("latent for variable '{name}'"))?;
            var_rules.insert(name.trim().to_string(), rule);
        }
        Ok(Self {
            source,
            trim,
            keep_degenerate: flags.keep_degenerate || cfg.keep_degenerate.unwrap_or(false),
            drop_degenerate_rows: flags.drop_degenerate_rows || cfg.drop_degenerate_rows.unwrap_or(false),
            variables: flags.variables.clone().or_else(|| cfg.variables.clone()),
            default_rule,
            var_rules,
            alpha,
            bandwidth: flags.bandwidth.or(cfg.bandwidth),
        })
    }

    pub fn rule_for(&self, variable: &str) -> &LatentRule {
        self.var_rules.get(variable).unwrap_or(&self.default_rule)
    }
}

pub fn divisor(flag: Option<DivisorArg>, cfg: &AnalysisConfig) -> Divisor {
    match flag {
        Some(DivisorArg::N) => Divisor::N,
        Some(DivisorArg::NMinusOne) => Divisor::NMinusOne,
        None => cfg.divisor.unwrap_or(Divisor::N),
    }
}

pub fn encoding(flag: Option<EncodingArg>, cfg: &AnalysisConfig) -> mallows_core::ingest::Encoding {
    use mallows_core::ingest::Encoding;
    let centre_range = match flag {
        Some(e) => e == EncodingArg::CentreRange,
        None => cfg.encoding == Some(EncodingValue::CentreRange),
    };
    if centre_range {
        Encoding::CentreRange
    } else {
        Encoding::LowerUpper
    }
}
