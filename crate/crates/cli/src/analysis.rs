//! Loading the interval frame and resolving one latent per variable.

use anyhow::{bail, Context, Result};
use mallows_core::estimation::{
    empirical_moment_summary, fit_beta_mom, fit_kde, fit_triangular_pearson, FitReport, TriangularModeFit,
    VariableEstimate,
};
use mallows_core::ingest::{
    aggregate, load_interval_csv, load_microdata_csv, load_summary_csv, summary_frame, AggregateOptions,
    AggregationReport,
};
use mallows_core::{IntervalFrame, LatentDistribution, LatentSpec, MomentSummary, Moments, ScaledSample, SummaryRow};
use serde::Serialize;

use crate::config::{InputSettings, LatentRule, Source};

/// How one variable's latent was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct VariableFit {
    pub variable: String,
    pub rule: String,
    pub latent: LatentSpec,
    pub moments: Moments,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangular: Option<TriangularModeFit>,
}

/// A validated frame with its latents and moment summary.
#[derive(Debug)]
pub struct Analysis {
    pub frame: IntervalFrame,
    /// Moments used by the covariance; sample moments where fits had samples.
    pub summary: MomentSummary,
    pub fits: Vec<VariableFit>,
    pub aggregation: Option<AggregationReport>,
    /// Scaled microdata per variable, in frame order, when aggregated.
    pub samples: Option<Vec<ScaledSample>>,
    /// Labels of rows removed by `drop_degenerate_rows`.
    pub dropped_rows: Vec<String>,
}

impl Analysis {
    pub fn load(settings: &InputSettings) -> Result<Self> {
        if settings.trim > 0.0 && !matches!(settings.source, Source::Microdata(_)) {
            bail!("--trim applies only to --microdata input");
        }
        let mut summary_rows: Option<Vec<SummaryRow>> = None;
        let mut aggregation = None;
        let mut samples = None;
        let mut frame = match &settings.source {
            Source::Intervals(p) => load_interval_csv(p).with_context(|| format!("loading {}", p.display()))?,
            Source::Summary(p) => {
                let rows = load_summary_csv(p).with_context(|| format!("loading {}", p.display()))?;
                let frame = summary_frame(&rows)?;
                summary_rows = Some(rows);
                frame
            }
            Source::Microdata(p) => {
                let data = load_microdata_csv(p).with_context(|| format!("loading {}", p.display()))?;
                let opts = AggregateOptions {
                    trim: settings.trim,
                    keep_degenerate: settings.keep_degenerate,
                    variable_order: settings.variables.clone(),
                };
                let agg = aggregate(&data.records, &opts)?;
                aggregation = Some(agg.report);
                samples = Some(agg.samples);
                agg.frame
            }
        };
        if let (Some(vars), false) = (&settings.variables, matches!(settings.source, Source::Microdata(_))) {
            frame = frame.select_columns(vars)?;
        }
        let mut dropped_rows = Vec::new();
        if settings.drop_degenerate_rows {
            let (kept, dropped) = frame.drop_mixed_degenerate_rows();
            dropped_rows = dropped.iter().map(|&i| frame.label(i)).collect();
            if let Some(samples) = samples.as_mut() {
                remove_rows(samples, &dropped);
            }
            frame = kept;
        }
        for name in settings.var_rules.keys() {
            if frame.column_index(name).is_none() {
                bail!("latent given for unknown variable '{name}'");
            }
        }
        let (fits, summary) = resolve_latents(&frame, settings, samples.as_deref(), summary_rows.as_deref())?;
        frame.set_latents(fits.iter().map(|f| f.1.clone()).collect())?;
        frame.ensure_valid()?;
        Ok(Self {
            frame,
            summary,
            fits: fits.into_iter().map(|f| f.0).collect(),
            aggregation,
            samples,
            dropped_rows,
        })
    }
}

/// Drops the values of removed frame rows and renumbers the rest.
fn remove_rows(samples: &mut [ScaledSample], dropped: &[usize]) {
    for s in samples {
        let mut kept = ScaledSample::new(s.variable.clone());
        for (&v, &row) in s.values.iter().zip(&s.rows) {
            if dropped.binary_search(&row).is_err() {
                let shift = dropped.partition_point(|&d| d < row);
                kept.push_row(row - shift, &[v]);
            }
        }
        *s = kept;
    }
}

fn resolve_latents(
    frame: &IntervalFrame,
    settings: &InputSettings,
    samples: Option<&[ScaledSample]>,
    summary_rows: Option<&[SummaryRow]>,
) -> Result<(Vec<(VariableFit, LatentDistribution)>, MomentSummary)> {
    let degenerate = frame.degenerate_columns();
    let names = frame.names();
    let wants_triangular = names
        .iter()
        .zip(&degenerate)
        .any(|(n, &d)| !d && matches!(settings.rule_for(n), LatentRule::FitTriangularPearson));
    let triangular: Vec<TriangularModeFit> = if wants_triangular {
        let Some(rows) = summary_rows else {
            bail!("fit:triangular-pearson needs --summary input");
        };
        let rows: Vec<SummaryRow> = rows.iter().filter(|r| names.contains(&r.variable)).cloned().collect();
        fit_triangular_pearson(&rows, settings.alpha, None)?
    } else {
        Vec::new()
    };
    let mut out = Vec::with_capacity(names.len());
    let mut estimates = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let rule = settings.rule_for(name);
        let sample = || -> Result<&[f64]> {
            match samples {
                Some(s) => Ok(&s[j].values),
                None => bail!("{} for '{name}' needs --microdata input", rule.describe()),
            }
        };
        let mut fit_sample = None;
        let mut report = None;
        let mut tri = None;
        let (latent, rule_text) = if degenerate[j] {
            (LatentDistribution::Degenerate, "degenerate".to_string())
        } else {
            let latent = match rule {
                LatentRule::Family(d) => d.clone(),
                LatentRule::FitBeta => {
                    let s = sample()?;
                    let l = fit_beta_mom(s)
                        .with_context(|| format!("beta fit for '{name}'"))?
                        .latent();
                    fit_sample = Some(s.to_vec());
                    l
                }
                LatentRule::FitKde => {
                    let s = sample()?;
                    let l = fit_kde(s, settings.bandwidth).with_context(|| format!("KDE fit for '{name}'"))?;
                    fit_sample = Some(s.to_vec());
                    l
                }
                LatentRule::FitTriangularPearson => {
                    let t = triangular
                        .iter()
                        .find(|t| &t.variable == name)
                        .with_context(|| format!("no summary statistics for '{name}'"))?;
                    tri = Some(t.clone());
                    t.latent()
                }
            };
            if let Some(s) = &fit_sample {
                report = Some(FitReport::new(name, &latent, s));
            }
            (latent, rule.describe())
        };
        estimates.push(VariableEstimate {
            name: name.clone(),
            latent: Some(latent.clone()),
            sample: fit_sample,
        });
        out.push((
            VariableFit {
                variable: name.clone(),
                rule: rule_text,
                latent: LatentSpec::from(&latent),
                moments: latent.moments(),
                report,
                triangular: tri,
            },
            latent,
        ));
    }
    let summary = empirical_moment_summary(&estimates)?;
    Ok((out, summary))
}
