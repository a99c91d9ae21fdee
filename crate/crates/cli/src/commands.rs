//! One function per subcommand. All numbers come from the core library;
//! this module only selects inputs and formats outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use mallows_core::ingest::{aggregate, load_microdata_csv, write_interval_csv, AggregateOptions};
use mallows_core::mallows::{distance_matrix, iso_distance_set, symmetric_delta};
use mallows_core::moments::{
    correlation_from_cov, cov_model7, frobenius_diff, sample_barycentre, symbolic_covariance_with,
};
use mallows_core::{Divisor, Interval, LatentDistribution, LatentSpec, Matrix, MomentSummary};
use serde::Serialize;
use serde_json::json;

use crate::analysis::Analysis;
use crate::args::{Command, InputArgs};
use crate::config::{self, AnalysisConfig, InputSettings, Source};

/// Destination of a command's artifacts.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir })
    }

    /// Written to `DIR/name`, or to stdout without an output directory.
    fn primary(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => write_file(&d.join(name), content),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }

    /// Written only when an output directory is set.
    fn secondary(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => write_file(&d.join(name), content),
            None => Ok(()),
        }
    }

    fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Square matrix with a leading column of row names.
fn matrix_csv(names: &[String], m: &Matrix) -> Result<String> {
    let header: Vec<String> = std::iter::once(String::new()).chain(names.iter().cloned()).collect();
    csv_text(
        &header,
        names.iter().enumerate().map(|(i, n)| {
            std::iter::once(n.clone())
                .chain(m.row(i).iter().map(f64::to_string))
                .collect()
        }),
    )
}

pub fn run(command: Command, cfg: &AnalysisConfig, out: &Output) -> Result<()> {
    let input = |args: &InputArgs| InputSettings::merge(args, cfg);
    match command {
        Command::Aggregate { input: args, encoding } => {
            aggregate_cmd(&input(&args)?, config::encoding(encoding, cfg), out)
        }
        Command::Fit { input: args } => fit_cmd(&Analysis::load(&input(&args)?)?, out),
        Command::Distance { input: args, squared } => distance_cmd(&Analysis::load(&input(&args)?)?, squared, out),
        Command::Barycentre { input: args } => barycentre_cmd(&Analysis::load(&input(&args)?)?, out),
        Command::Covariance { input: args, divisor } => {
            let d = config::divisor(divisor.divisor, cfg);
            covariance_cmd(&Analysis::load(&input(&args)?)?, d, false, out)
        }
        Command::Correlation { input: args, divisor } => {
            let d = config::divisor(divisor.divisor, cfg);
            covariance_cmd(&Analysis::load(&input(&args)?)?, d, true, out)
        }
        Command::Compare {
            input: args,
            divisor,
            reference,
        } => {
            let d = config::divisor(divisor.divisor, cfg);
            let reference = reference
                .or_else(|| cfg.reference.clone())
                .unwrap_or_else(|| "model7".into());
            compare_cmd(&Analysis::load(&input(&args)?)?, d, &reference, out)
        }
        Command::Ellipse {
            x0,
            delta,
            latent,
            radius,
            points,
        } => ellipse_cmd(&x0, delta, latent.as_deref(), &radius, points, out),
        Command::PairsData { input: args, pair } => pairs_cmd(&Analysis::load(&input(&args)?)?, &pair, out),
    }
}

fn aggregate_cmd(settings: &InputSettings, encoding: mallows_core::ingest::Encoding, out: &Output) -> Result<()> {
    let Source::Microdata(path) = &settings.source else {
        bail!("aggregate needs --microdata input");
    };
    let data = load_microdata_csv(path).with_context(|| format!("loading {}", path.display()))?;
    let opts = AggregateOptions {
        trim: settings.trim,
        keep_degenerate: settings.keep_degenerate,
        variable_order: settings.variables.clone(),
    };
    let agg = aggregate(&data.records, &opts)?;
    let mut buf = Vec::new();
    write_interval_csv(&agg.frame, &mut buf, encoding)?;
    out.primary("intervals.csv", &String::from_utf8(buf)?)?;
    out.secondary("aggregation_report.json", &to_json(&agg.report)?)
}

fn fit_cmd(a: &Analysis, out: &Output) -> Result<()> {
    let mut fits = a.fits.clone();
    // With an output directory, KDE fits point at a saved copy of their
    // scaled sample so the latents can be reused from a config file.
    if let (Some(dir), Some(samples)) = (out.dir(), &a.samples) {
        for (f, s) in fits.iter_mut().zip(samples) {
            if f.latent.family == "kde" {
                let rel = format!("samples/{}.txt", f.variable);
                let text: String = s.values.iter().map(|v| format!("{v}\n")).collect();
                write_file(&dir.join(&rel), &text)?;
                f.latent.sample_path = Some(rel);
            }
        }
    }
    let latents: serde_json::Map<String, serde_json::Value> = fits
        .iter()
        .map(|f| Ok((f.variable.clone(), serde_json::to_value(&f.latent)?)))
        .collect::<Result<_>>()?;
    let doc = json!({
        "n_rows": a.frame.n_rows(),
        "variables": fits,
        "latents": latents,
        "moment_summary": summary_json(a.frame.names(), &a.summary),
        "aggregation": a.aggregation,
        "dropped_rows": a.dropped_rows,
    });
    out.primary("fit.json", &to_json(&doc)?)
}

fn summary_json(names: &[String], s: &MomentSummary) -> serde_json::Value {
    json!({ "names": names, "psi": s.psi, "euu": s.euu.to_rows() })
}

fn distance_cmd(a: &Analysis, squared: bool, out: &Output) -> Result<()> {
    let d = distance_matrix(&a.frame, squared)?;
    let labels: Vec<String> = (0..a.frame.n_rows()).map(|i| a.frame.label(i)).collect();
    out.primary("distance.csv", &matrix_csv(&labels, &d)?)
}

fn barycentre_cmd(a: &Analysis, out: &Output) -> Result<()> {
    let b = sample_barycentre(&a.frame)?;
    let intervals = b.intervals();
    let rows: Vec<serde_json::Value> = a
        .frame
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| {
            json!({
                "variable": n,
                "centre": b.centres[j],
                "range": b.ranges[j],
                "lower": intervals[j].lower,
                "upper": intervals[j].upper,
            })
        })
        .collect();
    let doc = json!({
        "n_rows": a.frame.n_rows(),
        "variables": rows,
        "frechet_variance": b.frechet_variance,
        "latents": latent_specs(a),
    });
    out.primary("barycentre.json", &to_json(&doc)?)?;
    let header = ["variable", "centre", "range", "lower", "upper"].map(String::from);
    let csv = csv_text(
        &header,
        a.frame.names().iter().enumerate().map(|(j, n)| {
            vec![
                n.clone(),
                b.centres[j].to_string(),
                b.ranges[j].to_string(),
                intervals[j].lower.to_string(),
                intervals[j].upper.to_string(),
            ]
        }),
    )?;
    out.secondary("barycentre.csv", &csv)
}

fn latent_specs(a: &Analysis) -> Vec<LatentSpec> {
    a.frame.latents().iter().map(LatentSpec::from).collect()
}

fn covariance_cmd(a: &Analysis, divisor: Divisor, correlation_primary: bool, out: &Output) -> Result<()> {
    let names = a.frame.names();
    let cov = symbolic_covariance_with(&a.frame, &a.summary, divisor)?;
    let cor = cov.correlation(names)?;
    let (cov_csv, cor_csv) = (matrix_csv(names, &cov.sigma_b)?, matrix_csv(names, &cor)?);
    if correlation_primary {
        out.primary("correlation.csv", &cor_csv)?;
        out.secondary("covariance.csv", &cov_csv)?;
    } else {
        out.primary("covariance.csv", &cov_csv)?;
        out.secondary("correlation.csv", &cor_csv)?;
    }
    let doc = json!({
        "names": names,
        "n": cov.n,
        "divisor": cov.divisor,
        "form": cov.form,
        "covariance": cov.sigma_b.to_rows(),
        "correlation": cor.to_rows(),
        "centre_covariance": cov.sigma_cc.to_rows(),
        "range_covariance": cov.sigma_rr.to_rows(),
        "centre_range_covariance": cov.sigma_cr.to_rows(),
        "moment_summary": summary_json(names, &cov.summary),
        "min_eigenvalue": cov.min_eigenvalue,
        "latents": latent_specs(a),
    });
    out.secondary("covariance.json", &to_json(&doc)?)
}

fn compare_cmd(a: &Analysis, divisor: Divisor, reference: &str, out: &Output) -> Result<()> {
    let names = a.frame.names();
    let cov = symbolic_covariance_with(&a.frame, &a.summary, divisor)?;
    let reference_cov = if reference.eq_ignore_ascii_case("model7") {
        cov_model7(&a.frame, divisor)?
    } else {
        let latent = LatentDistribution::from_str(reference).context("--reference")?;
        let mut frame = a.frame.clone();
        frame.set_latents(vec![latent; frame.n_vars()])?;
        frame.assign_degenerate_latents();
        let summary = MomentSummary::from_latents(frame.latents());
        symbolic_covariance_with(&frame, &summary, divisor)?.sigma_b
    };
    let cor = correlation_from_cov(&cov.sigma_b, names)?;
    let reference_cor = correlation_from_cov(&reference_cov, names)?;
    let doc = json!({
        "names": names,
        "reference": reference,
        "divisor": divisor,
        "frobenius_covariance": frobenius_diff(&cov.sigma_b, &reference_cov)?,
        "frobenius_correlation": frobenius_diff(&cor, &reference_cor)?,
        "covariance": cov.sigma_b.to_rows(),
        "reference_covariance": reference_cov.to_rows(),
        "correlation": cor.to_rows(),
        "reference_correlation": reference_cor.to_rows(),
    });
    out.primary("compare.json", &to_json(&doc)?)
}

fn parse_pair(text: &str, what: &str) -> Result<(String, String)> {
    match text.split_once(',') {
        Some((a, b)) => Ok((a.trim().to_string(), b.trim().to_string())),
        None => bail!("{what} expects two comma-separated values, got '{text}'"),
    }
}

fn ellipse_cmd(
    x0: &str,
    delta: Option<f64>,
    latent: Option<&str>,
    radii: &[f64],
    points: usize,
    out: &Output,
) -> Result<()> {
    let (a, b) = parse_pair(x0, "--x0")?;
    let (a, b): (f64, f64) = (
        a.parse().with_context(|| format!("--x0 lower '{a}'"))?,
        b.parse().with_context(|| format!("--x0 upper '{b}'"))?,
    );
    let x0 = Interval::new(a, b)?;
    let delta = match (delta, latent) {
        (Some(d), _) => d,
        (None, Some(l)) => symmetric_delta(&LatentDistribution::from_str(l)?)?,
        (None, None) => symmetric_delta(&LatentDistribution::Uniform)?,
    };
    if points == 0 {
        bail!("--points must be positive");
    }
    let mut rows = Vec::new();
    for &radius in radii {
        for (c, r) in iso_distance_set(&x0, delta, radius, points)? {
            rows.push(vec![radius.to_string(), c.to_string(), r.to_string()]);
        }
    }
    let header = ["radius", "centre", "range"].map(String::from);
    out.primary("ellipse.csv", &csv_text(&header, rows)?)
}

fn pairs_cmd(a: &Analysis, pairs: &[String], out: &Output) -> Result<()> {
    let f = &a.frame;
    let names = f.names();
    let mut selected = Vec::new();
    if pairs.is_empty() {
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                selected.push((i, j));
            }
        }
    } else {
        for p in pairs {
            let (x, y) = parse_pair(p, "--pair")?;
            let idx = |n: &str| {
                f.column_index(n)
                    .with_context(|| format!("unknown variable '{n}' in --pair"))
            };
            selected.push((idx(&x)?, idx(&y)?));
        }
    }
    if selected.is_empty() {
        bail!("pairs-data needs at least two variables");
    }
    let bary = sample_barycentre(f)?.intervals();
    let mut rows = Vec::new();
    for &(i, j) in &selected {
        let row = |label: String, kind: &str, x: Interval, y: Interval| {
            vec![
                names[i].clone(),
                names[j].clone(),
                label,
                kind.to_string(),
                x.lower.to_string(),
                x.upper.to_string(),
                y.lower.to_string(),
                y.upper.to_string(),
            ]
        };
        for r in 0..f.n_rows() {
            rows.push(row(f.label(r), "observation", f.get(r, i), f.get(r, j)));
        }
        rows.push(row("barycentre".into(), "barycentre", bary[i], bary[j]));
    }
    let header = ["x", "y", "label", "kind", "x_lower", "x_upper", "y_lower", "y_upper"].map(String::from);
    out.primary("pairs.csv", &csv_text(&header, rows)?)
}
