//! Plain-text tables.

use std::fmt::Write;

use crate::graph::NodeGroup;
use crate::sampler::MissInfo;

use super::{McErrorReport, NodePsrf, NodeSummary, PosteriorSummary};

/// Decimals that give about four significant digits for the largest value.
fn decimals(values: &[f64]) -> usize {
    let big = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
    if big == 0.0 {
        return 3;
    }
    (3 - big.log10().floor() as i64).clamp(0, 6) as usize
}

fn column(values: &[f64]) -> Vec<String> {
    let d = decimals(values);
    values.iter().map(|v| format!("{v:.d$}")).collect()
}

fn opt_column(values: &[Option<f64>], d: usize) -> Vec<String> {
    values
        .iter()
        .map(|v| v.map(|x| format!("{x:.d$}")).unwrap_or_default())
        .collect()
}

fn percent(p: f64) -> String {
    format!("{}%", (p * 1000.0).round() / 10.0)
}

/// Left-aligned row names followed by right-aligned columns.
fn table(out: &mut String, header: &[String], names: &[String], cols: &[Vec<String>]) {
    let name_w = names.iter().map(|n| n.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = header
        .iter()
        .zip(cols)
        .map(|(h, c)| c.iter().map(|s| s.len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let mut line = format!("{:name_w$}", "");
    for (h, w) in header.iter().zip(&widths) {
        let _ = write!(line, " {h:>w$}");
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for (r, name) in names.iter().enumerate() {
        let mut line = format!("{name:name_w$}");
        for (c, w) in cols.iter().zip(&widths) {
            let _ = write!(line, " {:>w$}", c[r]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

fn section_title(g: NodeGroup) -> Option<&'static str> {
    use NodeGroup::*;
    Some(match g {
        Betas => "Posterior summary:",
        GammaMain => "Posterior summary of the intercepts:",
        DeltaMain => "Posterior summary of the intercept increments:",
        DMain => "Posterior summary of random effects covariance matrix:",
        SigmaMain => "Posterior summary of residual std. deviation:",
        TauMain | TauMainBeta => "Posterior summary of the precision parameter:",
        ShapeMain => "Posterior summary of the shape parameter:",
        _ => return None,
    })
}

fn model_description(model_type: &str) -> String {
    let base = match model_type {
        "lm" => "linear model",
        "lmm" => "linear mixed model",
        "lognorm" => "log-normal model",
        "betareg" => "beta model",
        "clm" => "cumulative logit model",
        "mlogit" => "multinomial logit model",
        "survreg" => "Weibull survival model",
        t if t.starts_with("glmm_") => "generalized linear mixed model",
        t if t.starts_with("glm_") => "generalized linear model",
        t => t,
    };
    base.to_string()
}

fn summary_table(out: &mut String, rows: &[&NodeSummary], probs: (f64, f64)) {
    let names: Vec<String> = rows.iter().map(|r| r.name.clone()).collect();
    let header = vec![
        "Mean".to_string(),
        "SD".to_string(),
        percent(probs.0),
        percent(probs.1),
        "tail-prob.".to_string(),
        "GR-crit".to_string(),
        "MCE/SD".to_string(),
    ];
    let cols = vec![
        column(&rows.iter().map(|r| r.mean).collect::<Vec<_>>()),
        column(&rows.iter().map(|r| r.sd).collect::<Vec<_>>()),
        column(&rows.iter().map(|r| r.quantile_lo).collect::<Vec<_>>()),
        column(&rows.iter().map(|r| r.quantile_hi).collect::<Vec<_>>()),
        opt_column(&rows.iter().map(|r| r.tail_prob).collect::<Vec<_>>(), 3),
        opt_column(&rows.iter().map(|r| r.gr_upper).collect::<Vec<_>>(), 3),
        opt_column(&rows.iter().map(|r| r.mcse_sd_ratio).collect::<Vec<_>>(), 4),
    ];
    table(out, &header, &names, &cols);
}

fn missinfo_text(out: &mut String, info: &MissInfo) {
    out.push_str("\nNumber and proportion of complete cases:\n");
    let names: Vec<String> = info.complete_cases.iter().map(|c| c.level.clone()).collect();
    let cols = vec![
        info.complete_cases.iter().map(|c| c.level.clone()).collect(),
        info.complete_cases.iter().map(|c| c.n.to_string()).collect(),
        info.complete_cases.iter().map(|c| format!("{:.0}", c.percent)).collect(),
    ];
    table(out, &["level".into(), "#".into(), "%".into()], &names, &cols);
    out.push_str("\nNumber and proportion of missing values:\n");
    let mut levels: Vec<&str> = Vec::new();
    for m in &info.missing {
        if !levels.contains(&m.level.as_str()) {
            levels.push(&m.level);
        }
    }
    for (k, level) in levels.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let rows: Vec<_> = info.missing.iter().filter(|m| m.level == *level).collect();
        let names: Vec<String> = rows.iter().map(|m| m.variable.clone()).collect();
        let cols = vec![
            rows.iter().map(|m| m.level.clone()).collect(),
            rows.iter().map(|m| m.n_missing.to_string()).collect(),
            rows.iter().map(|m| format!("{:.1}", m.percent)).collect(),
        ];
        table(out, &["level".into(), "# NA".into(), "% NA".into()], &names, &cols);
    }
}

/// Summary in the layout of the usual model printout. The GR column shows
/// the upper confidence limit.
pub fn summary_text(s: &PosteriorSummary) -> String {
    let mut out = String::new();
    let desc = match s.meta.analysis_types.as_slice() {
        [one] => model_description(one),
        _ => "joint model".to_string(),
    };
    let _ = writeln!(out, "\nBayesian {desc} fitted with jointgibbs\n");
    let mut sections: Vec<(String, Vec<&NodeSummary>)> = Vec::new();
    let several = s.meta.analysis_types.len() > 1;
    for n in &s.nodes {
        let title = match section_title(n.group) {
            Some(t) if several => format!("{} ({})", t.trim_end_matches(':'), n.model) + ":",
            Some(t) => t.to_string(),
            None => "Posterior summary of other parameters:".to_string(),
        };
        match sections.iter_mut().find(|(t, _)| *t == title) {
            Some((_, v)) => v.push(n),
            None => sections.push((title, vec![n])),
        }
    }
    for (title, rows) in &sections {
        let _ = writeln!(out, "\n{title}");
        summary_table(&mut out, rows, s.meta.probs);
    }
    let m = &s.meta;
    let _ = write!(
        out,
        "\n\nMCMC settings:\nIterations = {}:{}\nSample size per chain = {}\nThinning interval = {}\nNumber of chains = {}\n\nNumber of observations: {}\n",
        m.first_iteration, m.last_iteration, m.sample_size_per_chain, m.thin, m.n_chains, m.n_obs
    );
    if !m.groups.is_empty() {
        out.push_str("Number of groups:\n");
        for (g, n) in &m.groups {
            let _ = writeln!(out, " - {g}: {n}");
        }
    }
    if let Some(info) = &s.missinfo {
        out.push('\n');
        missinfo_text(&mut out, info);
    }
    for w in &s.warnings {
        let _ = writeln!(out, "\nNote: {w}");
    }
    out
}

pub fn gelman_rubin_text(rows: &[NodePsrf]) -> String {
    let mut out = String::from("Potential scale reduction factors:\n\n");
    let names: Vec<String> = rows.iter().map(|r| r.name.clone()).collect();
    let cols = vec![
        opt_column(&rows.iter().map(|r| r.point).collect::<Vec<_>>(), 2),
        opt_column(&rows.iter().map(|r| r.upper).collect::<Vec<_>>(), 2),
    ];
    table(&mut out, &["Point est.".into(), "Upper C.I.".into()], &names, &cols);
    for r in rows {
        if let Some(e) = &r.error {
            let _ = writeln!(out, "{}: {e}", r.name);
        }
    }
    out
}

pub fn mc_error_text(r: &McErrorReport) -> String {
    let mut out = String::new();
    let names: Vec<String> = r.nodes.iter().map(|n| n.name.clone()).collect();
    let cols = vec![
        column(&r.nodes.iter().map(|n| n.est).collect::<Vec<_>>()),
        column(&r.nodes.iter().map(|n| n.mcse).collect::<Vec<_>>()),
        column(&r.nodes.iter().map(|n| n.sd).collect::<Vec<_>>()),
        opt_column(&r.nodes.iter().map(|n| n.ratio).collect::<Vec<_>>(), 3),
        r.nodes.iter().map(|n| if n.flagged { "*".to_string() } else { String::new() }).collect(),
    ];
    table(
        &mut out,
        &["est".into(), "MCSE".into(), "SD".into(), "MCSE/SD".into(), "".into()],
        &names,
        &cols,
    );
    for w in &r.warnings {
        let _ = writeln!(out, "Note: {w}");
    }
    out
}
