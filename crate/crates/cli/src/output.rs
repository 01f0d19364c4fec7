//! Files in the study directory and the tables printed to stdout.

use std::fmt::Write as _;
use std::path::Path;

use sensaudit_core::experiments::OatAuditResult;
use sensaudit_core::selection::SelectionResult;
use sensaudit_core::{ComplexityCurve, Interval, SensitivityResult, UncertaintyResult};

use crate::error::CliError;

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Runs a CSV writer into memory and stores the result at `path`.
pub fn write_csv<F>(path: &Path, f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> sensaudit_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_file(path, &buf)?;
    Ok(buf)
}

fn ci(iv: &Option<Interval>) -> String {
    iv.as_ref().map_or_else(
        || "-".to_string(),
        |iv| format!("[{:.4}, {:.4}]", iv.lo, iv.hi),
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn flags(f: &sensaudit_core::estimators::FactorIndices) -> String {
    let mut out = Vec::new();
    if f.interaction_only() {
        out.push("interactions-only");
    }
    if f.s_negative {
        out.push("S<0");
    }
    if f.t_negative {
        out.push("T<0");
    }
    out.join(",")
}

pub fn sa_table(sa: &SensitivityResult) -> String {
    let width = sa
        .factors
        .iter()
        .map(|f| f.name.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>8}  {:<18}  {:>8}  {:<18}  {:>8}  flags",
        "factor", "S_i", "S_ci", "T_i", "T_ci", "d_i"
    );
    for f in &sa.factors {
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.4}  {:<18}  {:>8.4}  {:<18}  {:>8}  {}",
            f.name,
            f.s,
            ci(&f.s_ci),
            f.t,
            ci(&f.t_ci),
            opt(f.d),
            flags(f)
        );
    }
    let _ = writeln!(
        s,
        "sum S_i = {:.4}  (N = {}, k = {}, seed = {})",
        sa.diagnostics.sum_s, sa.n, sa.k, sa.seed
    );
    for note in &sa.diagnostics.notes {
        let _ = writeln!(s, "note: {note}");
    }
    s
}

pub fn sa_markdown(sa: &SensitivityResult) -> String {
    let mut s = String::from(
        "| factor | S_i | S_ci | T_i | T_ci | d_i | flags |\n|---|---|---|---|---|---|---|\n",
    );
    for f in &sa.factors {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {} | {:.4} | {} | {} | {} |",
            f.name,
            f.s,
            ci(&f.s_ci),
            f.t,
            ci(&f.t_ci),
            opt(f.d),
            flags(f)
        );
    }
    for note in &sa.diagnostics.notes {
        let _ = writeln!(s, "\n- {note}");
    }
    s
}

fn ua_rows(ua: &UncertaintyResult) -> Vec<(String, String)> {
    let mut rows = vec![
        ("n".to_string(), ua.n.to_string()),
        ("mean".to_string(), format!("{:.6}", ua.mean)),
        ("sd".to_string(), format!("{:.6}", ua.sd)),
        ("min".to_string(), format!("{:.6}", ua.min)),
        ("max".to_string(), format!("{:.6}", ua.max)),
    ];
    rows.extend(
        ua.quantiles
            .iter()
            .map(|q| (format!("q{}", q.p), format!("{:.6}", q.value))),
    );
    rows
}

pub fn ua_table(ua: &UncertaintyResult) -> String {
    ua_rows(ua)
        .into_iter()
        .map(|(k, v)| format!("{k:<8}  {v}\n"))
        .collect()
}

pub fn ua_markdown(ua: &UncertaintyResult) -> String {
    let mut s = String::from("| statistic | value |\n|---|---|\n");
    for (k, v) in ua_rows(ua) {
        let _ = writeln!(s, "| {k} | {v} |");
    }
    s
}

pub fn selection_table(res: &SelectionResult, markdown: bool) -> String {
    let mut s = String::new();
    if markdown {
        s.push_str("| candidate | S_i | T_i | selected |\n|---|---|---|---|\n");
    } else {
        let _ = writeln!(
            s,
            "{:<12}  {:>8}  {:>8}  selected",
            "candidate", "S_i", "T_i"
        );
    }
    for c in &res.candidates {
        if markdown {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {:.4} | {} |",
                c.name, c.first_order, c.total, c.selected
            );
        } else {
            let mark = if c.selected { "yes" } else { "" };
            let _ = writeln!(
                s,
                "{:<12}  {:>8.4}  {:>8.4}  {mark}",
                c.name, c.first_order, c.total
            );
        }
    }
    let _ = writeln!(
        s,
        "{}selected: {}  (threshold {:.4}, criterion {}, {} subsets fitted)",
        if markdown { "\n" } else { "" },
        if res.selected.is_empty() {
            "none".to_string()
        } else {
            res.selected.join(", ")
        },
        res.threshold,
        res.criterion,
        res.evaluations
    );
    s
}

pub fn oat_table(res: &OatAuditResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "k = {}", res.k);
    let _ = writeln!(
        s,
        "OAT-reachable fraction of the input cube: {:.5}",
        res.volume_ratio
    );
    let _ = writeln!(
        s,
        "Monte Carlo hit ratio ({} points): {:.5} +/- {:.5}",
        res.mc_points, res.mc_ratio, res.mc_se
    );
    if !res.missed_interaction.is_empty() {
        let _ = writeln!(s, "model: {}", res.model);
        let _ = writeln!(s, "{:<10}  {:>10}  {:>8}", "factor", "OAT effect", "T_i");
        for e in &res.missed_interaction {
            let _ = writeln!(
                s,
                "{:<10}  {:>10.4}  {:>8.4}",
                e.name, e.oat_effect, e.total
            );
        }
    }
    s
}

pub fn oneill_table(curve: &ComplexityCurve) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5}  {:>12}  {:>12}  {:>12}",
        "order", "bias2", "var_prop", "total"
    );
    for i in 0..curve.orders.len() {
        let _ = writeln!(
            s,
            "{:>5}  {:>12.6e}  {:>12.6e}  {:>12.6e}",
            curve.orders[i], curve.bias2[i], curve.var_prop[i], curve.total[i]
        );
    }
    let _ = writeln!(
        s,
        "argmin order: {}{}",
        curve.argmin_order,
        if curve.interior_minimum {
            " (interior minimum)"
        } else {
            ""
        }
    );
    for w in &curve.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
