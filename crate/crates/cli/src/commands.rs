use std::path::{Path, PathBuf};

use sensaudit_core::audit::{json_bytes, parse_json_report, AuditChecklist, RuleStatus};
use sensaudit_core::experiments::{oat_volume_mc, OatAuditOptions, OatAuditResult, OneillSetup};
use sensaudit_core::selection::SelectionOptions;
use sensaudit_core::{
    analyze_radial, attach_sa_evidence, evaluate, new_checklist, oat_missed_interaction,
    oat_volume_ratio, oneill_curve, plain_design_with, radial_design_with, render_report,
    ti_variable_selection, uncertainty_analysis, AnalysisOptions, BootstrapConfig, BuiltinModel,
    EvaluateOptions, EvaluationBatch, FactorSet, FailurePolicy, ModelRef, ReportFormat,
    SelectionProblem, SensitivityResult, UncertaintyResult,
};

use crate::config::{validate_study_id, DesignKindDecl, Study};
use crate::error::CliError;
use crate::output::{self, write_csv, write_file};
use crate::{AuditCommand, Format, GlobalArgs, OatArgs, OneillArgs, SelectArgs, StatusArg};

const CONFIG_COPY: &str = "config.toml";
const MODEL_IO_DIR: &str = "model_io";

fn study_dir(g: &GlobalArgs, id: &str) -> Result<PathBuf, CliError> {
    validate_study_id(id)?;
    let dir = g.out_dir.join(id);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn eval_options(g: &GlobalArgs, seed: u64) -> EvaluateOptions {
    EvaluateOptions {
        parallelism: g.jobs.unwrap_or(0),
        failure_policy: if g.drop_failures {
            FailurePolicy::DropRows
        } else {
            FailurePolicy::Abort
        },
        seed,
    }
}

/// Loads the study, prepares its directory and keeps a copy of the config there.
fn open_study(g: &GlobalArgs, config: &Path) -> Result<(Study, PathBuf), CliError> {
    let mut study = Study::load(config)?;
    let dir = study_dir(g, &study.config.study_id)?;
    let copy = dir.join(CONFIG_COPY);
    let same = match (copy.canonicalize(), config.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if !same {
        write_file(&copy, study.text.as_bytes())?;
    }
    if let ModelRef::External(ext) = &mut study.model {
        ext.io_dir = dir.join(MODEL_IO_DIR);
    }
    Ok((study, dir))
}

fn check_kind(study: &Study, wanted: DesignKindDecl, command: &str) -> Result<(), CliError> {
    match study.config.design.kind {
        Some(kind) if kind != wanted => Err(CliError::Config(format!(
            "design.kind is {kind:?} but '{command}' needs {wanted:?}; remove the key to use the command's design"
        ))),
        _ => Ok(()),
    }
}

fn report_failures(batch: &EvaluationBatch) {
    if !batch.failures().is_empty() {
        eprintln!(
            "warning: {} model rows failed and were dropped",
            batch.failures().len()
        );
        for f in batch.failures().iter().take(20) {
            eprintln!("  row {}: {}", f.row, f.reason);
        }
    }
}

pub fn ua(g: &GlobalArgs, config: &Path) -> Result<(), CliError> {
    let (study, dir) = open_study(g, config)?;
    check_kind(&study, DesignKindDecl::Plain, "ua")?;
    let d = &study.config.design;
    let seed = g.seed.unwrap_or(d.seed);
    let design = plain_design_with(&study.factors, d.n, seed, d.sampler)?;
    let batch = evaluate(
        &study.model,
        &study.factors,
        &design,
        &eval_options(g, seed),
    )?;
    report_failures(&batch);
    write_csv(&dir.join("ua_runs.csv"), |w| batch.write_csv(w))?;
    let mut ua = uncertainty_analysis(&batch)?;
    ua.study_id = study.config.study_id.clone();
    let json = json_bytes(&ua)?;
    write_file(&dir.join("ua.json"), &json)?;
    let csv = write_csv(&dir.join("ua.csv"), |w| ua.write_csv(w))?;
    print_ua(g.format, &ua, &json, &csv);
    Ok(())
}

fn print_ua(format: Option<Format>, ua: &UncertaintyResult, json: &[u8], csv: &[u8]) {
    match format {
        None => print!("{}", output::ua_table(ua)),
        Some(Format::Md) => print!("{}", output::ua_markdown(ua)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(json)),
        Some(Format::Csv) => print!("{}", String::from_utf8_lossy(csv)),
    }
}

pub fn sa(g: &GlobalArgs, config: &Path) -> Result<(), CliError> {
    let (study, dir) = open_study(g, config)?;
    check_kind(&study, DesignKindDecl::Radial, "sa")?;
    let d = &study.config.design;
    let e = &study.config.estimators;
    let seed = g.seed.unwrap_or(d.seed);
    let design = radial_design_with(&study.factors, d.n, seed, d.sampler)?;
    let batch = evaluate(
        &study.model,
        &study.factors,
        &design,
        &eval_options(g, seed),
    )?;
    report_failures(&batch);
    write_csv(&dir.join("sa_runs.csv"), |w| batch.write_csv(w))?;
    let opts = AnalysisOptions {
        bootstrap: e.bootstrap.map(|resamples| BootstrapConfig {
            resamples,
            level: e.level,
            seed,
        }),
        bins: e.bins,
        aggregate: e.aggregate,
        moment_independent: e.moment_independent,
    };
    let mut sa = analyze_radial(&batch, &opts)?;
    sa.study_id = study.config.study_id.clone();
    let json = json_bytes(&sa)?;
    write_file(&dir.join("sa.json"), &json)?;
    let csv = write_csv(&dir.join("sa.csv"), |w| sa.write_csv(w))?;
    warn_closure(&sa);
    match g.format {
        None => print!("{}", output::sa_table(&sa)),
        Some(Format::Md) => print!("{}", output::sa_markdown(&sa)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(&json)),
        Some(Format::Csv) => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

/// Without bootstrap noise, a sum of first-order indices above this is flagged.
const UNBOOTSTRAPPED_SUM_TOLERANCE: f64 = 0.05;

fn warn_closure(sa: &SensitivityResult) {
    let excess = match (sa.diagnostics.closure_ok, sa.diagnostics.noise) {
        (Some(ok), _) => !ok,
        (None, _) => sa.diagnostics.sum_s > 1.0 + UNBOOTSTRAPPED_SUM_TOLERANCE,
    };
    if excess {
        eprintln!(
            "warning: sum of S_i = {:.4} exceeds 1 beyond estimation noise; increase N",
            sa.diagnostics.sum_s
        );
    }
}

pub fn select(g: &GlobalArgs, a: &SelectArgs) -> Result<(), CliError> {
    let dir = study_dir(g, &a.study)?;
    let problem = SelectionProblem::from_csv(&a.data, a.response.as_deref(), a.criterion.into())?;
    let opts = SelectionOptions {
        mode: a.mode.into(),
        n_base: a.n_base,
        seed: g.seed.unwrap_or(0),
        threshold: a.threshold,
    };
    let res = ti_variable_selection(&problem, &opts)?;
    let json = json_bytes(&res)?;
    write_file(&dir.join("selection.json"), &json)?;
    let csv = write_csv(&dir.join("selection.csv"), |w| res.write_csv(w))?;
    match g.format {
        None => print!("{}", output::selection_table(&res, false)),
        Some(Format::Md) => print!("{}", output::selection_table(&res, true)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(&json)),
        Some(Format::Csv) => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

pub fn demo_oat(g: &GlobalArgs, a: &OatArgs) -> Result<(), CliError> {
    let (factors, model, dir, defaults) = match &a.config {
        Some(path) => {
            let (study, dir) = open_study(g, path)?;
            let d = study.config.design.clone();
            (study.factors, study.model, dir, Some(d))
        }
        None => {
            if a.k == 0 {
                return Err(CliError::Config("--k must be at least 1".into()));
            }
            let factors = FactorSet::uniform_cube(a.k, -1.0, 1.0)?;
            (
                factors,
                ModelRef::Builtin(BuiltinModel::PureInteraction),
                study_dir(g, "demo-oat")?,
                None,
            )
        }
    };
    let seed = g.seed.or(defaults.as_ref().map(|d| d.seed)).unwrap_or(0);
    let opts = OatAuditOptions {
        levels: a
            .levels
            .or(defaults.as_ref().map(|d| d.oat.levels))
            .unwrap_or(5),
        half_width: a
            .half_width
            .or(defaults.as_ref().map(|d| d.oat.half_width))
            .unwrap_or(0.5),
        n_base: a
            .n_base
            .or(defaults.as_ref().map(|d| d.n))
            .unwrap_or(1 << 13),
        seed,
        mc_points: a.mc_points,
        evaluate: eval_options(g, seed),
    };
    let res = if factors.k() < 2 && a.config.is_none() {
        // x1*x2 needs two factors; a single factor gets the coverage figures only.
        let (mc_ratio, mc_se) = oat_volume_mc(factors.k(), opts.mc_points, seed)?;
        OatAuditResult {
            k: factors.k(),
            volume_ratio: oat_volume_ratio(factors.k()),
            mc_ratio,
            mc_se,
            mc_points: opts.mc_points,
            model: String::new(),
            levels: opts.levels,
            half_width: opts.half_width,
            n: opts.n_base,
            seed,
            missed_interaction: Vec::new(),
        }
    } else {
        oat_missed_interaction(&model, &factors, &opts)?
    };
    let json = json_bytes(&res)?;
    write_file(&dir.join("oat.json"), &json)?;
    let csv = write_csv(&dir.join("oat.csv"), |w| res.write_csv(w))?;
    match g.format {
        None | Some(Format::Md) => print!("{}", output::oat_table(&res)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(&json)),
        Some(Format::Csv) => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

pub fn demo_oneill(g: &GlobalArgs, a: &OneillArgs) -> Result<(), CliError> {
    let dir = study_dir(g, "demo-oneill")?;
    let setup = OneillSetup {
        coefficients: a.coefficients.clone(),
        noise_sd: a.noise_sd,
        n_obs: a.n_obs,
        orders: (0..=a.max_order).collect(),
        replications: a.replications,
        seed: g.seed.unwrap_or(0),
        ..OneillSetup::default()
    };
    let curve = oneill_curve(&setup)?;
    let json = json_bytes(&curve)?;
    write_file(&dir.join("oneill.json"), &json)?;
    let csv = write_csv(&dir.join("oneill.csv"), |w| curve.write_csv(w))?;
    match g.format {
        None | Some(Format::Md) => print!("{}", output::oneill_table(&curve)),
        Some(Format::Json) => print!("{}", String::from_utf8_lossy(&json)),
        Some(Format::Csv) => print!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Study(format!("{}: {e}", path.display())))
}

fn load_checklist(dir: &Path) -> Result<AuditChecklist, CliError> {
    let path = dir.join("audit.json");
    if !path.exists() {
        return Err(CliError::Study(format!(
            "{} not found; run 'sensaudit audit init' first",
            path.display()
        )));
    }
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    parse_json_report(&bytes).map_err(|e| CliError::Study(format!("{}: {e}", path.display())))
}

/// Writes both renderings; returns them as (json, markdown).
fn save_checklist(dir: &Path, c: &AuditChecklist) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    let json = render_report(c, ReportFormat::Json)?;
    let md = render_report(c, ReportFormat::Markdown)?;
    write_file(&dir.join("audit.json"), &json)?;
    write_file(&dir.join("audit.md"), &md)?;
    Ok((json, md))
}

fn print_status(c: &AuditChecklist) {
    for rule in c.rules() {
        println!(
            "rule {}: {:<16} {}",
            rule.number,
            rule.status.keyword(),
            rule.title
        );
    }
}

pub fn audit(g: &GlobalArgs, cmd: AuditCommand) -> Result<(), CliError> {
    match cmd {
        AuditCommand::Init {
            study,
            config,
            force,
        } => {
            let metadata = match &config {
                Some(path) => {
                    let s = Study::load(path)?;
                    if s.config.study_id != study {
                        return Err(CliError::Config(format!(
                            "{} declares study_id '{}', not '{study}'",
                            path.display(),
                            s.config.study_id
                        )));
                    }
                    Some(s.config.metadata)
                }
                None => None,
            };
            let dir = study_dir(g, &study)?;
            if dir.join("audit.json").exists() && !force {
                return Err(CliError::Study(format!(
                    "{} already exists; pass --force to start over",
                    dir.join("audit.json").display()
                )));
            }
            let mut c = new_checklist(&study);
            if let Some(m) = metadata {
                c.metadata = m;
            }
            save_checklist(&dir, &c)?;
            print_status(&c);
        }
        AuditCommand::Attach { study, config } => {
            let dir = study_dir(g, &study)?;
            let checklist = load_checklist(&dir)?;
            let config = config.unwrap_or_else(|| dir.join(CONFIG_COPY));
            let s = Study::load(&config)?;
            let sa: SensitivityResult = read_json(&dir.join("sa.json"))?;
            let ua_path = dir.join("ua.json");
            let ua: Option<UncertaintyResult> = if ua_path.exists() {
                Some(read_json(&ua_path)?)
            } else {
                None
            };
            let c = attach_sa_evidence(
                &checklist,
                &sa,
                ua.as_ref(),
                &s.factors,
                s.config.audit.thresholds(),
            )?;
            save_checklist(&dir, &c)?;
            print_status(&c);
            if c.is_incomplete() {
                eprintln!("{}", sensaudit_core::audit::INCOMPLETE_BANNER);
            }
        }
        AuditCommand::Set {
            study,
            rule,
            status,
            narrative,
        } => {
            let dir = study_dir(g, &study)?;
            let mut c = load_checklist(&dir)?;
            match status {
                StatusArg::Attested => c.attest(rule, &narrative)?,
                StatusArg::Failed => c.fail(rule, &narrative)?,
                StatusArg::NotApplicable => c.not_applicable(rule, &narrative)?,
                StatusArg::Unaddressed => c.reset(rule)?,
            }
            save_checklist(&dir, &c)?;
            print_status(&c);
        }
        AuditCommand::Render { study } => {
            let dir = study_dir(g, &study)?;
            let c = load_checklist(&dir)?;
            let (json, md) = save_checklist(&dir, &c)?;
            match g.format {
                None | Some(Format::Md) => print!("{}", String::from_utf8_lossy(&md)),
                Some(Format::Json) => print!("{}", String::from_utf8_lossy(&json)),
                Some(Format::Csv) => {
                    println!("rule,status,title");
                    for r in c.rules() {
                        println!(
                            "{},{},\"{}\"",
                            r.number,
                            r.status.keyword(),
                            r.title.replace('"', "\"\"")
                        );
                    }
                }
            }
            if c.rules().iter().any(|r| r.status == RuleStatus::Failed) {
                eprintln!("{}", sensaudit_core::audit::INCOMPLETE_BANNER);
            }
        }
    }
    Ok(())
}
