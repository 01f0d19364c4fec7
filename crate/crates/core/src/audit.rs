//! Seven-rule sensitivity-auditing checklist.
//!
//! Rules 1, 2, 5 and 6 are judgments about the modelling process; the
//! checklist only stores attestations for them. Rules 3, 4 and 7 can be
//! backed by the study's own uncertainty and sensitivity results through
//! [`attach_sa_evidence`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{SensitivityResult, UncertaintyResult};
use crate::factors::FactorSet;

/// Version tag carried by every serialized checklist.
pub const AUDIT_SCHEMA: &str = "sensaudit.audit/1";

pub const RULE_TITLES: [&str; 7] = [
    "Check against rhetorical use of mathematical modelling",
    "Adopt an \u{201c}assumption hunting\u{201d} attitude",
    "Detect pseudo-science",
    "Find sensitive assumptions before these find you",
    "Aim for transparency",
    "Do the right sums",
    "Focus the analysis on the key question answered by the model, exploring holistically the entire space of the assumptions",
];

/// Rules that [`attach_sa_evidence`] may update.
pub const EVIDENCE_RULES: [u8; 3] = [3, 4, 7];

pub const SA_EVIDENCE_FILE: &str = "sa.json";
pub const UA_EVIDENCE_FILE: &str = "ua.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleStatus {
    Unaddressed,
    ManualAttested,
    EvidenceLinked,
    Failed,
    NotApplicable,
}

impl RuleStatus {
    pub fn keyword(self) -> &'static str {
        match self {
            RuleStatus::Unaddressed => "unaddressed",
            RuleStatus::ManualAttested => "manual-attested",
            RuleStatus::EvidenceLinked => "evidence-linked",
            RuleStatus::Failed => "failed",
            RuleStatus::NotApplicable => "not-applicable",
        }
    }
}

/// A report file identified by its SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRef {
    pub path: String,
    pub sha256: String,
}

impl EvidenceRef {
    pub fn from_bytes(path: impl Into<String>, bytes: &[u8]) -> Self {
        EvidenceRef {
            path: path.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::at_path(path, e))?;
        Ok(EvidenceRef::from_bytes(path.display().to_string(), &bytes))
    }
}

/// Canonical JSON encoding for every artifact: pretty-printed, LF, trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRule {
    pub number: u8,
    pub title: String,
    pub status: RuleStatus,
    pub narrative: String,
    pub evidence: Vec<EvidenceRef>,
}

/// Declared context of the study, reproduced in the report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyMetadata {
    pub purpose: String,
    pub owner: String,
    pub funding: String,
    pub validation: String,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Consistent,
    SuspiciousDownplayed,
    SuspiciousInflated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoScienceThresholds {
    /// Ratios below this are flagged as downplayed.
    pub downplayed: f64,
    /// Ratios above this are flagged as inflated.
    pub inflated: f64,
}

impl Default for PseudoScienceThresholds {
    fn default() -> Self {
        PseudoScienceThresholds {
            downplayed: 0.1,
            inflated: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCov {
    pub name: String,
    /// `None` for a zero-mean factor.
    pub cov: Option<f64>,
}

/// Compares the realised output spread with the spread the declared inputs
/// suggest.
///
/// The expectation is the first-order propagation bound for unit elasticities,
/// `sqrt(sum CoV_i^2)` over factors with a non-zero mean. This is a heuristic
/// screen, not a test statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoScienceCheck {
    pub input_cov: Vec<FactorCov>,
    pub output_cov: Option<f64>,
    pub propagated_cov: Option<f64>,
    pub compression_ratio: Option<f64>,
    pub verdict: Verdict,
    pub thresholds: PseudoScienceThresholds,
    pub heuristic: bool,
}

pub fn pseudo_science_check(
    factors: &FactorSet,
    ua: Option<&UncertaintyResult>,
    thresholds: PseudoScienceThresholds,
) -> PseudoScienceCheck {
    let input_cov: Vec<FactorCov> = factors
        .iter()
        .map(|f| FactorCov {
            name: f.name.clone(),
            cov: f.distribution.coefficient_of_variation(),
        })
        .collect();
    let covs: Vec<f64> = input_cov.iter().filter_map(|c| c.cov).collect();
    let propagated = (!covs.is_empty()).then(|| covs.iter().map(|c| c * c).sum::<f64>().sqrt());
    let output_cov = match ua {
        // A constant output has no spread whatever its level.
        Some(ua) if ua.sd == 0.0 => Some(0.0),
        Some(ua) => ua.coefficient_of_variation(),
        None => None,
    };
    let ratio = match (output_cov, propagated) {
        (Some(out), Some(exp)) if exp > 0.0 => Some(out / exp),
        _ => None,
    };
    let verdict = match ratio {
        None => Verdict::Inconclusive,
        Some(r) if r < thresholds.downplayed => Verdict::SuspiciousDownplayed,
        Some(r) if r > thresholds.inflated => Verdict::SuspiciousInflated,
        Some(_) => Verdict::Consistent,
    };
    PseudoScienceCheck {
        input_cov,
        output_cov,
        propagated_cov: propagated,
        compression_ratio: ratio,
        verdict,
        thresholds,
        heuristic: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChecklist")]
pub struct AuditChecklist {
    pub schema: String,
    pub study_id: String,
    rules: Vec<AuditRule>,
    pub metadata: StudyMetadata,
    pub pseudo_science: Option<PseudoScienceCheck>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecklist {
    schema: String,
    study_id: String,
    rules: Vec<AuditRule>,
    #[serde(default)]
    metadata: StudyMetadata,
    #[serde(default)]
    pseudo_science: Option<PseudoScienceCheck>,
}

impl TryFrom<RawChecklist> for AuditChecklist {
    type Error = Error;

    fn try_from(raw: RawChecklist) -> Result<Self> {
        if raw.schema != AUDIT_SCHEMA {
            return Err(Error::input(format!(
                "unsupported audit schema '{}' (expected '{AUDIT_SCHEMA}')",
                raw.schema
            )));
        }
        let canonical = raw.rules.len() == 7
            && raw
                .rules
                .iter()
                .zip(1u8..)
                .all(|(r, n)| r.number == n && r.title == RULE_TITLES[n as usize - 1]);
        if !canonical {
            return Err(Error::input(
                "audit checklist must list rules 1 to 7 in order with their canonical titles",
            ));
        }
        Ok(AuditChecklist {
            schema: raw.schema,
            study_id: raw.study_id,
            rules: raw.rules,
            metadata: raw.metadata,
            pseudo_science: raw.pseudo_science,
        })
    }
}

impl AuditChecklist {
    pub fn rules(&self) -> &[AuditRule] {
        &self.rules
    }

    pub fn rule(&self, number: u8) -> Result<&AuditRule> {
        self.rules
            .get((number as usize).wrapping_sub(1))
            .ok_or_else(|| Error::input(format!("no audit rule {number}; rules are 1 to 7")))
    }

    fn rule_mut(&mut self, number: u8) -> Result<&mut AuditRule> {
        self.rule(number)?;
        Ok(&mut self.rules[number as usize - 1])
    }

    pub fn statuses(&self) -> Vec<RuleStatus> {
        self.rules.iter().map(|r| r.status).collect()
    }

    pub fn is_incomplete(&self) -> bool {
        self.rules.iter().any(|r| r.status == RuleStatus::Failed)
    }

    /// Moves a rule to `status`. Only [`AuditChecklist::reset`] returns a rule
    /// to `unaddressed`.
    fn set_status(&mut self, number: u8, status: RuleStatus, narrative: &str) -> Result<()> {
        if status == RuleStatus::Unaddressed {
            return Err(Error::input("use reset to return a rule to unaddressed"));
        }
        let rule = self.rule_mut(number)?;
        rule.status = status;
        if !narrative.is_empty() {
            rule.narrative = narrative.to_string();
        }
        Ok(())
    }

    /// Records a human attestation for a rule.
    pub fn attest(&mut self, number: u8, narrative: &str) -> Result<()> {
        if narrative.trim().is_empty() {
            return Err(Error::input("an attestation needs a narrative"));
        }
        self.set_status(number, RuleStatus::ManualAttested, narrative)
    }

    pub fn fail(&mut self, number: u8, narrative: &str) -> Result<()> {
        if narrative.trim().is_empty() {
            return Err(Error::input("a failed rule needs a narrative"));
        }
        self.set_status(number, RuleStatus::Failed, narrative)
    }

    pub fn not_applicable(&mut self, number: u8, justification: &str) -> Result<()> {
        if justification.trim().is_empty() {
            return Err(Error::input("not-applicable requires a justification"));
        }
        self.set_status(number, RuleStatus::NotApplicable, justification)
    }

    /// Adds (or refreshes, by path) an evidence reference and marks the rule
    /// evidence-linked unless a person has failed it or ruled it out.
    pub fn link_evidence(&mut self, number: u8, evidence: EvidenceRef) -> Result<()> {
        let rule = self.rule_mut(number)?;
        match rule.evidence.iter_mut().find(|e| e.path == evidence.path) {
            Some(existing) => *existing = evidence,
            None => rule.evidence.push(evidence),
        }
        if matches!(
            rule.status,
            RuleStatus::Unaddressed | RuleStatus::ManualAttested
        ) {
            rule.status = RuleStatus::EvidenceLinked;
        }
        Ok(())
    }

    pub fn reset(&mut self, number: u8) -> Result<()> {
        let rule = self.rule_mut(number)?;
        rule.status = RuleStatus::Unaddressed;
        rule.narrative.clear();
        rule.evidence.clear();
        Ok(())
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        json_bytes(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

pub fn new_checklist(study_id: &str) -> AuditChecklist {
    AuditChecklist {
        schema: AUDIT_SCHEMA.to_string(),
        study_id: study_id.to_string(),
        rules: RULE_TITLES
            .iter()
            .zip(1u8..)
            .map(|(title, number)| AuditRule {
                number,
                title: title.to_string(),
                status: RuleStatus::Unaddressed,
                narrative: String::new(),
                evidence: Vec::new(),
            })
            .collect(),
        metadata: StudyMetadata::default(),
        pseudo_science: None,
    }
}

/// Links the study's sensitivity (and optional uncertainty) results to rules
/// 4 and 7 and runs the rule 3 screen.
///
/// Evidence digests are taken over [`json_bytes`] of each result, i.e. the
/// bytes of `sa.json` / `ua.json` as the CLI writes them.
pub fn attach_sa_evidence(
    checklist: &AuditChecklist,
    sa: &SensitivityResult,
    ua: Option<&UncertaintyResult>,
    factors: &FactorSet,
    thresholds: PseudoScienceThresholds,
) -> Result<AuditChecklist> {
    let id = &checklist.study_id;
    if &sa.study_id != id {
        return Err(Error::Linkage(format!(
            "sensitivity result belongs to study '{}', checklist to '{id}'",
            sa.study_id
        )));
    }
    if let Some(ua) = ua {
        if &ua.study_id != id {
            return Err(Error::Linkage(format!(
                "uncertainty result belongs to study '{}', checklist to '{id}'",
                ua.study_id
            )));
        }
    }
    if sa.k != factors.k()
        || sa
            .factors
            .iter()
            .zip(factors.iter())
            .any(|(a, b)| a.name != b.name)
    {
        return Err(Error::Linkage(
            "sensitivity result factors do not match the declared factor set".into(),
        ));
    }

    let mut out = checklist.clone();
    let sa_ref = EvidenceRef::from_bytes(SA_EVIDENCE_FILE, &json_bytes(sa)?);
    out.link_evidence(4, sa_ref.clone())?;
    out.link_evidence(7, sa_ref)?;

    let check = pseudo_science_check(factors, ua, thresholds);
    if let Some(ua) = ua {
        let ua_ref = EvidenceRef::from_bytes(UA_EVIDENCE_FILE, &json_bytes(ua)?);
        let rule = out.rule_mut(3)?;
        match rule.evidence.iter_mut().find(|e| e.path == ua_ref.path) {
            Some(existing) => *existing = ua_ref,
            None => rule.evidence.push(ua_ref),
        }
    }
    let rule = out.rule_mut(3)?;
    if !matches!(rule.status, RuleStatus::NotApplicable) {
        rule.status = match check.verdict {
            Verdict::Consistent => RuleStatus::EvidenceLinked,
            Verdict::SuspiciousDownplayed | Verdict::SuspiciousInflated => RuleStatus::Failed,
            Verdict::Inconclusive => rule.status,
        };
        rule.narrative = rule3_narrative(&check);
    }
    out.pseudo_science = Some(check);
    Ok(out)
}

fn rule3_narrative(check: &PseudoScienceCheck) -> String {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "Heuristic screen: output CoV {} against first-order propagated CoV {} (ratio {}); verdict {}.",
        fmt(check.output_cov),
        fmt(check.propagated_cov),
        fmt(check.compression_ratio),
        verdict_keyword(check.verdict)
    )
}

fn verdict_keyword(v: Verdict) -> &'static str {
    match v {
        Verdict::Consistent => "consistent",
        Verdict::SuspiciousDownplayed => "suspicious-downplayed",
        Verdict::SuspiciousInflated => "suspicious-inflated",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
}

pub const INCOMPLETE_BANNER: &str = "AUDIT INCOMPLETE: at least one rule has failed";

#[derive(Serialize)]
struct JsonReport<'a> {
    #[serde(flatten)]
    checklist: &'a AuditChecklist,
    audit_incomplete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    banner: Option<&'static str>,
}

/// Renders the checklist. Output depends only on the checklist contents.
pub fn render_report(checklist: &AuditChecklist, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => json_bytes(&JsonReport {
            checklist,
            audit_incomplete: checklist.is_incomplete(),
            banner: checklist.is_incomplete().then_some(INCOMPLETE_BANNER),
        }),
        ReportFormat::Markdown => Ok(render_markdown(checklist).into_bytes()),
    }
}

/// Reads a report written by [`render_report`] in JSON format.
pub fn parse_json_report(bytes: &[u8]) -> Result<AuditChecklist> {
    let mut value: serde_json::Value = serde_json::from_slice(bytes)?;
    if let Some(map) = value.as_object_mut() {
        map.remove("audit_incomplete");
        map.remove("banner");
    }
    Ok(serde_json::from_value(value)?)
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn render_markdown(c: &AuditChecklist) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Sensitivity audit: {}\n", c.study_id);
    if c.is_incomplete() {
        let _ = writeln!(s, "> **{INCOMPLETE_BANNER}**\n");
    }
    let _ = writeln!(s, "Schema: `{}`\n", c.schema);

    s.push_str(
        "## Rule status\n\n| # | Rule | Status | Evidence |\n|---|------|--------|----------|\n",
    );
    for r in &c.rules {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            r.number,
            md_cell(&r.title),
            r.status.keyword(),
            r.evidence.len()
        );
    }

    s.push_str("\n## Study\n\n");
    let m = &c.metadata;
    let or_none = |v: &str| {
        if v.is_empty() {
            "(not declared)".to_string()
        } else {
            md_cell(v)
        }
    };
    let _ = writeln!(s, "- Purpose: {}", or_none(&m.purpose));
    let _ = writeln!(s, "- Owner: {}", or_none(&m.owner));
    let _ = writeln!(s, "- Funding: {}", or_none(&m.funding));
    let _ = writeln!(s, "- Validation: {}", or_none(&m.validation));
    if m.assumptions.is_empty() {
        s.push_str("- Assumptions: (not declared)\n");
    } else {
        s.push_str("- Assumptions:\n");
        for a in &m.assumptions {
            let _ = writeln!(s, "  - {}", md_cell(a));
        }
    }

    s.push_str("\n## Rules\n");
    for r in &c.rules {
        let _ = writeln!(s, "\n### Rule {}: {}\n", r.number, r.title);
        let _ = writeln!(s, "Status: {}\n", r.status.keyword());
        if !r.narrative.is_empty() {
            let _ = writeln!(s, "{}\n", r.narrative);
        }
        for e in &r.evidence {
            let _ = writeln!(s, "- [{}]({}) sha256 `{}`", e.path, e.path, e.sha256);
        }
        if !r.evidence.is_empty() {
            s.push('\n');
        }
    }

    if let Some(p) = &c.pseudo_science {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        s.push_str("\n## Pseudo-science screen (heuristic)\n\n| Factor | Input CoV |\n|--------|-----------|\n");
        for f in &p.input_cov {
            let _ = writeln!(s, "| {} | {} |", md_cell(&f.name), fmt(f.cov));
        }
        let _ = writeln!(
            s,
            "\nOutput CoV {}, propagated CoV {}, ratio {}; thresholds {} / {}. Verdict: {}.",
            fmt(p.output_cov),
            fmt(p.propagated_cov),
            fmt(p.compression_ratio),
            p.thresholds.downplayed,
            p.thresholds.inflated,
            verdict_keyword(p.verdict)
        );
    }
    s
}
