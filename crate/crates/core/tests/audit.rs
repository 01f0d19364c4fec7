use sensaudit_core::audit::{
    json_bytes, parse_json_report, EvidenceRef, PseudoScienceThresholds, Verdict,
    INCOMPLETE_BANNER, RULE_TITLES,
};
use sensaudit_core::estimators::uncertainty_from_values;
use sensaudit_core::{
    analyze_radial, attach_sa_evidence, evaluate, new_checklist, plain_design, radial_design,
    render_report, uncertainty_analysis, AnalysisOptions, AuditChecklist, BuiltinModel, Error,
    EvaluateOptions, FactorSet, ModelRef, ReportFormat, RuleStatus, SensitivityResult,
    UncertaintyResult,
};
use sha2::{Digest, Sha256};

const CANONICAL: [&str; 7] = [
    "Check against rhetorical use of mathematical modelling",
    "Adopt an \u{201c}assumption hunting\u{201d} attitude",
    "Detect pseudo-science",
    "Find sensitive assumptions before these find you",
    "Aim for transparency",
    "Do the right sums",
    "Focus the analysis on the key question answered by the model, exploring holistically the entire space of the assumptions",
];

fn study(id: &str) -> (FactorSet, SensitivityResult, UncertaintyResult) {
    let factors = FactorSet::uniform_cube(3, 0.0, 1.0).unwrap();
    let model = ModelRef::Builtin(BuiltinModel::LinearAdditive {
        weights: vec![1.0; 3],
    });
    let batch = evaluate(
        &model,
        &factors,
        &radial_design(&factors, 256, 1).unwrap(),
        &EvaluateOptions::default(),
    )
    .unwrap();
    let mut sa = analyze_radial(&batch, &AnalysisOptions::default()).unwrap();
    sa.study_id = id.into();
    let batch = evaluate(
        &model,
        &factors,
        &plain_design(&factors, 256, 1).unwrap(),
        &EvaluateOptions::default(),
    )
    .unwrap();
    let mut ua = uncertainty_analysis(&batch).unwrap();
    ua.study_id = id.into();
    (factors, sa, ua)
}

fn attach(
    c: &AuditChecklist,
    sa: &SensitivityResult,
    ua: Option<&UncertaintyResult>,
    f: &FactorSet,
) -> AuditChecklist {
    attach_sa_evidence(c, sa, ua, f, PseudoScienceThresholds::default()).unwrap()
}

#[test]
fn fresh_checklist_has_canonical_titles() {
    let c = new_checklist("s1");
    assert_eq!(c.rules().len(), 7);
    for (i, rule) in c.rules().iter().enumerate() {
        assert_eq!(rule.number as usize, i + 1);
        assert_eq!(rule.title.as_bytes(), CANONICAL[i].as_bytes());
        assert_eq!(rule.status, RuleStatus::Unaddressed);
    }
    assert_eq!(RULE_TITLES, CANONICAL);
    assert!(!c.is_incomplete());
}

#[test]
fn checklist_round_trips_through_json() {
    let mut c = new_checklist("s1");
    c.attest(1, "reviewed by the modelling board").unwrap();
    c.not_applicable(6, "single-stakeholder internal model")
        .unwrap();
    c.metadata.purpose = "demo".into();
    c.metadata.assumptions = vec!["inputs independent".into()];
    let back = AuditChecklist::from_json(&c.to_json().unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn tampered_titles_or_rule_count_are_rejected() {
    let text = String::from_utf8(new_checklist("s1").to_json().unwrap()).unwrap();
    let renamed = text.replace("Do the right sums", "Do the sums right");
    assert!(AuditChecklist::from_json(renamed.as_bytes()).is_err());
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["rules"].as_array_mut().unwrap().pop();
    assert!(AuditChecklist::from_json(value.to_string().as_bytes()).is_err());
    let schema = text.replace("sensaudit.audit/1", "sensaudit.audit/0");
    assert!(AuditChecklist::from_json(schema.as_bytes()).is_err());
}

#[test]
fn attach_flips_exactly_rules_3_4_7() {
    let (factors, sa, ua) = study("s1");
    let before = new_checklist("s1");
    let after = attach(&before, &sa, Some(&ua), &factors);
    let changed: Vec<u8> = before
        .rules()
        .iter()
        .zip(after.rules())
        .filter(|(a, b)| a.status != b.status)
        .map(|(a, _)| a.number)
        .collect();
    assert_eq!(changed, vec![3, 4, 7]);
    for n in [3, 4, 7] {
        assert_eq!(after.rule(n).unwrap().status, RuleStatus::EvidenceLinked);
    }
    assert_eq!(
        after.pseudo_science.as_ref().unwrap().verdict,
        Verdict::Consistent
    );

    // Evidence digests are SHA-256 of the serialized results.
    let digest = hex::encode(Sha256::digest(json_bytes(&sa).unwrap()));
    assert_eq!(after.rule(4).unwrap().evidence[0].sha256, digest);
    assert_eq!(after.rule(7).unwrap().evidence[0].path, "sa.json");
    let ua_digest = hex::encode(Sha256::digest(json_bytes(&ua).unwrap()));
    assert_eq!(after.rule(3).unwrap().evidence[0].sha256, ua_digest);
}

#[test]
fn attach_is_idempotent() {
    let (factors, sa, ua) = study("s1");
    let once = attach(&new_checklist("s1"), &sa, Some(&ua), &factors);
    let twice = attach(&once, &sa, Some(&ua), &factors);
    assert_eq!(once, twice);
    assert_eq!(twice.rule(4).unwrap().evidence.len(), 1);
}

#[test]
fn constant_output_is_flagged_as_downplayed() {
    let (factors, sa, _) = study("s1");
    let mut ua = uncertainty_from_values(&[4.2; 64]).unwrap();
    ua.study_id = "s1".into();
    let after = attach(&new_checklist("s1"), &sa, Some(&ua), &factors);
    let check = after.pseudo_science.as_ref().unwrap();
    assert_eq!(check.verdict, Verdict::SuspiciousDownplayed);
    assert_eq!(check.output_cov, Some(0.0));
    // Three U(0,1) inputs, each with CoV 1/sqrt(3).
    assert!((check.propagated_cov.unwrap() - 1.0).abs() < 1e-12);
    assert!(check.heuristic);
    assert_eq!(after.rule(3).unwrap().status, RuleStatus::Failed);
    assert!(after.is_incomplete());
}

#[test]
fn wide_output_is_flagged_as_inflated() {
    let (factors, sa, _) = study("s1");
    let values: Vec<f64> = (0..100)
        .map(|i| if i % 2 == 0 { 1.0 } else { -0.9 })
        .collect();
    let mut ua = uncertainty_from_values(&values).unwrap();
    ua.study_id = "s1".into();
    let after = attach(&new_checklist("s1"), &sa, Some(&ua), &factors);
    assert_eq!(
        after.pseudo_science.as_ref().unwrap().verdict,
        Verdict::SuspiciousInflated
    );
    assert_eq!(after.rule(3).unwrap().status, RuleStatus::Failed);
}

#[test]
fn missing_ua_is_inconclusive() {
    let (factors, sa, _) = study("s1");
    let after = attach(&new_checklist("s1"), &sa, None, &factors);
    assert_eq!(
        after.pseudo_science.as_ref().unwrap().verdict,
        Verdict::Inconclusive
    );
    assert_eq!(after.rule(3).unwrap().status, RuleStatus::Unaddressed);
    assert_eq!(after.rule(4).unwrap().status, RuleStatus::EvidenceLinked);
}

#[test]
fn mismatched_study_is_a_linkage_error() {
    let (factors, sa, ua) = study("other");
    let err = attach_sa_evidence(
        &new_checklist("s1"),
        &sa,
        Some(&ua),
        &factors,
        PseudoScienceThresholds::default(),
    );
    assert!(matches!(err, Err(Error::Linkage(_))));
    let (_, sa, _) = study("s1");
    let wrong = FactorSet::uniform_cube(2, 0.0, 1.0).unwrap();
    let err = attach_sa_evidence(
        &new_checklist("s1"),
        &sa,
        None,
        &wrong,
        PseudoScienceThresholds::default(),
    );
    assert!(matches!(err, Err(Error::Linkage(_))));
}

#[test]
fn status_moves_forward_except_on_reset() {
    let mut c = new_checklist("s1");
    assert!(c.attest(2, "  ").is_err());
    assert!(c.not_applicable(2, "").is_err());
    c.attest(2, "assumptions listed in appendix").unwrap();
    c.link_evidence(2, EvidenceRef::from_bytes("notes.md", b"x"))
        .unwrap();
    assert_eq!(c.rule(2).unwrap().status, RuleStatus::EvidenceLinked);
    c.fail(2, "key assumption untested").unwrap();
    // Evidence does not overrule a failure.
    c.link_evidence(2, EvidenceRef::from_bytes("more.md", b"y"))
        .unwrap();
    assert_eq!(c.rule(2).unwrap().status, RuleStatus::Failed);
    c.reset(2).unwrap();
    assert_eq!(c.rule(2).unwrap().status, RuleStatus::Unaddressed);
    assert!(c.rule(2).unwrap().evidence.is_empty());
    assert!(c.rule(0).is_err() && c.rule(8).is_err());
}

#[test]
fn not_applicable_rule_3_survives_attach() {
    let (factors, sa, _) = study("s1");
    let mut c = new_checklist("s1");
    c.not_applicable(3, "deterministic benchmark, no declared uncertainty")
        .unwrap();
    let mut ua = uncertainty_from_values(&[1.0; 10]).unwrap();
    ua.study_id = "s1".into();
    let after = attach(&c, &sa, Some(&ua), &factors);
    assert_eq!(after.rule(3).unwrap().status, RuleStatus::NotApplicable);
}

#[test]
fn unaddressed_report_lists_seven_rows() {
    let md =
        String::from_utf8(render_report(&new_checklist("s1"), ReportFormat::Markdown).unwrap())
            .unwrap();
    let rows = md
        .lines()
        .filter(|l| l.starts_with('|') && l.contains("| unaddressed |"))
        .count();
    assert_eq!(rows, 7);
    for title in CANONICAL {
        assert!(md.contains(title), "{title}");
    }
    assert!(!md.contains(INCOMPLETE_BANNER));
}

#[test]
fn rendering_is_deterministic() {
    let (factors, sa, ua) = study("s1");
    let c = attach(&new_checklist("s1"), &sa, Some(&ua), &factors);
    for format in [ReportFormat::Markdown, ReportFormat::Json] {
        assert_eq!(
            render_report(&c, format).unwrap(),
            render_report(&c, format).unwrap()
        );
    }
}

#[test]
fn json_and_markdown_agree_on_statuses() {
    let (factors, sa, ua) = study("s1");
    let mut c = attach(&new_checklist("s1"), &sa, Some(&ua), &factors);
    c.attest(1, "checked").unwrap();
    c.not_applicable(6, "no competing framings").unwrap();
    let json = render_report(&c, ReportFormat::Json).unwrap();
    let parsed = parse_json_report(&json).unwrap();
    assert_eq!(parsed, c);
    let md = String::from_utf8(render_report(&parsed, ReportFormat::Markdown).unwrap()).unwrap();
    for rule in c.rules() {
        let row = md
            .lines()
            .find(|l| l.starts_with(&format!("| {} |", rule.number)))
            .unwrap_or_else(|| panic!("no row for rule {}", rule.number));
        assert!(row.contains(rule.status.keyword()), "{row}");
    }
    for rule in c.rules() {
        for e in &rule.evidence {
            assert!(md.contains(&e.path) && md.contains(&e.sha256));
        }
    }
}

#[test]
fn failed_rule_puts_banner_in_both_formats() {
    let mut c = new_checklist("s1");
    c.fail(5, "model code not released").unwrap();
    let md = String::from_utf8(render_report(&c, ReportFormat::Markdown).unwrap()).unwrap();
    let json = String::from_utf8(render_report(&c, ReportFormat::Json).unwrap()).unwrap();
    assert!(md.contains(INCOMPLETE_BANNER));
    assert!(json.contains(INCOMPLETE_BANNER));
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["audit_incomplete"], true);
}
