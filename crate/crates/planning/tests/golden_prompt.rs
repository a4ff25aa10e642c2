use std::path::PathBuf;

use bsa_core::{ActionClass, SurgeryType};
use bsa_planning::*;

fn fixture_sample() -> PlanningSample {
    use ActionClass::*;
    let actions = [Dissection, TissueRetraction, Aspiration, TissueRetraction, Dissection, Clipping, Clipping];
    let ctx = ContextSequence {
        context_id: "chole-07".into(),
        surgery_type: SurgeryType::Cholecystectomy,
        clips: actions
            .iter()
            .enumerate()
            .map(|(i, &a)| ClipRef {
                clip_id: format!("chole-07-c{i}"),
                action: a,
                frames: (0..9).map(|f| format!("chole-07/c{i}/f{f:02}.ppm")).collect(),
            })
            .collect(),
    };
    make_samples(&ctx, WINDOW).remove(0)
}

/// Set `BSA_UPDATE_GOLDEN=1` to rewrite the golden file after a reviewed change.
#[test]
fn bundle_matches_golden_transcript() {
    let bundle = assemble_prompts(&fixture_sample(), &KnowledgeBase::builtin(), &SyntheticFrames).unwrap();
    let got = serde_json::to_string_pretty(&serde_json::json!({
        "sample_id": bundle.sample_id,
        "messages": bundle.messages(),
    }))
    .unwrap()
        + "\n";
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/prompt_bundle.json");
    if std::env::var_os("BSA_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden file missing; run with BSA_UPDATE_GOLDEN=1");
    assert_eq!(got, want);
}

#[test]
fn golden_reply_with_prose() {
    let raw = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/wrapped_reply.txt")).unwrap();
    let r = parse_response(&raw).unwrap();
    assert_eq!(r.actions(), vec![ActionClass::Clipping, ActionClass::Dissection]);
    assert!(r.safety_considerations.contains("common bile duct"));
}
