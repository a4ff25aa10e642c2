use std::collections::BTreeMap;
use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use bsa_core::{ActionClass, SurgeryType};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{PlanningError, PlanningSample};

/// Frames sampled from the near clip.
pub const NEAR_FRAMES: usize = 4;

/// Procedure-level text of the system prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureKnowledge {
    pub surgical_process: String,
    pub safety_protocol: String,
}

/// System-prompt material: one entry per procedure plus a description of
/// every action class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub procedures: BTreeMap<SurgeryType, ProcedureKnowledge>,
    pub actions: BTreeMap<ActionClass, String>,
}

impl KnowledgeBase {
    /// Shipped entries for cholecystectomy and nephrectomy.
    pub fn builtin() -> Self {
        let mut procedures = BTreeMap::new();
        procedures.insert(
            SurgeryType::Cholecystectomy,
            ProcedureKnowledge {
                surgical_process: "Laparoscopic removal of the gallbladder. After port placement the fundus is retracted \
                    cranially and the infundibulum laterally. The hepatocystic triangle is opened by peritoneal \
                    dissection on both sides until only the cystic duct and cystic artery enter the gallbladder and the \
                    lower third of the gallbladder is separated from the liver bed. Both structures are clipped and \
                    divided, the gallbladder is dissected off the liver bed, bleeding points are coagulated, and the \
                    specimen is placed in a retrieval bag."
                    .into(),
                safety_protocol: "Do not clip or divide any structure before the critical view of safety is \
                    established. Keep dissection close to the gallbladder and away from the common bile duct. \
                    Avoid thermal spread near the duct and hepatic artery. Aspirate blood or bile that obscures \
                    the field before continuing. Convert or call for help when anatomy cannot be identified."
                    .into(),
            },
        );
        procedures.insert(
            SurgeryType::Nephrectomy,
            ProcedureKnowledge {
                surgical_process: "Removal of the kidney. The colon is mobilised medially, the ureter and gonadal vein \
                    are identified and lifted, and dissection follows the ureter up to the renal hilum. The renal \
                    artery and vein are skeletonised, secured and divided, the artery first. The upper pole is freed, \
                    the ureter is clipped and cut, and the kidney is placed in a retrieval bag."
                    .into(),
                safety_protocol: "Identify the artery before the vein and secure it first. Keep traction gentle on the \
                    hilum to avoid avulsion. Watch for lumbar and gonadal branches during hilar dissection. Keep the \
                    field clear by aspiration before applying energy near vessels."
                    .into(),
            },
        );
        let actions = [
            (ActionClass::Aspiration, "Suction of blood, fluid or smoke to clear the field."),
            (ActionClass::Clipping, "Placing a clip across a vessel or duct to occlude it."),
            (ActionClass::Coagulation, "Applying energy to tissue to stop bleeding or seal small vessels."),
            (ActionClass::Dissection, "Separating tissue planes, sharply or bluntly, to expose structures."),
            (ActionClass::KnotTying, "Forming and securing a knot with the suture."),
            (ActionClass::NeedleGrasping, "Picking up and orienting the needle in the needle driver."),
            (ActionClass::NeedlePuncture, "Driving the needle through tissue."),
            (ActionClass::Packaging, "Placing a specimen or material into a retrieval bag."),
            (ActionClass::SuturePulling, "Drawing the suture through tissue after a puncture."),
            (ActionClass::TissueRetraction, "Holding or moving tissue aside to expose the working area."),
        ]
        .into_iter()
        .map(|(a, d)| (a, d.to_string()))
        .collect();
        KnowledgeBase { procedures, actions }
    }

    /// TOML with `[procedures.<Name>]` tables and an `[actions]` table.
    pub fn from_toml(text: &str) -> Result<Self, PlanningError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PlanningError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Resolved image payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImage {
    pub media_type: String,
    pub bytes: Vec<u8>,
}

/// Turns frame references into image bytes.
pub trait FrameSource: Send + Sync {
    fn load(&self, reference: &str) -> Result<FrameImage, PlanningError>;
}

/// Reads frames from files under a root directory.
#[derive(Debug, Clone)]
pub struct DirectoryFrames {
    pub root: PathBuf,
}

impl FrameSource for DirectoryFrames {
    fn load(&self, reference: &str) -> Result<FrameImage, PlanningError> {
        let path = self.root.join(reference);
        let bytes = std::fs::read(&path).map_err(|e| PlanningError::Frame {
            reference: reference.into(),
            message: e.to_string(),
        })?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let media_type = match ext.as_str() {
            "png" => "image/png",
            "jpg" | "jpeg" => "image/jpeg",
            "ppm" => "image/x-portable-pixmap",
            _ => {
                return Err(PlanningError::Frame {
                    reference: reference.into(),
                    message: format!("unsupported image extension `{ext}`"),
                })
            }
        };
        Ok(FrameImage {
            media_type: media_type.into(),
            bytes,
        })
    }
}

/// Renders a small flat-coloured PPM derived from the reference string, for
/// runs without real footage.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticFrames;

pub(crate) fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl FrameSource for SyntheticFrames {
    fn load(&self, reference: &str) -> Result<FrameImage, PlanningError> {
        let h = fnv1a(reference).to_le_bytes();
        let mut bytes = b"P6\n8 8\n255\n".to_vec();
        for i in 0..64 {
            let shade = (i as u8).wrapping_mul(3);
            bytes.extend_from_slice(&[h[0] ^ shade, h[1], h[2] ^ shade]);
        }
        Ok(FrameImage {
            media_type: "image/x-portable-pixmap".into(),
            bytes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachedImage {
    pub label: String,
    pub reference: String,
    pub media_type: String,
    /// Base64 of the image bytes.
    pub data: String,
}

impl AttachedImage {
    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.data)
    }
}

/// Everything sent for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sample_id: String,
    pub system_prompt: String,
    /// The user turn: history, attachment legend, the queries and the output format.
    pub user_text: String,
    pub queries: Vec<String>,
    pub images: Vec<AttachedImage>,
}

impl PromptBundle {
    /// Chat-completion `messages` array.
    pub fn messages(&self) -> Vec<Value> {
        let mut content = vec![json!({"type": "text", "text": self.user_text})];
        for img in &self.images {
            content.push(json!({"type": "image_url", "image_url": {"url": img.data_url()}}));
        }
        vec![
            json!({"role": "system", "content": self.system_prompt}),
            json!({"role": "user", "content": content}),
        ]
    }
}

/// The five user queries, in order.
pub const QUERIES: [&str; 5] = [
    "Scene understanding: describe the anatomy, instruments and activity visible in the current frame.",
    "Progress judgment: state which stage of the procedure has been reached and what is already complete.",
    "Safety considerations: name the risks that matter for the coming step and how to avoid them.",
    "Next action: which basic surgical action should follow the near clip?",
    "Alternatives: if other actions are also plausible, add up to two more, most likely first.",
];

/// Indices of `k` frames spread evenly over `m`, taking the centre of each
/// of `k` equal bins. All frames when `m <= k`.
pub fn uniform_frame_indices(m: usize, k: usize) -> Vec<usize> {
    if m <= k {
        return (0..m).collect();
    }
    (0..k).map(|i| (2 * i + 1) * m / (2 * k)).collect()
}

fn attach(frames: &dyn FrameSource, label: String, reference: &str) -> Result<AttachedImage, PlanningError> {
    let img = frames.load(reference)?;
    Ok(AttachedImage {
        label,
        reference: reference.into(),
        media_type: img.media_type,
        data: STANDARD.encode(img.bytes),
    })
}

fn system_prompt(procedure: SurgeryType, knowledge: &ProcedureKnowledge, kb: &KnowledgeBase) -> String {
    let mut s = format!(
        "You are assisting with a {procedure} and predict the next basic surgical action.\n\n\
         Surgical process:\n{}\n\nSafety protocol:\n{}\n\nActions:\n",
        knowledge.surgical_process, knowledge.safety_protocol
    );
    for a in ActionClass::ALL {
        let desc = kb.actions.get(&a).map(String::as_str).unwrap_or("");
        s.push_str(&format!("- {}: {}\n", a.name(), desc));
    }
    s
}

/// Builds the prompt bundle of one sample. Deterministic in its inputs.
pub fn assemble_prompts(
    sample: &PlanningSample,
    kb: &KnowledgeBase,
    frames: &dyn FrameSource,
) -> Result<PromptBundle, PlanningError> {
    let knowledge = kb
        .procedures
        .get(&sample.surgery_type)
        .ok_or(PlanningError::UnknownProcedure(sample.surgery_type))?;

    let mut images = Vec::new();
    for (j, i) in uniform_frame_indices(sample.near.frames.len(), NEAR_FRAMES).into_iter().enumerate() {
        images.push(attach(frames, format!("near_{}", j + 1), &sample.near.frames[i])?);
    }
    images.push(attach(frames, "current".into(), &sample.current_frame)?);

    let distant: Vec<&str> = sample.distant.iter().map(|a| a.name()).collect();
    let labels: Vec<&str> = images.iter().map(|i| i.label.as_str()).collect();
    let allowed: Vec<&str> = ActionClass::ALL.iter().map(|a| a.name()).collect();
    let mut user = format!(
        "Procedure: {}\nSample: {}\nEarlier actions, oldest first: {}\nNear clip action: {}\n\
         Attached images, in order: {} (near clip frames, then the current frame)\n\nQuestions:\n",
        sample.surgery_type,
        sample.sample_id(),
        distant.join(", "),
        sample.near.action.name(),
        labels.join(", "),
    );
    for (i, q) in QUERIES.iter().enumerate() {
        user.push_str(&format!("{}. {}\n", i + 1, q));
    }
    user.push_str(&format!(
        "\nReply with one JSON object and nothing else, using exactly these fields:\n\
         {{\"scene_understanding\": string, \"progress_judgment\": string, \"safety_considerations\": string, \
         \"predictions\": [{{\"action\": string, \"rationale\": string}}]}}\n\
         \"predictions\" holds one to three entries, most likely first. Each action must be one of: {}.\n",
        allowed.join(", ")
    ));

    Ok(PromptBundle {
        sample_id: sample.sample_id(),
        system_prompt: system_prompt(sample.surgery_type, knowledge, kb),
        user_text: user,
        queries: QUERIES.iter().map(|q| q.to_string()).collect(),
        images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{make_samples, ClipRef, ContextSequence, WINDOW};

    fn sample() -> PlanningSample {
        use ActionClass::*;
        let actions = [Dissection, TissueRetraction, Aspiration, TissueRetraction, Dissection, Clipping];
        let ctx = ContextSequence {
            context_id: "chole-01".into(),
            surgery_type: SurgeryType::Cholecystectomy,
            clips: actions
                .iter()
                .enumerate()
                .map(|(i, &a)| ClipRef {
                    clip_id: format!("c{i}"),
                    action: a,
                    frames: (0..10).map(|f| format!("c{i}/f{f:02}.ppm")).collect(),
                })
                .collect(),
        };
        make_samples(&ctx, WINDOW).remove(0)
    }

    #[test]
    fn frame_indices() {
        assert_eq!(uniform_frame_indices(10, 4), vec![1, 3, 6, 8]);
        assert_eq!(uniform_frame_indices(4, 4), vec![0, 1, 2, 3]);
        assert_eq!(uniform_frame_indices(2, 4), vec![0, 1]);
        assert_eq!(uniform_frame_indices(400, 4), vec![50, 150, 250, 350]);
    }

    #[test]
    fn deterministic_and_complete() {
        let s = sample();
        let kb = KnowledgeBase::builtin();
        let a = assemble_prompts(&s, &kb, &SyntheticFrames).unwrap();
        let b = assemble_prompts(&s, &kb, &SyntheticFrames).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert!(a.user_text.contains("Dissection, TissueRetraction, Aspiration, TissueRetraction"));
        assert!(a.user_text.contains("Near clip action: Dissection"));
        for q in QUERIES {
            assert!(a.user_text.contains(q));
        }
        for field in ["scene_understanding", "progress_judgment", "safety_considerations", "predictions", "rationale"] {
            assert!(a.user_text.contains(field));
        }
        assert!(a.system_prompt.contains("Cholecystectomy"));
        assert_eq!(a.images.len(), NEAR_FRAMES + 1);
        assert_eq!(a.images[4].reference, "c4/f09.ppm");
        assert_eq!(a.messages().len(), 2);
    }

    #[test]
    fn unknown_procedure() {
        let mut s = sample();
        s.surgery_type = SurgeryType::Gastrectomy;
        assert!(matches!(
            assemble_prompts(&s, &KnowledgeBase::builtin(), &SyntheticFrames),
            Err(PlanningError::UnknownProcedure(SurgeryType::Gastrectomy))
        ));
    }

    #[test]
    fn knowledge_base_toml() {
        let text = r#"
[procedures.Gastrectomy]
surgical_process = "Mobilise, divide, reconstruct."
safety_protocol = "Mind the pancreas."

[actions]
Clipping = "Clip it."
"#;
        let kb = KnowledgeBase::from_toml(text).unwrap();
        assert!(kb.procedures.contains_key(&SurgeryType::Gastrectomy));
        assert_eq!(kb.actions[&ActionClass::Clipping], "Clip it.");
    }

    #[test]
    fn directory_frames() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), [1u8, 2, 3]).unwrap();
        let src = DirectoryFrames { root: dir.path().into() };
        let img = src.load("a.png").unwrap();
        assert_eq!((img.media_type.as_str(), img.bytes.len()), ("image/png", 3));
        assert!(src.load("missing.png").is_err());
    }
}
