#![allow(dead_code)]

use base64::Engine as _;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use securexam::digest::Digest256;
use securexam::exam::{
    validate_exam, Design, ExamDraft, MediaKind, OptionDraft, QuestionDraft, QuestionKind,
    ResourceDraft, ValidatedExam,
};

/// Random but valid exam, fully determined by `seed`.
pub fn random_exam(seed: u64) -> ValidatedExam {
    validate_exam(&random_draft(seed)).expect("generator produces valid drafts")
}

pub fn random_draft(seed: u64) -> ExamDraft {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_res = rng.gen_range(0..3);
    let resources: Vec<ResourceDraft> = (0..n_res)
        .map(|i| {
            let len = rng.gen_range(0..64);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            ResourceDraft {
                id: format!("res-{i}"),
                media_kind: MediaKind::HtmlBundle,
                path: None,
                data: Some(base64::engine::general_purpose::STANDARD.encode(&bytes)),
                digest: Digest256::of(&bytes).to_hex(),
            }
        })
        .collect();
    let n_q = rng.gen_range(1..12);
    let mut questions = Vec::new();
    for i in 0..n_q {
        let refs = if n_res > 0 && rng.gen_bool(0.3) {
            vec![format!("res-{}", rng.gen_range(0..n_res))]
        } else {
            vec![]
        };
        if rng.gen_bool(0.7) {
            let n_opt = rng.gen_range(2..=6);
            let options: Vec<_> = (0..n_opt)
                .map(|o| OptionDraft {
                    label: format!("{}", char::from(b'a' + o as u8)),
                    text: format!("choice {o} of question {i} ({})", rng.gen::<u16>()),
                })
                .collect();
            let correct = options[rng.gen_range(0..n_opt)].label.clone();
            questions.push(QuestionDraft {
                id: format!("obj-{i}"),
                kind: QuestionKind::Objective,
                prompt: format!("Objective prompt {i} marker-{seed}-{i}"),
                resource_refs: refs,
                options,
                correct_option: Some(correct),
                max_marks: None,
                answer_sentinel: None,
            });
        } else {
            questions.push(QuestionDraft {
                id: format!("ess-{i}"),
                kind: QuestionKind::Essay,
                prompt: format!("Essay prompt {i} marker-{seed}-{i}"),
                resource_refs: refs,
                options: vec![],
                correct_option: None,
                max_marks: Some(rng.gen_range(1..=20)),
                answer_sentinel: Some("Type below".into()),
            });
        }
    }
    let uses = questions.iter().any(|q| !q.resource_refs.is_empty());
    let rich = !uses && rng.gen_bool(0.1);
    ExamDraft {
        exam_id: format!("EXAM-{seed}"),
        title: format!("Generated {seed}"),
        course_code: format!("C{}", seed % 7),
        duration_minutes: rng.gen_range(1..=180),
        design: if uses || rich { Design::PostPaper } else { Design::PaperReplacement },
        rich_environment: rich,
        questions,
        resources,
    }
}
