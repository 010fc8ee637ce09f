//! Synthetic judgments under the two-stage scheme where Offensive, Abusive
//! and Aggressive are co-selected on the same posts, Hateful appears on its
//! own posts and Cyberbullying is picked exactly once.

use chrono::{TimeZone, Utc};
use crowdlabel_core::annotation::{AssignmentId, Judgment};
use crowdlabel_core::scheme::Label;

pub struct Fixture {
    pub post_ids: Vec<String>,
    pub judgments: Vec<Judgment>,
}

fn judgment(post: usize, worker: usize, top: &str, subs: &[&str]) -> Judgment {
    Judgment {
        round_id: "R1".into(),
        assignment_id: AssignmentId(post as u64),
        worker_id: format!("w{worker}"),
        post_id: format!("t{post:03}"),
        top_label: top.into(),
        sub_labels: subs.iter().map(|s| Label::from(*s)).collect(),
        other_text: None,
        submitted_at: Utc.with_ymd_and_hms(2017, 6, 1, 0, 0, 0).unwrap(),
    }
}

pub fn reduction_fixture() -> Fixture {
    let mut judgments = Vec::new();
    let mut post = 0;
    for i in 0..40 {
        let (abusive, offensive, aggressive) = (2 + i % 4, 1 + i % 3, 1 + i % 2);
        for k in 0..5 {
            let subs: Vec<&str> = [
                ("Offensive", offensive),
                ("Abusive", abusive),
                ("Aggressive", aggressive),
            ]
            .into_iter()
            .filter(|(_, n)| k < *n)
            .map(|(l, _)| l)
            .collect();
            judgments.push(if subs.is_empty() {
                judgment(post, k, "Normal", &[])
            } else {
                judgment(post, k, "Inappropriate", &subs)
            });
        }
        post += 1;
    }
    for i in 0..15 {
        for k in 0..5 {
            judgments.push(if k < 4 + i % 2 {
                judgment(post, k, "Inappropriate", &["Hateful"])
            } else {
                judgment(post, k, "Normal", &[])
            });
        }
        post += 1;
    }
    for i in 0..40 {
        for k in 0..5 {
            let top = if k == 4 && i % 3 == 0 {
                "Spam"
            } else {
                "Normal"
            };
            judgments.push(if i == 7 && k == 0 {
                judgment(post, k, "Inappropriate", &["Cyberbullying"])
            } else {
                judgment(post, k, top, &[])
            });
        }
        post += 1;
    }
    for _ in 0..5 {
        for k in 0..5 {
            judgments.push(judgment(
                post,
                k,
                if k < 4 { "Spam" } else { "Normal" },
                &[],
            ));
        }
        post += 1;
    }
    Fixture {
        post_ids: (0..post).map(|p| format!("t{p:03}")).collect(),
        judgments,
    }
}
