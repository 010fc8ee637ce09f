use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::annotation::Judgment;
use crate::scheme::Label;

/// Per-post vote counts. Each selected sub-label is one vote, so under
/// multi-select the counts can exceed the number of judgments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub post_id: String,
    pub counts: BTreeMap<Label, u32>,
    pub total_judgments: u32,
}

impl VoteTally {
    pub fn empty(post_id: impl Into<String>) -> Self {
        VoteTally {
            post_id: post_id.into(),
            counts: BTreeMap::new(),
            total_judgments: 0,
        }
    }

    pub fn add(&mut self, judgment: &Judgment) {
        self.total_judgments += 1;
        for label in judgment.votes() {
            *self.counts.entry(label.clone()).or_default() += 1;
        }
    }

    pub fn count(&self, label: &str) -> u32 {
        self.counts.get(label).copied().unwrap_or(0)
    }
}

/// Tallies the judgments of a single post.
pub fn tally_votes<'a>(
    post_id: &str,
    judgments: impl IntoIterator<Item = &'a Judgment>,
) -> VoteTally {
    let mut tally = VoteTally::empty(post_id);
    for j in judgments {
        tally.add(j);
    }
    tally
}

/// One tally per post in `post_ids` order; judgments for other posts are ignored.
pub fn tally_posts<'a>(
    post_ids: &[String],
    judgments: impl IntoIterator<Item = &'a Judgment>,
) -> Vec<VoteTally> {
    let index: HashMap<&str, usize> = post_ids
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut tallies: Vec<VoteTally> = post_ids.iter().map(VoteTally::empty).collect();
    for j in judgments {
        if let Some(&i) = index.get(j.post_id.as_str()) {
            tallies[i].add(j);
        }
    }
    tallies
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Simple,
    Strong,
    Overwhelming,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Overwhelming, Tier::Strong, Tier::Simple];

    pub fn for_fraction(fraction: f64) -> Tier {
        if fraction >= 0.8 {
            Tier::Overwhelming
        } else if fraction >= 0.5 {
            Tier::Strong
        } else {
            Tier::Simple
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Overwhelming => "Overwhelming",
            Tier::Strong => "Strong",
            Tier::Simple => "Simple",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityResult {
    pub post_id: String,
    pub majority_label: Option<Label>,
    /// Top count over the number of judgments.
    pub agreement_fraction: f64,
    pub tier: Option<Tier>,
}

pub fn agreement_tier(tally: &VoteTally) -> Result<MajorityResult, StatsError> {
    if tally.total_judgments == 0 {
        return Err(StatsError::EmptyTally(tally.post_id.clone()));
    }
    let top = tally.counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<&Label> = tally
        .counts
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(l, _)| l)
        .collect();
    let fraction = top as f64 / tally.total_judgments as f64;
    let majority = match leaders.as_slice() {
        [only] if top > 0 => Some((*only).clone()),
        _ => None,
    };
    Ok(MajorityResult {
        post_id: tally.post_id.clone(),
        tier: majority.as_ref().map(|_| Tier::for_fraction(fraction)),
        majority_label: majority,
        agreement_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use chrono::Utc;

    use super::*;
    use crate::annotation::AssignmentId;

    fn judgment(top: &str, subs: &[&str]) -> Judgment {
        Judgment {
            round_id: "R".into(),
            assignment_id: AssignmentId(1),
            worker_id: "w".into(),
            post_id: "p".into(),
            top_label: top.into(),
            sub_labels: subs.iter().map(|s| Label::from(*s)).collect(),
            other_text: None,
            submitted_at: Utc::now(),
        }
    }

    fn tally(counts: &[(&str, u32)]) -> VoteTally {
        VoteTally {
            post_id: "p".into(),
            counts: counts.iter().map(|(l, c)| (Label::from(*l), *c)).collect(),
            total_judgments: counts.iter().map(|(_, c)| c).sum(),
        }
    }

    #[test]
    fn tally_examples() {
        let five = vec![judgment("Abusive", &[]); 5];
        assert_eq!(tally_votes("p", &five), tally(&[("Abusive", 5)]));

        let multi = tally_votes("p", &[judgment("Inappropriate", &["Offensive", "Abusive"])]);
        assert_eq!(multi.count("Offensive"), 1);
        assert_eq!(multi.count("Abusive"), 1);
        assert_eq!(multi.count("Inappropriate"), 0);
        assert_eq!(multi.total_judgments, 1);

        let mut mixed = vec![judgment("Normal", &[]); 3];
        mixed.extend(vec![judgment("Spam", &[]); 2]);
        assert_eq!(
            tally_votes("p", &mixed),
            tally(&[("Normal", 3), ("Spam", 2)])
        );
    }

    #[test]
    fn tier_examples() {
        let r = agreement_tier(&tally(&[("A", 4), ("B", 1)])).unwrap();
        assert_eq!(
            (r.tier, r.agreement_fraction),
            (Some(Tier::Overwhelming), 0.8)
        );
        assert_eq!(r.majority_label, Some(Label::from("A")));
        assert_eq!(
            agreement_tier(&tally(&[("A", 3), ("B", 2)])).unwrap().tier,
            Some(Tier::Strong)
        );
        let tie = agreement_tier(&tally(&[("A", 2), ("B", 2), ("C", 1)])).unwrap();
        assert_eq!((tie.majority_label, tie.tier), (None, None));
        let simple = agreement_tier(&tally(&[("A", 2), ("B", 1), ("C", 1), ("D", 1)])).unwrap();
        assert_eq!(
            (simple.tier, simple.agreement_fraction),
            (Some(Tier::Simple), 0.4)
        );
        assert_eq!(
            agreement_tier(&VoteTally::empty("p")),
            Err(StatsError::EmptyTally("p".into()))
        );
    }

    #[test]
    fn multi_select_fraction_uses_judgment_count() {
        let mut js = vec![judgment("Inappropriate", &["Offensive", "Abusive"]); 4];
        js.push(judgment("Normal", &[]));
        js[3].sub_labels = vec![Label::from("Abusive")];
        let r = agreement_tier(&tally_votes("p", &js)).unwrap();
        assert_eq!(r.majority_label, Some(Label::from("Abusive")));
        assert_eq!(r.agreement_fraction, 0.8);
    }

    #[test]
    fn tally_posts_keeps_order() {
        let mut a = judgment("Spam", &[]);
        a.post_id = "b".into();
        let mut stray = judgment("Spam", &[]);
        stray.post_id = "zzz".into();
        let t = tally_posts(&["a".into(), "b".into()], [&a, &stray]);
        assert_eq!(t[0], VoteTally::empty("a"));
        assert_eq!(t[1].count("Spam"), 1);
    }
}
