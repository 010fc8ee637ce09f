use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenKind};
use super::CleanPost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectionReason {
    Spam,
    NonEnglish,
    RetweetNoContent,
    TooShort,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 4] = [
        RejectionReason::NonEnglish,
        RejectionReason::RetweetNoContent,
        RejectionReason::Spam,
        RejectionReason::TooShort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::Spam => "Spam",
            RejectionReason::NonEnglish => "NonEnglish",
            RejectionReason::RetweetNoContent => "RetweetNoContent",
            RejectionReason::TooShort => "TooShort",
        }
    }
}

/// Spam and content thresholds. A post is spam when any count reaches its
/// limit or the account is younger than `min_account_age_days`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    pub spam_url_count: u32,
    pub spam_hashtag_count: u32,
    pub spam_mention_count: u32,
    pub min_account_age_days: u32,
    /// Minimum number of tokens that are neither URLs nor mentions.
    pub min_content_tokens: usize,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            spam_url_count: 3,
            spam_hashtag_count: 5,
            spam_mention_count: 6,
            min_account_age_days: 1,
            min_content_tokens: 3,
        }
    }
}

fn is_english(lang: &str) -> bool {
    let primary = lang.split(['-', '_']).next().unwrap_or("");
    primary.eq_ignore_ascii_case("en")
}

/// The first failing check, in the order language, retweet, spam, length.
pub fn rejection_for(post: &CleanPost, thresholds: &FilterThresholds) -> Option<RejectionReason> {
    let meta = &post.metadata;
    if !is_english(&post.post.lang) {
        return Some(RejectionReason::NonEnglish);
    }
    let added = post
        .post
        .retweet_added_text
        .as_deref()
        .map(str::trim)
        .unwrap_or("");
    if meta.is_retweet && added.is_empty() {
        return Some(RejectionReason::RetweetNoContent);
    }
    if meta.url_count >= thresholds.spam_url_count
        || meta.hashtag_count >= thresholds.spam_hashtag_count
        || meta.mention_count >= thresholds.spam_mention_count
        || meta.account_age_days < thresholds.min_account_age_days
    {
        return Some(RejectionReason::Spam);
    }
    let content = tokenize(&post.post.text)
        .iter()
        .filter(|t| !matches!(t.kind, TokenKind::Url | TokenKind::Mention))
        .count();
    if content < thresholds.min_content_tokens {
        return Some(RejectionReason::TooShort);
    }
    None
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub accepted: Vec<CleanPost>,
    pub rejected: Vec<CleanPost>,
}

impl FilterOutcome {
    pub fn count(&self, reason: RejectionReason) -> usize {
        self.rejected
            .iter()
            .filter(|p| p.rejection_reason == Some(reason))
            .count()
    }
}

/// Partitions candidates into accepted and rejected posts, preserving input
/// order within each side. Rejected posts carry their reason.
pub fn filter_pipeline(posts: Vec<CleanPost>, thresholds: &FilterThresholds) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for mut post in posts {
        post.rejection_reason = rejection_for(&post, thresholds);
        if post.rejection_reason.is_some() {
            outcome.rejected.push(post);
        } else {
            outcome.accepted.push(post);
        }
    }
    outcome
}
