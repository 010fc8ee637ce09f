//! Corpus ingestion: parsing line-delimited post files, metadata extraction
//! and the pre-annotation filter.

mod filter;
mod offensive;
mod sentiment;
pub mod tokenize;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{
    filter_pipeline, rejection_for, FilterOutcome, FilterThresholds, RejectionReason,
};
pub use offensive::{count_offensive_terms, OffensiveDictionary};
pub use sentiment::{LexiconEntry, SentimentLexicon};

use tokenize::{tokenize, EmojiTable, TokenKind};

/// Share of malformed lines tolerated before a corpus is rejected outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

/// A single malformed line (typically a truncated final record) is always
/// tolerated, whatever the corpus size.
pub const MALFORMED_LINE_FLOOR: usize = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus format error: {malformed} of {total} lines are malformed (limit 10%)")]
    Format { malformed: usize, total: usize },
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("invalid dictionary: {0}")]
    Dictionary(String),
}

/// One post as read from the corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    pub lang: String,
    pub created_at: DateTime<Utc>,
    pub author_created_at: DateTime<Utc>,
    pub retweet_flag: bool,
    #[serde(default)]
    pub retweet_added_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostMetadata {
    pub url_count: u32,
    pub hashtag_count: u32,
    pub mention_count: u32,
    pub emoji_count: u32,
    pub numeral_count: u32,
    pub is_retweet: bool,
    pub has_mention: bool,
    pub polarity: f64,
    pub subjectivity: f64,
    pub offensive_term_count: u32,
    pub account_age_days: u32,
}

/// A post with its metadata and, once filtered, the reason it was dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanPost {
    pub post: RawPost,
    pub metadata: PostMetadata,
    pub rejection_reason: Option<RejectionReason>,
}

impl CleanPost {
    pub fn id(&self) -> &str {
        &self.post.id
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    pub posts: Vec<RawPost>,
    pub skipped: usize,
}

/// Reads a line-delimited corpus. Blank lines are ignored; lines that fail to
/// parse, have an empty id or repeat an earlier id are skipped and counted.
pub fn parse_corpus(path: &Path) -> Result<ParsedCorpus, CorpusError> {
    let reader = open(path)?;
    parse_corpus_reader(reader).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn parse_corpus_reader(reader: impl BufRead) -> Result<ParsedCorpus, CorpusError> {
    let mut seen = HashSet::new();
    let mut parsed = ParsedCorpus::default();
    let mut total = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<corpus>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<RawPost>(&line) {
            Ok(post) if !post.id.is_empty() && seen.insert(post.id.clone()) => {
                parsed.posts.push(post)
            }
            _ => parsed.skipped += 1,
        }
    }
    if parsed.skipped > MALFORMED_LINE_FLOOR
        && parsed.skipped as f64 > MAX_MALFORMED_FRACTION * total as f64
    {
        return Err(CorpusError::Format {
            malformed: parsed.skipped,
            total,
        });
    }
    Ok(parsed)
}

pub fn extract_metadata(
    post: &RawPost,
    lexicon: &SentimentLexicon,
    dicts: &[OffensiveDictionary],
) -> PostMetadata {
    let emoji = EmojiTable::shipped();
    let mut meta = PostMetadata {
        url_count: 0,
        hashtag_count: 0,
        mention_count: 0,
        emoji_count: 0,
        numeral_count: 0,
        is_retweet: post.retweet_flag || post.text.starts_with("RT @"),
        has_mention: false,
        polarity: lexicon.polarity(&post.text),
        subjectivity: lexicon.subjectivity(&post.text),
        offensive_term_count: count_offensive_terms(&post.text, dicts),
        account_age_days: (post.created_at - post.author_created_at).num_days().max(0) as u32,
    };
    for token in tokenize(&post.text) {
        match token.kind {
            TokenKind::Url => meta.url_count += 1,
            TokenKind::Hashtag => meta.hashtag_count += 1,
            TokenKind::Mention => meta.mention_count += 1,
            TokenKind::Numeral => meta.numeral_count += 1,
            TokenKind::Emoticon | TokenKind::Word => {}
        }
        if token.kind != TokenKind::Url {
            meta.emoji_count += emoji.count_in(token.raw) as u32;
        }
    }
    meta.has_mention = meta.mention_count > 0;
    meta
}

/// Metadata extraction for a batch of raw posts; rejection reasons are left
/// empty for [`filter_pipeline`] to fill in.
pub fn enrich(
    posts: Vec<RawPost>,
    lexicon: &SentimentLexicon,
    dicts: &[OffensiveDictionary],
) -> Vec<CleanPost> {
    posts
        .into_iter()
        .map(|post| {
            let metadata = extract_metadata(&post, lexicon, dicts);
            CleanPost {
                post,
                metadata,
                rejection_reason: None,
            }
        })
        .collect()
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub(crate) fn read_term_list(reader: impl BufRead) -> Result<Vec<String>, String> {
    let mut terms = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| e.to_string())?;
        let term = line.trim();
        if term.is_empty() || term.starts_with('#') {
            continue;
        }
        terms.push(term.to_string());
    }
    Ok(terms)
}
