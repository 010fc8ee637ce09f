//! Whitespace tokenizer with the token classes used for post metadata.
//!
//! A post is split on unicode whitespace. Each token is classified as a URL
//! (`scheme://...`), hashtag (`#...`), mention (`@...`), numeral (digits only
//! once surrounding punctuation is removed), emoticon (exact match against the
//! shipped emoji table) or plain word. Emoji code points are counted inside
//! any non-URL token.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

const EMOJI_TABLE: &str = include_str!("../../data/emoji.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Url,
    Hashtag,
    Mention,
    Numeral,
    Emoticon,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub raw: &'a str,
    pub kind: TokenKind,
}

impl Token<'_> {
    /// Lowercased form with surrounding punctuation removed, for lexicon and
    /// dictionary lookups. URLs, mentions, numerals and emoticons never
    /// produce a lookup term.
    pub fn term(&self) -> Option<String> {
        match self.kind {
            TokenKind::Word | TokenKind::Hashtag => normalize_word(self.raw),
            _ => None,
        }
    }
}

/// Emoticons and emoji code point ranges loaded from the shipped table.
#[derive(Debug)]
pub struct EmojiTable {
    emoticons: HashSet<String>,
    ranges: Vec<(u32, u32)>,
}

impl EmojiTable {
    pub fn parse(source: &str) -> Self {
        let mut emoticons = HashSet::new();
        let mut ranges = Vec::new();
        for line in source.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("# ") || line == "#" {
                continue;
            }
            if let Some(range) = parse_range(line) {
                ranges.push(range);
            } else {
                emoticons.insert(line.to_string());
            }
        }
        Self { emoticons, ranges }
    }

    pub fn shipped() -> &'static EmojiTable {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| EmojiTable::parse(EMOJI_TABLE))
    }

    pub fn is_emoticon(&self, token: &str) -> bool {
        self.emoticons.contains(token)
    }

    pub fn is_emoji(&self, c: char) -> bool {
        let cp = c as u32;
        self.ranges.iter().any(|&(lo, hi)| lo <= cp && cp <= hi)
    }

    /// Emoji in one token: 1 for an emoticon, otherwise the number of emoji
    /// code points it contains.
    pub fn count_in(&self, token: &str) -> usize {
        if self.is_emoticon(token) {
            1
        } else {
            token.chars().filter(|&c| self.is_emoji(c)).count()
        }
    }
}

fn parse_range(line: &str) -> Option<(u32, u32)> {
    let (lo, hi) = line.split_once("..")?;
    let parse = |s: &str| u32::from_str_radix(s.trim().strip_prefix("U+")?, 16).ok();
    Some((parse(lo)?, parse(hi)?))
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9+.\-]*://\S+$").expect("valid url regex"))
}

pub fn normalize_word(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

fn classify(raw: &str, emoji: &EmojiTable) -> TokenKind {
    if url_pattern().is_match(raw) {
        return TokenKind::Url;
    }
    let has_body = |rest: &str| rest.chars().any(|c| c.is_alphanumeric() || c == '_');
    if let Some(rest) = raw.strip_prefix('#') {
        if has_body(rest) {
            return TokenKind::Hashtag;
        }
    }
    if let Some(rest) = raw.strip_prefix('@') {
        if has_body(rest) {
            return TokenKind::Mention;
        }
    }
    if emoji.is_emoticon(raw) {
        return TokenKind::Emoticon;
    }
    let core = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if !core.is_empty() && core.chars().all(|c| c.is_numeric()) {
        return TokenKind::Numeral;
    }
    TokenKind::Word
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let emoji = EmojiTable::shipped();
    text.split_whitespace()
        .map(|raw| Token {
            raw,
            kind: classify(raw, emoji),
        })
        .collect()
}

/// Lookup terms of a text, in order.
pub fn terms(text: &str) -> Vec<String> {
    tokenize(text).iter().filter_map(Token::term).collect()
}
