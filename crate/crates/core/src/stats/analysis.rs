use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::correlation::{cosine_similarity, kendall_tau, p_value, pearson, spearman, Coefficient};
use super::tally::{agreement_tier, tally_posts, Tier, VoteTally};
use super::StatsError;
use crate::annotation::{Demographics, Judgment};
use crate::sampling::SampleOrigin;
use crate::scheme::{Label, LabelScheme};

/// Votes for one label, one cell per post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVector {
    pub label: Label,
    pub votes: Vec<f64>,
}

pub fn label_vectors(tallies: &[VoteTally], labels: &[Label]) -> Vec<LabelVector> {
    labels
        .iter()
        .map(|label| LabelVector {
            label: label.clone(),
            votes: tallies
                .iter()
                .map(|t| t.count(label.as_str()) as f64)
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub pcc: f64,
    pub p_pcc: f64,
    pub scc: f64,
    pub p_scc: f64,
    pub ktcc: f64,
    pub p_ktcc: f64,
    pub cosine: f64,
}

impl PairStats {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<PairStats, StatsError> {
        let n = x.len();
        let pcc = pearson(x, y)?;
        let scc = spearman(x, y)?;
        let ktcc = kendall_tau(x, y)?;
        Ok(PairStats {
            pcc,
            p_pcc: p_value(Coefficient::Pearson, pcc, n)?,
            scc,
            p_scc: p_value(Coefficient::Spearman, scc, n)?,
            ktcc,
            p_ktcc: p_value(Coefficient::Kendall, ktcc, n)?,
            cosine: cosine_similarity(x, y)?,
        })
    }

    /// How many of the three coefficients are significant at `alpha`.
    pub fn significant(&self, alpha: f64) -> usize {
        [self.p_pcc, self.p_scc, self.p_ktcc]
            .iter()
            .filter(|&&p| p < alpha)
            .count()
    }
}

/// A row of the pair table; `stats` is absent when a coefficient is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub label_a: Label,
    pub label_b: Label,
    pub stats: Option<PairStats>,
    pub undefined: Option<String>,
}

pub fn pair_table(vectors: &[LabelVector]) -> Vec<PairRow> {
    let mut rows = Vec::new();
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            let (stats, undefined) = match PairStats::compute(&a.votes, &b.votes) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            rows.push(PairRow {
                label_a: a.label.clone(),
                label_b: b.label.clone(),
                stats,
                undefined,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TierFilter {
    All,
    Overwhelming,
    Strong,
    Simple,
    NoMajority,
}

impl TierFilter {
    fn accepts(self, tier: Option<Tier>) -> bool {
        match self {
            TierFilter::All => true,
            TierFilter::Overwhelming => tier == Some(Tier::Overwhelming),
            TierFilter::Strong => tier == Some(Tier::Strong),
            TierFilter::Simple => tier == Some(Tier::Simple),
            TierFilter::NoMajority => tier.is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoOccurrenceMatrix {
    pub filter: TierFilter,
    /// Judged posts that fall in the filter.
    pub posts: u32,
    pub labels: Vec<Label>,
    pub counts: Vec<Vec<u32>>,
}

impl CoOccurrenceMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<u32> {
        let i = self.labels.iter().position(|l| l.as_str() == a)?;
        let j = self.labels.iter().position(|l| l.as_str() == b)?;
        Some(self.counts[i][j])
    }
}

/// Posts without judgments are skipped.
pub fn co_occurrence(
    tallies: &[VoteTally],
    labels: &[Label],
    filter: TierFilter,
) -> CoOccurrenceMatrix {
    let k = labels.len();
    let mut counts = vec![vec![0u32; k]; k];
    let mut posts = 0;
    for t in tallies {
        let Ok(result) = agreement_tier(t) else {
            continue;
        };
        if !filter.accepts(result.tier) {
            continue;
        }
        posts += 1;
        let voted: Vec<usize> = (0..k)
            .filter(|&i| t.count(labels[i].as_str()) > 0)
            .collect();
        for &i in &voted {
            for &j in &voted {
                counts[i][j] += 1;
            }
        }
    }
    CoOccurrenceMatrix {
        filter,
        posts,
        labels: labels.to_vec(),
        counts,
    }
}

/// Share of votes per label. With `inappropriate_only` Normal and Spam are
/// left out of both the labels and the denominator.
pub fn usage_distribution(
    tallies: &[VoteTally],
    scheme: &LabelScheme,
    inappropriate_only: bool,
) -> Result<BTreeMap<Label, f64>, StatsError> {
    let labels = if inappropriate_only {
        scheme.inappropriate_labels()
    } else {
        scheme.vote_labels()
    };
    let totals: Vec<u64> = labels
        .iter()
        .map(|l| tallies.iter().map(|t| t.count(l.as_str()) as u64).sum())
        .collect();
    let sum: u64 = totals.iter().sum();
    if sum == 0 {
        return Err(StatsError::NoVotes);
    }
    Ok(labels
        .into_iter()
        .zip(totals)
        .map(|(l, c)| (l, c as f64 / sum as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionThresholds {
    /// Significance level for each coefficient.
    pub alpha: f64,
    /// Coefficients (out of three) that must be significant for a link.
    pub min_significant: usize,
    pub merge_cosine: f64,
    /// Labels below this share of inappropriate votes are dropped.
    pub elimination_share: f64,
}

impl Default for ReductionThresholds {
    fn default() -> Self {
        ReductionThresholds {
            alpha: 0.05,
            min_significant: 2,
            merge_cosine: 0.45,
            elimination_share: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeLink {
    pub label_a: Label,
    pub label_b: Label,
    pub significant: usize,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSet {
    pub labels: Vec<Label>,
    pub representative: Label,
    pub links: Vec<MergeLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub label: Label,
    pub usage_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecommendation {
    pub merges: Vec<MergeSet>,
    pub eliminations: Vec<Elimination>,
}

impl ReductionRecommendation {
    pub fn is_empty(&self) -> bool {
        self.merges.is_empty() && self.eliminations.is_empty()
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = i;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Labels in `usage` are the candidates. `order` breaks ties between equally
/// used labels and fixes the output order; labels missing from it sort last.
pub fn reduction_report(
    pairs: &[PairRow],
    usage: &BTreeMap<Label, f64>,
    order: &[Label],
    thresholds: &ReductionThresholds,
) -> ReductionRecommendation {
    let rank = |l: &Label| order.iter().position(|o| o == l).unwrap_or(order.len());
    let mut candidates: Vec<&Label> = usage.keys().collect();
    candidates.sort_by_key(|l| (rank(l), (*l).clone()));

    let mut eliminations = Vec::new();
    let mut kept = Vec::new();
    for label in candidates {
        let share = usage[label];
        if share < thresholds.elimination_share {
            eliminations.push(Elimination {
                label: label.clone(),
                usage_share: share,
            });
        } else {
            kept.push(label);
        }
    }

    let index: HashMap<&Label, usize> = kept.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut parent: Vec<usize> = (0..kept.len()).collect();
    let mut links = Vec::new();
    for row in pairs {
        let (Some(&a), Some(&b), Some(stats)) =
            (index.get(&row.label_a), index.get(&row.label_b), &row.stats)
        else {
            continue;
        };
        let significant = stats.significant(thresholds.alpha);
        if significant >= thresholds.min_significant && stats.cosine >= thresholds.merge_cosine {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
            links.push((
                a,
                MergeLink {
                    label_a: row.label_a.clone(),
                    label_b: row.label_b.clone(),
                    significant,
                    cosine: stats.cosine,
                },
            ));
        }
    }

    let roots: Vec<usize> = (0..kept.len()).map(|i| find(&mut parent, i)).collect();
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &root) in roots.iter().enumerate() {
        components.entry(root).or_default().push(i);
    }
    let mut merges = Vec::new();
    for (root, members) in components {
        if members.len() < 2 {
            continue;
        }
        // members are in `order`, so max_by keeps the earliest on equal usage
        let representative = members
            .iter()
            .map(|&i| kept[i])
            .rev()
            .max_by(|a, b| usage[*a].total_cmp(&usage[*b]))
            .expect("component is non-empty")
            .clone();
        merges.push(MergeSet {
            labels: members.iter().map(|&i| kept[i].clone()).collect(),
            representative,
            links: links
                .iter()
                .filter(|(a, _)| roots[*a] == root)
                .map(|(_, l)| l.clone())
                .collect(),
        });
    }
    ReductionRecommendation {
        merges,
        eliminations,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierHistogram {
    pub overwhelming: u32,
    pub strong: u32,
    pub simple: u32,
    pub no_majority: u32,
    /// Posts of the round without any accepted judgment.
    pub unjudged: u32,
}

impl TierHistogram {
    pub fn from_tallies(tallies: &[VoteTally]) -> Self {
        let mut h = TierHistogram::default();
        for t in tallies {
            match agreement_tier(t).map(|r| r.tier) {
                Err(_) => h.unjudged += 1,
                Ok(None) => h.no_majority += 1,
                Ok(Some(Tier::Overwhelming)) => h.overwhelming += 1,
                Ok(Some(Tier::Strong)) => h.strong += 1,
                Ok(Some(Tier::Simple)) => h.simple += 1,
            }
        }
        h
    }

    pub fn analyzed(&self) -> u32 {
        self.overwhelming + self.strong + self.simple + self.no_majority
    }
}

/// Free text typed into the "other" box, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtherSuggestion {
    pub post_id: String,
    pub worker_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemographicsSummary {
    pub workers: u32,
    pub gender: BTreeMap<String, u32>,
    pub age_bracket: BTreeMap<String, u32>,
    pub income_bracket: BTreeMap<String, u32>,
    pub education_level: BTreeMap<String, u32>,
    pub nationality: BTreeMap<String, u32>,
}

impl DemographicsSummary {
    pub fn from_profiles<'a>(profiles: impl IntoIterator<Item = &'a Demographics>) -> Self {
        let mut s = DemographicsSummary::default();
        for d in profiles {
            s.workers += 1;
            *s.gender.entry(d.gender.to_string()).or_default() += 1;
            *s.age_bracket.entry(d.age_bracket.to_string()).or_default() += 1;
            *s.income_bracket
                .entry(d.income_bracket.to_string())
                .or_default() += 1;
            *s.education_level
                .entry(d.education_level.to_string())
                .or_default() += 1;
            *s.nationality
                .entry(d.nationality.as_str().to_string())
                .or_default() += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub round_id: String,
    pub scheme: String,
    pub posts: u32,
    pub judgments: u32,
    pub tiers: TierHistogram,
    pub usage_all: Option<BTreeMap<Label, f64>>,
    pub usage_inappropriate: Option<BTreeMap<Label, f64>>,
    pub usage_by_origin: BTreeMap<String, BTreeMap<Label, f64>>,
    pub pairs: Vec<PairRow>,
    pub co_occurrence: Vec<CoOccurrenceMatrix>,
    pub thresholds: ReductionThresholds,
    pub recommendation: ReductionRecommendation,
    pub other_suggestions: Vec<OtherSuggestion>,
    pub demographics: Option<DemographicsSummary>,
}

pub struct ReportInput<'a> {
    pub round_id: &'a str,
    pub scheme: &'a LabelScheme,
    pub post_ids: &'a [String],
    /// Accepted judgments only.
    pub judgments: Vec<&'a Judgment>,
    pub origins: &'a HashMap<String, SampleOrigin>,
    pub thresholds: ReductionThresholds,
}

pub fn build_report(input: ReportInput<'_>) -> AnalysisReport {
    let scheme = input.scheme;
    let all = tally_posts(input.post_ids, input.judgments.iter().copied());
    let judged: Vec<VoteTally> = all
        .iter()
        .filter(|t| t.total_judgments > 0)
        .cloned()
        .collect();
    let labels = scheme.vote_labels();
    let pairs = pair_table(&label_vectors(&judged, &labels));
    let usage_inappropriate = usage_distribution(&judged, scheme, true).ok();
    let recommendation = usage_inappropriate
        .as_ref()
        .map(|u| reduction_report(&pairs, u, &labels, &input.thresholds))
        .unwrap_or_default();

    let mut by_origin: BTreeMap<String, Vec<VoteTally>> = BTreeMap::new();
    for t in &judged {
        if let Some(origin) = input.origins.get(&t.post_id) {
            by_origin
                .entry(origin.code().to_string())
                .or_default()
                .push(t.clone());
        }
    }
    let usage_by_origin = by_origin
        .into_iter()
        .filter_map(|(code, ts)| {
            usage_distribution(&ts, scheme, false)
                .ok()
                .map(|u| (code, u))
        })
        .collect();

    let mut other_suggestions: Vec<OtherSuggestion> = input
        .judgments
        .iter()
        .filter_map(|j| {
            j.other_text.as_ref().map(|text| OtherSuggestion {
                post_id: j.post_id.clone(),
                worker_id: j.worker_id.clone(),
                text: text.clone(),
            })
        })
        .collect();
    other_suggestions.sort_by(|a, b| (&a.post_id, &a.worker_id).cmp(&(&b.post_id, &b.worker_id)));

    AnalysisReport {
        round_id: input.round_id.to_string(),
        scheme: scheme.version.clone(),
        posts: all.len() as u32,
        judgments: input.judgments.len() as u32,
        tiers: TierHistogram::from_tallies(&all),
        usage_all: usage_distribution(&judged, scheme, false).ok(),
        usage_inappropriate,
        usage_by_origin,
        co_occurrence: [
            TierFilter::All,
            TierFilter::Overwhelming,
            TierFilter::Strong,
            TierFilter::Simple,
        ]
        .into_iter()
        .map(|f| co_occurrence(&judged, &labels, f))
        .collect(),
        pairs,
        thresholds: input.thresholds,
        recommendation,
        other_suggestions,
        demographics: None,
    }
}
