//! Boosted and random sampling of cleaned posts into per-round datasets.
//!
//! A dataset mixes a boosted stratum (posts pre-selected as likely abusive)
//! with a uniformly drawn random stratum. Every draw is seeded so the same
//! spec over the same input always yields the same dataset, order included.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CleanPost;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleOrigin {
    #[serde(rename = "RS")]
    RandomSample,
    #[serde(rename = "BS")]
    BoostedSample,
}

impl SampleOrigin {
    pub fn code(self) -> &'static str {
        match self {
            SampleOrigin::RandomSample => "RS",
            SampleOrigin::BoostedSample => "BS",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "RS" => Some(SampleOrigin::RandomSample),
            "BS" => Some(SampleOrigin::BoostedSample),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("insufficient {stratum:?} pool: need {needed}, have {available}")]
    InsufficientPool {
        stratum: SampleOrigin,
        needed: usize,
        available: usize,
    },
    #[error("cannot draw {k} items from a pool of {available}")]
    SubsetTooLarge { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub total_size: usize,
    pub boosted_fraction: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.name.trim().is_empty() {
            return Err(SamplingError::InvalidSpec("empty dataset name".into()));
        }
        if self.total_size == 0 {
            return Err(SamplingError::InvalidSpec(format!(
                "{}: total_size must be positive",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.boosted_fraction) {
            return Err(SamplingError::InvalidSpec(format!(
                "{}: boosted_fraction {} outside [0, 1]",
                self.name, self.boosted_fraction
            )));
        }
        Ok(())
    }

    /// Round-half-up of `boosted_fraction * total_size`.
    pub fn boosted_count(&self) -> usize {
        let exact = self.boosted_fraction * self.total_size as f64;
        ((exact + 0.5).floor() as usize).min(self.total_size)
    }

    pub fn random_count(&self) -> usize {
        self.total_size - self.boosted_count()
    }
}

/// Thresholds selecting posts for the boosted stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostCriteria {
    /// Polarity must be strictly below this value.
    pub polarity_threshold: f64,
    pub min_offensive: u32,
}

impl Default for BoostCriteria {
    fn default() -> Self {
        Self {
            polarity_threshold: -0.7,
            min_offensive: 1,
        }
    }
}

impl BoostCriteria {
    pub fn accepts(&self, post: &CleanPost) -> bool {
        post.metadata.polarity < self.polarity_threshold
            && post.metadata.offensive_term_count >= self.min_offensive
    }
}

pub fn boosted_filter<'a>(posts: &'a [CleanPost], criteria: &BoostCriteria) -> Vec<&'a CleanPost> {
    posts.iter().filter(|p| criteria.accepts(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPost {
    pub post: CleanPost,
    pub origin: SampleOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledDataset {
    pub spec: DatasetSpec,
    pub posts: Vec<SampledPost>,
}

impl SampledDataset {
    pub fn count(&self, origin: SampleOrigin) -> usize {
        self.posts.iter().filter(|p| p.origin == origin).count()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.posts.iter().map(|p| p.post.id())
    }
}

fn draw<T: Clone>(rng: &mut ChaCha8Rng, pool: &[T], k: usize) -> Result<Vec<T>, SamplingError> {
    if k > pool.len() {
        return Err(SamplingError::SubsetTooLarge {
            k,
            available: pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

/// Uniform sample of `k` items without replacement, deterministic in `seed`.
pub fn random_subset<T: Clone>(pool: &[T], k: usize, seed: u64) -> Result<Vec<T>, SamplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw(&mut rng, pool, k)
}

/// Deduplicates by id and orders by id so the draw does not depend on the
/// order posts were supplied in.
fn canonical<'a>(posts: impl IntoIterator<Item = &'a CleanPost>) -> Vec<&'a CleanPost> {
    let mut by_id = BTreeMap::new();
    for p in posts {
        by_id.entry(p.id()).or_insert(p);
    }
    by_id.into_values().collect()
}

/// Draws the boosted stratum from `eligible_boosted` and the random stratum
/// from the rest of `pool`, then shuffles the union. Posts whose id is in
/// `exclude` are never drawn.
pub fn compose_dataset(
    spec: &DatasetSpec,
    eligible_boosted: &[CleanPost],
    pool: &[CleanPost],
    exclude: &HashSet<String>,
) -> Result<SampledDataset, SamplingError> {
    spec.validate()?;
    let boosted_pool = canonical(
        eligible_boosted
            .iter()
            .filter(|p| !exclude.contains(p.id())),
    );
    let boosted_ids: HashSet<&str> = eligible_boosted.iter().map(|p| p.id()).collect();
    let random_pool = canonical(
        pool.iter()
            .filter(|p| !boosted_ids.contains(p.id()) && !exclude.contains(p.id())),
    );

    let (n_boost, n_random) = (spec.boosted_count(), spec.random_count());
    if boosted_pool.len() < n_boost {
        return Err(SamplingError::InsufficientPool {
            stratum: SampleOrigin::BoostedSample,
            needed: n_boost,
            available: boosted_pool.len(),
        });
    }
    if random_pool.len() < n_random {
        return Err(SamplingError::InsufficientPool {
            stratum: SampleOrigin::RandomSample,
            needed: n_random,
            available: random_pool.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut posts: Vec<SampledPost> = draw(&mut rng, &boosted_pool, n_boost)?
        .into_iter()
        .map(|p| SampledPost {
            post: p.clone(),
            origin: SampleOrigin::BoostedSample,
        })
        .collect();
    posts.extend(
        draw(&mut rng, &random_pool, n_random)?
            .into_iter()
            .map(|p| SampledPost {
                post: p.clone(),
                origin: SampleOrigin::RandomSample,
            }),
    );
    posts.shuffle(&mut rng);

    Ok(SampledDataset {
        spec: spec.clone(),
        posts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PostMetadata, RawPost};
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    pub(crate) fn clean(id: &str, polarity: f64, offensive: u32) -> CleanPost {
        CleanPost {
            post: RawPost {
                id: id.into(),
                text: format!("post {id}"),
                lang: "en".into(),
                created_at: Utc.with_ymd_and_hms(2017, 4, 1, 0, 0, 0).unwrap(),
                author_created_at: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(),
                retweet_flag: false,
                retweet_added_text: None,
            },
            metadata: PostMetadata {
                url_count: 0,
                hashtag_count: 0,
                mention_count: 0,
                emoji_count: 0,
                numeral_count: 0,
                is_retweet: false,
                has_mention: false,
                polarity,
                subjectivity: 0.5,
                offensive_term_count: offensive,
                account_age_days: 400,
            },
            rejection_reason: None,
        }
    }

    fn corpus(n_boost: usize, n_plain: usize) -> Vec<CleanPost> {
        (0..n_boost)
            .map(|i| clean(&format!("b{i:05}"), -0.9, 2))
            .chain((0..n_plain).map(|i| clean(&format!("r{i:05}"), 0.1, 0)))
            .collect()
    }

    fn spec(total: usize, fraction: f64, seed: u64) -> DatasetSpec {
        DatasetSpec {
            name: "D".into(),
            total_size: total,
            boosted_fraction: fraction,
            seed,
        }
    }

    #[test]
    fn boost_eligibility_boundaries() {
        let c = BoostCriteria::default();
        assert!(c.accepts(&clean("a", -0.8, 2)));
        assert!(!c.accepts(&clean("b", -0.9, 0)));
        assert!(!c.accepts(&clean("c", -0.7, 3)));
    }

    #[test]
    fn stratum_counts_follow_fraction() {
        assert_eq!(
            (
                spec(300, 1.0 / 3.0, 0).boosted_count(),
                spec(300, 1.0 / 3.0, 0).random_count()
            ),
            (100, 200)
        );
        assert_eq!(
            (
                spec(80_000, 0.125, 0).boosted_count(),
                spec(80_000, 0.125, 0).random_count()
            ),
            (10_000, 70_000)
        );
        assert_eq!(spec(10, 0.0, 0).boosted_count(), 0);
        // 0.25 * 10 = 2.5 rounds up
        assert_eq!(spec(10, 0.25, 0).boosted_count(), 3);
    }

    #[test]
    fn compose_tags_origins() {
        let posts = corpus(150, 400);
        let eligible: Vec<CleanPost> = boosted_filter(&posts, &BoostCriteria::default())
            .into_iter()
            .cloned()
            .collect();
        let ds =
            compose_dataset(&spec(300, 1.0 / 3.0, 7), &eligible, &posts, &HashSet::new()).unwrap();
        assert_eq!(ds.posts.len(), 300);
        assert_eq!(ds.count(SampleOrigin::BoostedSample), 100);
        assert_eq!(ds.count(SampleOrigin::RandomSample), 200);
        let ids: HashSet<&str> = ds.ids().collect();
        assert_eq!(ids.len(), 300);
    }

    #[test]
    fn compose_zero_fraction_is_all_random() {
        let posts = corpus(0, 20);
        let ds = compose_dataset(&spec(10, 0.0, 1), &[], &posts, &HashSet::new()).unwrap();
        assert_eq!(ds.count(SampleOrigin::RandomSample), 10);
    }

    #[test]
    fn insufficient_pool_names_stratum() {
        let posts = corpus(5, 400);
        let eligible: Vec<CleanPost> = posts[..5].to_vec();
        let err = compose_dataset(&spec(300, 1.0 / 3.0, 7), &eligible, &posts, &HashSet::new())
            .unwrap_err();
        assert_eq!(
            err,
            SamplingError::InsufficientPool {
                stratum: SampleOrigin::BoostedSample,
                needed: 100,
                available: 5
            }
        );
        let err =
            compose_dataset(&spec(500, 0.0, 7), &eligible, &posts, &HashSet::new()).unwrap_err();
        assert!(matches!(
            err,
            SamplingError::InsufficientPool {
                stratum: SampleOrigin::RandomSample,
                ..
            }
        ));
    }

    #[test]
    fn exclusion_keeps_datasets_disjoint() {
        let posts = corpus(60, 200);
        let eligible: Vec<CleanPost> = posts[..60].to_vec();
        let d1 = compose_dataset(&spec(60, 0.5, 1), &eligible, &posts, &HashSet::new()).unwrap();
        let taken: HashSet<String> = d1.ids().map(String::from).collect();
        let d2 = compose_dataset(&spec(150, 0.2, 2), &eligible, &posts, &taken).unwrap();
        assert!(d2.ids().all(|id| !taken.contains(id)));
    }

    #[test]
    fn random_subset_edges() {
        let pool: Vec<u32> = (0..10).collect();
        assert!(random_subset(&pool, 0, 3).unwrap().is_empty());
        let mut all = random_subset(&pool, 10, 3).unwrap();
        all.sort();
        assert_eq!(all, pool);
        assert_eq!(
            random_subset(&pool, 4, 9).unwrap(),
            random_subset(&pool, 4, 9).unwrap()
        );
        assert_eq!(
            random_subset(&pool, 11, 3),
            Err(SamplingError::SubsetTooLarge {
                k: 11,
                available: 10
            })
        );
    }

    #[test]
    fn single_draw_is_roughly_uniform() {
        let pool: Vec<usize> = (0..10).collect();
        let mut freq = [0usize; 10];
        for seed in 0..1000 {
            freq[random_subset(&pool, 1, seed).unwrap()[0]] += 1;
        }
        for f in freq {
            assert!(
                (60..=140).contains(&f),
                "frequency {f} outside 100 ± 40: {freq:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn composition_invariants(seed in any::<u64>(), total in 1usize..120, frac in 0.0f64..=1.0) {
            let posts = corpus(130, 150);
            let criteria = BoostCriteria::default();
            let eligible: Vec<CleanPost> = boosted_filter(&posts, &criteria).into_iter().cloned().collect();
            let s = spec(total, frac, seed);
            let ds = compose_dataset(&s, &eligible, &posts, &HashSet::new()).unwrap();
            prop_assert_eq!(ds.posts.len(), total);
            prop_assert_eq!(ds.count(SampleOrigin::BoostedSample), s.boosted_count());
            prop_assert!(ds.posts.iter().filter(|p| p.origin == SampleOrigin::BoostedSample).all(|p| criteria.accepts(&p.post)));
            let ids: HashSet<&str> = ds.ids().collect();
            prop_assert_eq!(ids.len(), total);

            let mut reversed = posts.clone();
            reversed.reverse();
            let again = compose_dataset(&s, &eligible, &reversed, &HashSet::new()).unwrap();
            prop_assert_eq!(ds, again);
        }
    }
}
