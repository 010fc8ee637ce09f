use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    Pearson,
    Spearman,
    Kendall,
}

impl Coefficient {
    fn min_len(self) -> usize {
        match self {
            Coefficient::Pearson | Coefficient::Spearman => 4,
            Coefficient::Kendall => 3,
        }
    }
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooShort {
            needed: min,
            got: x.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation with two-pass mean centering.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = rank;
        }
        i = j;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    pearson(&ranks(x), &ranks(y))
}

/// Pair counts behind tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// All pairs, n(n-1)/2.
    pub n0: u64,
    /// Pairs tied in x.
    pub n1: u64,
    /// Pairs tied in y.
    pub n2: u64,
    /// Concordant minus discordant pairs.
    pub s: i64,
}

impl PairCounts {
    pub fn tau_b(&self) -> Result<f64, StatsError> {
        if self.n1 == self.n0 || self.n2 == self.n0 {
            return Err(StatsError::UndefinedCorrelation("all pairs tied".into()));
        }
        let denom = (((self.n0 - self.n1) as f64) * ((self.n0 - self.n2) as f64)).sqrt();
        Ok(self.s as f64 / denom)
    }
}

fn tied_pairs(sorted: &[f64], eq: impl Fn(usize, usize) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..sorted.len() {
        if eq(i - 1, i) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `idx` by `key` with a merge sort and returns the number of
/// inversions (strictly decreasing pairs).
fn merge_count(idx: &mut [usize], key: &[f64], buf: &mut Vec<usize>) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut idx[..mid], key, buf) + merge_count(&mut idx[mid..], key, buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if key[idx[j]] < key[idx[i]] {
            swaps += (mid - i) as u64;
            buf.push(idx[j]);
            j += 1;
        } else {
            buf.push(idx[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&idx[i..mid]);
    buf.extend_from_slice(&idx[j..n]);
    idx.copy_from_slice(buf);
    swaps
}

/// O(n log n) pair counting: sort by (x, y), count joint and x ties, then
/// count y-inversions with a merge sort.
pub fn pair_counts(x: &[f64], y: &[f64]) -> PairCounts {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let n0 = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let n1 = tied_pairs(&xs, |a, b| xs[a] == xs[b]);
    let n3 = tied_pairs(&xs, |a, b| xs[a] == xs[b] && y[idx[a]] == y[idx[b]]);
    let mut buf = Vec::with_capacity(n);
    let swaps = merge_count(&mut idx, y, &mut buf);
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let n2 = tied_pairs(&ys, |a, b| ys[a] == ys[b]);
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    PairCounts { n0, n1, n2, s }
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    pair_counts(x, y).tau_b()
}

/// Two-tailed p-value for a coefficient computed over `n` observations.
pub fn p_value(kind: Coefficient, value: f64, n: usize) -> Result<f64, StatsError> {
    if !(-1.0..=1.0).contains(&value) {
        return Err(StatsError::Domain(value));
    }
    if n < kind.min_len() {
        return Err(StatsError::TooShort {
            needed: kind.min_len(),
            got: n,
        });
    }
    if value == 0.0 {
        return Ok(1.0);
    }
    match kind {
        Coefficient::Pearson | Coefficient::Spearman => {
            let r2 = value * value;
            if r2 >= 1.0 {
                return Ok(0.0);
            }
            // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2), and df/(df+t^2) = 1 - r^2
            let df = (n - 2) as f64;
            Ok(beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0))
        }
        Coefficient::Kendall => {
            let n = n as f64;
            let z = 3.0 * value * (n * (n - 1.0)).sqrt() / (2.0 * (2.0 * n + 5.0)).sqrt();
            Ok(erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
        }
    }
}

pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(StatsError::UndefinedSimilarity);
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}
