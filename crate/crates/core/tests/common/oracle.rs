//! Reference implementations used as test oracles. They are written for
//! clarity, not speed, and share no code with the library.

use nalgebra::DVector;

fn centered(v: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(v);
    let mean = v.mean();
    v.add_scalar(-mean)
}

/// Pearson as the cosine of the mean-centered vectors.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (xc, yc) = (centered(x), centered(y));
    let denom = xc.norm() * yc.norm();
    (denom > 0.0).then(|| xc.dot(&yc) / denom)
}

/// Average ranks by counting, O(n^2).
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let below = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Tau-b from brute-force pair classification.
pub fn kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx * dy > 0.0 {
                concordant += 1;
            } else if dx * dy < 0.0 {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    if tied_x == n0 || tied_y == n0 {
        return None;
    }
    Some(
        (concordant - discordant) as f64 / (((n0 - tied_x) as f64) * ((n0 - tied_y) as f64)).sqrt(),
    )
}

pub fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    let (x, y) = (DVector::from_column_slice(x), DVector::from_column_slice(y));
    let denom = x.norm() * y.norm();
    (denom > 0.0).then(|| x.dot(&y) / denom)
}

/// Two-tailed p of a correlation with n = 4 (two degrees of freedom), where
/// the t CDF has the closed form 1/2 + t / (2 sqrt(2 + t^2)).
pub fn p_two_dof(r: f64) -> f64 {
    let t = r * (2.0 / (1.0 - r * r)).sqrt();
    let cdf = 0.5 + t.abs() / (2.0 * (2.0 + t * t).sqrt());
    2.0 * (1.0 - cdf)
}

/// Expected tier for five judgments, keyed by the sorted split.
pub fn tier_of_split(split: &[u32]) -> Option<&'static str> {
    let mut s: Vec<u32> = split.iter().copied().filter(|&c| c > 0).collect();
    s.sort_unstable_by(|a, b| b.cmp(a));
    match s.as_slice() {
        [5] => Some("Overwhelming"),
        [4, 1] => Some("Overwhelming"),
        [3, 2] => Some("Strong"),
        [3, 1, 1] => Some("Strong"),
        [2, 2, 1] => None,
        [2, 1, 1, 1] => Some("Simple"),
        other => panic!("not a split of five judgments: {other:?}"),
    }
}
