//! Ranking metrics and run aggregation.

use crate::error::{Error, Result};

/// Rank-based ROC-AUC with ties counted one half:
/// `(#{p > n} + ½ #{p = n}) / (|P| |N|)`, via midranks after one sort.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyScores);
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(Error::NanScore);
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // sum of midranks (1-based) of the positives
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let positives = all[i..j].iter().filter(|x| x.1).count();
        let midrank = (i + 1 + j) as f64 / 2.0;
        rank_sum += midrank * positives as f64;
        i = j;
    }
    let p = pos.len() as f64;
    let n = neg.len() as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean, population standard deviation and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub std_sample: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    if xs.is_empty() {
        return Summary {
            mean: f64::NAN,
            std: f64::NAN,
            std_sample: f64::NAN,
        };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Summary {
        mean,
        std: (ss / n).sqrt(),
        std_sample: if xs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 },
    }
}
