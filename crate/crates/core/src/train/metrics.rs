use std::collections::BTreeSet;

use rand::Rng;

use crate::kb::label::normalize;

fn norm_set(items: &[String]) -> BTreeSet<String> {
    items.iter().map(|s| normalize(s)).collect()
}

/// Harmonic mean of set precision and recall under normalized matching.
/// Two empty sets score 1.
pub fn f1(predicted: &[String], gold: &[String]) -> f64 {
    let p = norm_set(predicted);
    let g = norm_set(gold);
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let hit = p.intersection(&g).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let precision = hit / p.len() as f64;
    let recall = hit / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Whether one answer drawn uniformly from `predicted` is gold.
pub fn hits_at_1(predicted: &[String], gold: &[String], rng: &mut impl Rng) -> f64 {
    let p: Vec<String> = norm_set(predicted).into_iter().collect();
    if p.is_empty() {
        return 0.0;
    }
    let pick = &p[rng.random_range(0..p.len())];
    if norm_set(gold).contains(pick) { 1.0 } else { 0.0 }
}
