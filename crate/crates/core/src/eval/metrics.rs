/// `|top-k ∩ relevant| / |relevant|`; `relevant` must be sorted. Returns 0
/// for an empty relevant set (such users are excluded upstream).
pub fn recall_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|i| relevant.binary_search(i).is_ok()).count();
    hits as f64 / relevant.len() as f64
}

/// Binary-relevance NDCG with the ideal ordering over `min(|relevant|, k)`
/// positions; `relevant` must be sorted.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.binary_search(i).is_ok())
        .map(|(r, _)| discount(r))
        .sum();
    let idcg: f64 = (0..relevant.len().min(k)).map(discount).sum();
    dcg / idcg
}

/// `1 / log₂(rank + 1)` for a 0-based position.
fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}
