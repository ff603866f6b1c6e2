//! Least-squares monotone regression by pool-adjacent-violators.

/// Non-decreasing least-squares fit of `values` taken in the given order.
pub fn pava(values: &[f64]) -> Vec<f64> {
    // (sum, count) per block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 <= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s0 + s1, c0 + c1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// Order in which pairs enter the monotone regression: ascending
/// dissimilarity, and within a run of tied dissimilarities ascending distance.
///
/// Letting tied pairs take whatever order fits best is Kruskal's primary
/// approach to ties.
pub fn primary_order(dissimilarities: &[f64], distances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dissimilarities.len()).collect();
    order.sort_by(|&a, &b| {
        dissimilarities[a]
            .total_cmp(&dissimilarities[b])
            .then(distances[a].total_cmp(&distances[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Disparities: the monotone fit of `distances` against the ranking given by
/// `dissimilarities`, returned in the original pair order.
pub fn isotonic_fit(dissimilarities: &[f64], distances: &[f64]) -> Vec<f64> {
    assert_eq!(
        dissimilarities.len(),
        distances.len(),
        "one dissimilarity per distance"
    );
    let order = primary_order(dissimilarities, distances);
    let sorted: Vec<f64> = order.iter().map(|&i| distances[i]).collect();
    let fitted = pava(&sorted);
    let mut out = vec![0.0; distances.len()];
    for (&i, v) in order.iter().zip(fitted) {
        out[i] = v;
    }
    out
}
