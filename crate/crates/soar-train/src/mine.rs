use rand::Rng;

/// (anchor, positive, negative) index triple into one batch.
pub type Triplet = (usize, usize, usize);

/// Uniform-random mining: every sample with at least one same-class peer
/// anchors one triplet, pairing a random peer with a random different-class
/// sample. Anchors lacking either side are skipped, so a single-class batch
/// yields no triplets.
pub fn mine_triplets<R: Rng>(labels: &[u32], rng: &mut R) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        let peers: Vec<usize> =
            (0..labels.len()).filter(|&j| j != i && labels[j] == label).collect();
        let others: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] != label).collect();
        if peers.is_empty() || others.is_empty() {
            continue;
        }
        let p = peers[rng.gen_range(0..peers.len())];
        let n = others[rng.gen_range(0..others.len())];
        out.push((i, p, n));
    }
    out
}

/// Hard mining: per eligible anchor, the farthest same-class peer and the
/// closest different-class sample under the offset squared distance used by
/// the triplet loss. Ties resolve to the lowest index.
pub fn mine_triplets_hard(embeddings: &[Vec<f64>], labels: &[u32], eps: f64) -> Vec<Triplet> {
    assert_eq!(embeddings.len(), labels.len());
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y + eps) * (x - y + eps)).sum()
    };
    let mut out = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        let mut hardest_p: Option<(usize, f64)> = None;
        let mut hardest_n: Option<(usize, f64)> = None;
        for j in 0..labels.len() {
            if j == i {
                continue;
            }
            let d = dist(&embeddings[i], &embeddings[j]);
            if labels[j] == label {
                if hardest_p.map_or(true, |(_, best)| d > best) {
                    hardest_p = Some((j, d));
                }
            } else if hardest_n.map_or(true, |(_, best)| d < best) {
                hardest_n = Some((j, d));
            }
        }
        if let (Some((p, _)), Some((n, _))) = (hardest_p, hardest_n) {
            out.push((i, p, n));
        }
    }
    out
}
