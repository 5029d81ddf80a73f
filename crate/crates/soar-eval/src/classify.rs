use serde::{Deserialize, Serialize};

/// Support-matching distance. Cosine is the default, matching the angular
/// geometry the consistency loss trains for; Euclidean is the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMetric {
    Cosine,
    Euclidean,
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    dot / (na.sqrt() * nb.sqrt() + 1e-12)
}

fn sq_euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

/// Nearest-support classification: the class of the best-scoring support,
/// exact ties resolving to the lowest class id.
pub fn classify_one_shot(
    test: &[f32],
    supports: &[(Vec<f32>, u32)],
    metric: MatchMetric,
) -> u32 {
    assert!(!supports.is_empty(), "no support set");
    let mut best: Option<(f64, u32)> = None;
    for (emb, class) in supports {
        assert_eq!(emb.len(), test.len(), "embedding width mismatch");
        let score = match metric {
            MatchMetric::Cosine => cosine(test, emb),
            MatchMetric::Euclidean => -sq_euclidean(test, emb),
        };
        let better = match best {
            None => true,
            Some((s, c)) => score > s || (score == s && *class < c),
        };
        if better {
            best = Some((score, *class));
        }
    }
    best.unwrap().1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn supports3() -> Vec<(Vec<f32>, u32)> {
        vec![
            (vec![1.0, 0.0, 0.0], 10),
            (vec![0.0, 1.0, 0.0], 20),
            (vec![0.0, 0.0, 1.0], 30),
        ]
    }

    #[test]
    fn exact_match_wins() {
        let s = supports3();
        assert_eq!(classify_one_shot(&[0.0, 1.0, 0.0], &s, MatchMetric::Cosine), 20);
        assert_eq!(classify_one_shot(&[0.0, 1.0, 0.0], &s, MatchMetric::Euclidean), 20);
    }

    #[test]
    fn small_perturbations_keep_the_class() {
        let s = supports3();
        assert_eq!(classify_one_shot(&[0.02, -0.01, 0.99], &s, MatchMetric::Cosine), 30);
    }

    #[test]
    fn agrees_with_brute_force_argmax() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..300 {
            let supports: Vec<(Vec<f32>, u32)> = (0..5)
                .map(|c| ((0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect(), c as u32))
                .collect();
            let test: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let got = classify_one_shot(&test, &supports, MatchMetric::Cosine);
            let brute = supports
                .iter()
                .map(|(e, c)| (cosine(&test, e), *c))
                .fold(None::<(f64, u32)>, |acc, (s, c)| match acc {
                    None => Some((s, c)),
                    Some((bs, bc)) => {
                        if s > bs || (s == bs && c < bc) {
                            Some((s, c))
                        } else {
                            Some((bs, bc))
                        }
                    }
                })
                .unwrap()
                .1;
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn cosine_ignores_positive_rescaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let supports: Vec<(Vec<f32>, u32)> = (0..4)
                .map(|c| ((0..6).map(|_| rng.gen_range(-1.0f32..1.0)).collect(), c as u32))
                .collect();
            let test: Vec<f32> = (0..6).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let base = classify_one_shot(&test, &supports, MatchMetric::Cosine);
            let scaled_test: Vec<f32> = test.iter().map(|v| v * 7.5).collect();
            let scaled_supports: Vec<(Vec<f32>, u32)> = supports
                .iter()
                .map(|(e, c)| (e.iter().map(|v| v * 0.03).collect(), *c))
                .collect();
            assert_eq!(classify_one_shot(&scaled_test, &scaled_supports, MatchMetric::Cosine), base);
        }
    }

    #[test]
    fn exact_ties_resolve_to_the_lowest_class() {
        // Two supports with identical embeddings, distinct classes.
        let s = vec![(vec![1.0, 1.0], 9u32), (vec![1.0, 1.0], 2u32)];
        assert_eq!(classify_one_shot(&[1.0, 1.0], &s, MatchMetric::Cosine), 2);
        assert_eq!(classify_one_shot(&[1.0, 1.0], &s, MatchMetric::Euclidean), 2);
    }

    #[test]
    fn euclidean_and_cosine_can_disagree() {
        // A long vector pointing the same way vs a short orthogonal one:
        // direction prefers class 1, raw distance prefers class 2.
        let s = vec![(vec![10.0, 0.0], 1u32), (vec![0.0, 0.5], 2u32)];
        let test = [1.0f32, 0.6];
        assert_eq!(classify_one_shot(&test, &s, MatchMetric::Cosine), 1);
        assert_eq!(classify_one_shot(&test, &s, MatchMetric::Euclidean), 2);
    }
}
