use soar_data::Dataset;

use crate::OccludeError;

/// Fraction of masked cells.
pub fn snr_of(mask: &[bool]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

/// Histogram of per-sample SNR values over `bin_edges`: bin i covers
/// [edges[i], edges[i+1]), the last bin includes its upper edge, and values
/// outside the range clamp into the end bins so counts always sum to the
/// dataset size.
pub fn snr_histogram(dataset: &Dataset, bin_edges: &[f64]) -> Result<Vec<usize>, OccludeError> {
    if bin_edges.len() < 2 {
        return Err(OccludeError::Config("need at least 2 bin edges".into()));
    }
    if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OccludeError::Config(
            "bin edges must be strictly increasing".into(),
        ));
    }
    let bins = bin_edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for s in &dataset.samples {
        let snr = snr_of(&s.mask);
        let mut b = bins - 1;
        for i in 0..bins {
            if snr < bin_edges[i + 1] {
                b = i;
                break;
            }
        }
        counts[b] += 1;
    }
    Ok(counts)
}
