use statrs::distribution::{ContinuousCDF, StudentsT};

/// Batch-means estimate of a steady-state mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    /// Half width of the 95% confidence interval.
    pub half_width: f64,
    pub batches: usize,
}

impl BatchMeans {
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}

/// Splits `samples` into `batches` equal consecutive batches (dropping the
/// remainder at the end) and builds a Student-t interval from the batch
/// means. Returns `None` with fewer than two batches or fewer samples than
/// batches.
pub fn batch_means(samples: &[f64], batches: usize) -> Option<BatchMeans> {
    if batches < 2 || samples.len() < batches {
        return None;
    }
    let size = samples.len() / batches;
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let t = StudentsT::new(0.0, 1.0, k - 1.0).ok()?.inverse_cdf(0.975);
    Some(BatchMeans { mean, half_width: t * (var / k).sqrt(), batches })
}
