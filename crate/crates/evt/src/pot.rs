//! Block-maxima and peaks-over-threshold extraction.

use crate::error::EvtError;

/// Excesses over a threshold, together with the pre-threshold sample count
/// so the exceedance probability can be estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceSample {
    values: Vec<f64>,
    source_count: usize,
}

impl ExceedanceSample {
    /// All values must be strictly positive finite excesses.
    pub fn new(values: Vec<f64>, source_count: usize) -> Result<Self, EvtError> {
        if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(EvtError::InvalidExceedance);
        }
        if source_count < values.len() {
            return Err(EvtError::InvalidParameter(format!(
                "source_count {source_count} smaller than exceedance count {}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            source_count,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Empirical estimate of `P(X > d)`.
    pub fn exceedance_rate(&self) -> f64 {
        if self.source_count == 0 {
            0.0
        } else {
            self.values.len() as f64 / self.source_count as f64
        }
    }
}

/// Extract `x - d` for every `x > d`, preserving order. An empty
/// exceedance set is valid.
pub fn peaks_over_threshold(samples: &[f64], threshold: f64) -> ExceedanceSample {
    let values: Vec<f64> = samples
        .iter()
        .filter(|&&x| x > threshold)
        .map(|&x| x - threshold)
        .collect();
    ExceedanceSample {
        values,
        source_count: samples.len(),
    }
}

/// Partition `samples` into consecutive blocks of `block` and return the
/// per-block maxima; a trailing partial block is discarded.
pub fn block_maxima(samples: &[f64], block: usize) -> Result<Vec<f64>, EvtError> {
    if samples.is_empty() {
        return Err(EvtError::EmptyInput);
    }
    if block == 0 || samples.len() < block {
        return Err(EvtError::InvalidBlock {
            block,
            len: samples.len(),
        });
    }
    Ok(samples
        .chunks_exact(block)
        .map(|chunk| chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}
