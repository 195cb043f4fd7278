//! Reduction of a field-grid profile to at most a fixed number of samples.

/// Decimated profile: positions and `Z` are block means, the intensity is
/// the block maximum so narrow peaks survive.
#[derive(Debug, Clone, PartialEq)]
pub struct Decimated {
    pub factor: usize,
    pub x: Vec<f64>,
    pub intensity: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn decimation_factor(n: usize, max_samples: usize) -> usize {
    n.div_ceil(max_samples.max(1)).max(1)
}

pub fn decimate(x: &[f64], intensity: &[f64], z: &[f64], max_samples: usize) -> Decimated {
    let factor = decimation_factor(x.len(), max_samples);
    let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
    Decimated {
        factor,
        x: x.chunks(factor).map(mean).collect(),
        intensity: intensity.chunks(factor).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect(),
        z: z.chunks(factor).map(mean).collect(),
    }
}
