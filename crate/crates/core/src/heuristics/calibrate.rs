use super::features::FeatureVector;
use super::filter::{NoiseFeature, PercentileCutoffs};
use super::HeuristicsError;

/// Minimum sample size accepted by [`calibrate_percentiles`].
pub const MIN_CALIBRATION_SAMPLE: usize = 100;
pub const DEFAULT_PERCENTILE: f64 = 0.90;

/// 1-based nearest rank `ceil(p·n)`, clamped to `[1, n]`.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Nearest-rank quantile of `values`; sorts in place.
pub fn quantile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    values[nearest_rank(p, values.len()) - 1]
}

/// Upper cutoff per noise feature at quantile `p`.
pub fn calibrate_percentiles<'a, I>(sample: I, p: f64) -> Result<PercentileCutoffs, HeuristicsError>
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    if !(0.0..=1.0).contains(&p) {
        return Err(HeuristicsError::Config(format!("percentile {p} outside [0,1]")));
    }
    let sample: Vec<&FeatureVector> = sample.into_iter().collect();
    if sample.len() < MIN_CALIBRATION_SAMPLE {
        return Err(HeuristicsError::SampleTooSmall {
            got: sample.len(),
            required: MIN_CALIBRATION_SAMPLE,
        });
    }
    Ok(NoiseFeature::all()
        .into_iter()
        .map(|f| {
            let mut v: Vec<f64> = sample.iter().map(|fv| f.value(fv)).collect();
            (f.name(), quantile(&mut v, p))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_feature() {
        let fv = FeatureVector {
            frac_lines_bullet: 0.3,
            ..Default::default()
        };
        let s = vec![fv; 100];
        let c = calibrate_percentiles(&s, 0.9).unwrap();
        assert_eq!(c["frac_lines_bullet"], 0.3);
        assert_eq!(c.len(), 15);
    }

    #[test]
    fn hundred_steps() {
        let s: Vec<FeatureVector> = (1..=100)
            .map(|i| FeatureVector {
                frac_duplicate_lines: i as f64 / 100.0,
                ..Default::default()
            })
            .collect();
        let c = calibrate_percentiles(&s, 0.9).unwrap();
        assert_eq!(c["frac_duplicate_lines"], 0.90);
    }

    #[test]
    fn too_small() {
        let s = vec![FeatureVector::default(); 99];
        assert!(matches!(
            calibrate_percentiles(&s, 0.9),
            Err(HeuristicsError::SampleTooSmall { got: 99, required: 100 })
        ));
    }

    #[test]
    fn ranks() {
        assert_eq!(nearest_rank(0.9, 100), 90);
        assert_eq!(nearest_rank(0.9, 101), 91);
        assert_eq!(nearest_rank(0.0, 10), 1);
        assert_eq!(nearest_rank(1.0, 10), 10);
    }
}
