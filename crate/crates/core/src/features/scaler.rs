use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring fitted on training vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(CoreError::invalid(
                "scaler",
                format!("{} training vectors, need at least 2", vectors.len()),
            ));
        }
        let dim = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(CoreError::invalid(
                "scaler",
                format!("vector of length {} among length {dim}", v.len()),
            ));
        }
        let n = vectors.len() as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n)
            .collect();
        let std = (0..dim)
            .map(|j| {
                let var = vectors
                    .iter()
                    .map(|v| (v[j] - mean[j]).powi(2))
                    .sum::<f64>()
                    / n;
                var.sqrt().max(STD_FLOOR)
            })
            .collect();
        Ok(FeatureScaler { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(CoreError::invalid(
                "scaler",
                format!("vector of length {}, fitted on {}", v.len(), self.dim()),
            ));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_feature_scales_to_zero() {
        let s = FeatureScaler::fit(&[vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(s.std[0], STD_FLOOR);
        assert_eq!(s.apply(&[3.0, 3.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn training_columns_are_centered() {
        let data: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.37, (i * i) as f64, -(i as f64)])
            .collect();
        let s = FeatureScaler::fit(&data).unwrap();
        for j in 0..3 {
            let mean: f64 = data.iter().map(|v| s.apply(v).unwrap()[j]).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-6);
        }
    }

    #[test]
    fn errors() {
        assert!(FeatureScaler::fit(&[vec![1.0]]).is_err());
        assert!(FeatureScaler::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let s = FeatureScaler::fit(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(s.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let data: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![(i as f64).sin(), 1.0 / (i as f64 + 3.0)])
            .collect();
        let s = FeatureScaler::fit(&data).unwrap();
        let back: FeatureScaler =
            serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.apply(&data[3]).unwrap(), s.apply(&data[3]).unwrap());
    }
}
