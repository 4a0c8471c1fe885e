use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Per-column z-score parameters, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1 for constant columns.
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::data("cannot fit a scaler on zero rows"));
        }
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.mean.len() {
            return Err(Error::data(format!(
                "scaler fit on {} columns applied to {}",
                self.mean.len(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        self.check_width(z)?;
        let mut out = z.clone();
        for i in 0..out.rows() {
            for ((v, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_column() {
        let x = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let p = ScalerParams::fit(&x).unwrap();
        assert_eq!((p.mean[0], p.std[0]), (1.0, 1.0));
        assert_eq!(p.apply(&x).unwrap().as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn constant_column() {
        let x = Matrix::from_rows(&[[5.0], [5.0], [5.0]]).unwrap();
        let p = ScalerParams::fit(&x).unwrap();
        assert_eq!(p.std[0], 1.0);
        assert_eq!(p.apply(&x).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_and_width_errors() {
        assert!(ScalerParams::fit(&Matrix::zeros(0, 3)).is_err());
        let p = ScalerParams::fit(&Matrix::zeros(2, 3)).unwrap();
        assert!(p.apply(&Matrix::zeros(2, 2)).is_err());
    }

    proptest! {
        #[test]
        fn invert_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..20)) {
            let x = Matrix::from_rows(&rows).unwrap();
            let p = ScalerParams::fit(&x).unwrap();
            let back = p.invert(&p.apply(&x).unwrap()).unwrap();
            for (a, b) in x.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
