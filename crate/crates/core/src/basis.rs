//! Feature maps and design matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Coordinate projections of a `p`-vector covariate.
    Identity,
    /// Monomials `x, x^2, ..., x^p` of a scalar covariate (no constant term).
    Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub p: usize,
    /// Declared bound `K` on `max_j sup |psi_j|`.
    #[serde(default = "unit")]
    pub k_bound: f64,
    /// Prepends an unpenalized constant column.
    #[serde(default)]
    pub intercept: bool,
}

fn unit() -> f64 {
    1.0
}

impl BasisSpec {
    /// Monomial basis on `[-1, 1]`, for which `K = 1`.
    pub fn polynomial(p: usize) -> Self {
        Self {
            kind: BasisKind::Polynomial,
            p,
            k_bound: 1.0,
            intercept: false,
        }
    }

    pub fn identity(p: usize, k_bound: f64) -> Self {
        Self {
            kind: BasisKind::Identity,
            p,
            k_bound,
            intercept: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfig("basis needs p >= 1".into()));
        }
        if !(self.k_bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "basis bound K must be positive, got {}",
                self.k_bound
            )));
        }
        Ok(())
    }

    /// Number of columns in the design (features plus optional intercept).
    pub fn columns(&self) -> usize {
        self.p + usize::from(self.intercept)
    }

    /// `psi(x)` without the intercept column.
    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            BasisKind::Polynomial => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "polynomial basis covariate".into(),
                        expected: 1,
                        found: x.len(),
                    });
                }
                let mut out = Vec::with_capacity(self.p);
                let mut pow = 1.0;
                for _ in 0..self.p {
                    pow *= x[0];
                    out.push(pow);
                }
                Ok(out)
            }
            BasisKind::Identity => {
                if x.len() != self.p {
                    return Err(Error::DimensionMismatch {
                        context: "identity basis covariate".into(),
                        expected: self.p,
                        found: x.len(),
                    });
                }
                Ok(x.to_vec())
            }
        }
    }

    /// Full design row, intercept first when enabled.
    pub fn design_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let psi = self.expand(x)?;
        if self.intercept {
            let mut row = Vec::with_capacity(psi.len() + 1);
            row.push(1.0);
            row.extend(psi);
            Ok(row)
        } else {
            Ok(psi)
        }
    }

    /// `f_beta(x) = <psi(x), beta>`.
    pub fn evaluate(&self, beta: &DVector<f64>, x: &[f64]) -> Result<f64> {
        let row = self.design_row(x)?;
        if row.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                context: "coefficient vector".into(),
                expected: row.len(),
                found: beta.len(),
            });
        }
        Ok(row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
    }

    pub fn design_matrix(&self, sample: &Sample) -> Result<DesignMatrix> {
        self.validate()?;
        let n = sample.n();
        let cols = self.columns();
        let mut values = DMatrix::zeros(n, cols);
        for i in 0..n {
            let row = self.design_row(sample.covariate(i)).map_err(|e| match e {
                Error::DimensionMismatch {
                    expected, found, ..
                } => Error::DimensionMismatch {
                    context: format!("covariate of row {i}"),
                    expected,
                    found,
                },
                other => other,
            })?;
            for (j, v) in row.into_iter().enumerate() {
                values[(i, j)] = v;
            }
        }
        Ok(DesignMatrix {
            values,
            k_bound: Some(self.k_bound),
            intercept: self.intercept,
        })
    }
}

/// `n x p` evaluation `Psi_ij = psi_j(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub k_bound: Option<f64>,
    pub intercept: bool,
}

impl DesignMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        Ok(Self {
            values,
            k_bound: None,
            intercept: false,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_penalized(&self, j: usize) -> bool {
        !(self.intercept && j == 0)
    }

    /// Column indices of the basis features (excluding the intercept).
    pub fn feature_columns(&self) -> std::ops::Range<usize> {
        usize::from(self.intercept)..self.p()
    }
}

/// Empirical check of the basis boundedness conditions.
///
/// `second_moment` is the sample analogue of `(1/n) sum_i max_j E psi_j(X_i)^2`;
/// the population condition itself is not observable from data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub sup_ok: bool,
    pub second_moment_ok: bool,
    pub observed_max: f64,
    pub second_moment: f64,
}

pub fn verify_bound_conditions(design: &DesignMatrix, k_bound: f64) -> BoundReport {
    let n = design.n();
    let mut observed_max = 0.0_f64;
    let mut second = 0.0;
    for i in 0..n {
        let mut row_max = 0.0_f64;
        for j in design.feature_columns() {
            let v = design.values[(i, j)];
            observed_max = observed_max.max(v.abs());
            row_max = row_max.max(v * v);
        }
        second += row_max;
    }
    let second_moment = if n > 0 { second / n as f64 } else { 0.0 };
    BoundReport {
        sup_ok: observed_max <= k_bound,
        second_moment_ok: second_moment <= 1.0,
        observed_max,
        second_moment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, DgpConfig, TargetId};

    #[test]
    fn polynomial_expansion_values() {
        let b = BasisSpec::polynomial(3);
        assert_eq!(b.expand(&[1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(b.expand(&[0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let b4 = BasisSpec::polynomial(4);
        assert_eq!(
            b4.expand(&[-0.5]).unwrap(),
            vec![-0.5, 0.25, -0.125, 0.0625]
        );
        assert!(b.expand(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn identity_expansion_checks_dimension() {
        let b = BasisSpec::identity(2, 1.0);
        assert_eq!(b.expand(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
        assert!(b.expand(&[0.3]).is_err());
    }

    #[test]
    fn design_rows_follow_expand() {
        let s = Sample::scalar(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let d = BasisSpec::polynomial(2).design_matrix(&s).unwrap();
        assert_eq!(d.values, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]));

        let v = Sample::new(vec![0.1, 0.2, 0.3, 0.4], 2, vec![1.0, 2.0]).unwrap();
        let d = BasisSpec::identity(2, 1.0).design_matrix(&v).unwrap();
        assert_eq!(d.values, DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]));

        let bad = BasisSpec::identity(3, 1.0).design_matrix(&v);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bound_conditions() {
        let cfg = DgpConfig::smooth(TargetId::PolySin, None, 500, 1.0, 4);
        let s = generate(&cfg).unwrap();
        let d = BasisSpec::polynomial(20).design_matrix(&s).unwrap();
        let r = verify_bound_conditions(&d, 1.0);
        assert!(r.sup_ok && r.second_moment_ok);
        assert!(r.observed_max <= 1.0);

        let big = DesignMatrix::from_matrix(DMatrix::from_row_slice(1, 2, &[0.2, 1.5])).unwrap();
        let r = verify_bound_conditions(&big, 1.0);
        assert!(!r.sup_ok);
        assert_eq!(r.observed_max, 1.5);

        let zero = DesignMatrix::from_matrix(DMatrix::zeros(3, 2)).unwrap();
        let r = verify_bound_conditions(&zero, 1.0);
        assert!(r.sup_ok && r.second_moment_ok);
        assert_eq!(r.observed_max, 0.0);
    }

    #[test]
    fn intercept_column_is_unpenalized() {
        let mut b = BasisSpec::polynomial(2);
        b.intercept = true;
        let s = Sample::scalar(vec![0.5], vec![1.0]).unwrap();
        let d = b.design_matrix(&s).unwrap();
        assert_eq!(d.p(), 3);
        assert_eq!(d.values[(0, 0)], 1.0);
        assert!(!d.is_penalized(0) && d.is_penalized(1));
    }
}
