//! Convex conjugate `H(v) = sup_{u >= 0} (u v - G(u))` of a margin function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{MarginForm, MarginSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ConjugateEval {
    /// `v^2 / (4c)`; quadratic margins only.
    ClosedForm,
    /// Grid supremum over `u in [0, u_max]`, refined by golden-section search.
    Numeric { u_max: f64, step: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateSpec {
    pub margin: MarginSpec,
    pub evaluation: ConjugateEval,
}

impl ConjugateSpec {
    pub fn closed_form(margin: MarginSpec) -> Self {
        Self {
            margin,
            evaluation: ConjugateEval::ClosedForm,
        }
    }

    pub fn numeric(margin: MarginSpec, u_max: f64, step: f64) -> Self {
        Self {
            margin,
            evaluation: ConjugateEval::Numeric { u_max, step },
        }
    }

    pub fn value(&self, v: f64) -> Result<f64> {
        conjugate_value(self, v)
    }
}

pub fn conjugate_value(spec: &ConjugateSpec, v: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("conjugate needs finite v >= 0, got {v}")));
    }
    match spec.evaluation {
        ConjugateEval::ClosedForm => match spec.margin.form {
            MarginForm::Quadratic { c } => Ok(v * v / (4.0 * c)),
            MarginForm::Tabulated { .. } => Err(Error::InvalidInput(
                "closed-form conjugate needs a quadratic margin".into(),
            )),
        },
        ConjugateEval::Numeric { u_max, step } => {
            if !(u_max > 0.0) || !(step > 0.0) {
                return Err(Error::InvalidInput("numeric conjugate needs u_max, step > 0".into()));
            }
            let g = |u: f64| v * u - spec.margin.g(u);
            if let MarginForm::Tabulated { step: h, values } = &spec.margin.form {
                // piecewise linear G: the supremum sits at a node (or the range end)
                let mut best = g(0.0).max(g(u_max));
                for k in 0..values.len() {
                    let u = k as f64 * h;
                    if u > u_max {
                        break;
                    }
                    best = best.max(g(u));
                }
                return Ok(best.max(0.0));
            }
            let m = (u_max / step).ceil() as usize;
            let (mut k_best, mut best) = (0usize, g(0.0));
            for k in 1..=m {
                let val = g((k as f64 * step).min(u_max));
                if val > best {
                    best = val;
                    k_best = k;
                }
            }
            // G is convex, so u v - G(u) is concave; refine within the neighbouring cells
            let mut a = (k_best as f64 - 1.0).max(0.0) * step;
            let mut b = ((k_best as f64 + 1.0) * step).min(u_max);
            let ratio = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - ratio * (b - a);
            let mut x2 = a + ratio * (b - a);
            let (mut f1, mut f2) = (g(x1), g(x2));
            for _ in 0..200 {
                if b - a <= 1e-14 * (1.0 + b) {
                    break;
                }
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + ratio * (b - a);
                    f2 = g(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - ratio * (b - a);
                    f1 = g(x1);
                }
            }
            Ok(best.max(f1).max(f2).max(0.0))
        }
    }
}
