//! Concentration-based tuning level: `Lambda(K/3, n, p)` and `zeta`, with `lambda0 = zeta`.

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::datagen::DgpConfig;
use crate::error::{Error, Result};
use crate::loss::LipschitzContext;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub lambda: f64,
    pub zeta: f64,
    pub t: f64,
}

/// `Lambda = sqrt(2 log(2p)/n) + K log(2p)/(3n)` and
/// `zeta = D [4 Lambda + t K/(3n) + sqrt(2t/n) sqrt(1 + 8 Lambda)]`.
///
/// `t = None` uses `t = log p`, for which `P(tau) >= 1 - 1/p`.
pub fn lambda0_concentration(d: f64, k: f64, n: usize, p: usize, t: Option<f64>) -> Result<Concentration> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if p < 2 {
        return Err(Error::InvalidInput(format!("concentration bound needs p >= 2, got {p}")));
    }
    let nf = n as f64;
    let pf = p as f64;
    if pf.ln() > nf {
        return Err(Error::InvalidInput(format!(
            "concentration bound needs log p <= n, got log {p} > {n}"
        )));
    }
    if !(d >= 0.0) || !(k > 0.0) {
        return Err(Error::InvalidInput(format!("need D >= 0 and K > 0, got D={d}, K={k}")));
    }
    let t = t.unwrap_or_else(|| pf.ln());
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("need t > 0, got {t}")));
    }
    let l2p = (2.0 * pf).ln();
    let lambda = (2.0 * l2p / nf).sqrt() + k * l2p / (3.0 * nf);
    let zeta = d * (4.0 * lambda + t * k / (3.0 * nf) + (2.0 * t / nf).sqrt() * (1.0 + 8.0 * lambda).sqrt());
    Ok(Concentration { lambda, zeta, t })
}

/// `C_n = sqrt((2/delta) log n)`.
pub fn truncation_level(delta: f64, n: usize) -> Result<f64> {
    if !(delta > 0.0) || n < 2 {
        return Err(Error::InvalidInput(format!(
            "truncation level needs delta > 0 and n >= 2, got delta={delta}, n={n}"
        )));
    }
    Ok((2.0 / delta * (n as f64).ln()).sqrt())
}

/// Local Lipschitz data for the quadratic loss: `C_n` from the sub-gaussian
/// constant of the process, `F_{C_n} = sup |f0|` over the bounded support.
pub fn quadratic_lipschitz_context(
    config: &DgpConfig,
    basis: &BasisSpec,
    ell1_radius: f64,
    n: usize,
) -> Result<LipschitzContext> {
    let sg = config.subgaussian();
    Ok(LipschitzContext {
        c_n: truncation_level(sg.delta, n)?,
        f_cn: config.target_sup_norm()?,
        g_radius: ell1_radius,
        k: basis.k_bound,
    })
}
