//! Theoretical quantities of the oracle inequality: conjugates, restricted
//! eigenvalues, the oracle, concentration levels and the empirical process.

pub mod are;
pub mod concentration;
pub mod conjugate;
pub mod oracle;
pub mod process;
pub mod theorem;

pub use are::{adaptive_restricted_eigenvalue, compute_l_n, AreOptions, AreResult};
pub use concentration::{lambda0_concentration, quadratic_lipschitz_context, truncation_level, Concentration};
pub use conjugate::{conjugate_value, ConjugateEval, ConjugateSpec};
pub use oracle::{oracle_search, GammaSpec, OracleOptions, OracleReport};
pub use process::{empirical_process_value, estimate_z_m, estimate_z_m_path, EmpiricalProcess, ZmOptions};
pub use theorem::{check_linear_bounds, check_theorem1, LinearBounds, Theorem1Check};
