//! Stationary distributions of semimartingale reflecting Brownian motion
//! (SRBM): reduced models, product-form tests, decomposability conditions
//! and a reflected Euler–Maruyama simulator to check them.
//!
//! A `d`-dimensional SRBM is given by a covariance `Σ`, a drift `μ` and a
//! reflection matrix `R` ([`SrbmData`]). Indices are 0-based in the API
//! and 1-based in every serialized form.
//!
//! ```
//! use srbm::{build_tandem, check_decomposability, Partition, TandemSpec};
//!
//! let spec = TandemSpec::new(vec![1.0, 1.5, 2.0, 2.5], vec![1.0, 1.0, 2.0, 3.0]).unwrap();
//! let data = build_tandem(&spec).unwrap();
//! let report = check_decomposability(&data, &Partition::new(3, &[0]).unwrap()).unwrap();
//! assert!(report.decomposable);
//! ```

pub mod bar;
pub mod decomposition;
pub mod error;
pub mod lcp;
pub mod linalg;
pub mod lp;
pub mod matclass;
pub mod model;
pub mod productform;
pub mod reduction;
pub mod simulator;

pub use bar::{bar_residual, palm_factorization_residual, product_form_model, MgfModel, ProductFormMgf};
pub use decomposition::{
    check_decomposability, check_feedforward, find_decompositions, tandem_decomposability,
    DecompReport, StationarityCertainty,
};
pub use error::{Result, SrbmError};
pub use linalg::{Matrix, Vector};
pub use matclass::{is_completely_s, is_m_matrix, is_p_matrix, is_s_matrix, CompletelySReport, SWitness};
pub use model::{build_tandem, validate_srbm, Partition, SrbmData, TandemSpec, ValidationReport};
pub use productform::{
    alpha, gamma, lambda_marginal, product_form_report, skew_symmetry_check, theta_ray,
    ProductFormReport, SkewCheck,
};
pub use reduction::{reduce, reduce_feedforward, workload_matrix, ReducedData};
pub use simulator::{simulate, EmpiricalMgf, SimConfig, SimResult};

use sha2::{Digest, Sha256};

/// SHA-256 of the canonical JSON form of a model, as lowercase hex.
pub fn model_hash(data: &SrbmData) -> String {
    let json = serde_json::to_vec(data).expect("model serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// The guide under `book/`, compiled so its snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/matrix-classes.md")]
    mod matrix_classes {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/product-form.md")]
    mod product_form {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    mod decomposition {}
    #[doc = include_str!("../../../book/src/bar.md")]
    mod bar {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
