//! Published optimal rows at full loss (`η = 0`, `β = 0.8`), embedded so
//! that the reproduction runs offline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{optimize_alpha_theta, KeyRateReport};
use crate::states::squeezing_to_db;

pub const TABLE1_FIXTURE: &str = include_str!("../fixtures/table1_v1.csv");
pub const TABLE1_VERSION: u32 = 1;
pub const TABLE1_ETA: f64 = 0.0;
pub const TABLE1_BETA: f64 = 0.8;
/// Range searched for the optimal amplitude.
pub const TABLE1_ALPHA_RANGE: (f64, f64) = (0.05, 5.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub r: f64,
    pub squeezing_db: f64,
    pub alpha: f64,
    pub cos2_theta: f64,
    pub g_u: f64,
    pub g_v: f64,
    pub k: f64,
    pub tol_alpha: f64,
    pub tol_cos2_theta: f64,
    pub tol_k: f64,
}

pub fn table1_reference() -> Vec<ReferenceRow> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(TABLE1_FIXTURE.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .expect("embedded fixture parses")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproducedRow {
    pub reference: ReferenceRow,
    pub squeezing_db: f64,
    pub alpha: f64,
    pub theta: f64,
    pub cos2_theta: f64,
    pub g_u: f64,
    pub g_v: f64,
    pub k: f64,
    pub report: KeyRateReport,
}

impl ReproducedRow {
    pub fn alpha_ok(&self) -> bool {
        (self.alpha - self.reference.alpha).abs() <= self.reference.tol_alpha
    }

    pub fn cos2_theta_ok(&self) -> bool {
        (self.cos2_theta - self.reference.cos2_theta).abs() <= self.reference.tol_cos2_theta
    }

    pub fn k_ok(&self) -> bool {
        (self.k - self.reference.k).abs() <= self.reference.tol_k
    }

    pub fn passed(&self) -> bool {
        self.alpha_ok() && self.cos2_theta_ok() && self.k_ok()
    }
}

/// Re-optimizes `(α, θ)` at the row's squeezing.
pub fn reproduce_row(reference: &ReferenceRow, alpha_range: (f64, f64)) -> Result<ReproducedRow> {
    let (alpha, theta, report) = optimize_alpha_theta(reference.r, TABLE1_ETA, TABLE1_BETA, alpha_range)?;
    if !report.k.is_finite() {
        return Err(Error::OptimizerFailure(format!("non-finite key rate at r = {}", reference.r)));
    }
    Ok(ReproducedRow {
        reference: *reference,
        squeezing_db: (squeezing_to_db(reference.r) * 100.0).round() / 100.0,
        alpha,
        theta,
        cos2_theta: theta.cos().powi(2),
        g_u: report.params.g_u,
        g_v: report.params.g_v,
        k: report.k,
        report,
    })
}
