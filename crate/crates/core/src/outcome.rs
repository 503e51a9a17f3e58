//! Solver results and witness verification shared by all methods.

use crate::error::{Error, Result};
use crate::herm::{HermJson, HermMat};
use crate::partition::PartitionOp;
use crate::Hierarchy;
use serde::{Deserialize, Serialize};

/// How a single solve at a fixed level ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// A witness with positive margin was found.
    Witness,
    /// The duality gap fell below tolerance without detection.
    Proximity,
    /// The iteration cap was reached without detection.
    IterationCap,
}

/// Dual certificate: `W` on `H_ab`, plus `Z` on `H_a (x) H` for PST.
#[derive(Clone, Debug)]
pub struct Witness {
    pub w: HermMat,
    pub z: Option<HermMat>,
    /// False when `-I . W` was too small to rescale to one.
    pub normalized: bool,
}

impl Witness {
    /// Scales `(W, Z)` so that `-I . W = 1` when possible.
    pub fn normalize(w: HermMat, z: Option<HermMat>) -> Self {
        let s = -w.trace();
        if s <= 1e-14 {
            return Witness { w, z, normalized: false };
        }
        Witness { w: w.scale(1.0 / s), z: z.map(|z| z.scale(1.0 / s)), normalized: true }
    }
}

/// Result of one solve at a fixed level.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub witness: Option<Witness>,
    /// `rho . W` for a detected witness.
    pub margin: Option<f64>,
    /// Distance from `rho` to the hierarchy member found, when undetected.
    pub proximity: Option<f64>,
    /// IPM only: the primal reached `mu <= 0`, so `rho` itself is a member.
    pub membership: bool,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub final_gap: f64,
    /// `(t, gap)` pairs recorded at every iteration.
    pub gap_history: Vec<(usize, f64)>,
    /// IPM only: largest relative primal/dual feasibility residual seen.
    pub max_residual: Option<f64>,
}

/// Witness validity numbers, recomputed from scratch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub margin: f64,
    /// `|-I . W - 1|`.
    pub trace_residual: f64,
    /// `lambda_max(A^* W)` (EXT) or `lambda_max(A^* W + T Z)` (PST).
    pub cone_residual: f64,
    /// `lambda_min(Z)` for PST, zero otherwise.
    pub z_min: f64,
}

impl WitnessCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.margin > 0.0 && self.trace_residual <= tol && self.cone_residual <= tol && self.z_min >= -tol
    }
}

/// Rechecks a witness against `rho` with a fresh evaluation of `A^*`.
pub fn check_witness(op: &PartitionOp, rho: &HermMat, w: &HermMat, z: Option<&HermMat>, h: Hierarchy) -> Result<WitnessCheck> {
    let mut g = op.apply_a_adjoint(w)?;
    let mut z_min = 0.0;
    if h == Hierarchy::Pst {
        let z = z.ok_or_else(|| Error::InvalidParam("PST witness requires Z".into()))?;
        if z.n() != op.n_h() {
            return Err(Error::DimMismatch { expected: op.n_h(), got: z.n() });
        }
        g.axpy(1.0, &op.t(z));
        z_min = z.lambda_min()?;
    }
    if rho.n() != w.n() {
        return Err(Error::DimMismatch { expected: w.n(), got: rho.n() });
    }
    Ok(WitnessCheck {
        margin: rho.dot(w),
        trace_residual: (-w.trace() - 1.0).abs(),
        cone_residual: g.lambda_max()?,
        z_min,
    })
}

/// Serialized witness with its metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessFile {
    pub schema: String,
    pub hierarchy: Hierarchy,
    pub k: usize,
    pub d_a: usize,
    pub d_b: usize,
    /// The witness refers to the preconditioned state.
    #[serde(default)]
    pub preconditioned: bool,
    pub margin: f64,
    pub residuals: WitnessCheck,
    pub w: HermJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<HermJson>,
}
