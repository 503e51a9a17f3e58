//! Entanglement detection for bipartite density matrices via the EXT_k and
//! PST_k semidefinite hierarchies.
//!
//! A state is either certified entangled by a witness `W` with positive
//! margin `rho . W`, or shown to lie close to a member of the hierarchy level.
//! The hierarchies are described through a compact operator on
//! `H_a (x) Sym^k(H_b)`, so solver sizes grow polynomially in the level `k`.

pub mod error;
pub mod fom;
pub mod herm;
pub mod ipm;
pub mod outcome;
pub mod partition;
pub mod report;
pub mod states;
pub mod sym_index;

pub use error::{Error, Result};
pub use herm::HermMat;
pub use partition::PartitionOp;

/// Which hierarchy a problem is posed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hierarchy {
    /// k-symmetric extensions.
    Ext,
    /// k-symmetric extensions whose compact variable is also positive under
    /// the global partial transpose.
    Pst,
}

impl std::fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hierarchy::Ext => "ext",
            Hierarchy::Pst => "pst",
        })
    }
}
