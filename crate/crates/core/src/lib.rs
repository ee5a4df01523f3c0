//! Exact diagonalization and strong-disorder renormalization of the
//! inhomogeneous SU(k+1) antiferromagnet on nested k-simplices.
//!
//! - [`lattice`]: site and bond structure, geometric embedding.
//! - [`hilbert`]: color-configuration bases and sparse operators.
//! - [`eigen`]: dense and Lanczos eigensolvers.
//! - [`simplex_spectrum`]: Young-diagram spectrum of a single simplex.
//! - [`sdrg`]: second-order Schrieffer-Wolff reduction and the layer-by-layer flow.
//! - [`entanglement`]: layer-singlet states, Schmidt decompositions, entropies.

pub mod eigen;
pub mod entanglement;
pub mod error;
pub mod hilbert;
pub mod lattice;
#[cfg(test)]
mod proptests;
pub mod sdrg;
pub mod simplex_spectrum;

pub use eigen::{GroundState, Level, Provenance, Solver, SolverOptions, SpectrumResult};
pub use entanglement::{
    analytic_ground_state, exact_ground_state, fidelity, radial_entropy, schmidt,
    singlet_identities, Cut, CutKind, SchmidtResult, StateVector,
};
pub use error::{Error, Result};
pub use hilbert::{
    bond_operator, color_permutation_operator, delta_h, hamiltonian, permutation_hamiltonian,
    Basis, BasisTag, SectorBasis, SparseOperator,
};
pub use lattice::{build_lattice, embed_lattice, Bond, Embedding, SimplexLattice, Site};
pub use sdrg::{effective_flow, rg_step, schrieffer_wolff_2nd, EffectiveHamiltonian, RGStepReport};
pub use simplex_spectrum::{
    offdiag_spectrum, perm_degeneracy, perm_eigenvalue, perm_spectrum, verify_against_ed,
    AnalyticSpectrum, YoungDiagram,
};

/// `n!` as an exact integer. Panics on overflow (n > 20).
pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// `(sum n_i)! / prod n_i!`.
pub fn multinomial(counts: &[usize]) -> u128 {
    let mut acc: u128 = 1;
    let mut total = 0usize;
    for &n in counts {
        for i in 1..=n {
            total += 1;
            acc = acc * total as u128 / i as u128;
        }
    }
    acc
}
