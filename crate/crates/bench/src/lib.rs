//! Fixtures shared by the benchmarks.

use matryoshka::{build_lattice, hamiltonian, Basis, Result, SparseOperator};

/// Balanced-sector Hamiltonian of a `layers`-deep lattice.
pub fn balanced_hamiltonian(k: usize, layers: usize, alpha: f64) -> Result<(Basis, SparseOperator)> {
    let lattice = build_lattice(k, layers, alpha)?;
    let basis = Basis::sector(k, lattice.num_sites(), &vec![layers; k + 1])?;
    let h = hamiltonian(&lattice, &basis)?;
    Ok((basis, h))
}

/// Deterministic, non-symmetric test vector.
pub fn probe(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((i * 7919) % 1013) as f64 / 1013.0 - 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_dimensions() {
        let (basis, h) = balanced_hamiltonian(2, 3, 0.01).unwrap();
        assert_eq!(basis.dim(), 1680);
        assert_eq!(h.dim(), 1680);
        assert_eq!(probe(10).len(), 10);
    }
}
