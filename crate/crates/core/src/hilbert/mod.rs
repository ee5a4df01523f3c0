//! Color-configuration bases and the operators acting on them.
//!
//! The two-site term `h_{i,j}` exchanges the colors on sites `i` and `j` when
//! they differ and annihilates equal-color pairs. It is 0/1-valued with zero
//! diagonal; every Hamiltonian here is a coupling-weighted sum of such terms.

mod basis;
mod operator;

use rayon::prelude::*;

pub use basis::{all_contents, Basis, BasisTag, ConfigSpace, SectorBasis, FULL_BASIS_CAP, SECTOR_CAP};
pub use operator::{SparseOperator, DENSE_LIMIT};

use crate::error::{Error, Result};
use crate::lattice::SimplexLattice;

/// A weighted exchange term between two 1-based site ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

fn check_site(basis: &Basis, site: usize) -> Result<()> {
    if site == 0 || site > basis.n_sites() {
        return Err(Error::ParameterDomain(format!(
            "site {site} outside 1..={}",
            basis.n_sites()
        )));
    }
    Ok(())
}

/// `sum_terms coupling * h_{i,j}` on `basis`.
pub fn exchange_sum(basis: &Basis, terms: &[Exchange]) -> Result<SparseOperator> {
    for t in terms {
        check_site(basis, t.i)?;
        check_site(basis, t.j)?;
        if t.i == t.j {
            return Err(Error::ParameterDomain(format!(
                "exchange term needs distinct sites, got ({}, {})",
                t.i, t.j
            )));
        }
    }
    let space = basis.space();
    let triplets: Vec<(usize, usize, f64)> = (0..basis.dim())
        .into_par_iter()
        .flat_map_iter(|col| {
            let code = basis.code(col);
            terms.iter().filter_map(move |t| {
                let swapped = space.swap(code, t.i - 1, t.j - 1)?;
                let row = basis
                    .index_of(swapped)
                    .expect("color exchange preserves the sector");
                Some((row, col, t.coupling))
            })
        })
        .collect();
    SparseOperator::from_triplets(basis.dim(), basis.tag(), triplets)
}

pub fn bond_operator(k: usize, i: usize, j: usize, basis: &Basis) -> Result<SparseOperator> {
    check_k(k, basis)?;
    if i == j {
        return Err(Error::ParameterDomain(format!("bond needs distinct sites, got ({i}, {i})")));
    }
    exchange_sum(basis, &[Exchange { i, j, coupling: 1.0 }])
}

fn check_k(k: usize, basis: &Basis) -> Result<()> {
    if basis.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "basis carries k = {}, expected {k}",
            basis.k()
        )));
    }
    Ok(())
}

/// The lattice Hamiltonian: sum over bonds of coupling times `h_{i,j}`.
pub fn hamiltonian(lattice: &SimplexLattice, basis: &Basis) -> Result<SparseOperator> {
    check_k(lattice.k(), basis)?;
    if basis.n_sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} sites, lattice has {}",
            basis.n_sites(),
            lattice.num_sites()
        )));
    }
    let terms: Vec<Exchange> = lattice
        .bonds()
        .iter()
        .map(|b| Exchange {
            i: b.i,
            j: b.j,
            coupling: b.coupling,
        })
        .collect();
    exchange_sum(basis, &terms)
}

/// All pairs of a fully connected block of sites with a common coupling.
pub fn simplex_terms(sites: &[usize], coupling: f64) -> Vec<Exchange> {
    let mut terms = Vec::new();
    for (a, &i) in sites.iter().enumerate() {
        for &j in &sites[a + 1..] {
            terms.push(Exchange { i, j, coupling });
        }
    }
    terms
}

fn check_single_simplex(k: usize, basis: &Basis) -> Result<()> {
    check_k(k, basis)?;
    if basis.n_sites() != k + 1 {
        return Err(Error::DimensionMismatch(format!(
            "single-simplex operator needs {} sites, basis has {}",
            k + 1,
            basis.n_sites()
        )));
    }
    Ok(())
}

/// Number of equal-color site pairs in a configuration.
pub fn equal_color_pairs(space: &ConfigSpace, code: u64) -> usize {
    space.content(code).iter().map(|&n| n * n.saturating_sub(1) / 2).sum()
}

/// Sum of all transpositions on a single simplex. Equal-color pairs are
/// fixed points of a transposition, so they contribute to the diagonal.
pub fn permutation_hamiltonian(k: usize, basis: &Basis) -> Result<SparseOperator> {
    check_single_simplex(k, basis)?;
    let sites: Vec<usize> = (1..=k + 1).collect();
    let exchange = exchange_sum(basis, &simplex_terms(&sites, 1.0))?;
    exchange.add(&delta_h(k, basis)?)
}

/// Diagonal pair-counting operator: permutation minus exchange Hamiltonian.
pub fn delta_h(k: usize, basis: &Basis) -> Result<SparseOperator> {
    check_single_simplex(k, basis)?;
    let space = basis.space();
    let triplets = (0..basis.dim())
        .map(|idx| (idx, idx, equal_color_pairs(space, basis.code(idx)) as f64))
        .collect();
    SparseOperator::from_triplets(basis.dim(), basis.tag(), triplets)
}

/// Global relabeling of colors `c -> sigma[c]` on every site.
#[derive(Debug, Clone)]
pub struct ColorPermutation {
    sigma: Vec<usize>,
    source: Basis,
    target: Basis,
    image: Vec<usize>,
}

pub fn color_permutation_operator(sigma: &[usize], basis: &Basis) -> Result<ColorPermutation> {
    let q = basis.space().colors();
    let mut seen = vec![false; q];
    if sigma.len() != q || sigma.iter().any(|&c| c >= q || std::mem::replace(&mut seen[c], true)) {
        return Err(Error::ParameterDomain(format!(
            "{sigma:?} is not a permutation of 0..{q}"
        )));
    }
    let target = match basis {
        Basis::Full(space) => Basis::Full(space.clone()),
        Basis::Sector(sector) => {
            let mut content = vec![0; q];
            for (c, &n) in sector.content().iter().enumerate() {
                content[sigma[c]] = n;
            }
            if content == sector.content() {
                basis.clone()
            } else {
                Basis::sector(basis.k(), basis.n_sites(), &content)?
            }
        }
    };
    let space = basis.space();
    let image = (0..basis.dim())
        .map(|idx| {
            let colors: Vec<usize> = space
                .decode(basis.code(idx))
                .into_iter()
                .map(|c| sigma[c])
                .collect();
            target
                .index_of(space.encode(&colors))
                .expect("relabeled state lies in the target sector")
        })
        .collect();
    Ok(ColorPermutation {
        sigma: sigma.to_vec(),
        source: basis.clone(),
        target,
        image,
    })
}

impl ColorPermutation {
    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn source(&self) -> &Basis {
        &self.source
    }

    pub fn target(&self) -> &Basis {
        &self.target
    }

    /// Target index of each source basis state.
    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.target.dim()];
        for (src, &dst) in self.image.iter().enumerate() {
            y[dst] = x[src];
        }
        y
    }

    /// Permutation matrix as triplets `(target row, source col, 1)`. Square
    /// when the permutation maps the sector onto itself.
    pub fn to_operator(&self) -> Result<SparseOperator> {
        if self.source != self.target {
            return Err(Error::DimensionMismatch(
                "permutation maps between different sectors; use apply()".into(),
            ));
        }
        let triplets = self
            .image
            .iter()
            .enumerate()
            .map(|(src, &dst)| (dst, src, 1.0))
            .collect();
        SparseOperator::from_triplets(self.source.dim(), self.source.tag(), triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn eigenvalues(op: &SparseOperator) -> Vec<f64> {
        let mut ev: Vec<f64> = op.to_dense().unwrap().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn assert_spectrum(ev: &[f64], expected: &[(f64, usize)]) {
        let mut flat = Vec::new();
        for &(e, m) in expected {
            flat.extend(std::iter::repeat_n(e, m));
        }
        assert_eq!(ev.len(), flat.len());
        for (a, b) in ev.iter().zip(&flat) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn two_site_bond_spectra() {
        let h = bond_operator(1, 1, 2, &Basis::full(1, 2).unwrap()).unwrap();
        assert_spectrum(&eigenvalues(&h), &[(-1.0, 1), (0.0, 2), (1.0, 1)]);
        let h = bond_operator(2, 1, 2, &Basis::full(2, 2).unwrap()).unwrap();
        assert_spectrum(&eigenvalues(&h), &[(-1.0, 3), (0.0, 3), (1.0, 3)]);
        assert!(h.is_symmetric());
        assert!((0..h.dim()).all(|i| h.get(i, i) == 0.0));
    }

    #[test]
    fn bond_swaps_rgb_to_grb() {
        let basis = Basis::sector(2, 3, &[1, 1, 1]).unwrap();
        let h = bond_operator(2, 1, 2, &basis).unwrap();
        let space = basis.space();
        let rgb = basis.index_of(space.encode(&[0, 1, 2])).unwrap();
        let grb = basis.index_of(space.encode(&[1, 0, 2])).unwrap();
        let mut x = vec![0.0; basis.dim()];
        x[rgb] = 1.0;
        let y = h.matvec(&x);
        assert_eq!(y[grb], 1.0);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 1);
        assert!(bond_operator(2, 2, 2, &basis).is_err());
        assert!(bond_operator(2, 1, 4, &basis).is_err());
    }

    #[test]
    fn single_triangle_ground_energy() {
        let lat = build_lattice(2, 1, 0.1).unwrap();
        let h = hamiltonian(&lat, &Basis::sector(2, 3, &[1, 1, 1]).unwrap()).unwrap();
        assert!((eigenvalues(&h)[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn decoupled_layers_have_27_fold_ground_level() {
        let lat = build_lattice(2, 2, 0.01).unwrap();
        let basis = Basis::full(2, 6).unwrap();
        let terms: Vec<Exchange> = lat
            .bonds()
            .iter()
            .filter(|b| lat.is_intra_layer(b))
            .map(|b| Exchange { i: b.i, j: b.j, coupling: b.coupling })
            .collect();
        let h = exchange_sum(&basis, &terms).unwrap();
        let ev = eigenvalues(&h);
        assert!((ev[0] + 3.0).abs() < 1e-10);
        assert_eq!(ev.iter().filter(|e| (*e + 3.0).abs() < 1e-9).count(), 27);
    }

    #[test]
    fn hamiltonian_checks_dimensions_and_is_hollow() {
        let lat = build_lattice(2, 2, 0.01).unwrap();
        assert!(hamiltonian(&lat, &Basis::full(2, 5).unwrap()).is_err());
        assert!(hamiltonian(&lat, &Basis::full(3, 6).unwrap()).is_err());
        for basis in [Basis::full(2, 6).unwrap(), Basis::sector(2, 6, &[2, 2, 2]).unwrap()] {
            let h = hamiltonian(&lat, &basis).unwrap();
            assert!(h.is_symmetric());
            assert!((0..h.dim()).all(|i| h.get(i, i) == 0.0));
        }
    }

    #[test]
    fn full_basis_hamiltonian_conserves_content() {
        let lat = build_lattice(2, 2, 0.05).unwrap();
        let basis = Basis::full(2, 6).unwrap();
        let h = hamiltonian(&lat, &basis).unwrap();
        let space = basis.space();
        for &(r, c, _) in h.triplets() {
            assert_eq!(space.content(r as u64), space.content(c as u64));
        }
    }

    #[test]
    fn delta_h_counts_equal_pairs() {
        let basis = Basis::full(2, 3).unwrap();
        let d = delta_h(2, &basis).unwrap();
        let space = basis.space();
        assert_eq!(d.get(space.encode(&[0, 0, 1]) as usize, space.encode(&[0, 0, 1]) as usize), 1.0);
        assert_eq!(d.get(5, 5), 0.0);
        let basis = Basis::full(3, 4).unwrap();
        let d = delta_h(3, &basis).unwrap();
        assert_eq!(d.get(0, 0), 6.0);
        assert!(delta_h(3, &Basis::full(3, 5).unwrap()).is_err());
    }

    #[test]
    fn permutation_minus_delta_is_exchange_hamiltonian() {
        for k in 1..=3 {
            let basis = Basis::full(k, k + 1).unwrap();
            let lat = build_lattice(k, 1, 0.1).unwrap();
            let lhs = permutation_hamiltonian(k, &basis)
                .unwrap()
                .sub(&delta_h(k, &basis).unwrap())
                .unwrap();
            assert_eq!(lhs, hamiltonian(&lat, &basis).unwrap());
        }
    }

    #[test]
    fn color_permutation_basics() {
        let basis = Basis::full(2, 3).unwrap();
        let id = color_permutation_operator(&[0, 1, 2], &basis).unwrap();
        assert!(id.image().iter().enumerate().all(|(a, &b)| a == b));
        let swap_rg = color_permutation_operator(&[1, 0, 2], &basis).unwrap();
        let space = basis.space();
        assert_eq!(
            swap_rg.image()[space.encode(&[0, 1, 2]) as usize] as u64,
            space.encode(&[1, 0, 2])
        );
        assert!(color_permutation_operator(&[0, 0, 2], &basis).is_err());
        assert!(color_permutation_operator(&[0, 1], &basis).is_err());

        let sector = Basis::sector(2, 3, &[2, 1, 0]).unwrap();
        let p = color_permutation_operator(&[2, 0, 1], &sector).unwrap();
        assert_eq!(p.target().tag(), Basis::sector(2, 3, &[1, 0, 2]).unwrap().tag());
        assert!(p.to_operator().is_err());
    }

    #[test]
    fn hamiltonian_commutes_with_color_permutations() {
        let lat = build_lattice(2, 2, 0.03).unwrap();
        let basis = Basis::full(2, 6).unwrap();
        let h = hamiltonian(&lat, &basis).unwrap();
        let x: Vec<f64> = (0..basis.dim()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        for sigma in [[0, 1, 2], [1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]] {
            let p = color_permutation_operator(&sigma, &basis).unwrap();
            let lhs = p.apply(&h.matvec(&x));
            let rhs = h.matvec(&p.apply(&x));
            let dev = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-13);
        }
        // Sector-to-sector form: P H_src = H_tgt P.
        let src = Basis::sector(2, 6, &[3, 2, 1]).unwrap();
        let p = color_permutation_operator(&[1, 2, 0], &src).unwrap();
        let h_src = hamiltonian(&lat, &src).unwrap();
        let h_tgt = hamiltonian(&lat, p.target()).unwrap();
        let x: Vec<f64> = (0..src.dim()).map(|i| (i as f64).sin()).collect();
        let lhs = p.apply(&h_src.matvec(&x));
        let rhs = h_tgt.matvec(&p.apply(&x));
        assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-13));
    }
}
