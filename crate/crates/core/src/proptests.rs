//! Cross-module invariants.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use crate::entanglement::{schmidt, Cut, CutKind, StateVector};
use crate::hilbert::all_contents;
use crate::sdrg::{block_step, color_symmetry_deviation};
use crate::simplex_spectrum::partitions;
use crate::{
    analytic_ground_state, build_lattice, color_permutation_operator, hamiltonian, Basis,
};

fn permutation(len: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..len).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn lattice_adjacency_and_couplings(k in 1usize..=4, layers in 1usize..=4, alpha in 0.001f64..0.999) {
        let lat = build_lattice(k, layers, alpha).unwrap();
        let q = k + 1;
        prop_assert_eq!(lat.num_sites(), q * layers);
        prop_assert_eq!(lat.bonds().len(), q * k / 2 + (layers - 1) * q * k);
        for n in 2..=layers {
            for a in 1..=q {
                let outer = lat.site_id(n, a);
                let partners: Vec<usize> = lat
                    .bonds()
                    .iter()
                    .filter(|b| b.j == outer && b.i < lat.site_id(n, 1))
                    .map(|b| b.i)
                    .collect();
                prop_assert_eq!(partners.len(), k);
                prop_assert!(!partners.contains(&lat.site_id(n - 1, a)));
            }
        }
        for n in 1..layers.saturating_sub(1) {
            let ratio = lat.coupling(n + 1) / lat.coupling(n);
            prop_assert!((ratio / alpha - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sector_dimensions_partition_full_space(k in 1usize..=3, n in 1usize..=6) {
        let total: usize = all_contents(k, n)
            .iter()
            .map(|c| Basis::sector(k, n, c).unwrap().dim())
            .sum();
        prop_assert_eq!(total, (k + 1).pow(n as u32));
    }

    #[test]
    fn hamiltonian_commutes_with_random_color_permutation(
        sigma in permutation(3),
        alpha in 0.001f64..0.3,
        seed in 0u64..1000,
    ) {
        let lat = build_lattice(2, 2, alpha).unwrap();
        let basis = Basis::sector(2, 6, &[3, 2, 1]).unwrap();
        let p = color_permutation_operator(&sigma, &basis).unwrap();
        let h_src = hamiltonian(&lat, &basis).unwrap();
        let h_tgt = hamiltonian(&lat, p.target()).unwrap();
        prop_assert!(h_src.is_symmetric());
        let x: Vec<f64> = (0..basis.dim()).map(|i| ((i as u64 * 2654435761 + seed) % 997) as f64 / 997.0).collect();
        let lhs = p.apply(&h_src.matvec(&x));
        let rhs = h_tgt.matvec(&p.apply(&x));
        let dev = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-13);
    }

    #[test]
    fn schmidt_weights_sum_to_one(
        amplitudes in proptest::collection::vec(-1.0f64..1.0, 90),
        cut in proptest::sample::subsequence((1usize..=6).collect::<Vec<_>>(), 1..6),
    ) {
        prop_assume!(amplitudes.iter().any(|a| a.abs() > 1e-3));
        let basis = Arc::new(Basis::sector(2, 6, &[2, 2, 2]).unwrap());
        let state = StateVector::new(basis, amplitudes).unwrap().normalized().unwrap();
        let cut = Cut::new(CutKind::Explicit { sites: cut }, 2, 2).unwrap();
        let r = schmidt(&state, &cut).unwrap();
        prop_assert!((r.weight() - 1.0).abs() < 1e-10);
        prop_assert!(r.entropy >= 0.0);
        prop_assert!(r.schmidt_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn product_state_entropy_is_additive(
        cut in proptest::sample::subsequence((1usize..=9).collect::<Vec<_>>(), 1..9),
    ) {
        let p = analytic_ground_state(2, 3).unwrap();
        let sites = cut.clone();
        let cut = Cut::new(CutKind::Explicit { sites: cut }, 2, 3).unwrap();
        let total = schmidt(&p, &cut).unwrap().entropy;
        let per_layer: f64 = (0..3)
            .map(|layer| {
                let m = sites.iter().filter(|&&s| (s - 1) / 3 == layer).count();
                let c = [1.0, 3.0, 3.0, 1.0][m];
                f64::ln(c)
            })
            .sum();
        prop_assert!((total - per_layer).abs() < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_is_symmetric_and_color_invariant(j in 0.01f64..0.5, j0 in 0.5f64..2.0) {
        let eff = block_step(2, j0, j).unwrap();
        prop_assert!(eff.asymmetry() < 1e-13);
        prop_assert!(color_symmetry_deviation(&eff, 2).unwrap() < 1e-12);
    }
}

#[test]
fn schur_weyl_totals() {
    for k in 1..=6usize {
        let total: u64 = partitions(k + 1)
            .iter()
            .map(|d| d.standard_tableau_count() * d.gl_dimension(k + 1))
            .sum();
        assert_eq!(total, ((k + 1) as u64).pow(k as u32 + 1));
    }
}

#[test]
fn layer_singlet_energy_on_full_basis() {
    let lat = build_lattice(2, 2, 0.01).unwrap();
    let basis = Arc::new(Basis::full(2, 6).unwrap());
    let p = crate::entanglement::analytic_state_in(2, 2, basis.clone()).unwrap();
    let h = hamiltonian(&lat, &basis).unwrap();
    assert_abs_diff_eq!(p.expectation(&h).unwrap(), -3.0, epsilon = 1e-13);
}
