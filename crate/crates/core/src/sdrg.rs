//! Second-order Schrieffer-Wolff reduction and the layer-by-layer RG flow.
//!
//! One step freezes a block (the innermost unfrozen layer, internally
//! coupled with `J0`) into its singlet and projects the next layer's
//! coupling `J` onto the ground subspace:
//!
//! ```text
//! H_eff = E0 + J P0 V P0 + J^2 sum_{E != E0} P0 V Pi_E V P0 / (E0 - E)
//! ```
//!
//! The inner block Hamiltonian only acts on inner sites, so its
//! eigendecomposition factorizes by inner color content and every step needs
//! only dense solves of size at most `(k+1)!`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::eigen::{dense_eigenvalues, dense_eigh, group_levels, spectral_norm, SolverOptions};
use crate::error::{Error, Result};
use crate::hilbert::{
    all_contents, color_permutation_operator, exchange_sum, simplex_terms, Basis, ConfigSpace,
    Exchange, SparseOperator,
};
use crate::lattice::SimplexLattice;
use crate::factorial;

/// Eigenvalues within this distance of the minimum belong to the ground level.
pub const GROUND_TOL: f64 = 1e-9;
/// Largest `k` for a structured RG step (the norm of `V` is taken on the
/// joint `2(k+1)`-site space).
pub const MAX_STEP_K: usize = 3;

#[derive(Debug, Clone)]
pub struct GroundSpace {
    pub energy: f64,
    /// Orthonormal columns spanning the ground level.
    pub vectors: DMatrix<f64>,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// All eigenvectors, columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl GroundSpace {
    pub fn degeneracy(&self) -> usize {
        self.vectors.ncols()
    }

    /// Distance to the first excited level, if any.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(self.degeneracy()).map(|e| e - self.energy)
    }
}

/// Ground level of a symmetric operator by dense diagonalization.
pub fn ground_projector(h0: &SparseOperator, tol: f64, cap: usize) -> Result<GroundSpace> {
    if h0.dim() == 0 {
        return Err(Error::DimensionMismatch("empty operator".into()));
    }
    let (eigenvalues, eigenvectors) = dense_eigh(h0.to_dense()?);
    let energy = eigenvalues[0];
    let found = eigenvalues.iter().take_while(|e| **e - energy <= tol).count();
    if found > cap {
        return Err(Error::DegeneracyCap { found, cap });
    }
    Ok(GroundSpace {
        energy,
        vectors: eigenvectors.columns(0, found).into_owned(),
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveHamiltonian {
    pub k: Option<usize>,
    /// Layer frozen by this step, for lattice steps.
    pub layer: Option<usize>,
    /// Coupling inside the frozen block.
    pub block_coupling: f64,
    /// Perturbation strength `J`.
    pub coupling: f64,
    pub ground_energy: f64,
    pub gap: f64,
    /// `P0 V P0` at unit coupling.
    #[serde(skip)]
    pub first: DMatrix<f64>,
    /// Second-order term at unit coupling.
    #[serde(skip)]
    pub second: DMatrix<f64>,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

impl EffectiveHamiltonian {
    fn assemble(
        k: Option<usize>,
        layer: Option<usize>,
        block_coupling: f64,
        coupling: f64,
        ground_energy: f64,
        gap: f64,
        first: DMatrix<f64>,
        second: DMatrix<f64>,
    ) -> Self {
        let n = first.nrows();
        let mut matrix = &first * coupling + &second * (coupling * coupling);
        for i in 0..n {
            matrix[(i, i)] += ground_energy;
        }
        // Symmetrize away round-off from the accumulation order.
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Self {
            k,
            layer,
            block_coupling,
            coupling,
            ground_energy,
            gap,
            first,
            second,
            matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Ascending eigenvalues of the effective matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// Generic second-order reduction onto the ground level of `h0`, expressed in
/// the orthonormal ground eigenvectors of a dense diagonalization.
pub fn schrieffer_wolff_2nd(
    h0: &SparseOperator,
    v: &SparseOperator,
    coupling: f64,
) -> Result<(EffectiveHamiltonian, DMatrix<f64>)> {
    h0.check_same_basis(v)?;
    let ground = ground_projector(h0, GROUND_TOL, h0.dim().saturating_sub(1))?;
    let gap = ground.gap().ok_or(Error::VanishingGap(0.0))?;
    if gap <= GROUND_TOL {
        return Err(Error::VanishingGap(gap));
    }
    let g = ground.degeneracy();
    let p0 = &ground.vectors;
    let v_dense = v.to_dense()?;
    let vp0 = &v_dense * p0;
    let first = p0.transpose() * &vp0;

    let excited = &ground.eigenvalues[g..];
    let overlaps = ground.eigenvectors.columns(g, excited.len()).transpose() * &vp0;
    let mut second = DMatrix::zeros(g, g);
    let mut row = 0;
    for level in group_levels(excited, GROUND_TOL) {
        let block = overlaps.rows(row, level.multiplicity);
        let projector_term = block.transpose() * block;
        second += projector_term / (ground.energy - level.value);
        row += level.multiplicity;
    }
    let eff = EffectiveHamiltonian::assemble(None, None, 1.0, coupling, ground.energy, gap, first, second);
    Ok((eff, ground.vectors))
}

/// Eigendecomposition of a fully connected `(k+1)`-site block, resolved by
/// color content.
struct BlockSpectrum {
    space: ConfigSpace,
    sectors: Vec<Basis>,
    /// Sector index of each configuration code.
    sector_of: Vec<usize>,
    /// `sum_{E != E0} Pi_E / (E0 - E)` per sector.
    resolvents: Vec<DMatrix<f64>>,
    singlet: Vec<(u64, f64)>,
    energy: f64,
    gap: f64,
}

impl BlockSpectrum {
    fn new(k: usize, coupling: f64) -> Result<Self> {
        let n = k + 1;
        let space = ConfigSpace::new(k, n)?;
        let terms = simplex_terms(&(1..=n).collect::<Vec<_>>(), coupling);
        let contents = all_contents(k, n);
        let mut sectors = Vec::new();
        let mut spectra = Vec::new();
        let mut sector_of = vec![usize::MAX; space.size() as usize];
        for (idx, content) in contents.iter().enumerate() {
            let basis = Basis::sector(k, n, content)?;
            for s in 0..basis.dim() {
                sector_of[basis.code(s) as usize] = idx;
            }
            spectra.push(dense_eigh(exchange_sum(&basis, &terms)?.to_dense()?));
            sectors.push(basis);
        }
        let energy = spectra
            .iter()
            .map(|(values, _)| values[0])
            .fold(f64::INFINITY, f64::min);
        let ground_sectors: Vec<usize> = spectra
            .iter()
            .enumerate()
            .filter(|(_, (values, _))| values[0] - energy <= GROUND_TOL)
            .map(|(i, _)| i)
            .collect();
        let degeneracy: usize = ground_sectors
            .iter()
            .map(|&i| spectra[i].0.iter().take_while(|e| **e - energy <= GROUND_TOL).count())
            .sum();
        if degeneracy != 1 {
            return Err(Error::DegenerateGround(degeneracy));
        }
        let singlet_sector = ground_sectors[0];
        let singlet = {
            let (_, vectors) = &spectra[singlet_sector];
            let basis = &sectors[singlet_sector];
            (0..basis.dim())
                .map(|s| (basis.code(s), vectors[(s, 0)]))
                .filter(|(_, a)| a.abs() > 1e-14)
                .collect()
        };

        let mut gap = f64::INFINITY;
        let resolvents = spectra
            .iter()
            .map(|(values, vectors)| {
                let d = values.len();
                let mut r = DMatrix::zeros(d, d);
                let mut start = 0;
                for level in group_levels(values, GROUND_TOL) {
                    if level.value - energy > GROUND_TOL {
                        gap = gap.min(level.value - energy);
                        let cols = vectors.columns(start, level.multiplicity);
                        r += (cols * cols.transpose()) / (energy - level.value);
                    }
                    start += level.multiplicity;
                }
                r
            })
            .collect();
        Ok(Self {
            space,
            sectors,
            sector_of,
            resolvents,
            singlet,
            energy,
            gap,
        })
    }
}

/// Reduce `J0 * (inner simplex) + J * V` onto `singlet (x) outer configs`,
/// where outer local `a` couples to every inner local `b != a`.
///
/// The result is indexed by the outer full-basis code on `k + 1` sites.
pub fn block_step(k: usize, block_coupling: f64, coupling: f64) -> Result<EffectiveHamiltonian> {
    if !(1..=MAX_STEP_K + 1).contains(&k) {
        return Err(Error::ParameterDomain(format!(
            "block reduction supports 1 <= k <= {}, got {k}",
            MAX_STEP_K + 1
        )));
    }
    if !(block_coupling > 0.0 && block_coupling.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "block coupling must be positive, got {block_coupling}"
        )));
    }
    let block = BlockSpectrum::new(k, block_coupling)?;
    let n = k + 1;
    let outer = &block.space;
    let q = outer.size() as usize;

    // w_o = V |s>|o>, grouped by (outer config, inner sector) as sector vectors.
    type Pieces = BTreeMap<(usize, usize), Vec<f64>>;
    let apply_v = |o: usize| -> Pieces {
        let outer_colors = outer.decode(o as u64);
        let mut pieces: Pieces = BTreeMap::new();
        for &(inner_code, amp) in &block.singlet {
            let inner_colors = block.space.decode(inner_code);
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    if inner_colors[b] == outer_colors[a] {
                        continue;
                    }
                    let mut ic = inner_colors.clone();
                    let mut oc = outer_colors.clone();
                    std::mem::swap(&mut ic[b], &mut oc[a]);
                    let code = block.space.encode(&ic);
                    let sector = block.sector_of[code as usize];
                    let basis = &block.sectors[sector];
                    let pos = basis.index_of(code).expect("sector contains its codes");
                    let piece = pieces
                        .entry((outer.encode(&oc) as usize, sector))
                        .or_insert_with(|| vec![0.0; basis.dim()]);
                    piece[pos] += amp;
                }
            }
        }
        pieces
    };

    let mut first = DMatrix::zeros(q, q);
    let mut second = DMatrix::zeros(q, q);
    let singlet_sector = block.sector_of[block.singlet[0].0 as usize];
    let singlet_vec: Vec<f64> = {
        let basis = &block.sectors[singlet_sector];
        let mut v = vec![0.0; basis.dim()];
        for &(code, amp) in &block.singlet {
            v[basis.index_of(code).unwrap()] = amp;
        }
        v
    };

    let all: Vec<Pieces> = (0..q).map(apply_v).collect();
    // (outer config, sector) -> [(source o, phi, R phi)]
    let mut by_target: BTreeMap<(usize, usize), Vec<(usize, DVector<f64>, DVector<f64>)>> = BTreeMap::new();
    for (o, pieces) in all.into_iter().enumerate() {
        for ((target, sector), phi) in pieces {
            if sector == singlet_sector {
                let overlap: f64 = phi.iter().zip(&singlet_vec).map(|(x, y)| x * y).sum();
                first[(target, o)] += overlap;
            }
            let phi = DVector::from_vec(phi);
            let r_phi = &block.resolvents[sector] * &phi;
            by_target.entry((target, sector)).or_default().push((o, phi, r_phi));
        }
    }
    for group in by_target.values() {
        for (o_row, phi_row, _) in group {
            for (o_col, _, r_phi_col) in group {
                second[(*o_row, *o_col)] += phi_row.dot(r_phi_col);
            }
        }
    }
    Ok(EffectiveHamiltonian::assemble(
        Some(k),
        None,
        block_coupling,
        coupling,
        block.energy,
        block.gap,
        first,
        second,
    ))
}

/// Least-squares decomposition `H_eff = (E0 + shift) I + J_tilde H_outer + rest`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveFit {
    pub j_tilde: f64,
    pub shift: f64,
    /// `max |rest|`.
    pub deviation: f64,
}

/// Exchange Hamiltonian of one simplex on the outer full basis.
fn outer_simplex(k: usize) -> Result<DMatrix<f64>> {
    let basis = Basis::full(k, k + 1)?;
    exchange_sum(&basis, &simplex_terms(&(1..=k + 1).collect::<Vec<_>>(), 1.0))?.to_dense()
}

pub fn fit_effective(eff: &EffectiveHamiltonian, k: usize) -> Result<EffectiveFit> {
    let h = outer_simplex(k)?;
    if h.nrows() != eff.dim() {
        return Err(Error::DimensionMismatch(format!(
            "effective matrix has dimension {}, outer simplex {}",
            eff.dim(),
            h.nrows()
        )));
    }
    let dim = h.nrows() as f64;
    // h is traceless, so the identity and h are orthogonal.
    let shift = eff.matrix.trace() / dim - eff.ground_energy;
    let j_tilde = eff.matrix.dot(&h) / h.norm_squared();
    let mut rest = &eff.matrix - &h * j_tilde;
    for i in 0..h.nrows() {
        rest[(i, i)] -= eff.ground_energy + shift;
    }
    Ok(EffectiveFit {
        j_tilde,
        shift,
        deviation: rest.amax(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RGStepReport {
    pub layer: usize,
    /// Inter-layer coupling `J_n` being integrated out.
    #[serde(rename = "J")]
    pub coupling: f64,
    /// Coupling inside the frozen block.
    pub block_coupling: f64,
    #[serde(rename = "J_tilde")]
    pub j_tilde: f64,
    pub shift: f64,
    pub deviation: f64,
    pub ground_energy: f64,
    pub gap: f64,
    /// `J_tilde / (J^2 / ((k+1)! J0))`.
    pub dasgupta_ma_ratio: f64,
    /// `gap / (J ||V||)`; perturbation theory needs this well above 1.
    pub perturbative_ratio: f64,
    pub warnings: Vec<String>,
}

/// Operator norm of the inter-layer bond sum on the joint two-layer space.
pub fn inter_layer_norm(k: usize) -> Result<f64> {
    if !(1..=MAX_STEP_K).contains(&k) {
        return Err(Error::ParameterDomain(format!(
            "RG steps support 1 <= k <= {MAX_STEP_K}, got {k}"
        )));
    }
    let n = k + 1;
    let basis = Basis::full(k, 2 * n)?;
    let terms: Vec<Exchange> = (1..=n)
        .flat_map(|a| {
            (1..=n)
                .filter(move |&b| b != a)
                .map(move |b| Exchange { i: b, j: n + a, coupling: 1.0 })
        })
        .collect();
    let v = exchange_sum(&basis, &terms)?;
    if v.dim() <= 1024 {
        let values = dense_eigenvalues(&v.to_dense()?);
        return Ok(values[0].abs().max(values[values.len() - 1].abs()));
    }
    spectral_norm(&v, &SolverOptions::default())
}

/// One RG step with an explicit block coupling.
pub fn rg_step_from(lattice: &SimplexLattice, layer: usize, block_coupling: f64) -> Result<RGStepReport> {
    let k = lattice.k();
    if !(1..=MAX_STEP_K).contains(&k) {
        return Err(Error::ParameterDomain(format!(
            "RG steps support 1 <= k <= {MAX_STEP_K}, got {k}"
        )));
    }
    if layer < 1 || layer >= lattice.layers() {
        return Err(Error::ParameterDomain(format!(
            "layer {layer} outside 1..={}",
            lattice.layers().saturating_sub(1)
        )));
    }
    let coupling = lattice.coupling(layer);
    let mut eff = block_step(k, block_coupling, coupling)?;
    eff.layer = Some(layer);
    let fit = fit_effective(&eff, k)?;
    let norm = inter_layer_norm(k)?;
    let perturbative_ratio = eff.gap / (coupling * norm);
    let dm = coupling * coupling / (factorial(k + 1) as f64 * block_coupling);

    let mut warnings = lattice.warnings().to_vec();
    if perturbative_ratio <= 1.0 {
        warnings.push(format!(
            "layer {layer}: block gap {:.6} does not exceed J ||V|| = {:.6}; second-order result is unreliable",
            eff.gap,
            coupling * norm
        ));
    }
    if coupling >= block_coupling {
        warnings.push(format!(
            "layer {layer}: coupling {coupling:.6} is not weaker than the block coupling {block_coupling:.6}"
        ));
    }
    Ok(RGStepReport {
        layer,
        coupling,
        block_coupling,
        j_tilde: fit.j_tilde,
        shift: fit.shift,
        deviation: fit.deviation,
        ground_energy: eff.ground_energy,
        gap: eff.gap,
        dasgupta_ma_ratio: fit.j_tilde / dm,
        perturbative_ratio,
        warnings,
    })
}

/// Step at `layer`, with the block coupling produced by the preceding steps.
pub fn rg_step(lattice: &SimplexLattice, layer: usize) -> Result<RGStepReport> {
    if layer < 1 || layer >= lattice.layers() {
        return Err(Error::ParameterDomain(format!(
            "layer {layer} outside 1..={}",
            lattice.layers().saturating_sub(1)
        )));
    }
    let mut block_coupling = 1.0;
    for n in 1..layer {
        block_coupling = rg_step_from(lattice, n, block_coupling)?.j_tilde;
    }
    rg_step_from(lattice, layer, block_coupling)
}

/// Steps for every layer `1..N`, innermost first. Each frozen layer leaves
/// the next one with the renormalized coupling of the previous step.
pub fn effective_flow(lattice: &SimplexLattice) -> Result<Vec<RGStepReport>> {
    if lattice.layers() < 2 {
        return Err(Error::ParameterDomain("the flow needs at least two layers".into()));
    }
    let mut reports = Vec::new();
    let mut block_coupling = 1.0;
    for layer in 1..lattice.layers() {
        let report = rg_step_from(lattice, layer, block_coupling)?;
        block_coupling = report.j_tilde;
        reports.push(report);
    }
    Ok(reports)
}

/// Intra-layer couplings after the flow: `1` for layer 1, then each `J_tilde`.
pub fn effective_couplings(reports: &[RGStepReport]) -> Vec<f64> {
    std::iter::once(1.0).chain(reports.iter().map(|r| r.j_tilde)).collect()
}

/// Lowest eigenvalues of `H_eff` restricted to outer configurations of the
/// given color content.
pub fn effective_sector_eigenvalues(eff: &EffectiveHamiltonian, k: usize, content: &[usize]) -> Result<Vec<f64>> {
    let sector = Basis::sector(k, k + 1, content)?;
    let idx: Vec<usize> = (0..sector.dim()).map(|s| sector.code(s) as usize).collect();
    let m = DMatrix::from_fn(idx.len(), idx.len(), |r, c| eff.matrix[(idx[r], idx[c])]);
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Largest deviation of `H_eff` from its conjugate under every color
/// permutation of the outer sites.
pub fn color_symmetry_deviation(eff: &EffectiveHamiltonian, k: usize) -> Result<f64> {
    let basis = Basis::full(k, k + 1)?;
    let mut worst = 0.0f64;
    let mut sigma: Vec<usize> = (0..=k).collect();
    loop {
        let p = color_permutation_operator(&sigma, &basis)?;
        let image = p.image();
        for r in 0..basis.dim() {
            for c in 0..basis.dim() {
                let d = (eff.matrix[(image[r], image[c])] - eff.matrix[(r, c)]).abs();
                worst = worst.max(d);
            }
        }
        if !next_permutation(&mut sigma) {
            break;
        }
    }
    Ok(worst)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Exchange coefficient of the second-order term at unit couplings:
/// `2 / (k^2 (k+1))`.
pub fn exchange_coefficient(k: usize) -> f64 {
    2.0 / ((k * k * (k + 1)) as f64)
}
