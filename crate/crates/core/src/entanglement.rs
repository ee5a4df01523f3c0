//! Layer-singlet states, exact ground states, Schmidt decompositions and
//! the overcomplete singlet identities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eigen::{ground_state, GroundState, Provenance, SolverOptions};
use crate::error::{Error, Result};
use crate::hilbert::{exchange_sum, hamiltonian, Basis, ConfigSpace, Exchange, SparseOperator};
use crate::lattice::SimplexLattice;
use crate::{binomial, factorial};

/// Tolerated `|1 - <psi|psi>|` for a normalized state.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<Basis>,
    amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn new(basis: Arc<Basis>, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Scale to unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ParameterDomain("cannot normalize a zero vector".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(self)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn norm_deviation(&self) -> f64 {
        (1.0 - self.amplitudes.iter().map(|a| a * a).sum::<f64>()).abs()
    }

    pub fn nonzero(&self) -> usize {
        self.amplitudes.iter().filter(|a| **a != 0.0).count()
    }

    pub fn amplitude_of(&self, colors: &[usize]) -> f64 {
        self.basis
            .index_of(self.basis.space().encode(colors))
            .map(|i| self.amplitudes[i])
            .unwrap_or(0.0)
    }

    pub fn expectation(&self, op: &SparseOperator) -> Result<f64> {
        if op.basis() != &self.basis.tag() {
            return Err(Error::DimensionMismatch("operator and state use different bases".into()));
        }
        Ok(op.expectation(&self.amplitudes))
    }
}

/// Signs of all permutations of `0..n`, in lexicographic order.
fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::with_capacity(factorial(n) as usize);
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        let inversions = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| p[i] > p[j])
            .count();
        out.push((p.clone(), if inversions % 2 == 0 { 1.0 } else { -1.0 }));
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Product over layers of the normalized `(k+1)`-site antisymmetrizer on
/// `basis`, which must contain it (the full basis or the balanced sector).
/// The identity assignment (local `a` gets color `a - 1`) has positive sign.
pub fn analytic_state_in(k: usize, layers: usize, basis: Arc<Basis>) -> Result<StateVector> {
    let q = k + 1;
    if basis.k() != k || basis.n_sites() != q * layers {
        return Err(Error::DimensionMismatch(format!(
            "basis has k = {}, {} sites; the layer-singlet state needs k = {k}, {} sites",
            basis.k(),
            basis.n_sites(),
            q * layers
        )));
    }
    let perms = signed_permutations(q);
    let scale = (factorial(q) as f64).powf(-0.5 * layers as f64);
    let mut amplitudes = vec![0.0; basis.dim()];
    let mut choice = vec![0usize; layers];
    let mut colors = vec![0usize; q * layers];
    loop {
        let mut sign = 1.0;
        for (layer, &c) in choice.iter().enumerate() {
            let (perm, s) = &perms[c];
            colors[layer * q..(layer + 1) * q].copy_from_slice(perm);
            sign *= s;
        }
        let idx = basis
            .index_of(basis.space().encode(&colors))
            .ok_or_else(|| Error::DimensionMismatch("basis does not contain the layer-singlet state".into()))?;
        amplitudes[idx] = sign * scale;
        // Odometer over per-layer permutations.
        let mut layer = layers;
        loop {
            if layer == 0 {
                return StateVector::new(basis, amplitudes);
            }
            layer -= 1;
            choice[layer] += 1;
            if choice[layer] < perms.len() {
                break;
            }
            choice[layer] = 0;
        }
    }
}

/// The layer-singlet state on the balanced sector (each color `layers` times).
pub fn analytic_ground_state(k: usize, layers: usize) -> Result<StateVector> {
    if k < 1 || layers < 1 {
        return Err(Error::ParameterDomain("need k >= 1 and layers >= 1".into()));
    }
    let basis = Basis::sector(k, (k + 1) * layers, &vec![layers; k + 1])?;
    analytic_state_in(k, layers, Arc::new(basis))
}

#[derive(Debug, Clone)]
pub struct ExactGroundState {
    pub energy: f64,
    pub state: StateVector,
    pub multiplicity: usize,
    pub next_level: Option<f64>,
    pub residual: f64,
    pub provenance: Provenance,
}

impl ExactGroundState {
    /// The state, unless the ground level is degenerate.
    pub fn unique_state(&self) -> Result<&StateVector> {
        if self.multiplicity > 1 {
            return Err(Error::DegenerateGround(self.multiplicity));
        }
        Ok(&self.state)
    }
}

/// Lowest eigenpair of an operator on `basis`.
pub fn ground_state_of(op: &SparseOperator, basis: Arc<Basis>, opts: &SolverOptions) -> Result<ExactGroundState> {
    let GroundState {
        energy,
        vector,
        multiplicity,
        next_level,
        residual,
        provenance,
        ..
    } = ground_state(op, opts)?;
    if residual > opts.tol.max(1e-10) {
        return Err(Error::NonConvergence(format!(
            "ground-state residual {residual:e} exceeds {:e}",
            opts.tol
        )));
    }
    Ok(ExactGroundState {
        energy,
        state: StateVector::new(basis, vector)?.normalized()?,
        multiplicity,
        next_level,
        residual,
        provenance,
    })
}

/// Numerical ground state of the lattice Hamiltonian in a content sector
/// (balanced when `content` is `None`).
pub fn exact_ground_state(
    lattice: &SimplexLattice,
    content: Option<&[usize]>,
    opts: &SolverOptions,
) -> Result<ExactGroundState> {
    let k = lattice.k();
    let n = lattice.num_sites();
    let balanced = vec![lattice.layers(); k + 1];
    let basis = Arc::new(Basis::sector(k, n, content.unwrap_or(&balanced))?);
    let h = hamiltonian(lattice, &basis)?;
    ground_state_of(&h, basis, opts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CutKind {
    /// Local index 2 of every layer.
    EvenOdd,
    /// Local indices `1..=m[n]` of layer `n`.
    Radial { m: Vec<usize> },
    /// Layers `1..=boundary`.
    Concentric { boundary: usize },
    Explicit { sites: Vec<usize> },
}

impl FromStr for CutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let list = |body: &str| -> Result<Vec<usize>> {
            body.split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::ParameterDomain(format!("bad integer '{t}' in cut '{s}'")))
                })
                .collect()
        };
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "even-odd" if body.is_empty() => Ok(CutKind::EvenOdd),
            "radial" => Ok(CutKind::Radial { m: list(body)? }),
            "concentric" => Ok(CutKind::Concentric {
                boundary: body
                    .trim()
                    .parse()
                    .map_err(|_| Error::ParameterDomain(format!("bad boundary in cut '{s}'")))?,
            }),
            "sites" => Ok(CutKind::Explicit { sites: list(body)? }),
            _ => Err(Error::ParameterDomain(format!(
                "unknown cut '{s}' (even-odd, radial:m1,m2,.., concentric:b, sites:i,j,..)"
            ))),
        }
    }
}

impl fmt::Display for CutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            CutKind::EvenOdd => f.write_str("even-odd"),
            CutKind::Radial { m } => write!(f, "radial:{}", join(m)),
            CutKind::Concentric { boundary } => write!(f, "concentric:{boundary}"),
            CutKind::Explicit { sites } => write!(f, "sites:{}", join(sites)),
        }
    }
}

/// A bipartition: subsystem `A` as ascending 1-based site ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cut {
    pub kind: CutKind,
    pub sites: Vec<usize>,
}

impl Cut {
    pub fn new(kind: CutKind, k: usize, layers: usize) -> Result<Self> {
        let q = k + 1;
        let n_sites = q * layers;
        let id = |layer: usize, local: usize| (layer - 1) * q + local;
        let sites: BTreeSet<usize> = match &kind {
            CutKind::EvenOdd => {
                if q < 2 {
                    return Err(Error::ParameterDomain("even-odd cut needs k >= 1".into()));
                }
                (1..=layers).map(|n| id(n, 2)).collect()
            }
            CutKind::Radial { m } => {
                if m.len() != layers {
                    return Err(Error::ParameterDomain(format!(
                        "radial cut lists {} layers, lattice has {layers}",
                        m.len()
                    )));
                }
                if let Some(bad) = m.iter().find(|&&x| x > q) {
                    return Err(Error::ParameterDomain(format!("radial m = {bad} exceeds k + 1 = {q}")));
                }
                m.iter()
                    .enumerate()
                    .flat_map(|(n, &mn)| (1..=mn).map(move |a| id(n + 1, a)))
                    .collect()
            }
            CutKind::Concentric { boundary } => (1..=*boundary)
                .flat_map(|n| (1..=q).map(move |a| id(n, a)))
                .collect(),
            CutKind::Explicit { sites } => {
                if let Some(bad) = sites.iter().find(|&&s| s == 0 || s > n_sites) {
                    return Err(Error::ParameterDomain(format!("site {bad} outside 1..={n_sites}")));
                }
                sites.iter().copied().collect()
            }
        };
        if sites.is_empty() || sites.len() >= n_sites || sites.iter().any(|&s| s > n_sites) {
            return Err(Error::ParameterDomain(format!(
                "cut {kind} must select a nonempty proper subset of the {n_sites} sites"
            )));
        }
        Ok(Self {
            kind,
            sites: sites.into_iter().collect(),
        })
    }

    pub fn parse(text: &str, k: usize, layers: usize) -> Result<Self> {
        Self::new(text.parse()?, k, layers)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchmidtResult {
    pub cut: Cut,
    /// Descending.
    pub schmidt_values: Vec<f64>,
    /// Natural-log von Neumann entropy.
    pub entropy: f64,
}

impl SchmidtResult {
    pub fn weight(&self) -> f64 {
        self.schmidt_values.iter().map(|s| s * s).sum()
    }

    pub fn entropy_in_base(&self, base: f64) -> f64 {
        self.entropy / base.ln()
    }
}

/// Schmidt values below this (squared) weight are dropped from the entropy.
const WEIGHT_FLOOR: f64 = 1e-15;

/// Schmidt decomposition across `cut`. Only the occupied configurations of
/// `A` and of its complement are materialized.
pub fn schmidt(state: &StateVector, cut: &Cut) -> Result<SchmidtResult> {
    let space = state.basis().space();
    let n = space.n_sites();
    if cut.sites.is_empty() || cut.sites.len() >= n || cut.sites.iter().any(|&s| s == 0 || s > n) {
        return Err(Error::ParameterDomain(format!(
            "cut {} is not a nonempty proper subset of 1..={n}",
            cut.kind
        )));
    }
    let in_a: Vec<bool> = (1..=n).map(|s| cut.sites.binary_search(&s).is_ok()).collect();
    let split = |code: u64| -> (u64, u64) {
        let colors = space.decode(code);
        let q = space.colors() as u64;
        let (mut a, mut b) = (0u64, 0u64);
        for (s, &c) in colors.iter().enumerate() {
            if in_a[s] {
                a = a * q + c as u64;
            } else {
                b = b * q + c as u64;
            }
        }
        (a, b)
    };

    let mut entries = Vec::new();
    let mut rows = BTreeMap::new();
    let mut cols = BTreeMap::new();
    for (idx, &amp) in state.amplitudes().iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let (a, b) = split(state.basis().code(idx));
        let nr = rows.len();
        let r = *rows.entry(a).or_insert(nr);
        let nc = cols.len();
        let c = *cols.entry(b).or_insert(nc);
        entries.push((r, c, amp));
    }
    if entries.is_empty() {
        return Err(Error::ParameterDomain("zero state has no Schmidt decomposition".into()));
    }
    // Gram matrix on the smaller side.
    let (dim, transpose) = if rows.len() <= cols.len() {
        (rows.len(), false)
    } else {
        (cols.len(), true)
    };
    let mut by_other: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for &(r, c, v) in &entries {
        let (keep, other) = if transpose { (c, r) } else { (r, c) };
        by_other.entry(other).or_default().push((keep, v));
    }
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for column in by_other.values() {
        for &(i, vi) in column {
            for &(j, vj) in column {
                gram[(i, j)] += vi * vj;
            }
        }
    }
    let mut weights: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|w| w.max(0.0)).collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let entropy = weights
        .iter()
        .filter(|&&w| w > WEIGHT_FLOOR)
        .map(|&w| -w * w.ln())
        .sum::<f64>()
        .max(0.0);
    Ok(SchmidtResult {
        cut: cut.clone(),
        schmidt_values: weights.iter().map(|w| w.sqrt()).collect(),
        entropy,
    })
}

/// Entropy of the layer-singlet state for a cut taking `m[n]` sites of
/// layer `n`: `sum_n ln C(k+1, m[n])`.
pub fn radial_entropy(k: usize, layers: usize, m: &[usize]) -> Result<f64> {
    if m.len() != layers {
        return Err(Error::ParameterDomain(format!(
            "{} per-layer counts for {layers} layers",
            m.len()
        )));
    }
    if let Some(bad) = m.iter().find(|&&x| x > k + 1) {
        return Err(Error::ParameterDomain(format!("m = {bad} exceeds k + 1 = {}", k + 1)));
    }
    Ok(m.iter().map(|&x| (binomial(k + 1, x) as f64).ln()).sum())
}

/// `|<a|b>|^2` for normalized states on the same basis.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.basis().tag() != b.basis().tag() {
        return Err(Error::DimensionMismatch(format!(
            "states live on different bases: {:?} vs {:?}",
            a.basis().tag(),
            b.basis().tag()
        )));
    }
    let overlap: f64 = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x * y).sum();
    Ok((overlap * overlap).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub k: usize,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() < tol
    }
}

type Sparse = BTreeMap<u64, f64>;

fn add_into(target: &mut Sparse, code: u64, v: f64) {
    *target.entry(code).or_insert(0.0) += v;
}

fn residual(a: &Sparse, b: &Sparse) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Two-site singlet `|a b>_ij - |b a>_ij` (arrow from `i` to `j`, `a < b`),
/// times a fixed color on every other listed site.
fn dimer(space: &ConfigSpace, i: usize, j: usize, a: usize, b: usize, rest: &[(usize, usize)]) -> Sparse {
    let mut out = Sparse::new();
    for (ci, cj, s) in [(a, b, 1.0), (b, a, -1.0)] {
        let mut colors = vec![0; space.n_sites()];
        colors[i] = ci;
        colors[j] = cj;
        for &(site, c) in rest {
            colors[site] = c;
        }
        add_into(&mut out, space.encode(&colors), s);
    }
    out
}

/// Unnormalized antisymmetrizer of the colors `set` (ascending) over
/// `sites`, tensored with `fixed` colors elsewhere.
fn antisymmetrizer(space: &ConfigSpace, sites: &[usize], set: &[usize], fixed: &[(usize, usize)]) -> Sparse {
    let mut out = Sparse::new();
    for (perm, sign) in signed_permutations(sites.len()) {
        let mut colors = vec![0; space.n_sites()];
        for (slot, &p) in perm.iter().enumerate() {
            colors[sites[slot]] = set[p];
        }
        for &(site, c) in fixed {
            colors[site] = c;
        }
        add_into(&mut out, space.encode(&colors), sign);
    }
    out
}

fn apply(op: &SparseOperator, v: &Sparse) -> Sparse {
    let x: BTreeMap<usize, f64> = v.iter().map(|(&c, &a)| (c as usize, a)).collect();
    op.apply_sparse(&x).into_iter().map(|(c, a)| (c as u64, a)).collect()
}

fn scaled(v: &Sparse, s: f64) -> Sparse {
    v.iter().map(|(&c, &a)| (c, a * s)).collect()
}

/// Check the two-site singlet relations on three sites and the action of
/// a face of the `k`-simplex on its singlet tensored with an outside site.
pub fn singlet_identities(k: usize) -> Result<IdentityReport> {
    if !(k == 2 || k == 3) {
        return Err(Error::ParameterDomain(format!("singlet identities are checked for k = 2, 3, got {k}")));
    }
    let q = k + 1;
    let mut checks = Vec::new();

    // Three sites 0, 1, 2 and every pair of colors a < b with x in {a, b}.
    let three = ConfigSpace::new(k, 3)?;
    let (i, j, l) = (0, 1, 2);
    let mut over = 0.0f64;
    let mut reversal = 0.0f64;
    for a in 0..q {
        for b in a + 1..q {
            for x in [a, b] {
                let mut lhs = dimer(&three, i, j, a, b, &[(l, x)]);
                for (code, v) in dimer(&three, j, l, a, b, &[(i, x)]) {
                    add_into(&mut lhs, code, v);
                }
                let rhs = dimer(&three, i, l, a, b, &[(j, x)]);
                over = over.max(residual(&lhs, &rhs));
            }
            let forward = dimer(&three, i, j, a, b, &[(l, a)]);
            let backward = dimer(&three, j, i, a, b, &[(l, a)]);
            reversal = reversal.max(residual(&forward, &scaled(&backward, -1.0)));
        }
    }
    checks.push(IdentityCheck { name: "overcompleteness".into(), residual: over });
    checks.push(IdentityCheck { name: "arrow reversal (dimer)".into(), residual: reversal });

    // Simplex singlet reversal: swapping two sites flips the sign.
    let simplex_space = ConfigSpace::new(k, q)?;
    let all: Vec<usize> = (0..q).collect();
    let mut swapped_sites = all.clone();
    swapped_sites.swap(0, 1);
    let a = antisymmetrizer(&simplex_space, &all, &all, &[]);
    let b = antisymmetrizer(&simplex_space, &swapped_sites, &all, &[]);
    checks.push(IdentityCheck {
        name: "arrow reversal (simplex)".into(),
        residual: residual(&a, &scaled(&b, -1.0)),
    });

    // Face action: sites 0..=k form the simplex, site q is external and
    // couples to the face 1..=k (not to site 0).
    let joint = Basis::full(k, q + 1)?;
    let space = joint.space().clone();
    let external = q;
    let face: Vec<usize> = (1..=k).collect();
    let terms: Vec<Exchange> = face
        .iter()
        .map(|&s| Exchange { i: s + 1, j: external + 1, coupling: 1.0 })
        .collect();
    let v = exchange_sum(&joint, &terms)?;
    let norm = (factorial(q) as f64).sqrt();
    let mut action = 0.0f64;
    for c in 0..q {
        let singlet = scaled(&antisymmetrizer(&space, &all, &all, &[(external, c)]), 1.0 / norm);
        let lhs = apply(&v, &singlet);
        let mut rhs = Sparse::new();
        for c2 in (0..q).filter(|&c2| c2 != c) {
            let set: Vec<usize> = (0..q).filter(|&x| x != c2).collect();
            // Sign of (c2, set ascending) as a permutation of 0..q.
            let sign = if c2 % 2 == 0 { 1.0 } else { -1.0 };
            let term = antisymmetrizer(&space, &face, &set, &[(0, c), (external, c2)]);
            for (code, val) in term {
                add_into(&mut rhs, code, -sign * val / norm);
            }
        }
        action = action.max(residual(&lhs, &rhs));
    }
    checks.push(IdentityCheck {
        name: format!("face action (k = {k})"),
        residual: action,
    });

    if k == 2 {
        // The explicit form for a red external site on sites 1..4:
        // (|RGR> - |RRG>)|B> / sqrt6 + (|RRB> - |RBR>)|G> / sqrt6.
        let singlet = scaled(&antisymmetrizer(&space, &all, &all, &[(external, 0)]), 1.0 / norm);
        let lhs = apply(&v, &singlet);
        let s6 = 6f64.sqrt();
        let mut rhs = Sparse::new();
        for (colors, sign) in [
            ([0, 1, 0, 2], 1.0),
            ([0, 0, 1, 2], -1.0),
            ([0, 0, 2, 1], 1.0),
            ([0, 2, 0, 1], -1.0),
        ] {
            add_into(&mut rhs, space.encode(&colors), sign / s6);
        }
        checks.push(IdentityCheck {
            name: "face action, explicit red external site".into(),
            residual: residual(&lhs, &rhs),
        });
    }
    Ok(IdentityReport { k, checks })
}
