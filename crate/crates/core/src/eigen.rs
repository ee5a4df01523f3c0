//! Dense and iterative symmetric eigensolvers.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{SparseOperator, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Dense,
    Iterative,
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    #[default]
    Auto,
}

impl Solver {
    pub fn resolve(self, dim: usize) -> Solver {
        match self {
            Solver::Auto if dim <= DENSE_LIMIT => Solver::Dense,
            Solver::Auto => Solver::Iterative,
            other => other,
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Solver::Dense),
            "iterative" | "lanczos" => Ok(Solver::Iterative),
            "auto" => Ok(Solver::Auto),
            other => Err(Error::ParameterDomain(format!("unknown solver '{other}'"))),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Dense => "dense",
            Solver::Iterative => "iterative",
            Solver::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub solver: Solver,
    /// Target residual `||H psi - E psi||`.
    pub tol: f64,
    /// Eigenvalues closer than this to the ground energy count as degenerate.
    pub degeneracy_tol: f64,
    /// Seed of the Lanczos start vector.
    pub seed: u64,
    pub max_restarts: usize,
    pub krylov_dim: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            tol: 1e-10,
            degeneracy_tol: 1e-8,
            seed: 0x5eed,
            max_restarts: 50,
            krylov_dim: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Dense,
    Lanczos,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub value: f64,
    pub multiplicity: usize,
}

/// Group ascending eigenvalues into levels; a level absorbs values within
/// `tol` of its first member.
pub fn group_levels(sorted: &[f64], tol: f64) -> Vec<Level> {
    let mut levels: Vec<Level> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for &e in sorted {
        match levels.last_mut() {
            Some(level) if e - anchor <= tol => {
                level.multiplicity += 1;
                level.value += (e - level.value) / level.multiplicity as f64;
            }
            _ => {
                anchor = e;
                levels.push(Level {
                    value: e,
                    multiplicity: 1,
                });
            }
        }
    }
    levels
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub levels: Vec<Level>,
    /// Column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub provenance: Provenance,
}

/// Fix the sign of a vector so its first non-negligible entry is positive.
fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn to_faer(matrix: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(matrix.nrows(), matrix.ncols(), |i, j| matrix[(i, j)])
}

/// Full eigendecomposition of a dense symmetric matrix, ascending, with
/// sign-normalized eigenvectors.
pub fn dense_eigh(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = matrix.nrows();
    if n == 0 {
        return (Vec::new(), matrix);
    }
    let eig = to_faer(&matrix)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let (s, u) = (eig.S(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| s[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|r| u[(r, src)]).collect();
        normalize_sign(&mut col);
        vectors.set_column(dst, &DVector::from_vec(col));
    }
    (values, vectors)
}

/// Ascending eigenvalues of a dense symmetric matrix.
pub fn dense_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    if matrix.nrows() == 0 {
        return Vec::new();
    }
    let mut values = to_faer(matrix)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigenvalues of a finite matrix");
    values.sort_by(f64::total_cmp);
    values
}

pub fn dense_spectrum(op: &SparseOperator, with_vectors: bool, tol: f64) -> Result<SpectrumResult> {
    let dense = op.to_dense()?;
    let (eigenvalues, eigenvectors) = if with_vectors {
        let (values, vectors) = dense_eigh(dense);
        (values, Some(vectors))
    } else {
        (dense_eigenvalues(&dense), None)
    };
    let levels = group_levels(&eigenvalues, tol);
    Ok(SpectrumResult {
        eigenvalues,
        levels,
        eigenvectors,
        provenance: Provenance::Dense,
    })
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    /// Number of eigenvalues within the degeneracy tolerance of `energy`.
    pub multiplicity: usize,
    /// Energy of the next distinct level, when known.
    pub next_level: Option<f64>,
    pub residual: f64,
    pub provenance: Provenance,
    pub iterations: usize,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.multiplicity > 1
    }
}

fn residual_norm(op: &SparseOperator, energy: f64, v: &[f64]) -> f64 {
    let hv = op.matvec(v);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - energy * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Lowest eigenpair of a symmetric operator.
pub fn ground_state(op: &SparseOperator, opts: &SolverOptions) -> Result<GroundState> {
    if op.dim() == 0 {
        return Err(Error::DimensionMismatch("empty operator".into()));
    }
    match opts.solver.resolve(op.dim()) {
        Solver::Dense => {
            let (values, vectors) = dense_eigh(op.to_dense()?);
            let energy = values[0];
            let multiplicity = values
                .iter()
                .take_while(|e| **e - energy <= opts.degeneracy_tol)
                .count();
            let vector: Vec<f64> = vectors.column(0).iter().copied().collect();
            let residual = residual_norm(op, energy, &vector);
            Ok(GroundState {
                energy,
                next_level: values.get(multiplicity).copied(),
                vector,
                multiplicity,
                residual,
                provenance: Provenance::Dense,
                iterations: 0,
            })
        }
        _ => lanczos_ground_state(op, opts),
    }
}

/// Lowest few eigenvalues, ascending.
pub fn lowest_eigenvalues(op: &SparseOperator, count: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    let count = count.min(op.dim());
    match opts.solver.resolve(op.dim()) {
        Solver::Dense => {
            let mut values = dense_eigenvalues(&op.to_dense()?);
            values.truncate(count);
            Ok(values)
        }
        _ => {
            let mut found: Vec<Vec<f64>> = Vec::new();
            let mut values = Vec::new();
            for n in 0..count {
                let run = lanczos_lowest(op.dim(), |x, y| op.par_matvec(x, y), &found, opts, n as u64)?;
                values.push(run.value);
                found.push(run.vector);
            }
            Ok(values)
        }
    }
}

struct LanczosRun {
    value: f64,
    vector: Vec<f64>,
    iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(b, v);
        axpy(-c, b, v);
    }
}

/// Lanczos with full reorthogonalization and explicit restarts from the
/// current Ritz vector, on the complement of `deflate` (orthonormal vectors).
fn lanczos_lowest<F>(
    dim: usize,
    apply: F,
    deflate: &[Vec<f64>],
    opts: &SolverOptions,
    stream: u64,
) -> Result<LanczosRun>
where
    F: Fn(&[f64], &mut [f64]),
{
    let free_dim = dim - deflate.len();
    if free_dim == 0 {
        return Err(Error::DimensionMismatch("nothing left after deflation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();

    let memory_cap = (1usize << 26) / dim.max(1);
    let m_max = opts.krylov_dim.min(free_dim).min(memory_cap.max(8)).max(1);
    let mut total_iterations = 0;
    let mut scratch = vec![0.0; dim];

    for _restart in 0..=opts.max_restarts {
        project_out(&mut start, deflate);
        project_out(&mut start, deflate);
        if normalize(&mut start) == 0.0 {
            return Err(Error::NonConvergence("start vector vanished after deflation".into()));
        }
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz: Option<(f64, DVector<f64>)> = None;

        for j in 0..m_max {
            apply(&basis[j], &mut scratch);
            let mut w = scratch.clone();
            project_out(&mut w, deflate);
            let a = dot(&basis[j], &w);
            alphas.push(a);
            for _ in 0..2 {
                project_out(&mut w, &basis);
                project_out(&mut w, deflate);
            }
            let b = normalize(&mut w);
            total_iterations += 1;

            let size = j + 1;
            let last = size == m_max;
            let invariant = b < 1e-12 * a.abs().max(1.0);
            if size % 5 == 0 || last || invariant {
                let mut t = DMatrix::zeros(size, size);
                for i in 0..size {
                    t[(i, i)] = alphas[i];
                    if i + 1 < size {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let eig = SymmetricEigen::new(t);
                let idx = eig.eigenvalues.imin();
                let s: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
                let estimate = b * s[size - 1].abs();
                ritz = Some((eig.eigenvalues[idx], s));
                if invariant || last || estimate < 0.1 * opts.tol {
                    break;
                }
            }
            betas.push(b);
            basis.push(w);
        }

        let (_, s) = ritz.expect("at least one Ritz estimate");
        let mut vector = vec![0.0; dim];
        for (coef, v) in s.iter().zip(&basis) {
            axpy(*coef, v, &mut vector);
        }
        project_out(&mut vector, deflate);
        normalize(&mut vector);
        apply(&vector, &mut scratch);
        let mut hv = scratch.clone();
        project_out(&mut hv, deflate);
        let value_refined = dot(&vector, &hv);
        let residual = hv
            .iter()
            .zip(&vector)
            .map(|(h, v)| (h - value_refined * v).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= opts.tol {
            normalize_sign(&mut vector);
            return Ok(LanczosRun {
                value: value_refined,
                vector,
                iterations: total_iterations,
            });
        }
        start = vector;
    }
    Err(Error::NonConvergence(format!(
        "Lanczos did not reach residual {:e} after {} restarts",
        opts.tol, opts.max_restarts
    )))
}

/// Largest deflation depth used to count ground-state multiplicity.
const MAX_MULTIPLICITY_PROBE: usize = 8;

fn lanczos_ground_state(op: &SparseOperator, opts: &SolverOptions) -> Result<GroundState> {
    let apply = |x: &[f64], y: &mut [f64]| op.par_matvec(x, y);
    let ground = lanczos_lowest(op.dim(), apply, &[], opts, 0)?;
    let mut found = vec![ground.vector.clone()];
    let mut iterations = ground.iterations;
    let mut next_level = None;
    while found.len() < MAX_MULTIPLICITY_PROBE.min(op.dim()) {
        let run = lanczos_lowest(op.dim(), apply, &found, opts, found.len() as u64)?;
        iterations += run.iterations;
        if run.value - ground.value > opts.degeneracy_tol {
            next_level = Some(run.value);
            break;
        }
        found.push(run.vector);
    }
    Ok(GroundState {
        energy: ground.value,
        residual: residual_norm(op, ground.value, &ground.vector),
        vector: ground.vector,
        multiplicity: found.len(),
        next_level,
        provenance: Provenance::Lanczos,
        iterations,
    })
}

/// Largest absolute eigenvalue, from Lanczos runs on both spectral ends.
pub fn spectral_norm(op: &SparseOperator, opts: &SolverOptions) -> Result<f64> {
    let relaxed = SolverOptions {
        tol: 1e-8,
        ..*opts
    };
    let low = lanczos_lowest(op.dim(), |x, y| op.par_matvec(x, y), &[], &relaxed, 0)?;
    let high = lanczos_lowest(
        op.dim(),
        |x, y| {
            op.par_matvec(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        &[],
        &relaxed,
        1,
    )?;
    Ok(low.value.abs().max(high.value.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BasisTag;

    fn path_laplacian(n: usize) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseOperator::from_triplets(n, BasisTag::Full { k: 1, n_sites: 1 }, t).unwrap()
    }

    #[test]
    fn levels_group_within_tolerance() {
        let levels = group_levels(&[-1.0, -1.0 + 1e-13, 0.0, 0.5, 0.5], 1e-10);
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[0].multiplicity, 2);
        assert_eq!(levels[2].multiplicity, 2);
    }

    #[test]
    fn dense_and_lanczos_agree_on_path_laplacian() {
        let n = 300;
        let op = path_laplacian(n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let dense = ground_state(&op, &SolverOptions { solver: Solver::Dense, ..Default::default() }).unwrap();
        assert!((dense.energy - exact).abs() < 1e-12);
        let it = ground_state(&op, &SolverOptions { solver: Solver::Iterative, ..Default::default() }).unwrap();
        assert!((it.energy - exact).abs() < 1e-10);
        assert!(it.residual <= 1e-10);
        assert_eq!(it.multiplicity, 1);
        let fid = dot(&dense.vector, &it.vector).powi(2);
        assert!((1.0 - fid).abs() < 1e-9);
    }

    #[test]
    fn lanczos_is_seed_deterministic() {
        let op = path_laplacian(200);
        let opts = SolverOptions { solver: Solver::Iterative, seed: 7, ..Default::default() };
        let a = ground_state(&op, &opts).unwrap();
        let b = ground_state(&op, &opts).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert!(a.vector.iter().zip(&b.vector).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn lanczos_detects_degeneracy() {
        // Two uncoupled copies of the same chain.
        let n = 60;
        let mut t = Vec::new();
        for base in [0, n] {
            for i in 0..n {
                t.push((base + i, base + i, 2.0));
                if i + 1 < n {
                    t.push((base + i, base + i + 1, -1.0));
                    t.push((base + i + 1, base + i, -1.0));
                }
            }
        }
        let op = SparseOperator::from_triplets(2 * n, BasisTag::Full { k: 1, n_sites: 1 }, t).unwrap();
        let gs = ground_state(&op, &SolverOptions { solver: Solver::Iterative, ..Default::default() }).unwrap();
        assert_eq!(gs.multiplicity, 2);
        let gs = ground_state(&op, &SolverOptions { solver: Solver::Dense, ..Default::default() }).unwrap();
        assert_eq!(gs.multiplicity, 2);
    }

    #[test]
    fn lowest_eigenvalues_by_deflation() {
        let op = path_laplacian(80);
        let dense = lowest_eigenvalues(&op, 3, &SolverOptions { solver: Solver::Dense, ..Default::default() }).unwrap();
        let it = lowest_eigenvalues(&op, 3, &SolverOptions { solver: Solver::Iterative, ..Default::default() }).unwrap();
        for (a, b) in dense.iter().zip(&it) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_norm_of_path() {
        let op = path_laplacian(50);
        let exact = 2.0 - 2.0 * (50.0 * std::f64::consts::PI / 51.0).cos();
        assert!((spectral_norm(&op, &SolverOptions::default()).unwrap() - exact).abs() < 1e-7);
    }
}
