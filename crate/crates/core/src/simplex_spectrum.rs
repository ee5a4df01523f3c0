//! Analytic spectrum of `S_{k+1}`-symmetric Hamiltonians on one k-simplex.
//!
//! The sum of all transpositions is central in the group algebra, so it acts
//! as a scalar on each irreducible: for a Young diagram `lambda` the scalar
//! is `1/2 (sum_rows l(l-1) - sum_cols l(l-1))`. By Schur-Weyl duality the
//! irreducible `lambda` appears in `(C^{k+1})^{(k+1)}` with multiplicity
//! `f^lambda * dim_GL(lambda)`.
//!
//! Dropping the diagonal (equal-color) part of each transposition shifts
//! every state of color content `mu` by `-sum_i C(mu_i, 2)` without changing
//! eigenvectors, since the eigenvectors never mix contents. Within content
//! `mu` the irreducible `lambda` contributes `f^lambda * K_{lambda,mu}` states.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::eigen::Provenance;
use crate::error::{Error, Result};
use crate::hilbert::{
    all_contents, exchange_sum, permutation_hamiltonian, simplex_terms, Basis, SparseOperator,
};
use crate::{binomial, factorial};

/// Largest `k` for which the analytic tables are produced.
pub const MAX_ANALYTIC_K: usize = 6;
/// Largest `k` for the dense cross-check.
pub const MAX_VERIFY_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YoungDiagram {
    rows: Vec<usize>,
}

impl YoungDiagram {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || rows.contains(&0) || rows.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::ParameterDomain(format!(
                "{rows:?} is not a partition (positive, weakly decreasing rows)"
            )));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn size(&self) -> usize {
        self.rows.iter().sum()
    }

    /// Column lengths (the conjugate partition).
    pub fn columns(&self) -> Vec<usize> {
        (0..self.rows[0])
            .map(|j| self.rows.iter().take_while(|&&r| r > j).count())
            .collect()
    }

    fn boxes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, &len)| (0..len).map(move |j| (i, j)))
    }

    pub fn hook_length(&self, i: usize, j: usize) -> usize {
        let cols = self.columns();
        (self.rows[i] - j) + (cols[j] - i) - 1
    }

    /// Number of standard Young tableaux, by the hook-length formula.
    pub fn standard_tableau_count(&self) -> u64 {
        let cols = self.columns();
        let hooks: u128 = self
            .boxes()
            .map(|(i, j)| ((self.rows[i] - j) + (cols[j] - i) - 1) as u128)
            .product();
        (factorial(self.size()) as u128 / hooks) as u64
    }

    /// Dimension of the `GL(d)` irreducible, by the hook-content formula.
    /// Zero when the diagram has more than `d` rows.
    pub fn gl_dimension(&self, d: usize) -> u64 {
        if self.rows.len() > d {
            return 0;
        }
        let cols = self.columns();
        let (num, den) = self.boxes().fold((1u128, 1u128), |(n, h), (i, j)| {
            let hook = (self.rows[i] - j) + (cols[j] - i) - 1;
            (n * (d + j - i) as u128, h * hook as u128)
        });
        (num / den) as u64
    }

    /// Sum of box contents `col - row`.
    pub fn content_sum(&self) -> i64 {
        self.boxes().map(|(i, j)| j as i64 - i as i64).sum()
    }
}

impl fmt::Display for YoungDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rows.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Partitions of `n` in descending lexicographic order.
pub fn partitions(n: usize) -> Vec<YoungDiagram> {
    fn rec(remaining: usize, max: usize, prefix: &mut Vec<usize>, out: &mut Vec<YoungDiagram>) {
        if remaining == 0 {
            out.push(YoungDiagram { rows: prefix.clone() });
            return;
        }
        for part in (1..=remaining.min(max)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, n, &mut Vec::new(), &mut out);
    }
    out
}

/// Kostka number: semistandard tableaux of shape `lambda` whose entry `v`
/// appears `weight[v]` times. `weight` may be any composition.
pub fn kostka(lambda: &YoungDiagram, weight: &[usize]) -> u64 {
    if weight.iter().sum::<usize>() != lambda.size() {
        return 0;
    }
    // Entries equal to v form a horizontal strip; grow the shape strip by strip.
    fn grow(shape: &[usize], target: &[usize], weight: &[usize]) -> u64 {
        let Some((&w, rest)) = weight.split_first() else {
            return u64::from(shape == target);
        };
        let mut total = 0;
        let mut next = shape.to_vec();
        fn place(
            row: usize,
            left: usize,
            shape: &[usize],
            target: &[usize],
            next: &mut Vec<usize>,
            rest: &[usize],
        ) -> u64 {
            if row == target.len() {
                return if left == 0 { grow(next, target, rest) } else { 0 };
            }
            let cap = if row == 0 {
                target[0]
            } else {
                target[row].min(shape[row - 1])
            };
            let mut total = 0;
            for add in 0..=left.min(cap.saturating_sub(shape[row])) {
                next[row] = shape[row] + add;
                total += place(row + 1, left - add, shape, target, next, rest);
            }
            next[row] = shape[row];
            total
        }
        total += place(0, w, shape, target, &mut next, rest);
        total
    }
    let empty = vec![0; lambda.rows.len()];
    grow(&empty, &lambda.rows, weight)
}

/// Eigenvalue of the transposition sum on the irreducible `lambda`.
pub fn perm_eigenvalue(diagram: &YoungDiagram) -> f64 {
    let pairs = |l: usize| (l * l.saturating_sub(1)) as i64;
    let rows: i64 = diagram.rows.iter().map(|&l| pairs(l)).sum();
    let cols: i64 = diagram.columns().into_iter().map(pairs).sum();
    ((rows - cols) / 2) as f64
}

fn check_shape(diagram: &YoungDiagram, k: usize) -> Result<()> {
    if diagram.size() != k + 1 {
        return Err(Error::ParameterDomain(format!(
            "diagram {diagram} is not a partition of k + 1 = {}",
            k + 1
        )));
    }
    Ok(())
}

/// Multiplicity of `lambda` in the single-simplex permutation Hamiltonian.
pub fn perm_degeneracy(diagram: &YoungDiagram, k: usize) -> Result<u64> {
    check_shape(diagram, k)?;
    Ok(diagram.standard_tableau_count() * diagram.gl_dimension(k + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumVariant {
    /// Sum of transpositions.
    Permutation,
    /// Pure color exchange (equal-color diagonal removed).
    OffDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub diagram: YoungDiagram,
    /// Color-content pattern (a partition of k + 1), off-diagonal variant only.
    pub content: Option<Vec<usize>>,
    pub eigenvalue: f64,
    pub degeneracy: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpectrum {
    pub k: usize,
    pub variant: SpectrumVariant,
    pub entries: Vec<SpectrumEntry>,
    pub provenance: Provenance,
}

impl AnalyticSpectrum {
    pub fn total_degeneracy(&self) -> u64 {
        self.entries.iter().map(|e| e.degeneracy).sum()
    }

    /// `(eigenvalue, total degeneracy)`, ascending.
    pub fn levels(&self) -> Vec<(f64, u64)> {
        let mut map: BTreeMap<i64, u64> = BTreeMap::new();
        for e in &self.entries {
            *map.entry(e.eigenvalue as i64).or_default() += e.degeneracy;
        }
        map.into_iter().map(|(e, d)| (e as f64, d)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.eigenvalue * e.degeneracy as f64)
            .sum()
    }
}

fn check_analytic_k(k: usize) -> Result<()> {
    if !(1..=MAX_ANALYTIC_K).contains(&k) {
        return Err(Error::ParameterDomain(format!(
            "analytic spectrum supports 1 <= k <= {MAX_ANALYTIC_K}, got {k}"
        )));
    }
    Ok(())
}

pub fn perm_spectrum(k: usize) -> Result<AnalyticSpectrum> {
    check_analytic_k(k)?;
    let entries = partitions(k + 1)
        .into_iter()
        .rev()
        .map(|diagram| {
            let degeneracy = perm_degeneracy(&diagram, k)?;
            Ok(SpectrumEntry {
                eigenvalue: perm_eigenvalue(&diagram),
                diagram,
                content: None,
                degeneracy,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AnalyticSpectrum {
        k,
        variant: SpectrumVariant::Permutation,
        entries,
        provenance: Provenance::Analytic,
    })
}

/// `sum_i C(mu_i, 2)`: equal-color pairs of any configuration with content `mu`.
pub fn pair_count(content: &[usize]) -> u64 {
    content.iter().map(|&n| binomial(n, 2)).sum()
}

/// Number of color assignments `(n_0..n_k)` whose nonzero counts, sorted,
/// equal the partition `mu`.
fn realizations(mu: &[usize], colors: usize) -> u64 {
    let mut multiplicity: BTreeMap<usize, usize> = BTreeMap::new();
    for &part in mu {
        *multiplicity.entry(part).or_default() += 1;
    }
    *multiplicity.entry(0).or_default() += colors - mu.len();
    multiplicity
        .values()
        .fold(factorial(colors), |acc, &m| acc / factorial(m))
}

pub fn offdiag_spectrum(k: usize) -> Result<AnalyticSpectrum> {
    check_analytic_k(k)?;
    let n = k + 1;
    let mut entries = Vec::new();
    for diagram in partitions(n).into_iter().rev() {
        let f = diagram.standard_tableau_count();
        for mu in partitions(n) {
            let kostka = kostka(&diagram, mu.rows());
            if kostka == 0 {
                continue;
            }
            entries.push(SpectrumEntry {
                eigenvalue: perm_eigenvalue(&diagram) - pair_count(mu.rows()) as f64,
                degeneracy: f * kostka * realizations(mu.rows(), n),
                content: Some(mu.rows().to_vec()),
                diagram: diagram.clone(),
            });
        }
    }
    Ok(AnalyticSpectrum {
        k,
        variant: SpectrumVariant::OffDiagonal,
        entries,
        provenance: Provenance::Analytic,
    })
}

/// Outcome of comparing dense diagonalization against the analytic tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub k: usize,
    pub variant: SpectrumVariant,
    /// `(eigenvalue, multiplicity)` from dense diagonalization, ascending.
    pub numeric_levels: Vec<(f64, u64)>,
    pub analytic_levels: Vec<(f64, u64)>,
    /// Largest distance of a numeric eigenvalue from its integer level.
    pub max_deviation: f64,
    pub sectors_checked: usize,
}

/// Single-simplex operator of the given variant on `basis`.
pub fn simplex_operator(k: usize, variant: SpectrumVariant, basis: &Basis) -> Result<SparseOperator> {
    match variant {
        SpectrumVariant::Permutation => permutation_hamiltonian(k, basis),
        SpectrumVariant::OffDiagonal => {
            let sites: Vec<usize> = (1..=k + 1).collect();
            exchange_sum(basis, &simplex_terms(&sites, 1.0))
        }
    }
}

/// Diagonalize both variants sector by sector and compare every sector's
/// spectrum with the Young-diagram prediction for that content.
pub fn verify_against_ed(k: usize, variant: SpectrumVariant) -> Result<VerificationReport> {
    if !(1..=MAX_VERIFY_K).contains(&k) {
        return Err(Error::ParameterDomain(format!(
            "dense verification supports 1 <= k <= {MAX_VERIFY_K}, got {k}"
        )));
    }
    const TOL: f64 = 1e-10;
    let n = k + 1;
    let diagrams = partitions(n);
    let mut numeric_total: BTreeMap<i64, u64> = BTreeMap::new();
    let mut max_deviation = 0.0f64;
    let contents = all_contents(k, n);

    for content in &contents {
        let basis = Basis::sector(k, n, content)?;
        let op = simplex_operator(k, variant, &basis)?;
        let values = op.to_dense()?.symmetric_eigenvalues();
        let mut numeric: BTreeMap<i64, u64> = BTreeMap::new();
        for &e in values.iter() {
            let level = e.round();
            let deviation = (e - level).abs();
            max_deviation = max_deviation.max(deviation);
            if deviation > TOL {
                return Err(Error::Verification(format!(
                    "content {content:?}: eigenvalue {e} is not within {TOL:e} of an integer"
                )));
            }
            *numeric.entry(level as i64).or_default() += 1;
        }

        let shift = match variant {
            SpectrumVariant::Permutation => 0,
            SpectrumVariant::OffDiagonal => pair_count(content) as i64,
        };
        let mut predicted: BTreeMap<i64, u64> = BTreeMap::new();
        let mut owners: BTreeMap<i64, Vec<String>> = BTreeMap::new();
        for diagram in &diagrams {
            let kostka = kostka(diagram, content);
            if kostka == 0 {
                continue;
            }
            let level = perm_eigenvalue(diagram) as i64 - shift;
            *predicted.entry(level).or_default() += diagram.standard_tableau_count() * kostka;
            owners.entry(level).or_default().push(diagram.to_string());
        }
        if numeric != predicted {
            let mut mu = content.clone();
            mu.sort_unstable_by(|a, b| b.cmp(a));
            mu.retain(|&p| p > 0);
            let level = numeric
                .keys()
                .chain(predicted.keys())
                .find(|e| numeric.get(e) != predicted.get(e))
                .copied()
                .unwrap_or_default();
            return Err(Error::Verification(format!(
                "lambda {:?}, mu {mu:?}: eigenvalue {level} has multiplicity {} numerically, {} analytically",
                owners.get(&level).cloned().unwrap_or_default(),
                numeric.get(&level).copied().unwrap_or(0),
                predicted.get(&level).copied().unwrap_or(0),
            )));
        }
        for (e, m) in numeric {
            *numeric_total.entry(e).or_default() += m;
        }
    }

    let analytic = match variant {
        SpectrumVariant::Permutation => perm_spectrum(k)?,
        SpectrumVariant::OffDiagonal => offdiag_spectrum(k)?,
    };
    let numeric_levels: Vec<(f64, u64)> = numeric_total.into_iter().map(|(e, m)| (e as f64, m)).collect();
    let analytic_levels = analytic.levels();
    if numeric_levels != analytic_levels {
        return Err(Error::Verification(format!(
            "aggregated levels differ: numeric {numeric_levels:?}, analytic {analytic_levels:?}"
        )));
    }
    Ok(VerificationReport {
        k,
        variant,
        numeric_levels,
        analytic_levels,
        max_deviation,
        sectors_checked: contents.len(),
    })
}

/// A filling of a Young diagram by the site labels `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tableau {
    pub rows: Vec<Vec<usize>>,
}

impl Tableau {
    pub fn shape(&self) -> YoungDiagram {
        YoungDiagram {
            rows: self.rows.iter().map(Vec::len).collect(),
        }
    }

    fn columns(&self) -> Vec<Vec<usize>> {
        (0..self.rows[0].len())
            .map(|j| self.rows.iter().filter_map(|r| r.get(j).copied()).collect())
            .collect()
    }
}

/// Standard tableaux of a shape, built by placing `1, 2, ..` on outer corners.
pub fn standard_tableaux(diagram: &YoungDiagram) -> Vec<Tableau> {
    fn rec(target: &[usize], rows: &mut Vec<Vec<usize>>, next: usize, out: &mut Vec<Tableau>) {
        if rows.iter().zip(target).all(|(r, &t)| r.len() == t) {
            out.push(Tableau { rows: rows.clone() });
            return;
        }
        for i in 0..target.len() {
            let len = rows[i].len();
            if len < target[i] && (i == 0 || rows[i - 1].len() > len) {
                rows[i].push(next);
                rec(target, rows, next + 1, out);
                rows[i].pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&diagram.rows, &mut vec![Vec::new(); diagram.rows.len()], 1, &mut out);
    out
}

fn permutations_preserving(n: usize, blocks: &[Vec<usize>]) -> Vec<(Vec<usize>, i32)> {
    // Product of the symmetric groups on each block; entries are 1-based sites.
    let mut group = vec![((0..n).collect::<Vec<usize>>(), 1i32)];
    for block in blocks {
        let mut next = Vec::new();
        for (perm, sign) in &group {
            for (arrangement, s) in block_permutations(block.len()) {
                let mut p = perm.clone();
                for (from, &to) in arrangement.iter().enumerate() {
                    p[block[from] - 1] = block[to] - 1;
                }
                next.push((p, sign * s));
            }
        }
        group = next;
    }
    group
}

fn block_permutations(m: usize) -> Vec<(Vec<usize>, i32)> {
    fn rec(items: &mut Vec<usize>, start: usize, sign: i32, out: &mut Vec<(Vec<usize>, i32)>) {
        if start == items.len() {
            out.push((items.clone(), sign));
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            rec(items, start + 1, if i == start { sign } else { -sign }, out);
            items.swap(start, i);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..m).collect(), 0, 1, &mut out);
    out
}

/// `Y_tau |colors>` with `Y = Q P` (column antisymmetrizer after row
/// symmetrizer), as sparse amplitudes on the full basis of `n` sites.
/// Limited to `n <= 4`.
pub fn young_vector(tableau: &Tableau, colors: &[usize], k: usize) -> Result<BTreeMap<u64, f64>> {
    let n = tableau.shape().size();
    if n > 4 || colors.len() != n || colors.iter().any(|&c| c > k) {
        return Err(Error::ParameterDomain(
            "Young operators are generated for at most 4 sites with colors 0..=k".into(),
        ));
    }
    let space = crate::hilbert::ConfigSpace::new(k, n)?;
    let row_group = permutations_preserving(n, &tableau.rows);
    let col_group = permutations_preserving(n, &tableau.columns());
    let act = |perm: &[usize], config: &[usize]| {
        let mut out = vec![0; n];
        for (s, &c) in config.iter().enumerate() {
            out[perm[s]] = c;
        }
        out
    };
    let mut out: BTreeMap<u64, f64> = BTreeMap::new();
    for (p, _) in &row_group {
        let symmetrized = act(p, colors);
        for (q, sign) in &col_group {
            *out.entry(space.encode(&act(q, &symmetrized))).or_default() += *sign as f64;
        }
    }
    out.retain(|_, v| *v != 0.0);
    Ok(out)
}
