use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multinomial;

/// Largest full basis that may be materialized.
pub const FULL_BASIS_CAP: u64 = 1 << 24;
/// Largest sector that may be enumerated.
pub const SECTOR_CAP: u64 = 1 << 24;

/// Base-`(k+1)` encoding of color strings. Site 0 is the most significant
/// digit, so ascending codes list color strings in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSpace {
    colors: usize,
    place: Vec<u64>,
}

impl ConfigSpace {
    pub fn new(k: usize, n_sites: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::ParameterDomain(format!("k must be >= 1, got {k}")));
        }
        if n_sites == 0 {
            return Err(Error::ParameterDomain("need at least one site".into()));
        }
        let colors = k + 1;
        (colors as u64).checked_pow(n_sites as u32).ok_or_else(|| {
            Error::CapExceeded(format!(
                "{colors}^{n_sites} configurations do not fit in a 64-bit code"
            ))
        })?;
        let mut place = vec![1u64; n_sites];
        for s in (0..n_sites - 1).rev() {
            place[s] = place[s + 1] * colors as u64;
        }
        Ok(Self { colors, place })
    }

    pub fn k(&self) -> usize {
        self.colors - 1
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn n_sites(&self) -> usize {
        self.place.len()
    }

    /// `(k+1)^n_sites`.
    pub fn size(&self) -> u64 {
        self.place[0] * self.colors as u64
    }

    /// Color on 0-based `site`.
    #[inline]
    pub fn color(&self, code: u64, site: usize) -> usize {
        ((code / self.place[site]) % self.colors as u64) as usize
    }

    pub fn decode(&self, code: u64) -> Vec<usize> {
        (0..self.n_sites()).map(|s| self.color(code, s)).collect()
    }

    pub fn encode(&self, colors: &[usize]) -> u64 {
        debug_assert_eq!(colors.len(), self.n_sites());
        colors
            .iter()
            .zip(&self.place)
            .map(|(&c, &p)| c as u64 * p)
            .sum()
    }

    /// Exchange the colors of 0-based sites `i` and `j`; `None` if equal.
    #[inline]
    pub fn swap(&self, code: u64, i: usize, j: usize) -> Option<u64> {
        let ci = self.color(code, i) as u64;
        let cj = self.color(code, j) as u64;
        if ci == cj {
            return None;
        }
        Some(code - ci * self.place[i] - cj * self.place[j] + cj * self.place[i] + ci * self.place[j])
    }

    pub fn content(&self, code: u64) -> Vec<usize> {
        let mut counts = vec![0; self.colors];
        for s in 0..self.n_sites() {
            counts[self.color(code, s)] += 1;
        }
        counts
    }
}

/// Every color configuration with a fixed color content, ascending by code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    space: ConfigSpace,
    content: Vec<usize>,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn enumerate(k: usize, n_sites: usize, content: &[usize]) -> Result<Self> {
        let space = ConfigSpace::new(k, n_sites)?;
        if content.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "content has {} entries, expected k + 1 = {}",
                content.len(),
                k + 1
            )));
        }
        if content.iter().sum::<usize>() != n_sites {
            return Err(Error::ContentMismatch {
                content: content.to_vec(),
                n_sites,
            });
        }
        let size = multinomial(content);
        if size > SECTOR_CAP as u128 {
            return Err(Error::CapExceeded(format!(
                "sector {content:?} has {size} states (cap {SECTOR_CAP})"
            )));
        }

        let mut digits: Vec<usize> = content
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let mut states = Vec::with_capacity(size as usize);
        loop {
            states.push(space.encode(&digits));
            if !next_permutation(&mut digits) {
                break;
            }
        }
        debug_assert_eq!(states.len() as u128, size);
        Ok(Self {
            space,
            content: content.to_vec(),
            states,
        })
    }

    /// The sector with every color appearing `n_sites / (k+1)` times.
    pub fn balanced(k: usize, n_sites: usize) -> Result<Self> {
        let q = k + 1;
        if n_sites % q != 0 {
            return Err(Error::ParameterDomain(format!(
                "{n_sites} sites cannot be split evenly among {q} colors"
            )));
        }
        Self::enumerate(k, n_sites, &vec![n_sites / q; q])
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn content(&self) -> &[usize] {
        &self.content
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }
}

/// Lexicographic successor; false once the sequence is descending.
fn next_permutation(xs: &mut [usize]) -> bool {
    let Some(i) = xs.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = xs.iter().rposition(|&x| x > xs[i]).unwrap();
    xs.swap(i, j);
    xs[i + 1..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisTag {
    Full { k: usize, n_sites: usize },
    Sector { k: usize, n_sites: usize, content: Vec<usize> },
}

/// Either the full product basis or a fixed-content sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Basis {
    Full(ConfigSpace),
    Sector(SectorBasis),
}

impl Basis {
    pub fn full(k: usize, n_sites: usize) -> Result<Self> {
        let space = ConfigSpace::new(k, n_sites)?;
        if space.size() > FULL_BASIS_CAP {
            return Err(Error::CapExceeded(format!(
                "full basis of {} states exceeds cap {FULL_BASIS_CAP}; use a sector basis",
                space.size()
            )));
        }
        Ok(Basis::Full(space))
    }

    pub fn sector(k: usize, n_sites: usize, content: &[usize]) -> Result<Self> {
        Ok(Basis::Sector(SectorBasis::enumerate(k, n_sites, content)?))
    }

    pub fn space(&self) -> &ConfigSpace {
        match self {
            Basis::Full(space) => space,
            Basis::Sector(sector) => sector.space(),
        }
    }

    pub fn k(&self) -> usize {
        self.space().k()
    }

    pub fn n_sites(&self) -> usize {
        self.space().n_sites()
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full(space) => space.size() as usize,
            Basis::Sector(sector) => sector.states.len(),
        }
    }

    #[inline]
    pub fn code(&self, index: usize) -> u64 {
        match self {
            Basis::Full(_) => index as u64,
            Basis::Sector(sector) => sector.states[index],
        }
    }

    #[inline]
    pub fn index_of(&self, code: u64) -> Option<usize> {
        match self {
            Basis::Full(space) => (code < space.size()).then_some(code as usize),
            Basis::Sector(sector) => sector.states.binary_search(&code).ok(),
        }
    }

    pub fn tag(&self) -> BasisTag {
        match self {
            Basis::Full(space) => BasisTag::Full {
                k: space.k(),
                n_sites: space.n_sites(),
            },
            Basis::Sector(sector) => BasisTag::Sector {
                k: sector.space.k(),
                n_sites: sector.space.n_sites(),
                content: sector.content.clone(),
            },
        }
    }
}

/// All color contents of `n_sites` sites over `k + 1` colors, in
/// lexicographically descending order of the count vector.
pub fn all_contents(k: usize, n_sites: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in (0..=remaining).rev() {
            prefix.push(n);
            rec(remaining - n, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n_sites, k + 1, &mut Vec::new(), &mut out);
    out
}
