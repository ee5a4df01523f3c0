//! The nested k-simplex ("matryoshka") lattice.
//!
//! Layer `n` holds `k + 1` sites forming a regular k-simplex. Layer 1 is
//! fully connected with unit coupling. A site with local index `a` in layer
//! `n + 1` bonds to every layer-`n` site except the one with the same local
//! index, with coupling `sqrt((k+1)!) * alpha^(n - 1/2)`.
//!
//! Site ids are 1-based everywhere in the public interface:
//! site `(layer n, local a)` has id `(n - 1)(k + 1) + a`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub layer: usize,
    pub local: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexLattice {
    k: usize,
    layers: usize,
    alpha: f64,
    sites: Vec<Site>,
    bonds: Vec<Bond>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// Coupling between layers `n` and `n + 1` (1-based `n`).
pub fn inter_layer_coupling(k: usize, alpha: f64, n: usize) -> f64 {
    (factorial(k + 1) as f64).sqrt() * alpha.powf(n as f64 - 0.5)
}

/// Build the lattice. Sites are ascending by id; bonds are sorted by
/// `(min id, max id)` and stored with `i < j`.
pub fn build_lattice(k: usize, layers: usize, alpha: f64) -> Result<SimplexLattice> {
    if k < 1 {
        return Err(Error::ParameterDomain(format!("k must be >= 1, got {k}")));
    }
    if layers < 1 {
        return Err(Error::ParameterDomain(format!(
            "layers must be >= 1, got {layers}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    // (k+1)! must be representable for the coupling prefactor.
    if k > 19 {
        return Err(Error::ParameterDomain(format!("k = {k} is too large")));
    }

    let q = k + 1;
    let sites: Vec<Site> = (1..=layers)
        .flat_map(|layer| {
            (1..=q).map(move |local| Site {
                id: (layer - 1) * q + local,
                layer,
                local,
            })
        })
        .collect();

    let mut bonds = Vec::with_capacity(q * (q - 1) / 2 + (layers - 1) * q * k);
    for a in 1..=q {
        for b in (a + 1)..=q {
            bonds.push(Bond {
                i: a,
                j: b,
                coupling: 1.0,
            });
        }
    }
    for n in 1..layers {
        let coupling = inter_layer_coupling(k, alpha, n);
        for a in 1..=q {
            let outer = n * q + a;
            for b in (1..=q).filter(|&b| b != a) {
                let inner = (n - 1) * q + b;
                bonds.push(Bond {
                    i: inner,
                    j: outer,
                    coupling,
                });
            }
        }
    }
    bonds.sort_by_key(|b| (b.i, b.j));

    let mut warnings = Vec::new();
    // alpha = 1/(k+1)! makes the first inter-layer coupling equal to the
    // layer-1 coupling; beyond it the layers are no longer separated in energy.
    let threshold = 1.0 / factorial(q) as f64;
    if layers > 1 && alpha >= threshold {
        warnings.push(format!(
            "alpha = {alpha} >= 1/(k+1)! = {threshold}: inter-layer coupling J1 >= J0, \
             strong-inhomogeneity expansion is not controlled"
        ));
    }

    Ok(SimplexLattice {
        k,
        layers,
        alpha,
        sites,
        bonds,
        warnings,
    })
}

impl SimplexLattice {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Local Hilbert-space dimension `k + 1`.
    pub fn colors(&self) -> usize {
        self.k + 1
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn site_id(&self, layer: usize, local: usize) -> usize {
        (layer - 1) * self.colors() + local
    }

    /// Site ids of layer `n` (1-based), ascending.
    pub fn layer_sites(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        let q = self.colors();
        ((n - 1) * q + 1)..=(n * q)
    }

    /// Coupling between layers `n` and `n + 1`.
    pub fn coupling(&self, n: usize) -> f64 {
        inter_layer_coupling(self.k, self.alpha, n)
    }

    /// Bonds joining layers `n` and `n + 1`.
    pub fn bonds_between(&self, n: usize) -> impl Iterator<Item = &Bond> + '_ {
        let lo = self.layer_sites(n);
        let hi = self.layer_sites(n + 1);
        self.bonds
            .iter()
            .filter(move |b| lo.contains(&b.i) && hi.contains(&b.j))
    }

    pub fn is_intra_layer(&self, bond: &Bond) -> bool {
        self.sites[bond.i - 1].layer == self.sites[bond.j - 1].layer
    }

    pub fn to_json(&self, embedding: Option<&Embedding>) -> serde_json::Value {
        let mut value = serde_json::json!({
            "k": self.k,
            "layers": self.layers,
            "alpha": self.alpha,
            "sites": self.sites,
            "bonds": self.bonds,
        });
        if !self.warnings.is_empty() {
            value["warnings"] = serde_json::json!(self.warnings);
        }
        if let Some(embedding) = embedding {
            let coords: BTreeMap<usize, &Vec<f64>> = embedding
                .coordinates
                .iter()
                .enumerate()
                .map(|(idx, x)| (idx + 1, x))
                .collect();
            value["embedding"] = serde_json::json!(coords);
        }
        value
    }
}

/// Coordinates of every site in `R^k`, indexed by `site id - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub k: usize,
    pub coordinates: Vec<Vec<f64>>,
}

impl Embedding {
    pub fn position(&self, site_id: usize) -> &[f64] {
        &self.coordinates[site_id - 1]
    }
}

/// Vertices of a regular k-simplex centered at the origin with unit
/// circumradius, from the Helmert basis of the hyperplane `sum x = 0`.
fn unit_simplex(k: usize) -> Vec<Vec<f64>> {
    let q = k + 1;
    let scale = (q as f64 / k as f64).sqrt();
    (0..q)
        .map(|a| {
            (1..=k)
                .map(|m| {
                    let norm = ((m * (m + 1)) as f64).sqrt();
                    let entry = if a < m {
                        1.0
                    } else if a == m {
                        -(m as f64)
                    } else {
                        0.0
                    };
                    scale * entry / norm
                })
                .collect()
        })
        .collect()
}

/// Place layer 1 on the unit-circumradius simplex and scale each further
/// layer by `-k`. Layer-`n` vertex `b` then sits on the centroid of the
/// layer-`(n+1)` facet opposite vertex `b`, which is exactly the set of
/// sites it bonds to.
pub fn embed_lattice(lattice: &SimplexLattice) -> Embedding {
    let k = lattice.k();
    let base = unit_simplex(k);
    let coordinates = lattice
        .sites()
        .iter()
        .map(|site| {
            let factor = (-(k as f64)).powi(site.layer as i32 - 1);
            base[site.local - 1].iter().map(|x| factor * x).collect()
        })
        .collect();
    Embedding { k, coordinates }
}
