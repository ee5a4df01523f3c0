use std::sync::Arc;

use anyhow::Result;
use matryoshka::entanglement::{analytic_state_in, ground_state_of};
use matryoshka::eigen::lowest_eigenvalues;
use matryoshka::simplex_spectrum::{SpectrumVariant, VerificationReport, MAX_VERIFY_K};
use matryoshka::{
    embed_lattice, effective_flow, hamiltonian, offdiag_spectrum, perm_spectrum, schmidt,
    verify_against_ed, AnalyticSpectrum, Basis, Cut, Error, RGStepReport, SimplexLattice,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    EntropyArgs, Format, LatticeArgs, LogBase, RunConfig, SdrgArgs, SectorPolicy, SpectrumArgs,
};
use crate::output::{json_bytes, tuple, Cell, Table};

/// Finished output of one command.
pub struct Rendered {
    pub bytes: Vec<u8>,
    pub warnings: Vec<String>,
}

/// Map over sweep points on the worker pool, keeping input order and
/// reporting the first failure in input order.
fn sweep<T, R, F>(items: &[T], f: F) -> matryoshka::Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> matryoshka::Result<R> + Sync + Send,
{
    let results: Vec<matryoshka::Result<R>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

pub fn lattice(args: &LatticeArgs) -> Result<(RunConfig, Rendered)> {
    let cfg = RunConfig::new(args.k, args.layers, vec![args.alpha], &args.common, Format::Json)?;
    let lattice = cfg.lattices()?.remove(0);
    let warnings = lattice.warnings().to_vec();
    let bytes = match cfg.format {
        Format::Json => {
            let embedding = args.embed.then(|| embed_lattice(&lattice));
            json_bytes(&lattice.to_json(embedding.as_ref()))?
        }
        Format::Csv => {
            let mut table = Table::new(&["i", "j", "layer_i", "layer_j", "coupling"]);
            for b in lattice.bonds() {
                let layer = |id: usize| lattice.sites()[id - 1].layer;
                table.push(vec![b.i.into(), b.j.into(), layer(b.i).into(), layer(b.j).into(), b.coupling.into()]);
            }
            table.to_bytes()?
        }
    };
    Ok((cfg, Rendered { bytes, warnings }))
}

pub fn spectrum(args: &SpectrumArgs) -> Result<(RunConfig, Rendered)> {
    if args.simplex {
        simplex_table(args)
    } else {
        lattice_spectrum(args)
    }
}

fn simplex_table(args: &SpectrumArgs) -> Result<(RunConfig, Rendered)> {
    let cfg = RunConfig::new(args.k, 1, Vec::new(), &args.common, Format::Csv)?;
    let variant: SpectrumVariant = args.variant.into();
    let table = match variant {
        SpectrumVariant::Permutation => perm_spectrum(args.k)?,
        SpectrumVariant::OffDiagonal => offdiag_spectrum(args.k)?,
    };
    let verification = if !args.no_verify && args.k <= MAX_VERIFY_K {
        Some(verify_against_ed(args.k, variant)?)
    } else {
        None
    };
    let bytes = match cfg.format {
        Format::Json => json_bytes(&simplex_json(&table, verification.as_ref()))?,
        Format::Csv => {
            let offdiag = variant == SpectrumVariant::OffDiagonal;
            let mut csv = if offdiag {
                Table::new(&["diagram", "content", "eigenvalue", "degeneracy"])
            } else {
                Table::new(&["diagram", "eigenvalue", "degeneracy"])
            };
            for e in &table.entries {
                let mut row = vec![Cell::Text(e.diagram.to_string())];
                if offdiag {
                    row.push(e.content.as_deref().map_or(Cell::Empty, |c| tuple(c).into()));
                }
                row.push(e.eigenvalue.into());
                row.push(e.degeneracy.into());
                csv.push(row);
            }
            csv.to_bytes()?
        }
    };
    Ok((cfg, Rendered { bytes, warnings: Vec::new() }))
}

fn simplex_json(table: &AnalyticSpectrum, verification: Option<&VerificationReport>) -> Value {
    let entries: Vec<Value> = table
        .entries
        .iter()
        .map(|e| {
            json!({
                "diagram": e.diagram.rows(),
                "content": e.content,
                "eigenvalue": e.eigenvalue,
                "degeneracy": e.degeneracy,
            })
        })
        .collect();
    json!({
        "k": table.k,
        "variant": table.variant,
        "entries": entries,
        "total_degeneracy": table.total_degeneracy(),
        "verification": verification.map(|v| json!({
            "levels": v.numeric_levels,
            "max_deviation": v.max_deviation,
            "sectors_checked": v.sectors_checked,
        })),
    })
}

fn lattice_spectrum(args: &SpectrumArgs) -> Result<(RunConfig, Rendered)> {
    let layers = args
        .layers
        .ok_or_else(|| Error::ParameterDomain("--layers is required without --simplex".into()))?;
    let cfg = RunConfig::new(args.k, layers, args.alpha.clone(), &args.common, Format::Csv)?;
    if args.lowest == 0 {
        return Err(Error::ParameterDomain("--lowest must be >= 1".into()).into());
    }
    let lattices = cfg.lattices()?;
    let contents = SectorPolicy::parse(&args.sector)?.contents(cfg.k, lattices[0].num_sites())?;

    let runs = sweep(&lattices, |lattice| {
        let mut levels: Vec<(f64, &[usize])> = Vec::new();
        for content in &contents {
            let basis = Basis::sector(cfg.k, lattice.num_sites(), content)?;
            let h = hamiltonian(lattice, &basis)?;
            let values = lowest_eigenvalues(&h, args.lowest, &cfg.solver)?;
            levels.extend(values.into_iter().map(|v| (v, content.as_slice())));
        }
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels.truncate(args.lowest);
        Ok(levels)
    })?;

    let warnings = lattice_warnings(&lattices);
    let bytes = match cfg.format {
        Format::Json => {
            let items: Vec<Value> = lattices
                .iter()
                .zip(&runs)
                .map(|(lattice, levels)| {
                    json!({
                        "k": cfg.k,
                        "layers": cfg.layers,
                        "alpha": lattice.alpha(),
                        "levels": levels.iter().map(|(v, c)| json!({"eigenvalue": v, "content": c})).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json_bytes(&Value::Array(items))?
        }
        Format::Csv => {
            let mut table = Table::new(&["k", "layers", "alpha", "sector", "index", "eigenvalue"]);
            for (lattice, levels) in lattices.iter().zip(&runs) {
                for (i, (v, c)) in levels.iter().enumerate() {
                    table.push(vec![
                        cfg.k.into(),
                        cfg.layers.into(),
                        lattice.alpha().into(),
                        tuple(c).into(),
                        i.into(),
                        (*v).into(),
                    ]);
                }
            }
            table.to_bytes()?
        }
    };
    Ok((cfg, Rendered { bytes, warnings }))
}

fn lattice_warnings(lattices: &[SimplexLattice]) -> Vec<String> {
    lattices
        .iter()
        .flat_map(|l| l.warnings().iter().map(move |w| format!("alpha={}: {w}", l.alpha())))
        .collect()
}

pub fn sdrg(args: &SdrgArgs) -> Result<(RunConfig, Rendered)> {
    let cfg = RunConfig::new(args.k, args.layers, args.alpha.clone(), &args.common, Format::Json)?;
    let lattices = cfg.lattices()?;
    if cfg.layers < 2 {
        return Err(Error::ParameterDomain("sdrg needs at least two layers".into()).into());
    }
    if cfg.k > matryoshka::sdrg::MAX_STEP_K {
        return Err(Error::ParameterDomain(format!(
            "sdrg supports k <= {}, got {}",
            matryoshka::sdrg::MAX_STEP_K,
            cfg.k
        ))
        .into());
    }
    let flows: Vec<Vec<RGStepReport>> = sweep(&lattices, effective_flow)?;

    // Step reports already carry the lattice warnings of their layer.
    let warnings: Vec<String> = lattices
        .iter()
        .zip(&flows)
        .flat_map(|(l, steps)| {
            steps.iter().flat_map(move |s| {
                s.warnings
                    .iter()
                    .map(move |w| format!("alpha={}: {w}", l.alpha()))
            })
        })
        .collect();

    let bytes = match cfg.format {
        Format::Json => {
            let mut items = Vec::new();
            for (lattice, steps) in lattices.iter().zip(&flows) {
                for step in steps {
                    let mut value = json!({"k": cfg.k, "layers": cfg.layers, "alpha": lattice.alpha()});
                    if let (Value::Object(head), Value::Object(tail)) = (&mut value, serde_json::to_value(step)?) {
                        head.extend(tail);
                    }
                    items.push(value);
                }
            }
            json_bytes(&Value::Array(items))?
        }
        Format::Csv => {
            let mut table = Table::new(&[
                "k",
                "layers",
                "alpha",
                "layer",
                "J",
                "block_coupling",
                "J_tilde",
                "shift",
                "deviation",
                "ground_energy",
                "gap",
                "dasgupta_ma_ratio",
                "perturbative_ratio",
                "warnings",
            ]);
            for (lattice, steps) in lattices.iter().zip(&flows) {
                for s in steps {
                    table.push(vec![
                        cfg.k.into(),
                        cfg.layers.into(),
                        lattice.alpha().into(),
                        s.layer.into(),
                        s.coupling.into(),
                        s.block_coupling.into(),
                        s.j_tilde.into(),
                        s.shift.into(),
                        s.deviation.into(),
                        s.ground_energy.into(),
                        s.gap.into(),
                        s.dasgupta_ma_ratio.into(),
                        s.perturbative_ratio.into(),
                        s.warnings.join("; ").into(),
                    ]);
                }
            }
            table.to_bytes()?
        }
    };
    Ok((cfg, Rendered { bytes, warnings }))
}

struct EntropyRow {
    alpha: Option<f64>,
    cut: String,
    entropy: f64,
    schmidt_rank: usize,
    fidelity: Option<f64>,
    energy: Option<f64>,
}

pub fn entropy(args: &EntropyArgs) -> Result<(RunConfig, Rendered)> {
    let cfg = RunConfig::new(args.k, args.layers, args.alpha.clone(), &args.common, Format::Csv)?;
    // Validation pass: every lattice and cut before any state is built.
    let lattices = if args.analytic && cfg.alphas.is_empty() {
        if cfg.k < 1 || cfg.layers < 1 {
            return Err(Error::ParameterDomain("k and layers must be >= 1".into()).into());
        }
        Vec::new()
    } else {
        cfg.lattices()?
    };
    let cuts: Vec<Cut> = args
        .cuts
        .iter()
        .map(|c| Cut::parse(c, cfg.k, cfg.layers))
        .collect::<matryoshka::Result<_>>()?;
    let n_sites = (cfg.k + 1) * cfg.layers;
    let contents = SectorPolicy::Balanced.contents(cfg.k, n_sites)?;
    let scale = match args.base {
        LogBase::E => 1.0,
        LogBase::Colors => ((cfg.k + 1) as f64).ln(),
    };

    let rows_for = |state: &matryoshka::StateVector, alpha: Option<f64>, fidelity: Option<f64>, energy: Option<f64>| {
        cuts.iter()
            .map(|cut| {
                let r = schmidt(state, cut)?;
                Ok(EntropyRow {
                    alpha,
                    cut: cut.kind.to_string(),
                    entropy: r.entropy / scale,
                    schmidt_rank: r.schmidt_values.len(),
                    fidelity,
                    energy,
                })
            })
            .collect::<matryoshka::Result<Vec<EntropyRow>>>()
    };

    let runs: Vec<Vec<EntropyRow>> = if args.analytic {
        let basis = Arc::new(Basis::sector(cfg.k, n_sites, &contents[0])?);
        let state = analytic_state_in(cfg.k, cfg.layers, basis.clone())?;
        if lattices.is_empty() {
            vec![rows_for(&state, None, None, None)?]
        } else {
            sweep(&lattices, |lattice| {
                let energy = state.expectation(&hamiltonian(lattice, &basis)?)?;
                rows_for(&state, Some(lattice.alpha()), None, Some(energy))
            })?
        }
    } else {
        sweep(&lattices, |lattice| {
            let basis = Arc::new(Basis::sector(cfg.k, n_sites, &contents[0])?);
            let h = hamiltonian(lattice, &basis)?;
            let ground = ground_state_of(&h, basis.clone(), &cfg.solver)?;
            let state = ground.unique_state()?;
            let singlets = analytic_state_in(cfg.k, cfg.layers, basis)?;
            let f = matryoshka::fidelity(&singlets, state)?;
            rows_for(state, Some(lattice.alpha()), Some(f), Some(ground.energy))
        })?
    };
    let rows: Vec<EntropyRow> = runs.into_iter().flatten().collect();

    let base = match args.base {
        LogBase::E => "e",
        LogBase::Colors => "k+1",
    };
    let bytes = match cfg.format {
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "k": cfg.k,
                        "layers": cfg.layers,
                        "alpha": r.alpha,
                        "state": if args.analytic { "analytic" } else { "exact" },
                        "cut": r.cut,
                        "base": base,
                        "entropy": r.entropy,
                        "schmidt_rank": r.schmidt_rank,
                        "fidelity": r.fidelity,
                        "E0": r.energy,
                    })
                })
                .collect();
            json_bytes(&Value::Array(items))?
        }
        Format::Csv => {
            let mut table = Table::new(&["k", "layers", "alpha", "cut", "entropy", "fidelity", "E0"]);
            for r in &rows {
                table.push(vec![
                    cfg.k.into(),
                    cfg.layers.into(),
                    r.alpha.into(),
                    r.cut.clone().into(),
                    r.entropy.into(),
                    r.fidelity.into(),
                    r.energy.into(),
                ]);
            }
            table.to_bytes()?
        }
    };
    Ok((cfg, Rendered { bytes, warnings: lattice_warnings(&lattices) }))
}
