//! Bundled example systems and the named-model registry.
//!
//! Four builtins cover the code paths that matter:
//!
//! * `two_level`: coupling matrix `[[0,1],[1,0]]` started in the first basis
//!   state. Everything about it is known in closed form, which makes it the
//!   anchor for the frozen-value tests (weight `cos(t/2)^2`, rate `tan(t/2)`,
//!   first node at `pi`).
//! * `bell_lattice`: bosons on an open chain with nearest-neighbour hopping
//!   `sqrt(n)` amplitudes and an on-site creation/annihilation drive that
//!   breaks particle-number conservation. Labels are occupation tuples.
//! * `random_hermitian`: seeded dense generator with entries scaled by
//!   `1/sqrt(dim)`, uniform initial superposition. No structure, many labels.
//! * `compressed_povm`: a standard basis measurement in a larger space pushed
//!   through a seeded isometry, giving a dense POVM with more outcomes than
//!   dimensions.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{povm_from_compression, HermitianOperator, Povm, StateVector};
use crate::io::{self, ModelParts, RawModel};
use crate::rates::RateContext;
use crate::rng::{normal_pair, trajectory_rng};

/// Hard cap on configuration-space size for generated lattices.
pub const MAX_CONFIGS: usize = 2000;

/// A complete system: generator, measurement, initial state, plus optional
/// closed-form annotations for reports.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub hamiltonian: HermitianOperator,
    pub povm: Povm,
    pub psi0: StateVector,
    pub closed_forms: BTreeMap<String, String>,
}

impl ModelSpec {
    pub fn context(&self, node_epsilon: f64) -> Result<RateContext> {
        RateContext::new(
            self.hamiltonian.clone(),
            self.povm.clone(),
            self.psi0.clone(),
            node_epsilon,
        )
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel::from_parts(&ModelParts {
            name: Some(self.name.clone()),
            hamiltonian: self.hamiltonian.clone(),
            povm: self.povm.clone(),
            psi0: self.psi0.clone(),
            closed_forms: self.closed_forms.clone(),
        })
    }

    pub fn from_raw(raw: &RawModel) -> Result<Self> {
        let parts = raw.build()?;
        Ok(ModelSpec {
            name: parts.name.unwrap_or_else(|| "unnamed".to_string()),
            hamiltonian: parts.hamiltonian,
            povm: parts.povm,
            psi0: parts.psi0,
            closed_forms: parts.closed_forms,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_raw(&io::read_model_file(path)?)
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Two labels, symmetric coupling, started in label 0.
pub fn two_level() -> ModelSpec {
    let h = HermitianOperator::new(DMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
    ))
    .expect("hardcoded matrix is Hermitian");
    let mut closed_forms = BTreeMap::new();
    closed_forms.insert("weight:0".to_string(), "cos(t/2)^2".to_string());
    closed_forms.insert("weight:1".to_string(), "sin(t/2)^2".to_string());
    closed_forms.insert("rate:0->1".to_string(), "tan(t/2) on (0, pi)".to_string());
    closed_forms.insert("rate:1->0".to_string(), "0 on (0, pi)".to_string());
    closed_forms.insert(
        "cumulative_hazard:0".to_string(),
        "-2 ln cos(t/2)".to_string(),
    );
    closed_forms.insert(
        "holding_cdf:0".to_string(),
        "sin(t/2)^2 on [0, pi]".to_string(),
    );
    closed_forms.insert("first_node:0".to_string(), "pi".to_string());
    ModelSpec {
        name: "two_level".to_string(),
        hamiltonian: h,
        povm: Povm::standard_basis(2),
        psi0: StateVector::basis_state(2, 0),
        closed_forms,
    }
}

/// Number of occupation tuples over `sites` sites with total at most
/// `max_particles`: the binomial coefficient `C(sites + max, sites)`.
fn config_count(sites: usize, max_particles: u32) -> u128 {
    let n = sites as u128 + max_particles as u128;
    let k = sites as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

fn enumerate_configs(sites: usize, max_particles: u32) -> Vec<Vec<u32>> {
    fn rec(sites: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == sites {
            out.push(prefix.clone());
            return;
        }
        let used: u32 = prefix.iter().sum();
        for n in 0..=budget - used {
            prefix.push(n);
            rec(sites, budget, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(sites, max_particles, &mut Vec::new(), &mut out);
    out
}

/// Open chain of bosonic sites with total occupation capped at
/// `max_particles`. Hopping between neighbours carries the usual `sqrt(n)`
/// ladder factors; `pair_amp` adds `a_r + a_r^dagger` on every site, so the
/// particle number can change and every configuration is reachable from the
/// vacuum. Transitions that would exceed the cap are truncated away, which
/// keeps the generator Hermitian (each retained term enters together with its
/// adjoint).
pub fn bell_lattice(
    sites: usize,
    max_particles: u32,
    hop: f64,
    pair_amp: f64,
) -> Result<ModelSpec> {
    if sites == 0 {
        return Err(Error::InvalidParameter {
            name: "sites",
            message: "at least one site required".to_string(),
        });
    }
    if !(hop.is_finite() && pair_amp.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "hop",
            message: format!("couplings must be finite, got hop = {hop}, pair_amp = {pair_amp}"),
        });
    }
    let count = config_count(sites, max_particles);
    if count > MAX_CONFIGS as u128 {
        return Err(Error::InvalidParameter {
            name: "max_particles",
            message: format!(
                "{count} configurations exceed the cap of {MAX_CONFIGS} \
                 (sites = {sites}, max_particles = {max_particles})"
            ),
        });
    }
    let configs = enumerate_configs(sites, max_particles);
    let dim = configs.len();
    let index: BTreeMap<&[u32], usize> = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| (cfg.as_slice(), i))
        .collect();

    let mut m = DMatrix::from_element(dim, dim, Complex64::ZERO);
    let mut scratch = vec![0u32; sites];
    let add = |target: &[u32], source: usize, amp: f64, m: &mut DMatrix<Complex64>| {
        if let Some(&row) = index.get(target) {
            m[(row, source)] += c(amp, 0.0);
        }
    };
    for (col, cfg) in configs.iter().enumerate() {
        let total: u32 = cfg.iter().sum();
        for r in 0..sites {
            // a_{r}^dagger a_{r+1} and its adjoint: hop with sqrt factors.
            if r + 1 < sites {
                if cfg[r + 1] > 0 {
                    scratch.copy_from_slice(cfg);
                    scratch[r] += 1;
                    scratch[r + 1] -= 1;
                    let amp = hop * (((cfg[r] + 1) * cfg[r + 1]) as f64).sqrt();
                    add(&scratch, col, amp, &mut m);
                }
                if cfg[r] > 0 {
                    scratch.copy_from_slice(cfg);
                    scratch[r] -= 1;
                    scratch[r + 1] += 1;
                    let amp = hop * ((cfg[r] * (cfg[r + 1] + 1)) as f64).sqrt();
                    add(&scratch, col, amp, &mut m);
                }
            }
            // a_r^dagger: truncated at the occupation cap.
            if total < max_particles {
                scratch.copy_from_slice(cfg);
                scratch[r] += 1;
                add(
                    &scratch,
                    col,
                    pair_amp * ((cfg[r] + 1) as f64).sqrt(),
                    &mut m,
                );
            }
            // a_r.
            if cfg[r] > 0 {
                scratch.copy_from_slice(cfg);
                scratch[r] -= 1;
                add(&scratch, col, pair_amp * (cfg[r] as f64).sqrt(), &mut m);
            }
        }
    }
    let labels: Vec<String> = configs
        .iter()
        .map(|cfg| {
            cfg.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join("-")
        })
        .collect();
    Ok(ModelSpec {
        name: "bell_lattice".to_string(),
        hamiltonian: HermitianOperator::new(m)?,
        povm: Povm::basis_with_labels(labels)?,
        psi0: StateVector::basis_state(dim, 0),
        closed_forms: BTreeMap::new(),
    })
}

fn seeded_hermitian(dim: usize, rng: &mut rand_chacha::ChaCha12Rng) -> HermitianOperator {
    let scale = 1.0 / (dim as f64).sqrt();
    let mut m = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for i in 0..dim {
        for j in 0..dim {
            let (re, im) = normal_pair(rng);
            m[(i, j)] = c(re * scale, im * scale);
        }
    }
    let sym = (&m + m.adjoint()).map(|z| 0.5 * z);
    HermitianOperator::new(sym).expect("symmetrized matrix is Hermitian")
}

fn uniform_state(dim: usize) -> StateVector {
    let amp = 1.0 / (dim as f64).sqrt();
    StateVector::new(vec![c(amp, 0.0); dim])
}

/// Seeded dense generator with basis labels and a uniform initial state.
/// Entry scale `1/sqrt(dim)` keeps the spectral radius O(1) as `dim` grows.
pub fn random_hermitian(dim: usize, seed: u64) -> Result<ModelSpec> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            name: "dim",
            message: "dimension must be at least 1".to_string(),
        });
    }
    let mut rng = trajectory_rng(seed, 0);
    Ok(ModelSpec {
        name: "random_hermitian".to_string(),
        hamiltonian: seeded_hermitian(dim, &mut rng),
        povm: Povm::standard_basis(dim),
        psi0: uniform_state(dim),
        closed_forms: BTreeMap::new(),
    })
}

/// Gram-Schmidt orthonormalization of seeded Gaussian columns; two projection
/// passes keep the columns orthogonal to working precision.
fn seeded_isometry(
    rows: usize,
    cols: usize,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> DMatrix<Complex64> {
    let mut v = DMatrix::from_element(rows, cols, Complex64::ZERO);
    for j in 0..cols {
        for i in 0..rows {
            let (re, im) = normal_pair(rng);
            v[(i, j)] = c(re, im);
        }
    }
    for j in 0..cols {
        for _ in 0..2 {
            for k in 0..j {
                let overlap = v.column(k).dotc(&v.column(j));
                let prev = v.column(k).clone_owned();
                let mut col = v.column_mut(j);
                col.axpy(-overlap, &prev, Complex64::ONE);
            }
        }
        let norm = v.column(j).norm();
        assert!(
            norm > 1e-8,
            "degenerate random draw for isometry column {j}"
        );
        v.column_mut(j).scale_mut(1.0 / norm);
    }
    v
}

/// Basis measurement of a `dim_big` space compressed into `dim_small`
/// dimensions through a seeded isometry: `dim_big` dense outcomes acting on a
/// `dim_small` state.
pub fn compressed_povm(dim_big: usize, dim_small: usize, seed: u64) -> Result<ModelSpec> {
    if dim_small == 0 || dim_big < dim_small {
        return Err(Error::InvalidParameter {
            name: "dim_small",
            message: format!("need 1 <= dim_small <= dim_big, got {dim_small} vs {dim_big}"),
        });
    }
    let mut rng = trajectory_rng(seed, 0);
    let isometry = seeded_isometry(dim_big, dim_small, &mut rng);
    let povm = povm_from_compression(&Povm::standard_basis(dim_big), &isometry)?;
    Ok(ModelSpec {
        name: "compressed_povm".to_string(),
        hamiltonian: seeded_hermitian(dim_small, &mut rng),
        povm,
        psi0: uniform_state(dim_small),
        closed_forms: BTreeMap::new(),
    })
}

/// The four bundled systems with their canonical parameters.
pub fn bundled() -> Vec<ModelSpec> {
    vec![
        two_level(),
        bell_lattice(3, 2, 1.0, 0.5).expect("canonical lattice parameters are valid"),
        random_hermitian(16, 1).expect("canonical parameters are valid"),
        compressed_povm(6, 4, 5).expect("canonical parameters are valid"),
    ]
}

/// Look up a bundled model by its canonical name.
pub fn by_name(name: &str) -> Result<ModelSpec> {
    bundled()
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::InvalidParameter {
            name: "model",
            message: format!(
                "unknown model '{name}'; bundled models: {}",
                bundled()
                    .iter()
                    .map(|m| m.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        })
}
