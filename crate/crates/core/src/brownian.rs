//! Reproducible Wiener increments for a finite family `(W^k)`.
//!
//! The increment of process `k` over step `n` of path `p` is a pure function
//! of `(master_seed, p, k, n)`, so blocks may be generated in any order and on
//! any thread. Simulations at different Galerkin cutoffs that share a
//! [`PathSpec`] see identical increments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tag, KeyedStream};

/// Largest supported refinement factor.
pub const MAX_REFINE: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSpec {
    pub master_seed: u64,
    pub path_index: u64,
    /// Number of Wiener processes.
    pub n_processes: usize,
}

impl PathSpec {
    pub fn new(master_seed: u64, path_index: u64, n_processes: usize) -> Self {
        PathSpec { master_seed, path_index, n_processes }
    }

    fn stream(&self, domain: u64, k_index: usize) -> KeyedStream {
        KeyedStream::new([self.master_seed, self.path_index, k_index as u64, domain])
    }
}

/// Increments over `n_steps` consecutive steps starting at `first_step`,
/// stored row-major as `[n_steps × n_processes]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementBlock {
    pub spec: PathSpec,
    pub dt: f64,
    pub first_step: u64,
    pub n_steps: usize,
    pub increments: Vec<f64>,
    /// Identifies the chain of refinements applied to the base block.
    pub salt: u64,
}

impl IncrementBlock {
    pub fn row(&self, step: usize) -> &[f64] {
        let n = self.spec.n_processes;
        &self.increments[step * n..(step + 1) * n]
    }

    pub fn column(&self, k_index: usize) -> Vec<f64> {
        (0..self.n_steps).map(|s| self.row(s)[k_index]).collect()
    }

    /// `W_k` at the end of each step, starting from zero.
    pub fn cumulative(&self, k_index: usize) -> Vec<f64> {
        self.column(k_index)
            .into_iter()
            .scan(0.0, |acc, dw| {
                *acc += dw;
                Some(*acc)
            })
            .collect()
    }

    /// `W_k(t_end) - W_k(t_start)` over the whole block.
    pub fn total(&self, k_index: usize) -> f64 {
        self.column(k_index).iter().sum()
    }
}

/// Base increments at step `dt`.
pub fn increments(spec: &PathSpec, first_step: u64, dt: f64, n_steps: usize) -> Result<IncrementBlock> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let n = spec.n_processes;
    let sd = dt.sqrt();
    let mut increments = vec![0.0; n_steps * n];
    for k in 0..n {
        let mut stream = spec.stream(tag::WIENER, k);
        for s in 0..n_steps {
            increments[s * n + k] = sd * stream.normal((first_step + s as u64) as u128);
        }
    }
    Ok(IncrementBlock { spec: *spec, dt, first_step, n_steps, increments, salt: 0 })
}

/// Subdivides every step into `factor` sub-steps by sequential Brownian-bridge
/// sampling; the sub-increments of each coarse step sum to its increment.
pub fn refine(block: &IncrementBlock, factor: usize) -> Result<IncrementBlock> {
    if factor < 2 || factor > MAX_REFINE {
        return Err(Error::InvalidArgument(format!("refinement factor must be in 2..={MAX_REFINE}, got {factor}")));
    }
    let n = block.spec.n_processes;
    let fine_dt = block.dt / factor as f64;
    let salt = block.salt.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(factor as u64).rotate_left(17);
    let mut out = vec![0.0; block.n_steps * factor * n];
    for k in 0..n {
        let mut stream = block.spec.stream(tag::BRIDGE ^ salt, k);
        for s in 0..block.n_steps {
            let step = block.first_step + s as u64;
            let mut remaining = block.increments[s * n + k];
            for i in 0..factor {
                let left = (factor - i) as f64;
                let dw = if i + 1 == factor {
                    remaining
                } else {
                    let counter = ((step as u128) << 16) | i as u128;
                    let var = fine_dt * (1.0 - 1.0 / left);
                    remaining / left + var.sqrt() * stream.normal(counter)
                };
                out[(s * factor + i) * n + k] = dw;
                remaining -= dw;
            }
        }
    }
    Ok(IncrementBlock {
        spec: block.spec,
        dt: fine_dt,
        first_step: block.first_step * factor as u64,
        n_steps: block.n_steps * factor,
        increments: out,
        salt,
    })
}
