//! Integer wavevector lattice on the torus `[0, 2π)^d`.
//!
//! Modes are stored in FFT order: the flat index of a mode is the row-major
//! index of its grid position, where grid position `i` along an axis carries
//! the wavenumber `i` for `i <= n/2` and `i - n` otherwise. Components thus
//! range over `(-n/2, n/2]`; the `n/2` rows are the Nyquist rows and are kept
//! identically zero by every operation in this crate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Wavevector index set with shell structure and dealiasing mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveLattice {
    dim: usize,
    grid_n: usize,
    wavevectors: Vec<[i64; 3]>,
    norm_sq: Vec<f64>,
    active: Vec<bool>,
    dealias: Vec<bool>,
    negation: Vec<usize>,
    shells: BTreeMap<usize, Vec<usize>>,
    dealias_extent: usize,
}

impl WaveLattice {
    /// Builds the lattice for `dim` in {2, 3} and an even `grid_n >= 8`.
    pub fn new(dim: usize, grid_n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidLattice(format!("dim must be 2 or 3, got {dim}")));
        }
        if grid_n < 8 || grid_n % 2 != 0 {
            return Err(Error::InvalidLattice(format!("grid_n must be even and >= 8, got {grid_n}")));
        }
        let n = grid_n as i64;
        let half = n / 2;
        let dealias_extent = grid_n / 3;
        let n_modes = grid_n.pow(dim as u32);

        let mut wavevectors = Vec::with_capacity(n_modes);
        let mut norm_sq = Vec::with_capacity(n_modes);
        let mut active = Vec::with_capacity(n_modes);
        let mut dealias = Vec::with_capacity(n_modes);
        let mut shells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();

        for idx in 0..n_modes {
            let mut k = [0i64; 3];
            let mut rem = idx;
            for axis in (0..dim).rev() {
                let i = (rem % grid_n) as i64;
                rem /= grid_n;
                k[axis] = if i <= half { i } else { i - n };
            }
            let ksq = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            let nyquist = k[..dim].iter().any(|&c| c == half);
            let zero = ksq == 0.0;
            wavevectors.push(k);
            norm_sq.push(ksq);
            active.push(!zero && !nyquist);
            dealias.push(k[..dim].iter().all(|&c| c.unsigned_abs() as usize <= dealias_extent));
            if !zero {
                shells.entry(ksq.sqrt().round() as usize).or_default().push(idx);
            }
        }

        let mut lattice = WaveLattice {
            dim,
            grid_n,
            wavevectors,
            norm_sq,
            active,
            dealias,
            negation: Vec::new(),
            shells,
            dealias_extent,
        };
        lattice.negation = (0..n_modes)
            .map(|idx| {
                let k = lattice.wavevectors[idx];
                lattice.index_of(&[-k[0], -k[1], -k[2]]).unwrap_or(idx)
            })
            .collect();
        Ok(lattice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn n_modes(&self) -> usize {
        self.wavevectors.len()
    }

    /// Wavevector of mode `idx`; unused trailing components are zero in 2D.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        self.wavevectors[idx]
    }

    pub fn norm_sq(&self, idx: usize) -> f64 {
        self.norm_sq[idx]
    }

    pub fn norm(&self, idx: usize) -> f64 {
        self.norm_sq[idx].sqrt()
    }

    /// Nonzero and off the Nyquist rows.
    pub fn is_active(&self, idx: usize) -> bool {
        self.active[idx]
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = (self.grid_n / 2) as i64;
        self.wavevectors[idx][..self.dim].iter().any(|&c| c == half)
    }

    /// True iff every `|k_i| <= grid_n / 3`.
    pub fn in_dealias_mask(&self, idx: usize) -> bool {
        self.dealias[idx]
    }

    /// Largest component magnitude retained by the dealiasing mask.
    pub fn dealias_extent(&self) -> usize {
        self.dealias_extent
    }

    /// Index of `-k`. Nyquist modes map to the mode holding the wrapped
    /// wavevector, which is not a true negation.
    pub fn negation(&self, idx: usize) -> usize {
        self.negation[idx]
    }

    /// Flat index of the wavevector `k`, if it lies on the lattice.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let n = self.grid_n as i64;
        let half = n / 2;
        let mut idx = 0usize;
        for axis in 0..self.dim {
            let c = k.get(axis).copied().unwrap_or(0);
            if c <= -half || c > half {
                return None;
            }
            idx = idx * self.grid_n + c.rem_euclid(n) as usize;
        }
        if k.iter().skip(self.dim).any(|&c| c != 0) {
            return None;
        }
        Some(idx)
    }

    /// Shells keyed by `round(|k|)`; the zero mode belongs to no shell.
    pub fn shells(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.shells
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_sq.iter().cloned().fold(0.0, f64::max).sqrt()
    }

    /// Canonical representative of the pair `{k, -k}`: the first nonzero
    /// component is positive.
    pub fn is_canonical(&self, idx: usize) -> bool {
        let k = self.wavevectors[idx];
        k[..self.dim].iter().find(|&&c| c != 0).map_or(false, |&c| c > 0)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        0..self.n_modes()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_modes()).filter(move |&i| self.active[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(WaveLattice::new(2, 7).is_err());
        assert!(WaveLattice::new(2, 6).is_err());
        assert!(WaveLattice::new(4, 8).is_err());
    }

    #[test]
    fn small_2d_lattice() {
        let lat = WaveLattice::new(2, 8).unwrap();
        assert_eq!(lat.n_modes(), 64);
        let zero = lat.index_of(&[0, 0]).unwrap();
        assert!(!lat.is_active(zero));
        for kappa in 1..=5 {
            assert!(!lat.shells()[&kappa].is_empty(), "shell {kappa} empty");
        }
        for idx in lat.indices() {
            let k = lat.wavevector(idx);
            let inside = k[0].abs() <= 2 && k[1].abs() <= 2;
            assert_eq!(lat.in_dealias_mask(idx), inside);
        }
    }

    #[test]
    fn negation_closed_off_nyquist() {
        let lat = WaveLattice::new(3, 8).unwrap();
        for idx in lat.indices() {
            if lat.is_nyquist(idx) {
                continue;
            }
            let k = lat.wavevector(idx);
            let neg = lat.negation(idx);
            assert_eq!(lat.wavevector(neg), [-k[0], -k[1], -k[2]]);
        }
    }

    #[test]
    fn dealias_fraction() {
        for &(dim, n) in &[(2usize, 64usize), (3, 32)] {
            let lat = WaveLattice::new(dim, n).unwrap();
            let kept = lat.indices().filter(|&i| lat.in_dealias_mask(i)).count();
            let frac = kept as f64 / lat.n_modes() as f64;
            let target = (2.0f64 / 3.0).powi(dim as i32) - 2.0 * dim as f64 / n as f64;
            assert!(frac >= target, "fraction {frac} < {target}");
        }
    }
}
