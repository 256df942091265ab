//! Physical/spectral transforms on a (possibly padded) cubic grid.
//!
//! Coefficients follow the convention `u(x) = Σ_k û_k e^{i k·x}`, so the
//! inverse transform is the unnormalized inverse DFT and the forward
//! transform carries the `1/size^d` factor.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::WaveLattice;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Smallest 7-smooth integer `>= min`.
pub fn smooth_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5, 7] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Per-thread transform buffers and plans for one grid size.
pub struct TransformWorkspace {
    dim: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    lines: Vec<Complex64>,
}

impl TransformWorkspace {
    pub fn new(dim: usize, size: usize) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(size), p.plan_fft_inverse(size))
        });
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        TransformWorkspace {
            dim,
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            lines: Vec::new(),
        }
    }

    /// Workspace in which the product of two fields with component extent
    /// `input_extent` is alias-free on every mode with component extent
    /// `<= output_extent`.
    pub fn for_product(dim: usize, input_extent: usize, output_extent: usize) -> Self {
        Self::new(dim, smooth_size(2 * input_extent + output_extent + 1))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_points(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    fn position(&self, k: &[i64; 3]) -> usize {
        let s = self.size as i64;
        k[..self.dim].iter().fold(0usize, |acc, &c| acc * self.size + c.rem_euclid(s) as usize)
    }

    fn representable(&self, k: &[i64; 3]) -> bool {
        let s = self.size as i64;
        k[..self.dim].iter().all(|&c| 2 * c.abs() < s)
    }

    /// Evaluates a scalar spectral component on the physical grid.
    pub fn to_physical(&mut self, lattice: &WaveLattice, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_points()];
        for (idx, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let k = lattice.wavevector(idx);
            if !self.representable(&k) {
                debug_assert!(false, "mode {k:?} not representable on grid {}", self.size);
                continue;
            }
            buf[self.position(&k)] = *c;
        }
        self.transform(&mut buf, true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Forward transform of real grid values, keeping active lattice modes with
    /// component extent `<= out_extent`.
    pub fn to_spectral(&mut self, lattice: &WaveLattice, values: &[f64], out_extent: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        let scale = 1.0 / self.n_points() as f64;
        let ext = out_extent as i64;
        (0..lattice.n_modes())
            .map(|idx| {
                let k = lattice.wavevector(idx);
                if !lattice.is_active(idx) || k.iter().any(|&c| c.abs() > ext) || !self.representable(&k) {
                    Complex64::new(0.0, 0.0)
                } else {
                    buf[self.position(&k)] * scale
                }
            })
            .collect()
    }

    /// In-place unnormalized d-dimensional DFT.
    pub fn transform(&mut self, buf: &mut [Complex64], inverse: bool) {
        let n = self.size;
        let fft = if inverse { self.inverse.clone() } else { self.forward.clone() };
        let total = self.n_points();
        assert_eq!(buf.len(), total);
        for axis in 0..self.dim {
            let inner = n.pow((self.dim - 1 - axis) as u32);
            if inner == 1 {
                fft.process_with_scratch(buf, &mut self.scratch);
                continue;
            }
            let outer = total / (inner * n);
            self.lines.resize(total, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for j in 0..inner {
                    let line = (o * inner + j) * n;
                    let base = o * n * inner + j;
                    for i in 0..n {
                        self.lines[line + i] = buf[base + i * inner];
                    }
                }
            }
            fft.process_with_scratch(&mut self.lines, &mut self.scratch);
            for o in 0..outer {
                for j in 0..inner {
                    let line = (o * inner + j) * n;
                    let base = o * n * inner + j;
                    for i in 0..n {
                        buf[base + i * inner] = self.lines[line + i];
                    }
                }
            }
        }
    }
}
