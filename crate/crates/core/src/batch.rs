//! Column batches of statevectors with real and imaginary parts stored as
//! separate columns, so that the Ising propagator `V·diag(e^{-iλt})·Vᵀ`
//! (with real `V`) is applied to many states by two real matrix products.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::qstate::{PauliMasks, StateVector, C64};

/// Eigenvectors and phases of a real symmetric generator at a fixed time.
#[derive(Clone, Debug)]
pub(crate) struct EigenFactors {
    pub v: DMatrix<f64>,
    pub vt: DMatrix<f64>,
    pub phases: Vec<C64>,
}

pub(crate) struct StateBatch {
    dim: usize,
    /// Column `2j` holds `Re ψ_j`, column `2j + 1` holds `Im ψ_j`.
    data: Vec<f64>,
    scratch: Vec<f64>,
}

impl StateBatch {
    pub fn with_capacity(dim: usize, states: usize) -> Self {
        Self { dim, data: Vec::with_capacity(2 * dim * states), scratch: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.data.len() / (2 * self.dim)
    }

    pub fn push(&mut self, state: &StateVector) {
        debug_assert_eq!(state.dim(), self.dim);
        self.data.extend(state.amplitudes().iter().map(|a| a.re));
        self.data.extend(state.amplitudes().iter().map(|a| a.im));
    }

    /// Appends a copy of state `j`.
    pub fn push_copy(&mut self, j: usize) {
        let start = 2 * j * self.dim;
        self.data.extend_from_within(start..start + 2 * self.dim);
    }

    fn parts_mut(&mut self, j: usize) -> (&mut [f64], &mut [f64]) {
        let d = self.dim;
        self.data[2 * j * d..2 * (j + 1) * d].split_at_mut(d)
    }

    fn parts(&self, j: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        self.data[2 * j * d..2 * (j + 1) * d].split_at(d)
    }

    pub fn state(&self, j: usize) -> Vec<C64> {
        let (re, im) = self.parts(j);
        re.iter().zip(im).map(|(r, i)| C64::new(*r, *i)).collect()
    }

    /// Multiplies state `j` by `exp(-i·angle·P/2)`.
    pub fn rotate(&mut self, j: usize, m: &PauliMasks, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        let (re, im) = self.parts_mut(j);
        rotate_split(re, im, m, c, s);
    }

    pub fn rotate_range(&mut self, states: std::ops::Range<usize>, m: &PauliMasks, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        for j in states {
            let (re, im) = self.parts_mut(j);
            rotate_split(re, im, m, c, s);
        }
    }

    /// Applies `V·diag(phases)·Vᵀ` to every state.
    pub fn evolve(&mut self, f: &EigenFactors) {
        let d = self.dim;
        let cols = 2 * self.len();
        if cols == 0 {
            return;
        }
        self.scratch.resize(d * cols, 0.0);
        {
            let x = DMatrixView::from_slice(&self.data, d, cols);
            let mut y = DMatrixViewMut::from_slice(&mut self.scratch, d, cols);
            y.gemm(1.0, &f.vt, &x, 0.0);
        }
        for pair in self.scratch.chunks_exact_mut(2 * d) {
            let (re, im) = pair.split_at_mut(d);
            for ((r, i), ph) in re.iter_mut().zip(im.iter_mut()).zip(&f.phases) {
                let z = C64::new(*r, *i) * ph;
                *r = z.re;
                *i = z.im;
            }
        }
        let y = DMatrixView::from_slice(&self.scratch, d, cols);
        let mut x = DMatrixViewMut::from_slice(&mut self.data, d, cols);
        x.gemm(1.0, &f.v, &y, 0.0);
    }

    /// Applies an arbitrary dense matrix to every state.
    pub fn apply_dense(&mut self, u: &DMatrix<C64>) {
        for j in 0..self.len() {
            let out = crate::qstate::matvec(u, &self.state(j));
            let (re, im) = self.parts_mut(j);
            for ((r, i), z) in re.iter_mut().zip(im.iter_mut()).zip(out) {
                *r = z.re;
                *i = z.im;
            }
        }
    }

    /// `⟨ψ_j|P|ψ_j⟩`.
    pub fn expectation(&self, j: usize, m: &PauliMasks) -> f64 {
        let (re, im) = self.parts(j);
        let mut acc = 0.0;
        if m.x == 0 && m.y_count == 0 {
            for (b, (r, i)) in re.iter().zip(im).enumerate() {
                let w = r * r + i * i;
                if (b & m.z).count_ones() % 2 == 0 {
                    acc += w;
                } else {
                    acc -= w;
                }
            }
            return acc;
        }
        for b in 0..self.dim {
            let a = C64::new(re[b], im[b]);
            let partner = C64::new(re[b ^ m.x], im[b ^ m.x]);
            acc += (partner.conj() * m.phase(b) * a).re;
        }
        acc
    }
}

fn rotate_split(re: &mut [f64], im: &mut [f64], m: &PauliMasks, c: f64, s: f64) {
    if m.y_count == 0 && m.x == 0 {
        // Diagonal: multiply by c ∓ i·s according to the Z parity of b.
        for (b, (r, i)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
            let sg = if (b & m.z).count_ones() % 2 == 0 { s } else { -s };
            let (r0, i0) = (*r, *i);
            *r = c * r0 + sg * i0;
            *i = c * i0 - sg * r0;
        }
        return;
    }
    let top = 1usize << (usize::BITS - 1 - m.x.leading_zeros());
    if m.y_count == 0 && m.z == 0 {
        // Pure X string: (lo, hi) ← (c·lo − i·s·hi, c·hi − i·s·lo).
        for b in 0..re.len() {
            if b & top != 0 {
                continue;
            }
            let p = b ^ m.x;
            let (lr, li, hr, hi) = (re[b], im[b], re[p], im[p]);
            re[b] = c * lr + s * hi;
            im[b] = c * li - s * hr;
            re[p] = c * hr + s * li;
            im[p] = c * hi - s * lr;
        }
        return;
    }
    let mis = C64::new(0.0, -s);
    for b in 0..re.len() {
        if b & top != 0 {
            continue;
        }
        let p = b ^ m.x;
        let lo = C64::new(re[b], im[b]);
        let hi = C64::new(re[p], im[p]);
        let new_lo = lo * c + mis * m.phase(p) * hi;
        let new_hi = hi * c + mis * m.phase(b) * lo;
        re[b] = new_lo.re;
        im[b] = new_lo.im;
        re[p] = new_hi.re;
        im[p] = new_hi.im;
    }
}
