//! Linear convolution of lattice arrays with translation-invariant stencils through
//! zero-padded N-dimensional FFTs.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Smallest `2^a 3^b >= n`.
fn fast_len(n: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * n.max(1) {
        let mut p = p2;
        while p < n {
            p *= 3;
        }
        best = best.min(p);
        p2 *= 2;
    }
    best
}

pub(crate) struct Convolver {
    dim: usize,
    shape: [usize; 3],
    padded: [usize; 3],
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Convolver {
    /// Convolver for arrays of `shape` against stencils with offsets up to
    /// `shape[k] - 1` in each direction.
    pub(crate) fn new(dim: usize, shape: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let mut padded = [1usize; 3];
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        for k in 0..dim {
            padded[k] = fast_len(2 * shape[k] - 1);
            forward.push(planner.plan_fft_forward(padded[k]));
            inverse.push(planner.plan_fft_inverse(padded[k]));
        }
        Convolver {
            dim,
            shape,
            padded,
            forward,
            inverse,
        }
    }

    fn padded_len(&self) -> usize {
        self.padded.iter().product()
    }

    fn transform(&self, data: &mut [Complex<f64>], inverse: bool) {
        for axis in 0..self.dim {
            let len = self.padded[axis];
            let inner: usize = self.padded[..axis].iter().product();
            let block = len * inner;
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            data.par_chunks_mut(block).for_each(|chunk| {
                if inner == 1 {
                    plan.process(chunk);
                    return;
                }
                let mut t = vec![Complex::new(0.0, 0.0); block];
                for i in 0..len {
                    for j in 0..inner {
                        t[j * len + i] = chunk[i * inner + j];
                    }
                }
                plan.process(&mut t);
                for i in 0..len {
                    for j in 0..inner {
                        chunk[i * inner + j] = t[j * len + i];
                    }
                }
            });
        }
    }

    /// Spectrum of a stencil given as a function of the offset; the function is called for
    /// every offset with `|o_k| < shape[k]`.
    pub(crate) fn stencil_spectrum<F>(&self, weight: F) -> Vec<Complex<f64>>
    where
        F: Fn(&[i64; 3]) -> f64 + Sync,
    {
        let total = self.padded_len();
        let p = self.padded;
        let n = self.shape;
        let dim = self.dim;
        let mut data: Vec<Complex<f64>> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut off = [0i64; 3];
                let mut rest = idx;
                for k in 0..dim {
                    let i = (rest % p[k]) as i64;
                    rest /= p[k];
                    let o = if i < n[k] as i64 { i } else { i - p[k] as i64 };
                    if o.abs() >= n[k] as i64 {
                        return Complex::new(0.0, 0.0);
                    }
                    off[k] = o;
                }
                Complex::new(weight(&off), 0.0)
            })
            .collect();
        self.transform(&mut data, false);
        data
    }

    /// `out[i] = sum_j w(i - j) values[j]` for every node `i` of the lattice, for each of
    /// the given stencil spectra.
    pub(crate) fn apply(&self, values: &[f64], spectra: &[&[Complex<f64>]]) -> Vec<Vec<f64>> {
        let total = self.padded_len();
        let mut data = vec![Complex::new(0.0, 0.0); total];
        let n = self.shape;
        let p = self.padded;
        for (idx, v) in values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let mut rest = idx;
            let mut pidx = 0;
            let mut stride = 1;
            for k in 0..self.dim {
                pidx += (rest % n[k]) * stride;
                rest /= n[k];
                stride *= p[k];
            }
            data[pidx] = Complex::new(*v, 0.0);
        }
        self.transform(&mut data, false);
        let scale = 1.0 / total as f64;
        spectra
            .iter()
            .map(|spec| {
                let mut prod: Vec<Complex<f64>> = data.par_iter().zip(spec.par_iter()).map(|(a, b)| a * b).collect();
                self.transform(&mut prod, true);
                let mut out = vec![0.0; values.len()];
                for (idx, o) in out.iter_mut().enumerate() {
                    let mut rest = idx;
                    let mut pidx = 0;
                    let mut stride = 1;
                    for k in 0..self.dim {
                        pidx += (rest % n[k]) * stride;
                        rest /= n[k];
                        stride *= p[k];
                    }
                    *o = prod[pidx].re * scale;
                }
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_convolution_in_two_dimensions() {
        let shape = [5, 4, 1];
        let conv = Convolver::new(2, shape);
        let w = |o: &[i64; 3]| (o[0] * 3 + o[1] * 7) as f64 * 0.1 + 1.0 / (1.0 + (o[0] * o[0] + o[1] * o[1]) as f64);
        let spec = conv.stencil_spectrum(w);
        let vals: Vec<f64> = (0..20).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let out = conv.apply(&vals, &[&spec]);
        for i0 in 0..5i64 {
            for i1 in 0..4i64 {
                let mut direct = 0.0;
                for j0 in 0..5i64 {
                    for j1 in 0..4i64 {
                        direct += w(&[i0 - j0, i1 - j1, 0]) * vals[(j0 + 5 * j1) as usize];
                    }
                }
                assert!((out[0][(i0 + 5 * i1) as usize] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(fast_len(9), 9);
        assert_eq!(fast_len(10), 12);
        assert_eq!(fast_len(65), 72);
    }
}
