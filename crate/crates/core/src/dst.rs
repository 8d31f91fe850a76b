//! Fast discrete sine transform (DST-I).
//!
//! The sine eigenbasis sampled on the uniform interior grid makes both
//! synthesis (coefficients to grid values) and analysis (grid values to
//! coefficients) a DST-I, computed here through a complex FFT of length
//! 2(L+1) by odd extension. DST-I is its own inverse up to the factor
//! (L+1)/2.

use crate::scalar::Scalar;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct SineTransform<S: Scalar> {
    len: usize,
    fft: Arc<dyn Fft<S>>,
}

impl<S: Scalar> SineTransform<S> {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (len + 1));
        SineTransform { len, fft }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Computes y_k = sum_{j=1}^{L} x_j sin(pi j k / (L+1)) for k = 1..L.
    ///
    /// Input shorter than L is treated as zero-padded, which is how mode
    /// coefficients with fewer modes than grid points enter a synthesis.
    pub fn transform(&self, x: &[S]) -> Vec<S> {
        assert!(x.len() <= self.len, "input longer than transform length");
        let n = 2 * (self.len + 1);
        let mut buf = vec![Complex::new(S::zero(), S::zero()); n];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1].re = v;
            buf[n - 1 - j].re = -v;
        }
        let mut scratch =
            vec![Complex::new(S::zero(), S::zero()); self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        let half = S::of(-0.5);
        (1..=self.len).map(|k| buf[k].im * half).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(x: &[f64], len: usize) -> Vec<f64> {
        let h = std::f64::consts::PI / (len + 1) as f64;
        (1..=len)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * ((j + 1) as f64 * k as f64 * h).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_summation() {
        for len in [1usize, 2, 5, 8, 31, 64] {
            let x: Vec<f64> = (0..len).map(|j| ((j * 37 + 11) % 17) as f64 - 8.0).collect();
            let fast = SineTransform::new(len).transform(&x);
            let slow = direct(&x, len);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "len={len}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_padded_input_matches_full_input() {
        let len = 15;
        let t = SineTransform::new(len);
        let x = vec![1.0, -2.0, 0.5];
        let mut padded = x.clone();
        padded.resize(len, 0.0);
        assert_eq!(t.transform(&x), t.transform(&padded));
    }

    #[test]
    fn double_transform_scales_by_half_len_plus_one() {
        let len = 10;
        let t = SineTransform::new(len);
        let x: Vec<f64> = (0..len).map(|j| (j as f64 * 0.7).cos()).collect();
        let back = t.transform(&t.transform(&x));
        let scale = (len + 1) as f64 / 2.0;
        for (a, b) in back.iter().zip(&x) {
            assert!((a / scale - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn works_in_f32() {
        let len = 9;
        let x: Vec<f32> = (0..len).map(|j| j as f32 - 4.0).collect();
        let fast = SineTransform::<f32>::new(len).transform(&x);
        let slow = direct(&x.iter().map(|&v| v as f64).collect::<Vec<_>>(), len);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((*a as f64 - b).abs() < 1e-4, "{a} vs {b}");
        }
    }
}
