use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized 2D complex FFT on a row-major `m1 × m2` buffer
/// (`x₁` index outer).
pub struct Fft2 {
    m1: usize,
    m2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(m1: usize, m2: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd1 = planner.plan_fft_forward(m1);
        let inv1 = planner.plan_fft_inverse(m1);
        let fwd2 = planner.plan_fft_forward(m2);
        let inv2 = planner.plan_fft_inverse(m2);
        let scratch_len = [&fwd1, &inv1, &fwd2, &inv2]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2 {
            m1,
            m2,
            fwd1,
            inv1,
            fwd2,
            inv2,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transposed: vec![Complex64::new(0.0, 0.0); m1 * m2],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// `X_k = Σ_x u_x e^{-ik·x}`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let (p1, p2) = (self.fwd1.clone(), self.fwd2.clone());
        self.run(data, &*p1, &*p2);
    }

    /// `u_x = Σ_k X_k e^{ik·x}` (no `1/N`).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let (p1, p2) = (self.inv1.clone(), self.inv2.clone());
        self.run(data, &*p1, &*p2);
    }

    fn run(&mut self, data: &mut [Complex64], along1: &dyn Fft<f64>, along2: &dyn Fft<f64>) {
        let (m1, m2) = (self.m1, self.m2);
        assert_eq!(data.len(), m1 * m2, "buffer does not match FFT shape");
        along2.process_with_scratch(data, &mut self.scratch);
        for i1 in 0..m1 {
            for i2 in 0..m2 {
                self.transposed[i2 * m1 + i1] = data[i1 * m2 + i2];
            }
        }
        along1.process_with_scratch(&mut self.transposed, &mut self.scratch);
        for i2 in 0..m2 {
            for i1 in 0..m1 {
                data[i1 * m2 + i2] = self.transposed[i2 * m1 + i1];
            }
        }
    }
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("m1", &self.m1).field("m2", &self.m2).finish()
    }
}
