//! Small statistics helpers shared by the Monte Carlo probes.

/// Running first and second moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Wilson score standard error (`z = 1` half-width) of a binomial proportion.
pub fn wilson_std_error(hits: usize, n: usize) -> f64 {
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    (p * (1.0 - p) / n_f + 0.25 / (n_f * n_f)).sqrt() / (1.0 + 1.0 / n_f)
}

/// Two-sample z statistic for equal means.
pub fn two_sample_z(a: &Moments, b: &Moments) -> f64 {
    let se = (a.variance() / a.n as f64 + b.variance() / b.n as f64).sqrt();
    if se == 0.0 {
        if a.mean() == b.mean() {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.mean() - b.mean()) / se
    }
}
