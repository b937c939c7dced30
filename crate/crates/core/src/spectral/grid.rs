use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational cutoff for the retained wavenumbers, `|k_i| ≤ num/den · n_i/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealiasFraction {
    pub num: u32,
    pub den: u32,
}

impl DealiasFraction {
    pub const TWO_THIRDS: DealiasFraction = DealiasFraction { num: 2, den: 3 };
    pub const FULL: DealiasFraction = DealiasFraction { num: 1, den: 1 };

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for DealiasFraction {
    fn default() -> Self {
        Self::TWO_THIRDS
    }
}

/// Collocation grid on `[0, 2π)²` with `n1 × n2` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    #[serde(default)]
    pub dealias: DealiasFraction,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        Self::with_dealias(n1, n2, DealiasFraction::default())
    }

    pub fn with_dealias(n1: usize, n2: usize, dealias: DealiasFraction) -> Result<Self> {
        let grid = GridSpec { n1, n2, dealias };
        grid.validate()?;
        Ok(grid)
    }

    /// Square grid with the default 2/3 cutoff. Panics on invalid sizes.
    pub fn square(n: usize) -> Self {
        Self::new(n, n).expect("invalid grid size")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n1", self.n1), ("n2", self.n2)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::domain(format!("{name} = {n} must be even and >= 4")));
            }
        }
        let DealiasFraction { num, den } = self.dealias;
        if num == 0 || den == 0 || num > den {
            return Err(Error::domain(format!(
                "dealias fraction {num}/{den} must lie in (0, 1]"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    /// Largest retained `|k₁|`. Nyquist modes are never retained.
    pub fn kmax1(&self) -> i64 {
        kmax(self.n1, self.dealias)
    }

    pub fn kmax2(&self) -> i64 {
        kmax(self.n2, self.dealias)
    }

    /// Signed wavenumbers of storage index `idx`.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> (i64, i64) {
        (signed(idx / self.n2, self.n1), signed(idx % self.n2, self.n2))
    }

    /// Storage index of wavenumber `(k1, k2)`; wraps modulo the grid.
    #[inline]
    pub fn index_of(&self, k1: i64, k2: i64) -> usize {
        let i1 = k1.rem_euclid(self.n1 as i64) as usize;
        let i2 = k2.rem_euclid(self.n2 as i64) as usize;
        self.index(i1, i2)
    }

    /// Storage index of `-k`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (i1, i2) = (idx / self.n2, idx % self.n2);
        self.index((self.n1 - i1) % self.n1, (self.n2 - i2) % self.n2)
    }

    #[inline]
    pub fn is_retained(&self, k1: i64, k2: i64) -> bool {
        k1.abs() <= self.kmax1() && k2.abs() <= self.kmax2()
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        idx / self.n2 == self.n1 / 2 || idx % self.n2 == self.n2 / 2
    }

    /// Zero-padded grid sizes used for exact quadratic products.
    pub fn padded(&self) -> (usize, usize) {
        (3 * self.n1 / 2, 3 * self.n2 / 2)
    }

    /// Physical coordinates of collocation point `(i1, i2)`.
    pub fn point(&self, i1: usize, i2: usize) -> (f64, f64) {
        let tau = std::f64::consts::TAU;
        (tau * i1 as f64 / self.n1 as f64, tau * i2 as f64 / self.n2 as f64)
    }
}

fn kmax(n: usize, frac: DealiasFraction) -> i64 {
    let cut = (frac.num as usize * n) / (2 * frac.den as usize);
    cut.min(n / 2 - 1) as i64
}

#[inline]
fn signed(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
