use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial in one canonical pair, `Σ c_{μν} p^μ q^ν`, tagged with the
/// value of ħ used by the star product.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSymbol {
    coeffs: BTreeMap<(u32, u32), Complex64>,
    hbar: f64,
}

impl PolynomialSymbol {
    pub fn zero(hbar: f64) -> Self {
        Self { coeffs: BTreeMap::new(), hbar }
    }

    pub fn constant(c: impl Into<Complex64>, hbar: f64) -> Self {
        Self::monomial(0, 0, c, hbar)
    }

    /// `c p^μ q^ν`.
    pub fn monomial(p_pow: u32, q_pow: u32, c: impl Into<Complex64>, hbar: f64) -> Self {
        let mut s = Self::zero(hbar);
        s.add_term(p_pow, q_pow, c.into());
        s
    }

    pub fn p(hbar: f64) -> Self {
        Self::monomial(1, 0, 1.0, hbar)
    }

    pub fn q(hbar: f64) -> Self {
        Self::monomial(0, 1, 1.0, hbar)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.coeffs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn coefficient(&self, p_pow: u32, q_pow: u32) -> Complex64 {
        self.coeffs.get(&(p_pow, q_pow)).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|&(a, b)| a + b).max()
    }

    fn add_term(&mut self, p_pow: u32, q_pow: u32, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self.coeffs.entry((p_pow, q_pow)).or_default();
        *entry += c;
        if *entry == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&(p_pow, q_pow));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(a, b), &c) in &other.coeffs {
            out.add_term(a, b, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        let mut out = Self::zero(self.hbar);
        for (&(a, b), &v) in &self.coeffs {
            out.add_term(a, b, v * c);
        }
        out
    }

    /// Pointwise (commutative) product.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.hbar);
        for (&(a1, b1), &c1) in &self.coeffs {
            for (&(a2, b2), &c2) in &other.coeffs {
                out.add_term(a1 + a2, b1 + b2, c1 * c2);
            }
        }
        out
    }

    /// `∂_p^{dp} ∂_q^{dq}` of the polynomial.
    pub fn derivative(&self, dp: u32, dq: u32) -> Self {
        let mut out = Self::zero(self.hbar);
        for (&(a, b), &c) in &self.coeffs {
            if a < dp || b < dq {
                continue;
            }
            let f = falling(a, dp) * falling(b, dq);
            out.add_term(a - dp, b - dq, c * f);
        }
        out
    }

    pub fn eval(&self, p: f64, q: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&(a, b), &c)| c * p.powi(a as i32) * q.powi(b as i32))
            .sum()
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.sub(other).coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_diff(other) <= tol
    }
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    falling(n, k) / falling(k, k)
}

fn same_hbar(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<f64> {
    if (f.hbar - g.hbar).abs() > 1e-15 * f.hbar.abs().max(g.hbar.abs()).max(1.0) {
        return Err(Error::HbarMismatch(f.hbar, g.hbar));
    }
    Ok(f.hbar)
}

/// Moyal star product. The series terminates for polynomials, so the result
/// is exact up to floating-point rounding.
pub fn star_product(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    let hbar = same_hbar(f, g)?;
    let (Some(df), Some(dg)) = (f.degree(), g.degree()) else {
        return Ok(PolynomialSymbol::zero(hbar));
    };
    let mut out = PolynomialSymbol::zero(hbar);
    let base = Complex64::new(0.0, -hbar / 2.0);
    let mut prefactor = Complex64::new(1.0, 0.0);
    for n in 0..=df.min(dg) {
        if n > 0 {
            prefactor = prefactor * base / n as f64;
        }
        for k in 0..=n {
            let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
            let left = f.derivative(k, n - k);
            let right = g.derivative(n - k, k);
            if left.is_zero() || right.is_zero() {
                continue;
            }
            out = out.add(&left.mul(&right).scale(prefactor * binomial(n, k) * sign));
        }
    }
    Ok(out)
}

/// `(i/ħ)(f⋆g − g⋆f)`.
pub fn moyal_bracket(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    let hbar = same_hbar(f, g)?;
    if hbar == 0.0 {
        return poisson_bracket(f, g);
    }
    let comm = star_product(f, g)?.sub(&star_product(g, f)?);
    Ok(comm.scale(Complex64::new(0.0, 1.0 / hbar)))
}

/// `∂_p f ∂_q g − ∂_q f ∂_p g`.
pub fn poisson_bracket(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    same_hbar(f, g)?;
    let a = f.derivative(1, 0).mul(&g.derivative(0, 1));
    let b = f.derivative(0, 1).mul(&g.derivative(1, 0));
    Ok(a.sub(&b))
}
