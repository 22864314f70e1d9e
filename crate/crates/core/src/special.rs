//! Special functions.

/// Dawson's integral `F(x) = e^{-x²} ∫₀ˣ e^{t²} dt`, via Rybicki's sampling sum.
pub fn dawson(x: f64) -> f64 {
    if x.abs() < 0.2 {
        // Σ (−2)^k x^{2k+1} / (2k+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for k in 1..12 {
            term *= -2.0 * x2 / (2 * k + 1) as f64;
            sum += term;
        }
        return sum;
    }
    const H: f64 = 0.2;
    let ax = x.abs();
    let n0 = 2 * ((0.5 * ax / H).round() as i64);
    let xp = ax - n0 as f64 * H;
    let mut sum = 0.0;
    // n0 even, so n0 + n is odd for odd n
    let mut n: i64 = 1;
    while n <= 61 {
        let a = (-(xp - n as f64 * H).powi(2)).exp() / (n0 + n) as f64;
        let b = (-(xp + n as f64 * H).powi(2)).exp() / (n0 - n) as f64;
        sum += a + b;
        n += 2;
    }
    x.signum() * sum / std::f64::consts::PI.sqrt()
}
