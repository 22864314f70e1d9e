//! One-dimensional quadrature rules used throughout the crate.

/// Adaptive Simpson quadrature of a vector-valued integrand on `[a, b]`.
///
/// Every component is refined until its Richardson-corrected local error is
/// below `rel_tol` times the running magnitude of the integral (with `abs_tol`
/// as floor).
pub fn adaptive_simpson_vec<F>(f: F, a: f64, b: f64, dim: usize, rel_tol: f64, abs_tol: f64) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    if a == b {
        return vec![0.0; dim];
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(&fa, &fm, &fb, b - a);
    // Seed with a coarse estimate of the scale so the relative tolerance is meaningful.
    let scale: f64 = whole.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let tol = (rel_tol * scale).max(abs_tol);
    let mut out = vec![0.0; dim];
    simpson_rec(&f, a, b, &fa, &fm, &fb, &whole, tol, 48, &mut out);
    out
}

fn simpson(fa: &[f64], fm: &[f64], fb: &[f64], h: f64) -> Vec<f64> {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((x, y), z)| h / 6.0 * (x + 4.0 * y + z))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    out: &mut [f64],
) where
    F: Fn(f64) -> Vec<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, &flm, fm, m - a);
    let right = simpson(fm, &frm, fb, b - m);
    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .map(|((l, r), w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    // The first two levels are always refined so oscillatory integrands that
    // happen to vanish on the coarse nodes are not accepted blindly.
    if depth == 0 || (depth < 46 && err <= 15.0 * tol) {
        for (i, o) in out.iter_mut().enumerate() {
            *o += left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0;
        }
        return;
    }
    simpson_rec(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1, out);
    simpson_rec(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1, out);
}

/// Scalar adaptive Simpson.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    adaptive_simpson_vec(|x| vec![f(x)], a, b, 1, rel_tol, abs_tol)[0]
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WEIGHTS_K[7] * fc;
    let mut gauss = GK_WEIGHTS_G[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kron += GK_WEIGHTS_K[i] * s;
        if i % 2 == 1 {
            gauss += GK_WEIGHTS_G[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
/// Returns the estimate and the summed error estimate.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut intervals = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= (rel_tol * total.abs()).max(abs_tol) {
            break;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("at least one interval");
        let (lo, hi, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    let total = intervals.iter().map(|iv| iv.2 .0).sum();
    let err = intervals.iter().map(|iv| iv.2 .1).sum();
    (total, err)
}

/// Integral over `[a, ∞)` through the map `x = a + s·u/(1-u)`.
pub fn gauss_kronrod_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (f64, f64) {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let x = a + scale * u / one_minus;
        let v = f(x) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    gauss_kronrod(g, 0.0, 1.0, rel_tol, abs_tol)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite trapezoid weights for `n` equally spaced samples with step `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Cumulative trapezoid integral, same length as `values`, starting at zero.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_trig() {
        let v = adaptive_simpson(|x| x * x * x - x, 0.0, 2.0, 1e-12, 1e-14);
        assert!((v - 2.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| (3.0 * x).sin(), 0.0, 10.0, 1e-10, 1e-14);
        let exact = (1.0 - (30.0f64).cos()) / 3.0;
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn kronrod_semi_infinite_lorentzian() {
        let (v, _) = gauss_kronrod_semi_infinite(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, 1e-12, 1e-14);
        assert!((v - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
