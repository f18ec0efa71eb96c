#![allow(dead_code)]

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Sample variance and a standard error for it from the fourth moment.
pub fn var_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}

/// Composite Gauss–Legendre rule with `panels` panels of 20 nodes.
/// Independent of the adaptive integrator inside the library.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = legendre_nodes(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for i in 0..x.len() {
            total += w[i] * f(mid + 0.5 * h * x[i]);
        }
    }
    total * 0.5 * h
}

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// `∫_{lo}^{hi} f(e^u) e^u du`, i.e. `∫ f(w) dw` on a log scale.
pub fn log_scale_integral<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    gauss_legendre(|u| {
        let w = u.exp();
        f(w) * w
    }, lo, hi, panels)
}

/// Lévy density of the mGG measure from its defining integral over `s`.
pub fn levy_oracle(w: f64, alpha: f64, tau: f64, beta: f64, c: f64, eta: f64) -> f64 {
    let f = |s: f64| {
        let g = ln_gamma(2.0 - s).exp();
        s * (1.0 - s) / g * c.powf(s) * w.powf(-1.0 - s) * (-beta * w / c).exp()
    };
    eta / (alpha - tau) * gauss_legendre(f, tau, alpha, 8)
}

/// Stirling series with an upward shift; accurate to ~1e-14 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut y = x;
    while y < 12.0 {
        shift += y.ln();
        y += 1.0;
    }
    let r = 1.0 / (y * y);
    (y - 0.5) * y.ln() - y + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + (1.0 / y) * (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0)))
        - shift
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
