//! Real special functions: both real branches of Lambert W, log-gamma and
//! digamma.

use crate::error::{Error, Result};
use std::f64::consts::{E, PI};
use std::sync::OnceLock;

const INV_E: f64 = 1.0 / E;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// Slack accepted below -1/e before the argument is declared out of domain.
const BRANCH_PAD: f64 = 1e-15;

/// Real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WBranch {
    /// `W_0`, defined on `[-1/e, inf)`, values `>= -1`.
    Principal,
    /// `W_{-1}`, defined on `[-1/e, 0)`, values `<= -1`.
    Minus1,
}

/// Lambert W: the solution `y` of `y e^y = x` on the requested branch.
pub fn lambert_w(x: f64, branch: WBranch) -> Result<f64> {
    if !x.is_finite() {
        if x == f64::INFINITY && branch == WBranch::Principal {
            return Ok(f64::INFINITY);
        }
        return Err(Error::domain(format!("lambert_w: non-finite argument {x}")));
    }
    if x < -INV_E - BRANCH_PAD {
        return Err(Error::domain(format!("lambert_w: argument {x} below -1/e")));
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }
    match branch {
        WBranch::Principal => Ok(w0(x)),
        WBranch::Minus1 => {
            if x >= 0.0 {
                return Err(Error::domain(format!(
                    "lambert_w: argument {x} not negative on the -1 branch"
                )));
            }
            Ok(wm1(x))
        }
    }
}

/// Series of `W` around the branch point in `p = ±sqrt(2(e x + 1))`.
fn branch_series(p: f64) -> f64 {
    -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0)))))
}

fn w0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let q = E.mul_add(x, 1.0);
    if x > 100.0 {
        // Newton on y + ln y = ln x, which cannot overflow.
        let lx = x.ln();
        let l2 = lx.ln();
        let mut y = lx - l2 + l2 / lx;
        for _ in 0..50 {
            let f = y + y.ln() - lx;
            let dy = f * y / (1.0 + y);
            y -= dy;
            if dy.abs() <= 1e-16 * y {
                break;
            }
        }
        return y;
    }
    let y0 = if q < 0.3 {
        branch_series((2.0 * q).sqrt())
    } else {
        let l = x.ln_1p();
        l * (1.0 - (l.ln_1p()) / (2.0 + l))
    };
    let y = halley(x, y0);
    if close(x, y) {
        y.max(-1.0)
    } else {
        bisect(x, -1.0, if x < 0.0 { 0.0 } else { x.ln_1p().max(1.0) })
    }
}

fn wm1(x: f64) -> f64 {
    let q = E.mul_add(x, 1.0);
    let y0 = if q < 0.3 {
        branch_series(-(2.0 * q).sqrt())
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    let y = halley(x, y0);
    if close(x, y) && y <= -1.0 {
        y
    } else {
        bisect(x, 2.0 * (-x).ln() - 2.0, -1.0)
    }
}

fn halley(x: f64, mut y: f64) -> f64 {
    for _ in 0..60 {
        let ey = y.exp();
        let f = y * ey - x;
        let y1 = y + 1.0;
        if y1 == 0.0 || f == 0.0 {
            break;
        }
        let denom = ey * y1 - (y + 2.0) * f / (2.0 * y1);
        let dy = f / denom;
        if !dy.is_finite() {
            break;
        }
        y -= dy;
        if dy.abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) {
            break;
        }
    }
    y
}

fn close(x: f64, y: f64) -> bool {
    y.is_finite() && (y * y.exp() - x).abs() <= 1e-13 * x.abs()
}

/// Bisection on `y e^y - x` over a bracket containing exactly one root.
fn bisect(x: f64, mut lo: f64, mut hi: f64) -> f64 {
    let f = |y: f64| y * y.exp() - x;
    let flo = f(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma: argument {x} must be positive and finite")));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        a += p / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    HALF_LN_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

/// Digamma function `d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("digamma: argument {x} must be positive and finite")));
    }
    Ok(digamma_pos(x))
}

pub(crate) fn digamma_pos(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    acc + digamma_asymptotic(x)
}

fn digamma_asymptotic(y: f64) -> f64 {
    let r = 1.0 / (y * y);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32_760.0 - r / 12.0))))));
    y.ln() - 0.5 / y - series
}

fn ln_gamma_asymptotic(y: f64) -> f64 {
    let r = 1.0 / (y * y);
    let series = (1.0 / y)
        * (1.0 / 12.0
            - r * (1.0 / 360.0
                - r * (1.0 / 1260.0
                    - r * (1.0 / 1680.0 - r * (1.0 / 1188.0 - r * (691.0 / 360_360.0 - r / 156.0))))));
    (y - 0.5) * y.ln() - y + HALF_LN_2PI + series
}

/// `(ln Γ(x), ψ(x))` for `x` in `[1, 2]`, sharing one upward shift.
/// This is the pair needed by the gradient of the local indices.
pub(crate) fn ln_gamma_digamma_unit(x: f64) -> (f64, f64) {
    let mut prod = x;
    let mut recip = 1.0 / x;
    for k in 1..8 {
        let xk = x + k as f64;
        prod *= xk;
        recip += 1.0 / xk;
    }
    let y = x + 8.0;
    (ln_gamma_asymptotic(y) - prod.ln(), digamma_asymptotic(y) - recip)
}

const CHEB_PANELS: usize = 8;
const CHEB_TERMS: usize = 18;

/// Piecewise Chebyshev expansions of `ln Γ` and `ψ` on `[1, 2]`, one per
/// panel of width 1/8.
pub(crate) struct UnitGammaTable {
    ln_gamma: [[f64; CHEB_TERMS]; CHEB_PANELS],
    digamma: [[f64; CHEB_TERMS]; CHEB_PANELS],
}

impl UnitGammaTable {
    pub(crate) fn get() -> &'static UnitGammaTable {
        static TABLE: OnceLock<UnitGammaTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let n = CHEB_TERMS;
            let h = 1.0 / CHEB_PANELS as f64;
            let mut t = UnitGammaTable {
                ln_gamma: [[0.0; CHEB_TERMS]; CHEB_PANELS],
                digamma: [[0.0; CHEB_TERMS]; CHEB_PANELS],
            };
            for p in 0..CHEB_PANELS {
                let mid = 1.0 + h * (p as f64 + 0.5);
                for j in 0..n {
                    let theta = PI * (j as f64 + 0.5) / n as f64;
                    let (lg, dg) = ln_gamma_digamma_unit(mid + 0.5 * h * theta.cos());
                    for k in 0..n {
                        let ck = (k as f64 * theta).cos() * 2.0 / n as f64;
                        t.ln_gamma[p][k] += lg * ck;
                        t.digamma[p][k] += dg * ck;
                    }
                }
                t.ln_gamma[p][0] *= 0.5;
                t.digamma[p][0] *= 0.5;
            }
            t
        })
    }

    #[inline]
    fn locate(x: f64) -> (usize, f64) {
        let y = (x - 1.0) * CHEB_PANELS as f64;
        let p = (y as usize).min(CHEB_PANELS - 1);
        (p, 2.0 * (y - p as f64) - 1.0)
    }

    /// `ln Γ(x)` for `x` in `[1, 2]`.
    #[inline]
    pub(crate) fn ln_gamma(&self, x: f64) -> f64 {
        let (p, u) = Self::locate(x);
        clenshaw(&self.ln_gamma[p], u)
    }

    /// `ψ(x)` for `x` in `[1, 2]`.
    #[inline]
    pub(crate) fn digamma(&self, x: f64) -> f64 {
        let (p, u) = Self::locate(x);
        clenshaw(&self.digamma[p], u)
    }
}

#[inline]
fn clenshaw(c: &[f64; CHEB_TERMS], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c[1..].iter().rev() {
        let b0 = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + c[0]
}
