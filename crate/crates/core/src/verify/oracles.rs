//! Brute-force reference computations for the acceptance suite. None of
//! these call the solvers or closed forms they are compared against.

use std::f64::consts::{E, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use statrs::distribution::{Continuous, Gamma};

use crate::chains::hrem::{HremData, HremHyper};
use crate::chains::hrem_bounds::constants;
use crate::ratebounds::Geometry;

const ROOT_GRID: usize = 64;
const ARGMAX_COARSE: usize = 1000;
const ARGMAX_FINE: usize = 40;
const ARGMAX_ROUNDS: usize = 5;

/// Root of `(r - 1) / (r ln^2(R/r)) = e^2 beta (R - 1) / (8 (L - 1))` by
/// repeatedly scanning a uniform grid for the first sign change.
pub fn solve_r1_grid(beta: f64, big_r: f64, big_l: f64) -> f64 {
    let rhs = E * E * beta * (big_r - 1.0) / (8.0 * (big_l - 1.0));
    let g = |r: f64| {
        let l = (big_r / r).ln();
        (r - 1.0) / (r * l * l) - rhs
    };
    let (mut lo, mut hi) = (1.0, big_r);
    for _ in 0..40 {
        let h = (hi - lo) / ROOT_GRID as f64;
        let k = (1..ROOT_GRID).find(|&i| g(lo + i as f64 * h) > 0.0).unwrap_or(ROOT_GRID);
        let new_lo = lo + (k - 1) as f64 * h;
        let new_hi = if k == ROOT_GRID { hi } else { lo + k as f64 * h };
        if new_hi - new_lo >= hi - lo {
            break;
        }
        lo = new_lo;
        hi = new_hi;
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `max_R R1(beta, R, L(R))` over `(1, R0)` by a uniform grid followed by
/// nested local grids. Returns `(R_tilde, R1)`.
pub fn argmax_r1_grid(beta: f64, geo: &Geometry) -> (f64, f64) {
    let eval = |r: f64| {
        let l = geo.l(r);
        if !(l > 1.0) || !l.is_finite() {
            1.0
        } else {
            solve_r1_grid(beta, r, l)
        }
    };
    let span = geo.r0 - 1.0;
    let mut h = span / (ARGMAX_COARSE + 1) as f64;
    let (mut best_r, mut best_v) = (1.0 + h, f64::NEG_INFINITY);
    for i in 1..=ARGMAX_COARSE {
        let r = 1.0 + h * i as f64;
        let v = eval(r);
        if v > best_v {
            best_v = v;
            best_r = r;
        }
    }
    for _ in 0..ARGMAX_ROUNDS {
        let (lo, hi) = ((best_r - h).max(1.0), (best_r + h).min(geo.r0));
        let step = (hi - lo) / (ARGMAX_FINE + 1) as f64;
        for i in 1..=ARGMAX_FINE {
            let r = lo + step * i as f64;
            let v = eval(r);
            if v > best_v {
                best_v = v;
                best_r = r;
            }
        }
        h = step;
    }
    (best_r, best_v)
}

fn gl() -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(30).expect("nonzero"))
}

/// Composite 30-point Gauss-Legendre.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gl();
    let h = (b - a) / panels as f64;
    (0..panels).map(|i| rule.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &f)).sum()
}

/// `int min(Gamma(s, r1), Gamma(s, r2))`, split where the densities cross.
pub fn gamma_overlap(shape: f64, r1: f64, r2: f64) -> f64 {
    let g1 = Gamma::new(shape, r1).expect("valid gamma");
    let g2 = Gamma::new(shape, r2).expect("valid gamma");
    let f = |x: f64| g1.pdf(x).min(g2.pdf(x));
    let cross = shape * (r2 / r1).ln() / (r2 - r1);
    let rmin = r1.min(r2);
    let upper = (shape + 40.0 * shape.sqrt()) / rmin;
    integrate(f, 0.0, cross, 200) + integrate(f, cross, upper, 200)
}

/// Block-sampler minorization constant on `{V <= d_R}` with weights
/// `(phi1, phi2)`, as the product of two Gamma overlaps.
pub fn block_minorization_quadrature(d_r: f64, phi1: f64, phi2: f64, hyper: &HremHyper, data: &HremData) -> f64 {
    let k = data.k() as f64;
    let s1 = k / 2.0 + hyper.a1;
    let s2 = data.big_m as f64 / 2.0 + hyper.a2;
    let base2 = data.sse / 2.0 + hyper.b2;
    gamma_overlap(s1, hyper.b1, hyper.b1 + d_r / (2.0 * phi1)) * gamma_overlap(s2, base2, base2 + d_r / (2.0 * phi2))
}

/// `ln int exp(h)` over `[a, b]`, shifted by the largest of `scan`
/// equally spaced values of `h` so the integrand stays representable.
fn ln_integrate<F: Fn(f64) -> f64>(h: F, a: f64, b: f64, panels: usize, scan: usize) -> f64 {
    let shift = (0..=scan)
        .map(|i| h(a + (b - a) * i as f64 / scan as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    shift + integrate(|x| (h(x) - shift).exp(), a, b, panels).ln()
}

/// `ln` of the fixed-scan minorization constant on `{V <= d_R}`, by
/// nested quadrature over `theta_i` and `mu` in the log domain.
pub fn gibbs_ln_minorization_quadrature(d_r: f64, c3: f64, data: &HremData, hyper: &HremHyper) -> f64 {
    let c = constants(data, hyper);
    let k = data.k() as f64;
    let ld = d_r.ln() / c3;
    let c4 = c.delta7 / (k * c.delta1 * d_r);
    let w = ((hyper.m0 - data.ybar).powi(2) + d_r).sqrt();
    let (c_l, c_u) = (data.ybar - w, data.ybar + w);
    let prec = hyper.s0 + k * ld;

    let ln_g1 = |mu: f64| {
        let mut acc = k / 2.0 * (c4 / (2.0 * PI)).ln();
        for i in 0..data.k() {
            let (m, y) = (data.m[i] as f64, data.ybar_i[i]);
            let h = |th: f64| -ld / 2.0 * ((th - mu).powi(2) + m * (th - y).powi(2));
            let centre = (mu + m * y) / (1.0 + m);
            let half = 40.0 / (ld * (1.0 + m)).sqrt();
            acc += ln_integrate(h, centre - half, centre + half, 16, 64);
        }
        acc
    };
    let ln_g2 = |mu: f64| {
        let centre = if mu <= data.ybar { c_u } else { c_l };
        0.5 * (prec / (2.0 * PI)).ln() - prec * (mu - centre).powi(2) / 2.0
    };
    let h = |mu: f64| ln_g1(mu) + ln_g2(mu);
    let frac: f64 = data.m.iter().map(|&m| m as f64 / (1.0 + m as f64)).sum();
    let sd = 1.0 / prec.min(ld * frac).sqrt();
    let reach = w + (hyper.m0 - data.ybar).abs() + 40.0 * sd;
    // The lower envelope switches centre at ybar and can peak sharply
    // there, so the panels shrink geometrically towards ybar.
    let mut pieces = Vec::new();
    for dir in [-1.0, 1.0] {
        let mut outer = reach;
        for _ in 0..48 {
            let inner = outer / 2.0;
            let (a, b) = (data.ybar + dir * inner, data.ybar + dir * outer);
            pieces.push(ln_integrate(h, a.min(b), a.max(b), 4, 16));
            outer = inner;
        }
    }
    let hi = pieces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ln_int = hi + pieces.iter().map(|p| (p - hi).exp()).sum::<f64>().ln();
    0.5 * ((hyper.s0 + k * c4) / prec).ln() + ln_int
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_root_solves_the_equation() {
        let (beta, r, l) = (0.3, 2.0, 5.0);
        let x = solve_r1_grid(beta, r, l);
        let lhs = (x - 1.0) / (x * (r / x).ln().powi(2));
        let rhs = E * E * beta * (r - 1.0) / (8.0 * (l - 1.0));
        assert!((lhs / rhs - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overlap_of_identical_gammas_is_one() {
        assert!((gamma_overlap(4.0, 2.0, 2.0 + 1e-12) - 1.0).abs() < 1e-9);
        assert!(gamma_overlap(4.0, 1.0, 50.0) < 0.01);
    }
}
