use rand::Rng;
use serde::Serialize;

use super::{retrospective_bell, RegenEstimates};
use crate::chains::SplitMinorization;
use crate::error::{Error, Result};

/// Which part of a walk is summarised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkWindow {
    /// Discarded leading samples.
    pub burn_in: u64,
    /// Samples averaged.
    pub n: u64,
    /// Keep every `spacing`-th state.
    pub spacing: u64,
    pub theta_b: f64,
}

impl WalkWindow {
    pub fn new(burn_in: u64, n: u64) -> Self {
        WalkWindow { burn_in, n, spacing: 1, theta_b: 0.5 }
    }

    /// Chain steps simulated for this window.
    pub fn steps(&self) -> Option<u64> {
        self.burn_in.checked_add(self.n)?.checked_mul(self.spacing)
    }
}

/// Summary of one walk built in a single pass, without storing the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkSummary {
    pub n: u64,
    pub mean: f64,
    /// Sample variance of `f` over the window.
    pub sample_var: f64,
    /// Batch-means estimate of the asymptotic variance.
    pub bm_var: Option<f64>,
    /// Regenerative estimates from the one-step split, when at least two
    /// tours complete inside the window and `spacing = 1`.
    pub regen: Option<RegenEstimates>,
    pub bells: u64,
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }
}

#[derive(Default)]
struct TourSums {
    open: bool,
    cur_s: f64,
    cur_n: u64,
    r: u64,
    ss: f64,
    sn: u64,
    s2: f64,
    snn: f64,
    sn2: f64,
}

impl TourSums {
    fn close(&mut self) {
        if self.open {
            self.r += 1;
            self.ss += self.cur_s;
            self.sn += self.cur_n;
            self.s2 += self.cur_s * self.cur_s;
            self.snn += self.cur_s * self.cur_n as f64;
            self.sn2 += (self.cur_n * self.cur_n) as f64;
        }
        self.open = true;
        self.cur_s = 0.0;
        self.cur_n = 0;
    }

    fn estimates(&self) -> Option<RegenEstimates> {
        if self.r < 2 {
            return None;
        }
        let i_hat = self.ss / self.sn as f64;
        let n_bar = self.sn as f64 / self.r as f64;
        let dev = (self.s2 - 2.0 * i_hat * self.snn + i_hat * i_hat * self.sn2).max(0.0);
        Some(RegenEstimates { i_hat, xi2: dev / (self.r as f64 * n_bar * n_bar), n_bar, tours: self.r as usize })
    }
}

/// Runs the one-step split chain from `x0` and summarises `f` over the
/// window. `visit(index, state, bell)` sees every simulated state.
pub fn stream_walk<K, F, R, V>(
    kernel: &K,
    x0: K::State,
    window: &WalkWindow,
    f: F,
    rng: &mut R,
    mut visit: V,
) -> Result<WalkSummary>
where
    K: SplitMinorization,
    F: Fn(&K::State) -> f64,
    R: Rng + ?Sized,
    V: FnMut(u64, &K::State, bool),
{
    if window.n == 0 || window.spacing == 0 {
        return Err(Error::validation("window needs n >= 1 and spacing >= 1"));
    }
    if !(window.theta_b > 0.0 && window.theta_b < 1.0) {
        return Err(Error::validation("batch exponent must lie in (0, 1)"));
    }
    let total = window.steps().ok_or_else(|| Error::validation("walk length overflows"))?;
    let nf = window.n as f64;
    let b = (nf.powf(window.theta_b).floor() as u64).max(1);
    let a = (nf.powf(1.0 - window.theta_b).floor() as u64).min(window.n / b);
    let split = window.spacing == 1;
    let start = window.burn_in;

    let mut w = Welford::default();
    let mut batch_sums = Vec::with_capacity(a as usize);
    let (mut cur_batch, mut in_batch) = (0.0, 0u64);
    let mut tours = TourSums::default();
    let mut bells = 0u64;
    let mut x = x0;
    for i in 0..total {
        let keep = i % window.spacing == 0 && i / window.spacing >= start;
        let y = kernel.step(&x, rng);
        let bell = split && retrospective_bell(kernel, &x, &y, rng)?;
        visit(i, &x, bell);
        if keep {
            let v = f(&x);
            w.push(v);
            if (batch_sums.len() as u64) < a {
                cur_batch += v;
                in_batch += 1;
                if in_batch == b {
                    batch_sums.push(cur_batch);
                    cur_batch = 0.0;
                    in_batch = 0;
                }
            }
            if tours.open {
                tours.cur_s += v;
                tours.cur_n += 1;
            }
        }
        if bell {
            bells += 1;
            if i + 1 >= start {
                tours.close();
            }
        }
        x = y;
    }

    let bm_var = (a >= 2).then(|| {
        let grand = batch_sums.iter().sum::<f64>() / (a * b) as f64;
        let ss: f64 = batch_sums.iter().map(|s| (s / b as f64 - grand).powi(2)).sum();
        b as f64 * ss / (a - 1) as f64
    });
    Ok(WalkSummary {
        n: w.n,
        mean: w.mean,
        sample_var: if w.n > 1 { w.m2 / (w.n - 1) as f64 } else { 0.0 },
        bm_var,
        regen: if split { tours.estimates() } else { None },
        bells,
    })
}
