use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::{split_run_finite, SplitTrace};
use crate::chains::finite::{five_state, five_state_split, two_state_control};
use crate::chains::FiniteChain;
use crate::error::{Error, Result};
use crate::numeric::chi_square_sf;

/// `(last state of tour i, first state of tour i + 1)` for every pair of
/// consecutive complete tours.
pub fn boundary_pairs(trace: &SplitTrace<usize>) -> Vec<(usize, usize)> {
    let starts = trace.tour_boundaries();
    starts
        .iter()
        .skip(1)
        .filter(|&&s| s < trace.states.len())
        .map(|&s| (trace.states[s - 1], trace.states[s]))
        .collect()
}

/// Stationary joint law of the states on either side of a regeneration,
/// by enumerating every path `x, x_1, ..., x_{m-1}, y` of one bridged
/// skeleton step. The bell state `x` is weighted by `pi(x) 1_C(x)`.
pub fn boundary_joint_exact(
    chain: &FiniteChain,
    m: u32,
    epsilon: f64,
    nu_m: &[f64],
    small_set: &[bool],
) -> Result<DMatrix<f64>> {
    chain.check_minorization(m, epsilon, nu_m, small_set)?;
    let k = chain.n_states();
    let pi = chain.stationary()?;
    let pm = chain.power(m);
    let z: f64 = (0..k).filter(|&x| small_set[x]).map(|x| pi[x]).sum();
    if !(z > 0.0) {
        return Err(Error::validation("small set has no stationary mass"));
    }
    let mut joint = DMatrix::zeros(k, k);
    let mut path = Vec::with_capacity(m as usize + 1);
    for x in (0..k).filter(|&x| small_set[x]) {
        path.clear();
        path.push(x);
        enumerate(chain, m as usize, &mut path, 1.0, &mut |p, w| {
            let y = p[p.len() - 1];
            let u = p[p.len() - 2];
            if nu_m[y] > 0.0 {
                joint[(u, y)] += pi[x] / z * nu_m[y] * w / pm[(x, y)];
            }
        });
    }
    Ok(joint)
}

fn enumerate<F: FnMut(&[usize], f64)>(chain: &FiniteChain, m: usize, path: &mut Vec<usize>, w: f64, visit: &mut F) {
    if path.len() == m + 1 {
        visit(path, w);
        return;
    }
    let cur = path[path.len() - 1];
    for nxt in 0..chain.n_states() {
        let p = chain.prob(cur, nxt);
        if p > 0.0 {
            path.push(nxt);
            enumerate(chain, m, path, w * p, visit);
            path.pop();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub m: u32,
    pub tours: usize,
    /// Observed last-of-tour states, in table row order.
    pub rows: Vec<String>,
    /// Observed first-of-tour states, in table column order.
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Exact `P(first = col | last = row)`.
    pub exact_conditional: Vec<Vec<f64>>,
    /// Exact `P(first = col)`.
    pub exact_marginal: Vec<f64>,
    /// `max |P(first | last) - P(first)|` over the table.
    pub exact_gap: f64,
}

/// Chi-square test of independence between consecutive tours, plus the
/// exact conditional law for comparison.
#[allow(clippy::too_many_arguments)]
pub fn dependence_probe<R: Rng + ?Sized>(
    chain: &FiniteChain,
    m: u32,
    epsilon: f64,
    nu_m: &[f64],
    small_set: &[bool],
    x0: usize,
    n_tours: usize,
    rng: &mut R,
) -> Result<DependenceReport> {
    if n_tours < 2 {
        return Err(Error::validation("need at least 2 tour pairs"));
    }
    let joint = boundary_joint_exact(chain, m, epsilon, nu_m, small_set)?;
    let pi = chain.stationary()?;
    let rate: f64 = (0..chain.n_states()).filter(|&x| small_set[x]).map(|x| pi[x] * epsilon).sum();
    let mut skel = ((n_tours as f64 + 10.0) / rate * 1.1).ceil() as usize;
    let pairs = loop {
        let trace = split_run_finite(chain, m, epsilon, nu_m, small_set, x0, skel, rng)?;
        let mut p = boundary_pairs(&trace);
        if p.len() >= n_tours {
            p.truncate(n_tours);
            break p;
        }
        skel *= 2;
    };

    let k = chain.n_states();
    let mut full = vec![vec![0u64; k]; k];
    for &(u, v) in &pairs {
        full[u][v] += 1;
    }
    let rows: Vec<usize> = (0..k).filter(|&u| full[u].iter().any(|&c| c > 0)).collect();
    let cols: Vec<usize> = (0..k).filter(|&v| rows.iter().any(|&u| full[u][v] > 0)).collect();
    let counts: Vec<Vec<u64>> = rows.iter().map(|&u| cols.iter().map(|&v| full[u][v]).collect()).collect();
    let (chi2, dof) = pearson(&counts);
    let p_value = if dof == 0 { 1.0 } else { chi_square_sf(chi2, dof as f64) };

    let col_mass: Vec<f64> = (0..k).map(|v| joint.column(v).sum()).collect();
    let exact_conditional: Vec<Vec<f64>> = rows
        .iter()
        .map(|&u| {
            let rs = joint.row(u).sum();
            cols.iter().map(|&v| if rs > 0.0 { joint[(u, v)] / rs } else { f64::NAN }).collect()
        })
        .collect();
    let exact_marginal: Vec<f64> = cols.iter().map(|&v| col_mass[v]).collect();
    let mut exact_gap: f64 = 0.0;
    for u in 0..k {
        let rs = joint.row(u).sum();
        if rs > 0.0 {
            for v in 0..k {
                exact_gap = exact_gap.max((joint[(u, v)] / rs - col_mass[v]).abs());
            }
        }
    }
    let label = |i: &usize| chain.labels()[*i].clone();
    Ok(DependenceReport {
        m,
        tours: pairs.len(),
        rows: rows.iter().map(label).collect(),
        cols: cols.iter().map(label).collect(),
        counts,
        chi2,
        dof,
        p_value,
        exact_conditional,
        exact_marginal,
        exact_gap,
    })
}

fn pearson(counts: &[Vec<u64>]) -> (f64, usize) {
    let r = counts.len();
    let c = counts.first().map_or(0, |row| row.len());
    if r < 2 || c < 2 {
        return (0.0, 0);
    }
    let total: f64 = counts.iter().flatten().map(|&v| v as f64).sum();
    let row_t: Vec<f64> = counts.iter().map(|row| row.iter().map(|&v| v as f64).sum()).collect();
    let col_t: Vec<f64> = (0..c).map(|j| counts.iter().map(|row| row[j] as f64).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = row_t[i] * col_t[j] / total;
            chi2 += (counts[i][j] as f64 - e).powi(2) / e;
        }
    }
    (chi2, (r - 1) * (c - 1))
}

/// The probe on the five-state chain split at `m = 4`.
pub fn tour_dependence_probe<R: Rng + ?Sized>(n_tours: usize, rng: &mut R) -> Result<DependenceReport> {
    let (m, eps, nu, cset) = five_state_split();
    dependence_probe(&five_state(), m, eps, &nu, &cset, 0, n_tours, rng)
}

/// The same probe on a two-state chain split at `m = 1`, where tours are
/// independent.
pub fn two_state_control_probe<R: Rng + ?Sized>(n_tours: usize, rng: &mut R) -> Result<DependenceReport> {
    let c = two_state_control();
    dependence_probe(&c, 1, 0.7, &[3.0 / 7.0, 4.0 / 7.0], &[true, true], 0, n_tours, rng)
}
