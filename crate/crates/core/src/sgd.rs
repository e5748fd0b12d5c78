//! Per-dyad stochastic gradient descent on latent factors, shared by the
//! baselines and the factor step of the influence solver.
//!
//! The objective is
//! `1/2 sum (target - mu - p_s - q_c - u_s.v_c)^2 + gamma/2 (|U|^2 + |V|^2 + |p|^2 + |q|^2)`
//! (bias terms only when present). Regularization is split across a row's
//! observations, so one epoch is an unbiased pass over the full objective.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// One observed cell and the value the factors should reproduce.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation {
    pub student: usize,
    pub course: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Biases {
    pub mu: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SgdSettings {
    pub lr: f64,
    pub nonneg: bool,
}

/// Per-row share of the regularizer: `gamma / count`.
pub(crate) struct RegShares {
    student: Vec<f64>,
    course: Vec<f64>,
}

impl RegShares {
    pub fn new(obs: &[Observation], n: usize, m: usize, gamma: f64) -> Self {
        let mut sc = vec![0usize; n];
        let mut cc = vec![0usize; m];
        for o in obs {
            sc[o.student] += 1;
            cc[o.course] += 1;
        }
        let share = |c: usize| if c == 0 { 0.0 } else { gamma / c as f64 };
        RegShares {
            student: sc.into_iter().map(share).collect(),
            course: cc.into_iter().map(share).collect(),
        }
    }
}

/// Fills `u` and `v` with `Uniform(0, scale)` draws, column by column.
pub(crate) fn init_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = scale * rng.random::<f64>();
        }
    }
    m
}

pub(crate) fn shuffled_order<R: Rng>(rng: &mut R, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    order
}

fn bias_part(biases: &Option<&mut Biases>, s: usize, c: usize) -> f64 {
    biases.as_ref().map_or(0.0, |b| b.mu + b.p[s] + b.q[c])
}

/// One pass over `obs` in the given order.
pub(crate) fn sweep(
    u: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    mut biases: Option<&mut Biases>,
    obs: &[Observation],
    order: &[usize],
    shares: &RegShares,
    settings: SgdSettings,
) {
    let lr = settings.lr;
    let k = u.nrows();
    for &i in order {
        let Observation { student: s, course: c, target } = obs[i];
        let pred = bias_part(&biases, s, c) + u.column(s).dot(&v.column(c));
        let e = target - pred;
        let (ws, wc) = (shares.student[s], shares.course[c]);
        if let Some(b) = biases.as_deref_mut() {
            b.mu += lr * e;
            b.p[s] += lr * (e - ws * b.p[s]);
            b.q[c] += lr * (e - wc * b.q[c]);
        }
        for f in 0..k {
            let uf = u[(f, s)];
            let vf = v[(f, c)];
            let mut nu = uf + lr * (e * vf - ws * uf);
            let mut nv = vf + lr * (e * uf - wc * vf);
            if settings.nonneg {
                nu = nu.max(0.0);
                nv = nv.max(0.0);
            }
            u[(f, s)] = nu;
            v[(f, c)] = nv;
        }
    }
}

/// Squared loss plus regularization.
pub(crate) fn objective(
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    biases: Option<&Biases>,
    obs: &[Observation],
    gamma: f64,
) -> f64 {
    let loss: f64 = obs
        .iter()
        .map(|o| {
            let b = biases.map_or(0.0, |b| b.mu + b.p[o.student] + b.q[o.course]);
            let e = o.target - b - u.column(o.student).dot(&v.column(o.course));
            e * e
        })
        .sum();
    let mut reg = u.norm_squared() + v.norm_squared();
    if let Some(b) = biases {
        reg += b.p.iter().map(|x| x * x).sum::<f64>() + b.q.iter().map(|x| x * x).sum::<f64>();
    }
    0.5 * loss + 0.5 * gamma * reg
}
