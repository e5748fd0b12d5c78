//! Oracles and fixtures shared by the integration tests. Everything here is
//! computed independently of the library's own fast paths.

#![allow(dead_code)]

use gradecast::data::RawRecord;
use gradecast::mftci::{AdmmState, MftciModel};
use gradecast::{LetterScale, RecordSet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nuclear norm from the eigenvalues of `Z^T Z`, avoiding the SVD.
pub fn nuclear_norm_eig(z: &DMatrix<f64>) -> f64 {
    let gram = z.transpose() * z;
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum()
}

/// `tau ||Z||_* + rho/2 ||X - Z||_F^2`.
pub fn nuclear_prox_objective(z: &DMatrix<f64>, x: &DMatrix<f64>, tau: f64, rho: f64) -> f64 {
    tau * nuclear_norm_eig(z) + 0.5 * rho * (x - z).norm_squared()
}

/// Minimizes the nuclear-norm prox objective through the factorization
/// `Z = L R^T`, using `||Z||_* = min (||L||^2 + ||R||^2) / 2`, by gradient
/// descent with backtracking on the smooth factored objective.
pub fn nuclear_prox_oracle(x: &DMatrix<f64>, tau: f64, rho: f64, iters: usize) -> DMatrix<f64> {
    let n = x.ncols();
    let f = |l: &DMatrix<f64>, r: &DMatrix<f64>| {
        0.5 * tau * (l.norm_squared() + r.norm_squared()) + 0.5 * rho * (x - l * r.transpose()).norm_squared()
    };
    let mut l = x.clone();
    let mut r = DMatrix::<f64>::identity(n, n);
    let mut step = 1.0;
    let mut current = f(&l, &r);
    for _ in 0..iters {
        let resid = &l * r.transpose() - x;
        let gl = &l * tau + &resid * &r * rho;
        let gr = &r * tau + resid.transpose() * &l * rho;
        let g2 = gl.norm_squared() + gr.norm_squared();
        if g2 < 1e-30 {
            break;
        }
        loop {
            let nl = &l - &gl * step;
            let nr = &r - &gr * step;
            let next = f(&nl, &nr);
            if next <= current - 0.5 * step * g2 {
                l = nl;
                r = nr;
                current = next;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return l * r.transpose();
            }
        }
    }
    l * r.transpose()
}

/// Proximal map of `thr * |z|` over `z >= 0`, found by bisection on the
/// optimality condition `z - x + thr = 0`.
pub fn scalar_prox_oracle(x: f64, thr: f64) -> f64 {
    let deriv = |z: f64| z - x + thr;
    if deriv(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, x.abs() + thr.abs() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Step-2 objective for a given `A`, evaluated by brute force over the
/// training records: squared loss of the full model plus the two ADMM
/// coupling terms.
pub fn influence_objective_oracle(train: &RecordSet, model: &MftciModel, state: &AdmmState, a: &DMatrix<f64>) -> f64 {
    let hyper = &model.hyper;
    let mut loss = 0.0;
    for r in train.records() {
        let s = model.student_index(train.student_id(r.student)).unwrap();
        let c = model.course_index(train.course_id(r.course)).unwrap();
        let mut pred = model.u.column(s).dot(&model.v.column(c));
        for depth in 1..=hyper.previous_terms as u32 {
            let window: Vec<_> = train
                .records()
                .iter()
                .filter(|h| h.student == r.student && r.term >= depth && h.term == r.term - depth)
                .collect();
            if window.is_empty() {
                continue;
            }
            let sum: f64 = window
                .iter()
                .map(|h| a[(model.course_index(train.course_id(h.course)).unwrap(), c)] * h.grade)
                .sum();
            pred += (-(depth as f64) * hyper.alpha).exp() * sum / window.len() as f64;
        }
        loss += 0.5 * (r.grade - pred).powi(2);
    }
    let rho = hyper.rho;
    loss + 0.5 * rho * (a - &state.z1 + &state.u1).norm_squared() + 0.5 * rho * (a - &state.z2 + &state.u2).norm_squared()
}

/// Every student takes every course in every term, with random letters.
pub fn dense_instance(students: usize, courses: usize, terms: u32, seed: u64) -> RecordSet {
    let scale = LetterScale::default();
    let labels: Vec<String> = scale.labels().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::new();
    for s in 0..students {
        for c in 0..courses {
            for t in 0..terms {
                raw.push(RawRecord {
                    student_id: format!("s{s}"),
                    course_id: format!("c{c}"),
                    term: t,
                    letter: labels[rng.random_range(0..labels.len())].clone(),
                    tag: None,
                });
            }
        }
    }
    RecordSet::from_raw(scale, raw).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Median of repeated timings, in seconds.
pub fn median_secs(mut f: impl FnMut(), reps: usize) -> f64 {
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let t = std::time::Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[reps / 2]
}
