//! ADMM fitting of the influence model.
//!
//! The non-smooth penalties on `A` are split off onto two auxiliary copies,
//! `Z1` (nuclear norm) and `Z2` (L1), with scaled duals `U1` and `U2`. Each
//! outer iteration runs four steps:
//!
//! 1. SGD sweeps on `U`, `V` against the residual targets `g - delta`.
//! 2. Projected gradient steps on the co-taken entries of `A`.
//! 3. `Z1 = S_{tau/rho}(A + U1)`, `Z2 = E_{lambda/rho}(A + U2)`.
//! 4. `U1 += A - Z1`, `U2 += A - Z2`.
//!
//! Every training grade is explained by the student's own preceding terms:
//! a grade from term `t` draws its influence terms from `t-1` and `t-2`.

use std::collections::HashMap;
use std::io::Write;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{CoTakenMask, MftciModel};
use super::prox::{nuclear_norm, shrink_singular_values, soft_threshold};
use super::{delta_term, HistoryView, MftciHyper};
use crate::data::RecordSet;
use crate::error::{Error, Result};
use crate::sgd::{self, Observation, RegShares, SgdSettings};

/// Auxiliary and dual variables plus per-iteration traces.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub z1: DMatrix<f64>,
    pub z2: DMatrix<f64>,
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    /// `||A - Z1||_F` after each outer iteration.
    pub primal_r1: Vec<f64>,
    /// `||A - Z2||_F` after each outer iteration.
    pub primal_r2: Vec<f64>,
    /// `rho * ||(Z1, Z2) - previous (Z1, Z2)||_F`.
    pub dual_residuals: Vec<f64>,
    /// Full objective (loss, factor penalty, nuclear and L1 norms of `A`).
    pub objective_trace: Vec<f64>,
}

impl AdmmState {
    fn zeros(m: usize) -> Self {
        AdmmState {
            z1: DMatrix::zeros(m, m),
            z2: DMatrix::zeros(m, m),
            u1: DMatrix::zeros(m, m),
            u2: DMatrix::zeros(m, m),
            primal_r1: Vec::new(),
            primal_r2: Vec::new(),
            dual_residuals: Vec::new(),
            objective_trace: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }

    /// Writes `iter,objective,primal_r1,primal_r2` rows, iterations from 1.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,objective,primal_r1,primal_r2")?;
        for i in 0..self.iterations() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                self.objective_trace[i],
                self.primal_r1[i],
                self.primal_r2[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub objective: f64,
    pub primal_r1: f64,
    pub primal_r2: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone, Copy)]
struct Dyad {
    student: usize,
    course: usize,
    grade: f64,
    /// Ranges into `Problem::entries` for depths 1 and 2.
    history: [(usize, usize); 2],
}

/// Training grades in a compact index with their influence windows.
#[derive(Debug, Clone)]
struct Problem {
    dyads: Vec<Dyad>,
    entries: Vec<(usize, f64)>,
    student_ids: Vec<String>,
    course_ids: Vec<String>,
}

impl Problem {
    fn build(train: &RecordSet, previous_terms: usize) -> Self {
        let mut student_map = vec![usize::MAX; train.n_students()];
        let mut course_map = vec![usize::MAX; train.n_courses()];
        let mut used_s = vec![false; train.n_students()];
        let mut used_c = vec![false; train.n_courses()];
        for r in train.records() {
            used_s[r.student] = true;
            used_c[r.course] = true;
        }
        let mut student_ids = Vec::new();
        for (s, used) in used_s.iter().enumerate() {
            if *used {
                student_map[s] = student_ids.len();
                student_ids.push(train.student_id(s).to_string());
            }
        }
        let mut course_ids = Vec::new();
        for (c, used) in used_c.iter().enumerate() {
            if *used {
                course_map[c] = course_ids.len();
                course_ids.push(train.course_id(c).to_string());
            }
        }

        let mut entries = Vec::new();
        let mut windows: HashMap<(usize, u32), (usize, usize)> = HashMap::new();
        let mut dyads = Vec::with_capacity(train.len());
        for r in train.records() {
            let mut history = [(0, 0); 2];
            for depth in 1..=previous_terms {
                let Some(t) = r.term.checked_sub(depth as u32) else {
                    continue;
                };
                if t < train.first_term() {
                    continue;
                }
                history[depth - 1] = *windows.entry((r.student, t)).or_insert_with(|| {
                    let start = entries.len();
                    entries.extend(
                        train
                            .student_term_records(r.student, t)
                            .iter()
                            .map(|h| (course_map[h.course], h.grade)),
                    );
                    (start, entries.len())
                });
            }
            dyads.push(Dyad {
                student: student_map[r.student],
                course: course_map[r.course],
                grade: r.grade,
                history,
            });
        }
        Problem {
            dyads,
            entries,
            student_ids,
            course_ids,
        }
    }

    fn window(&self, d: &Dyad, depth: usize) -> &[(usize, f64)] {
        let (a, b) = d.history[depth - 1];
        &self.entries[a..b]
    }

    fn view(&self, d: &Dyad) -> HistoryView<'_> {
        HistoryView::new(self.window(d, 1), self.window(d, 2))
    }

    fn co_taken(&self, m: usize, previous_terms: usize) -> CoTakenMask {
        let mut pairs = Vec::new();
        for d in &self.dyads {
            for depth in 1..=previous_terms {
                pairs.extend(self.window(d, depth).iter().map(|&(cp, _)| (cp, d.course)));
            }
        }
        CoTakenMask::new(m, pairs)
    }
}

/// Stateful solver exposing each ADMM step.
pub struct Fitter {
    problem: Problem,
    model: MftciModel,
    state: AdmmState,
    rng: ChaCha8Rng,
    shares: RegShares,
    obs: Vec<Observation>,
}

impl Fitter {
    /// Validates the inputs and initializes `U, V ~ Uniform(0, init_scale)`
    /// with `A`, `Z1`, `Z2`, `U1`, `U2` all zero.
    pub fn new(train: &RecordSet, hyper: MftciHyper) -> Result<Self> {
        hyper.validate()?;
        if train.is_empty() {
            return Err(Error::Empty);
        }
        if train.n_terms() < hyper.previous_terms + 1 {
            return Err(Error::InvalidConfig(format!(
                "training data spans {} term(s); at least {} needed",
                train.n_terms(),
                hyper.previous_terms + 1
            )));
        }
        let problem = Problem::build(train, hyper.previous_terms);
        let (n, m) = (problem.student_ids.len(), problem.course_ids.len());
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
        let u = sgd::init_uniform(&mut rng, hyper.k, n, hyper.init_scale);
        let v = sgd::init_uniform(&mut rng, hyper.k, m, hyper.init_scale);
        let mean = problem.dyads.iter().map(|d| d.grade).sum::<f64>() / problem.dyads.len() as f64;
        let mask = problem.co_taken(m, hyper.previous_terms);
        let mut model = MftciModel::zeros(
            hyper,
            problem.student_ids.clone(),
            problem.course_ids.clone(),
            train.scale().failing_epsilon(),
            mean,
        );
        model.u = u;
        model.v = v;
        model.mask = mask;
        let obs: Vec<Observation> = problem
            .dyads
            .iter()
            .map(|d| Observation {
                student: d.student,
                course: d.course,
                target: d.grade,
            })
            .collect();
        let shares = RegShares::new(&obs, n, m, model.hyper.gamma);
        debug!(
            "fit: {n} students, {m} courses, {} dyads, {} co-taken pairs",
            obs.len(),
            model.mask.len()
        );
        Ok(Fitter {
            problem,
            model,
            state: AdmmState::zeros(m),
            rng,
            shares,
            obs,
        })
    }

    pub fn model(&self) -> &MftciModel {
        &self.model
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    /// Mutable access for tests and custom schedules.
    pub fn model_mut(&mut self) -> &mut MftciModel {
        &mut self.model
    }

    pub fn state_mut(&mut self) -> &mut AdmmState {
        &mut self.state
    }

    pub fn n_dyads(&self) -> usize {
        self.problem.dyads.len()
    }

    /// Sum of both influence terms for every dyad under influence matrix `a`.
    fn deltas(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let hyper = &self.model.hyper;
        self.problem
            .dyads
            .iter()
            .map(|d| {
                (1..=hyper.previous_terms)
                    .map(|depth| delta_term(a, hyper.decay(depth), self.problem.window(d, depth), d.course))
                    .sum()
            })
            .collect()
    }

    /// `g - g_hat` for every dyad under the current parameters.
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals_with(&self.model.a)
    }

    fn residuals_with(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let (u, v) = (&self.model.u, &self.model.v);
        self.problem
            .dyads
            .iter()
            .zip(self.deltas(a))
            .map(|(d, delta)| d.grade - u.column(d.student).dot(&v.column(d.course)) - delta)
            .collect()
    }

    /// Objective of the factor step: `1/2 sum (f - u.v)^2 + gamma/2 (|U|^2 + |V|^2)`.
    pub fn factor_objective(&self) -> f64 {
        sgd::objective(&self.model.u, &self.model.v, None, &self.obs, self.model.hyper.gamma)
    }

    /// Full objective with the current `A`.
    pub fn objective(&self) -> f64 {
        let hyper = &self.model.hyper;
        let loss: f64 = self.residuals().iter().map(|r| r * r).sum();
        let a = &self.model.a;
        0.5 * loss
            + 0.5 * hyper.gamma * (self.model.u.norm_squared() + self.model.v.norm_squared())
            + hyper.tau * nuclear_norm(a)
            + hyper.lambda * a.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Step 1: SGD sweeps on `U`, `V` with `A` held fixed.
    pub fn update_factors(&mut self) -> Result<()> {
        let deltas = self.deltas(&self.model.a);
        for (o, (d, delta)) in self.obs.iter_mut().zip(self.problem.dyads.iter().zip(deltas)) {
            o.target = d.grade - delta;
        }
        let settings = SgdSettings {
            lr: self.model.hyper.uv_lr,
            nonneg: self.model.hyper.nonneg_factors,
        };
        for sweep in 1..=self.model.hyper.inner_uv_iters {
            let order = sgd::shuffled_order(&mut self.rng, self.obs.len());
            sgd::sweep(
                &mut self.model.u,
                &mut self.model.v,
                None,
                &self.obs,
                &order,
                &self.shares,
                settings,
            );
            if !self.factor_objective().is_finite() {
                return Err(Error::Diverged {
                    stage: "factor sweep",
                    iteration: sweep,
                });
            }
        }
        Ok(())
    }

    /// Gradient of the influence-step objective (loss plus the ADMM coupling
    /// terms) with respect to `A`, evaluated on co-taken entries. Entries
    /// outside the mask are zero.
    pub fn influence_gradient(&self) -> DMatrix<f64> {
        self.influence_gradient_at(&self.model.a)
    }

    fn influence_gradient_at(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let hyper = &self.model.hyper;
        let s = &self.state;
        let rho = hyper.rho;
        let m = a.nrows();
        let mut grad = DMatrix::zeros(m, m);
        let residuals = self.residuals_with(a);
        for (d, r) in self.problem.dyads.iter().zip(residuals) {
            for depth in 1..=hyper.previous_terms {
                let window = self.problem.window(d, depth);
                if window.is_empty() {
                    continue;
                }
                let w = r * hyper.decay(depth) / window.len() as f64;
                for &(cp, g) in window {
                    grad[(cp, d.course)] -= w * g;
                }
            }
        }
        for &(i, j) in self.model.mask.pairs() {
            grad[(i, j)] += rho
                * ((a[(i, j)] - s.z1[(i, j)]) + (a[(i, j)] - s.z2[(i, j)]) + s.u1[(i, j)] + s.u2[(i, j)]);
        }
        grad
    }

    /// Step 2: projected gradient steps on the co-taken entries of `A`.
    pub fn update_influence(&mut self) -> Result<()> {
        let lr = self.model.hyper.lr;
        for iter in 1..=self.model.hyper.inner_a_iters {
            let grad = self.influence_gradient();
            for &(i, j) in self.model.mask.pairs() {
                let next = self.model.a[(i, j)] - lr * grad[(i, j)];
                if !next.is_finite() {
                    return Err(Error::Diverged {
                        stage: "influence step",
                        iteration: iter,
                    });
                }
                self.model.a[(i, j)] = next.max(0.0);
            }
        }
        Ok(())
    }

    /// Step 3: proximal updates of the auxiliaries.
    pub fn update_auxiliaries(&mut self) -> Result<()> {
        let hyper = &self.model.hyper;
        let a = &self.model.a;
        self.state.z1 = shrink_singular_values(&(a + &self.state.u1), hyper.tau / hyper.rho)?;
        self.state.z2 = soft_threshold(&(a + &self.state.u2), hyper.lambda / hyper.rho);
        Ok(())
    }

    /// Step 4: dual ascent.
    pub fn update_duals(&mut self) {
        let a = &self.model.a;
        self.state.u1 += a - &self.state.z1;
        self.state.u2 += a - &self.state.z2;
    }

    /// Runs steps 1 to 4 once and appends to the traces.
    pub fn iterate(&mut self) -> Result<IterationStats> {
        let (z1_prev, z2_prev) = (self.state.z1.clone(), self.state.z2.clone());
        self.update_factors()?;
        self.update_influence()?;
        self.update_auxiliaries()?;
        self.update_duals();

        let a = &self.model.a;
        let primal_r1 = (a - &self.state.z1).norm();
        let primal_r2 = (a - &self.state.z2).norm();
        let dz = (&self.state.z1 - z1_prev).norm_squared() + (&self.state.z2 - z2_prev).norm_squared();
        let dual_residual = self.model.hyper.rho * dz.sqrt();
        let objective = self.objective();
        if !objective.is_finite() {
            return Err(Error::Diverged {
                stage: "outer",
                iteration: self.state.iterations() + 1,
            });
        }
        self.state.primal_r1.push(primal_r1);
        self.state.primal_r2.push(primal_r2);
        self.state.dual_residuals.push(dual_residual);
        self.state.objective_trace.push(objective);
        let stats = IterationStats {
            iteration: self.state.iterations(),
            objective,
            primal_r1,
            primal_r2,
            dual_residual,
        };
        info!(
            "iter={} objective={:.6} primal_r1={:.3e} primal_r2={:.3e} dual={:.3e}",
            stats.iteration, objective, primal_r1, primal_r2, dual_residual
        );
        Ok(stats)
    }

    /// Whether the relative primal residual is below `residual_tol`.
    pub fn converged(&self, stats: &IterationStats) -> bool {
        let scale = self.model.a.norm().max(1.0);
        stats.primal_r1.max(stats.primal_r2) / scale < self.model.hyper.residual_tol
    }

    /// Iterates until convergence or `outer_max_iters`.
    pub fn run(mut self) -> Result<(MftciModel, AdmmState)> {
        for _ in 0..self.model.hyper.outer_max_iters {
            let stats = self.iterate()?;
            if self.converged(&stats) {
                debug!("converged after {} iterations", stats.iteration);
                break;
            }
        }
        Ok(self.into_parts())
    }

    pub fn into_parts(self) -> (MftciModel, AdmmState) {
        (self.model, self.state)
    }

    /// Influence window of every training dyad, for inspection.
    pub fn dyad_views(&self) -> impl Iterator<Item = (usize, usize, f64, HistoryView<'_>)> {
        self.problem
            .dyads
            .iter()
            .map(|d| (d.student, d.course, d.grade, self.problem.view(d)))
    }
}

/// Fits the influence model on term-stamped training records.
pub fn fit(train: &RecordSet, hyper: MftciHyper) -> Result<(MftciModel, AdmmState)> {
    Fitter::new(train, hyper)?.run()
}
