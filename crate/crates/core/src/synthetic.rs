//! Synthetic grade data with a planted low-rank competence model and a
//! planted sparse course-influence matrix.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{RawRecord, RecordSet};
use crate::error::{Error, Result};
use crate::mftci::delta_term;
use crate::mftci::model::rows_of;
use crate::scale::{LetterScale, MAX_GRADE};

/// Mean of the planted competence term `u*.v*`.
const MEAN_COMPETENCE: f64 = 2.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_students: usize,
    pub m_courses: usize,
    pub n_terms: usize,
    pub true_rank: usize,
    pub courses_per_term: usize,
    /// Gaussian noise in grade points.
    pub noise_sigma: f64,
    /// Fraction of off-diagonal course pairs with planted influence.
    pub influence_density: f64,
    /// Planted weights are drawn from `influence_scale * Uniform(0.5, 1)`.
    pub influence_scale: f64,
    pub decay_alpha: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_students: 300,
            m_courses: 20,
            n_terms: 6,
            true_rank: 3,
            courses_per_term: 3,
            noise_sigma: 0.1,
            influence_density: 0.15,
            influence_scale: 0.5,
            decay_alpha: 0.5,
            rng_seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("n_students", self.n_students),
            ("m_courses", self.m_courses),
            ("n_terms", self.n_terms),
            ("true_rank", self.true_rank),
            ("courses_per_term", self.courses_per_term),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.courses_per_term > self.m_courses {
            return bad(format!(
                "courses_per_term ({}) exceeds m_courses ({})",
                self.courses_per_term, self.m_courses
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.influence_density) {
            return bad(format!(
                "influence_density must lie in [0, 1], got {}",
                self.influence_density
            ));
        }
        if !(self.influence_scale.is_finite() && self.influence_scale >= 0.0) {
            return bad(format!("influence_scale must be >= 0, got {}", self.influence_scale));
        }
        if !self.decay_alpha.is_finite() {
            return bad("decay_alpha must be finite".into());
        }
        Ok(())
    }
}

/// The planted parameters behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `k* x n`.
    pub u: DMatrix<f64>,
    /// `k* x m`.
    pub v: DMatrix<f64>,
    /// `m x m`, zero diagonal.
    pub a: DMatrix<f64>,
    pub config: SyntheticConfig,
}

#[derive(Serialize)]
struct GroundTruthFile<'a> {
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    config: &'a SyntheticConfig,
}

impl GroundTruth {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = GroundTruthFile {
            u: rows_of(&self.u),
            v: rows_of(&self.v),
            a: rows_of(&self.a),
            config: &self.config,
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    /// Planted influence pairs `(source, target)` with positive weight.
    pub fn influence_support(&self) -> Vec<(usize, usize)> {
        let m = self.a.nrows();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if self.a[(i, j)] > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn student_id(s: usize) -> String {
    format!("s{s:05}")
}

pub fn course_id(c: usize) -> String {
    format!("c{c:04}")
}

/// Samples a dataset following the influence model.
///
/// Each student takes `courses_per_term` distinct courses per term, preferring
/// courses they have not taken yet. A grade is
/// `u*.v* + delta(t-1) + delta(t-2) + noise`, where the influence terms use
/// the student's already generated (snapped) grades, clamped to `[0, 4]` and
/// snapped to the nearest letter.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(RecordSet, GroundTruth)> {
    cfg.validate()?;
    let scale = LetterScale::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (n, m, k) = (cfg.n_students, cfg.m_courses, cfg.true_rank);

    let level = (MEAN_COMPETENCE / k as f64).sqrt();
    let draw_factor = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        DMatrix::from_fn(rows, cols, |_, _| level * rng.random_range(0.5..1.5))
    };
    let u = draw_factor(k, n, &mut rng);
    let v = draw_factor(k, m, &mut rng);

    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j && rng.random::<f64>() < cfg.influence_density {
                a[(i, j)] = cfg.influence_scale * rng.random_range(0.5..1.0);
            }
        }
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let decay = |d: usize| (-(d as f64) * cfg.decay_alpha).exp();

    let mut raw = Vec::with_capacity(n * cfg.n_terms * cfg.courses_per_term);
    for s in 0..n {
        let mut taken = vec![false; m];
        // (course, grade) per term for this student.
        let mut terms: Vec<Vec<(usize, f64)>> = Vec::with_capacity(cfg.n_terms);
        for t in 0..cfg.n_terms {
            let fresh: Vec<usize> = (0..m).filter(|&c| !taken[c]).collect();
            let chosen: Vec<usize> = if fresh.len() >= cfg.courses_per_term {
                sample(&mut rng, fresh.len(), cfg.courses_per_term)
                    .into_iter()
                    .map(|i| fresh[i])
                    .collect()
            } else {
                sample(&mut rng, m, cfg.courses_per_term).into_vec()
            };
            let mut graded = Vec::with_capacity(chosen.len());
            for c in chosen {
                let mut score = u.column(s).dot(&v.column(c));
                for depth in 1..=2usize {
                    if t >= depth {
                        score += delta_term(&a, decay(depth), &terms[t - depth], c);
                    }
                }
                if cfg.noise_sigma > 0.0 {
                    score += noise.sample(&mut rng);
                }
                let pos = scale.nearest_position(score.clamp(0.0, MAX_GRADE))?;
                graded.push((c, scale.points(pos)));
                taken[c] = true;
                raw.push(RawRecord {
                    student_id: student_id(s),
                    course_id: course_id(c),
                    term: t as u32,
                    letter: scale.label(pos).to_string(),
                    tag: None,
                });
            }
            terms.push(graded);
        }
    }
    let records = RecordSet::from_raw(scale, raw)?;
    Ok((
        records,
        GroundTruth {
            u,
            v,
            a,
            config: cfg.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_students: 40,
            m_courses: 10,
            n_terms: 4,
            ..Default::default()
        }
    }

    #[test]
    fn record_count() {
        let cfg = SyntheticConfig {
            n_students: 200,
            m_courses: 30,
            n_terms: 6,
            true_rank: 3,
            courses_per_term: 4,
            ..Default::default()
        };
        let (rs, truth) = generate_synthetic(&cfg).unwrap();
        assert_eq!(rs.len(), 200 * 6 * 4);
        assert_eq!(rs.n_terms(), 6);
        assert_eq!(truth.u.shape(), (3, 200));
        assert_eq!(truth.a.shape(), (30, 30));
    }

    #[test]
    fn deterministic_for_seed() {
        let (a, ta) = generate_synthetic(&small()).unwrap();
        let (b, tb) = generate_synthetic(&small()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(ta, tb);
        let (c, _) = generate_synthetic(&SyntheticConfig { rng_seed: 9, ..small() }).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn noiseless_without_influence_is_snapped_competence() {
        let cfg = SyntheticConfig {
            influence_density: 0.0,
            noise_sigma: 0.0,
            ..small()
        };
        let (rs, truth) = generate_synthetic(&cfg).unwrap();
        assert!(truth.a.iter().all(|&x| x == 0.0));
        for r in rs.records() {
            let s: usize = rs.student_id(r.student)[1..].parse().unwrap();
            let c: usize = rs.course_id(r.course)[1..].parse().unwrap();
            let raw = truth.u.column(s).dot(&truth.v.column(c)).clamp(0.0, 4.0);
            assert_eq!(r.grade, rs.scale().snap(raw).unwrap());
        }
    }

    #[test]
    fn planted_influence_density() {
        let cfg = SyntheticConfig { m_courses: 40, influence_density: 0.15, ..small() };
        let (_, truth) = generate_synthetic(&cfg).unwrap();
        let support = truth.influence_support();
        let frac = support.len() as f64 / (40.0 * 39.0);
        assert!((frac - 0.15).abs() < 0.04, "density {frac}");
        assert!(support.iter().all(|&(i, j)| i != j));
        assert!(truth.a.iter().all(|&x| (0.0..=0.5).contains(&x)));
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = SyntheticConfig { courses_per_term: 11, ..small() };
        assert!(generate_synthetic(&cfg).is_err());
        let cfg = SyntheticConfig { influence_density: 1.5, ..small() };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn ground_truth_json_keys() {
        let (_, truth) = generate_synthetic(&small()).unwrap();
        let mut buf = Vec::new();
        truth.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["U", "V", "A", "config"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["A"].as_array().unwrap().len(), 10);
    }
}
