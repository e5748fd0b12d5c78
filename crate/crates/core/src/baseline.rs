//! Matrix-factorization baselines: biased MF, bias-free MF0 and
//! non-negative MF, all fitted by per-dyad SGD on the cumulative training
//! grades.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::debug;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RecordSet;
use crate::error::{Error, Result};
use crate::mftci::model::{index_map, matrix_from_rows, rows_of};
use crate::predictor::{GradePredictor, Prediction};
use crate::scale::MAX_GRADE;
use crate::sgd::{self, Biases, Observation, RegShares, SgdSettings};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "MF")]
    Mf,
    #[serde(rename = "MF0")]
    Mf0,
    #[serde(rename = "NMF")]
    Nmf,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mf => "MF",
            Variant::Mf0 => "MF0",
            Variant::Nmf => "NMF",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(Variant::Mf),
            "mf0" => Ok(Variant::Mf0),
            "nmf" => Ok(Variant::Nmf),
            _ => Err(Error::InvalidConfig(format!("unknown baseline `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub k: usize,
    pub learning_rate: f64,
    /// L2 weight on factors (and biases for MF).
    pub gamma: f64,
    pub max_epochs: usize,
    /// Stop when the relative objective improvement falls below this.
    pub convergence_tol: f64,
    pub rng_seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 10,
            learning_rate: 0.005,
            gamma: 0.01,
            max_epochs: 500,
            convergence_tol: 1e-5,
            rng_seed: 0,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return bad(format!("convergence_tol must be > 0, got {}", self.convergence_tol));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return bad(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        Ok(())
    }
}

/// A trained baseline. `mu`, `p` and `q` stay zero for MF0 and NMF.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub variant: Variant,
    pub k: usize,
    pub mu: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// `k x n`, one column per student.
    pub u: DMatrix<f64>,
    /// `k x m`, one column per course.
    pub v: DMatrix<f64>,
    pub grade_floor: f64,
    /// Training mean, used for cold-start dyads.
    pub global_mean: f64,
    /// Settings the model was trained with (defaults for hand-built models).
    pub train_config: TrainConfig,
    student_ids: Vec<String>,
    course_ids: Vec<String>,
    student_lookup: HashMap<String, usize>,
    course_lookup: HashMap<String, usize>,
}

/// Result of a training run: the model and the per-epoch objective.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub model: BaselineModel,
    pub objective_trace: Vec<f64>,
}

/// Observations from the cumulative training matrix, in a compact index
/// over the students and courses that have at least one grade.
pub(crate) struct CompactDyads {
    pub student_ids: Vec<String>,
    pub course_ids: Vec<String>,
    pub obs: Vec<Observation>,
}

pub(crate) fn cumulative_dyads(train: &RecordSet) -> Result<CompactDyads> {
    let cum = train.cumulative_matrix(train.last_term())?;
    let mut student_map = vec![usize::MAX; train.n_students()];
    let mut course_used = vec![false; train.n_courses()];
    let mut student_ids = Vec::new();
    for (s, c, _) in cum.iter() {
        if student_map[s] == usize::MAX {
            student_map[s] = student_ids.len();
            student_ids.push(train.student_id(s).to_string());
        }
        course_used[c] = true;
    }
    let mut course_map = vec![usize::MAX; train.n_courses()];
    let mut course_ids = Vec::new();
    for (c, used) in course_used.iter().enumerate() {
        if *used {
            course_map[c] = course_ids.len();
            course_ids.push(train.course_id(c).to_string());
        }
    }
    let obs = cum
        .iter()
        .map(|(s, c, g)| Observation {
            student: student_map[s],
            course: course_map[c],
            target: g,
        })
        .collect();
    Ok(CompactDyads {
        student_ids,
        course_ids,
        obs,
    })
}

/// Trains one baseline variant.
pub fn train_baseline(train: &RecordSet, variant: Variant, cfg: &TrainConfig) -> Result<BaselineModel> {
    train_baseline_traced(train, variant, cfg).map(|fit| fit.model)
}

pub fn train_baseline_traced(train: &RecordSet, variant: Variant, cfg: &TrainConfig) -> Result<BaselineFit> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty);
    }
    let dyads = cumulative_dyads(train)?;
    let (n, m) = (dyads.student_ids.len(), dyads.course_ids.len());
    let mean = dyads.obs.iter().map(|o| o.target).sum::<f64>() / dyads.obs.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut u = sgd::init_uniform(&mut rng, cfg.k, n, cfg.init_scale);
    let mut v = sgd::init_uniform(&mut rng, cfg.k, m, cfg.init_scale);
    let mut biases = (variant == Variant::Mf).then(|| Biases {
        mu: mean,
        p: vec![0.0; n],
        q: vec![0.0; m],
    });
    let settings = SgdSettings {
        lr: cfg.learning_rate,
        nonneg: variant == Variant::Nmf,
    };
    let shares = RegShares::new(&dyads.obs, n, m, cfg.gamma);

    let mut trace = Vec::new();
    let mut previous = sgd::objective(&u, &v, biases.as_ref(), &dyads.obs, cfg.gamma);
    for epoch in 1..=cfg.max_epochs {
        let order = sgd::shuffled_order(&mut rng, dyads.obs.len());
        sgd::sweep(&mut u, &mut v, biases.as_mut(), &dyads.obs, &order, &shares, settings);
        let obj = sgd::objective(&u, &v, biases.as_ref(), &dyads.obs, cfg.gamma);
        if !obj.is_finite() {
            return Err(Error::Diverged {
                stage: "baseline epoch",
                iteration: epoch,
            });
        }
        trace.push(obj);
        let rel = (previous - obj).abs() / previous.abs().max(f64::MIN_POSITIVE);
        previous = obj;
        if rel < cfg.convergence_tol {
            debug!("{variant} converged after {epoch} epochs, objective {obj:.6}");
            break;
        }
    }

    let (mu, p, q) = match biases {
        Some(b) => (b.mu, b.p, b.q),
        None => (0.0, vec![0.0; n], vec![0.0; m]),
    };
    let model = BaselineModel {
        variant,
        k: cfg.k,
        mu,
        p,
        q,
        u,
        v,
        grade_floor: train.scale().failing_epsilon(),
        global_mean: mean,
        train_config: cfg.clone(),
        student_lookup: index_map(&dyads.student_ids),
        course_lookup: index_map(&dyads.course_ids),
        student_ids: dyads.student_ids,
        course_ids: dyads.course_ids,
    };
    Ok(BaselineFit {
        model,
        objective_trace: trace,
    })
}

impl BaselineModel {
    /// A model with explicit parameters, indexed by the given ids.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        variant: Variant,
        mu: f64,
        p: Vec<f64>,
        q: Vec<f64>,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        student_ids: Vec<String>,
        course_ids: Vec<String>,
        grade_floor: f64,
        global_mean: f64,
    ) -> Result<Self> {
        let (k, n, m) = (u.nrows(), student_ids.len(), course_ids.len());
        if u.ncols() != n || v.ncols() != m || v.nrows() != k || p.len() != n || q.len() != m {
            return Err(Error::ModelFormat("parameter shapes do not match the indices".into()));
        }
        if variant != Variant::Mf && (mu != 0.0 || p.iter().chain(&q).any(|&b| b != 0.0)) {
            return Err(Error::ModelFormat(format!("{variant} has no bias terms")));
        }
        if variant == Variant::Nmf && u.iter().chain(v.iter()).any(|&x| x < 0.0) {
            return Err(Error::ModelFormat("NMF factors must be non-negative".into()));
        }
        Ok(BaselineModel {
            variant,
            k,
            mu,
            p,
            q,
            u,
            v,
            grade_floor,
            global_mean,
            train_config: TrainConfig::default(),
            student_lookup: index_map(&student_ids),
            course_lookup: index_map(&course_ids),
            student_ids,
            course_ids,
        })
    }

    pub fn student_index(&self, id: &str) -> Option<usize> {
        self.student_lookup.get(id).copied()
    }

    pub fn course_index(&self, id: &str) -> Option<usize> {
        self.course_lookup.get(id).copied()
    }

    pub fn n_students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn n_courses(&self) -> usize {
        self.course_ids.len()
    }

    /// `mu + p_s + q_c + u_s.v_c`, clamped into `[failing_epsilon, 4]`.
    pub fn predict(&self, s: usize, c: usize) -> Result<f64> {
        if s >= self.n_students() {
            return Err(Error::IndexOutOfRange {
                what: "student",
                index: s,
                size: self.n_students(),
            });
        }
        if c >= self.n_courses() {
            return Err(Error::IndexOutOfRange {
                what: "course",
                index: c,
                size: self.n_courses(),
            });
        }
        let raw = self.mu + self.p[s] + self.q[c] + self.u.column(s).dot(&self.v.column(c));
        Ok(raw.clamp(self.grade_floor, MAX_GRADE))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = BaselineFile {
            format_version: FORMAT_VERSION,
            variant: self.variant,
            k: self.k,
            mu: self.mu,
            p: self.p.clone(),
            q: self.q.clone(),
            u: rows_of(&self.u),
            v: rows_of(&self.v),
            student_index: self.student_ids.clone(),
            course_index: self.course_ids.clone(),
            grade_floor: self.grade_floor,
            global_mean: self.global_mean,
            train_config: self.train_config.clone(),
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Self::from_file(serde_json::from_reader(reader)?)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        Self::from_file(serde_json::from_value(value)?)
    }

    fn from_file(f: BaselineFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}",
                f.format_version
            )));
        }
        let n = f.student_index.len();
        let m = f.course_index.len();
        let u = matrix_from_rows(&f.u, f.k, n, "U")?;
        let v = matrix_from_rows(&f.v, f.k, m, "V")?;
        let mut model = Self::from_parts(
            f.variant,
            f.mu,
            f.p,
            f.q,
            u,
            v,
            f.student_index,
            f.course_index,
            f.grade_floor,
            f.global_mean,
        )?;
        model.train_config = f.train_config;
        Ok(model)
    }
}

impl GradePredictor for BaselineModel {
    fn predict_for(&self, student_id: &str, course_id: &str, _term: u32, _history: &RecordSet) -> Prediction {
        match (self.student_index(student_id), self.course_index(course_id)) {
            (Some(s), Some(c)) => Prediction {
                grade: self.predict(s, c).expect("indices come from the model's own maps"),
                cold_start: false,
            },
            _ => Prediction {
                grade: self.global_mean,
                cold_start: true,
            },
        }
    }

    fn method_name(&self) -> String {
        self.variant.to_string()
    }
}

#[derive(Serialize, Deserialize)]
struct BaselineFile {
    format_version: u32,
    variant: Variant,
    k: usize,
    mu: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    student_index: Vec<String>,
    course_index: Vec<String>,
    grade_floor: f64,
    global_mean: f64,
    #[serde(default)]
    train_config: TrainConfig,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_records;
    use crate::scale::LetterScale;

    fn records(text: &str) -> RecordSet {
        parse_records(
            format!("student_id,course_id,term,grade\n{text}").as_bytes(),
            &LetterScale::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_dyad_mf0_fits_exactly() {
        let rs = records("s,c,0,B\n");
        let cfg = TrainConfig {
            k: 1,
            gamma: 0.0,
            learning_rate: 0.05,
            max_epochs: 5000,
            convergence_tol: 1e-12,
            init_scale: 0.5,
            ..Default::default()
        };
        let model = train_baseline(&rs, Variant::Mf0, &cfg).unwrap();
        let uv = model.u.column(0).dot(&model.v.column(0));
        assert!((uv - 3.0).abs() < 1e-3, "u.v = {uv}");
        assert_eq!(model.mu, 0.0);
    }

    #[test]
    fn hard_bias_regularization_recovers_mean() {
        let rs = records("s1,c1,0,C\ns2,c2,0,A\n");
        let cfg = TrainConfig {
            k: 1,
            gamma: 100.0,
            init_scale: 0.0,
            max_epochs: 2000,
            ..Default::default()
        };
        let model = train_baseline(&rs, Variant::Mf, &cfg).unwrap();
        assert!((model.mu - 3.0).abs() < 1e-2, "mu = {}", model.mu);
        assert!(model.p.iter().chain(&model.q).all(|b| b.abs() < 1e-2));
    }

    #[test]
    fn nmf_stays_non_negative() {
        let rs = records("s1,c1,0,C\ns1,c2,0,A\ns2,c1,0,F\ns2,c3,0,B\ns3,c2,1,D\ns3,c3,1,A\n");
        let cfg = TrainConfig { k: 3, learning_rate: 0.05, ..Default::default() };
        let model = train_baseline(&rs, Variant::Nmf, &cfg).unwrap();
        assert!(model.u.iter().chain(model.v.iter()).all(|&x| x >= 0.0));
        assert_eq!(model.mu, 0.0);
    }

    #[test]
    fn predict_sums_and_clamps() {
        let ids = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let mf0 = BaselineModel::from_parts(
            Variant::Mf0,
            0.0,
            vec![0.0],
            vec![0.0],
            DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
            DMatrix::from_column_slice(2, 1, &[0.5, 1.0]),
            ids("s", 1),
            ids("c", 1),
            0.1,
            3.0,
        )
        .unwrap();
        assert_eq!(mf0.predict(0, 0).unwrap(), 2.5);
        assert!(mf0.predict(1, 0).is_err());

        let mf = BaselineModel::from_parts(
            Variant::Mf,
            3.0,
            vec![0.2],
            vec![-0.1],
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            ids("s", 1),
            ids("c", 1),
            0.1,
            3.0,
        )
        .unwrap();
        assert!((mf.predict(0, 0).unwrap() - 3.1).abs() < 1e-12);

        let big = BaselineModel::from_parts(
            Variant::Mf0,
            0.0,
            vec![0.0],
            vec![0.0],
            DMatrix::from_column_slice(1, 1, &[2.0]),
            DMatrix::from_column_slice(1, 1, &[2.6]),
            ids("s", 1),
            ids("c", 1),
            0.1,
            3.0,
        )
        .unwrap();
        assert_eq!(big.predict(0, 0).unwrap(), 4.0);
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let rs = records("s1,c1,0,C\ns1,c2,0,A\ns2,c1,0,F\ns2,c2,1,B\n");
        let cfg = TrainConfig { k: 2, max_epochs: 50, ..Default::default() };
        let a = train_baseline(&rs, Variant::Mf, &cfg).unwrap();
        let b = train_baseline(&rs, Variant::Mf, &cfg).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_json(&mut buf).unwrap();
        assert_eq!(BaselineModel::read_json(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn divergence_is_reported() {
        let rs = records("s1,c1,0,A\ns1,c2,0,A\ns2,c1,0,A\n");
        let cfg = TrainConfig { k: 2, learning_rate: 50.0, init_scale: 1.0, ..Default::default() };
        let err = train_baseline(&rs, Variant::Mf0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("mf0".parse::<Variant>().unwrap(), Variant::Mf0);
        assert_eq!("NMF".parse::<Variant>().unwrap(), Variant::Nmf);
        assert!("svd".parse::<Variant>().is_err());
    }
}
