//! Method dispatch, holdout evaluation and hyperparameter grid search.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::baseline::{train_baseline, BaselineModel, TrainConfig, Variant};
use crate::data::RecordSet;
use crate::error::{Error, Result};
use crate::eval::{predict_batch, report, MetricsReport, PredictionBatch};
use crate::mftci::{fit, MftciHyper, MftciModel};
use crate::predictor::{GradePredictor, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Mftci,
    Baseline(Variant),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Mftci => f.write_str("mftci"),
            Method::Baseline(v) => f.write_str(&v.to_string().to_ascii_lowercase()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mftci") {
            Ok(Method::Mftci)
        } else {
            s.parse().map(Method::Baseline)
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Either kind of fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Mftci(MftciModel),
    Baseline(BaselineModel),
}

impl TrainedModel {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        match self {
            TrainedModel::Mftci(m) => m.write_json(writer),
            TrainedModel::Baseline(m) => m.write_json(writer),
        }
    }

    /// Reads either model format; the `A_sparse` key marks an influence model.
    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(reader)?;
        if value.get("A_sparse").is_some() {
            MftciModel::from_json_value(value).map(TrainedModel::Mftci)
        } else if value.get("variant").is_some() {
            BaselineModel::from_json_value(value).map(TrainedModel::Baseline)
        } else {
            Err(Error::ModelFormat("neither an influence nor a baseline model".into()))
        }
    }
}

impl GradePredictor for TrainedModel {
    fn predict_for(&self, student_id: &str, course_id: &str, term: u32, history: &RecordSet) -> Prediction {
        match self {
            TrainedModel::Mftci(m) => m.predict_for(student_id, course_id, term, history),
            TrainedModel::Baseline(m) => m.predict_for(student_id, course_id, term, history),
        }
    }

    fn method_name(&self) -> String {
        match self {
            TrainedModel::Mftci(m) => m.method_name(),
            TrainedModel::Baseline(m) => m.method_name(),
        }
    }
}

/// A method with its settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    pub hyper: MftciHyper,
    pub baseline: TrainConfig,
}

impl MethodSpec {
    pub fn mftci(hyper: MftciHyper) -> Self {
        MethodSpec {
            method: Method::Mftci,
            hyper,
            baseline: TrainConfig::default(),
        }
    }

    pub fn baseline(variant: Variant, cfg: TrainConfig) -> Self {
        MethodSpec {
            method: Method::Baseline(variant),
            hyper: MftciHyper::default(),
            baseline: cfg,
        }
    }

    pub fn train(&self, train: &RecordSet) -> Result<TrainedModel> {
        match self.method {
            Method::Mftci => fit(train, self.hyper.clone()).map(|(m, _)| TrainedModel::Mftci(m)),
            Method::Baseline(v) => train_baseline(train, v, &self.baseline).map(TrainedModel::Baseline),
        }
    }
}

/// Outcome of training on terms before `test_term` and scoring `test_term`.
#[derive(Debug, Clone)]
pub struct HoldoutResult {
    pub test_term: u32,
    pub model: TrainedModel,
    pub batch: PredictionBatch,
    pub report: MetricsReport,
}

pub fn holdout(
    data: &RecordSet,
    test_term: u32,
    spec: &MethodSpec,
    exclude_cold_start: bool,
    group_by_tag: bool,
) -> Result<HoldoutResult> {
    let (train, test) = data.split_by_term(test_term)?;
    let model = spec.train(&train)?;
    let mut batch = predict_batch(&model, &test, &train);
    if exclude_cold_start {
        batch = batch.without_cold_start();
    }
    let report = report(&batch, data.scale(), group_by_tag)?;
    Ok(HoldoutResult {
        test_term,
        model,
        batch,
        report,
    })
}

/// The last three populated terms that have earlier training history.
pub fn sweep_terms(data: &RecordSet) -> Vec<u32> {
    let terms: Vec<u32> = data
        .populated_terms()
        .into_iter()
        .filter(|&t| t > data.first_term())
        .collect();
    terms[terms.len().saturating_sub(3)..].to_vec()
}

/// Values to try for each hyperparameter. Scalars outside the grid come from
/// the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub method: Vec<Method>,
    pub k: Vec<usize>,
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lr: Vec<f64>,
    pub uv_lr: Vec<f64>,
    pub previous_terms: Vec<usize>,
    pub seed: Vec<u64>,
    pub inner_uv_iters: usize,
    pub inner_a_iters: usize,
    pub outer_max_iters: usize,
    pub max_epochs: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let h = MftciHyper::default();
        GridSpec {
            method: vec![Method::Mftci],
            k: vec![h.k],
            gamma: vec![h.gamma],
            tau: vec![h.tau],
            lambda: vec![h.lambda],
            rho: vec![h.rho],
            alpha: vec![h.alpha],
            lr: vec![h.lr],
            uv_lr: vec![h.uv_lr],
            previous_terms: vec![h.previous_terms],
            seed: vec![h.rng_seed],
            inner_uv_iters: h.inner_uv_iters,
            inner_a_iters: h.inner_a_iters,
            outer_max_iters: h.outer_max_iters,
            max_epochs: TrainConfig::default().max_epochs,
        }
    }
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Expands the grid. Baselines ignore the influence axes, so they are
    /// crossed only with `k`, `gamma`, `uv_lr` and `seed`.
    pub fn points(&self) -> Result<Vec<MethodSpec>> {
        let axes = [
            ("method", self.method.len()),
            ("k", self.k.len()),
            ("gamma", self.gamma.len()),
            ("tau", self.tau.len()),
            ("lambda", self.lambda.len()),
            ("rho", self.rho.len()),
            ("alpha", self.alpha.len()),
            ("lr", self.lr.len()),
            ("uv_lr", self.uv_lr.len()),
            ("previous_terms", self.previous_terms.len()),
            ("seed", self.seed.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, len)| *len == 0) {
            return Err(Error::InvalidConfig(format!("grid axis `{name}` is empty")));
        }
        let mut out = Vec::new();
        for &method in &self.method {
            for &k in &self.k {
                for &gamma in &self.gamma {
                    for &uv_lr in &self.uv_lr {
                        for &seed in &self.seed {
                            match method {
                                Method::Baseline(v) => {
                                    let cfg = TrainConfig {
                                        k,
                                        gamma,
                                        learning_rate: uv_lr,
                                        rng_seed: seed,
                                        max_epochs: self.max_epochs,
                                        ..TrainConfig::default()
                                    };
                                    cfg.validate()?;
                                    out.push(MethodSpec::baseline(v, cfg));
                                }
                                Method::Mftci => self.push_mftci(&mut out, k, gamma, uv_lr, seed)?,
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn push_mftci(&self, out: &mut Vec<MethodSpec>, k: usize, gamma: f64, uv_lr: f64, seed: u64) -> Result<()> {
        for &tau in &self.tau {
            for &lambda in &self.lambda {
                for &rho in &self.rho {
                    for &alpha in &self.alpha {
                        for &lr in &self.lr {
                            for &previous_terms in &self.previous_terms {
                                let hyper = MftciHyper {
                                    k,
                                    gamma,
                                    tau,
                                    lambda,
                                    rho,
                                    alpha,
                                    lr,
                                    uv_lr,
                                    previous_terms,
                                    rng_seed: seed,
                                    inner_uv_iters: self.inner_uv_iters,
                                    inner_a_iters: self.inner_a_iters,
                                    outer_max_iters: self.outer_max_iters,
                                    ..MftciHyper::default()
                                };
                                hyper.validate()?;
                                out.push(MethodSpec::mftci(hyper));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One evaluated grid point with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub grid_index: usize,
    pub method: String,
    pub k: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub lr: f64,
    pub uv_lr: f64,
    pub previous_terms: usize,
    pub inner_uv_iters: usize,
    pub inner_a_iters: usize,
    pub outer_max_iters: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub pct0: f64,
    pub pct1: f64,
    pub pct2: f64,
}

impl LeaderboardRow {
    fn new(grid_index: usize, spec: &MethodSpec, r: &MetricsReport) -> Self {
        let h = &spec.hyper;
        let b = &spec.baseline;
        let is_mftci = spec.method == Method::Mftci;
        let nan_unless = |v: f64| if is_mftci { v } else { f64::NAN };
        LeaderboardRow {
            grid_index,
            method: match spec.method {
                Method::Mftci if h.previous_terms == 1 => "mftci_p1".into(),
                m => m.to_string(),
            },
            k: if is_mftci { h.k } else { b.k },
            gamma: if is_mftci { h.gamma } else { b.gamma },
            tau: nan_unless(h.tau),
            lambda: nan_unless(h.lambda),
            rho: nan_unless(h.rho),
            alpha: nan_unless(h.alpha),
            lr: nan_unless(h.lr),
            uv_lr: if is_mftci { h.uv_lr } else { b.learning_rate },
            previous_terms: if is_mftci { h.previous_terms } else { 0 },
            inner_uv_iters: if is_mftci { h.inner_uv_iters } else { 0 },
            inner_a_iters: if is_mftci { h.inner_a_iters } else { 0 },
            outer_max_iters: if is_mftci { h.outer_max_iters } else { 0 },
            max_epochs: if is_mftci { 0 } else { b.max_epochs },
            seed: if is_mftci { h.rng_seed } else { b.rng_seed },
            rmse: r.rmse,
            mae: r.mae,
            pct0: r.pct0,
            pct1: r.pct1,
            pct2: r.pct2,
        }
    }
}

/// Trains every grid point on terms before `valid_term`, scores
/// `valid_term`, and sorts by MAE (ties by grid index).
pub fn gridsearch(data: &RecordSet, valid_term: u32, grid: &GridSpec) -> Result<Vec<LeaderboardRow>> {
    let points = grid.points()?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, spec) in points.iter().enumerate() {
        let result = holdout(data, valid_term, spec, false, false)?;
        info!(
            "grid point {}/{} {}: mae={:.4} rmse={:.4}",
            i + 1,
            points.len(),
            spec.method,
            result.report.mae,
            result.report.rmse
        );
        rows.push(LeaderboardRow::new(i, spec, &result.report));
    }
    rows.sort_by(|a, b| a.mae.total_cmp(&b.mae).then(a.grid_index.cmp(&b.grid_index)));
    Ok(rows)
}

pub fn write_leaderboard<W: Write>(rows: &[LeaderboardRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_leaderboard<R: Read>(reader: R) -> Result<Vec<LeaderboardRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}

impl LeaderboardRow {
    /// The settings that produced this row.
    pub fn to_spec(&self) -> Result<MethodSpec> {
        let method: Method = self.method.trim_end_matches("_p1").parse()?;
        Ok(match method {
            Method::Mftci => MethodSpec::mftci(MftciHyper {
                k: self.k,
                gamma: self.gamma,
                tau: self.tau,
                lambda: self.lambda,
                rho: self.rho,
                alpha: self.alpha,
                lr: self.lr,
                uv_lr: self.uv_lr,
                previous_terms: self.previous_terms,
                inner_uv_iters: self.inner_uv_iters,
                inner_a_iters: self.inner_a_iters,
                outer_max_iters: self.outer_max_iters,
                rng_seed: self.seed,
                ..MftciHyper::default()
            }),
            Method::Baseline(v) => MethodSpec::baseline(
                v,
                TrainConfig {
                    k: self.k,
                    gamma: self.gamma,
                    learning_rate: self.uv_lr,
                    max_epochs: self.max_epochs,
                    rng_seed: self.seed,
                    ..TrainConfig::default()
                },
            ),
        })
    }
}
