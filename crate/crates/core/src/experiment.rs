//! Simulation experiments on the degree-corrected block model.
//!
//! An experiment fixes a model, permutes the degree vector once, then for
//! every repetition samples a network, drops isolated nodes and scores each
//! method on the surviving nodes.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::cluster::{KMeansOptions, Labeling};
use crate::dcbm::{equal_sizes, permuted_theta, sample_adjacency, DcbmParams, ThetaPattern};
use crate::eigen::EigenOptions;
use crate::error::{Error, Result};
use crate::eval::{hamming_error, summarize};
use crate::graph::remove_isolated;
use crate::pipeline::{cluster_graph, DetectOptions, Method};
use crate::seed::derive_seed;

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 2013;

const THETA_STREAM: u64 = u64::MAX;

pub const PRESET_IDS: [&str; 9] = ["1", "2a", "2b", "2c", "2d", "3", "4a", "4b", "4c"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    /// Row-major `K x K` block intensities.
    pub a: Vec<Vec<f64>>,
    pub theta: ThetaPattern,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Ratio truncation level for SCORE.
    #[serde(serialize_with = "as_display")]
    pub tn: f64,
    pub kmeans_restarts: usize,
}

fn as_display<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn two_block_a(off: f64) -> Vec<Vec<f64>> {
    vec![vec![1.0, off], vec![off, 1.0]]
}

fn three_block_a() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.4, 0.05],
        vec![0.4, 1.0, 0.4],
        vec![0.05, 0.4, 1.0],
    ]
}

impl ExperimentConfig {
    pub fn preset(id: &str) -> Result<Self> {
        use Method::*;
        let cfg = |n, k, reps, a, theta, methods: Vec<Method>| ExperimentConfig {
            id: id.to_string(),
            n,
            k,
            reps,
            a,
            theta,
            methods,
            seed: DEFAULT_SEED,
            tn: f64::INFINITY,
            kmeans_restarts: KMeansOptions::default().restarts,
        };
        let score_family = vec![Score, ScoreQ(1.0), ScoreQ(2.0)];
        let baselines = vec![Score, Opca, Npca];
        let exp2d_theta = ThetaPattern::Power2Offset { a: 0.015, b: 0.785 };
        Ok(match id {
            "1" => cfg(
                1000,
                2,
                50,
                two_block_a(0.5),
                ThetaPattern::Constant { c: 0.2 },
                baselines,
            ),
            "2a" => cfg(
                2000,
                2,
                100,
                two_block_a(0.4),
                ThetaPattern::Constant { c: 0.1 },
                score_family,
            ),
            "2b" => cfg(
                800,
                2,
                100,
                two_block_a(0.5),
                ThetaPattern::Linear { d0: 0.025, c0: 0.5 },
                score_family,
            ),
            "2c" => cfg(
                1200,
                2,
                100,
                two_block_a(0.5),
                ThetaPattern::Power2Offset { a: 0.025, b: 0.475 },
                score_family,
            ),
            "2d" => cfg(1500, 3, 100, three_block_a(), exp2d_theta, score_family),
            "3" => cfg(
                1500,
                3,
                25,
                three_block_a(),
                exp2d_theta,
                vec![Opca, Npca, ScoreQ(2.0)],
            ),
            "4a" => cfg(
                1000,
                2,
                50,
                two_block_a(0.5),
                ThetaPattern::Linear { d0: 0.02, c0: 0.5 },
                baselines,
            ),
            "4b" => cfg(
                1000,
                2,
                50,
                two_block_a(0.5),
                ThetaPattern::Quadratic { d0: 0.02, c0: 0.5 },
                baselines,
            ),
            "4c" => cfg(
                1000,
                2,
                50,
                two_block_a(0.5),
                ThetaPattern::TwoPoint { c0: 0.5, d0: 0.02 },
                baselines,
            ),
            other => {
                return Err(Error::Argument(format!(
                    "unknown experiment `{other}`; expected one of {}",
                    PRESET_IDS.join(", ")
                )))
            }
        })
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        if self.a.len() != self.k || self.a.iter().any(|r| r.len() != self.k) {
            return Err(Error::Argument(format!("A must be {0} x {0}", self.k)));
        }
        Ok(DMatrix::from_fn(self.k, self.k, |i, j| self.a[i][j]))
    }

    /// Model with the degree vector permuted by the experiment's seed, and
    /// its contiguous true labels.
    pub fn params(&self) -> Result<(DcbmParams, Labeling)> {
        if self.methods.is_empty() {
            return Err(Error::Argument("no methods requested".into()));
        }
        let theta = permuted_theta(&self.theta, self.n, derive_seed(&[self.seed, THETA_STREAM]))?;
        let p = DcbmParams::new(self.a_matrix()?, theta, equal_sizes(self.n, self.k)?)?;
        let labels = p.block_labels();
        Ok((p, labels))
    }

    /// Plain `key = value` lines; `A` rows are separated by `;`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let rows: Vec<String> = self
            .a
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let methods: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(out, "id = {}", self.id);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "reps = {}", self.reps);
        let _ = writeln!(out, "a = {}", rows.join("; "));
        let _ = writeln!(out, "theta = {}", self.theta);
        let _ = writeln!(out, "methods = {}", methods.join(", "));
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "tn = {}", self.tn);
        let _ = writeln!(out, "kmeans_restarts = {}", self.kmeans_restarts);
        out
    }

    /// Parses `to_text` output. Keys may appear in any order; `id = <preset>`
    /// alone loads the preset, and further keys override it.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            pairs.push((
                lineno + 1,
                key.trim().to_ascii_lowercase(),
                value.trim().to_string(),
            ));
        }
        let id = pairs
            .iter()
            .find(|(_, k, _)| k == "id")
            .map(|(_, _, v)| v.clone())
            .unwrap_or_else(|| "custom".to_string());
        let mut cfg = ExperimentConfig::preset(&id).unwrap_or_else(|_| ExperimentConfig {
            id: id.clone(),
            n: 0,
            k: 0,
            reps: 1,
            a: Vec::new(),
            theta: ThetaPattern::Constant { c: 0.0 },
            methods: vec![Method::Score],
            seed: DEFAULT_SEED,
            tn: f64::INFINITY,
            kmeans_restarts: KMeansOptions::default().restarts,
        });
        for (line, key, value) in pairs {
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("bad {what} `{value}`"),
            };
            match key.as_str() {
                "id" => {}
                "n" => cfg.n = value.parse().map_err(|_| bad("n"))?,
                "k" => cfg.k = value.parse().map_err(|_| bad("k"))?,
                "reps" => cfg.reps = value.parse().map_err(|_| bad("reps"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "tn" => cfg.tn = parse_tn(&value).map_err(|_| bad("tn"))?,
                "kmeans_restarts" => {
                    cfg.kmeans_restarts = value.parse().map_err(|_| bad("kmeans_restarts"))?
                }
                "theta" => cfg.theta = value.parse().map_err(|_| bad("theta pattern"))?,
                "a" => {
                    cfg.a = value
                        .split(';')
                        .map(|row| {
                            row.split_whitespace()
                                .map(f64::from_str)
                                .collect::<std::result::Result<Vec<_>, _>>()
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("A"))?;
                }
                "methods" => {
                    cfg.methods = value
                        .split(',')
                        .map(|m| m.trim().parse::<Method>())
                        .collect::<Result<Vec<_>>>()
                        .map_err(|_| bad("method list"))?;
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.reps == 0 {
            return Err(Error::Argument("n, k and reps must be positive".into()));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::Argument("kmeans_restarts must be positive".into()));
        }
        if self.tn.is_nan() || self.tn < 0.0 {
            return Err(Error::Argument(format!(
                "tn must be non-negative, got {}",
                self.tn
            )));
        }
        self.a_matrix()?;
        equal_sizes(self.n, self.k)?;
        Ok(())
    }
}

/// `inf`, `log` (the `log(n)` default, returned as `None`) or a number.
pub fn parse_truncation(s: &str) -> Result<Option<f64>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "log" | "logn" | "log(n)" => Ok(None),
        other => parse_tn(other).map(Some),
    }
}

fn parse_tn(s: &str) -> Result<f64> {
    let v = match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| Error::Argument(format!("bad truncation level `{s}`")))?,
    };
    if v.is_nan() || v < 0.0 {
        return Err(Error::Argument(format!(
            "truncation level must be non-negative, got {s}"
        )));
    }
    Ok(v)
}

/// Outcome of one method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub mismatches: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Repetition {
    pub index: usize,
    /// Nodes left after isolated ones are removed.
    pub n0: usize,
    pub edges: usize,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_rate: f64,
    pub sd_rate: f64,
    pub mean_mismatches: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodTiming {
    pub method: Method,
    /// Summed over repetitions.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub repetitions: Vec<Repetition>,
    pub summaries: Vec<MethodSummary>,
    /// Wall-clock measurements; the only part of a report that varies
    /// between identical runs.
    pub timings: Vec<MethodTiming>,
}

impl RunReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// The report with its timings cleared.
    pub fn without_timings(&self) -> RunReport {
        RunReport {
            timings: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (params, truth) = cfg.params()?;

    let results: Vec<(Repetition, Vec<f64>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_repetition(cfg, &params, &truth, r))
        .collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(cfg.methods.len());
    let mut timings = Vec::with_capacity(cfg.methods.len());
    for (m, &method) in cfg.methods.iter().enumerate() {
        let rates: Vec<f64> = results
            .iter()
            .map(|(rep, _)| rep.outcomes[m].rate)
            .collect();
        let counts: Vec<f64> = results
            .iter()
            .map(|(rep, _)| rep.outcomes[m].mismatches as f64)
            .collect();
        let s = summarize(&rates)?;
        summaries.push(MethodSummary {
            method,
            mean_rate: s.mean,
            sd_rate: s.sd,
            mean_mismatches: summarize(&counts)?.mean,
        });
        timings.push(MethodTiming {
            method,
            seconds: results.iter().map(|(_, t)| t[m]).sum(),
        });
    }
    Ok(RunReport {
        config: cfg.clone(),
        seed: cfg.seed,
        repetitions: results.into_iter().map(|(rep, _)| rep).collect(),
        summaries,
        timings,
    })
}

fn run_repetition(
    cfg: &ExperimentConfig,
    params: &DcbmParams,
    truth: &Labeling,
    r: usize,
) -> Result<(Repetition, Vec<f64>)> {
    let graph = sample_adjacency(params, truth, derive_seed(&[cfg.seed, r as u64]))?;
    let (kept, index_map) = remove_isolated(&graph)?;
    let kept_truth = truth.restrict(&index_map);

    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    let mut seconds = Vec::with_capacity(cfg.methods.len());
    for (m, &method) in cfg.methods.iter().enumerate() {
        let opts = DetectOptions {
            k: cfg.k,
            method,
            threshold: None,
            tn: Some(cfg.tn),
            seed: derive_seed(&[cfg.seed, r as u64, m as u64 + 1]),
            kmeans_restarts: cfg.kmeans_restarts,
            eigen: EigenOptions {
                seed: derive_seed(&[cfg.seed, r as u64, 0]),
                ..EigenOptions::default()
            },
        };
        let start = Instant::now();
        let c = cluster_graph(&kept, &opts, None, None)?;
        seconds.push(start.elapsed().as_secs_f64());
        let h = hamming_error(&c.labeling, &kept_truth, cfg.k)?;
        outcomes.push(MethodOutcome {
            method,
            mismatches: h.mismatches,
            rate: h.rate,
        });
    }
    Ok((
        Repetition {
            index: r,
            n0: kept.node_count(),
            edges: kept.edge_count(),
            outcomes,
        },
        seconds,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_settings() {
        let e1 = ExperimentConfig::preset("1").unwrap();
        assert_eq!((e1.n, e1.k, e1.reps), (1000, 2, 50));
        assert_eq!(e1.a, vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
        let e2b = ExperimentConfig::preset("2b").unwrap();
        let v = e2b.theta.values(800);
        assert!((v[799] - 0.5).abs() < 1e-15);
        assert!((v[399] - (0.025 + 0.475 * 0.5)).abs() < 1e-15);
        let e3 = ExperimentConfig::preset("3").unwrap();
        assert_eq!((e3.n, e3.k, e3.reps), (1500, 3, 25));
        assert_eq!(e3.a[0][2], 0.05);
        assert!(ExperimentConfig::preset("5").is_err());
    }

    #[test]
    fn presets_round_trip_through_text() {
        for id in PRESET_IDS {
            let cfg = ExperimentConfig::preset(id).unwrap();
            assert_eq!(
                ExperimentConfig::from_text(&cfg.to_text()).unwrap(),
                cfg,
                "{id}"
            );
        }
    }

    #[test]
    fn text_overrides_and_errors() {
        let cfg = ExperimentConfig::from_text("id = 1\nreps = 3 # short\nmethods = score").unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.methods, vec![Method::Score]);
        assert_eq!(cfg.n, 1000);
        assert!(matches!(
            ExperimentConfig::from_text("id = 1\nbogus = 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(ExperimentConfig::from_text("id = 1\nn = 999").is_err());
        assert!(ExperimentConfig::from_text("id = 1\nmethods = pca").is_err());
    }

    #[test]
    fn truncation_parsing() {
        assert_eq!(parse_truncation("inf").unwrap(), Some(f64::INFINITY));
        assert_eq!(parse_truncation("log").unwrap(), None);
        assert_eq!(parse_truncation("2.5").unwrap(), Some(2.5));
        assert!(parse_truncation("-1").is_err());
    }

    #[test]
    fn small_run_is_reproducible() {
        let cfg = ExperimentConfig::from_text(
            "id = small\nn = 120\nk = 2\nreps = 2\na = 1 0.3; 0.3 1\ntheta = linear 0.3 0.9\nmethods = score, opca\nkmeans_restarts = 5",
        )
        .unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.without_timings(), b.without_timings());
        for rep in &a.repetitions {
            for o in &rep.outcomes {
                assert_eq!(o.rate, o.mismatches as f64 / rep.n0 as f64);
            }
        }
        assert_eq!(a.summaries.len(), 2);
    }
}
