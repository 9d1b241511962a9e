//! Noise sweeps: inject, discover, evaluate, one CSV row per run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{csv_row, report, EvalReport, MatchMode, CSV_HEADER};
use crate::noise::{inject, NoiseKind};
use crate::pipeline::{discover, PipelineConfig};
use crate::record::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset_name: String,
    pub kinds: Vec<NoiseKind>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub match_mode: MatchMode,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset_name: "synthetic".to_string(),
            kinds: vec![NoiseKind::Lexify, NoiseKind::Interfere],
            ratios: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            seeds: vec![1, 2, 3, 4, 5],
            match_mode: MatchMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub kind: NoiseKind,
    pub ratio: f64,
    pub seed: u64,
    pub report: EvalReport,
}

/// Discover and score one noisy variant of a labeled dataset.
pub fn run_once(
    dataset: &Dataset,
    kind: NoiseKind,
    ratio: f64,
    seed: u64,
    pipeline: &PipelineConfig,
    mode: MatchMode,
) -> Result<EvalReport> {
    let truth = dataset.ground_truth().ok_or(Error::NoLabeledData)?;
    let noisy = inject(dataset, kind, ratio, seed)?;
    let found = discover(&noisy, pipeline)?;
    let echo = serde_json::json!({
        "noise_type": kind.to_string(),
        "noise_ratio": ratio,
        "noise_seed": seed,
        "pipeline_seed": pipeline.seed,
        "ablations": pipeline.ablations,
    });
    report(&found.clusters, &truth, mode, echo)
}

/// Every `(kind, ratio, seed)` combination, sorted in that order.
pub fn run_bench(
    dataset: &Dataset,
    pipeline: &PipelineConfig,
    config: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    let mut kinds = config.kinds.clone();
    kinds.sort();
    kinds.dedup();
    let mut ratios = config.ratios.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut rows = Vec::new();
    for &kind in &kinds {
        for &ratio in &ratios {
            for &seed in &seeds {
                let report = run_once(dataset, kind, ratio, seed, pipeline, config.match_mode)?;
                rows.push(BenchRow {
                    dataset: config.dataset_name.clone(),
                    kind,
                    ratio,
                    seed,
                    report,
                });
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_row(&r.dataset, &r.kind.to_string(), r.ratio, r.seed, &r.report));
        out.push('\n');
    }
    out
}

/// Mean FGA over rows matching `kind` and `ratio`.
pub fn mean_fga(rows: &[BenchRow], kind: NoiseKind, ratio: f64) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.kind == kind && r.ratio == ratio)
        .map(|r| r.report.fga)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{synth_corpus, CorpusSpec};

    fn small() -> Dataset {
        synth_corpus(&CorpusSpec {
            endpoint_count: 4,
            requests_per_endpoint: 12,
            seed: 3,
            ..CorpusSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_ratio_rows_equal_clean_run() {
        let d = small();
        let cfg = BenchConfig {
            ratios: vec![0.0],
            seeds: vec![1, 2],
            ..BenchConfig::default()
        };
        let rows = run_bench(&d, &PipelineConfig::default(), &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        let clean = discover(&d, &PipelineConfig::default()).unwrap();
        let truth = d.ground_truth().unwrap();
        let expected = report(&clean.clusters, &truth, MatchMode::Exact, serde_json::Value::Null).unwrap();
        for r in &rows {
            assert_eq!((r.report.tp, r.report.fp, r.report.fn_), (expected.tp, expected.fp, expected.fn_));
        }
    }

    #[test]
    fn rows_sorted_and_csv_stable() {
        let d = small();
        let cfg = BenchConfig {
            kinds: vec![NoiseKind::Interfere, NoiseKind::Lexify],
            ratios: vec![0.5, 0.1],
            seeds: vec![2, 1],
            ..BenchConfig::default()
        };
        let rows = run_bench(&d, &PipelineConfig::default(), &cfg).unwrap();
        let keys: Vec<(NoiseKind, f64, u64)> = rows.iter().map(|r| (r.kind, r.ratio, r.seed)).collect();
        assert_eq!(keys[0], (NoiseKind::Lexify, 0.1, 1));
        assert_eq!(keys[7], (NoiseKind::Interfere, 0.5, 2));
        let again = run_bench(&d, &PipelineConfig::default(), &cfg).unwrap();
        assert_eq!(to_csv(&rows), to_csv(&again));
        assert!(to_csv(&rows).starts_with(CSV_HEADER));
    }
}
