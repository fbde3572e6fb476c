//! Architecture comparison: trains variant stacks per station or on the
//! combined one-hot table and ranks them by average test R².

use thiserror::Error;

use crate::ingest::{DailySeries, Feature, IngestError};
use crate::nn::{BiLstmModel, Topology};
use crate::preprocess::{
    encode_station_onehot, fit_normalizer, normalize, split_ranges, NormalizationStats,
    PreprocessError, SplitSpec,
};
use crate::training::{evaluate, train, MetricsReport, TrainConfig, TrainError, TrainHistory};
use crate::windowing::{make_windows, SampleWindow, WindowError, WindowSpec};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    BadInput(String),
}

/// The forecast targets: always the four weather features, never wind
/// vectors or one-hot indicators.
pub const BASE_TARGETS: [Feature; 4] = [
    Feature::Rainfall,
    Feature::Sunshine,
    Feature::Humidity,
    Feature::Temperature,
];

/// One architecture/feature-set/mode combination to benchmark.
#[derive(Debug, Clone)]
pub struct VariantSpec {
    pub name: String,
    pub bidirectional: bool,
    pub lstm_layers: usize,
    pub units: usize,
    pub td_units: Vec<usize>,
    pub features: Vec<Feature>,
    /// Train one model on the concatenated one-hot table instead of one
    /// model per station.
    pub combined_onehot: bool,
}

impl VariantSpec {
    /// The production stack: 3 Bi-LSTM layers, one time-distributed dense.
    pub fn standard(name: impl Into<String>) -> VariantSpec {
        VariantSpec {
            name: name.into(),
            bidirectional: true,
            lstm_layers: 3,
            units: 32,
            td_units: vec![16],
            features: BASE_TARGETS.to_vec(),
            combined_onehot: false,
        }
    }
}

/// Result of one variant run, most-skillful-first after ranking.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VariantOutcome {
    pub name: String,
    /// (station, metrics) pairs; a combined run has one entry "combined".
    pub per_station: Vec<(String, MetricsReport)>,
    pub average_r2: f64,
}

/// Normalized split windows for one station, ready to train.
pub struct PreparedStation {
    pub station: String,
    pub stats: NormalizationStats,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub train: Vec<SampleWindow>,
    pub val: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
}

fn targets_for(features: &[Feature]) -> Vec<Feature> {
    BASE_TARGETS
        .iter()
        .copied()
        .filter(|t| features.contains(t))
        .collect()
}

/// Splits chronologically, fits the normalizer on the train rows only,
/// normalizes, and windows each split segment.
pub fn prepare_station(
    series: &DailySeries,
    features: &[Feature],
    window: &WindowSpec,
    split: &SplitSpec,
) -> Result<PreparedStation, CompareError> {
    let matrix = series.to_matrix(features)?;
    let feature_names: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    let targets = targets_for(features);
    if targets.is_empty() {
        return Err(CompareError::BadInput(
            "no forecast target among the selected features".into(),
        ));
    }
    let target_cols: Vec<usize> = targets
        .iter()
        .map(|t| features.iter().position(|f| f == t).unwrap())
        .collect();
    let [tr, va, te] = split_ranges(matrix.nrows(), split)?;
    let stats = fit_normalizer(matrix.slice(ndarray::s![tr.clone(), ..]), &feature_names)?;
    let normalized = normalize(matrix.view(), &stats);
    let mk = |range: std::ops::Range<usize>| {
        make_windows(
            normalized.slice(ndarray::s![range, ..]),
            &target_cols,
            window,
        )
    };
    let train = mk(tr)?;
    let val = mk(va)?;
    let test = mk(te)?;
    Ok(PreparedStation {
        station: series.station.clone(),
        stats,
        feature_names,
        target_names: targets.iter().map(|t| t.name().to_string()).collect(),
        train,
        val,
        test,
    })
}

/// Normalized split windows for the combined one-hot table.
pub struct PreparedCombined {
    pub stats: NormalizationStats,
    pub columns: Vec<String>,
    pub target_names: Vec<String>,
    pub train: Vec<SampleWindow>,
    pub val: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
}

/// Builds the single concatenated table with one-hot station indicators,
/// splits it chronologically as one sequence, and windows each segment.
/// Windows freely span station boundaries, exactly as a single combined
/// file would be windowed.
pub fn prepare_combined(
    stations: &[(String, DailySeries)],
    features: &[Feature],
    window: &WindowSpec,
    split: &SplitSpec,
) -> Result<PreparedCombined, CompareError> {
    if stations.is_empty() {
        return Err(CompareError::BadInput("no stations".into()));
    }
    let names: Vec<String> = stations.iter().map(|(s, _)| s.clone()).collect();
    let mut blocks = Vec::with_capacity(stations.len());
    for (name, series) in stations {
        blocks.push((name.clone(), series.to_matrix(features)?));
    }
    let table = encode_station_onehot(&names, &blocks)?;
    let n_feat = features.len();
    let mut columns: Vec<String> = features.iter().map(|f| f.name().to_string()).collect();
    columns.extend(names.iter().map(|s| format!("station={s}")));

    let targets = targets_for(features);
    let target_cols: Vec<usize> = targets
        .iter()
        .map(|t| features.iter().position(|f| f == t).unwrap())
        .collect();

    let [tr, va, te] = split_ranges(table.data.nrows(), split)?;
    // normalize the weather columns only; indicators stay 0/1
    let feature_names: Vec<String> = columns[..n_feat].to_vec();
    let stats = fit_normalizer(
        table.data.slice(ndarray::s![tr.clone(), ..n_feat]),
        &feature_names,
    )?;
    let mut data = table.data;
    for j in 0..n_feat {
        for v in data.column_mut(j).iter_mut() {
            *v = (*v - stats.mean[j]) / stats.std[j];
        }
    }
    let mk = |range: std::ops::Range<usize>| {
        make_windows(data.slice(ndarray::s![range, ..]), &target_cols, window)
    };
    let train = mk(tr)?;
    let val = mk(va)?;
    let test = mk(te)?;
    Ok(PreparedCombined {
        stats,
        columns,
        target_names: targets.iter().map(|t| t.name().to_string()).collect(),
        train,
        val,
        test,
    })
}

fn topology_for(
    variant: &VariantSpec,
    feature_names: Vec<String>,
    target_names: Vec<String>,
    window: &WindowSpec,
) -> Topology {
    Topology {
        feature_names,
        target_names,
        lstm_layers: variant.lstm_layers,
        units: variant.units,
        bidirectional: variant.bidirectional,
        td_units: variant.td_units.clone(),
        input_width: window.input_width,
        label_width: window.label_width,
    }
}

/// Trains and evaluates one prepared dataset; returns metrics and history.
pub fn train_and_evaluate(
    topology: Topology,
    train_w: &[SampleWindow],
    val_w: &[SampleWindow],
    test_w: &[SampleWindow],
    stats: &NormalizationStats,
    cfg: &TrainConfig,
) -> Result<(BiLstmModel, TrainHistory, MetricsReport), CompareError> {
    let mut model = BiLstmModel::init(topology, cfg.seed).map_err(TrainError::from)?;
    let history = train(&mut model, train_w, val_w, cfg)?;
    let report = evaluate(&model, test_w, stats)?;
    Ok((model, history, report))
}

/// Runs every variant on the given (imputed) station series and ranks the
/// outcomes by average test R², best first. Deterministic for a fixed
/// config seed.
pub fn compare_architectures(
    stations: &[(String, DailySeries)],
    variants: &[VariantSpec],
    window: &WindowSpec,
    split: &SplitSpec,
    cfg: &TrainConfig,
) -> Result<Vec<VariantOutcome>, CompareError> {
    if stations.is_empty() {
        return Err(CompareError::BadInput("no stations".into()));
    }
    let mut outcomes = Vec::with_capacity(variants.len());
    for variant in variants {
        let mut per_station = Vec::new();
        if variant.combined_onehot {
            let prep = prepare_combined(stations, &variant.features, window, split)?;
            let topo = topology_for(variant, prep.columns.clone(), prep.target_names.clone(), window);
            let (_, _, report) =
                train_and_evaluate(topo, &prep.train, &prep.val, &prep.test, &prep.stats, cfg)?;
            per_station.push(("combined".to_string(), report));
        } else {
            for (_, series) in stations {
                let prep = prepare_station(series, &variant.features, window, split)?;
                let topo = topology_for(
                    variant,
                    prep.feature_names.clone(),
                    prep.target_names.clone(),
                    window,
                );
                let (_, _, report) =
                    train_and_evaluate(topo, &prep.train, &prep.val, &prep.test, &prep.stats, cfg)?;
                per_station.push((prep.station, report));
            }
        }
        let average_r2 =
            per_station.iter().map(|(_, r)| r.r2).sum::<f64>() / per_station.len() as f64;
        outcomes.push(VariantOutcome {
            name: variant.name.clone(),
            per_station,
            average_r2,
        });
    }
    outcomes.sort_by(|a, b| {
        b.average_r2
            .partial_cmp(&a.average_r2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(outcomes)
}
