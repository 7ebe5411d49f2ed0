//! Labeled dataset generation for the combination-success predictor, plus
//! the false-alarm / missed-detection metrics of the thresholded classifier.
//!
//! Labels are produced on the raw received signal: every combination is
//! attempted independently (no cancellation chaining) and labeled 1 exactly
//! when the decoded word equals the true XOR combination.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::gf2::{binary_expansion, xor_accumulate, BitWord};
use crate::harness::derive_rng;
use crate::ldpc::LdpcCode;
use crate::mlp::MlpModel;
use crate::parallel;
use crate::phy::{sample_gains, synth_slot, FadingSpec, SumLlrTable, D_MAX};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model error: {0}")]
    Model(#[from] crate::mlp::MlpError),
}

/// One labeled channel realization. Gains are stored sorted by decreasing
/// magnitude; label bit `j` is the success of combination
/// `binary_expansion(j + 1, degree)` in that sorted-gain order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub degree: usize,
    pub gains: Vec<f64>,
    pub labels: BitWord,
}

#[derive(Clone, Copy, Debug)]
pub struct DatasetConfig {
    pub degree: usize,
    pub samples: usize,
    pub snr_db: f64,
    pub fading: FadingSpec,
    pub seed: u64,
    pub max_iter: usize,
    pub threads: usize,
}

/// Generate `cfg.samples` labeled realizations, one independent derived RNG
/// stream per sample, reduced in sample order regardless of thread count.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    code: &LdpcCode,
) -> Result<Vec<TrainingSample>, DatagenError> {
    if cfg.samples == 0 {
        return Err(DatagenError::Config("samples must be >= 1".into()));
    }
    if cfg.degree == 0 || cfg.degree > D_MAX {
        return Err(DatagenError::Config(format!(
            "degree {} outside [1, {D_MAX}]",
            cfg.degree
        )));
    }
    let power = 10f64.powf(cfg.snr_db / 10.0);
    let d = cfg.degree;
    let samples = parallel::map_indexed(cfg.samples, cfg.threads, |i| {
        let mut rng = derive_rng(cfg.seed, i as u64, 0, "datagen");
        let mut gains = sample_gains(cfg.fading, d, &mut rng);
        gains.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite gains"));
        let words: Vec<BitWord> = (0..d)
            .map(|_| {
                let bits: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2)).collect();
                code.encode(&BitWord::from_bits(&bits)).expect("message length k")
            })
            .collect();
        let users: Vec<usize> = (0..d).collect();
        let obs = synth_slot(&words, &gains, &users, power, false, &mut rng)
            .expect("consistent slot inputs");
        let table = SumLlrTable::build(&obs.y, &gains, power).expect("degree within capacity");
        let mut labels = BitWord::zeros((1 << d) - 1);
        for i in 1..(1u64 << d) {
            let a = binary_expansion(i, d).expect("index in range");
            let llr = table.llr(&a).expect("matching degree");
            let out = code.bp_decode(&llr, cfg.max_iter);
            let truth = xor_accumulate(&words, &a).expect("consistent lengths");
            if out.syndrome_ok && out.word == truth {
                labels.set(i as usize - 1, true);
            }
        }
        TrainingSample {
            degree: d,
            gains,
            labels,
        }
    });
    Ok(samples)
}

/// Confusion counts and rates of the tau-thresholded predictor.
#[derive(Clone, Copy, Debug)]
pub struct ClassifierMetrics {
    pub false_alarms: usize,
    pub negatives: usize,
    pub missed: usize,
    pub positives: usize,
}

impl ClassifierMetrics {
    /// False-alarm rate; `None` when the dataset contains no negatives.
    pub fn p_fa(&self) -> Option<f64> {
        (self.negatives > 0).then(|| self.false_alarms as f64 / self.negatives as f64)
    }

    /// Missed-detection rate; `None` when the dataset contains no positives.
    pub fn p_md(&self) -> Option<f64> {
        (self.positives > 0).then(|| self.missed as f64 / self.positives as f64)
    }
}

/// Evaluate a model on a dataset of its degree at threshold `tau`.
pub fn evaluate(
    model: &MlpModel,
    dataset: &[TrainingSample],
    tau: f64,
) -> Result<ClassifierMetrics, DatagenError> {
    let mut metrics = ClassifierMetrics {
        false_alarms: 0,
        negatives: 0,
        missed: 0,
        positives: 0,
    };
    for s in dataset {
        if s.degree != model.degree() {
            return Err(DatagenError::Config(format!(
                "sample degree {} but model degree {}",
                s.degree,
                model.degree()
            )));
        }
        let p = model.forward(&s.gains)?;
        for (j, &pj) in p.iter().enumerate() {
            let predicted = pj >= tau;
            if s.labels.get(j) {
                metrics.positives += 1;
                if !predicted {
                    metrics.missed += 1;
                }
            } else {
                metrics.negatives += 1;
                if predicted {
                    metrics.false_alarms += 1;
                }
            }
        }
    }
    Ok(metrics)
}

const DATASET_TAG: &str = "plnc-dataset-v1";

fn fading_token(f: FadingSpec) -> String {
    match f {
        FadingSpec::Rayleigh => "rayleigh".into(),
        FadingSpec::Rician { factor } => format!("rician:{factor:?}"),
    }
}

pub fn parse_fading(token: &str) -> Result<FadingSpec, DatagenError> {
    if token == "rayleigh" {
        return Ok(FadingSpec::Rayleigh);
    }
    if let Some(rest) = token.strip_prefix("rician:") {
        let factor: f64 = rest
            .parse()
            .map_err(|_| DatagenError::Format(format!("bad rician factor '{rest}'")))?;
        return FadingSpec::rician(factor)
            .map_err(|e| DatagenError::Format(e.to_string()));
    }
    Err(DatagenError::Format(format!("unknown fading spec '{token}'")))
}

/// Serialize: one tab-separated header line carrying the provenance, then
/// one record per sample (gains at full precision, then the label bits).
pub fn dataset_to_text(cfg: &DatasetConfig, samples: &[TrainingSample]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{DATASET_TAG}\t{}\t{}\t{:?}\t{}\t{}",
        cfg.degree,
        samples.len(),
        cfg.snr_db,
        fading_token(cfg.fading),
        cfg.seed
    )
    .unwrap();
    for s in samples {
        let gains: Vec<String> = s.gains.iter().map(|g| format!("{g:?}")).collect();
        writeln!(out, "{}\t{:?}", gains.join("\t"), s.labels).unwrap();
    }
    out
}

pub fn dataset_from_text(text: &str) -> Result<(usize, Vec<TrainingSample>), DatagenError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DatagenError::Format("empty dataset file".into()))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 6 || fields[0] != DATASET_TAG {
        return Err(DatagenError::Format("bad dataset header".into()));
    }
    let degree: usize = fields[1]
        .parse()
        .map_err(|_| DatagenError::Format("bad degree in header".into()))?;
    let count: usize = fields[2]
        .parse()
        .map_err(|_| DatagenError::Format("bad count in header".into()))?;
    let label_len = (1usize << degree) - 1;
    let mut samples = Vec::with_capacity(count);
    for (ln, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != degree + 1 {
            return Err(DatagenError::Format(format!(
                "record {ln}: expected {} columns, found {}",
                degree + 1,
                cols.len()
            )));
        }
        let gains: Vec<f64> = cols[..degree]
            .iter()
            .map(|t| t.parse().map_err(|_| DatagenError::Format(format!("record {ln}: bad gain"))))
            .collect::<Result<_, _>>()?;
        let labels = BitWord::from_str01(cols[degree])
            .map_err(|e| DatagenError::Format(format!("record {ln}: {e}")))?;
        if labels.len() != label_len {
            return Err(DatagenError::Format(format!(
                "record {ln}: {} label bits, expected {label_len}",
                labels.len()
            )));
        }
        samples.push(TrainingSample {
            degree,
            gains,
            labels,
        });
    }
    if samples.len() != count {
        return Err(DatagenError::Format(format!(
            "header claims {count} samples, file has {}",
            samples.len()
        )));
    }
    Ok((degree, samples))
}
