//! Command-line front end: dataset generation, predictor training and
//! evaluation, and the slot/frame Monte Carlo experiments. Identical flags
//! (and seed) produce byte-identical output regardless of `--threads`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use plnc_ra::datagen::{
    self, dataset_from_text, dataset_to_text, evaluate, parse_fading, DatasetConfig,
};
use plnc_ra::harness::{
    frame_sweep_table, run_frame_sweep, run_slot_histogram, slot_histogram_table,
    FrameSweepConfig, SlotHistogramConfig,
};
use plnc_ra::mlp::{self, MlpBank, TrainHyperparams};
use plnc_ra::ldpc;
use plnc_ra::slot::{DecoderConfig, SelectionPolicy};

#[derive(Parser)]
#[command(
    name = "plnc-ra",
    version,
    about = "Slot- and frame-level simulator for network-coded random access"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonSim {
    /// Average SNR in dB (transmit power over unit noise).
    #[arg(long = "snr-db")]
    snr_db: f64,
    /// Fading model: `rayleigh` or `rician:<k>` with k in [0, 1).
    #[arg(long)]
    fading: String,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    seed: u64,
    /// Belief-propagation iteration cap per decoding attempt.
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    /// Worker threads (0 = all cores). Falls back to PLNC_RA_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled training set for one collision degree.
    GenData {
        /// Collision degree d (inputs per sample).
        #[arg(long)]
        degree: usize,
        /// Number of samples.
        #[arg(long)]
        samples: usize,
        #[command(flatten)]
        common: CommonSim,
    },
    /// Train a per-degree success predictor on a generated dataset.
    Train {
        /// Dataset file produced by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model's false-alarm / missed-detection rates.
    EvalModel {
        #[arg(long)]
        model: PathBuf,
        /// Validation dataset file.
        #[arg(long)]
        data: PathBuf,
        /// Decision threshold.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slot-level decoding histogram at a fixed collision degree.
    SimSlot {
        /// Collision degree |T| of every slot.
        #[arg(long)]
        collision: usize,
        /// Number of independent slots.
        #[arg(long)]
        slots: usize,
        /// Candidate selection: `exhaustive`, `sic`, `dnn:<tau>`, `topnu:<nu>`.
        #[arg(long, default_value = "exhaustive")]
        policy: String,
        /// Directory of trained models (required by dnn/topnu policies).
        #[arg(long)]
        models: Option<PathBuf>,
        #[command(flatten)]
        common: CommonSim,
    },
    /// Frame-level packet-loss sweep over repetitions and frame lengths.
    SimFrame {
        /// Active users per frame |A|.
        #[arg(long)]
        active: usize,
        /// Comma-separated repetition counts, e.g. `2,3,4`.
        #[arg(long)]
        reps: String,
        /// Frame lengths: `lo:hi` inclusive range or comma list.
        #[arg(long)]
        tf: String,
        /// Frames per configuration point.
        #[arg(long)]
        frames: usize,
        /// Comma-separated policies, e.g. `exhaustive,sic,dnn:0.5`.
        #[arg(long, default_value = "exhaustive")]
        policy: String,
        #[arg(long)]
        models: Option<PathBuf>,
        #[command(flatten)]
        common: CommonSim,
    },
}

fn parse_policy(token: &str) -> Result<SelectionPolicy, String> {
    let policy = match token {
        "exhaustive" => SelectionPolicy::Exhaustive,
        "sic" => SelectionPolicy::SicOnly,
        _ => match token.split_once(':') {
            Some(("dnn" | "threshold", tau)) => {
                let tau: f64 = tau.parse().map_err(|_| format!("bad threshold in {token:?}"))?;
                SelectionPolicy::Threshold(tau)
            }
            Some(("topnu", nu)) => {
                let nu: usize = nu.parse().map_err(|_| format!("bad count in {token:?}"))?;
                SelectionPolicy::TopNu(nu)
            }
            _ => return Err(format!("unknown policy {token:?}")),
        },
    };
    policy.validate().map_err(|e| e.to_string())?;
    Ok(policy)
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad integer {t:?}")))
        .collect()
}

/// `lo:hi` inclusive range or comma-separated list.
fn parse_usize_grid(text: &str) -> Result<Vec<usize>, String> {
    if let Some((lo, hi)) = text.split_once(':') {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start {lo:?}"))?;
        let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end {hi:?}"))?;
        if lo > hi {
            return Err(format!("empty range {text:?}"));
        }
        Ok((lo..=hi).collect())
    } else {
        parse_usize_list(text)
    }
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("PLNC_RA_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn load_bank(path: Option<&Path>, needed: bool) -> Result<Option<MlpBank>, String> {
    match path {
        Some(dir) => Ok(Some(
            MlpBank::load_dir(dir).map_err(|e| format!("loading models from {dir:?}: {e}"))?,
        )),
        None if needed => Err("--models is required for predictor policies".into()),
        None => Ok(None),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("writing {path:?}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "undefined".into(), |r| format!("{r:.6}"))
}

fn run(cli: Cli) -> Result<(), String> {
    let code = ldpc::default_code();
    match cli.command {
        Command::GenData {
            degree,
            samples,
            common,
        } => {
            let fading = parse_fading(&common.fading).map_err(|e| e.to_string())?;
            let threads = resolve_threads(common.threads);
            eprintln!(
                "gen-data: degree={degree} samples={samples} snr_db={} fading={} seed={} \
                 max_iter={} threads={threads}",
                common.snr_db, common.fading, common.seed, common.max_iter
            );
            let cfg = DatasetConfig {
                degree,
                samples,
                snr_db: common.snr_db,
                fading,
                seed: common.seed,
                max_iter: common.max_iter,
                threads,
            };
            let data = datagen::generate_dataset(&cfg, &code).map_err(|e| e.to_string())?;
            emit(common.out.as_deref(), &dataset_to_text(&cfg, &data))
        }
        Command::Train {
            data,
            steps,
            batch,
            lr,
            seed,
            out,
        } => {
            let text =
                std::fs::read_to_string(&data).map_err(|e| format!("reading {data:?}: {e}"))?;
            let (degree, samples) = dataset_from_text(&text).map_err(|e| e.to_string())?;
            eprintln!(
                "train: degree={degree} samples={} steps={steps} batch={batch} lr={lr} seed={seed}",
                samples.len()
            );
            let hyper = TrainHyperparams {
                steps,
                batch_size: batch,
                learning_rate: lr,
                seed,
                ..Default::default()
            };
            let model = mlp::train(&samples, degree, &hyper).map_err(|e| e.to_string())?;
            mlp::save(&model, &out).map_err(|e| e.to_string())
        }
        Command::EvalModel {
            model,
            data,
            tau,
            out,
        } => {
            let model = mlp::load(&model).map_err(|e| e.to_string())?;
            let text =
                std::fs::read_to_string(&data).map_err(|e| format!("reading {data:?}: {e}"))?;
            let (degree, samples) = dataset_from_text(&text).map_err(|e| e.to_string())?;
            eprintln!("eval-model: degree={degree} samples={} tau={tau}", samples.len());
            let metrics = evaluate(&model, &samples, tau).map_err(|e| e.to_string())?;
            let report = format!(
                "metric,value\nfalse_alarms,{}\nnegatives,{}\nmissed,{}\npositives,{}\n\
                 p_fa,{}\np_md,{}\n",
                metrics.false_alarms,
                metrics.negatives,
                metrics.missed,
                metrics.positives,
                fmt_rate(metrics.p_fa()),
                fmt_rate(metrics.p_md()),
            );
            emit(out.as_deref(), &report)
        }
        Command::SimSlot {
            collision,
            slots,
            policy,
            models,
            common,
        } => {
            let policy = parse_policy(&policy)?;
            let fading = parse_fading(&common.fading).map_err(|e| e.to_string())?;
            let threads = resolve_threads(common.threads);
            let bank = load_bank(models.as_deref(), policy.needs_predictor())?;
            eprintln!(
                "sim-slot: collision={collision} slots={slots} policy={} snr_db={} fading={} \
                 seed={} max_iter={} threads={threads}",
                plnc_ra::harness::policy_token(policy),
                common.snr_db,
                common.fading,
                common.seed,
                common.max_iter
            );
            let cfg = SlotHistogramConfig {
                collision,
                slots,
                snr_db: common.snr_db,
                fading,
                policy,
                seed: common.seed,
                decoder: DecoderConfig {
                    max_iter: common.max_iter,
                    ..Default::default()
                },
                threads,
            };
            let hist =
                run_slot_histogram(&cfg, &code, bank.as_ref()).map_err(|e| e.to_string())?;
            emit(common.out.as_deref(), &slot_histogram_table(&cfg, &hist).to_csv())
        }
        Command::SimFrame {
            active,
            reps,
            tf,
            frames,
            policy,
            models,
            common,
        } => {
            let policies: Vec<SelectionPolicy> = policy
                .split(',')
                .map(|t| parse_policy(t.trim()))
                .collect::<Result<_, _>>()?;
            let fading = parse_fading(&common.fading).map_err(|e| e.to_string())?;
            let threads = resolve_threads(common.threads);
            let needs = policies.iter().any(SelectionPolicy::needs_predictor);
            let bank = load_bank(models.as_deref(), needs)?;
            let reps = parse_usize_list(&reps)?;
            let t_f_list = parse_usize_grid(&tf)?;
            eprintln!(
                "sim-frame: active={active} reps={reps:?} tf={t_f_list:?} frames={frames} \
                 policies={policy} snr_db={} fading={} seed={} max_iter={} threads={threads}",
                common.snr_db, common.fading, common.seed, common.max_iter
            );
            let cfg = FrameSweepConfig {
                active,
                reps,
                t_f_list,
                frames,
                snr_db: common.snr_db,
                fading,
                policies,
                seed: common.seed,
                decoder: DecoderConfig {
                    max_iter: common.max_iter,
                    ..Default::default()
                },
                threads,
            };
            let points = run_frame_sweep(&cfg, &code, bank.as_ref()).map_err(|e| e.to_string())?;
            emit(common.out.as_deref(), &frame_sweep_table(&cfg, &points).to_csv())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
