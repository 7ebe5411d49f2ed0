//! Seeded Monte Carlo experiment drivers: the slot-level decoding histogram,
//! the frame-level packet-loss sweep, and the counter-based RNG derivation
//! that keeps every experiment a pure function of its config and seed,
//! independent of worker count.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frame;
use crate::gf2::BitWord;
use crate::ldpc::LdpcCode;
use crate::mlp::MlpBank;
use crate::parallel;
use crate::phy::{sample_gains, synth_slot, FadingSpec};
use crate::slot::{decode_slot_iterative, DecoderConfig, SelectionPolicy, SlotError};
use crate::traffic::{draw_frame, slot_transmitters, Activation, FrameConfig, TrafficError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("slot decoding error: {0}")]
    Slot(#[from] SlotError),
    #[error("traffic error: {0}")]
    Traffic(#[from] TrafficError),
    #[error("gf2 error: {0}")]
    Gf2(#[from] crate::gf2::Gf2Error),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Counter-based stream derivation: distinct (frame, slot, role) tuples give
/// independent streams, identical inputs give identical streams.
pub fn derive_rng(master: u64, frame: u64, slot: u64, role: &str) -> ChaCha8Rng {
    let mut role_hash = 0xcbf29ce484222325u64;
    for b in role.bytes() {
        role_hash ^= u64::from(b);
        role_hash = role_hash.wrapping_mul(0x100000001b3);
    }
    let mut seed = [0u8; 32];
    let mut state = splitmix64(master)
        ^ splitmix64(frame.wrapping_mul(0x9e3779b97f4a7c15))
        ^ splitmix64(slot.wrapping_mul(0xc2b2ae3d27d4eb4f))
        ^ splitmix64(role_hash);
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Machine-readable experiment output: comment lines echo the config, then
/// a header row and one metric row per line.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            writeln!(out, "# {c}").unwrap();
        }
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        out
    }
}

pub fn policy_token(policy: SelectionPolicy) -> String {
    match policy {
        SelectionPolicy::Exhaustive => "exhaustive".into(),
        SelectionPolicy::Threshold(tau) => format!("dnn:{tau:?}"),
        SelectionPolicy::TopNu(nu) => format!("topnu:{nu}"),
        SelectionPolicy::SicOnly => "sic".into(),
    }
}

fn fading_token(f: FadingSpec) -> String {
    match f {
        FadingSpec::Rayleigh => "rayleigh".into(),
        FadingSpec::Rician { factor } => format!("rician:{factor:?}"),
    }
}

#[derive(Clone, Debug)]
pub struct SlotHistogramConfig {
    /// Fixed collision degree |T| of every simulated slot.
    pub collision: usize,
    pub slots: usize,
    pub snr_db: f64,
    pub fading: FadingSpec,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub decoder: DecoderConfig,
    pub threads: usize,
}

/// Aggregated slot-level decoding statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotHistogram {
    /// `genie_counts[degree - 1][iteration - 1]`: accepted combinations whose
    /// decoded word matched the true XOR.
    pub genie_counts: Vec<Vec<u64>>,
    /// Same indexing, gated only by the syndrome check.
    pub accepted_counts: Vec<Vec<u64>>,
    pub attempts: u64,
    pub slots: u64,
}

pub fn run_slot_histogram(
    cfg: &SlotHistogramConfig,
    code: &LdpcCode,
    bank: Option<&MlpBank>,
) -> Result<SlotHistogram, HarnessError> {
    if cfg.collision == 0 {
        return Err(HarnessError::Config("collision degree must be >= 1".into()));
    }
    if cfg.policy.needs_predictor() && bank.is_none() {
        return Err(HarnessError::Config(
            "selection policy requires a predictor bank".into(),
        ));
    }
    let power = 10f64.powf(cfg.snr_db / 10.0);
    let d = cfg.collision;
    let rounds = cfg.decoder.max_rounds;

    let partials = parallel::map_indexed(cfg.slots, cfg.threads, |slot_idx| {
        let mut rng = derive_rng(cfg.seed, 0, slot_idx as u64, "slot-histogram");
        let gains = sample_gains(cfg.fading, d, &mut rng);
        let words: Vec<BitWord> = (0..d)
            .map(|_| {
                let bits: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2)).collect();
                code.encode(&BitWord::from_bits(&bits)).expect("length k")
            })
            .collect();
        let users: Vec<usize> = (0..d).collect();
        let obs = synth_slot(&words, &gains, &users, power, false, &mut rng)
            .expect("consistent slot inputs");
        let result = decode_slot_iterative(
            &obs,
            code,
            power,
            cfg.policy,
            bank,
            slot_idx,
            &cfg.decoder,
        )?;
        let mut genie = vec![vec![0u64; rounds]; d];
        let mut accepted = vec![vec![0u64; rounds]; d];
        for combo in &result.decoded {
            let deg = combo.weights.weight();
            let it = combo.iteration;
            if deg >= 1 && deg <= d && it >= 1 && it <= rounds {
                accepted[deg - 1][it - 1] += 1;
                if combo.genie_correct {
                    genie[deg - 1][it - 1] += 1;
                }
            }
        }
        Ok::<_, SlotError>((genie, accepted, result.attempts as u64))
    });

    let mut hist = SlotHistogram {
        genie_counts: vec![vec![0; rounds]; d],
        accepted_counts: vec![vec![0; rounds]; d],
        attempts: 0,
        slots: cfg.slots as u64,
    };
    for partial in partials {
        let (genie, accepted, attempts) = partial?;
        for deg in 0..d {
            for it in 0..rounds {
                hist.genie_counts[deg][it] += genie[deg][it];
                hist.accepted_counts[deg][it] += accepted[deg][it];
            }
        }
        hist.attempts += attempts;
    }
    Ok(hist)
}

pub fn slot_histogram_table(cfg: &SlotHistogramConfig, hist: &SlotHistogram) -> ResultTable {
    let mut rows = Vec::new();
    for deg in 1..=cfg.collision {
        for it in 1..=cfg.decoder.max_rounds {
            let genie = hist.genie_counts[deg - 1][it - 1];
            let accepted = hist.accepted_counts[deg - 1][it - 1];
            // Poisson standard error on a count
            let se = (genie as f64).sqrt();
            rows.push(vec![
                deg.to_string(),
                it.to_string(),
                genie.to_string(),
                accepted.to_string(),
                hist.slots.to_string(),
                format!("{se:.3}"),
            ]);
        }
    }
    ResultTable {
        comments: vec![
            "experiment=slot_histogram".into(),
            format!("collision={}", cfg.collision),
            format!("slots={}", cfg.slots),
            format!("snr_db={:?}", cfg.snr_db),
            format!("fading={}", fading_token(cfg.fading)),
            format!("policy={}", policy_token(cfg.policy)),
            format!("seed={}", cfg.seed),
            format!("max_iter={}", cfg.decoder.max_iter),
            format!("attempts_total={}", hist.attempts),
        ],
        header: vec![
            "degree".into(),
            "iteration".into(),
            "genie_success_count".into(),
            "syndrome_accept_count".into(),
            "slots".into(),
            "std_error".into(),
        ],
        rows,
    }
}

#[derive(Clone, Debug)]
pub struct FrameSweepConfig {
    pub active: usize,
    pub reps: Vec<usize>,
    pub t_f_list: Vec<usize>,
    pub frames: usize,
    pub snr_db: f64,
    pub fading: FadingSpec,
    pub policies: Vec<SelectionPolicy>,
    pub seed: u64,
    pub decoder: DecoderConfig,
    pub threads: usize,
}

/// Per configuration point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub r: usize,
    pub t_f: usize,
    pub policy: String,
    pub frames: u64,
    pub packets: u64,
    pub lost: u64,
    pub attempts: u64,
    pub slots: u64,
    pub skipped_slots: u64,
}

impl SweepPoint {
    pub fn packet_loss(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.lost as f64 / self.packets as f64
        }
    }

    /// Binomial standard error of the loss rate.
    pub fn std_error(&self) -> f64 {
        if self.packets == 0 {
            return 0.0;
        }
        let p = self.packet_loss();
        (p * (1.0 - p) / self.packets as f64).sqrt()
    }

    pub fn attempts_per_slot(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.attempts as f64 / self.slots as f64
        }
    }
}

pub fn run_frame_sweep(
    cfg: &FrameSweepConfig,
    code: &LdpcCode,
    bank: Option<&MlpBank>,
) -> Result<Vec<SweepPoint>, HarnessError> {
    if cfg.policies.is_empty() || cfg.reps.is_empty() || cfg.t_f_list.is_empty() {
        return Err(HarnessError::Config("empty sweep grid".into()));
    }
    if cfg.policies.iter().any(|p| p.needs_predictor()) && bank.is_none() {
        return Err(HarnessError::Config(
            "a sweep policy requires a predictor bank".into(),
        ));
    }
    let power = 10f64.powf(cfg.snr_db / 10.0);
    let mut points = Vec::new();
    let mut point_idx = 0u64;
    for &policy in &cfg.policies {
        for &r in &cfg.reps {
            for &t_f in &cfg.t_f_list {
                if r > t_f {
                    // matches the plot's restricted domains
                    continue;
                }
                let frame_cfg = FrameConfig::new(t_f, r, Activation::FixedCount(cfg.active))?;
                let point = run_sweep_point(
                    cfg, &frame_cfg, policy, code, bank, power, point_idx,
                )?;
                points.push(point);
                point_idx += 1;
            }
        }
    }
    Ok(points)
}

fn run_sweep_point(
    cfg: &FrameSweepConfig,
    frame_cfg: &FrameConfig,
    policy: SelectionPolicy,
    code: &LdpcCode,
    bank: Option<&MlpBank>,
    power: f64,
    point_idx: u64,
) -> Result<SweepPoint, HarnessError> {
    let partials = parallel::map_indexed(cfg.frames, cfg.threads, |frame_idx| {
        let stream = |slot: u64, role: &str| {
            derive_rng(
                cfg.seed,
                point_idx << 32 | frame_idx as u64,
                slot,
                role,
            )
        };
        let mut rng = stream(0, "schedule");
        let schedule = draw_frame(frame_cfg, &mut rng)?;
        let active_len = schedule.active.len();
        // One message per active user per frame.
        let genie: Vec<BitWord> = (0..active_len)
            .map(|_| {
                let bits: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2)).collect();
                code.encode(&BitWord::from_bits(&bits)).expect("length k")
            })
            .collect();

        let mut slot_results = Vec::new();
        let mut attempts = 0u64;
        let mut skipped = 0u64;
        for slot in 0..frame_cfg.t_f {
            let transmitters = slot_transmitters(&schedule, slot);
            if transmitters.is_empty() {
                continue;
            }
            let mut slot_rng = stream(slot as u64, "slot");
            // gains vary independently from slot to slot
            let gains = sample_gains(cfg.fading, transmitters.len(), &mut slot_rng);
            let words: Vec<BitWord> = transmitters.iter().map(|&p| genie[p].clone()).collect();
            let obs = synth_slot(&words, &gains, &transmitters, power, false, &mut slot_rng)
                .expect("consistent slot inputs");
            let result =
                decode_slot_iterative(&obs, code, power, policy, bank, slot, &cfg.decoder)?;
            attempts += result.attempts as u64;
            if result.skipped_capacity {
                skipped += 1;
            }
            slot_results.push((transmitters, result));
        }
        let (a, w_hat) = frame::assemble(&slot_results, active_len)?;
        let frame_result = frame::recover(&a, &w_hat)?;
        let (lost, total) = frame::frame_loss(&frame_result, &genie);
        Ok::<_, HarnessError>((lost as u64, total as u64, attempts, frame_cfg.t_f as u64, skipped))
    });

    let mut point = SweepPoint {
        r: frame_cfg.r,
        t_f: frame_cfg.t_f,
        policy: policy_token(policy),
        frames: cfg.frames as u64,
        packets: 0,
        lost: 0,
        attempts: 0,
        slots: 0,
        skipped_slots: 0,
    };
    for partial in partials {
        let (lost, total, attempts, slots, skipped) = partial?;
        point.lost += lost;
        point.packets += total;
        point.attempts += attempts;
        point.slots += slots;
        point.skipped_slots += skipped;
    }
    Ok(point)
}

pub fn frame_sweep_table(cfg: &FrameSweepConfig, points: &[SweepPoint]) -> ResultTable {
    let policies: Vec<String> = cfg.policies.iter().map(|&p| policy_token(p)).collect();
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.policy.clone(),
                p.r.to_string(),
                p.t_f.to_string(),
                p.frames.to_string(),
                p.packets.to_string(),
                p.lost.to_string(),
                format!("{:.6}", p.packet_loss()),
                format!("{:.6}", p.std_error()),
                format!("{:.4}", p.attempts_per_slot()),
                p.skipped_slots.to_string(),
            ]
        })
        .collect();
    ResultTable {
        comments: vec![
            "experiment=frame_sweep".into(),
            format!("active={}", cfg.active),
            format!("frames={}", cfg.frames),
            format!("snr_db={:?}", cfg.snr_db),
            format!("fading={}", fading_token(cfg.fading)),
            format!("policies={}", policies.join(";")),
            format!("seed={}", cfg.seed),
            format!("max_iter={}", cfg.decoder.max_iter),
        ],
        header: vec![
            "policy".into(),
            "r".into(),
            "t_f".into(),
            "frames".into(),
            "packets".into(),
            "lost".into(),
            "packet_loss".into(),
            "std_error".into(),
            "attempts_per_slot".into(),
            "skipped_slots".into(),
        ],
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc;

    #[test]
    fn derive_rng_reproducible_and_distinct() {
        let mut a = derive_rng(1, 2, 3, "role");
        let mut b = derive_rng(1, 2, 3, "role");
        let first_a: Vec<u64> = (0..100).map(|_| a.gen()).collect();
        let first_b: Vec<u64> = (0..100).map(|_| b.gen()).collect();
        assert_eq!(first_a, first_b);

        let mut c = derive_rng(1, 2, 3, "other");
        let first_c: Vec<u64> = (0..100).map(|_| c.gen()).collect();
        assert_ne!(first_a, first_c);

        let mut d = derive_rng(1, 2, 4, "role");
        let first_d: Vec<u64> = (0..100).map(|_| d.gen()).collect();
        assert_ne!(first_a, first_d);
    }

    #[test]
    fn zero_frames_empty_rows() {
        let code = ldpc::default_code();
        let cfg = FrameSweepConfig {
            active: 2,
            reps: vec![2],
            t_f_list: vec![1],
            frames: 0,
            snr_db: 10.0,
            fading: FadingSpec::Rayleigh,
            policies: vec![SelectionPolicy::SicOnly],
            seed: 1,
            decoder: DecoderConfig::default(),
            threads: 1,
        };
        // r > t_f for every point: grid collapses to nothing
        let points = run_frame_sweep(&cfg, &code, None).unwrap();
        assert!(points.is_empty());
    }

    #[test]
    fn sweep_deterministic_across_thread_counts() {
        let code = ldpc::default_code();
        let base = FrameSweepConfig {
            active: 3,
            reps: vec![2],
            t_f_list: vec![4],
            frames: 12,
            snr_db: 10.0,
            fading: FadingSpec::rician(0.9).unwrap(),
            policies: vec![SelectionPolicy::Exhaustive, SelectionPolicy::SicOnly],
            seed: 77,
            decoder: DecoderConfig {
                max_iter: 25,
                ..Default::default()
            },
            threads: 1,
        };
        let serial = run_frame_sweep(&base, &code, None).unwrap();
        let parallel_cfg = FrameSweepConfig {
            threads: 4,
            ..base.clone()
        };
        let par = run_frame_sweep(&parallel_cfg, &code, None).unwrap();
        assert_eq!(serial, par);
        assert_eq!(
            frame_sweep_table(&base, &serial),
            frame_sweep_table(&base, &par)
        );
    }

    #[test]
    fn histogram_deterministic_across_thread_counts() {
        let code = ldpc::default_code();
        let cfg = SlotHistogramConfig {
            collision: 3,
            slots: 30,
            snr_db: 15.0,
            fading: FadingSpec::Rayleigh,
            policy: SelectionPolicy::Exhaustive,
            seed: 5,
            decoder: DecoderConfig {
                max_iter: 25,
                ..Default::default()
            },
            threads: 1,
        };
        let a = run_slot_histogram(&cfg, &code, None).unwrap();
        let cfg4 = SlotHistogramConfig {
            threads: 4,
            ..cfg.clone()
        };
        let b = run_slot_histogram(&cfg4, &code, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.slots, 30);
    }

    #[test]
    fn predictor_policy_without_bank_rejected() {
        let code = ldpc::default_code();
        let cfg = SlotHistogramConfig {
            collision: 2,
            slots: 1,
            snr_db: 10.0,
            fading: FadingSpec::Rayleigh,
            policy: SelectionPolicy::Threshold(0.5),
            seed: 1,
            decoder: DecoderConfig::default(),
            threads: 1,
        };
        assert!(matches!(
            run_slot_histogram(&cfg, &code, None),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn csv_shape() {
        let cfg = SlotHistogramConfig {
            collision: 2,
            slots: 4,
            snr_db: 15.0,
            fading: FadingSpec::Rayleigh,
            policy: SelectionPolicy::Exhaustive,
            seed: 3,
            decoder: DecoderConfig {
                max_iter: 10,
                ..Default::default()
            },
            threads: 1,
        };
        let code = ldpc::default_code();
        let hist = run_slot_histogram(&cfg, &code, None).unwrap();
        let table = slot_histogram_table(&cfg, &hist);
        let csv = table.to_csv();
        let comment_lines = csv.lines().filter(|l| l.starts_with('#')).count();
        assert_eq!(comment_lines, table.comments.len());
        let data_lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines.len(), 1 + 2 * cfg.decoder.max_rounds);
        assert!(data_lines[0].starts_with("degree,iteration"));
    }
}
