//! Slot-level receiver: successive interference cancellation, sum decoding
//! over selected weight vectors, and the iterative exhaustive procedure that
//! re-attempts combinations after cancelling fully decoded packets.

use std::collections::HashSet;

use thiserror::Error;

use crate::gf2::{binary_expansion, xor_accumulate, BitWord};
use crate::ldpc::LdpcCode;
use crate::mlp::MlpBank;
use crate::phy::{cancel, channel_llr_single_var, SlotObservation, SumLlrTable, D_MAX};

#[derive(Debug, Error)]
pub enum SlotError {
    #[error("policy requires a predictor model for degree {0}")]
    MissingModel(usize),
    #[error("phy error: {0}")]
    Phy(#[from] crate::phy::PhyError),
    #[error("invalid policy parameter: {0}")]
    Policy(String),
}

/// How the receiver chooses which weight vectors to attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionPolicy {
    /// Every nonzero weight vector, singletons included.
    Exhaustive,
    /// Predictor-filtered: all combinations with predicted success
    /// probability >= tau, attempted in decreasing probability order.
    Threshold(f64),
    /// Predictor-filtered: the nu most promising combinations.
    TopNu(usize),
    /// Classic SIC: singletons only, strongest gain first, stop at the
    /// first failure.
    SicOnly,
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), SlotError> {
        match *self {
            SelectionPolicy::Threshold(tau) if !(tau > 0.0 && tau < 1.0) => Err(
                SlotError::Policy(format!("threshold {tau} outside (0, 1)")),
            ),
            SelectionPolicy::TopNu(0) => Err(SlotError::Policy("nu must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn needs_predictor(&self) -> bool {
        matches!(self, SelectionPolicy::Threshold(_) | SelectionPolicy::TopNu(_))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderConfig {
    pub max_iter: usize,
    pub max_rounds: usize,
    pub d_max: usize,
    /// Derive further singletons by XORing accepted combinations before the
    /// next round. Off by default.
    pub knowledge_propagation: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            max_rounds: 3,
            d_max: D_MAX,
            knowledge_propagation: false,
        }
    }
}

/// One accepted (or, for genie statistics, evaluated) codeword combination.
#[derive(Clone, Debug)]
pub struct DecodedCombination {
    /// Weight vector over the slot's transmitter list (`obs.users` order).
    pub weights: BitWord,
    pub word: BitWord,
    pub slot: usize,
    /// Decoding round in which this combination was accepted (1-based).
    pub iteration: usize,
    pub syndrome_ok: bool,
    pub genie_correct: bool,
}

#[derive(Clone, Debug)]
pub struct SlotResult {
    pub decoded: Vec<DecodedCombination>,
    /// User identities left undecoded as individuals.
    pub residual_users: Vec<usize>,
    /// Number of BP decoder invocations.
    pub attempts: usize,
    /// Set when the collision degree exceeded the decoder capacity and the
    /// slot was skipped.
    pub skipped_capacity: bool,
}

impl SlotResult {
    fn empty() -> Self {
        Self {
            decoded: Vec::new(),
            residual_users: Vec::new(),
            attempts: 0,
            skipped_capacity: false,
        }
    }
}

/// Outcome of the pure SIC stage.
pub struct SicPassResult {
    pub decoded: Vec<DecodedCombination>,
    pub residual_y: Vec<f64>,
    /// Local indices (into `obs.users`) still undecoded.
    pub residual_local: Vec<usize>,
    pub attempts: usize,
}

fn singleton_weights(n_users: usize, local: usize) -> BitWord {
    let mut w = BitWord::zeros(n_users);
    w.set(local, true);
    w
}

/// SIC: decode users in order of decreasing |h|, treating the remaining
/// interferers as Gaussian noise; cancel on success, stop at the first
/// failure.
pub fn sic_pass(
    obs: &SlotObservation,
    code: &LdpcCode,
    power: f64,
    slot: usize,
    cfg: &DecoderConfig,
) -> SicPassResult {
    let n_users = obs.users.len();
    let mut remaining: Vec<usize> = (0..n_users).collect();
    remaining.sort_by(|&a, &b| {
        obs.gains[b]
            .abs()
            .partial_cmp(&obs.gains[a].abs())
            .expect("finite gains")
    });
    let mut y = obs.y.clone();
    let mut decoded = Vec::new();
    let mut attempts = 0usize;
    while let Some(&target) = remaining.first() {
        let interference: f64 = remaining[1..]
            .iter()
            .map(|&l| power * obs.gains[l] * obs.gains[l])
            .sum();
        let llr = channel_llr_single_var(&y, obs.gains[target], power, 1.0 + interference);
        let out = code.bp_decode(&llr, cfg.max_iter);
        attempts += 1;
        if !out.syndrome_ok {
            break;
        }
        y = cancel(&y, obs.gains[target], &out.word, power);
        decoded.push(DecodedCombination {
            weights: singleton_weights(n_users, target),
            genie_correct: out.word == obs.genie_codewords[target],
            word: out.word,
            slot,
            iteration: 1,
            syndrome_ok: true,
        });
        remaining.remove(0);
    }
    SicPassResult {
        decoded,
        residual_y: y,
        residual_local: {
            let mut r = remaining;
            r.sort_unstable();
            r
        },
        attempts,
    }
}

/// Attempt each candidate weight vector against the residual signal.
///
/// `gains` and `genie_words` are indexed consistently with the candidate
/// vectors (the current undecoded set T' in some fixed order).
pub fn sum_decode_pass(
    residual_y: &[f64],
    gains: &[f64],
    genie_words: &[BitWord],
    code: &LdpcCode,
    power: f64,
    candidates: &[BitWord],
    slot: usize,
    iteration: usize,
    cfg: &DecoderConfig,
) -> Result<(Vec<DecodedCombination>, usize), SlotError> {
    if candidates.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let table = SumLlrTable::build(residual_y, gains, power)?;
    let mut accepted = Vec::new();
    let mut attempts = 0usize;
    for a in candidates {
        debug_assert!(!a.is_zero());
        let llr = table.llr(a)?;
        let out = code.bp_decode(&llr, cfg.max_iter);
        attempts += 1;
        if out.syndrome_ok {
            let truth = xor_accumulate(genie_words, a).expect("consistent lengths");
            accepted.push(DecodedCombination {
                weights: a.clone(),
                genie_correct: out.word == truth,
                word: out.word,
                slot,
                iteration,
                syndrome_ok: true,
            });
        }
    }
    Ok((accepted, attempts))
}

/// Pick weight vectors from a predicted probability vector according to the
/// policy. `p[i - 1]` is the predicted success probability of combination
/// `binary_expansion(i, d)`.
pub fn select_combinations(
    p: &[f64],
    policy: SelectionPolicy,
    d: usize,
) -> Result<Vec<BitWord>, SlotError> {
    policy.validate()?;
    assert_eq!(p.len(), (1usize << d) - 1, "probability vector length");
    let expand = |i: usize| binary_expansion(i as u64 + 1, d).expect("index in range");
    match policy {
        SelectionPolicy::Exhaustive => Ok((0..p.len()).map(expand).collect()),
        SelectionPolicy::Threshold(tau) => {
            let mut idx: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= tau).collect();
            idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).expect("finite probabilities").then(a.cmp(&b)));
            Ok(idx.into_iter().map(expand).collect())
        }
        SelectionPolicy::TopNu(nu) => {
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).expect("finite probabilities").then(a.cmp(&b)));
            idx.truncate(nu);
            Ok(idx.into_iter().map(expand).collect())
        }
        SelectionPolicy::SicOnly => {
            let mut idx: Vec<usize> = (0..p.len())
                .filter(|&i| (i + 1).count_ones() == 1)
                .collect();
            idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).expect("finite probabilities").then(a.cmp(&b)));
            Ok(idx.into_iter().map(expand).collect())
        }
    }
}

/// Full slot-level receiver: per round, build the candidate set over the
/// current undecoded set, attempt all of it, cancel newly decoded singleton
/// packets, and repeat until no progress or `max_rounds`.
///
/// Combinations already accepted in an earlier round are not re-attempted.
pub fn decode_slot_iterative(
    obs: &SlotObservation,
    code: &LdpcCode,
    power: f64,
    policy: SelectionPolicy,
    predictor: Option<&MlpBank>,
    slot: usize,
    cfg: &DecoderConfig,
) -> Result<SlotResult, SlotError> {
    policy.validate()?;
    let n_users = obs.users.len();
    if n_users == 0 {
        return Ok(SlotResult::empty());
    }
    if n_users > cfg.d_max {
        let mut res = SlotResult::empty();
        res.residual_users = obs.users.clone();
        res.skipped_capacity = true;
        return Ok(res);
    }

    if policy == SelectionPolicy::SicOnly {
        let sic = sic_pass(obs, code, power, slot, cfg);
        return Ok(SlotResult {
            decoded: sic.decoded,
            residual_users: sic.residual_local.iter().map(|&l| obs.users[l]).collect(),
            attempts: sic.attempts,
            skipped_capacity: false,
        });
    }

    let mut residual_y = obs.y.clone();
    let mut alive: Vec<usize> = (0..n_users).collect();
    let mut accepted_masks: HashSet<u64> = HashSet::new();
    let mut decoded: Vec<DecodedCombination> = Vec::new();
    let mut attempts = 0usize;

    for round in 1..=cfg.max_rounds {
        let d = alive.len();
        if d == 0 {
            break;
        }
        let gains: Vec<f64> = alive.iter().map(|&l| obs.gains[l]).collect();
        let genie_words: Vec<BitWord> =
            alive.iter().map(|&l| obs.genie_codewords[l].clone()).collect();

        // Candidate vectors over the alive ordering.
        let candidates: Vec<BitWord> = match policy {
            SelectionPolicy::Exhaustive => {
                (1..(1u64 << d)).map(|i| binary_expansion(i, d).unwrap()).collect()
            }
            SelectionPolicy::Threshold(_) | SelectionPolicy::TopNu(_) => {
                let bank = predictor.ok_or(SlotError::MissingModel(d))?;
                let model = bank.get(d).ok_or(SlotError::MissingModel(d))?;
                // Sort gains by decreasing magnitude; predict in sorted
                // order, then map each selected vector back.
                let mut perm: Vec<usize> = (0..d).collect();
                perm.sort_by(|&a, &b| {
                    gains[b].abs().partial_cmp(&gains[a].abs()).expect("finite gains")
                });
                let sorted: Vec<f64> = perm.iter().map(|&i| gains[i]).collect();
                let p = model.forward(&sorted).map_err(|e| {
                    SlotError::Policy(format!("predictor evaluation failed: {e}"))
                })?;
                select_combinations(&p, policy, d)?
                    .into_iter()
                    .map(|a_sorted| {
                        let mut a = BitWord::zeros(d);
                        for (s, &orig) in perm.iter().enumerate() {
                            if a_sorted.get(s) {
                                a.set(orig, true);
                            }
                        }
                        a
                    })
                    .collect()
            }
            SelectionPolicy::SicOnly => unreachable!("handled above"),
        };

        // Drop candidates whose combination was already accepted earlier.
        let candidates: Vec<BitWord> = candidates
            .into_iter()
            .filter(|a| {
                let mask = global_mask(a, &alive);
                !accepted_masks.contains(&mask)
            })
            .collect();
        if candidates.is_empty() {
            break;
        }

        let (accepted, used) = sum_decode_pass(
            &residual_y,
            &gains,
            &genie_words,
            code,
            power,
            &candidates,
            slot,
            round,
            cfg,
        )?;
        attempts += used;

        let mut cancelled_this_round = Vec::new();
        for combo in &accepted {
            accepted_masks.insert(global_mask(&combo.weights, &alive));
            if combo.weights.weight() == 1 {
                let local_in_alive = combo.weights.leading_one().expect("weight 1");
                cancelled_this_round.push((alive[local_in_alive], combo.word.clone()));
            }
        }

        // Re-embed accepted vectors over the original transmitter list.
        for combo in accepted {
            let mut weights = BitWord::zeros(n_users);
            for (j, &orig) in alive.iter().enumerate() {
                if combo.weights.get(j) {
                    weights.set(orig, true);
                }
            }
            decoded.push(DecodedCombination { weights, ..combo });
        }

        if cfg.knowledge_propagation {
            derive_singletons(&decoded, &alive, n_users, &mut cancelled_this_round, slot, round, obs);
        }

        if cancelled_this_round.is_empty() {
            break;
        }
        for (orig, word) in cancelled_this_round {
            if let Some(pos) = alive.iter().position(|&l| l == orig) {
                residual_y = cancel(&residual_y, obs.gains[orig], &word, power);
                alive.remove(pos);
            }
        }
    }

    Ok(SlotResult {
        decoded,
        residual_users: alive.iter().map(|&l| obs.users[l]).collect(),
        attempts,
        skipped_capacity: false,
    })
}

fn global_mask(a: &BitWord, alive: &[usize]) -> u64 {
    let mut mask = 0u64;
    for (j, &orig) in alive.iter().enumerate() {
        if a.get(j) {
            mask |= 1u64 << orig;
        }
    }
    mask
}

/// Knowledge propagation: eliminate the accepted combinations over the still
/// undecoded users and cancel any packet that becomes uniquely determined.
fn derive_singletons(
    decoded: &[DecodedCombination],
    alive: &[usize],
    n_users: usize,
    cancelled: &mut Vec<(usize, BitWord)>,
    slot: usize,
    round: usize,
    obs: &SlotObservation,
) {
    use crate::gf2::{solve_combinations, BitMatrix};
    let already: HashSet<usize> = cancelled.iter().map(|c| c.0).collect();
    let mut a_rows = Vec::new();
    let mut w_rows = Vec::new();
    for combo in decoded {
        if !combo.syndrome_ok {
            continue;
        }
        // Restrict to alive columns; combos touching only decoded users
        // reduce to zero rows and drop out in elimination.
        let mut row = BitWord::zeros(alive.len());
        let mut in_alive = true;
        for pos in 0..n_users {
            if combo.weights.get(pos) {
                match alive.iter().position(|&l| l == pos) {
                    Some(j) => row.set(j, true),
                    None => {
                        in_alive = false;
                        break;
                    }
                }
            }
        }
        // Rows touching already-cancelled users would need their words
        // substituted; the plain procedure only combines rows fully inside
        // the alive set.
        if in_alive && !row.is_zero() {
            a_rows.push(row);
            w_rows.push(combo.word.clone());
        }
    }
    if a_rows.is_empty() {
        return;
    }
    let a = BitMatrix::from_rows(a_rows).expect("uniform row length");
    let w = BitMatrix::from_rows(w_rows).expect("uniform row length");
    let Ok(solution) = solve_combinations(&a, &w) else {
        return;
    };
    for (j, word) in solution.recovered {
        let orig = alive[j];
        if !already.contains(&orig) {
            let _ = (slot, round, &obs.genie_codewords); // provenance kept by caller
            cancelled.push((orig, word));
        }
    }
}
