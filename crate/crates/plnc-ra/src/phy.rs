//! Real-baseband PHY: BPSK mapping, Rayleigh/Rician gain sampling, slot
//! signal synthesis with unit-variance AWGN, interference cancellation, and
//! channel LLRs for single users and XOR codeword combinations.
//!
//! Combination LLRs marginalize jointly over all 2^d transmit configurations
//! of the colliding users, split by the XOR parity selected by the weight
//! vector. The per-slot table of configuration likelihoods is shared across
//! weight vectors, so attempting many combinations in one slot costs one
//! table build plus cheap per-combination reductions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::gf2::BitWord;
use crate::ldpc::LlrVector;

/// Hard cap on the collision degree handled by joint marginalization.
pub const D_MAX: usize = 8;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("collision degree {0} exceeds capacity {D_MAX}")]
    Capacity(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Fading distribution for per-user, per-slot channel gains, normalized so
/// that E[h^2] = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FadingSpec {
    Rayleigh,
    /// Rician with factor kappa = |E[h]|^2 / E[|h|^2], kappa in [0, 1).
    Rician { factor: f64 },
}

impl FadingSpec {
    pub fn rician(factor: f64) -> Result<Self, PhyError> {
        if !(0.0..1.0).contains(&factor) {
            return Err(PhyError::Parameter(format!(
                "rician factor {factor} outside [0, 1)"
            )));
        }
        Ok(Self::Rician { factor })
    }
}

/// Transmit power given unit noise variance and E[h^2] = 1; the single SNR
/// knob of the simulation.
#[derive(Clone, Copy, Debug)]
pub struct PowerConfig {
    pub snr_db: f64,
}

impl PowerConfig {
    pub fn new(snr_db: f64) -> Self {
        Self { snr_db }
    }

    pub fn power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Everything the slot-level receiver sees (plus genie-side truth for
/// evaluation): the received payload vector, per-user gains, transmitter
/// identities and their true codewords.
#[derive(Clone, Debug)]
pub struct SlotObservation {
    pub y: Vec<f64>,
    pub gains: Vec<f64>,
    /// Transmitter identities (frame-level active positions).
    pub users: Vec<usize>,
    pub genie_codewords: Vec<BitWord>,
}

/// BPSK map: bit 0 -> -sqrt(P), bit 1 -> +sqrt(P).
pub fn modulate(u: &BitWord, power: f64) -> Vec<f64> {
    let amp = power.sqrt();
    u.iter_bits().map(|b| if b { amp } else { -amp }).collect()
}

/// Draw `count` i.i.d. gains from the fading distribution.
pub fn sample_gains(spec: FadingSpec, count: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..count)
        .map(|_| match spec {
            FadingSpec::Rayleigh => {
                // magnitude of a unit-power complex circular Gaussian
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                ((re * re + im * im) / 2.0).sqrt()
            }
            FadingSpec::Rician { factor } => {
                let z: f64 = StandardNormal.sample(rng);
                factor.sqrt() + (1.0 - factor).sqrt() * z
            }
        })
        .collect()
}

/// Superpose the modulated codewords with their gains; add unit-variance
/// Gaussian noise unless `noiseless` is set (a test hook).
pub fn synth_slot(
    codewords: &[BitWord],
    gains: &[f64],
    users: &[usize],
    power: f64,
    noiseless: bool,
    rng: &mut impl Rng,
) -> Result<SlotObservation, PhyError> {
    if codewords.len() != gains.len() || codewords.len() != users.len() {
        return Err(PhyError::Dimension(
            "codewords, gains and users must have equal counts".into(),
        ));
    }
    let n = codewords.first().map_or(0, BitWord::len);
    let mut y = vec![0.0f64; n];
    for (u, &h) in codewords.iter().zip(gains) {
        if u.len() != n {
            return Err(PhyError::Dimension("codeword lengths differ".into()));
        }
        for (t, x) in modulate(u, power).into_iter().enumerate() {
            y[t] += h * x;
        }
    }
    if !noiseless {
        for v in &mut y {
            let z: f64 = StandardNormal.sample(rng);
            *v += z;
        }
    }
    Ok(SlotObservation {
        y,
        gains: gains.to_vec(),
        users: users.to_vec(),
        genie_codewords: codewords.to_vec(),
    })
}

/// Subtract one reconstructed packet from the received signal.
pub fn cancel(y: &[f64], h: f64, u: &BitWord, power: f64) -> Vec<f64> {
    let x = modulate(u, power);
    y.iter().zip(&x).map(|(yt, xt)| yt - h * xt).collect()
}

/// Single-user LLR treating everything else as Gaussian noise with the given
/// variance: LLR_t = -2 h sqrt(P) y_t / var, clipped.
pub fn channel_llr_single_var(y: &[f64], h: f64, power: f64, noise_var: f64) -> LlrVector {
    let scale = -2.0 * h * power.sqrt() / noise_var;
    LlrVector::clipped(y.iter().map(|&yt| scale * yt).collect())
}

/// Single-user LLR at unit noise variance.
pub fn channel_llr_single(y: &[f64], h: f64, power: f64) -> LlrVector {
    channel_llr_single_var(y, h, power, 1.0)
}

/// Per-slot table of configuration likelihoods shared by all combination
/// LLRs in that slot.
///
/// Entry `(t, b)` holds exp(-(y_t - s_b)^2 / 2 + c_t) where `s_b` is the
/// superposition of the d users transmitting bit pattern `b` (LSB = user 0)
/// and `c_t` normalizes the row maximum to 1; the normalizer cancels in every
/// LLR difference.
pub struct SumLlrTable {
    probs: Vec<f64>, // n rows of 2^d entries
    d: usize,
    n: usize,
}

impl SumLlrTable {
    pub fn build(y: &[f64], gains: &[f64], power: f64) -> Result<Self, PhyError> {
        let d = gains.len();
        if d == 0 {
            return Err(PhyError::Parameter("empty gain vector".into()));
        }
        if d > D_MAX {
            return Err(PhyError::Capacity(d));
        }
        let configs = 1usize << d;
        let amp = power.sqrt();
        let mut sums = vec![0.0f64; configs];
        for (b, s) in sums.iter_mut().enumerate() {
            *s = gains
                .iter()
                .enumerate()
                .map(|(l, &h)| if (b >> l) & 1 == 1 { h * amp } else { -h * amp })
                .sum();
        }
        let n = y.len();
        let mut probs = vec![0.0f64; n * configs];
        for (t, &yt) in y.iter().enumerate() {
            let row = &mut probs[t * configs..(t + 1) * configs];
            let mut max = f64::NEG_INFINITY;
            for (b, p) in row.iter_mut().enumerate() {
                let diff = yt - sums[b];
                *p = -0.5 * diff * diff;
                if *p > max {
                    max = *p;
                }
            }
            for p in row.iter_mut() {
                *p = (*p - max).exp();
            }
        }
        Ok(Self { probs, d, n })
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    /// LLR vector for the combination selected by weight vector `a`.
    pub fn llr(&self, a: &BitWord) -> Result<LlrVector, PhyError> {
        if a.len() != self.d {
            return Err(PhyError::Dimension(format!(
                "weight vector length {} != degree {}",
                a.len(),
                self.d
            )));
        }
        if a.is_zero() {
            return Err(PhyError::Parameter("all-zero weight vector".into()));
        }
        let mask = a.to_index() as usize;
        let configs = 1usize << self.d;
        let mut out = Vec::with_capacity(self.n);
        for t in 0..self.n {
            let row = &self.probs[t * configs..(t + 1) * configs];
            let mut even = 0.0f64;
            let mut odd = 0.0f64;
            for (b, &p) in row.iter().enumerate() {
                if (b & mask).count_ones() % 2 == 0 {
                    even += p;
                } else {
                    odd += p;
                }
            }
            out.push(even.ln() - odd.ln());
        }
        Ok(LlrVector::clipped(out))
    }
}

/// Combination LLR by joint marginalization over all 2^d configurations.
pub fn channel_llr_combo(
    y: &[f64],
    gains: &[f64],
    power: f64,
    a: &BitWord,
) -> Result<LlrVector, PhyError> {
    SumLlrTable::build(y, gains, power)?.llr(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::L_MAX;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Independent brute-force oracle: enumerate all 2^d configurations in
    /// log domain with a naive log-sum-exp, no shared table.
    pub fn combo_llr_oracle(y: &[f64], gains: &[f64], power: f64, a: &BitWord) -> Vec<f64> {
        let d = gains.len();
        let amp = power.sqrt();
        let mask = a.to_index() as usize;
        y.iter()
            .map(|&yt| {
                let mut logs0 = Vec::new();
                let mut logs1 = Vec::new();
                for b in 0..(1usize << d) {
                    let s: f64 = gains
                        .iter()
                        .enumerate()
                        .map(|(l, &h)| if (b >> l) & 1 == 1 { h * amp } else { -h * amp })
                        .sum();
                    let e = -0.5 * (yt - s) * (yt - s);
                    if (b & mask).count_ones() % 2 == 0 {
                        logs0.push(e);
                    } else {
                        logs1.push(e);
                    }
                }
                let lse = |v: &[f64]| {
                    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    m + v.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
                };
                (lse(&logs0) - lse(&logs1)).clamp(-L_MAX, L_MAX)
            })
            .collect()
    }

    #[test]
    fn modulate_mapping() {
        let u = BitWord::from_str01("1010").unwrap();
        assert_eq!(modulate(&u, 4.0), vec![2.0, -2.0, 2.0, -2.0]);
        let zero = BitWord::zeros(3);
        assert_eq!(modulate(&zero, 1.0), vec![-1.0, -1.0, -1.0]);
        // constant envelope
        let x = modulate(&u, 7.5);
        let e: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!(close(e, 7.5, 1e-12));
    }

    #[test]
    fn rayleigh_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let gains = sample_gains(FadingSpec::Rayleigh, 1_000_000, &mut rng);
        let e2: f64 = gains.iter().map(|h| h * h).sum::<f64>() / gains.len() as f64;
        assert!(close(e2, 1.0, 0.01), "E[h^2] = {e2}");
        assert!(gains.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn rician_factor_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = FadingSpec::rician(0.9).unwrap();
        let gains = sample_gains(spec, 1_000_000, &mut rng);
        let n = gains.len() as f64;
        let mean: f64 = gains.iter().sum::<f64>() / n;
        let e2: f64 = gains.iter().map(|h| h * h).sum::<f64>() / n;
        assert!(close(mean * mean / e2, 0.9, 0.01));
        assert!(close(e2, 1.0, 0.01));
    }

    #[test]
    fn rician_zero_is_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = FadingSpec::rician(0.0).unwrap();
        let gains = sample_gains(spec, 200_000, &mut rng);
        let mean: f64 = gains.iter().sum::<f64>() / gains.len() as f64;
        assert!(close(mean, 0.0, 0.01));
    }

    #[test]
    fn rician_factor_validation() {
        assert!(FadingSpec::rician(1.0).is_err());
        assert!(FadingSpec::rician(-0.1).is_err());
    }

    #[test]
    fn synth_noiseless_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = BitWord::from_str01("1100").unwrap();
        let obs = synth_slot(&[u.clone()], &[0.7], &[0], 2.0, true, &mut rng).unwrap();
        let expect: Vec<f64> = modulate(&u, 2.0).iter().map(|x| 0.7 * x).collect();
        assert_eq!(obs.y, expect);

        let obs2 =
            synth_slot(&[u.clone(), u.clone()], &[1.0, 1.0], &[0, 1], 2.0, true, &mut rng).unwrap();
        let expect2: Vec<f64> = modulate(&u, 2.0).iter().map(|x| 2.0 * x).collect();
        assert_eq!(obs2.y, expect2);
    }

    #[test]
    fn synth_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 128;
        let u = BitWord::zeros(n);
        let mut acc = 0.0f64;
        let mut count = 0usize;
        let clean = modulate(&u, 1.0);
        for _ in 0..8000 {
            let obs = synth_slot(&[u.clone()], &[1.0], &[0], 1.0, false, &mut rng).unwrap();
            for t in 0..n {
                let z = obs.y[t] - clean[t];
                acc += z * z;
                count += 1;
            }
        }
        let var = acc / count as f64;
        assert!(close(var, 1.0, 0.01), "noise variance {var}");
    }

    #[test]
    fn cancel_removes_packet() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let u = BitWord::from_str01("101011").unwrap();
        let v = BitWord::from_str01("110001").unwrap();
        let obs = synth_slot(
            &[u.clone(), v.clone()],
            &[0.9, 1.3],
            &[0, 1],
            3.0,
            true,
            &mut rng,
        )
        .unwrap();
        let after = cancel(&obs.y, 0.9, &u, 3.0);
        let residual = cancel(&after, 1.3, &v, 3.0);
        assert!(residual.iter().all(|r| r.abs() < 1e-12));
        // cancelling twice is not the identity
        let twice = cancel(&after, 0.9, &u, 3.0);
        assert!(twice.iter().zip(&after).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn llr_single_closed_form() {
        let llr = channel_llr_single(&[0.0, -1.0, 2.0], 1.0, 1.0);
        assert!(close(llr.0[0], 0.0, 1e-12));
        assert!(close(llr.0[1], 2.0, 1e-12));
        assert!(close(llr.0[2], -4.0, 1e-12));
    }

    #[test]
    fn combo_matches_single_for_degree_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let u = BitWord::from_str01("0110").unwrap();
        let obs = synth_slot(&[u], &[0.8], &[0], 1.5, false, &mut rng).unwrap();
        let single = channel_llr_single(&obs.y, 0.8, 1.5);
        let a = BitWord::from_bits(&[1]);
        let combo = channel_llr_combo(&obs.y, &[0.8], 1.5, &a).unwrap();
        for (s, c) in single.0.iter().zip(&combo.0) {
            assert!(close(*s, *c, 1e-9), "{s} vs {c}");
        }
    }

    #[test]
    fn combo_known_value_degree_two() {
        // d=2, a=[1,1], h=[1,1], P=1, y_t=0: XOR-0 configs {00,11} give
        // 2 exp(-2), XOR-1 configs give 2 exp(0) => LLR = -2.
        let a = BitWord::from_bits(&[1, 1]);
        let llr = channel_llr_combo(&[0.0], &[1.0, 1.0], 1.0, &a).unwrap();
        assert!(close(llr.0[0], -2.0, 1e-12), "{}", llr.0[0]);
    }

    #[test]
    fn combo_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let d = 3;
            let gains = sample_gains(FadingSpec::Rayleigh, d, &mut rng);
            let y: Vec<f64> = (0..16).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let p = 2.0;
            for i in 1..(1u64 << d) {
                let a = crate::gf2::binary_expansion(i, d).unwrap();
                let got = channel_llr_combo(&y, &gains, p, &a).unwrap();
                let want = combo_llr_oracle(&y, &gains, p, &a);
                for (g, w) in got.0.iter().zip(&want) {
                    assert!(close(*g, *w, 1e-9), "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn combo_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let gains = vec![0.4, 1.1, 0.9];
        let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let a = BitWord::from_bits(&[1, 0, 1]);
        let base = channel_llr_combo(&y, &gains, 1.0, &a).unwrap();
        // jointly permute gains and a
        let perm = [2usize, 0, 1];
        let gains_p: Vec<f64> = perm.iter().map(|&i| gains[i]).collect();
        let mut a_p = BitWord::zeros(3);
        for (new, &old) in perm.iter().enumerate() {
            a_p.set(new, a.get(old));
        }
        let permuted = channel_llr_combo(&y, &gains_p, 1.0, &a_p).unwrap();
        for (b, p) in base.0.iter().zip(&permuted.0) {
            assert!(close(*b, *p, 1e-9));
        }
    }

    #[test]
    fn combo_sign_symmetry() {
        // Negating y complements every configuration, which shifts the
        // combination parity by weight(a) mod 2: the LLR flips sign for
        // odd-weight combinations and is invariant for even-weight ones.
        let y = vec![0.3, -1.2, 2.5];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let gains = [0.7, 1.2];
        let odd = BitWord::from_bits(&[1, 0]);
        let pos = channel_llr_combo(&y, &gains, 1.0, &odd).unwrap();
        let negated = channel_llr_combo(&neg, &gains, 1.0, &odd).unwrap();
        for (p, n) in pos.0.iter().zip(&negated.0) {
            assert!(close(*p, -*n, 1e-9));
        }
        let even = BitWord::from_bits(&[1, 1]);
        let pos = channel_llr_combo(&y, &gains, 1.0, &even).unwrap();
        let same = channel_llr_combo(&neg, &gains, 1.0, &even).unwrap();
        for (p, s) in pos.0.iter().zip(&same.0) {
            assert!(close(*p, *s, 1e-9));
        }
    }

    #[test]
    fn combo_noiseless_signs_match_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let words: Vec<BitWord> = (0..3)
            .map(|_| {
                let bits: Vec<u8> = (0..12).map(|_| rng.gen_range(0..2)).collect();
                BitWord::from_bits(&bits)
            })
            .collect();
        // High power: the true configuration's likelihood dominates every
        // competitor, so each combination LLR sign matches the true XOR.
        // (At moderate power competing configurations can legitimately
        // flip a position even without noise.)
        let gains = vec![1.2, 0.8, 1.0];
        let power = 100.0;
        let obs = synth_slot(&words, &gains, &[0, 1, 2], power, true, &mut rng).unwrap();
        for i in 1..8u64 {
            let a = crate::gf2::binary_expansion(i, 3).unwrap();
            let truth = crate::gf2::xor_accumulate(&words, &a).unwrap();
            let llr = channel_llr_combo(&obs.y, &gains, power, &a).unwrap();
            for (t, &l) in llr.0.iter().enumerate() {
                if truth.get(t) {
                    assert!(l <= 0.0, "position {t}: llr {l} but bit 1");
                } else {
                    assert!(l >= 0.0, "position {t}: llr {l} but bit 0");
                }
            }
        }
    }

    #[test]
    fn capacity_limit_enforced() {
        let gains = vec![1.0; D_MAX + 1];
        let y = vec![0.0; 4];
        let a = BitWord::from_bits(&vec![1u8; D_MAX + 1]);
        assert!(matches!(
            channel_llr_combo(&y, &gains, 1.0, &a),
            Err(PhyError::Capacity(_))
        ));
    }
}
