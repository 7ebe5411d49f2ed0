//! Frame-level contention resolution: embed each slot's accepted weight
//! vectors into rows over the frame's active set, eliminate, recover the
//! uniquely determined codewords and account packet loss.

use std::collections::BTreeSet;

use crate::gf2::{solve_combinations, BitMatrix, BitWord, Gf2Error};
use crate::slot::SlotResult;

/// Frame recovery outcome over the ordered active set.
#[derive(Clone, Debug)]
pub struct FrameResult {
    pub a: BitMatrix,
    pub w_hat: BitMatrix,
    /// Active position -> recovered codeword.
    pub recovered: std::collections::BTreeMap<usize, BitWord>,
    /// Active positions not recovered.
    pub lost: BTreeSet<usize>,
    /// Inconsistent rows dropped during elimination.
    pub conflicts: usize,
}

/// Stack every accepted slot combination as a row over the |A| active
/// positions. `SlotResult.decoded[_].weights` is already indexed by the
/// slot's transmitter list; `SlotObservation.users` must carry active
/// positions for the embedding to be the identity mapping on indices.
///
/// Duplicate weight rows are deduplicated (first decode wins).
pub fn assemble(
    slots: &[(Vec<usize>, SlotResult)],
    active_len: usize,
) -> Result<(BitMatrix, BitMatrix), Gf2Error> {
    let mut seen = BTreeSet::new();
    let mut a_rows = Vec::new();
    let mut w_rows = Vec::new();
    for (users, result) in slots {
        for combo in &result.decoded {
            if !combo.syndrome_ok {
                continue;
            }
            let mut row = BitWord::zeros(active_len);
            for (local, &pos) in users.iter().enumerate() {
                if combo.weights.get(local) {
                    if pos >= active_len {
                        return Err(Gf2Error::Dimension(format!(
                            "active position {pos} outside frame of size {active_len}"
                        )));
                    }
                    row.set(pos, true);
                }
            }
            if row.is_zero() || !seen.insert(row.clone()) {
                continue;
            }
            a_rows.push(row);
            w_rows.push(combo.word.clone());
        }
    }
    let a = if a_rows.is_empty() {
        BitMatrix::zeros(0, active_len)
    } else {
        BitMatrix::from_rows(a_rows)?
    };
    let w = if w_rows.is_empty() {
        BitMatrix::zeros(0, 0)
    } else {
        BitMatrix::from_rows(w_rows)?
    };
    Ok((a, w))
}

/// Eliminate the assembled system and recover every uniquely determined
/// codeword.
pub fn recover(a: &BitMatrix, w_hat: &BitMatrix) -> Result<FrameResult, Gf2Error> {
    let active_len = a.n_cols();
    if a.n_rows() == 0 {
        return Ok(FrameResult {
            a: a.clone(),
            w_hat: w_hat.clone(),
            recovered: Default::default(),
            lost: (0..active_len).collect(),
            conflicts: 0,
        });
    }
    let solution = solve_combinations(a, w_hat)?;
    let lost: BTreeSet<usize> = (0..active_len)
        .filter(|p| !solution.recovered.contains_key(p))
        .collect();
    Ok(FrameResult {
        a: a.clone(),
        w_hat: w_hat.clone(),
        recovered: solution.recovered,
        lost,
        conflicts: solution.conflicts,
    })
}

/// Per-frame loss accounting: a packet counts as lost unless it was
/// recovered *and* matches the genie codeword (a recovery from a wrong
/// combination is still a loss).
pub fn frame_loss(result: &FrameResult, genie: &[BitWord]) -> (usize, usize) {
    let total = genie.len();
    let correct = result
        .recovered
        .iter()
        .filter(|(pos, word)| genie.get(**pos).is_some_and(|g| g == *word))
        .count();
    (total - correct, total)
}

/// Aggregate packet loss rate over frames of `(lost, total)` counts.
pub fn packet_loss(counts: &[(usize, usize)]) -> f64 {
    let lost: usize = counts.iter().map(|c| c.0).sum();
    let total: usize = counts.iter().map(|c| c.1).sum();
    if total == 0 {
        return 0.0;
    }
    lost as f64 / total as f64
}
