//! Rate-1/2 short binary LDPC codec: alist loading, systematic encoding via
//! column-permuted elimination of H, syndrome checking and sum-product
//! belief-propagation decoding from channel LLRs.
//!
//! The default code is a (3,6)-regular (n=128, k=64) parity-check matrix with
//! girth >= 6, shipped as an alist asset. Any (128,64) code can be substituted
//! through [`load_code`].

use thiserror::Error;

use crate::gf2::{rref, BitMatrix, BitWord};

/// Shared LLR clipping magnitude, applied to channel LLRs and decoder
/// messages alike.
pub const L_MAX: f64 = 30.0;

#[derive(Debug, Error)]
pub enum LdpcError {
    #[error("alist parse error: {0}")]
    Parse(String),
    #[error("invalid code: {0}")]
    Code(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Channel log-likelihood ratios, natural log, positive favors bit 0.
#[derive(Clone, Debug)]
pub struct LlrVector(pub Vec<f64>);

impl LlrVector {
    /// Clip every entry to [-L_MAX, L_MAX].
    pub fn clipped(mut values: Vec<f64>) -> Self {
        for v in &mut values {
            *v = v.clamp(-L_MAX, L_MAX);
        }
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of one BP decoding attempt. `syndrome_ok` is equivalent to
/// `H * word^T = 0`.
#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub word: BitWord,
    pub syndrome_ok: bool,
    pub iterations_used: usize,
}

/// Parity-check structure plus a systematic encoder derived from it.
#[derive(Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Per check node, the variable indices it touches.
    check_neighbors: Vec<Vec<usize>>,
    /// Per variable node, the check indices it touches.
    pub var_neighbors: Vec<Vec<usize>>,
    /// Columns carrying message bits (non-pivot columns of rref(H)), increasing.
    free_cols: Vec<usize>,
    /// Pivot columns of rref(H); parity bit i lives on pivot_cols[i].
    pivot_cols: Vec<usize>,
    /// Rows of rref(H); row i determines the bit on pivot_cols[i].
    parity_rows: Vec<BitWord>,
    /// Flat edge list in check-major order, for the decoder.
    edges_var: Vec<u32>,
    edge_offsets: Vec<u32>,
}

impl LdpcCode {
    /// Build from an explicit edge list `(check, variable)`.
    pub fn from_edges(
        n_checks: usize,
        n_vars: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, LdpcError> {
        let mut check_neighbors = vec![Vec::new(); n_checks];
        let mut var_neighbors = vec![Vec::new(); n_vars];
        for &(c, v) in edges {
            if c >= n_checks || v >= n_vars {
                return Err(LdpcError::Code(format!("edge ({c},{v}) out of bounds")));
            }
            check_neighbors[c].push(v);
            var_neighbors[v].push(c);
        }
        for list in check_neighbors.iter_mut().chain(var_neighbors.iter_mut()) {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(LdpcError::Code("duplicate edge".into()));
            }
        }

        let mut h = BitMatrix::zeros(n_checks, n_vars);
        for (c, vars) in check_neighbors.iter().enumerate() {
            for &v in vars {
                h.set(c, v, true);
            }
        }
        let reduced = rref(&h);
        if reduced.rank != n_checks {
            return Err(LdpcError::Code(format!(
                "H has rank {} but {} rows; expected full row rank",
                reduced.rank, n_checks
            )));
        }
        let k = n_vars - n_checks;
        let pivot_cols = reduced.pivot_cols.clone();
        let free_cols: Vec<usize> =
            (0..n_vars).filter(|c| !pivot_cols.contains(c)).collect();
        let parity_rows = reduced.rref.rows().to_vec();

        let mut edges_var = Vec::new();
        let mut edge_offsets = Vec::with_capacity(n_checks + 1);
        edge_offsets.push(0);
        for vars in &check_neighbors {
            edges_var.extend(vars.iter().map(|&v| v as u32));
            edge_offsets.push(edges_var.len() as u32);
        }

        Ok(Self {
            n: n_vars,
            k,
            check_neighbors,
            var_neighbors,
            free_cols,
            pivot_cols,
            parity_rows,
            edges_var,
            edge_offsets,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Column permutation placing message bits: message bit i sits on
    /// codeword position `free_columns()[i]`.
    pub fn free_columns(&self) -> &[usize] {
        &self.free_cols
    }

    /// Encode a length-k message; parity bits are solved from rref(H).
    pub fn encode(&self, msg: &BitWord) -> Result<BitWord, LdpcError> {
        if msg.len() != self.k {
            return Err(LdpcError::Dimension(format!(
                "message length {} != k = {}",
                msg.len(),
                self.k
            )));
        }
        let mut c = BitWord::zeros(self.n);
        for (i, &col) in self.free_cols.iter().enumerate() {
            if msg.get(i) {
                c.set(col, true);
            }
        }
        // Row i of rref(H) reads: c[pivot_i] + sum of c over the row's free
        // columns = 0.
        for (i, row) in self.parity_rows.iter().enumerate() {
            let mut parity = false;
            for (j, &col) in self.free_cols.iter().enumerate() {
                if row.get(col) && msg.get(j) {
                    parity = !parity;
                }
            }
            c.set(self.pivot_cols[i], parity);
        }
        Ok(c)
    }

    pub fn syndrome_ok(&self, word: &BitWord) -> bool {
        debug_assert_eq!(word.len(), self.n);
        self.check_neighbors.iter().all(|vars| {
            vars.iter().filter(|&&v| word.get(v)).count() % 2 == 0
        })
    }

    /// Flooding sum-product decoder with tanh/atanh check update.
    ///
    /// Stops early once the hard decision satisfies all checks, or when the
    /// hard decision has been stuck unchanged for several iterations with a
    /// nonzero syndrome. Posterior-LLR ties break to bit 0.
    pub fn bp_decode(&self, llr: &LlrVector, max_iter: usize) -> DecodeOutcome {
        assert!(max_iter >= 1);
        assert_eq!(llr.len(), self.n, "LLR length must equal n");
        let n_edges = self.edges_var.len();
        let n_checks = self.check_neighbors.len();

        // Messages live on edges in check-major order.
        let mut v2c = vec![0.0f64; n_edges];
        let mut c2v = vec![0.0f64; n_edges];
        let mut posterior = vec![0.0f64; self.n];
        // Sum of incoming check messages per variable, rebuilt each iteration.
        let mut var_sum = vec![0.0f64; self.n];

        for (e, &v) in self.edges_var.iter().enumerate() {
            v2c[e] = llr.0[v as usize].clamp(-L_MAX, L_MAX);
        }

        let mut hard = BitWord::zeros(self.n);
        let mut stuck = 0usize;
        const STUCK_LIMIT: usize = 8;

        for iter in 1..=max_iter {
            // Check update: extrinsic product of tanh(m/2) via total product
            // with sign bookkeeping and a two-pass fallback on zeros.
            for c in 0..n_checks {
                let lo = self.edge_offsets[c] as usize;
                let hi = self.edge_offsets[c + 1] as usize;
                let mut prod = 1.0f64;
                let mut zero_count = 0usize;
                let mut zero_pos = 0usize;
                for e in lo..hi {
                    let t = (0.5 * v2c[e]).tanh();
                    v2c[e] = t; // reuse slot to hold tanh value
                    if t == 0.0 {
                        zero_count += 1;
                        zero_pos = e;
                    } else {
                        prod *= t;
                    }
                }
                for e in lo..hi {
                    let t = v2c[e];
                    let extrinsic = match zero_count {
                        0 => prod / t,
                        1 if e == zero_pos => prod,
                        _ => 0.0,
                    };
                    // atanh with clamping keeps messages finite.
                    let x = extrinsic.clamp(-0.999_999_999_999, 0.999_999_999_999);
                    c2v[e] = (2.0 * x.atanh()).clamp(-L_MAX, L_MAX);
                }
            }

            var_sum.iter_mut().for_each(|s| *s = 0.0);
            for (e, &v) in self.edges_var.iter().enumerate() {
                var_sum[v as usize] += c2v[e];
            }
            for v in 0..self.n {
                posterior[v] = (llr.0[v].clamp(-L_MAX, L_MAX) + var_sum[v]).clamp(-L_MAX, L_MAX);
            }

            let mut new_hard = BitWord::zeros(self.n);
            for v in 0..self.n {
                // tie at exactly 0 -> bit 0
                if posterior[v] < 0.0 {
                    new_hard.set(v, true);
                }
            }
            let changed = new_hard != hard;
            hard = new_hard;
            if self.syndrome_ok(&hard) {
                return DecodeOutcome {
                    word: hard,
                    syndrome_ok: true,
                    iterations_used: iter,
                };
            }
            if changed {
                stuck = 0;
            } else {
                stuck += 1;
                if stuck >= STUCK_LIMIT {
                    return DecodeOutcome {
                        word: hard,
                        syndrome_ok: false,
                        iterations_used: iter,
                    };
                }
            }

            // Variable update: extrinsic = posterior minus incoming message.
            for (e, &v) in self.edges_var.iter().enumerate() {
                let v = v as usize;
                let m = llr.0[v].clamp(-L_MAX, L_MAX) + var_sum[v] - c2v[e];
                v2c[e] = m.clamp(-L_MAX, L_MAX);
            }
        }

        DecodeOutcome {
            word: hard,
            syndrome_ok: false,
            iterations_used: max_iter,
        }
    }
}

/// Parse an alist text description of a sparse parity-check matrix.
///
/// Layout: `n_cols n_rows`, `max_col_deg max_row_deg`, per-column degrees,
/// per-row degrees, per-column neighbor lists, per-row neighbor lists, all
/// indices 1-based.
pub fn load_code(alist: &str) -> Result<LdpcCode, LdpcError> {
    let mut tokens = alist.split_whitespace().map(|t| {
        t.parse::<usize>()
            .map_err(|_| LdpcError::Parse(format!("non-numeric token '{t}'")))
    });
    let mut next = |what: &str| -> Result<usize, LdpcError> {
        tokens
            .next()
            .ok_or_else(|| LdpcError::Parse(format!("truncated file at {what}")))?
    };

    let n_cols = next("n_cols")?;
    let n_rows = next("n_rows")?;
    if n_cols == 0 || n_rows == 0 || n_rows >= n_cols {
        return Err(LdpcError::Parse(format!(
            "implausible dimensions {n_cols} x {n_rows}"
        )));
    }
    let max_col_deg = next("max_col_deg")?;
    let max_row_deg = next("max_row_deg")?;

    let mut col_degs = Vec::with_capacity(n_cols);
    for i in 0..n_cols {
        let d = next("column degree")?;
        if d > max_col_deg {
            return Err(LdpcError::Parse(format!("column {i} degree {d} > max")));
        }
        col_degs.push(d);
    }
    let mut row_degs = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let d = next("row degree")?;
        if d > max_row_deg {
            return Err(LdpcError::Parse(format!("row {i} degree {d} > max")));
        }
        row_degs.push(d);
    }

    let mut edges = Vec::new();
    for (col, &deg) in col_degs.iter().enumerate() {
        for _ in 0..deg {
            let row = next("column neighbor")?;
            if row == 0 || row > n_rows {
                return Err(LdpcError::Parse(format!(
                    "column {col} references row {row} (1-based) out of range"
                )));
            }
            edges.push((row - 1, col));
        }
    }
    // Row lists are redundant with the column lists; cross-check them.
    let mut row_edges = Vec::new();
    for (row, &deg) in row_degs.iter().enumerate() {
        for _ in 0..deg {
            let col = next("row neighbor")?;
            if col == 0 || col > n_cols {
                return Err(LdpcError::Parse(format!(
                    "row {row} references column {col} (1-based) out of range"
                )));
            }
            row_edges.push((row, col - 1));
        }
    }
    let mut a = edges.clone();
    let mut b = row_edges;
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(LdpcError::Parse(
            "row and column neighbor lists disagree".into(),
        ));
    }

    LdpcCode::from_edges(n_rows, n_cols, &edges)
}

/// The embedded default (n=128, k=64) rate-1/2 code.
pub fn default_code() -> LdpcCode {
    load_code(include_str!("../assets/code_128_64.alist")).expect("embedded asset is valid")
}
