//! Graph sampling: latent positions, the two equivalent edge mechanisms,
//! and Erdős–Rényi nulls.
//!
//! Randomness is addressed per (graph seed, role, row): row i's stream emits
//! the variates for pairs (i, j) with j > i in order. The two mechanisms use
//! different roles, so they can share latents while drawing independent edge
//! noise, and a graph is reproduced bit-for-bit regardless of how replicates
//! are scheduled across threads.

use crate::calibrate::ModelParams;
use crate::connection::ConnectionSpec;
use crate::error::{Error, Result};
use crate::quad::pairwise_dot;
use crate::seed::{SeedContext, StreamRole};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};

/// Refuse latent matrices above this many entries instead of swapping.
pub const MAX_LATENT_ENTRIES: u64 = 1 << 31;

const MAGIC: &[u8; 8] = b"LGLGRAPH";
const FORMAT_VERSION: u32 = 1;

/// Latent positions: n rows of d-dimensional standard normal vectors.
#[derive(Debug, Clone)]
pub struct LatentState {
    n: usize,
    d: usize,
    positions: Vec<f64>,
}

impl LatentState {
    /// Build from an explicit row-major matrix (used by tests to force
    /// synthetic configurations).
    pub fn from_rows(n: usize, d: usize, positions: Vec<f64>) -> Result<Self> {
        if positions.len() != n * d {
            return Err(Error::DimensionMismatch {
                latent_n: positions.len() / d.max(1),
                latent_d: d,
                want_n: n,
                want_d: d,
            });
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("latent entries must be finite".into()));
        }
        Ok(LatentState { n, d, positions })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    /// <x_i, x_j>.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        pairwise_dot(self.row(i), self.row(j))
    }
}

/// Draw n independent standard normal d-vectors. Row i comes from the
/// (Latents, i) stream, so the matrix is deterministic for a fixed seed.
pub fn sample_latents(n: usize, d: usize, seed: &SeedContext) -> Result<LatentState> {
    if n == 0 || d == 0 {
        return Err(Error::DomainError("n and d must be >= 1".into()));
    }
    let entries = n as u64 * d as u64;
    if entries > MAX_LATENT_ENTRIES {
        return Err(Error::ResourceCap {
            requested: entries,
            cap: MAX_LATENT_ENTRIES,
        });
    }
    let mut positions = vec![0.0f64; n * d];
    for (i, row) in positions.chunks_exact_mut(d).enumerate() {
        let mut rng = seed.child(StreamRole::Latents, i as u64).rng();
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
    Ok(LatentState { n, d, positions })
}

/// Bit-packed upper-triangular adjacency: symmetry and zero diagonal are
/// implicit in the storage. Pair (i, j) with i < j lives at linear index
/// i*(n-1) - i*(i+1)/2 + j - 1, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSample {
    n: usize,
    words: Vec<u64>,
}

impl GraphSample {
    pub fn empty(n: usize) -> Self {
        let bits = Self::pair_count(n);
        GraphSample {
            n,
            words: vec![0u64; bits.div_ceil(64)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pair_count(n: usize) -> usize {
        n * n.saturating_sub(1) / 2
    }

    fn linear_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (self.n - 1) - i * (i + 1) / 2 + j - 1
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let k = self.linear_index(i, j);
        self.words[k >> 6] >> (k & 63) & 1 == 1
    }

    pub fn set(&mut self, a: usize, b: usize, value: bool) {
        assert_ne!(a, b, "diagonal entries are identically zero");
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let k = self.linear_index(i, j);
        if value {
            self.words[k >> 6] |= 1u64 << (k & 63);
        } else {
            self.words[k >> 6] &= !(1u64 << (k & 63));
        }
    }

    pub fn edge_count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.n];
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) {
                    deg[i] += 1;
                    deg[j] += 1;
                }
            }
        }
        deg
    }

    /// Neighbor bitmasks, one n-bit row per vertex (used by the popcount
    /// triangle counter).
    pub fn neighbor_rows(&self) -> Vec<Vec<u64>> {
        let words_per_row = self.n.div_ceil(64);
        let mut rows = vec![vec![0u64; words_per_row]; self.n];
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) {
                    rows[i][j >> 6] |= 1u64 << (j & 63);
                    rows[j][i >> 6] |= 1u64 << (i & 63);
                }
            }
        }
        rows
    }

    /// Serialize: magic, u32 version, u32 n, then ceil(n(n-1)/16) bytes of
    /// little-endian packed bits in (i < j) row-major order.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        let nbytes = Self::pair_count(self.n).div_ceil(8);
        let mut bytes = Vec::with_capacity(self.words.len() * 8);
        for word in &self.words {
            bytes.extend_from_slice(&word.to_le_bytes());
        }
        bytes.truncate(nbytes);
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::GraphFormat("bad magic; not a graph file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::GraphFormat(format!(
                "unsupported version {version} (expected {FORMAT_VERSION})"
            )));
        }
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        let bits = Self::pair_count(n);
        let nbytes = bits.div_ceil(8);
        let mut bytes = vec![0u8; nbytes];
        r.read_exact(&mut bytes)?;
        bytes.resize(bits.div_ceil(64) * 8, 0u8);
        let words: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut g = GraphSample { n, words };
        // Zero any padding bits beyond the last valid pair.
        let tail = bits % 64;
        if tail != 0 {
            if let Some(last) = g.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        Ok(g)
    }

    /// Plain-text "i j" edge lines.
    pub fn write_edgelist<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) {
                    writeln!(w, "{i} {j}")?;
                }
            }
        }
        Ok(())
    }
}

fn check_dims(params: &ModelParams, latents: &LatentState) -> Result<()> {
    if latents.n != params.n || latents.d != params.d {
        return Err(Error::DimensionMismatch {
            latent_n: latents.n,
            latent_d: latents.d,
            want_n: params.n,
            want_d: params.d,
        });
    }
    Ok(())
}

/// Conditional-probability mechanism: pair (i, j) is an edge independently
/// with probability sigma(<x_i, x_j>), one uniform variate per pair.
pub fn sample_graph_uniform(
    spec: &ConnectionSpec,
    params: &ModelParams,
    latents: &LatentState,
    seed: &SeedContext,
) -> Result<GraphSample> {
    check_dims(params, latents)?;
    let n = params.n;
    let mut g = GraphSample::empty(n);
    for i in 0..n {
        let mut rng = seed.child(StreamRole::EdgeUniforms, i as u64).rng();
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < params.sigma(spec, latents.inner(i, j)) {
                g.set(i, j, true);
            }
        }
    }
    Ok(g)
}

/// Threshold mechanism: draw z_{i,j} = mu + r sqrt(d) F^{-1}(U) per pair and
/// connect iff <x_i, x_j> >= z_{i,j}. Conditionally on the latents this gives
/// the same per-pair edge probability as the uniform mechanism.
pub fn sample_graph_threshold(
    spec: &ConnectionSpec,
    params: &ModelParams,
    latents: &LatentState,
    seed: &SeedContext,
) -> Result<GraphSample> {
    check_dims(params, latents)?;
    if spec.quantile(0.5).is_none() || spec.quantile(1e-9).is_none() {
        return Err(Error::MissingQuantile);
    }
    let n = params.n;
    let rd = params.rd();
    let mut g = GraphSample::empty(n);
    for i in 0..n {
        let mut rng = seed.child(StreamRole::Thresholds, i as u64).rng();
        for j in i + 1..n {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let z = params.mu + rd * spec.quantile(u).ok_or(Error::MissingQuantile)?;
            if latents.inner(i, j) >= z {
                g.set(i, j, true);
            }
        }
    }
    Ok(g)
}

/// Erdős–Rényi null: i.i.d. Bernoulli(p) edges.
pub fn sample_er(n: usize, p: f64, seed: &SeedContext) -> GraphSample {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1]");
    let mut g = GraphSample::empty(n);
    for i in 0..n {
        let mut rng = seed.child(StreamRole::EdgeUniforms, i as u64).rng();
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < p {
                g.set(i, j, true);
            }
        }
    }
    g
}
