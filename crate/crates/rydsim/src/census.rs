//! Low-energy configuration census.
//!
//! The prequench Hamiltonian is diagonal in the spin-z product basis; its
//! low-energy eigenstates are the spin configurations in which no two atoms
//! within the blockade radius are simultaneously up — the independent sets
//! of the blockade graph. The census lists them, grouped by the number of
//! up-spins, with a transfer-matrix path for counts beyond the enumeration
//! cap.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::ChainGeometry;
use crate::scalar::Real;

/// Default cap on the atom count for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum CensusError {
    #[error("size cap exceeded: N = {n} with enumeration cap {cap}")]
    SizeCapExceeded { n: usize, cap: usize },
    #[error("unsupported graph: transfer-matrix counting needs a banded edge set")]
    UnsupportedGraph,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Unordered blockade edges on `n` atoms, stored with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockadeGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl BlockadeGraph {
    /// Build directly from an edge list; pairs are normalized and
    /// deduplicated, self-edges rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, CensusError> {
        let mut set = std::collections::BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(CensusError::InvalidParameter("self-edge".into()));
            }
            if a >= n || b >= n {
                return Err(CensusError::InvalidParameter("edge endpoint out of range".into()));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self { n, edges: set.into_iter().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Bitmask of neighbors per site, site 0 at the most significant end of
    /// an `n`-bit word (matching the basis-index convention).
    fn neighbor_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(i, j) in &self.edges {
            masks[i] |= site_bit(self.n, j);
            masks[j] |= site_bit(self.n, i);
        }
        masks
    }

    /// Bandwidth `w` if the edge set is exactly all pairs within distance
    /// `w` along the chain; `None` otherwise.
    fn bandwidth(&self) -> Option<usize> {
        let w = self.edges.iter().map(|&(i, j)| j - i).max().unwrap_or(0);
        let expected: usize = (1..=w).map(|k| self.n.saturating_sub(k)).sum();
        (self.edges.len() == expected).then_some(w)
    }
}

/// Bit value of site `i` (0-based) in the basis-index convention: site 1 of
/// the chain is the most significant bit.
#[inline]
pub fn site_bit(n: usize, i: usize) -> u64 {
    1u64 << (n - 1 - i)
}

/// Exhaustive census of the blockade-allowed configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockadeCensus {
    n: usize,
    configs: Vec<u64>,
    nu: Vec<u64>,
    d: u64,
}

/// Edge `(i, j)` present iff `|p_i − p_j| < r_b` (strict).
pub fn blockade_graph<T: Real>(geom: &ChainGeometry<T>, r_b: T) -> Result<BlockadeGraph, CensusError> {
    if r_b <= T::zero() {
        return Err(CensusError::InvalidParameter("blockade radius must be > 0".into()));
    }
    let n = geom.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if geom.distance(i, j) < r_b {
                edges.push((i, j));
            }
        }
    }
    Ok(BlockadeGraph { n, edges })
}

/// Enumerate every independent set of the graph in lexicographic order of
/// the configuration bitstring (spin-up = 1, site 1 = most significant bit).
pub fn enumerate_census(graph: &BlockadeGraph) -> Result<BlockadeCensus, CensusError> {
    enumerate_census_capped(graph, DEFAULT_ENUMERATION_CAP)
}

/// [`enumerate_census`] with an explicit atom-count cap.
pub fn enumerate_census_capped(graph: &BlockadeGraph, cap: usize) -> Result<BlockadeCensus, CensusError> {
    let n = graph.n();
    if n > cap {
        return Err(CensusError::SizeCapExceeded { n, cap });
    }
    let masks = graph.neighbor_masks();
    let mut configs = Vec::new();
    let mut nu = vec![0u64; n + 1];
    // Depth-first over sites, pruning by the forced-zero mask; visiting 0
    // before 1 yields ascending (lexicographic) order directly.
    let mut stack = vec![(0usize, 0u64, 0u64, 0usize)]; // (site, config, blocked, ups)
    while let Some((site, config, blocked, ups)) = stack.pop() {
        if site == n {
            configs.push(config);
            nu[ups] += 1;
            continue;
        }
        let bit = site_bit(n, site);
        // Push the 1-branch first so the 0-branch is explored first.
        if blocked & bit == 0 {
            stack.push((site + 1, config | bit, blocked | masks[site], ups + 1));
        }
        stack.push((site + 1, config, blocked, ups));
    }
    configs.sort_unstable();
    while nu.last() == Some(&0) && nu.len() > 1 {
        nu.pop();
    }
    let d = configs.len() as u64;
    Ok(BlockadeCensus { n, configs, nu, d })
}

/// Per-`n` counts without materializing configurations, via a transfer
/// matrix over the last-`w`-sites occupation window. Only banded graphs
/// (paths and their powers) are supported.
pub fn count_only(graph: &BlockadeGraph) -> Result<(Vec<u64>, u64), CensusError> {
    let n = graph.n();
    let w = graph.bandwidth().ok_or(CensusError::UnsupportedGraph)?;
    if w >= 32 {
        return Err(CensusError::UnsupportedGraph);
    }
    let states = 1usize << w;
    let window = states - 1;
    let max_ups = if w == 0 { n } else { n.div_ceil(w + 1) };
    // dp[state][k]: chains so far whose last w sites form `state`, with k ups.
    let mut dp = vec![vec![0u64; max_ups + 1]; states];
    dp[0][0] = 1;
    for _ in 0..n {
        let mut next = vec![vec![0u64; max_ups + 1]; states];
        for state in 0..states {
            for k in 0..=max_ups {
                let c = dp[state][k];
                if c == 0 {
                    continue;
                }
                next[(state << 1) & window][k] += c;
                // An up-spin needs all of the previous w sites down.
                if state == 0 && k < max_ups {
                    next[1 & window][k + 1] += c;
                }
            }
        }
        dp = next;
    }
    let mut nu = vec![0u64; max_ups + 1];
    for state in 0..states {
        for (k, slot) in nu.iter_mut().enumerate() {
            *slot += dp[state][k];
        }
    }
    while nu.last() == Some(&0) && nu.len() > 1 {
        nu.pop();
    }
    let d = nu.iter().sum();
    Ok((nu, d))
}

impl BlockadeCensus {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Configurations as basis indices, ascending (= lexicographic on the
    /// bitstring with site 1 as the most significant bit).
    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    /// Counts ν_0 … ν_{n_max} by up-spin number.
    pub fn nu(&self) -> &[u64] {
        &self.nu
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn n_max(&self) -> usize {
        self.nu.len() - 1
    }

    /// Bitstring form of the `m`-th configuration, e.g. `"01010"`.
    pub fn config_bitstring(&self, m: usize) -> String {
        format!("{:0width$b}", self.configs[m], width = self.n)
    }

    /// Equilibrium prediction `P_n = ν_n / D` in the strong-blockade limit.
    pub fn equilibrium_distribution<T: Real>(&self) -> Vec<T> {
        let d = T::from_u64(self.d).expect("census size fits scalar");
        self.nu.iter().map(|&v| T::from_u64(v).expect("count fits scalar") / d).collect()
    }

    /// Steady Rydberg fraction `Σ n ν_n / (N D)` implied by the census.
    pub fn equilibrium_f_r<T: Real>(&self) -> T {
        let total: u64 = self.nu.iter().enumerate().map(|(k, &v)| k as u64 * v).sum();
        T::from_u64(total).expect("count fits scalar")
            / (T::from_u64(self.d).unwrap() * T::from_usize(self.n).unwrap())
    }

    /// JSON export: `{N, theta_deg, nu, D, configs?}`.
    pub fn to_json(&self, theta_deg: Option<f64>, include_configs: bool) -> serde_json::Value {
        #[derive(Serialize)]
        struct Repr {
            #[serde(rename = "N")]
            n: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            theta_deg: Option<f64>,
            nu: Vec<u64>,
            #[serde(rename = "D")]
            d: u64,
            #[serde(skip_serializing_if = "Option::is_none")]
            configs: Option<Vec<String>>,
        }
        serde_json::to_value(Repr {
            n: self.n,
            theta_deg,
            nu: self.nu.clone(),
            d: self.d,
            configs: include_configs
                .then(|| (0..self.configs.len()).map(|m| self.config_bitstring(m)).collect()),
        })
        .expect("census serializes")
    }
}

/// Binomial coefficient, zero outside the Pascal triangle.
pub fn binomial(n: i64, k: i64) -> u64 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Fibonacci with F(1) = F(2) = 1; independent sets of an N-path total
/// F(N+2).
pub fn fibonacci(k: u32) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..k {
        let t = a + b;
        a = b;
        b = t;
    }
    a
}
