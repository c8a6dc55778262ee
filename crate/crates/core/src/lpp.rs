//! Directed last-passage percolation with geometric weights.
//!
//! `G(m, n) = max(G(m-1, n), G(m, n-1)) + w(m, n)` with zero boundary. The
//! vector `G(i) = (G(i,1), ..., G(i,n))` is a Markov chain in `i`; this module
//! simulates the model and evaluates distributions exactly by dynamic
//! programming over that chain, independently of any determinantal formula.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::weights::{binomial, geometric_pmf, GeometricParameter};

/// Default cap on the number of chain states the exact DP may allocate.
pub const DEFAULT_MAX_STATES: u128 = 5_000_000;

const MC_BATCH: u64 = 1 << 14;

/// Seed of the sample stream; equal seeds give bit-identical streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent stream `stream` derived from this seed.
    pub fn rng(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

/// Inverse-CDF sampler for `P[w = k] = (1-q) q^k`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricSampler {
    ln_q: f64,
}

impl GeometricSampler {
    pub fn new(q: &GeometricParameter) -> Self {
        Self {
            ln_q: q.value().ln(),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // U in (0, 1]; P[floor(ln U / ln q) >= k] = P[U <= q^k] = q^k
        let u: f64 = 1.0 - rng.random::<f64>();
        (u.ln() / self.ln_q).floor() as u64
    }
}

/// Weights `w(i, j)`, `1 <= i <= m` (columns), `1 <= j <= n` (rows).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightGrid {
    m: usize,
    n: usize,
    w: Vec<u64>,
}

impl WeightGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            w: vec![0; m * n],
        }
    }

    /// Builds a grid from a closure over 1-based `(i, j)`.
    pub fn from_fn(m: usize, n: usize, f: impl Fn(usize, usize) -> u64) -> Self {
        let mut grid = Self::zeros(m, n);
        for i in 1..=m {
            for j in 1..=n {
                grid.set(i, j, f(i, j));
            }
        }
        grid
    }

    pub fn columns(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.w[(i - 1) * self.n + (j - 1)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.w[(i - 1) * self.n + (j - 1)] = v;
    }
}

/// The table `G(i, j)` for `0 <= i <= m`, `0 <= j <= n`, zero on the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LastPassageTable {
    m: usize,
    n: usize,
    g: Vec<u64>,
}

impl LastPassageTable {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.g[i * (self.n + 1) + j]
    }

    pub fn columns(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    /// `G(i) = (G(i,1), ..., G(i,n))`.
    pub fn chain_state(&self, i: usize) -> OrderedVector {
        OrderedVector((1..=self.n).map(|j| self.get(i, j) as i64).collect())
    }
}

pub fn sample_grid(q: &GeometricParameter, m: usize, n: usize, seed: RngSeed) -> Result<WeightGrid> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
    }
    let sampler = GeometricSampler::new(q);
    let mut rng = seed.rng(0);
    let mut grid = WeightGrid::zeros(m, n);
    for v in grid.w.iter_mut() {
        *v = sampler.sample(&mut rng);
    }
    Ok(grid)
}

pub fn last_passage(grid: &WeightGrid) -> LastPassageTable {
    let (m, n) = (grid.m, grid.n);
    let mut g = vec![0u64; (m + 1) * (n + 1)];
    for i in 1..=m {
        for j in 1..=n {
            let left = g[(i - 1) * (n + 1) + j];
            let below = g[i * (n + 1) + j - 1];
            g[i * (n + 1) + j] = left.max(below) + grid.get(i, j);
        }
    }
    LastPassageTable { m, n, g }
}

/// Monte Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

impl McEstimate {
    fn from_counts(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            hits,
            samples,
        }
    }
}

/// Runs `samples` independent grids of size `m x n` and counts the samples for
/// which `event` holds. Batches draw from independent streams of `seed` and the
/// reduction is an integer sum, so the result does not depend on scheduling.
pub fn mc_probability<E>(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    samples: u64,
    seed: RngSeed,
    event: E,
) -> Result<McEstimate>
where
    E: Fn(&LastPassageTable) -> bool + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
    }
    let sampler = GeometricSampler::new(q);
    let batches = samples.div_ceil(MC_BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            // stream 0 is reserved for sample_grid
            let mut rng = seed.rng(b + 1);
            let count = MC_BATCH.min(samples - b * MC_BATCH);
            let mut grid = WeightGrid::zeros(m, n);
            let mut hits = 0u64;
            for _ in 0..count {
                for v in grid.w.iter_mut() {
                    *v = sampler.sample(&mut rng);
                }
                if event(&last_passage(&grid)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(McEstimate::from_counts(hits, samples))
}

/// Monte Carlo estimate of `P[G(m, n) <= eta]`.
pub fn mc_cdf(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta: i64,
    samples: u64,
    seed: RngSeed,
) -> Result<McEstimate> {
    mc_probability(q, m, n, samples, seed, |t| (t.get(m, n) as i64) <= eta)
}

/// Monte Carlo estimate of `P[G(m, m) <= eta1, G(n, n) <= eta2]`.
pub fn mc_joint_cdf(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta1: i64,
    eta2: i64,
    samples: u64,
    seed: RngSeed,
) -> Result<McEstimate> {
    let size = m.max(n);
    mc_probability(q, size, size, samples, seed, |t| {
        (t.get(m, m) as i64) <= eta1 && (t.get(n, n) as i64) <= eta2
    })
}

/// An element of `W_n = { x in Z^n : x_1 <= ... <= x_n }`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedVector(Vec<i64>);

impl OrderedVector {
    pub fn new(entries: Vec<i64>) -> Result<Self> {
        if entries.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::Unordered(entries));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Parses a comma separated list such as `"0,1,1"`.
    pub fn parse(s: &str) -> Result<Self> {
        let entries = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse '{t}' as an integer")))
            })
            .collect::<Result<Vec<_>>>()?;
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty vector".into()));
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `P[G(l+1) = y | G(l) = x] = prod_k w(y_k - max(x_k, y_{k-1}))` with `y_0 = 0`.
pub fn one_step_transition(
    q: &GeometricParameter,
    x: &OrderedVector,
    y: &OrderedVector,
) -> Result<BigRational> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let mut prev = 0i64;
    let mut prod = BigRational::one();
    for (&xk, &yk) in x.0.iter().zip(&y.0) {
        let step = yk - xk.max(prev);
        if step < 0 {
            return Ok(BigRational::zero());
        }
        prod *= geometric_pmf(q, step);
        prev = yk;
    }
    Ok(prod)
}

/// Weakly increasing tuples of length `n` with entries in `[0, bound]`,
/// densely indexed in lexicographic order.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n: usize,
    bound: i64,
    /// `counts[len][lo]` = number of weakly increasing tuples of length `len`
    /// with entries in `[lo, bound]`.
    counts: Vec<Vec<usize>>,
}

impl StateSpace {
    pub fn new(n: usize, bound: i64, cap: u128) -> Result<Self> {
        let requested = state_space_size(n, bound);
        if requested > cap {
            return Err(Error::StateSpaceTooLarge {
                states: requested,
                cap,
            });
        }
        let width = (bound + 1) as usize;
        let mut counts = vec![vec![0usize; width + 1]; n + 1];
        counts[0].iter_mut().for_each(|c| *c = 1);
        for len in 1..=n {
            for lo in (0..width).rev() {
                // first entry == lo, or first entry > lo
                counts[len][lo] = counts[len - 1][lo] + counts[len][lo + 1];
            }
        }
        Ok(Self { n, bound, counts })
    }

    pub fn len(&self) -> usize {
        self.counts[self.n][0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn rank(&self, state: &[i64]) -> usize {
        let mut rank = 0;
        let mut lo = 0usize;
        for (k, &v) in state.iter().enumerate() {
            let v = v as usize;
            let remaining = self.n - k - 1;
            for smaller in lo..v {
                rank += self.counts[remaining][smaller];
            }
            lo = v;
        }
        rank
    }

    /// All states in rank order.
    pub fn states(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = vec![0i64; self.n];
        loop {
            out.push(cur.clone());
            // lexicographic successor among weakly increasing tuples
            let Some(k) = (0..self.n).rev().find(|&k| cur[k] < self.bound) else {
                break;
            };
            let v = cur[k] + 1;
            cur[k..].iter_mut().for_each(|c| *c = v);
        }
        out
    }
}

/// `binom(bound + n + 1, n)`, the size bound checked against the state cap.
pub fn state_space_size(n: usize, bound: i64) -> u128 {
    binomial(bound + n as i64 + 1, n as i64)
        .to_u128()
        .unwrap_or(u128::MAX)
}

/// Sub-probability distribution of the chain restricted to states with all
/// coordinates in `[0, bound]`; mass that leaves the box is dropped.
///
/// Masses are integers over the common denominator `d^exponent`, where
/// `q = p/d` in lowest terms. A step updates one coordinate at a time,
/// `y_k = max(x_k, y_{k-1}) + w_k`; each update scales the denominator by
/// `d^(bound+1)`.
#[derive(Debug, Clone)]
pub struct ChainDistribution {
    space: StateSpace,
    states: Vec<Vec<i64>>,
    mass: Vec<BigInt>,
    denom_base: BigInt,
    exponent: u64,
}

/// Mid-step layout: the first `k` coordinates already updated (a weakly
/// increasing `head`), the remaining `n - k` not yet (a weakly increasing
/// `tail`). Index is `rank(head) * tails + rank(tail)`.
struct Layer {
    heads: StateSpace,
    head_states: Vec<Vec<i64>>,
    tails: StateSpace,
    tail_states: Vec<Vec<i64>>,
    mass: Vec<BigInt>,
}

impl Layer {
    fn new(k: usize, n: usize, bound: i64) -> Self {
        let heads = StateSpace::new(k, bound, u128::MAX).expect("uncapped");
        let tails = StateSpace::new(n - k, bound, u128::MAX).expect("uncapped");
        let mass = vec![BigInt::zero(); heads.len() * tails.len()];
        Self {
            head_states: heads.states(),
            tail_states: tails.states(),
            heads,
            tails,
            mass,
        }
    }
}

impl ChainDistribution {
    /// The chain started from `G(0) = 0`.
    pub fn at_origin(n: usize, bound: i64, cap: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("chain dimension must be positive".into()));
        }
        if bound < 0 {
            return Err(Error::InvalidParameter(format!("bound must be nonnegative, got {bound}")));
        }
        let space = StateSpace::new(n, bound, cap)?;
        let states = space.states();
        let mut mass = vec![BigInt::zero(); states.len()];
        mass[0] = BigInt::one();
        Ok(Self {
            space,
            states,
            mass,
            denom_base: BigInt::one(),
            exponent: 0,
        })
    }

    /// Applies one transition of the chain.
    pub fn step(&mut self, q: &GeometricParameter) {
        let n = self.space.n;
        let bound = self.space.bound;
        let p = q.rational().numer().clone();
        let d = q.rational().denom().clone();
        let width = (bound + 1) as usize;
        let d_pow: Vec<BigInt> = (0..=width).map(|e| num_traits::pow(d.clone(), e)).collect();
        let keep = &d - &p;

        let mut layer = Layer::new(0, n, bound);
        layer.mass = std::mem::take(&mut self.mass);
        for k in 1..=n {
            let next = Layer::new(k, n, bound);
            let rest_count = next.tails.len();
            // tail index in the current layer -> (x_k, rank of the remaining tail)
            let split: Vec<(usize, usize)> = layer
                .tail_states
                .iter()
                .map(|t| (t[0] as usize, next.tails.rank(&t[1..])))
                .collect();
            let tails_now = layer.tails.len();
            let updates: Vec<Vec<(usize, BigInt)>> = (0..layer.heads.len())
                .into_par_iter()
                .map(|rh| {
                    let head = &layer.head_states[rh];
                    let floor = head.last().copied().unwrap_or(0) as usize;
                    // g[rest][base]: mass collected at max(x_k, y_{k-1}) = base
                    let mut g = vec![BigInt::zero(); rest_count * width];
                    let mut touched = vec![false; rest_count];
                    for (rt, &(xk, rest)) in split.iter().enumerate() {
                        let m = &layer.mass[rh * tails_now + rt];
                        if m.is_zero() {
                            continue;
                        }
                        g[rest * width + xk.max(floor)] += m;
                        touched[rest] = true;
                    }
                    let mut out = Vec::new();
                    let mut new_head = head.clone();
                    new_head.push(0);
                    for rest in (0..rest_count).filter(|&r| touched[r]) {
                        // acc(v) = sum_{u <= v} g(u) (d-p) p^(v-u) d^u, so that the mass at v
                        // over d^(bound+1) is acc(v) d^(bound-v)
                        let mut acc = BigInt::zero();
                        for v in floor..width {
                            acc = &acc * &p + &keep * &d_pow[v] * &g[rest * width + v];
                            if acc.is_zero() {
                                continue;
                            }
                            *new_head.last_mut().unwrap() = v as i64;
                            let idx = next.heads.rank(&new_head) * rest_count + rest;
                            out.push((idx, &acc * &d_pow[width - 1 - v]));
                        }
                    }
                    out
                })
                .collect();
            let mut next = next;
            for (idx, m) in updates.into_iter().flatten() {
                next.mass[idx] += m;
            }
            layer = next;
        }
        self.mass = layer.mass;
        self.denom_base = d;
        self.exponent += n as u64 * width as u64;
    }

    /// Drops the mass of every state failing `keep`.
    pub fn retain(&mut self, keep: impl Fn(&[i64]) -> bool) {
        for (state, mass) in self.states.iter().zip(self.mass.iter_mut()) {
            if !keep(state) {
                mass.set_zero();
            }
        }
    }

    /// Total remaining mass.
    pub fn probability(&self) -> BigRational {
        let total: BigInt = self.mass.iter().sum();
        BigRational::new(total, num_traits::pow(self.denom_base.clone(), self.exponent as usize))
    }

    /// Probability of one state.
    pub fn probability_of(&self, state: &[i64]) -> BigRational {
        BigRational::new(
            self.mass[self.space.rank(state)].clone(),
            num_traits::pow(self.denom_base.clone(), self.exponent as usize),
        )
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }
}

/// Exact `P[G(m, n) <= eta]` by iterating the one-step product kernel `m`
/// times over the states in `[0, eta]^n`.
pub fn exact_cdf_dp(q: &GeometricParameter, m: usize, n: usize, eta: i64) -> Result<BigRational> {
    exact_cdf_dp_capped(q, m, n, eta, DEFAULT_MAX_STATES)
}

pub fn exact_cdf_dp_capped(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta: i64,
    cap: u128,
) -> Result<BigRational> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    if eta < 0 {
        return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
    }
    let mut chain = ChainDistribution::at_origin(n, eta, cap)?;
    for _ in 0..m {
        chain.step(q);
    }
    Ok(chain.probability())
}

/// Exact `P[G(m, m) <= eta1, G(n, n) <= eta2]` for `m < n` by running the
/// `n`-dimensional chain, conditioning on `G(m, m)` at time `m`.
pub fn exact_joint_cdf_dp(
    q: &GeometricParameter,
    m: usize,
    n: usize,
    eta1: i64,
    eta2: i64,
    cap: u128,
) -> Result<BigRational> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 1 <= m < n, got m={m}, n={n}")));
    }
    if eta1 < 0 || eta2 < 0 {
        return Err(Error::InvalidParameter("thresholds must be nonnegative".into()));
    }
    let mut chain = ChainDistribution::at_origin(n, eta1.max(eta2), cap)?;
    for _ in 0..m {
        chain.step(q);
    }
    chain.retain(|x| x[m - 1] <= eta1);
    for _ in m..n {
        chain.step(q);
    }
    chain.retain(|y| y[n - 1] <= eta2);
    Ok(chain.probability())
}

/// Distribution of `G(steps)` restricted to `[0, bound]^n`, keyed by state;
/// a convenience for small cross-checks.
pub fn chain_marginal(
    q: &GeometricParameter,
    n: usize,
    steps: usize,
    bound: i64,
) -> Result<HashMap<Vec<i64>, BigRational>> {
    let mut chain = ChainDistribution::at_origin(n, bound, DEFAULT_MAX_STATES)?;
    for _ in 0..steps {
        chain.step(q);
    }
    Ok(chain
        .states
        .iter()
        .map(|s| (s.clone(), chain.probability_of(s)))
        .filter(|(_, p)| !p.is_zero())
        .collect())
}
