//! The driving environment: a two-sided stationary Markov shift on finitely
//! many symbols with a strictly positive transition matrix.
//!
//! The shift θ acts on windows as an index shift. Windows are materialized
//! eagerly; every consumer declares the index range it needs and checks it
//! with [`OmegaWindow::require`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSymbolChain {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<Vec<f64>>,
    #[serde(skip)]
    reversed_cumulative: Vec<Vec<f64>>,
}

/// Builds the base chain, rejecting m = 1.
pub fn build_markov_base(q: &[Vec<f64>], tol: f64) -> Result<BaseSymbolChain> {
    build_markov_base_with(q, tol, false)
}

/// Like [`build_markov_base`]; `allow_deterministic` admits the one-state chain
/// used for comparisons against classical (non-random) theory.
pub fn build_markov_base_with(q: &[Vec<f64>], tol: f64, allow_deterministic: bool) -> Result<BaseSymbolChain> {
    let m = q.len();
    if m == 0 || (m == 1 && !allow_deterministic) {
        return Err(Error::ZeroStateSpace(m));
    }
    for (row, r) in q.iter().enumerate() {
        if r.len() != m {
            return Err(Error::NotSquare { row, len: r.len(), expected: m });
        }
    }
    for (row, r) in q.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > tol || !sum.is_finite() {
            return Err(Error::NonStochasticRow { row, sum, tol });
        }
    }
    for (row, r) in q.iter().enumerate() {
        for (col, &value) in r.iter().enumerate() {
            if !(value > 0.0) {
                return Err(Error::ZeroTransition { row, col, value });
            }
        }
    }
    let stationary = stationary_vector(q)?;
    Ok(BaseSymbolChain::assemble(q.to_vec(), stationary))
}

fn stationary_vector(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = q.len();
    let mut p = vec![1.0 / m as f64; m];
    let mut delta = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITER {
        let mut next = vec![0.0; m];
        for (i, pi) in p.iter().enumerate() {
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += pi * q[i][j];
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        delta = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if delta < STATIONARY_TOL {
            return Ok(p);
        }
    }
    Err(Error::NoConvergence { iterations: STATIONARY_MAX_ITER, delta })
}

fn cumulative_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut acc = 0.0;
            let mut c: Vec<f64> = r.iter().map(|v| { acc += v; acc }).collect();
            if let Some(last) = c.last_mut() {
                *last = f64::INFINITY;
            }
            c
        })
        .collect()
}

pub(crate) fn draw(cumulative: &[f64], u: f64) -> usize {
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

impl BaseSymbolChain {
    fn assemble(transition: Vec<Vec<f64>>, stationary: Vec<f64>) -> Self {
        let m = transition.len();
        let reversed: Vec<Vec<f64>> = (0..m)
            .map(|s| (0..m).map(|t| stationary[t] * transition[t][s] / stationary[s]).collect())
            .collect();
        BaseSymbolChain {
            cumulative: cumulative_rows(&transition),
            reversed_cumulative: cumulative_rows(&reversed),
            transition,
            stationary,
        }
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Maximum of `|pQ - p|` over coordinates.
    pub fn stationarity_residual(&self) -> f64 {
        let m = self.states();
        (0..m)
            .map(|j| {
                let v: f64 = (0..m).map(|i| self.stationary[i] * self.transition[i][j]).sum();
                (v - self.stationary[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn check_symbol(&self, symbol: usize) -> Result<()> {
        if symbol >= self.states() {
            return Err(Error::InvalidSymbol { symbol, states: self.states() });
        }
        Ok(())
    }

    /// `Q^k` as a dense matrix.
    pub fn transition_power(&self, k: usize) -> Vec<Vec<f64>> {
        let m = self.states();
        let mut acc: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for _ in 0..k {
            acc = (0..m)
                .map(|i| (0..m).map(|j| (0..m).map(|l| acc[i][l] * self.transition[l][j]).sum()).collect())
                .collect();
        }
        acc
    }
}

/// A finite piece `ω_lo .. ω_hi` of a base sequence, index 0 being the present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaWindow {
    lo: i64,
    symbols: Vec<usize>,
}

impl OmegaWindow {
    pub fn new(lo: i64, symbols: Vec<usize>) -> Result<Self> {
        let hi = lo + symbols.len() as i64 - 1;
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Ok(OmegaWindow { lo, symbols })
    }

    /// Constant sequence on `lo..=hi`.
    pub fn constant(symbol: usize, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Self::new(lo, vec![symbol; (hi - lo + 1) as usize])
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.symbols.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Buffer position of index 0.
    pub fn origin_offset(&self) -> usize {
        (-self.lo) as usize
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn covers(&self, a: i64, b: i64) -> bool {
        a >= self.lo && b <= self.hi()
    }

    pub fn require(&self, a: i64, b: i64) -> Result<()> {
        if self.covers(a, b) {
            Ok(())
        } else {
            Err(Error::InsufficientWindow { need_lo: a, need_hi: b, have_lo: self.lo, have_hi: self.hi() })
        }
    }

    /// Symbol `ω_i`. Panics outside the window; callers check coverage first.
    #[inline]
    pub fn at(&self, i: i64) -> usize {
        self.symbols[(i - self.lo) as usize]
    }

    pub fn get(&self, i: i64) -> Option<usize> {
        if self.covers(i, i) { Some(self.at(i)) } else { None }
    }

    /// Symbols `ω_a .. ω_{a+k-1}`.
    pub fn read(&self, a: i64, k: usize) -> Result<&[usize]> {
        if k == 0 {
            return Ok(&[]);
        }
        self.require(a, a + k as i64 - 1)?;
        let start = (a - self.lo) as usize;
        Ok(&self.symbols[start..start + k])
    }

    /// The window of `θ^j ω`: index `i` of the result is index `i + j` here.
    pub fn shifted(&self, j: i64) -> Result<OmegaWindow> {
        OmegaWindow::new(self.lo - j, self.symbols.clone())
    }
}

/// Draws `ω_lo .. ω_hi` from the stationary chain: `ω_lo ~ p`, then `Q`.
pub fn sample_base_path(chain: &BaseSymbolChain, lo: i64, hi: i64, seed: u64) -> Result<OmegaWindow> {
    if lo > 0 || hi < 0 {
        return Err(Error::InvalidBounds { lo, hi });
    }
    let mut rng = seed::rng(seed);
    let len = (hi - lo + 1) as usize;
    let mut symbols = Vec::with_capacity(len);
    let stationary_cum = cumulative_rows(std::slice::from_ref(&chain.stationary)).remove(0);
    let mut s = draw(&stationary_cum, rng.gen());
    symbols.push(s);
    for _ in 1..len {
        s = draw(&chain.cumulative[s], rng.gen());
        symbols.push(s);
    }
    OmegaWindow::new(lo, symbols)
}

/// Draws a stationary path conditioned on `ω_0 .. ω_{k-1} = prefix`; forward
/// steps use `Q`, backward steps the time-reversed chain.
pub fn sample_conditioned_path(chain: &BaseSymbolChain, lo: i64, hi: i64, prefix: &[usize], seed: u64) -> Result<OmegaWindow> {
    if prefix.is_empty() {
        return sample_base_path(chain, lo, hi, seed);
    }
    if lo > 0 || hi < prefix.len() as i64 - 1 {
        return Err(Error::InvalidBounds { lo, hi });
    }
    for &s in prefix {
        chain.check_symbol(s)?;
    }
    let mut rng = seed::rng(seed);
    let mut symbols = vec![0usize; (hi - lo + 1) as usize];
    let off = (-lo) as usize;
    symbols[off..off + prefix.len()].copy_from_slice(prefix);
    for i in (0..off).rev() {
        symbols[i] = draw(&chain.reversed_cumulative[symbols[i + 1]], rng.gen());
    }
    for i in off + prefix.len()..symbols.len() {
        symbols[i] = draw(&chain.cumulative[symbols[i - 1]], rng.gen());
    }
    OmegaWindow::new(lo, symbols)
}

/// All base words of length `depth` at the origin with their exact probabilities.
pub fn strata(chain: &BaseSymbolChain, depth: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for level in 0..depth {
        let mut next = Vec::new();
        for (word, p) in &out {
            for s in 0..chain.states() {
                let q = if level == 0 { chain.stationary[s] } else { chain.transition[*word.last().unwrap()][s] };
                let mut w = word.clone();
                w.push(s);
                next.push((w, p * q));
            }
        }
        out = next;
    }
    out
}

/// A θ^{n0}-fixed base point given by its repeating cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicBasePoint {
    cycle: Vec<usize>,
}

pub fn periodic_point(chain: &BaseSymbolChain, cycle: &[usize]) -> Result<PeriodicBasePoint> {
    if cycle.is_empty() {
        return Err(Error::InvalidModel("periodic cycle must be non-empty".into()));
    }
    for &s in cycle {
        chain.check_symbol(s)?;
    }
    let n0 = cycle.len();
    for i in 0..n0 {
        let (a, b) = (cycle[i], cycle[(i + 1) % n0]);
        if !(chain.transition[a][b] > 0.0) {
            return Err(Error::ZeroTransition { row: a, col: b, value: chain.transition[a][b] });
        }
    }
    Ok(PeriodicBasePoint { cycle: cycle.to_vec() })
}

impl PeriodicBasePoint {
    pub fn period(&self) -> usize {
        self.cycle.len()
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn symbol_at(&self, i: i64) -> usize {
        self.cycle[i.rem_euclid(self.cycle.len() as i64) as usize]
    }

    /// Periodic extension on `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> Result<OmegaWindow> {
        if lo > 0 || hi < 0 {
            return Err(Error::InvalidBounds { lo, hi });
        }
        OmegaWindow::new(lo, (lo..=hi).map(|i| self.symbol_at(i)).collect())
    }
}

/// Base cylinder `{ω : ω_{i} = s_i for (i, s_i) in entries}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BaseCylinder {
    pub entries: Vec<(i64, usize)>,
}

impl BaseCylinder {
    pub fn new(mut entries: Vec<(i64, usize)>) -> Self {
        entries.sort();
        entries.dedup();
        BaseCylinder { entries }
    }

    /// Contiguous pattern starting at index 0.
    pub fn word(symbols: &[usize]) -> Self {
        Self::new(symbols.iter().enumerate().map(|(i, &s)| (i as i64, s)).collect())
    }

    pub fn span(&self) -> (i64, i64) {
        match (self.entries.first(), self.entries.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => (0, 0),
        }
    }

    pub fn exact_probability(&self, chain: &BaseSymbolChain) -> Result<f64> {
        for &(_, s) in &self.entries {
            chain.check_symbol(s)?;
        }
        let Some(&(first_idx, first)) = self.entries.first() else {
            return Ok(1.0);
        };
        let mut p = chain.stationary[first];
        let (mut prev_idx, mut prev) = (first_idx, first);
        for &(idx, s) in &self.entries[1..] {
            if idx == prev_idx {
                return Ok(0.0);
            }
            let pow = chain.transition_power((idx - prev_idx) as usize);
            p *= pow[prev][s];
            prev_idx = idx;
            prev = s;
        }
        Ok(p)
    }

    /// Whether `θ^j ω` lies in the cylinder.
    pub fn contains_shifted(&self, window: &OmegaWindow, j: i64) -> Result<bool> {
        let (a, b) = self.span();
        if !self.entries.is_empty() {
            window.require(j + a, j + b)?;
        }
        Ok(self.entries.iter().all(|&(i, s)| window.at(j + i) == s))
    }
}

/// Number of `j < n` with `θ^j ω ∈ B`.
pub fn count_visits(window: &OmegaWindow, cylinder: &BaseCylinder, n: usize) -> Result<usize> {
    let mut count = 0;
    for j in 0..n as i64 {
        if cylinder.contains_shifted(window, j)? {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub n: usize,
    pub tail_probability: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingAudit {
    pub exact_probability: f64,
    /// `c` in `P{Σ 1_B(θ^j ω) <= c n}`, half the cylinder probability.
    pub threshold_fraction: f64,
    pub rows: Vec<MixingRow>,
    /// True when the estimate at the last `n` does not exceed the first.
    pub trending_down: bool,
}

/// Monte Carlo estimate of `P{ω : Σ_{j<n} 1_B(θ^j ω) <= c n}` with `c = P(B)/2`.
pub fn audit_mixing(chain: &BaseSymbolChain, cylinder: &BaseCylinder, n_list: &[usize], samples: usize, seed: u64) -> Result<MixingAudit> {
    let exact = cylinder.exact_probability(chain)?;
    let c = exact / 2.0;
    let (a, b) = cylinder.span();
    let mut rows = Vec::with_capacity(n_list.len());
    for (ni, &n) in n_list.iter().enumerate() {
        let lo = a.min(0);
        let hi = (n as i64 - 1 + b).max(0);
        let mut hits = 0usize;
        for k in 0..samples {
            let w = sample_base_path(chain, lo, hi, seed::derive2(seed, ni as u64, k as u64))?;
            if (count_visits(&w, cylinder, n)? as f64) <= c * n as f64 {
                hits += 1;
            }
        }
        let p = hits as f64 / samples.max(1) as f64;
        rows.push(MixingRow { n, tail_probability: p, std_error: (p * (1.0 - p) / samples.max(1) as f64).sqrt() });
    }
    let trending_down = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => l.tail_probability <= f.tail_probability,
        _ => true,
    };
    Ok(MixingAudit { exact_probability: exact, threshold_fraction: c, rows, trending_down })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sticky() -> BaseSymbolChain {
        build_markov_base(&[vec![0.9, 0.1], vec![0.2, 0.8]], 1e-12).unwrap()
    }

    #[test]
    fn one_state_rejected_by_default() {
        assert_eq!(build_markov_base(&[vec![1.0]], 1e-12), Err(Error::ZeroStateSpace(1)));
        let det = build_markov_base_with(&[vec![1.0]], 1e-12, true).unwrap();
        assert_eq!(det.stationary(), &[1.0]);
    }

    #[test]
    fn uniform_chain_has_uniform_stationary() {
        let c = build_markov_base(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12).unwrap();
        assert!((c.stationary()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sticky_chain_stationary_matches_linear_solve() {
        // p0 * 0.1 = p1 * 0.2 and p0 + p1 = 1.
        let c = sticky();
        assert!((c.stationary()[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((c.stationary()[1] - 1.0 / 3.0).abs() < 1e-10);
        assert!(c.stationarity_residual() < 1e-10);
    }

    #[test]
    fn rejects_zero_and_nonstochastic() {
        assert!(matches!(
            build_markov_base(&[vec![1.0, 0.0], vec![0.5, 0.5]], 1e-12),
            Err(Error::ZeroTransition { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            build_markov_base(&[vec![0.6, 0.6], vec![0.5, 0.5]], 1e-12),
            Err(Error::NonStochasticRow { row: 0, .. })
        ));
        assert!(matches!(build_markov_base(&[vec![0.5, 0.5], vec![1.0]], 1e-12), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn window_indexing_contract() {
        let c = sticky();
        let w = sample_base_path(&c, -3, 5, 11).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(w.origin_offset(), 3);
        assert_eq!(w.at(0), w.symbols()[3]);
        assert!(sample_base_path(&c, 1, 5, 0).is_err());
        assert_eq!(sample_base_path(&c, -3, 5, 11).unwrap(), w);
    }

    #[test]
    fn shift_is_index_translation() {
        let c = sticky();
        let w = sample_base_path(&c, -10, 20, 3).unwrap();
        for j in -5..5i64 {
            let s = w.shifted(j).unwrap();
            for k in 0..5usize {
                assert_eq!(s.read(0, k).unwrap(), w.read(j, k).unwrap());
            }
        }
    }

    #[test]
    fn stationary_marginal_at_origin() {
        let c = build_markov_base(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12).unwrap();
        let n = 100_000;
        let zeros = (0..n).filter(|&i| sample_base_path(&c, 0, 0, seed::derive(5, i)).unwrap().at(0) == 0).count();
        let sd = (0.25 / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 3.0 * sd);
    }

    #[test]
    fn empirical_transitions_match_q() {
        let c = sticky();
        let n = 200_000;
        let w = sample_base_path(&c, 0, n, 77).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for i in 0..n {
            counts[w.at(i)][w.at(i + 1)] += 1;
        }
        for a in 0..2 {
            let row: usize = counts[a].iter().sum();
            for b in 0..2 {
                let q = c.transition()[a][b];
                let est = counts[a][b] as f64 / row as f64;
                // Markov dependence inflates the variance slightly; 3 sigma on the row count.
                assert!((est - q).abs() < 3.0 * (q * (1.0 - q) / row as f64).sqrt() * 1.5, "{a}{b}: {est} vs {q}");
            }
        }
    }

    #[test]
    fn conditioned_paths_respect_prefix() {
        let c = sticky();
        let w = sample_conditioned_path(&c, -4, 6, &[1, 0, 1], 9).unwrap();
        assert_eq!(w.read(0, 3).unwrap(), &[1, 0, 1]);
        let total: f64 = strata(&c, 3).iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_point_views() {
        let c = sticky();
        let fixed = periodic_point(&c, &[0]).unwrap();
        assert_eq!(fixed.period(), 1);
        assert_eq!(fixed.window(-2, 2).unwrap().symbols(), &[0; 5]);
        let two = periodic_point(&c, &[0, 1]).unwrap();
        assert_eq!(two.window(0, 5).unwrap().symbols(), &[0, 1, 0, 1, 0, 1]);
        let three = periodic_point(&c, &[0, 0, 1]).unwrap();
        let w = three.window(-6, 12).unwrap();
        let s = w.shifted(3).unwrap();
        for i in -3..=9 {
            assert_eq!(s.at(i), w.at(i));
            assert_eq!(w.at(i), three.cycle()[i.rem_euclid(3) as usize]);
        }
        assert!(matches!(periodic_point(&c, &[2]), Err(Error::InvalidSymbol { .. })));
    }

    #[test]
    fn cylinder_probabilities() {
        let c = sticky();
        let b = BaseCylinder::word(&[0, 0, 0]);
        assert!((b.exact_probability(&c).unwrap() - (2.0 / 3.0) * 0.81).abs() < 1e-10);
        assert_eq!(BaseCylinder::default().exact_probability(&c).unwrap(), 1.0);
        let gap = BaseCylinder::new(vec![(0, 0), (2, 1)]);
        let expect = (2.0 / 3.0) * (0.9 * 0.1 + 0.1 * 0.8);
        assert!((gap.exact_probability(&c).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn mixing_audit_tail_decays() {
        let c = build_markov_base(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1e-12).unwrap();
        let audit = audit_mixing(&c, &BaseCylinder::word(&[0]), &[100, 200, 400], 4000, 1).unwrap();
        assert_eq!(audit.exact_probability, 0.5);
        assert_eq!(audit.threshold_fraction, 0.25);
        let t: Vec<f64> = audit.rows.iter().map(|r| r.tail_probability).collect();
        assert!(t[0] >= t[1] && t[1] >= t[2], "{t:?}");
        assert!(audit.trending_down);
        let full = audit_mixing(&c, &BaseCylinder::default(), &[10, 20], 50, 2).unwrap();
        assert!(full.rows.iter().all(|r| r.tail_probability == 0.0));
    }

    #[test]
    fn count_visits_checks_window() {
        let c = sticky();
        let w = sample_base_path(&c, 0, 5, 1).unwrap();
        assert!(matches!(count_visits(&w, &BaseCylinder::word(&[0, 0]), 10), Err(Error::InsufficientWindow { .. })));
    }
}
