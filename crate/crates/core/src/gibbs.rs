//! Gibbs measures, exact laws and sampling of Birkhoff sums.
//!
//! The law of `S_n` under `μ_ω` is computed from the time-reversed chain of
//! the normalized operators: with `μ_j = h_j ⊙ ν_j`, a state `b` at time
//! `j + 1` moves to `in` at time `j` with probability
//! `M_j[b][in] h_j(in) / (λ_j h_{j+1}(b))`, and the branch taken carries the
//! increment `u`. Started from `μ_n` this reproduces the joint law of the
//! first `n + r - 1` fiber coordinates under `μ_0`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base::{draw, OmegaWindow};
use crate::error::{Error, Result};
use crate::fiber::{FiberModel, PotentialTable};
use crate::linalg::{ones, CVec, ZERO};
use crate::rpf::{apply, normalized_steps, orbit_rpf, pressure_derivatives_from, OrbitRpf, RpfTriplet, DEFAULT_LEN};
use crate::seed;
use crate::system::{BranchJets, BranchSource, ChainKind, FiberSystem, SymbolicBranches, Twisted};

/// Largest `states × lattice points` the exact law will allocate.
pub const LATTICE_BUDGET: usize = 10_000_000;
const SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsMeasure {
    pub weights: Vec<f64>,
}

impl GibbsMeasure {
    pub fn expect(&self, g: &[f64]) -> f64 {
        self.weights.iter().zip(g).map(|(w, v)| w * v).sum()
    }
}

/// `h ⊙ ν`, normalized; both must be real and nonnegative.
pub fn gibbs_weights(h: &[Complex64], nu: &[Complex64]) -> Result<Vec<f64>> {
    let mut w = Vec::with_capacity(h.len());
    for (a, b) in h.iter().zip(nu) {
        if a.re <= 0.0 || b.re < 0.0 || a.im.abs() > 1e-12 * a.norm() || b.im.abs() > 1e-12 {
            return Err(Error::NonPositive(format!("Gibbs weight from h = {a}, ν = {b}")));
        }
        w.push(a.re * b.re);
    }
    let s: f64 = w.iter().sum();
    if !(s > 0.0) {
        return Err(Error::NonPositive("Gibbs weights sum to zero".into()));
    }
    w.iter_mut().for_each(|x| *x /= s);
    Ok(w)
}

pub fn gibbs_measure(triplet0: &RpfTriplet) -> Result<GibbsMeasure> {
    if triplet0.z != ZERO {
        return Err(Error::NonPositive(format!("Gibbs measure needs the z = 0 triplet (got z = {})", triplet0.z)));
    }
    Ok(GibbsMeasure { weights: gibbs_weights(&triplet0.h, &triplet0.nu)? })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub to: usize,
    pub prob: f64,
    pub incr: f64,
    pub level: i64,
}

/// A finite inhomogeneous Markov chain with increments on its transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPath {
    pub dim: usize,
    pub initial: Vec<f64>,
    /// `steps[k][from]`.
    pub steps: Vec<Vec<Vec<Transition>>>,
    /// Base index of the state reached after `k + 1` steps.
    pub indices: Vec<i64>,
}

impl MarkovPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Positive `z = 0` orbit of a branch source on `lo ..= hi`.
pub fn orbit0(src: &dyn BranchSource, lo: i64, hi: i64, len: usize) -> Result<OrbitRpf> {
    let tw = Twisted { src, z: ZERO };
    let orbit = orbit_rpf(&tw, lo, hi, len)?;
    for j in lo..=hi + 1 {
        if let Some(bad) = orbit.h(j).iter().find(|c| !(c.re > 0.0) || c.im != 0.0) {
            return Err(Error::NonPositive(format!("h entry {bad} at index {j}")));
        }
        if let Some(bad) = orbit.nu(j).iter().find(|c| c.re < 0.0 || c.im != 0.0) {
            return Err(Error::NonPositive(format!("ν entry {bad} at index {j}")));
        }
    }
    Ok(orbit)
}

fn orbit_covers(orbit: &OrbitRpf, lo: i64, hi: i64) -> Result<()> {
    if lo < orbit.lo || hi > orbit.hi() {
        return Err(Error::InsufficientWindow { need_lo: lo, need_hi: hi + 1, have_lo: orbit.lo, have_hi: orbit.hi() + 1 });
    }
    Ok(())
}

pub fn gibbs_at(orbit: &OrbitRpf, j: i64) -> Result<Vec<f64>> {
    let h: Vec<Complex64> = orbit.h(j).iter().copied().collect();
    let nu: Vec<Complex64> = orbit.nu(j).iter().copied().collect();
    gibbs_weights(&h, &nu)
}

/// Reversed chain from `μ_end` through steps `end - 1, …, end - n`.
pub fn reversed_path(src: &dyn BranchSource, orbit: &OrbitRpf, end: i64, n: usize) -> Result<MarkovPath> {
    orbit_covers(orbit, end - n as i64, end - 1)?;
    let dim = src.dim();
    let initial = gibbs_at(orbit, end)?;
    let mut steps = Vec::with_capacity(n);
    let mut indices = Vec::with_capacity(n);
    for k in 0..n {
        let j = end - 1 - k as i64;
        let (h, hn, l) = (orbit.h(j), orbit.h(j + 1), orbit.lambda(j).re);
        let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); dim];
        for b in src.branches(j) {
            let p = b.weight * h[b.inn].re / (l * hn[b.out].re);
            if p > 0.0 {
                rows[b.out].push(Transition { to: b.inn, prob: p, incr: b.incr, level: b.level });
            }
        }
        for (o, row) in rows.iter_mut().enumerate() {
            let s: f64 = row.iter().map(|t| t.prob).sum();
            if (s - 1.0).abs() > 1e-8 {
                return Err(Error::Numerical(format!("reversed kernel row {o} at step {j} sums to {s}")));
            }
            row.iter_mut().for_each(|t| t.prob /= s);
        }
        steps.push(rows);
        indices.push(j);
    }
    Ok(MarkovPath { dim, initial, steps, indices })
}

/// Forward chain through steps `start, …, start + n - 1` using the raw
/// weights as transition probabilities `in → out`.
pub fn forward_path(src: &dyn BranchSource, initial: &[f64], start: i64, n: usize) -> Result<MarkovPath> {
    let dim = src.dim();
    if initial.len() != dim || initial.iter().any(|&p| !(p >= 0.0)) || (initial.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidModel(format!("initial distribution must be a probability vector of length {dim}")));
    }
    let (lo, hi) = src.range();
    if start < lo || start + n as i64 - 1 > hi {
        return Err(Error::InsufficientWindow { need_lo: start, need_hi: start + n as i64, have_lo: lo, have_hi: hi + 1 });
    }
    let mut steps = Vec::with_capacity(n);
    let mut indices = Vec::with_capacity(n);
    for k in 0..n {
        let j = start + k as i64;
        let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); dim];
        for b in src.branches(j) {
            if b.weight > 0.0 {
                rows[b.inn].push(Transition { to: b.out, prob: b.weight, incr: b.incr, level: b.level });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().map(|t| t.prob).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("forward kernel row {i} at step {j} sums to {s}")));
            }
        }
        steps.push(rows);
        indices.push(j + 1);
    }
    Ok(MarkovPath { dim, initial: initial.to_vec(), steps, indices })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDistribution {
    pub h: f64,
    /// Lattice coordinate of `probs[0]` before centering.
    pub offset: i64,
    pub probs: Vec<f64>,
    pub n: usize,
    pub center: f64,
}

impl LatticeDistribution {
    pub fn value(&self, i: usize) -> f64 {
        (self.offset + i as i64) as f64 * self.h - self.n as f64 * self.center
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| p * self.value(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().enumerate().map(|(i, p)| p * (self.value(i) - m).powi(2)).sum()
    }

    pub fn char_function(&self, t: f64) -> Complex64 {
        self.probs.iter().enumerate().map(|(i, p)| Complex64::from_polar(*p, t * self.value(i))).sum()
    }

    /// Probability of the lattice point with uncentered coordinate `level`.
    pub fn prob_at_level(&self, level: i64) -> f64 {
        let i = level - self.offset;
        if i < 0 { 0.0 } else { self.probs.get(i as usize).copied().unwrap_or(0.0) }
    }

    /// `(value, P(S ≤ value))` at every support point.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                acc += p;
                (self.value(i), acc)
            })
            .collect()
    }

    /// Weighted mixture of laws sharing `h`, `n` and `center`.
    pub fn mixture(parts: &[(f64, LatticeDistribution)]) -> Result<LatticeDistribution> {
        let first = &parts.first().ok_or_else(|| Error::InvalidModel("empty mixture".into()))?.1;
        if parts.iter().any(|(_, d)| d.h != first.h || d.n != first.n || d.center != first.center) {
            return Err(Error::InvalidModel("mixture components differ in spacing, length or centering".into()));
        }
        let lo = parts.iter().map(|(_, d)| d.offset).min().unwrap();
        let hi = parts.iter().map(|(_, d)| d.offset + d.probs.len() as i64).max().unwrap();
        let mut probs = vec![0.0; (hi - lo) as usize];
        for (w, d) in parts {
            let shift = (d.offset - lo) as usize;
            for (i, p) in d.probs.iter().enumerate() {
                probs[shift + i] += w * p;
            }
        }
        Ok(LatticeDistribution { h: first.h, offset: lo, probs, n: first.n, center: first.center })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lattice_value,probability\n");
        for (i, p) in self.probs.iter().enumerate() {
            s.push_str(&format!("{},{:e}\n", self.value(i), p));
        }
        s
    }
}

/// Runs the `(state, lattice value)` dynamic program and calls `visit(k,
/// offset, per_state)` after every step `k = 1..=n`; `per_state[s][i]` is the
/// mass of state `s` at lattice coordinate `offset + i`.
pub fn lattice_sweep(path: &MarkovPath, mut visit: impl FnMut(usize, i64, &[Vec<f64>])) -> Result<()> {
    let bounds: Vec<(i64, i64)> = path
        .steps
        .iter()
        .map(|rows| {
            let lv = rows.iter().flatten().map(|t| t.level);
            (lv.clone().min().unwrap_or(0), lv.max().unwrap_or(0))
        })
        .collect();
    let width: i64 = bounds.iter().map(|(a, b)| b - a).sum::<i64>() + 1;
    let cells = (width as usize).saturating_mul(path.dim);
    if cells > LATTICE_BUDGET {
        return Err(Error::LatticeBudget(cells));
    }
    let mut offset = 0i64;
    let mut cur: Vec<Vec<f64>> = path.initial.iter().map(|&p| vec![p]).collect();
    for (k, rows) in path.steps.iter().enumerate() {
        let (mn, mx) = bounds[k];
        let len = cur[0].len() + (mx - mn) as usize;
        let mut next = vec![vec![0.0; len]; path.dim];
        for (from, row) in rows.iter().enumerate() {
            let src = &cur[from];
            for t in row {
                let shift = (t.level - mn) as usize;
                let dst = &mut next[t.to][shift..shift + src.len()];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += t.prob * s;
                }
            }
        }
        offset += mn;
        cur = next;
        visit(k + 1, offset, &cur);
    }
    Ok(())
}

/// Exact law of `S_n − n · center` along `path`.
pub fn exact_law(path: &MarkovPath, h: f64, center: f64) -> Result<LatticeDistribution> {
    let n = path.len();
    let mut out = LatticeDistribution { h, offset: 0, probs: vec![1.0], n, center };
    if n == 0 {
        return Ok(out);
    }
    lattice_sweep(path, |k, off, per| {
        if k == n {
            let mut probs = vec![0.0; per[0].len()];
            for row in per {
                probs.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            out.offset = off;
            out.probs = probs;
        }
    })?;
    // Trim exact-zero tails so the support width reflects reachable values.
    let first = out.probs.iter().position(|&p| p > 0.0).unwrap_or(0);
    let last = out.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    out.probs = out.probs[first..=last].to_vec();
    out.offset += first as i64;
    Ok(out)
}

/// Mean and variance of the (real) sum after each step.
pub fn path_moments(path: &MarkovPath) -> Vec<(f64, f64)> {
    let mut p = path.initial.clone();
    let mut m1 = vec![0.0; path.dim];
    let mut m2 = vec![0.0; path.dim];
    let mut out = Vec::with_capacity(path.len());
    for rows in &path.steps {
        let (mut np, mut n1, mut n2) = (vec![0.0; path.dim], vec![0.0; path.dim], vec![0.0; path.dim]);
        for (from, row) in rows.iter().enumerate() {
            for t in row {
                let q = t.prob;
                np[t.to] += q * p[from];
                n1[t.to] += q * (m1[from] + t.incr * p[from]);
                n2[t.to] += q * (m2[from] + 2.0 * t.incr * m1[from] + t.incr * t.incr * p[from]);
            }
        }
        p = np;
        m1 = n1;
        m2 = n2;
        let mean: f64 = m1.iter().sum();
        let second: f64 = m2.iter().sum();
        out.push((mean, (second - mean * mean).max(0.0)));
    }
    out
}

/// `E e^{itS}` after each step, by a complex dynamic program.
pub fn path_char_function(path: &MarkovPath, t: f64) -> Complex64 {
    let mut v: Vec<Complex64> = path.initial.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    for rows in &path.steps {
        let mut next = vec![ZERO; path.dim];
        for (from, row) in rows.iter().enumerate() {
            for tr in row {
                next[tr.to] += v[from] * Complex64::from_polar(tr.prob, t * tr.incr);
            }
        }
        v = next;
    }
    v.iter().sum()
}

/// Expected increment of every step under the chain's own marginals.
pub fn step_means(path: &MarkovPath) -> Vec<f64> {
    let m = path_moments(path);
    (0..m.len()).map(|k| m[k].0 - if k == 0 { 0.0 } else { m[k - 1].0 }).collect()
}

/// Checks that every step mean equals `target` within `tol`.
pub fn check_pinned(means: &[f64], target: f64, tol: f64) -> Result<()> {
    if let Some((k, m)) = means.iter().enumerate().find(|(_, m)| (*m - target).abs() > tol) {
        return Err(Error::MeanNotPinned(format!("step {k} has mean {m}, expected {target}")));
    }
    Ok(())
}

/// Sampler state: current word, running sum and number of steps taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub word: usize,
    pub value: f64,
    pub step: usize,
}

struct Row {
    cum: Vec<f64>,
    to: Vec<usize>,
    incr: Vec<f64>,
}

/// A [`MarkovPath`] laid out for repeated sampling.
pub struct PathSampler {
    initial: Vec<f64>,
    steps: Vec<Vec<Row>>,
}

fn cumulative(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = p
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = f64::INFINITY;
    }
    c
}

impl PathSampler {
    pub fn new(path: &MarkovPath) -> Self {
        let steps = path
            .steps
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| Row {
                        cum: cumulative(row.iter().map(|t| t.prob)),
                        to: row.iter().map(|t| t.to).collect(),
                        incr: row.iter().map(|t| t.incr).collect(),
                    })
                    .collect()
            })
            .collect();
        PathSampler { initial: cumulative(path.initial.iter().copied()), steps }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> ChainState {
        let mut word = draw(&self.initial, rng.gen());
        let mut value = 0.0;
        for rows in &self.steps {
            let row = &rows[word];
            let k = draw(&row.cum, rng.gen());
            value += row.incr[k];
            word = row.to[k];
        }
        ChainState { word, value, step: self.steps.len() }
    }
}

/// Samples as a one-column CSV.
pub fn samples_to_csv(samples: &[f64]) -> String {
    let mut s = String::from("value\n");
    for v in samples {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}

/// Monte Carlo estimate of `E e^{itS}` and its standard error.
pub fn mc_char_function(samples: &[f64], t: f64) -> (Complex64, f64) {
    let n = samples.len() as f64;
    let mean: Complex64 = samples.iter().map(|s| Complex64::from_polar(1.0, t * s)).sum::<Complex64>() / n;
    let var = samples.iter().map(|s| (Complex64::from_polar(1.0, t * s) - mean).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `μ_{start+n}(A_it^{start, n} 1)` with `A_it` normalized by the `z = 0` orbit.
pub fn spectral_cf(src: &dyn BranchSource, orbit: &OrbitRpf, start: i64, n: usize, t: f64) -> Result<Complex64> {
    let end = start + n as i64;
    let mu = gibbs_at(orbit, end)?;
    if n == 0 {
        return Ok(Complex64::new(mu.iter().sum(), 0.0));
    }
    let steps = normalized_steps(&Twisted { src, z: Complex64::new(0.0, t) }, orbit, start, end - 1)?;
    let mut v = ones(src.dim());
    for j in start..end {
        v = steps.get(j) * v;
    }
    Ok(apply(&CVec::from_iterator(mu.len(), mu.iter().map(|&m| Complex64::new(m, 0.0))), &v))
}

/// `Σ_y (M_{start+n-1}(it) ⋯ M_start(it) p)(y)` for a forward chain from `p`.
pub fn forward_cf(src: &dyn BranchSource, initial: &[f64], start: i64, n: usize, t: f64) -> Complex64 {
    let tw = Twisted { src, z: Complex64::new(0.0, t) };
    let mut v = CVec::from_iterator(initial.len(), initial.iter().map(|&p| Complex64::new(p, 0.0)));
    for j in start..start + n as i64 {
        v = crate::rpf::StepSource::step(&tw, j) * v;
    }
    v.sum()
}

/// One ω with its `z = 0` orbit, ready for law, sampling and spectral work on
/// steps `lo ..= hi`.
pub struct Prepared<'a> {
    pub src: Box<dyn BranchSource + 'a>,
    pub orbit: OrbitRpf,
    pub kind: ChainKind,
    pub lattice_h: Option<f64>,
    pub len: usize,
}

/// The orbit spans `lo - len ..= hi + len`, which is what the jets need.
pub fn prepare<'a>(sys: &'a dyn FiberSystem, window: &'a OmegaWindow, lo: i64, hi: i64) -> Result<Prepared<'a>> {
    let src = sys.source(window)?;
    let len = sys.rpf_len();
    let orbit = orbit0(src.as_ref(), lo - len as i64, hi + len as i64, len)?;
    Ok(Prepared { src, orbit, kind: sys.chain_kind(), lattice_h: sys.lattice_h(), len })
}

impl Prepared<'_> {
    fn forward_initial(&self, start: i64) -> Result<Vec<f64>> {
        match &self.kind {
            ChainKind::Forward { initial: Some(p) } => Ok(p.clone()),
            _ => gibbs_at(&self.orbit, start),
        }
    }

    /// Chain whose increments over `n` steps have the law of `S_n^ω`.
    pub fn law_path(&self, n: usize) -> Result<MarkovPath> {
        match self.kind {
            ChainKind::Reversed => reversed_path(self.src.as_ref(), &self.orbit, n as i64, n),
            ChainKind::Forward { .. } => forward_path(self.src.as_ref(), &self.forward_initial(0)?, 0, n),
        }
    }

    /// Chain for renewal sums: into the past from `μ_0` (Gibbs) or forward
    /// from the initial law; weights attach to the state reached.
    pub fn renewal_path(&self, n: usize) -> Result<MarkovPath> {
        match self.kind {
            ChainKind::Reversed => reversed_path(self.src.as_ref(), &self.orbit, 0, n),
            ChainKind::Forward { .. } => forward_path(self.src.as_ref(), &self.forward_initial(0)?, 0, n),
        }
    }

    pub fn cf_spectral(&self, n: usize, t: f64) -> Result<Complex64> {
        match &self.kind {
            ChainKind::Forward { initial: Some(p) } => Ok(forward_cf(self.src.as_ref(), p, 0, n, t)),
            _ => spectral_cf(self.src.as_ref(), &self.orbit, 0, n, t),
        }
    }

    /// `(Π'_{ω,n}(0), Π''_{ω,n}(0))`.
    pub fn pressure(&self, n: usize) -> Result<(f64, f64)> {
        pressure_derivatives_from(&BranchJets(self.src.as_ref()), &self.orbit, n, self.len)
    }

    pub fn exact_law(&self, n: usize, center: f64) -> Result<LatticeDistribution> {
        let h = self.lattice_h.ok_or_else(|| Error::NotLattice("no lattice spacing declared".into()))?;
        exact_law(&self.law_path(n)?, h, center)
    }
}

fn symbolic_orbit<'a>(window: &'a OmegaWindow, n: usize, pot: &'a PotentialTable, model: &'a FiberModel) -> Result<(SymbolicBranches<'a>, OrbitRpf)> {
    let src = SymbolicBranches::new(window, pot, model)?;
    let len = DEFAULT_LEN;
    let orbit = orbit0(&src, 0, n as i64, len)?;
    Ok((src, orbit))
}

/// Exact law of `S_n^ω u − n · center` under `μ_ω`. The window must cover
/// `-W ..= n + W` (plus one symbol of lookahead with a base-pair term),
/// `W` = 64.
pub fn exact_sn_distribution(window: &OmegaWindow, n: usize, pot: &PotentialTable, model: &FiberModel, center: f64) -> Result<LatticeDistribution> {
    let h = pot.lattice_h.ok_or_else(|| Error::NotLattice("no lattice spacing declared".into()))?;
    let (src, orbit) = symbolic_orbit(window, n, pot, model)?;
    exact_law(&reversed_path(&src, &orbit, n as i64, n)?, h, center)
}

/// `μ_{θ^n ω}(A_it^{ω,n} 1)`.
pub fn char_function_spectral(window: &OmegaWindow, n: usize, t: f64, pot: &PotentialTable, model: &FiberModel) -> Result<Complex64> {
    let (src, orbit) = symbolic_orbit(window, n, pot, model)?;
    spectral_cf(&src, &orbit, 0, n, t)
}

/// One draw of `S_n^ω u` under `μ_ω`.
pub fn sample_sn(window: &OmegaWindow, n: usize, seed: u64, pot: &PotentialTable, model: &FiberModel) -> Result<f64> {
    let (src, orbit) = symbolic_orbit(window, n, pot, model)?;
    let path = reversed_path(&src, &orbit, n as i64, n)?;
    Ok(PathSampler::new(&path).sample(&mut seed::rng(seed)).value)
}
