//! Branch-level view of a fiber cocycle and the ω-ensembles built on it.
//!
//! A step `j` is a list of branches `(out, in, weight, increment)`; the
//! twisted matrix is `M_j(z)[out][in] = Σ weight · e^{z · increment}`. The
//! symbolic transfer operators and the Doeblin kernels both reduce to this,
//! so the Gibbs, limit-theorem and survey code is written once.

use num_complex::Complex64;

use crate::base::{sample_conditioned_path, strata, BaseSymbolChain, OmegaWindow};
use crate::error::{Error, Result};
use crate::fiber::{FiberModel, PotentialTable};
use crate::jet::JetMat;
use crate::linalg::{sup_norm, CMat, CVec};
use crate::rpf::{JetSource, StepSource, DEFAULT_LEN};
use crate::seed;
use crate::transfer::vector_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub out: usize,
    pub inn: usize,
    /// Weight at `z = 0`.
    pub weight: f64,
    pub incr: f64,
    /// `incr / h` for lattice instances, 0 otherwise.
    pub level: i64,
}

pub trait BranchSource: Sync {
    fn dim(&self) -> usize;
    /// Inclusive range of available steps.
    fn range(&self) -> (i64, i64);
    fn branches(&self, j: i64) -> Vec<Branch>;
    /// Base symbol at index `j`, used to look up per-symbol fiber tables.
    fn symbol(&self, j: i64) -> usize;
    fn vec_norm(&self, v: &CVec) -> f64 {
        sup_norm(v)
    }
}

/// `M_j(z)` as a [`StepSource`].
pub struct Twisted<'a> {
    pub src: &'a dyn BranchSource,
    pub z: Complex64,
}

impl StepSource for Twisted<'_> {
    fn dim(&self) -> usize {
        self.src.dim()
    }
    fn range(&self) -> (i64, i64) {
        self.src.range()
    }
    fn step(&self, j: i64) -> CMat {
        let n = self.src.dim();
        let mut m = CMat::zeros(n, n);
        for b in self.src.branches(j) {
            m[(b.out, b.inn)] += b.weight * (self.z * b.incr).exp();
        }
        m
    }
    fn vec_norm(&self, v: &CVec) -> f64 {
        self.src.vec_norm(v)
    }
}

/// Jets at `z = 0` of the branch cocycle.
pub struct BranchJets<'a>(pub &'a dyn BranchSource);

impl JetSource for BranchJets<'_> {
    fn jet_step(&self, j: i64) -> JetMat {
        let n = self.0.dim();
        let mut m = [CMat::zeros(n, n), CMat::zeros(n, n), CMat::zeros(n, n)];
        for b in self.0.branches(j) {
            let w = b.weight;
            m[0][(b.out, b.inn)] += Complex64::new(w, 0.0);
            m[1][(b.out, b.inn)] += Complex64::new(w * b.incr, 0.0);
            m[2][(b.out, b.inn)] += Complex64::new(w * b.incr * b.incr, 0.0);
        }
        JetMat { m }
    }
}

/// Symbolic transfer operators read along a base window.
pub struct SymbolicBranches<'a> {
    pub window: &'a OmegaWindow,
    pub pot: &'a PotentialTable,
    pub model: &'a FiberModel,
}

impl<'a> SymbolicBranches<'a> {
    pub fn new(window: &'a OmegaWindow, pot: &'a PotentialTable, model: &'a FiberModel) -> Result<Self> {
        for &s in window.symbols() {
            pot.covers(s)?;
        }
        Ok(SymbolicBranches { window, pot, model })
    }

    fn lookahead(&self) -> i64 {
        i64::from(self.pot.has_pair())
    }
}

impl BranchSource for SymbolicBranches<'_> {
    fn dim(&self) -> usize {
        self.model.function_dim()
    }
    fn range(&self) -> (i64, i64) {
        (self.window.lo(), self.window.hi() - self.lookahead())
    }
    fn branches(&self, j: i64) -> Vec<Branch> {
        let (pot, d, dim) = (self.pot, self.model.alphabet, self.model.function_dim());
        let s = self.window.at(j);
        let (c, cl) = if pot.has_pair() {
            let s1 = self.window.at(j + 1);
            (pot.pair(s, s1), pot.lattice_pair(s, s1).unwrap_or(0))
        } else {
            (0.0, 0)
        };
        let mut out = Vec::with_capacity(d * dim);
        for o in 0..dim {
            for a in 0..d {
                let word = a * dim + o;
                out.push(Branch {
                    out: o,
                    inn: word / d,
                    weight: pot.phi[s][word].exp(),
                    incr: pot.u[s][word] + c,
                    level: pot.lattice_u(s, word).map_or(0, |l| l + cl),
                });
            }
        }
        out
    }
    fn symbol(&self, j: i64) -> usize {
        self.window.at(j)
    }
    fn vec_norm(&self, v: &CVec) -> f64 {
        vector_norm(v, self.model.alphabet, self.model.depth - 1, self.model.alpha)
    }
}

/// How the fiber chain attached to a system runs.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainKind {
    /// The Gibbs chain: laws of `S_n` come from the time-reversed chain of the
    /// normalized operators started at `μ_n`; renewal weights run into the past.
    Reversed,
    /// A Markov chain whose raw steps are already column-stochastic, run
    /// forward from `initial` (the `z = 0` Gibbs weights when `None`).
    Forward { initial: Option<Vec<f64>> },
}

/// A base chain together with a rule turning a base window into branches.
pub trait FiberSystem: Sync {
    fn chain(&self) -> &BaseSymbolChain;
    fn lattice_h(&self) -> Option<f64>;
    /// Extra base symbols read past the last step.
    fn lookahead(&self) -> i64;
    fn source<'a>(&'a self, window: &'a OmegaWindow) -> Result<Box<dyn BranchSource + 'a>>;
    fn chain_kind(&self) -> ChainKind;
    fn dim(&self) -> usize;
    /// Truncation margin used for RPF triplets.
    fn rpf_len(&self) -> usize {
        DEFAULT_LEN
    }
}

pub struct SymbolicSystem {
    pub chain: BaseSymbolChain,
    pub model: FiberModel,
    pub pot: PotentialTable,
}

impl SymbolicSystem {
    pub fn new(chain: BaseSymbolChain, model: FiberModel, pot: PotentialTable) -> Result<Self> {
        pot.validate(&model)?;
        if pot.symbols() < chain.states() {
            return Err(Error::MissingSymbol(pot.symbols()));
        }
        Ok(SymbolicSystem { chain, model, pot })
    }
}

impl FiberSystem for SymbolicSystem {
    fn chain(&self) -> &BaseSymbolChain {
        &self.chain
    }
    fn lattice_h(&self) -> Option<f64> {
        self.pot.lattice_h
    }
    fn lookahead(&self) -> i64 {
        i64::from(self.pot.has_pair())
    }
    fn source<'a>(&'a self, window: &'a OmegaWindow) -> Result<Box<dyn BranchSource + 'a>> {
        Ok(Box::new(SymbolicBranches::new(window, &self.pot, &self.model)?))
    }
    fn chain_kind(&self) -> ChainKind {
        ChainKind::Reversed
    }
    fn dim(&self) -> usize {
        self.model.function_dim()
    }
}

/// One ω-sample with its weight in the annealed average.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSample {
    pub window: OmegaWindow,
    pub weight: f64,
}

/// Base window needed to work with steps `lo ..= hi`: `z = 0` triplets on
/// a margin of `len` around them, each with its own truncation `len`.
pub fn window_span(sys: &dyn FiberSystem, lo: i64, hi: i64) -> (i64, i64) {
    let len = sys.rpf_len() as i64;
    (lo - 2 * len, hi + 2 * len + sys.lookahead())
}

/// `count` base windows stratified over the origin cylinders of length
/// `depth`: stratum `c` gets a share of the samples proportional to its
/// probability (at least one), and each of its samples weight `p_c / count_c`.
/// Sample `i` is seeded by `derive(seed, i)`.
pub fn sample_omegas(sys: &dyn FiberSystem, count: usize, depth: usize, lo: i64, hi: i64, seed: u64) -> Result<Vec<OmegaSample>> {
    if count == 0 {
        return Err(Error::InvalidModel("at least one ω-sample is required".into()));
    }
    let (a, b) = window_span(sys, lo, hi);
    let cells: Vec<(Vec<usize>, f64)> = strata(sys.chain(), depth).into_iter().filter(|(_, p)| *p > 0.0).collect();
    if cells.len() > count {
        return Err(Error::InvalidModel(format!("{count} ω-samples cannot cover {} strata", cells.len())));
    }
    let mut alloc: Vec<usize> = cells.iter().map(|(_, p)| ((p * count as f64).floor() as usize).max(1)).collect();
    // Hand out the remainder by largest fractional part, ties by index.
    let mut used: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = cells[i].1 * count as f64 - alloc[i] as f64;
        let fj = cells[j].1 * count as f64 - alloc[j] as f64;
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    let mut k = 0;
    while used < count {
        alloc[order[k % order.len()]] += 1;
        used += 1;
        k += 1;
    }
    while used > count {
        let i = (0..alloc.len()).filter(|&i| alloc[i] > 1).max_by_key(|&i| alloc[i]).expect("reducible stratum");
        alloc[i] -= 1;
        used -= 1;
    }
    let mut out = Vec::with_capacity(count);
    let mut idx = 0u64;
    for ((prefix, p), &n) in cells.iter().zip(&alloc) {
        for _ in 0..n {
            let window = sample_conditioned_path(sys.chain(), a, b, prefix, seed::derive(seed, idx))?;
            out.push(OmegaSample { window, weight: p / n as f64 });
            idx += 1;
        }
    }
    Ok(out)
}
