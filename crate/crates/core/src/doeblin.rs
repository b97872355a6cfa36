//! Random finite Markov kernels with two-sided Doeblin bounds.
//!
//! `R_z^ω g(x) = Σ_y r_ω(x, y) e^{z u_{θω}(y)} g(y)` composes in the order
//! `R^{ω,n} = R^ω R^{θω} ⋯ R^{θ^{n-1}ω}`. The transposes `K_j = (R^{θ^j ω})^T`
//! form a cocycle in the standard order `K_{n-1} ⋯ K_0`, which is what the
//! RPF and limit-theorem code consumes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::{BaseSymbolChain, OmegaWindow};
use crate::error::{Error, Result};
use crate::linalg::{inf_norm, CMat};
use crate::rpf::StepSource;
use crate::system::{Branch, BranchSource, ChainKind, FiberSystem, Twisted};

const ROW_TOL: f64 = 1e-12;
const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeblinFamily {
    pub states: usize,
    /// `kernels[s][x][y]`, row-stochastic.
    pub kernels: Vec<Vec<Vec<f64>>>,
    /// `u[s][y]`, read at the arrival state with the arrival symbol.
    pub u: Vec<Vec<f64>>,
    pub alpha: f64,
    pub lattice_h: Option<f64>,
    /// Steps after which the two-sided bounds hold; always 1 here.
    pub j0: usize,
}

pub fn build_doeblin_family(kernels: Vec<Vec<Vec<f64>>>, u: Vec<Vec<f64>>, alpha: f64, lattice_h: Option<f64>) -> Result<DoeblinFamily> {
    let symbols = kernels.len();
    if symbols == 0 {
        return Err(Error::InvalidDoeblin("no kernels given".into()));
    }
    let q = kernels[0].len();
    if q == 0 {
        return Err(Error::InvalidDoeblin("kernels must have at least one state".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0 / q as f64 + 1e-15) {
        return Err(Error::InvalidDoeblin(format!("alpha = {alpha} must lie in (0, 1/{q}]")));
    }
    for (s, k) in kernels.iter().enumerate() {
        if k.len() != q || k.iter().any(|row| row.len() != q) {
            return Err(Error::InvalidDoeblin(format!("kernel {s} is not {q}x{q}")));
        }
        for (x, row) in k.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                if !(v >= alpha && v <= 1.0 / alpha) {
                    return Err(Error::DoeblinViolated { symbol: s, row: x, col: y, value: v, alpha, inv_alpha: 1.0 / alpha });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidDoeblin(format!("row {x} of kernel {s} sums to {sum}")));
            }
        }
    }
    if u.len() != symbols || u.iter().any(|r| r.len() != q) {
        return Err(Error::InvalidDoeblin(format!("u must be {symbols}x{q}")));
    }
    if let Some((s, y)) = (0..symbols).flat_map(|s| (0..q).map(move |y| (s, y))).find(|&(s, y)| !u[s][y].is_finite()) {
        return Err(Error::InvalidDoeblin(format!("u[{s}][{y}] is not finite")));
    }
    if let Some(h) = lattice_h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDoeblin(format!("lattice spacing must be positive (got {h})")));
        }
        for (s, row) in u.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                if (v / h - (v / h).round()).abs() > LATTICE_TOL {
                    return Err(Error::NotLattice(format!("u[{s}][{y}] = {v} is not a multiple of h = {h}")));
                }
            }
        }
    }
    Ok(DoeblinFamily { states: q, kernels, u, alpha, lattice_h, j0: 1 })
}

impl DoeblinFamily {
    pub fn symbols(&self) -> usize {
        self.kernels.len()
    }

    /// `R_z` for a step from symbol `s` into symbol `s_next`.
    pub fn operator(&self, s: usize, s_next: usize, z: Complex64) -> CMat {
        let q = self.states;
        CMat::from_fn(q, q, |x, y| self.kernels[s][x][y] * (z * self.u[s_next][y]).exp())
    }

    /// Smallest and largest entries over all one-step kernels.
    pub fn entry_bounds(&self) -> (f64, f64) {
        let all = self.kernels.iter().flatten().flatten();
        (all.clone().copied().fold(f64::INFINITY, f64::min), all.copied().fold(0.0, f64::max))
    }
}

/// `R_z^{θ^start ω} ⋯ R_z^{θ^{start+n-1} ω}` left to right, with the
/// scale factored out every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedCocycle {
    pub n: usize,
    pub matrix: CMat,
    pub log_scale: f64,
}

impl ReversedCocycle {
    pub fn full_matrix(&self) -> CMat {
        &self.matrix * Complex64::new(self.log_scale.exp(), 0.0)
    }
}

pub fn reversed_cocycle(family: &DoeblinFamily, window: &OmegaWindow, start: i64, n: usize, z: Complex64) -> Result<ReversedCocycle> {
    window.require(start, start + n as i64)?;
    let mut m = CMat::identity(family.states, family.states);
    let mut log_scale = 0.0;
    for j in start..start + n as i64 {
        m *= family.operator(window.at(j), window.at(j + 1), z);
        let s = inf_norm(&m);
        if s > 0.0 && s.is_finite() {
            m /= Complex64::new(s, 0.0);
            log_scale += s.ln();
        }
    }
    Ok(ReversedCocycle { n, matrix: m, log_scale })
}

/// The transposed kernels along a window as branches.
pub struct DoeblinBranches<'a> {
    pub family: &'a DoeblinFamily,
    pub window: &'a OmegaWindow,
}

impl<'a> DoeblinBranches<'a> {
    pub fn new(family: &'a DoeblinFamily, window: &'a OmegaWindow) -> Result<Self> {
        if let Some(&s) = window.symbols().iter().find(|&&s| s >= family.symbols()) {
            return Err(Error::MissingSymbol(s));
        }
        Ok(DoeblinBranches { family, window })
    }
}

impl BranchSource for DoeblinBranches<'_> {
    fn dim(&self) -> usize {
        self.family.states
    }
    fn range(&self) -> (i64, i64) {
        (self.window.lo(), self.window.hi() - 1)
    }
    fn branches(&self, j: i64) -> Vec<Branch> {
        let f = self.family;
        let (s, s1) = (self.window.at(j), self.window.at(j + 1));
        let mut out = Vec::with_capacity(f.states * f.states);
        for x in 0..f.states {
            for y in 0..f.states {
                let incr = f.u[s1][y];
                out.push(Branch {
                    out: y,
                    inn: x,
                    weight: f.kernels[s][x][y],
                    incr,
                    level: f.lattice_h.map_or(0, |h| (incr / h).round() as i64),
                });
            }
        }
        out
    }
    fn symbol(&self, j: i64) -> usize {
        self.window.at(j)
    }
}

pub struct DoeblinSystem {
    pub chain: BaseSymbolChain,
    pub family: DoeblinFamily,
    /// Initial law of the chain; the `z = 0` stationary weights when `None`.
    pub initial: Option<Vec<f64>>,
}

impl DoeblinSystem {
    pub fn new(chain: BaseSymbolChain, family: DoeblinFamily, initial: Option<Vec<f64>>) -> Result<Self> {
        if family.symbols() < chain.states() {
            return Err(Error::MissingSymbol(family.symbols()));
        }
        if let Some(p) = &initial {
            let ok = p.len() == family.states && p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-10;
            if !ok {
                return Err(Error::InvalidDoeblin(format!("initial law must be a probability vector over {} states", family.states)));
            }
        }
        Ok(DoeblinSystem { chain, family, initial })
    }
}

impl FiberSystem for DoeblinSystem {
    fn chain(&self) -> &BaseSymbolChain {
        &self.chain
    }
    fn lattice_h(&self) -> Option<f64> {
        self.family.lattice_h
    }
    fn lookahead(&self) -> i64 {
        1
    }
    fn source<'a>(&'a self, window: &'a OmegaWindow) -> Result<Box<dyn BranchSource + 'a>> {
        Ok(Box::new(DoeblinBranches::new(&self.family, window)?))
    }
    fn chain_kind(&self) -> ChainKind {
        ChainKind::Forward { initial: self.initial.clone() }
    }
    fn dim(&self) -> usize {
        self.family.states
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Largest total-variation distance between rows of `R_0^{ω,n}`.
    pub tv: Vec<(usize, f64)>,
    /// Per-step Dobrushin factor `1 − qα`.
    pub factor: f64,
    pub holds: bool,
}

/// Row total-variation distances of `R_0^{ω,n}` against `(1 − qα)^n`.
pub fn doeblin_contraction(family: &DoeblinFamily, window: &OmegaWindow, n_list: &[usize]) -> Result<ContractionReport> {
    let q = family.states;
    let factor = (1.0 - q as f64 * family.alpha).max(0.0);
    let mut tv = Vec::with_capacity(n_list.len());
    let mut holds = true;
    for &n in n_list {
        let m = reversed_cocycle(family, window, 0, n, Complex64::new(0.0, 0.0))?.full_matrix();
        let mut worst: f64 = 0.0;
        for a in 0..q {
            for b in a + 1..q {
                let d: f64 = (0..q).map(|y| (m[(a, y)].re - m[(b, y)].re).abs()).sum::<f64>() / 2.0;
                worst = worst.max(d);
            }
        }
        holds &= worst <= factor.powi(n as i32) + 1e-12;
        tv.push((n, worst));
    }
    Ok(ContractionReport { tv, factor, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    /// `max |R^{ω,2} − hand|` for the composed operator.
    pub reversed_gap: f64,
    /// `max |(K_1 K_0)^T − hand|` for the branch cocycle.
    pub transposed_gap: f64,
    /// `max |R^{θω} R^ω − hand|`, which should not vanish.
    pub swapped_gap: f64,
}

/// Two-step composition against the explicit double sum
/// `Σ_m r_{ω_0}(x, m) e^{z u_{ω_1}(m)} r_{ω_1}(m, y) e^{z u_{ω_2}(y)}`.
pub fn composition_order_check(family: &DoeblinFamily, window: &OmegaWindow, z: Complex64) -> Result<OrderCheck> {
    window.require(0, 2)?;
    let q = family.states;
    let (s0, s1, s2) = (window.at(0), window.at(1), window.at(2));
    let k = &family.kernels;
    let e = |s: usize, y: usize| (z * family.u[s][y]).exp();
    let mut hand = CMat::zeros(q, q);
    for x in 0..q {
        for y in 0..q {
            for m in 0..q {
                hand[(x, y)] += k[s0][x][m] * e(s1, m) * k[s1][m][y] * e(s2, y);
            }
        }
    }
    let reversed = reversed_cocycle(family, window, 0, 2, z)?.full_matrix();
    let src = DoeblinBranches::new(family, window)?;
    let tw = Twisted { src: &src, z };
    let transposed = (tw.step(1) * tw.step(0)).transpose();
    let swapped = family.operator(s1, s2, z) * family.operator(s0, s1, z);
    Ok(OrderCheck {
        reversed_gap: (&reversed - &hand).camax(),
        transposed_gap: (&transposed - &hand).camax(),
        swapped_gap: (&swapped - &hand).camax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{build_markov_base, sample_base_path};
    use crate::gibbs::{exact_law, path_moments, prepare};
    use crate::linalg::ZERO;
    use crate::rpf::solve_rpf_steps;
    use crate::seed;
    use crate::system::window_span;
    use rand::Rng;

    fn random_family(q: usize, alpha: f64, symbols: usize, seed: u64) -> DoeblinFamily {
        let mut rng = seed::rng(seed);
        let kernels = (0..symbols)
            .map(|_| {
                (0..q)
                    .map(|_| {
                        // α plus a random split of the remaining mass
                        let raw: Vec<f64> = (0..q).map(|_| rng.gen_range(0.0..1.0)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|v| alpha + (1.0 - q as f64 * alpha) * v / s).collect()
                    })
                    .collect()
            })
            .collect();
        let u = (0..symbols).map(|_| (0..q).map(|_| rng.gen_range(-1i32..=1) as f64).collect()).collect();
        build_doeblin_family(kernels, u, alpha, Some(1.0)).unwrap()
    }

    #[test]
    fn validation() {
        let iid = vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]];
        assert!(build_doeblin_family(iid.clone(), vec![vec![1.0, -1.0]], 0.5, Some(1.0)).is_ok());
        let zero = vec![vec![vec![1.0, 0.0], vec![0.5, 0.5]]];
        assert!(matches!(
            build_doeblin_family(zero, vec![vec![1.0, -1.0]], 0.1, None),
            Err(Error::DoeblinViolated { symbol: 0, row: 0, col: 1, .. })
        ));
        assert!(matches!(build_doeblin_family(iid.clone(), vec![vec![1.0, -1.0]], 0.6, None), Err(Error::InvalidDoeblin(_))));
        assert!(matches!(build_doeblin_family(iid.clone(), vec![vec![0.5, -1.0]], 0.5, Some(1.0)), Err(Error::NotLattice(_))));
        let bad_row = vec![vec![vec![0.5, 0.6], vec![0.5, 0.5]]];
        assert!(matches!(build_doeblin_family(bad_row, vec![vec![1.0, -1.0]], 0.4, None), Err(Error::InvalidDoeblin(_))));
    }

    #[test]
    fn random_q3_family_has_two_sided_bounds() {
        let f = random_family(3, 0.1, 2, 4);
        let (lo, hi) = f.entry_bounds();
        assert!(lo >= 0.1 && hi <= 10.0);
        assert_eq!(f.j0, 1);
    }

    #[test]
    fn composition_order_hand_check() {
        let k0 = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
        let k1 = vec![vec![0.4, 0.6], vec![0.9, 0.1]];
        let u = vec![vec![1.0, -1.0], vec![2.0, 0.0]];
        let f = build_doeblin_family(vec![k0.clone(), k1.clone()], u.clone(), 0.1, None).unwrap();
        let w = OmegaWindow::new(0, vec![0, 1, 0]).unwrap();
        let z = Complex64::new(0.2, 0.9);
        let e = |s: usize, y: usize| (z * u[s][y]).exp();
        // R^ω R^{θω} with ω = (0, 1, 0): factors r_0 diag(e^{z u_1}) and r_1 diag(e^{z u_0})
        let mut hand = CMat::zeros(2, 2);
        for x in 0..2 {
            for y in 0..2 {
                for m in 0..2 {
                    hand[(x, y)] += k0[x][m] * e(1, m) * k1[m][y] * e(0, y);
                }
            }
        }
        let got = reversed_cocycle(&f, &w, 0, 2, z).unwrap().full_matrix();
        assert!((&got - &hand).camax() < 1e-15 * 4.0);
        // the other order differs
        let mut wrong = CMat::zeros(2, 2);
        for x in 0..2 {
            for y in 0..2 {
                for m in 0..2 {
                    wrong[(x, y)] += k1[x][m] * e(0, m) * k0[m][y] * e(1, y);
                }
            }
        }
        assert!((got - wrong).camax() > 1e-3);
        // the branch cocycle is the transpose
        let src = DoeblinBranches::new(&f, &w).unwrap();
        let tw = Twisted { src: &src, z };
        let prod = tw.step(1) * tw.step(0);
        assert!((prod.transpose() - hand).camax() < 1e-15 * 4.0);
        let c = composition_order_check(&f, &w, z).unwrap();
        assert!(c.reversed_gap < 4e-15 && c.transposed_gap < 4e-15 && c.swapped_gap > 1e-3, "{c:?}");
    }

    #[test]
    fn markov_structure_and_contraction() {
        let f = random_family(3, 0.05, 2, 9);
        let chain = build_markov_base(&[vec![0.5, 0.5], vec![0.2, 0.8]], 1e-12).unwrap();
        let w = sample_base_path(&chain, -300, 300, 1).unwrap();
        let one = reversed_cocycle(&f, &w, -3, 7, ZERO).unwrap().full_matrix();
        for x in 0..3 {
            let s: Complex64 = one.row(x).iter().sum();
            assert!((s - 1.0).norm() < 1e-14);
        }
        for (t, n) in [(0.7, 3usize), (3.0, 20), (-11.0, 50)] {
            let m = reversed_cocycle(&f, &w, 0, n, Complex64::new(0.0, t)).unwrap().full_matrix();
            assert!(inf_norm(&m) <= 1.0 + 1e-12);
        }
        let rep = doeblin_contraction(&f, &w, &[1, 2, 4, 8, 16]).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.tv.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-15));
        // z = 0 triplet of the transposed cocycle: λ = 1, ν uniform
        let src = DoeblinBranches::new(&f, &w).unwrap();
        let t = solve_rpf_steps(&Twisted { src: &src, z: ZERO }, ZERO, 64, 64).unwrap();
        assert!((t.lambda - 1.0).norm() < 1e-12);
        assert!(t.nu.iter().all(|v| (v - 1.0 / 3.0).norm() < 1e-12));
    }

    #[test]
    fn forward_chain_law_is_prefix_consistent() {
        let f = random_family(2, 0.2, 2, 3);
        let chain = build_markov_base(&[vec![0.5, 0.5], vec![0.3, 0.7]], 1e-12).unwrap();
        let sys = DoeblinSystem::new(chain.clone(), f.clone(), None).unwrap();
        let (a, b) = window_span(&sys, 0, 20);
        let w = sample_base_path(&chain, a, b, 2).unwrap();
        let p = prepare(&sys, &w, 0, 20).unwrap();
        let big = p.law_path(12).unwrap();
        let mut prefix_laws = Vec::new();
        crate::gibbs::lattice_sweep(&big, |k, off, per| {
            let tot: Vec<f64> = (0..per[0].len()).map(|i| per.iter().map(|r| r[i]).sum()).collect();
            prefix_laws.push((k, off, tot));
        })
        .unwrap();
        for n in [1usize, 5, 11] {
            let law = exact_law(&p.law_path(n).unwrap(), 1.0, 0.0).unwrap();
            let (_, off, tot) = &prefix_laws[n - 1];
            for (i, q) in tot.iter().enumerate() {
                assert!((law.prob_at_level(off + i as i64) - q).abs() < 1e-15);
            }
        }
        // stationary start: the mean of S_n is Π'(0), and the exact variance
        // stays within a bounded distance of Π''
        for n in [1usize, 7, 19] {
            let (mean, var) = *path_moments(&p.law_path(n).unwrap()).last().unwrap();
            let (d1, d2) = p.pressure(n).unwrap();
            assert!((d1 - mean).abs() < 1e-9);
            assert!((d2 - var).abs() < 3.0);
        }
        // explicit initial law: spectral value is the raw forward product
        let sys2 = DoeblinSystem::new(chain, f, Some(vec![1.0, 0.0])).unwrap();
        let p2 = prepare(&sys2, &w, 0, 20).unwrap();
        let law = exact_law(&p2.law_path(9).unwrap(), 1.0, 0.0).unwrap();
        for t in [0.4, 2.0] {
            assert!((law.char_function(t) - p2.cf_spectral(9, t).unwrap()).norm() < 1e-12);
            assert!((exact_law(&p.law_path(9).unwrap(), 1.0, 0.0).unwrap().char_function(t) - p.cf_spectral(9, t).unwrap()).norm() < 1e-10);
        }
    }
}
