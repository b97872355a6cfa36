//! Random RPF triplets along base orbits, pressure and its derivatives.
//!
//! Everything here works on an abstract step sequence `j -> M_j` so the same
//! code serves the symbolic transfer cocycle and the Doeblin kernels.
//! Eigenfunctions come from pushing `1` forward through `M_{j-1} ⋯ M_{j-W}`,
//! dual functionals from pulling the uniform weights back through
//! `M_{j+W-1} ⋯ M_j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::OmegaWindow;
use crate::error::{Error, Result};
use crate::fiber::{CylinderFunction, FiberModel, PotentialTable};
use crate::jet::{Jet2, JetMat, JetVec};
use crate::linalg::{linear_fit, ones, sup_norm, CMat, CVec, ONE, ZERO};
use crate::transfer::{vector_norm, SymbolCache};

pub const DEFAULT_LEN: usize = 64;
pub const MAX_LEN: usize = 1024;
pub const RPF_TOL: f64 = 1e-9;
/// Errors below this (relative) level are rounding noise and are not fitted.
pub const NOISE_FLOOR: f64 = 1e-13;

/// A cocycle given step by step on an index range.
pub trait StepSource: Sync {
    fn dim(&self) -> usize;
    /// Inclusive range of `j` for which `step(j)` is available.
    fn range(&self) -> (i64, i64);
    fn step(&self, j: i64) -> CMat;
    /// Norm used for residuals; the sup norm unless overridden.
    fn vec_norm(&self, v: &CVec) -> f64 {
        sup_norm(v)
    }
}

/// Second-order jets at `z = 0` of the steps of a [`StepSource`].
pub trait JetSource: Sync {
    fn jet_step(&self, j: i64) -> JetMat;
}

/// The symbolic transfer cocycle read along a window.
pub struct WindowSteps<'a> {
    pub cache: &'a SymbolCache,
    pub window: &'a OmegaWindow,
    pub pot: &'a PotentialTable,
    pub model: &'a FiberModel,
}

impl<'a> WindowSteps<'a> {
    pub fn new(cache: &'a SymbolCache, window: &'a OmegaWindow, pot: &'a PotentialTable, model: &'a FiberModel) -> Self {
        WindowSteps { cache, window, pot, model }
    }
}

impl StepSource for WindowSteps<'_> {
    fn dim(&self) -> usize {
        self.cache.dim()
    }
    fn range(&self) -> (i64, i64) {
        (self.window.lo(), self.window.hi() - self.cache.lookahead())
    }
    fn step(&self, j: i64) -> CMat {
        self.cache.step(self.window, j)
    }
    fn vec_norm(&self, v: &CVec) -> f64 {
        vector_norm(v, self.model.alphabet, self.model.depth - 1, self.model.alpha)
    }
}

impl JetSource for WindowSteps<'_> {
    fn jet_step(&self, j: i64) -> JetMat {
        let (pot, model) = (self.pot, self.model);
        let s = self.window.at(j);
        let c = if pot.has_pair() { pot.pair(s, self.window.at(j + 1)) } else { 0.0 };
        let d = model.alphabet;
        let dim = model.function_dim();
        let mut m = [CMat::zeros(dim, dim), CMat::zeros(dim, dim), CMat::zeros(dim, dim)];
        for out in 0..dim {
            for a in 0..d {
                let word = a * dim + out;
                let input = word / d;
                let w = pot.phi[s][word].exp();
                let u = pot.u[s][word] + c;
                m[0][(out, input)] += Complex64::new(w, 0.0);
                m[1][(out, input)] += Complex64::new(w * u, 0.0);
                m[2][(out, input)] += Complex64::new(w * u * u, 0.0);
            }
        }
        JetMat { m }
    }
}

/// A precomputed cocycle on `lo .. lo + len - 1`.
#[derive(Debug, Clone)]
pub struct StepSeq {
    pub lo: i64,
    pub mats: Vec<CMat>,
}

impl StepSource for StepSeq {
    fn dim(&self) -> usize {
        self.mats[0].nrows()
    }
    fn range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.mats.len() as i64 - 1)
    }
    fn step(&self, j: i64) -> CMat {
        self.mats[(j - self.lo) as usize].clone()
    }
}

impl StepSeq {
    pub fn get(&self, j: i64) -> &CMat {
        &self.mats[(j - self.lo) as usize]
    }
}

fn require(src: &dyn StepSource, a: i64, b: i64) -> Result<()> {
    let (lo, hi) = src.range();
    if a < lo || b > hi {
        return Err(Error::InsufficientWindow { need_lo: a, need_hi: b + 1, have_lo: lo, have_hi: hi + 1 });
    }
    Ok(())
}

/// `M_{b} ⋯ M_a 1`, normalized to unit sup norm (empty product: `1`).
fn push_forward(src: &dyn StepSource, a: i64, b: i64) -> CVec {
    let mut v = ones(src.dim());
    for j in a..=b {
        v = src.step(j) * v;
        let s = sup_norm(&v);
        if s > 0.0 && s.is_finite() {
            v /= Complex64::new(s, 0.0);
        }
    }
    v
}

/// `m M_b ⋯ M_a` as a column of weights, normalized to unit sup norm.
fn pull_back(src: &dyn StepSource, a: i64, b: i64) -> CVec {
    let n = src.dim();
    let mut w = CVec::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    for j in (a..=b).rev() {
        w = src.step(j).transpose() * w;
        let s = sup_norm(&w);
        if s > 0.0 && s.is_finite() {
            w /= Complex64::new(s, 0.0);
        }
    }
    w
}

/// `ν(g) = Σ_i ν_i g_i` (bilinear, no conjugation).
#[inline]
pub fn apply(nu: &CVec, g: &CVec) -> Complex64 {
    nu.iter().zip(g.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub eigen: f64,
    pub dual: f64,
    pub normalization: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.eigen.max(self.dual).max(self.normalization)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpfTriplet {
    pub z: Complex64,
    pub lambda: Complex64,
    pub h: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    pub residuals: Residuals,
    pub back_len: usize,
    pub fwd_len: usize,
}

impl RpfTriplet {
    pub fn h_function(&self, alphabet: usize, depth: usize) -> Result<CylinderFunction> {
        CylinderFunction::new(alphabet, depth, self.h.clone())
    }
}

fn triplet_at(src: &dyn StepSource, z: Complex64, back: usize, fwd: usize) -> RpfTriplet {
    let (b, f) = (back as i64, fwd as i64);
    let h0 = push_forward(src, -b, -1);
    let h1 = push_forward(src, -b + 1, 0);
    let mut nu0 = pull_back(src, 0, f - 1);
    let mut nu1 = pull_back(src, 1, f);
    let s0 = nu0.sum();
    let s1 = nu1.sum();
    nu0 /= s0;
    nu1 /= s1;
    let h0 = &h0 / apply(&nu0, &h0);
    let h1 = &h1 / apply(&nu1, &h1);
    let m0 = src.step(0);
    let mh = &m0 * &h0;
    let lambda = apply(&nu1, &mh);
    let eigen = src.vec_norm(&(&mh - &h1 * lambda)) / (lambda.norm() * src.vec_norm(&h1)).max(f64::MIN_POSITIVE);
    let dual_vec = m0.transpose() * &nu1 - &nu0 * lambda;
    let dual = sup_norm(&dual_vec) / (lambda.norm() * sup_norm(&nu0)).max(f64::MIN_POSITIVE);
    let normalization = (nu0.sum() - ONE).norm() + (apply(&nu0, &h0) - ONE).norm();
    RpfTriplet {
        z,
        lambda,
        h: h0.iter().copied().collect(),
        nu: nu0.iter().copied().collect(),
        residuals: Residuals { eigen, dual, normalization },
        back_len: back,
        fwd_len: fwd,
    }
}

fn check_positive(t: &RpfTriplet) -> Result<()> {
    let tol = 1e-12;
    if t.lambda.re <= 0.0 || t.lambda.im.abs() > tol * t.lambda.norm() {
        return Err(Error::NonPositive(format!("eigenvalue {}", t.lambda)));
    }
    if let Some(v) = t.h.iter().find(|c| c.re <= 0.0 || c.im.abs() > tol * c.norm()) {
        return Err(Error::NonPositive(format!("eigenfunction entry {v}")));
    }
    if let Some(v) = t.nu.iter().find(|c| c.re < -tol || c.im.abs() > tol) {
        return Err(Error::NonPositive(format!("dual weight {v}")));
    }
    Ok(())
}

/// Solves at the origin of `src`, doubling the truncation lengths until every
/// residual drops below [`RPF_TOL`] or [`MAX_LEN`] (or the available range) is hit.
pub fn solve_rpf_steps(src: &dyn StepSource, z: Complex64, back_len: usize, fwd_len: usize) -> Result<RpfTriplet> {
    if back_len == 0 || fwd_len == 0 {
        return Err(Error::InvalidModel("truncation lengths must be positive".into()));
    }
    require(src, -(back_len as i64), fwd_len as i64)?;
    let (lo, hi) = src.range();
    let (mut b, mut f) = (back_len, fwd_len);
    loop {
        let t = triplet_at(src, z, b, f);
        let res = t.residuals.max();
        if res < RPF_TOL {
            if z.im == 0.0 {
                check_positive(&t)?;
            }
            return Ok(t);
        }
        let (nb, nf) = ((b * 2).min(MAX_LEN), (f * 2).min(MAX_LEN));
        let fits = -(nb as i64) >= lo && nf as i64 <= hi;
        if (nb == b && nf == f) || !fits || !res.is_finite() {
            return Err(Error::RpfNoConvergence { re: z.re, im: z.im, residual: res, len: b.max(f) });
        }
        b = nb;
        f = nf;
    }
}

/// Triplet of `L_z` at the window origin.
pub fn solve_rpf(window: &OmegaWindow, z: Complex64, back_len: usize, fwd_len: usize, pot: &PotentialTable, model: &FiberModel) -> Result<RpfTriplet> {
    let cache = SymbolCache::new(pot, model, z)?;
    solve_rpf_steps(&WindowSteps::new(&cache, window, pot, model), z, back_len, fwd_len)
}

/// Largest `b <= im_max` (to `tol`) such that the solver converges at
/// `re + i b'` for the probed `b' <= b`, found by bisection.
pub fn admissible_band(window: &OmegaWindow, re: f64, im_max: f64, tol: f64, pot: &PotentialTable, model: &FiberModel) -> Result<f64> {
    let ok = |b: f64| solve_rpf(window, Complex64::new(re, b), DEFAULT_LEN, DEFAULT_LEN, pot, model).is_ok();
    if !ok(0.0) {
        return Ok(0.0);
    }
    if ok(im_max) {
        return Ok(im_max);
    }
    let (mut lo, mut hi) = (0.0, im_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) { lo = mid } else { hi = mid }
    }
    Ok(lo)
}

/// Triplets along `lo ..= hi`: `h_j, ν_j` for `j in lo ..= hi + 1`, `λ_j` for
/// `j in lo ..= hi`, with `M_j h_j = λ_j h_{j+1}` exact up to rounding.
#[derive(Debug, Clone)]
pub struct OrbitRpf {
    pub lo: i64,
    pub h: Vec<CVec>,
    pub nu: Vec<CVec>,
    pub lambda: Vec<Complex64>,
    pub len: usize,
}

impl OrbitRpf {
    pub fn hi(&self) -> i64 {
        self.lo + self.lambda.len() as i64 - 1
    }
    pub fn h(&self, j: i64) -> &CVec {
        &self.h[(j - self.lo) as usize]
    }
    pub fn nu(&self, j: i64) -> &CVec {
        &self.nu[(j - self.lo) as usize]
    }
    pub fn lambda(&self, j: i64) -> Complex64 {
        self.lambda[(j - self.lo) as usize]
    }
    /// `max_j ‖ν_{j+1} M_j − λ_j ν_j‖ / |λ_j|`.
    pub fn dual_residual(&self, src: &dyn StepSource) -> f64 {
        (self.lo..=self.hi())
            .map(|j| {
                let r = src.step(j).transpose() * self.nu(j + 1) - self.nu(j) * self.lambda(j);
                sup_norm(&r) / (self.lambda(j).norm() * sup_norm(self.nu(j)))
            })
            .fold(0.0, f64::max)
    }
}

/// Window needed by [`orbit_rpf`] in step indices.
pub fn orbit_requirement(lo: i64, hi: i64, len: usize) -> (i64, i64) {
    (lo - len as i64, hi + len as i64)
}

pub fn orbit_rpf(src: &dyn StepSource, lo: i64, hi: i64, len: usize) -> Result<OrbitRpf> {
    if hi < lo - 1 {
        return Err(Error::InvalidBounds { lo, hi });
    }
    let (a, b) = orbit_requirement(lo, hi, len);
    require(src, a, b)?;
    let count = (hi - lo + 2) as usize;
    let mut h = Vec::with_capacity(count);
    let mut v = push_forward(src, a, lo - 1);
    h.push(v.clone());
    let mut mats = Vec::with_capacity(count - 1);
    for j in lo..=hi {
        let m = src.step(j);
        v = &m * v;
        let s = sup_norm(&v);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Numerical(format!("forward sweep degenerated at step {j}")));
        }
        v /= Complex64::new(s, 0.0);
        h.push(v.clone());
        mats.push(m);
    }
    let mut nu = vec![CVec::zeros(0); count];
    let mut w = pull_back(src, hi + 1, b);
    nu[count - 1] = w.clone();
    for j in (lo..=hi).rev() {
        w = mats[(j - lo) as usize].transpose() * w;
        let s = sup_norm(&w);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Numerical(format!("backward sweep degenerated at step {j}")));
        }
        w /= Complex64::new(s, 0.0);
        nu[(j - lo) as usize] = w.clone();
    }
    for k in 0..count {
        let s = nu[k].sum();
        nu[k] /= s;
        let p = apply(&nu[k], &h[k]);
        h[k] /= p;
    }
    let lambda = (0..count - 1).map(|k| apply(&nu[k + 1], &(&mats[k] * &h[k]))).collect();
    Ok(OrbitRpf { lo, h, nu, lambda, len })
}

fn check_orbit0(orbit0: &OrbitRpf, lo: i64, hi: i64) -> Result<()> {
    if lo < orbit0.lo || hi > orbit0.hi() {
        return Err(Error::InsufficientWindow { need_lo: lo, need_hi: hi + 1, have_lo: orbit0.lo, have_hi: orbit0.hi() + 1 });
    }
    for j in lo..=hi + 1 {
        let min = orbit0.h(j).iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonpositiveEigenfunction(min));
        }
    }
    for j in lo..=hi {
        let l = orbit0.lambda(j);
        if l.norm() == 0.0 || !l.re.is_finite() {
            return Err(Error::ZeroEigenvalue);
        }
    }
    Ok(())
}

fn normalize_with(m: &CMat, h_here: &CVec, h_next: &CVec, lambda: Complex64) -> CMat {
    let dim = m.nrows();
    CMat::from_fn(dim, dim, |i, k| m[(i, k)] * h_here[k].re / (lambda.re * h_next[i].re))
}

/// `A_j = diag(1/(λ_j(0) h_{j+1}(0))) M_j diag(h_j(0))` for `j in lo ..= hi`.
pub fn normalized_steps(src: &dyn StepSource, orbit0: &OrbitRpf, lo: i64, hi: i64) -> Result<StepSeq> {
    check_orbit0(orbit0, lo, hi)?;
    require(src, lo, hi)?;
    let mats = (lo..=hi).map(|j| normalize_with(&src.step(j), orbit0.h(j), orbit0.h(j + 1), orbit0.lambda(j))).collect();
    Ok(StepSeq { lo, mats })
}

pub fn normalized_jets(src: &dyn JetSource, orbit0: &OrbitRpf, lo: i64, hi: i64) -> Result<Vec<JetMat>> {
    check_orbit0(orbit0, lo, hi)?;
    Ok((lo..=hi)
        .map(|j| {
            let jm = src.jet_step(j);
            let (a, b, l) = (orbit0.h(j), orbit0.h(j + 1), orbit0.lambda(j));
            JetMat { m: jm.m.map(|m| normalize_with(&m, a, b, l)) }
        })
        .collect())
}

/// Everything downstream needs for one ω: the `z = 0` orbit and the normalized
/// steps `A_j(0)` on `lo ..= hi`.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub orbit0: OrbitRpf,
    pub steps: StepSeq,
}

/// Solves at `z = 0` on `lo ..= hi` with margin `len` and normalizes.
pub fn normalize_range(src0: &dyn StepSource, lo: i64, hi: i64, len: usize) -> Result<Normalized> {
    let orbit0 = orbit_rpf(src0, lo, hi, len)?;
    for j in lo..=hi + 1 {
        if let Some(bad) = orbit0.h(j).iter().chain(orbit0.nu(j).iter()).find(|c| c.re < 0.0 || c.im != 0.0) {
            return Err(Error::NonPositive(format!("z = 0 triplet entry {bad} at index {j}")));
        }
    }
    let steps = normalized_steps(src0, &orbit0, lo, hi)?;
    Ok(Normalized { orbit0, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c_fit: f64,
    pub constant: f64,
    pub r_squared: f64,
    /// `(n, e_n)` for every probed `n`.
    pub errors: Vec<(usize, f64)>,
    pub fitted_points: usize,
    /// Absolute level below which errors were excluded from the fit.
    pub floor: f64,
}

/// `e_n = ‖A^{n} q / λ_n − ν_0(q) h_n‖` for the cocycle `steps`, fitted as `C c^n`.
/// `q` is given as a vector in the cocycle's function space.
pub fn exp_convergence_steps(steps: &dyn StepSource, q: &CVec, n_list: &[usize], len: usize) -> Result<DecayFit> {
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let orbit = orbit_rpf(steps, 0, n_max as i64, len)?;
    let coef = apply(orbit.nu(0), q);
    let mut cur = q.clone();
    let mut errors = Vec::with_capacity(n_list.len());
    let scale = steps.vec_norm(q).max(f64::MIN_POSITIVE);
    for n in 0..=n_max {
        if n_list.contains(&n) {
            let e = steps.vec_norm(&(&cur - orbit.h(n as i64) * coef));
            errors.push((n, e));
        }
        if n < n_max {
            cur = steps.step(n as i64) * cur / orbit.lambda(n as i64);
        }
    }
    let floor = NOISE_FLOOR * scale;
    let pts: Vec<(f64, f64)> = errors.iter().filter(|(_, e)| *e > floor).map(|&(n, e)| (n as f64, e.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(floor));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (a, b, r2) = linear_fit(&x, &y);
    Ok(DecayFit { c_fit: b.exp(), constant: a.exp(), r_squared: r2, errors, fitted_points: pts.len(), floor })
}

/// Fits the ω-averaged `log e_n` of several per-window probes sharing one
/// `n` grid, over the `n` where every window is still above its noise floor.
pub fn exp_convergence_ensemble(fits: &[DecayFit]) -> Result<DecayFit> {
    let first = fits.first().ok_or(Error::DegenerateFit(NOISE_FLOOR))?;
    let mut errors = Vec::new();
    let mut pts = Vec::new();
    for (k, &(n, _)) in first.errors.iter().enumerate() {
        if fits.iter().any(|f| f.errors.get(k).map(|e| e.0) != Some(n)) {
            return Err(Error::InvalidGrid);
        }
        let above = fits.iter().all(|f| f.errors[k].1 > f.floor);
        let mean_log = fits.iter().map(|f| f.errors[k].1.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / fits.len() as f64;
        errors.push((n, mean_log.exp()));
        if above {
            pts.push((n as f64, mean_log));
        }
    }
    let floor = fits.iter().map(|f| f.floor).fold(0.0, f64::max);
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(floor));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let (a, b, r2) = linear_fit(&x, &y);
    Ok(DecayFit { c_fit: b.exp(), constant: a.exp(), r_squared: r2, errors, fitted_points: pts.len(), floor })
}

/// Builds the normalized `A_z` cocycle on `lo ..= hi` for the symbolic model.
pub fn normalized_at(
    window: &OmegaWindow,
    z: Complex64,
    lo: i64,
    hi: i64,
    len: usize,
    pot: &PotentialTable,
    model: &FiberModel,
) -> Result<(StepSeq, Normalized)> {
    let cache0 = SymbolCache::new(pot, model, ZERO)?;
    let src0 = WindowSteps::new(&cache0, window, pot, model);
    let norm = normalize_range(&src0, lo, hi, len)?;
    let cz = SymbolCache::new(pot, model, z)?;
    let srcz = WindowSteps::new(&cz, window, pot, model);
    let az = normalized_steps(&srcz, &norm.orbit0, lo, hi)?;
    Ok((az, norm))
}

/// Wraps a [`StepSeq`] with the symbolic Hölder norm.
pub struct HolderSteps<'a> {
    pub seq: &'a StepSeq,
    pub model: &'a FiberModel,
}

impl StepSource for HolderSteps<'_> {
    fn dim(&self) -> usize {
        self.seq.dim()
    }
    fn range(&self) -> (i64, i64) {
        self.seq.range()
    }
    fn step(&self, j: i64) -> CMat {
        self.seq.step(j)
    }
    fn vec_norm(&self, v: &CVec) -> f64 {
        vector_norm(v, self.model.alphabet, self.model.depth - 1, self.model.alpha)
    }
}

pub fn exp_convergence_probe(
    window: &OmegaWindow,
    z: Complex64,
    q: &CylinderFunction,
    n_list: &[usize],
    pot: &PotentialTable,
    model: &FiberModel,
) -> Result<DecayFit> {
    let n_max = n_list.iter().copied().max().unwrap_or(0) as i64;
    let len = DEFAULT_LEN;
    let (az, _) = normalized_at(window, z, -(len as i64), n_max + len as i64, len, pot, model)?;
    let qv = CVec::from_vec(crate::fiber::extend_depth(q, model.depth - 1)?.into_values());
    exp_convergence_steps(&HolderSteps { seq: &az, model }, &qv, n_list, len)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub k: usize,
    pub t: Vec<f64>,
    /// `Π_{ω,k}(it)` on the grid.
    pub values: Vec<Complex64>,
    /// Largest `|e^{Π} − λ_{ω,k}|/|λ_{ω,k}|` with `λ_{ω,k}` recomputed from the product.
    pub consistency: f64,
    /// Grid points where `|Π| > k (ln 2 + π)`.
    pub bound_violations: Vec<f64>,
    /// `(grid index, factor index, winding)` for every nonzero winding.
    pub windings: Vec<(usize, usize, i64)>,
    pub d1: f64,
    pub d2: f64,
}

/// `Π_{ω,k}(it)` with each `log λ_j(it)` continued along the grid from `t = 0`.
pub fn pressure_curve_steps<'a>(
    src0: &dyn StepSource,
    src_at: &dyn Fn(f64) -> Result<Box<dyn StepSource + 'a>>,
    jets: &dyn JetSource,
    k: usize,
    t_grid: &[f64],
    len: usize,
) -> Result<PressureCurve> {
    let origin = t_grid.iter().position(|&t| t == 0.0).ok_or(Error::InvalidGrid)?;
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid);
    }
    let hi = k as i64 - 1;
    let norm = normalize_range(src0, -(len as i64), hi + len as i64, len)?;
    let mut lambdas: Vec<Vec<Complex64>> = vec![Vec::new(); t_grid.len()];
    let mut consistency: f64 = 0.0;
    for (gi, &t) in t_grid.iter().enumerate() {
        let raw = src_at(t)?;
        let steps = normalized_steps(raw.as_ref(), &norm.orbit0, -(len as i64), hi + len as i64)?;
        let orbit = orbit_rpf(&steps, 0, hi, DEFAULT_LEN.min(len))?;
        lambdas[gi] = orbit.lambda.clone();
        if k > 0 {
            // k-step eigenvalue from the product itself: ν_k(A^k h_0).
            let mut v = orbit.h(0).clone();
            for j in 0..k as i64 {
                v = steps.get(j) * v;
            }
            let direct = apply(orbit.nu(k as i64), &v);
            let prod: Complex64 = orbit.lambda.iter().product();
            consistency = consistency.max((direct - prod).norm() / prod.norm().max(f64::MIN_POSITIVE));
        }
    }
    let mut logs = vec![vec![ZERO; k]; t_grid.len()];
    let mut windings = Vec::new();
    for j in 0..k {
        logs[origin][j] = lambdas[origin][j].ln();
        for dir in [1i64, -1] {
            let mut prev = logs[origin][j];
            let mut gi = origin as i64 + dir;
            while gi >= 0 && (gi as usize) < t_grid.len() {
                let g = gi as usize;
                let l = lambdas[g][j].ln();
                let mut im = l.im;
                let jump = (im - prev.im).rem_euclid(2.0 * PI);
                let jump = if jump > PI { jump - 2.0 * PI } else { jump };
                if jump.abs() > PI / 2.0 {
                    return Err(Error::BranchAmbiguity { t: t_grid[g], jump });
                }
                let target = prev.im + jump;
                let w = ((target - im) / (2.0 * PI)).round() as i64;
                im += 2.0 * PI * w as f64;
                if w != 0 {
                    windings.push((g, j, w));
                }
                let cur = Complex64::new(l.re, im);
                logs[g][j] = cur;
                prev = cur;
                gi += dir;
            }
        }
    }
    let values: Vec<Complex64> = logs.iter().map(|row| row.iter().sum()).collect();
    let bound = k as f64 * (2f64.ln() + PI);
    let bound_violations = t_grid.iter().zip(&values).filter(|(_, v)| v.norm() > bound).map(|(&t, _)| t).collect();
    let (d1, d2) = pressure_derivatives_from(jets, &norm.orbit0, k, len)?;
    Ok(PressureCurve { k, t: t_grid.to_vec(), values, consistency, bound_violations, windings, d1, d2 })
}

/// `Π'_{ω,k}(0)` and `Π''_{ω,k}(0)` by jet propagation. `orbit0` must cover
/// `-2 len ..= k + 2 len`.
pub fn pressure_derivatives_from(jets: &dyn JetSource, orbit0: &OrbitRpf, k: usize, len: usize) -> Result<(f64, f64)> {
    let w = len as i64;
    let k = k as i64;
    let steps = normalized_jets(jets, orbit0, -w, k + w - 1)?;
    let at = |j: i64| &steps[(j + w) as usize];
    let dim = steps[0].m[0].nrows();
    let m = CVec::from_element(dim, Complex64::new(1.0 / dim as f64, 0.0));
    let mut ledger = 0.0;
    let run = |mut v: JetVec, a: i64, b: i64, ledger: &mut f64| -> Result<JetVec> {
        for j in a..b {
            v = at(j).apply(&v);
            let s = v.value_sup();
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::JetOverflow);
            }
            v.rescale(s);
            *ledger += s.ln();
        }
        Ok(v)
    };
    let one = JetVec::constant(ones(dim));
    let big_h = run(one.clone(), -w, 0, &mut ledger)?;
    let pk = run(big_h.clone(), 0, k, &mut ledger)?;
    let a = run(pk, k, k + w, &mut ledger)?.weigh(&m);
    let b = run(one.clone(), k, k + w, &mut ledger)?.weigh(&m);
    let c = run(big_h, 0, w, &mut ledger)?.weigh(&m);
    let e = run(one, 0, w, &mut ledger)?.weigh(&m);
    let pi: Jet2 = a.ln() - b.ln() - c.ln() + e.ln();
    if !pi.is_finite() {
        return Err(Error::JetOverflow);
    }
    Ok((pi.first.re, pi.second.re))
}

pub fn pressure_derivatives(window: &OmegaWindow, k: usize, pot: &PotentialTable, model: &FiberModel) -> Result<(f64, f64)> {
    let len = DEFAULT_LEN;
    let cache0 = SymbolCache::new(pot, model, ZERO)?;
    let src0 = WindowSteps::new(&cache0, window, pot, model);
    let orbit0 = orbit_rpf(&src0, -(len as i64), k as i64 + len as i64, len)?;
    pressure_derivatives_from(&src0, &orbit0, k, len)
}

pub fn pressure_curve(window: &OmegaWindow, k: usize, t_grid: &[f64], pot: &PotentialTable, model: &FiberModel) -> Result<PressureCurve> {
    let cache0 = SymbolCache::new(pot, model, ZERO)?;
    let src0 = WindowSteps::new(&cache0, window, pot, model);
    let caches: Vec<SymbolCache> =
        t_grid.iter().map(|&t| SymbolCache::new(pot, model, Complex64::new(0.0, t))).collect::<Result<_>>()?;
    let at = |t: f64| -> Result<Box<dyn StepSource + '_>> {
        let i = t_grid.iter().position(|&x| x == t).expect("grid point");
        Ok(Box::new(WindowSteps::new(&caches[i], window, pot, model)))
    };
    pressure_curve_steps(&src0, &at, &src0, k, t_grid, DEFAULT_LEN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{build_markov_base, sample_base_path, BaseSymbolChain};
    use crate::fiber::{random_potentials, Normalization};
    use crate::linalg::inf_norm;

    fn chain() -> BaseSymbolChain {
        build_markov_base(&[vec![0.6, 0.4], vec![0.3, 0.7]], 1e-12).unwrap()
    }

    fn scalar() -> (FiberModel, PotentialTable) {
        let m = FiberModel::new(2, 1).unwrap();
        let l = -(2f64.ln());
        (m, PotentialTable::new(&m, vec![vec![l, l]], vec![vec![1.0, -1.0]], Some(1.0)).unwrap())
    }

    #[test]
    fn maximal_entropy_triplet() {
        let m = FiberModel::new(2, 3).unwrap();
        let l = -(2f64.ln());
        let p = PotentialTable::new(&m, vec![vec![l; 8]; 2], vec![vec![0.0; 8]; 2], None).unwrap();
        let w = sample_base_path(&chain(), -200, 200, 1).unwrap();
        let t = solve_rpf(&w, ZERO, 64, 64, &p, &m).unwrap();
        assert!((t.lambda - ONE).norm() < 1e-12);
        assert!(t.h.iter().all(|c| (c - ONE).norm() < 1e-12));
        assert!(t.nu.iter().all(|c| (c.re - 0.25).abs() < 1e-12));
        assert!(t.residuals.max() < 1e-12);
    }

    #[test]
    fn column_normalized_gives_reference_functional() {
        let m = FiberModel::new(3, 3).unwrap();
        let p = random_potentials(&m, 2, Normalization::Column, 6).unwrap();
        let w = sample_base_path(&chain(), -300, 300, 2).unwrap();
        let t = solve_rpf(&w, ZERO, 64, 64, &p, &m).unwrap();
        assert!((t.lambda - ONE).norm() < 1e-9);
        assert!(t.nu.iter().all(|c| (c.re - 1.0 / 9.0).abs() < 1e-9));
        assert!(t.residuals.max() < 1e-9);
    }

    #[test]
    fn scalar_eigenvalue_closed_form() {
        let m = FiberModel::new(2, 1).unwrap();
        let p = PotentialTable::new(&m, vec![vec![0.3, -0.8]], vec![vec![1.5, -0.25]], None).unwrap();
        let w = OmegaWindow::constant(0, -100, 100).unwrap();
        let z = Complex64::new(0.0, 0.7);
        let t = solve_rpf(&w, z, 64, 64, &p, &m).unwrap();
        let want = (Complex64::new(0.3, 0.0) + z * 1.5).exp() + (Complex64::new(-0.8, 0.0) + z * -0.25).exp();
        assert!((t.lambda - want).norm() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let (m, p) = scalar();
        let w = OmegaWindow::constant(0, -10, 10).unwrap();
        assert!(matches!(solve_rpf(&w, ZERO, 64, 64, &p, &m), Err(Error::InsufficientWindow { .. })));
    }

    #[test]
    fn orbit_relations_hold() {
        let m = FiberModel::new(2, 3).unwrap();
        let p = random_potentials(&m, 2, Normalization::Raw, 9).unwrap();
        let w = sample_base_path(&chain(), -200, 300, 3).unwrap();
        let cache = SymbolCache::new(&p, &m, ZERO).unwrap();
        let src = WindowSteps::new(&cache, &w, &p, &m);
        let orbit = orbit_rpf(&src, 0, 50, 64).unwrap();
        assert!(orbit.dual_residual(&src) < 1e-9);
        for j in 0..=50 {
            let r = src.step(j) * orbit.h(j) - orbit.h(j + 1) * orbit.lambda(j);
            assert!(sup_norm(&r) < 1e-12 * orbit.lambda(j).norm());
        }
        let t = solve_rpf(&w, ZERO, 64, 64, &p, &m).unwrap();
        assert!((t.lambda - orbit.lambda(0)).norm() < 1e-9 * t.lambda.norm());
        // Normalized steps are stochastic.
        let norm = normalize_range(&src, 0, 50, 64).unwrap();
        for j in 0..=50 {
            let one = norm.steps.get(j) * ones(4);
            assert!(one.iter().all(|c| (c - ONE).norm() < 1e-12));
            assert!(norm.steps.get(j).iter().all(|c| c.re >= 0.0));
        }
    }

    #[test]
    fn real_z_requires_positivity() {
        let (m, p) = scalar();
        let w = OmegaWindow::constant(0, -100, 100).unwrap();
        // cos(π) = -1 at z = iπ is not real-positive but also not a real z;
        // a real z gives a positive eigenvalue.
        assert!(solve_rpf(&w, Complex64::new(0.5, 0.0), 8, 8, &p, &m).is_ok());
    }

    #[test]
    fn exp_convergence_cases() {
        let (m, p) = scalar();
        let w = OmegaWindow::constant(0, -200, 200).unwrap();
        let q = CylinderFunction::constant(2, Complex64::new(3.0, 1.0));
        let r = exp_convergence_probe(&w, ZERO, &q, &[1, 2, 3, 4], &p, &m);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));

        let m3 = FiberModel::new(2, 3).unwrap();
        let p3 = random_potentials(&m3, 2, Normalization::Raw, 17).unwrap();
        let w3 = sample_base_path(&chain(), -300, 300, 5).unwrap();
        let t = solve_rpf(&w3, ZERO, 64, 64, &p3, &m3).unwrap();
        // Along the eigen-direction the error is zero.
        let (az, _) = normalized_at(&w3, ZERO, -64, 94, 64, &p3, &m3).unwrap();
        let orbit = orbit_rpf(&az, 0, 30, 64).unwrap();
        let r = exp_convergence_steps(&HolderSteps { seq: &az, model: &m3 }, orbit.h(0), &[2, 5, 10], 64);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
        let _ = t;
        let g = CylinderFunction::from_real(2, 2, &[1.0, -2.0, 0.5, 3.0]).unwrap();
        let n_list: Vec<usize> = (2..=30).collect();
        let fits: Vec<DecayFit> = (0..24)
            .map(|i| {
                let w = sample_base_path(&chain(), -200, 200, 50 + i).unwrap();
                exp_convergence_probe(&w, ZERO, &g, &n_list, &p3, &m3).unwrap()
            })
            .collect();
        assert!(fits.iter().all(|f| f.c_fit < 1.0));
        let fit = exp_convergence_ensemble(&fits).unwrap();
        assert!(fit.c_fit < 1.0 && fit.r_squared > 0.99, "{fit:?}");
    }

    #[test]
    fn scalar_pressure() {
        let (m, p) = scalar();
        let w = OmegaWindow::constant(0, -300, 300).unwrap();
        let k = 7;
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.12).collect();
        let pc = pressure_curve(&w, k, &grid, &p, &m).unwrap();
        for (t, v) in pc.t.iter().zip(&pc.values) {
            assert!((v.re - k as f64 * t.cos().ln()).abs() < 1e-12, "t={t}");
            assert!(v.im.abs() < 1e-12);
        }
        assert!(pc.values[10].norm() < 1e-15);
        assert!(pc.bound_violations.is_empty());
        assert!((pc.d1).abs() < 1e-12 && (pc.d2 - k as f64).abs() < 1e-10);
        assert!(pc.consistency < 1e-9);
        assert!(matches!(pressure_curve(&w, k, &[0.1, 0.2], &p, &m), Err(Error::InvalidGrid)));
    }

    #[test]
    fn branch_ambiguity_detected() {
        let m = FiberModel::new(2, 1).unwrap();
        let p = PotentialTable::new(&m, vec![vec![0.0, -30.0]], vec![vec![1.0, 0.0]], None).unwrap();
        let w = OmegaWindow::constant(0, -300, 300).unwrap();
        // λ(it) ≈ e^{it}: a grid step of 2 rad exceeds π/2.
        let r = pressure_curve(&w, 1, &[0.0, 2.0], &p, &m);
        assert!(matches!(r, Err(Error::BranchAmbiguity { .. })));
        // Fine grid: continuous log unwinds past π.
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.2).collect();
        let pc = pressure_curve(&w, 1, &grid, &p, &m).unwrap();
        assert!((pc.values[40].im - 8.0).abs() < 1e-9);
        assert!(!pc.windings.is_empty());
    }

    #[test]
    fn zero_observable_has_flat_pressure() {
        let m = FiberModel::new(2, 2).unwrap();
        let mut p = random_potentials(&m, 2, Normalization::Raw, 4).unwrap();
        p.u = vec![vec![0.0; 4]; 2];
        let w = sample_base_path(&chain(), -300, 300, 7).unwrap();
        let (d1, d2) = pressure_derivatives(&w, 10, &p, &m).unwrap();
        assert!(d1.abs() < 1e-14 && d2.abs() < 1e-14);
    }

    #[test]
    fn jet_derivative_matches_finite_differences() {
        let m = FiberModel::new(2, 2).unwrap();
        let p = random_potentials(&m, 2, Normalization::Raw, 31).unwrap();
        let w = sample_base_path(&chain(), -400, 400, 8).unwrap();
        let k = 12;
        let grid = [-2e-3, -1e-3, 0.0, 1e-3, 2e-3];
        let pc = pressure_curve(&w, k, &grid, &p, &m).unwrap();
        // Π(it) ≈ i t Π'(0) − t² Π''(0)/2.
        let fd1 = (pc.values[3] - pc.values[1]).im / 2e-3;
        let fd1b = (pc.values[4] - pc.values[0]).im / 4e-3;
        assert!((fd1 - pc.d1).abs() < 1e-5, "{fd1} vs {}", pc.d1);
        // Error shrinks by ≈ 4 when the step halves.
        assert!((fd1 - pc.d1).abs() <= (fd1b - pc.d1).abs() + 1e-9);
        let fd2 = -(pc.values[3] + pc.values[1] - 2.0 * pc.values[2]).re / 1e-6;
        assert!((fd2 - pc.d2).abs() < 1e-3 * pc.d2.abs().max(1.0), "{fd2} vs {}", pc.d2);
    }

    #[test]
    fn gauge_invariance_under_window_enlargement() {
        let m = FiberModel::new(2, 3).unwrap();
        let p = random_potentials(&m, 2, Normalization::Raw, 13).unwrap();
        let w = sample_base_path(&chain(), -600, 600, 9).unwrap();
        let z = Complex64::new(0.0, 0.8);
        let norms: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&len| {
                let (az, _) = normalized_at(&w, z, 0, 19, len, &p, &m).unwrap();
                let mut v = ones(4);
                for j in 0..20 {
                    v = az.get(j) * v;
                }
                sup_norm(&v)
            })
            .collect();
        assert!((norms[0] - norms[1]).abs() < 1e-10);
        let (az, norm) = normalized_at(&w, z, -64, 84, 64, &p, &m).unwrap();
        let prod = (0..20).fold(CMat::identity(4, 4), |acc, j| az.get(j) * acc);
        // |λ_{ω,n}| <= ‖ν_n‖_1 ‖h_0‖_∞ ‖A^{ω,n}‖_∞ with the A-triplet at it.
        let orbit = orbit_rpf(&az, 0, 19, 64).unwrap();
        let lam: Complex64 = orbit.lambda.iter().product();
        let nu1: f64 = orbit.nu(20).iter().map(|c| c.norm()).sum();
        assert!(lam.norm() <= nu1 * sup_norm(orbit.h(0)) * inf_norm(&prod) + 1e-12);
        let _ = norm;
    }
}
