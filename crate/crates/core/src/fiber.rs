//! The fiber: the one-sided full shift on `d` letters, with locally constant
//! potentials depending on the first `r` coordinates.
//!
//! Words over `A^k` are indexed lexicographically with `w_0` most significant,
//! so a depth-`k` function is a plain array of length `d^k`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const LATTICE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberModel {
    pub alphabet: usize,
    pub depth: usize,
    /// `ρ(x, x') = metric_base^{-min{i : x_i != x'_i}}`.
    pub metric_base: f64,
    pub xi: f64,
    pub alpha: f64,
}

impl FiberModel {
    pub fn new(alphabet: usize, depth: usize) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidModel(format!("alphabet size must be at least 2 (got {alphabet})")));
        }
        if depth < 1 {
            return Err(Error::InvalidModel("potential depth must be at least 1".into()));
        }
        Ok(FiberModel { alphabet, depth, metric_base: 2.0, xi: 0.5, alpha: 1.0 })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_metric_base(mut self, base: f64) -> Result<Self> {
        if !(base > 1.0) || !base.is_finite() {
            return Err(Error::InvalidModel(format!("metric base must exceed 1 (got {base})")));
        }
        self.metric_base = base;
        Ok(self)
    }

    /// Dimension of the space transfer operators act on: `d^{r-1}`.
    pub fn function_dim(&self) -> usize {
        self.alphabet.pow(self.depth as u32 - 1)
    }

    /// Number of depth-`r` words.
    pub fn word_count(&self) -> usize {
        self.alphabet.pow(self.depth as u32)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

pub fn word_index(word: &[usize], d: usize) -> usize {
    word.iter().fold(0, |acc, &a| acc * d + a)
}

pub fn word_of(mut index: usize, k: usize, d: usize) -> Vec<usize> {
    let mut w = vec![0; k];
    for slot in w.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub xi: f64,
    pub gamma: f64,
    pub multiplicity: usize,
    pub n_omega: usize,
    /// `T^{n_ω}` maps every ξ-ball onto the whole fiber.
    pub covering_holds: bool,
    /// Each of the `d` inverse branches contracts distances by exactly `1/γ`.
    pub pairing_holds: bool,
}

/// Checks the covering and pairing properties by enumerating cylinders.
pub fn verify_expanding_axioms(model: &FiberModel) -> AxiomReport {
    let d = model.alphabet;
    let b = model.metric_base;
    // Smallest m with b^{-m} < ξ: balls of radius ξ are depth-m cylinders.
    let mut m = 0usize;
    while b.powi(-(m as i32)) >= model.xi {
        m += 1;
    }
    let n_omega = m;
    // Covering: every target word of length L has a preimage under T^m inside
    // every depth-m cylinder; with the full shift the preimage is prefix·target.
    let probe_len = 3;
    let mut covering = true;
    for c in 0..d.pow(m as u32) {
        let prefix = word_of(c, m, d);
        for t in 0..d.pow(probe_len) {
            let target = word_of(t, probe_len as usize, d);
            let mut pre = prefix.clone();
            pre.extend_from_slice(&target);
            covering &= pre[m..] == target[..] && pre[..m] == prefix[..];
        }
    }
    // Pairing: for x, x' agreeing on m coordinates and each letter a, compare
    // ρ(a·x, a·x') with ρ(x, x')/γ.
    let dist = |x: &[usize], y: &[usize]| -> f64 {
        match x.iter().zip(y).position(|(p, q)| p != q) {
            Some(i) => b.powi(-(i as i32)),
            None => 0.0,
        }
    };
    let len = m + 2;
    let mut pairing = true;
    for i in 0..d.pow(len as u32) {
        for j in 0..d.pow(len as u32) {
            let (x, y) = (word_of(i, len, d), word_of(j, len, d));
            if x[..m] != y[..m] {
                continue;
            }
            for a in 0..d {
                let mut ax = vec![a];
                ax.extend_from_slice(&x);
                let mut ay = vec![a];
                ay.extend_from_slice(&y);
                pairing &= (dist(&ax, &ay) - dist(&x, &y) / b).abs() <= 1e-15;
            }
        }
    }
    AxiomReport { xi: model.xi, gamma: b, multiplicity: d, n_omega, covering_holds: covering, pairing_holds: pairing }
}

/// A complex function of the first `depth` fiber coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    alphabet: usize,
    depth: usize,
    values: Vec<Complex64>,
}

impl CylinderFunction {
    pub fn new(alphabet: usize, depth: usize, values: Vec<Complex64>) -> Result<Self> {
        let expected = alphabet.pow(depth as u32);
        if values.len() != expected {
            return Err(Error::DepthMismatch(format!(
                "depth-{depth} function over {alphabet} letters needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(CylinderFunction { alphabet, depth, values })
    }

    pub fn from_real(alphabet: usize, depth: usize, values: &[f64]) -> Result<Self> {
        Self::new(alphabet, depth, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn constant(alphabet: usize, c: Complex64) -> Self {
        CylinderFunction { alphabet, depth: 0, values: vec![c] }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Value at any word of length at least `depth`.
    pub fn eval(&self, word: &[usize]) -> Complex64 {
        self.values[word_index(&word[..self.depth], self.alphabet)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `(sup norm, Hölder seminorm, total)` with `ξ = 1/2`: pairs sharing a prefix
/// of length `m >= 2` and differing at `m` contribute `|g(w) - g(w')| 2^{αm}`.
pub fn holder_norm(g: &CylinderFunction, alpha: f64, xi: f64) -> Result<(f64, f64, f64)> {
    if xi != 0.5 {
        return Err(Error::UnsupportedXi(xi));
    }
    check_alpha(alpha)?;
    let sup = g.sup_norm();
    let semi = holder_seminorm_values(&g.values, g.alphabet, g.depth, alpha);
    Ok((sup, semi, sup + semi))
}

/// Seminorm on a raw value array; shared with operator-norm computations.
pub(crate) fn holder_seminorm_values(values: &[Complex64], d: usize, depth: usize, alpha: f64) -> f64 {
    let mut semi: f64 = 0.0;
    for m in 2..depth {
        let weight = 2f64.powf(alpha * m as f64);
        let block = d.pow((depth - m) as u32);
        let sub = block / d;
        for start in (0..values.len()).step_by(block) {
            let chunk = &values[start..start + block];
            for a in 0..d {
                for b in a + 1..d {
                    for x in &chunk[a * sub..(a + 1) * sub] {
                        for y in &chunk[b * sub..(b + 1) * sub] {
                            semi = semi.max((x - y).norm() * weight);
                        }
                    }
                }
            }
        }
    }
    semi
}

/// Re-expresses `g` at a larger depth by ignoring the added coordinates.
pub fn extend_depth(g: &CylinderFunction, k_new: usize) -> Result<CylinderFunction> {
    if k_new < g.depth {
        return Err(Error::DepthShrink { from: g.depth, to: k_new });
    }
    let factor = g.alphabet.pow((k_new - g.depth) as u32);
    let values = (0..g.alphabet.pow(k_new as u32)).map(|i| g.values[i / factor]).collect();
    Ok(CylinderFunction { alphabet: g.alphabet, depth: k_new, values })
}

/// Locally constant potential tables indexed `[base symbol][depth-r word]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub phi: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub lattice_h: Option<f64>,
    /// Optional fiber-independent term `c[ω_0][ω_1]` added to `u_ω`.
    pub base_pair: Option<Vec<Vec<f64>>>,
}

impl PotentialTable {
    pub fn new(model: &FiberModel, phi: Vec<Vec<f64>>, u: Vec<Vec<f64>>, lattice_h: Option<f64>) -> Result<Self> {
        let t = PotentialTable { phi, u, lattice_h, base_pair: None };
        t.validate(model)?;
        Ok(t)
    }

    pub fn with_base_pair(mut self, model: &FiberModel, pair: Vec<Vec<f64>>) -> Result<Self> {
        self.base_pair = Some(pair);
        self.validate(model)?;
        Ok(self)
    }

    pub fn symbols(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self, model: &FiberModel) -> Result<()> {
        let words = model.word_count();
        if self.phi.is_empty() {
            return Err(Error::InvalidPotential("no base symbols".into()));
        }
        if self.u.len() != self.phi.len() {
            return Err(Error::InvalidPotential(format!(
                "phi covers {} base symbols but u covers {}",
                self.phi.len(),
                self.u.len()
            )));
        }
        for (name, table) in [("phi", &self.phi), ("u", &self.u)] {
            for (s, row) in table.iter().enumerate() {
                if row.len() != words {
                    return Err(Error::DepthMismatch(format!(
                        "{name}[{s}] has {} entries; depth {} over {} letters needs {words}",
                        row.len(),
                        model.depth,
                        model.alphabet
                    )));
                }
                if let Some(w) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential(format!("{name}[{s}][{w}] is not finite")));
                }
            }
        }
        if let Some(pair) = &self.base_pair {
            let m = self.symbols();
            if pair.len() != m || pair.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidPotential(format!("base_pair must be {m}x{m}")));
            }
            if pair.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPotential("base_pair entry is not finite".into()));
            }
        }
        if let Some(h) = self.lattice_h {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidPotential(format!("lattice spacing must be positive (got {h})")));
            }
            let pair_vals = self.base_pair.iter().flatten().flatten();
            for (i, &v) in self.u.iter().flatten().chain(pair_vals).enumerate() {
                if (v / h - (v / h).round()).abs() > LATTICE_TOL {
                    return Err(Error::NotLattice(format!("value #{i} = {v} is not a multiple of h = {h}")));
                }
            }
        }
        Ok(())
    }

    pub fn covers(&self, s: usize) -> Result<()> {
        if s >= self.symbols() {
            return Err(Error::MissingSymbol(s));
        }
        Ok(())
    }

    #[inline]
    pub fn pair(&self, s0: usize, s1: usize) -> f64 {
        self.base_pair.as_ref().map_or(0.0, |p| p[s0][s1])
    }

    pub fn has_pair(&self) -> bool {
        self.base_pair.is_some()
    }

    /// Integer lattice coordinate of `u[s][w]` (requires `lattice_h`).
    pub fn lattice_u(&self, s: usize, w: usize) -> Option<i64> {
        self.lattice_h.map(|h| (self.u[s][w] / h).round() as i64)
    }

    pub fn lattice_pair(&self, s0: usize, s1: usize) -> Option<i64> {
        self.lattice_h.map(|h| (self.pair(s0, s1) / h).round() as i64)
    }

    pub fn max_abs_u(&self) -> f64 {
        let pair = self.base_pair.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        self.u.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())) + pair
    }
}

/// How random potentials are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    /// `Σ_b e^{φ(s, v·b)} = 1` for every `v ∈ A^{r-1}`: the uniform reference
    /// functional is then dual-invariant with eigenvalue 1.
    Column,
}

/// Random tables with `φ, u` drawn uniformly from `[-1, 1]` before normalization.
pub fn random_potentials(model: &FiberModel, symbols: usize, norm: Normalization, seed: u64) -> Result<PotentialTable> {
    let mut rng = seed::rng(seed);
    let d = model.alphabet;
    let words = model.word_count();
    let mut phi = Vec::with_capacity(symbols);
    let mut u = Vec::with_capacity(symbols);
    for _ in 0..symbols {
        let mut p: Vec<f64> = (0..words).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm == Normalization::Column {
            for block in p.chunks_mut(d) {
                let lse = block.iter().map(|v| v.exp()).sum::<f64>().ln();
                block.iter_mut().for_each(|v| *v -= lse);
            }
        }
        phi.push(p);
        u.push((0..words).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    PotentialTable::new(model, phi, u, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn word_indexing_is_lexicographic() {
        assert_eq!(word_index(&[1, 0, 1], 2), 5);
        assert_eq!(word_of(5, 3, 2), vec![1, 0, 1]);
        for i in 0..27 {
            assert_eq!(word_index(&word_of(i, 3, 3), 3), i);
        }
    }

    #[test]
    fn axiom_constants() {
        let r2 = verify_expanding_axioms(&FiberModel::new(2, 1).unwrap());
        assert_eq!((r2.xi, r2.gamma, r2.multiplicity, r2.n_omega), (0.5, 2.0, 2, 2));
        assert!(r2.covering_holds && r2.pairing_holds);
        let r3 = verify_expanding_axioms(&FiberModel::new(3, 2).unwrap());
        assert_eq!((r3.xi, r3.gamma, r3.multiplicity, r3.n_omega), (0.5, 2.0, 3, 2));
        let b3 = verify_expanding_axioms(&FiberModel::new(2, 1).unwrap().with_metric_base(3.0).unwrap());
        assert_eq!(b3.gamma, 3.0);
        assert!(b3.pairing_holds);
    }

    #[test]
    fn model_validation() {
        assert!(FiberModel::new(1, 2).is_err());
        assert!(FiberModel::new(2, 0).is_err());
        assert_eq!(FiberModel::new(2, 1).unwrap().with_alpha(0.0), Err(Error::InvalidAlpha(0.0)));
        assert_eq!(FiberModel::new(3, 3).unwrap().function_dim(), 9);
    }

    #[test]
    fn constants_have_no_variation() {
        let g = CylinderFunction::constant(2, c(5.0));
        assert_eq!(holder_norm(&g, 1.0, 0.5).unwrap(), (5.0, 0.0, 5.0));
    }

    #[test]
    fn indicator_at_coordinate_two() {
        // 1 when x_2 = 0.
        let vals: Vec<f64> = (0..8).map(|i| if word_of(i, 3, 2)[2] == 0 { 1.0 } else { 0.0 }).collect();
        let g = CylinderFunction::from_real(2, 3, &vals).unwrap();
        assert_eq!(holder_norm(&g, 1.0, 0.5).unwrap(), (1.0, 4.0, 5.0));
        let (_, half, _) = holder_norm(&g, 0.5, 0.5).unwrap();
        assert!(half <= 4.0 && (half - 2.0).abs() < 1e-12);
    }

    #[test]
    fn holder_errors() {
        let g = CylinderFunction::constant(2, c(1.0));
        assert_eq!(holder_norm(&g, 1.0, 0.25), Err(Error::UnsupportedXi(0.25)));
        assert_eq!(holder_norm(&g, 1.5, 0.5), Err(Error::InvalidAlpha(1.5)));
        let g2 = CylinderFunction::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(extend_depth(&g2, 1), Err(Error::DepthShrink { from: 2, to: 1 }));
    }

    #[test]
    fn extension_replicates_values() {
        let k = extend_depth(&CylinderFunction::constant(3, c(2.0)), 2).unwrap();
        assert_eq!(k.values(), &[c(2.0); 9]);
        let g1 = CylinderFunction::from_real(2, 1, &[7.0, -1.0]).unwrap();
        let g3 = extend_depth(&g1, 3).unwrap();
        for i in 0..8 {
            let w = word_of(i, 3, 2);
            assert_eq!(g3.eval(&w), g1.eval(&w[..1]));
        }
    }

    #[test]
    fn seminorm_zero_iff_depth_two_measurable() {
        let g = CylinderFunction::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(holder_norm(&g, 1.0, 0.5).unwrap().1, 0.0);
        let g4 = extend_depth(&g, 4).unwrap();
        assert_eq!(holder_norm(&g4, 1.0, 0.5).unwrap().1, 0.0);
    }

    #[test]
    fn lattice_validation() {
        let m = FiberModel::new(2, 1).unwrap();
        let ok = PotentialTable::new(&m, vec![vec![0.0, 0.0]], vec![vec![1.0, -1.0]], Some(1.0));
        assert!(ok.is_ok());
        let bad = PotentialTable::new(&m, vec![vec![0.0, 0.0]], vec![vec![0.5, -1.0]], Some(1.0));
        assert!(matches!(bad, Err(Error::NotLattice(_))));
        let short = PotentialTable::new(&m, vec![vec![0.0]], vec![vec![1.0, -1.0]], None);
        assert!(matches!(short, Err(Error::DepthMismatch(_))));
        let t = ok.unwrap();
        assert_eq!(t.covers(1), Err(Error::MissingSymbol(1)));
        assert_eq!(t.lattice_u(0, 1), Some(-1));
    }

    #[test]
    fn column_normalization() {
        let m = FiberModel::new(3, 2).unwrap();
        let t = random_potentials(&m, 2, Normalization::Column, 4).unwrap();
        for s in 0..2 {
            for v in 0..3 {
                let sum: f64 = (0..3).map(|b| t.phi[s][v * 3 + b].exp()).sum();
                assert!((sum - 1.0).abs() < 1e-14);
            }
        }
    }

    fn arb_function() -> impl Strategy<Value = (usize, CylinderFunction)> {
        (2usize..=3, 0usize..=3).prop_flat_map(|(d, k)| {
            let n = d.pow(k as u32);
            (
                Just(d),
                Just(k),
                prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n),
            )
                .prop_map(|(d, k, v)| {
                    let vals = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
                    (d, CylinderFunction::new(d, k, vals).unwrap())
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn norm_invariant_under_extension((_, g) in arb_function(), extra in 0usize..3, alpha in 0.1f64..=1.0) {
            let e = extend_depth(&g, g.depth() + extra).unwrap();
            prop_assert_eq!(holder_norm(&g, alpha, 0.5).unwrap(), holder_norm(&e, alpha, 0.5).unwrap());
        }

        #[test]
        fn triangle_and_homogeneity((d, g) in arb_function(), seed in any::<u64>(), s in -3.0f64..3.0) {
            let mut rng = seed::rng(seed);
            let k = g.depth();
            let vals: Vec<Complex64> = (0..d.pow(k as u32)).map(|_| Complex64::new(rand::Rng::gen_range(&mut rng, -2.0..2.0), rand::Rng::gen_range(&mut rng, -2.0..2.0))).collect();
            let f = CylinderFunction::new(d, k, vals).unwrap();
            let sum = CylinderFunction::new(d, k, g.values().iter().zip(f.values()).map(|(a, b)| a + b).collect()).unwrap();
            let (_, _, ng) = holder_norm(&g, 1.0, 0.5).unwrap();
            let (_, _, nf) = holder_norm(&f, 1.0, 0.5).unwrap();
            let (_, _, ns) = holder_norm(&sum, 1.0, 0.5).unwrap();
            prop_assert!(ns <= ng + nf + 1e-9);
            let scaled = CylinderFunction::new(d, k, g.values().iter().map(|a| a * s).collect()).unwrap();
            let (_, _, nsc) = holder_norm(&scaled, 1.0, 0.5).unwrap();
            prop_assert!((nsc - s.abs() * ng).abs() <= 1e-9 * (1.0 + ng));
        }

        #[test]
        fn inverse_branches_halve_distance(d in 2usize..=3, i in 0usize..81, j in 0usize..81, a in 0usize..3) {
            let a = a % d;
            let (x, y) = (word_of(i % d.pow(4), 4, d), word_of(j % d.pow(4), 4, d));
            prop_assume!(x[..2] == y[..2] && x != y);
            let m = x.iter().zip(&y).position(|(p, q)| p != q).unwrap();
            let mut ax = vec![a]; ax.extend(&x);
            let mut ay = vec![a]; ay.extend(&y);
            let m2 = ax.iter().zip(&ay).position(|(p, q)| p != q).unwrap();
            prop_assert_eq!(2f64.powi(-(m2 as i32)), 2f64.powi(-(m as i32)) / 2.0);
        }
    }
}
