//! Exact formal sums with bounded denominators, the singleton measure
//! classes, pushforwards and semirandom norms, delta-equivalence of circular
//! measures, and effectively random elements.

use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A finitely supported map K -> Q. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormalSum<K: Ord + Clone> {
    terms: BTreeMap<K, Rat>,
}

impl<K: Ord + Clone> Default for FormalSum<K> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<K: Ord + Clone> FormalSum<K> {
    pub fn zero() -> Self {
        FormalSum { terms: BTreeMap::new() }
    }

    pub fn term(k: K, c: Rat) -> Self {
        let mut s = Self::zero();
        s.add_term(k, c);
        s
    }

    pub fn add_term(&mut self, k: K, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(k).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            let k2 = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .unwrap();
            self.terms.remove(&k2);
        }
    }

    pub fn add(&mut self, other: &FormalSum<K>) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &FormalSum<K>, s: &Rat) {
        if s.is_zero() {
            return;
        }
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c * s);
        }
    }

    pub fn scale(&mut self, s: &Rat) {
        if s.is_zero() {
            self.terms.clear();
            return;
        }
        for c in self.terms.values_mut() {
            *c *= s;
        }
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.scale(&-Rat::one());
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, k: &K) -> Rat {
        self.terms.get(k).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Rat)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.terms.keys()
    }

    /// Sum of coefficients.
    pub fn mass(&self) -> Rat {
        self.terms.values().fold(Rat::zero(), |a, b| a + b)
    }

    /// Sum of absolute coefficients.
    pub fn abs_mass(&self) -> Rat {
        self.terms.values().fold(Rat::zero(), |a, b| a + b.abs())
    }

    /// Least common multiple of the reduced denominators.
    pub fn denom_lcm(&self) -> BigInt {
        self.terms
            .values()
            .fold(BigInt::one(), |acc, c| num::integer::lcm(acc, c.denom().clone()))
    }

    /// Check the denominator-bound invariant: every reduced denominator
    /// divides `bound`.
    pub fn denoms_divide(&self, bound: &BigInt) -> bool {
        self.terms.values().all(|c| (bound % c.denom()).is_zero())
    }

    pub fn map_keys<L: Ord + Clone>(&self, f: impl Fn(&K) -> L) -> FormalSum<L> {
        let mut out = FormalSum::zero();
        for (k, c) in &self.terms {
            out.add_term(f(k), c.clone());
        }
        out
    }
}

/// The paper's singleton weight systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFn {
    /// sigma_1 on the one-point space.
    One,
    /// sigma_C on geodesic arcs: e^{-l}.
    ConnArcs,
    /// sigma_G on group elements: e^{-l}.
    Group,
    /// sigma_Gamma on good curves: R e^{-2R}.
    Curves { r: f64 },
    /// sigma_Pi on good pants: e^{-3R}.
    Pants { r: f64 },
}

/// Objects a weight can be evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum WObj {
    One,
    Arc { len: f64 },
    Elt { len: f64 },
    Curve,
    Pants,
}

pub fn weight(kind: &WeightFn, obj: &WObj) -> Result<f64> {
    match (kind, obj) {
        (WeightFn::One, WObj::One) => Ok(1.0),
        (WeightFn::ConnArcs, WObj::Arc { len }) => Ok((-len).exp()),
        (WeightFn::Group, WObj::Elt { len }) => Ok((-len).exp()),
        (WeightFn::Curves { r }, WObj::Curve) => Ok(r * (-2.0 * r).exp()),
        (WeightFn::Pants { r }, WObj::Pants) => Ok((-3.0 * r).exp()),
        _ => Err(Error::KindMismatch),
    }
}

/// A finitely supported map X -> QY.
#[derive(Debug, Clone, Default)]
pub struct FiniteMap<X: Ord + Clone, Y: Ord + Clone> {
    pub pairs: BTreeMap<X, FormalSum<Y>>,
}

impl<X: Ord + Clone, Y: Ord + Clone> FiniteMap<X, Y> {
    pub fn new() -> Self {
        FiniteMap { pairs: BTreeMap::new() }
    }

    pub fn insert(&mut self, x: X, v: FormalSum<Y>) {
        self.pairs.insert(x, v);
    }

    /// Pointwise composition (g o f)(x) = sum_y f_x(y) g(y).
    pub fn compose<Z: Ord + Clone>(&self, g: &FiniteMap<Y, Z>) -> FiniteMap<X, Z> {
        let mut out = FiniteMap::new();
        for (x, fx) in &self.pairs {
            let mut acc = FormalSum::zero();
            for (y, c) in fx.iter() {
                if let Some(gy) = g.pairs.get(y) {
                    acc.add_scaled(gy, c);
                }
            }
            out.insert(x.clone(), acc);
        }
        out
    }

    /// Pointwise linear combination l1 f1 + l2 f2.
    pub fn lincomb(f1: &Self, l1: &Rat, f2: &Self, l2: &Rat) -> Self {
        let mut out = FiniteMap::new();
        let keys: std::collections::BTreeSet<&X> =
            f1.pairs.keys().chain(f2.pairs.keys()).collect();
        for x in keys {
            let mut acc = FormalSum::zero();
            if let Some(v) = f1.pairs.get(x) {
                acc.add_scaled(v, l1);
            }
            if let Some(v) = f2.pairs.get(x) {
                acc.add_scaled(v, l2);
            }
            out.insert(x.clone(), acc);
        }
        out
    }
}

/// |f|_* m on Y with exact rational weights.
pub fn pushforward_abs<X: Ord + Clone, Y: Ord + Clone>(
    f: &FiniteMap<X, Y>,
    w: impl Fn(&X) -> Rat,
) -> BTreeMap<Y, Rat> {
    let mut out: BTreeMap<Y, Rat> = BTreeMap::new();
    for (x, fx) in &f.pairs {
        let wx = w(x);
        for (y, c) in fx.iter() {
            let entry = out.entry(y.clone()).or_insert_with(Rat::zero);
            *entry += c.abs() * wx.clone();
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Semirandom norm against singleton measures, exact rationals:
/// K = max_y (|f|_* sx)(y) / sy(y); zero map has norm 0.
pub fn semirandom_norm<X: Ord + Clone, Y: Ord + Clone>(
    f: &FiniteMap<X, Y>,
    sx: impl Fn(&X) -> Rat,
    sy: impl Fn(&Y) -> Rat,
) -> Rat {
    let push = pushforward_abs(f, sx);
    let mut best = Rat::zero();
    for (y, m) in &push {
        let k = m / sy(y);
        if k > best {
            best = k;
        }
    }
    best
}

/// Real-weighted variant for measured geometry norms.
pub fn semirandom_norm_f64<X: Ord + Clone, Y: Ord + Clone>(
    f: &FiniteMap<X, Y>,
    sx: impl Fn(&X) -> f64,
    sy: impl Fn(&Y) -> f64,
) -> f64 {
    let mut push: BTreeMap<&Y, f64> = BTreeMap::new();
    for (x, fx) in &f.pairs {
        let wx = sx(x);
        for (y, c) in fx.iter() {
            *push.entry(y).or_insert(0.0) += rat_to_f64(&c.abs()) * wx;
        }
    }
    push.iter().map(|(y, m)| m / sy(y)).fold(0.0, f64::max)
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    num::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// An atomic measure on the half-length torus R / hl Z.
#[derive(Debug, Clone)]
pub struct FeetMeasure {
    pub hl: f64,
    /// (position in [0, hl), multiplicity), sorted by position.
    pub atoms: Vec<(f64, Rat)>,
}

impl FeetMeasure {
    pub fn new(hl: f64, mut atoms: Vec<(f64, Rat)>) -> FeetMeasure {
        atoms.retain(|(_, m)| !m.is_zero());
        for a in &mut atoms {
            a.0 = a.0.rem_euclid(hl);
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // merge coincident positions
        let mut merged: Vec<(f64, Rat)> = Vec::new();
        for (p, m) in atoms {
            if let Some(last) = merged.last_mut() {
                if (p - last.0).abs() < 1e-12 {
                    last.1 += m;
                    continue;
                }
            }
            merged.push((p, m));
        }
        FeetMeasure { hl, atoms: merged }
    }

    pub fn total(&self) -> Rat {
        self.atoms.iter().fold(Rat::zero(), |a, (_, m)| a + m)
    }

    /// Mass of the closed circular arc [a, b] (going forward from a to b).
    pub fn arc_mass(&self, a: f64, b: f64) -> Rat {
        let len = (b - a).rem_euclid(self.hl);
        let mut out = Rat::zero();
        for (p, m) in &self.atoms {
            let off = (p - a).rem_euclid(self.hl);
            if off <= len + 1e-9 || off >= self.hl - 1e-9 {
                out += m;
            }
        }
        out
    }
}

/// Exact decision of delta-equivalence for two atomic measures on the same
/// torus: equal mass and m1(A) <= m2(N_delta(A)) for every closed arc A with
/// atom endpoints (the extremal family), both ways.
pub fn delta_equivalent(m1: &FeetMeasure, m2: &FeetMeasure, delta: f64) -> Result<bool> {
    if (m1.hl - m2.hl).abs() > 1e-9 {
        return Err(Error::MassMismatch("different tori".into(), String::new()));
    }
    let t1 = m1.total();
    let t2 = m2.total();
    if t1 != t2 {
        return Err(Error::MassMismatch(t1.to_string(), t2.to_string()));
    }
    Ok(one_sided(m1, m2, delta) && one_sided(m2, m1, delta))
}

fn one_sided(m1: &FeetMeasure, m2: &FeetMeasure, delta: f64) -> bool {
    let hl = m1.hl;
    let n = m1.atoms.len();
    for i in 0..n {
        for j in 0..n {
            let a = m1.atoms[i].0;
            let b = m1.atoms[j].0;
            let len = (b - a).rem_euclid(hl);
            let lhs = m1.arc_mass(a, b);
            let rhs = if len + 2.0 * delta >= hl - 1e-12 {
                m2.total()
            } else {
                m2.arc_mass(a - delta, b + delta)
            };
            if lhs > rhs {
                return false;
            }
        }
    }
    true
}

/// One-sided report against the uniform measure of equal total mass: returns
/// the largest violation of either direction (0 means delta-equivalent up to
/// the float tolerance of the uniform side).
pub fn uniform_equivalence_defect(m: &FeetMeasure, delta: f64) -> f64 {
    let hl = m.hl;
    let total = rat_to_f64(&m.total());
    if m.atoms.is_empty() {
        return if total == 0.0 { 0.0 } else { total };
    }
    let dens = total / hl;
    let mut worst: f64 = 0.0;
    let n = m.atoms.len();
    // atomic(A) <= uniform(N_delta(A))
    for i in 0..n {
        for j in 0..n {
            let a = m.atoms[i].0;
            let b = m.atoms[j].0;
            let len = (b - a).rem_euclid(hl);
            let lhs = rat_to_f64(&m.arc_mass(a, b));
            let rhs = (dens * (len + 2.0 * delta)).min(total);
            worst = worst.max(lhs - rhs);
        }
    }
    // uniform(A) <= atomic(N_delta(A)): extremal arcs press against the
    // delta-neighborhoods of atoms
    for i in 0..n {
        for j in 0..n {
            let a = m.atoms[i].0 + delta + 1e-9;
            let b = m.atoms[j].0 - delta - 1e-9;
            let len = (b - a).rem_euclid(hl);
            if len >= hl - 1e-9 {
                continue;
            }
            let lhs = dens * len;
            let rhs = if len + 2.0 * delta >= hl - 1e-12 {
                total
            } else {
                rat_to_f64(&m.arc_mass(a - delta, b + delta))
            };
            worst = worst.max(lhs - rhs);
        }
    }
    worst
}

/// floor(e^{2R}) as an exact integer (guarded against float ambiguity).
pub fn floor_exp_2r(r: f64) -> Result<BigInt> {
    let x = (2.0 * r).exp();
    if !(x.is_finite()) || 2.0 * r > 40.0 {
        return Err(Error::CapExceeded { requested: 2.0 * r, cap: 40.0 });
    }
    let f = x.floor();
    if (x - f) < 1e-7 && x > 1e6 {
        // ambiguous rounding would make denominators irreproducible
        return Err(Error::Degenerate(format!("e^(2R) = {x} too close to an integer")));
    }
    Ok(BigInt::from(f as i128))
}

/// Largest-remainder apportionment of weight 1 over `items` with denominator
/// floor(e^{2R}); deterministic under the seed.
pub fn random_element<K: Ord + Clone>(
    items: &[K],
    r: f64,
    seed: u64,
) -> Result<FormalSum<K>> {
    if items.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let d = floor_exp_2r(r)?;
    let mut sorted: Vec<K> = items.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = BigInt::from(sorted.len());
    let base: BigInt = &d / &n;
    let rem_big: BigInt = &d % &n;
    let rem: usize = num::ToPrimitive::to_usize(&rem_big).unwrap();
    let mut order: Vec<usize> = (0..sorted.len()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut out = FormalSum::zero();
    for (rank, idx) in order.iter().enumerate() {
        let num = if rank < rem { &base + 1 } else { base.clone() };
        if num.is_zero() {
            continue;
        }
        out.add_term(sorted[*idx].clone(), Rat::new(num, d.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formal_sum_cancellation() {
        let mut s: FormalSum<&str> = FormalSum::zero();
        s.add_term("a", rat(1, 2));
        s.add_term("b", rat_int(3));
        s.add_term("a", rat(-1, 2));
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(&"b"), rat_int(3));
        let t = s.negated();
        let mut u = s.clone();
        u.add(&t);
        assert!(u.is_zero());
    }

    #[test]
    fn weights_match_formulas() {
        assert_eq!(weight(&WeightFn::One, &WObj::One).unwrap(), 1.0);
        assert_eq!(weight(&WeightFn::ConnArcs, &WObj::Arc { len: 0.0 }).unwrap(), 1.0);
        let r = 5.0;
        assert!((weight(&WeightFn::Curves { r }, &WObj::Curve).unwrap()
            - 5.0 * (-10.0f64).exp())
        .abs()
            < 1e-18);
        assert!((weight(&WeightFn::Pants { r }, &WObj::Pants).unwrap() - (-15.0f64).exp()).abs()
            < 1e-18);
        assert!(weight(&WeightFn::One, &WObj::Curve).is_err());
    }

    #[test]
    fn pushforward_linearity() {
        let mut f: FiniteMap<u32, &str> = FiniteMap::new();
        f.insert(1, FormalSum::term("x", rat_int(1)));
        f.insert(2, {
            let mut s = FormalSum::term("x", rat_int(-2));
            s.add_term("y", rat(1, 3));
            s
        });
        let w = |k: &u32| rat_int(*k as i64);
        let p = pushforward_abs(&f, w);
        assert_eq!(p[&"x"], rat_int(1) + rat_int(2) * rat_int(2));
        assert_eq!(p[&"y"], rat(2, 3));
        // doubling coefficients doubles the pushforward
        let mut f2 = f.clone();
        for v in f2.pairs.values_mut() {
            v.scale(&rat_int(2));
        }
        let p2 = pushforward_abs(&f2, w);
        assert_eq!(p2[&"x"], &p[&"x"] * rat_int(2));
        // zero map -> zero measure
        let z: FiniteMap<u32, &str> = FiniteMap::new();
        assert!(pushforward_abs(&z, w).is_empty());
    }

    #[test]
    fn identity_is_one_semirandom() {
        let mut f: FiniteMap<u32, u32> = FiniteMap::new();
        for k in 0..7 {
            f.insert(k, FormalSum::term(k, rat_int(1)));
        }
        let w = |k: &u32| rat(1 + *k as i64, 3);
        assert_eq!(semirandom_norm(&f, w, w), rat_int(1));
    }

    fn random_map(rng: &mut ChaCha20Rng, nx: u32, ny: u32) -> FiniteMap<u32, u32> {
        use rand::Rng;
        let mut f = FiniteMap::new();
        for x in 0..nx {
            let mut s = FormalSum::zero();
            for _ in 0..rng.gen_range(0..4) {
                let y = rng.gen_range(0..ny);
                let num = rng.gen_range(-5..=5);
                let den = rng.gen_range(1..=4);
                s.add_term(y, rat(num, den));
            }
            f.insert(x, s);
        }
        f
    }

    #[test]
    fn composition_and_sum_bounds_exact() {
        // Props 4.3 / 4.4 on 1000 random finite maps, exact arithmetic
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let wx = |k: &u32| rat(1 + (*k % 5) as i64, 2);
        let wy = |k: &u32| rat(2 + (*k % 3) as i64, 3);
        let wz = |k: &u32| rat(1 + (*k % 4) as i64, 5);
        for _ in 0..500 {
            let f = random_map(&mut rng, 5, 6);
            let gm = random_map(&mut rng, 6, 4);
            let kf = semirandom_norm(&f, wx, wy);
            let kg = semirandom_norm(&gm, wy, wz);
            let comp = f.compose(&gm);
            let kc = semirandom_norm(&comp, wx, wz);
            assert!(kc <= kf * kg, "composition bound violated");
        }
        for _ in 0..500 {
            let f1 = random_map(&mut rng, 5, 6);
            let f2 = random_map(&mut rng, 5, 6);
            let (l1, l2) = (rat(2, 1), rat(1, 3));
            let k1 = semirandom_norm(&f1, wx, wy);
            let k2 = semirandom_norm(&f2, wx, wy);
            let sum = FiniteMap::lincomb(&f1, &l1, &f2, &l2);
            let ks = semirandom_norm(&sum, wx, wy);
            assert!(ks <= l1 * k1 + l2 * k2, "sum bound violated");
        }
    }

    #[test]
    fn delta_equivalence_cases() {
        let hl = 5.0;
        let m = FeetMeasure::new(hl, vec![(0.5, rat_int(1)), (2.0, rat_int(2))]);
        assert!(delta_equivalent(&m, &m, 0.0).unwrap());
        // separated single atoms fail below their distance
        let a = FeetMeasure::new(hl, vec![(0.0, rat_int(1))]);
        let b = FeetMeasure::new(hl, vec![(0.11, rat_int(1))]);
        assert!(!delta_equivalent(&a, &b, 0.1).unwrap());
        assert!(delta_equivalent(&a, &b, 0.12).unwrap());
        // uniform grid vs rotated grid by delta/2
        let n = 8;
        let g1 = FeetMeasure::new(
            hl,
            (0..n).map(|k| (hl * k as f64 / n as f64, rat_int(1))).collect(),
        );
        let g2 = FeetMeasure::new(
            hl,
            (0..n).map(|k| (hl * k as f64 / n as f64 + 0.05, rat_int(1))).collect(),
        );
        assert!(delta_equivalent(&g1, &g2, 0.1).unwrap());
        // mass mismatch errors
        let c = FeetMeasure::new(hl, vec![(0.0, rat_int(2))]);
        assert!(delta_equivalent(&a, &c, 1.0).is_err());
        // symmetry and monotonicity
        assert_eq!(
            delta_equivalent(&a, &b, 0.12).unwrap(),
            delta_equivalent(&b, &a, 0.12).unwrap()
        );
        assert!(delta_equivalent(&a, &b, 0.5).unwrap());
    }

    #[test]
    fn uniform_defect_of_even_grid_is_small() {
        let hl = 4.0;
        let n = 16;
        let g = FeetMeasure::new(
            hl,
            (0..n).map(|k| (hl * k as f64 / n as f64, rat_int(1))).collect(),
        );
        // grid spacing hl/n = 0.25: equivalent to uniform at delta = 0.25
        assert!(uniform_equivalence_defect(&g, 0.25) < 1e-6);
        assert!(uniform_equivalence_defect(&g, 0.05) > 0.0);
    }

    #[test]
    fn random_element_contract() {
        let r = 5.0;
        let d = floor_exp_2r(r).unwrap();
        assert_eq!(d, BigInt::from(22026));
        // singleton: coefficient exactly 1
        let one = random_element(&["a"], r, 0).unwrap();
        assert_eq!(one.get(&"a"), rat_int(1));
        // generic: numerators sum to floor(e^{2R}), max coefficient bound
        let items: Vec<u32> = (0..37).collect();
        let b = random_element(&items, r, 0).unwrap();
        assert_eq!(b.mass(), rat_int(1));
        assert!(b.denoms_divide(&d));
        let nmax = rat(1, 37) + Rat::new(BigInt::one(), d.clone());
        for (_, c) in b.iter() {
            assert!(c > &Rat::zero());
            assert!(c <= &nmax);
        }
        // deterministic under seed
        let b2 = random_element(&items, r, 0).unwrap();
        assert_eq!(b, b2);
        let b3 = random_element(&items, r, 1).unwrap();
        assert_eq!(b3.mass(), rat_int(1));
        // #X dividing the denominator gives the exact uniform element
        let items2: Vec<u32> = (0..3).collect();
        let u = random_element(&items2, r, 9).unwrap();
        assert_eq!(u.get(&1), rat(7342, 22026));
        assert!(matches!(
            random_element::<u32>(&[], r, 0),
            Err(Error::EmptyDomain)
        ));
    }
}
