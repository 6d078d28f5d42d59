//! Immersed pairs of pants: construction from theta-graphs and third
//! connections, cuffs, feet, twists, boundary maps, and enumeration of the
//! good pants with their counting data.

use crate::arc::{holonomy, Anchor, LArc, LPoint};
use crate::config::{EPS_ORTHO, QUANT};
use crate::conn::{word_power, OrthoArc};
use crate::error::{Error, Result};
use crate::formal::{FeetMeasure, FormalSum, Rat};
use crate::group::{lambda_apply_inv, lambda_of, CurveClass, SurfaceGroup};
use crate::hyperbolic::{
    angle_between_dirs, axis_of, compose, flow_tangent, h_func, mink, MoebiusTransform,
    UnitTangent,
};
use crate::word::Word;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Chart tangent at arclength parameter t along a curve's canonical axis.
pub fn axis_tangent(class: &CurveClass, t: f64) -> UnitTangent {
    let base = mink::to_h(class.origin);
    let dir = mink::angle_of(class.origin, class.odir);
    flow_tangent(&UnitTangent { base, dir }, t)
}

/// One cuff of a pants: the exact holonomy word of the boundary component as
/// it appears in the boundary sum, its class, and the pants' foot on it.
#[derive(Debug, Clone)]
pub struct CuffInfo {
    pub word: Word,
    pub class: Arc<CurveClass>,
    pub hl: f64,
    /// Foot position on the class's canonical axis, reduced mod hl.
    pub foot: f64,
    /// Side of the feet normals relative to the oriented cuff: +1 right.
    pub side: i8,
}

/// Canonical pants key: the minimum over the three cyclic cuff orderings of
/// (cuff class word, quantized foot position).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PantsKey(pub Vec<(Word, i64)>);

#[derive(Debug, Clone)]
pub struct Pants {
    pub cuffs: [CuffInfo; 3],
    /// Based pair (x, y) whose axes realize the hexagon configuration.
    pub x: Word,
    pub y: Word,
    pub key: PantsKey,
    /// Third connection this pants was built from, if any: (cuff index,
    /// connection data).
    pub third: Option<(usize, OrthoArc)>,
}

impl Pants {
    pub fn is_good(&self, eps: f64, r: f64) -> bool {
        self.cuffs.iter().all(|c| (c.hl - r).abs() <= eps)
    }

    pub fn cuff_index(&self, class_key: &Word) -> Option<usize> {
        self.cuffs.iter().position(|c| c.class.rep == *class_key)
    }

    /// The stored third connection for a cuff, if this pants was built from
    /// one on that cuff.
    pub fn third_of(&self, class_key: &Word) -> Result<&OrthoArc> {
        match &self.third {
            Some((i, arc)) if self.cuffs[*i].class.rep == *class_key => Ok(arc),
            _ => {
                if self.cuff_index(class_key).is_none() {
                    Err(Error::NotACuff)
                } else {
                    Err(Error::Degenerate("no stored third connection for this cuff".into()))
                }
            }
        }
    }
}

/// Word-level conjugator from a word to its canonical cyclic form:
/// w = u * canonical * u^-1.
pub fn conjugator_to_canonical(w: &Word) -> (Word, Word) {
    // peel the cyclic reduction: w = p * c * p^-1
    let mut v = w.0.clone();
    let mut p: Vec<i8> = Vec::new();
    while v.len() >= 2 && *v.first().unwrap() == -*v.last().unwrap() {
        p.push(v[0]);
        v.pop();
        v.remove(0);
    }
    let c = Word(v);
    let canon = c.canonical_cyclic();
    // canonical = q^-1 * c * q for the rotation prefix q = canon-start offset
    let n = c.len();
    let mut q = Word::empty();
    for s in 0..n {
        let rot: Vec<i8> = (0..n).map(|k| c.0[(s + k) % n]).collect();
        if Word(rot) == canon {
            q = Word(c.0[0..s].to_vec());
            break;
        }
    }
    // w = p c p^-1 = p q canon q^-1 p^-1
    let u = Word(p).concat(&q);
    (canon, u)
}

/// Feet of the common perpendicular between two axes: (foot on the first,
/// foot on the second). None if the axes meet.
fn seam_feet(axis_pole: mink::V3, other_pole: mink::V3) -> Option<(mink::V3, mink::V3)> {
    if mink::form(axis_pole, other_pole).abs() <= 1.0 + 1e-12 {
        return None;
    }
    match mink::meet(axis_pole, other_pole) {
        mink::Meet::Disjoint { perp, .. } => Some((
            mink::crossing_point(axis_pole, perp),
            mink::crossing_point(other_pole, perp),
        )),
        mink::Meet::Crossing(_) => None,
    }
}

/// Position of a foot point, given on the axis of the based word `w`, on the
/// canonical axis of w's class; also returns the class.
fn foot_on_canonical(
    g: &SurfaceGroup,
    w: &Word,
    f: mink::V3,
) -> Result<(Arc<CurveClass>, f64)> {
    let (canon, u) = conjugator_to_canonical(w);
    let class = g.class_from_word(&canon)?;
    let um = g.word_mat(&u);
    let lam = lambda_of(&um);
    let fc = lambda_apply_inv(&lam, f);
    let pos = class.position_mod_hl(fc);
    Ok((class, pos))
}

/// Build the immersed pants spanned by a theta-graph of three arcs p -> q.
pub fn theta_pants(g: &SurfaceGroup, a1: &LArc, a2: &LArc, a3: &LArc) -> Result<Pants> {
    // all arcs share the anchors
    for (i, a) in [a2, a3].iter().enumerate() {
        if a.start.anchor.id != a1.start.anchor.id || a.end.anchor.id != a1.end.anchor.id {
            return Err(Error::Degenerate(format!("theta arc {} anchored elsewhere", i + 2)));
        }
    }
    // compare directions in the anchor frames (arc endpoints may sit at
    // different lifts of the shared point)
    let at_anchor = |lp: &LPoint, u: &UnitTangent| -> f64 {
        if lp.word.is_empty() {
            u.dir
        } else {
            g.word_mat(&lp.word).inverse().apply_tangent(*u).dir
        }
    };
    let ip = [
        at_anchor(&a1.start, &a1.idir),
        at_anchor(&a2.start, &a2.idir),
        at_anchor(&a3.start, &a3.idir),
    ];
    let tq = [
        at_anchor(&a1.end, &a1.tdir),
        at_anchor(&a2.end, &a2.tdir),
        at_anchor(&a3.end, &a3.tdir),
    ];
    let ord_p = cyclic_orientation(ip[0], ip[1], ip[2]);
    let ord_q = cyclic_orientation(tq[0], tq[1], tq[2]);
    if ord_p == 0 || ord_q == 0 || ord_p == ord_q {
        return Err(Error::NotTheta);
    }
    // cuff chains: negative order at the start gives ([a2 -a1], [a3 -a2],
    // [a1 -a3]); positive the reverses
    let (c1, c2, c3) = if ord_p < 0 {
        (
            holonomy(g, &[a2, &a1.reverse()])?,
            holonomy(g, &[a3, &a2.reverse()])?,
            holonomy(g, &[a1, &a3.reverse()])?,
        )
    } else {
        (
            holonomy(g, &[a1, &a2.reverse()])?,
            holonomy(g, &[a2, &a3.reverse()])?,
            holonomy(g, &[a3, &a1.reverse()])?,
        )
    };
    pants_from_based_cuffs(g, c1, c2, c3, None)
}

/// Assemble pants data from the three based cuff words. All three loops are
/// developed from the same lift, so their axes are the mutually adjacent
/// lifts of the cuffs around the lifted theta-graph: the pairwise common
/// perpendiculars between them are the seam lifts.
fn pants_from_based_cuffs(
    g: &SurfaceGroup,
    c1: Word,
    c2: Word,
    c3: Word,
    third: Option<(usize, OrthoArc)>,
) -> Result<Pants> {
    let cuff_words = [c1, c2, c3];
    // rebase: conjugate all three loops by letters, greedily pulling the
    // configuration toward the base point; double precision on the hexagon
    // geometry degrades like e^(max displacement), so this is what keeps
    // feet positions at the 1e-9 scale
    let mut based = cuff_words.clone();
    let max_disp = |ws: &[Word; 3]| -> f64 {
        ws.iter().map(|w| g.word_mat(w).displacement(g.basepoint)).fold(0.0, f64::max)
    };
    let mut cur = max_disp(&based);
    loop {
        let mut best: Option<([Word; 3], f64)> = None;
        for l in g.letters() {
            let lw = Word::letter(l);
            let cand = [0, 1, 2].map(|i| {
                lw.inverse().concat(&based[i]).concat(&lw)
            });
            let d = max_disp(&cand);
            if d < cur - 1e-9 && best.as_ref().map_or(true, |(_, b)| d < *b) {
                best = Some((cand, d));
            }
        }
        match best {
            Some((cand, d)) => {
                based = cand;
                cur = d;
            }
            None => break,
        }
    }
    let mats: Vec<MoebiusTransform> = based.iter().map(|w| g.word_mat(w)).collect();
    let axes = [axis_of(&mats[0])?, axis_of(&mats[1])?, axis_of(&mats[2])?];
    let mut feet = [0.0f64; 3];
    let mut sides = [0i8; 3];
    let mut classes: Vec<Arc<CurveClass>> = Vec::with_capacity(3);
    let mut hls = [0.0f64; 3];
    for i in 0..3 {
        let pole_i = axes[i].pole;
        let (f, f_other) = seam_feet(pole_i, axes[(i + 1) % 3].pole)
            .ok_or_else(|| Error::Degenerate("adjacent cuff axes meet".into()))?;
        let (f2, _) = seam_feet(pole_i, axes[(i + 2) % 3].pole)
            .ok_or_else(|| Error::Degenerate("adjacent cuff axes meet".into()))?;
        // the two seam feet must be antipodal on the cuff: a wrong
        // adjacent lift violates this by order of the systole
        let d = mink::form(f, f2).max(1.0).acosh();
        if (d - axes[i].length / 2.0).abs() > 1e-5 {
            return Err(Error::Degenerate(format!(
                "seam feet not antipodal on cuff {i}: {d} vs {}",
                axes[i].length / 2.0
            )));
        }
        let side_sign = mink::side(f_other, pole_i);
        let (class, pos) = foot_on_canonical(g, &based[i], f)?;
        feet[i] = pos;
        sides[i] = if side_sign > 0.0 { 1 } else { -1 };
        hls[i] = class.hl;
        classes.push(class);
    }
    let cuffs: [CuffInfo; 3] = [0, 1, 2].map(|i| CuffInfo {
        word: cuff_words[i].clone(),
        class: classes[i].clone(),
        hl: hls[i],
        foot: feet[i],
        side: sides[i],
    });
    let key = pants_key(&cuffs);
    let x = cuffs[0].word.clone();
    let y = cuffs[1].word.clone();
    Ok(Pants { cuffs, x, y, key, third })
}

/// Foot grid for pants keys; registration probes neighboring cells so a
/// boundary-straddling foot cannot split one pants into two keys.
pub const KEY_QUANT: f64 = 1e-6;

fn pants_key(cuffs: &[CuffInfo; 3]) -> PantsKey {
    let entry = |c: &CuffInfo| (c.class.rep.clone(), (c.foot / KEY_QUANT).round() as i64);
    let mut best: Option<Vec<(Word, i64)>> = None;
    for r in 0..3 {
        let rot: Vec<(Word, i64)> =
            (0..3).map(|k| entry(&cuffs[(r + k) % 3])).collect();
        if best.as_ref().map_or(true, |b| &rot < b) {
            best = Some(rot);
        }
    }
    PantsKey(best.unwrap())
}

/// Signed cyclic orientation of three directions on the circle: +1 if
/// counterclockwise, -1 if clockwise, 0 if degenerate.
fn cyclic_orientation(d1: f64, d2: f64, d3: f64) -> i8 {
    let a = (d2 - d1).rem_euclid(std::f64::consts::TAU);
    let b = (d3 - d1).rem_euclid(std::f64::consts::TAU);
    if a < 1e-12 || b < 1e-12 || (a - b).abs() < 1e-12 {
        return 0;
    }
    if a < b {
        1
    } else {
        -1
    }
}

/// The immersed pants spanned by a curve and one of its third connections.
pub fn third_pants(g: &SurfaceGroup, class: &Arc<CurveClass>, eta: &OrthoArc) -> Result<Pants> {
    let ell = class.length;
    let t = eta.foot_a;
    let s = eta.foot_b;
    let delta = (s - t).rem_euclid(ell);
    if delta < 1e-9 || (ell - delta) < 1e-9 {
        return Err(Error::Degenerate("third connection feet coincide".into()));
    }
    // verify orthogonality of the stored connection, in Minkowski form and
    // in the centered gauge (conjugating by curve powers keeps the matrix
    // entries small; the [0,l) gauge can be numerically extreme)
    let ga = if t >= ell / 2.0 { 1i64 } else { 0 };
    let gb = if s >= ell / 2.0 { 1i64 } else { 0 };
    let wc = word_power(&class.rep, -ga)
        .concat(&eta.klass)
        .concat(&word_power(&class.rep, gb));
    let mc = g.word_mat(&wc);
    let (tc, sc) = (t - ga as f64 * ell, s - gb as f64 * ell);
    let pa = point_on_axis(class, tc);
    let lam = lambda_of(&mc);
    let qb = crate::group::lambda_apply(&lam, point_on_axis(class, sc));
    let x_axis = {
        let (ch, sh) = (tc.cosh(), tc.sinh());
        [
            class.origin[0] * sh + class.odir[0] * ch,
            class.origin[1] * sh + class.odir[1] * ch,
            class.origin[2] * sh + class.odir[2] * ch,
        ]
    };
    let x_eta = mink::tangent_toward(pa, qb);
    let cosang = -mink::form(x_axis, x_eta);
    if cosang.abs() > EPS_ORTHO {
        return Err(Error::NotOrthogonal(cosang.abs()));
    }
    let fa = axis_tangent(class, t);
    let anchor_t = Anchor::new("axis", fa);
    let anchor_s = Anchor::new("axis", axis_tangent(class, s));
    // sigma1: t -> s along the curve; wraps iff t + delta >= ell
    let k1 = ((t + delta - s) / ell).round() as i64;
    let sigma1 = LArc::new(
        g,
        LPoint::at_anchor(&anchor_t),
        LPoint { anchor: anchor_s.clone(), word: word_power(&class.rep, k1) },
    )?;
    // sigma2: s -> t along the curve
    let delta2 = ell - delta;
    let k2 = ((s + delta2 - t) / ell).round() as i64;
    let sigma2 = LArc::new(
        g,
        LPoint::at_anchor(&anchor_s),
        LPoint { anchor: anchor_t.clone(), word: word_power(&class.rep, k2) },
    )?;
    let eta_arc = LArc::new(
        g,
        LPoint::at_anchor(&anchor_t),
        LPoint { anchor: anchor_s.clone(), word: eta.klass.clone() },
    )?;
    let mut pants = theta_pants(g, &sigma1, &eta_arc, &sigma2.reverse())?;
    // remember which cuff carries the curve and the connection
    let idx = pants
        .cuff_index(&class.rep)
        .ok_or_else(|| Error::Degenerate("curve is not a cuff of its own third pants".into()))?;
    pants.third = Some((idx, eta.clone()));
    Ok(pants)
}

pub fn point_on_axis(class: &CurveClass, t: f64) -> mink::V3 {
    let (ch, sh) = (t.cosh(), t.sinh());
    [
        class.origin[0] * ch + class.odir[0] * sh,
        class.origin[1] * ch + class.odir[1] * sh,
        class.origin[2] * ch + class.odir[2] * sh,
    ]
}

/// Registry of pants by canonical key, shared by formal sums.
#[derive(Default)]
pub struct PantsBook {
    map: Mutex<BTreeMap<PantsKey, Arc<Pants>>>,
}

impl PantsBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, p: Pants) -> (PantsKey, Arc<Pants>) {
        let key = p.key.clone();
        let mut map = self.map.lock().unwrap();
        if let Some(existing) = map.get(&key) {
            return (key, existing.clone());
        }
        // probe neighboring foot cells: the same pants found through another
        // cuff may have rounded across a grid boundary
        for mask in 1u32..27 {
            let mut k2 = key.clone();
            let mut digit = mask;
            let mut changed = false;
            for slot in k2.0.iter_mut() {
                let d = digit % 3;
                digit /= 3;
                match d {
                    1 => {
                        slot.1 += 1;
                        changed = true;
                    }
                    2 => {
                        slot.1 -= 1;
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                continue;
            }
            if let Some(existing) = map.get(&k2) {
                return (k2, existing.clone());
            }
        }
        map.insert(key.clone(), Arc::new(p));
        (key.clone(), map.get(&key).unwrap().clone())
    }

    pub fn get(&self, key: &PantsKey) -> Option<Arc<Pants>> {
        self.map.lock().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Oriented-curve boundary of a formal sum of pants: each cuff contributes
/// its oriented class, stored under the identification of the reversed curve
/// with minus the curve.
pub fn boundary(
    g: &SurfaceGroup,
    mu: &FormalSum<PantsKey>,
    book: &PantsBook,
) -> Result<FormalSum<Word>> {
    let mut out = FormalSum::zero();
    for (k, c) in mu.iter() {
        let p = book
            .get(k)
            .ok_or_else(|| Error::Degenerate("pants key missing from book".into()))?;
        for cuff in &p.cuffs {
            let (class, sign) = g.curve_term(&cuff.word)?;
            let mut coeff = c.clone();
            if sign < 0 {
                coeff = -coeff;
            }
            out.add_term(class.rep.clone(), coeff);
        }
    }
    Ok(out)
}

/// The feet measure of a nonnegative multi-pants on one cuff class.
pub fn feet_boundary(
    g: &SurfaceGroup,
    mu: &FormalSum<PantsKey>,
    class: &Arc<CurveClass>,
    book: &PantsBook,
) -> Result<FeetMeasure> {
    let _ = g;
    let mut atoms: Vec<(f64, Rat)> = Vec::new();
    for (k, c) in mu.iter() {
        if c < &Rat::from_integer(0.into()) {
            return Err(Error::NegativeCoefficient(format!("{c} at a pants term")));
        }
        let p = book
            .get(k)
            .ok_or_else(|| Error::Degenerate("pants key missing from book".into()))?;
        for cuff in &p.cuffs {
            if cuff.class.rep == class.rep {
                atoms.push((cuff.foot, c.clone()));
            }
        }
    }
    Ok(FeetMeasure::new(class.hl, atoms))
}

/// Twist parameter between a pants with cuff `class` and one with the
/// reversed cuff: arc length from the first foot to the second along the
/// curve's orientation.
pub fn twist(
    g: &SurfaceGroup,
    p1: &Pants,
    p2: &Pants,
    class: &Arc<CurveClass>,
) -> Result<f64> {
    let i1 = p1.cuff_index(&class.rep).ok_or(Error::NotACuff)?;
    let rev = g.rev_class(class)?;
    let i2 = p2.cuff_index(&rev.rep).ok_or(Error::NotACuff)?;
    let t_a = p1.cuffs[i1].foot;
    let t_rev = p2.cuffs[i2].foot;
    let off = g.rev_offset(class)?;
    let t_b = (off - t_rev).rem_euclid(class.hl);
    Ok((t_b - t_a).rem_euclid(class.hl))
}

/// The (sigma, w) window of the good-pants region for one curve: scan sigma
/// and intersect the two h-windows.
pub struct HWindow {
    /// max |sigma - l/2| over the admissible region (antipodal defect band)
    pub band: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

/// Solve cosh(h/2) = sinh(s/2) sinh(w/2) for w.
fn w_of(h: f64, s: f64) -> Option<f64> {
    let v = (h / 2.0).cosh() / (s / 2.0).sinh();
    if v < 1.0 {
        return None;
    }
    Some(2.0 * v.asinh())
}

pub fn h_window(class: &CurveClass, eps: f64, r: f64) -> Option<HWindow> {
    let ell = class.length;
    let (h_lo, h_hi) = (2.0 * r - 2.0 * eps, 2.0 * r + 2.0 * eps);
    let mut band: f64 = 0.0;
    let mut w_lo = f64::INFINITY;
    let mut w_hi: f64 = 0.0;
    let steps = 4000;
    let mut any = false;
    for k in 1..steps {
        let s = ell * k as f64 / steps as f64;
        let s2 = ell - s;
        // w-interval for sigma1 = s intersected with sigma2 = ell - s
        let lo = match (w_of(h_lo, s), w_of(h_lo, s2)) {
            (Some(a), Some(b)) => a.max(b),
            _ => continue,
        };
        let hi = match (w_of(h_hi, s), w_of(h_hi, s2)) {
            (Some(a), Some(b)) => a.min(b),
            _ => continue,
        };
        if lo > hi {
            continue;
        }
        any = true;
        band = band.max((s - ell / 2.0).abs());
        w_lo = w_lo.min(lo);
        w_hi = w_hi.max(hi);
    }
    if !any {
        return None;
    }
    Some(HWindow { band: band + 0.05, w_lo: (w_lo - 0.02).max(0.0), w_hi: w_hi + 0.02 })
}

/// Volume of the good-pants region over a subarc of length `i_len`:
/// 2 * i_len * integral over sigma of the w-window length.
pub fn region_volume(class: &CurveClass, eps: f64, r: f64, i_len: f64) -> Result<f64> {
    if i_len <= 0.0 || i_len > class.hl + 1e-9 {
        return Err(Error::Degenerate(format!("subarc length {i_len} outside (0, hl]")));
    }
    let ell = class.length;
    let (h_lo, h_hi) = (2.0 * r - 2.0 * eps, 2.0 * r + 2.0 * eps);
    let steps = 20000;
    let mut integral = 0.0;
    let ds = ell / steps as f64;
    let mut any = false;
    for k in 1..steps {
        let s = ell * k as f64 / steps as f64;
        let s2 = ell - s;
        let lo = match (w_of(h_lo, s), w_of(h_lo, s2)) {
            (Some(a), Some(b)) => a.max(b),
            _ => continue,
        };
        let hi = match (w_of(h_hi, s), w_of(h_hi, s2)) {
            (Some(a), Some(b)) => a.min(b),
            _ => continue,
        };
        if lo > hi {
            continue;
        }
        any = true;
        integral += (hi - lo) * ds;
    }
    if !any {
        return Err(Error::Degenerate("empty h-window".into()));
    }
    Ok(2.0 * i_len * integral)
}

/// One enumeration run of the good pants at (eps, R).
pub struct GoodPantsRun {
    pub eps: f64,
    pub r: f64,
    pub curves: Vec<Arc<CurveClass>>,
    pub book: PantsBook,
    /// Distinct pants keys.
    pub keys: Vec<PantsKey>,
    /// Per curve class key: the pants (by key) having it as a cuff, one entry
    /// per third connection (so the length is K_gamma).
    pub by_cuff: BTreeMap<Word, Vec<PantsKey>>,
}

impl GoodPantsRun {
    pub fn k_gamma(&self, class_key: &Word) -> usize {
        self.by_cuff.get(class_key).map(|v| v.len()).unwrap_or(0)
    }

    /// mu_1: every good pants once.
    pub fn mu_one(&self) -> FormalSum<PantsKey> {
        let mut s = FormalSum::zero();
        for k in &self.keys {
            s.add_term(k.clone(), Rat::from_integer(1.into()));
        }
        s
    }
}

/// BFS wander allowance for the per-curve candidate balls; validated against
/// the production slack in `good_pants_slack_stable`.
const SCAN_SLACK: f64 = 1.5;

/// Enumerate all good pants having at least one cuff in Gamma_{eps,R}.
///
/// Per curve, third-connection candidates live (after normalizing by cuff
/// powers) in a ball around the curve's axis foot of radius about
/// hl + band + w_max, which is scanned with a lean breadth-first walk.
pub fn enumerate_good_pants(g: &Arc<SurfaceGroup>, eps: f64, r: f64) -> Result<GoodPantsRun> {
    use rayon::prelude::*;
    let curves = g.closed_geodesics(2.0 * r - 2.0 * eps, 2.0 * r + 2.0 * eps)?;
    let windows: Vec<Option<HWindow>> = curves.iter().map(|c| h_window(c, eps, r)).collect();
    for (c, w) in curves.iter().zip(&windows) {
        if let Some(hw) = w {
            let radius = c.length / 2.0 + hw.band + hw.w_hi + 0.5;
            if radius > crate::conn::ORTHO_RADIUS_CAP {
                return Err(Error::CapExceeded {
                    requested: radius,
                    cap: crate::conn::ORTHO_RADIUS_CAP,
                });
            }
        }
    }
    let per_curve: Vec<Result<Vec<(usize, Pants)>>> = curves
        .par_iter()
        .zip(&windows)
        .enumerate()
        .map(|(ci, (c, w))| {
            let hw = match w {
                Some(hw) => hw,
                None => return Ok(Vec::new()),
            };
            let mut found = Vec::new();
            for eta in scan_thirds(g, c, hw, eps, r)? {
                let p = third_pants(g, c, &eta)?;
                found.push((ci, p));
            }
            Ok(found)
        })
        .collect();
    let book = PantsBook::new();
    let mut by_cuff: BTreeMap<Word, Vec<PantsKey>> = BTreeMap::new();
    for res in per_curve {
        for (ci, pants) in res? {
            let (key, _) = book.register(pants);
            by_cuff.entry(curves[ci].rep.clone()).or_default().push(key);
        }
    }
    let keys: Vec<PantsKey> = {
        let mut ks: Vec<PantsKey> = by_cuff.values().flatten().cloned().collect();
        ks.sort();
        ks.dedup();
        ks
    };
    Ok(GoodPantsRun { eps, r, curves, book, keys, by_cuff })
}

/// Third connections of one curve within its h-window (both new cuffs in the
/// good window), via a lean ball around the curve's own axis foot.
pub fn scan_thirds(
    g: &Arc<SurfaceGroup>,
    c: &Arc<CurveClass>,
    hw: &HWindow,
    eps: f64,
    r: f64,
) -> Result<Vec<OrthoArc>> {
    let ell = c.length;
    let pole = c.axis.pole;
    let x0 = mink::to_h(c.origin);
    let radius = ell / 2.0 + hw.band + hw.w_hi + 0.5;
    let ball = g.ball_lean(x0, radius, SCAN_SLACK);
    let mut out: Vec<OrthoArc> = Vec::new();
    let mut seen: std::collections::HashSet<(i64, i64, i64)> = std::collections::HashSet::new();
    for idx in 1..ball.len() {
        let mat = ball.mats[idx];
        let lam = lambda_of(&mat);
        let moved = crate::group::lambda_apply(&lam, pole);
        let cform = mink::form(pole, moved);
        if cform.abs() <= 1.0 + 1e-12 {
            continue;
        }
        let w = cform.abs().acosh();
        if w < hw.w_lo || w > hw.w_hi {
            continue;
        }
        let perp = match mink::meet(pole, moved) {
            mink::Meet::Disjoint { perp, .. } => perp,
            mink::Meet::Crossing(_) => continue,
        };
        let fa = mink::crossing_point(pole, perp);
        let fb_moved = mink::crossing_point(moved, perp);
        if mink::side(fb_moved, pole) <= 0.0 {
            continue;
        }
        let fb = lambda_apply_inv(&lam, fb_moved);
        let fa_back = lambda_apply_inv(&lam, fa);
        if mink::side(fa_back, pole) <= 0.0 {
            continue;
        }
        let t_raw = c.position_of(fa);
        let s_raw = c.position_of(fb);
        // antipodal defect band
        let d = (s_raw - t_raw - c.hl).rem_euclid(ell);
        let defect = d.min(ell - d);
        if defect > hw.band {
            continue;
        }
        // exact h-window on the two complementary segment lengths
        let sigma1 = (s_raw - t_raw).rem_euclid(ell);
        let sigma2 = ell - sigma1;
        if sigma1 < 1e-9 || sigma2 < 1e-9 {
            continue;
        }
        let ok = |s: f64| -> bool {
            match h_func(s, w) {
                Ok(h) => (h / 2.0 - r).abs() <= eps,
                Err(_) => false,
            }
        };
        if !ok(sigma1) || !ok(sigma2) {
            continue;
        }
        // normalize feet into [0, l)
        let ka = (t_raw / ell).floor() as i64;
        let kb = (s_raw / ell).floor() as i64;
        let t = t_raw - ka as f64 * ell;
        let s = s_raw - kb as f64 * ell;
        let dedup = (
            (t / 1e-6).round() as i64,
            (s / 1e-6).round() as i64,
            (w / 1e-6).round() as i64,
        );
        if !seen.insert(dedup) {
            continue;
        }
        let mut word = ball.word_of(idx);
        let mut mat2 = mat;
        if ka != 0 || kb != 0 {
            let pa = word_power(&c.rep, -ka);
            let pb = word_power(&c.rep, kb);
            word = pa.concat(&word).concat(&pb);
            mat2 = compose(&compose(&g.word_mat(&pa), &mat2), &g.word_mat(&pb));
        }
        out.push(OrthoArc { klass: word, mat: mat2, length: w, foot_a: t, foot_b: s });
    }
    out.sort_by(|x, y| {
        (x.foot_a, x.foot_b, x.length)
            .partial_cmp(&(y.foot_a, y.foot_b, y.length))
            .unwrap()
    });
    Ok(out)
}

/// Serializable export of one pants.
#[derive(Serialize)]
pub struct PantsExport {
    pub cuffs: Vec<CuffExport>,
    pub third_connection: Option<ThirdExport>,
}

#[derive(Serialize)]
pub struct CuffExport {
    pub word: Vec<i8>,
    pub half_length: f64,
    pub foot: f64,
}

#[derive(Serialize)]
pub struct ThirdExport {
    pub word: Vec<i8>,
    pub length: f64,
    pub foot_a: f64,
    pub foot_b: f64,
}

pub fn export_pants(p: &Pants) -> PantsExport {
    PantsExport {
        cuffs: p
            .cuffs
            .iter()
            .map(|c| CuffExport { word: c.word.0.clone(), half_length: c.hl, foot: c.foot })
            .collect(),
        third_connection: p.third.as_ref().map(|(_, t)| ThirdExport {
            word: t.klass.0.clone(),
            length: t.length,
            foot_a: t.foot_a,
            foot_b: t.foot_b,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conn::third_connections;
    use crate::formal::rat_int;
    use num::Signed;

    fn bolza_run() -> (Arc<SurfaceGroup>, Arc<CurveClass>, Vec<OrthoArc>) {
        let g = SurfaceGroup::bolza();
        let c = g.closed_geodesics(3.0, 3.1).unwrap()[0].clone();
        let etas = third_connections(&g, &c, 5.0).unwrap();
        (g, c, etas)
    }

    #[test]
    fn third_pants_cuff_words_and_abelianization() {
        let (g, c, etas) = bolza_run();
        assert!(!etas.is_empty());
        for eta in etas.iter().take(6) {
            let p = third_pants(&g, &c, eta).unwrap();
            // the curve is one cuff
            assert!(p.cuff_index(&c.rep).is_some());
            // boundary is null-homologous
            let mut total = vec![0i64; g.ngens()];
            for cuff in &p.cuffs {
                for (i, v) in cuff.word.abelianize(g.ngens()).iter().enumerate() {
                    total[i] += v;
                }
            }
            assert_eq!(total, vec![0; g.ngens()]);
        }
    }

    #[test]
    fn third_pants_cuff_lengths_match_h_func() {
        let (g, c, etas) = bolza_run();
        for eta in &etas {
            let p = third_pants(&g, &c, eta).unwrap();
            let sigma1 = (eta.foot_b - eta.foot_a).rem_euclid(c.length);
            let sigma2 = c.length - sigma1;
            let mut expected: Vec<f64> = vec![c.length];
            for s in [sigma1, sigma2] {
                if let Ok(h) = h_func(s, eta.length) {
                    expected.push(h);
                }
            }
            assert_eq!(expected.len(), 3, "h_func degenerate on a real pants");
            let mut actual: Vec<f64> = p.cuffs.iter().map(|cf| 2.0 * cf.hl).collect();
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            actual.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in expected.iter().zip(&actual) {
                assert!((a - b).abs() < 1e-6, "cuff length {b} vs h_func {a}");
            }
        }
    }

    #[test]
    fn feet_are_antipodal_seams_and_match_midpoints() {
        let (g, c, etas) = bolza_run();
        for eta in etas.iter().take(6) {
            let p = third_pants(&g, &c, eta).unwrap();
            // foot on the curve cuff = midpoint pair of the sigma segments
            let i = p.cuff_index(&c.rep).unwrap();
            let mid = (eta.foot_a + (eta.foot_b - eta.foot_a).rem_euclid(c.length) / 2.0)
                .rem_euclid(c.hl);
            let diff = (p.cuffs[i].foot - mid).rem_euclid(c.hl);
            let dist = diff.min(c.hl - diff);
            assert!(dist < 1e-6, "foot {} vs midpoint {}", p.cuffs[i].foot, mid);
        }
        // antipodality of the two seam feet on each cuff, from the based
        // cuff-word axes
        let p = third_pants(&g, &c, &etas[0]).unwrap();
        let axes: Vec<_> = p
            .cuffs
            .iter()
            .map(|cf| axis_of(&g.word_mat(&cf.word)).unwrap())
            .collect();
        for i in 0..3 {
            let (f1, _) = seam_feet(axes[i].pole, axes[(i + 1) % 3].pole).unwrap();
            let (f2, _) = seam_feet(axes[i].pole, axes[(i + 2) % 3].pole).unwrap();
            let d = (mink::form(f1, f2)).acosh();
            assert!(
                (d - axes[i].length / 2.0).abs() < 1e-6,
                "seam feet distance {d} vs half length {}",
                axes[i].length / 2.0
            );
        }
    }

    #[test]
    fn feet_sides_consistent() {
        let (g, c, etas) = bolza_run();
        let p = third_pants(&g, &c, &etas[0]).unwrap();
        // all feet on the same side across cuffs (boundary orientation)
        let sides: Vec<i8> = p.cuffs.iter().map(|cf| cf.side).collect();
        assert!(sides.iter().all(|s| *s == 1), "sides {sides:?}");
    }

    #[test]
    fn is_good_monotone() {
        let (g, c, etas) = bolza_run();
        let p = third_pants(&g, &c, &etas[0]).unwrap();
        let r = p.cuffs[0].hl;
        // with R at cuff 0's half length, the needed eps is the max deviation
        let eps_needed =
            p.cuffs.iter().map(|cf| (cf.hl - r).abs()).fold(0.0, f64::max);
        assert!(p.is_good(eps_needed + 1e-9, r));
        if eps_needed > 1e-6 {
            assert!(!p.is_good(eps_needed / 2.0, r));
        }
        assert!(p.is_good(eps_needed + 1.0, r));
    }

    #[test]
    fn boundary_and_feet_boundary() {
        let (g, c, etas) = bolza_run();
        let book = PantsBook::new();
        let p = third_pants(&g, &c, &etas[0]).unwrap();
        let (key, arc_p) = book.register(p);
        let mut mu = FormalSum::zero();
        mu.add_term(key.clone(), rat_int(1));
        let b = boundary(&g, &mu, &book).unwrap();
        // three cuffs, possibly after orientation folding
        let total_terms: i64 = b.iter().map(|(_, c)| {
            let f = crate::formal::rat_to_f64(&c.abs());
            f.round() as i64
        }).sum();
        assert_eq!(total_terms, 3);
        // abelianized boundary vanishes (signs track orientation folding)
        let mut ab = vec![0i64; g.ngens()];
        for (k, coeff) in b.iter() {
            let cls = g.class_from_word(k).unwrap();
            let sign = crate::formal::rat_to_f64(coeff);
            for (i, v) in cls.homology.iter().enumerate() {
                ab[i] += v * sign.round() as i64;
            }
        }
        assert_eq!(ab, vec![0; g.ngens()]);
        // mu - mu has empty boundary
        let mut zero = mu.clone();
        zero.add(&mu.negated());
        assert!(boundary(&g, &zero, &book).unwrap().is_zero());
        // feet measure: one atom of mass 1 on the cuff
        let fm = feet_boundary(&g, &mu, &c, &book).unwrap();
        assert_eq!(fm.total(), rat_int(1));
        assert_eq!(fm.atoms.len(), 1);
        assert!((fm.atoms[0].0 - arc_p.cuffs[arc_p.cuff_index(&c.rep).unwrap()].foot).abs() < 1e-12);
        // negative coefficients are rejected
        let neg = mu.negated();
        assert!(feet_boundary(&g, &neg, &c, &book).is_err());
    }

    #[test]
    fn region_volume_properties() {
        let g = SurfaceGroup::bolza();
        // pick a curve in the good window for (0.5, 4)
        let curves = g.closed_geodesics(7.0, 9.0).unwrap();
        let c = curves[0].clone();
        let v1 = region_volume(&c, 0.5, 4.0, 0.5).unwrap();
        let v2 = region_volume(&c, 0.5, 4.0, 1.0).unwrap();
        assert!((v2 / v1 - 2.0).abs() < 1e-6, "volume not linear in I");
        // eps scaling: Vol(eps)/eps^2 within [c, 4c] when eps halves
        let va = region_volume(&c, 0.4, 4.0, 1.0).unwrap() / (0.4f64 * 0.4);
        let vb = region_volume(&c, 0.2, 4.0, 1.0).unwrap() / (0.2f64 * 0.2);
        let ratio = va / vb;
        assert!(ratio > 0.25 && ratio < 4.0, "eps^2 scaling ratio {ratio}");
        // degenerate window
        assert!(region_volume(&c, 0.01, 1.0, 1.0).is_err());
    }

    #[test]
    fn good_pants_enumeration_small() {
        let g = SurfaceGroup::bolza();
        let run = enumerate_good_pants(&g, 0.5, 4.0).unwrap();
        assert!(!run.curves.is_empty());
        // every output passes is_good
        let mut nonzero = 0;
        for key in &run.keys {
            let p = run.book.get(key).unwrap();
            assert!(p.is_good(0.5 + 1e-9, 4.0));
            nonzero += 1;
        }
        assert!(nonzero > 0, "no good pants found at (0.5, 4)");
        // K_gamma equals the feet-measure mass
        let c = &run.curves[0];
        let fm = feet_boundary(&g, &run.mu_one(), c, &run.book).unwrap();
        // mu_one counts each pants once; K counts (pants, cuff slot) pairs
        let k = run.k_gamma(&c.rep);
        let mass = crate::formal::rat_to_f64(&fm.total());
        assert!(
            (mass - k as f64).abs() < 1e-9,
            "K_gamma {k} vs feet mass {mass}"
        );
    }
}
