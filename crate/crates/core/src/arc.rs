//! Anchored lifted arcs and their developments.
//!
//! Every geometric arc the constructions touch is a geodesic segment between
//! two lifted points, each written as (anchor, word): the lift is the word's
//! matrix applied to the anchor's lift. Developing a chain of arcs multiplies
//! the gluing words exactly, so closed-up curves come out as exact words
//! while lengths and angles come from the matrices.

use crate::error::{Error, Result};
use crate::group::SurfaceGroup;
use crate::hyperbolic::{dir_toward, dist, flow_tangent, reverse_tangent, rotate, PointH, UnitTangent};
use crate::word::Word;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// A lifted unit tangent serving as a shared gluing point. Anchors are
/// content-addressed: logically equal anchors created anywhere compare equal.
#[derive(Debug)]
pub struct Anchor {
    pub id: u128,
    pub tag: String,
    pub tangent: UnitTangent,
}

fn hash_with(seed: u64, tag: &str, q: [i64; 3]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    tag.hash(&mut h);
    q.hash(&mut h);
    h.finish()
}

impl Anchor {
    pub fn new(tag: impl Into<String>, tangent: UnitTangent) -> Arc<Anchor> {
        let tag = tag.into();
        let q = [
            (tangent.base.x / 1e-9).round() as i64,
            (tangent.base.y / 1e-9).round() as i64,
            (tangent.dir / 1e-9).round() as i64,
        ];
        let id = ((hash_with(0x9e3779b9, &tag, q) as u128) << 64)
            | hash_with(0x85ebca6b, &tag, q) as u128;
        Arc::new(Anchor { id, tag, tangent })
    }

    pub fn point(&self) -> PointH {
        self.tangent.base
    }
}

/// A lifted point: word applied to the anchor's lift.
#[derive(Debug, Clone)]
pub struct LPoint {
    pub anchor: Arc<Anchor>,
    pub word: Word,
}

impl LPoint {
    pub fn at_anchor(anchor: &Arc<Anchor>) -> LPoint {
        LPoint { anchor: anchor.clone(), word: Word::empty() }
    }

    pub fn lift(&self, g: &SurfaceGroup) -> PointH {
        g.word_mat(&self.word).apply(self.anchor.point())
    }
}

/// A geodesic segment between two lifted points, with cached geometry.
#[derive(Debug, Clone)]
pub struct LArc {
    pub start: LPoint,
    pub end: LPoint,
    pub length: f64,
    /// Direction leaving the start lift.
    pub idir: UnitTangent,
    /// Direction arriving at the end lift.
    pub tdir: UnitTangent,
}

impl LArc {
    pub fn new(g: &SurfaceGroup, start: LPoint, end: LPoint) -> Result<LArc> {
        let p = start.lift(g);
        let q = end.lift(g);
        let len = dist(p, q);
        if len < 1e-12 {
            return Err(Error::Degenerate("arc endpoints coincide".into()));
        }
        let idir = UnitTangent { base: p, dir: dir_toward(p, q) };
        let tdir = reverse_tangent(&UnitTangent { base: q, dir: dir_toward(q, p) });
        Ok(LArc { start, end, length: len, idir, tdir })
    }

    /// A connection arc from anchor `a` to `w * anchor b`.
    pub fn connection(g: &SurfaceGroup, a: &Arc<Anchor>, b: &Arc<Anchor>, w: Word) -> Result<LArc> {
        LArc::new(g, LPoint::at_anchor(a), LPoint { anchor: b.clone(), word: w })
    }

    pub fn reverse(&self) -> LArc {
        LArc {
            start: self.end.clone(),
            end: self.start.clone(),
            length: self.length,
            idir: reverse_tangent(&self.tdir),
            tdir: reverse_tangent(&self.idir),
        }
    }

    /// Word of the arc with the start normalized to the bare anchor.
    pub fn klass(&self) -> Word {
        self.start.word.inverse().concat(&self.end.word)
    }

    /// Identity key: anchor ids plus the normalized word.
    pub fn key(&self) -> ArcKey {
        ArcKey {
            sa: self.start.anchor.id,
            ea: self.end.anchor.id,
            w: self.klass(),
        }
    }

    /// Key that ignores orientation (an arc and its reverse share it).
    pub fn unoriented_key(&self) -> ArcKey {
        let f = self.key();
        let r = self.reverse().key();
        if (f.sa, &f.w) <= (r.sa, &r.w) {
            f
        } else {
            r
        }
    }

    /// The tangent at the arc midpoint, pointing along the arc.
    pub fn mid_tangent(&self) -> UnitTangent {
        flow_tangent(&self.idir, self.length / 2.0)
    }

    /// Split at the midpoint: returns (first half, second half, mid anchor).
    /// The mid anchor's tangent points along the arc.
    pub fn split_mid(&self, g: &SurfaceGroup) -> Result<(LArc, LArc, Arc<Anchor>)> {
        let mt = self.mid_tangent();
        let anchor = Anchor::new("mid", mt);
        let first = LArc::new(g, self.start.clone(), LPoint::at_anchor(&anchor))?;
        let second = LArc::new(g, LPoint::at_anchor(&anchor), self.end.clone())?;
        Ok((first, second, anchor))
    }

    /// Quarter-rotated mid tangent (the i * t(A^-) vector).
    pub fn mid_normal(&self) -> UnitTangent {
        rotate(&self.mid_tangent(), std::f64::consts::FRAC_PI_2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArcKey {
    pub sa: u128,
    pub ea: u128,
    pub w: Word,
}

/// Develop a chain of arcs with matching anchors into a single composite arc
/// (the chord). Returns the composite plus the developed end point.
pub fn develop(g: &SurfaceGroup, arcs: &[&LArc]) -> Result<LArc> {
    debug_assert!(!arcs.is_empty());
    let mut kappa = Word::empty();
    for i in 0..arcs.len() - 1 {
        let e = &arcs[i].end;
        let s = &arcs[i + 1].start;
        if e.anchor.id != s.anchor.id {
            return Err(Error::Degenerate(format!(
                "chain anchors mismatch at joint {}: {} vs {}",
                i, e.anchor.tag, s.anchor.tag
            )));
        }
        kappa = kappa.concat(&e.word).concat(&s.word.inverse());
    }
    let last = &arcs[arcs.len() - 1].end;
    let end = LPoint { anchor: last.anchor.clone(), word: kappa.concat(&last.word) };
    LArc::new(g, arcs[0].start.clone(), end)
}

/// Holonomy word of a cyclic chain (last end anchor must equal the first
/// start anchor): the closed-up curve's class is this word's class.
pub fn holonomy(g: &SurfaceGroup, arcs: &[&LArc]) -> Result<Word> {
    let _ = g;
    debug_assert!(!arcs.is_empty());
    let mut kappa = Word::empty();
    for i in 0..arcs.len() {
        let e = &arcs[i].end;
        let s = &arcs[(i + 1) % arcs.len()].start;
        if e.anchor.id != s.anchor.id {
            return Err(Error::Degenerate(format!(
                "cyclic chain anchors mismatch at joint {}: {} vs {}",
                i, e.anchor.tag, s.anchor.tag
            )));
        }
        kappa = kappa.concat(&e.word).concat(&s.word.inverse());
    }
    Ok(kappa)
}
