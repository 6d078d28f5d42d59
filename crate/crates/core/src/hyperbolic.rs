//! Hyperbolic plane primitives in the upper half-plane model.
//!
//! Moebius transforms are kept projectively normalized (det = 1, sign fixed
//! by the first entry of (a, b, c, d) exceeding `SIGN_EPS` in absolute value
//! being positive), so equal isometries have bitwise-comparable entries up to
//! round-off. Geodesic/perpendicular computations go through the hyperboloid
//! model internally; see [`mink`].

use crate::config::{EPS_MAT, SIGN_EPS};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An element of PSL(2, R) acting on the upper half-plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoebiusTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// A point x + iy with y > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointH {
    pub x: f64,
    pub y: f64,
}

/// A unit tangent vector: base point plus direction angle in [0, 2pi).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UnitTangent {
    pub base: PointH,
    pub dir: f64,
}

pub fn wrap_angle(t: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = t % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    if r >= two_pi {
        r -= two_pi;
    }
    r
}

impl PointH {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(y > 0.0, "upper half-plane requires y > 0");
        PointH { x, y }
    }

    pub fn i() -> Self {
        PointH { x: 0.0, y: 1.0 }
    }
}

/// Hyperbolic distance, arccosh(1 + |p-q|^2 / (2 y_p y_q)).
pub fn dist(p: PointH, q: PointH) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let arg = 1.0 + (dx * dx + dy * dy) / (2.0 * p.y * q.y);
    // guard against arg dipping below 1 by round-off when p ~ q
    arg.max(1.0).acosh()
}

impl MoebiusTransform {
    pub fn identity() -> Self {
        MoebiusTransform { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = MoebiusTransform { a, b, c, d };
        m.normalized()
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Projective normalization: scale to det 1, then fix the sign.
    ///
    /// Products of det-1 matrices have det exactly 1; for large entries the
    /// computed determinant is dominated by cancellation noise, so rescaling
    /// by it would inject that noise into every entry. Skip the rescale when
    /// det is already 1 within noise.
    pub fn normalized(&self) -> Result<Self> {
        let det = self.det();
        let scale =
            self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs()).max(1.0);
        let noise = (scale * scale * 1e-12).max(1e-9);
        let mut m = if (det - 1.0).abs() <= noise {
            *self
        } else {
            if det <= 0.0 {
                return Err(Error::Degenerate(format!("non-positive determinant {det}")));
            }
            let s = det.sqrt().recip();
            MoebiusTransform { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
        };
        for e in [m.a, m.b, m.c, m.d] {
            if e.abs() > SIGN_EPS {
                if e < 0.0 {
                    m = MoebiusTransform { a: -m.a, b: -m.b, c: -m.c, d: -m.d };
                }
                break;
            }
        }
        Ok(m)
    }

    pub fn inverse(&self) -> Self {
        MoebiusTransform { a: self.d, b: -self.b, c: -self.c, d: self.a }
            .normalized()
            .expect("inverse of normalized transform")
    }

    pub fn apply(&self, p: PointH) -> PointH {
        // (az+b)/(cz+d) on z = x + iy
        let (x, y) = (p.x, p.y);
        let re_n = self.a * x + self.b;
        let im_n = self.a * y;
        let re_d = self.c * x + self.d;
        let im_d = self.c * y;
        let den = re_d * re_d + im_d * im_d;
        PointH { x: (re_n * re_d + im_n * im_d) / den, y: (im_n * re_d - re_n * im_d) / den }
    }

    /// Action on unit tangents: directions advance by arg g'(z) = -2 arg(cz+d).
    pub fn apply_tangent(&self, u: UnitTangent) -> UnitTangent {
        let re_d = self.c * u.base.x + self.d;
        let im_d = self.c * u.base.y;
        let dtheta = -2.0 * im_d.atan2(re_d);
        UnitTangent { base: self.apply(u.base), dir: wrap_angle(u.dir + dtheta) }
    }

    /// Displacement of the point i, a cheap proxy for word length pruning.
    pub fn displacement(&self, base: PointH) -> f64 {
        dist(base, self.apply(base))
    }

    pub fn approx_eq(&self, other: &MoebiusTransform, tol: f64) -> bool {
        (self.a - other.a).abs() <= tol
            && (self.b - other.b).abs() <= tol
            && (self.c - other.c).abs() <= tol
            && (self.d - other.d).abs() <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&MoebiusTransform::identity(), tol)
    }

    pub fn max_entry_dev(&self, other: &MoebiusTransform) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

/// Composition with projective normalization.
pub fn compose(g: &MoebiusTransform, h: &MoebiusTransform) -> MoebiusTransform {
    MoebiusTransform {
        a: g.a * h.a + g.b * h.c,
        b: g.a * h.b + g.b * h.d,
        c: g.c * h.a + g.d * h.c,
        d: g.c * h.b + g.d * h.d,
    }
    .normalized()
    .expect("composition of elements of PSL(2,R)")
}

/// Unoriented angle between two tangents at the same base point, in [0, pi].
pub fn angle(u1: &UnitTangent, u2: &UnitTangent) -> Result<f64> {
    let d = dist(u1.base, u2.base);
    if d > EPS_MAT {
        return Err(Error::BaseMismatch(d));
    }
    Ok(angle_between_dirs(u1.dir, u2.dir))
}

pub fn angle_between_dirs(a: f64, b: f64) -> f64 {
    let mut t = (a - b).abs() % std::f64::consts::TAU;
    if t > std::f64::consts::PI {
        t = std::f64::consts::TAU - t;
    }
    t
}

/// Geodesic length of a hyperbolic element from its trace: l = 2 arccosh(|t|/2).
pub fn trace_length(t: f64) -> Result<f64> {
    let h = t.abs() / 2.0;
    if h < 1.0 {
        return Err(Error::NotHyperbolic(t.abs()));
    }
    Ok(2.0 * h.acosh())
}

/// The pants trigonometry function: cosh(h/2) = sinh(a/2) sinh(b/2).
pub fn h_func(a: f64, b: f64) -> Result<f64> {
    let p = (a / 2.0).sinh() * (b / 2.0).sinh();
    if p < 1.0 {
        return Err(Error::Degenerate(format!(
            "sinh(a/2)sinh(b/2) = {p} < 1: no closed geodesic"
        )));
    }
    Ok(2.0 * p.acosh())
}

/// Rotate a tangent in place; sqrt(-1) is rotation by +pi/2.
pub fn rotate(u: &UnitTangent, theta: f64) -> UnitTangent {
    UnitTangent { base: u.base, dir: wrap_angle(u.dir + theta) }
}

pub fn reverse_tangent(u: &UnitTangent) -> UnitTangent {
    rotate(u, std::f64::consts::PI)
}

/// Hyperboloid-model helpers: points satisfy <p,p> = 1 (t > 0), geodesics are
/// spacelike poles with <w,w> = -1, with the signature (+,-,-) form.
pub mod mink {
    use super::{wrap_angle, PointH, UnitTangent};

    pub type V3 = [f64; 3];

    pub fn form(p: V3, q: V3) -> f64 {
        p[0] * q[0] - p[1] * q[1] - p[2] * q[2]
    }

    fn cross_j(p: V3, q: V3) -> V3 {
        // Euclidean cross product of Jp and Jq, J = diag(1,-1,-1).
        let jp = [p[0], -p[1], -p[2]];
        let jq = [q[0], -q[1], -q[2]];
        [
            jp[1] * jq[2] - jp[2] * jq[1],
            jp[2] * jq[0] - jp[0] * jq[2],
            jp[0] * jq[1] - jp[1] * jq[0],
        ]
    }

    pub fn to_mink(p: PointH) -> V3 {
        let n = p.x * p.x + p.y * p.y;
        [(n + 1.0) / (2.0 * p.y), (n - 1.0) / (2.0 * p.y), p.x / p.y]
    }

    pub fn to_h(p: V3) -> PointH {
        let den = p[0] - p[1];
        PointH { x: p[2] / den, y: 1.0 / den }
    }

    /// Ideal boundary point as a lightlike vector; `None` encodes infinity.
    pub fn ideal(x: Option<f64>) -> V3 {
        match x {
            None => [1.0, 1.0, 0.0],
            Some(x) => {
                let n = x * x + 1.0;
                [1.0, (x * x - 1.0) / n, 2.0 * x / n]
            }
        }
    }

    fn normalize_spacelike(w: V3) -> V3 {
        let q = -form(w, w);
        let s = q.sqrt().recip();
        [w[0] * s, w[1] * s, w[2] * s]
    }

    fn normalize_timelike(p: V3) -> V3 {
        let q = form(p, p);
        let mut s = q.sqrt().recip();
        if p[0] < 0.0 {
            s = -s;
        }
        [p[0] * s, p[1] * s, p[2] * s]
    }

    /// Oriented geodesic through two points (H-points or ideal vectors); the
    /// pole is normalized so that <p, pole> > 0 exactly for p on the right of
    /// the orientation (clockwise-normal convention).
    pub fn pole(from: V3, to: V3) -> V3 {
        normalize_spacelike(cross_j(from, to))
    }

    /// Signed side of a point relative to an oriented geodesic: positive on
    /// the right.
    pub fn side(p: V3, pole: V3) -> f64 {
        form(p, pole)
    }

    /// Signed distance from point to geodesic: sinh(d) with d signed by side.
    pub fn signed_dist_to_geodesic(p: V3, pole: V3) -> f64 {
        form(p, pole).asinh()
    }

    /// Whether two geodesics are disjoint, and their data. Returns
    /// `Crossing(point)` (timelike cross) or `Disjoint(common perpendicular
    /// pole, distance)`.
    pub enum Meet {
        Crossing(V3),
        Disjoint { perp: V3, dist: f64 },
    }

    pub fn meet(w1: V3, w2: V3) -> Meet {
        let x = cross_j(w1, w2);
        let q = form(x, x);
        if q > 0.0 {
            Meet::Crossing(normalize_timelike(x))
        } else {
            let d = form(w1, w2).abs().acosh();
            Meet::Disjoint { perp: normalize_spacelike(x), dist: d }
        }
    }

    /// Foot of the perpendicular from point p onto geodesic w.
    pub fn foot_on(p: V3, w: V3) -> V3 {
        let lam = form(p, w);
        normalize_timelike([p[0] + lam * w[0], p[1] + lam * w[1], p[2] + lam * w[2]])
    }

    /// Intersection point of two crossing geodesics (caller must know they
    /// cross, e.g. a geodesic and a perpendicular to it).
    pub fn crossing_point(w1: V3, w2: V3) -> V3 {
        normalize_timelike(cross_j(w1, w2))
    }

    /// Unit tangent (Minkowski) at `at` pointing along the geodesic toward
    /// the ideal point `li` (lightlike).
    pub fn tangent_toward_ideal(at: V3, li: V3) -> V3 {
        let lam = form(li, at);
        let x = [li[0] / lam - at[0], li[1] / lam - at[1], li[2] / lam - at[2]];
        let q = -form(x, x);
        let s = q.sqrt().recip();
        [x[0] * s, x[1] * s, x[2] * s]
    }

    /// Minkowski tangent at p toward q (distinct points).
    pub fn tangent_toward(p: V3, q: V3) -> V3 {
        let c = form(p, q);
        let d = c.max(1.0).acosh();
        let sh = d.sinh();
        debug_assert!(sh > 0.0, "tangent_toward needs distinct points");
        [(q[0] - c * p[0]) / sh, (q[1] - c * p[1]) / sh, (q[2] - c * p[2]) / sh]
    }

    /// Signed arclength coordinate of a point `f` on the oriented geodesic
    /// with unit tangent `x0dir` at its origin (f = o cosh t + dir sinh t).
    pub fn position_along(_o: V3, x0dir: V3, f: V3) -> f64 {
        (-form(f, x0dir)).asinh()
    }

    /// Flow distance t from the point with Minkowski tangent x.
    pub fn flow(p: V3, x: V3, t: f64) -> (V3, V3) {
        let (ch, sh) = (t.cosh(), t.sinh());
        (
            [p[0] * ch + x[0] * sh, p[1] * ch + x[1] * sh, p[2] * ch + x[2] * sh],
            [p[0] * sh + x[0] * ch, p[1] * sh + x[1] * ch, p[2] * sh + x[2] * ch],
        )
    }

    /// Convert a chart tangent (base, angle) to a Minkowski tangent.
    pub fn tangent_of(u: &UnitTangent) -> V3 {
        let (x, y) = (u.base.x, u.base.y);
        let (ct, st) = (u.dir.cos(), u.dir.sin());
        // orthonormal frame e_x = y * d/dx, e_y = y * d/dy at the base point
        let ex = [x, x, 1.0];
        let ey = [(y * y - x * x - 1.0) / (2.0 * y), (y * y - x * x + 1.0) / (2.0 * y), -x / y];
        [
            ct * ex[0] + st * ey[0],
            ct * ex[1] + st * ey[1],
            ct * ex[2] + st * ey[2],
        ]
    }

    /// Convert a Minkowski tangent at `p` back to a chart angle.
    pub fn angle_of(p: V3, x: V3) -> f64 {
        let h = to_h(p);
        let u_x = UnitTangent { base: h, dir: 0.0 };
        let u_y = UnitTangent { base: h, dir: std::f64::consts::FRAC_PI_2 };
        let ex = tangent_of(&u_x);
        let ey = tangent_of(&u_y);
        let cx = -form(x, ex);
        let cy = -form(x, ey);
        wrap_angle(cy.atan2(cx))
    }
}

/// Direction angle at p of the geodesic from p to q.
pub fn dir_toward(p: PointH, q: PointH) -> f64 {
    let pm = mink::to_mink(p);
    let qm = mink::to_mink(q);
    let x = mink::tangent_toward(pm, qm);
    mink::angle_of(pm, x)
}

/// Isometry taking the upward frame at i to the frame of `u`.
pub fn frame_at(u: &UnitTangent) -> MoebiusTransform {
    let (x, y) = (u.base.x, u.base.y);
    let w = MoebiusTransform { a: y.sqrt(), b: x / y.sqrt(), c: 0.0, d: 1.0 / y.sqrt() };
    let th = u.dir - std::f64::consts::FRAC_PI_2;
    let r = MoebiusTransform {
        a: (th / 2.0).cos(),
        b: (th / 2.0).sin(),
        c: -(th / 2.0).sin(),
        d: (th / 2.0).cos(),
    };
    compose(&w, &r)
}

/// Translation by `len` along the geodesic through `u`.
pub fn translation_along(u: &UnitTangent, len: f64) -> MoebiusTransform {
    let f = frame_at(u);
    let d = MoebiusTransform { a: (len / 2.0).exp(), b: 0.0, c: 0.0, d: (-len / 2.0).exp() };
    compose(&compose(&f, &d), &f.inverse())
}

/// The point (and arriving tangent) at distance t along the geodesic from u.
/// Computed through isometry frames, which keeps relative precision at large
/// distances (the hyperboloid chart cancels catastrophically there).
pub fn flow_tangent(u: &UnitTangent, t: f64) -> UnitTangent {
    let f = frame_at(u);
    let up_t = UnitTangent {
        base: PointH { x: 0.0, y: t.exp() },
        dir: std::f64::consts::FRAC_PI_2,
    };
    f.apply_tangent(up_t)
}

pub fn point_at(u: &UnitTangent, t: f64) -> PointH {
    flow_tangent(u, t).base
}

/// Oriented axis data of a hyperbolic transform.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    /// Repelling ideal point (lightlike vector).
    pub src: mink::V3,
    /// Attracting ideal point (lightlike vector).
    pub dst: mink::V3,
    /// Pole of the oriented axis.
    pub pole: mink::V3,
    pub length: f64,
}

/// Axis of a hyperbolic element, oriented by its translation direction.
pub fn axis_of(m: &MoebiusTransform) -> Result<Axis> {
    let length = trace_length(m.trace())?;
    let (fp_att, fp_rep): (Option<f64>, Option<f64>) = if m.c.abs() > 1e-12 {
        let disc = (m.trace() * m.trace() - 4.0).max(0.0).sqrt();
        let r1 = (m.a - m.d + disc) / (2.0 * m.c);
        let r2 = (m.a - m.d - disc) / (2.0 * m.c);
        // attracting fixed point has |cx + d| > 1
        if (m.c * r1 + m.d).abs() > 1.0 {
            (Some(r1), Some(r2))
        } else {
            (Some(r2), Some(r1))
        }
    } else {
        let other = m.b / (m.d - m.a);
        if m.a.abs() > m.d.abs() {
            (None, Some(other))
        } else {
            (Some(other), None)
        }
    };
    let src = mink::ideal(fp_rep);
    let dst = mink::ideal(fp_att);
    Ok(Axis { src, dst, pole: mink::pole(src, dst), length })
}
