//! Numeric verification layer for chain-closing estimates: chain and
//! right-angle chain closing, inefficiency, projection excursion, terminal
//! angle bounds.
//!
//! Exact values always come from matrix products of the lifted arcs; the
//! predictions being tested never feed back into them.

use crate::config::{C_ANG, C_CHAIN, C_RA, CHAIN_Q, EPS_MAT, EXCURSION_STEP, RA_MIN_LEN};
use crate::error::{Error, Result};
use crate::hyperbolic::{
    angle_between_dirs, compose, dist, flow_tangent, frame_at, mink, trace_length,
    MoebiusTransform, PointH, UnitTangent,
};

/// One geodesic segment of a piecewise path: start tangent (lifted) and
/// length.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub start: UnitTangent,
    pub len: f64,
}

/// A piecewise geodesic path of lifted segments with matching endpoints.
///
/// A closed path cannot return to its starting lift (the holonomy is a
/// nontrivial deck transformation), so closing data is carried explicitly:
/// `closing_bend` is the signed angle from the last arc's terminal direction
/// to the direction in which the wrapped-around first arc leaves.
#[derive(Debug, Clone)]
pub struct PiecewisePath {
    pub arcs: Vec<Segment>,
    pub closed: bool,
    pub closing_bend: f64,
}

impl PiecewisePath {
    /// Build an open path from a start tangent and (length, signed bend
    /// after the arc) steps; the last bend is ignored.
    pub fn open_chain(start: UnitTangent, steps: &[(f64, f64)]) -> PiecewisePath {
        let mut arcs = Vec::with_capacity(steps.len());
        let mut u = start;
        for (i, &(len, bend)) in steps.iter().enumerate() {
            arcs.push(Segment { start: u, len });
            if i + 1 < steps.len() {
                let t = flow_tangent(&u, len);
                u = UnitTangent { base: t.base, dir: t.dir + bend };
            }
        }
        PiecewisePath { arcs, closed: false, closing_bend: 0.0 }
    }

    /// Build a closed path: every step's bend is used, the last one as the
    /// wraparound closing bend.
    pub fn closed_chain(start: UnitTangent, steps: &[(f64, f64)]) -> PiecewisePath {
        let mut p = Self::open_chain(start, steps);
        p.closed = true;
        p.closing_bend = steps.last().map(|s| s.1).unwrap_or(0.0);
        p
    }

    pub fn n(&self) -> usize {
        self.arcs.len()
    }

    pub fn terminal(&self, i: usize) -> UnitTangent {
        flow_tangent(&self.arcs[i].start, self.arcs[i].len)
    }

    pub fn start_point(&self) -> PointH {
        self.arcs[0].start.base
    }

    pub fn end_point(&self) -> PointH {
        self.terminal(self.n() - 1).base
    }

    /// Unoriented bend angles at the joints (wraparound included if closed).
    pub fn bends(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.n() - 1 {
            let t = self.terminal(i);
            out.push(angle_between_dirs(t.dir, self.arcs[i + 1].start.dir));
        }
        if self.closed {
            out.push(self.closing_bend.abs());
        }
        out
    }

    /// Verify that consecutive lifted endpoints coincide.
    pub fn check_joints(&self) -> Result<()> {
        for i in 0..self.n() - 1 {
            let d = dist(self.terminal(i).base, self.arcs[i + 1].start.base);
            if d > EPS_MAT {
                return Err(Error::BaseMismatch(d));
            }
        }
        Ok(())
    }

    /// Holonomy of the closed-up curve.
    pub fn holonomy(&self) -> MoebiusTransform {
        debug_assert!(self.closed);
        let t = self.terminal(self.n() - 1);
        let closing = UnitTangent { base: t.base, dir: t.dir + self.closing_bend };
        compose(&frame_at(&closing), &frame_at(&self.arcs[0].start).inverse())
    }

    /// Exact closed-up length: endpoint distance for open paths, translation
    /// length of the holonomy for closed ones.
    pub fn exact_length(&self) -> Result<f64> {
        if self.closed {
            trace_length(self.holonomy().trace())
        } else {
            Ok(dist(self.start_point(), self.end_point()))
        }
    }

    pub fn total_len(&self) -> f64 {
        self.arcs.iter().map(|s| s.len).sum()
    }
}

/// Chain Lemma check: exact vs predicted (= sum of arc lengths).
pub fn close_chain(p: &PiecewisePath) -> Result<(f64, f64, f64)> {
    for (i, s) in p.arcs.iter().enumerate() {
        if s.len < CHAIN_Q {
            return Err(Error::ShortArc { index: i, len: s.len, min: CHAIN_Q });
        }
    }
    for (i, b) in p.bends().iter().enumerate() {
        if *b >= 1.0 {
            return Err(Error::WideBend { index: i, bend: *b, max: 1.0 });
        }
    }
    let exact = p.exact_length()?;
    let predicted = p.total_len();
    Ok((exact, predicted, exact - predicted))
}

/// The chain residual bound at the configured constant.
pub fn chain_bound(p: &PiecewisePath) -> f64 {
    let delta = p.bends().iter().cloned().fold(0.0, f64::max);
    C_CHAIN * p.n() as f64 * delta
}

/// Right Angle Chain check: predicted = sum - (n-1) log 2 (open) or
/// sum - n log 2 (closed).
pub fn close_right_angle_chain(p: &PiecewisePath) -> Result<(f64, f64, f64)> {
    let lmin = p.arcs.iter().map(|s| s.len).fold(f64::INFINITY, f64::min);
    for (i, s) in p.arcs.iter().enumerate() {
        if s.len < RA_MIN_LEN {
            return Err(Error::ShortArc { index: i, len: s.len, min: RA_MIN_LEN });
        }
    }
    let tol = (-lmin).exp();
    for (i, b) in p.bends().iter().enumerate() {
        let dev = (b - std::f64::consts::FRAC_PI_2).abs();
        if dev > tol {
            return Err(Error::NotRightAngle { index: i, dev, max: tol });
        }
    }
    let exact = p.exact_length()?;
    let corrections = if p.closed { p.n() } else { p.n() - 1 };
    let predicted = p.total_len() - corrections as f64 * 2f64.ln();
    Ok((exact, predicted, exact - predicted))
}

pub fn right_angle_bound(p: &PiecewisePath) -> f64 {
    let lmin = p.arcs.iter().map(|s| s.len).fold(f64::INFINITY, f64::min);
    C_RA * p.n() as f64 * (-lmin).exp()
}

/// Inefficiency of an open path: total length minus chord length.
pub fn inefficiency(p: &PiecewisePath) -> f64 {
    debug_assert!(!p.closed);
    (p.total_len() - dist(p.start_point(), p.end_point())).max(0.0)
}

/// Max distance from sampled path points to the chord geodesic segment.
pub fn projection_excursion(p: &PiecewisePath) -> Result<f64> {
    let a = p.start_point();
    let b = p.end_point();
    let chord = dist(a, b);
    if chord < 1e-9 {
        return Err(Error::DegenerateChord);
    }
    let am = mink::to_mink(a);
    let bm = mink::to_mink(b);
    let pole = mink::pole(am, bm);
    let adir = mink::tangent_toward(am, bm);
    let mut emax: f64 = 0.0;
    for s in &p.arcs {
        let mut t: f64 = 0.0;
        loop {
            let pt = crate::hyperbolic::point_at(&s.start, t.min(s.len));
            let pm = mink::to_mink(pt);
            let pos = mink::position_along(am, adir, mink::foot_on(pm, pole));
            let d = if pos < 0.0 {
                dist(pt, a)
            } else if pos > chord {
                dist(pt, b)
            } else {
                mink::signed_dist_to_geodesic(pm, pole).abs()
            };
            emax = emax.max(d);
            if t >= s.len {
                break;
            }
            t += EXCURSION_STEP;
        }
    }
    Ok(emax)
}

/// Excursion bound of Lemma "bounded distance": E <= I/2 + log 2.
pub fn excursion_bound(p: &PiecewisePath) -> f64 {
    inefficiency(p) / 2.0 + 2f64.ln()
}

/// Terminal angle check: the path's final arc is beta, everything before is
/// alpha. Measures the angle at the common endpoint between the chord of the
/// whole path and beta, against C_ANG * e^(I - l(beta)).
pub fn terminal_angle_bound(p: &PiecewisePath) -> Result<(f64, f64)> {
    debug_assert!(!p.closed);
    let n = p.n();
    if n < 2 {
        return Err(Error::Degenerate("need alpha plus a beta arc".into()));
    }
    let ineff = inefficiency(p);
    let lbeta = p.arcs[n - 1].len;
    if lbeta < ineff + 1.0 {
        return Err(Error::TooShortTail { lbeta, need: ineff + 1.0 });
    }
    let end = p.end_point();
    let chord_dir_at_end = crate::hyperbolic::dir_toward(end, p.start_point());
    let beta_dir_at_end = crate::hyperbolic::dir_toward(end, p.arcs[n - 1].start.base);
    let measured = angle_between_dirs(chord_dir_at_end, beta_dir_at_end);
    let bound = C_ANG * (ineff - lbeta).exp();
    Ok((measured, bound))
}

/// Lemma 3.7 shape: three arcs, bends at most 1.1, returns the inefficiency.
pub fn three_arc_inefficiency(p: &PiecewisePath) -> Result<f64> {
    debug_assert!(!p.closed);
    if p.n() != 3 {
        return Err(Error::Degenerate(format!("need exactly 3 arcs, got {}", p.n())));
    }
    for (i, b) in p.bends().iter().enumerate() {
        if *b > 1.1 + 1e-9 {
            return Err(Error::WideBend { index: i, bend: *b, max: 1.1 });
        }
    }
    Ok(inefficiency(p))
}
