//! Poincaré disk geometry: disk automorphisms, boundary points, arcs and geodesics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const TAU: f64 = 2.0 * PI;

/// Tolerance used for half-open arc membership at breakpoints.
pub const BREAK_TOL: f64 = 1e-12;

/// Below this value of |a|² the determinant is computed accurately enough to renormalize.
const RENORM_LIMIT: f64 = 1e6;

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y < 0.0 {
        y += TAU;
    }
    if y >= TAU {
        y -= TAU;
    }
    y
}

/// Anticlockwise angular distance from `from` to `to`, in `[0, 2π)`.
pub fn ccw_dist(from: f64, to: f64) -> f64 {
    wrap_angle(to - from)
}

/// A point of the unit circle, stored by its angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    angle: f64,
}

impl BoundaryPoint {
    pub fn new(angle: f64) -> Self {
        Self {
            angle: wrap_angle(angle),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.im.atan2(z.re))
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(1.0, self.angle)
    }

    /// Unsigned angular separation, in `[0, π]`.
    pub fn separation(self, other: BoundaryPoint) -> f64 {
        let d = ccw_dist(self.angle, other.angle);
        d.min(TAU - d)
    }
}

/// Left-closed, right-open arc traversed anticlockwise from `start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    start: f64,
    len: f64,
}

impl Arc {
    pub fn new(start: f64, len: f64) -> Self {
        Self {
            start: wrap_angle(start),
            len: len.clamp(0.0, TAU),
        }
    }

    pub fn full() -> Self {
        Self {
            start: 0.0,
            len: TAU,
        }
    }

    /// Anticlockwise arc from `a` to `b`.
    pub fn between(a: f64, b: f64) -> Self {
        Self::new(a, ccw_dist(a, b))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        wrap_angle(self.start + self.len)
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len <= 0.0
    }

    pub fn is_full(&self) -> bool {
        self.len >= TAU
    }

    /// Normalized Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.len / TAU
    }

    pub fn midpoint(&self) -> f64 {
        wrap_angle(self.start + 0.5 * self.len)
    }

    /// Offset of `x` from the start, with points just below the start snapped onto it.
    fn offset(&self, x: f64, tol: f64) -> f64 {
        let d = ccw_dist(self.start, x);
        if d > TAU - tol {
            0.0
        } else {
            d
        }
    }

    /// Half-open membership; a point within [`BREAK_TOL`] of an endpoint belongs to the arc on its right.
    pub fn contains(&self, x: f64) -> bool {
        if self.is_full() {
            return true;
        }
        self.offset(x, BREAK_TOL) < self.len - BREAK_TOL
    }

    /// Closed membership with an explicit tolerance.
    pub fn contains_closed(&self, x: f64, tol: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let d = ccw_dist(self.start, x);
        d <= self.len + tol || d >= TAU - tol
    }

    /// True if `other` lies inside `self` up to `tol` at the ends.
    pub fn contains_arc(&self, other: &Arc, tol: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let o = self.offset(other.start, tol);
        o + other.len <= self.len + tol
    }

    /// Intersection pieces; two arcs on a circle meet in at most two arcs.
    pub fn intersect(&self, other: &Arc) -> Vec<Arc> {
        if self.is_full() {
            return vec![*other];
        }
        if other.is_full() {
            return vec![*self];
        }
        let o = ccw_dist(self.start, other.start);
        let mut out = Vec::with_capacity(2);
        for shift in [0.0, -TAU] {
            let lo = (o + shift).max(0.0);
            let hi = (o + shift + other.len).min(self.len);
            if hi > lo {
                out.push(Arc::new(self.start + lo, hi - lo));
            }
        }
        out.sort_by(|p, q| {
            ccw_dist(self.start, p.start)
                .partial_cmp(&ccw_dist(self.start, q.start))
                .unwrap()
        });
        out
    }

    /// Image under an orientation-preserving disk automorphism.
    pub fn image(&self, g: &MoebiusTransform) -> Arc {
        if self.is_full() {
            return Arc::full();
        }
        let s = g.apply_angle(self.start);
        let e = g.apply_angle(self.start + self.len);
        let mut len = ccw_dist(s, e);
        if self.len > PI && len < 1e-9 {
            len = TAU;
        }
        Arc::new(s, len)
    }
}

/// Disk automorphism `z ↦ (a z + b) / (conj(b) z + conj(a))` with `|a|² − |b|² = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoebiusTransform {
    pub a: Complex64,
    pub b: Complex64,
}

/// Dynamical type of a disk automorphism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub kind: Kind,
    /// Boundary fixed points; for hyperbolic elements the attracting one comes first.
    pub fixed_points: Vec<BoundaryPoint>,
    pub near_parabolic: bool,
}

impl MoebiusTransform {
    pub const IDENTITY: MoebiusTransform = MoebiusTransform {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Builds a transform and rescales it to unit determinant.
    ///
    /// Panics if `|a|² − |b|²` is not positive.
    pub fn new(a: Complex64, b: Complex64) -> Self {
        let det = a.norm_sqr() - b.norm_sqr();
        assert!(det > 0.0, "|a|^2 - |b|^2 must be positive, got {det}");
        let s = det.sqrt().recip();
        Self { a: a * s, b: b * s }
    }

    /// Uses the given entries without rescaling.
    pub fn from_raw(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn rotation(theta: f64) -> Self {
        Self {
            a: Complex64::from_polar(1.0, 0.5 * theta),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// Hyperbolic translation of length `t` along the diameter pointing at angle `dir`.
    pub fn translation(dir: f64, t: f64) -> Self {
        let (s, c) = ((0.5 * t).sinh(), (0.5 * t).cosh());
        Self {
            a: Complex64::new(c, 0.0),
            b: Complex64::from_polar(s, dir),
        }
    }

    /// Automorphism sending `z` (inside the disk) to 0 with positive real derivative at `z`.
    pub fn to_origin(z: Complex64) -> Self {
        Self::new(Complex64::new(1.0, 0.0), -z)
    }

    pub fn determinant(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn renormalized(self) -> Self {
        if self.a.norm_sqr() < RENORM_LIMIT {
            let det = self.determinant();
            if det > 0.0 {
                let s = det.sqrt().recip();
                return Self {
                    a: self.a * s,
                    b: self.b * s,
                };
            }
        }
        self
    }

    /// `self ∘ h`.
    pub fn compose(&self, h: &MoebiusTransform) -> MoebiusTransform {
        self.compose_raw(h).renormalized()
    }

    /// `self ∘ h` without renormalization.
    #[inline]
    pub fn compose_raw(&self, h: &MoebiusTransform) -> MoebiusTransform {
        MoebiusTransform {
            a: self.a * h.a + self.b * h.b.conj(),
            b: self.a * h.b + self.b * h.a.conj(),
        }
    }

    pub fn inverse(&self) -> MoebiusTransform {
        MoebiusTransform {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    pub fn apply_angle(&self, theta: f64) -> f64 {
        let xi = Complex64::from_polar(1.0, theta);
        let w = self.apply(xi);
        wrap_angle(w.im.atan2(w.re))
    }

    pub fn apply_boundary(&self, p: BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::new(self.apply_angle(p.angle()))
    }

    /// `ln(|a| + |b|)`, half the hyperbolic distance from 0 to the image of 0.
    #[inline]
    pub fn log_scale(&self) -> f64 {
        let (na, nb) = (self.a.norm(), self.b.norm());
        if na > 1e150 {
            na.ln() + (1.0 + nb / na).ln()
        } else {
            (na + nb).ln()
        }
    }

    /// Hyperbolic distance `d(0, g(0))` for the curvature −1 metric.
    pub fn dist_origin(&self) -> f64 {
        2.0 * self.log_scale()
    }

    /// `exp(−β d(0, g(0)))`.
    pub fn poincare_weight(&self, beta: f64) -> f64 {
        (-2.0 * beta * self.log_scale()).exp()
    }

    /// Pieces of `|conj(b) ξ + conj(a)|²` as a function of the boundary angle:
    /// `k0 + 4 |a b| cos²((θ + phase)/2)` with `k0 = (|a| − |b|)²`.
    fn denominator_parts(&self) -> (f64, f64, f64) {
        let (na, nb) = (self.a.norm(), self.b.norm());
        let diff = if na > 1e4 {
            self.determinant_hint() / (na + nb)
        } else {
            na - nb
        };
        let c = self.a * self.b.conj();
        (diff * diff, 4.0 * na * nb, c.im.atan2(c.re))
    }

    /// `|a|² − |b|²`, taken as 1 once the entries are too large for the difference to be accurate.
    fn determinant_hint(&self) -> f64 {
        if self.a.norm_sqr() < RENORM_LIMIT {
            self.determinant()
        } else {
            1.0
        }
    }

    #[inline]
    fn denominator_at(&self, theta: f64) -> f64 {
        let (k0, k1, phase) = self.denominator_parts();
        let c = (0.5 * (theta + phase)).cos();
        k0 + k1 * c * c
    }

    /// `|g′(ξ)|` at a boundary point.
    pub fn boundary_derivative(&self, xi: BoundaryPoint) -> f64 {
        self.denominator_at(xi.angle()).recip()
    }

    /// `ln |g′(ξ)|` at the boundary angle `theta`.
    pub fn log_derivative_at(&self, theta: f64) -> f64 {
        -self.denominator_at(theta).ln()
    }

    /// Exact minimum and maximum of `ln |g′|` over the closed arc.
    pub fn log_derivative_range(&self, arc: &Arc) -> (f64, f64) {
        let (k0, k1, phase) = self.denominator_parts();
        let den = |theta: f64| {
            let c = (0.5 * (theta + phase)).cos();
            k0 + k1 * c * c
        };
        let d0 = den(arc.start());
        let d1 = den(arc.start() + arc.len());
        let mut lo = d0.min(d1);
        let mut hi = d0.max(d1);
        // cos² peaks at θ = −phase and vanishes at θ = π − phase.
        if arc.contains_closed(wrap_angle(-phase), 0.0) {
            hi = hi.max(k0 + k1);
        }
        if arc.contains_closed(wrap_angle(PI - phase), 0.0) {
            lo = lo.min(k0);
        }
        (-hi.ln(), -lo.ln())
    }

    pub fn classify(&self) -> Classification {
        const CLEAN: f64 = 1e-12;
        const BAND: f64 = 1e-9;
        let tr = self.a.re.abs();
        let dev = tr - 1.0;
        let bb = self.b.conj();
        if self.b.norm() < BAND && self.a.im.abs() < BAND {
            return Classification {
                kind: Kind::Identity,
                fixed_points: vec![],
                near_parabolic: false,
            };
        }
        if dev.abs() <= BAND {
            let z = Complex64::new(0.0, self.a.im) / bb;
            return Classification {
                kind: Kind::Parabolic,
                fixed_points: vec![BoundaryPoint::from_complex(z)],
                near_parabolic: dev.abs() > CLEAN,
            };
        }
        if dev < 0.0 {
            return Classification {
                kind: Kind::Elliptic,
                fixed_points: vec![],
                near_parabolic: false,
            };
        }
        let root = (self.a.re * self.a.re - 1.0).sqrt();
        let p = BoundaryPoint::from_complex(Complex64::new(root, self.a.im) / bb);
        let q = BoundaryPoint::from_complex(Complex64::new(-root, self.a.im) / bb);
        let (att, rep) = if self.boundary_derivative(p) < 1.0 {
            (p, q)
        } else {
            (q, p)
        };
        Classification {
            kind: Kind::Hyperbolic,
            fixed_points: vec![att, rep],
            near_parabolic: false,
        }
    }

    /// Largest absolute entry difference to `other`, comparing up to the sign of the matrix.
    pub fn entry_distance(&self, other: &MoebiusTransform) -> f64 {
        let d1 = (self.a - other.a).norm().max((self.b - other.b).norm());
        let d2 = (self.a + other.a).norm().max((self.b + other.b).norm());
        d1.min(d2)
    }

    pub fn approx_eq(&self, other: &MoebiusTransform, tol: f64) -> bool {
        self.entry_distance(other) <= tol
    }
}

/// Maps a Poincaré disk point to the Klein model.
pub fn to_klein(z: Complex64) -> Complex64 {
    z * (2.0 / (1.0 + z.norm_sqr()))
}

/// Maps a Klein model point to the Poincaré disk.
pub fn from_klein(k: Complex64) -> Complex64 {
    k / (1.0 + (1.0 - k.norm_sqr()).max(0.0).sqrt())
}

/// Parameters `(s, u)` of the crossing of chords `p0→p1` and `q0→q1`, if not parallel.
pub fn chord_crossing(
    p0: Complex64,
    p1: Complex64,
    q0: Complex64,
    q1: Complex64,
) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let cross = r.re * s.im - r.im * s.re;
    if cross.abs() < 1e-300 {
        return None;
    }
    let w = q0 - p0;
    let t = (w.re * s.im - w.im * s.re) / cross;
    let u = (w.re * r.im - w.im * r.re) / cross;
    Some((t, u))
}

/// Oriented complete geodesic, from its negative endpoint to its positive endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geodesic {
    neg: BoundaryPoint,
    pos: BoundaryPoint,
    /// Euclidean circle carrying the geodesic; `None` for a diameter.
    circle: Option<(Complex64, f64)>,
}

impl Geodesic {
    pub fn new(neg: BoundaryPoint, pos: BoundaryPoint) -> Self {
        let half = 0.5 * ccw_dist(neg.angle(), pos.angle());
        let mid = neg.angle() + half;
        let circle = if (half - 0.5 * PI).abs() < 1e-12 {
            None
        } else {
            let c = Complex64::from_polar(1.0 / half.cos(), mid);
            Some((c, half.tan().abs()))
        };
        Self { neg, pos, circle }
    }

    /// Geodesic through the interior point `z` with positive endpoint `pos`.
    pub fn through(z: Complex64, pos: BoundaryPoint) -> Self {
        let t = MoebiusTransform::to_origin(z);
        let w = t.apply(pos.to_complex());
        let neg = t.inverse().apply(-w);
        Self::new(BoundaryPoint::from_complex(neg), pos)
    }

    pub fn neg(&self) -> BoundaryPoint {
        self.neg
    }

    pub fn pos(&self) -> BoundaryPoint {
        self.pos
    }

    pub fn circle(&self) -> Option<(Complex64, f64)> {
        self.circle
    }

    pub fn is_diameter(&self) -> bool {
        self.circle.is_none()
    }

    /// Deviation from orthogonality with the unit circle: `|c|² − r² − 1`.
    pub fn orthogonality_residual(&self) -> f64 {
        match self.circle {
            None => 0.0,
            Some((c, r)) => (c.norm_sqr() - r * r - 1.0) / c.norm_sqr(),
        }
    }

    pub fn image(&self, g: &MoebiusTransform) -> Geodesic {
        Geodesic::new(g.apply_boundary(self.neg), g.apply_boundary(self.pos))
    }

    /// Intersection point inside the disk with another geodesic.
    pub fn intersection(&self, other: &Geodesic) -> Option<Complex64> {
        let (t, u) = chord_crossing(
            self.neg.to_complex(),
            self.pos.to_complex(),
            other.neg.to_complex(),
            other.pos.to_complex(),
        )?;
        if t <= 0.0 || t >= 1.0 || u <= 0.0 || u >= 1.0 {
            return None;
        }
        let k = self.neg.to_complex() + (self.pos.to_complex() - self.neg.to_complex()) * t;
        Some(from_klein(k))
    }

    /// Closest point of the geodesic to the origin.
    pub fn foot_from_origin(&self) -> Complex64 {
        match self.circle {
            None => Complex64::new(0.0, 0.0),
            Some((c, r)) => c * (1.0 - r / c.norm()),
        }
    }
}

/// Hyperbolic distance between two disk points.
pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    let m = ((z - w) / (Complex64::new(1.0, 0.0) - z.conj() * w)).norm();
    ((1.0 + m) / (1.0 - m)).ln()
}
