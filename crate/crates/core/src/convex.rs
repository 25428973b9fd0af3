//! Exact convex calculus on the real line.
//!
//! A [`Plq`] is a closed proper convex function that is piecewise
//! linear-quadratic: on each interval between consecutive breakpoints it is
//! `a·x² + b·x + c` with `a ≥ 0`, and it is `+inf` outside a closed domain
//! interval. Conjugates, recession functions and subdifferentials of such
//! functions are again explicit, so every identity can be checked with plain
//! floating point arithmetic instead of an optimiser.
//!
//! Multidimensional integrands are sums of one-dimensional pieces
//! ([`SeparableFn`]); all calculus then acts coordinate-wise.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Equality tolerance used for derived quantities (continuity, convexity).
pub const TOL: f64 = 1e-9;

/// Relative distance below which a point counts as on a domain endpoint.
pub const DOMAIN_SLACK: f64 = 1e-12;

const INF: f64 = f64::INFINITY;
const NEG_INF: f64 = f64::NEG_INFINITY;

/// The quadratic `a·x² + b·x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quad {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Quad { a, b, c }
    }

    pub const fn linear(b: f64, c: f64) -> Self {
        Quad { a: 0.0, b, c }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.a == 0.0 {
            self.b * x + self.c
        } else {
            (self.a * x + self.b) * x + self.c
        }
    }

    /// Derivative at `x`; at `x = ±inf` this is the limiting slope.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        if self.a == 0.0 {
            self.b
        } else {
            2.0 * self.a * x + self.b
        }
    }

    fn add(&self, other: &Quad) -> Quad {
        Quad::new(self.a + other.a, self.b + other.b, self.c + other.c)
    }

    fn scale(&self, k: f64) -> Quad {
        Quad::new(self.a * k, self.b * k, self.c * k)
    }

    /// Minimum of the quadratic over `[l, r]`, returned with a minimiser.
    fn min_on(&self, l: f64, r: f64) -> (f64, f64) {
        if self.a > 0.0 {
            let x = (-self.b / (2.0 * self.a)).clamp(l, r);
            (self.eval(x), x)
        } else if self.b > 0.0 {
            if l == NEG_INF {
                (NEG_INF, NEG_INF)
            } else {
                (self.eval(l), l)
            }
        } else if self.b < 0.0 {
            if r == INF {
                (NEG_INF, INF)
            } else {
                (self.eval(r), r)
            }
        } else {
            let x = if l.is_finite() {
                l
            } else if r.is_finite() {
                r
            } else {
                0.0
            };
            (self.c, x)
        }
    }
}

/// A closed interval with endpoints in the extended reals. Empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: INF, hi: NEG_INF };
    pub const REALS: Interval = Interval {
        lo: NEG_INF,
        hi: INF,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    /// Membership with an absolute slack `tol` on finite endpoints.
    pub fn contains(&self, y: f64, tol: f64) -> bool {
        !self.is_empty() && y >= self.lo - tol && y <= self.hi + tol
    }

    /// Distance from `y` to the interval (`+inf` when empty).
    pub fn distance(&self, y: f64) -> f64 {
        if self.is_empty() {
            INF
        } else if y < self.lo {
            self.lo - y
        } else if y > self.hi {
            y - self.hi
        } else {
            0.0
        }
    }

    /// A representative element: the midpoint of a bounded interval, the
    /// finite endpoint of a half-line, zero for the whole line.
    pub fn representative(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        Some(match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo.max(0.0),
            (false, true) => self.hi.min(0.0),
            (false, false) => 0.0,
        })
    }
}

/// Subdifferential of a separable function: one closed interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdiffSet {
    pub coords: Vec<Interval>,
}

impl SubdiffSet {
    pub fn is_empty(&self) -> bool {
        self.coords.iter().any(Interval::is_empty)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.coords.len() && self.coords.iter().zip(y).all(|(i, &v)| i.contains(v, tol))
    }

    /// Largest coordinate-wise distance from `y` to the set.
    pub fn distance(&self, y: &[f64]) -> f64 {
        self.coords
            .iter()
            .zip(y)
            .map(|(i, &v)| i.distance(v))
            .fold(0.0, f64::max)
    }

    pub fn representative(&self) -> Option<Vec<f64>> {
        self.coords.iter().map(Interval::representative).collect()
    }
}

/// A closed proper convex piecewise linear-quadratic function on ℝ.
///
/// `pieces[i]` is active on `[x_i, x_{i+1}]` where `x_0 = lo`,
/// `x_{n} = hi` and the interior `x_i` are the breakpoints. Values at a
/// breakpoint resolve to the smaller of the two adjacent pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Plq {
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    pieces: Vec<Quad>,
}

enum Segment {
    Span { lo: f64, hi: f64, q: Quad },
    Point { y: f64, value: f64 },
}

impl Plq {
    /// Builds and validates a PLQ function.
    pub fn new(lo: f64, hi: f64, breaks: Vec<f64>, pieces: Vec<Quad>) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::Improper("NaN domain endpoint".into()));
        }
        if lo > hi || lo == INF || hi == NEG_INF {
            return Err(Error::Improper(format!("empty domain [{lo}, {hi}]")));
        }
        if pieces.len() != breaks.len() + 1 {
            return Err(Error::Invalid(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len() + 1,
                pieces.len()
            )));
        }
        for q in &pieces {
            if !(q.a.is_finite() && q.b.is_finite() && q.c.is_finite()) {
                return Err(Error::Improper(format!("non-finite coefficients {q:?}")));
            }
            if q.a < 0.0 {
                return Err(Error::NotConvex(format!("negative curvature {q:?}")));
            }
        }
        if lo == hi && !breaks.is_empty() {
            return Err(Error::Invalid("point domain cannot have breakpoints".into()));
        }
        let mut prev = lo;
        for &b in &breaks {
            if !b.is_finite() || b <= prev || b >= hi {
                return Err(Error::Invalid(format!(
                    "breakpoint {b} not strictly increasing inside ({lo}, {hi})"
                )));
            }
            prev = b;
        }
        for (i, &x) in breaks.iter().enumerate() {
            let (l, r) = (pieces[i], pieces[i + 1]);
            let (vl, vr) = (l.eval(x), r.eval(x));
            if (vl - vr).abs() > TOL * (1.0 + vl.abs().max(vr.abs())) {
                return Err(Error::Invalid(format!(
                    "discontinuity at breakpoint {x}: {vl} vs {vr}"
                )));
            }
            let (dl, dr) = (l.deriv(x), r.deriv(x));
            if dl > dr + TOL * (1.0 + dl.abs().max(dr.abs())) {
                return Err(Error::NotConvex(format!(
                    "slope decreases at {x}: {dl} > {dr}"
                )));
            }
        }
        Ok(Plq {
            lo,
            hi,
            breaks,
            pieces,
        })
    }

    /// Internal constructor for results of exact calculus.
    fn raw(lo: f64, hi: f64, breaks: Vec<f64>, pieces: Vec<Quad>) -> Self {
        debug_assert_eq!(pieces.len(), breaks.len() + 1);
        Plq {
            lo,
            hi,
            breaks,
            pieces,
        }
    }

    pub fn quadratic(a: f64, b: f64, c: f64) -> Result<Self> {
        Plq::new(NEG_INF, INF, vec![], vec![Quad::new(a, b, c)])
    }

    /// `x²/2`, its own conjugate.
    pub fn half_square() -> Self {
        Plq::raw(NEG_INF, INF, vec![], vec![Quad::new(0.5, 0.0, 0.0)])
    }

    pub fn zero() -> Self {
        Plq::raw(NEG_INF, INF, vec![], vec![Quad::linear(0.0, 0.0)])
    }

    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        Plq::new(NEG_INF, INF, vec![], vec![Quad::linear(slope, intercept)])
    }

    /// `k·|x|`.
    pub fn abs_scaled(k: f64) -> Result<Self> {
        if k < 0.0 {
            return Err(Error::NotConvex(format!("k·|x| with k = {k}")));
        }
        Plq::new(
            NEG_INF,
            INF,
            vec![0.0],
            vec![Quad::linear(-k, 0.0), Quad::linear(k, 0.0)],
        )
    }

    pub fn abs() -> Self {
        Plq::abs_scaled(1.0).expect("valid")
    }

    /// Indicator of the closed interval `[lo, hi]`.
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Plq::new(lo, hi, vec![], vec![Quad::linear(0.0, 0.0)])
    }

    /// Support function of `[lo, hi]`, the conjugate of its indicator.
    pub fn support(lo: f64, hi: f64) -> Result<Self> {
        Plq::indicator(lo, hi)?.conjugate()
    }

    pub fn domain(&self) -> Interval {
        Interval::new(self.lo, self.hi)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Quad] {
        &self.pieces
    }

    fn knots(&self) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.breaks.len() + 2);
        xs.push(self.lo);
        xs.extend_from_slice(&self.breaks);
        xs.push(self.hi);
        xs
    }

    /// `x` itself inside the domain, or the nearest endpoint when `x` misses
    /// it by rounding only.
    fn snap(&self, x: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        if x >= self.lo && x <= self.hi {
            return Some(x);
        }
        let near = |e: f64| e.is_finite() && (x - e).abs() <= DOMAIN_SLACK * (1.0 + e.abs());
        if x < self.lo && near(self.lo) {
            Some(self.lo)
        } else if x > self.hi && near(self.hi) {
            Some(self.hi)
        } else {
            None
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        self.snap(x).is_some()
    }

    /// True when the function is the indicator of its domain.
    pub fn is_indicator(&self) -> bool {
        self.pieces
            .iter()
            .all(|q| q.a == 0.0 && q.b == 0.0 && q.c == 0.0)
    }

    /// True when the domain is the whole line.
    pub fn is_finite_everywhere(&self) -> bool {
        self.lo == NEG_INF && self.hi == INF
    }

    /// True when the function is `δ_{{0}}`.
    pub fn is_zero_indicator(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0 && self.pieces[0].c == 0.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let Some(x) = self.snap(x) else {
            return INF;
        };
        let idx = self.breaks.partition_point(|&b| b < x);
        if idx < self.breaks.len() && self.breaks[idx] == x {
            self.pieces[idx].eval(x).min(self.pieces[idx + 1].eval(x))
        } else {
            self.pieces[idx].eval(x)
        }
    }

    /// Right derivative on `[lo, hi)`; `+inf` at `hi`; NaN outside the domain.
    pub fn right_derivative(&self, x: f64) -> f64 {
        let Some(x) = self.snap(x) else {
            return f64::NAN;
        };
        if x == self.hi {
            return INF;
        }
        let idx = self.breaks.partition_point(|&b| b <= x);
        self.pieces[idx].deriv(x)
    }

    /// Left derivative on `(lo, hi]`; `-inf` at `lo`; NaN outside the domain.
    pub fn left_derivative(&self, x: f64) -> f64 {
        let Some(x) = self.snap(x) else {
            return f64::NAN;
        };
        if x == self.lo {
            return NEG_INF;
        }
        let idx = self.breaks.partition_point(|&b| b < x);
        self.pieces[idx].deriv(x)
    }

    /// The exact subdifferential at `x`; empty outside the domain.
    pub fn subdifferential(&self, x: f64) -> Interval {
        if !x.is_finite() || !self.in_domain(x) {
            return Interval::EMPTY;
        }
        Interval::new(self.left_derivative(x), self.right_derivative(x))
    }

    /// The Legendre-Fenchel conjugate, computed piece by piece.
    ///
    /// Kinks (including finite domain ends) become linear pieces of the
    /// conjugate, strictly convex quadratic pieces become quadratic pieces,
    /// and linear pieces collapse to breakpoints.
    pub fn conjugate(&self) -> Result<Plq> {
        let segments = self.conjugate_segments();
        let lo = match segments.first() {
            Some(Segment::Span { lo, .. }) => *lo,
            Some(Segment::Point { y, .. }) => *y,
            None => return Err(Error::Improper("empty conjugate".into())),
        };
        let hi = match segments.last() {
            Some(Segment::Span { hi, .. }) => *hi,
            Some(Segment::Point { y, .. }) => *y,
            None => unreachable!(),
        };
        let mut breaks = Vec::new();
        let mut pieces: Vec<Quad> = Vec::new();
        let mut last_hi = NEG_INF;
        for seg in &segments {
            if let Segment::Span { lo: sl, hi: sh, q } = seg {
                if !is_long(*sl, *sh) {
                    continue;
                }
                if !pieces.is_empty() {
                    breaks.push(last_hi.max(*sl).min(*sh));
                }
                pieces.push(*q);
                last_hi = *sh;
            }
        }
        if pieces.is_empty() {
            let (y, value) = match &segments[0] {
                Segment::Point { y, value } => (*y, *value),
                Segment::Span { lo, q, .. } => (*lo, q.eval(*lo)),
            };
            return Ok(Plq::raw(y, y, vec![], vec![Quad::linear(0.0, value)]));
        }
        // Breakpoints pushed from rounded segment ends may collide; drop those.
        let mut kept_breaks = Vec::with_capacity(breaks.len());
        let mut kept_pieces = vec![pieces[0]];
        for (i, &b) in breaks.iter().enumerate() {
            let prev = kept_breaks.last().copied().unwrap_or(lo);
            if b > prev && b < hi {
                kept_breaks.push(b);
                kept_pieces.push(pieces[i + 1]);
            } else {
                *kept_pieces.last_mut().unwrap() = pieces[i + 1];
            }
        }
        Ok(Plq::raw(lo, hi, kept_breaks, kept_pieces))
    }

    fn conjugate_segments(&self) -> Vec<Segment> {
        let mut segs = Vec::new();
        let kink = |x: f64, value: f64, l: f64, r: f64| Segment::Span {
            lo: l,
            hi: r,
            q: Quad::linear(x, -value),
        };
        if self.lo == self.hi {
            segs.push(kink(self.lo, self.pieces[0].eval(self.lo), NEG_INF, INF));
            return segs;
        }
        let xs = self.knots();
        let n = self.pieces.len();
        if self.lo.is_finite() {
            let p = &self.pieces[0];
            segs.push(kink(self.lo, p.eval(self.lo), NEG_INF, p.deriv(self.lo)));
        }
        for i in 0..n {
            let (l, r) = (xs[i], xs[i + 1]);
            let q = self.pieces[i];
            if i > 0 {
                let prev = self.pieces[i - 1];
                let value = prev.eval(l).min(q.eval(l));
                segs.push(kink(l, value, prev.deriv(l), q.deriv(l)));
            }
            if q.a > 0.0 {
                let conj = Quad::new(
                    0.25 / q.a,
                    -q.b / (2.0 * q.a),
                    q.b * q.b / (4.0 * q.a) - q.c,
                );
                segs.push(Segment::Span {
                    lo: q.deriv(l),
                    hi: q.deriv(r),
                    q: conj,
                });
            } else {
                segs.push(Segment::Point {
                    y: q.b,
                    value: -q.c,
                });
            }
        }
        if self.hi.is_finite() {
            let p = &self.pieces[n - 1];
            segs.push(kink(self.hi, p.eval(self.hi), p.deriv(self.hi), INF));
        }
        segs
    }

    /// Limiting slopes `(inf dom f*, sup dom f*)` read off the tails of `f`.
    fn tail_slopes(&self) -> (f64, f64) {
        let left = if self.lo > NEG_INF {
            NEG_INF
        } else {
            let q = self.pieces[0];
            if q.a > 0.0 {
                NEG_INF
            } else {
                q.b
            }
        };
        let right = if self.hi < INF {
            INF
        } else {
            let q = self.pieces[self.pieces.len() - 1];
            if q.a > 0.0 {
                INF
            } else {
                q.b
            }
        };
        (left, right)
    }

    /// The recession function `f^∞`, the support function of `dom f*`.
    pub fn recession(&self) -> Plq {
        let (ml, mr) = self.tail_slopes();
        let lo = if ml.is_finite() { NEG_INF } else { 0.0 };
        let hi = if mr.is_finite() { INF } else { 0.0 };
        match (lo < 0.0, hi > 0.0) {
            (true, true) if ml != mr => Plq::raw(
                lo,
                hi,
                vec![0.0],
                vec![Quad::linear(ml, 0.0), Quad::linear(mr, 0.0)],
            ),
            (true, true) => Plq::raw(lo, hi, vec![], vec![Quad::linear(mr, 0.0)]),
            (true, false) => Plq::raw(lo, hi, vec![], vec![Quad::linear(ml, 0.0)]),
            (false, true) => Plq::raw(lo, hi, vec![], vec![Quad::linear(mr, 0.0)]),
            (false, false) => Plq::raw(0.0, 0.0, vec![], vec![Quad::linear(0.0, 0.0)]),
        }
    }

    /// `f(x) + f*(y) - x·y`, `+inf` when either term is.
    pub fn fenchel_gap(&self, x: f64, y: f64) -> Result<f64> {
        let fx = self.eval(x);
        let fy = self.conjugate()?.eval(y);
        Ok(fenchel_gap_with(fx, fy, x, y))
    }

    /// Infimum and one minimiser; `-inf` when unbounded below.
    pub fn infimum(&self) -> (f64, f64) {
        if self.lo == self.hi {
            return (self.pieces[0].eval(self.lo), self.lo);
        }
        let xs = self.knots();
        let mut best = (INF, 0.0);
        for (i, q) in self.pieces.iter().enumerate() {
            let cand = q.min_on(xs[i], xs[i + 1]);
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }

    /// Points where the slope first reaches `-k` and last stays below `k`:
    /// `(inf {x : f'_+(x) ≥ -k}, sup {x : f'_-(x) ≤ k})`. For `k = 0` this is
    /// the hull of the argmin set. `None` if the function has no slope in
    /// `[-k, k]` anywhere (unbounded below along a tail when `k = 0`).
    pub fn slope_window(&self, k: f64) -> Option<(f64, f64)> {
        if self.lo == self.hi {
            return Some((self.lo, self.lo));
        }
        let xs = self.knots();
        let n = self.pieces.len();
        let mut left = None;
        for i in 0..n {
            let q = self.pieces[i];
            let (l, r) = (xs[i], xs[i + 1]);
            let dl = if l == NEG_INF && q.a > 0.0 { NEG_INF } else { q.deriv(l) };
            if dl >= -k {
                left = Some(l);
                break;
            }
            let dr = if r == INF && q.a > 0.0 { INF } else { q.deriv(r) };
            if dr >= -k {
                // only a strictly convex piece can cross inside
                left = Some(((-k - q.b) / (2.0 * q.a)).clamp(l, r));
                break;
            }
        }
        if left.is_none() && self.hi.is_finite() {
            left = Some(self.hi);
        }
        let mut right = None;
        for i in (0..n).rev() {
            let q = self.pieces[i];
            let (l, r) = (xs[i], xs[i + 1]);
            let dr = if r == INF && q.a > 0.0 { INF } else { q.deriv(r) };
            if dr <= k {
                right = Some(r);
                break;
            }
            let dl = if l == NEG_INF && q.a > 0.0 { NEG_INF } else { q.deriv(l) };
            if dl <= k {
                right = Some(((k - q.b) / (2.0 * q.a)).clamp(l, r));
                break;
            }
        }
        if right.is_none() && self.lo.is_finite() {
            right = Some(self.lo);
        }
        match (left, right) {
            (Some(a), Some(b)) if a <= b => Some((a, b)),
            (Some(a), Some(b)) if k > 0.0 => Some((b.min(a), a.max(b))),
            _ => None,
        }
    }

    /// `f` restricted to `[a, b] ∩ dom f`; `None` if the intersection is empty.
    pub fn restrict(&self, a: f64, b: f64) -> Option<Plq> {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if lo > hi {
            return None;
        }
        if lo == hi {
            return Some(Plq::raw(lo, lo, vec![], vec![Quad::linear(0.0, self.eval(lo))]));
        }
        let first = self.breaks.partition_point(|&x| x <= lo);
        let last = self.breaks.partition_point(|&x| x < hi);
        let breaks = self.breaks[first..last].to_vec();
        let pieces = self.pieces[first..=last].to_vec();
        Some(Plq::raw(lo, hi, breaks, pieces))
    }

    /// Pointwise sum; `None` when the domains do not meet.
    pub fn add(&self, other: &Plq) -> Option<Plq> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo > hi {
            return None;
        }
        if lo == hi {
            let v = self.eval(lo) + other.eval(lo);
            return Some(Plq::raw(lo, lo, vec![], vec![Quad::linear(0.0, v)]));
        }
        let mut breaks: Vec<f64> = self
            .breaks
            .iter()
            .chain(other.breaks.iter())
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        breaks.dedup();
        let mut xs = Vec::with_capacity(breaks.len() + 2);
        xs.push(lo);
        xs.extend_from_slice(&breaks);
        xs.push(hi);
        let pieces = xs
            .windows(2)
            .map(|w| {
                let probe = interior_probe(w[0], w[1]);
                self.piece_at(probe).add(&other.piece_at(probe))
            })
            .collect();
        Some(Plq::raw(lo, hi, breaks, pieces))
    }

    fn piece_at(&self, x: f64) -> Quad {
        let idx = self.breaks.partition_point(|&b| b < x);
        self.pieces[idx.min(self.pieces.len() - 1)]
    }

    /// `k·f` for `k > 0`.
    pub fn scale(&self, k: f64) -> Result<Plq> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Invalid(format!("scale factor {k} must be positive")));
        }
        Ok(Plq::raw(
            self.lo,
            self.hi,
            self.breaks.clone(),
            self.pieces.iter().map(|q| q.scale(k)).collect(),
        ))
    }

    /// `δ_{dom f}`, the limit of `k·f` as `k → 0+`.
    pub fn domain_indicator(&self) -> Plq {
        Plq::raw(self.lo, self.hi, vec![], vec![Quad::linear(0.0, 0.0)])
    }

    /// Infimal convolution with `k·|·|`, i.e. `min_u f(u) + k|x - u|`, together
    /// with the window `[a, b]` onto which the minimising `u` is the projection
    /// of `x`. `None` when the result is `-inf`.
    pub fn inf_conv_abs(&self, k: f64) -> Option<(Plq, (f64, f64))> {
        let (a, b) = self.slope_window(k)?;
        let mut breaks = Vec::new();
        let mut pieces = Vec::new();
        if a > NEG_INF {
            let fa = self.eval(a);
            pieces.push(Quad::linear(-k, fa + k * a));
        }
        if a < b {
            let mid = self.restrict(a, b).expect("window inside domain");
            if !pieces.is_empty() {
                breaks.push(a);
            }
            breaks.extend_from_slice(&mid.breaks);
            pieces.extend_from_slice(&mid.pieces);
        }
        if b < INF {
            let fb = self.eval(b);
            let q = Quad::linear(k, fb - k * b);
            if !pieces.is_empty() {
                breaks.push(b);
            }
            pieces.push(q);
        }
        // k = 0 with a = b gives two identical flat pieces.
        if pieces.len() == 2 && breaks.len() == 1 && pieces[0] == pieces[1] {
            breaks.clear();
            pieces.truncate(1);
        }
        Some((Plq::raw(NEG_INF, INF, breaks, pieces), (a, b)))
    }
}

fn is_long(lo: f64, hi: f64) -> bool {
    if lo == NEG_INF || hi == INF {
        return lo < hi;
    }
    hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs()))
}

fn interior_probe(l: f64, r: f64) -> f64 {
    match (l.is_finite(), r.is_finite()) {
        (true, true) => 0.5 * (l + r),
        (true, false) => l + 1.0,
        (false, true) => r - 1.0,
        (false, false) => 0.0,
    }
}

/// `fx + fy - x·y` with the convention that any `+inf` term wins.
pub fn fenchel_gap_with(fx: f64, fy: f64, x: f64, y: f64) -> f64 {
    if fx == INF || fy == INF {
        INF
    } else {
        fx + fy - x * y
    }
}

/// Discrete Legendre transform `q ↦ max_i (q·x_i - f_i)` of sampled values.
///
/// Always a lower bound on the true conjugate; refining the samples can only
/// raise it.
pub fn grid_legendre(samples: &[(f64, f64)], queries: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::Invalid(format!(
            "grid_legendre needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    for w in samples.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(Error::Invalid("sample points must be strictly increasing".into()));
        }
    }
    if samples.iter().any(|s| !s.1.is_finite() || !s.0.is_finite()) {
        return Err(Error::Invalid("sample values must be finite".into()));
    }
    Ok(queries
        .iter()
        .map(|&q| {
            samples
                .iter()
                .map(|&(x, fx)| q * x - fx)
                .fold(NEG_INF, f64::max)
        })
        .collect())
}

/// A sum `h(x) = Σ_i h_i(x_i)` of one-dimensional PLQ functions.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFn {
    comps: Vec<Plq>,
}

impl SeparableFn {
    pub fn new(comps: Vec<Plq>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::Invalid("separable function needs dimension ≥ 1".into()));
        }
        Ok(SeparableFn { comps })
    }

    /// The same one-dimensional function on every coordinate.
    pub fn uniform(f: Plq, dim: usize) -> Self {
        SeparableFn {
            comps: vec![f; dim.max(1)],
        }
    }

    pub fn scalar(f: Plq) -> Self {
        SeparableFn { comps: vec![f] }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Plq] {
        &self.comps
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.comps.len());
        let mut total = 0.0;
        for (f, &xi) in self.comps.iter().zip(x) {
            let v = f.eval(xi);
            if v == INF {
                return INF;
            }
            total += v;
        }
        total
    }

    pub fn conjugate(&self) -> Result<SeparableFn> {
        Ok(SeparableFn {
            comps: self.comps.iter().map(Plq::conjugate).collect::<Result<_>>()?,
        })
    }

    pub fn recession(&self) -> SeparableFn {
        SeparableFn {
            comps: self.comps.iter().map(Plq::recession).collect(),
        }
    }

    pub fn domain_indicator(&self) -> SeparableFn {
        SeparableFn {
            comps: self.comps.iter().map(Plq::domain_indicator).collect(),
        }
    }

    pub fn subdifferential(&self, x: &[f64]) -> SubdiffSet {
        SubdiffSet {
            coords: self
                .comps
                .iter()
                .zip(x)
                .map(|(f, &xi)| f.subdifferential(xi))
                .collect(),
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.comps.iter().zip(x).all(|(f, &xi)| f.in_domain(xi))
    }

    pub fn infimum(&self) -> f64 {
        self.comps.iter().map(|f| f.infimum().0).sum()
    }

    pub fn fenchel_gap(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let fx = self.eval(x);
        let fy = self.conjugate()?.eval(y);
        if fx == INF || fy == INF {
            return Ok(INF);
        }
        Ok(fx + fy - x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn is_indicator(&self) -> bool {
        self.comps.iter().all(Plq::is_indicator)
    }

    pub fn is_finite_everywhere(&self) -> bool {
        self.comps.iter().all(Plq::is_finite_everywhere)
    }

    pub fn is_zero_indicator(&self) -> bool {
        self.comps.iter().all(Plq::is_zero_indicator)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.is_indicator() && self.is_finite_everywhere()
    }

    /// `h^∞ = δ_{{0}}`: every conjugate has full domain.
    pub fn is_coercive(&self) -> bool {
        self.comps.iter().all(|f| {
            let (l, r) = f.tail_slopes();
            l == NEG_INF && r == INF
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a == b) || (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn half_square_is_self_conjugate() {
        let f = Plq::half_square();
        let g = f.conjugate().unwrap();
        for y in [-3.0, -0.5, 0.0, 1.0, 7.5] {
            assert!(close(g.eval(y), y * y / 2.0));
        }
    }

    #[test]
    fn zero_indicator_conjugates_to_zero() {
        let f = Plq::indicator(0.0, 0.0).unwrap();
        let g = f.conjugate().unwrap();
        for y in [-4.0, 0.0, 2.5] {
            assert_eq!(g.eval(y), 0.0);
        }
    }

    #[test]
    fn abs_conjugates_to_unit_interval_indicator() {
        let g = Plq::abs().conjugate().unwrap();
        assert_eq!(g.domain(), Interval::new(-1.0, 1.0));
        assert_eq!(g.eval(0.3), 0.0);
        assert_eq!(g.eval(-1.0), 0.0);
        assert_eq!(g.eval(1.0 + 1e-9), INF);
    }

    #[test]
    fn linear_function_conjugates_to_point() {
        let f = Plq::affine(2.0, 3.0).unwrap();
        let g = f.conjugate().unwrap();
        assert_eq!(g.domain(), Interval::point(2.0));
        assert_eq!(g.eval(2.0), -3.0);
    }

    #[test]
    fn recession_examples() {
        let r = Plq::half_square().recession();
        assert_eq!(r.domain(), Interval::point(0.0));
        let r = Plq::abs().recession();
        for d in [-2.0, 0.0, 3.0] {
            assert_eq!(r.eval(d), d.abs());
        }
        let r = Plq::indicator(0.0, 1.0).unwrap().recession();
        assert_eq!(r.domain(), Interval::point(0.0));
        assert_eq!(r.eval(0.0), 0.0);
    }

    #[test]
    fn subdifferential_examples() {
        assert_eq!(Plq::abs().subdifferential(0.0), Interval::new(-1.0, 1.0));
        assert_eq!(Plq::half_square().subdifferential(1.0), Interval::point(1.0));
        assert_eq!(
            Plq::indicator(0.0, 1.0).unwrap().subdifferential(1.0),
            Interval::new(0.0, INF)
        );
        assert!(Plq::indicator(0.0, 1.0).unwrap().subdifferential(2.0).is_empty());
    }

    #[test]
    fn fenchel_gap_examples() {
        let f = Plq::half_square();
        assert_eq!(f.fenchel_gap(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(f.fenchel_gap(1.0, 0.0).unwrap(), 0.5);
        assert_eq!(Plq::abs().fenchel_gap(0.0, 2.0).unwrap(), INF);
    }

    #[test]
    fn grid_legendre_examples() {
        let sq = [(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)];
        assert_eq!(grid_legendre(&sq, &[0.0, 2.0]).unwrap(), vec![0.0, 1.0]);
        let zero = [(-2.0, 0.0), (3.0, 0.0)];
        assert_eq!(grid_legendre(&zero, &[0.0]).unwrap(), vec![0.0]);
        assert!(grid_legendre(&[(0.0, 0.0)], &[0.0]).is_err());
    }

    #[test]
    fn improper_and_nonconvex_inputs_are_rejected() {
        assert!(matches!(Plq::indicator(1.0, 0.0), Err(Error::Improper(_))));
        assert!(matches!(
            Plq::quadratic(-1.0, 0.0, 0.0),
            Err(Error::NotConvex(_))
        ));
        assert!(matches!(
            Plq::new(
                NEG_INF,
                INF,
                vec![0.0],
                vec![Quad::linear(1.0, 0.0), Quad::linear(-1.0, 0.0)]
            ),
            Err(Error::NotConvex(_))
        ));
        assert!(Plq::new(
            NEG_INF,
            INF,
            vec![0.0],
            vec![Quad::linear(0.0, 0.0), Quad::linear(0.0, 1.0)]
        )
        .is_err());
        assert!(matches!(
            Plq::new(INF, INF, vec![], vec![Quad::linear(0.0, 0.0)]),
            Err(Error::Improper(_))
        ));
    }

    #[test]
    fn breakpoint_ties_take_the_smaller_piece() {
        // pieces agree up to rounding at the breakpoint
        let f = Plq::new(
            NEG_INF,
            INF,
            vec![1.0],
            vec![Quad::linear(0.0, 1.0), Quad::linear(1.0, 1e-12)],
        )
        .unwrap();
        assert_eq!(f.eval(1.0), 1.0);
    }

    #[test]
    fn inf_conv_abs_is_lipschitz_envelope() {
        let f = Plq::half_square();
        let (g, (a, b)) = f.inf_conv_abs(1.0).unwrap();
        assert_eq!((a, b), (-1.0, 1.0));
        assert!(close(g.eval(0.5), 0.125));
        assert!(close(g.eval(3.0), 0.5 + 2.0));
        assert!(close(g.eval(-3.0), 0.5 + 2.0));
        let (z, w) = f.inf_conv_abs(0.0).unwrap();
        assert_eq!(w, (0.0, 0.0));
        assert_eq!(z.eval(5.0), 0.0);
    }

    #[test]
    fn add_and_restrict() {
        let f = Plq::abs();
        let g = Plq::indicator(-1.0, 2.0).unwrap();
        let s = f.add(&g).unwrap();
        assert_eq!(s.domain(), Interval::new(-1.0, 2.0));
        assert_eq!(s.eval(-0.5), 0.5);
        assert_eq!(s.eval(3.0), INF);
        assert!(Plq::indicator(5.0, 6.0).unwrap().add(&g).is_none());
        let r = f.restrict(0.5, 4.0).unwrap();
        assert_eq!(r.eval(1.0), 1.0);
        assert_eq!(r.eval(0.0), INF);
    }

    #[test]
    fn infimum_and_argmin_window() {
        let f = Plq::quadratic(1.0, -2.0, 0.0).unwrap(); // (x-1)^2 - 1
        let (v, x) = f.infimum();
        assert!(close(v, -1.0) && close(x, 1.0));
        assert_eq!(f.slope_window(0.0), Some((1.0, 1.0)));
        let lin = Plq::affine(1.0, 0.0).unwrap();
        assert_eq!(lin.infimum().0, NEG_INF);
        assert_eq!(lin.slope_window(0.0), None);
    }

    #[test]
    fn separable_calculus_is_coordinatewise() {
        let h = SeparableFn::new(vec![Plq::half_square(), Plq::abs()]).unwrap();
        assert_eq!(h.eval(&[2.0, -3.0]), 5.0);
        let hs = h.conjugate().unwrap();
        assert_eq!(hs.eval(&[1.0, 0.5]), 0.5);
        assert_eq!(hs.eval(&[1.0, 1.5]), INF);
        assert!(!h.is_coercive());
        assert!(SeparableFn::uniform(Plq::half_square(), 2).is_coercive());
        let sd = h.subdifferential(&[1.0, 0.0]);
        assert!(sd.contains(&[1.0, -0.7], 0.0));
        assert!(!sd.contains(&[1.0, 1.7], 0.0));
    }
}
