//! The cake `[0,1]`, pieces of it, and piecewise-constant valuations.
//!
//! A [`Piece`] is a finite union of closed intervals kept in canonical form:
//! sorted, pairwise disjoint, adjacent intervals merged, zero-length intervals
//! dropped. Single points carry no value under any [`ValuationSpec`], so two
//! pieces that share only an endpoint are treated as disjoint.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ratio::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CakeError {
    #[error("endpoint {0} lies outside [0,1]")]
    OutOfRange(Ratio),
    #[error("interval [{0}, {1}] has left > right")]
    Reversed(Ratio, Ratio),
    #[error("cut target {target} exceeds piece value {available}")]
    QueryInfeasible { target: Ratio, available: Ratio },
    #[error("cut target {0} is negative")]
    NegativeTarget(Ratio),
    #[error("subtracted piece is not contained in the minuend")]
    NotContained,
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),
}

/// A closed subinterval `[left, right]` of the cake.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub left: Ratio,
    pub right: Ratio,
}

impl Interval {
    pub fn new(left: Ratio, right: Ratio) -> Result<Interval, CakeError> {
        for x in [&left, &right] {
            if x.is_negative() || *x > Ratio::one() {
                return Err(CakeError::OutOfRange(x.clone()));
            }
        }
        if left > right {
            return Err(CakeError::Reversed(left, right));
        }
        Ok(Interval { left, right })
    }

    pub fn length(&self) -> Ratio {
        &self.right - &self.left
    }

    pub fn is_degenerate(&self) -> bool {
        self.left == self.right
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (&self.left, &self.right).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Interval, D::Error> {
        let (left, right) = <(Ratio, Ratio)>::deserialize(d)?;
        Interval::new(left, right).map_err(D::Error::custom)
    }
}

/// A canonical finite union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl std::fmt::Display for Piece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("{}");
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" u ")?;
            }
            write!(f, "[{}, {}]", iv.left, iv.right)?;
        }
        Ok(())
    }
}

impl Piece {
    pub fn empty() -> Piece {
        Piece { intervals: Vec::new() }
    }

    /// The whole cake `[0,1]`.
    pub fn whole() -> Piece {
        Piece {
            intervals: vec![Interval { left: Ratio::zero(), right: Ratio::one() }],
        }
    }

    /// Builds a piece from `(left, right)` pairs, normalizing on the way in.
    pub fn from_pairs<I>(pairs: I) -> Result<Piece, CakeError>
    where
        I: IntoIterator<Item = (Ratio, Ratio)>,
    {
        let ivs = pairs
            .into_iter()
            .map(|(l, r)| Interval::new(l, r))
            .collect::<Result<Vec<_>, _>>()?;
        normalize_piece(ivs)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure of the piece.
    pub fn length(&self) -> Ratio {
        self.intervals.iter().map(Interval::length).sum()
    }

    /// Leftmost point of the piece, if any.
    pub fn left_edge(&self) -> Option<&Ratio> {
        self.intervals.first().map(|iv| &iv.left)
    }

    pub fn right_edge(&self) -> Option<&Ratio> {
        self.intervals.last().map(|iv| &iv.right)
    }

    /// True if `x` lies in one of the (closed) intervals.
    pub fn contains_point(&self, x: &Ratio) -> bool {
        self.intervals.iter().any(|iv| iv.left <= *x && *x <= iv.right)
    }

    /// Part of the piece left of `x`.
    pub fn left_of(&self, x: &Ratio) -> Piece {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.right <= *x {
                out.push(iv.clone());
            } else if iv.left < *x {
                out.push(Interval { left: iv.left.clone(), right: x.clone() });
            }
        }
        Piece { intervals: out }
    }

    /// Part of the piece right of `x`.
    pub fn right_of(&self, x: &Ratio) -> Piece {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.left >= *x {
                out.push(iv.clone());
            } else if iv.right > *x {
                out.push(Interval { left: x.clone(), right: iv.right.clone() });
            }
        }
        Piece { intervals: out }
    }

    /// Splits at `x` into (left part, right part).
    pub fn split_at(&self, x: &Ratio) -> (Piece, Piece) {
        (self.left_of(x), self.right_of(x))
    }

    /// Part of the piece between `a` and `b` (with `a <= b`).
    pub fn between(&self, a: &Ratio, b: &Ratio) -> Piece {
        self.right_of(a).left_of(b)
    }

    pub fn union(&self, other: &Piece) -> Piece {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        // inputs are already in range
        normalize_piece(all).expect("union of valid pieces")
    }

    pub fn intersection(&self, other: &Piece) -> Piece {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = &self.intervals[i];
            let b = &other.intervals[j];
            let lo = (&a.left).max(&b.left).clone();
            let hi = (&a.right).min(&b.right).clone();
            if lo < hi {
                out.push(Interval { left: lo, right: hi });
            }
            if a.right < b.right {
                i += 1;
            } else {
                j += 1;
            }
        }
        Piece { intervals: out }
    }

    /// Whether `other` is contained in `self` up to measure zero.
    pub fn contains(&self, other: &Piece) -> bool {
        self.intersection(other) == *other
    }

    /// Whether the two pieces overlap in a set of positive measure.
    pub fn overlaps(&self, other: &Piece) -> bool {
        !self.intersection(other).is_empty()
    }
}

impl Serialize for Piece {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.intervals.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Piece, D::Error> {
        let ivs = Vec::<Interval>::deserialize(d)?;
        normalize_piece(ivs).map_err(D::Error::custom)
    }
}

/// Canonical form of a union of intervals: sorted, merged, zero-length dropped.
pub fn normalize_piece(mut intervals: Vec<Interval>) -> Result<Piece, CakeError> {
    for iv in &intervals {
        for x in [&iv.left, &iv.right] {
            if x.is_negative() || *x > Ratio::one() {
                return Err(CakeError::OutOfRange(x.clone()));
            }
        }
        if iv.left > iv.right {
            return Err(CakeError::Reversed(iv.left.clone(), iv.right.clone()));
        }
    }
    intervals.retain(|iv| !iv.is_degenerate());
    intervals.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match out.last_mut() {
            Some(last) if iv.left <= last.right => {
                if iv.right > last.right {
                    last.right = iv.right;
                }
            }
            _ => out.push(iv),
        }
    }
    Ok(Piece { intervals: out })
}

/// Set difference `p \ q`. Requires `q ⊆ p`.
pub fn piece_subtract(p: &Piece, q: &Piece) -> Result<Piece, CakeError> {
    if !p.contains(q) {
        return Err(CakeError::NotContained);
    }
    let mut out = Vec::new();
    for iv in p.intervals() {
        let mut cursor = iv.left.clone();
        for hole in q.intervals() {
            if hole.right <= cursor || hole.left >= iv.right {
                continue;
            }
            if hole.left > cursor {
                out.push(Interval { left: cursor.clone(), right: hole.left.clone() });
            }
            if hole.right > cursor {
                cursor = hole.right.clone();
            }
        }
        if cursor < iv.right {
            out.push(Interval { left: cursor, right: iv.right.clone() });
        }
    }
    normalize_piece(out)
}

/// A piecewise-constant density on `[0,1]`.
///
/// `breakpoints` runs from 0 to 1 strictly increasing; `densities[k]` is the
/// density on `[breakpoints[k], breakpoints[k+1]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValuationSpec {
    breakpoints: Vec<Ratio>,
    densities: Vec<Ratio>,
}

#[derive(Deserialize)]
struct RawValuation {
    breakpoints: Vec<Ratio>,
    densities: Vec<Ratio>,
}

impl<'de> Deserialize<'de> for ValuationSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<ValuationSpec, D::Error> {
        let raw = RawValuation::deserialize(d)?;
        ValuationSpec::new(raw.breakpoints, raw.densities).map_err(D::Error::custom)
    }
}

impl ValuationSpec {
    pub fn new(breakpoints: Vec<Ratio>, densities: Vec<Ratio>) -> Result<ValuationSpec, CakeError> {
        let bad = |m: &str| Err(CakeError::InvalidValuation(m.to_string()));
        if breakpoints.len() < 2 {
            return bad("need at least two breakpoints");
        }
        if densities.len() + 1 != breakpoints.len() {
            return bad("need exactly one density per segment");
        }
        if !breakpoints[0].is_zero() || *breakpoints.last().unwrap() != Ratio::one() {
            return bad("breakpoints must start at 0 and end at 1");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must be strictly increasing");
        }
        if densities.iter().any(Ratio::is_negative) {
            return bad("densities must be non-negative");
        }
        Ok(ValuationSpec { breakpoints, densities })
    }

    /// Constant density 1 on the whole cake.
    pub fn uniform() -> ValuationSpec {
        ValuationSpec {
            breakpoints: vec![Ratio::zero(), Ratio::one()],
            densities: vec![Ratio::one()],
        }
    }

    /// Convenience constructor from `(breakpoint, density)` steps. Each step
    /// gives the density from its breakpoint up to the next one (or 1).
    pub fn steps(steps: &[(Ratio, Ratio)]) -> Result<ValuationSpec, CakeError> {
        let mut bps: Vec<Ratio> = steps.iter().map(|(b, _)| b.clone()).collect();
        bps.push(Ratio::one());
        ValuationSpec::new(bps, steps.iter().map(|(_, d)| d.clone()).collect())
    }

    pub fn breakpoints(&self) -> &[Ratio] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[Ratio] {
        &self.densities
    }

    /// Segments `(left, right, density)`.
    fn segments(&self) -> impl Iterator<Item = (&Ratio, &Ratio, &Ratio)> {
        self.breakpoints
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (&w[0], &w[1], d))
    }

    fn eval_interval(&self, iv: &Interval) -> Ratio {
        let mut total = Ratio::zero();
        for (a, b, d) in self.segments() {
            if *b <= iv.left {
                continue;
            }
            if *a >= iv.right {
                break;
            }
            if d.is_zero() {
                continue;
            }
            let lo = a.max(&iv.left);
            let hi = b.min(&iv.right);
            total += (hi - lo) * d;
        }
        total
    }

    pub fn total(&self) -> Ratio {
        self.eval_piece(&Piece::whole())
    }

    /// Exact value of a piece.
    pub fn eval_piece(&self, p: &Piece) -> Ratio {
        p.intervals().iter().map(|iv| self.eval_interval(iv)).sum()
    }

    /// Leftmost point `x` such that the part of `p` left of `x` is worth `r`.
    pub fn cut_within(&self, p: &Piece, r: &Ratio) -> Result<Cut, CakeError> {
        if r.is_negative() {
            return Err(CakeError::NegativeTarget(r.clone()));
        }
        let mut acc = Ratio::zero();
        let mut swept = 0usize;
        if r.is_zero() {
            let x = p.left_edge().cloned().unwrap_or_else(Ratio::zero);
            return Ok(Cut::new(p, x, 0));
        }
        for iv in p.intervals() {
            swept += 1;
            for (a, b, d) in self.segments() {
                if *b <= iv.left {
                    continue;
                }
                if *a >= iv.right {
                    break;
                }
                if d.is_zero() {
                    continue;
                }
                let lo = a.max(&iv.left);
                let hi = b.min(&iv.right);
                let v = (hi - lo) * d;
                if &acc + &v >= *r {
                    let x = lo + (r - &acc) / d;
                    return Ok(Cut::new(p, x, swept));
                }
                acc += v;
            }
        }
        Err(CakeError::QueryInfeasible { target: r.clone(), available: acc })
    }
}

/// Result of a cut inside a piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub point: Ratio,
    pub left: Piece,
    pub right: Piece,
    /// How many of the piece's intervals were walked to find the point.
    pub intervals_swept: usize,
}

impl Cut {
    fn new(p: &Piece, point: Ratio, intervals_swept: usize) -> Cut {
        let (left, right) = p.split_at(&point);
        Cut { point, left, right, intervals_swept }
    }
}

pub fn eval_piece(v: &ValuationSpec, p: &Piece) -> Ratio {
    v.eval_piece(p)
}

pub fn cut_within(v: &ValuationSpec, p: &Piece, r: &Ratio) -> Result<Cut, CakeError> {
    v.cut_within(p, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::r;

    fn piece(pairs: &[(i64, i64, i64, i64)]) -> Piece {
        Piece::from_pairs(pairs.iter().map(|&(a, b, c, d)| (r(a, b), r(c, d)))).unwrap()
    }

    fn two_step() -> ValuationSpec {
        ValuationSpec::steps(&[(r(0, 1), r(2, 1)), (r(1, 2), r(0, 1))]).unwrap()
    }

    #[test]
    fn display_lists_intervals() {
        assert_eq!(piece(&[(0, 1, 1, 4), (1, 2, 1, 1)]).to_string(), "[0/1, 1/4] u [1/2, 1/1]");
        assert_eq!(Piece::empty().to_string(), "{}");
    }

    #[test]
    fn normalize_merges_overlap_and_adjacent() {
        assert_eq!(piece(&[(0, 1, 1, 2), (1, 4, 3, 4)]), piece(&[(0, 1, 3, 4)]));
        assert_eq!(piece(&[(0, 1, 1, 4), (1, 4, 1, 2)]), piece(&[(0, 1, 1, 2)]));
        assert!(normalize_piece(vec![]).unwrap().is_empty());
        assert_eq!(piece(&[(1, 4, 1, 4)]), Piece::empty());
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        let bad = vec![Interval { left: r(-1, 2), right: r(1, 2) }];
        assert!(matches!(normalize_piece(bad), Err(CakeError::OutOfRange(_))));
        assert!(matches!(Interval::new(r(1, 2), r(3, 2)), Err(CakeError::OutOfRange(_))));
    }

    #[test]
    fn eval_examples() {
        let u = ValuationSpec::uniform();
        assert_eq!(u.eval_piece(&Piece::whole()), r(1, 1));
        assert_eq!(u.eval_piece(&piece(&[(1, 4, 1, 2)])), r(1, 4));
        assert_eq!(two_step().eval_piece(&piece(&[(1, 4, 3, 4)])), r(1, 2));
    }

    #[test]
    fn cut_examples() {
        let u = ValuationSpec::uniform();
        assert_eq!(u.cut_within(&Piece::whole(), &r(1, 4)).unwrap().point, r(1, 4));
        let p = piece(&[(0, 1, 1, 4), (1, 2, 3, 4)]);
        let c = u.cut_within(&p, &r(3, 8)).unwrap();
        assert_eq!(c.point, r(5, 8));
        assert_eq!(c.left, piece(&[(0, 1, 1, 4), (1, 2, 5, 8)]));
        assert_eq!(c.intervals_swept, 2);
        assert!(matches!(
            u.cut_within(&piece(&[(0, 1, 1, 4)]), &r(1, 2)),
            Err(CakeError::QueryInfeasible { .. })
        ));
    }

    #[test]
    fn cut_prefers_leftmost_point_on_plateau() {
        // all value sits in [0,1/2]; cutting for the full value stops at 1/2
        let c = two_step().cut_within(&Piece::whole(), &r(1, 1)).unwrap();
        assert_eq!(c.point, r(1, 2));
        let zero = two_step().cut_within(&piece(&[(3, 4, 1, 1)]), &r(0, 1)).unwrap();
        assert_eq!(zero.point, r(3, 4));
    }

    #[test]
    fn subtract_examples() {
        let whole = Piece::whole();
        assert_eq!(piece_subtract(&whole, &piece(&[(0, 1, 1, 4)])).unwrap(), piece(&[(1, 4, 1, 1)]));
        assert!(piece_subtract(&whole, &whole).unwrap().is_empty());
        let p = piece(&[(0, 1, 1, 2), (3, 4, 1, 1)]);
        assert_eq!(
            piece_subtract(&p, &piece(&[(1, 4, 1, 2)])).unwrap(),
            piece(&[(0, 1, 1, 4), (3, 4, 1, 1)])
        );
        assert_eq!(
            piece_subtract(&piece(&[(0, 1, 1, 2)]), &piece(&[(1, 4, 3, 4)])),
            Err(CakeError::NotContained)
        );
    }

    #[test]
    fn valuation_validation() {
        assert!(ValuationSpec::new(vec![r(0, 1), r(1, 1)], vec![r(-1, 1)]).is_err());
        assert!(ValuationSpec::new(vec![r(0, 1), r(1, 2)], vec![r(1, 1)]).is_err());
        assert!(ValuationSpec::new(vec![r(0, 1), r(1, 2), r(1, 2), r(1, 1)], vec![r(1, 1); 3]).is_err());
    }

    #[test]
    fn json_shapes() {
        let p = piece(&[(0, 1, 1, 2)]);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"[["0/1","1/2"]]"#);
        let v = two_step();
        let j = serde_json::to_string(&v).unwrap();
        assert_eq!(j, r#"{"breakpoints":["0/1","1/2","1/1"],"densities":["2/1","0/1"]}"#);
        assert_eq!(serde_json::from_str::<ValuationSpec>(&j).unwrap(), v);
    }
}
