//! Polynomials over `Z_p`, Lagrange interpolation, and the strong
//! t-consistency check.
//!
//! A set of `j > t` shares is *strongly t-consistent* when the unique
//! polynomial through all of them has degree exactly `t - 1`. Shares of an
//! honest dealer pass; a share set with a tampered ordinate interpolates to a
//! higher-degree polynomial unless the tampering happens to land back on the
//! curve.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("no points given")]
    EmptyInput,
    #[error("duplicate abscissa x = {0}")]
    DuplicateAbscissa(u64),
    #[error("abscissa 0 is reserved for the secret")]
    ZeroAbscissa,
    #[error("need more than {t} points for a consistency check, got {got}")]
    InsufficientPoints { t: usize, got: usize },
    #[error("threshold must be at least 1")]
    ZeroThreshold,
}

/// Degree of a polynomial. The zero polynomial has degree `NegInfinity`,
/// which compares below every finite degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degree {
    NegInfinity,
    Finite(usize),
}

impl Degree {
    pub fn finite(&self) -> Option<usize> {
        match self {
            Degree::NegInfinity => None,
            Degree::Finite(d) => Some(*d),
        }
    }
}

impl PartialOrd for Degree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Degree {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Degree::NegInfinity, Degree::NegInfinity) => Ordering::Equal,
            (Degree::NegInfinity, _) => Ordering::Less,
            (_, Degree::NegInfinity) => Ordering::Greater,
            (Degree::Finite(a), Degree::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInfinity => write!(f, "-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

/// Dense polynomial, constant term first, with no trailing zero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    params: FieldParams,
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn zero(params: FieldParams) -> Self {
        Polynomial {
            params,
            coeffs: Vec::new(),
        }
    }

    /// Builds `coeffs[0] + coeffs[1] x + ...`, trimming trailing zeros.
    pub fn new(params: FieldParams, coeffs: Vec<FieldElement>) -> Result<Self, PolyError> {
        for c in &coeffs {
            if c.modulus() != params.modulus() {
                return Err(FieldError::ModulusMismatch {
                    left: params.modulus(),
                    right: c.modulus(),
                }
                .into());
            }
        }
        let mut poly = Polynomial { params, coeffs };
        poly.trim();
        Ok(poly)
    }

    /// Convenience constructor from raw residues (reduced mod `p`).
    pub fn from_u64s(params: FieldParams, coeffs: &[u64]) -> Self {
        let mut poly = Polynomial {
            params,
            coeffs: coeffs.iter().map(|&c| params.element(c)).collect(),
        };
        poly.trim();
        poly
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn params(&self) -> FieldParams {
        self.params
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    /// Coefficient of `x^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> FieldElement {
        self.coeffs
            .get(i)
            .copied()
            .unwrap_or_else(|| self.params.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Index of the highest nonzero coefficient.
    pub fn exact_degree(&self) -> Degree {
        match self.coeffs.len() {
            0 => Degree::NegInfinity,
            n => Degree::Finite(n - 1),
        }
    }

    /// Horner evaluation.
    pub fn eval(&self, x: FieldElement) -> Result<FieldElement, PolyError> {
        if x.modulus() != self.params.modulus() {
            return Err(FieldError::ModulusMismatch {
                left: self.params.modulus(),
                right: x.modulus(),
            }
            .into());
        }
        Ok(self
            .coeffs
            .iter()
            .rev()
            .fold(self.params.zero(), |acc, &c| acc * x + c))
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        if self.params != other.params {
            return Err(FieldError::ModulusMismatch {
                left: self.params.modulus(),
                right: other.params.modulus(),
            }
            .into());
        }
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|i| self.coeff(i) + other.coeff(i)).collect();
        let mut sum = Polynomial {
            params: self.params,
            coeffs,
        };
        sum.trim();
        Ok(sum)
    }

    fn scale_add_into(acc: &mut [FieldElement], scale: FieldElement, src: &[FieldElement]) {
        for (a, &s) in acc.iter_mut().zip(src) {
            *a = *a + scale * s;
        }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} (mod {})", self.params.modulus())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}x")?,
                _ => write!(f, "{c}x^{i}")?,
            }
        }
        Ok(())
    }
}

/// A share `(x, f(x))` with `x != 0`; `f(0)` is the secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharePoint {
    x: FieldElement,
    y: FieldElement,
}

impl SharePoint {
    pub fn new(x: FieldElement, y: FieldElement) -> Result<Self, PolyError> {
        if x.modulus() != y.modulus() {
            return Err(FieldError::ModulusMismatch {
                left: x.modulus(),
                right: y.modulus(),
            }
            .into());
        }
        if x.is_zero() {
            return Err(PolyError::ZeroAbscissa);
        }
        Ok(SharePoint { x, y })
    }

    pub fn from_u64s(params: FieldParams, x: u64, y: u64) -> Result<Self, PolyError> {
        SharePoint::new(params.element(x), params.element(y))
    }

    pub fn x(&self) -> FieldElement {
        self.x
    }

    pub fn y(&self) -> FieldElement {
        self.y
    }
}

/// Checks non-emptiness, a common modulus, and distinct abscissas.
fn validate_points(points: &[SharePoint]) -> Result<FieldParams, PolyError> {
    let first = points.first().ok_or(PolyError::EmptyInput)?;
    let params = first.x.params();
    let mut seen = HashSet::with_capacity(points.len());
    for pt in points {
        if pt.x.modulus() != params.modulus() {
            return Err(FieldError::ModulusMismatch {
                left: params.modulus(),
                right: pt.x.modulus(),
            }
            .into());
        }
        if !seen.insert(pt.x.value()) {
            return Err(PolyError::DuplicateAbscissa(pt.x.value()));
        }
    }
    Ok(params)
}

/// The unique polynomial of degree `<= points.len() - 1` through `points`.
///
/// Expands the Lagrange basis: the master product `M(x) = prod (x - x_k)` is
/// built once, and each basis numerator `M(x) / (x - x_i)` comes from one
/// synthetic division, for `O(j^2)` field operations overall.
pub fn interpolate(points: &[SharePoint]) -> Result<Polynomial, PolyError> {
    let params = validate_points(points)?;
    let n = points.len();

    // master[k] is the coefficient of x^k in prod (x - x_i); degree n.
    let mut master = vec![params.zero(); n + 1];
    master[0] = params.one();
    for (deg, pt) in points.iter().enumerate() {
        for k in (0..=deg + 1).rev() {
            let shifted = if k > 0 { master[k - 1] } else { params.zero() };
            master[k] = shifted - pt.x * master[k];
        }
    }

    let mut acc = vec![params.zero(); n];
    let mut basis = vec![params.zero(); n];
    for (i, pt) in points.iter().enumerate() {
        // Synthetic division of master by (x - x_i).
        let mut carry = params.zero();
        for k in (0..n).rev() {
            carry = master[k + 1] + carry * pt.x;
            basis[k] = carry;
        }
        let denom = points
            .iter()
            .enumerate()
            .filter(|&(r, _)| r != i)
            .fold(params.one(), |d, (_, other)| d * (pt.x - other.x));
        let weight = pt.y * denom.inv()?;
        Polynomial::scale_add_into(&mut acc, weight, &basis);
    }

    let poly = Polynomial::new(params, acc)?;
    for pt in points {
        assert_eq!(poly.eval(pt.x)?, pt.y, "interpolant misses x = {}", pt.x);
    }
    Ok(poly)
}

/// Constant term of the interpolant, via `sum y_i prod_{r != i} -x_r / (x_i - x_r)`.
pub fn eval_at_zero_from_points(points: &[SharePoint]) -> Result<FieldElement, PolyError> {
    let params = validate_points(points)?;
    let mut s = params.zero();
    for (i, pt) in points.iter().enumerate() {
        let mut num = params.one();
        let mut den = params.one();
        for (r, other) in points.iter().enumerate() {
            if r != i {
                num = num * (-other.x);
                den = den * (pt.x - other.x);
            }
        }
        s = s + pt.y * num * den.inv()?;
    }
    Ok(s)
}

/// How the degree of the interpolant is compared against `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyRule {
    /// Degree must equal `t - 1`.
    #[default]
    ExactDegree,
    /// Degree may be anything up to `t - 1`.
    AtMostDegree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyVerdict {
    pub consistent: bool,
    /// Degree of the interpolant through all points.
    pub degree: Degree,
    pub rule: ConsistencyRule,
}

/// Strong t-consistency under the exact-degree rule.
pub fn check_strong_t_consistency(
    points: &[SharePoint],
    t: usize,
) -> Result<ConsistencyVerdict, PolyError> {
    check_consistency(points, t, ConsistencyRule::ExactDegree)
}

/// Interpolates all points and compares the degree with `t - 1`.
///
/// Requires more than `t` points: any `t` points fit a polynomial of degree
/// at most `t - 1`, so the check would say nothing.
pub fn check_consistency(
    points: &[SharePoint],
    t: usize,
    rule: ConsistencyRule,
) -> Result<ConsistencyVerdict, PolyError> {
    if t == 0 {
        return Err(PolyError::ZeroThreshold);
    }
    if points.len() <= t {
        validate_points(points)?;
        return Err(PolyError::InsufficientPoints {
            t,
            got: points.len(),
        });
    }
    let degree = interpolate(points)?.exact_degree();
    let target = Degree::Finite(t - 1);
    let consistent = match rule {
        ConsistencyRule::ExactDegree => degree == target,
        ConsistencyRule::AtMostDegree => degree <= target,
    };
    Ok(ConsistencyVerdict {
        consistent,
        degree,
        rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f13() -> FieldParams {
        FieldParams::new(13).unwrap()
    }

    fn pts(params: FieldParams, raw: &[(u64, u64)]) -> Vec<SharePoint> {
        raw.iter()
            .map(|&(x, y)| SharePoint::from_u64s(params, x, y).unwrap())
            .collect()
    }

    /// Solves the Vandermonde system by Gaussian elimination; independent of
    /// the Lagrange code path.
    fn vandermonde_solve(points: &[SharePoint]) -> Polynomial {
        let params = points[0].x().params();
        let n = points.len();
        let mut rows: Vec<Vec<FieldElement>> = points
            .iter()
            .map(|pt| {
                let mut row: Vec<_> = (0..n).map(|k| pt.x().pow(k as u64)).collect();
                row.push(pt.y());
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !rows[r][col].is_zero()).unwrap();
            rows.swap(col, pivot);
            let inv = rows[col][col].inv().unwrap();
            for v in rows[col].iter_mut() {
                *v = *v * inv;
            }
            for r in 0..n {
                if r != col && !rows[r][col].is_zero() {
                    let factor = rows[r][col];
                    let pivot_row = rows[col].clone();
                    for (v, pv) in rows[r].iter_mut().zip(pivot_row) {
                        *v = *v - factor * pv;
                    }
                }
            }
        }
        Polynomial::new(params, rows.iter().map(|r| r[n]).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = f13();
        let line = Polynomial::from_u64s(f, &[5, 3]);
        assert_eq!(line.eval(f.element(2)).unwrap(), f.element(11));
        let zero = Polynomial::zero(f);
        for x in f.elements() {
            assert_eq!(zero.eval(x).unwrap(), f.zero());
        }
        let square = Polynomial::from_u64s(f, &[0, 0, 1]);
        assert_eq!(square.eval(f.element(5)).unwrap(), f.element(12));
    }

    #[test]
    fn eval_rejects_foreign_point() {
        let line = Polynomial::from_u64s(f13(), &[5, 3]);
        let x = FieldParams::new(97).unwrap().element(2);
        assert!(matches!(line.eval(x), Err(PolyError::Field(_))));
    }

    #[test]
    fn add_examples() {
        let f = f13();
        let a = Polynomial::from_u64s(f, &[5, 3]);
        let b = Polynomial::from_u64s(f, &[7, 2]);
        assert_eq!(a.add(&b).unwrap(), Polynomial::from_u64s(f, &[12, 5]));
        assert_eq!(a.add(&Polynomial::zero(f)).unwrap(), a);
        let c = Polynomial::from_u64s(f, &[1, 1]);
        let d = Polynomial::from_u64s(f, &[1, 12]);
        let sum = c.add(&d).unwrap();
        assert_eq!(sum, Polynomial::from_u64s(f, &[2]));
        assert_eq!(sum.exact_degree(), Degree::Finite(0));
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let f = f13();
        let p = Polynomial::from_u64s(f, &[1, 2, 0, 13]);
        assert_eq!(p.coeffs().len(), 2);
        assert_eq!(
            Polynomial::from_u64s(f, &[0, 0]).exact_degree(),
            Degree::NegInfinity
        );
    }

    #[test]
    fn degree_ordering_puts_neg_infinity_first() {
        assert!(Degree::NegInfinity < Degree::Finite(0));
        assert!(Degree::Finite(0) < Degree::Finite(1));
        assert_eq!(
            Polynomial::from_u64s(f13(), &[5, 3]).exact_degree(),
            Degree::Finite(1)
        );
    }

    #[test]
    fn interpolate_examples() {
        let f = f13();
        let line = Polynomial::from_u64s(f, &[5, 3]);
        assert_eq!(interpolate(&pts(f, &[(1, 8), (2, 11)])).unwrap(), line);
        assert_eq!(
            interpolate(&pts(f, &[(1, 4), (2, 4), (3, 4)])).unwrap(),
            Polynomial::from_u64s(f, &[4])
        );
        assert_eq!(
            interpolate(&pts(f, &[(1, 8), (2, 11), (3, 1)])).unwrap(),
            line
        );
    }

    #[test]
    fn interpolate_errors() {
        let f = f13();
        assert_eq!(interpolate(&[]), Err(PolyError::EmptyInput));
        assert_eq!(
            interpolate(&pts(f, &[(1, 8), (1, 9)])),
            Err(PolyError::DuplicateAbscissa(1))
        );
        assert_eq!(
            SharePoint::from_u64s(f, 13, 1),
            Err(PolyError::ZeroAbscissa)
        );
        let mixed = vec![
            SharePoint::from_u64s(f, 1, 1).unwrap(),
            SharePoint::from_u64s(FieldParams::new(97).unwrap(), 2, 1).unwrap(),
        ];
        assert!(matches!(interpolate(&mixed), Err(PolyError::Field(_))));
    }

    #[test]
    fn eval_at_zero_examples() {
        let f = f13();
        assert_eq!(
            eval_at_zero_from_points(&pts(f, &[(1, 8), (2, 11)])).unwrap(),
            f.element(5)
        );
        assert_eq!(
            eval_at_zero_from_points(&pts(f, &[(7, 9)])).unwrap(),
            f.element(9)
        );
        assert_eq!(
            eval_at_zero_from_points(&pts(f, &[(1, 3), (2, 1), (3, 12)])).unwrap(),
            f.element(5)
        );
    }

    #[test]
    fn interpolation_round_trip_exhaustive_degree_le_2_mod_13() {
        let f = f13();
        let xs = [3u64, 7, 11];
        for a0 in 0..13 {
            for a1 in 0..13 {
                for a2 in 0..13 {
                    let poly = Polynomial::from_u64s(f, &[a0, a1, a2]);
                    let sample: Vec<_> = xs
                        .iter()
                        .map(|&x| {
                            SharePoint::new(f.element(x), poly.eval(f.element(x)).unwrap()).unwrap()
                        })
                        .collect();
                    assert_eq!(interpolate(&sample).unwrap(), poly);
                    assert_eq!(eval_at_zero_from_points(&sample).unwrap(), f.element(a0));
                }
            }
        }
    }

    #[test]
    fn interpolation_agrees_with_vandermonde_solver() {
        let f = FieldParams::new(257).unwrap();
        let sample = pts(
            f,
            &[(1, 200), (4, 17), (9, 3), (100, 256), (256, 0), (31, 5)],
        );
        assert_eq!(interpolate(&sample).unwrap(), vandermonde_solve(&sample));
    }

    #[test]
    fn consistency_examples() {
        let f = f13();
        let honest = check_strong_t_consistency(&pts(f, &[(1, 8), (2, 11), (3, 1)]), 2).unwrap();
        assert!(honest.consistent);
        assert_eq!(honest.degree, Degree::Finite(1));

        let tampered = check_strong_t_consistency(&pts(f, &[(1, 8), (2, 11), (3, 2)]), 2).unwrap();
        assert!(!tampered.consistent);
        assert_eq!(tampered.degree, Degree::Finite(2));

        let constant = check_strong_t_consistency(&pts(f, &[(1, 4), (2, 4), (3, 4)]), 2).unwrap();
        assert!(!constant.consistent);
        assert_eq!(constant.degree, Degree::Finite(0));
        let relaxed = check_consistency(
            &pts(f, &[(1, 4), (2, 4), (3, 4)]),
            2,
            ConsistencyRule::AtMostDegree,
        )
        .unwrap();
        assert!(relaxed.consistent);
    }

    #[test]
    fn consistency_needs_more_than_t_points() {
        let f = f13();
        assert_eq!(
            check_strong_t_consistency(&pts(f, &[(1, 8), (2, 11)]), 2),
            Err(PolyError::InsufficientPoints { t: 2, got: 2 })
        );
        assert_eq!(
            check_strong_t_consistency(&pts(f, &[(1, 8), (1, 11), (2, 3)]), 2),
            Err(PolyError::DuplicateAbscissa(1))
        );
        assert_eq!(
            check_strong_t_consistency(&pts(f, &[(1, 8)]), 0),
            Err(PolyError::ZeroThreshold)
        );
    }

    #[test]
    fn single_corruption_detected_in_exactly_p_minus_1_cases() {
        let f = f13();
        let poly = Polynomial::from_u64s(f, &[4, 9, 2]);
        let xs = [1u64, 2, 3, 4, 5];
        for victim in 0..xs.len() {
            let mut detected = 0;
            for replacement in f.elements() {
                let sample: Vec<_> = xs
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let y = if i == victim {
                            replacement
                        } else {
                            poly.eval(f.element(x)).unwrap()
                        };
                        SharePoint::new(f.element(x), y).unwrap()
                    })
                    .collect();
                if !check_strong_t_consistency(&sample, 3).unwrap().consistent {
                    detected += 1;
                }
            }
            assert_eq!(detected, 12);
        }
    }
}
