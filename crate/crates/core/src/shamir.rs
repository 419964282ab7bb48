//! Shamir `(t, n)` threshold sharing: dealing, reconstruction, and a
//! brute-force secrecy oracle for small fields.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::RngCore;
use thiserror::Error;

use crate::field::{FieldElement, FieldParams};
use crate::poly::{eval_at_zero_from_points, Degree, PolyError, Polynomial, SharePoint};

/// Largest modulus the brute-force oracle accepts.
pub const ORACLE_MAX_MODULUS: u64 = 257;
/// Largest number of candidate polynomials the oracle will enumerate.
pub const ORACLE_MAX_ENUMERATION: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShamirError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("threshold t = {0} is below 2")]
    ThresholdTooSmall(usize),
    #[error("need t < n, got t = {t}, n = {n}")]
    ThresholdNotBelowCount { t: usize, n: usize },
    #[error("n = {n} shareholders do not fit in a field of size {p}")]
    TooManyShareholders { n: usize, p: u64 },
    #[error("expected {expected} abscissas, got {got}")]
    AbscissaCount { expected: usize, got: usize },
    #[error("abscissa 0 is reserved for the secret")]
    ZeroAbscissa,
    #[error("duplicate abscissa x = {0}")]
    DuplicateAbscissa(u64),
    #[error("dealer polynomial must have degree exactly {expected}, found {found}")]
    WrongDegree { expected: usize, found: Degree },
    #[error("need at least {t} shares, got {got}")]
    InsufficientShares { t: usize, got: usize },
    #[error("oracle limited to p <= {ORACLE_MAX_MODULUS} and {ORACLE_MAX_ENUMERATION} candidates (p = {p}, t = {t})")]
    OracleScale { p: u64, t: usize },
    #[error("oracle takes at most t - 1 = {max} shares, got {got}")]
    TooManySharesForOracle { max: usize, got: usize },
}

/// Dealer parameters: threshold, shareholder count, field, and public abscissas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DealerConfig {
    t: usize,
    n: usize,
    params: FieldParams,
    abscissas: Vec<FieldElement>,
}

impl DealerConfig {
    /// Shareholder `i` (1-based) gets abscissa `x_i = i`.
    pub fn new(t: usize, n: usize, params: FieldParams) -> Result<Self, ShamirError> {
        let xs = (1..=n as u64).map(|i| params.element(i)).collect();
        Self::with_abscissas(t, n, params, xs)
    }

    pub fn with_abscissas(
        t: usize,
        n: usize,
        params: FieldParams,
        abscissas: Vec<FieldElement>,
    ) -> Result<Self, ShamirError> {
        validate_threshold(t, n, params)?;
        if abscissas.len() != n {
            return Err(ShamirError::AbscissaCount {
                expected: n,
                got: abscissas.len(),
            });
        }
        let mut seen = HashSet::new();
        for x in &abscissas {
            if x.modulus() != params.modulus() {
                return Err(PolyError::Field(crate::field::FieldError::ModulusMismatch {
                    left: params.modulus(),
                    right: x.modulus(),
                })
                .into());
            }
            if x.is_zero() {
                return Err(ShamirError::ZeroAbscissa);
            }
            if !seen.insert(x.value()) {
                return Err(ShamirError::DuplicateAbscissa(x.value()));
            }
        }
        Ok(DealerConfig {
            t,
            n,
            params,
            abscissas,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> FieldParams {
        self.params
    }

    pub fn abscissas(&self) -> &[FieldElement] {
        &self.abscissas
    }
}

/// Checks `2 <= t < n <= p - 1`.
pub(crate) fn validate_threshold(
    t: usize,
    n: usize,
    params: FieldParams,
) -> Result<(), ShamirError> {
    if t < 2 {
        return Err(ShamirError::ThresholdTooSmall(t));
    }
    if t >= n {
        return Err(ShamirError::ThresholdNotBelowCount { t, n });
    }
    if n as u64 > params.modulus() - 1 {
        return Err(ShamirError::TooManyShareholders {
            n,
            p: params.modulus(),
        });
    }
    Ok(())
}

/// Output of a dealing. `secret_poly` is dealer-private.
#[derive(Debug, Clone)]
pub struct ShareSet {
    pub shares: Vec<SharePoint>,
    pub secret_poly: Polynomial,
    pub secret: FieldElement,
}

/// Samples a polynomial of degree exactly `degree` with the given constant
/// term: middle coefficients uniform, leading coefficient uniform nonzero.
pub fn random_polynomial_exact_degree<R: RngCore + ?Sized>(
    params: FieldParams,
    constant: FieldElement,
    degree: usize,
    rng: &mut R,
) -> Polynomial {
    let mut coeffs = Vec::with_capacity(degree + 1);
    coeffs.push(constant);
    for i in 1..=degree {
        coeffs.push(if i == degree {
            params.random_nonzero(rng)
        } else {
            params.random_element(rng)
        });
    }
    // Leading coefficient is nonzero, so nothing is trimmed unless degree == 0.
    Polynomial::new(params, coeffs).expect("coefficients share the field")
}

/// Deals `secret` with a fresh random polynomial of degree exactly `t - 1`.
pub fn generate_shares<R: RngCore + ?Sized>(
    cfg: &DealerConfig,
    secret: FieldElement,
    rng: &mut R,
) -> Result<ShareSet, ShamirError> {
    if secret.modulus() != cfg.params.modulus() {
        return Err(PolyError::Field(crate::field::FieldError::ModulusMismatch {
            left: cfg.params.modulus(),
            right: secret.modulus(),
        })
        .into());
    }
    let poly = random_polynomial_exact_degree(cfg.params, secret, cfg.t - 1, rng);
    deal_with_polynomial(cfg, poly)
}

/// Deals shares of a caller-chosen polynomial, which must have degree
/// exactly `t - 1`.
pub fn deal_with_polynomial(cfg: &DealerConfig, poly: Polynomial) -> Result<ShareSet, ShamirError> {
    if poly.params() != cfg.params {
        return Err(PolyError::Field(crate::field::FieldError::ModulusMismatch {
            left: cfg.params.modulus(),
            right: poly.params().modulus(),
        })
        .into());
    }
    if poly.exact_degree() != Degree::Finite(cfg.t - 1) {
        return Err(ShamirError::WrongDegree {
            expected: cfg.t - 1,
            found: poly.exact_degree(),
        });
    }
    let shares = cfg
        .abscissas
        .iter()
        .map(|&x| SharePoint::new(x, poly.eval(x)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShareSet {
        shares,
        secret: poly.coeff(0),
        secret_poly: poly,
    })
}

/// Recovers `f(0)` from `t` or more shares.
pub fn reconstruct_secret(shares: &[SharePoint], t: usize) -> Result<FieldElement, ShamirError> {
    if shares.len() < t {
        return Err(ShamirError::InsufficientShares {
            t,
            got: shares.len(),
        });
    }
    Ok(eval_at_zero_from_points(shares)?)
}

/// Which polynomials the brute-force oracle ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolynomialClass {
    /// Every polynomial with degree at most `t - 1`.
    #[default]
    AtMostDegree,
    /// Only polynomials with degree exactly `t - 1`, which is what the
    /// dealer actually samples.
    ExactDegree,
}

/// Result of the brute-force oracle: for each candidate secret, how many
/// polynomials are consistent with the observed shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretCandidates {
    pub counts: BTreeMap<u64, u64>,
}

impl SecretCandidates {
    pub fn secrets(&self) -> BTreeSet<u64> {
        self.counts.keys().copied().collect()
    }

    /// True when every residue of `Z_p` appears with the same multiplicity.
    pub fn is_uniform_over(&self, params: FieldParams) -> bool {
        let p = params.modulus();
        self.counts.len() as u64 == p && {
            let mut values = self.counts.values();
            let first = values.next().copied();
            values.all(|&c| Some(c) == first)
        }
    }
}

/// Enumerates every polynomial of degree at most `t - 1` that passes through
/// `shares` and tallies its value at zero.
pub fn brute_force_secret_candidates(
    shares: &[SharePoint],
    t: usize,
    params: FieldParams,
) -> Result<SecretCandidates, ShamirError> {
    brute_force_secret_candidates_in(shares, t, params, PolynomialClass::AtMostDegree)
}

pub fn brute_force_secret_candidates_in(
    shares: &[SharePoint],
    t: usize,
    params: FieldParams,
    class: PolynomialClass,
) -> Result<SecretCandidates, ShamirError> {
    let p = params.modulus();
    if t == 0 {
        return Err(ShamirError::ThresholdTooSmall(t));
    }
    if shares.len() > t - 1 {
        return Err(ShamirError::TooManySharesForOracle {
            max: t - 1,
            got: shares.len(),
        });
    }
    let total = (p as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if p > ORACLE_MAX_MODULUS || total > ORACLE_MAX_ENUMERATION as u128 {
        return Err(ShamirError::OracleScale { p, t });
    }
    for s in shares {
        if s.x().modulus() != p {
            return Err(PolyError::Field(crate::field::FieldError::ModulusMismatch {
                left: p,
                right: s.x().modulus(),
            })
            .into());
        }
    }

    let mut counts = BTreeMap::new();
    let mut coeffs = vec![0u64; t];
    'outer: loop {
        let leading_ok = class == PolynomialClass::AtMostDegree || coeffs[t - 1] != 0;
        if leading_ok {
            let fits = shares.iter().all(|s| {
                let x = s.x().value() as u128;
                let y = coeffs
                    .iter()
                    .rev()
                    .fold(0u128, |acc, &c| (acc * x + c as u128) % p as u128);
                y as u64 == s.y().value()
            });
            if fits {
                *counts.entry(coeffs[0]).or_insert(0) += 1;
            }
        }
        // Odometer increment over Z_p^t.
        for c in coeffs.iter_mut() {
            *c += 1;
            if *c < p {
                continue 'outer;
            }
            *c = 0;
        }
        break;
    }
    Ok(SecretCandidates { counts })
}
