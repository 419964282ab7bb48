//! Group setup: the group manager deals one token per registered user and
//! publishes a hash commitment to the group secret.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::field::{FieldElement, FieldParams};
use crate::poly::{PolyError, Polynomial, SharePoint};
use crate::shamir::{self, DealerConfig, ShamirError};

/// Domain-separation prefix of the commitment preimage.
pub const COMMITMENT_PREFIX: &[u8] = b"GAS-v1:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error(transparent)]
    Shamir(#[from] ShamirError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("commitment must be 32 bytes, got {0}")]
    CommitmentLength(usize),
    #[error("invalid commitment hex: {0}")]
    CommitmentHex(String),
}

/// Identifier of the one-way function behind [`Commitment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashId {
    /// SHA-256 over `"GAS-v1:" || p (8 bytes BE) || s (8 bytes BE)`.
    #[default]
    Sha256V1,
}

/// Public group parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    t: usize,
    n: usize,
    field: FieldParams,
    hash_id: HashId,
}

impl GroupParams {
    pub fn new(t: usize, n: usize, field: FieldParams) -> Result<Self, GroupError> {
        shamir::validate_threshold(t, n, field)?;
        Ok(GroupParams {
            t,
            n,
            field,
            hash_id: HashId::Sha256V1,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> FieldParams {
        self.field
    }

    pub fn hash_id(&self) -> HashId {
        self.hash_id
    }
}

/// Opaque user identifier. Displayed as `M<i>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

/// A registered user's token: public abscissa `x` and secret share `y = f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub user_id: UserId,
    pub x: FieldElement,
    pub y: FieldElement,
}

impl Token {
    pub fn as_point(&self) -> SharePoint {
        SharePoint::new(self.x, self.y).expect("token abscissa is nonzero")
    }
}

/// Published `H(s)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment([u8; 32]);

impl Commitment {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| GroupError::CommitmentLength(bytes.len()))?;
        Ok(Commitment(arr))
    }

    pub fn from_hex(s: &str) -> Result<Self, GroupError> {
        let bytes = hex::decode(s).map_err(|e| GroupError::CommitmentHex(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Commitment({})", self.to_hex())
    }
}

impl fmt::Display for Commitment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// The byte string hashed into a [`Commitment`].
pub fn commitment_preimage(s: FieldElement) -> Vec<u8> {
    let mut buf = Vec::with_capacity(COMMITMENT_PREFIX.len() + 16);
    buf.extend_from_slice(COMMITMENT_PREFIX);
    buf.extend_from_slice(&s.modulus().to_be_bytes());
    buf.extend_from_slice(&s.to_be_bytes());
    buf
}

pub fn hash_secret(s: FieldElement) -> Commitment {
    let digest: [u8; 32] = Sha256::digest(commitment_preimage(s)).into();
    Commitment(digest)
}

/// GM-private state: the dealing polynomial and the group secret.
///
/// Nothing on the user side of the simulator ever receives this value.
#[derive(Debug, Clone)]
pub struct GroupState {
    params: GroupParams,
    secret_poly: Polynomial,
    secret: FieldElement,
}

impl GroupState {
    pub fn params(&self) -> GroupParams {
        self.params
    }

    pub fn secret(&self) -> FieldElement {
        self.secret
    }

    pub fn secret_poly(&self) -> &Polynomial {
        &self.secret_poly
    }

    /// True iff `tok` lies on the dealing polynomial.
    pub fn verify_token(&self, tok: &Token) -> Result<bool, GroupError> {
        Ok(self.secret_poly.eval(tok.x)? == tok.y)
    }

    /// The token a user at `x` would receive. Used by tests that need valid
    /// but unissued tokens.
    pub fn token_at(&self, user_id: UserId, x: FieldElement) -> Result<Token, GroupError> {
        Ok(Token {
            user_id,
            x,
            y: self.secret_poly.eval(x)?,
        })
    }
}

/// What a setup hands out: GM state, public commitment, and one token per user.
#[derive(Debug, Clone)]
pub struct GroupSetup {
    pub state: GroupState,
    pub commitment: Commitment,
    pub tokens: Vec<Token>,
}

/// Registers `n` users with abscissas `1..=n` under a fresh random secret.
pub fn setup_group<R: RngCore + ?Sized>(
    gp: GroupParams,
    rng: &mut R,
) -> Result<GroupSetup, GroupError> {
    let cfg = DealerConfig::new(gp.t, gp.n, gp.field)?;
    let secret = gp.field.random_element(rng);
    let set = shamir::generate_shares(&cfg, secret, rng)?;
    Ok(finish_setup(gp, set))
}

/// Setup with a caller-chosen dealing polynomial of degree exactly `t - 1`.
pub fn setup_group_with_polynomial(
    gp: GroupParams,
    poly: Polynomial,
) -> Result<GroupSetup, GroupError> {
    let cfg = DealerConfig::new(gp.t, gp.n, gp.field)?;
    let set = shamir::deal_with_polynomial(&cfg, poly)?;
    Ok(finish_setup(gp, set))
}

fn finish_setup(gp: GroupParams, set: shamir::ShareSet) -> GroupSetup {
    let tokens = set
        .shares
        .iter()
        .enumerate()
        .map(|(i, s)| Token {
            user_id: UserId(i as u32 + 1),
            x: s.x(),
            y: s.y(),
        })
        .collect();
    GroupSetup {
        commitment: hash_secret(set.secret),
        state: GroupState {
            params: gp,
            secret_poly: set.secret_poly,
            secret: set.secret,
        },
        tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shamir::brute_force_secret_candidates;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn gp13() -> GroupParams {
        GroupParams::new(2, 3, FieldParams::new(13).unwrap()).unwrap()
    }

    #[test]
    fn worked_example_setup() {
        let gp = gp13();
        let f = gp.field();
        let setup = setup_group_with_polynomial(gp, Polynomial::from_u64s(f, &[5, 3])).unwrap();
        let got: Vec<_> = setup
            .tokens
            .iter()
            .map(|t| (t.x.value(), t.y.value()))
            .collect();
        assert_eq!(got, vec![(1, 8), (2, 11), (3, 1)]);
        assert_eq!(setup.commitment, hash_secret(f.element(5)));
        for tok in &setup.tokens {
            assert!(setup.state.verify_token(tok).unwrap());
        }
    }

    #[test]
    fn preimage_layout() {
        let s = FieldParams::new(13).unwrap().element(5);
        let mut expected = b"GAS-v1:".to_vec();
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 13]);
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 5]);
        assert_eq!(commitment_preimage(s), expected);
    }

    #[test]
    fn commitment_is_sha256_of_preimage() {
        // Frozen with `printf 'GAS-v1:\0\0\0\0\0\0\0\x0d\0\0\0\0\0\0\0\x05' | sha256sum`.
        let s = FieldParams::new(13).unwrap().element(5);
        assert_eq!(
            hash_secret(s).to_hex(),
            "646c3f5ae2248f00f244e3f9d047497a151c08ad70399c5fbf80fcb68d098556"
        );
    }

    #[test]
    fn commitment_distinguishes_secrets() {
        let f = FieldParams::new(97).unwrap();
        let digests: std::collections::HashSet<_> = f.elements().map(hash_secret).collect();
        assert_eq!(digests.len(), 97);
        assert_eq!(hash_secret(f.element(7)), hash_secret(f.element(7)));
    }

    #[test]
    fn commitment_hex_round_trip_and_errors() {
        let c = hash_secret(FieldParams::new(13).unwrap().element(1));
        assert_eq!(Commitment::from_hex(&c.to_hex()).unwrap(), c);
        assert_eq!(
            Commitment::from_bytes(&[0u8; 31]),
            Err(GroupError::CommitmentLength(31))
        );
        assert!(matches!(
            Commitment::from_hex("zz"),
            Err(GroupError::CommitmentHex(_))
        ));
    }

    #[test]
    fn verify_token_cases() {
        let gp = gp13();
        let f = gp.field();
        let setup = setup_group_with_polynomial(gp, Polynomial::from_u64s(f, &[5, 3])).unwrap();
        let mut bad = setup.tokens[0];
        bad.y = bad.y + f.one();
        assert!(!setup.state.verify_token(&bad).unwrap());
        let unissued = setup.state.token_at(UserId(4), f.element(4)).unwrap();
        assert_eq!(unissued.y, f.element(4)); // 3*4 + 5 = 17 = 4 mod 13
        assert!(setup.state.verify_token(&unissued).unwrap());
    }

    #[test]
    fn setup_is_deterministic_per_seed() {
        let gp = GroupParams::new(3, 5, FieldParams::default()).unwrap();
        let run = |seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            setup_group(gp, &mut rng).unwrap()
        };
        let (a, b, c) = (run(1), run(1), run(2));
        assert_eq!(a.commitment, b.commitment);
        assert_eq!(a.tokens, b.tokens);
        assert_ne!(a.commitment, c.commitment);
        let xs: std::collections::HashSet<_> = a.tokens.iter().map(|t| t.x).collect();
        assert_eq!(xs.len(), 5);
    }

    #[test]
    fn fewer_than_t_tokens_leave_every_secret_possible() {
        let f = FieldParams::new(13).unwrap();
        for t in 2..=3 {
            let gp = GroupParams::new(t, 5, f).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(t as u64);
            let setup = setup_group(gp, &mut rng).unwrap();
            let pts: Vec<_> = setup.tokens[..t - 1].iter().map(Token::as_point).collect();
            let c = brute_force_secret_candidates(&pts, t, f).unwrap();
            assert!(c.is_uniform_over(f));
        }
    }

    #[test]
    fn params_validation() {
        let f = FieldParams::new(13).unwrap();
        assert!(GroupParams::new(3, 3, f).is_err());
        assert!(GroupParams::new(1, 3, f).is_err());
        assert!(GroupParams::new(2, 13, f).is_err());
    }
}
