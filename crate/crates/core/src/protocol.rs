//! Per-participant state machines for the two group-authentication
//! protocols.
//!
//! * **Protocol 1** (one-time): every participant broadcasts its token; the
//!   secret is interpolated at zero and compared against the published hash.
//! * **Protocol 2** (token-hiding): every participant deals sub-shares of a
//!   random mask polynomial to the others, then broadcasts its token plus the
//!   sum of all mask evaluations at its own abscissa. The broadcasts are
//!   points on `f + sum f_i`, so honest rosters pass the strong t-consistency
//!   check while the tokens stay hidden.
//!
//! A [`Participant`] only ever sees public group data and its own token. The
//! message bus that moves [`ProtocolMessage`]s between participants lives in
//! [`crate::sim`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError};
use crate::group::{hash_secret, Commitment, GroupParams, Token};
use crate::poly::{self, ConsistencyRule, Degree, PolyError, Polynomial, SharePoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("roster of {j} participants needs t < j <= n (t = {t}, n = {n})")]
    RosterSize { j: usize, t: usize, n: usize },
    #[error("roster lists x = {0} twice")]
    DuplicateRosterX(u64),
    #[error("abscissa 0 cannot sit in a roster")]
    ZeroRosterX,
    #[error("x = {0} is not in the roster")]
    NotInRoster(u64),
    #[error("step `{step}` not allowed in phase {phase:?}")]
    WrongPhase { step: &'static str, phase: Phase },
    #[error("step `{step}` belongs to the other protocol")]
    WrongProtocol { step: &'static str },
    #[error("no {kind} message from x = {from}")]
    MissingMessage { kind: MessageKind, from: u64 },
    #[error("two {kind} messages from x = {from}")]
    DuplicateMessage { kind: MessageKind, from: u64 },
    #[error("expected {expected} message, got {got}")]
    WrongKind {
        expected: MessageKind,
        got: MessageKind,
    },
    #[error("sub-share from x = {from} addressed to {to:?}, not to us")]
    Misaddressed { from: u64, to: Option<u64> },
    #[error("mask polynomial degree {found} exceeds t - 1 = {max}")]
    MaskDegree { max: usize, found: Degree },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    P1,
    P2,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::P1 => f.write_str("p1"),
            ProtocolKind::P2 => f.write_str("p2"),
        }
    }
}

/// What a participant knows about its group: parameters and `H(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicGroupInfo {
    pub params: GroupParams,
    pub commitment: Commitment,
}

/// The ordered, publicly agreed list of participating abscissas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    xs: Vec<FieldElement>,
}

impl Roster {
    /// Requires distinct nonzero abscissas and `t < j <= n`.
    pub fn new(xs: Vec<FieldElement>, params: &GroupParams) -> Result<Self, ProtocolError> {
        let (j, t, n) = (xs.len(), params.t(), params.n());
        if j <= t || j > n {
            return Err(ProtocolError::RosterSize { j, t, n });
        }
        let mut seen = HashSet::new();
        for x in &xs {
            if x.modulus() != params.field().modulus() {
                return Err(FieldError::ModulusMismatch {
                    left: params.field().modulus(),
                    right: x.modulus(),
                }
                .into());
            }
            if x.is_zero() {
                return Err(ProtocolError::ZeroRosterX);
            }
            if !seen.insert(x.value()) {
                return Err(ProtocolError::DuplicateRosterX(x.value()));
            }
        }
        Ok(Roster { xs })
    }

    pub fn xs(&self) -> &[FieldElement] {
        &self.xs
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn contains(&self, x: FieldElement) -> bool {
        self.xs.contains(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    /// Protocol 1 broadcast of a raw token.
    TokenReveal,
    /// Protocol 2 point-to-point mask evaluation `f_i(x_r)`.
    SubShare,
    /// Protocol 2 broadcast of `y_i''`.
    MaskedReveal,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::TokenReveal => "token-reveal",
            MessageKind::SubShare => "sub-share",
            MessageKind::MaskedReveal => "masked-reveal",
        })
    }
}

/// A protocol message. Senders are named by abscissa only; no user
/// identifier ever goes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub from_x: FieldElement,
    /// `None` for broadcasts.
    pub to_x: Option<FieldElement>,
    pub payload: FieldElement,
}

impl ProtocolMessage {
    pub fn is_broadcast(&self) -> bool {
        self.to_x.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Start,
    /// Protocol 1: token broadcast, waiting for everyone else's.
    Revealed,
    /// Protocol 2: sub-shares sent, waiting for incoming sub-shares.
    Masked,
    /// Protocol 2: masked value broadcast, waiting for everyone else's.
    MaskedRevealed,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "detail", content = "degree")]
pub enum VerdictDetail {
    HashMatch,
    HashMismatch,
    DegreeExact,
    DegreeWrong(Degree),
}

/// Outcome of an authentication run: "yes" or "no", with the reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub accepted: bool,
    pub detail: VerdictDetail,
}

impl Verdict {
    fn hash(matched: bool) -> Self {
        Verdict {
            accepted: matched,
            detail: if matched {
                VerdictDetail::HashMatch
            } else {
                VerdictDetail::HashMismatch
            },
        }
    }
}

/// How mask polynomials are sampled in Protocol 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSampling {
    /// All `t` coefficients uniform over `Z_p`. The leading coefficient of
    /// the summed polynomial is then exactly uniform, so an honest roster is
    /// rejected with probability exactly `1/p` under the exact-degree rule.
    #[default]
    Uniform,
    /// Leading coefficient uniform over the nonzero residues. Honest
    /// rejection probability becomes `(1 - (-1/(p-1))^j) / p`.
    NonzeroLeading,
}

/// Draws a mask polynomial of degree at most `t - 1`.
pub fn sample_mask<R: RngCore + ?Sized>(
    params: &GroupParams,
    sampling: MaskSampling,
    rng: &mut R,
) -> Polynomial {
    let field = params.field();
    let t = params.t();
    let coeffs = (0..t)
        .map(|i| match sampling {
            MaskSampling::NonzeroLeading if i == t - 1 => field.random_nonzero(rng),
            _ => field.random_element(rng),
        })
        .collect();
    Polynomial::new(field, coeffs).expect("coefficients share the field")
}

/// One participant's view of a protocol run.
#[derive(Debug, Clone)]
pub struct Participant {
    token: Token,
    group: PublicGroupInfo,
    roster: Roster,
    protocol: ProtocolKind,
    phase: Phase,
    mask_poly: Option<Polynomial>,
    self_share: Option<FieldElement>,
    received: BTreeMap<u64, FieldElement>,
    reveal_override: Option<FieldElement>,
}

impl Participant {
    pub fn new(
        token: Token,
        group: PublicGroupInfo,
        roster: Roster,
        protocol: ProtocolKind,
    ) -> Result<Self, ProtocolError> {
        if !roster.contains(token.x) {
            return Err(ProtocolError::NotInRoster(token.x.value()));
        }
        Ok(Participant {
            token,
            group,
            roster,
            protocol,
            phase: Phase::Start,
            mask_poly: None,
            self_share: None,
            received: BTreeMap::new(),
            reveal_override: None,
        })
    }

    /// Replaces this participant's broadcast payload (the token in
    /// Protocol 1, `y''` in Protocol 2) with `payload`. Models an adversary
    /// that publishes an arbitrary value.
    pub fn with_reveal_override(mut self, payload: FieldElement) -> Self {
        self.reveal_override = Some(payload);
        self
    }

    pub fn x(&self) -> FieldElement {
        self.token.x
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    /// The private mask polynomial, once drawn.
    pub fn mask_poly(&self) -> Option<&Polynomial> {
        self.mask_poly.as_ref()
    }

    fn expect(
        &self,
        protocol: ProtocolKind,
        phase: Phase,
        step: &'static str,
    ) -> Result<(), ProtocolError> {
        if self.protocol != protocol {
            return Err(ProtocolError::WrongProtocol { step });
        }
        if self.phase != phase {
            return Err(ProtocolError::WrongPhase {
                step,
                phase: self.phase,
            });
        }
        Ok(())
    }

    /// Protocol 1, step 1: broadcast the token.
    pub fn p1_reveal(&mut self) -> Result<ProtocolMessage, ProtocolError> {
        self.expect(ProtocolKind::P1, Phase::Start, "p1_reveal")?;
        self.phase = Phase::Revealed;
        Ok(ProtocolMessage {
            kind: MessageKind::TokenReveal,
            from_x: self.token.x,
            to_x: None,
            payload: self.reveal_override.unwrap_or(self.token.y),
        })
    }

    /// Protocol 1, step 2: interpolate the secret and compare hashes.
    pub fn p1_verify(&mut self, reveals: &[ProtocolMessage]) -> Result<Verdict, ProtocolError> {
        self.expect(ProtocolKind::P1, Phase::Revealed, "p1_verify")?;
        let verdict = p1_evaluate(&self.group, &self.roster, reveals)?;
        self.phase = Phase::Done;
        Ok(verdict)
    }

    /// Protocol 2, step 1: draw a mask polynomial and address one sub-share
    /// to every other roster member. The evaluation at our own abscissa is
    /// kept locally and never sent.
    pub fn p2_make_mask<R: RngCore + ?Sized>(
        &mut self,
        sampling: MaskSampling,
        rng: &mut R,
    ) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        self.expect(ProtocolKind::P2, Phase::Start, "p2_make_mask")?;
        let mask = sample_mask(&self.group.params, sampling, rng);
        self.p2_make_mask_with(mask)
    }

    /// As [`Participant::p2_make_mask`] with a caller-chosen mask of degree
    /// at most `t - 1`.
    pub fn p2_make_mask_with(
        &mut self,
        mask: Polynomial,
    ) -> Result<Vec<ProtocolMessage>, ProtocolError> {
        self.expect(ProtocolKind::P2, Phase::Start, "p2_make_mask")?;
        let max = self.group.params.t() - 1;
        if mask.exact_degree() > Degree::Finite(max) {
            return Err(ProtocolError::MaskDegree {
                max,
                found: mask.exact_degree(),
            });
        }
        let mut out = Vec::with_capacity(self.roster.len() - 1);
        for &x in self.roster.xs() {
            let value = mask.eval(x)?;
            if x == self.token.x {
                self.self_share = Some(value);
            } else {
                out.push(ProtocolMessage {
                    kind: MessageKind::SubShare,
                    from_x: self.token.x,
                    to_x: Some(x),
                    payload: value,
                });
            }
        }
        self.mask_poly = Some(mask);
        self.phase = Phase::Masked;
        Ok(out)
    }

    /// Protocol 2, step 2: broadcast `y'' = y + f_i(x_i) + sum_{r != i} f_r(x_i)`.
    pub fn p2_masked_reveal(
        &mut self,
        subshares: &[ProtocolMessage],
    ) -> Result<ProtocolMessage, ProtocolError> {
        self.expect(ProtocolKind::P2, Phase::Masked, "p2_masked_reveal")?;
        let mut received = BTreeMap::new();
        for m in subshares {
            if m.kind != MessageKind::SubShare {
                return Err(ProtocolError::WrongKind {
                    expected: MessageKind::SubShare,
                    got: m.kind,
                });
            }
            if m.to_x != Some(self.token.x) {
                return Err(ProtocolError::Misaddressed {
                    from: m.from_x.value(),
                    to: m.to_x.map(|x| x.value()),
                });
            }
            if m.from_x == self.token.x || !self.roster.contains(m.from_x) {
                return Err(ProtocolError::NotInRoster(m.from_x.value()));
            }
            if received.insert(m.from_x.value(), m.payload).is_some() {
                return Err(ProtocolError::DuplicateMessage {
                    kind: MessageKind::SubShare,
                    from: m.from_x.value(),
                });
            }
        }
        for &x in self.roster.xs() {
            if x != self.token.x && !received.contains_key(&x.value()) {
                return Err(ProtocolError::MissingMessage {
                    kind: MessageKind::SubShare,
                    from: x.value(),
                });
            }
        }
        let own = self.self_share.expect("set together with the Masked phase");
        let masked = received
            .values()
            .fold(self.token.y + own, |acc, &v| acc + v);
        self.received = received;
        self.phase = Phase::MaskedRevealed;
        Ok(ProtocolMessage {
            kind: MessageKind::MaskedReveal,
            from_x: self.token.x,
            to_x: None,
            payload: self.reveal_override.unwrap_or(masked),
        })
    }

    /// Protocol 2, step 3: strong t-consistency of all broadcast values.
    pub fn p2_verify(
        &mut self,
        reveals: &[ProtocolMessage],
        rule: ConsistencyRule,
    ) -> Result<Verdict, ProtocolError> {
        self.expect(ProtocolKind::P2, Phase::MaskedRevealed, "p2_verify")?;
        let verdict = p2_evaluate(&self.group, &self.roster, reveals, rule)?;
        self.phase = Phase::Done;
        Ok(verdict)
    }
}

/// Orders one broadcast of `kind` per roster member as share points.
fn collect_broadcasts(
    roster: &Roster,
    reveals: &[ProtocolMessage],
    kind: MessageKind,
) -> Result<Vec<SharePoint>, ProtocolError> {
    let mut by_x = BTreeMap::new();
    for m in reveals {
        if m.kind != kind {
            return Err(ProtocolError::WrongKind {
                expected: kind,
                got: m.kind,
            });
        }
        if !m.is_broadcast() {
            return Err(ProtocolError::Misaddressed {
                from: m.from_x.value(),
                to: m.to_x.map(|x| x.value()),
            });
        }
        if !roster.contains(m.from_x) {
            return Err(ProtocolError::NotInRoster(m.from_x.value()));
        }
        if by_x.insert(m.from_x.value(), m.payload).is_some() {
            return Err(ProtocolError::DuplicateMessage {
                kind,
                from: m.from_x.value(),
            });
        }
    }
    roster
        .xs()
        .iter()
        .map(|&x| {
            let y = by_x.get(&x.value()).ok_or(ProtocolError::MissingMessage {
                kind,
                from: x.value(),
            })?;
            Ok(SharePoint::new(x, *y)?)
        })
        .collect()
}

/// Protocol 1 decision as any observer of the broadcasts would compute it.
pub fn p1_evaluate(
    group: &PublicGroupInfo,
    roster: &Roster,
    reveals: &[ProtocolMessage],
) -> Result<Verdict, ProtocolError> {
    let points = collect_broadcasts(roster, reveals, MessageKind::TokenReveal)?;
    let s = poly::eval_at_zero_from_points(&points)?;
    Ok(Verdict::hash(hash_secret(s) == group.commitment))
}

/// Protocol 2 decision as any observer of the broadcasts would compute it.
pub fn p2_evaluate(
    group: &PublicGroupInfo,
    roster: &Roster,
    reveals: &[ProtocolMessage],
    rule: ConsistencyRule,
) -> Result<Verdict, ProtocolError> {
    let points = collect_broadcasts(roster, reveals, MessageKind::MaskedReveal)?;
    let v = poly::check_consistency(&points, group.params.t(), rule)?;
    Ok(Verdict {
        accepted: v.consistent,
        // Under the relaxed rule an accepted low-degree interpolant also
        // reports DegreeExact, keeping `accepted` and `detail` in lockstep.
        detail: if v.consistent {
            VerdictDetail::DegreeExact
        } else {
            VerdictDetail::DegreeWrong(v.degree)
        },
    })
}
