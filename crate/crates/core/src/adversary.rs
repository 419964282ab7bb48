//! Attacker behaviours plugged into simulator seats.
//!
//! Outsiders hold no token and publish made-up values. Insiders are
//! registered users who pool their tokens to forge one for another seat.
//! Replayers reuse a value observed in an earlier session. Every adversary
//! follows the message schedule honestly and deviates only in the values it
//! publishes. No adversary ever sees the group manager's private state.

use std::collections::HashSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldElement;
use crate::group::{Token, UserId};
use crate::poly::{self, PolyError, SharePoint};
use crate::protocol::ProtocolKind;

/// User id carried by adversary-held tokens. Registered users start at 1.
pub const ADVERSARY_USER_ID: UserId = UserId(0);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("target x = {0} is already held by a colluder")]
    TargetIsColluder(u64),
    #[error("target abscissa must be nonzero")]
    ZeroTarget,
    #[error("colluder x = {0} listed twice")]
    DuplicateColluder(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgeStrategy {
    /// Ignore the pooled tokens and guess the target value.
    UniformGuess,
    /// Guess the secret, then interpolate it together with the pooled
    /// tokens and evaluate at the target. With `t` or more pooled tokens the
    /// guess is dropped and the result is exact.
    InterpolateAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplaySource {
    /// The victim's token as broadcast in an earlier Protocol 1 run.
    P1Reveal,
    /// The victim's masked value `y''` from an earlier Protocol 2 run.
    P2MaskedReveal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// Publishes a uniformly random value in place of a token.
    OutsiderRandom,
    /// Publishes a fixed value in place of a token.
    OutsiderChosen { payload: u64 },
    /// Registered users at `colluders` pool their tokens to forge one for
    /// the adversary's seat. Pools of `t` or more are only accepted when
    /// `expect-break` is set.
    InsiderColluders {
        colluders: Vec<u64>,
        strategy: ForgeStrategy,
        #[serde(default, rename = "expect-break")]
        expect_break: bool,
    },
    /// Replays a value the seat's rightful owner published in an earlier
    /// session of the same group.
    Replay { source: ReplaySource },
}

/// An adversary and the roster seat (abscissa) it occupies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub x: u64,
    #[serde(flatten)]
    pub kind: AdversaryKind,
}

impl AdversarySpec {
    /// Whether the behaviour draws a uniformly random value that the
    /// exhaustive runner can enumerate instead.
    pub fn has_free_value(&self) -> bool {
        matches!(
            self.kind,
            AdversaryKind::OutsiderRandom | AdversaryKind::InsiderColluders { .. }
        )
    }
}

/// What a seat actually does during a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    /// Run the protocol faithfully with this token, valid or not.
    UseToken(Token),
    /// Run the protocol with this token but broadcast `payload` in place of
    /// the honest value.
    OverrideReveal { token: Token, payload: FieldElement },
}

impl Behavior {
    pub fn token(&self) -> Token {
        match self {
            Behavior::UseToken(t) | Behavior::OverrideReveal { token: t, .. } => *t,
        }
    }
}

fn adversary_token(x: FieldElement, y: FieldElement) -> Token {
    Token {
        user_id: ADVERSARY_USER_ID,
        x,
        y,
    }
}

/// Outsider behaviour: publish `payload` as if it were a token.
pub fn outsider_behavior(x: FieldElement, payload: FieldElement) -> Behavior {
    Behavior::UseToken(adversary_token(x, payload))
}

/// Outsider behaviour with a freshly drawn uniform payload.
pub fn outsider_random_behavior<R: RngCore + ?Sized>(x: FieldElement, rng: &mut R) -> Behavior {
    outsider_behavior(x, x.params().random_element(rng))
}

/// Forges a token for `target_x` from pooled tokens and a guessed value.
///
/// `guess` is the adversary's only randomness: the target value itself for
/// [`ForgeStrategy::UniformGuess`], the secret for
/// [`ForgeStrategy::InterpolateAvailable`].
pub fn colluders_forge_token(
    pooled: &[Token],
    target_x: FieldElement,
    t: usize,
    strategy: ForgeStrategy,
    guess: FieldElement,
) -> Result<Token, AdversaryError> {
    if target_x.is_zero() {
        return Err(AdversaryError::ZeroTarget);
    }
    let mut seen = HashSet::new();
    for tok in pooled {
        if tok.x == target_x {
            return Err(AdversaryError::TargetIsColluder(target_x.value()));
        }
        if !seen.insert(tok.x.value()) {
            return Err(AdversaryError::DuplicateColluder(tok.x.value()));
        }
    }
    let y = match strategy {
        ForgeStrategy::UniformGuess => guess,
        ForgeStrategy::InterpolateAvailable => {
            let mut points: Vec<SharePoint> = pooled.iter().map(Token::as_point).collect();
            if pooled.len() < t {
                // (0, guess) is not a valid SharePoint; shift through the
                // constant-term formula instead.
                let fitted = fit_with_secret_guess(&points, guess)?;
                fitted.eval(target_x)?
            } else {
                points.truncate(t);
                poly::interpolate(&points)?.eval(target_x)?
            }
        }
    };
    Ok(adversary_token(target_x, y))
}

/// Polynomial of degree `<= points.len()` through `points` and `(0, secret)`.
fn fit_with_secret_guess(
    points: &[SharePoint],
    secret: FieldElement,
) -> Result<poly::Polynomial, PolyError> {
    let params = secret.params();
    if points.is_empty() {
        return poly::Polynomial::new(params, vec![secret]);
    }
    // g(x) = (f(x) - secret) / x has degree <= k - 1 and passes through
    // (x_i, (y_i - secret) / x_i); then f(x) = secret + x g(x).
    let shifted = points
        .iter()
        .map(|pt| SharePoint::new(pt.x(), (pt.y() - secret) * pt.x().inv()?))
        .collect::<Result<Vec<_>, _>>()?;
    let g = poly::interpolate(&shifted)?;
    let mut coeffs = vec![secret];
    coeffs.extend_from_slice(g.coeffs());
    poly::Polynomial::new(params, coeffs)
}

/// Replay behaviour for a value observed in an earlier session.
///
/// A replayed Protocol 1 reveal is the victim's actual token, so it is used
/// as one. A replayed Protocol 2 masked value is re-broadcast verbatim in a
/// Protocol 2 session and presented as a token in a Protocol 1 session.
pub fn replay_behavior(
    x: FieldElement,
    observed: FieldElement,
    source: ReplaySource,
    target_protocol: ProtocolKind,
) -> Behavior {
    let token = adversary_token(x, observed);
    match (source, target_protocol) {
        (ReplaySource::P2MaskedReveal, ProtocolKind::P2) => Behavior::OverrideReveal {
            token,
            payload: observed,
        },
        _ => Behavior::UseToken(token),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldParams;
    use crate::group::{setup_group_with_polynomial, GroupParams};
    use crate::poly::Polynomial;

    fn setup(t: usize, coeffs: &[u64]) -> crate::group::GroupSetup {
        let f = FieldParams::new(13).unwrap();
        let gp = GroupParams::new(t, 6, f).unwrap();
        setup_group_with_polynomial(gp, Polynomial::from_u64s(f, coeffs)).unwrap()
    }

    #[test]
    fn single_colluder_succeeds_for_one_guess_in_p() {
        let s = setup(2, &[5, 3]);
        let f = s.state.params().field();
        let target = f.element(4);
        for strategy in [
            ForgeStrategy::UniformGuess,
            ForgeStrategy::InterpolateAvailable,
        ] {
            let hits = f
                .elements()
                .filter(|&g| {
                    let forged =
                        colluders_forge_token(&s.tokens[..1], target, 2, strategy, g).unwrap();
                    s.state.verify_token(&forged).unwrap()
                })
                .count();
            assert_eq!(hits, 1, "{strategy:?}");
        }
    }

    #[test]
    fn interpolation_hits_when_the_secret_guess_is_right() {
        let s = setup(3, &[5, 3, 7]);
        let f = s.state.params().field();
        let forged = colluders_forge_token(
            &s.tokens[..2],
            f.element(6),
            3,
            ForgeStrategy::InterpolateAvailable,
            f.element(5),
        )
        .unwrap();
        assert!(s.state.verify_token(&forged).unwrap());
        assert_eq!(forged.user_id, ADVERSARY_USER_ID);
    }

    #[test]
    fn t_colluders_forge_exactly() {
        let s = setup(3, &[5, 3, 7]);
        let f = s.state.params().field();
        for g in f.elements() {
            let forged = colluders_forge_token(
                &s.tokens[..3],
                f.element(6),
                3,
                ForgeStrategy::InterpolateAvailable,
                g,
            )
            .unwrap();
            assert!(s.state.verify_token(&forged).unwrap());
        }
    }

    #[test]
    fn zero_colluders_is_an_outsider_guess() {
        let f = FieldParams::new(13).unwrap();
        let g = f.element(9);
        for strategy in [
            ForgeStrategy::UniformGuess,
            ForgeStrategy::InterpolateAvailable,
        ] {
            let forged = colluders_forge_token(&[], f.element(2), 2, strategy, g).unwrap();
            assert_eq!(forged.y, g);
        }
    }

    #[test]
    fn forge_errors() {
        let s = setup(2, &[5, 3]);
        let f = s.state.params().field();
        let g = f.zero();
        assert_eq!(
            colluders_forge_token(
                &s.tokens[..1],
                f.element(1),
                2,
                ForgeStrategy::UniformGuess,
                g
            ),
            Err(AdversaryError::TargetIsColluder(1))
        );
        assert_eq!(
            colluders_forge_token(&s.tokens[..1], f.zero(), 2, ForgeStrategy::UniformGuess, g),
            Err(AdversaryError::ZeroTarget)
        );
        let dup = [s.tokens[0], s.tokens[0]];
        assert_eq!(
            colluders_forge_token(&dup, f.element(3), 2, ForgeStrategy::UniformGuess, g),
            Err(AdversaryError::DuplicateColluder(1))
        );
    }

    #[test]
    fn replay_routing() {
        let f = FieldParams::new(13).unwrap();
        let (x, v) = (f.element(2), f.element(7));
        assert!(matches!(
            replay_behavior(x, v, ReplaySource::P1Reveal, ProtocolKind::P2),
            Behavior::UseToken(_)
        ));
        assert!(matches!(
            replay_behavior(x, v, ReplaySource::P2MaskedReveal, ProtocolKind::P1),
            Behavior::UseToken(_)
        ));
        assert_eq!(
            replay_behavior(x, v, ReplaySource::P2MaskedReveal, ProtocolKind::P2),
            Behavior::OverrideReveal {
                token: adversary_token(x, v),
                payload: v
            }
        );
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: AdversarySpec = toml::from_str(
            "x = 4\nkind = \"insider-colluders\"\ncolluders = [1]\nstrategy = \"interpolate-available\"\n",
        )
        .unwrap();
        assert_eq!(spec.x, 4);
        assert!(spec.has_free_value());
        let spec: AdversarySpec =
            toml::from_str("x = 2\nkind = \"replay\"\nsource = \"p1-reveal\"\n").unwrap();
        assert!(!spec.has_free_value());
    }
}
