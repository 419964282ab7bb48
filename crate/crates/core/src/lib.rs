//! Threshold group authentication over prime fields.
//!
//! A group manager deals each registered user a Shamir share of a secret
//! polynomial (a *token*). Later, any `j > t` users can convince one another
//! that they all hold valid tokens:
//!
//! * [`protocol`] Protocol 1 reveals the tokens and checks the interpolated
//!   secret against a published hash. Tokens are burned afterwards.
//! * [`protocol`] Protocol 2 masks every token with shares of random
//!   polynomials and checks that the masked values lie on a polynomial of
//!   degree exactly `t - 1`. Tokens stay hidden and can be reused.
//!
//! The [`sim`] module runs both protocols between simulated participants and
//! adversaries, and [`claims`] checks the security properties numerically.

pub mod adversary;
pub mod claims;
pub mod field;
pub mod group;
pub mod poly;
pub mod protocol;
pub mod shamir;
pub mod sim;

pub use field::{FieldElement, FieldError, FieldParams, DEFAULT_MODULUS};
pub use group::{
    hash_secret, setup_group, Commitment, GroupParams, GroupSetup, GroupState, Token, UserId,
};
pub use poly::{
    check_strong_t_consistency, eval_at_zero_from_points, interpolate, ConsistencyRule,
    ConsistencyVerdict, Degree, Polynomial, SharePoint,
};
pub use protocol::{
    MaskSampling, Participant, ProtocolKind, ProtocolMessage, Verdict, VerdictDetail,
};
pub use shamir::{
    brute_force_secret_candidates, generate_shares, reconstruct_secret, DealerConfig, ShareSet,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/polynomials.md")]
    mod polynomials {}
    #[doc = include_str!("../../../book/src/shamir.md")]
    mod shamir {}
    #[doc = include_str!("../../../book/src/group.md")]
    mod group {}
    #[doc = include_str!("../../../book/src/protocol1.md")]
    mod protocol1 {}
    #[doc = include_str!("../../../book/src/protocol2.md")]
    mod protocol2 {}
    #[doc = include_str!("../../../book/src/adversaries.md")]
    mod adversaries {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/claims.md")]
    mod claims {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
