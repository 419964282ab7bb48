//! Deterministic multi-party simulator.
//!
//! A [`Scenario`] fixes the group, the roster of honest and adversarial
//! seats, the protocol, and a seed. Each trial draws its randomness from a
//! ChaCha stream selected by the trial index, so trials can run in any order
//! (or in parallel) and still reproduce bit for bit.
//!
//! Messages move through a gather-then-deliver barrier: every participant
//! emits its round messages before any of them is delivered. The full event
//! log is kept as a [`Transcript`] of JSON-lines records (`gas-transcript/1`).

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    self, AdversaryError, AdversaryKind, AdversarySpec, Behavior, ReplaySource,
};
use crate::field::{FieldElement, FieldError, FieldParams};
use crate::group::{self, GroupError, GroupParams, GroupSetup, Token};
use crate::poly::{ConsistencyRule, Degree, Polynomial};
use crate::protocol::{
    self, MaskSampling, MessageKind, Participant, ProtocolError, ProtocolKind, ProtocolMessage,
    PublicGroupInfo, Roster, Verdict, VerdictDetail,
};

pub const TRANSCRIPT_SCHEMA: &str = "gas-transcript/1";
/// Largest field the exhaustive runner accepts.
pub const EXHAUSTIVE_MAX_MODULUS: u64 = 257;
/// Largest number of enumerated assignments in one exhaustive run.
pub const EXHAUSTIVE_MAX_RUNS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("exhaustive mode needs p <= {EXHAUSTIVE_MAX_MODULUS} and at most {EXHAUSTIVE_MAX_RUNS} runs (p = {p}, free values = {free})")]
    ExhaustiveScale { p: u64, free: usize },
    #[error("nothing to enumerate: no free adversarial value and no honest mask to vary")]
    NoFreeValue,
    #[error("seat x = {0} is not a valid seat index")]
    UnknownSeat(u64),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidScenario(msg.into())
}

/// Public group parameters as written in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub p: u64,
    pub t: usize,
    pub n: usize,
}

impl GroupSpec {
    pub fn params(&self) -> Result<GroupParams, SimError> {
        Ok(GroupParams::new(self.t, self.n, FieldParams::new(self.p)?)?)
    }
}

/// One roster seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seat {
    /// The registered user with this 1-based index (and abscissa).
    Honest(u32),
    Adversary(AdversarySpec),
}

impl Seat {
    pub fn x(&self) -> u64 {
        match self {
            Seat::Honest(i) => *i as u64,
            Seat::Adversary(a) => a.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    MonteCarlo,
    Exhaustive,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::MonteCarlo => "monte-carlo",
            RunMode::Exhaustive => "exhaustive",
        })
    }
}

/// Everything needed to reproduce a batch of protocol runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Scenario {
    pub protocol: ProtocolKind,
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub consistency_rule: ConsistencyRule,
    #[serde(default)]
    pub mask_sampling: MaskSampling,
    pub group: GroupSpec,
    #[serde(rename = "seat")]
    pub roster: Vec<Seat>,
}

fn default_trials() -> u64 {
    1
}

impl Scenario {
    /// An all-honest scenario seating users `1..=j`.
    pub fn honest(
        protocol: ProtocolKind,
        group: GroupSpec,
        j: u32,
        seed: u64,
        trials: u64,
    ) -> Self {
        Scenario {
            protocol,
            seed,
            trials,
            mode: RunMode::MonteCarlo,
            consistency_rule: ConsistencyRule::ExactDegree,
            mask_sampling: MaskSampling::Uniform,
            group,
            roster: (1..=j).map(Seat::Honest).collect(),
        }
    }

    /// Replaces the seat holding abscissa `x` with an adversary.
    pub fn with_adversary(mut self, spec: AdversarySpec) -> Self {
        match self.roster.iter_mut().find(|s| s.x() == spec.x) {
            Some(seat) => *seat = Seat::Adversary(spec),
            None => self.roster.push(Seat::Adversary(spec)),
        }
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks the scenario against the group and roster rules.
    pub fn validate(&self) -> Result<Prepared, SimError> {
        let params = self.group.params()?;
        let field = params.field();
        let (t, n) = (params.t(), params.n());
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let j = self.roster.len();
        if j <= t || j > n {
            return Err(invalid(format!(
                "roster has {j} seats, need t < j <= n (t = {t}, n = {n})"
            )));
        }
        let mut xs = HashSet::new();
        for seat in &self.roster {
            let x = seat.x();
            if x == 0 || x >= field.modulus() {
                return Err(invalid(format!("seat abscissa {x} outside 1..p")));
            }
            if !xs.insert(x) {
                return Err(invalid(format!("two seats at x = {x}")));
            }
            match seat {
                Seat::Honest(i) if *i == 0 || *i as usize > n => {
                    return Err(invalid(format!(
                        "honest seat refers to user {i}, have 1..={n}"
                    )));
                }
                Seat::Adversary(spec) => validate_adversary(spec, t, n)?,
                _ => {}
            }
        }
        let roster = Roster::new(
            self.roster.iter().map(|s| field.element(s.x())).collect(),
            &params,
        )?;
        Ok(Prepared {
            scenario: self.clone(),
            params,
            roster,
        })
    }
}

fn validate_adversary(spec: &AdversarySpec, t: usize, n: usize) -> Result<(), SimError> {
    match &spec.kind {
        AdversaryKind::InsiderColluders {
            colluders,
            expect_break,
            ..
        } => {
            let mut seen = HashSet::new();
            for &c in colluders {
                if c == 0 || c as usize > n {
                    return Err(invalid(format!("colluder {c} is not a registered user")));
                }
                if c == spec.x {
                    return Err(invalid(format!("colluder {c} is the forging target")));
                }
                if !seen.insert(c) {
                    return Err(invalid(format!("colluder {c} listed twice")));
                }
            }
            if colluders.len() >= t && !expect_break {
                return Err(invalid(format!(
                    "{} colluders reach the threshold t = {t}; set expect-break to run this",
                    colluders.len()
                )));
            }
        }
        AdversaryKind::Replay { .. } if spec.x == 0 || spec.x as usize > n => {
            return Err(invalid(format!(
                "replay seat x = {} has no registered owner",
                spec.x
            )));
        }
        _ => {}
    }
    Ok(())
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    scenario: Scenario,
    params: GroupParams,
    roster: Roster,
}

impl Prepared {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn params(&self) -> GroupParams {
        self.params
    }

    fn field(&self) -> FieldParams {
        self.params.field()
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.scenario.seed);
        rng.set_stream(stream);
        rng
    }

    /// Stream 0 is reserved for the once-per-scenario Protocol 2 setup.
    fn trial_rng(&self, trial: u64) -> ChaCha20Rng {
        self.rng(trial + 1)
    }

    fn scenario_setup(&self) -> Result<Option<GroupSetup>, SimError> {
        match self.scenario.protocol {
            ProtocolKind::P1 => Ok(None),
            ProtocolKind::P2 => Ok(Some(group::setup_group(self.params, &mut self.rng(0))?)),
        }
    }

    /// Seats whose behaviour draws a free uniform value.
    fn free_seats(&self) -> Vec<usize> {
        self.scenario
            .roster
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Seat::Adversary(a) if a.has_free_value()))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Values forced in place of random draws, used by exhaustive enumeration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    /// Seat index to the value its free draw is replaced with.
    pub free_values: BTreeMap<usize, FieldElement>,
    /// Seat index and the leading mask coefficient it is forced to use.
    pub mask_leading: Option<(usize, FieldElement)>,
}

/// Result of one protocol run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub verdict: Verdict,
    /// Every broadcast payload, in roster order.
    pub broadcasts: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Section {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatRecord {
    pub x: u64,
    pub role: String,
    pub user_id: Option<String>,
}

/// One transcript line. Field order is part of the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Header {
        schema: String,
        scenario: Scenario,
    },
    /// Seat-to-identity map; the only place user ids appear.
    Seats {
        section: Section,
        seats: Vec<SeatRecord>,
    },
    Setup {
        trial: u64,
        section: Section,
        commitment: String,
    },
    Emit {
        trial: u64,
        round: u32,
        section: Section,
        kind: MessageKind,
        from_x: u64,
        to_x: Option<u64>,
        payload: u64,
    },
    /// All round messages have been collected; delivery may begin.
    Barrier {
        trial: u64,
        round: u32,
        collected: usize,
    },
    Deliver {
        trial: u64,
        round: u32,
        to_x: u64,
        count: usize,
    },
    Verdict {
        trial: u64,
        x: u64,
        accepted: bool,
        #[serde(flatten)]
        detail: VerdictDetail,
    },
    Outcome {
        trial: u64,
        accepted: bool,
        #[serde(flatten)]
        detail: VerdictDetail,
    },
    Summary {
        mode: RunMode,
        runs: u64,
        accepted: u64,
        rejected: u64,
        degree_wrong: u64,
        hash_mismatch: u64,
        accept_rate: f64,
        ci_low: f64,
        ci_high: f64,
    },
}

/// Event log of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub records: Vec<Record>,
    pub report: StatsReport,
}

impl Transcript {
    /// JSON-lines rendering, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses a JSON-lines transcript. Errors name the 1-based line.
    pub fn parse_jsonl(text: &str) -> Result<Vec<Record>, String> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: Record =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            if i == 0 {
                match &r {
                    Record::Header { schema, .. } if schema == TRANSCRIPT_SCHEMA => {}
                    Record::Header { schema, .. } => {
                        return Err(format!("line 1: unsupported schema {schema:?}"))
                    }
                    _ => return Err("line 1: expected a header record".into()),
                }
            }
            records.push(r);
        }
        if records.is_empty() {
            return Err("empty transcript".into());
        }
        Ok(records)
    }

    pub fn verdicts(&self) -> impl Iterator<Item = (u64, bool)> + '_ {
        self.records.iter().filter_map(|r| match r {
            Record::Outcome {
                trial, accepted, ..
            } => Some((*trial, *accepted)),
            _ => None,
        })
    }
}

/// Accept/reject tallies over a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatsReport {
    pub mode: RunMode,
    pub runs: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Rejections where the interpolant had the wrong degree.
    pub degree_wrong: u64,
    /// Rejections where the reconstructed secret missed the commitment.
    pub hash_mismatch: u64,
}

impl StatsReport {
    fn record(&mut self, v: &Verdict) {
        self.runs += 1;
        if v.accepted {
            self.accepted += 1;
        } else {
            self.rejected += 1;
        }
        match v.detail {
            VerdictDetail::DegreeWrong(_) => self.degree_wrong += 1,
            VerdictDetail::HashMismatch => self.hash_mismatch += 1,
            _ => {}
        }
    }

    fn merge(mut self, other: StatsReport) -> StatsReport {
        self.runs += other.runs;
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.degree_wrong += other.degree_wrong;
        self.hash_mismatch += other.hash_mismatch;
        self
    }

    pub fn accept_rate(&self) -> f64 {
        self.accepted as f64 / self.runs as f64
    }

    pub fn reject_rate(&self) -> f64 {
        self.rejected as f64 / self.runs as f64
    }

    /// Accepted runs as a reduced fraction.
    pub fn accept_fraction(&self) -> (u64, u64) {
        reduce(self.accepted, self.runs)
    }

    pub fn reject_fraction(&self) -> (u64, u64) {
        reduce(self.rejected, self.runs)
    }

    /// Wilson score interval for the acceptance rate at `z` standard errors.
    pub fn confidence_interval(&self, z: f64) -> (f64, f64) {
        if self.mode == RunMode::Exhaustive {
            let r = self.accept_rate();
            return (r, r);
        }
        let n = self.runs as f64;
        let phat = self.accept_rate();
        let denom = 1.0 + z * z / n;
        let centre = (phat + z * z / (2.0 * n)) / denom;
        let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }

    /// Whether the acceptance rate is within `k` binomial standard
    /// deviations of `expected`.
    pub fn accept_within_sigma(&self, expected: f64, k: f64) -> bool {
        let sigma = (expected * (1.0 - expected) / self.runs as f64).sqrt();
        (self.accept_rate() - expected).abs() <= k * sigma
    }

    /// Fixed-column table.
    pub fn to_table(&self) -> String {
        let (an, ad) = self.accept_fraction();
        let (rn, rd) = self.reject_fraction();
        let (lo, hi) = self.confidence_interval(1.96);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14}{:>12}{:>16}{:>12}",
            "outcome", "count", "fraction", "rate"
        );
        let _ = writeln!(
            s,
            "{:<14}{:>12}{:>16}{:>12.6}",
            "accepted",
            self.accepted,
            format!("{an}/{ad}"),
            self.accept_rate()
        );
        let _ = writeln!(
            s,
            "{:<14}{:>12}{:>16}{:>12.6}",
            "rejected",
            self.rejected,
            format!("{rn}/{rd}"),
            self.reject_rate()
        );
        let _ = writeln!(s, "{:<14}{:>12}", "degree-wrong", self.degree_wrong);
        let _ = writeln!(s, "{:<14}{:>12}", "hash-mismatch", self.hash_mismatch);
        let _ = writeln!(s, "{:<14}{:>12}", "runs", self.runs);
        let _ = writeln!(
            s,
            "{:<14}{:>12}   [{lo:.6}, {hi:.6}] (95%)",
            "mode",
            self.mode.to_string()
        );
        s
    }
}

fn reduce(num: u64, den: u64) -> (u64, u64) {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    match gcd(num, den) {
        0 => (num, den),
        g => (num / g, den / g),
    }
}

/// Sink for transcript records; `None` skips logging on hot paths.
struct Log<'a> {
    trial: u64,
    records: Option<&'a mut Vec<Record>>,
}

impl Log<'_> {
    fn push(&mut self, r: impl FnOnce(u64) -> Record) {
        let trial = self.trial;
        if let Some(out) = self.records.as_deref_mut() {
            out.push(r(trial));
        }
    }

    fn emit(&mut self, round: u32, m: &ProtocolMessage) {
        self.push(|trial| Record::Emit {
            trial,
            round,
            section: if m.is_broadcast() {
                Section::Public
            } else {
                Section::Private
            },
            kind: m.kind,
            from_x: m.from_x.value(),
            to_x: m.to_x.map(|x| x.value()),
            payload: m.payload.value(),
        });
    }
}

/// Collects one round's messages, then hands each participant its inbox.
/// Nothing is delivered before every participant has emitted.
fn barrier_deliver(
    log: &mut Log<'_>,
    round: u32,
    roster: &Roster,
    outbox: &[ProtocolMessage],
) -> BTreeMap<u64, Vec<ProtocolMessage>> {
    log.push(|trial| Record::Barrier {
        trial,
        round,
        collected: outbox.len(),
    });
    let mut inboxes: BTreeMap<u64, Vec<ProtocolMessage>> = roster
        .xs()
        .iter()
        .map(|x| (x.value(), Vec::new()))
        .collect();
    for m in outbox {
        match m.to_x {
            Some(to) => inboxes.entry(to.value()).or_default().push(*m),
            None => {
                for inbox in inboxes.values_mut() {
                    inbox.push(*m);
                }
            }
        }
    }
    for (&to_x, inbox) in &inboxes {
        let count = inbox.len();
        log.push(|trial| Record::Deliver {
            trial,
            round,
            to_x,
            count,
        });
    }
    inboxes
}

/// Runs one honest session among the given seats and returns everyone's
/// broadcast payloads, keyed by abscissa. Used to give replayers something
/// to replay.
fn prior_session(
    info: PublicGroupInfo,
    tokens: &[Token],
    protocol: ProtocolKind,
    rng: &mut ChaCha20Rng,
) -> Result<BTreeMap<u64, FieldElement>, SimError> {
    let roster = Roster::new(tokens.iter().map(|t| t.x).collect(), &info.params)?;
    let mut ps = tokens
        .iter()
        .map(|t| Participant::new(*t, info, roster.clone(), protocol))
        .collect::<Result<Vec<_>, _>>()?;
    let broadcasts = match protocol {
        ProtocolKind::P1 => ps
            .iter_mut()
            .map(|p| p.p1_reveal())
            .collect::<Result<Vec<_>, _>>()?,
        ProtocolKind::P2 => {
            let mut outbox = Vec::new();
            for p in ps.iter_mut() {
                outbox.extend(p.p2_make_mask(MaskSampling::Uniform, rng)?);
            }
            ps.iter_mut()
                .map(|p| {
                    let inbox: Vec<_> = outbox
                        .iter()
                        .filter(|m| m.to_x == Some(p.x()))
                        .copied()
                        .collect();
                    p.p2_masked_reveal(&inbox)
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(broadcasts
        .iter()
        .map(|m| (m.from_x.value(), m.payload))
        .collect())
}

/// Turns each seat into a concrete behaviour for this trial.
fn resolve_seats(
    prep: &Prepared,
    setup: &GroupSetup,
    info: PublicGroupInfo,
    overrides: &Overrides,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Behavior>, SimError> {
    let field = prep.field();
    let t = prep.params.t();
    let token_at = |x: u64| -> Result<Token, SimError> {
        setup
            .tokens
            .get((x as usize).wrapping_sub(1))
            .copied()
            .ok_or(SimError::UnknownSeat(x))
    };
    let mut out = Vec::with_capacity(prep.scenario.roster.len());
    for (i, seat) in prep.scenario.roster.iter().enumerate() {
        let behavior = match seat {
            Seat::Honest(idx) => Behavior::UseToken(token_at(*idx as u64)?),
            Seat::Adversary(spec) => {
                let x = field.element(spec.x);
                match &spec.kind {
                    AdversaryKind::OutsiderRandom => {
                        let drawn = field.random_element(rng);
                        let y = overrides.free_values.get(&i).copied().unwrap_or(drawn);
                        adversary::outsider_behavior(x, y)
                    }
                    AdversaryKind::OutsiderChosen { payload } => {
                        adversary::outsider_behavior(x, field.element(*payload))
                    }
                    AdversaryKind::InsiderColluders {
                        colluders,
                        strategy,
                        ..
                    } => {
                        let pooled = colluders
                            .iter()
                            .map(|&c| token_at(c))
                            .collect::<Result<Vec<_>, _>>()?;
                        let drawn = field.random_element(rng);
                        let guess = overrides.free_values.get(&i).copied().unwrap_or(drawn);
                        Behavior::UseToken(adversary::colluders_forge_token(
                            &pooled, x, t, *strategy, guess,
                        )?)
                    }
                    AdversaryKind::Replay { source } => {
                        let victim = token_at(spec.x)?;
                        let mut prior: Vec<Token> = vec![victim];
                        prior.extend(
                            setup
                                .tokens
                                .iter()
                                .filter(|tk| tk.x != victim.x)
                                .take(t)
                                .copied(),
                        );
                        let prior_protocol = match source {
                            ReplaySource::P1Reveal => ProtocolKind::P1,
                            ReplaySource::P2MaskedReveal => ProtocolKind::P2,
                        };
                        let seen = prior_session(info, &prior, prior_protocol, rng)?;
                        adversary::replay_behavior(
                            x,
                            seen[&victim.x.value()],
                            *source,
                            prep.scenario.protocol,
                        )
                    }
                }
            }
        };
        out.push(behavior);
    }
    Ok(out)
}

fn seat_records(prep: &Prepared, setup_tokens: &[Token]) -> Vec<SeatRecord> {
    prep.scenario
        .roster
        .iter()
        .map(|seat| match seat {
            Seat::Honest(i) => SeatRecord {
                x: seat.x(),
                role: "honest".into(),
                user_id: setup_tokens
                    .get(*i as usize - 1)
                    .map(|t| t.user_id.to_string()),
            },
            Seat::Adversary(spec) => SeatRecord {
                x: spec.x,
                role: match spec.kind {
                    AdversaryKind::OutsiderRandom => "outsider-random",
                    AdversaryKind::OutsiderChosen { .. } => "outsider-chosen",
                    AdversaryKind::InsiderColluders { .. } => "insider-colluders",
                    AdversaryKind::Replay { .. } => "replay",
                }
                .into(),
                user_id: None,
            },
        })
        .collect()
}

/// Executes one trial. `shared_setup` is the scenario-wide Protocol 2 group.
fn run_trial(
    prep: &Prepared,
    shared_setup: Option<&GroupSetup>,
    trial: u64,
    overrides: &Overrides,
    records: Option<&mut Vec<Record>>,
) -> Result<TrialOutcome, SimError> {
    let mut rng = prep.trial_rng(trial);
    let mut log = Log { trial, records };
    let owned_setup;
    let setup = match shared_setup {
        Some(s) => s,
        None => {
            owned_setup = group::setup_group(prep.params, &mut rng)?;
            &owned_setup
        }
    };
    if shared_setup.is_none() || trial == 0 {
        log.push(|trial| Record::Setup {
            trial,
            section: Section::Public,
            commitment: setup.commitment.to_hex(),
        });
    }
    let info = PublicGroupInfo {
        params: prep.params,
        commitment: setup.commitment,
    };
    let behaviors = resolve_seats(prep, setup, info, overrides, &mut rng)?;
    let protocol = prep.scenario.protocol;
    let mut ps = Vec::with_capacity(behaviors.len());
    for b in &behaviors {
        let mut p = Participant::new(b.token(), info, prep.roster.clone(), protocol)?;
        if let Behavior::OverrideReveal { payload, .. } = b {
            p = p.with_reveal_override(*payload);
        }
        ps.push(p);
    }

    let broadcasts = match protocol {
        ProtocolKind::P1 => {
            let outbox = ps
                .iter_mut()
                .map(|p| p.p1_reveal())
                .collect::<Result<Vec<_>, _>>()?;
            outbox.iter().for_each(|m| log.emit(1, m));
            let inboxes = barrier_deliver(&mut log, 1, &prep.roster, &outbox);
            for (p, b) in ps.iter_mut().zip(&behaviors) {
                if is_honest(b) {
                    let v = p.p1_verify(&inboxes[&p.x().value()])?;
                    log_verdict(&mut log, p.x(), &v);
                }
            }
            outbox
        }
        ProtocolKind::P2 => {
            let field = prep.field();
            let t = prep.params.t();
            let mut outbox = Vec::new();
            for (i, p) in ps.iter_mut().enumerate() {
                let mut mask =
                    protocol::sample_mask(&prep.params, prep.scenario.mask_sampling, &mut rng);
                if let Some((seat, lead)) = overrides.mask_leading {
                    if seat == i {
                        let mut coeffs: Vec<_> = (0..t).map(|k| mask.coeff(k)).collect();
                        coeffs[t - 1] = lead;
                        mask = Polynomial::new(field, coeffs).expect("same field");
                    }
                }
                outbox.extend(p.p2_make_mask_with(mask)?);
            }
            outbox.iter().for_each(|m| log.emit(1, m));
            let inboxes = barrier_deliver(&mut log, 1, &prep.roster, &outbox);
            let reveals = ps
                .iter_mut()
                .map(|p| p.p2_masked_reveal(&inboxes[&p.x().value()]))
                .collect::<Result<Vec<_>, _>>()?;
            reveals.iter().for_each(|m| log.emit(2, m));
            let inboxes = barrier_deliver(&mut log, 2, &prep.roster, &reveals);
            for (p, b) in ps.iter_mut().zip(&behaviors) {
                if is_honest(b) {
                    let v =
                        p.p2_verify(&inboxes[&p.x().value()], prep.scenario.consistency_rule)?;
                    log_verdict(&mut log, p.x(), &v);
                }
            }
            reveals
        }
    };

    // Every honest participant saw the same broadcasts, so the observer's
    // decision is the group's decision.
    let verdict = match protocol {
        ProtocolKind::P1 => protocol::p1_evaluate(&info, &prep.roster, &broadcasts)?,
        ProtocolKind::P2 => protocol::p2_evaluate(
            &info,
            &prep.roster,
            &broadcasts,
            prep.scenario.consistency_rule,
        )?,
    };
    log.push(|trial| Record::Outcome {
        trial,
        accepted: verdict.accepted,
        detail: verdict.detail,
    });
    Ok(TrialOutcome {
        verdict,
        broadcasts: broadcasts
            .iter()
            .map(|m| (m.from_x.value(), m.payload.value()))
            .collect(),
    })
}

fn is_honest(b: &Behavior) -> bool {
    matches!(b, Behavior::UseToken(t) if t.user_id != adversary::ADVERSARY_USER_ID)
}

fn log_verdict(log: &mut Log<'_>, x: FieldElement, v: &Verdict) {
    log.push(|trial| Record::Verdict {
        trial,
        x: x.value(),
        accepted: v.accepted,
        detail: v.detail,
    });
}

/// The enumeration plan for exhaustive mode.
fn exhaustive_plan(prep: &Prepared) -> Result<Vec<Overrides>, SimError> {
    let field = prep.field();
    let p = field.modulus();
    let free = prep.free_seats();
    let enumerate_mask = free.is_empty();
    let dims = if enumerate_mask { 1 } else { free.len() };
    let runs = (p as u128).checked_pow(dims as u32).unwrap_or(u128::MAX);
    if p > EXHAUSTIVE_MAX_MODULUS || runs > EXHAUSTIVE_MAX_RUNS as u128 {
        return Err(SimError::ExhaustiveScale { p, free: dims });
    }
    if enumerate_mask {
        if prep.scenario.protocol != ProtocolKind::P2 {
            return Err(SimError::NoFreeValue);
        }
        let seat = prep
            .scenario
            .roster
            .iter()
            .position(|s| matches!(s, Seat::Honest(_)))
            .ok_or(SimError::NoFreeValue)?;
        return Ok(field
            .elements()
            .map(|lead| Overrides {
                free_values: BTreeMap::new(),
                mask_leading: Some((seat, lead)),
            })
            .collect());
    }
    let mut plans = Vec::with_capacity(runs as usize);
    let mut digits = vec![0u64; free.len()];
    'odometer: loop {
        plans.push(Overrides {
            free_values: free
                .iter()
                .zip(&digits)
                .map(|(&seat, &d)| (seat, field.element(d)))
                .collect(),
            mask_leading: None,
        });
        for d in digits.iter_mut() {
            *d += 1;
            if *d < p {
                continue 'odometer;
            }
            *d = 0;
        }
        break;
    }
    Ok(plans)
}

/// Estimates acceptance over `trials` independently seeded runs.
pub fn run_monte_carlo(sc: &Scenario) -> Result<StatsReport, SimError> {
    let prep = sc.validate()?;
    let setup = prep.scenario_setup()?;
    let none = Overrides::default();
    let mut report = (0..sc.trials)
        .into_par_iter()
        .map(|trial| run_trial(&prep, setup.as_ref(), trial, &none, None).map(|o| o.verdict))
        .try_fold(StatsReport::default, |mut acc, v| {
            acc.record(&v?);
            Ok::<_, SimError>(acc)
        })
        .try_reduce(StatsReport::default, |a, b| Ok(a.merge(b)))?;
    report.mode = RunMode::MonteCarlo;
    Ok(report)
}

/// Exact acceptance rate by enumerating every value of the free
/// adversarial draws (jointly, when there are several). With no adversary
/// holding a free value, a Protocol 2 scenario enumerates the leading mask
/// coefficient of the first honest seat instead. All other randomness is
/// fixed by the seed (trial 0).
pub fn run_exhaustive(sc: &Scenario) -> Result<StatsReport, SimError> {
    let prep = sc.validate()?;
    let setup = prep.scenario_setup()?;
    let plans = exhaustive_plan(&prep)?;
    let mut report = plans
        .par_iter()
        .map(|ov| run_trial(&prep, setup.as_ref(), 0, ov, None).map(|o| o.verdict))
        .try_fold(StatsReport::default, |mut acc, v| {
            acc.record(&v?);
            Ok::<_, SimError>(acc)
        })
        .try_reduce(StatsReport::default, |a, b| Ok(a.merge(b)))?;
    report.mode = RunMode::Exhaustive;
    Ok(report)
}

/// Runs the scenario in its configured mode and records every event.
pub fn run_scenario(sc: &Scenario) -> Result<Transcript, SimError> {
    let prep = sc.validate()?;
    let setup = prep.scenario_setup()?;
    let mut records = vec![Record::Header {
        schema: TRANSCRIPT_SCHEMA.into(),
        scenario: sc.clone(),
    }];
    let plans: Vec<(u64, Overrides)> = match sc.mode {
        RunMode::MonteCarlo => (0..sc.trials).map(|t| (t, Overrides::default())).collect(),
        RunMode::Exhaustive => exhaustive_plan(&prep)?
            .into_iter()
            .map(|o| (0, o))
            .collect(),
    };
    let seat_tokens = match &setup {
        Some(s) => s.tokens.clone(),
        None => Vec::new(),
    };
    records.push(Record::Seats {
        section: Section::Private,
        seats: seat_records(&prep, &seat_tokens),
    });
    let mut report = StatsReport {
        mode: sc.mode,
        ..StatsReport::default()
    };
    for (run_index, (trial, ov)) in plans.iter().enumerate() {
        let mut trial_records = Vec::new();
        let outcome = run_trial(&prep, setup.as_ref(), *trial, ov, Some(&mut trial_records))?;
        if sc.mode == RunMode::Exhaustive {
            // Exhaustive runs share trial 0's randomness; number them apart.
            renumber(&mut trial_records, run_index as u64);
        }
        records.extend(trial_records);
        report.record(&outcome.verdict);
    }
    let (ci_low, ci_high) = report.confidence_interval(1.96);
    records.push(Record::Summary {
        mode: report.mode,
        runs: report.runs,
        accepted: report.accepted,
        rejected: report.rejected,
        degree_wrong: report.degree_wrong,
        hash_mismatch: report.hash_mismatch,
        accept_rate: report.accept_rate(),
        ci_low,
        ci_high,
    });
    Ok(Transcript { records, report })
}

fn renumber(records: &mut [Record], run: u64) {
    for r in records {
        match r {
            Record::Setup { trial, .. }
            | Record::Emit { trial, .. }
            | Record::Barrier { trial, .. }
            | Record::Deliver { trial, .. }
            | Record::Verdict { trial, .. }
            | Record::Outcome { trial, .. } => *trial = run,
            _ => {}
        }
    }
}

/// Histogram of the broadcast value of the seat at `x` over all trials.
pub fn broadcast_histogram(sc: &Scenario, x: u64) -> Result<Vec<u64>, SimError> {
    let prep = sc.validate()?;
    let p = prep.field().modulus();
    if p > EXHAUSTIVE_MAX_MODULUS {
        return Err(SimError::ExhaustiveScale { p, free: 0 });
    }
    if !sc.roster.iter().any(|s| s.x() == x) {
        return Err(SimError::UnknownSeat(x));
    }
    let setup = prep.scenario_setup()?;
    let none = Overrides::default();
    (0..sc.trials)
        .into_par_iter()
        .map(|trial| run_trial(&prep, setup.as_ref(), trial, &none, None))
        .try_fold(
            || vec![0u64; p as usize],
            |mut hist, outcome| {
                let outcome = outcome?;
                let (_, y) = outcome
                    .broadcasts
                    .iter()
                    .find(|(bx, _)| *bx == x)
                    .expect("seat is seated");
                hist[*y as usize] += 1;
                Ok::<_, SimError>(hist)
            },
        )
        .try_reduce(
            || vec![0u64; p as usize],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Runs a single trial with explicit overrides; exposed for oracle tests.
pub fn run_single(
    sc: &Scenario,
    trial: u64,
    overrides: &Overrides,
) -> Result<TrialOutcome, SimError> {
    let prep = sc.validate()?;
    let setup = prep.scenario_setup()?;
    run_trial(&prep, setup.as_ref(), trial, overrides, None)
}

/// Probability that an all-honest Protocol 2 roster of `j` seats is rejected
/// under the exact-degree rule.
pub fn honest_p2_reject_probability(p: u64, j: usize, sampling: MaskSampling) -> f64 {
    let p = p as f64;
    match sampling {
        MaskSampling::Uniform => 1.0 / p,
        MaskSampling::NonzeroLeading => (1.0 - (-1.0 / (p - 1.0)).powi(j as i32)) / p,
    }
}

/// Degree reported for a rejection, if any.
pub fn rejection_degree(v: &Verdict) -> Option<Degree> {
    match v.detail {
        VerdictDetail::DegreeWrong(d) => Some(d),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ForgeStrategy;

    fn g13() -> GroupSpec {
        GroupSpec { p: 13, t: 2, n: 4 }
    }

    #[test]
    fn scenario_validation_errors() {
        let ok = Scenario::honest(ProtocolKind::P2, g13(), 3, 1, 1);
        assert!(ok.validate().is_ok());

        let mut s = ok.clone();
        s.roster.truncate(2);
        assert!(matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("roster")));

        let mut s = ok.clone();
        s.roster[2] = Seat::Honest(2);
        assert!(
            matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("two seats"))
        );

        let mut s = ok.clone();
        s.roster[2] = Seat::Honest(9);
        assert!(s.validate().is_err());

        let mut s = ok.clone();
        s.trials = 0;
        assert!(s.validate().is_err());

        let mut s = ok.clone();
        s.group.p = 15;
        assert!(matches!(s.validate(), Err(SimError::Field(_))));

        let s = ok.clone().with_adversary(AdversarySpec {
            x: 3,
            kind: AdversaryKind::InsiderColluders {
                colluders: vec![1, 2],
                strategy: ForgeStrategy::UniformGuess,
                expect_break: false,
            },
        });
        assert!(
            matches!(s.validate(), Err(SimError::InvalidScenario(m)) if m.contains("expect-break"))
        );

        let s = ok.with_adversary(AdversarySpec {
            x: 3,
            kind: AdversaryKind::InsiderColluders {
                colluders: vec![3],
                strategy: ForgeStrategy::UniformGuess,
                expect_break: false,
            },
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn p1_scenario_rejects_pure_honest_exhaustive() {
        let mut s = Scenario::honest(ProtocolKind::P1, g13(), 3, 1, 1);
        s.mode = RunMode::Exhaustive;
        assert_eq!(run_exhaustive(&s), Err(SimError::NoFreeValue));
    }

    #[test]
    fn exhaustive_scale_is_bounded() {
        let mut s = Scenario::honest(ProtocolKind::P2, GroupSpec { p: 263, t: 2, n: 4 }, 3, 1, 1);
        s.mode = RunMode::Exhaustive;
        assert!(matches!(
            run_exhaustive(&s),
            Err(SimError::ExhaustiveScale { .. })
        ));
    }

    #[test]
    fn report_fraction_and_table() {
        let r = StatsReport {
            mode: RunMode::Exhaustive,
            runs: 13,
            accepted: 1,
            rejected: 12,
            degree_wrong: 12,
            hash_mismatch: 0,
        };
        assert_eq!(r.reject_fraction(), (12, 13));
        assert_eq!(r.confidence_interval(1.96), (1.0 / 13.0, 1.0 / 13.0));
        let table = r.to_table();
        assert!(table.contains("12/13"));
        assert_eq!(table.lines().count(), 7);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate() {
        let r = StatsReport {
            mode: RunMode::MonteCarlo,
            runs: 1000,
            accepted: 900,
            rejected: 100,
            ..Default::default()
        };
        let (lo, hi) = r.confidence_interval(1.96);
        assert!(lo < 0.9 && 0.9 < hi);
        assert!(hi - lo < 0.05);
    }

    #[test]
    fn nonzero_leading_reject_probability_matches_enumeration() {
        // Enumerate the sum of j nonzero residues plus a fixed nonzero lead.
        let p = 13u64;
        for j in 1..=4usize {
            let mut counts = vec![0u64; p as usize];
            counts[5] = 1; // dealer's leading coefficient
            for _ in 0..j {
                let mut next = vec![0u64; p as usize];
                for (v, &c) in counts.iter().enumerate() {
                    for b in 1..p {
                        next[(v + b as usize) % p as usize] += c;
                    }
                }
                counts = next;
            }
            let total: u64 = counts.iter().sum();
            let exact = counts[0] as f64 / total as f64;
            let formula = honest_p2_reject_probability(p, j, MaskSampling::NonzeroLeading);
            assert!((exact - formula).abs() < 1e-12, "j = {j}");
        }
    }
}
