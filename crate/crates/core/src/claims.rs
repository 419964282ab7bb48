//! Numerical checks of the library's security and correctness properties.
//!
//! Each check is exact (by enumeration over a small field) wherever the
//! property is a counting statement, and a Monte Carlo estimate with a
//! 4-sigma binomial band where it is a rate at a larger modulus. The
//! `groupauth verify-claims` command and the `acceptance` test target both
//! run [`all_claims`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::adversary::{self, AdversaryKind, AdversarySpec, ForgeStrategy};
use crate::field::{FieldParams, DEFAULT_MODULUS};
use crate::group::{self, GroupParams, UserId};
use crate::poly::{self, Polynomial, SharePoint};
use crate::protocol::{Participant, ProtocolKind, PublicGroupInfo, Roster};
use crate::shamir::{self, DealerConfig};
use crate::sim::{self, GroupSpec, Scenario, Seat};

/// Monte Carlo tolerance in binomial standard deviations.
pub const SIGMA_BAND: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct ClaimResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl ClaimResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {:>9.3}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Checks that run, failing only on unexpected library errors.
type Check = fn() -> Result<(bool, String), String>;

const CLAIMS: [(u8, &str, Check); 10] = [
    (1, "shamir-correctness", shamir_correctness),
    (2, "perfect-secrecy", perfect_secrecy),
    (3, "strong-t-consistency", strong_t_consistency),
    (4, "p1-soundness", p1_soundness),
    (5, "p2-completeness-soundness", p2_completeness_soundness),
    (6, "token-hiding", token_hiding),
    (7, "collusion-bound", collusion_bound),
    (8, "homomorphism", homomorphism),
    (9, "determinism", determinism),
    (10, "p2-round-performance", p2_round_performance),
];

pub fn claim_ids() -> impl Iterator<Item = (u8, &'static str)> {
    CLAIMS.iter().map(|(id, name, _)| (*id, *name))
}

pub fn run_claim(id: u8) -> Option<ClaimResult> {
    let (id, name, check) = CLAIMS.iter().find(|(i, _, _)| *i == id)?;
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let (passed, detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(ClaimResult {
        id: *id,
        name,
        passed,
        detail,
        elapsed,
    })
}

pub fn all_claims() -> Vec<ClaimResult> {
    CLAIMS
        .iter()
        .filter_map(|(id, _, _)| run_claim(*id))
        .collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn field(p: u64) -> FieldParams {
    FieldParams::new(p).expect("prime")
}

/// All `k`-subsets of `0..n` as index vectors.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn shamir_correctness() -> Result<(bool, String), String> {
    let f = field(97);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5a41_0001);
    let (mut subsets_checked, mut failures) = (0u64, 0u64);
    for _ in 0..1000 {
        let t = rng.gen_range(2..=5);
        let n = rng.gen_range(t + 1..=t + 4);
        let cfg = DealerConfig::new(t, n, f).map_err(err)?;
        let secret = f.random_element(&mut rng);
        let set = shamir::generate_shares(&cfg, secret, &mut rng).map_err(err)?;
        for idx in subsets(n, t) {
            let pick: Vec<_> = idx.iter().map(|&i| set.shares[i]).collect();
            subsets_checked += 1;
            if shamir::reconstruct_secret(&pick, t).map_err(err)? != secret {
                failures += 1;
            }
        }
    }
    Ok((
        failures == 0,
        format!(
            "{} of {subsets_checked} t-subsets reconstructed",
            subsets_checked - failures
        ),
    ))
}

fn perfect_secrecy() -> Result<(bool, String), String> {
    let f = field(13);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5a41_0002);
    let (mut checked, mut uniform) = (0, 0);
    for t in [2usize, 3] {
        let n = 5;
        let cfg = DealerConfig::new(t, n, f).map_err(err)?;
        for _ in 0..3 {
            let secret = f.random_element(&mut rng);
            let set = shamir::generate_shares(&cfg, secret, &mut rng).map_err(err)?;
            for idx in subsets(n, t - 1) {
                let pick: Vec<_> = idx.iter().map(|&i| set.shares[i]).collect();
                let c = shamir::brute_force_secret_candidates(&pick, t, f).map_err(err)?;
                checked += 1;
                if c.is_uniform_over(f) {
                    uniform += 1;
                }
            }
        }
    }
    Ok((
        checked == uniform,
        format!("{uniform}/{checked} (t-1)-subsets leave all 13 secrets equally likely"),
    ))
}

fn strong_t_consistency() -> Result<(bool, String), String> {
    let f = field(13);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5a41_0003);
    let mut honest_ok = true;
    let mut flips = BTreeMap::new();
    for t in 2..=4usize {
        for j in t + 1..=t + 3 {
            let cfg = DealerConfig::new(t, j, f).map_err(err)?;
            for _ in 0..20 {
                let secret = f.random_element(&mut rng);
                let set = shamir::generate_shares(&cfg, secret, &mut rng).map_err(err)?;
                honest_ok &= poly::check_strong_t_consistency(&set.shares, t)
                    .map_err(err)?
                    .consistent;
            }
            let set =
                shamir::generate_shares(&cfg, f.random_element(&mut rng), &mut rng).map_err(err)?;
            for victim in 0..j {
                let mut flipped = 0u64;
                for y in f.elements() {
                    let mut pts = set.shares.clone();
                    pts[victim] = SharePoint::new(pts[victim].x(), y).map_err(err)?;
                    if !poly::check_strong_t_consistency(&pts, t)
                        .map_err(err)?
                        .consistent
                    {
                        flipped += 1;
                    }
                }
                *flips.entry(flipped).or_insert(0u64) += 1;
            }
        }
    }
    let exact = flips.keys().all(|&k| k == 12);
    Ok((
        honest_ok && exact,
        format!("honest always consistent: {honest_ok}; corruption flips per position: {flips:?} (want 12 of 13)"),
    ))
}

fn outsider(x: u64) -> AdversarySpec {
    AdversarySpec {
        x,
        kind: AdversaryKind::OutsiderRandom,
    }
}

fn p1_soundness() -> Result<(bool, String), String> {
    let g13 = GroupSpec { p: 13, t: 2, n: 4 };
    let one = Scenario::honest(ProtocolKind::P1, g13, 3, 0x41, 1).with_adversary(outsider(2));
    let r1 = sim::run_exhaustive(&one).map_err(err)?;
    let two = Scenario::honest(ProtocolKind::P1, g13, 4, 0x42, 1)
        .with_adversary(outsider(2))
        .with_adversary(outsider(4));
    let r2 = sim::run_exhaustive(&two).map_err(err)?;
    let mc = Scenario::honest(
        ProtocolKind::P1,
        GroupSpec { p: 97, t: 3, n: 6 },
        5,
        0x43,
        10_000,
    )
    .with_adversary(outsider(3));
    let r3 = sim::run_monte_carlo(&mc).map_err(err)?;
    let ok1 = (r1.accepted, r1.runs) == (1, 13);
    let ok2 = (r2.accepted, r2.runs) == (13, 169);
    let ok3 = r3.accept_within_sigma(1.0 / 97.0, SIGMA_BAND);
    Ok((
        ok1 && ok2 && ok3,
        format!(
            "k=1: {}/{}; k=2: {}/{}; p=97 MC: {:.5} vs {:.5}",
            r1.accepted,
            r1.runs,
            r2.accepted,
            r2.runs,
            r3.accept_rate(),
            1.0 / 97.0
        ),
    ))
}

fn p2_completeness_soundness() -> Result<(bool, String), String> {
    let g13 = GroupSpec { p: 13, t: 2, n: 4 };
    // Honest acceptance: enumerate the first seat's leading mask coefficient.
    let mut exhaustive_ok = true;
    for (t, j) in [(2usize, 3u32), (3, 5)] {
        let g = GroupSpec {
            p: 13,
            t,
            n: j as usize + 1,
        };
        for seed in 0..5 {
            let r = sim::run_exhaustive(&Scenario::honest(ProtocolKind::P2, g, j, seed, 1))
                .map_err(err)?;
            exhaustive_ok &= (r.accepted, r.runs) == (12, 13);
        }
    }
    let mc = Scenario::honest(
        ProtocolKind::P2,
        GroupSpec { p: 97, t: 3, n: 6 },
        5,
        0x51,
        10_000,
    );
    let r = sim::run_monte_carlo(&mc).map_err(err)?;
    let mc_ok = r.accept_within_sigma(96.0 / 97.0, SIGMA_BAND);

    // Invalid token: seed 5's honest masks do not cancel, so exactly the
    // true token survives among all 13 candidate values.
    let forged = Scenario::honest(ProtocolKind::P2, g13, 3, 5, 1).with_adversary(outsider(3));
    let d = sim::run_exhaustive(&forged).map_err(err)?;
    let detect_ok = d.reject_fraction() == (12, 13);
    let mut at_most_one = true;
    for seed in 0..20 {
        let s = Scenario::honest(ProtocolKind::P2, g13, 3, seed, 1).with_adversary(outsider(2));
        at_most_one &= sim::run_exhaustive(&s).map_err(err)?.accepted <= 1;
    }
    let (dn, dd) = d.reject_fraction();
    Ok((
        exhaustive_ok && mc_ok && detect_ok && at_most_one,
        format!(
            "honest exhaustive 12/13: {exhaustive_ok}; p=97 MC: {:.5} vs {:.5}; invalid token detected {dn}/{dd}",
            r.accept_rate(),
            96.0 / 97.0
        ),
    ))
}

fn token_hiding() -> Result<(bool, String), String> {
    let f = field(13);
    let gp = GroupParams::new(2, 3, f).map_err(err)?;
    let commitment = group::hash_secret(f.zero());
    let info = PublicGroupInfo {
        params: gp,
        commitment,
    };
    let roster = Roster::new(vec![f.element(1), f.element(2), f.element(3)], &gp).map_err(err)?;
    let own_mask = Polynomial::from_u64s(f, &[4, 9]);
    let third_mask = Polynomial::from_u64s(f, &[11, 6]);
    let mut distributions = Vec::new();
    for y in f.elements() {
        let mut hist = vec![0u64; 13];
        for c0 in f.elements() {
            for c1 in f.elements() {
                let tok = |x: u64, y| group::Token {
                    user_id: UserId(x as u32),
                    x: f.element(x),
                    y,
                };
                let mut me = Participant::new(tok(1, y), info, roster.clone(), ProtocolKind::P2)
                    .map_err(err)?;
                let mut other =
                    Participant::new(tok(2, f.zero()), info, roster.clone(), ProtocolKind::P2)
                        .map_err(err)?;
                let mut third =
                    Participant::new(tok(3, f.zero()), info, roster.clone(), ProtocolKind::P2)
                        .map_err(err)?;
                me.p2_make_mask_with(own_mask.clone()).map_err(err)?;
                let mut inbox = other
                    .p2_make_mask_with(Polynomial::new(f, vec![c0, c1]).map_err(err)?)
                    .map_err(err)?;
                inbox.extend(third.p2_make_mask_with(third_mask.clone()).map_err(err)?);
                inbox.retain(|m| m.to_x == Some(f.element(1)));
                let reveal = me.p2_masked_reveal(&inbox).map_err(err)?;
                hist[reveal.payload.value() as usize] += 1;
            }
        }
        distributions.push(hist);
    }
    let uniform = distributions.iter().all(|h| h.iter().all(|&c| c == 13));
    let identical = distributions.windows(2).all(|w| w[0] == w[1]);
    Ok((
        uniform && identical,
        format!(
            "13 token values x 169 masks: uniform {uniform}, identical across tokens {identical}"
        ),
    ))
}

fn collusion_bound() -> Result<(bool, String), String> {
    let f = field(13);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5a41_0007);
    let mut ok = true;
    let mut report = String::new();
    for t in [2usize, 3] {
        let gp = GroupParams::new(t, t + 3, f).map_err(err)?;
        let setup = group::setup_group(gp, &mut rng).map_err(err)?;
        let target = setup.tokens[t + 2].x;
        for k in 0..=t {
            let pooled = &setup.tokens[..k];
            for strategy in [
                ForgeStrategy::UniformGuess,
                ForgeStrategy::InterpolateAvailable,
            ] {
                let mut hits = 0u64;
                for guess in f.elements() {
                    let forged =
                        adversary::colluders_forge_token(pooled, target, t, strategy, guess)
                            .map_err(err)?;
                    if setup.state.verify_token(&forged).map_err(err)? {
                        hits += 1;
                    }
                }
                let want = match (k >= t, strategy) {
                    (true, ForgeStrategy::InterpolateAvailable) => 13,
                    _ => 1,
                };
                ok &= hits == want;
                if strategy == ForgeStrategy::InterpolateAvailable {
                    let _ = write!(report, "t={t} k={k}: {hits}/13; ");
                }
            }
        }
    }
    Ok((ok, report.trim_end().trim_end_matches(';').to_string()))
}

fn homomorphism() -> Result<(bool, String), String> {
    let f = field(97);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5a41_0008);
    let mut agree = 0;
    for _ in 0..1000 {
        let df = rng.gen_range(0..6usize);
        let dg = rng.gen_range(0..6usize);
        let rand_poly = |d: usize, rng: &mut ChaCha20Rng| {
            Polynomial::new(f, (0..=d).map(|_| f.random_element(rng)).collect())
                .expect("same field")
        };
        let pf = rand_poly(df, &mut rng);
        let pg = rand_poly(dg, &mut rng);
        let j = df.max(dg) + 1 + rng.gen_range(0..3usize);
        let mut xs: Vec<u64> = (1..97).collect();
        for i in 0..j {
            let k = rng.gen_range(i..xs.len());
            xs.swap(i, k);
        }
        let sample = |poly: &Polynomial| -> Result<Vec<SharePoint>, String> {
            xs[..j]
                .iter()
                .map(|&x| {
                    SharePoint::new(f.element(x), poly.eval(f.element(x)).map_err(err)?)
                        .map_err(err)
                })
                .collect()
        };
        let (sf, sg) = (sample(&pf)?, sample(&pg)?);
        let summed: Vec<_> = sf
            .iter()
            .zip(&sg)
            .map(|(a, b)| SharePoint::new(a.x(), a.y() + b.y()).map_err(err))
            .collect::<Result<_, _>>()?;
        let lhs = poly::interpolate(&sf)
            .map_err(err)?
            .add(&poly::interpolate(&sg).map_err(err)?)
            .map_err(err)?;
        let rhs = poly::interpolate(&summed).map_err(err)?;
        if lhs == rhs && rhs == pf.add(&pg).map_err(err)? {
            agree += 1;
        }
    }
    Ok((agree == 1000, format!("{agree}/1000 pairs")))
}

fn determinism() -> Result<(bool, String), String> {
    let g = GroupSpec { p: 97, t: 3, n: 6 };
    let mut scenarios = vec![
        Scenario::honest(ProtocolKind::P1, g, 5, 0x91, 25),
        Scenario::honest(ProtocolKind::P2, g, 5, 0x92, 25).with_adversary(outsider(4)),
        Scenario::honest(ProtocolKind::P2, g, 4, 0x93, 10).with_adversary(AdversarySpec {
            x: 4,
            kind: AdversaryKind::Replay {
                source: adversary::ReplaySource::P2MaskedReveal,
            },
        }),
    ];
    let mut ex = Scenario::honest(
        ProtocolKind::P2,
        GroupSpec { p: 13, t: 2, n: 4 },
        3,
        0x94,
        1,
    )
    .with_adversary(outsider(3));
    ex.mode = sim::RunMode::Exhaustive;
    scenarios.push(ex);
    let mut identical = 0;
    for sc in &scenarios {
        let a = sim::run_scenario(sc).map_err(err)?.to_jsonl();
        let b = sim::run_scenario(sc).map_err(err)?.to_jsonl();
        if a == b && !a.is_empty() {
            identical += 1;
        }
    }
    Ok((
        identical == scenarios.len(),
        format!(
            "{identical}/{} scenarios byte-identical on rerun",
            scenarios.len()
        ),
    ))
}

/// Upper bound for one full Protocol 2 round at `j = 50`, `t = 10`.
pub const P2_ROUND_BUDGET: Duration = Duration::from_millis(100);

fn p2_round_performance() -> Result<(bool, String), String> {
    let sc = Scenario {
        roster: (1..=50).map(Seat::Honest).collect(),
        ..Scenario::honest(
            ProtocolKind::P2,
            GroupSpec {
                p: DEFAULT_MODULUS,
                t: 10,
                n: 50,
            },
            50,
            0xa1,
            1,
        )
    };
    // Warm-up run, then the median of five timed rounds.
    sim::run_single(&sc, 0, &Default::default()).map_err(err)?;
    let mut times = Vec::new();
    let mut accepted = 0;
    for trial in 0..5 {
        let start = Instant::now();
        let out = sim::run_single(&sc, trial, &Default::default()).map_err(err)?;
        times.push(start.elapsed());
        accepted += out.verdict.accepted as u32;
    }
    times.sort();
    let median = times[2];
    Ok((
        median < P2_ROUND_BUDGET && accepted == 5,
        format!(
            "median {:.2} ms over 5 rounds (budget 100 ms), {accepted}/5 accepted",
            median.as_secs_f64() * 1e3
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_count() {
        assert_eq!(subsets(5, 2).len(), 10);
        assert_eq!(subsets(4, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn claim_lookup() {
        assert!(run_claim(99).is_none());
        assert_eq!(claim_ids().count(), 10);
    }
}
