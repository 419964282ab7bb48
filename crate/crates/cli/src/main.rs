use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use groupauth::claims;
use groupauth::sim::{self, Record, Scenario, Transcript};
use groupauth::{setup_group, FieldParams, GroupParams, DEFAULT_MODULUS};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

const EXIT_REJECTED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "groupauth",
    version,
    about = "Threshold group authentication: deal groups, run protocol scenarios, check claims"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deal a group: one token file per user plus a public group file.
    Setup {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_MODULUS)]
        p: u64,
        /// Seed for the dealer; drawn from the OS and printed when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file and print the verdict.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON-lines transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the acceptance checks; exit 0 iff all pass.
    VerifyClaims {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Summarise a saved transcript.
    ShowTranscript {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Records,
}

/// A failure that maps to an exit code.
struct Failure {
    code: u8,
    message: Option<String>,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: Some(msg.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Setup { t, n, p, seed, out } => cmd_setup(t, n, p, seed, &out),
        Command::Run {
            scenario,
            seed,
            out,
            format,
        } => cmd_run(&scenario, seed, out.as_deref(), format),
        Command::VerifyClaims { format } => cmd_verify_claims(format),
        Command::ShowTranscript { path, format } => cmd_show_transcript(&path, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(m) = f.message {
                eprintln!("error: {m}");
            }
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct TokenFile {
    user_id: u32,
    x: u64,
    y: u64,
    p: u64,
}

#[derive(Serialize)]
struct GroupFile {
    p: u64,
    t: usize,
    n: usize,
    commitment: String,
}

fn cmd_setup(t: usize, n: usize, p: u64, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let field = FieldParams::new(p).map_err(|e| usage(e.to_string()))?;
    let gp = GroupParams::new(t, n, field).map_err(|e| usage(e.to_string()))?;
    let seed = seed.unwrap_or_else(rand::random);
    println!("seed: {seed}");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let setup = setup_group(gp, &mut rng).map_err(|e| usage(e.to_string()))?;

    fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let write = |name: String, body: String| {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok::<_, Failure>(())
    };
    for tok in &setup.tokens {
        let file = TokenFile {
            user_id: tok.user_id.0,
            x: tok.x.value(),
            y: tok.y.value(),
            p,
        };
        write(
            format!("token-{}.toml", tok.user_id),
            toml::to_string(&file).expect("token serializes"),
        )?;
    }
    let public = GroupFile {
        p,
        t,
        n,
        commitment: setup.commitment.to_hex(),
    };
    write(
        "group.toml".into(),
        toml::to_string(&public).expect("group serializes"),
    )?;
    println!("commitment: {}", public.commitment);
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Scenario::from_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let mut sc = load_scenario(path)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let transcript =
        sim::run_scenario(&sc).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let jsonl = transcript.to_jsonl();
    if let Some(out) = out {
        fs::write(out, &jsonl).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    }
    let r = &transcript.report;
    // Majority of runs decides the batch verdict.
    let accepted = 2 * r.accepted > r.runs;
    match format {
        Format::Records => print!("{jsonl}"),
        Format::Table => {
            println!("seed: {}", sc.seed);
            println!(
                "scenario: {} p={} t={} n={} seats={} mode={}",
                sc.protocol,
                sc.group.p,
                sc.group.t,
                sc.group.n,
                sc.roster.len(),
                sc.mode
            );
            let (an, ad) = r.accept_fraction();
            let (rn, rd) = r.reject_fraction();
            if accepted {
                println!("ACCEPTED {an}/{ad} of runs accepted");
            } else {
                println!("REJECTED {rn}/{rd} of runs rejected");
            }
            print!("{}", r.to_table());
            if let Some(out) = out {
                println!("transcript: {}", out.display());
            }
        }
    }
    if accepted {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_REJECTED,
            message: None,
        })
    }
}

#[derive(Serialize)]
struct ClaimRecord<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    seconds: f64,
    detail: &'a str,
}

fn cmd_verify_claims(format: Format) -> Result<(), Failure> {
    let mut all = true;
    for (id, _) in claims::claim_ids() {
        let r = claims::run_claim(id).expect("listed claim");
        all &= r.passed;
        match format {
            Format::Table => println!("{}", r.line()),
            Format::Records => {
                let rec = ClaimRecord {
                    id: r.id,
                    name: r.name,
                    passed: r.passed,
                    seconds: r.elapsed.as_secs_f64(),
                    detail: &r.detail,
                };
                println!("{}", serde_json::to_string(&rec).expect("claim serializes"));
            }
        }
    }
    if format == Format::Table {
        println!(
            "{}",
            if all {
                "all claims pass"
            } else {
                "some claims FAILED"
            }
        );
    }
    if all {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_REJECTED,
            message: None,
        })
    }
}

fn cmd_show_transcript(path: &Path, format: Format) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let records =
        Transcript::parse_jsonl(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if format == Format::Records {
        print!("{text}");
        return Ok(());
    }
    print!("{}", render(&records));
    Ok(())
}

fn render(records: &[Record]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = match r {
            Record::Header { schema, scenario } => writeln!(
                s,
                "{schema}  {} p={} t={} n={} seed={} mode={} trials={}",
                scenario.protocol, scenario.group.p, scenario.group.t, scenario.group.n, scenario.seed, scenario.mode, scenario.trials
            ),
            Record::Seats { seats, .. } => writeln!(s, "seats: {} (private)", seats.len()),
            Record::Setup { trial, commitment, .. } => writeln!(s, "trial {trial}: setup H(s) = {commitment}"),
            Record::Emit {
                trial,
                round,
                section,
                kind,
                from_x,
                to_x,
                payload,
            } => {
                let to = to_x.map_or("all".to_string(), |x| format!("x={x}"));
                writeln!(s, "trial {trial} round {round}: x={from_x} -> {to} {kind:?} {payload} [{section:?}]")
            }
            Record::Barrier { trial, round, collected } => {
                writeln!(s, "trial {trial} round {round}: barrier ({collected} collected)")
            }
            Record::Deliver { .. } => Ok(()),
            Record::Verdict { trial, x, accepted, detail } => {
                writeln!(s, "trial {trial}: x={x} {} ({detail:?})", if *accepted { "accepts" } else { "rejects" })
            }
            Record::Outcome { trial, accepted, detail } => {
                writeln!(s, "trial {trial}: {} ({detail:?})", if *accepted { "ACCEPTED" } else { "REJECTED" })
            }
            Record::Summary {
                mode,
                runs,
                accepted,
                rejected,
                accept_rate,
                ci_low,
                ci_high,
                ..
            } => writeln!(
                s,
                "summary ({mode}): {accepted} accepted, {rejected} rejected of {runs}; rate {accept_rate:.6} [{ci_low:.6}, {ci_high:.6}]"
            ),
        };
    }
    s
}
