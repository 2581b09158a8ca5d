//! `aegis` — attack-pattern tooling for EVM execution traces.
//!
//! Subcommands:
//! - `check`: parse and validate pattern files, printing canonical forms and ids
//! - `analyze`: run the detection engine over a trace file or a built-in scenario
//! - `scenario`: list built-in scenarios or export one as a wire-format trace
//! - `gov`: execute a governance script and emit the resulting event log
//!
//! Exit codes: 0 = clean, 1 = findings or oracle mismatch, 2 = usage error.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Parser, Subcommand};

use aegis_core::engine::{Engine, Match, Verdict, DEFAULT_HISTORY_CAP};
use aegis_core::engine::oracle::brute_force_matches;
use aegis_core::governance::{replay_events, Event, Governance};
use aegis_core::pattern::{
    builtin_patterns, parse_pattern_file, render_pattern,
    validate_pattern, NamedPattern, PatternId,
};
use aegis_core::scenario::{build_scenario, scenario_names};
use aegis_core::trace::{export_trace, ingest_trace, TransactionTrace};
use aegis_core::word::{keccak256, Address, Hash32};

/// Owner address used by the governance simulator's admin operations.
const GOV_OWNER: Address = Address([0xa0; 20]);

#[derive(Parser)]
#[command(name = "aegis", version, about = "Attack-pattern detection over EVM execution traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate pattern files; print canonical form and id
    Check {
        /// A .pattern file or a directory of them
        path: PathBuf,
    },
    /// Run the detection engine over a trace source
    #[command(group(ArgGroup::new("source").required(true).args(["trace", "scenario"])))]
    Analyze {
        /// Pattern source: "builtin", a directory, or "gov:<eventlog>"
        #[arg(long, default_value = "builtin")]
        patterns: String,
        /// Line-delimited trace file to analyze
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Built-in scenario to generate and analyze
        #[arg(long)]
        scenario: Option<String>,
        /// Cross-check the engine against the brute-force oracle
        #[arg(long)]
        oracle: bool,
        /// Write the analyzed traces in wire format
        #[arg(long)]
        export: Option<PathBuf>,
        /// Write a per-transaction persistent-taint summary
        #[arg(long)]
        dump_taint: Option<PathBuf>,
        /// Print per-transaction analysis latency (mean/median)
        #[arg(long)]
        timing: bool,
        /// Cap on retained completed-endpoint history
        #[arg(long, default_value_t = DEFAULT_HISTORY_CAP)]
        history_cap: usize,
        /// Write the verdict report here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List built-in scenarios or export one as a wire-format trace
    Scenario {
        /// Scenario name (see --list)
        name: Option<String>,
        /// Print the scenario registry
        #[arg(long)]
        list: bool,
        /// Write the trace here instead of stdout
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Execute a governance script; print the event log and final pattern set
    Gov {
        /// Script file, one operation per line
        script: PathBuf,
        /// Write the event log here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. `aegis scenario --list | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let verbose = std::env::var("AEGIS_LOG")
        .map(|v| v == "debug" || v == "trace")
        .unwrap_or(false);
    let result = match cli.command {
        Command::Check { path } => cmd_check(&path),
        Command::Analyze {
            patterns,
            trace,
            scenario,
            oracle,
            export,
            dump_taint,
            timing,
            history_cap,
            output,
        } => cmd_analyze(AnalyzeConfig {
            patterns,
            trace,
            scenario,
            oracle,
            export,
            dump_taint,
            timing,
            history_cap,
            output,
            verbose,
        }),
        Command::Scenario { name, list, export } => cmd_scenario(name, list, export),
        Command::Gov { script, out } => cmd_gov(&script, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn cmd_check(path: &Path) -> Result<ExitCode, String> {
    let files = pattern_files(path)?;
    let mut clean = true;
    for file in &files {
        let contents =
            fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
        match parse_pattern_file(&contents, stem) {
            Ok(p) => {
                let report = validate_pattern(&p.ast);
                if report.findings.is_empty() {
                    println!("{} {} {}", p.id, p.name, render_pattern(&p.ast));
                } else {
                    clean = false;
                    for f in &report.findings {
                        eprintln!(
                            "{}: relation {}: {}",
                            file.display(),
                            f.relation_index,
                            f.message
                        );
                    }
                }
            }
            Err(e) => {
                clean = false;
                eprintln!("{}: {e}", file.display());
            }
        }
    }
    Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn pattern_files(path: &Path) -> Result<Vec<PathBuf>, String> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| format!("{}: {e}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "pattern").unwrap_or(false))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(format!("{}: no .pattern files", path.display()));
        }
        Ok(files)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(format!("{}: not found", path.display()))
    }
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeConfig {
    patterns: String,
    trace: Option<PathBuf>,
    scenario: Option<String>,
    oracle: bool,
    export: Option<PathBuf>,
    dump_taint: Option<PathBuf>,
    timing: bool,
    history_cap: usize,
    output: Option<PathBuf>,
    verbose: bool,
}

fn cmd_analyze(cfg: AnalyzeConfig) -> Result<ExitCode, String> {
    let patterns = load_patterns(&cfg.patterns)?;
    if cfg.verbose {
        eprintln!("loaded {} patterns from {}", patterns.len(), cfg.patterns);
    }
    let traces: Vec<TransactionTrace> = if let Some(path) = &cfg.trace {
        let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ingest_trace(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        let name = cfg.scenario.as_deref().expect("clap enforces the source group");
        build_scenario(name)
            .ok_or_else(|| format!("unknown scenario '{name}' (try `aegis scenario --list`)"))?
            .traces
    };

    if let Some(path) = &cfg.export {
        fs::write(path, export_trace(&traces)).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let mut engine = Engine::new(patterns.clone(), cfg.history_cap);
    let mut report_lines = Vec::new();
    let mut latencies = Vec::new();
    let mut taint_dump = String::new();
    let mut any_revert = false;
    for trace in &traces {
        let start = Instant::now();
        let report = engine
            .process_transaction(trace)
            .map_err(|e| format!("tx {}: {e}", trace.tx.hash.to_hex()))?;
        latencies.push(start.elapsed());
        any_revert |= report.verdict == Verdict::Revert;
        report_lines.push(report_line(&trace.tx.hash, report.verdict, &report.matches));
        if cfg.dump_taint.is_some() {
            taint_dump.push_str(&format!("tx {}\n", trace.tx.hash.to_hex()));
            for (tag, account, slot, bytes) in engine.taint().storage_summary() {
                taint_dump.push_str(&format!(
                    "  tag pattern={} step={} src_seq={} -> storage {} slot {} ({bytes} bytes)\n",
                    tag.0, tag.1, tag.2,
                    account.to_hex(),
                    slot.to_hex(),
                ));
            }
        }
    }

    if let Some(path) = &cfg.dump_taint {
        fs::write(path, taint_dump).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    let report_text = report_lines.join("\n") + if report_lines.is_empty() { "" } else { "\n" };
    match &cfg.output {
        Some(path) => fs::write(path, &report_text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{report_text}"),
    }

    if cfg.timing && !latencies.is_empty() {
        let mut sorted = latencies.clone();
        sorted.sort();
        let mean = latencies.iter().sum::<std::time::Duration>() / latencies.len() as u32;
        let median = sorted[sorted.len() / 2];
        eprintln!(
            "analyzed {} transactions: mean {:.3} ms, median {:.3} ms",
            latencies.len(),
            mean.as_secs_f64() * 1e3,
            median.as_secs_f64() * 1e3,
        );
    }

    let mut mismatch = false;
    if cfg.oracle {
        let expected =
            brute_force_matches(&patterns, &traces).map_err(|e| format!("oracle: {e}"))?;
        let got: BTreeSet<Match> = engine.matches().iter().cloned().collect();
        if got != expected {
            mismatch = true;
            eprintln!(
                "oracle mismatch: engine found {} matches, oracle {}",
                got.len(),
                expected.len()
            );
        } else if cfg.verbose {
            eprintln!("oracle agreement on {} matches", got.len());
        }
    }

    Ok(if any_revert || mismatch { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn load_patterns(source: &str) -> Result<Vec<NamedPattern>, String> {
    if source == "builtin" {
        return Ok(builtin_patterns());
    }
    if let Some(log_path) = source.strip_prefix("gov:") {
        let contents = fs::read_to_string(log_path).map_err(|e| format!("{log_path}: {e}"))?;
        let mut events = Vec::new();
        for (i, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = serde_json::from_str(line)
                .map_err(|e| format!("{log_path}:{}: {e}", i + 1))?;
            events.push(event);
        }
        return replay_events(&events).map_err(|e| format!("{log_path}: {e}"));
    }
    let files = pattern_files(Path::new(source))?;
    let mut patterns = Vec::new();
    for file in &files {
        let contents =
            fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
        let p = parse_pattern_file(&contents, stem).map_err(|e| format!("{}: {e}", file.display()))?;
        let report = validate_pattern(&p.ast);
        if let Some(f) = report.findings.first() {
            return Err(format!("{}: relation {}: {}", file.display(), f.relation_index, f.message));
        }
        patterns.push(p);
    }
    Ok(patterns)
}

fn report_line(tx: &Hash32, verdict: Verdict, matches: &[Match]) -> String {
    let patterns: Vec<serde_json::Value> = matches
        .iter()
        .map(|m| {
            serde_json::json!({
                "id": m.pattern.to_string(),
                "endpoints": m.endpoints,
            })
        })
        .collect();
    serde_json::json!({
        "tx": tx.to_hex(),
        "action": match verdict {
            Verdict::Pass => "PASS",
            Verdict::Revert => "REVERT",
        },
        "patterns": patterns,
    })
    .to_string()
}

// ---------------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------------

fn cmd_scenario(
    name: Option<String>,
    list: bool,
    export: Option<PathBuf>,
) -> Result<ExitCode, String> {
    if list {
        for n in scenario_names() {
            let s = build_scenario(n).expect("registered scenario");
            println!("{n}: {}", s.description);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let name = name.ok_or("scenario name required (or --list)")?;
    let scenario =
        build_scenario(&name).ok_or_else(|| format!("unknown scenario '{name}'"))?;
    let wire = export_trace(&scenario.traces);
    match export {
        Some(path) => fs::write(&path, wire).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{wire}"),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// gov
// ---------------------------------------------------------------------------

fn cmd_gov(script: &Path, out: Option<PathBuf>) -> Result<ExitCode, String> {
    let contents =
        fs::read_to_string(script).map_err(|e| format!("{}: {e}", script.display()))?;
    let mut gov = Governance::new(GOV_OWNER, [], 10, 10, 100);
    for (i, raw) in contents.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Err(msg) = gov_op(&mut gov, line, script) {
            eprintln!("{}:{}: {msg}", script.display(), i + 1);
        }
    }

    let mut log = String::new();
    for event in gov.events() {
        log.push_str(&serde_json::to_string(event).expect("events serialize"));
        log.push('\n');
    }
    match out {
        Some(path) => fs::write(&path, &log).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{log}"),
    }
    for p in gov.active_patterns() {
        println!("active {} {}", p.id, p.name);
    }
    Ok(ExitCode::SUCCESS)
}

/// Executes one script line. Operations:
/// `set-voters <voter>...`, `set-windows <commit> <reveal>`, `set-deposit <n>`,
/// `propose-add <voter> <file>`, `propose-remove <voter> <id>`,
/// `commit <voter> <voteID> <hash>`, `reveal <voter> <voteID> <yes|no> <nonce>`,
/// `advance <n>`. Voters are hex addresses or bare names (hashed to one).
fn gov_op(gov: &mut Governance, line: &str, script: &Path) -> Result<(), String> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let err = |e: &dyn std::fmt::Display| e.to_string();
    match parts.as_slice() {
        ["set-voters", names @ ..] => {
            let voters: Vec<Address> = names.iter().map(|n| parse_actor(n)).collect::<Result<_, _>>()?;
            gov.set_voters(GOV_OWNER, voters).map_err(|e| err(&e))
        }
        ["set-windows", c, r] => {
            let c = c.parse::<u64>().map_err(|e| err(&e))?;
            let r = r.parse::<u64>().map_err(|e| err(&e))?;
            gov.set_windows(GOV_OWNER, c, r).map_err(|e| err(&e))
        }
        ["set-deposit", n] => {
            let n = n.parse::<u64>().map_err(|e| err(&e))?;
            gov.set_deposit(GOV_OWNER, n).map_err(|e| err(&e))
        }
        ["propose-add", voter, file] => {
            let voter = parse_actor(voter)?;
            let rel = script.parent().unwrap_or(Path::new(".")).join(file);
            let path = if rel.exists() { rel } else { PathBuf::from(file) };
            let contents =
                fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("pattern");
            let p = parse_pattern_file(&contents, stem).map_err(|e| err(&e))?;
            let deposit = gov.deposit();
            let id = gov.propose_add(voter, &p.name, &p.text, deposit).map_err(|e| err(&e))?;
            eprintln!("proposed {id}");
            Ok(())
        }
        ["propose-remove", voter, id] => {
            let voter = parse_actor(voter)?;
            let id = parse_vote_id(id)?;
            let deposit = gov.deposit();
            gov.propose_remove(voter, id, deposit).map_err(|e| err(&e))?;
            Ok(())
        }
        ["commit", voter, id, hash] => {
            let voter = parse_actor(voter)?;
            let id = parse_vote_id(id)?;
            let hash = Hash32::from_hex(hash).map_err(|e| err(&e))?;
            let deposit = gov.proposal(id).map(|p| p.deposit).unwrap_or_else(|| gov.deposit());
            gov.commit(voter, id, hash, deposit).map_err(|e| err(&e))
        }
        ["reveal", voter, id, vote, nonce] => {
            let voter = parse_actor(voter)?;
            let id = parse_vote_id(id)?;
            let vote = match *vote {
                "yes" => true,
                "no" => false,
                other => return Err(format!("expected yes/no, got '{other}'")),
            };
            let nonce = Hash32::from_hex(nonce).map_err(|e| err(&e))?;
            gov.reveal(voter, id, vote, &nonce.0).map(|_| ()).map_err(|e| err(&e))
        }
        ["advance", n] => {
            let n = n.parse::<u64>().map_err(|e| err(&e))?;
            gov.advance_blocks(n);
            Ok(())
        }
        [op, ..] => Err(format!("unknown operation '{op}'")),
        [] => Ok(()),
    }
}

/// Script actor: a 20-byte hex address, or a bare name deterministically
/// hashed into one.
fn parse_actor(s: &str) -> Result<Address, String> {
    if s.starts_with("0x") {
        return Address::from_hex(s).map_err(|e| e.to_string());
    }
    let h = keccak256(s.as_bytes());
    let mut a = [0u8; 20];
    a.copy_from_slice(&h.0[12..]);
    Ok(Address(a))
}

fn parse_vote_id(s: &str) -> Result<PatternId, String> {
    Hash32::from_hex(s).map(PatternId).map_err(|e| e.to_string())
}
