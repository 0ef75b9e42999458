//! Command-line front end: analyze, disasm, sweep, transplant, run, fuzz,
//! triage, plus corpus emission for the shipped synthetic programs.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use regraft::analysis;
use regraft::corpus;
use regraft::harness::{self, FuzzConfig, Target};
use regraft::hlm;
use regraft::image;
use regraft::rewriter::{self, PlanOptions};
use regraft::runtime::{RunConfig, TraceEvent, TraceMode};
use regraft::thumb2;

const EX_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "regraft",
    version,
    about = "Transplant Cortex-M firmware into fuzzing-enhanced images and run them in a reference interpreter"
)]
struct Cli {
    /// Seed behind every randomized operation (sweep sampling, mutation).
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct FwArgs {
    /// Raw firmware binary (a `<fw>.sym` sidecar is picked up when present).
    #[arg(long)]
    fw: PathBuf,
    /// Memory map config (JSON).
    #[arg(long)]
    map: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Disassemble from an address, one instruction per line.
    Disasm {
        #[command(flatten)]
        fw: FwArgs,
        /// Start address (defaults to the entry point).
        #[arg(long)]
        start: Option<String>,
        /// Number of instructions to print.
        #[arg(long, default_value_t = 64)]
        count: usize,
    },
    /// Recover blocks, classify special sites, match HAL handlers.
    Analyze {
        #[command(flatten)]
        fw: FwArgs,
        /// Handler manifest path, or "builtin".
        #[arg(long)]
        handlers: Option<String>,
        /// Emit the machine-readable report.
        #[arg(long)]
        json: bool,
    },
    /// Forcefully disassemble the 16-bit space plus sampled 32-bit values.
    Sweep {
        /// Total decode budget (>= 65,536).
        #[arg(long, default_value_t = 1_065_536)]
        budget: u64,
        #[arg(long)]
        json: bool,
    },
    /// Rewrite a firmware image into its fuzzing-enhanced form.
    Transplant {
        #[command(flatten)]
        fw: FwArgs,
        /// Handler manifest path, or "builtin".
        #[arg(long)]
        handlers: Option<String>,
        /// Coverage trampolines on or off.
        #[arg(long, default_value = "on")]
        coverage: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Execute a transplanted image.
    Run {
        /// Transplant output directory.
        #[arg(long)]
        image: PathBuf,
        /// Input bytes fed to input-consuming handlers.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Instruction budget.
        #[arg(long, default_value_t = 5_000_000)]
        budget: u64,
        #[arg(long, default_value = "none")]
        trace: String,
        /// Handler manifest path, or "builtin".
        #[arg(long)]
        handlers: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Coverage-guided fuzzing campaign.
    Fuzz {
        #[arg(long)]
        image: PathBuf,
        /// Directory of seed inputs (defaults to the literal seed "foo").
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Execution budget.
        #[arg(long, default_value_t = 1_000_000)]
        execs: u64,
        /// Wall-clock limit in seconds.
        #[arg(long, default_value_t = 300)]
        time_limit: u64,
        /// Campaign output directory.
        #[arg(long)]
        out: PathBuf,
        /// Keep fuzzing after the first crash.
        #[arg(long)]
        keep_going: bool,
        #[arg(long)]
        handlers: Option<String>,
    },
    /// Replay a crashing input and print the triage report.
    Triage {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5_000_000)]
        budget: u64,
        #[arg(long)]
        handlers: Option<String>,
    },
    /// Emit the shipped synthetic corpus programs.
    Corpus {
        /// Program name (all when omitted).
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "corpus_out")]
        out: PathBuf,
        /// List available programs.
        #[arg(long)]
        list: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap reports --help/--version through the error path too.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(EX_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_manifest(
    spec: &Option<String>,
) -> Result<hlm::HandlerManifest, Box<dyn std::error::Error>> {
    match spec.as_deref() {
        None | Some("builtin") => Ok(hlm::builtin_manifest()),
        Some(path) => Ok(hlm::HandlerManifest::from_json(&std::fs::read_to_string(
            path,
        )?)?),
    }
}

fn load_target(
    image_dir: &PathBuf,
    handlers: &Option<String>,
) -> Result<Target, Box<dyn std::error::Error>> {
    let timage = rewriter::deserialize(image_dir)?;
    let manifest = load_manifest(handlers)?;
    Ok(Target {
        timage: Arc::new(timage),
        registry: Arc::new(hlm::builtin_registry()),
        manifest,
    })
}

fn dispatch(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Disasm { fw, start, count } => {
            let img = image::load_firmware(&fw.fw, &fw.map)?;
            let mut addr = match start {
                Some(s) => image::parse_hex_u32(&s)?,
                None => img.entry_point,
            } & !1;
            for _ in 0..count {
                let Ok(hw1) = img.read(addr, 2) else { break };
                let outcome = if thumb2::is_wide_prefix(hw1 as u16) {
                    let hw2 = img.read(addr + 2, 2).unwrap_or(0);
                    thumb2::decode_at(hw1 as u16, Some(hw2 as u16), addr)
                } else {
                    thumb2::decode_at(hw1 as u16, None, addr)
                };
                match outcome {
                    thumb2::DecodeOutcome::Decoded(i) => {
                        let raw = if i.width == 2 {
                            format!("{:04x}    ", i.raw)
                        } else {
                            format!("{:08x}", i.raw)
                        };
                        println!("{addr:08x}: {raw}  {i}");
                        addr += i.width as u32;
                    }
                    thumb2::DecodeOutcome::Undefined => {
                        println!("{addr:08x}: {hw1:04x}      <undefined>");
                        addr += 2;
                    }
                    thumb2::DecodeOutcome::Unsupported(raw) => {
                        println!("{addr:08x}: {raw:08x}  <unsupported>");
                        addr += if raw > 0xFFFF { 4 } else { 2 };
                    }
                }
            }
            Ok(0)
        }
        Cmd::Analyze { fw, handlers, json } => {
            let img = image::load_firmware(&fw.fw, &fw.map)?;
            let manifest = match handlers {
                Some(_) => Some(load_manifest(&handlers)?),
                None => None,
            };
            let report = analysis::analyze(&img, manifest.as_ref());
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&versioned(serde_json::to_value(&report)?))?
                );
            } else {
                println!(
                    "blocks: {} ({} instrumentable, skip rate {:.1}%)",
                    report.block_count,
                    report.instrumentable_count,
                    report.skip_rate * 100.0
                );
                println!("decode barriers: {}", report.barriers.len());
                println!("special sites:");
                let mut by_cat = std::collections::BTreeMap::new();
                for s in &report.sites {
                    *by_cat.entry(s.category.name()).or_insert(0u32) += 1;
                }
                for (cat, n) in by_cat {
                    println!("  {cat}: {n}");
                }
                println!(
                    "hal: {} matched, {} ambiguous, {} unresolved",
                    report.hal.matches.len(),
                    report.hal.ambiguous.len(),
                    report.hal.unresolved.len()
                );
                for m in &report.hal.matches {
                    println!("  {:#010x} {} -> {}", m.address, m.symbol, m.handler_id);
                }
            }
            Ok(0)
        }
        Cmd::Sweep { budget, json } => {
            let report = analysis::sweep_classify(budget, cli.seed)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&versioned(serde_json::to_value(&report)?))?
                );
            } else {
                println!(
                    "16-bit space: {} decoded, {} undefined (of {})",
                    report.half.decoded, report.half.undefined, report.half.total
                );
                for (m, n) in &report.half.special_mnemonics {
                    println!("  {m}: {n}");
                }
                println!(
                    "32-bit sample: {} decoded, {} undefined, {} unsupported (of {})",
                    report.wide.decoded,
                    report.wide.undefined,
                    report.wide.unsupported,
                    report.wide.total
                );
                for (c, n) in &report.wide.categories {
                    println!("  {c}: {n}");
                }
            }
            Ok(0)
        }
        Cmd::Transplant {
            fw,
            handlers,
            coverage,
            out,
            json,
        } => {
            let img = image::load_firmware(&fw.fw, &fw.map)?;
            let manifest = load_manifest(&handlers)?;
            let coverage = match coverage.as_str() {
                "on" => true,
                "off" => false,
                other => return Err(format!("--coverage must be on|off, got `{other}`").into()),
            };
            let (timage, report, plan) =
                rewriter::transplant(&img, Some(&manifest), PlanOptions { coverage })?;
            rewriter::serialize(&timage, &out)?;
            if json {
                let summary = serde_json::json!({
                    "out": out,
                    "patches": plan.patches.len(),
                    "dropped": plan.dropped.len(),
                    "trap_entries": plan.trap_table.entries.len(),
                    "trampolines": plan.trampolines.len(),
                    "hal_redirects": plan.hal_redirects.len(),
                    "blocks": report.block_count,
                    "skip_rate": report.skip_rate,
                });
                println!("{}", serde_json::to_string_pretty(&versioned(summary))?);
            } else {
                println!(
                    "transplanted -> {} ({} patches, {} traps, {} trampolines, {} hal redirects, skip rate {:.1}%)",
                    out.display(),
                    plan.patches.len(),
                    plan.trap_table.entries.len(),
                    plan.trampolines.len(),
                    plan.hal_redirects.len(),
                    report.skip_rate * 100.0
                );
            }
            Ok(0)
        }
        Cmd::Run {
            image: image_dir,
            input,
            budget,
            trace,
            handlers,
            json,
        } => {
            let target = load_target(&image_dir, &handlers)?;
            let input_bytes = match input {
                Some(p) => std::fs::read(p)?,
                None => Vec::new(),
            };
            let trace_mode: TraceMode = trace.parse()?;
            let mut ex = target.executor();
            let outcome = ex.run(
                input_bytes,
                &RunConfig {
                    budget,
                    trace: trace_mode,
                    stop_at_input_read: false,
                },
            );
            for ev in &outcome.trace {
                match ev {
                    TraceEvent::Block(a) => println!("block {a:#010x}"),
                    TraceEvent::Exception(n) => println!("exception {n}"),
                    TraceEvent::Instr(a) => println!("instr {a:#010x}"),
                }
            }
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&versioned(serde_json::to_value(&outcome)?))?
                );
            } else {
                println!(
                    "status: {:?} after {} instructions ({} interpreted)",
                    outcome.status, outcome.instr_count, outcome.interpreted
                );
                if !outcome.uart_out.is_empty() {
                    println!("uart out: {}", String::from_utf8_lossy(&outcome.uart_out));
                }
            }
            Ok(outcome.status.exit_code() as u8)
        }
        Cmd::Fuzz {
            image: image_dir,
            seeds,
            workers,
            execs,
            time_limit,
            out,
            keep_going,
            handlers,
        } => {
            let target = load_target(&image_dir, &handlers)?;
            let mut seed_inputs = Vec::new();
            if let Some(dir) = seeds {
                let mut entries: Vec<_> = std::fs::read_dir(&dir)?
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| p.is_file())
                    .collect();
                entries.sort();
                for p in entries {
                    seed_inputs.push(std::fs::read(p)?);
                }
            }
            if seed_inputs.is_empty() {
                seed_inputs.push(b"foo".to_vec());
            }
            let snapshot = harness::snapshot_at_entry(&target, 5_000_000)?;
            let report = harness::fuzz(
                &target,
                &snapshot,
                &FuzzConfig {
                    seeds: seed_inputs,
                    wall_budget: Duration::from_secs(time_limit),
                    exec_budget: execs,
                    workers,
                    rng_seed: cli.seed,
                    stop_on_crash: !keep_going,
                    out_dir: Some(out.clone()),
                    ..FuzzConfig::default()
                },
            )?;
            println!(
                "{} execs in {:.1}s ({:.0}/s), corpus {}, {} crash group(s), {} covered blocks",
                report.execs,
                report.elapsed_secs,
                report.execs_per_sec,
                report.corpus_len,
                report.crash_groups,
                report.covered_blocks_final
            );
            for c in &report.crashes {
                println!(
                    "crash {} at pc {:#010x} (exec {})",
                    c.dedup_key, c.pc, c.found_at_exec
                );
            }
            println!("campaign artifacts in {}", out.display());
            Ok(if report.crash_groups > 0 { 2 } else { 0 })
        }
        Cmd::Triage {
            image: image_dir,
            input,
            budget,
            handlers,
        } => {
            let target = load_target(&image_dir, &handlers)?;
            let snapshot = harness::snapshot_at_entry(&target, budget)?;
            let bytes = std::fs::read(&input)?;
            let report = harness::triage(&target, &snapshot, &bytes, budget)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(2)
        }
        Cmd::Corpus { name, out, list } => {
            if list {
                for p in corpus::all() {
                    println!("{}: {}", p.name, p.description);
                }
                return Ok(0);
            }
            let programs = match name {
                Some(n) => {
                    vec![corpus::by_name(&n)
                        .ok_or_else(|| format!("unknown corpus program `{n}`"))?]
                }
                None => corpus::all(),
            };
            for p in &programs {
                p.write_to(&out)?;
                println!("wrote {}/{}.bin (+ .sym, .map.json)", out.display(), p.name);
            }
            Ok(0)
        }
    }
}

/// Wrap machine-readable output with a format version.
fn versioned(value: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "format_version": rewriter::METADATA_VERSION,
        "report": value,
    })
}
