//! Acceptance suite: every exit criterion as one test, each printing a
//! single pass line (visible with `--nocapture`, and always on failure).
//!
//!   cargo test -p regraft --test acceptance -- --nocapture

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use regraft::analysis;
use regraft::corpus;
use regraft::harness::{self, CoverageMap, FuzzConfig, Target};
use regraft::hlm;
use regraft::image::load_firmware_from_bytes;
use regraft::rewriter::{self, PlanOptions};
use regraft::runtime::{
    exception_entry, exception_return, CpuState, Executor, Flags, Mode, RunConfig, RunStatus,
    TraceEvent, TraceMode, EXC_RETURN_HANDLER, EXC_RETURN_THREAD_MAIN, EXC_RETURN_THREAD_PROCESS,
};
use regraft::thumb2::{self, DecodeOutcome, ItState};

fn pass(n: u32, what: &str) {
    println!("ACCEPTANCE {n:02}: PASS - {what}");
}

fn builtin_target(prog: &corpus::CorpusProgram, coverage: bool) -> Target {
    let image = prog.image();
    let manifest = hlm::builtin_manifest();
    let (timage, _, _) =
        rewriter::transplant(&image, Some(&manifest), PlanOptions { coverage }).unwrap();
    Target {
        timage: Arc::new(timage),
        registry: Arc::new(hlm::builtin_registry()),
        manifest,
    }
}

#[test]
fn criterion_01_codec_totality_and_roundtrip() {
    let start = Instant::now();
    let mut decoded16 = 0u64;
    for raw in 0..=0xFFFFu16 {
        if thumb2::is_wide_prefix(raw) {
            continue;
        }
        match thumb2::decode(&raw.to_le_bytes(), 0x0800_0000) {
            DecodeOutcome::Decoded(i) => {
                decoded16 += 1;
                let bytes = thumb2::encode(&i.kind)
                    .unwrap_or_else(|e| panic!("{raw:#06x}: decode/encode disagree: {e}"));
                assert_eq!(bytes, raw.to_le_bytes(), "{raw:#06x} round trip");
            }
            DecodeOutcome::Undefined => {}
            DecodeOutcome::Unsupported(_) => {
                panic!("{raw:#06x}: the full 16-bit space must decode or be undefined")
            }
        }
    }
    // 1e6 seeded 32-bit samples.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut decoded32 = 0u64;
    for _ in 0..1_000_000u32 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let v = state as u32;
        let hw1 = (v >> 16) as u16;
        let outcome = if thumb2::is_wide_prefix(hw1) {
            thumb2::decode_at(hw1, Some(v as u16), 0x0800_0000)
        } else {
            thumb2::decode_at(hw1, None, 0x0800_0000)
        };
        if let DecodeOutcome::Decoded(i) = outcome {
            decoded32 += 1;
            let bytes = thumb2::encode(&i.kind)
                .unwrap_or_else(|e| panic!("{v:#010x}: decode/encode disagree: {e}"));
            let got = if bytes.len() == 2 {
                u16::from_le_bytes([bytes[0], bytes[1]]) as u32
            } else {
                ((u16::from_le_bytes([bytes[0], bytes[1]]) as u32) << 16)
                    | u16::from_le_bytes([bytes[2], bytes[3]]) as u32
            };
            let want = if i.width == 2 { hw1 as u32 } else { v };
            assert_eq!(got, want, "{v:#010x} round trip");
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed < Duration::from_secs(30),
        "codec pass took {elapsed:?}"
    );
    pass(
        1,
        &format!(
            "decode total over 65,536 + 1e6 encodings; {decoded16} + {decoded32} round-tripped in {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_02_sweep_counts_and_taxonomy() {
    let report = analysis::sweep_classify(1_065_536, 0x5eed).unwrap();
    assert_eq!(report.half.special_mnemonics.get("svc"), Some(&256));
    assert_eq!(report.half.special_mnemonics.get("bkpt"), Some(&256));
    for cat in ["software_interrupt", "cpu_state_change", "coprocessor_io"] {
        let n = report.half.categories.get(cat).copied().unwrap_or(0)
            + report.wide.categories.get(cat).copied().unwrap_or(0);
        assert!(n > 0, "no rule classified for {cat}");
    }
    pass(
        2,
        "16-bit sweep: exactly 256 svc + 256 bkpt; all taxonomy categories ruled",
    );
}

#[test]
fn criterion_03_differential_semantics() {
    let budget = 300_000u64;
    for prog in corpus::differential_set() {
        let started = Instant::now();
        let image = prog.image();

        // Coverage off: identical registers, flags, mode and RAM.
        let (timage, _, _) =
            rewriter::transplant(&image, None, PlanOptions { coverage: false }).unwrap();
        let mut orig = Executor::new_original(&image).unwrap();
        let o = orig.run(Vec::new(), &RunConfig { budget, ..RunConfig::default() });
        let mut trans = Executor::new_transplanted(&timage, None, None);
        let t = trans.run(Vec::new(), &RunConfig { budget, ..RunConfig::default() });
        assert!(
            !matches!(o.status, RunStatus::Crashed { .. }),
            "{}: original crashed: {:?}",
            prog.name,
            o.status
        );
        assert_eq!(o.final_state.r, t.final_state.r, "{} registers (cov off)", prog.name);
        assert_eq!(o.final_state.flags, t.final_state.flags, "{}", prog.name);
        assert_eq!(o.final_state.mode, t.final_state.mode, "{}", prog.name);
        assert_eq!(
            o.final_state.control_spsel, t.final_state.control_spsel,
            "{}",
            prog.name
        );
        assert_eq!(
            (o.final_state.sp_main, o.final_state.sp_process),
            (t.final_state.sp_main, t.final_state.sp_process),
            "{} banks",
            prog.name
        );
        assert_eq!(orig.mem.ram_dump(), trans.mem.ram_dump(), "{} RAM (cov off)", prog.name);

        // Coverage on: identical modulo vendor region and instruction count.
        let (timage_cov, _, _) =
            rewriter::transplant(&image, None, PlanOptions { coverage: true }).unwrap();
        let mut trans_cov = Executor::new_transplanted(&timage_cov, None, None);
        let tc = trans_cov.run(Vec::new(), &RunConfig { budget, ..RunConfig::default() });
        assert_eq!(o.final_state.r, tc.final_state.r, "{} registers (cov on)", prog.name);
        assert_eq!(o.final_state.flags, tc.final_state.flags, "{}", prog.name);
        assert_eq!(orig.mem.ram_dump(), trans_cov.mem.ram_dump(), "{} RAM (cov on)", prog.name);

        let elapsed = started.elapsed();
        assert!(
            elapsed < Duration::from_secs(5),
            "{}: differential took {elapsed:?}",
            prog.name
        );
    }
    pass(
        3,
        "original vs transplanted identical on all 5 corpus programs (cov off exact, cov on modulo vendor/count)",
    );
}

#[test]
fn criterion_04_exception_round_trip() {
    let prog = corpus::arith_loops();
    let image = prog.image();
    let mut magics_seen = BTreeSet::new();
    let mut state = 0xABCD_EF01_2345_6789u64;
    let mut rnd = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for i in 0..1000 {
        let mut ex = Executor::new_original(&image).unwrap();
        let mut cpu = CpuState::reset(image.initial_sp, image.entry_point);
        for r in 0..13 {
            cpu.r[r] = rnd() as u32;
        }
        cpu.r[14] = (rnd() as u32) | 1;
        cpu.flags = Flags {
            n: rnd() & 1 == 1,
            z: rnd() & 1 == 1,
            c: rnd() & 1 == 1,
            v: rnd() & 1 == 1,
        };
        cpu.primask = rnd() & 1 == 1;
        // Word-aligned stacks inside RAM, far enough from the edges.
        let sp_main = corpus::SRAM_BASE + 0x1000 + ((rnd() as u32) % 0x800 & !7);
        let sp_process = corpus::SRAM_BASE + 0x2000 + ((rnd() as u32) % 0x800 & !7);
        cpu.sp_main = sp_main;
        cpu.sp_process = sp_process;
        match i % 3 {
            0 => {
                cpu.mode = Mode::Thread;
                cpu.control_spsel = false;
                cpu.current_exc = 0;
            }
            1 => {
                cpu.mode = Mode::Thread;
                cpu.control_spsel = true;
                cpu.current_exc = 0;
            }
            _ => {
                cpu.mode = Mode::Handler;
                cpu.control_spsel = rnd() & 1 == 1;
                cpu.current_exc = 11;
            }
        }
        if rnd() & 3 == 0 {
            cpu.it_state = ItState::start(0, 0b1000); // open IT block
        }
        // Normalize the r13 mirror to the active bank.
        cpu.set_spsel(cpu.control_spsel);
        let before = cpu;

        ex.cpu = cpu;
        exception_entry(
            &mut ex.cpu,
            &mut ex.mem,
            15,
            image.entry_point | 1,
            0x0800_1234,
        )
        .unwrap();
        let magic = ex.cpu.r[14];
        magics_seen.insert(magic);
        let expected_magic = match (before.mode, before.control_spsel) {
            (Mode::Handler, _) => EXC_RETURN_HANDLER,
            (Mode::Thread, false) => EXC_RETURN_THREAD_MAIN,
            (Mode::Thread, true) => EXC_RETURN_THREAD_PROCESS,
        };
        assert_eq!(magic, expected_magic, "case {i}");
        exception_return(&mut ex.cpu, &mut ex.mem, magic).unwrap();

        let mut after = ex.cpu;
        after.r[15] = before.r[15]; // resumption address is the only delta
        assert_eq!(after, before, "case {i}: state not restored exactly");
    }
    assert_eq!(
        magics_seen,
        BTreeSet::from([
            EXC_RETURN_HANDLER,
            EXC_RETURN_THREAD_MAIN,
            EXC_RETURN_THREAD_PROCESS
        ]),
        "all three magic values must be exercised"
    );
    pass(
        4,
        "1,000 randomized states survive entry->return exactly; magics F1/F9/FD all exercised",
    );
}

#[test]
fn criterion_05_rtos_pendsv_mechanics() {
    let prog = corpus::pendsv_twotask();
    let image = prog.image();
    let (timage, _, _) =
        rewriter::transplant(&image, None, PlanOptions { coverage: true }).unwrap();
    let mut ex = Executor::new_transplanted(&timage, None, None);
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 100_000,
            trace: TraceMode::Blocks,
            ..RunConfig::default()
        },
    );
    assert_eq!(outcome.status, RunStatus::Completed);
    assert_eq!(ex.mem.read(corpus::SRAM_BASE, 4).unwrap(), 3);
    assert_eq!(ex.mem.read(corpus::SRAM_BASE + 4, 4).unwrap(), 3);

    // The block trace alternates between the two task bodies.
    let t0 = image.symbol_named("task0").unwrap();
    let t1 = image.symbol_named("task1").unwrap();
    let tag = |addr: u32| -> Option<u8> {
        let a = addr & !1;
        if a >= t0.address & !1 && a < (t0.address & !1) + t0.size {
            Some(0)
        } else if a >= t1.address & !1 && a < (t1.address & !1) + t1.size {
            Some(1)
        } else {
            None
        }
    };
    let mut task_seq = Vec::new();
    for ev in &outcome.trace {
        if let TraceEvent::Block(a) = ev {
            if let Some(t) = tag(*a) {
                if task_seq.last() != Some(&t) {
                    task_seq.push(t);
                }
            }
        }
    }
    let switches = task_seq.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(
        switches >= 4,
        "expected alternating task blocks, saw {task_seq:?}"
    );
    assert!(task_seq.contains(&0) && task_seq.contains(&1));
    pass(
        5,
        &format!("two-task PendSV switching interleaves task bodies ({switches} switches, counters 3/3)"),
    );
}

#[test]
fn criterion_06_fast_forward() {
    let prog = corpus::empty_idle();
    let image = prog.image();
    let (timage, _, _) =
        rewriter::transplant(&image, None, PlanOptions { coverage: true }).unwrap();
    let mut ex = Executor::new_transplanted(&timage, None, None);
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 20_000_000,
            ..RunConfig::default()
        },
    );
    assert_eq!(outcome.status, RunStatus::Completed, "{outcome:?}");
    assert_eq!(ex.mem.read(corpus::SRAM_BASE, 4).unwrap(), 1000);
    // Virtual time honors the firmware's perception (1000 * 10,000).
    assert!(
        outcome.instr_count >= 10_000_000,
        "virtual clock did not advance: {}",
        outcome.instr_count
    );
    // Interpreter work is proportional to ISR length, not the interval.
    let limit = 50 * 1000 + 10_000;
    assert!(
        outcome.interpreted < limit,
        "interpreted {} steps, limit {limit}",
        outcome.interpreted
    );
    pass(
        6,
        &format!(
            "1,000 interrupts via fast-forward: {} interpreted steps (< {limit}), virtual clock {}",
            outcome.interpreted, outcome.instr_count
        ),
    );
}

#[test]
fn criterion_07_coverage_lower_bound_and_skip_rate() {
    let mut total_blocks = 0usize;
    let mut total_uninstrumentable = 0usize;
    for prog in corpus::all() {
        let image = prog.image();
        let manifest = hlm::builtin_manifest();
        let (timage, report, _) =
            rewriter::transplant(&image, Some(&manifest), PlanOptions { coverage: true })
                .unwrap();
        total_blocks += report.block_count;
        total_uninstrumentable += report.block_count - report.instrumentable_count;

        let registry = Arc::new(hlm::builtin_registry());
        let mut ex =
            Executor::new_transplanted(&timage, Some(registry), Some(&manifest));
        let outcome = ex.run(
            b"salt".to_vec(),
            &RunConfig {
                budget: 100_000,
                trace: TraceMode::Instrs,
                ..RunConfig::default()
            },
        );
        let cov = CoverageMap::from_outcome(&outcome);
        let covered = cov.covered_blocks(&timage);
        let executed: BTreeSet<u32> = outcome
            .trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Instr(pc) => Some(*pc),
                _ => None,
            })
            .collect();
        for b in &covered {
            assert!(
                executed.contains(b),
                "{}: bitmap claims {b:#010x} but it never executed",
                prog.name
            );
        }
    }
    let skip = total_uninstrumentable as f64 / total_blocks as f64;
    pass(
        7,
        &format!(
            "bitmap-covered subset of traced blocks on all programs; corpus skip rate {:.1}% ({total_uninstrumentable}/{total_blocks}, report-only)",
            skip * 100.0
        ),
    );
}

#[test]
fn criterion_08_fuzzing_smoke() {
    let target = builtin_target(&corpus::uart_guard(), true);
    let snapshot = harness::snapshot_at_entry(&target, 1_000_000).unwrap();
    let started = Instant::now();
    let mut keys = Vec::new();
    for round in 0..3 {
        let report = harness::fuzz(
            &target,
            &snapshot,
            &FuzzConfig {
                seeds: vec![b"foo".to_vec()],
                exec_budget: 1_000_000,
                wall_budget: Duration::from_secs(300),
                instr_budget: 200_000,
                rng_seed: 0x5eed,
                ..FuzzConfig::default()
            },
        )
        .unwrap();
        assert!(
            report.crash_groups >= 1,
            "round {round}: no crash within {} execs",
            report.execs
        );
        assert!(report.execs <= 1_000_000);
        keys.push(report.crashes[0].dedup_key.clone());
    }
    assert!(
        keys.windows(2).all(|w| w[0] == w[1]),
        "dedup keys unstable: {keys:?}"
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(300),
        "3 campaigns took {elapsed:?}"
    );
    pass(
        8,
        &format!(
            "guard crash found from seed \"foo\" in 3/3 campaigns within budget ({elapsed:.1?} total); dedup key stable: {}",
            keys[0]
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    for prog in corpus::all() {
        let target = builtin_target(&prog, true);
        let run = || {
            let mut ex = target.executor();
            ex.run(
                b"fooo".to_vec(),
                &RunConfig {
                    budget: 150_000,
                    ..RunConfig::default()
                },
            )
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.canonical_bytes(),
            b.canonical_bytes(),
            "{}: outcome serialization diverged",
            prog.name
        );
        assert_eq!(a.coverage, b.coverage, "{}: coverage maps diverged", prog.name);
    }
    pass(9, "byte-identical outcome serialization (incl. coverage maps) across the whole corpus");
}

#[test]
fn criterion_10_interrupt_gating() {
    let target = builtin_target(&corpus::irq_gate(), true);
    let mut ex = target.executor();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 200_000,
            ..RunConfig::default()
        },
    );
    assert_eq!(
        outcome.status,
        RunStatus::Completed,
        "gated run must stay clean: {outcome:?}"
    );
    assert_eq!(ex.mem.read(corpus::SRAM_BASE + 0x404, 4).unwrap(), 2);

    // Negative control: force the exception configured from the start and
    // the same firmware crashes on the uninitialized pointer.
    let mut ex = target.executor();
    ex.pending.configure(16);
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 200_000,
            ..RunConfig::default()
        },
    );
    assert!(
        matches!(outcome.status, RunStatus::Crashed { .. }),
        "ungated delivery should crash, got {:?}",
        outcome.status
    );
    pass(
        10,
        "interrupt held until its configuring HAL call; forced early delivery reproduces the crash",
    );
}
