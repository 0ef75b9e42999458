use std::sync::Arc;

use super::*;
use crate::corpus;
use crate::hlm;
use crate::rewriter::{self, PlanOptions};

fn run_original(prog: &corpus::CorpusProgram, budget: u64) -> (ExecutionOutcome, Executor) {
    let image = prog.image();
    let mut ex = Executor::new_original(&image).unwrap();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget,
            ..RunConfig::default()
        },
    );
    (outcome, ex)
}

fn ram_word(ex: &Executor, addr: u32) -> u32 {
    ex.mem.read(addr, 4).unwrap()
}

#[test]
fn arithmetic_and_flags() {
    // movs r0,#5 ; adds r0,#3 -> r0 == 8, Z clear.
    let mut a = corpus::Asm::new(corpus::FLASH_BASE);
    a.word(corpus::INITIAL_SP);
    a.vector_word("reset");
    for _ in 2..48 {
        a.word(0);
    }
    a.label("reset");
    a.movs(0, 5);
    a.adds_imm(0, 3);
    a.label("spin");
    a.nop();
    a.b("spin");
    let blob = a.finish().0;
    let image =
        crate::image::load_firmware_from_bytes(blob, corpus::corpus_map(), vec![]).unwrap();
    let mut ex = Executor::new_original(&image).unwrap();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 100,
            ..RunConfig::default()
        },
    );
    assert_eq!(outcome.status, RunStatus::Timeout);
    assert_eq!(outcome.final_state.r[0], 8);
    assert!(!outcome.final_state.flags.z);
}

#[test]
fn load_from_unmapped_address_crashes() {
    let mut a = corpus::Asm::new(corpus::FLASH_BASE);
    a.word(corpus::INITIAL_SP);
    a.vector_word("reset");
    for _ in 2..48 {
        a.word(0);
    }
    a.label("reset");
    a.ldr_const(1, 0x6000_0000);
    a.ldr_imm(0, 1, 0);
    a.b_self();
    let blob = a.finish().0;
    let image =
        crate::image::load_firmware_from_bytes(blob, corpus::corpus_map(), vec![]).unwrap();
    let mut ex = Executor::new_original(&image).unwrap();
    let outcome = ex.run(Vec::new(), &RunConfig::default());
    match outcome.status {
        RunStatus::Crashed {
            crash: CrashKind::MemFault { addr, .. },
            ..
        } => assert_eq!(addr, 0x6000_0000),
        other => panic!("expected fault, got {other:?}"),
    }
}

#[test]
fn arith_loops_end_state() {
    let prog = corpus::arith_loops();
    let (outcome, ex) = run_original(&prog, 2000);
    assert_eq!(outcome.status, RunStatus::Timeout); // parked in b .
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 190); // sum 1..=19
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 4), 190 << 3);
    assert_eq!(ex.mem.read(corpus::SRAM_BASE + 8, 1).unwrap(), 95);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 12), 2); // carry was set
}

#[test]
fn call_heavy_end_state() {
    let prog = corpus::call_heavy();
    let (outcome, ex) = run_original(&prog, 2000);
    assert_eq!(outcome.status, RunStatus::Timeout);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 19); // 5+10+1+3
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 4), 23); // 9+10+1+3
}

#[test]
fn svc_switch_starts_task_on_process_stack() {
    let prog = corpus::svc_switch();
    let (outcome, ex) = run_original(&prog, 2000);
    assert_eq!(outcome.status, RunStatus::Timeout);
    // Task observed its seeded r0 and its process stack pointer.
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 0xAA);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 4), corpus::SRAM_BASE + 0x3000);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 8), 0x42);
    assert_eq!(outcome.final_state.mode, Mode::Thread);
    assert!(outcome.final_state.control_spsel);
}

#[test]
fn systick_counter_reaches_five() {
    let prog = corpus::systick_count();
    let (outcome, ex) = run_original(&prog, 100_000);
    assert_eq!(outcome.status, RunStatus::Timeout);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 5);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 16), 0x77);
}

#[test]
fn pendsv_tasks_interleave() {
    let prog = corpus::pendsv_twotask();
    let (outcome, ex) = run_original(&prog, 100_000);
    assert_eq!(outcome.status, RunStatus::Timeout);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 3);
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE + 4), 3);
}

#[test]
fn exception_entry_then_untouched_return_is_identity() {
    let prog = corpus::arith_loops();
    let image = prog.image();
    let mut ex = Executor::new_original(&image).unwrap();
    ex.cpu.set_sp_main(0x2000_3000);
    ex.cpu.set_sp_process(0x2000_2000);
    ex.cpu.r[0] = 0xDEAD_BEEF;
    ex.cpu.r[12] = 0x1234_5678;
    ex.cpu.r[14] = 0x0800_1001;
    ex.cpu.flags.c = true;
    ex.cpu.flags.n = true;
    let before = ex.cpu;

    exception_entry(
        &mut ex.cpu,
        &mut ex.mem,
        EXC_SYSTICK,
        image.entry_point | 1,
        0x0800_0200,
    )
    .unwrap();
    assert_eq!(ex.cpu.mode, Mode::Handler);
    assert_eq!(ex.cpu.r[14], EXC_RETURN_THREAD_MAIN);
    // Frame's stacked return address equals the interrupt point.
    let frame = ex.cpu.sp_main;
    assert_eq!(ex.mem.read(frame + 24, 4).unwrap(), 0x0800_0200);

    let magic = ex.cpu.r[14];
    exception_return(&mut ex.cpu, &mut ex.mem, magic).unwrap();
    assert_eq!(ex.cpu.r[15], 0x0800_0200);
    let mut after = ex.cpu;
    // pc is the only field expected to move (to the return address).
    after.r[15] = before.r[15];
    assert_eq!(after, before);
}

#[test]
fn invalid_magic_is_rejected() {
    let prog = corpus::arith_loops();
    let image = prog.image();
    let mut ex = Executor::new_original(&image).unwrap();
    exception_entry(&mut ex.cpu, &mut ex.mem, 15, image.entry_point | 1, 0x0800_0100).unwrap();
    let err = exception_return(&mut ex.cpu, &mut ex.mem, 0xFFFF_FFF0).unwrap_err();
    assert_eq!(err, CrashKind::InvalidExcReturn { value: 0xFFFF_FFF0 });
}

#[test]
fn budget_zero_times_out_immediately() {
    let prog = corpus::arith_loops();
    let (outcome, _) = run_original(&prog, 0);
    assert_eq!(outcome.status, RunStatus::Timeout);
    assert_eq!(outcome.instr_count, 0);
}

#[test]
fn run_is_deterministic() {
    let prog = corpus::systick_count();
    let (a, _) = run_original(&prog, 50_000);
    let (b, _) = run_original(&prog, 50_000);
    assert_eq!(a.canonical_bytes(), b.canonical_bytes());
}

#[test]
fn transplanted_uart_guard_paths() {
    let prog = corpus::uart_guard();
    let image = prog.image();
    let manifest = hlm::builtin_manifest();
    let (timage, _, _) = rewriter::transplant(
        &image,
        Some(&manifest),
        PlanOptions { coverage: true },
    )
    .unwrap();
    let registry = Arc::new(hlm::builtin_registry());

    // 3-byte seed cannot satisfy a blocking 4-byte receive.
    let mut ex = Executor::new_transplanted(&timage, Some(Arc::clone(&registry)), Some(&manifest));
    let outcome = ex.run(b"foo".to_vec(), &RunConfig::default());
    assert_eq!(outcome.status, RunStatus::InputExhausted);

    // Non-matching input completes cleanly (idle trap, no timers).
    let mut ex = Executor::new_transplanted(&timage, Some(Arc::clone(&registry)), Some(&manifest));
    let outcome = ex.run(b"fooo".to_vec(), &RunConfig::default());
    assert_eq!(outcome.status, RunStatus::Completed);

    // The guard value reaches the planted unmapped write.
    let mut ex = Executor::new_transplanted(&timage, Some(registry), Some(&manifest));
    let outcome = ex.run(b"BUG!".to_vec(), &RunConfig::default());
    match outcome.status {
        RunStatus::Crashed {
            crash: CrashKind::MemFault { addr, .. },
            ..
        } => assert_eq!(addr, 0x6000_0000),
        other => panic!("expected planted crash, got {other:?}"),
    }
}

#[test]
fn masked_delivery_blocks_interrupts() {
    // cps id; configure SysTick via scs; spin; interrupts must not fire.
    let mut a = corpus::Asm::new(corpus::FLASH_BASE);
    a.word(corpus::INITIAL_SP);
    a.vector_word("reset");
    for n in 2..48u32 {
        if n == 15 {
            a.vector_word("isr");
        } else {
            a.word(0);
        }
    }
    a.label("reset");
    a.kind(crate::thumb2::InstrKind::Cps {
        disable: true,
        affect_pri: true,
        affect_fault: false,
    });
    a.ldr_const(0, 0xE000_E014);
    a.movs(1, 50);
    a.str_imm(1, 0, 0);
    a.ldr_const(0, 0xE000_E010);
    a.movs(1, 3);
    a.str_imm(1, 0, 0);
    a.ldr_const(2, 2000);
    a.label("spin");
    a.subs_imm(2, 1);
    a.bcond(crate::thumb2::Cond::Ne, "spin");
    a.b_self();
    a.label("isr");
    a.ldr_const(0, corpus::SRAM_BASE);
    a.movs(1, 1);
    a.str_imm(1, 0, 0);
    a.bx_lr();
    let blob = a.finish().0;
    let image =
        crate::image::load_firmware_from_bytes(blob, corpus::corpus_map(), vec![]).unwrap();
    let mut ex = Executor::new_original(&image).unwrap();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 10_000,
            ..RunConfig::default()
        },
    );
    assert_eq!(outcome.status, RunStatus::Timeout);
    // ISR never ran while PRIMASK was set.
    assert_eq!(ram_word(&ex, corpus::SRAM_BASE), 0);
    assert!(ex.pending.is_pending(EXC_SYSTICK));
}

#[test]
fn round_robin_alternates_two_timers() {
    // Two IRQ timers at the same interval: deliveries alternate.
    let mut a = corpus::Asm::new(corpus::FLASH_BASE);
    a.word(corpus::INITIAL_SP);
    a.vector_word("reset");
    for n in 2..48u32 {
        match n {
            16 => a.vector_word("isr_a"),
            17 => a.vector_word("isr_b"),
            _ => a.word(0),
        }
    }
    a.label("reset");
    a.b_self();
    // Each ISR appends its tag to a log.
    a.label("isr_a");
    a.movs(0, 0xA);
    a.b("log");
    a.label("isr_b");
    a.movs(0, 0xB);
    a.label("log");
    a.ldr_const(1, corpus::SRAM_BASE); // log cursor
    a.ldr_imm(2, 1, 0);
    a.lsls(3, 2, 2);
    a.adds_reg(3, 3, 1);
    a.str_imm(0, 3, 1); // log[cursor] at SRAM_BASE+4...
    a.adds_imm(2, 1);
    a.str_imm(2, 1, 0);
    a.bx_lr();
    let blob = a.finish().0;
    let image =
        crate::image::load_firmware_from_bytes(blob, corpus::corpus_map(), vec![]).unwrap();
    let mut ex = Executor::new_original(&image).unwrap();
    ex.clock.program(16, 100);
    ex.clock.program(17, 100);
    ex.pending.configure(16);
    ex.pending.configure(17);
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: 1000,
            ..RunConfig::default()
        },
    );
    assert_eq!(outcome.status, RunStatus::Timeout);
    let count = ram_word(&ex, corpus::SRAM_BASE);
    assert!(count >= 4, "expected several deliveries, got {count}");
    let mut tags = Vec::new();
    for i in 0..count.min(8) {
        tags.push(ram_word(&ex, corpus::SRAM_BASE + 4 + 4 * i));
    }
    for pair in tags.windows(2) {
        assert_ne!(pair[0], pair[1], "deliveries did not alternate: {tags:?}");
    }
}

#[test]
fn snapshot_restore_reproduces_outcomes() {
    let prog = corpus::systick_count();
    let image = prog.image();
    let mut ex = Executor::new_original(&image).unwrap();
    let snap = ex.snapshot_state();
    let a = ex.run(Vec::new(), &RunConfig { budget: 30_000, ..RunConfig::default() });
    ex.restore_state(&snap);
    let b = ex.run_from_current_state(&RunConfig { budget: 30_000, ..RunConfig::default() });
    assert_eq!(a.canonical_bytes(), b.canonical_bytes());
}
