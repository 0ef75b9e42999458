use super::*;
use crate::corpus::{self, Asm, FLASH_BASE, INITIAL_SP};
use crate::hlm::builtin_manifest;
use crate::image::load_firmware_from_bytes;
use crate::thumb2::{Cond, InstrKind, Reg, SpecialReg};

fn image_from(build: impl FnOnce(&mut Asm)) -> FirmwareImage {
    let mut a = Asm::new(FLASH_BASE);
    a.word(INITIAL_SP);
    a.vector_word("reset");
    for _ in 2..48 {
        a.word(0);
    }
    build(&mut a);
    load_firmware_from_bytes(a.finish().0, corpus::corpus_map(), vec![]).unwrap()
}

#[test]
fn straight_line_function_is_one_instrumentable_block() {
    let image = image_from(|a| {
        a.label("reset");
        a.movs(0, 1);
        a.movs(1, 2);
        a.adds_reg(2, 0, 1);
        a.bx_lr();
    });
    let (blocks, barriers) = recover_blocks(&image, &[image.entry_point]);
    assert!(barriers.is_empty());
    assert_eq!(blocks.len(), 1);
    let b = &blocks[0];
    assert_eq!(b.instr_count, 4);
    assert!(b.instrumentable);
    assert!(b.successors.is_empty()); // bx lr is indirect
}

#[test]
fn lone_return_block_is_too_small() {
    let image = image_from(|a| {
        a.label("reset");
        a.movs(0, 0);
        a.cmp_imm(0, 1);
        a.bcond(Cond::Eq, "ret2");
        a.movs(1, 1);
        a.label("ret2");
        a.bx_lr();
    });
    let (blocks, _) = recover_blocks(&image, &[image.entry_point]);
    let ret2 = blocks
        .iter()
        .find(|b| b.instr_count == 1 && b.successors.is_empty())
        .expect("lone bx lr block");
    assert!(!ret2.instrumentable);
    assert_eq!(
        ret2.reason_uninstrumentable,
        Some(UninstrumentableReason::TooSmall)
    );
}

#[test]
fn pc_relative_head_disqualifies() {
    let image = image_from(|a| {
        a.label("reset");
        a.ldr_const(0, 0x1234_5678); // ldr r0, [pc, #...] heads the block
        a.movs(1, 2);
        a.movs(2, 3);
        a.bx_lr();
    });
    let (blocks, _) = recover_blocks(&image, &[image.entry_point]);
    assert_eq!(blocks.len(), 1);
    assert!(!blocks[0].instrumentable);
    assert_eq!(
        blocks[0].reason_uninstrumentable,
        Some(UninstrumentableReason::PcRelativeHead)
    );
}

#[test]
fn it_block_head_disqualifies() {
    let image = image_from(|a| {
        a.label("reset");
        a.movs(0, 0);
        a.cmp_imm(0, 0);
        a.b("body");
        a.label("body");
        a.kind(InstrKind::It {
            firstcond: Cond::Eq.bits(),
            mask: 0b1000,
        });
        a.movs(1, 1); // conditional
        a.movs(2, 2);
        a.bx_lr();
    });
    let (blocks, _) = recover_blocks(&image, &[image.entry_point]);
    let body = blocks.iter().find(|b| b.instr_count == 4).expect("body");
    assert!(!body.instrumentable);
    assert_eq!(
        body.reason_uninstrumentable,
        Some(UninstrumentableReason::ItBlockHead)
    );
}

#[test]
fn classifier_matches_taxonomy() {
    let image = image_from(|a| {
        a.label("reset");
        a.svc(0); // software interrupt -> trap
        a.mrs(0, SpecialReg::Msp); // banked sp read -> inline
        a.mrs(1, SpecialReg::Primask); // other special reg -> trap
        a.kind(InstrKind::Cps {
            disable: true,
            affect_pri: true,
            affect_fault: false,
        });
        a.kind(InstrKind::Coproc {
            two: false,
            coproc: 15,
            op: crate::thumb2::CoprocOp::McrMrc {
                to_coproc: true,
                opc1: 0,
                rt: Reg(0),
                crn: 7,
                crm: 0,
                opc2: 0,
            },
        });
        a.b_self(); // infinite empty loop -> trap
    });
    let (blocks, _) = recover_blocks(&image, &[image.entry_point]);
    let sites = classify_sites(&image, &blocks);
    let cats: Vec<(SiteCategory, RewriteStrategy)> = sites
        .iter()
        .map(|s| (s.category, s.rewrite_strategy))
        .collect();
    assert_eq!(
        cats,
        vec![
            (SiteCategory::SoftwareInterrupt, RewriteStrategy::Trap),
            (
                SiteCategory::SpecialRegisterAccess,
                RewriteStrategy::InlineSubstitute
            ),
            (SiteCategory::SpecialRegisterAccess, RewriteStrategy::Trap),
            (SiteCategory::CpuStateChange, RewriteStrategy::Trap),
            (SiteCategory::CoprocessorIo, RewriteStrategy::Trap),
            (SiteCategory::InfiniteLoop, RewriteStrategy::Trap),
        ]
    );
}

#[test]
fn blocks_partition_reachable_code() {
    // Every corpus program: blocks pairwise disjoint, successors point at
    // block starts or reported barriers, ordering stable.
    for prog in corpus::all() {
        let image = prog.image();
        let roots = default_roots(&image);
        let (blocks, barriers) = recover_blocks(&image, &roots);
        let (blocks2, _) = recover_blocks(&image, &roots);
        assert_eq!(blocks, blocks2, "{}: nondeterministic recovery", prog.name);
        let starts: std::collections::BTreeSet<u32> = blocks.iter().map(|b| b.start).collect();
        for w in blocks.windows(2) {
            assert!(
                w[0].end <= w[1].start,
                "{}: overlapping blocks {:#x}..{:#x} and {:#x}..",
                prog.name,
                w[0].start,
                w[0].end,
                w[1].start
            );
        }
        for b in &blocks {
            for s in &b.successors {
                assert!(
                    starts.contains(s) || barriers.iter().any(|bar| bar.address == *s),
                    "{}: successor {:#010x} of block {:#010x} is neither block nor barrier",
                    prog.name,
                    s,
                    b.start
                );
            }
        }
    }
}

#[test]
fn sweep_counts_svc_and_bkpt_exactly() {
    let report = sweep_classify(65_536 + 10_000, 42).unwrap();
    assert_eq!(report.half.special_mnemonics.get("svc"), Some(&256));
    assert_eq!(report.half.special_mnemonics.get("bkpt"), Some(&256));
    assert_eq!(report.half.total, 59_392); // 65,536 minus the 32-bit prefixes
    // Every taxonomy category backs at least one rule.
    for cat in ["software_interrupt", "cpu_state_change", "coprocessor_io"] {
        let n = report.half.categories.get(cat).copied().unwrap_or(0)
            + report.wide.categories.get(cat).copied().unwrap_or(0);
        assert!(n > 0, "category {cat} never classified");
    }
    // Determinism for a fixed seed.
    let again = sweep_classify(65_536 + 10_000, 42).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}

#[test]
fn sweep_rejects_small_budget() {
    assert!(matches!(
        sweep_classify(0, 0),
        Err(AnalysisError::InvalidBudget(0))
    ));
    assert!(matches!(
        sweep_classify(65_535, 0),
        Err(AnalysisError::InvalidBudget(_))
    ));
}

#[test]
fn hal_symbol_match() {
    let prog = corpus::uart_guard();
    let image = prog.image();
    let manifest = builtin_manifest();
    let report = match_hal(&image, &manifest);
    let ids: Vec<&str> = report
        .matches
        .iter()
        .map(|m| m.handler_id.as_str())
        .collect();
    assert!(ids.contains(&"uart_receive"));
    assert!(ids.contains(&"hal_init"));
    assert!(ids.contains(&"gpio_init"));
    let m = report
        .matches
        .iter()
        .find(|m| m.handler_id == "uart_receive")
        .unwrap();
    assert_eq!(m.address % 2, 0, "address must be thumb-normalized");
    assert!(!m.by_signature);
}

#[test]
fn ambiguous_signature_reported_not_applied() {
    // Two identical function bodies; a signature matching both must not
    // produce a match.
    let image = image_from(|a| {
        a.label("reset");
        a.bl("fa");
        a.bl("fb");
        a.b_self();
        a.label("fa");
        a.movs(0, 7);
        a.movs(1, 7);
        a.bx_lr();
        a.label("fb");
        a.movs(0, 7);
        a.movs(1, 7);
        a.bx_lr();
    });
    let manifest = crate::hlm::HandlerManifest {
        version: "test".into(),
        handlers: vec![crate::hlm::ManifestEntry {
            handler_id: "dup".into(),
            symbols: vec!["NoSuchSymbol".into()],
            signature_hex: Some("07200721".into()),
            fidelity: crate::hlm::Fidelity::Low,
            consumes_input: false,
        }],
    };
    let report = match_hal(&image, &manifest);
    assert!(report.matches.is_empty());
    assert_eq!(report.ambiguous.len(), 1);
    assert_eq!(report.ambiguous[0].candidates.len(), 2);
}

#[test]
fn unique_signature_matches() {
    let image = image_from(|a| {
        a.label("reset");
        a.b_self();
        a.label("target");
        a.movs(3, 0x5A);
        a.movs(4, 0x5A);
        a.bx_lr();
    });
    let manifest = crate::hlm::HandlerManifest {
        version: "test".into(),
        handlers: vec![crate::hlm::ManifestEntry {
            handler_id: "sig".into(),
            symbols: vec![],
            signature_hex: Some("5a23 5a24 ??47".into()),
            fidelity: crate::hlm::Fidelity::High,
            consumes_input: false,
        }],
    };
    let report = match_hal(&image, &manifest);
    assert_eq!(report.matches.len(), 1);
    assert!(report.matches[0].by_signature);
    assert!(report.unresolved.is_empty());
}

#[test]
fn unresolved_handlers_listed() {
    let prog = corpus::min_loop();
    let image = prog.image();
    let manifest = builtin_manifest();
    let report = match_hal(&image, &manifest);
    assert!(report.matches.is_empty());
    assert_eq!(report.unresolved.len(), manifest.handlers.len());
}

#[test]
fn skip_rate_reported() {
    let prog = corpus::uart_guard();
    let image = prog.image();
    let report = analyze(&image, None);
    assert!(report.block_count > 5);
    assert!((0.0..=1.0).contains(&report.skip_rate));
}
