use std::sync::Arc;

use super::*;
use crate::analysis;
use crate::corpus::{self, Asm, FLASH_BASE, INITIAL_SP};
use crate::hlm;
use crate::image::load_firmware_from_bytes;
use crate::runtime::{Executor, RunConfig, RunStatus};
use crate::thumb2::{CoprocOp, InstrKind, Reg, SpecialReg};

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

fn plan_for(image: &FirmwareImage, coverage: bool) -> RewritePlan {
    let report = analysis::analyze(image, None);
    plan(
        image,
        &report.blocks,
        &report.sites,
        &report.hal.matches,
        PlanOptions { coverage },
    )
    .unwrap()
}

#[test]
fn svc_becomes_bkpt_trap() {
    let image = image_from(|a| {
        a.label("reset");
        a.svc(1);
        a.b_self();
    });
    let p = plan_for(&image, false);
    let svc_patch = p
        .patches
        .iter()
        .find(|pt| pt.before == vec![0x01, 0xDF])
        .expect("svc patch present");
    assert_eq!(svc_patch.after.len(), 2);
    assert_eq!(svc_patch.after[1], 0xBE, "bkpt opcode");
    let imm8 = svc_patch.after[0];
    assert_eq!(
        p.trap_table.lookup(imm8),
        Some(&TrapKind::SvcDispatch { imm8: 1 })
    );
}

#[test]
fn empty_plan_is_byte_identical() {
    let prog = corpus::min_loop();
    let image = prog.image();
    let p = plan_for(&image, false);
    assert!(p.is_empty(), "unexpected patches: {:?}", p.patches);
    let timage = apply(&image, &p).unwrap();
    assert_eq!(timage.base.rom_bytes, image.rom_bytes);
}

#[test]
fn too_many_coproc_kinds_overflow_the_trap_table() {
    let image = image_from(|a| {
        a.label("reset");
        for i in 0..300u32 {
            a.kind(InstrKind::Coproc {
                two: false,
                coproc: 14,
                op: CoprocOp::Cdp {
                    opc1: (i % 16) as u8,
                    crd: ((i / 16) % 16) as u8,
                    crn: ((i / 256) % 16) as u8,
                    crm: 0,
                    opc2: 0,
                },
            });
        }
        a.b_self();
    });
    let report = analysis::analyze(&image, None);
    let err = plan(
        &image,
        &report.blocks,
        &report.sites,
        &[],
        PlanOptions { coverage: false },
    )
    .unwrap_err();
    assert!(matches!(err, RewriteError::TrapOverflow), "{err}");
}

#[test]
fn banked_sp_access_substitutes_inline() {
    let image = image_from(|a| {
        a.label("reset");
        a.mrs(0, SpecialReg::Psp);
        a.b_self();
    });
    let p = plan_for(&image, false);
    let patch = p
        .patches
        .iter()
        .find(|pt| pt.kind == PatchKind::SpecialSite && pt.after.len() == 4)
        .expect("inline patch");
    let decoded = crate::thumb2::decode(&patch.after, 0).instruction().unwrap();
    assert_eq!(
        decoded.kind,
        InstrKind::VmovBank {
            to_bank: false,
            cell: crate::thumb2::BankCell::SpProcess,
            rt: Reg(0),
        }
    );
}

#[test]
fn apsr_access_needs_no_patch() {
    let image = image_from(|a| {
        a.label("reset");
        a.mrs(0, SpecialReg::Apsr);
        a.b_self();
    });
    let p = plan_for(&image, false);
    // Only the idle loop patch.
    assert_eq!(p.patches.len(), 1);
}

#[test]
fn branch_to_self_maps_to_idle_trap() {
    let image = image_from(|a| {
        a.label("reset");
        a.movs(0, 1);
        a.b_self();
    });
    let p = plan_for(&image, false);
    let idle = p
        .patches
        .iter()
        .find(|pt| pt.kind == PatchKind::SpecialSite)
        .unwrap();
    let imm8 = idle.after[0];
    assert_eq!(
        p.trap_table.lookup(imm8),
        Some(&TrapKind::IdleLoop {
            resume_pc: idle.address
        })
    );
}

#[test]
fn trap_allocation_is_stable_across_runs() {
    let prog = corpus::pendsv_twotask();
    let image = prog.image();
    let a = plan_for(&image, true);
    let b = plan_for(&image, true);
    assert_eq!(a.trap_table, b.trap_table);
    assert_eq!(a.trampolines, b.trampolines);
    assert_eq!(a.patches, b.patches);
}

#[test]
fn distinct_kinds_never_share_imm8() {
    let mut table = TrapTable::default();
    let mut seen = std::collections::BTreeMap::new();
    for i in 0..200u8 {
        let kind = TrapKind::SpecialReg {
            reg: i,
            write: false,
            rt: 0,
        };
        let imm8 = table.get_or_alloc(kind.clone()).unwrap();
        assert_ne!(imm8, 0, "imm8 0 is reserved");
        if let Some(prev) = seen.insert(imm8, kind.clone()) {
            panic!("imm8 {imm8} shared by {prev:?} and {kind:?}");
        }
        // Identical kinds reuse the same slot.
        assert_eq!(table.get_or_alloc(kind).unwrap(), imm8);
    }
}

#[test]
fn layout_preservation_outside_patches() {
    let prog = corpus::systick_count();
    let image = prog.image();
    let p = plan_for(&image, true);
    let timage = apply(&image, &p).unwrap();
    let orig = &image.rom_bytes["flash"];
    let new = &timage.base.rom_bytes["flash"];
    assert_eq!(orig.len(), new.len());
    let mut patched: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
    for patch in &p.patches {
        for i in 0..patch.after.len() as u32 {
            patched.insert(patch.address + i);
        }
    }
    for (off, (o, n)) in orig.iter().zip(new).enumerate() {
        let addr = FLASH_BASE + off as u32;
        if patched.contains(&addr) {
            continue;
        }
        assert_eq!(o, n, "byte at {addr:#010x} changed outside any patch");
    }
}

#[test]
fn trampoline_head_and_stub_structure() {
    let prog = corpus::arith_loops();
    let image = prog.image();
    let p = plan_for(&image, true);
    assert!(!p.trampolines.is_empty());
    let timage = apply(&image, &p).unwrap();
    for (block_start, spec) in &p.trampolines {
        // Head instruction is the stub-branch service op.
        let head = timage.base.read_bytes(*block_start, 4).unwrap();
        let decoded = crate::thumb2::decode(&head, *block_start)
            .instruction()
            .unwrap();
        assert_eq!(
            vendor_service(&decoded.kind),
            Some(VendorService::StubBranch {
                bucket: spec.bucket
            })
        );
        // Stub: displaced bytes then ldr.w pc, [pc, #imm] then literal.
        let displaced = &p.displaced[block_start];
        let stub_bytes = timage
            .base
            .read_bytes(spec.stub, displaced.len() as u32 + 4)
            .unwrap();
        assert_eq!(&stub_bytes[..displaced.len()], &displaced[..]);
        let tail = crate::thumb2::decode(&stub_bytes[displaced.len()..], spec.stub)
            .instruction()
            .unwrap();
        assert!(
            matches!(tail.kind, InstrKind::MemLit32 { rt, .. } if rt.is_pc()),
            "stub must end in a literal pc load, got {tail}"
        );
    }
}

#[test]
fn serialize_roundtrip_and_integrity() {
    let dir = tempfile::tempdir().unwrap();
    let prog = corpus::uart_guard();
    let image = prog.image();
    let manifest = hlm::builtin_manifest();
    let (timage, _, _) =
        transplant(&image, Some(&manifest), PlanOptions { coverage: true }).unwrap();

    serialize(&timage, dir.path()).unwrap();
    let loaded = deserialize(dir.path()).unwrap();
    assert_eq!(loaded, timage);

    // Tampered region bytes break the checksum.
    let region = dir.path().join("region_flash.bin");
    let mut bytes = std::fs::read(&region).unwrap();
    bytes[200] ^= 0xFF;
    std::fs::write(&region, bytes).unwrap();
    assert!(matches!(
        deserialize(dir.path()),
        Err(RewriteError::Integrity)
    ));

    // Missing sidecar gets a remediation hint.
    let empty = tempfile::tempdir().unwrap();
    match deserialize(empty.path()) {
        Err(RewriteError::MissingSidecar(p)) => assert!(p.contains("transplant.meta")),
        other => panic!("expected missing sidecar, got {other:?}"),
    }

    // Version skew is rejected.
    let dir2 = tempfile::tempdir().unwrap();
    let mut old = timage.clone();
    old.metadata_version = "0.9.0".into();
    serialize(&old, dir2.path()).unwrap();
    assert!(matches!(
        deserialize(dir2.path()),
        Err(RewriteError::Version { .. })
    ));
}

#[test]
fn differential_identity_coverage_off() {
    for prog in corpus::differential_set() {
        let image = prog.image();
        let (timage, _, _) = transplant(&image, None, PlanOptions { coverage: false }).unwrap();

        let mut orig = Executor::new_original(&image).unwrap();
        let o = orig.run(Vec::new(), &RunConfig { budget: 200_000, ..RunConfig::default() });
        let mut trans = Executor::new_transplanted(&timage, None, None);
        let t = trans.run(Vec::new(), &RunConfig { budget: 200_000, ..RunConfig::default() });

        assert!(
            matches!(o.status, RunStatus::Timeout | RunStatus::Completed),
            "{}: original status {:?}",
            prog.name,
            o.status
        );
        assert!(
            matches!(t.status, RunStatus::Timeout | RunStatus::Completed),
            "{}: transplanted status {:?}",
            prog.name,
            t.status
        );
        assert_eq!(
            o.final_state.r, t.final_state.r,
            "{}: registers diverge",
            prog.name
        );
        assert_eq!(o.final_state.flags, t.final_state.flags, "{}", prog.name);
        assert_eq!(o.final_state.mode, t.final_state.mode, "{}", prog.name);
        assert_eq!(orig.mem.ram_dump(), trans.mem.ram_dump(), "{}", prog.name);
    }
}
