//! Basic-block recovery by recursive-traversal disassembly from the vector
//! table roots. Indirect branch targets are not resolved statically:
//! uncovered code is handled at run time by decode-on-demand and simply
//! lacks coverage instrumentation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{BarrierKind, BasicBlock, DecodeBarrier, UninstrumentableReason};
use crate::image::FirmwareImage;
use crate::thumb2::{self, DecodeOutcome, HintOp, Instruction, InstrKind, ItState};

/// Minimum relocatable head bytes needed for the 4-byte trampoline branch.
pub const TRAMPOLINE_FOOTPRINT: u32 = 4;

#[derive(Debug, Default)]
pub struct Disassembly {
    /// Every decoded instruction keyed by start address.
    pub instrs: BTreeMap<u32, Instruction>,
    pub barriers: Vec<DecodeBarrier>,
    /// Leader addresses: roots, branch targets, post-terminator successors.
    leaders: BTreeSet<u32>,
}

impl Disassembly {
    fn visit(&mut self, image: &FirmwareImage, root: u32, work: &mut VecDeque<u32>) {
        let mut pc = root & !1;
        let mut it = ItState::default();
        loop {
            if self.instrs.contains_key(&pc) {
                return; // already walked from here
            }
            if !image.map.executable_at(pc) {
                self.push_barrier(pc, 0, BarrierKind::NotExecutable);
                return;
            }
            let hw1 = match image.read(pc, 2) {
                Ok(v) => v as u16,
                Err(_) => {
                    self.push_barrier(pc, 0, BarrierKind::NotExecutable);
                    return;
                }
            };
            let outcome = if thumb2::is_wide_prefix(hw1) {
                match image.read(pc + 2, 2) {
                    Ok(hw2) => thumb2::decode_at(hw1, Some(hw2 as u16), pc),
                    Err(_) => DecodeOutcome::Unsupported(hw1 as u32),
                }
            } else {
                thumb2::decode_at(hw1, None, pc)
            };
            let mut instr = match outcome {
                DecodeOutcome::Decoded(i) => i,
                DecodeOutcome::Undefined => {
                    self.push_barrier(pc, hw1 as u32, BarrierKind::Undefined);
                    return;
                }
                DecodeOutcome::Unsupported(raw) => {
                    self.push_barrier(pc, raw, BarrierKind::Unsupported);
                    return;
                }
            };

            // Thread IT context into the decoded instruction.
            if it.active() {
                instr.in_it_block = true;
                instr.condition = it.current_cond();
                it.advance();
            } else if let InstrKind::It { firstcond, mask } = instr.kind {
                it = ItState::start(firstcond, mask);
            }
            let width = instr.width as u32;
            let in_it = instr.in_it_block;
            self.instrs.insert(pc, instr);

            if let Some(term) = terminator_successors(&instr) {
                // Conditional execution via IT makes any terminator
                // fall through as well.
                let mut succs = term;
                if in_it && !succs.contains(&(pc + width)) {
                    succs.push(pc + width);
                }
                for s in &succs {
                    self.leaders.insert(*s & !1);
                    work.push_back(*s & !1);
                }
                self.leaders.insert(pc + width);
                return;
            }
            pc += width;
        }
    }

    fn push_barrier(&mut self, addr: u32, raw: u32, kind: BarrierKind) {
        if !self.barriers.iter().any(|b| b.address == addr) {
            self.barriers.push(DecodeBarrier { address: addr, raw, kind });
        }
    }
}

/// Successor addresses if `instr` terminates a block, else None.
/// Indirect transfers terminate with no static successors.
pub fn terminator_successors(instr: &Instruction) -> Option<Vec<u32>> {
    let next = instr.address + instr.width as u32;
    match instr.kind {
        InstrKind::B16 { .. } | InstrKind::B32 { .. } => {
            Some(vec![instr.branch_target().unwrap()])
        }
        InstrKind::BCond16 { .. } | InstrKind::BCond32 { .. } | InstrKind::Cbz { .. } => {
            Some(vec![instr.branch_target().unwrap(), next])
        }
        InstrKind::Bl { .. } => Some(vec![instr.branch_target().unwrap(), next]),
        InstrKind::Bx { .. } | InstrKind::BlxReg { .. } | InstrKind::TableBranch { .. } => {
            Some(vec![])
        }
        InstrKind::Pop16 { regs } if regs & 0x100 != 0 => Some(vec![]),
        InstrKind::MemMultiple32 { load: true, regs, .. } if regs & 0x8000 != 0 => Some(vec![]),
        InstrKind::MovRegHi { rd, .. } | InstrKind::AddRegHi { rdn: rd, .. } if rd.is_pc() => {
            Some(vec![])
        }
        InstrKind::MemImm12 { load: true, rt, .. }
        | InstrKind::MemImm8 { load: true, rt, .. }
        | InstrKind::MemReg32 { load: true, rt, .. }
        | InstrKind::MemLit32 { rt, .. }
            if rt.is_pc() =>
        {
            Some(vec![])
        }
        InstrKind::DpReg32 { rd, .. } | InstrKind::DpImm32 { rd, .. } if rd.is_pc() => {
            // tst/teq/cmp/cmn spell rd == pc but write no register.
            match instr.kind {
                InstrKind::DpReg32 { set_flags: true, .. }
                | InstrKind::DpImm32 { set_flags: true, .. } => None,
                _ => Some(vec![]),
            }
        }
        InstrKind::Svc { .. } => Some(vec![next]),
        InstrKind::Bkpt { .. } => Some(vec![next]),
        InstrKind::Udf16 { .. } => Some(vec![]),
        _ => None,
    }
}

/// True when relocating this instruction to a different address preserves
/// its behavior (no pc-relative data access, no control transfer, no pc
/// operand, no IT involvement).
pub fn is_relocatable(instr: &Instruction) -> bool {
    if instr.in_it_block {
        return false;
    }
    match instr.kind {
        InstrKind::It { .. }
        | InstrKind::LdrLit16 { .. }
        | InstrKind::Adr16 { .. }
        | InstrKind::MemLit32 { .. }
        | InstrKind::B16 { .. }
        | InstrKind::B32 { .. }
        | InstrKind::BCond16 { .. }
        | InstrKind::BCond32 { .. }
        | InstrKind::Cbz { .. }
        | InstrKind::Bl { .. }
        | InstrKind::Bx { .. }
        | InstrKind::BlxReg { .. }
        | InstrKind::TableBranch { .. } => false,
        InstrKind::MovRegHi { rd, rm } => !rd.is_pc() && !rm.is_pc(),
        InstrKind::AddRegHi { rdn, rm } => !rdn.is_pc() && !rm.is_pc(),
        InstrKind::CmpRegHi { rn, rm } => !rn.is_pc() && !rm.is_pc(),
        InstrKind::DpReg32 { rd, rn, rm, .. } => !rd.is_pc() && !rn.is_pc() && !rm.is_pc(),
        InstrKind::DpImm32 { rd, rn, .. } => !rd.is_pc() && !rn.is_pc(),
        InstrKind::MemImm12 { rt, rn, .. } => !rt.is_pc() && !rn.is_pc(),
        InstrKind::MemImm8 { rt, rn, .. } => !rt.is_pc() && !rn.is_pc(),
        InstrKind::MemReg32 { rt, rn, rm, .. } => !rt.is_pc() && !rn.is_pc() && !rm.is_pc(),
        InstrKind::Pop16 { regs } => regs & 0x100 == 0,
        InstrKind::MemMultiple32 { regs, rn, .. } => regs & 0x8000 == 0 && !rn.is_pc(),
        _ => true,
    }
}

/// Recover basic blocks reachable from `roots`.
pub fn recover_blocks(
    image: &FirmwareImage,
    roots: &[u32],
) -> (Vec<BasicBlock>, Vec<DecodeBarrier>) {
    let mut dis = Disassembly::default();
    let mut work: VecDeque<u32> = VecDeque::new();
    for r in roots {
        let a = *r & !1;
        dis.leaders.insert(a);
        work.push_back(a);
    }
    while let Some(a) = work.pop_front() {
        dis.visit(image, a, &mut work);
    }

    // Split instruction runs at leaders into blocks.
    let mut blocks = Vec::new();
    let instr_addrs: Vec<u32> = dis.instrs.keys().copied().collect();
    let mut i = 0;
    while i < instr_addrs.len() {
        let start = instr_addrs[i];
        if !dis.leaders.contains(&start) && !blocks.is_empty() {
            // Interior instruction of a block already consumed below.
            i += 1;
            continue;
        }
        let mut end = start;
        let mut count = 0u32;
        let mut successors = Vec::new();
        let mut j = i;
        while j < instr_addrs.len() {
            let addr = instr_addrs[j];
            if addr != end {
                // Gap (barrier consumed the rest of the run).
                break;
            }
            if addr != start && dis.leaders.contains(&addr) {
                successors = vec![addr];
                break;
            }
            let instr = dis.instrs[&addr];
            end = addr + instr.width as u32;
            count += 1;
            j += 1;
            if let Some(mut term) = terminator_successors(&instr) {
                if instr.in_it_block && !term.contains(&end) {
                    term.push(end);
                }
                successors = term;
                break;
            }
        }
        if count == 0 {
            i += 1;
            continue;
        }
        let (instrumentable, reason) = head_instrumentable(&dis, start, end);
        blocks.push(BasicBlock {
            start,
            end,
            instr_count: count,
            successors,
            instrumentable,
            reason_uninstrumentable: reason,
        });
        i = j;
        // Skip interior instructions consumed by this block.
        while i < instr_addrs.len() && instr_addrs[i] < end {
            i += 1;
        }
    }
    blocks.sort_by_key(|b| b.start);
    let mut barriers = dis.barriers;
    barriers.sort_by_key(|b| b.address);
    (blocks, barriers)
}

fn head_instrumentable(
    dis: &Disassembly,
    start: u32,
    end: u32,
) -> (bool, Option<UninstrumentableReason>) {
    if end - start < TRAMPOLINE_FOOTPRINT {
        return (false, Some(UninstrumentableReason::TooSmall));
    }
    let mut covered = 0u32;
    let mut addr = start;
    while covered < TRAMPOLINE_FOOTPRINT {
        let instr = match dis.instrs.get(&addr) {
            Some(i) => i,
            None => return (false, Some(UninstrumentableReason::TooSmall)),
        };
        if instr.in_it_block || matches!(instr.kind, InstrKind::It { .. }) {
            return (false, Some(UninstrumentableReason::ItBlockHead));
        }
        if !is_relocatable(instr) {
            return (false, Some(UninstrumentableReason::PcRelativeHead));
        }
        covered += instr.width as u32;
        addr += instr.width as u32;
    }
    (true, None)
}

/// Default analysis roots: the entry point plus every plausible
/// vector-table entry (odd, executable target).
pub fn default_roots(image: &FirmwareImage) -> Vec<u32> {
    let mut roots = vec![image.entry_point];
    for n in 1..image.map.vector_entries {
        if let Ok(word) = image.vector(n) {
            if word & 1 == 1 && image.map.executable_at(word & !1) {
                roots.push(word & !1);
            }
        }
    }
    roots.sort_unstable();
    roots.dedup();
    roots
}

/// Idle hints (wfi/wfe) the rewriter fast-forwards through.
pub fn is_idle_hint(instr: &Instruction) -> bool {
    matches!(
        instr.kind,
        InstrKind::Hint16 {
            op: HintOp::Wfi | HintOp::Wfe
        } | InstrKind::Hint32 {
            op: HintOp::Wfi | HintOp::Wfe
        }
    )
}
