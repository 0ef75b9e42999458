//! Text rendering for the `disasm` output: `MNEMONIC OPERANDS` in a
//! UAL-flavored syntax.

use super::*;

fn reg_name(r: Reg) -> String {
    match r.0 {
        13 => "sp".into(),
        14 => "lr".into(),
        15 => "pc".into(),
        n => format!("r{n}"),
    }
}

fn cond_suffix(c: Cond) -> &'static str {
    match c {
        Cond::Eq => "eq",
        Cond::Ne => "ne",
        Cond::Cs => "cs",
        Cond::Cc => "cc",
        Cond::Mi => "mi",
        Cond::Pl => "pl",
        Cond::Vs => "vs",
        Cond::Vc => "vc",
        Cond::Hi => "hi",
        Cond::Ls => "ls",
        Cond::Ge => "ge",
        Cond::Lt => "lt",
        Cond::Gt => "gt",
        Cond::Le => "le",
        Cond::Al => "",
    }
}

fn reglist(mask: u16) -> String {
    let mut parts = Vec::new();
    for i in 0..16 {
        if mask & (1 << i) != 0 {
            parts.push(reg_name(Reg(i)));
        }
    }
    format!("{{{}}}", parts.join(", "))
}

fn s_flag(instr: &Instruction) -> &'static str {
    if instr.in_it_block {
        ""
    } else {
        "s"
    }
}

fn it_cond(instr: &Instruction) -> String {
    match (instr.in_it_block, instr.condition) {
        (true, Some(c)) => cond_suffix(c).to_string(),
        _ => String::new(),
    }
}

pub(super) fn mnemonic(instr: &Instruction) -> String {
    let k = &instr.kind;
    let s = s_flag(instr);
    let itc = it_cond(instr);
    match *k {
        InstrKind::ShiftImm16 { op, imm5, .. } => match (op, imm5) {
            (0, 0) => format!("mov{s}{itc}"),
            (0, _) => format!("lsl{s}{itc}"),
            (1, _) => format!("lsr{s}{itc}"),
            _ => format!("asr{s}{itc}"),
        },
        InstrKind::AddSubReg16 { sub, .. } | InstrKind::AddSubImm3 { sub, .. } => {
            if sub {
                format!("sub{s}{itc}")
            } else {
                format!("add{s}{itc}")
            }
        }
        InstrKind::MovImm8 { .. } => format!("mov{s}{itc}"),
        InstrKind::CmpImm8 { .. } => format!("cmp{itc}"),
        InstrKind::AddSubImm8 { sub, .. } => {
            if sub {
                format!("sub{s}{itc}")
            } else {
                format!("add{s}{itc}")
            }
        }
        InstrKind::Dp16 { op, .. } => {
            use Dp16Op::*;
            match op {
                Tst => format!("tst{itc}"),
                Cmp => format!("cmp{itc}"),
                Cmn => format!("cmn{itc}"),
                Rsb => format!("rsb{s}{itc}"),
                Mul => format!("mul{s}{itc}"),
                And => format!("and{s}{itc}"),
                Eor => format!("eor{s}{itc}"),
                Lsl => format!("lsl{s}{itc}"),
                Lsr => format!("lsr{s}{itc}"),
                Asr => format!("asr{s}{itc}"),
                Adc => format!("adc{s}{itc}"),
                Sbc => format!("sbc{s}{itc}"),
                Ror => format!("ror{s}{itc}"),
                Orr => format!("orr{s}{itc}"),
                Bic => format!("bic{s}{itc}"),
                Mvn => format!("mvn{s}{itc}"),
            }
        }
        InstrKind::AddRegHi { .. } => format!("add{itc}"),
        InstrKind::CmpRegHi { .. } => format!("cmp{itc}"),
        InstrKind::MovRegHi { .. } => format!("mov{itc}"),
        InstrKind::Bx { .. } => format!("bx{itc}"),
        InstrKind::BlxReg { .. } => format!("blx{itc}"),
        InstrKind::LdrLit16 { .. } => format!("ldr{itc}"),
        InstrKind::MemReg16 { op, .. } => {
            use MemOp16::*;
            match op {
                Str => format!("str{itc}"),
                Strh => format!("strh{itc}"),
                Strb => format!("strb{itc}"),
                Ldrsb => format!("ldrsb{itc}"),
                Ldr => format!("ldr{itc}"),
                Ldrh => format!("ldrh{itc}"),
                Ldrb => format!("ldrb{itc}"),
                Ldrsh => format!("ldrsh{itc}"),
            }
        }
        InstrKind::MemImm5 { size, load, .. } => mem_mnemonic(size, load, &itc),
        InstrKind::MemSpImm8 { load, .. } => {
            if load {
                format!("ldr{itc}")
            } else {
                format!("str{itc}")
            }
        }
        InstrKind::Adr16 { .. } => format!("adr{itc}"),
        InstrKind::AddSpImm8 { .. } | InstrKind::AdjustSp { sub: false, .. } => {
            format!("add{itc}")
        }
        InstrKind::AdjustSp { sub: true, .. } => format!("sub{itc}"),
        InstrKind::Cbz { nonzero, .. } => {
            if nonzero {
                "cbnz".into()
            } else {
                "cbz".into()
            }
        }
        InstrKind::Extend16 { op, .. } => ["sxth", "sxtb", "uxth", "uxtb"][op as usize & 3].into(),
        InstrKind::Push16 { .. } => format!("push{itc}"),
        InstrKind::Pop16 { .. } => format!("pop{itc}"),
        InstrKind::Cps { disable, .. } => {
            if disable {
                "cpsid".into()
            } else {
                "cpsie".into()
            }
        }
        InstrKind::Rev16bit { op, .. } => match op {
            0 => format!("rev{itc}"),
            1 => format!("rev16{itc}"),
            _ => format!("revsh{itc}"),
        },
        InstrKind::Bkpt { .. } => "bkpt".into(),
        InstrKind::It { firstcond, mask } => {
            let mut name = String::from("it");
            let fc0 = firstcond & 1;
            let mut m = mask;
            while m & 0x7 != 0 {
                let bit = (m >> 3) & 1;
                name.push(if bit as u8 == fc0 { 't' } else { 'e' });
                m = (m << 1) & 0xF;
            }
            format!("{name} {}", cond_suffix(Cond::from_bits(firstcond)))
        }
        InstrKind::Hint16 { op } | InstrKind::Hint32 { op } => {
            let base = match op {
                HintOp::Nop => "nop",
                HintOp::Yield => "yield",
                HintOp::Wfe => "wfe",
                HintOp::Wfi => "wfi",
                HintOp::Sev => "sev",
                HintOp::Other(_) => "hint",
            };
            if instr.width == 4 {
                format!("{base}.w")
            } else {
                base.into()
            }
        }
        InstrKind::Stm16 { .. } => format!("stmia{itc}"),
        InstrKind::Ldm16 { .. } => format!("ldmia{itc}"),
        InstrKind::BCond16 { cond, .. } => format!("b{}", cond_suffix(cond)),
        InstrKind::Svc { .. } => "svc".into(),
        InstrKind::B16 { .. } => format!("b{itc}"),
        InstrKind::Udf16 { .. } => "udf".into(),
        InstrKind::MemMultiple32 { load, inc, .. } => match (load, inc) {
            (true, true) => "ldmia.w".into(),
            (true, false) => "ldmdb".into(),
            (false, true) => "stmia.w".into(),
            (false, false) => "stmdb".into(),
        },
        InstrKind::MemDual { load, .. } => {
            if load {
                "ldrd".into()
            } else {
                "strd".into()
            }
        }
        InstrKind::TableBranch { half, .. } => {
            if half {
                "tbh".into()
            } else {
                "tbb".into()
            }
        }
        InstrKind::DpReg32 {
            op,
            set_flags,
            rd,
            rn,
            ..
        }
        | InstrKind::DpImm32 {
            op,
            set_flags,
            rd,
            rn,
            ..
        } => {
            let sf = if set_flags { "s" } else { "" };
            let alias = dp32_alias(*k, op, set_flags, rd, rn);
            match alias {
                Some(a) => format!("{a}{itc}.w"),
                None => {
                    let base = match op {
                        DpOp::And => "and",
                        DpOp::Bic => "bic",
                        DpOp::Orr => "orr",
                        DpOp::Orn => "orn",
                        DpOp::Eor => "eor",
                        DpOp::Add => "add",
                        DpOp::Adc => "adc",
                        DpOp::Sbc => "sbc",
                        DpOp::Sub => "sub",
                        DpOp::Rsb => "rsb",
                    };
                    format!("{base}{sf}{itc}.w")
                }
            }
        }
        InstrKind::ShiftReg32 { op, set_flags, .. } => {
            let sf = if set_flags { "s" } else { "" };
            format!("{}{sf}{itc}.w", ["lsl", "lsr", "asr", "ror"][op as usize & 3])
        }
        InstrKind::Extend32 { op, .. } => match op {
            0b0000 => "sxth.w".into(),
            0b0001 => "uxth.w".into(),
            0b0100 => "sxtb.w".into(),
            _ => "uxtb.w".into(),
        },
        InstrKind::MemImm12 { size, load, .. }
        | InstrKind::MemImm8 { size, load, .. }
        | InstrKind::MemReg32 { size, load, .. } => {
            format!("{}.w", mem_mnemonic(size, load, ""))
        }
        InstrKind::MemLit32 { size, .. } => format!("{}.w", mem_mnemonic(size, true, "")),
        InstrKind::Mrs { .. } => "mrs".into(),
        InstrKind::Msr { .. } => "msr".into(),
        InstrKind::BCond32 { cond, .. } => format!("b{}.w", cond_suffix(cond)),
        InstrKind::B32 { .. } => "b.w".into(),
        InstrKind::Bl { .. } => "bl".into(),
        InstrKind::Barrier { op, .. } => match op {
            BarrierOp::Dsb => "dsb".into(),
            BarrierOp::Dmb => "dmb".into(),
            BarrierOp::Isb => "isb".into(),
        },
        InstrKind::Coproc { two, op, .. } => {
            let t = if two { "2" } else { "" };
            match op {
                CoprocOp::Cdp { .. } => format!("cdp{t}"),
                CoprocOp::McrMrc { to_coproc, .. } => {
                    if to_coproc {
                        format!("mcr{t}")
                    } else {
                        format!("mrc{t}")
                    }
                }
                CoprocOp::McrrMrrc { to_coproc, .. } => {
                    if to_coproc {
                        format!("mcrr{t}")
                    } else {
                        format!("mrrc{t}")
                    }
                }
                CoprocOp::LdcStc { store, .. } => {
                    if store {
                        format!("stc{t}")
                    } else {
                        format!("ldc{t}")
                    }
                }
            }
        }
        InstrKind::VmovBank { .. } => "vmov.32".into(),
    }
}

fn dp32_alias(
    kind: InstrKind,
    op: DpOp,
    set_flags: bool,
    rd: Reg,
    rn: Reg,
) -> Option<&'static str> {
    let rd_pc = rd.0 == 15;
    let rn_pc = rn.0 == 15;
    match op {
        DpOp::And if rd_pc && set_flags => Some("tst"),
        DpOp::Eor if rd_pc && set_flags => Some("teq"),
        DpOp::Add if rd_pc && set_flags => Some("cmn"),
        DpOp::Sub if rd_pc && set_flags => Some("cmp"),
        DpOp::Orr if rn_pc => {
            if matches!(kind, InstrKind::DpImm32 { .. }) {
                if set_flags {
                    Some("movs")
                } else {
                    Some("mov")
                }
            } else {
                // Register form with rn == pc is the mov/shift alias; keep
                // the shift spelled out via operands instead.
                if set_flags {
                    Some("movs")
                } else {
                    Some("mov")
                }
            }
        }
        DpOp::Orn if rn_pc => {
            if set_flags {
                Some("mvns")
            } else {
                Some("mvn")
            }
        }
        _ => None,
    }
}

fn mem_mnemonic(size: MemSize, load: bool, itc: &str) -> String {
    let base = match (size, load) {
        (MemSize::Word, true) => "ldr",
        (MemSize::Word, false) => "str",
        (MemSize::Half, true) => "ldrh",
        (MemSize::Half, false) => "strh",
        (MemSize::Byte, true) => "ldrb",
        (MemSize::Byte, false) => "strb",
        (MemSize::SignedHalf, true) => "ldrsh",
        (MemSize::SignedByte, true) => "ldrsb",
        (MemSize::SignedHalf, false) | (MemSize::SignedByte, false) => "str?",
    };
    format!("{base}{itc}")
}

fn sysm_name(sysm: u8) -> String {
    match sysm {
        0 => "apsr".into(),
        1 => "iapsr".into(),
        2 => "eapsr".into(),
        3 => "xpsr".into(),
        5 => "ipsr".into(),
        6 => "epsr".into(),
        7 => "iepsr".into(),
        8 => "msp".into(),
        9 => "psp".into(),
        16 => "primask".into(),
        17 => "basepri".into(),
        18 => "basepri_max".into(),
        19 => "faultmask".into(),
        20 => "control".into(),
        other => format!("sysm#{other}"),
    }
}

fn shift_text(shift: ImmShift) -> String {
    let (kind, amount) = shift.resolve();
    match kind {
        ShiftKind::Lsl if amount == 0 => String::new(),
        ShiftKind::Lsl => format!(", lsl #{amount}"),
        ShiftKind::Lsr => format!(", lsr #{amount}"),
        ShiftKind::Asr => format!(", asr #{amount}"),
        ShiftKind::Ror => format!(", ror #{amount}"),
        ShiftKind::Rrx => ", rrx".into(),
    }
}

pub(super) fn operands(instr: &Instruction) -> String {
    let k = &instr.kind;
    match *k {
        InstrKind::ShiftImm16 { op, rd, rm, imm5 } => {
            if op == 0 && imm5 == 0 {
                format!("{}, {}", reg_name(rd), reg_name(rm))
            } else {
                let amount = match (op, imm5) {
                    (1, 0) | (2, 0) => 32,
                    _ => imm5 as u32,
                };
                format!("{}, {}, #{}", reg_name(rd), reg_name(rm), amount)
            }
        }
        InstrKind::AddSubReg16 { rd, rn, rm, .. } => {
            format!("{}, {}, {}", reg_name(rd), reg_name(rn), reg_name(rm))
        }
        InstrKind::AddSubImm3 { rd, rn, imm3, .. } => {
            format!("{}, {}, #{}", reg_name(rd), reg_name(rn), imm3)
        }
        InstrKind::MovImm8 { rd, imm8 } => format!("{}, #{}", reg_name(rd), imm8),
        InstrKind::CmpImm8 { rn, imm8 } => format!("{}, #{}", reg_name(rn), imm8),
        InstrKind::AddSubImm8 { rdn, imm8, .. } => format!("{}, #{}", reg_name(rdn), imm8),
        InstrKind::Dp16 { op, rdn, rm } => {
            if op == Dp16Op::Rsb {
                format!("{}, {}, #0", reg_name(rdn), reg_name(rm))
            } else {
                format!("{}, {}", reg_name(rdn), reg_name(rm))
            }
        }
        InstrKind::AddRegHi { rdn, rm } => format!("{}, {}", reg_name(rdn), reg_name(rm)),
        InstrKind::CmpRegHi { rn, rm } => format!("{}, {}", reg_name(rn), reg_name(rm)),
        InstrKind::MovRegHi { rd, rm } => format!("{}, {}", reg_name(rd), reg_name(rm)),
        InstrKind::Bx { rm } | InstrKind::BlxReg { rm } => reg_name(rm),
        InstrKind::LdrLit16 { rt, imm8 } => {
            format!("{}, [pc, #{}]", reg_name(rt), (imm8 as u32) * 4)
        }
        InstrKind::MemReg16 { rt, rn, rm, .. } => {
            format!("{}, [{}, {}]", reg_name(rt), reg_name(rn), reg_name(rm))
        }
        InstrKind::MemImm5 {
            size,
            rt,
            rn,
            imm5,
            ..
        } => {
            let off = imm5 as u32 * size.bytes();
            if off == 0 {
                format!("{}, [{}]", reg_name(rt), reg_name(rn))
            } else {
                format!("{}, [{}, #{}]", reg_name(rt), reg_name(rn), off)
            }
        }
        InstrKind::MemSpImm8 { rt, imm8, .. } => {
            format!("{}, [sp, #{}]", reg_name(rt), imm8 as u32 * 4)
        }
        InstrKind::Adr16 { rd, imm8 } => format!("{}, #{}", reg_name(rd), imm8 as u32 * 4),
        InstrKind::AddSpImm8 { rd, imm8 } => {
            format!("{}, sp, #{}", reg_name(rd), imm8 as u32 * 4)
        }
        InstrKind::AdjustSp { imm7, .. } => format!("sp, #{}", imm7 as u32 * 4),
        InstrKind::Cbz { rn, .. } => format!(
            "{}, {:#x}",
            reg_name(rn),
            instr.branch_target().unwrap_or(0)
        ),
        InstrKind::Extend16 { rd, rm, .. } | InstrKind::Rev16bit { rd, rm, .. } => {
            format!("{}, {}", reg_name(rd), reg_name(rm))
        }
        InstrKind::Push16 { regs } => {
            let mask = (regs & 0xFF) | ((regs & 0x100) << 6); // bit 8 -> lr
            reglist(mask)
        }
        InstrKind::Pop16 { regs } => {
            let mask = (regs & 0xFF) | ((regs & 0x100) << 7); // bit 8 -> pc
            reglist(mask)
        }
        InstrKind::Cps {
            affect_pri,
            affect_fault,
            ..
        } => {
            let mut t = String::new();
            if affect_pri {
                t.push('i');
            }
            if affect_fault {
                t.push('f');
            }
            t
        }
        InstrKind::Bkpt { imm8 } | InstrKind::Svc { imm8 } | InstrKind::Udf16 { imm8 } => {
            format!("#{imm8}")
        }
        InstrKind::It { .. } => String::new(),
        InstrKind::Hint16 { op } | InstrKind::Hint32 { op } => match op {
            HintOp::Other(v) => format!("#{v}"),
            _ => String::new(),
        },
        InstrKind::Stm16 { rn, regs } => {
            format!("{}!, {}", reg_name(rn), reglist(regs as u16))
        }
        InstrKind::Ldm16 { rn, regs } => {
            // Writeback unless rn is also loaded.
            let wb = if regs & (1 << rn.0) == 0 { "!" } else { "" };
            format!("{}{}, {}", reg_name(rn), wb, reglist(regs as u16))
        }
        InstrKind::BCond16 { .. } | InstrKind::B16 { .. } => {
            format!("{:#x}", instr.branch_target().unwrap_or(0))
        }
        InstrKind::MemMultiple32 {
            writeback, rn, regs, ..
        } => {
            let wb = if writeback { "!" } else { "" };
            format!("{}{}, {}", reg_name(rn), wb, reglist(regs))
        }
        InstrKind::MemDual {
            p,
            u,
            w,
            rt,
            rt2,
            rn,
            imm8,
            ..
        } => {
            let off = imm8 as u32 * 4;
            let sign = if u { "" } else { "-" };
            if p {
                let wb = if w { "!" } else { "" };
                format!(
                    "{}, {}, [{}, #{}{}]{}",
                    reg_name(rt),
                    reg_name(rt2),
                    reg_name(rn),
                    sign,
                    off,
                    wb
                )
            } else {
                format!(
                    "{}, {}, [{}], #{}{}",
                    reg_name(rt),
                    reg_name(rt2),
                    reg_name(rn),
                    sign,
                    off
                )
            }
        }
        InstrKind::TableBranch { half, rn, rm } => {
            if half {
                format!("[{}, {}, lsl #1]", reg_name(rn), reg_name(rm))
            } else {
                format!("[{}, {}]", reg_name(rn), reg_name(rm))
            }
        }
        InstrKind::DpReg32 {
            op,
            set_flags,
            rd,
            rn,
            rm,
            shift,
        } => {
            let st = shift_text(shift);
            if dp32_alias(*k, op, set_flags, rd, rn).is_some() {
                if rd.0 == 15 {
                    format!("{}, {}{}", reg_name(rn), reg_name(rm), st)
                } else {
                    format!("{}, {}{}", reg_name(rd), reg_name(rm), st)
                }
            } else {
                format!("{}, {}, {}{}", reg_name(rd), reg_name(rn), reg_name(rm), st)
            }
        }
        InstrKind::DpImm32 {
            op,
            set_flags,
            rd,
            rn,
            imm12,
        } => {
            let (val, _) = thumb_expand_imm_c(imm12, false);
            if dp32_alias(*k, op, set_flags, rd, rn).is_some() {
                if rd.0 == 15 {
                    format!("{}, #{}", reg_name(rn), val)
                } else {
                    format!("{}, #{}", reg_name(rd), val)
                }
            } else {
                format!("{}, {}, #{}", reg_name(rd), reg_name(rn), val)
            }
        }
        InstrKind::ShiftReg32 { rd, rn, rm, .. } => {
            format!("{}, {}, {}", reg_name(rd), reg_name(rn), reg_name(rm))
        }
        InstrKind::Extend32 { rd, rm, rotate, .. } => {
            if rotate == 0 {
                format!("{}, {}", reg_name(rd), reg_name(rm))
            } else {
                format!("{}, {}, ror #{}", reg_name(rd), reg_name(rm), rotate as u32 * 8)
            }
        }
        InstrKind::MemImm12 { rt, rn, imm12, .. } => {
            if imm12 == 0 {
                format!("{}, [{}]", reg_name(rt), reg_name(rn))
            } else {
                format!("{}, [{}, #{}]", reg_name(rt), reg_name(rn), imm12)
            }
        }
        InstrKind::MemImm8 {
            rt,
            rn,
            p,
            u,
            w,
            imm8,
            ..
        } => {
            let sign = if u { "" } else { "-" };
            if p {
                let wb = if w { "!" } else { "" };
                format!("{}, [{}, #{}{}]{}", reg_name(rt), reg_name(rn), sign, imm8, wb)
            } else {
                format!("{}, [{}], #{}{}", reg_name(rt), reg_name(rn), sign, imm8)
            }
        }
        InstrKind::MemReg32 {
            rt, rn, rm, shift, ..
        } => {
            if shift == 0 {
                format!("{}, [{}, {}]", reg_name(rt), reg_name(rn), reg_name(rm))
            } else {
                format!(
                    "{}, [{}, {}, lsl #{}]",
                    reg_name(rt),
                    reg_name(rn),
                    reg_name(rm),
                    shift
                )
            }
        }
        InstrKind::MemLit32 { rt, u, imm12, .. } => {
            let sign = if u { "" } else { "-" };
            format!("{}, [pc, #{}{}]", reg_name(rt), sign, imm12)
        }
        InstrKind::Mrs { rd, sysm } => {
            format!("{}, {}", reg_name(rd), sysm_name(sysm))
        }
        InstrKind::Msr { rn, sysm, .. } => {
            format!("{}, {}", sysm_name(sysm), reg_name(rn))
        }
        InstrKind::BCond32 { .. } | InstrKind::B32 { .. } | InstrKind::Bl { .. } => {
            format!("{:#x}", instr.branch_target().unwrap_or(0))
        }
        InstrKind::Barrier { option, .. } => {
            if option == 0xF {
                "sy".into()
            } else {
                format!("#{option}")
            }
        }
        InstrKind::Coproc { coproc, op, .. } => match op {
            CoprocOp::Cdp {
                opc1,
                crd,
                crn,
                crm,
                opc2,
            } => format!("p{coproc}, #{opc1}, c{crd}, c{crn}, c{crm}, #{opc2}"),
            CoprocOp::McrMrc {
                opc1,
                rt,
                crn,
                crm,
                opc2,
                ..
            } => format!(
                "p{coproc}, #{opc1}, {}, c{crn}, c{crm}, #{opc2}",
                reg_name(rt)
            ),
            CoprocOp::McrrMrrc { opc1, rt, rt2, crm, .. } => format!(
                "p{coproc}, #{opc1}, {}, {}, c{crm}",
                reg_name(rt),
                reg_name(rt2)
            ),
            CoprocOp::LdcStc { crd, rn, imm8, u, p, w, .. } => {
                let sign = if u { "" } else { "-" };
                let off = imm8 as u32 * 4;
                if p {
                    let wb = if w { "!" } else { "" };
                    format!("p{coproc}, c{crd}, [{}, #{sign}{off}]{wb}", reg_name(rn))
                } else {
                    format!("p{coproc}, c{crd}, [{}], #{sign}{off}", reg_name(rn))
                }
            }
        },
        InstrKind::VmovBank { to_bank, cell, rt } => {
            let d = 16 + (cell as u8 >> 1);
            let lane = cell as u8 & 1;
            if to_bank {
                format!("d{d}[{lane}], {}", reg_name(rt))
            } else {
                format!("{}, d{d}[{lane}]", reg_name(rt))
            }
        }
    }
}
