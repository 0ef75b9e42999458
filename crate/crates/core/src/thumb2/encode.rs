//! Encoder: reassembles the raw bits from a structured [`InstrKind`].
//! For every supported encoding, `encode(decode(raw)) == raw`.

use super::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("operand out of encodable range: {0}")]
    Range(&'static str),
}

fn hw(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Encode an instruction kind into little-endian bytes (2 or 4).
pub fn encode(kind: &InstrKind) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(4);
    match *kind {
        // ---- 16-bit ----
        InstrKind::ShiftImm16 { op, rd, rm, imm5 } => {
            check(op < 3, "shift op")?;
            check(rd.0 < 8 && rm.0 < 8 && imm5 < 32, "low reg / imm5")?;
            hw(
                &mut out,
                ((op as u16) << 11) | ((imm5 as u16) << 6) | ((rm.0 as u16) << 3) | rd.0 as u16,
            );
        }
        InstrKind::AddSubReg16 { sub, rd, rn, rm } => {
            check(rd.0 < 8 && rn.0 < 8 && rm.0 < 8, "low reg")?;
            hw(
                &mut out,
                0x1800
                    | ((sub as u16) << 9)
                    | ((rm.0 as u16) << 6)
                    | ((rn.0 as u16) << 3)
                    | rd.0 as u16,
            );
        }
        InstrKind::AddSubImm3 { sub, rd, rn, imm3 } => {
            check(rd.0 < 8 && rn.0 < 8 && imm3 < 8, "low reg / imm3")?;
            hw(
                &mut out,
                0x1C00
                    | ((sub as u16) << 9)
                    | ((imm3 as u16) << 6)
                    | ((rn.0 as u16) << 3)
                    | rd.0 as u16,
            );
        }
        InstrKind::MovImm8 { rd, imm8 } => {
            check(rd.0 < 8, "low reg")?;
            hw(&mut out, 0x2000 | ((rd.0 as u16) << 8) | imm8 as u16);
        }
        InstrKind::CmpImm8 { rn, imm8 } => {
            check(rn.0 < 8, "low reg")?;
            hw(&mut out, 0x2800 | ((rn.0 as u16) << 8) | imm8 as u16);
        }
        InstrKind::AddSubImm8 { sub, rdn, imm8 } => {
            check(rdn.0 < 8, "low reg")?;
            hw(
                &mut out,
                0x3000 | ((sub as u16) << 11) | ((rdn.0 as u16) << 8) | imm8 as u16,
            );
        }
        InstrKind::Dp16 { op, rdn, rm } => {
            check(rdn.0 < 8 && rm.0 < 8, "low reg")?;
            hw(
                &mut out,
                0x4000 | ((op as u16) << 6) | ((rm.0 as u16) << 3) | rdn.0 as u16,
            );
        }
        InstrKind::AddRegHi { rdn, rm } => {
            hw(
                &mut out,
                0x4400 | (((rdn.0 as u16 >> 3) & 1) << 7) | ((rm.0 as u16) << 3) | (rdn.0 as u16 & 7),
            );
        }
        InstrKind::CmpRegHi { rn, rm } => {
            hw(
                &mut out,
                0x4500 | (((rn.0 as u16 >> 3) & 1) << 7) | ((rm.0 as u16) << 3) | (rn.0 as u16 & 7),
            );
        }
        InstrKind::MovRegHi { rd, rm } => {
            hw(
                &mut out,
                0x4600 | (((rd.0 as u16 >> 3) & 1) << 7) | ((rm.0 as u16) << 3) | (rd.0 as u16 & 7),
            );
        }
        InstrKind::Bx { rm } => hw(&mut out, 0x4700 | ((rm.0 as u16) << 3)),
        InstrKind::BlxReg { rm } => hw(&mut out, 0x4780 | ((rm.0 as u16) << 3)),
        InstrKind::LdrLit16 { rt, imm8 } => {
            check(rt.0 < 8, "low reg")?;
            hw(&mut out, 0x4800 | ((rt.0 as u16) << 8) | imm8 as u16);
        }
        InstrKind::MemReg16 { op, rt, rn, rm } => {
            check(rt.0 < 8 && rn.0 < 8 && rm.0 < 8, "low reg")?;
            hw(
                &mut out,
                0x5000
                    | ((op as u16) << 9)
                    | ((rm.0 as u16) << 6)
                    | ((rn.0 as u16) << 3)
                    | rt.0 as u16,
            );
        }
        InstrKind::MemImm5 {
            size,
            load,
            rt,
            rn,
            imm5,
        } => {
            check(rt.0 < 8 && rn.0 < 8 && imm5 < 32, "low reg / imm5")?;
            let base = match size {
                MemSize::Word => 0x6000,
                MemSize::Byte => 0x7000,
                MemSize::Half => 0x8000,
                _ => return Err(EncodeError::Range("signed imm5 form")),
            };
            hw(
                &mut out,
                base | ((load as u16) << 11)
                    | ((imm5 as u16) << 6)
                    | ((rn.0 as u16) << 3)
                    | rt.0 as u16,
            );
        }
        InstrKind::MemSpImm8 { load, rt, imm8 } => {
            check(rt.0 < 8, "low reg")?;
            hw(
                &mut out,
                0x9000 | ((load as u16) << 11) | ((rt.0 as u16) << 8) | imm8 as u16,
            );
        }
        InstrKind::Adr16 { rd, imm8 } => {
            check(rd.0 < 8, "low reg")?;
            hw(&mut out, 0xA000 | ((rd.0 as u16) << 8) | imm8 as u16);
        }
        InstrKind::AddSpImm8 { rd, imm8 } => {
            check(rd.0 < 8, "low reg")?;
            hw(&mut out, 0xA800 | ((rd.0 as u16) << 8) | imm8 as u16);
        }
        InstrKind::AdjustSp { sub, imm7 } => {
            check(imm7 < 128, "imm7")?;
            hw(&mut out, 0xB000 | ((sub as u16) << 7) | imm7 as u16);
        }
        InstrKind::Cbz { nonzero, rn, imm6 } => {
            check(rn.0 < 8 && imm6 < 64, "low reg / imm6")?;
            let i = (imm6 >> 5) as u16;
            let imm5 = (imm6 & 0x1F) as u16;
            hw(
                &mut out,
                0xB100
                    | ((nonzero as u16) << 11)
                    | (i << 9)
                    | (imm5 << 3)
                    | rn.0 as u16,
            );
        }
        InstrKind::Extend16 { op, rd, rm } => {
            check(op < 4 && rd.0 < 8 && rm.0 < 8, "extend fields")?;
            hw(
                &mut out,
                0xB200 | ((op as u16) << 6) | ((rm.0 as u16) << 3) | rd.0 as u16,
            );
        }
        InstrKind::Push16 { regs } => {
            check(regs & !0x01FF == 0, "push reg list")?;
            hw(&mut out, 0xB400 | regs);
        }
        InstrKind::Pop16 { regs } => {
            check(regs & !0x01FF == 0, "pop reg list")?;
            hw(&mut out, 0xBC00 | regs);
        }
        InstrKind::Cps {
            disable,
            affect_pri,
            affect_fault,
        } => {
            hw(
                &mut out,
                0xB660 | ((disable as u16) << 4) | ((affect_pri as u16) << 1) | affect_fault as u16,
            );
        }
        InstrKind::Rev16bit { op, rd, rm } => {
            check(op != 2 && op < 4 && rd.0 < 8 && rm.0 < 8, "rev fields")?;
            hw(
                &mut out,
                0xBA00 | ((op as u16) << 6) | ((rm.0 as u16) << 3) | rd.0 as u16,
            );
        }
        InstrKind::Bkpt { imm8 } => hw(&mut out, 0xBE00 | imm8 as u16),
        InstrKind::It { firstcond, mask } => {
            check(mask != 0 && mask < 16 && firstcond < 15, "it fields")?;
            hw(&mut out, 0xBF00 | ((firstcond as u16) << 4) | mask as u16);
        }
        InstrKind::Hint16 { op } => {
            let bits = op.bits();
            check(bits < 16, "hint")?;
            hw(&mut out, 0xBF00 | ((bits as u16) << 4));
        }
        InstrKind::Stm16 { rn, regs } => {
            check(rn.0 < 8, "low reg")?;
            hw(&mut out, 0xC000 | ((rn.0 as u16) << 8) | regs as u16);
        }
        InstrKind::Ldm16 { rn, regs } => {
            check(rn.0 < 8, "low reg")?;
            hw(&mut out, 0xC800 | ((rn.0 as u16) << 8) | regs as u16);
        }
        InstrKind::BCond16 { cond, imm8 } => {
            check(cond != Cond::Al, "b<cond> condition")?;
            hw(&mut out, 0xD000 | ((cond.bits() as u16) << 8) | imm8 as u16);
        }
        InstrKind::Udf16 { imm8 } => hw(&mut out, 0xDE00 | imm8 as u16),
        InstrKind::Svc { imm8 } => hw(&mut out, 0xDF00 | imm8 as u16),
        InstrKind::B16 { imm11 } => {
            check(imm11 < 0x800, "imm11")?;
            hw(&mut out, 0xE000 | imm11);
        }

        // ---- 32-bit ----
        InstrKind::MemMultiple32 {
            load,
            inc,
            writeback,
            rn,
            regs,
        } => {
            let opc: u16 = if inc { 0b01 } else { 0b10 };
            hw(
                &mut out,
                0xE800 | (opc << 7) | ((writeback as u16) << 5) | ((load as u16) << 4) | rn.0 as u16,
            );
            hw(&mut out, regs);
        }
        InstrKind::MemDual {
            load,
            p,
            u,
            w,
            rt,
            rt2,
            rn,
            imm8,
        } => {
            check(p || w, "dual p/w")?;
            hw(
                &mut out,
                0xE840
                    | ((p as u16) << 8)
                    | ((u as u16) << 7)
                    | ((w as u16) << 5)
                    | ((load as u16) << 4)
                    | rn.0 as u16,
            );
            hw(
                &mut out,
                ((rt.0 as u16) << 12) | ((rt2.0 as u16) << 8) | imm8 as u16,
            );
        }
        InstrKind::TableBranch { half, rn, rm } => {
            hw(&mut out, 0xE8D0 | rn.0 as u16);
            hw(&mut out, 0xF000 | ((half as u16) << 4) | rm.0 as u16);
        }
        InstrKind::DpReg32 {
            op,
            set_flags,
            rd,
            rn,
            rm,
            shift,
        } => {
            check(shift.imm5 < 32 && shift.ty < 4, "shift fields")?;
            hw(
                &mut out,
                0xEA00 | ((op.bits() as u16) << 5) | ((set_flags as u16) << 4) | rn.0 as u16,
            );
            let imm3 = (shift.imm5 >> 2) as u16;
            let imm2 = (shift.imm5 & 3) as u16;
            hw(
                &mut out,
                (imm3 << 12) | ((rd.0 as u16) << 8) | (imm2 << 6) | ((shift.ty as u16) << 4) | rm.0 as u16,
            );
        }
        InstrKind::DpImm32 {
            op,
            set_flags,
            rd,
            rn,
            imm12,
        } => {
            check(imm12 < 0x1000, "imm12")?;
            let i = (imm12 >> 11) & 1;
            let imm3 = (imm12 >> 8) & 7;
            let imm8 = imm12 & 0xFF;
            hw(
                &mut out,
                0xF000 | (i << 10) | ((op.bits() as u16) << 5) | ((set_flags as u16) << 4) | rn.0 as u16,
            );
            hw(&mut out, (imm3 << 12) | ((rd.0 as u16) << 8) | imm8);
        }
        InstrKind::ShiftReg32 {
            op,
            set_flags,
            rd,
            rn,
            rm,
        } => {
            check(op < 4, "shift op")?;
            hw(
                &mut out,
                0xFA00 | ((op as u16) << 5) | ((set_flags as u16) << 4) | rn.0 as u16,
            );
            hw(&mut out, 0xF000 | ((rd.0 as u16) << 8) | rm.0 as u16);
        }
        InstrKind::Extend32 { op, rd, rm, rotate } => {
            check(
                matches!(op, 0b0000 | 0b0001 | 0b0100 | 0b0101) && rotate < 4,
                "extend fields",
            )?;
            hw(&mut out, 0xFA0F | ((op as u16) << 4));
            hw(
                &mut out,
                0xF080 | ((rd.0 as u16) << 8) | ((rotate as u16) << 4) | rm.0 as u16,
            );
        }
        InstrKind::MemImm12 {
            size,
            load,
            rt,
            rn,
            imm12,
        } => {
            check(imm12 < 0x1000, "imm12")?;
            check(rn.0 != 15, "rn != pc")?;
            hw(&mut out, 0xF880 | mem_size_bits(size) | ((load as u16) << 4) | rn.0 as u16);
            hw(&mut out, ((rt.0 as u16) << 12) | imm12);
        }
        InstrKind::MemImm8 {
            size,
            load,
            rt,
            rn,
            p,
            u,
            w,
            imm8,
        } => {
            check(p || w, "imm8 p/w")?;
            check(!(p && u && !w), "unprivileged form"
            )?;
            check(rn.0 != 15, "rn != pc")?;
            hw(&mut out, 0xF800 | mem_size_bits(size) | ((load as u16) << 4) | rn.0 as u16);
            hw(
                &mut out,
                ((rt.0 as u16) << 12)
                    | 0x0800
                    | ((p as u16) << 10)
                    | ((u as u16) << 9)
                    | ((w as u16) << 8)
                    | imm8 as u16,
            );
        }
        InstrKind::MemReg32 {
            size,
            load,
            rt,
            rn,
            rm,
            shift,
        } => {
            check(shift < 4, "lsl shift")?;
            check(rn.0 != 15, "rn != pc")?;
            hw(&mut out, 0xF800 | mem_size_bits(size) | ((load as u16) << 4) | rn.0 as u16);
            hw(
                &mut out,
                ((rt.0 as u16) << 12) | ((shift as u16) << 4) | rm.0 as u16,
            );
        }
        InstrKind::MemLit32 { size, rt, u, imm12 } => {
            check(imm12 < 0x1000, "imm12")?;
            hw(
                &mut out,
                0xF81F | mem_size_bits(size) | ((u as u16) << 7),
            );
            hw(&mut out, ((rt.0 as u16) << 12) | imm12);
        }
        InstrKind::Mrs { rd, sysm } => {
            hw(&mut out, 0xF3EF);
            hw(&mut out, 0x8000 | ((rd.0 as u16) << 8) | sysm as u16);
        }
        InstrKind::Msr { rn, mask, sysm } => {
            check(mask < 4, "msr mask")?;
            hw(&mut out, 0xF380 | rn.0 as u16);
            hw(&mut out, 0x8000 | ((mask as u16) << 10) | sysm as u16);
        }
        InstrKind::BCond32 { cond, offset } => {
            check(cond != Cond::Al, "b<cond> condition")?;
            check((-(1 << 19)..(1 << 19)).contains(&offset), "bcond.w offset")?;
            let off = offset as u32 & 0xFFFFF;
            let s = (off >> 19) & 1;
            let j2 = (off >> 18) & 1;
            let j1 = (off >> 17) & 1;
            let imm6 = (off >> 11) & 0x3F;
            let imm11 = off & 0x7FF;
            hw(
                &mut out,
                0xF000 | ((s as u16) << 10) | ((cond.bits() as u16) << 6) | imm6 as u16,
            );
            hw(
                &mut out,
                0x8000 | ((j1 as u16) << 13) | ((j2 as u16) << 11) | imm11 as u16,
            );
        }
        InstrKind::B32 { offset } => {
            encode_bl_style(&mut out, offset, false)?;
        }
        InstrKind::Bl { offset } => {
            encode_bl_style(&mut out, offset, true)?;
        }
        InstrKind::Hint32 { op } => {
            hw(&mut out, 0xF3AF);
            hw(&mut out, 0x8000 | op.bits() as u16);
        }
        InstrKind::Barrier { op, option } => {
            check(option < 16, "barrier option")?;
            let opc: u16 = match op {
                BarrierOp::Dsb => 0b0100,
                BarrierOp::Dmb => 0b0101,
                BarrierOp::Isb => 0b0110,
            };
            hw(&mut out, 0xF3BF);
            hw(&mut out, 0x8F00 | (opc << 4) | option as u16);
        }
        InstrKind::Coproc { two, coproc, op } => {
            encode_coproc(&mut out, two, coproc, &op)?;
        }
        InstrKind::VmovBank { to_bank, cell, rt } => {
            let lane = cell as u8;
            let vd = (lane >> 1) as u16; // 0 => d16, 1 => d17
            let lane_hi = (lane & 1) as u16;
            hw(
                &mut out,
                0xEE00 | (lane_hi << 5) | (((!to_bank) as u16) << 4) | vd,
            );
            hw(&mut out, ((rt.0 as u16) << 12) | 0x0B90);
        }
    }
    Ok(out)
}

fn check(ok: bool, what: &'static str) -> Result<(), EncodeError> {
    if ok {
        Ok(())
    } else {
        Err(EncodeError::Range(what))
    }
}

fn mem_size_bits(size: MemSize) -> u16 {
    match size {
        MemSize::Byte => 0b00 << 5,
        MemSize::SignedByte => (1 << 8) | (0b00 << 5),
        MemSize::Half => 0b01 << 5,
        MemSize::SignedHalf => (1 << 8) | (0b01 << 5),
        MemSize::Word => 0b10 << 5,
    }
}

fn encode_bl_style(out: &mut Vec<u8>, offset: i32, link: bool) -> Result<(), EncodeError> {
    check((-(1 << 23)..(1 << 23)).contains(&offset), "branch offset")?;
    let off = offset as u32 & 0xFFFFFF;
    let s = (off >> 23) & 1;
    let i1 = (off >> 22) & 1;
    let i2 = (off >> 21) & 1;
    let j1 = (!(i1 ^ s)) & 1;
    let j2 = (!(i2 ^ s)) & 1;
    let imm10 = (off >> 11) & 0x3FF;
    let imm11 = off & 0x7FF;
    hw(out, 0xF000 | ((s as u16) << 10) | imm10 as u16);
    let base: u16 = if link { 0xD000 } else { 0x9000 };
    hw(
        out,
        0x8000 | base | ((j1 as u16) << 13) | ((j2 as u16) << 11) | imm11 as u16,
    );
    Ok(())
}

fn encode_coproc(
    out: &mut Vec<u8>,
    two: bool,
    coproc: u8,
    op: &CoprocOp,
) -> Result<(), EncodeError> {
    check(coproc < 16 && coproc != 10 && coproc != 11, "coproc number")?;
    let prefix: u16 = if two { 0xF000 } else { 0xE000 };
    match *op {
        CoprocOp::Cdp {
            opc1,
            crd,
            crn,
            crm,
            opc2,
        } => {
            check(opc1 < 16 && crd < 16 && crn < 16 && crm < 16 && opc2 < 8, "cdp fields")?;
            hw(out, prefix | 0x0E00 | ((opc1 as u16) << 4) | crn as u16);
            hw(
                out,
                ((crd as u16) << 12) | ((coproc as u16) << 8) | ((opc2 as u16) << 5) | crm as u16,
            );
        }
        CoprocOp::McrMrc {
            to_coproc,
            opc1,
            rt,
            crn,
            crm,
            opc2,
        } => {
            check(opc1 < 8 && crn < 16 && crm < 16 && opc2 < 8, "mcr fields")?;
            hw(
                out,
                prefix | 0x0E00 | ((opc1 as u16) << 5) | (((!to_coproc) as u16) << 4) | crn as u16,
            );
            hw(
                out,
                ((rt.0 as u16) << 12)
                    | ((coproc as u16) << 8)
                    | ((opc2 as u16) << 5)
                    | 0x10
                    | crm as u16,
            );
        }
        CoprocOp::McrrMrrc {
            to_coproc,
            opc1,
            rt,
            rt2,
            crm,
        } => {
            check(opc1 < 16 && crm < 16, "mcrr fields")?;
            hw(
                out,
                prefix | 0x0C40 | (((!to_coproc) as u16) << 4) | rt2.0 as u16,
            );
            hw(
                out,
                ((rt.0 as u16) << 12) | ((coproc as u16) << 8) | ((opc1 as u16) << 4) | crm as u16,
            );
        }
        CoprocOp::LdcStc {
            store,
            p,
            u,
            d,
            w,
            crd,
            rn,
            imm8,
        } => {
            check(crd < 16, "ldc/stc fields")?;
            // p/u/d/w = 0/0/x/0 collides with the mcrr/undefined space.
            check(p || u || w, "ldc/stc addressing mode")?;
            hw(
                out,
                prefix
                    | 0x0C00
                    | ((p as u16) << 8)
                    | ((u as u16) << 7)
                    | ((d as u16) << 6)
                    | ((w as u16) << 5)
                    | (((!store) as u16) << 4)
                    | rn.0 as u16,
            );
            hw(out, ((crd as u16) << 12) | ((coproc as u16) << 8) | imm8 as u16);
        }
    }
    Ok(())
}

/// Encode a direct branch to `target` from an instruction at `addr`,
/// choosing the 16-bit form when it fits and widening to the 32-bit form
/// otherwise (used by code emitters, not by the round-trip path).
pub fn encode_branch_auto(addr: u32, target: u32) -> Result<Vec<u8>, EncodeError> {
    let off = (target as i64 - (addr as i64 + 4)) >> 1;
    if (-(1 << 10)..(1 << 10)).contains(&off) {
        encode(&InstrKind::B16 {
            imm11: (off as u16) & 0x7FF,
        })
    } else if (-(1 << 23)..(1 << 23)).contains(&off) {
        encode(&InstrKind::B32 { offset: off as i32 })
    } else {
        Err(EncodeError::Range("branch distance"))
    }
}
