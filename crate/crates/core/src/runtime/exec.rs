//! Instruction semantics for the supported Thumb-2 subset.

use super::executor::{Executor, StepEvent};
use super::{CrashKind, Flags, Mode};
use crate::rewriter::vendor_service;
use crate::thumb2::{
    BankCell, Cond, Dp16Op, DpOp, HintOp, ImmShift, Instruction, InstrKind, ItState, MemOp16,
    MemSize, Reg, ShiftKind, SpecialReg,
};

pub(super) fn cond_passed(cond: Cond, f: Flags) -> bool {
    match cond {
        Cond::Eq => f.z,
        Cond::Ne => !f.z,
        Cond::Cs => f.c,
        Cond::Cc => !f.c,
        Cond::Mi => f.n,
        Cond::Pl => !f.n,
        Cond::Vs => f.v,
        Cond::Vc => !f.v,
        Cond::Hi => f.c && !f.z,
        Cond::Ls => !f.c || f.z,
        Cond::Ge => f.n == f.v,
        Cond::Lt => f.n != f.v,
        Cond::Gt => !f.z && f.n == f.v,
        Cond::Le => f.z || f.n != f.v,
        Cond::Al => true,
    }
}

pub(super) fn add_with_carry(x: u32, y: u32, carry_in: bool) -> (u32, bool, bool) {
    let sum = x as u64 + y as u64 + carry_in as u64;
    let result = sum as u32;
    let carry = sum > u32::MAX as u64;
    let overflow = ((x ^ result) & (y ^ result)) >> 31 != 0;
    (result, carry, overflow)
}

pub(super) fn shift_c(value: u32, kind: ShiftKind, amount: u32, carry_in: bool) -> (u32, bool) {
    match kind {
        ShiftKind::Lsl => match amount {
            0 => (value, carry_in),
            1..=31 => (value << amount, (value >> (32 - amount)) & 1 != 0),
            32 => (0, value & 1 != 0),
            _ => (0, false),
        },
        ShiftKind::Lsr => match amount {
            0 => (value, carry_in),
            1..=31 => (value >> amount, (value >> (amount - 1)) & 1 != 0),
            32 => (0, value >> 31 != 0),
            _ => (0, false),
        },
        ShiftKind::Asr => match amount {
            0 => (value, carry_in),
            1..=31 => (
                ((value as i32) >> amount) as u32,
                ((value as i32) >> (amount - 1)) & 1 != 0,
            ),
            _ => {
                let sign = value >> 31 != 0;
                (if sign { u32::MAX } else { 0 }, sign)
            }
        },
        ShiftKind::Ror => {
            if amount == 0 {
                (value, carry_in)
            } else {
                let r = value.rotate_right(amount % 32);
                (r, r >> 31 != 0)
            }
        }
        ShiftKind::Rrx => {
            let r = ((carry_in as u32) << 31) | (value >> 1);
            (r, value & 1 != 0)
        }
    }
}

fn align4(v: u32) -> u32 {
    v & !3
}

impl Executor {
    fn set_nz(&mut self, result: u32) {
        self.cpu.flags.n = result >> 31 != 0;
        self.cpu.flags.z = result == 0;
    }

    fn set_nzc(&mut self, result: u32, c: bool) {
        self.set_nz(result);
        self.cpu.flags.c = c;
    }

    fn set_nzcv(&mut self, result: u32, c: bool, v: bool) {
        self.set_nzc(result, c);
        self.cpu.flags.v = v;
    }

    /// Interworking branch: magic values in handler mode trigger the
    /// exception return routine, never a real branch.
    pub(super) fn branch_interworking(&mut self, value: u32) -> Result<(), CrashKind> {
        self.branched = true;
        if super::exceptions::is_exc_return_magic(&self.cpu, value) {
            return self.do_exception_return(value);
        }
        if value & 1 == 0 {
            return Err(CrashKind::InvalidState { target: value });
        }
        self.cpu.r[15] = value & !1;
        Ok(())
    }

    fn branch_to(&mut self, target: u32) {
        self.branched = true;
        self.cpu.r[15] = target & !1;
    }

    fn mem_load(&mut self, addr: u32, size: MemSize) -> Result<u32, CrashKind> {
        let raw = self
            .read_mem(addr, size.bytes() as u8)
            .map_err(CrashKind::from_fault)?;
        Ok(match size {
            MemSize::Byte | MemSize::Word => raw,
            MemSize::Half => raw,
            MemSize::SignedByte => raw as u8 as i8 as i32 as u32,
            MemSize::SignedHalf => raw as u16 as i16 as i32 as u32,
        })
    }

    fn mem_store(&mut self, addr: u32, size: MemSize, value: u32) -> Result<(), CrashKind> {
        self.write_mem(addr, size.bytes() as u8, value)
            .map_err(CrashKind::from_fault)
    }

    fn dp32(
        &mut self,
        op: DpOp,
        set_flags: bool,
        rd: Reg,
        rn_val: u32,
        op2: u32,
        shifter_carry: bool,
    ) -> Result<(), CrashKind> {
        enum Out {
            Logical(u32),
            Arith(u32, bool, bool),
        }
        let out = match op {
            DpOp::And => Out::Logical(rn_val & op2),
            DpOp::Bic => Out::Logical(rn_val & !op2),
            DpOp::Orr => Out::Logical(rn_val | op2),
            DpOp::Orn => Out::Logical(rn_val | !op2),
            DpOp::Eor => Out::Logical(rn_val ^ op2),
            DpOp::Add => {
                let (r, c, v) = add_with_carry(rn_val, op2, false);
                Out::Arith(r, c, v)
            }
            DpOp::Adc => {
                let (r, c, v) = add_with_carry(rn_val, op2, self.cpu.flags.c);
                Out::Arith(r, c, v)
            }
            DpOp::Sbc => {
                let (r, c, v) = add_with_carry(rn_val, !op2, self.cpu.flags.c);
                Out::Arith(r, c, v)
            }
            DpOp::Sub => {
                let (r, c, v) = add_with_carry(rn_val, !op2, true);
                Out::Arith(r, c, v)
            }
            DpOp::Rsb => {
                let (r, c, v) = add_with_carry(!rn_val, op2, true);
                Out::Arith(r, c, v)
            }
        };
        let (result, flags) = match out {
            Out::Logical(r) => (r, (shifter_carry, self.cpu.flags.v)),
            Out::Arith(r, c, v) => (r, (c, v)),
        };
        let compare_only = rd.0 == 15 && set_flags;
        if set_flags {
            self.set_nzcv(result, flags.0, flags.1);
        }
        if !compare_only {
            if rd.0 == 15 {
                self.branch_to(result);
            } else {
                self.cpu.set_reg(rd.0, result);
            }
        }
        Ok(())
    }

    fn read_special(&self, sysm: u8) -> u32 {
        match SpecialReg::from_sysm(sysm) {
            SpecialReg::Apsr => self.cpu.xpsr() & 0xF000_0000,
            SpecialReg::Msp => self.cpu.sp_main,
            SpecialReg::Psp => self.cpu.sp_process,
            SpecialReg::Primask => self.cpu.primask as u32,
            SpecialReg::Control => (self.cpu.control_spsel as u32) << 1,
            SpecialReg::Other(other) => match other {
                1 | 2 | 3 => {
                    // iapsr/eapsr/xpsr views
                    let mut v = self.cpu.xpsr() & 0xF000_0000;
                    if other != 2 {
                        v |= self.cpu.current_exc & 0x1FF;
                    }
                    v
                }
                5 => self.cpu.current_exc & 0x1FF,
                _ => 0,
            },
        }
    }

    pub(super) fn write_special(&mut self, sysm: u8, value: u32) {
        match SpecialReg::from_sysm(sysm) {
            SpecialReg::Apsr => {
                self.cpu.flags.n = value & (1 << 31) != 0;
                self.cpu.flags.z = value & (1 << 30) != 0;
                self.cpu.flags.c = value & (1 << 29) != 0;
                self.cpu.flags.v = value & (1 << 28) != 0;
            }
            SpecialReg::Msp => self.cpu.set_sp_main(value & !3),
            SpecialReg::Psp => self.cpu.set_sp_process(value & !3),
            SpecialReg::Primask => self.cpu.primask = value & 1 != 0,
            SpecialReg::Control => {
                // SPSEL writes are ignored in handler mode.
                if self.cpu.mode == Mode::Thread {
                    self.cpu.set_spsel(value & 2 != 0);
                }
            }
            SpecialReg::Other(_) => {}
        }
    }

    pub(super) fn read_special_pub(&self, sysm: u8) -> u32 {
        self.read_special(sysm)
    }

    fn vmov_bank(&mut self, to_bank: bool, cell: BankCell, rt: Reg) {
        if to_bank {
            let v = self.cpu.reg(rt.0);
            match cell {
                BankCell::SpMain => self.cpu.set_sp_main(v & !3),
                BankCell::SpProcess => self.cpu.set_sp_process(v & !3),
                BankCell::Primask => self.cpu.primask = v & 1 != 0,
                BankCell::Control => {
                    if self.cpu.mode == Mode::Thread {
                        self.cpu.set_spsel(v & 2 != 0);
                    }
                }
            }
        } else {
            let v = match cell {
                BankCell::SpMain => self.cpu.sp_main,
                BankCell::SpProcess => self.cpu.sp_process,
                BankCell::Primask => self.cpu.primask as u32,
                BankCell::Control => (self.cpu.control_spsel as u32) << 1,
            };
            self.cpu.set_reg(rt.0, v);
        }
    }

    fn load_multiple(
        &mut self,
        rn: Reg,
        regs: u16,
        inc: bool,
        writeback: bool,
    ) -> Result<(), CrashKind> {
        let count = regs.count_ones();
        let base = self.cpu.reg(rn.0);
        if base & 3 != 0 {
            return Err(CrashKind::from_fault(crate::image::FaultError {
                addr: base,
                width: 4,
                access: crate::image::AccessKind::Read,
            }));
        }
        let start = if inc { base } else { base.wrapping_sub(4 * count) };
        let mut addr = start;
        let mut pc_value = None;
        let mut values = Vec::with_capacity(count as usize);
        for i in 0..16 {
            if regs & (1 << i) != 0 {
                let v = self
                    .read_mem(addr, 4)
                    .map_err(CrashKind::from_fault)?;
                values.push((i, v));
                addr += 4;
            }
        }
        let new_base = if inc { base.wrapping_add(4 * count) } else { start };
        if writeback && regs & (1 << rn.0) == 0 {
            self.cpu.set_reg(rn.0, new_base);
        }
        for (i, v) in values {
            if i == 15 {
                pc_value = Some(v);
            } else {
                self.cpu.set_reg(i, v);
            }
        }
        if let Some(v) = pc_value {
            self.branch_interworking(v)?;
        }
        Ok(())
    }

    fn store_multiple(
        &mut self,
        rn: Reg,
        regs: u16,
        inc: bool,
        writeback: bool,
    ) -> Result<(), CrashKind> {
        let count = regs.count_ones();
        let base = self.cpu.reg(rn.0);
        if base & 3 != 0 {
            return Err(CrashKind::from_fault(crate::image::FaultError {
                addr: base,
                width: 4,
                access: crate::image::AccessKind::Write,
            }));
        }
        let start = if inc { base } else { base.wrapping_sub(4 * count) };
        let mut addr = start;
        for i in 0..16 {
            if regs & (1 << i) != 0 {
                let v = self.cpu.reg(i);
                self.write_mem(addr, 4, v).map_err(CrashKind::from_fault)?;
                addr += 4;
            }
        }
        if writeback {
            let new_base = if inc { base.wrapping_add(4 * count) } else { start };
            self.cpu.set_reg(rn.0, new_base);
        }
        Ok(())
    }

    /// Execute one decoded instruction. The caller has already resolved IT
    /// conditionality; `instr.in_it_block` only suppresses flag setting.
    /// r15 holds the instruction's own address throughout; branches set it.
    pub(super) fn exec_instr(&mut self, instr: &Instruction) -> Result<StepEvent, CrashKind> {
        let s16 = !instr.in_it_block; // 16-bit dp ops set flags outside IT
        let a = instr.address;
        match instr.kind {
            InstrKind::ShiftImm16 { op, rd, rm, imm5 } => {
                let (kind, amount) = ImmShift { ty: op, imm5 }.resolve();
                let (r, c) = shift_c(self.cpu.reg(rm.0), kind, amount, self.cpu.flags.c);
                self.cpu.set_reg(rd.0, r);
                if s16 {
                    self.set_nzc(r, c);
                }
            }
            InstrKind::AddSubReg16 { sub, rd, rn, rm } => {
                let y = self.cpu.reg(rm.0);
                let (r, c, v) = if sub {
                    add_with_carry(self.cpu.reg(rn.0), !y, true)
                } else {
                    add_with_carry(self.cpu.reg(rn.0), y, false)
                };
                self.cpu.set_reg(rd.0, r);
                if s16 {
                    self.set_nzcv(r, c, v);
                }
            }
            InstrKind::AddSubImm3 { sub, rd, rn, imm3 } => {
                let y = imm3 as u32;
                let (r, c, v) = if sub {
                    add_with_carry(self.cpu.reg(rn.0), !y, true)
                } else {
                    add_with_carry(self.cpu.reg(rn.0), y, false)
                };
                self.cpu.set_reg(rd.0, r);
                if s16 {
                    self.set_nzcv(r, c, v);
                }
            }
            InstrKind::MovImm8 { rd, imm8 } => {
                self.cpu.set_reg(rd.0, imm8 as u32);
                if s16 {
                    self.set_nz(imm8 as u32);
                }
            }
            InstrKind::CmpImm8 { rn, imm8 } => {
                let (r, c, v) = add_with_carry(self.cpu.reg(rn.0), !(imm8 as u32), true);
                self.set_nzcv(r, c, v);
            }
            InstrKind::AddSubImm8 { sub, rdn, imm8 } => {
                let y = imm8 as u32;
                let (r, c, v) = if sub {
                    add_with_carry(self.cpu.reg(rdn.0), !y, true)
                } else {
                    add_with_carry(self.cpu.reg(rdn.0), y, false)
                };
                self.cpu.set_reg(rdn.0, r);
                if s16 {
                    self.set_nzcv(r, c, v);
                }
            }
            InstrKind::Dp16 { op, rdn, rm } => self.dp16(op, rdn, rm, s16),
            InstrKind::AddRegHi { rdn, rm } => {
                let r = self.cpu.reg(rdn.0).wrapping_add(self.cpu.reg(rm.0));
                if rdn.is_pc() {
                    self.branch_to(r);
                } else {
                    self.cpu.set_reg(rdn.0, r);
                }
            }
            InstrKind::CmpRegHi { rn, rm } => {
                let (r, c, v) =
                    add_with_carry(self.cpu.reg(rn.0), !self.cpu.reg(rm.0), true);
                self.set_nzcv(r, c, v);
            }
            InstrKind::MovRegHi { rd, rm } => {
                let v = self.cpu.reg(rm.0);
                if rd.is_pc() {
                    // Spec'd routing: a magic value moved into pc takes the
                    // exception-return path like bx/pop.
                    self.branch_interworking(v | 1)?;
                } else {
                    self.cpu.set_reg(rd.0, v);
                }
            }
            InstrKind::Bx { rm } => {
                let v = self.cpu.reg(rm.0);
                self.branch_interworking(v)?;
            }
            InstrKind::BlxReg { rm } => {
                let v = self.cpu.reg(rm.0);
                self.cpu.r[14] = (a + 2) | 1;
                self.branch_interworking(v)?;
            }
            InstrKind::LdrLit16 { rt, imm8 } => {
                let addr = align4(self.cpu.reg(15)) + imm8 as u32 * 4;
                let v = self.mem_load(addr, MemSize::Word)?;
                self.cpu.set_reg(rt.0, v);
            }
            InstrKind::MemReg16 { op, rt, rn, rm } => {
                let addr = self.cpu.reg(rn.0).wrapping_add(self.cpu.reg(rm.0));
                match op {
                    MemOp16::Str => self.mem_store(addr, MemSize::Word, self.cpu.reg(rt.0))?,
                    MemOp16::Strh => self.mem_store(addr, MemSize::Half, self.cpu.reg(rt.0))?,
                    MemOp16::Strb => self.mem_store(addr, MemSize::Byte, self.cpu.reg(rt.0))?,
                    MemOp16::Ldr => {
                        let v = self.mem_load(addr, MemSize::Word)?;
                        self.cpu.set_reg(rt.0, v);
                    }
                    MemOp16::Ldrh => {
                        let v = self.mem_load(addr, MemSize::Half)?;
                        self.cpu.set_reg(rt.0, v);
                    }
                    MemOp16::Ldrb => {
                        let v = self.mem_load(addr, MemSize::Byte)?;
                        self.cpu.set_reg(rt.0, v);
                    }
                    MemOp16::Ldrsb => {
                        let v = self.mem_load(addr, MemSize::SignedByte)?;
                        self.cpu.set_reg(rt.0, v);
                    }
                    MemOp16::Ldrsh => {
                        let v = self.mem_load(addr, MemSize::SignedHalf)?;
                        self.cpu.set_reg(rt.0, v);
                    }
                }
            }
            InstrKind::MemImm5 {
                size,
                load,
                rt,
                rn,
                imm5,
            } => {
                let addr = self.cpu.reg(rn.0).wrapping_add(imm5 as u32 * size.bytes());
                if load {
                    let v = self.mem_load(addr, size)?;
                    self.cpu.set_reg(rt.0, v);
                } else {
                    self.mem_store(addr, size, self.cpu.reg(rt.0))?;
                }
            }
            InstrKind::MemSpImm8 { load, rt, imm8 } => {
                let addr = self.cpu.sp().wrapping_add(imm8 as u32 * 4);
                if load {
                    let v = self.mem_load(addr, MemSize::Word)?;
                    self.cpu.set_reg(rt.0, v);
                } else {
                    self.mem_store(addr, MemSize::Word, self.cpu.reg(rt.0))?;
                }
            }
            InstrKind::Adr16 { rd, imm8 } => {
                let v = align4(self.cpu.reg(15)) + imm8 as u32 * 4;
                self.cpu.set_reg(rd.0, v);
            }
            InstrKind::AddSpImm8 { rd, imm8 } => {
                let v = self.cpu.sp().wrapping_add(imm8 as u32 * 4);
                self.cpu.set_reg(rd.0, v);
            }
            InstrKind::AdjustSp { sub, imm7 } => {
                let off = imm7 as u32 * 4;
                let sp = self.cpu.sp();
                self.cpu
                    .set_sp(if sub { sp.wrapping_sub(off) } else { sp.wrapping_add(off) });
            }
            InstrKind::Cbz { nonzero, rn, .. } => {
                let zero = self.cpu.reg(rn.0) == 0;
                if zero != nonzero {
                    self.branch_to(instr.branch_target().unwrap());
                }
            }
            InstrKind::Extend16 { op, rd, rm } => {
                let v = self.cpu.reg(rm.0);
                let r = match op {
                    0 => v as u16 as i16 as i32 as u32,
                    1 => v as u8 as i8 as i32 as u32,
                    2 => v as u16 as u32,
                    _ => v as u8 as u32,
                };
                self.cpu.set_reg(rd.0, r);
            }
            InstrKind::Push16 { regs } => {
                let mask = (regs & 0xFF) | ((regs & 0x100) << 6); // bit 8 -> lr
                self.store_multiple(Reg::SP, mask, false, true)?;
            }
            InstrKind::Pop16 { regs } => {
                let mask = (regs & 0xFF) | ((regs & 0x100) << 7); // bit 8 -> pc
                self.load_multiple(Reg::SP, mask, true, true)?;
            }
            InstrKind::Cps {
                disable,
                affect_pri,
                ..
            } => {
                if affect_pri {
                    self.cpu.primask = disable;
                }
            }
            InstrKind::Rev16bit { op, rd, rm } => {
                let v = self.cpu.reg(rm.0);
                let r = match op {
                    0 => v.swap_bytes(),
                    1 => ((v & 0xFF00_FF00) >> 8) | ((v & 0x00FF_00FF) << 8),
                    _ => {
                        let h = ((v & 0xFF) << 8) | ((v >> 8) & 0xFF);
                        h as u16 as i16 as i32 as u32
                    }
                };
                self.cpu.set_reg(rd.0, r);
            }
            InstrKind::Bkpt { imm8 } => return Ok(StepEvent::Trap { imm8 }),
            InstrKind::It { firstcond, mask } => {
                self.cpu.it_state = ItState::start(firstcond, mask);
            }
            InstrKind::Hint16 { op } | InstrKind::Hint32 { op } => {
                if matches!(op, HintOp::Wfi | HintOp::Wfe) {
                    return Ok(StepEvent::IdleHint);
                }
            }
            InstrKind::Stm16 { rn, regs } => {
                self.store_multiple(rn, regs as u16, true, true)?;
            }
            InstrKind::Ldm16 { rn, regs } => {
                let wb = regs as u16 & (1 << rn.0) == 0;
                self.load_multiple(rn, regs as u16, true, wb)?;
            }
            InstrKind::BCond16 { cond, .. } | InstrKind::BCond32 { cond, .. } => {
                if cond_passed(cond, self.cpu.flags) {
                    self.branch_to(instr.branch_target().unwrap());
                }
            }
            InstrKind::Svc { .. } => {
                self.enter_exception_sync(super::EXC_SVCALL, a + 2)?;
            }
            InstrKind::B16 { .. } | InstrKind::B32 { .. } => {
                self.branch_to(instr.branch_target().unwrap());
            }
            InstrKind::Udf16 { .. } => {
                return Err(CrashKind::UndefinedInstr {
                    pc: a,
                    raw: instr.raw,
                })
            }
            InstrKind::Bl { .. } => {
                self.cpu.r[14] = (a + 4) | 1;
                self.branch_to(instr.branch_target().unwrap());
            }
            InstrKind::MemMultiple32 {
                load,
                inc,
                writeback,
                rn,
                regs,
            } => {
                if load {
                    let wb = writeback && regs & (1 << rn.0) == 0;
                    self.load_multiple(rn, regs, inc, wb)?;
                } else {
                    self.store_multiple(rn, regs, inc, writeback)?;
                }
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
                let base = if rn.0 == 15 {
                    align4(self.cpu.reg(15))
                } else {
                    self.cpu.reg(rn.0)
                };
                let off = imm8 as u32 * 4;
                let shifted = if u {
                    base.wrapping_add(off)
                } else {
                    base.wrapping_sub(off)
                };
                let ea = if p { shifted } else { base };
                if load {
                    let v1 = self.mem_load(ea, MemSize::Word)?;
                    let v2 = self.mem_load(ea.wrapping_add(4), MemSize::Word)?;
                    self.cpu.set_reg(rt.0, v1);
                    self.cpu.set_reg(rt2.0, v2);
                } else {
                    self.mem_store(ea, MemSize::Word, self.cpu.reg(rt.0))?;
                    self.mem_store(ea.wrapping_add(4), MemSize::Word, self.cpu.reg(rt2.0))?;
                }
                if w && rn.0 != 15 {
                    self.cpu.set_reg(rn.0, shifted);
                }
            }
            InstrKind::TableBranch { half, rn, rm } => {
                let base = self.cpu.reg(rn.0);
                let idx = self.cpu.reg(rm.0);
                let entry = if half {
                    self.mem_load(base.wrapping_add(idx << 1), MemSize::Half)?
                } else {
                    self.mem_load(base.wrapping_add(idx), MemSize::Byte)?
                };
                let target = self.cpu.reg(15).wrapping_add(entry << 1);
                self.branch_to(target);
            }
            InstrKind::DpReg32 {
                op,
                set_flags,
                rd,
                rn,
                rm,
                shift,
            } => {
                let (kind, amount) = shift.resolve();
                let (op2, shifter_c) =
                    shift_c(self.cpu.reg(rm.0), kind, amount, self.cpu.flags.c);
                let rn_val = self.cpu.reg(rn.0);
                self.dp32(op, set_flags, rd, rn_val, op2, shifter_c)?;
            }
            InstrKind::DpImm32 {
                op,
                set_flags,
                rd,
                rn,
                imm12,
            } => {
                let (op2, shifter_c) =
                    crate::thumb2::thumb_expand_imm_c(imm12, self.cpu.flags.c);
                let rn_val = self.cpu.reg(rn.0);
                self.dp32(op, set_flags, rd, rn_val, op2, shifter_c)?;
            }
            InstrKind::ShiftReg32 {
                op,
                set_flags,
                rd,
                rn,
                rm,
            } => {
                let kind = [ShiftKind::Lsl, ShiftKind::Lsr, ShiftKind::Asr, ShiftKind::Ror]
                    [op as usize & 3];
                let amount = self.cpu.reg(rm.0) & 0xFF;
                let (r, c) = shift_c(self.cpu.reg(rn.0), kind, amount, self.cpu.flags.c);
                self.cpu.set_reg(rd.0, r);
                if set_flags {
                    self.set_nzc(r, c);
                }
            }
            InstrKind::Extend32 { op, rd, rm, rotate } => {
                let v = self.cpu.reg(rm.0).rotate_right(rotate as u32 * 8);
                let r = match op {
                    0b0000 => v as u16 as i16 as i32 as u32,
                    0b0001 => v as u16 as u32,
                    0b0100 => v as u8 as i8 as i32 as u32,
                    _ => v as u8 as u32,
                };
                self.cpu.set_reg(rd.0, r);
            }
            InstrKind::MemImm12 {
                size,
                load,
                rt,
                rn,
                imm12,
            } => {
                let addr = self.cpu.reg(rn.0).wrapping_add(imm12 as u32);
                self.single_mem(load, size, rt, addr)?;
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
                let base = self.cpu.reg(rn.0);
                let off = imm8 as u32;
                let shifted = if u {
                    base.wrapping_add(off)
                } else {
                    base.wrapping_sub(off)
                };
                let ea = if p { shifted } else { base };
                self.single_mem(load, size, rt, ea)?;
                if w {
                    self.cpu.set_reg(rn.0, shifted);
                }
            }
            InstrKind::MemReg32 {
                size,
                load,
                rt,
                rn,
                rm,
                shift,
            } => {
                let addr = self
                    .cpu
                    .reg(rn.0)
                    .wrapping_add(self.cpu.reg(rm.0) << shift);
                self.single_mem(load, size, rt, addr)?;
            }
            InstrKind::MemLit32 { size, rt, u, imm12 } => {
                let base = align4(self.cpu.reg(15));
                let addr = if u {
                    base.wrapping_add(imm12 as u32)
                } else {
                    base.wrapping_sub(imm12 as u32)
                };
                self.single_mem(true, size, rt, addr)?;
            }
            InstrKind::Mrs { rd, sysm } => {
                let v = self.read_special(sysm);
                self.cpu.set_reg(rd.0, v);
            }
            InstrKind::Msr { rn, sysm, .. } => {
                let v = self.cpu.reg(rn.0);
                self.write_special(sysm, v);
            }
            InstrKind::Barrier { .. } => {}
            InstrKind::Coproc { .. } => {
                if let Some(service) = vendor_service(&instr.kind) {
                    return Ok(StepEvent::Service(service));
                }
                return self.coproc_exec(instr);
            }
            InstrKind::VmovBank { to_bank, cell, rt } => {
                self.vmov_bank(to_bank, cell, rt);
            }
        }
        Ok(StepEvent::Normal)
    }

    fn single_mem(
        &mut self,
        load: bool,
        size: MemSize,
        rt: Reg,
        addr: u32,
    ) -> Result<(), CrashKind> {
        if load {
            let v = self.mem_load(addr, size)?;
            if rt.is_pc() {
                self.branch_interworking(v)?;
            } else {
                self.cpu.set_reg(rt.0, v);
            }
        } else {
            self.mem_store(addr, size, self.cpu.reg(rt.0))?;
        }
        Ok(())
    }

    fn dp16(&mut self, op: Dp16Op, rdn: Reg, rm: Reg, s: bool) {
        let x = self.cpu.reg(rdn.0);
        let y = self.cpu.reg(rm.0);
        match op {
            Dp16Op::And => self.logical16(rdn, x & y, s),
            Dp16Op::Eor => self.logical16(rdn, x ^ y, s),
            Dp16Op::Orr => self.logical16(rdn, x | y, s),
            Dp16Op::Bic => self.logical16(rdn, x & !y, s),
            Dp16Op::Mvn => self.logical16(rdn, !y, s),
            Dp16Op::Tst => self.set_nz(x & y),
            Dp16Op::Lsl | Dp16Op::Lsr | Dp16Op::Asr | Dp16Op::Ror => {
                let kind = match op {
                    Dp16Op::Lsl => ShiftKind::Lsl,
                    Dp16Op::Lsr => ShiftKind::Lsr,
                    Dp16Op::Asr => ShiftKind::Asr,
                    _ => ShiftKind::Ror,
                };
                let (r, c) = shift_c(x, kind, y & 0xFF, self.cpu.flags.c);
                self.cpu.set_reg(rdn.0, r);
                if s {
                    self.set_nzc(r, c);
                }
            }
            Dp16Op::Adc => {
                let (r, c, v) = add_with_carry(x, y, self.cpu.flags.c);
                self.cpu.set_reg(rdn.0, r);
                if s {
                    self.set_nzcv(r, c, v);
                }
            }
            Dp16Op::Sbc => {
                let (r, c, v) = add_with_carry(x, !y, self.cpu.flags.c);
                self.cpu.set_reg(rdn.0, r);
                if s {
                    self.set_nzcv(r, c, v);
                }
            }
            Dp16Op::Rsb => {
                let (r, c, v) = add_with_carry(!y, 0, true);
                self.cpu.set_reg(rdn.0, r);
                if s {
                    self.set_nzcv(r, c, v);
                }
            }
            Dp16Op::Cmp => {
                let (r, c, v) = add_with_carry(x, !y, true);
                self.set_nzcv(r, c, v);
            }
            Dp16Op::Cmn => {
                let (r, c, v) = add_with_carry(x, y, false);
                self.set_nzcv(r, c, v);
            }
            Dp16Op::Mul => {
                let r = x.wrapping_mul(y);
                self.cpu.set_reg(rdn.0, r);
                if s {
                    self.set_nz(r);
                }
            }
        }
    }

    fn logical16(&mut self, rdn: Reg, result: u32, s: bool) {
        self.cpu.set_reg(rdn.0, result);
        if s {
            self.set_nz(result);
        }
    }
}
