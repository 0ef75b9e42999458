//! Thumb-2 decoder and encoder for the Armv7-M subset handled by the
//! rewriter and the reference interpreter.
//!
//! The decoder is total: any 2- or 4-byte value produces a [`DecodeOutcome`]
//! without panicking. Encodings that are architecturally valid on Armv7-M but
//! outside the implemented subset come back as [`DecodeOutcome::Unsupported`];
//! architecturally undefined encodings come back as
//! [`DecodeOutcome::Undefined`]. For everything that decodes, re-encoding
//! reproduces the raw bits exactly.

mod decode;
#[cfg(test)]
mod tests;
mod display;
mod encode;

pub use decode::{decode, decode_at, is_wide_prefix};
pub use encode::{encode, encode_branch_auto, EncodeError};

/// A core register, r0-r15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub u8);

impl Reg {
    pub const SP: Reg = Reg(13);
    pub const LR: Reg = Reg(14);
    pub const PC: Reg = Reg(15);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_pc(self) -> bool {
        self.0 == 15
    }
}

/// Condition codes for conditional branches and IT blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Cond {
    Eq = 0,
    Ne = 1,
    Cs = 2,
    Cc = 3,
    Mi = 4,
    Pl = 5,
    Vs = 6,
    Vc = 7,
    Hi = 8,
    Ls = 9,
    Ge = 10,
    Lt = 11,
    Gt = 12,
    Le = 13,
    Al = 14,
}

impl Cond {
    pub fn from_bits(bits: u8) -> Cond {
        match bits & 0xF {
            0 => Cond::Eq,
            1 => Cond::Ne,
            2 => Cond::Cs,
            3 => Cond::Cc,
            4 => Cond::Mi,
            5 => Cond::Pl,
            6 => Cond::Vs,
            7 => Cond::Vc,
            8 => Cond::Hi,
            9 => Cond::Ls,
            10 => Cond::Ge,
            11 => Cond::Lt,
            12 => Cond::Gt,
            13 => Cond::Le,
            _ => Cond::Al,
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    /// The inverse condition (used when stepping through IT blocks).
    pub fn invert(self) -> Cond {
        Cond::from_bits(self.bits() ^ 1)
    }
}

/// Special registers addressable by `msr`/`mrs` (the SYSm field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialReg {
    Apsr,
    Msp,
    Psp,
    Primask,
    Control,
    /// Any other SYSm value (IPSR, BASEPRI, FAULTMASK, ...).
    Other(u8),
}

impl SpecialReg {
    pub fn from_sysm(sysm: u8) -> SpecialReg {
        match sysm {
            0 => SpecialReg::Apsr,
            8 => SpecialReg::Msp,
            9 => SpecialReg::Psp,
            16 => SpecialReg::Primask,
            20 => SpecialReg::Control,
            other => SpecialReg::Other(other),
        }
    }

    pub fn sysm(self) -> u8 {
        match self {
            SpecialReg::Apsr => 0,
            SpecialReg::Msp => 8,
            SpecialReg::Psp => 9,
            SpecialReg::Primask => 16,
            SpecialReg::Control => 20,
            SpecialReg::Other(v) => v,
        }
    }
}

/// Shift kinds for register-shifted operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftKind {
    Lsl,
    Lsr,
    Asr,
    Ror,
    Rrx,
}

/// Raw immediate-shift fields as encoded: `type` (2 bits) and `imm5`.
/// `Lsr #0`/`Asr #0` mean a shift of 32 and `Ror #0` means RRX; resolution
/// happens at execution time so the fields round-trip exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImmShift {
    pub ty: u8,
    pub imm5: u8,
}

impl ImmShift {
    pub const NONE: ImmShift = ImmShift { ty: 0, imm5: 0 };

    /// Resolve the encoded fields into (kind, amount).
    pub fn resolve(self) -> (ShiftKind, u32) {
        match self.ty & 3 {
            0 => (ShiftKind::Lsl, self.imm5 as u32),
            1 => (
                ShiftKind::Lsr,
                if self.imm5 == 0 { 32 } else { self.imm5 as u32 },
            ),
            2 => (
                ShiftKind::Asr,
                if self.imm5 == 0 { 32 } else { self.imm5 as u32 },
            ),
            _ => {
                if self.imm5 == 0 {
                    (ShiftKind::Rrx, 1)
                } else {
                    (ShiftKind::Ror, self.imm5 as u32)
                }
            }
        }
    }
}

/// 16-bit data-processing opcodes (encoding `010000 op4`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Dp16Op {
    And = 0,
    Eor = 1,
    Lsl = 2,
    Lsr = 3,
    Asr = 4,
    Adc = 5,
    Sbc = 6,
    Ror = 7,
    Tst = 8,
    Rsb = 9,
    Cmp = 10,
    Cmn = 11,
    Orr = 12,
    Mul = 13,
    Bic = 14,
    Mvn = 15,
}

impl Dp16Op {
    pub fn from_bits(bits: u8) -> Dp16Op {
        use Dp16Op::*;
        [
            And, Eor, Lsl, Lsr, Asr, Adc, Sbc, Ror, Tst, Rsb, Cmp, Cmn, Orr, Mul, Bic, Mvn,
        ][(bits & 0xF) as usize]
    }
}

/// 32-bit data-processing opcodes shared by the modified-immediate and
/// shifted-register classes (the 4-bit `op` field).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DpOp {
    And,
    Bic,
    Orr,
    Orn,
    Eor,
    Add,
    Adc,
    Sbc,
    Sub,
    Rsb,
}

impl DpOp {
    pub fn from_bits(bits: u8) -> Option<DpOp> {
        Some(match bits & 0xF {
            0b0000 => DpOp::And,
            0b0001 => DpOp::Bic,
            0b0010 => DpOp::Orr,
            0b0011 => DpOp::Orn,
            0b0100 => DpOp::Eor,
            0b1000 => DpOp::Add,
            0b1010 => DpOp::Adc,
            0b1011 => DpOp::Sbc,
            0b1101 => DpOp::Sub,
            0b1110 => DpOp::Rsb,
            _ => return None,
        })
    }

    pub fn bits(self) -> u8 {
        match self {
            DpOp::And => 0b0000,
            DpOp::Bic => 0b0001,
            DpOp::Orr => 0b0010,
            DpOp::Orn => 0b0011,
            DpOp::Eor => 0b0100,
            DpOp::Add => 0b1000,
            DpOp::Adc => 0b1010,
            DpOp::Sbc => 0b1011,
            DpOp::Sub => 0b1101,
            DpOp::Rsb => 0b1110,
        }
    }
}

/// 16-bit load/store with register offset (`0101 op3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MemOp16 {
    Str = 0,
    Strh = 1,
    Strb = 2,
    Ldrsb = 3,
    Ldr = 4,
    Ldrh = 5,
    Ldrb = 6,
    Ldrsh = 7,
}

impl MemOp16 {
    pub fn from_bits(bits: u8) -> MemOp16 {
        use MemOp16::*;
        [Str, Strh, Strb, Ldrsb, Ldr, Ldrh, Ldrb, Ldrsh][(bits & 7) as usize]
    }
}

/// Access size/sign for 32-bit single loads and stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemSize {
    Byte,
    SignedByte,
    Half,
    SignedHalf,
    Word,
}

impl MemSize {
    pub fn bytes(self) -> u32 {
        match self {
            MemSize::Byte | MemSize::SignedByte => 1,
            MemSize::Half | MemSize::SignedHalf => 2,
            MemSize::Word => 4,
        }
    }
}

/// Hint instructions (both 16-bit and `.W` forms execute as no-ops here,
/// except `wfi`/`wfe` which the runtime treats as idle waits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HintOp {
    Nop,
    Yield,
    Wfe,
    Wfi,
    Sev,
    /// Unallocated hint: executes as a no-op per the architecture.
    Other(u8),
}

impl HintOp {
    pub fn from_bits(bits: u8) -> HintOp {
        match bits {
            0 => HintOp::Nop,
            1 => HintOp::Yield,
            2 => HintOp::Wfe,
            3 => HintOp::Wfi,
            4 => HintOp::Sev,
            other => HintOp::Other(other),
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            HintOp::Nop => 0,
            HintOp::Yield => 1,
            HintOp::Wfe => 2,
            HintOp::Wfi => 3,
            HintOp::Sev => 4,
            HintOp::Other(v) => v,
        }
    }
}

/// Barrier instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BarrierOp {
    Dsb,
    Dmb,
    Isb,
}

/// Generic coprocessor operation kinds (`mcr`/`mrc`/`mcrr`/`mrrc`/`cdp`/
/// `ldc`/`stc` and their `2` variants).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoprocOp {
    Cdp {
        opc1: u8,
        crd: u8,
        crn: u8,
        crm: u8,
        opc2: u8,
    },
    /// `mcr` (to_coproc == true) or `mrc`.
    McrMrc {
        to_coproc: bool,
        opc1: u8,
        rt: Reg,
        crn: u8,
        crm: u8,
        opc2: u8,
    },
    /// `mcrr` (to_coproc == true) or `mrrc`.
    McrrMrrc {
        to_coproc: bool,
        opc1: u8,
        rt: Reg,
        rt2: Reg,
        crm: u8,
    },
    /// `stc` (store == true) or `ldc`.
    LdcStc {
        store: bool,
        p: bool,
        u: bool,
        d: bool,
        w: bool,
        crd: u8,
        rn: Reg,
        imm8: u8,
    },
}

/// Which banked/system cell a `vmov` bank-move pseudo-op touches. The
/// rewriter emits these in place of `msr`/`mrs` on the banked stack
/// pointers; the lanes map onto d16/d17 scalar slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum BankCell {
    SpMain = 0,    // d16[0]
    SpProcess = 1, // d16[1]
    Primask = 2,   // d17[0]
    Control = 3,   // d17[1]
}

impl BankCell {
    pub fn from_lane(lane: u8) -> BankCell {
        use BankCell::*;
        [SpMain, SpProcess, Primask, Control][(lane & 3) as usize]
    }
}

/// Structured instruction payload. Each variant corresponds to exactly one
/// encoding template so that `encode(decode(raw)) == raw` holds for the
/// supported set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrKind {
    // ---- 16-bit ----
    /// `lsls`/`lsrs`/`asrs` Rd, Rm, #imm5 (lsl #0 is `movs Rd, Rm`).
    ShiftImm16 {
        op: u8,
        rd: Reg,
        rm: Reg,
        imm5: u8,
    },
    AddSubReg16 {
        sub: bool,
        rd: Reg,
        rn: Reg,
        rm: Reg,
    },
    AddSubImm3 {
        sub: bool,
        rd: Reg,
        rn: Reg,
        imm3: u8,
    },
    MovImm8 {
        rd: Reg,
        imm8: u8,
    },
    CmpImm8 {
        rn: Reg,
        imm8: u8,
    },
    AddSubImm8 {
        sub: bool,
        rdn: Reg,
        imm8: u8,
    },
    Dp16 {
        op: Dp16Op,
        rdn: Reg,
        rm: Reg,
    },
    AddRegHi {
        rdn: Reg,
        rm: Reg,
    },
    CmpRegHi {
        rn: Reg,
        rm: Reg,
    },
    MovRegHi {
        rd: Reg,
        rm: Reg,
    },
    Bx {
        rm: Reg,
    },
    BlxReg {
        rm: Reg,
    },
    LdrLit16 {
        rt: Reg,
        imm8: u8,
    },
    MemReg16 {
        op: MemOp16,
        rt: Reg,
        rn: Reg,
        rm: Reg,
    },
    /// str/ldr (imm5*4), strb/ldrb (imm5), strh/ldrh (imm5*2).
    MemImm5 {
        size: MemSize,
        load: bool,
        rt: Reg,
        rn: Reg,
        imm5: u8,
    },
    MemSpImm8 {
        load: bool,
        rt: Reg,
        imm8: u8,
    },
    Adr16 {
        rd: Reg,
        imm8: u8,
    },
    AddSpImm8 {
        rd: Reg,
        imm8: u8,
    },
    AdjustSp {
        sub: bool,
        imm7: u8,
    },
    Cbz {
        nonzero: bool,
        rn: Reg,
        /// i:imm5 (offset in halfwords).
        imm6: u8,
    },
    Extend16 {
        /// 0 sxth, 1 sxtb, 2 uxth, 3 uxtb
        op: u8,
        rd: Reg,
        rm: Reg,
    },
    Push16 {
        /// Bit 8 = lr, bits 7:0 = r7..r0.
        regs: u16,
    },
    Pop16 {
        /// Bit 8 = pc, bits 7:0 = r7..r0.
        regs: u16,
    },
    Cps {
        disable: bool,
        affect_pri: bool,
        affect_fault: bool,
    },
    Rev16bit {
        /// 0 rev, 1 rev16, 3 revsh
        op: u8,
        rd: Reg,
        rm: Reg,
    },
    Bkpt {
        imm8: u8,
    },
    It {
        firstcond: u8,
        mask: u8,
    },
    Hint16 {
        op: HintOp,
    },
    Stm16 {
        rn: Reg,
        regs: u8,
    },
    Ldm16 {
        rn: Reg,
        regs: u8,
    },
    BCond16 {
        cond: Cond,
        imm8: u8,
    },
    Svc {
        imm8: u8,
    },
    B16 {
        imm11: u16,
    },

    // ---- 32-bit ----
    /// ldm/stm/ldmdb/stmdb, `inc` selects IA (true) vs DB.
    MemMultiple32 {
        load: bool,
        inc: bool,
        writeback: bool,
        rn: Reg,
        regs: u16,
    },
    MemDual {
        load: bool,
        p: bool,
        u: bool,
        w: bool,
        rt: Reg,
        rt2: Reg,
        rn: Reg,
        imm8: u8,
    },
    TableBranch {
        half: bool,
        rn: Reg,
        rm: Reg,
    },
    DpReg32 {
        op: DpOp,
        set_flags: bool,
        rd: Reg,
        rn: Reg,
        rm: Reg,
        shift: ImmShift,
    },
    DpImm32 {
        op: DpOp,
        set_flags: bool,
        rd: Reg,
        rn: Reg,
        /// Raw i:imm3:imm8 modified-immediate field.
        imm12: u16,
    },
    ShiftReg32 {
        /// 0 lsl, 1 lsr, 2 asr, 3 ror
        op: u8,
        set_flags: bool,
        rd: Reg,
        rn: Reg,
        rm: Reg,
    },
    Extend32 {
        /// 0 sxth, 1 uxth, 4 sxtb, 5 uxtb (raw op1 field)
        op: u8,
        rd: Reg,
        rm: Reg,
        rotate: u8,
    },
    /// Single load/store, 12-bit positive offset form.
    MemImm12 {
        size: MemSize,
        load: bool,
        rt: Reg,
        rn: Reg,
        imm12: u16,
    },
    /// Single load/store, 8-bit offset form with index/writeback flags.
    MemImm8 {
        size: MemSize,
        load: bool,
        rt: Reg,
        rn: Reg,
        p: bool,
        u: bool,
        w: bool,
        imm8: u8,
    },
    /// Single load/store, register offset with LSL 0-3.
    MemReg32 {
        size: MemSize,
        load: bool,
        rt: Reg,
        rn: Reg,
        rm: Reg,
        shift: u8,
    },
    /// PC-relative load, 12-bit offset, U = add.
    MemLit32 {
        size: MemSize,
        rt: Reg,
        u: bool,
        imm12: u16,
    },
    Mrs {
        rd: Reg,
        sysm: u8,
    },
    Msr {
        rn: Reg,
        mask: u8,
        sysm: u8,
    },
    BCond32 {
        cond: Cond,
        /// Signed halfword offset (21-bit range).
        offset: i32,
    },
    B32 {
        /// Signed halfword offset (25-bit range).
        offset: i32,
    },
    Bl {
        offset: i32,
    },
    Hint32 {
        op: HintOp,
    },
    Barrier {
        op: BarrierOp,
        option: u8,
    },
    Coproc {
        two: bool,
        coproc: u8,
        op: CoprocOp,
    },
    /// `vmov` between a core register and a d16/d17 scalar lane, used to
    /// model the banked stack pointers and sibling system cells.
    VmovBank {
        to_bank: bool,
        cell: BankCell,
        rt: Reg,
    },
    Udf16 {
        imm8: u8,
    },
}

/// A decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub address: u32,
    /// 2 or 4 bytes.
    pub width: u8,
    pub kind: InstrKind,
    /// Raw encoding; 16-bit instructions occupy the low halfword.
    pub raw: u32,
    /// Set by instruction-stream walkers that track IT state; plain
    /// `decode` calls leave it false.
    pub in_it_block: bool,
    /// Condition under which this instruction executes (from a branch
    /// condition field or surrounding IT block).
    pub condition: Option<Cond>,
}

impl Instruction {
    /// Branch target for the direct-branch forms, if any.
    pub fn branch_target(&self) -> Option<u32> {
        let pc = self.address.wrapping_add(4);
        match self.kind {
            InstrKind::B16 { imm11 } => {
                let off = ((imm11 as i32) << 21) >> 20; // sign-extend, *2
                Some(pc.wrapping_add(off as u32))
            }
            InstrKind::BCond16 { imm8, .. } => {
                let off = ((imm8 as i32) << 24) >> 23;
                Some(pc.wrapping_add(off as u32))
            }
            InstrKind::Cbz { imm6, .. } => Some(pc.wrapping_add((imm6 as u32) << 1)),
            InstrKind::B32 { offset } | InstrKind::BCond32 { offset, .. } | InstrKind::Bl { offset } => {
                Some(pc.wrapping_add((offset as u32) << 1))
            }
            _ => None,
        }
    }

    /// True for `b` to itself (the infinite-empty-loop idiom).
    pub fn is_branch_to_self(&self) -> bool {
        matches!(self.kind, InstrKind::B16 { .. } | InstrKind::B32 { .. })
            && self.branch_target() == Some(self.address)
    }

    pub fn mnemonic(&self) -> String {
        display::mnemonic(self)
    }

    pub fn operands_text(&self) -> String {
        display::operands(self)
    }
}

impl std::fmt::Display for Instruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ops = self.operands_text();
        if ops.is_empty() {
            write!(f, "{}", self.mnemonic())
        } else {
            write!(f, "{} {}", self.mnemonic(), ops)
        }
    }
}

/// Result of decoding a 2- or 4-byte candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded(Instruction),
    /// Architecturally undefined on Armv7-M.
    Undefined,
    /// Valid on Armv7-M but outside the implemented subset.
    Unsupported(u32),
}

impl DecodeOutcome {
    pub fn instruction(self) -> Option<Instruction> {
        match self {
            DecodeOutcome::Decoded(i) => Some(i),
            _ => None,
        }
    }
}

/// Hardware ITSTATE register: `firstcond:mask` while an IT block is open,
/// zero otherwise. Mirrors the architectural advance rule so the analysis
/// walker and the interpreter stay in lockstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, serde::Serialize, serde::Deserialize)]
pub struct ItState(pub u8);

impl ItState {
    pub fn start(firstcond: u8, mask: u8) -> ItState {
        ItState(((firstcond & 0xF) << 4) | (mask & 0xF))
    }

    pub fn active(self) -> bool {
        self.0 & 0xF != 0
    }

    /// Condition governing the current slot.
    pub fn current_cond(self) -> Option<Cond> {
        if self.active() {
            Some(Cond::from_bits(self.0 >> 4))
        } else {
            None
        }
    }

    pub fn advance(&mut self) {
        if self.0 & 0b111 == 0 {
            self.0 = 0;
        } else {
            self.0 = (self.0 & 0xE0) | ((self.0 << 1) & 0x1F);
        }
    }
}

/// Expand a Thumb modified-immediate (i:imm3:imm8) to a 32-bit value plus
/// the carry-out used by the flag-setting logical forms.
pub fn thumb_expand_imm_c(imm12: u16, carry_in: bool) -> (u32, bool) {
    let imm12 = imm12 as u32 & 0xFFF;
    let top = (imm12 >> 10) & 3;
    if top == 0 {
        let imm8 = imm12 & 0xFF;
        let val = match (imm12 >> 8) & 3 {
            0 => imm8,
            1 => (imm8 << 16) | imm8,
            2 => (imm8 << 24) | (imm8 << 8),
            _ => (imm8 << 24) | (imm8 << 16) | (imm8 << 8) | imm8,
        };
        (val, carry_in)
    } else {
        let unrotated = 0x80 | (imm12 & 0x7F);
        let rot = (imm12 >> 7) & 0x1F;
        let val = unrotated.rotate_right(rot);
        (val, (val >> 31) != 0)
    }
}
