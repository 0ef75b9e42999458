//! Total decoder over the 16-bit and 32-bit Thumb encoding spaces.

use super::*;

/// True if `hw` is the first halfword of a 32-bit encoding
/// (leading bits 0b11101, 0b11110 or 0b11111).
pub fn is_wide_prefix(hw: u16) -> bool {
    hw >> 11 >= 0b11101
}

/// Decode 2 or 4 little-endian bytes at `addr`. Total: never panics.
/// A 4-byte input whose first halfword is a 16-bit encoding decodes as
/// that 16-bit instruction (width 2).
pub fn decode(bytes: &[u8], addr: u32) -> DecodeOutcome {
    match bytes.len() {
        2 => {
            let hw = u16::from_le_bytes([bytes[0], bytes[1]]);
            if is_wide_prefix(hw) {
                // Truncated 32-bit instruction: not decodable from 2 bytes.
                DecodeOutcome::Unsupported(hw as u32)
            } else {
                decode16(hw, addr)
            }
        }
        4 => {
            let hw1 = u16::from_le_bytes([bytes[0], bytes[1]]);
            let hw2 = u16::from_le_bytes([bytes[2], bytes[3]]);
            decode_at(hw1, Some(hw2), addr)
        }
        _ => DecodeOutcome::Undefined,
    }
}

/// Decode from pre-split halfwords; `hw2` is only consumed when `hw1` is a
/// 32-bit prefix.
pub fn decode_at(hw1: u16, hw2: Option<u16>, addr: u32) -> DecodeOutcome {
    if is_wide_prefix(hw1) {
        match hw2 {
            Some(hw2) => decode32(hw1, hw2, addr),
            None => DecodeOutcome::Unsupported(hw1 as u32),
        }
    } else {
        decode16(hw1, addr)
    }
}

fn instr16(addr: u32, raw: u16, kind: InstrKind) -> DecodeOutcome {
    let condition = match kind {
        InstrKind::BCond16 { cond, .. } => Some(cond),
        _ => None,
    };
    DecodeOutcome::Decoded(Instruction {
        address: addr,
        width: 2,
        kind,
        raw: raw as u32,
        in_it_block: false,
        condition,
    })
}

fn instr32(addr: u32, hw1: u16, hw2: u16, kind: InstrKind) -> DecodeOutcome {
    let condition = match kind {
        InstrKind::BCond32 { cond, .. } => Some(cond),
        _ => None,
    };
    DecodeOutcome::Decoded(Instruction {
        address: addr,
        width: 4,
        kind,
        raw: ((hw1 as u32) << 16) | hw2 as u32,
        in_it_block: false,
        condition,
    })
}

fn reg3(v: u16, shift: u16) -> Reg {
    Reg(((v >> shift) & 7) as u8)
}

fn reg4(v: u16, shift: u16) -> Reg {
    Reg(((v >> shift) & 0xF) as u8)
}

fn decode16(hw: u16, addr: u32) -> DecodeOutcome {
    match hw >> 12 {
        0b0000 | 0b0001 => {
            // Shift (imm) / add / sub.
            let op = (hw >> 11) & 3;
            if op != 0b11 {
                instr16(
                    addr,
                    hw,
                    InstrKind::ShiftImm16 {
                        op: op as u8,
                        rd: reg3(hw, 0),
                        rm: reg3(hw, 3),
                        imm5: ((hw >> 6) & 0x1F) as u8,
                    },
                )
            } else {
                let sub = hw & (1 << 9) != 0;
                if hw & (1 << 10) == 0 {
                    instr16(
                        addr,
                        hw,
                        InstrKind::AddSubReg16 {
                            sub,
                            rd: reg3(hw, 0),
                            rn: reg3(hw, 3),
                            rm: reg3(hw, 6),
                        },
                    )
                } else {
                    instr16(
                        addr,
                        hw,
                        InstrKind::AddSubImm3 {
                            sub,
                            rd: reg3(hw, 0),
                            rn: reg3(hw, 3),
                            imm3: ((hw >> 6) & 7) as u8,
                        },
                    )
                }
            }
        }
        0b0010 | 0b0011 => {
            let imm8 = (hw & 0xFF) as u8;
            let r = reg3(hw, 8);
            match (hw >> 11) & 3 {
                0b00 => instr16(addr, hw, InstrKind::MovImm8 { rd: r, imm8 }),
                0b01 => instr16(addr, hw, InstrKind::CmpImm8 { rn: r, imm8 }),
                0b10 => instr16(addr, hw, InstrKind::AddSubImm8 { sub: false, rdn: r, imm8 }),
                _ => instr16(addr, hw, InstrKind::AddSubImm8 { sub: true, rdn: r, imm8 }),
            }
        }
        0b0100 => {
            if hw & 0x0C00 == 0 {
                // 010000: data processing.
                instr16(
                    addr,
                    hw,
                    InstrKind::Dp16 {
                        op: Dp16Op::from_bits(((hw >> 6) & 0xF) as u8),
                        rdn: reg3(hw, 0),
                        rm: reg3(hw, 3),
                    },
                )
            } else if hw & 0x0C00 == 0x0400 {
                // 010001: special data and branch/exchange.
                let rm = reg4(hw, 3);
                let rdn = Reg((((hw >> 4) & 8) | (hw & 7)) as u8);
                match (hw >> 8) & 3 {
                    0b00 => instr16(addr, hw, InstrKind::AddRegHi { rdn, rm }),
                    0b01 => instr16(addr, hw, InstrKind::CmpRegHi { rn: rdn, rm }),
                    0b10 => instr16(addr, hw, InstrKind::MovRegHi { rd: rdn, rm }),
                    _ => {
                        if hw & 7 != 0 {
                            return DecodeOutcome::Undefined;
                        }
                        if hw & 0x80 == 0 {
                            instr16(addr, hw, InstrKind::Bx { rm })
                        } else {
                            instr16(addr, hw, InstrKind::BlxReg { rm })
                        }
                    }
                }
            } else {
                // 01001x: ldr literal.
                instr16(
                    addr,
                    hw,
                    InstrKind::LdrLit16 {
                        rt: reg3(hw, 8),
                        imm8: (hw & 0xFF) as u8,
                    },
                )
            }
        }
        0b0101 => instr16(
            addr,
            hw,
            InstrKind::MemReg16 {
                op: MemOp16::from_bits(((hw >> 9) & 7) as u8),
                rt: reg3(hw, 0),
                rn: reg3(hw, 3),
                rm: reg3(hw, 6),
            },
        ),
        0b0110 | 0b0111 => instr16(
            addr,
            hw,
            InstrKind::MemImm5 {
                size: if hw & 0x1000 != 0 { MemSize::Byte } else { MemSize::Word },
                load: hw & 0x0800 != 0,
                rt: reg3(hw, 0),
                rn: reg3(hw, 3),
                imm5: ((hw >> 6) & 0x1F) as u8,
            },
        ),
        0b1000 => instr16(
            addr,
            hw,
            InstrKind::MemImm5 {
                size: MemSize::Half,
                load: hw & 0x0800 != 0,
                rt: reg3(hw, 0),
                rn: reg3(hw, 3),
                imm5: ((hw >> 6) & 0x1F) as u8,
            },
        ),
        0b1001 => instr16(
            addr,
            hw,
            InstrKind::MemSpImm8 {
                load: hw & 0x0800 != 0,
                rt: reg3(hw, 8),
                imm8: (hw & 0xFF) as u8,
            },
        ),
        0b1010 => {
            let rd = reg3(hw, 8);
            let imm8 = (hw & 0xFF) as u8;
            if hw & 0x0800 == 0 {
                instr16(addr, hw, InstrKind::Adr16 { rd, imm8 })
            } else {
                instr16(addr, hw, InstrKind::AddSpImm8 { rd, imm8 })
            }
        }
        0b1011 => decode16_misc(hw, addr),
        0b1100 => {
            let rn = reg3(hw, 8);
            let regs = (hw & 0xFF) as u8;
            if hw & 0x0800 == 0 {
                instr16(addr, hw, InstrKind::Stm16 { rn, regs })
            } else {
                instr16(addr, hw, InstrKind::Ldm16 { rn, regs })
            }
        }
        0b1101 => {
            let cond_bits = ((hw >> 8) & 0xF) as u8;
            let imm8 = (hw & 0xFF) as u8;
            match cond_bits {
                0b1110 => instr16(addr, hw, InstrKind::Udf16 { imm8 }),
                0b1111 => instr16(addr, hw, InstrKind::Svc { imm8 }),
                c => instr16(
                    addr,
                    hw,
                    InstrKind::BCond16 {
                        cond: Cond::from_bits(c),
                        imm8,
                    },
                ),
            }
        }
        _ => {
            // 0b1110: unconditional branch (the 32-bit prefixes were
            // filtered out by the caller).
            if hw >> 11 == 0b11100 {
                instr16(addr, hw, InstrKind::B16 { imm11: hw & 0x7FF })
            } else {
                DecodeOutcome::Unsupported(hw as u32)
            }
        }
    }
}

fn decode16_misc(hw: u16, addr: u32) -> DecodeOutcome {
    let opcode = (hw >> 5) & 0x7F;
    match opcode {
        0b0000000..=0b0000111 => instr16(
            addr,
            hw,
            InstrKind::AdjustSp {
                sub: hw & 0x80 != 0,
                imm7: (hw & 0x7F) as u8,
            },
        ),
        0b0001000..=0b0001111 | 0b0011000..=0b0011111 | 0b1001000..=0b1001111
        | 0b1011000..=0b1011111 => {
            let i = ((hw >> 9) & 1) as u8;
            instr16(
                addr,
                hw,
                InstrKind::Cbz {
                    nonzero: hw & 0x0800 != 0,
                    rn: reg3(hw, 0),
                    imm6: (i << 5) | ((hw >> 3) & 0x1F) as u8,
                },
            )
        }
        0b0010000..=0b0010111 => instr16(
            addr,
            hw,
            InstrKind::Extend16 {
                op: ((hw >> 6) & 3) as u8,
                rd: reg3(hw, 0),
                rm: reg3(hw, 3),
            },
        ),
        0b0100000..=0b0101111 => instr16(
            addr,
            hw,
            InstrKind::Push16 {
                regs: hw & 0x01FF,
            },
        ),
        0b0110011 => {
            if hw & 0b1100 != 0 {
                return DecodeOutcome::Undefined;
            }
            instr16(
                addr,
                hw,
                InstrKind::Cps {
                    disable: hw & 0x10 != 0,
                    affect_pri: hw & 2 != 0,
                    affect_fault: hw & 1 != 0,
                },
            )
        }
        0b1010000..=0b1010111 => {
            // rev (00) / rev16 (01) / revsh (11); 10 is undefined.
            let sub = ((hw >> 6) & 3) as u8;
            if sub == 2 {
                return DecodeOutcome::Undefined;
            }
            instr16(
                addr,
                hw,
                InstrKind::Rev16bit {
                    op: sub,
                    rd: reg3(hw, 0),
                    rm: reg3(hw, 3),
                },
            )
        }
        0b1100000..=0b1101111 => instr16(
            addr,
            hw,
            InstrKind::Pop16 {
                regs: hw & 0x01FF,
            },
        ),
        0b1110000..=0b1110111 => instr16(
            addr,
            hw,
            InstrKind::Bkpt {
                imm8: (hw & 0xFF) as u8,
            },
        ),
        0b1111000..=0b1111111 => {
            let firstcond = ((hw >> 4) & 0xF) as u8;
            let mask = (hw & 0xF) as u8;
            if mask != 0 {
                if firstcond == 0xF {
                    return DecodeOutcome::Undefined;
                }
                instr16(addr, hw, InstrKind::It { firstcond, mask })
            } else {
                instr16(
                    addr,
                    hw,
                    InstrKind::Hint16 {
                        op: HintOp::from_bits(firstcond),
                    },
                )
            }
        }
        _ => DecodeOutcome::Undefined,
    }
}

fn decode32(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let op1 = (hw1 >> 11) & 3; // 01, 10, 11
    match op1 {
        0b01 => {
            let op2 = (hw1 >> 4) & 0x7F;
            if op2 & 0b1100100 == 0b0000000 {
                decode32_ldst_multiple(hw1, hw2, addr)
            } else if op2 & 0b1100100 == 0b0000100 {
                decode32_dual_tb(hw1, hw2, addr)
            } else if op2 & 0b1100000 == 0b0100000 {
                decode32_dp_shifted(hw1, hw2, addr)
            } else {
                decode32_coproc(hw1, hw2, addr)
            }
        }
        0b10 => {
            if hw2 & 0x8000 == 0 {
                if hw1 & (1 << 9) == 0 {
                    decode32_dp_modimm(hw1, hw2, addr)
                } else {
                    // Data processing (plain binary immediate): movw/movt,
                    // addw/subw, bitfield ops. Outside the subset.
                    DecodeOutcome::Unsupported(((hw1 as u32) << 16) | hw2 as u32)
                }
            } else {
                decode32_branch_misc(hw1, hw2, addr)
            }
        }
        _ => {
            let op2 = (hw1 >> 4) & 0x7F;
            if op2 & 0b1110001 == 0b0000000 {
                decode32_store_single(hw1, hw2, addr)
            } else if op2 & 0b1100111 == 0b0000001
                || op2 & 0b1100111 == 0b0000011
                || op2 & 0b1100111 == 0b0000101
            {
                decode32_load_single(hw1, hw2, addr)
            } else if op2 & 0b1100111 == 0b0000111 {
                DecodeOutcome::Undefined
            } else if op2 & 0b1110000 == 0b0100000 {
                decode32_dp_register(hw1, hw2, addr)
            } else if op2 & 0b1000000 != 0 {
                decode32_coproc(hw1, hw2, addr)
            } else {
                // Multiplies and long multiplies: valid, not implemented.
                DecodeOutcome::Unsupported(((hw1 as u32) << 16) | hw2 as u32)
            }
        }
    }
}

fn decode32_ldst_multiple(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let opc = (hw1 >> 7) & 3;
    let w = hw1 & (1 << 5) != 0;
    let load = hw1 & (1 << 4) != 0;
    let rn = reg4(hw1, 0);
    match opc {
        0b01 => instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemMultiple32 {
                load,
                inc: true,
                writeback: w,
                rn,
                regs: hw2,
            },
        ),
        0b10 => instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemMultiple32 {
                load,
                inc: false,
                writeback: w,
                rn,
                regs: hw2,
            },
        ),
        _ => DecodeOutcome::Undefined, // srs/rfe do not exist on Armv7-M
    }
}

fn decode32_dual_tb(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let p = hw1 & (1 << 8) != 0;
    let u = hw1 & (1 << 7) != 0;
    let w = hw1 & (1 << 5) != 0;
    let load = hw1 & (1 << 4) != 0;
    let rn = reg4(hw1, 0);
    if !p && !w {
        // Exclusive access and table-branch space (u is bit 7: 0 for
        // strex/ldrex word forms, 1 for the byte/half/table group).
        if load && u && hw2 & 0xFFE0 == 0xF000 {
            // 1110 1000 1101 xxxx + 1111 0000 000H xxxx: tbb/tbh.
            return instr32(
                addr,
                hw1,
                hw2,
                InstrKind::TableBranch {
                    half: hw2 & 0x10 != 0,
                    rn,
                    rm: reg4(hw2, 0),
                },
            );
        }
        // Exclusive-access group.
        return DecodeOutcome::Unsupported(((hw1 as u32) << 16) | hw2 as u32);
    }
    instr32(
        addr,
        hw1,
        hw2,
        InstrKind::MemDual {
            load,
            p,
            u,
            w,
            rt: reg4(hw2, 12),
            rt2: reg4(hw2, 8),
            rn,
            imm8: (hw2 & 0xFF) as u8,
        },
    )
}

fn decode32_dp_shifted(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    if hw2 & 0x8000 != 0 {
        return DecodeOutcome::Undefined;
    }
    let op_bits = ((hw1 >> 5) & 0xF) as u8;
    let set_flags = hw1 & (1 << 4) != 0;
    let rn = reg4(hw1, 0);
    let rd = reg4(hw2, 8);
    let rm = reg4(hw2, 0);
    let shift = ImmShift {
        ty: ((hw2 >> 4) & 3) as u8,
        imm5: ((((hw2 >> 12) & 7) << 2) | ((hw2 >> 6) & 3)) as u8,
    };
    let op = match DpOp::from_bits(op_bits) {
        Some(op) => op,
        None => return DecodeOutcome::Undefined,
    };
    instr32(
        addr,
        hw1,
        hw2,
        InstrKind::DpReg32 {
            op,
            set_flags,
            rd,
            rn,
            rm,
            shift,
        },
    )
}

fn decode32_dp_modimm(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let op_bits = ((hw1 >> 5) & 0xF) as u8;
    let set_flags = hw1 & (1 << 4) != 0;
    let rn = reg4(hw1, 0);
    let rd = reg4(hw2, 8);
    let i = ((hw1 >> 10) & 1) as u16;
    let imm3 = (hw2 >> 12) & 7;
    let imm12 = (i << 11) | (imm3 << 8) | (hw2 & 0xFF);
    let op = match DpOp::from_bits(op_bits) {
        Some(op) => op,
        None => return DecodeOutcome::Undefined,
    };
    instr32(
        addr,
        hw1,
        hw2,
        InstrKind::DpImm32 {
            op,
            set_flags,
            rd,
            rn,
            imm12,
        },
    )
}

fn decode32_branch_misc(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let raw = ((hw1 as u32) << 16) | hw2 as u32;
    let op2 = (hw2 >> 12) & 0b101;
    match op2 {
        0b000 => {
            // Conditional branch or miscellaneous control.
            let cond_bits = ((hw1 >> 6) & 0xF) as u8;
            if cond_bits < 0b1110 {
                let s = ((hw1 >> 10) & 1) as u32;
                let j1 = ((hw2 >> 13) & 1) as u32;
                let j2 = ((hw2 >> 11) & 1) as u32;
                let imm6 = (hw1 & 0x3F) as u32;
                let imm11 = (hw2 & 0x7FF) as u32;
                let off20 = (s << 19) | (j2 << 18) | (j1 << 17) | (imm6 << 11) | imm11;
                let offset = ((off20 as i32) << 12) >> 12;
                instr32(
                    addr,
                    hw1,
                    hw2,
                    InstrKind::BCond32 {
                        cond: Cond::from_bits(cond_bits),
                        offset,
                    },
                )
            } else {
                decode32_misc_control(hw1, hw2, addr, raw)
            }
        }
        0b001 => {
            // b.w (T4)
            let offset = bl_style_offset(hw1, hw2);
            instr32(addr, hw1, hw2, InstrKind::B32 { offset })
        }
        0b101 => {
            let offset = bl_style_offset(hw1, hw2);
            instr32(addr, hw1, hw2, InstrKind::Bl { offset })
        }
        _ => DecodeOutcome::Undefined, // blx imm needs ARM state; udf falls elsewhere
    }
}

fn bl_style_offset(hw1: u16, hw2: u16) -> i32 {
    let s = ((hw1 >> 10) & 1) as u32;
    let j1 = ((hw2 >> 13) & 1) as u32;
    let j2 = ((hw2 >> 11) & 1) as u32;
    let i1 = !(j1 ^ s) & 1;
    let i2 = !(j2 ^ s) & 1;
    let imm10 = (hw1 & 0x3FF) as u32;
    let imm11 = (hw2 & 0x7FF) as u32;
    let off24 = (s << 23) | (i1 << 22) | (i2 << 21) | (imm10 << 11) | imm11;
    ((off24 as i32) << 8) >> 8
}

fn decode32_misc_control(hw1: u16, hw2: u16, addr: u32, raw: u32) -> DecodeOutcome {
    let op = (hw1 >> 4) & 0x7F;
    match op {
        0b0111000 => {
            // msr: hw2 must be 1000 mask 00 SYSm.
            if hw2 & 0xF300 != 0x8000 {
                return DecodeOutcome::Undefined;
            }
            instr32(
                addr,
                hw1,
                hw2,
                InstrKind::Msr {
                    rn: reg4(hw1, 0),
                    mask: ((hw2 >> 10) & 3) as u8,
                    sysm: (hw2 & 0xFF) as u8,
                },
            )
        }
        0b0111010 => {
            // Hint space: nop.w / yield / wfe / wfi / sev.
            if hw1 & 0xF != 0xF || hw2 & 0x7F00 != 0 {
                return DecodeOutcome::Undefined;
            }
            instr32(
                addr,
                hw1,
                hw2,
                InstrKind::Hint32 {
                    op: HintOp::from_bits((hw2 & 0xFF) as u8),
                },
            )
        }
        0b0111011 => {
            // Miscellaneous control: barriers (clrex is unsupported).
            if hw1 & 0xF != 0xF || hw2 & 0x7F00 != 0x0F00 {
                return DecodeOutcome::Undefined;
            }
            let opc = ((hw2 >> 4) & 0xF) as u8;
            let option = (hw2 & 0xF) as u8;
            let bop = match opc {
                0b0100 => BarrierOp::Dsb,
                0b0101 => BarrierOp::Dmb,
                0b0110 => BarrierOp::Isb,
                0b0010 => return DecodeOutcome::Unsupported(raw),
                _ => return DecodeOutcome::Undefined,
            };
            instr32(addr, hw1, hw2, InstrKind::Barrier { op: bop, option })
        }
        0b0111110 => {
            if hw1 & 0xF != 0xF || hw2 & 0xF000 != 0x8000 {
                return DecodeOutcome::Undefined;
            }
            instr32(
                addr,
                hw1,
                hw2,
                InstrKind::Mrs {
                    rd: reg4(hw2, 8),
                    sysm: (hw2 & 0xFF) as u8,
                },
            )
        }
        _ => DecodeOutcome::Undefined, // includes udf.w
    }
}

fn mem_single_kind(hw1: u16) -> Option<(MemSize, bool)> {
    // hw1 bits 8:7 = size (00 byte, 01 half, 10 word), bit 8.. see A5.3.
    let size_bits = (hw1 >> 5) & 3;
    let signed = hw1 & (1 << 8) != 0;
    let load = hw1 & (1 << 4) != 0;
    let size = match (size_bits, signed) {
        (0b00, false) => MemSize::Byte,
        (0b00, true) => MemSize::SignedByte,
        (0b01, false) => MemSize::Half,
        (0b01, true) => MemSize::SignedHalf,
        (0b10, false) => MemSize::Word,
        _ => return None,
    };
    Some((size, load))
}

fn decode32_store_single(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let raw = ((hw1 as u32) << 16) | hw2 as u32;
    let (size, _) = match mem_single_kind(hw1) {
        Some(k) => k,
        None => return DecodeOutcome::Undefined,
    };
    if matches!(size, MemSize::SignedByte | MemSize::SignedHalf) {
        return DecodeOutcome::Undefined;
    }
    let rn = reg4(hw1, 0);
    let rt = reg4(hw2, 12);
    if rn.0 == 15 {
        return DecodeOutcome::Undefined;
    }
    if hw1 & (1 << 7) != 0 {
        // imm12 form
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemImm12 {
                size,
                load: false,
                rt,
                rn,
                imm12: hw2 & 0xFFF,
            },
        )
    } else if hw2 & 0x0800 != 0 {
        let p = hw2 & (1 << 10) != 0;
        let u = hw2 & (1 << 9) != 0;
        let w = hw2 & (1 << 8) != 0;
        if !p && !w {
            return DecodeOutcome::Undefined;
        }
        if p && u && !w {
            // strt: unprivileged store, outside the subset.
            return DecodeOutcome::Unsupported(raw);
        }
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemImm8 {
                size,
                load: false,
                rt,
                rn,
                p,
                u,
                w,
                imm8: (hw2 & 0xFF) as u8,
            },
        )
    } else if hw2 & 0x0FC0 == 0 {
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemReg32 {
                size,
                load: false,
                rt,
                rn,
                rm: reg4(hw2, 0),
                shift: ((hw2 >> 4) & 3) as u8,
            },
        )
    } else {
        DecodeOutcome::Undefined
    }
}

fn decode32_load_single(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let raw = ((hw1 as u32) << 16) | hw2 as u32;
    let (size, load) = match mem_single_kind(hw1) {
        Some(k) => k,
        None => return DecodeOutcome::Undefined, // no signed word loads
    };
    if !load {
        return DecodeOutcome::Undefined;
    }
    let rn = reg4(hw1, 0);
    let rt = reg4(hw2, 12);
    if rt.0 == 15 && matches!(size, MemSize::Byte | MemSize::SignedByte | MemSize::Half | MemSize::SignedHalf)
    {
        // pld/pli memory hints.
        return DecodeOutcome::Unsupported(raw);
    }
    if rn.0 == 15 {
        // Literal form; U = hw1 bit 7.
        return instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemLit32 {
                size,
                rt,
                u: hw1 & (1 << 7) != 0,
                imm12: hw2 & 0xFFF,
            },
        );
    }
    if hw1 & (1 << 7) != 0 {
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemImm12 {
                size,
                load: true,
                rt,
                rn,
                imm12: hw2 & 0xFFF,
            },
        )
    } else if hw2 & 0x0800 != 0 {
        let p = hw2 & (1 << 10) != 0;
        let u = hw2 & (1 << 9) != 0;
        let w = hw2 & (1 << 8) != 0;
        if !p && !w {
            return DecodeOutcome::Undefined;
        }
        if p && u && !w {
            // ldrt and friends.
            return DecodeOutcome::Unsupported(raw);
        }
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemImm8 {
                size,
                load: true,
                rt,
                rn,
                p,
                u,
                w,
                imm8: (hw2 & 0xFF) as u8,
            },
        )
    } else if hw2 & 0x0FC0 == 0 {
        instr32(
            addr,
            hw1,
            hw2,
            InstrKind::MemReg32 {
                size,
                load: true,
                rt,
                rn,
                rm: reg4(hw2, 0),
                shift: ((hw2 >> 4) & 3) as u8,
            },
        )
    } else {
        DecodeOutcome::Undefined
    }
}

fn decode32_dp_register(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let raw = ((hw1 as u32) << 16) | hw2 as u32;
    if hw2 & 0xF000 != 0xF000 {
        return DecodeOutcome::Undefined;
    }
    let op1 = ((hw1 >> 4) & 0xF) as u8;
    let op2 = ((hw2 >> 4) & 0xF) as u8;
    let rn = reg4(hw1, 0);
    let rd = reg4(hw2, 8);
    let rm = reg4(hw2, 0);
    if op2 == 0 && op1 & 0b1000 == 0 {
        // lsl/lsr/asr/ror (register), wide.
        return instr32(
            addr,
            hw1,
            hw2,
            InstrKind::ShiftReg32 {
                op: (op1 >> 1) & 3,
                set_flags: op1 & 1 != 0,
                rd,
                rn,
                rm,
            },
        );
    }
    if op2 & 0b1100 == 0b1000 && rn.0 == 15 && matches!(op1, 0b0000 | 0b0001 | 0b0100 | 0b0101) {
        // sxth/uxth/sxtb/uxtb wide with rotation.
        return instr32(
            addr,
            hw1,
            hw2,
            InstrKind::Extend32 {
                op: op1,
                rd,
                rm,
                rotate: op2 & 3,
            },
        );
    }
    // Parallel arithmetic / misc ops (clz, rbit, rev.w, sel, ...).
    DecodeOutcome::Unsupported(raw)
}

fn decode32_coproc(hw1: u16, hw2: u16, addr: u32) -> DecodeOutcome {
    let raw = ((hw1 as u32) << 16) | hw2 as u32;
    let two = hw1 & (1 << 12) != 0;
    let coproc = ((hw2 >> 8) & 0xF) as u8;
    let op1 = (hw1 >> 4) & 0x3F;

    if coproc == 10 || coproc == 11 {
        // FP/vector space: only the d16/d17 bank-move scalars decode.
        return decode_vmov_bank(hw1, hw2, addr, raw, two);
    }

    if op1 & 0b110000 == 0b110000 {
        // Unconditional coprocessor space boundary guard; not reachable
        // through the class tables but kept for totality.
        return DecodeOutcome::Undefined;
    }

    if op1 & 0b100000 != 0 {
        // cdp / mcr / mrc
        if hw2 & (1 << 4) == 0 {
            return instr32(
                addr,
                hw1,
                hw2,
                InstrKind::Coproc {
                    two,
                    coproc,
                    op: CoprocOp::Cdp {
                        opc1: ((hw1 >> 4) & 0xF) as u8,
                        crd: ((hw2 >> 12) & 0xF) as u8,
                        crn: (hw1 & 0xF) as u8,
                        crm: (hw2 & 0xF) as u8,
                        opc2: ((hw2 >> 5) & 7) as u8,
                    },
                },
            );
        }
        let to_coproc = hw1 & (1 << 4) == 0;
        return instr32(
            addr,
            hw1,
            hw2,
            InstrKind::Coproc {
                two,
                coproc,
                op: CoprocOp::McrMrc {
                    to_coproc,
                    opc1: ((hw1 >> 5) & 7) as u8,
                    rt: reg4(hw2, 12),
                    crn: (hw1 & 0xF) as u8,
                    crm: (hw2 & 0xF) as u8,
                    opc2: ((hw2 >> 5) & 7) as u8,
                },
            },
        );
    }

    // ldc/stc/mcrr/mrrc space.
    if op1 & 0b111110 == 0b000000 {
        return DecodeOutcome::Undefined;
    }
    if op1 & 0b111110 == 0b000100 {
        // mcrr / mrrc
        let to_coproc = hw1 & (1 << 4) == 0;
        return instr32(
            addr,
            hw1,
            hw2,
            InstrKind::Coproc {
                two,
                coproc,
                op: CoprocOp::McrrMrrc {
                    to_coproc,
                    opc1: ((hw2 >> 4) & 0xF) as u8,
                    rt: reg4(hw2, 12),
                    rt2: reg4(hw1, 0),
                    crm: (hw2 & 0xF) as u8,
                },
            },
        );
    }
    let store = hw1 & (1 << 4) == 0;
    instr32(
        addr,
        hw1,
        hw2,
        InstrKind::Coproc {
            two,
            coproc,
            op: CoprocOp::LdcStc {
                store,
                p: hw1 & (1 << 8) != 0,
                u: hw1 & (1 << 7) != 0,
                d: hw1 & (1 << 6) != 0,
                w: hw1 & (1 << 5) != 0,
                crd: ((hw2 >> 12) & 0xF) as u8,
                rn: reg4(hw1, 0),
                imm8: (hw2 & 0xFF) as u8,
            },
        },
    )
}

fn decode_vmov_bank(hw1: u16, hw2: u16, addr: u32, raw: u32, two: bool) -> DecodeOutcome {
    // vmov.32 d16/d17[x], rt  <->  hw1 = 0xEE00 | lane<<5 | L<<4 | vd,
    //                              hw2 = rt<<12 | 0x0B90
    if two {
        return DecodeOutcome::Unsupported(raw);
    }
    if hw1 & 0xFFCE != 0xEE00 || hw2 & 0x0FFF != 0x0B90 {
        return DecodeOutcome::Unsupported(raw);
    }
    let vd = (hw1 & 1) as u8; // 0 => d16, 1 => d17
    let lane_hi = ((hw1 >> 5) & 1) as u8;
    let to_bank = hw1 & (1 << 4) == 0;
    let cell = BankCell::from_lane((vd << 1) | lane_hi);
    instr32(
        addr,
        hw1,
        hw2,
        InstrKind::VmovBank {
            to_bank,
            cell,
            rt: reg4(hw2, 12),
        },
    )
}
