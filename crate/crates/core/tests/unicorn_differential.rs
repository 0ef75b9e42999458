//! Differential oracle: the reference interpreter against a third-party
//! Armv7-M emulator, over the pure-CPU corpus programs and randomized
//! data-processing instruction soups (heavy on flag semantics).

use regraft::corpus::{self, Asm, FLASH_BASE, INITIAL_SP, SRAM_BASE};
use regraft::image::load_firmware_from_bytes;
use regraft::runtime::{Executor, RunConfig};
use regraft::thumb2::{Cond, Dp16Op, DpOp, ImmShift, InstrKind, Reg};

use unicorn_engine::unicorn_const::{Arch, Mode, Prot};
use unicorn_engine::{RegisterARM, Unicorn};

const SCRATCH: u32 = SRAM_BASE + 0x800;

struct OracleRun {
    regs: [u32; 13],
    nzcv: (bool, bool, bool, bool),
    ram: Vec<u8>,
}

fn run_unicorn(blob: &[u8], entry: u32, steps: u64) -> OracleRun {
    let mut uc = Unicorn::new(Arch::ARM, Mode::LITTLE_ENDIAN | Mode::MCLASS)
        .expect("unicorn init");
    uc.mem_map(FLASH_BASE as u64, 0x1_0000, Prot::READ | Prot::EXEC)
        .unwrap();
    uc.mem_map(SRAM_BASE as u64, 0x4000, Prot::READ | Prot::WRITE)
        .unwrap();
    uc.mem_write(FLASH_BASE as u64, blob).unwrap();
    uc.reg_write(RegisterARM::SP, INITIAL_SP as u64).unwrap();
    uc.emu_start((entry | 1) as u64, 0, 0, steps as usize)
        .expect("unicorn run");
    let mut regs = [0u32; 13];
    for (i, r) in [
        RegisterARM::R0,
        RegisterARM::R1,
        RegisterARM::R2,
        RegisterARM::R3,
        RegisterARM::R4,
        RegisterARM::R5,
        RegisterARM::R6,
        RegisterARM::R7,
        RegisterARM::R8,
        RegisterARM::R9,
        RegisterARM::R10,
        RegisterARM::R11,
        RegisterARM::R12,
    ]
    .iter()
    .enumerate()
    {
        regs[i] = uc.reg_read(*r).unwrap() as u32;
    }
    let xpsr = uc.reg_read(RegisterARM::XPSR).unwrap() as u32;
    let mut ram = vec![0u8; 0x1000];
    uc.mem_read(SCRATCH as u64, &mut ram).unwrap();
    OracleRun {
        regs,
        nzcv: (
            xpsr >> 31 & 1 == 1,
            xpsr >> 30 & 1 == 1,
            xpsr >> 29 & 1 == 1,
            xpsr >> 28 & 1 == 1,
        ),
        ram,
    }
}

fn run_interpreter(blob: &[u8], steps: u64) -> (OracleRun, Executor) {
    let image =
        load_firmware_from_bytes(blob.to_vec(), corpus::corpus_map(), vec![]).unwrap();
    let mut ex = Executor::new_original(&image).unwrap();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: steps,
            ..RunConfig::default()
        },
    );
    let mut regs = [0u32; 13];
    regs.copy_from_slice(&outcome.final_state.r[..13]);
    let f = outcome.final_state.flags;
    let mut ram = vec![0u8; 0x1000];
    for (i, b) in ram.iter_mut().enumerate() {
        *b = ex.mem.read(SCRATCH + i as u32, 1).unwrap() as u8;
    }
    (
        OracleRun {
            regs,
            nzcv: (f.n, f.z, f.c, f.v),
            ram,
        },
        ex,
    )
}

fn compare(tag: &str, blob: &[u8], entry: u32, steps: u64) {
    let oracle = run_unicorn(blob, entry, steps);
    let (mine, _) = run_interpreter(blob, steps);
    assert_eq!(mine.regs, oracle.regs, "{tag}: register file diverged");
    assert_eq!(mine.nzcv, oracle.nzcv, "{tag}: flags diverged");
    assert_eq!(mine.ram, oracle.ram, "{tag}: scratch RAM diverged");
}

/// xorshift64* for reproducible program generation.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    fn below(&mut self, n: u32) -> u32 {
        (self.next() % n as u64) as u32
    }
}

fn random_dp_program(rng: &mut Rng, instrs: usize) -> (Vec<u8>, u32) {
    let mut a = Asm::new(FLASH_BASE);
    a.word(INITIAL_SP);
    a.vector_word("reset");
    for _ in 2..48 {
        a.word(0);
    }
    a.label("reset");
    // Seed registers with varied values; r10 points at scratch RAM.
    for r in 0..8u8 {
        a.movs(r, (rng.next() & 0xFF) as u8);
        if rng.below(2) == 0 {
            a.lsls(r, r, (rng.below(20) + 1) as u8);
        }
        if rng.below(2) == 0 {
            a.adds_imm(r, (rng.next() & 0xFF) as u8);
        }
    }
    a.movs(0, 1);
    a.lsls(0, 0, 29);
    // add r0, r0, #0x800 (modified immediate: 0x80 rotated right by 28).
    a.kind(InstrKind::DpImm32 {
        op: DpOp::Add,
        set_flags: false,
        rd: Reg(0),
        rn: Reg(0),
        imm12: 28 << 7,
    });
    a.mov_reg(10, 0);

    let dp16_ops = [
        Dp16Op::And,
        Dp16Op::Eor,
        Dp16Op::Lsl,
        Dp16Op::Lsr,
        Dp16Op::Asr,
        Dp16Op::Adc,
        Dp16Op::Sbc,
        Dp16Op::Ror,
        Dp16Op::Tst,
        Dp16Op::Rsb,
        Dp16Op::Cmp,
        Dp16Op::Cmn,
        Dp16Op::Orr,
        Dp16Op::Mul,
        Dp16Op::Bic,
        Dp16Op::Mvn,
    ];
    let dp32_ops = [
        DpOp::And,
        DpOp::Bic,
        DpOp::Orr,
        DpOp::Orn,
        DpOp::Eor,
        DpOp::Add,
        DpOp::Adc,
        DpOp::Sbc,
        DpOp::Sub,
        DpOp::Rsb,
    ];

    for _ in 0..instrs {
        match rng.below(10) {
            0..=2 => {
                a.dp(
                    dp16_ops[rng.below(16) as usize],
                    rng.below(8) as u8,
                    rng.below(8) as u8,
                );
            }
            3 | 4 => {
                a.kind(InstrKind::DpImm32 {
                    op: dp32_ops[rng.below(10) as usize],
                    set_flags: rng.below(2) == 1,
                    rd: Reg(rng.below(8) as u8),
                    rn: Reg(rng.below(8) as u8),
                    imm12: (rng.next() & 0xFFF) as u16,
                });
            }
            5 | 6 => {
                a.kind(InstrKind::DpReg32 {
                    op: dp32_ops[rng.below(10) as usize],
                    set_flags: rng.below(2) == 1,
                    rd: Reg(rng.below(8) as u8),
                    rn: Reg(rng.below(8) as u8),
                    rm: Reg(rng.below(8) as u8),
                    shift: ImmShift {
                        ty: rng.below(4) as u8,
                        imm5: rng.below(32) as u8,
                    },
                });
            }
            7 => {
                a.kind(InstrKind::ShiftReg32 {
                    op: rng.below(4) as u8,
                    set_flags: rng.below(2) == 1,
                    rd: Reg(rng.below(8) as u8),
                    rn: Reg(rng.below(8) as u8),
                    rm: Reg(rng.below(8) as u8),
                });
            }
            8 => {
                a.kind(InstrKind::Extend16 {
                    op: rng.below(4) as u8,
                    rd: Reg(rng.below(8) as u8),
                    rm: Reg(rng.below(8) as u8),
                });
            }
            _ => {
                let op = [0u8, 1, 3][rng.below(3) as usize];
                a.kind(InstrKind::Rev16bit {
                    op,
                    rd: Reg(rng.below(8) as u8),
                    rm: Reg(rng.below(8) as u8),
                });
            }
        }
        // Periodic stores keep the memory path honest without risking
        // address drift.
        if rng.below(8) == 0 {
            let rt = rng.below(8) as u8;
            a.kind(InstrKind::MemImm12 {
                size: regraft::thumb2::MemSize::Word,
                load: false,
                rt: Reg(rt),
                rn: Reg(10),
                imm12: (rng.below(128) * 4) as u16,
            });
        }
    }
    a.label("spin");
    a.b("spin");
    (a.finish().0, FLASH_BASE + 48 * 4)
}

#[test]
fn corpus_programs_match_oracle() {
    for prog in [corpus::arith_loops(), corpus::call_heavy(), corpus::min_loop()] {
        // Run exactly N instructions in both engines; the programs park in
        // tight loops so any step count beyond completion compares equal
        // machine state.
        let image = prog.image();
        compare(prog.name, &prog.blob, image.entry_point, 500);
    }
}

#[test]
fn random_dp_soup_matches_oracle() {
    let mut rng = Rng(0x00C0FFEE_u64 | 1 << 40);
    for case in 0..150 {
        let (blob, entry) = random_dp_program(&mut rng, 40);
        // Both engines park in the spin loop well before 400 steps;
        // surplus loop iterations leave the compared state untouched.
        compare(&format!("dp_soup_{case}"), &blob, entry, 400);
    }
}
