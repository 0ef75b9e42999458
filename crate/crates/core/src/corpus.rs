//! Shipped synthetic firmware corpus: small hand-assembled Cortex-M
//! programs exercising arithmetic, calls, svc task starts, SysTick
//! counting, PendSV task switching, interrupt gating and a fuzzable input
//! guard. Programs are emitted through the instruction encoder; no
//! external toolchain is involved.

use std::collections::BTreeMap;

use crate::image::{FirmwareImage, MemoryMap, MemoryRegion, Perms, RegionKind, Symbol};
use crate::thumb2::{encode, Cond, Dp16Op, HintOp, InstrKind, MemSize, Reg, SpecialReg};

pub const FLASH_BASE: u32 = 0x0800_0000;
pub const SRAM_BASE: u32 = 0x2000_0000;
pub const SRAM_SIZE: u32 = 0x4000;
pub const INITIAL_SP: u32 = SRAM_BASE + SRAM_SIZE;
const VECTOR_ENTRIES: u32 = 48;

/// Standard corpus memory map: flash, sram, system-control space, vendor
/// region.
pub fn corpus_map() -> MemoryMap {
    MemoryMap {
        regions: vec![
            MemoryRegion {
                name: "flash".into(),
                base: FLASH_BASE,
                size: 0x1_0000,
                perms: Perms { read: true, write: false, execute: true },
                kind: RegionKind::Rom,
            },
            MemoryRegion {
                name: "sram".into(),
                base: SRAM_BASE,
                size: SRAM_SIZE,
                perms: Perms { read: true, write: true, execute: false },
                kind: RegionKind::Ram,
            },
            MemoryRegion {
                name: "scs".into(),
                base: 0xE000_E000,
                size: 0x1000,
                perms: Perms { read: true, write: true, execute: false },
                kind: RegionKind::Mmio,
            },
            MemoryRegion {
                name: "vendor".into(),
                base: 0xE010_0000,
                size: 0x20_0000,
                perms: Perms { read: true, write: true, execute: true },
                kind: RegionKind::VendorSys,
            },
        ],
        entry_override: None,
        init_copy: Vec::new(),
        vector_entries: VECTOR_ENTRIES,
    }
}

#[derive(Debug, Clone, Copy)]
enum Fixup {
    B,
    BCond(Cond),
    Bl,
    LdrLit(Reg),
    /// 32-bit word holding `label | 1`.
    VectorWord,
}

/// Two-pass assembler over the instruction encoder.
pub struct Asm {
    base: u32,
    out: Vec<u8>,
    labels: BTreeMap<String, u32>,
    fixups: Vec<(usize, Fixup, String)>,
    /// Constant pool entries: symbolic name -> concrete value or label ref.
    lit_values: Vec<(String, u32)>,
    lit_refs: Vec<(String, String)>,
    lit_counter: u32,
}

impl Asm {
    pub fn new(base: u32) -> Asm {
        Asm {
            base,
            out: Vec::new(),
            labels: BTreeMap::new(),
            fixups: Vec::new(),
            lit_values: Vec::new(),
            lit_refs: Vec::new(),
            lit_counter: 0,
        }
    }

    pub fn here(&self) -> u32 {
        self.base + self.out.len() as u32
    }

    pub fn label(&mut self, name: &str) {
        self.labels.insert(name.to_string(), self.here());
    }

    pub fn kind(&mut self, k: InstrKind) {
        let bytes = encode(&k).unwrap_or_else(|e| panic!("corpus encode {k:?}: {e}"));
        self.out.extend_from_slice(&bytes);
    }

    pub fn word(&mut self, v: u32) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn align4(&mut self) {
        while self.out.len() % 4 != 0 {
            self.nop();
        }
    }

    fn placeholder(&mut self, len: usize, fixup: Fixup, label: &str) {
        self.fixups.push((self.out.len(), fixup, label.to_string()));
        self.out.extend(std::iter::repeat(0u8).take(len));
    }

    pub fn movs(&mut self, rd: u8, imm8: u8) {
        self.kind(InstrKind::MovImm8 { rd: Reg(rd), imm8 });
    }

    pub fn adds_imm(&mut self, rdn: u8, imm8: u8) {
        self.kind(InstrKind::AddSubImm8 { sub: false, rdn: Reg(rdn), imm8 });
    }

    pub fn subs_imm(&mut self, rdn: u8, imm8: u8) {
        self.kind(InstrKind::AddSubImm8 { sub: true, rdn: Reg(rdn), imm8 });
    }

    pub fn adds_reg(&mut self, rd: u8, rn: u8, rm: u8) {
        self.kind(InstrKind::AddSubReg16 {
            sub: false,
            rd: Reg(rd),
            rn: Reg(rn),
            rm: Reg(rm),
        });
    }

    pub fn dp(&mut self, op: Dp16Op, rdn: u8, rm: u8) {
        self.kind(InstrKind::Dp16 { op, rdn: Reg(rdn), rm: Reg(rm) });
    }

    pub fn lsls(&mut self, rd: u8, rm: u8, imm5: u8) {
        self.kind(InstrKind::ShiftImm16 { op: 0, rd: Reg(rd), rm: Reg(rm), imm5 });
    }

    pub fn asrs(&mut self, rd: u8, rm: u8, imm5: u8) {
        self.kind(InstrKind::ShiftImm16 { op: 2, rd: Reg(rd), rm: Reg(rm), imm5 });
    }

    pub fn cmp_imm(&mut self, rn: u8, imm8: u8) {
        self.kind(InstrKind::CmpImm8 { rn: Reg(rn), imm8 });
    }

    pub fn mov_reg(&mut self, rd: u8, rm: u8) {
        self.kind(InstrKind::MovRegHi { rd: Reg(rd), rm: Reg(rm) });
    }

    pub fn str_imm(&mut self, rt: u8, rn: u8, off_words: u8) {
        self.kind(InstrKind::MemImm5 {
            size: MemSize::Word,
            load: false,
            rt: Reg(rt),
            rn: Reg(rn),
            imm5: off_words,
        });
    }

    pub fn ldr_imm(&mut self, rt: u8, rn: u8, off_words: u8) {
        self.kind(InstrKind::MemImm5 {
            size: MemSize::Word,
            load: true,
            rt: Reg(rt),
            rn: Reg(rn),
            imm5: off_words,
        });
    }

    pub fn strb_imm(&mut self, rt: u8, rn: u8, off: u8) {
        self.kind(InstrKind::MemImm5 {
            size: MemSize::Byte,
            load: false,
            rt: Reg(rt),
            rn: Reg(rn),
            imm5: off,
        });
    }

    pub fn ldrb_imm(&mut self, rt: u8, rn: u8, off: u8) {
        self.kind(InstrKind::MemImm5 {
            size: MemSize::Byte,
            load: true,
            rt: Reg(rt),
            rn: Reg(rn),
            imm5: off,
        });
    }

    pub fn push(&mut self, regs: &[u8], lr: bool) {
        let mut mask = 0u16;
        for r in regs {
            mask |= 1 << r;
        }
        if lr {
            mask |= 0x100;
        }
        self.kind(InstrKind::Push16 { regs: mask });
    }

    pub fn pop(&mut self, regs: &[u8], pc: bool) {
        let mut mask = 0u16;
        for r in regs {
            mask |= 1 << r;
        }
        if pc {
            mask |= 0x100;
        }
        self.kind(InstrKind::Pop16 { regs: mask });
    }

    pub fn bx_lr(&mut self) {
        self.kind(InstrKind::Bx { rm: Reg::LR });
    }

    pub fn svc(&mut self, imm8: u8) {
        self.kind(InstrKind::Svc { imm8 });
    }

    pub fn nop(&mut self) {
        self.kind(InstrKind::Hint16 { op: HintOp::Nop });
    }

    pub fn wfi(&mut self) {
        self.kind(InstrKind::Hint16 { op: HintOp::Wfi });
    }

    pub fn mrs(&mut self, rd: u8, reg: SpecialReg) {
        self.kind(InstrKind::Mrs { rd: Reg(rd), sysm: reg.sysm() });
    }

    pub fn msr(&mut self, reg: SpecialReg, rn: u8) {
        self.kind(InstrKind::Msr { rn: Reg(rn), mask: 0b10, sysm: reg.sysm() });
    }

    pub fn b(&mut self, label: &str) {
        self.placeholder(2, Fixup::B, label);
    }

    /// The infinite empty loop idiom (`b .`).
    pub fn b_self(&mut self) {
        self.kind(InstrKind::B16 { imm11: 0x7FE });
    }

    pub fn bcond(&mut self, cond: Cond, label: &str) {
        self.placeholder(2, Fixup::BCond(cond), label);
    }

    pub fn bl(&mut self, label: &str) {
        self.placeholder(4, Fixup::Bl, label);
    }

    /// `ldr rt, =value` against a shared literal pool.
    pub fn ldr_const(&mut self, rt: u8, value: u32) {
        let name = match self.lit_values.iter().find(|(_, v)| *v == value) {
            Some((n, _)) => n.clone(),
            None => {
                let n = format!("__lit_{}", self.lit_counter);
                self.lit_counter += 1;
                self.lit_values.push((n.clone(), value));
                n
            }
        };
        self.placeholder(2, Fixup::LdrLit(Reg(rt)), &name);
    }

    /// `ldr rt, =label|1` (thumb address of a code label).
    pub fn ldr_fnaddr(&mut self, rt: u8, label: &str) {
        let name = format!("__ref_{label}");
        if !self.lit_refs.iter().any(|(n, _)| *n == name) {
            self.lit_refs.push((name.clone(), label.to_string()));
        }
        self.placeholder(2, Fixup::LdrLit(Reg(rt)), &name);
    }

    /// Reserve a vector-table word resolving to `label | 1`.
    pub fn vector_word(&mut self, label: &str) {
        self.placeholder(4, Fixup::VectorWord, label);
    }

    /// Finalize: emit the literal pool, resolve fixups, and return the
    /// bytes plus the resolved label map (for symbol tables).
    pub fn finish(mut self) -> (Vec<u8>, BTreeMap<String, u32>) {
        self.align4();
        let lit_values = std::mem::take(&mut self.lit_values);
        let lit_refs = std::mem::take(&mut self.lit_refs);
        for (name, value) in lit_values {
            self.labels.insert(name, self.here());
            self.word(value);
        }
        let mut ref_slots = Vec::new();
        for (name, target) in lit_refs {
            self.labels.insert(name, self.here());
            ref_slots.push((self.out.len(), target));
            self.word(0);
        }
        for (at, target) in ref_slots {
            let addr = *self
                .labels
                .get(&target)
                .unwrap_or_else(|| panic!("undefined label `{target}`"));
            self.out[at..at + 4].copy_from_slice(&(addr | 1).to_le_bytes());
        }

        for (at, fixup, label) in std::mem::take(&mut self.fixups) {
            let target = *self
                .labels
                .get(&label)
                .unwrap_or_else(|| panic!("undefined label `{label}`"));
            let pc = self.base + at as u32;
            let bytes = match fixup {
                Fixup::B => {
                    let off = (target as i64 - (pc as i64 + 4)) >> 1;
                    assert!((-1024..1024).contains(&off), "b target too far");
                    encode(&InstrKind::B16 { imm11: (off as u16) & 0x7FF }).unwrap()
                }
                Fixup::BCond(cond) => {
                    let off = (target as i64 - (pc as i64 + 4)) >> 1;
                    assert!((-128..128).contains(&off), "bcond target too far");
                    encode(&InstrKind::BCond16 { cond, imm8: off as u8 }).unwrap()
                }
                Fixup::Bl => {
                    let off = (target as i64 - (pc as i64 + 4)) >> 1;
                    encode(&InstrKind::Bl { offset: off as i32 }).unwrap()
                }
                Fixup::LdrLit(rt) => {
                    let base = (pc + 4) & !3;
                    assert!(target >= base, "literal pool precedes load");
                    let off = target - base;
                    assert!(off % 4 == 0 && off / 4 < 256, "literal out of range");
                    encode(&InstrKind::LdrLit16 { rt, imm8: (off / 4) as u8 }).unwrap()
                }
                Fixup::VectorWord => (target | 1).to_le_bytes().to_vec(),
            };
            self.out[at..at + bytes.len()].copy_from_slice(&bytes);
        }
        (self.out, self.labels)
    }
}

/// A corpus program ready to be loaded or written to disk.
#[derive(Debug, Clone)]
pub struct CorpusProgram {
    pub name: &'static str,
    pub description: &'static str,
    pub blob: Vec<u8>,
    pub map: MemoryMap,
    pub symbols: Vec<Symbol>,
}

impl CorpusProgram {
    pub fn image(&self) -> FirmwareImage {
        crate::image::load_firmware_from_bytes(
            self.blob.clone(),
            self.map.clone(),
            self.symbols.clone(),
        )
        .expect("corpus program loads")
    }

    /// Write `<name>.bin`, `<name>.sym` and `<name>.map.json` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.bin", self.name)), &self.blob)?;
        let mut sym = String::new();
        for s in &self.symbols {
            sym.push_str(&format!("{:08x} {:#x} {}\n", s.address, s.size, s.name));
        }
        std::fs::write(dir.join(format!("{}.sym", self.name)), sym)?;
        std::fs::write(dir.join(format!("{}.map.json", self.name)), map_to_json(&self.map))?;
        Ok(())
    }
}

pub fn map_to_json(map: &MemoryMap) -> String {
    let regions: Vec<serde_json::Value> = map
        .regions
        .iter()
        .map(|r| {
            serde_json::json!({
                "name": r.name,
                "base": format!("{:#010x}", r.base),
                "size": format!("{:#x}", r.size),
                "perms": r.perms.to_string().replace('-', ""),
                "kind": match r.kind {
                    RegionKind::Rom => "rom",
                    RegionKind::Ram => "ram",
                    RegionKind::Mmio => "mmio",
                    RegionKind::VendorSys => "vendor_sys",
                },
            })
        })
        .collect();
    let init_copy: Vec<serde_json::Value> = map
        .init_copy
        .iter()
        .map(|c| {
            serde_json::json!({
                "src": format!("{:#010x}", c.src),
                "dst": format!("{:#010x}", c.dst),
                "size": format!("{:#x}", c.size),
            })
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "regions": regions,
        "entry_override": null,
        "init_copy": init_copy,
        "vector_entries": map.vector_entries,
    }))
    .unwrap()
}

/// Begin a program: vector table with initial sp, reset vector, and the
/// given (exception number, handler label) pairs.
fn program_head(handlers: &[(u32, &str)]) -> Asm {
    let mut a = Asm::new(FLASH_BASE);
    a.word(INITIAL_SP);
    a.vector_word("reset");
    for n in 2..VECTOR_ENTRIES {
        match handlers.iter().find(|(num, _)| *num == n) {
            Some((_, label)) => a.vector_word(label),
            None => a.word(0),
        }
    }
    a
}

fn sym(name: &str, address: u32, size: u32) -> Symbol {
    Symbol { name: name.to_string(), address, size }
}

// Scratch RAM layout shared by the programs.
const OUT0: u32 = SRAM_BASE; // result words
const TCB: u32 = SRAM_BASE + 0x100; // pendsv task control block
const GUARD_BUF: u32 = SRAM_BASE + 0x200; // fuzz input buffer
const GATE_PTR: u32 = SRAM_BASE + 0x300; // irq_gate pointer cell
const GATE_TGT: u32 = SRAM_BASE + 0x400; // irq_gate pointer target
const GATE_CNT: u32 = SRAM_BASE + 0x404; // irq_gate tick counter
const TASK0_SP: u32 = SRAM_BASE + 0x3000;
const TASK1_SP: u32 = SRAM_BASE + 0x2800;

/// Arithmetic and loops: sums, shifts, a flag-dependent branch; results in
/// RAM; parks in an empty infinite loop.
pub fn arith_loops() -> CorpusProgram {
    let mut a = program_head(&[]);
    a.label("reset");
    a.movs(0, 0);
    a.movs(1, 1);
    a.label("loop");
    a.adds_reg(0, 0, 1);
    a.adds_imm(1, 1);
    a.cmp_imm(1, 20);
    a.bcond(Cond::Ne, "loop");
    a.ldr_const(2, OUT0);
    a.str_imm(0, 2, 0);
    a.lsls(3, 0, 3);
    a.str_imm(3, 2, 1);
    a.asrs(4, 0, 1);
    a.strb_imm(4, 2, 8);
    // Carry-dependent select.
    a.movs(5, 0);
    a.dp(Dp16Op::Mvn, 5, 5);
    a.adds_imm(5, 1); // wraps to zero, sets C and Z
    a.bcond(Cond::Cs, "carry_set");
    a.movs(6, 1);
    a.b("store6");
    a.label("carry_set");
    a.movs(6, 2);
    a.label("store6");
    a.str_imm(6, 2, 3);
    a.b_self();
    CorpusProgram {
        name: "arith_loops",
        description: "arithmetic, loops and flag-driven control flow",
        blob: a.finish().0,
        map: corpus_map(),
        symbols: vec![sym("main", FLASH_BASE + VECTOR_ENTRIES * 4, 0)],
    }
}

/// Call-heavy: nested bl/bx with stack discipline.
pub fn call_heavy() -> CorpusProgram {
    let mut a = program_head(&[]);
    a.label("reset");
    a.movs(1, 5);
    a.bl("f1");
    a.ldr_const(2, OUT0);
    a.str_imm(0, 2, 0);
    a.movs(1, 9);
    a.bl("f1");
    a.str_imm(0, 2, 1);
    a.b_self();

    a.label("f1");
    a.push(&[4], true);
    a.movs(4, 3);
    a.bl("f2");
    a.adds_reg(0, 0, 4);
    a.pop(&[4], true);

    a.label("f2");
    a.push(&[], true);
    a.mov_reg(0, 1);
    a.adds_imm(0, 10);
    a.bl("f3");
    a.pop(&[], true);

    a.label("f3");
    a.adds_imm(0, 1);
    a.bx_lr();

    let (blob, labels) = a.finish();
    let symbols = vec![
        sym("f1", labels["f1"] | 1, labels["f2"] - labels["f1"]),
        sym("f2", labels["f2"] | 1, labels["f3"] - labels["f2"]),
        sym("f3", labels["f3"] | 1, 4),
    ];
    CorpusProgram {
        name: "call_heavy",
        description: "nested calls with push/pop return paths",
        blob,
        map: corpus_map(),
        symbols,
    }
}

/// svc-triggered scheduler start: main crafts a task frame on the process
/// stack, sets PSP, and executes svc; the handler returns through magic
/// 0xFFFFFFFD so execution resumes in the task on the process stack.
pub fn svc_switch() -> CorpusProgram {
    let mut a = program_head(&[(11, "svc_handler")]);
    a.label("reset");
    // Craft an exception frame at TASK0_SP - 32.
    a.ldr_const(0, TASK0_SP - 32);
    a.ldr_fnaddr(1, "task_entry");
    a.str_imm(1, 0, 6); // frame[6] = return address (thumb bit tolerated)
    a.movs(2, 0);
    a.str_imm(2, 0, 7); // frame[7] = xPSR
    a.movs(3, 0xAA);
    a.str_imm(3, 0, 0); // frame[0] = r0 seed
    a.msr(SpecialReg::Psp, 0);
    a.svc(0);
    // Not reached: the handler redirects the return onto the task frame.
    a.label("unreached");
    a.b_self();

    a.label("task_entry");
    a.ldr_const(4, OUT0);
    a.str_imm(0, 4, 0); // observe seeded r0 (0xAA)
    a.mrs(5, SpecialReg::Psp);
    a.str_imm(5, 4, 1); // observe process-stack execution
    a.movs(6, 0x42);
    a.str_imm(6, 4, 2);
    a.b_self();

    a.label("svc_handler");
    a.ldr_const(0, 0xFFFF_FFFD);
    a.mov_reg(14, 0);
    a.bx_lr();

    CorpusProgram {
        name: "svc_switch",
        description: "svc scheduler entry with banked-SP task start",
        blob: a.finish().0,
        map: corpus_map(),
        symbols: vec![],
    }
}

/// SysTick counter: configures the timer through the system-control
/// registers, polls a RAM counter the ISR increments, the ISR disables the
/// timer after five ticks.
pub fn systick_count() -> CorpusProgram {
    let mut a = program_head(&[(15, "systick_isr")]);
    a.label("reset");
    a.ldr_const(0, 0xE000_E014);
    a.ldr_const(1, 200);
    a.str_imm(1, 0, 0); // SYST_RVR = 200
    a.ldr_const(0, 0xE000_E010);
    a.movs(1, 3);
    a.str_imm(1, 0, 0); // SYST_CSR = enable | tickint
    a.ldr_const(2, OUT0);
    a.label("poll");
    a.ldr_imm(3, 2, 0);
    a.cmp_imm(3, 5);
    a.bcond(Cond::Lt, "poll");
    a.movs(5, 0x77);
    a.str_imm(5, 2, 4);
    a.b_self();

    a.label("systick_isr");
    a.ldr_const(0, OUT0);
    a.ldr_imm(1, 0, 0);
    a.adds_imm(1, 1);
    a.str_imm(1, 0, 0);
    a.cmp_imm(1, 5);
    a.bcond(Cond::Lt, "isr_done");
    a.ldr_const(2, 0xE000_E010);
    a.movs(1, 0);
    a.str_imm(1, 2, 0); // disable SysTick
    a.label("isr_done");
    a.bx_lr();

    CorpusProgram {
        name: "systick_count",
        description: "SysTick-driven counter with polling main loop",
        blob: a.finish().0,
        map: corpus_map(),
        symbols: vec![],
    }
}

/// Two cooperative tasks switched by PendSV through banked stack pointers:
/// each task increments its own counter and yields by setting the PendSV
/// pending flag in the system control block.
pub fn pendsv_twotask() -> CorpusProgram {
    let mut a = program_head(&[(14, "pendsv_isr")]);
    a.label("reset");
    // Craft task1's initial hardware frame at TASK1_SP - 32; the r4-r7
    // software context sits 16 bytes below it (zeros from cleared RAM).
    a.ldr_const(0, TASK1_SP - 32);
    a.ldr_fnaddr(1, "task1");
    a.str_imm(1, 0, 6);
    a.movs(2, 0);
    a.str_imm(2, 0, 7);
    // TCB: [cur, ctx0, ctx1]; context base = frame - 16.
    a.ldr_const(3, TCB);
    a.ldr_const(0, TASK1_SP - 48);
    a.str_imm(0, 3, 2); // ctx1 = crafted context
    a.movs(2, 0);
    a.str_imm(2, 3, 0); // cur = 0
    // Switch to the process stack and enter task0.
    a.ldr_const(0, TASK0_SP);
    a.msr(SpecialReg::Psp, 0);
    a.movs(1, 2);
    a.msr(SpecialReg::Control, 1); // SPSEL = 1
    a.b("task0");

    a.label("task0");
    a.ldr_const(4, OUT0);
    a.movs(5, 0);
    a.label("t0_loop");
    a.adds_imm(5, 1);
    a.str_imm(5, 4, 0);
    a.bl("yield_now");
    a.cmp_imm(5, 3);
    a.bcond(Cond::Lt, "t0_loop");
    a.b_self();

    a.label("task1");
    a.ldr_const(4, OUT0 + 4);
    a.movs(5, 0);
    a.label("t1_loop");
    a.adds_imm(5, 1);
    a.str_imm(5, 4, 0);
    a.bl("yield_now");
    a.cmp_imm(5, 3);
    a.bcond(Cond::Lt, "t1_loop");
    a.b_self();

    a.label("yield_now");
    a.ldr_const(6, 0xE000_ED04);
    a.ldr_const(7, 1 << 28); // PENDSVSET
    a.str_imm(7, 6, 0);
    a.bx_lr();

    // The canonical Cortex-M context switch: stack r4-r7 below the
    // hardware frame on the outgoing task's process stack, swap stacks,
    // unstack the incoming task's r4-r7, return through 0xFFFFFFFD so the
    // hardware frame restore lands in the other task.
    a.label("pendsv_isr");
    a.mrs(0, SpecialReg::Psp);
    a.subs_imm(0, 16);
    a.kind(InstrKind::Stm16 { rn: Reg(0), regs: 0xF0 }); // save r4-r7
    a.subs_imm(0, 16);
    a.ldr_const(1, TCB);
    a.ldr_imm(2, 1, 0); // cur
    a.lsls(3, 2, 2);
    a.adds_reg(3, 3, 1);
    a.str_imm(0, 3, 1); // tcb[1 + cur] = context base
    a.movs(0, 1);
    a.dp(Dp16Op::Eor, 2, 0); // cur ^= 1
    a.str_imm(2, 1, 0);
    a.lsls(3, 2, 2);
    a.adds_reg(3, 3, 1);
    a.ldr_imm(0, 3, 1); // new context base
    a.kind(InstrKind::Ldm16 { rn: Reg(0), regs: 0xF0 }); // restore r4-r7
    a.msr(SpecialReg::Psp, 0);
    a.ldr_const(0, 0xFFFF_FFFD);
    a.mov_reg(14, 0);
    a.bx_lr();

    let (blob, labels) = a.finish();
    let symbols = vec![
        sym("task0", labels["task0"] | 1, labels["task1"] - labels["task0"]),
        sym("task1", labels["task1"] | 1, labels["yield_now"] - labels["task1"]),
        sym("pendsv_isr", labels["pendsv_isr"] | 1, 0),
    ];
    CorpusProgram {
        name: "pendsv_twotask",
        description: "PendSV task switching over banked stack pointers",
        blob,
        map: corpus_map(),
        symbols,
    }
}

/// Fuzz target: reads 4 input bytes through the uart HAL, compares them
/// byte-by-byte against "BUG!", and on full match stores through an
/// unmapped address.
pub fn uart_guard() -> CorpusProgram {
    let mut a = program_head(&[]);
    a.label("reset");
    a.bl("hal_init");
    a.bl("gpio_init");
    a.ldr_const(4, GUARD_BUF);
    a.movs(0, 0);
    a.mov_reg(1, 4);
    a.movs(2, 4);
    a.movs(3, 0);
    a.bl("uart_receive");
    a.ldrb_imm(0, 4, 0);
    a.cmp_imm(0, b'B');
    a.bcond(Cond::Ne, "done");
    a.ldrb_imm(0, 4, 1);
    a.cmp_imm(0, b'U');
    a.bcond(Cond::Ne, "done");
    a.ldrb_imm(0, 4, 2);
    a.cmp_imm(0, b'G');
    a.bcond(Cond::Ne, "done");
    a.ldrb_imm(0, 4, 3);
    a.cmp_imm(0, b'!');
    a.bcond(Cond::Ne, "done");
    a.ldr_const(1, 0x6000_0000);
    a.str_imm(0, 1, 0); // unmapped write: the planted crash
    a.label("done");
    a.b_self();

    // Real bodies, only executed without HAL redirection.
    a.label("hal_init");
    a.movs(0, 0);
    a.bx_lr();
    a.label("gpio_init");
    a.movs(0, 0);
    a.bx_lr();
    a.label("uart_receive");
    a.movs(0, 1);
    a.bx_lr();

    let (blob, labels) = a.finish();
    let symbols = vec![
        sym("main", labels["reset"], labels["hal_init"] - labels["reset"]),
        sym("HAL_Init", labels["hal_init"] | 1, 4),
        sym("MX_GPIO_Init", labels["gpio_init"] | 1, 4),
        sym("HAL_UART_Receive", labels["uart_receive"] | 1, 4),
    ];
    CorpusProgram {
        name: "uart_guard",
        description: "byte-split input guard with planted out-of-bounds write",
        blob,
        map: corpus_map(),
        symbols,
    }
}

/// Minimal program with zero special sites: terminates by spinning in a
/// two-instruction loop (not the empty-loop idiom), so a plan over it with
/// coverage off is empty and the output byte-identical.
pub fn min_loop() -> CorpusProgram {
    let mut a = program_head(&[]);
    a.label("reset");
    a.movs(0, 7);
    a.adds_imm(0, 35);
    a.ldr_const(1, OUT0);
    a.str_imm(0, 1, 0);
    a.label("spin");
    a.nop();
    a.b("spin");
    CorpusProgram {
        name: "min_loop",
        description: "no special sites; parks in a non-empty spin loop",
        blob: a.finish().0,
        map: corpus_map(),
        symbols: vec![],
    }
}

/// Interrupt gating target: a periodic timer on external IRQ 0 starts
/// before the ISR's pointer cell is initialized. Delivery must wait for
/// the enabling HAL call or the ISR dereferences a null pointer.
pub fn irq_gate() -> CorpusProgram {
    let mut a = program_head(&[(16, "tim_isr")]);
    a.label("reset");
    // Start the timer first (interval 400 instructions).
    a.movs(0, 0);
    a.ldr_const(1, 400);
    a.bl("timer_start");
    // Long pointer-free init window: the ISR must not run in here.
    a.ldr_const(2, 600);
    a.label("init_loop");
    a.subs_imm(2, 1);
    a.bcond(Cond::Ne, "init_loop");
    // Publish the pointer, then enable delivery.
    a.ldr_const(3, GATE_PTR);
    a.ldr_const(4, GATE_TGT);
    a.str_imm(4, 3, 0);
    a.movs(0, 0);
    a.bl("nvic_enable");
    // Wait for two ticks, then stop the timer and park.
    a.ldr_const(5, GATE_CNT);
    a.label("wait");
    a.ldr_imm(6, 5, 0);
    a.cmp_imm(6, 2);
    a.bcond(Cond::Lt, "wait");
    a.movs(0, 0);
    a.bl("timer_stop");
    a.b_self();

    a.label("tim_isr");
    a.ldr_const(0, GATE_PTR);
    a.ldr_imm(1, 0, 0);
    a.ldr_imm(2, 1, 0); // null deref if fired before configuration
    a.ldr_const(2, GATE_CNT);
    a.ldr_imm(3, 2, 0);
    a.adds_imm(3, 1);
    a.str_imm(3, 2, 0);
    a.bx_lr();

    // Real bodies for original-image execution.
    a.label("timer_start");
    a.movs(0, 0);
    a.bx_lr();
    a.label("timer_stop");
    a.movs(0, 0);
    a.bx_lr();
    a.label("nvic_enable");
    a.movs(0, 0);
    a.bx_lr();

    let (blob, labels) = a.finish();
    let symbols = vec![
        sym("HAL_TIM_Base_Start_IT", labels["timer_start"] | 1, 4),
        sym("HAL_TIM_Base_Stop_IT", labels["timer_stop"] | 1, 4),
        sym("HAL_NVIC_EnableIRQ", labels["nvic_enable"] | 1, 4),
        sym("tim_isr", labels["tim_isr"] | 1, 0),
    ];
    CorpusProgram {
        name: "irq_gate",
        description: "interrupt delivery gated on the enabling HAL call",
        blob,
        map: corpus_map(),
        symbols,
    }
}

/// Idle loop with SysTick every 10,000 instructions; the ISR counts 1,000
/// deliveries then disables the timer. Fast-forward keeps interpreter work
/// proportional to the ISR length, not the virtual interval.
pub fn empty_idle() -> CorpusProgram {
    let mut a = program_head(&[(15, "systick_isr")]);
    a.label("reset");
    a.ldr_const(0, 0xE000_E014);
    a.ldr_const(1, 10_000);
    a.str_imm(1, 0, 0);
    a.ldr_const(0, 0xE000_E010);
    a.movs(1, 3);
    a.str_imm(1, 0, 0);
    a.b_self();

    a.label("systick_isr");
    a.ldr_const(0, OUT0);
    a.ldr_imm(1, 0, 0);
    a.adds_imm(1, 1);
    a.str_imm(1, 0, 0);
    a.ldr_const(2, 1000);
    a.dp(Dp16Op::Cmp, 1, 2);
    a.bcond(Cond::Lt, "isr_done");
    a.ldr_const(3, 0xE000_E010);
    a.movs(1, 0);
    a.str_imm(1, 3, 0);
    a.label("isr_done");
    a.bx_lr();

    CorpusProgram {
        name: "empty_idle",
        description: "interrupt-only firmware parked in an empty idle loop",
        blob: a.finish().0,
        map: corpus_map(),
        symbols: vec![],
    }
}

/// The whole shipped corpus.
pub fn all() -> Vec<CorpusProgram> {
    vec![
        arith_loops(),
        call_heavy(),
        svc_switch(),
        systick_count(),
        pendsv_twotask(),
        min_loop(),
        irq_gate(),
        uart_guard(),
        empty_idle(),
    ]
}

/// The five differential-semantics programs: original and transplanted
/// executions must agree on final registers and RAM.
pub fn differential_set() -> Vec<CorpusProgram> {
    vec![
        arith_loops(),
        call_heavy(),
        svc_switch(),
        systick_count(),
        pendsv_twotask(),
    ]
}

pub fn by_name(name: &str) -> Option<CorpusProgram> {
    all().into_iter().find(|p| p.name == name)
}
