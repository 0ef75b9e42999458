//! Reference interpreter runtime: executes original or transplanted images
//! with faithful MCU environment modeling — hardware-style exception entry
//! and return with the EXC_RETURN magic values, banked stack pointers, an
//! instruction-count virtual clock with round-robin interrupt delivery,
//! idle-loop fast-forward, and `bkpt` trap dispatch.

mod exceptions;
mod exec;
mod executor;
mod memory;
#[cfg(test)]
mod tests;

pub use exceptions::{exception_entry, exception_return};
pub use executor::{Executor, ExecutorState, RunConfig, TraceMode};
pub use memory::Memory;

use serde::{Deserialize, Serialize};

use crate::image::FaultError;
use crate::thumb2::ItState;

pub const EXC_SVCALL: u32 = 11;
pub const EXC_PENDSV: u32 = 14;
pub const EXC_SYSTICK: u32 = 15;
pub const EXC_IRQ0: u32 = 16;
/// Exception numbers are tracked in a 64-bit set: 16 system + 48 external.
pub const MAX_EXC: u32 = 64;

pub const EXC_RETURN_HANDLER: u32 = 0xFFFF_FFF1;
pub const EXC_RETURN_THREAD_MAIN: u32 = 0xFFFF_FFF9;
pub const EXC_RETURN_THREAD_PROCESS: u32 = 0xFFFF_FFFD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Thread,
    Handler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub n: bool,
    pub z: bool,
    pub c: bool,
    pub v: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bank {
    Main,
    Process,
}

/// Architectural state: 16 core registers, flags, execution mode and the
/// two banked stack pointers. r13 always mirrors the active bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpuState {
    pub r: [u32; 16],
    pub flags: Flags,
    pub primask: bool,
    pub mode: Mode,
    pub sp_main: u32,
    pub sp_process: u32,
    /// CONTROL.SPSEL: thread-mode stack selector (false = main).
    pub control_spsel: bool,
    pub it_state: ItState,
    /// Exception number being serviced (IPSR); 0 in thread mode.
    pub current_exc: u32,
}

impl CpuState {
    pub fn reset(initial_sp: u32, entry_point: u32) -> CpuState {
        let mut cpu = CpuState {
            r: [0; 16],
            flags: Flags::default(),
            primask: false,
            mode: Mode::Thread,
            sp_main: initial_sp,
            sp_process: 0,
            control_spsel: false,
            it_state: ItState::default(),
            current_exc: 0,
        };
        cpu.r[13] = initial_sp;
        cpu.r[14] = 0xFFFF_FFFF;
        cpu.r[15] = entry_point;
        cpu
    }

    pub fn active_bank(&self) -> Bank {
        match self.mode {
            Mode::Handler => Bank::Main,
            Mode::Thread => {
                if self.control_spsel {
                    Bank::Process
                } else {
                    Bank::Main
                }
            }
        }
    }

    /// Read register `i`; r15 reads as the current instruction + 4 per the
    /// Thumb pc-read rule.
    pub fn reg(&self, i: u8) -> u32 {
        if i == 15 {
            self.r[15].wrapping_add(4)
        } else {
            self.r[i as usize]
        }
    }

    pub fn set_reg(&mut self, i: u8, value: u32) {
        if i == 13 {
            match self.active_bank() {
                Bank::Main => self.sp_main = value,
                Bank::Process => self.sp_process = value,
            }
        }
        self.r[i as usize] = value;
    }

    pub fn sp(&self) -> u32 {
        self.r[13]
    }

    pub fn set_sp(&mut self, value: u32) {
        self.set_reg(13, value);
    }

    pub fn set_sp_main(&mut self, value: u32) {
        self.sp_main = value;
        if self.active_bank() == Bank::Main {
            self.r[13] = value;
        }
    }

    pub fn set_sp_process(&mut self, value: u32) {
        self.sp_process = value;
        if self.active_bank() == Bank::Process {
            self.r[13] = value;
        }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.sync_sp_mirror();
    }

    pub fn set_spsel(&mut self, spsel: bool) {
        self.control_spsel = spsel;
        self.sync_sp_mirror();
    }

    fn sync_sp_mirror(&mut self) {
        self.r[13] = match self.active_bank() {
            Bank::Main => self.sp_main,
            Bank::Process => self.sp_process,
        };
    }

    /// Pack APSR/IPSR/EPSR state into an xPSR word for stacking.
    pub fn xpsr(&self) -> u32 {
        let it = self.it_state.0 as u32;
        ((self.flags.n as u32) << 31)
            | ((self.flags.z as u32) << 30)
            | ((self.flags.c as u32) << 29)
            | ((self.flags.v as u32) << 28)
            | ((it & 0x3) << 25)
            | ((it >> 2) << 10)
            | (self.current_exc & 0x1FF)
    }

    pub fn restore_xpsr_flags(&mut self, xpsr: u32) {
        self.flags.n = xpsr & (1 << 31) != 0;
        self.flags.z = xpsr & (1 << 30) != 0;
        self.flags.c = xpsr & (1 << 29) != 0;
        self.flags.v = xpsr & (1 << 28) != 0;
        self.it_state = ItState((((xpsr >> 10) & 0x3F) << 2) as u8 | ((xpsr >> 25) & 0x3) as u8);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timer {
    pub exc_num: u32,
    /// Instructions between deliveries.
    pub interval: u64,
    pub next_fire: u64,
    pub enabled: bool,
}

/// Virtual time measured in executed instructions; timers pend their
/// exception when the count passes `next_fire`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualClock {
    pub instr_count: u64,
    pub timers: Vec<Timer>,
}

impl VirtualClock {
    /// Register or reprogram the timer for `exc_num`.
    pub fn program(&mut self, exc_num: u32, interval: u64) {
        let interval = interval.max(1);
        let next_fire = self.instr_count + interval;
        if let Some(t) = self.timers.iter_mut().find(|t| t.exc_num == exc_num) {
            t.interval = interval;
            t.next_fire = next_fire;
            t.enabled = true;
        } else {
            self.timers.push(Timer {
                exc_num,
                interval,
                next_fire,
                enabled: true,
            });
        }
    }

    pub fn disable(&mut self, exc_num: u32) {
        if let Some(t) = self.timers.iter_mut().find(|t| t.exc_num == exc_num) {
            t.enabled = false;
        }
    }

    pub fn next_fire(&self) -> Option<u64> {
        self.timers
            .iter()
            .filter(|t| t.enabled)
            .map(|t| t.next_fire)
            .min()
    }
}

/// Pending/configured exception sets as bit masks over exception numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingExceptions {
    pub pending: u64,
    pub configured: u64,
    /// Round-robin cursor: last delivered exception number.
    pub rr_cursor: u32,
}

impl PendingExceptions {
    pub fn pend(&mut self, exc: u32) {
        if exc < MAX_EXC {
            self.pending |= 1 << exc;
        }
    }

    pub fn clear_pending(&mut self, exc: u32) {
        if exc < MAX_EXC {
            self.pending &= !(1 << exc);
        }
    }

    pub fn configure(&mut self, exc: u32) {
        if exc < MAX_EXC {
            self.configured |= 1 << exc;
        }
    }

    pub fn deconfigure(&mut self, exc: u32) {
        if exc < MAX_EXC {
            self.configured &= !(1 << exc);
        }
    }

    pub fn is_pending(&self, exc: u32) -> bool {
        exc < MAX_EXC && self.pending & (1 << exc) != 0
    }

    pub fn is_configured(&self, exc: u32) -> bool {
        exc < MAX_EXC && self.configured & (1 << exc) != 0
    }

    /// Deliverable = pending AND configured. PendSV is served only when no
    /// other exception is deliverable; the rest rotate round-robin.
    pub fn select(&mut self) -> Option<u32> {
        let deliverable = self.pending & self.configured;
        if deliverable == 0 {
            return None;
        }
        let non_pendsv = deliverable & !(1 << EXC_PENDSV);
        let set = if non_pendsv != 0 { non_pendsv } else { deliverable };
        let mut candidates: Vec<u32> = (0..MAX_EXC).filter(|e| set & (1 << e) != 0).collect();
        candidates.sort_unstable();
        let pick = candidates
            .iter()
            .find(|e| **e > self.rr_cursor)
            .or_else(|| candidates.first())
            .copied()?;
        self.rr_cursor = pick;
        self.pending &= !(1 << pick);
        Some(pick)
    }
}

/// Why a run crashed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CrashKind {
    MemFault {
        addr: u32,
        width: u8,
        access: String,
    },
    UndefinedInstr {
        pc: u32,
        raw: u32,
    },
    UnsupportedInstr {
        pc: u32,
        raw: u32,
    },
    /// Trap immediate with no table entry: rewriter/runtime version skew.
    UnknownTrap {
        pc: u32,
        imm8: u8,
    },
    InvalidExcReturn {
        value: u32,
    },
    /// An original (untranslated) breakpoint executed.
    BkptHit {
        pc: u32,
        imm8: u8,
    },
    /// Interworking branch with the thumb bit clear.
    InvalidState {
        target: u32,
    },
    UnsupportedCoprocessor {
        pc: u32,
        raw: u32,
    },
    /// pc landed on a trampoline head with no stub registered.
    UnknownTrampoline {
        pc: u32,
    },
    UnknownHandler {
        id: String,
    },
    HandlerPanic {
        id: String,
        message: String,
    },
}

impl CrashKind {
    pub fn from_fault(f: FaultError) -> CrashKind {
        CrashKind::MemFault {
            addr: f.addr,
            width: f.width,
            access: f.access.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunStatus {
    Completed,
    Crashed { crash: CrashKind, pc: u32 },
    Timeout,
    InputExhausted,
    /// Internal to the harness: stopped right before the first
    /// input-consuming handler ran.
    SnapshotPoint,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Crashed { .. } => 2,
            RunStatus::Timeout => 3,
            RunStatus::InputExhausted => 4,
            RunStatus::SnapshotPoint => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event", content = "value")]
pub enum TraceEvent {
    /// Entered an instrumented block (trampoline hit).
    Block(u32),
    /// Exception delivered (vector number).
    Exception(u32),
    /// Executed instruction pc (instr-level tracing only).
    Instr(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: RunStatus,
    /// Virtual clock at exit (includes fast-forward jumps).
    pub instr_count: u64,
    /// Instructions the interpreter actually stepped.
    pub interpreted: u64,
    /// Coverage counter bytes (empty when coverage is off).
    pub coverage: Vec<u8>,
    pub final_state: CpuState,
    pub trace: Vec<TraceEvent>,
    /// Bytes written through the uart transmit handler.
    pub uart_out: Vec<u8>,
    pub handler_version: String,
    /// Words above the active stack pointer at exit (for crash dedup and
    /// call-stack symbolization).
    pub stack_words: Vec<u32>,
}

impl ExecutionOutcome {
    /// Canonical serialized form for determinism checks.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("outcome serializes")
    }
}
