//! The executor owns one mutable (CpuState, memory, clock) set and drives
//! execution from the reset vector until an outcome is reached. Transplanted
//! and original images both run here; the trap table, trampoline map and
//! HAL redirects are simply absent for originals.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::exceptions::{exception_entry, exception_return};
use super::exec::cond_passed;
use super::{
    CpuState, CrashKind, ExecutionOutcome, Memory, Mode, PendingExceptions, RunStatus, TraceEvent,
    VirtualClock, EXC_PENDSV, EXC_SYSTICK,
};
use crate::hlm::{
    self, ControlTransfer, HalCallContext, HaltReason, HandlerError, HandlerManifest,
    HandlerRegistry, InputStream,
};
use crate::image::{FaultError, FirmwareImage};
use crate::rewriter::{TrampolineSpec, TransplantedImage, TrapKind, TrapTable, VendorLayout,
    VendorService};
use crate::thumb2::{self, CoprocOp, DecodeOutcome, Instruction, InstrKind, ItState};

// System control space registers the runtime models.
const SYST_CSR: u32 = 0xE000_E010;
const SYST_RVR: u32 = 0xE000_E014;
const SYST_CVR: u32 = 0xE000_E018;
const NVIC_ISER0: u32 = 0xE000_E100;
const NVIC_ICER0: u32 = 0xE000_E180;
const NVIC_ISPR0: u32 = 0xE000_E200;
const SCB_ICSR: u32 = 0xE000_ED04;
const SCB_VTOR: u32 = 0xE000_ED08;
const SCS_BASE: u32 = 0xE000_E000;
const SCS_END: u32 = 0xE000_F000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    None,
    Blocks,
    Instrs,
}

impl std::str::FromStr for TraceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(TraceMode::None),
            "blocks" => Ok(TraceMode::Blocks),
            "instrs" => Ok(TraceMode::Instrs),
            other => Err(format!("unknown trace mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    /// Virtual-clock budget (instructions, including fast-forward jumps).
    pub budget: u64,
    pub trace: TraceMode,
    /// Stop with `RunStatus::SnapshotPoint` right before the first
    /// input-consuming handler runs.
    pub stop_at_input_read: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget: 5_000_000,
            trace: TraceMode::None,
            stop_at_input_read: false,
        }
    }
}

pub(super) enum StepEvent {
    Normal,
    Trap { imm8: u8 },
    Service(VendorService),
    IdleHint,
}

enum Exit {
    Status(RunStatus),
}

/// Callback for coprocessor instructions outside the service space;
/// returns true when handled.
pub type CoprocHandler = fn(&mut CpuState, two: bool, coproc: u8, op: &CoprocOp) -> bool;

pub struct Executor {
    pub cpu: CpuState,
    pub mem: Memory,
    pub clock: VirtualClock,
    pub pending: PendingExceptions,
    pub input: InputStream,
    pub(super) branched: bool,
    interpreted: u64,
    uart_out: Vec<u8>,
    trace: Vec<TraceEvent>,
    trace_mode: TraceMode,
    vector_table_base: u32,
    trap_table: Option<TrapTable>,
    trampolines: BTreeMap<u32, TrampolineSpec>,
    hal_redirects: Vec<(u32, String)>,
    registry: Option<Arc<HandlerRegistry>>,
    consumes_input: BTreeSet<String>,
    pub coproc_handler: Option<CoprocHandler>,
    // SysTick register model.
    syst_rvr: u32,
    syst_enabled: bool,
    syst_tickint: bool,
    handler_version: String,
    stop_at_input_read: bool,
}

impl Executor {
    /// Executor over an original (untransplanted) image: the interpreter
    /// executes special instructions natively, serving as the differential
    /// oracle side.
    pub fn new_original(image: &FirmwareImage) -> Result<Executor, crate::rewriter::RewriteError> {
        let layout = VendorLayout::for_map(&image.map)?;
        Ok(Executor::build(image, layout, None, None, None))
    }

    /// Executor over a transplanted image with an optional handler
    /// registry and its manifest (for input-read snapshot hooks).
    pub fn new_transplanted(
        timage: &TransplantedImage,
        registry: Option<Arc<HandlerRegistry>>,
        manifest: Option<&HandlerManifest>,
    ) -> Executor {
        Executor::build(
            &timage.base,
            timage.layout,
            Some((
                timage.trap_table.clone(),
                timage.trampolines.clone(),
                timage.hal_redirects.clone(),
            )),
            registry,
            manifest,
        )
    }

    fn build(
        image: &FirmwareImage,
        layout: VendorLayout,
        transplant: Option<(TrapTable, BTreeMap<u32, TrampolineSpec>, Vec<(u32, String)>)>,
        registry: Option<Arc<HandlerRegistry>>,
        manifest: Option<&HandlerManifest>,
    ) -> Executor {
        let mem = Memory::new(image, layout);
        let cpu = CpuState::reset(image.initial_sp, image.entry_point);
        let (trap_table, trampolines, hal_redirects) = match transplant {
            Some((t, tr, h)) => (Some(t), tr, h),
            None => (None, BTreeMap::new(), Vec::new()),
        };
        let consumes_input = manifest
            .map(|m| {
                m.handlers
                    .iter()
                    .filter(|h| h.consumes_input)
                    .map(|h| h.handler_id.clone())
                    .collect()
            })
            .unwrap_or_default();
        let handler_version = registry
            .as_ref()
            .map(|r| r.version.clone())
            .unwrap_or_else(|| "none".into());
        Executor {
            cpu,
            mem,
            clock: VirtualClock::default(),
            pending: PendingExceptions::default(),
            input: InputStream::default(),
            branched: false,
            interpreted: 0,
            uart_out: Vec::new(),
            trace: Vec::new(),
            trace_mode: TraceMode::None,
            vector_table_base: image.vector_table_base,
            trap_table,
            trampolines,
            hal_redirects,
            registry,
            consumes_input,
            coproc_handler: None,
            syst_rvr: 1000,
            syst_enabled: false,
            syst_tickint: false,
            handler_version,
            stop_at_input_read: false,
        }
    }

    pub fn interpreted(&self) -> u64 {
        self.interpreted
    }

    pub fn uart_out(&self) -> &[u8] {
        &self.uart_out
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    // ---- memory with system-control interception ----

    pub(super) fn read_mem(&mut self, addr: u32, width: u8) -> Result<u32, FaultError> {
        if (SCS_BASE..SCS_END).contains(&addr) && self.mem.read(addr, width).is_ok() {
            return Ok(self.scs_read(addr));
        }
        self.mem.read(addr, width)
    }

    pub(super) fn write_mem(&mut self, addr: u32, width: u8, value: u32) -> Result<(), FaultError> {
        if (SCS_BASE..SCS_END).contains(&addr) {
            // Fault if the map does not declare the region.
            self.mem.write(addr, width, 0)?;
            self.scs_write(addr, value);
            return Ok(());
        }
        self.mem.write(addr, width, value)
    }

    fn scs_read(&self, addr: u32) -> u32 {
        match addr {
            SYST_CSR => (self.syst_enabled as u32) | ((self.syst_tickint as u32) << 1),
            SYST_RVR => self.syst_rvr,
            SYST_CVR => 0,
            SCB_ICSR => {
                let mut v = self.cpu.current_exc & 0x1FF;
                if self.pending.is_pending(EXC_PENDSV) {
                    v |= 1 << 28;
                }
                if self.pending.is_pending(EXC_SYSTICK) {
                    v |= 1 << 26;
                }
                v
            }
            SCB_VTOR => self.vector_table_base,
            a if (NVIC_ISER0..NVIC_ISER0 + 8).contains(&a) => {
                let word = (a - NVIC_ISER0) / 4;
                let mut bits = 0u32;
                for i in 0..32 {
                    if self.pending.is_configured(16 + word * 32 + i) {
                        bits |= 1 << i;
                    }
                }
                bits
            }
            _ => 0,
        }
    }

    fn scs_write(&mut self, addr: u32, value: u32) {
        match addr {
            SYST_CSR => {
                self.syst_enabled = value & 1 != 0;
                self.syst_tickint = value & 2 != 0;
                if self.syst_enabled && self.syst_tickint {
                    self.clock.program(EXC_SYSTICK, self.syst_rvr as u64);
                    self.pending.configure(EXC_SYSTICK);
                } else {
                    self.clock.disable(EXC_SYSTICK);
                }
            }
            SYST_RVR => self.syst_rvr = value & 0x00FF_FFFF,
            SCB_ICSR => {
                if value & (1 << 28) != 0 {
                    // The system-control write path is the one way PendSV
                    // becomes deliverable.
                    self.pending.configure(EXC_PENDSV);
                    self.pending.pend(EXC_PENDSV);
                }
                if value & (1 << 27) != 0 {
                    self.pending.clear_pending(EXC_PENDSV);
                }
                if value & (1 << 26) != 0 {
                    self.pending.configure(EXC_SYSTICK);
                    self.pending.pend(EXC_SYSTICK);
                }
                if value & (1 << 25) != 0 {
                    self.pending.clear_pending(EXC_SYSTICK);
                }
            }
            a if (NVIC_ISER0..NVIC_ISER0 + 8).contains(&a) => {
                let word = (a - NVIC_ISER0) / 4;
                for i in 0..32 {
                    if value & (1 << i) != 0 {
                        self.pending.configure(16 + word * 32 + i);
                    }
                }
            }
            a if (NVIC_ICER0..NVIC_ICER0 + 8).contains(&a) => {
                let word = (a - NVIC_ICER0) / 4;
                for i in 0..32 {
                    if value & (1 << i) != 0 {
                        self.pending.deconfigure(16 + word * 32 + i);
                    }
                }
            }
            a if (NVIC_ISPR0..NVIC_ISPR0 + 8).contains(&a) => {
                let word = (a - NVIC_ISPR0) / 4;
                for i in 0..32 {
                    if value & (1 << i) != 0 {
                        self.pending.pend(16 + word * 32 + i);
                    }
                }
            }
            _ => {}
        }
    }

    // ---- exceptions ----

    fn vector(&mut self, exc: u32) -> Option<u32> {
        let word = self
            .mem
            .read(self.vector_table_base + 4 * exc, 4)
            .ok()?;
        if word & 1 == 1 {
            Some(word)
        } else {
            None
        }
    }

    /// Synchronous exception entry (svc, handler-requested).
    pub(super) fn enter_exception_sync(
        &mut self,
        exc: u32,
        return_addr: u32,
    ) -> Result<(), CrashKind> {
        let vector = self.vector(exc).ok_or(CrashKind::MemFault {
            addr: self.vector_table_base + 4 * exc,
            width: 4,
            access: "execute".into(),
        })?;
        self.branched = true;
        if self.trace_mode != TraceMode::None {
            self.trace.push(TraceEvent::Exception(exc));
        }
        exception_entry(&mut self.cpu, &mut self.mem, exc, vector, return_addr)
    }

    pub(super) fn do_exception_return(&mut self, magic: u32) -> Result<(), CrashKind> {
        exception_return(&mut self.cpu, &mut self.mem, magic)
    }

    /// Mark due timers pending, then deliver one exception if permitted.
    /// Asynchronous delivery happens only in thread mode with PRIMASK
    /// clear; handlers run to completion (single priority level).
    fn tick_and_deliver(&mut self) -> Result<(), CrashKind> {
        let now = self.clock.instr_count;
        for t in &mut self.clock.timers {
            if t.enabled && t.next_fire <= now {
                if t.exc_num < super::MAX_EXC {
                    self.pending.pending |= 1 << t.exc_num;
                }
                t.next_fire += t.interval;
            }
        }
        if self.cpu.primask || self.cpu.mode == Mode::Handler {
            return Ok(());
        }
        if let Some(exc) = self.pending.select() {
            if let Some(vector) = self.vector(exc) {
                if self.trace_mode != TraceMode::None {
                    self.trace.push(TraceEvent::Exception(exc));
                }
                let return_addr = self.cpu.r[15];
                exception_entry(&mut self.cpu, &mut self.mem, exc, vector, return_addr)?;
            }
            // An unpopulated vector drops the pend rather than jumping
            // through zero; the pend was consumed either way.
        }
        Ok(())
    }

    /// Idle wait: jump the virtual clock straight to the next timer expiry.
    /// With no enabled timer the run completes gracefully.
    fn fast_forward(&mut self) -> Result<Option<Exit>, CrashKind> {
        match self.clock.next_fire() {
            None => Ok(Some(Exit::Status(RunStatus::Completed))),
            Some(t) => {
                self.clock.instr_count = self.clock.instr_count.max(t);
                self.tick_and_deliver()?;
                Ok(None)
            }
        }
    }

    // ---- traps and services ----

    fn trap_dispatch(&mut self, trap_pc: u32, imm8: u8) -> Result<Option<Exit>, CrashKind> {
        let table = match &self.trap_table {
            Some(t) => t,
            None => {
                // Original image: a breakpoint is a debug event we treat
                // as a crash signal.
                return Err(CrashKind::BkptHit { pc: trap_pc, imm8 });
            }
        };
        let kind = table
            .lookup(imm8)
            .ok_or(CrashKind::UnknownTrap { pc: trap_pc, imm8 })?
            .clone();
        match kind {
            TrapKind::SvcDispatch { .. } => {
                let return_addr = self.cpu.r[15];
                self.enter_exception_sync(super::EXC_SVCALL, return_addr)?;
            }
            TrapKind::CpsEnable { pri, .. } => {
                if pri {
                    self.cpu.primask = false;
                }
            }
            TrapKind::CpsDisable { pri, .. } => {
                if pri {
                    self.cpu.primask = true;
                }
            }
            TrapKind::SpecialReg { reg, write, rt } => {
                if write {
                    let v = self.cpu.reg(rt);
                    self.write_special(reg, v);
                } else {
                    let v = self.read_special_pub(reg);
                    self.cpu.set_reg(rt, v);
                }
            }
            TrapKind::Coproc { raw } => {
                return self.coproc_raw(trap_pc, raw).map(|_| None);
            }
            TrapKind::IdleLoop { resume_pc } => {
                self.cpu.r[15] = resume_pc;
                self.branched = true;
                return self.fast_forward();
            }
            TrapKind::Custom { raw } => {
                let hw1 = (raw >> 16) as u16;
                let outcome = if raw <= 0xFFFF {
                    thumb2::decode_at(raw as u16, None, trap_pc)
                } else {
                    thumb2::decode_at(hw1, Some(raw as u16), trap_pc)
                };
                match outcome {
                    DecodeOutcome::Decoded(i) if matches!(i.kind, InstrKind::Bkpt { .. }) => {
                        let orig = match i.kind {
                            InstrKind::Bkpt { imm8 } => imm8,
                            _ => unreachable!(),
                        };
                        return Err(CrashKind::BkptHit {
                            pc: trap_pc,
                            imm8: orig,
                        });
                    }
                    DecodeOutcome::Decoded(i) => {
                        // Re-execute the displaced original in place.
                        let saved_pc = self.cpu.r[15];
                        self.cpu.r[15] = trap_pc;
                        let ev = self.exec_instr(&i)?;
                        if !matches!(ev, StepEvent::Normal) {
                            return Err(CrashKind::UnknownTrap {
                                pc: trap_pc,
                                imm8,
                            });
                        }
                        if !self.branched {
                            self.cpu.r[15] = saved_pc;
                        }
                    }
                    _ => {
                        return Err(CrashKind::UndefinedInstr {
                            pc: trap_pc,
                            raw,
                        })
                    }
                }
            }
        }
        Ok(None)
    }

    pub(super) fn coproc_raw(&mut self, pc: u32, raw: u32) -> Result<(), CrashKind> {
        let hw1 = (raw >> 16) as u16;
        if let DecodeOutcome::Decoded(i) = thumb2::decode_at(hw1, Some(raw as u16), pc) {
            if let InstrKind::Coproc { two, coproc, op } = i.kind {
                if let Some(handler) = self.coproc_handler {
                    if handler(&mut self.cpu, two, coproc, &op) {
                        return Ok(());
                    }
                }
            }
        }
        Err(CrashKind::UnsupportedCoprocessor { pc, raw })
    }

    pub(super) fn coproc_exec(&mut self, instr: &Instruction) -> Result<StepEvent, CrashKind> {
        self.coproc_raw(instr.address, instr.raw)
            .map(|_| StepEvent::Normal)
    }

    fn stub_branch(&mut self, head_pc: u32, bucket: u16) -> Result<Option<Exit>, CrashKind> {
        let spec = *self
            .trampolines
            .get(&head_pc)
            .ok_or(CrashKind::UnknownTrampoline { pc: head_pc })?;
        // Coverage update lands in the vendor-region counter table, then
        // the pending-interrupt check runs before the displaced
        // instructions execute in the stub.
        debug_assert_eq!(spec.bucket, bucket, "metadata/instruction bucket skew");
        self.mem.bump_coverage(spec.bucket);
        if self.trace_mode != TraceMode::None {
            self.trace.push(TraceEvent::Block(head_pc));
        }
        self.cpu.r[15] = spec.stub;
        self.branched = true;
        self.tick_and_deliver()?;
        Ok(None)
    }

    fn hal_call(&mut self, call_pc: u32, index: u32) -> Result<Option<Exit>, CrashKind> {
        let (_, handler_id) = self
            .hal_redirects
            .get(index as usize)
            .cloned()
            .ok_or(CrashKind::UnknownTrampoline { pc: call_pc })?;
        if self.stop_at_input_read && self.consumes_input.contains(&handler_id) {
            // Rewind so the resumed run re-executes this call.
            self.cpu.r[15] = call_pc;
            return Ok(Some(Exit::Status(RunStatus::SnapshotPoint)));
        }
        let registry = match &self.registry {
            Some(r) => Arc::clone(r),
            None => {
                return Err(CrashKind::UnknownHandler {
                    id: handler_id.clone(),
                })
            }
        };
        let transfer = {
            let mut ctx = HalCallContext {
                cpu: &mut self.cpu,
                mem: &mut self.mem,
                input: &mut self.input,
                clock: &mut self.clock,
                pending: &mut self.pending,
                uart_out: &mut self.uart_out,
            };
            hlm::invoke(&registry, &handler_id, &mut ctx)
        };
        match transfer {
            Ok(ControlTransfer::ReturnToCaller) => {
                let lr = self.cpu.r[14];
                self.branch_interworking(lr)?;
                Ok(None)
            }
            Ok(ControlTransfer::EnterException(exc)) => {
                let return_addr = self.cpu.r[14] & !1;
                self.enter_exception_sync(exc, return_addr)?;
                Ok(None)
            }
            Ok(ControlTransfer::Halt(HaltReason::InputExhausted)) => {
                Ok(Some(Exit::Status(RunStatus::InputExhausted)))
            }
            Err(HandlerError::Unknown(id)) => Err(CrashKind::UnknownHandler { id }),
            Err(HandlerError::Memory(f)) => Err(CrashKind::from_fault(f)),
            Err(HandlerError::Failed(message)) => Err(CrashKind::HandlerPanic {
                id: handler_id,
                message,
            }),
        }
    }

    // ---- the run loop ----

    /// Execute until completion, crash, timeout or input exhaustion.
    /// Deterministic for a given (image, input, budget, registry version).
    pub fn run(&mut self, input: Vec<u8>, config: &RunConfig) -> ExecutionOutcome {
        self.input = InputStream::new(input);
        self.run_from_current_state(config)
    }

    /// Continue from the current architectural state (used after snapshot
    /// restore; the input stream is set by the caller).
    pub fn run_from_current_state(&mut self, config: &RunConfig) -> ExecutionOutcome {
        self.trace_mode = config.trace;
        self.stop_at_input_read = config.stop_at_input_read;
        let status = loop {
            if self.clock.instr_count >= config.budget {
                break RunStatus::Timeout;
            }
            match self.step() {
                Ok(None) => {}
                Ok(Some(Exit::Status(s))) => break s,
                Err(crash) => {
                    break RunStatus::Crashed {
                        pc: self.cpu.r[15],
                        crash,
                    }
                }
            }
        };
        let mut stack_words = Vec::with_capacity(64);
        let sp = self.cpu.sp();
        for i in 0..64 {
            match self.mem.read(sp.wrapping_add(4 * i), 4) {
                Ok(w) => stack_words.push(w),
                Err(_) => break,
            }
        }
        ExecutionOutcome {
            status,
            instr_count: self.clock.instr_count,
            interpreted: self.interpreted,
            coverage: self.mem.coverage_bytes(),
            final_state: self.cpu,
            trace: std::mem::take(&mut self.trace),
            uart_out: self.uart_out.clone(),
            handler_version: self.handler_version.clone(),
            stack_words,
        }
    }

    fn step(&mut self) -> Result<Option<Exit>, CrashKind> {
        let pc = self.cpu.r[15];
        let hw1 = self
            .mem
            .fetch16(pc)
            .map_err(CrashKind::from_fault)?;
        let outcome = if thumb2::is_wide_prefix(hw1) {
            let hw2 = self.mem.fetch16(pc + 2).map_err(CrashKind::from_fault)?;
            thumb2::decode_at(hw1, Some(hw2), pc)
        } else {
            thumb2::decode_at(hw1, None, pc)
        };
        let mut instr = match outcome {
            DecodeOutcome::Decoded(i) => i,
            DecodeOutcome::Undefined => {
                return Err(CrashKind::UndefinedInstr {
                    pc,
                    raw: hw1 as u32,
                })
            }
            DecodeOutcome::Unsupported(raw) => {
                return Err(CrashKind::UnsupportedInstr { pc, raw })
            }
        };

        // IT conditionality.
        let mut skip = false;
        if self.cpu.it_state.active() {
            instr.in_it_block = true;
            instr.condition = self.cpu.it_state.current_cond();
            self.cpu.it_state.advance();
            if let Some(cond) = instr.condition {
                skip = !cond_passed(cond, self.cpu.flags);
            }
        }

        self.interpreted += 1;
        self.clock.instr_count += 1;
        if self.trace_mode == TraceMode::Instrs {
            self.trace.push(TraceEvent::Instr(pc));
        }

        self.branched = false;
        let event = if skip {
            StepEvent::Normal
        } else {
            self.exec_instr(&instr)?
        };
        if !self.branched {
            self.cpu.r[15] = pc + instr.width as u32;
        }

        let exit = match event {
            StepEvent::Normal => None,
            StepEvent::Trap { imm8 } => self.trap_dispatch(pc, imm8)?,
            StepEvent::Service(VendorService::StubBranch { bucket }) => {
                self.stub_branch(pc, bucket)?
            }
            StepEvent::Service(VendorService::HalCall { index }) => self.hal_call(pc, index)?,
            StepEvent::IdleHint => self.fast_forward()?,
        };
        if exit.is_some() {
            return Ok(exit);
        }
        self.tick_and_deliver()?;
        Ok(None)
    }

    // ---- snapshot support (used by the harness) ----

    pub fn snapshot_state(&self) -> ExecutorState {
        ExecutorState {
            cpu: self.cpu,
            writable: self.mem.snapshot_writable(),
            clock: self.clock.clone(),
            pending: self.pending,
            input_cursor: self.input.cursor,
            interpreted: self.interpreted,
            uart_len: self.uart_out.len(),
            syst: (self.syst_rvr, self.syst_enabled, self.syst_tickint),
        }
    }

    pub fn restore_state(&mut self, s: &ExecutorState) {
        self.cpu = s.cpu;
        self.mem.restore_writable(&s.writable);
        self.clock = s.clock.clone();
        self.pending = s.pending;
        self.input.cursor = s.input_cursor;
        self.interpreted = s.interpreted;
        self.uart_out.truncate(s.uart_len);
        let (rvr, en, ti) = s.syst;
        self.syst_rvr = rvr;
        self.syst_enabled = en;
        self.syst_tickint = ti;
        self.trace.clear();
    }
}

/// Complete mutable executor state: restoring it and replaying identical
/// input reproduces identical outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorState {
    pub cpu: CpuState,
    pub writable: Vec<(usize, Vec<u8>)>,
    pub clock: VirtualClock,
    pub pending: PendingExceptions,
    pub input_cursor: usize,
    pub interpreted: u64,
    pub uart_len: usize,
    pub syst: (u32, bool, bool),
}

impl Executor {
    /// Reset-time IT state sanity for randomized-state tests.
    pub fn force_it_state(&mut self, it: ItState) {
        self.cpu.it_state = it;
    }
}
