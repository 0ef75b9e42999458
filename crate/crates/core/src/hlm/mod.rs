//! High-level peripheral modeling: native handlers keyed by `handler_id`,
//! invoked when execution reaches a redirected HAL function entry. The
//! handler reads its arguments straight from the procedure-call convention
//! (r0-r3, then the stack), may touch firmware RAM, consume fuzzing input,
//! configure virtual timers, and sets the return value in r0/r1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::image::FaultError;
use crate::runtime::{CpuState, Memory, PendingExceptions, VirtualClock};

pub const BUILTIN_REGISTRY_VERSION: &str = "builtin-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    /// Constant-return stub; peripheral behavior irrelevant to the
    /// firmware logic under test.
    Low,
    /// Behavioral model (data movement, timer configuration).
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub handler_id: String,
    /// Symbol names this handler attaches to (exact match).
    #[serde(default)]
    pub symbols: Vec<String>,
    /// Fallback byte-prefix signature, hex with `??` wildcards.
    #[serde(default)]
    pub signature_hex: Option<String>,
    pub fidelity: Fidelity,
    /// True for handlers that read fuzzing input; the harness snapshots
    /// right before the first such call.
    #[serde(default)]
    pub consumes_input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandlerManifest {
    pub version: String,
    pub handlers: Vec<ManifestEntry>,
}

impl HandlerManifest {
    pub fn from_json(text: &str) -> Result<HandlerManifest, crate::analysis::AnalysisError> {
        let m: HandlerManifest = serde_json::from_str(text)
            .map_err(|e| crate::analysis::AnalysisError::Manifest(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for h in &m.handlers {
            if !seen.insert(&h.handler_id) {
                return Err(crate::analysis::AnalysisError::Manifest(format!(
                    "duplicate handler_id `{}`",
                    h.handler_id
                )));
            }
        }
        Ok(m)
    }

    pub fn entry(&self, handler_id: &str) -> Option<&ManifestEntry> {
        self.handlers.iter().find(|h| h.handler_id == handler_id)
    }
}

/// Where execution goes after a handler returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlTransfer {
    /// Branch to lr, as a returned HAL function would.
    ReturnToCaller,
    /// Synchronously enter the given exception.
    EnterException(u32),
    /// Stop the run.
    Halt(HaltReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    InputExhausted,
}

#[derive(Debug, thiserror::Error)]
pub enum HandlerError {
    #[error("handler memory access failed: {0}")]
    Memory(#[from] FaultError),
    #[error("handler `{0}` is not registered")]
    Unknown(String),
    #[error("handler reported: {0}")]
    Failed(String),
}

/// Fuzzing input byte stream with a cursor; reads past the end signal
/// exhaustion and never wrap.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputStream {
    pub bytes: Vec<u8>,
    pub cursor: usize,
}

impl InputStream {
    pub fn new(bytes: Vec<u8>) -> InputStream {
        InputStream { bytes, cursor: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.cursor
    }

    /// Consume exactly `n` bytes, or None (cursor untouched) when fewer
    /// remain — a blocking receive would never complete.
    pub fn take(&mut self, n: usize) -> Option<&[u8]> {
        if self.remaining() < n {
            return None;
        }
        let start = self.cursor;
        self.cursor += n;
        Some(&self.bytes[start..self.cursor])
    }
}

/// Everything a handler may observe or influence, bridged per the
/// procedure-call convention.
pub struct HalCallContext<'a> {
    pub cpu: &'a mut CpuState,
    pub mem: &'a mut Memory,
    pub input: &'a mut InputStream,
    pub clock: &'a mut VirtualClock,
    pub pending: &'a mut PendingExceptions,
    /// Bytes the firmware "transmitted"; observable in reports.
    pub uart_out: &'a mut Vec<u8>,
}

impl HalCallContext<'_> {
    /// Argument `k` per AAPCS: k < 4 from r0-r3, k >= 4 from the active
    /// stack at 4*(k-4) above sp.
    pub fn arg(&self, k: usize) -> Result<u32, FaultError> {
        if k < 4 {
            Ok(self.cpu.reg(k as u8))
        } else {
            let sp = self.cpu.sp();
            self.mem.read(sp + 4 * (k as u32 - 4), 4)
        }
    }

    /// 32-bit return value in r0.
    pub fn set_return(&mut self, value: u32) {
        self.cpu.set_reg(0, value);
    }

    /// 64-bit return value in r0:r1.
    pub fn set_return64(&mut self, value: u64) {
        self.cpu.set_reg(0, value as u32);
        self.cpu.set_reg(1, (value >> 32) as u32);
    }
}

pub type HandlerFn = fn(&mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError>;

/// Immutable registry mapping handler ids to native functions. Shared
/// read-only across executors.
pub struct HandlerRegistry {
    handlers: BTreeMap<String, HandlerFn>,
    pub version: String,
}

impl HandlerRegistry {
    pub fn new(version: &str) -> HandlerRegistry {
        HandlerRegistry {
            handlers: BTreeMap::new(),
            version: version.to_string(),
        }
    }

    pub fn register(&mut self, handler_id: &str, f: HandlerFn) {
        self.handlers.insert(handler_id.to_string(), f);
    }

    pub fn get(&self, handler_id: &str) -> Option<HandlerFn> {
        self.handlers.get(handler_id).copied()
    }

    pub fn contains(&self, handler_id: &str) -> bool {
        self.handlers.contains_key(handler_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(|s| s.as_str())
    }
}

/// Invoke a registered handler. Handler panics are caught and converted
/// into an error so a buggy model crashes the run, not the campaign.
pub fn invoke(
    registry: &HandlerRegistry,
    handler_id: &str,
    ctx: &mut HalCallContext<'_>,
) -> Result<ControlTransfer, HandlerError> {
    let f = registry
        .get(handler_id)
        .ok_or_else(|| HandlerError::Unknown(handler_id.to_string()))?;
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(ctx)));
    match result {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(HandlerError::Failed(format!("handler `{handler_id}` panicked: {msg}")))
        }
    }
}

mod builtins;
pub use builtins::{builtin_manifest, builtin_registry};
