//! Crash triage: replay an input, walk the crashed stack for return
//! addresses, symbolize, and report the final block trace.

use serde::Serialize;

use super::{crash_tag, stack_return_addresses, HarnessError, Snapshot, Target};
use crate::runtime::{RunStatus, TraceEvent, TraceMode};

#[derive(Debug, Clone, Serialize)]
pub struct StackEntry {
    pub address: u32,
    pub symbol: Option<String>,
    pub offset: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriageReport {
    pub dedup_key: String,
    pub fault: String,
    pub pc: u32,
    pub pc_symbol: Option<String>,
    pub call_stack: Vec<StackEntry>,
    /// Last instrumented blocks entered before the crash, oldest first.
    pub last_blocks: Vec<u32>,
    pub instr_count: u64,
}

fn symbolize(target: &Target, addr: u32) -> (Option<String>, u32) {
    match target.timage.base.symbol_at(addr) {
        Some(s) => (Some(s.name.clone()), addr.saturating_sub(s.address & !1)),
        None => (None, 0),
    }
}

/// Replay `input` from the snapshot; report the crash or refuse.
pub fn triage(
    target: &Target,
    snapshot: &Snapshot,
    input: &[u8],
    budget: u64,
) -> Result<TriageReport, HarnessError> {
    let outcome = super::run_from_snapshot(target, snapshot, input, budget, TraceMode::Blocks);
    let RunStatus::Crashed { crash, pc } = &outcome.status else {
        return Err(HarnessError::NotReproducible(outcome.status));
    };
    let (pc_symbol, _) = symbolize(target, *pc);
    let call_stack = stack_return_addresses(&target.timage, &outcome)
        .into_iter()
        .map(|a| {
            let (symbol, offset) = symbolize(target, a);
            StackEntry {
                address: a,
                symbol,
                offset,
            }
        })
        .collect();
    let mut last_blocks: Vec<u32> = outcome
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Block(b) => Some(*b),
            _ => None,
        })
        .collect();
    let keep = last_blocks.len().saturating_sub(32);
    last_blocks.drain(..keep);
    Ok(TriageReport {
        dedup_key: super::dedup_key(&target.timage, &outcome).unwrap_or_default(),
        fault: crash_tag(crash),
        pc: *pc,
        pc_symbol,
        call_stack,
        last_blocks,
        instr_count: outcome.instr_count,
    })
}
