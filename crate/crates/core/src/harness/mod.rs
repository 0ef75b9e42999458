//! Coverage-guided fuzzing on top of the runtime: snapshot/restore of the
//! post-initialization state, bitmap feedback, corpus and crash
//! management, mutation and triage replay.

mod fuzz;
mod triage;

pub use fuzz::{fuzz, CampaignReport, FuzzConfig, Mutator};
pub use triage::{triage, StackEntry, TriageReport};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use std::sync::Arc;

use crate::hlm::{HandlerManifest, HandlerRegistry};
use crate::rewriter::{TransplantedImage, COV_TABLE_SIZE};
use crate::runtime::{
    CrashKind, ExecutionOutcome, Executor, RunConfig, RunStatus,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("firmware did not reach its input-consumption point within {0} instructions")]
    InitTimeout(u64),
    #[error("firmware crashed during initialization: {0:?}")]
    InitCrash(Box<ExecutionOutcome>),
    #[error("firmware finished ({0:?}) without ever reading input; nothing to fuzz")]
    NoInputPoint(RunStatus),
    #[error("input does not reproduce a crash (outcome: {0:?})")]
    NotReproducible(RunStatus),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed-size byte-counter bitmap keyed by instrumented block buckets.
/// Counters only move when trampolines execute, so the covered set is a
/// lower bound on the blocks actually executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub counters: Vec<u8>,
}

/// AFL-style hit-count bucketing: 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+.
pub fn bucketize(count: u8) -> u8 {
    match count {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 3,
        4..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=127 => 7,
        _ => 8,
    }
}

impl CoverageMap {
    pub fn from_outcome(outcome: &ExecutionOutcome) -> CoverageMap {
        let mut counters = outcome.coverage.clone();
        counters.resize(COV_TABLE_SIZE as usize, 0);
        CoverageMap { counters }
    }

    /// Instrumented blocks whose bucket counter moved.
    pub fn covered_blocks(&self, timage: &TransplantedImage) -> Vec<u32> {
        timage
            .trampolines
            .iter()
            .filter(|(_, spec)| self.counters[spec.bucket as usize] > 0)
            .map(|(start, _)| *start)
            .collect()
    }

    /// Coverage signature: sha256 over the bucketed counter array; equal
    /// signatures mean equal hit-count profiles.
    pub fn signature(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.counters {
            h.update([bucketize(*c)]);
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Captured post-initialization state: restoring it and feeding identical
/// inputs reproduces identical outcomes.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: crate::runtime::ExecutorState,
    pub instr_count: u64,
    pub input_cursor: usize,
}

/// Everything the harness needs to run one target.
pub struct Target {
    pub timage: Arc<TransplantedImage>,
    pub registry: Arc<HandlerRegistry>,
    pub manifest: HandlerManifest,
}

impl Target {
    pub fn executor(&self) -> Executor {
        Executor::new_transplanted(
            &self.timage,
            Some(Arc::clone(&self.registry)),
            Some(&self.manifest),
        )
    }
}

/// Run initialization once and capture a snapshot immediately before the
/// first input byte would be consumed.
pub fn snapshot_at_entry(target: &Target, init_budget: u64) -> Result<Snapshot, HarnessError> {
    let mut ex = target.executor();
    let outcome = ex.run(
        Vec::new(),
        &RunConfig {
            budget: init_budget,
            stop_at_input_read: true,
            ..RunConfig::default()
        },
    );
    match outcome.status {
        RunStatus::SnapshotPoint => Ok(Snapshot {
            state: ex.snapshot_state(),
            instr_count: outcome.instr_count,
            input_cursor: ex.input.cursor,
        }),
        RunStatus::Timeout => Err(HarnessError::InitTimeout(init_budget)),
        RunStatus::Crashed { .. } => Err(HarnessError::InitCrash(Box::new(outcome))),
        other => Err(HarnessError::NoInputPoint(other)),
    }
}

/// One post-snapshot execution with the given input.
pub fn run_from_snapshot(
    target: &Target,
    snapshot: &Snapshot,
    input: &[u8],
    budget: u64,
    trace: crate::runtime::TraceMode,
) -> ExecutionOutcome {
    let mut ex = target.executor();
    ex.restore_state(&snapshot.state);
    ex.input = crate::hlm::InputStream::new(input.to_vec());
    ex.run_from_current_state(&RunConfig {
        budget,
        trace,
        stop_at_input_read: false,
    })
}

/// Crash dedup key: fault kind, faulting pc, top-of-stack return address.
pub fn dedup_key(timage: &TransplantedImage, outcome: &ExecutionOutcome) -> Option<String> {
    let RunStatus::Crashed { crash, pc } = &outcome.status else {
        return None;
    };
    let ret = top_return_address(timage, outcome).unwrap_or(0);
    Some(format!("{}@{pc:08x}@{ret:08x}", crash_tag(crash)))
}

pub(crate) fn crash_tag(crash: &CrashKind) -> String {
    match crash {
        CrashKind::MemFault { addr, access, .. } => format!("mem_{access}_{addr:08x}"),
        CrashKind::UndefinedInstr { .. } => "undefined".into(),
        CrashKind::UnsupportedInstr { .. } => "unsupported".into(),
        CrashKind::UnknownTrap { imm8, .. } => format!("unknown_trap_{imm8}"),
        CrashKind::InvalidExcReturn { value } => format!("bad_exc_return_{value:08x}"),
        CrashKind::BkptHit { imm8, .. } => format!("bkpt_{imm8}"),
        CrashKind::InvalidState { .. } => "invalid_state".into(),
        CrashKind::UnsupportedCoprocessor { .. } => "coproc".into(),
        CrashKind::UnknownTrampoline { .. } => "unknown_trampoline".into(),
        CrashKind::UnknownHandler { id } => format!("unknown_handler_{id}"),
        CrashKind::HandlerPanic { id, .. } => format!("handler_panic_{id}"),
    }
}

/// Scan the crashed stack for the first plausible return address (odd,
/// inside an executable region).
pub(crate) fn top_return_address(
    timage: &TransplantedImage,
    outcome: &ExecutionOutcome,
) -> Option<u32> {
    stack_return_addresses(timage, outcome).into_iter().next()
}

/// Plausible return addresses: the live lr first, then odd words on the
/// captured stack that point into executable regions.
pub(crate) fn stack_return_addresses(
    timage: &TransplantedImage,
    outcome: &ExecutionOutcome,
) -> Vec<u32> {
    let map = &timage.base.map;
    let mut out = Vec::new();
    let lr = outcome.final_state.r[14];
    if lr & 1 == 1 && map.executable_at(lr & !1) {
        out.push(lr & !1);
    }
    for w in &outcome.stack_words {
        if w & 1 == 1 && map.executable_at(w & !1) {
            let a = w & !1;
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::hlm;
    use crate::rewriter::{self, PlanOptions};
    use crate::runtime::TraceMode;
    use std::time::Duration;

    pub(super) fn uart_target() -> Target {
        let prog = corpus::uart_guard();
        let image = prog.image();
        let manifest = hlm::builtin_manifest();
        let (timage, _, _) =
            rewriter::transplant(&image, Some(&manifest), PlanOptions { coverage: true }).unwrap();
        Target {
            timage: Arc::new(timage),
            registry: Arc::new(hlm::builtin_registry()),
            manifest,
        }
    }

    #[test]
    fn snapshot_sits_before_first_input_read() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        assert_eq!(snap.input_cursor, 0);
        assert!(snap.instr_count > 0);
        // Determinism: two snapshots are identical.
        let snap2 = snapshot_at_entry(&target, 100_000).unwrap();
        assert_eq!(snap.state, snap2.state);
        assert_eq!(snap.instr_count, snap2.instr_count);
    }

    #[test]
    fn restore_then_run_is_reproducible() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let a = run_from_snapshot(&target, &snap, b"fooo", 100_000, TraceMode::None);
        let b = run_from_snapshot(&target, &snap, b"fooo", 100_000, TraceMode::None);
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
    }

    #[test]
    fn coverage_is_lower_bound_of_trace() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let outcome = run_from_snapshot(&target, &snap, b"BUG!", 100_000, TraceMode::Instrs);
        let cov = CoverageMap::from_outcome(&outcome);
        let covered = cov.covered_blocks(&target.timage);
        let executed: std::collections::BTreeSet<u32> = outcome
            .trace
            .iter()
            .filter_map(|e| match e {
                crate::runtime::TraceEvent::Instr(pc) => Some(*pc),
                _ => None,
            })
            .collect();
        assert!(!covered.is_empty());
        for b in covered {
            assert!(
                executed.contains(&b),
                "covered block {b:#010x} never executed"
            );
        }
    }

    #[test]
    fn crash_dedup_key_is_stable() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let a = run_from_snapshot(&target, &snap, b"BUG!", 100_000, TraceMode::None);
        let b = run_from_snapshot(&target, &snap, b"BUG!", 100_000, TraceMode::None);
        let ka = dedup_key(&target.timage, &a).expect("crash expected");
        let kb = dedup_key(&target.timage, &b).expect("crash expected");
        assert_eq!(ka, kb);
    }

    #[test]
    fn fuzz_finds_the_guard() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let report = fuzz(
            &target,
            &snap,
            &FuzzConfig {
                exec_budget: 1_000_000,
                wall_budget: Duration::from_secs(240),
                instr_budget: 200_000,
                ..FuzzConfig::default()
            },
        )
        .unwrap();
        assert!(
            report.crash_groups >= 1,
            "no crash in {} execs: {report:?}",
            report.execs
        );
    }

    #[test]
    fn triage_reports_and_refuses() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let report = triage(&target, &snap, b"BUG!", 100_000).unwrap();
        assert!(report.fault.starts_with("mem_write_60000000"));
        assert_eq!(report.pc_symbol.as_deref(), Some("main"));
        let again = triage(&target, &snap, b"BUG!", 100_000).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        let err = triage(&target, &snap, b"nope", 100_000).unwrap_err();
        assert!(matches!(err, HarnessError::NotReproducible(_)));
    }

    #[test]
    fn corpus_signatures_distinct_and_monotone() {
        let target = uart_target();
        let snap = snapshot_at_entry(&target, 100_000).unwrap();
        let report = fuzz(
            &target,
            &snap,
            &FuzzConfig {
                exec_budget: 3000,
                stop_on_crash: false,
                ..FuzzConfig::default()
            },
        )
        .unwrap();
        // Coverage series is nondecreasing.
        for w in report.coverage_series.windows(2) {
            assert!(w[0].1 <= w[1].1, "coverage shrank: {:?}", report.coverage_series);
        }
        assert!(report.corpus_len >= 1);
    }
}
