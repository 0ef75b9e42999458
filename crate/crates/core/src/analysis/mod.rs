//! Static analysis over loaded firmware: basic-block recovery, special
//! instruction classification, encoding-space sweeps and HAL function
//! matching.

pub mod blocks;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hlm::{Fidelity, HandlerManifest};
use crate::image::FirmwareImage;
use crate::thumb2::{self, DecodeOutcome, HintOp, Instruction, InstrKind, SpecialReg};

pub use blocks::{default_roots, is_relocatable, recover_blocks, TRAMPOLINE_FOOTPRINT};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("sweep budget {0} is below the 65,536 required for the 16-bit space")]
    InvalidBudget(u64),
    #[error("handler manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UninstrumentableReason {
    TooSmall,
    PcRelativeHead,
    ItBlockHead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub start: u32,
    /// Exclusive.
    pub end: u32,
    pub instr_count: u32,
    pub successors: Vec<u32>,
    pub instrumentable: bool,
    pub reason_uninstrumentable: Option<UninstrumentableReason>,
}

impl BasicBlock {
    pub fn len(&self) -> u32 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    /// Valid on Armv7-M, outside the implemented decode subset.
    Unsupported,
    /// Architecturally undefined encoding.
    Undefined,
    /// Traversal left every executable region.
    NotExecutable,
}

/// A point where traversal stopped without consuming an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeBarrier {
    pub address: u32,
    pub raw: u32,
    pub kind: BarrierKind,
}

/// Taxonomy of instructions whose bare-metal semantics differ from an
/// unprivileged user-space context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteCategory {
    SoftwareInterrupt,
    CpuStateChange,
    CoprocessorIo,
    SpecialRegisterAccess,
    InfiniteLoop,
    HalCall,
}

impl SiteCategory {
    pub fn name(self) -> &'static str {
        match self {
            SiteCategory::SoftwareInterrupt => "software_interrupt",
            SiteCategory::CpuStateChange => "cpu_state_change",
            SiteCategory::CoprocessorIo => "coprocessor_io",
            SiteCategory::SpecialRegisterAccess => "special_register_access",
            SiteCategory::InfiniteLoop => "infinite_loop",
            SiteCategory::HalCall => "hal_call",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteStrategy {
    /// Replace in place with equal-or-smaller footprint.
    InlineSubstitute,
    /// Replace with a `bkpt` trap (plus padding for 4-byte originals).
    Trap,
    /// Redirect a function entry to a native handler.
    HandlerBranch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialSite {
    pub address: u32,
    pub category: SiteCategory,
    #[serde(skip)]
    pub instr: Option<Instruction>,
    pub raw: u32,
    pub width: u8,
    pub rewrite_strategy: RewriteStrategy,
    pub in_it_block: bool,
}

/// Classify a single instruction against the special-instruction taxonomy.
/// Returns None for instructions whose semantics carry over unchanged.
pub fn classify_instr(instr: &Instruction) -> Option<(SiteCategory, RewriteStrategy)> {
    use RewriteStrategy::*;
    use SiteCategory::*;
    match instr.kind {
        InstrKind::Svc { .. } => Some((SoftwareInterrupt, Trap)),
        InstrKind::Bkpt { .. } => Some((SoftwareInterrupt, Trap)),
        InstrKind::Cps { .. } => Some((CpuStateChange, Trap)),
        InstrKind::Hint16 {
            op: HintOp::Wfi | HintOp::Wfe,
        }
        | InstrKind::Hint32 {
            op: HintOp::Wfi | HintOp::Wfe,
        } => Some((CpuStateChange, Trap)),
        InstrKind::Mrs { sysm, .. } | InstrKind::Msr { sysm, .. } => {
            match SpecialReg::from_sysm(sysm) {
                // Banked stack pointers substitute inline with a vmov
                // bank move; APSR behaves identically in user space.
                SpecialReg::Msp | SpecialReg::Psp | SpecialReg::Apsr => {
                    Some((SpecialRegisterAccess, InlineSubstitute))
                }
                _ => Some((SpecialRegisterAccess, Trap)),
            }
        }
        InstrKind::Coproc { .. } => Some((CoprocessorIo, Trap)),
        _ if instr.is_branch_to_self() => Some((InfiniteLoop, Trap)),
        _ => None,
    }
}

/// List every special site in the recovered blocks, exactly once, ordered
/// by address.
pub fn classify_sites(image: &FirmwareImage, blocks: &[BasicBlock]) -> Vec<SpecialSite> {
    let mut sites = Vec::new();
    for block in blocks {
        let mut addr = block.start;
        let mut it = thumb2::ItState::default();
        while addr < block.end {
            let instr = match decode_one(image, addr) {
                Some(mut i) => {
                    if it.active() {
                        i.in_it_block = true;
                        i.condition = it.current_cond();
                        it.advance();
                    } else if let InstrKind::It { firstcond, mask } = i.kind {
                        it = thumb2::ItState::start(firstcond, mask);
                    }
                    i
                }
                None => break,
            };
            if let Some((category, strategy)) = classify_instr(&instr) {
                sites.push(SpecialSite {
                    address: addr,
                    category,
                    raw: instr.raw,
                    width: instr.width,
                    rewrite_strategy: strategy,
                    in_it_block: instr.in_it_block,
                    instr: Some(instr),
                });
            }
            addr += instr.width as u32;
        }
    }
    sites.sort_by_key(|s| s.address);
    sites.dedup_by_key(|s| s.address);
    sites
}

pub(crate) fn decode_one(image: &FirmwareImage, addr: u32) -> Option<Instruction> {
    let hw1 = image.read(addr, 2).ok()? as u16;
    let outcome = if thumb2::is_wide_prefix(hw1) {
        thumb2::decode_at(hw1, Some(image.read(addr + 2, 2).ok()? as u16), addr)
    } else {
        thumb2::decode_at(hw1, None, addr)
    };
    outcome.instruction()
}

// ---- encoding-space sweep ----

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepCounts {
    pub total: u64,
    pub decoded: u64,
    pub undefined: u64,
    pub unsupported: u64,
    /// Special-site category -> count.
    pub categories: BTreeMap<String, u64>,
    /// Mnemonic -> count, for classified special instructions only.
    pub special_mnemonics: BTreeMap<String, u64>,
}

impl SweepCounts {
    fn record(&mut self, outcome: &DecodeOutcome) {
        self.total += 1;
        match outcome {
            DecodeOutcome::Decoded(i) => {
                self.decoded += 1;
                if let Some((cat, _)) = classify_instr(i) {
                    *self.categories.entry(cat.name().into()).or_default() += 1;
                    *self
                        .special_mnemonics
                        .entry(base_mnemonic(i))
                        .or_default() += 1;
                }
            }
            DecodeOutcome::Undefined => self.undefined += 1,
            DecodeOutcome::Unsupported(_) => self.unsupported += 1,
        }
    }
}

fn base_mnemonic(i: &Instruction) -> String {
    let m = i.mnemonic();
    m.trim_end_matches(".w")
        .trim_end_matches(|c: char| c.is_ascii_digit() && m.starts_with("cps"))
        .to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub budget: u64,
    pub seed: u64,
    /// Full 16-bit space (exhaustive).
    pub half: SweepCounts,
    /// Uniformly sampled 32-bit space.
    pub wide: SweepCounts,
}

/// Forcefully disassemble the whole 16-bit space plus `budget - 65_536`
/// sampled 32-bit values and classify the outcomes. Deterministic for a
/// given seed.
pub fn sweep_classify(sample_budget: u64, seed: u64) -> Result<SweepReport, AnalysisError> {
    use rand::{Rng, SeedableRng};
    if sample_budget < 65_536 {
        return Err(AnalysisError::InvalidBudget(sample_budget));
    }
    let mut report = SweepReport {
        budget: sample_budget,
        seed,
        half: SweepCounts::default(),
        wide: SweepCounts::default(),
    };
    // The classifier needs an address to detect branch-to-self; the sweep
    // decodes at a fixed canonical address, which the b-to-self check is
    // invariant over (target == own address).
    const ADDR: u32 = 0x0800_0000;
    for raw in 0..=0xFFFFu16 {
        if thumb2::is_wide_prefix(raw) {
            continue;
        }
        report
            .half
            .record(&thumb2::decode_at(raw, None, ADDR));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_budget - 65_536 {
        let v: u32 = rng.gen();
        let hw1 = (v >> 16) as u16;
        let outcome = if thumb2::is_wide_prefix(hw1) {
            thumb2::decode_at(hw1, Some(v as u16), ADDR)
        } else {
            thumb2::decode_at(hw1, None, ADDR)
        };
        report.wide.record(&outcome);
    }
    Ok(report)
}

// ---- HAL matching ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalMatch {
    pub symbol: String,
    /// Thumb-bit-normalized function entry.
    pub address: u32,
    pub handler_id: String,
    pub fidelity: Fidelity,
    /// True when found by byte signature rather than symbol name.
    pub by_signature: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityWarning {
    pub handler_id: String,
    pub candidates: Vec<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HalMatchReport {
    pub matches: Vec<HalMatch>,
    pub ambiguous: Vec<AmbiguityWarning>,
    /// Handlers whose symbols and signatures matched nothing.
    pub unresolved: Vec<String>,
}

/// Match manifest handlers against the image: exact symbol-table match
/// first, byte-signature prefix match as fallback. Ambiguous signature
/// matches are reported, never auto-applied.
pub fn match_hal(image: &FirmwareImage, manifest: &HandlerManifest) -> HalMatchReport {
    let mut report = HalMatchReport::default();
    for entry in &manifest.handlers {
        let mut matched = false;
        for sym_name in &entry.symbols {
            if let Some(sym) = image.symbol_named(sym_name) {
                report.matches.push(HalMatch {
                    symbol: sym.name.clone(),
                    address: sym.address & !1,
                    handler_id: entry.handler_id.clone(),
                    fidelity: entry.fidelity,
                    by_signature: false,
                });
                matched = true;
                break;
            }
        }
        if matched {
            continue;
        }
        if let Some(sig) = &entry.signature_hex {
            match scan_signature(image, sig) {
                Ok(hits) if hits.len() == 1 => {
                    report.matches.push(HalMatch {
                        symbol: entry
                            .symbols
                            .first()
                            .cloned()
                            .unwrap_or_else(|| entry.handler_id.clone()),
                        address: hits[0],
                        handler_id: entry.handler_id.clone(),
                        fidelity: entry.fidelity,
                        by_signature: true,
                    });
                    continue;
                }
                Ok(hits) if hits.len() > 1 => {
                    report.ambiguous.push(AmbiguityWarning {
                        handler_id: entry.handler_id.clone(),
                        candidates: hits,
                    });
                    continue;
                }
                _ => {}
            }
        }
        report.unresolved.push(entry.handler_id.clone());
    }
    report.matches.sort_by_key(|m| m.address);
    report
}

/// Byte-prefix scan with `??` wildcards over executable regions, stepping
/// by instruction alignment.
fn scan_signature(image: &FirmwareImage, sig: &str) -> Result<Vec<u32>, AnalysisError> {
    let cleaned: String = sig.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.len() % 2 != 0 {
        return Err(AnalysisError::Manifest(format!(
            "signature `{sig}` has odd hex length"
        )));
    }
    let mut pattern = Vec::new();
    let bytes: Vec<char> = cleaned.chars().collect();
    for pair in bytes.chunks(2) {
        if pair == ['?', '?'] {
            pattern.push(None);
        } else {
            let s: String = pair.iter().collect();
            pattern.push(Some(u8::from_str_radix(&s, 16).map_err(|e| {
                AnalysisError::Manifest(format!("signature `{sig}`: {e}"))
            })?));
        }
    }
    if pattern.is_empty() {
        return Err(AnalysisError::Manifest("empty signature".into()));
    }
    let mut hits = Vec::new();
    for region in image.map.regions.iter().filter(|r| r.perms.execute) {
        let Some(bytes) = image.rom_bytes.get(&region.name) else {
            continue;
        };
        if bytes.len() < pattern.len() {
            continue;
        }
        for off in (0..=bytes.len() - pattern.len()).step_by(2) {
            let window = &bytes[off..off + pattern.len()];
            if pattern
                .iter()
                .zip(window)
                .all(|(p, b)| p.map_or(true, |v| v == *b))
            {
                hits.push(region.base + off as u32);
            }
        }
    }
    Ok(hits)
}

// ---- combined machine-readable report ----

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub blocks: Vec<BasicBlock>,
    pub barriers: Vec<DecodeBarrier>,
    pub sites: Vec<SpecialSite>,
    pub hal: HalMatchReport,
    pub block_count: usize,
    pub instrumentable_count: usize,
    /// Fraction of recovered blocks that cannot take a trampoline.
    pub skip_rate: f64,
}

pub fn analyze(image: &FirmwareImage, manifest: Option<&HandlerManifest>) -> AnalysisReport {
    let roots = default_roots(image);
    let (blocks, barriers) = recover_blocks(image, &roots);
    let sites = classify_sites(image, &blocks);
    let hal = manifest
        .map(|m| match_hal(image, m))
        .unwrap_or_default();
    let instrumentable_count = blocks.iter().filter(|b| b.instrumentable).count();
    let block_count = blocks.len();
    let skip_rate = if block_count == 0 {
        0.0
    } else {
        1.0 - instrumentable_count as f64 / block_count as f64
    };
    AnalysisReport {
        blocks,
        barriers,
        sites,
        hal,
        block_count,
        instrumentable_count,
        skip_rate,
    }
}

#[cfg(test)]
mod tests;
