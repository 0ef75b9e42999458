//! The transplantation phase: rewrite special sites, insert coverage
//! trampolines and HAL redirects, allocate trap identifiers, and emit the
//! transplanted image plus versioned metadata.
//!
//! Vendor region layout: stubs pack upward from the region base, 4-byte
//! aligned, below a fixed 1 MiB ceiling; the coverage counter table and a
//! small runtime scratch window sit above the ceiling. The layout is
//! recorded in the metadata sidecar.
//!
//! Two instruction-level devices are specific to the interpreter backend
//! recorded in the metadata (`interp-1`):
//!
//! * block-head trampoline branches are `cdp p7, ...` encodings carrying
//!   the coverage bucket in their operand fields, because a literal
//!   `b.w` cannot span from low rom addresses into the vendor region
//!   (±16 MiB range);
//! * HAL redirects are `cdp2 p7, ...` encodings carrying the redirect
//!   index.
//!
//! Both are ordinary coprocessor-7 encodings, so they decode, re-encode
//! and disassemble like any other instruction. Stubs return to the block
//! continuation with an architectural `ldr.w pc, [pc, #imm]` literal
//! branch.

mod persist;

pub use persist::{deserialize, serialize, METADATA_VERSION};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{BasicBlock, HalMatch, RewriteStrategy, SpecialSite};
use crate::image::FirmwareImage;
use crate::thumb2::{
    encode, BankCell, CoprocOp, HintOp, Instruction, InstrKind, MemSize, Reg, SpecialReg,
};

/// Coprocessor number carrying the backend's service encodings.
pub const SERVICE_COPROC: u8 = 7;
/// Stub area ceiling above the vendor region base.
pub const STUB_CEILING: u32 = 0x10_0000;
/// Coverage counter table size (one byte per bucket).
pub const COV_TABLE_SIZE: u32 = 0x1_0000;
/// Runtime scratch window above the coverage table.
pub const SCRATCH_SIZE: u32 = 0x1000;

pub const NOP16: u16 = 0xBF00;

#[derive(Debug, thiserror::Error)]
pub enum RewriteError {
    #[error("trap table exhausted: more than 255 distinct trap kinds")]
    TrapOverflow,
    #[error("mandatory special-site patch displaced: {0}")]
    PlanConflict(String),
    #[error("encoding range: {0}")]
    EncodingRange(String),
    #[error("vendor region too small: need at least {0:#x} bytes")]
    VendorTooSmall(u32),
    #[error("patch mismatch at {0:#010x}: image bytes differ from plan")]
    PatchMismatch(u32),
    #[error("metadata version `{found}` incompatible with `{supported}`")]
    Version { found: String, supported: String },
    #[error("metadata checksum mismatch (sidecar tampered or regions edited)")]
    Integrity,
    #[error("missing `{0}`: re-run `transplant` or point --image at its output directory")]
    MissingSidecar(String),
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("metadata: {0}")]
    Meta(String),
}

/// Emulation routine selector for one trap identifier. Identical
/// (opcode, operands) combinations share one entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrapKind {
    SvcDispatch { imm8: u8 },
    CpsEnable { pri: bool, fault: bool },
    CpsDisable { pri: bool, fault: bool },
    SpecialReg { reg: u8, write: bool, rt: u8 },
    Coproc { raw: u32 },
    IdleLoop { resume_pc: u32 },
    Custom { raw: u32 },
}

/// Trap identifiers: `bkpt` 8-bit immediates mapped to emulation
/// routines. imm8 0 is reserved as invalid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrapTable {
    pub entries: BTreeMap<u8, TrapKind>,
}

impl TrapTable {
    pub fn lookup(&self, imm8: u8) -> Option<&TrapKind> {
        self.entries.get(&imm8)
    }

    /// Stable allocation: hash the kind, then linear-probe over 1..=255 so
    /// re-transplanting the same firmware yields identical tables.
    pub fn get_or_alloc(&mut self, kind: TrapKind) -> Result<u8, RewriteError> {
        if let Some((imm8, _)) = self.entries.iter().find(|(_, k)| **k == kind) {
            return Ok(*imm8);
        }
        if self.entries.len() >= 255 {
            return Err(RewriteError::TrapOverflow);
        }
        let start = (stable_hash(&kind) % 255) as u8 + 1;
        let mut slot = start;
        loop {
            if !self.entries.contains_key(&slot) {
                self.entries.insert(slot, kind);
                return Ok(slot);
            }
            slot = if slot == 255 { 1 } else { slot + 1 };
            debug_assert_ne!(slot, start, "probe wrapped with free slots miscounted");
        }
    }
}

fn stable_hash(kind: &TrapKind) -> u64 {
    // FNV-1a over the canonical JSON form; stable across runs and builds.
    let json = serde_json::to_vec(kind).expect("trap kinds serialize");
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in json {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    HalRedirect,
    SpecialSite,
    TrampolineHead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub address: u32,
    pub before: Vec<u8>,
    pub after: Vec<u8>,
    pub kind: PatchKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedPatch {
    pub address: u32,
    pub kind: PatchKind,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrampolineSpec {
    pub stub: u32,
    pub bucket: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VendorLayout {
    pub stub_base: u32,
    pub stub_ceiling: u32,
    pub cov_base: u32,
    pub cov_size: u32,
    pub scratch_base: u32,
    pub scratch_size: u32,
}

impl VendorLayout {
    pub fn for_map(map: &crate::image::MemoryMap) -> Result<VendorLayout, RewriteError> {
        let vendor = map.vendor_region();
        let need = STUB_CEILING + COV_TABLE_SIZE + SCRATCH_SIZE;
        if vendor.size < need {
            return Err(RewriteError::VendorTooSmall(need));
        }
        Ok(VendorLayout {
            stub_base: vendor.base,
            stub_ceiling: vendor.base + STUB_CEILING,
            cov_base: vendor.base + STUB_CEILING,
            cov_size: COV_TABLE_SIZE,
            scratch_base: vendor.base + STUB_CEILING + COV_TABLE_SIZE,
            scratch_size: SCRATCH_SIZE,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewritePlan {
    pub patches: Vec<Patch>,
    pub dropped: Vec<DroppedPatch>,
    pub trap_table: TrapTable,
    pub trampolines: BTreeMap<u32, TrampolineSpec>,
    /// block_start -> original head bytes now living in the stub.
    pub displaced: BTreeMap<u32, Vec<u8>>,
    pub hal_redirects: Vec<(u32, String)>,
    pub vendor_stub_bytes: Vec<u8>,
    pub layout: VendorLayout,
    pub coverage: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOptions {
    pub coverage: bool,
}

/// The transplanted image: patched rom plus populated vendor region and
/// all runtime metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantedImage {
    pub base: FirmwareImage,
    pub trap_table: TrapTable,
    pub trampolines: BTreeMap<u32, TrampolineSpec>,
    pub displaced: BTreeMap<u32, Vec<u8>>,
    pub hal_redirects: Vec<(u32, String)>,
    pub layout: VendorLayout,
    pub coverage: bool,
    pub metadata_version: String,
    pub backend: String,
}

impl TransplantedImage {
    pub fn hal_redirect_at(&self, addr: u32) -> Option<&str> {
        self.hal_redirects
            .iter()
            .find(|(a, _)| *a == addr)
            .map(|(_, id)| id.as_str())
    }
}

/// Deterministic coverage bucket for a block start; collisions resolved by
/// linear probing at plan time so every instrumented block owns a bucket.
fn bucket_seed(block_start: u32) -> u16 {
    (((block_start >> 1).wrapping_mul(0x9E37_79B1)) >> 16) as u16
}

// ---- service encodings (coprocessor 7) ----

fn pack_service(v: u32) -> (u8, u8, u8, u8, u8) {
    debug_assert!(v < (1 << 19));
    (
        ((v >> 15) & 0xF) as u8,
        ((v >> 11) & 0xF) as u8,
        ((v >> 7) & 0xF) as u8,
        ((v >> 3) & 0xF) as u8,
        (v & 0x7) as u8,
    )
}

fn unpack_service(opc1: u8, crd: u8, crn: u8, crm: u8, opc2: u8) -> u32 {
    ((opc1 as u32) << 15)
        | ((crd as u32) << 11)
        | ((crn as u32) << 7)
        | ((crm as u32) << 3)
        | (opc2 as u32 & 7)
}

/// Trampoline head instruction: branch-to-stub carrying the coverage
/// bucket.
pub fn stub_branch_kind(bucket: u16) -> InstrKind {
    let (opc1, crd, crn, crm, opc2) = pack_service(bucket as u32);
    InstrKind::Coproc {
        two: false,
        coproc: SERVICE_COPROC,
        op: CoprocOp::Cdp {
            opc1,
            crd,
            crn,
            crm,
            opc2,
        },
    }
}

/// HAL redirect instruction carrying the redirect table index.
pub fn hal_call_kind(index: u32) -> InstrKind {
    let (opc1, crd, crn, crm, opc2) = pack_service(index);
    InstrKind::Coproc {
        two: true,
        coproc: SERVICE_COPROC,
        op: CoprocOp::Cdp {
            opc1,
            crd,
            crn,
            crm,
            opc2,
        },
    }
}

/// Backend service requests the interpreter recognizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VendorService {
    /// Coverage update + pending-interrupt check + branch to the stub
    /// registered for the executing address.
    StubBranch { bucket: u16 },
    /// Invoke hal_redirects[index].
    HalCall { index: u32 },
}

pub fn vendor_service(kind: &InstrKind) -> Option<VendorService> {
    match *kind {
        InstrKind::Coproc {
            two,
            coproc: SERVICE_COPROC,
            op:
                CoprocOp::Cdp {
                    opc1,
                    crd,
                    crn,
                    crm,
                    opc2,
                },
        } => {
            let v = unpack_service(opc1, crd, crn, crm, opc2);
            Some(if two {
                VendorService::HalCall { index: v }
            } else {
                VendorService::StubBranch { bucket: v as u16 }
            })
        }
        _ => None,
    }
}

// ---- planning ----

struct Planner<'a> {
    image: &'a FirmwareImage,
    plan: RewritePlan,
    /// Byte ranges already claimed, ordered by priority of insertion.
    claimed: Vec<(u32, u32, PatchKind)>,
}

impl Planner<'_> {
    fn overlaps(&self, start: u32, len: u32) -> Option<&(u32, u32, PatchKind)> {
        self.claimed
            .iter()
            .find(|(s, l, _)| start < s + l && *s < start + len)
    }

    fn push_patch(&mut self, patch: Patch) {
        self.claimed
            .push((patch.address, patch.after.len() as u32, patch.kind));
        self.plan.patches.push(patch);
    }

    fn original_bytes(&self, addr: u32, len: u32) -> Result<Vec<u8>, RewriteError> {
        Ok(self.image.read_bytes(addr, len).map_err(|e| {
            RewriteError::EncodingRange(format!("patch window {addr:#010x}+{len}: {e}"))
        })?)
    }
}

/// Produce the full rewrite plan. Conflicts resolve by priority
/// hal_redirect > special-site > trampoline; a dropped lower-priority
/// patch is reported in `dropped`.
pub fn plan(
    image: &FirmwareImage,
    blocks: &[BasicBlock],
    sites: &[SpecialSite],
    hal_matches: &[HalMatch],
    options: PlanOptions,
) -> Result<RewritePlan, RewriteError> {
    let layout = VendorLayout::for_map(&image.map)?;
    let mut planner = Planner {
        image,
        plan: RewritePlan {
            patches: Vec::new(),
            dropped: Vec::new(),
            trap_table: TrapTable::default(),
            trampolines: BTreeMap::new(),
            displaced: BTreeMap::new(),
            hal_redirects: Vec::new(),
            vendor_stub_bytes: Vec::new(),
            layout,
            coverage: options.coverage,
        },
        claimed: Vec::new(),
    };

    // 1. HAL redirects (highest priority).
    let mut matches: Vec<&HalMatch> = hal_matches.iter().collect();
    matches.sort_by_key(|m| m.address);
    for m in matches {
        let index = planner.plan.hal_redirects.len() as u32;
        if index >= 1 << 19 {
            return Err(RewriteError::EncodingRange(
                "more than 2^19 HAL redirects".into(),
            ));
        }
        // Cover whole instructions to at least 4 bytes.
        let window = instruction_window(image, m.address, 4).ok_or_else(|| {
            RewriteError::EncodingRange(format!(
                "HAL entry {:#010x} is not decodable",
                m.address
            ))
        })?;
        let before = planner.original_bytes(m.address, window)?;
        let mut after = encode(&hal_call_kind(index)).expect("service encoding fits");
        while (after.len() as u32) < window {
            after.extend_from_slice(&NOP16.to_le_bytes());
        }
        planner.plan.hal_redirects.push((m.address, m.handler_id.clone()));
        planner.push_patch(Patch {
            address: m.address,
            before,
            after,
            kind: PatchKind::HalRedirect,
        });
    }

    // 2. Special sites (mandatory).
    for site in sites {
        if let Some(&(s, _, kind)) = planner.overlaps(site.address, site.width as u32).copied().as_ref() {
            if kind == PatchKind::HalRedirect {
                // Dead code behind a redirect; dropping is the intent.
                planner.plan.dropped.push(DroppedPatch {
                    address: site.address,
                    kind: PatchKind::SpecialSite,
                    reason: format!("inside HAL redirect window at {s:#010x}"),
                });
                continue;
            }
            return Err(RewriteError::PlanConflict(format!(
                "special site at {:#010x} overlaps patch at {s:#010x}",
                site.address
            )));
        }
        if site.in_it_block {
            return Err(RewriteError::PlanConflict(format!(
                "special site at {:#010x} sits inside an IT block",
                site.address
            )));
        }
        let Some(patch) = special_site_patch(&mut planner, site)? else {
            continue; // semantics already equivalent, nothing to rewrite
        };
        planner.push_patch(patch);
    }

    // 3. Opportunistic coverage trampolines.
    if options.coverage {
        let mut stub_cursor = layout.stub_base;
        let mut used_buckets: BTreeMap<u16, u32> = BTreeMap::new();
        for block in blocks.iter().filter(|b| b.instrumentable) {
            let window = match instruction_window(image, block.start, 4) {
                Some(w) => w,
                None => continue,
            };
            if let Some(&(s, _, _)) = planner.overlaps(block.start, window).copied().as_ref() {
                planner.plan.dropped.push(DroppedPatch {
                    address: block.start,
                    kind: PatchKind::TrampolineHead,
                    reason: format!("head overlaps higher-priority patch at {s:#010x}"),
                });
                continue;
            }
            // Collision-free bucket assignment, deterministic ordering.
            let mut bucket = bucket_seed(block.start);
            while used_buckets.contains_key(&bucket) {
                bucket = bucket.wrapping_add(1);
            }
            used_buckets.insert(bucket, block.start);

            let displaced = planner.original_bytes(block.start, window)?;
            let continuation = block.start + window;
            let stub = stub_cursor;
            let mut stub_bytes = displaced.clone();
            // ldr.w pc, [pc, #imm] -> literal holding continuation|1.
            // Literal must be 4-aligned: pc reads as Align(stub_pos+4, 4).
            let ldr_at = stub + stub_bytes.len() as u32;
            let lit_at = (ldr_at + 4 + 3) & !3;
            let pad = lit_at - (ldr_at + 4);
            let pc_base = (ldr_at + 4) & !3;
            let ldr = encode(&InstrKind::MemLit32 {
                size: MemSize::Word,
                rt: Reg::PC,
                u: true,
                imm12: (lit_at - pc_base) as u16,
            })
            .expect("stub literal branch encodes");
            stub_bytes.extend_from_slice(&ldr);
            stub_bytes.extend(std::iter::repeat(0u8).take(pad as usize));
            stub_bytes.extend_from_slice(&(continuation | 1).to_le_bytes());

            let stub_len = stub_bytes.len() as u32;
            if stub + stub_len > layout.stub_ceiling {
                return Err(RewriteError::EncodingRange(
                    "vendor stub area exhausted".into(),
                ));
            }
            let off = (stub - layout.stub_base) as usize;
            if planner.plan.vendor_stub_bytes.len() < off + stub_len as usize {
                planner
                    .plan
                    .vendor_stub_bytes
                    .resize(off + stub_len as usize, 0);
            }
            planner.plan.vendor_stub_bytes[off..off + stub_len as usize]
                .copy_from_slice(&stub_bytes);
            stub_cursor = (stub + stub_len + 3) & !3;

            let before = displaced.clone();
            let mut after = encode(&stub_branch_kind(bucket)).expect("service encoding fits");
            while after.len() < before.len() {
                after.extend_from_slice(&NOP16.to_le_bytes());
            }
            planner.plan.displaced.insert(block.start, displaced);
            planner
                .plan
                .trampolines
                .insert(block.start, TrampolineSpec { stub, bucket });
            planner.push_patch(Patch {
                address: block.start,
                before,
                after,
                kind: PatchKind::TrampolineHead,
            });
        }
    }

    planner.plan.patches.sort_by_key(|p| p.address);
    Ok(planner.plan)
}

/// Bytes spanned by whole instructions from `addr` until at least
/// `min_len` bytes are covered.
fn instruction_window(image: &FirmwareImage, addr: u32, min_len: u32) -> Option<u32> {
    let mut covered = 0u32;
    let mut a = addr;
    while covered < min_len {
        let instr = crate::analysis::decode_one(image, a)?;
        covered += instr.width as u32;
        a += instr.width as u32;
    }
    Some(covered)
}

fn special_site_patch(
    planner: &mut Planner<'_>,
    site: &SpecialSite,
) -> Result<Option<Patch>, RewriteError> {
    let instr = site
        .instr
        .or_else(|| crate::analysis::decode_one(planner.image, site.address))
        .ok_or_else(|| {
            RewriteError::EncodingRange(format!("special site {:#010x} undecodable", site.address))
        })?;
    let before = planner.original_bytes(site.address, site.width as u32)?;

    let after: Vec<u8> = match site.rewrite_strategy {
        RewriteStrategy::InlineSubstitute => match inline_substitution(&instr) {
            Some(kind) => encode(&kind).expect("bank move encodes"),
            None => return Ok(None), // identity substitution
        },
        RewriteStrategy::Trap => {
            let kind = trap_kind_for(&instr).ok_or_else(|| {
                RewriteError::PlanConflict(format!(
                    "no trap rule for {} at {:#010x}",
                    instr, site.address
                ))
            })?;
            let imm8 = planner.plan.trap_table.get_or_alloc(kind)?;
            let mut bytes = encode(&InstrKind::Bkpt { imm8 }).unwrap();
            if site.width == 4 {
                bytes.extend_from_slice(&NOP16.to_le_bytes());
            }
            bytes
        }
        RewriteStrategy::HandlerBranch => {
            return Err(RewriteError::PlanConflict(format!(
                "special site at {:#010x} classified as handler branch",
                site.address
            )))
        }
    };
    debug_assert_eq!(before.len(), after.len(), "footprint rule");
    Ok(Some(Patch {
        address: site.address,
        before,
        after,
        kind: PatchKind::SpecialSite,
    }))
}

/// Inline rewrites: banked-SP `msr`/`mrs` become a single `vmov` bank
/// move; APSR accesses behave identically and need no patch.
fn inline_substitution(instr: &Instruction) -> Option<InstrKind> {
    match instr.kind {
        InstrKind::Mrs { rd, sysm } => match SpecialReg::from_sysm(sysm) {
            SpecialReg::Msp => Some(InstrKind::VmovBank {
                to_bank: false,
                cell: BankCell::SpMain,
                rt: rd,
            }),
            SpecialReg::Psp => Some(InstrKind::VmovBank {
                to_bank: false,
                cell: BankCell::SpProcess,
                rt: rd,
            }),
            _ => None,
        },
        InstrKind::Msr { rn, sysm, .. } => match SpecialReg::from_sysm(sysm) {
            SpecialReg::Msp => Some(InstrKind::VmovBank {
                to_bank: true,
                cell: BankCell::SpMain,
                rt: rn,
            }),
            SpecialReg::Psp => Some(InstrKind::VmovBank {
                to_bank: true,
                cell: BankCell::SpProcess,
                rt: rn,
            }),
            _ => None,
        },
        _ => None,
    }
}

fn trap_kind_for(instr: &Instruction) -> Option<TrapKind> {
    match instr.kind {
        InstrKind::Svc { imm8 } => Some(TrapKind::SvcDispatch { imm8 }),
        InstrKind::Cps {
            disable,
            affect_pri,
            affect_fault,
        } => Some(if disable {
            TrapKind::CpsDisable {
                pri: affect_pri,
                fault: affect_fault,
            }
        } else {
            TrapKind::CpsEnable {
                pri: affect_pri,
                fault: affect_fault,
            }
        }),
        InstrKind::Hint16 {
            op: HintOp::Wfi | HintOp::Wfe,
        }
        | InstrKind::Hint32 {
            op: HintOp::Wfi | HintOp::Wfe,
        } => Some(TrapKind::IdleLoop {
            resume_pc: instr.address + instr.width as u32,
        }),
        InstrKind::Mrs { rd, sysm } => Some(TrapKind::SpecialReg {
            reg: sysm,
            write: false,
            rt: rd.0,
        }),
        InstrKind::Msr { rn, sysm, .. } => Some(TrapKind::SpecialReg {
            reg: sysm,
            write: true,
            rt: rn.0,
        }),
        InstrKind::Coproc { .. } => Some(TrapKind::Coproc { raw: instr.raw }),
        InstrKind::Bkpt { .. } => Some(TrapKind::Custom { raw: instr.raw }),
        _ if instr.is_branch_to_self() => Some(TrapKind::IdleLoop {
            resume_pc: instr.address,
        }),
        _ => None,
    }
}

/// Apply a plan: patched rom plus vendor stubs, all unpatched bytes
/// byte-identical to the original.
pub fn apply(image: &FirmwareImage, plan: &RewritePlan) -> Result<TransplantedImage, RewriteError> {
    let mut out = image.clone();
    for patch in &plan.patches {
        let current = out
            .read_bytes(patch.address, patch.before.len() as u32)
            .map_err(|_| RewriteError::PatchMismatch(patch.address))?;
        if current != patch.before {
            return Err(RewriteError::PatchMismatch(patch.address));
        }
        out.write_bytes(patch.address, &patch.after)
            .map_err(|_| RewriteError::PatchMismatch(patch.address))?;
    }
    if !plan.vendor_stub_bytes.is_empty() {
        let vendor_name = out.map.vendor_region().name.clone();
        out.rom_bytes
            .insert(vendor_name, plan.vendor_stub_bytes.clone());
    }
    Ok(TransplantedImage {
        base: out,
        trap_table: plan.trap_table.clone(),
        trampolines: plan.trampolines.clone(),
        displaced: plan.displaced.clone(),
        hal_redirects: plan.hal_redirects.clone(),
        layout: plan.layout,
        coverage: plan.coverage,
        metadata_version: METADATA_VERSION.to_string(),
        backend: "interp-1".to_string(),
    })
}

/// Convenience: analyze + plan + apply in one step.
pub fn transplant(
    image: &FirmwareImage,
    manifest: Option<&crate::hlm::HandlerManifest>,
    options: PlanOptions,
) -> Result<(TransplantedImage, crate::analysis::AnalysisReport, RewritePlan), RewriteError> {
    let report = crate::analysis::analyze(image, manifest);
    let p = plan(image, &report.blocks, &report.sites, &report.hal.matches, options)?;
    let timage = apply(image, &p)?;
    Ok((timage, report, p))
}

impl RewritePlan {
    /// True when the plan changes nothing (no sites, coverage off).
    pub fn is_empty(&self) -> bool {
        self.patches.is_empty() && self.vendor_stub_bytes.is_empty()
    }
}

#[cfg(test)]
mod tests;
