//! On-disk form of a transplanted image: one flat binary per populated
//! region plus a versioned, checksummed `transplant.meta` JSON sidecar.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RewriteError, TransplantedImage, TrapTable, TrampolineSpec, VendorLayout};
use crate::image::{FirmwareImage, MemoryMap, Symbol};

pub const METADATA_VERSION: &str = "1.0.0";
pub const META_FILE: &str = "transplant.meta";

#[derive(Serialize, Deserialize)]
struct Meta {
    metadata_version: String,
    backend: String,
    map: MemoryMap,
    entry_point: u32,
    raw_reset_vector: u32,
    vector_table_base: u32,
    initial_sp: u32,
    symbols: Vec<Symbol>,
    coverage: bool,
    layout: VendorLayout,
    trap_table: TrapTable,
    trampolines: BTreeMap<u32, TrampolineSpec>,
    displaced: BTreeMap<u32, Vec<u8>>,
    hal_redirects: Vec<(u32, String)>,
    /// Region name -> binary file name.
    region_files: BTreeMap<String, String>,
    /// sha256 over the canonical metadata (this field empty) and every
    /// region file, in region-name order.
    checksum: String,
}

fn compute_checksum(meta: &Meta, region_bytes: &BTreeMap<String, Vec<u8>>) -> String {
    let mut scrubbed = clone_meta(meta);
    scrubbed.checksum = String::new();
    let canonical = serde_json::to_vec(&scrubbed).expect("metadata serializes");
    let mut h = Sha256::new();
    h.update(&canonical);
    for (name, bytes) in region_bytes {
        h.update(name.as_bytes());
        h.update(bytes);
    }
    hex_encode(&h.finalize())
}

fn clone_meta(m: &Meta) -> Meta {
    Meta {
        metadata_version: m.metadata_version.clone(),
        backend: m.backend.clone(),
        map: m.map.clone(),
        entry_point: m.entry_point,
        raw_reset_vector: m.raw_reset_vector,
        vector_table_base: m.vector_table_base,
        initial_sp: m.initial_sp,
        symbols: m.symbols.clone(),
        coverage: m.coverage,
        layout: m.layout,
        trap_table: m.trap_table.clone(),
        trampolines: m.trampolines.clone(),
        displaced: m.displaced.clone(),
        hal_redirects: m.hal_redirects.clone(),
        region_files: m.region_files.clone(),
        checksum: m.checksum.clone(),
    }
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the transplanted image into `out_dir`.
pub fn serialize(timage: &TransplantedImage, out_dir: &Path) -> Result<(), RewriteError> {
    std::fs::create_dir_all(out_dir)?;
    let mut region_files = BTreeMap::new();
    for name in timage.base.rom_bytes.keys() {
        region_files.insert(name.clone(), format!("region_{name}.bin"));
    }
    let mut meta = Meta {
        metadata_version: timage.metadata_version.clone(),
        backend: timage.backend.clone(),
        map: timage.base.map.clone(),
        entry_point: timage.base.entry_point,
        raw_reset_vector: timage.base.raw_reset_vector,
        vector_table_base: timage.base.vector_table_base,
        initial_sp: timage.base.initial_sp,
        symbols: timage.base.symbols.clone(),
        coverage: timage.coverage,
        layout: timage.layout,
        trap_table: timage.trap_table.clone(),
        trampolines: timage.trampolines.clone(),
        displaced: timage.displaced.clone(),
        hal_redirects: timage.hal_redirects.clone(),
        region_files,
        checksum: String::new(),
    };
    meta.checksum = compute_checksum(&meta, &timage.base.rom_bytes);
    for (name, bytes) in &timage.base.rom_bytes {
        std::fs::write(out_dir.join(&meta.region_files[name]), bytes)?;
    }
    std::fs::write(
        out_dir.join(META_FILE),
        serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    Ok(())
}

/// Load a transplanted image back from `dir`, verifying version and
/// checksum.
pub fn deserialize(dir: &Path) -> Result<TransplantedImage, RewriteError> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(RewriteError::MissingSidecar(meta_path.display().to_string()));
    }
    let meta: Meta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
        .map_err(|e| RewriteError::Meta(e.to_string()))?;

    let supported_major = METADATA_VERSION.split('.').next().unwrap();
    let found_major = meta.metadata_version.split('.').next().unwrap_or("");
    if found_major != supported_major {
        return Err(RewriteError::Version {
            found: meta.metadata_version.clone(),
            supported: METADATA_VERSION.to_string(),
        });
    }

    let mut rom_bytes = BTreeMap::new();
    for (name, file) in &meta.region_files {
        let path = dir.join(file);
        if !path.exists() {
            return Err(RewriteError::MissingSidecar(path.display().to_string()));
        }
        rom_bytes.insert(name.clone(), std::fs::read(path)?);
    }

    let expect = compute_checksum(&meta, &rom_bytes);
    if expect != meta.checksum {
        return Err(RewriteError::Integrity);
    }

    meta.map.validate()?;
    let base = FirmwareImage {
        map: meta.map,
        rom_bytes,
        vector_table_base: meta.vector_table_base,
        entry_point: meta.entry_point,
        raw_reset_vector: meta.raw_reset_vector,
        initial_sp: meta.initial_sp,
        symbols: meta.symbols,
    };
    Ok(TransplantedImage {
        base,
        trap_table: meta.trap_table,
        trampolines: meta.trampolines,
        displaced: meta.displaced,
        hal_redirects: meta.hal_redirects,
        layout: meta.layout,
        coverage: meta.coverage,
        metadata_version: meta.metadata_version,
        backend: meta.backend,
    })
}
