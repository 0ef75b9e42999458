//! Firmware loading: raw binaries plus a memory-map config become an
//! address-space representation that preserves the MCU's physical layout.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Lowest address architecturally reserved for vendor system use; injected
/// stubs and runtime scratch live in this range.
pub const VENDOR_SYS_BASE: u32 = 0xE010_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
    Execute,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessKind::Read => write!(f, "read"),
            AccessKind::Write => write!(f, "write"),
            AccessKind::Execute => write!(f, "execute"),
        }
    }
}

/// The crash signal consumed by the fuzzing harness: a memory access that
/// missed every mapped region or violated its permissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("memory fault: {access} of {width} byte(s) at {addr:#010x}")]
pub struct FaultError {
    pub addr: u32,
    pub width: u8,
    pub access: AccessKind,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("regions `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("binary of {got} bytes does not fit rom region `{region}` of {cap} bytes")]
    Size {
        region: String,
        got: usize,
        cap: u32,
    },
    #[error("reset vector {0:#010x} is invalid: {1}")]
    Vector(u32, String),
    #[error("map config: {0}")]
    MapConfig(String),
    #[error("symbol file line {0}: {1}")]
    SymbolFile(usize, String),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perms {
    pub read: bool,
    pub write: bool,
    pub execute: bool,
}

impl Perms {
    pub fn parse(s: &str) -> Result<Perms, ImageError> {
        let mut p = Perms {
            read: false,
            write: false,
            execute: false,
        };
        for c in s.chars() {
            match c {
                'r' => p.read = true,
                'w' => p.write = true,
                'x' => p.execute = true,
                '-' => {}
                other => {
                    return Err(ImageError::MapConfig(format!(
                        "bad permission character `{other}` in `{s}`"
                    )))
                }
            }
        }
        Ok(p)
    }

    pub fn allows(&self, access: AccessKind) -> bool {
        match access {
            AccessKind::Read => self.read,
            AccessKind::Write => self.write,
            AccessKind::Execute => self.execute,
        }
    }
}

impl fmt::Display for Perms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            if self.read { 'r' } else { '-' },
            if self.write { 'w' } else { '-' },
            if self.execute { 'x' } else { '-' }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Rom,
    Ram,
    Mmio,
    VendorSys,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRegion {
    pub name: String,
    pub base: u32,
    pub size: u32,
    pub perms: Perms,
    pub kind: RegionKind,
}

impl MemoryRegion {
    pub fn end(&self) -> u64 {
        self.base as u64 + self.size as u64
    }

    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.base && (addr as u64) < self.end()
    }

    pub fn contains_range(&self, addr: u32, len: u32) -> bool {
        self.contains(addr) && addr as u64 + len as u64 <= self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMap {
    pub regions: Vec<MemoryRegion>,
    pub entry_override: Option<u32>,
    /// Startup copies from a rom load view into ram (`.data` style); RAM
    /// not covered by a copy starts zeroed.
    #[serde(default)]
    pub init_copy: Vec<InitCopy>,
    /// Number of vector-table entries considered when collecting analysis
    /// roots.
    #[serde(default = "default_vector_entries")]
    pub vector_entries: u32,
}

fn default_vector_entries() -> u32 {
    48
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitCopy {
    pub src: u32,
    pub dst: u32,
    pub size: u32,
}

impl MemoryMap {
    pub fn validate(&self) -> Result<(), ImageError> {
        for r in &self.regions {
            if r.end() > u32::MAX as u64 + 1 {
                return Err(ImageError::MapConfig(format!(
                    "region `{}` overflows the 32-bit address space",
                    r.name
                )));
            }
            if r.size == 0 {
                return Err(ImageError::MapConfig(format!(
                    "region `{}` has zero size",
                    r.name
                )));
            }
            if r.kind == RegionKind::VendorSys && r.base < VENDOR_SYS_BASE {
                return Err(ImageError::MapConfig(format!(
                    "vendor_sys region `{}` must lie within {VENDOR_SYS_BASE:#010x}..=0xffffffff",
                    r.name
                )));
            }
        }
        let mut sorted: Vec<&MemoryRegion> = self.regions.iter().collect();
        sorted.sort_by_key(|r| r.base);
        for pair in sorted.windows(2) {
            if pair[0].end() > pair[1].base as u64 {
                return Err(ImageError::Overlap(
                    pair[0].name.clone(),
                    pair[1].name.clone(),
                ));
            }
        }
        let vendor = self
            .regions
            .iter()
            .filter(|r| r.kind == RegionKind::VendorSys)
            .count();
        if vendor != 1 {
            return Err(ImageError::MapConfig(format!(
                "expected exactly one vendor_sys region, found {vendor}"
            )));
        }
        if !self.regions.iter().any(|r| r.kind == RegionKind::Rom) {
            return Err(ImageError::MapConfig("no rom region declared".into()));
        }
        if !self.regions.iter().any(|r| r.kind == RegionKind::Ram) {
            return Err(ImageError::MapConfig("no ram region declared".into()));
        }
        Ok(())
    }

    pub fn region_at(&self, addr: u32) -> Option<&MemoryRegion> {
        self.regions.iter().find(|r| r.contains(addr))
    }

    pub fn vendor_region(&self) -> &MemoryRegion {
        self.regions
            .iter()
            .find(|r| r.kind == RegionKind::VendorSys)
            .expect("validated map has a vendor_sys region")
    }

    /// The rom region the firmware binary is loaded into (lowest base).
    pub fn load_region(&self) -> &MemoryRegion {
        self.regions
            .iter()
            .filter(|r| r.kind == RegionKind::Rom)
            .min_by_key(|r| r.base)
            .expect("validated map has a rom region")
    }

    pub fn executable_at(&self, addr: u32) -> bool {
        self.region_at(addr).map_or(false, |r| r.perms.execute)
    }
}

// ---- map config file (JSON with hex-string addresses) ----

#[derive(Deserialize)]
struct RawMapConfig {
    regions: Vec<RawRegion>,
    #[serde(default)]
    entry_override: Option<String>,
    #[serde(default)]
    init_copy: Vec<RawInitCopy>,
    #[serde(default)]
    vector_entries: Option<u32>,
}

#[derive(Deserialize)]
struct RawRegion {
    name: String,
    base: String,
    size: String,
    perms: String,
    kind: RegionKind,
}

#[derive(Deserialize)]
struct RawInitCopy {
    src: String,
    dst: String,
    size: String,
}

pub fn parse_hex_u32(s: &str) -> Result<u32, ImageError> {
    let t = s.trim();
    let (digits, radix) = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => (hex, 16),
        None => (t, 10),
    };
    u32::from_str_radix(&digits.replace('_', ""), radix)
        .map_err(|e| ImageError::MapConfig(format!("bad address `{s}`: {e}")))
}

impl MemoryMap {
    pub fn from_json(text: &str) -> Result<MemoryMap, ImageError> {
        let raw: RawMapConfig =
            serde_json::from_str(text).map_err(|e| ImageError::MapConfig(e.to_string()))?;
        let mut regions = Vec::new();
        for r in raw.regions {
            regions.push(MemoryRegion {
                name: r.name,
                base: parse_hex_u32(&r.base)?,
                size: parse_hex_u32(&r.size)?,
                perms: Perms::parse(&r.perms)?,
                kind: r.kind,
            });
        }
        let entry_override = raw
            .entry_override
            .as_deref()
            .map(parse_hex_u32)
            .transpose()?;
        let mut init_copy = Vec::new();
        for c in raw.init_copy {
            init_copy.push(InitCopy {
                src: parse_hex_u32(&c.src)?,
                dst: parse_hex_u32(&c.dst)?,
                size: parse_hex_u32(&c.size)?,
            });
        }
        let map = MemoryMap {
            regions,
            entry_override,
            init_copy,
            vector_entries: raw.vector_entries.unwrap_or_else(default_vector_entries),
        };
        map.validate()?;
        Ok(map)
    }

    pub fn from_path(path: &Path) -> Result<MemoryMap, ImageError> {
        MemoryMap::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub address: u32,
    pub size: u32,
}

/// An immutable firmware image: rom bytes placed at their physical bases,
/// the parsed vector table head, and any sidecar symbols. Safe to share
/// across concurrent executors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirmwareImage {
    pub map: MemoryMap,
    /// Region name -> contents for rom-like regions (including vendor_sys
    /// once a transplant populated it).
    pub rom_bytes: BTreeMap<String, Vec<u8>>,
    pub vector_table_base: u32,
    /// Thumb bit cleared, ready for execution.
    pub entry_point: u32,
    /// Raw word 1 of the vector table (thumb bit set).
    pub raw_reset_vector: u32,
    pub initial_sp: u32,
    pub symbols: Vec<Symbol>,
}

impl FirmwareImage {
    /// Read little-endian data from the image view: rom regions return
    /// their loaded bytes, ram reads as zero (pre-execution view).
    pub fn read(&self, addr: u32, width: u8) -> Result<u32, FaultError> {
        debug_assert!(matches!(width, 1 | 2 | 4));
        let fault = FaultError {
            addr,
            width,
            access: AccessKind::Read,
        };
        let region = self.map.region_at(addr).ok_or(fault)?;
        if !region.perms.read || !region.contains_range(addr, width as u32) {
            return Err(fault);
        }
        let mut word = 0u32;
        for i in (0..width as u32).rev() {
            word = (word << 8) | self.read_byte_raw(region, addr + i) as u32;
        }
        Ok(word)
    }

    fn read_byte_raw(&self, region: &MemoryRegion, addr: u32) -> u8 {
        match self.rom_bytes.get(&region.name) {
            Some(bytes) => *bytes.get((addr - region.base) as usize).unwrap_or(&0),
            None => 0,
        }
    }

    /// Overwrite image bytes. Only the rewriter uses this, on its own
    /// mutable clone; loaded images stay immutable.
    pub fn write(&mut self, addr: u32, width: u8, value: u32) -> Result<(), FaultError> {
        debug_assert!(matches!(width, 1 | 2 | 4));
        let fault = FaultError {
            addr,
            width,
            access: AccessKind::Write,
        };
        let region = self
            .map
            .region_at(addr)
            .cloned()
            .ok_or(fault)?;
        if !region.contains_range(addr, width as u32) {
            return Err(fault);
        }
        let bytes = self
            .rom_bytes
            .get_mut(&region.name)
            .ok_or(fault)?;
        let off = (addr - region.base) as usize;
        if off + width as usize > bytes.len() {
            bytes.resize(off + width as usize, 0);
        }
        for i in 0..width as usize {
            bytes[off + i] = (value >> (8 * i)) as u8;
        }
        Ok(())
    }

    pub fn write_bytes(&mut self, addr: u32, data: &[u8]) -> Result<(), FaultError> {
        for (i, b) in data.iter().enumerate() {
            self.write(addr + i as u32, 1, *b as u32)?;
        }
        Ok(())
    }

    pub fn read_bytes(&self, addr: u32, len: u32) -> Result<Vec<u8>, FaultError> {
        let mut out = Vec::with_capacity(len as usize);
        for i in 0..len {
            out.push(self.read(addr + i, 1)? as u8);
        }
        Ok(out)
    }

    /// Vector-table entry for exception number `n` (raw word, thumb bit
    /// intact).
    pub fn vector(&self, n: u32) -> Result<u32, FaultError> {
        self.read(self.vector_table_base + 4 * n, 4)
    }

    pub fn symbol_at(&self, addr: u32) -> Option<&Symbol> {
        let norm = addr & !1;
        self.symbols
            .iter()
            .filter(|s| {
                let base = s.address & !1;
                norm >= base && (s.size == 0 && norm == base || norm < base + s.size.max(1))
            })
            .min_by_key(|s| norm - (s.address & !1))
    }

    pub fn symbol_named(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }
}

/// Load a firmware binary and map config into an image: rom bytes placed at
/// the configured base, vector table parsed, symbols from an optional
/// sidecar.
pub fn load_firmware(binary_path: &Path, map_config: &Path) -> Result<FirmwareImage, ImageError> {
    let map = MemoryMap::from_path(map_config)?;
    let binary = std::fs::read(binary_path)?;
    let symbols = {
        let sidecar = binary_path.with_extension("sym");
        if sidecar.exists() {
            parse_symbol_file(&std::fs::read_to_string(sidecar)?)?
        } else {
            Vec::new()
        }
    };
    load_firmware_from_bytes(binary, map, symbols)
}

pub fn load_firmware_from_bytes(
    binary: Vec<u8>,
    map: MemoryMap,
    symbols: Vec<Symbol>,
) -> Result<FirmwareImage, ImageError> {
    map.validate()?;
    let load = map.load_region().clone();
    if binary.len() as u64 > load.size as u64 {
        return Err(ImageError::Size {
            region: load.name.clone(),
            got: binary.len(),
            cap: load.size,
        });
    }
    let mut rom_bytes = BTreeMap::new();
    rom_bytes.insert(load.name.clone(), binary);

    let mut image = FirmwareImage {
        vector_table_base: load.base,
        entry_point: 0,
        raw_reset_vector: 0,
        initial_sp: 0,
        symbols,
        map,
        rom_bytes,
    };

    image.initial_sp = image.read(image.vector_table_base, 4)?;
    image.raw_reset_vector = image.read(image.vector_table_base + 4, 4)?;

    let raw_entry = image.map.entry_override.unwrap_or(image.raw_reset_vector);
    if raw_entry & 1 == 0 {
        return Err(ImageError::Vector(
            raw_entry,
            "thumb bit (bit 0) must be set".into(),
        ));
    }
    let entry = raw_entry & !1;
    if !image.map.executable_at(entry) {
        return Err(ImageError::Vector(
            raw_entry,
            "target is not in an executable region".into(),
        ));
    }
    image.entry_point = entry;

    for sym in &image.symbols {
        if image.map.region_at(sym.address & !1).is_none() {
            return Err(ImageError::SymbolFile(
                0,
                format!(
                    "symbol `{}` at {:#010x} lies outside every region",
                    sym.name, sym.address
                ),
            ));
        }
    }
    Ok(image)
}

/// Sidecar format: one `hexaddr size name` entry per line; `#` comments.
pub fn parse_symbol_file(text: &str) -> Result<Vec<Symbol>, ImageError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (addr, size, name) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(s), Some(n)) => (a, s, n),
            _ => {
                return Err(ImageError::SymbolFile(
                    lineno + 1,
                    "expected `hexaddr size name`".into(),
                ))
            }
        };
        out.push(Symbol {
            address: u32::from_str_radix(addr.trim_start_matches("0x"), 16)
                .map_err(|e| ImageError::SymbolFile(lineno + 1, e.to_string()))?,
            size: parse_hex_u32(size).map_err(|e| ImageError::SymbolFile(lineno + 1, e.to_string()))?,
            name: name.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Standard small map used across the test suite.
    pub fn test_map() -> MemoryMap {
        MemoryMap {
            regions: vec![
                MemoryRegion {
                    name: "flash".into(),
                    base: 0x0800_0000,
                    size: 0x1_0000,
                    perms: Perms::parse("rx").unwrap(),
                    kind: RegionKind::Rom,
                },
                MemoryRegion {
                    name: "sram".into(),
                    base: 0x2000_0000,
                    size: 0x4000,
                    perms: Perms::parse("rw").unwrap(),
                    kind: RegionKind::Ram,
                },
                MemoryRegion {
                    name: "scs".into(),
                    base: 0xE000_E000,
                    size: 0x1000,
                    perms: Perms::parse("rw").unwrap(),
                    kind: RegionKind::Mmio,
                },
                MemoryRegion {
                    name: "vendor".into(),
                    base: 0xE010_0000,
                    size: 0x20_0000,
                    perms: Perms::parse("rwx").unwrap(),
                    kind: RegionKind::VendorSys,
                },
            ],
            entry_override: None,
            init_copy: Vec::new(),
            vector_entries: 48,
        }
    }

    /// A minimal blob: initial sp, reset vector pointing right after the
    /// 48-entry vector table, then `code` bytes.
    pub fn blob_with_code(code: &[u8]) -> Vec<u8> {
        let code_start = 48 * 4u32;
        let mut blob = Vec::new();
        blob.extend_from_slice(&0x2000_4000u32.to_le_bytes());
        blob.extend_from_slice(&(0x0800_0000 + code_start | 1).to_le_bytes());
        blob.resize(code_start as usize, 0);
        blob.extend_from_slice(code);
        blob
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn direct_placement_and_vector_parse() {
        let blob = blob_with_code(&[0xFE, 0xE7]);
        let img = load_firmware_from_bytes(blob.clone(), test_map(), vec![]).unwrap();
        // word 1 at 0x08000004 is the raw reset vector.
        assert_eq!(img.read(0x0800_0004, 4).unwrap(), img.raw_reset_vector);
        assert_eq!(img.initial_sp, 0x2000_4000);
        assert_eq!(img.entry_point, 0x0800_0000 + 48 * 4);
        // Placement fidelity: every byte readable at rom_base + offset.
        for (o, b) in blob.iter().enumerate() {
            assert_eq!(img.read(0x0800_0000 + o as u32, 1).unwrap(), *b as u32);
        }
    }

    #[test]
    fn load_is_pure() {
        let blob = blob_with_code(&[0x00, 0xBF, 0xFE, 0xE7]);
        let a = load_firmware_from_bytes(blob.clone(), test_map(), vec![]).unwrap();
        let b = load_firmware_from_bytes(blob, test_map(), vec![]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let mut map = test_map();
        map.regions.push(MemoryRegion {
            name: "sram2".into(),
            base: 0x2000_1000,
            size: 0x4000,
            perms: Perms::parse("rw").unwrap(),
            kind: RegionKind::Ram,
        });
        let err = load_firmware_from_bytes(blob_with_code(&[0xFE, 0xE7]), map, vec![]).unwrap_err();
        assert!(matches!(err, ImageError::Overlap(..)), "{err}");
    }

    #[test]
    fn reset_vector_in_non_executable_region_rejected() {
        let mut blob = blob_with_code(&[0xFE, 0xE7]);
        // Point the reset vector into ram (rw, not executable).
        blob[4..8].copy_from_slice(&0x2000_0001u32.to_le_bytes());
        let err = load_firmware_from_bytes(blob, test_map(), vec![]).unwrap_err();
        assert!(matches!(err, ImageError::Vector(0x2000_0001, _)), "{err}");
    }

    #[test]
    fn even_reset_vector_rejected() {
        let mut blob = blob_with_code(&[0xFE, 0xE7]);
        blob[4..8].copy_from_slice(&0x0800_00C0u32.to_le_bytes());
        let err = load_firmware_from_bytes(blob, test_map(), vec![]).unwrap_err();
        assert!(matches!(err, ImageError::Vector(..)), "{err}");
    }

    #[test]
    fn binary_too_large() {
        let blob = vec![0u8; 0x2_0000];
        let err = load_firmware_from_bytes(blob, test_map(), vec![]).unwrap_err();
        assert!(matches!(err, ImageError::Size { .. }), "{err}");
    }

    #[test]
    fn reads_are_little_endian_and_faults_reported() {
        let img =
            load_firmware_from_bytes(blob_with_code(&[0xFE, 0xE7]), test_map(), vec![]).unwrap();
        let code = 0x0800_0000 + 48 * 4;
        assert_eq!(img.read(code, 2).unwrap(), 0xE7FE);
        let err = img.read(0x6000_0000, 4).unwrap_err();
        assert_eq!(err.access, AccessKind::Read);
        assert_eq!(err.addr, 0x6000_0000);
    }

    #[test]
    fn image_write_roundtrip() {
        let mut img =
            load_firmware_from_bytes(blob_with_code(&[0xFE, 0xE7]), test_map(), vec![]).unwrap();
        img.write(0x0800_0100, 4, 0x1122_3344).unwrap();
        assert_eq!(img.read(0x0800_0100, 4).unwrap(), 0x1122_3344);
        assert_eq!(img.read(0x0800_0100, 1).unwrap(), 0x44);
    }

    #[test]
    fn vendor_region_must_sit_in_reserved_range() {
        let mut map = test_map();
        map.regions[3].base = 0xD000_0000;
        assert!(map.validate().is_err());
    }

    #[test]
    fn map_config_json_parses_hex_addresses() {
        let text = r#"{
            "regions": [
                {"name": "flash", "base": "0x08000000", "size": "0x10000", "perms": "rx", "kind": "rom"},
                {"name": "sram", "base": "0x20000000", "size": "0x4000", "perms": "rw", "kind": "ram"},
                {"name": "vendor", "base": "0xE0100000", "size": "0x200000", "perms": "rwx", "kind": "vendor_sys"}
            ],
            "entry_override": null,
            "init_copy": [{"src": "0x08000400", "dst": "0x20000000", "size": "0x10"}]
        }"#;
        let map = MemoryMap::from_json(text).unwrap();
        assert_eq!(map.regions[0].base, 0x0800_0000);
        assert_eq!(map.init_copy[0].dst, 0x2000_0000);
        assert_eq!(map.vector_entries, 48);
    }

    #[test]
    fn symbol_sidecar_parses() {
        let syms = parse_symbol_file("# comment\n08000c00 0x20 HAL_UART_Receive\n").unwrap();
        assert_eq!(syms[0].name, "HAL_UART_Receive");
        assert_eq!(syms[0].address, 0x0800_0C00);
        assert_eq!(syms[0].size, 0x20);
    }
}
