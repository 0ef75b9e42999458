//! Mutable runtime address space: shared rom views, per-executor RAM
//! copies, the vendor region (stub code plus coverage/scratch overlay) and
//! generic read-zero/ignore-write MMIO backing. Each executor owns one.

use crate::image::{AccessKind, FaultError, FirmwareImage, MemoryRegion, RegionKind};
use crate::rewriter::VendorLayout;

#[derive(Debug, Clone)]
enum Backing {
    /// Immutable code/data (rom); writes fault at run time.
    Fixed(Vec<u8>),
    Ram(Vec<u8>),
    /// Vendor region: stub bytes below the ceiling, a small writable
    /// overlay (coverage table + scratch) above it, zero elsewhere.
    Vendor { stubs: Vec<u8>, overlay: Vec<u8> },
    /// Generic peripheral space: reads as zero, writes ignored. The
    /// system-control space is intercepted by the executor before this.
    Mmio,
}

#[derive(Debug, Clone)]
struct LoadedRegion {
    meta: MemoryRegion,
    backing: Backing,
}

#[derive(Debug, Clone)]
pub struct Memory {
    regions: Vec<LoadedRegion>,
    layout: VendorLayout,
}

impl Memory {
    /// Build the runtime address space for an image: rom copied, RAM
    /// zeroed then initialized from the map's copy table.
    pub fn new(image: &FirmwareImage, layout: VendorLayout) -> Memory {
        let mut regions = Vec::new();
        for meta in &image.map.regions {
            let backing = match meta.kind {
                RegionKind::Rom => {
                    let mut bytes = image
                        .rom_bytes
                        .get(&meta.name)
                        .cloned()
                        .unwrap_or_default();
                    bytes.resize(meta.size as usize, 0);
                    Backing::Fixed(bytes)
                }
                RegionKind::Ram => Backing::Ram(vec![0; meta.size as usize]),
                RegionKind::VendorSys => Backing::Vendor {
                    stubs: image
                        .rom_bytes
                        .get(&meta.name)
                        .cloned()
                        .unwrap_or_default(),
                    overlay: vec![0; (layout.cov_size + layout.scratch_size) as usize],
                },
                RegionKind::Mmio => Backing::Mmio,
            };
            regions.push(LoadedRegion {
                meta: meta.clone(),
                backing,
            });
        }
        let mut mem = Memory { regions, layout };
        for copy in &image.map.init_copy {
            for i in 0..copy.size {
                if let Ok(b) = mem.read(copy.src + i, 1) {
                    let _ = mem.write(copy.dst + i, 1, b);
                }
            }
        }
        mem
    }

    pub fn layout(&self) -> VendorLayout {
        self.layout
    }

    fn region_index(&self, addr: u32) -> Option<usize> {
        self.regions.iter().position(|r| r.meta.contains(addr))
    }

    fn fault(addr: u32, width: u8, access: AccessKind) -> FaultError {
        FaultError {
            addr,
            width,
            access,
        }
    }

    pub fn read(&self, addr: u32, width: u8) -> Result<u32, FaultError> {
        let idx = self
            .region_index(addr)
            .ok_or_else(|| Self::fault(addr, width, AccessKind::Read))?;
        let region = &self.regions[idx];
        if !region.meta.perms.read || !region.meta.contains_range(addr, width as u32) {
            return Err(Self::fault(addr, width, AccessKind::Read));
        }
        let mut word = 0u32;
        for i in (0..width as u32).rev() {
            word = (word << 8) | self.read_byte(region, addr + i) as u32;
        }
        Ok(word)
    }

    fn read_byte(&self, region: &LoadedRegion, addr: u32) -> u8 {
        let off = (addr - region.meta.base) as usize;
        match &region.backing {
            Backing::Fixed(bytes) | Backing::Ram(bytes) => bytes.get(off).copied().unwrap_or(0),
            Backing::Vendor { stubs, overlay } => {
                if addr >= self.layout.cov_base
                    && addr < self.layout.scratch_base + self.layout.scratch_size
                {
                    overlay[(addr - self.layout.cov_base) as usize]
                } else {
                    stubs.get(off).copied().unwrap_or(0)
                }
            }
            Backing::Mmio => 0,
        }
    }

    pub fn write(&mut self, addr: u32, width: u8, value: u32) -> Result<(), FaultError> {
        let idx = self
            .region_index(addr)
            .ok_or_else(|| Self::fault(addr, width, AccessKind::Write))?;
        if !self.regions[idx].meta.perms.write
            || !self.regions[idx].meta.contains_range(addr, width as u32)
        {
            return Err(Self::fault(addr, width, AccessKind::Write));
        }
        for i in 0..width as u32 {
            self.write_byte(idx, addr + i, (value >> (8 * i)) as u8)
                .map_err(|_| Self::fault(addr, width, AccessKind::Write))?;
        }
        Ok(())
    }

    fn write_byte(&mut self, idx: usize, addr: u32, byte: u8) -> Result<(), ()> {
        let base = self.regions[idx].meta.base;
        let cov_base = self.layout.cov_base;
        let overlay_end = self.layout.scratch_base + self.layout.scratch_size;
        match &mut self.regions[idx].backing {
            Backing::Ram(bytes) => {
                bytes[(addr - base) as usize] = byte;
                Ok(())
            }
            Backing::Vendor { overlay, .. } => {
                if addr >= cov_base && addr < overlay_end {
                    overlay[(addr - cov_base) as usize] = byte;
                    Ok(())
                } else {
                    // Stub code is immutable at run time.
                    Err(())
                }
            }
            Backing::Mmio => Ok(()), // write ignored
            Backing::Fixed(_) => Err(()),
        }
    }

    /// Fetch for execution: halfword access with execute permission.
    pub fn fetch16(&self, addr: u32) -> Result<u16, FaultError> {
        let idx = self
            .region_index(addr)
            .ok_or_else(|| Self::fault(addr, 2, AccessKind::Execute))?;
        let region = &self.regions[idx];
        if !region.meta.perms.execute || !region.meta.contains_range(addr, 2) {
            return Err(Self::fault(addr, 2, AccessKind::Execute));
        }
        Ok(self.read_byte(region, addr) as u16 | (self.read_byte(region, addr + 1) as u16) << 8)
    }

    /// Coverage counter access (vendor overlay); saturating increment.
    pub fn bump_coverage(&mut self, bucket: u16) {
        let addr = self.layout.cov_base + bucket as u32;
        if let Some(idx) = self.region_index(addr) {
            if let Backing::Vendor { overlay, .. } = &mut self.regions[idx].backing {
                let off = bucket as usize;
                overlay[off] = overlay[off].saturating_add(1);
            }
        }
    }

    pub fn coverage_bytes(&self) -> Vec<u8> {
        for r in &self.regions {
            if let Backing::Vendor { overlay, .. } = &r.backing {
                return overlay[..self.layout.cov_size as usize].to_vec();
            }
        }
        Vec::new()
    }

    /// Writable state for snapshots: (region index, bytes) pairs.
    pub fn snapshot_writable(&self) -> Vec<(usize, Vec<u8>)> {
        let mut out = Vec::new();
        for (i, r) in self.regions.iter().enumerate() {
            match &r.backing {
                Backing::Ram(bytes) => out.push((i, bytes.clone())),
                Backing::Vendor { overlay, .. } => out.push((i, overlay.clone())),
                _ => {}
            }
        }
        out
    }

    pub fn restore_writable(&mut self, saved: &[(usize, Vec<u8>)]) {
        for (i, bytes) in saved {
            match &mut self.regions[*i].backing {
                Backing::Ram(dst) => dst.copy_from_slice(bytes),
                Backing::Vendor { overlay, .. } => overlay.copy_from_slice(bytes),
                _ => {}
            }
        }
    }

    /// Dump of all RAM regions (for differential end-state comparison),
    /// ordered by base address.
    pub fn ram_dump(&self) -> Vec<(String, Vec<u8>)> {
        let mut out: Vec<(String, Vec<u8>)> = self
            .regions
            .iter()
            .filter_map(|r| match &r.backing {
                Backing::Ram(bytes) => Some((r.meta.name.clone(), bytes.clone())),
                _ => None,
            })
            .collect();
        out.sort();
        out
    }
}
