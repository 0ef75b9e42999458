//! Python bindings: firmware loading, disassembly, analysis, transplant,
//! execution and fuzzing, mirroring the CLI surface. Structured results
//! come back as JSON strings so the Python side stays schema-stable with
//! the `--json` CLI output.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use regraft::harness::{self, FuzzConfig, Target};
use regraft::hlm;
use regraft::rewriter::{self, PlanOptions};
use regraft::runtime::{RunConfig, TraceMode};
use regraft::{analysis, corpus, image, thumb2};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A loaded firmware image with its memory map applied.
#[pyclass(name = "FirmwareImage")]
struct PyFirmwareImage {
    inner: image::FirmwareImage,
}

#[pymethods]
impl PyFirmwareImage {
    #[getter]
    fn entry_point(&self) -> u32 {
        self.inner.entry_point
    }

    #[getter]
    fn initial_sp(&self) -> u32 {
        self.inner.initial_sp
    }

    #[getter]
    fn vector_table_base(&self) -> u32 {
        self.inner.vector_table_base
    }

    fn read(&self, addr: u32, width: u8) -> PyResult<u32> {
        self.inner.read(addr, width).map_err(err)
    }

    fn symbols(&self) -> Vec<(String, u32, u32)> {
        self.inner
            .symbols
            .iter()
            .map(|s| (s.name.clone(), s.address, s.size))
            .collect()
    }

    /// Disassemble `count` instructions from `addr` as display lines.
    fn disasm(&self, addr: u32, count: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut a = addr & !1;
        for _ in 0..count {
            let Ok(hw1) = self.inner.read(a, 2) else { break };
            let outcome = if thumb2::is_wide_prefix(hw1 as u16) {
                let hw2 = self.inner.read(a + 2, 2).unwrap_or(0);
                thumb2::decode_at(hw1 as u16, Some(hw2 as u16), a)
            } else {
                thumb2::decode_at(hw1 as u16, None, a)
            };
            match outcome {
                thumb2::DecodeOutcome::Decoded(i) => {
                    out.push(format!("{a:08x}: {i}"));
                    a += i.width as u32;
                }
                _ => {
                    out.push(format!("{a:08x}: <undecodable>"));
                    a += 2;
                }
            }
        }
        out
    }

    fn analyze_json(&self) -> PyResult<String> {
        let report = analysis::analyze(&self.inner, Some(&hlm::builtin_manifest()));
        serde_json::to_string(&report).map_err(err)
    }
}

/// Load a raw firmware binary plus its map config.
#[pyfunction]
fn load_firmware(fw: PathBuf, map: PathBuf) -> PyResult<PyFirmwareImage> {
    Ok(PyFirmwareImage {
        inner: image::load_firmware(&fw, &map).map_err(err)?,
    })
}

/// Decode 2 or 4 little-endian bytes; returns the display text or None
/// for undefined/unsupported encodings.
#[pyfunction]
#[pyo3(signature = (data, addr = 0))]
fn decode(data: &[u8], addr: u32) -> Option<String> {
    thumb2::decode(data, addr)
        .instruction()
        .map(|i| i.to_string())
}

/// Full 16-bit sweep plus sampled 32-bit classification, as JSON.
#[pyfunction]
#[pyo3(signature = (budget = 1_065_536, seed = 0x5eed))]
fn sweep(budget: u64, seed: u64) -> PyResult<String> {
    let report = analysis::sweep_classify(budget, seed).map_err(|e| PyValueError::new_err(e.to_string()))?;
    serde_json::to_string(&report).map_err(err)
}

/// Transplant a firmware image; writes the output directory and returns a
/// summary JSON.
#[pyfunction]
#[pyo3(signature = (fw, map, out, coverage = true))]
fn transplant(fw: PathBuf, map: PathBuf, out: PathBuf, coverage: bool) -> PyResult<String> {
    let img = image::load_firmware(&fw, &map).map_err(err)?;
    let manifest = hlm::builtin_manifest();
    let (timage, report, plan) =
        rewriter::transplant(&img, Some(&manifest), PlanOptions { coverage }).map_err(err)?;
    rewriter::serialize(&timage, &out).map_err(err)?;
    serde_json::to_string(&serde_json::json!({
        "patches": plan.patches.len(),
        "trap_entries": plan.trap_table.entries.len(),
        "trampolines": plan.trampolines.len(),
        "hal_redirects": plan.hal_redirects.len(),
        "blocks": report.block_count,
        "skip_rate": report.skip_rate,
    }))
    .map_err(err)
}

fn target_from(image_dir: &Path) -> PyResult<Target> {
    let timage = rewriter::deserialize(image_dir).map_err(err)?;
    Ok(Target {
        timage: Arc::new(timage),
        registry: Arc::new(hlm::builtin_registry()),
        manifest: hlm::builtin_manifest(),
    })
}

/// Execute a transplanted image; returns the outcome as JSON.
#[pyfunction]
#[pyo3(signature = (image_dir, input = None, budget = 5_000_000, trace = "none"))]
fn run(image_dir: PathBuf, input: Option<&[u8]>, budget: u64, trace: &str) -> PyResult<String> {
    let target = target_from(&image_dir)?;
    let trace: TraceMode = trace.parse().map_err(PyValueError::new_err)?;
    let mut ex = target.executor();
    let outcome = ex.run(
        input.unwrap_or_default().to_vec(),
        &RunConfig {
            budget,
            trace,
            stop_at_input_read: false,
        },
    );
    serde_json::to_string(&outcome).map_err(err)
}

/// Coverage-guided campaign; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (image_dir, seeds, execs = 100_000, time_limit_secs = 120, workers = 1, seed = 0x5eed, out_dir = None))]
fn fuzz(
    image_dir: PathBuf,
    seeds: Vec<Vec<u8>>,
    execs: u64,
    time_limit_secs: u64,
    workers: usize,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let target = target_from(&image_dir)?;
    let snapshot = harness::snapshot_at_entry(&target, 5_000_000).map_err(err)?;
    let report = harness::fuzz(
        &target,
        &snapshot,
        &FuzzConfig {
            seeds,
            wall_budget: Duration::from_secs(time_limit_secs),
            exec_budget: execs,
            workers,
            rng_seed: seed,
            out_dir,
            ..FuzzConfig::default()
        },
    )
    .map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// Replay a crashing input; returns the triage report as JSON.
#[pyfunction]
#[pyo3(signature = (image_dir, input, budget = 5_000_000))]
fn triage(image_dir: PathBuf, input: &[u8], budget: u64) -> PyResult<String> {
    let target = target_from(&image_dir)?;
    let snapshot = harness::snapshot_at_entry(&target, budget).map_err(err)?;
    let report = harness::triage(&target, &snapshot, input, budget).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// Names of the shipped synthetic corpus programs.
#[pyfunction]
fn corpus_names() -> Vec<String> {
    corpus::all().iter().map(|p| p.name.to_string()).collect()
}

/// Write one corpus program's bin/sym/map files into `out`.
#[pyfunction]
fn corpus_write(name: &str, out: PathBuf) -> PyResult<()> {
    let prog = corpus::by_name(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown corpus program `{name}`")))?;
    prog.write_to(&out).map_err(err)
}

/// The builtin handler manifest as JSON.
#[pyfunction]
fn builtin_manifest_json() -> PyResult<String> {
    serde_json::to_string_pretty(&hlm::builtin_manifest()).map_err(err)
}

/// Encode a direct branch (auto-widening) — exposed mainly for tests.
#[pyfunction]
fn encode_branch(py: Python<'_>, addr: u32, target: u32) -> PyResult<Py<PyBytes>> {
    let bytes = thumb2::encode_branch_auto(addr, target).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(PyBytes::new(py, &bytes).into())
}

#[pymodule]
fn regraft_py(_py: Python<'_>, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFirmwareImage>()?;
    m.add_function(wrap_pyfunction!(load_firmware, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(transplant, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(triage, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_names, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_write, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_manifest_json, m)?)?;
    m.add_function(wrap_pyfunction!(encode_branch, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
