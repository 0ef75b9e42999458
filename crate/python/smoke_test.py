#!/usr/bin/env python3
"""Smoke test for the regraft_py extension module.

Builds the cdylib with cargo, imports it, and drives the whole pipeline:
corpus emission -> load -> disasm -> transplant -> run -> fuzz -> triage.

Usage: python3 python/smoke_test.py
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "regraft-python"],
        cwd=REPO,
        check=True,
    )
    built = REPO / "target" / "debug" / "libregraft_py.so"
    if not built.exists():  # macOS fallback
        built = REPO / "target" / "debug" / "libregraft_py.dylib"
    staged = Path(tempfile.mkdtemp(prefix="regraft_py_")) / "regraft_py.so"
    shutil.copy2(built, staged)
    return staged.parent


def main() -> int:
    sys.path.insert(0, str(build_extension()))
    import regraft_py as rg

    # Decoder sanity.
    assert rg.decode(bytes.fromhex("00bf")) == "nop"
    assert rg.decode(bytes.fromhex("01df")) == "svc #1"
    assert rg.decode(bytes.fromhex("07be")) == "bkpt #7"

    # Sweep counts: exactly 256 svc and bkpt encodings in the 16-bit space.
    sweep = json.loads(rg.sweep(70_000, 1))
    assert sweep["half"]["special_mnemonics"]["svc"] == 256
    assert sweep["half"]["special_mnemonics"]["bkpt"] == 256

    work = Path(tempfile.mkdtemp(prefix="regraft_smoke_"))
    assert "uart_guard" in rg.corpus_names()
    rg.corpus_write("uart_guard", work / "fw")

    img = rg.load_firmware(work / "fw" / "uart_guard.bin", work / "fw" / "uart_guard.map.json")
    assert img.entry_point == 0x080000C0, hex(img.entry_point)
    assert img.initial_sp == 0x20004000
    assert any(name == "HAL_UART_Receive" for name, _, _ in img.symbols())
    lines = img.disasm(img.entry_point, 4)
    assert len(lines) == 4 and "bl" in lines[0], lines

    summary = json.loads(rg.transplant(
        work / "fw" / "uart_guard.bin",
        work / "fw" / "uart_guard.map.json",
        work / "timage",
        True,
    ))
    assert summary["hal_redirects"] == 3, summary
    assert summary["trampolines"] > 0

    ok = json.loads(rg.run(work / "timage", b"salt"))
    assert ok["status"]["status"] == "completed", ok["status"]

    crash = json.loads(rg.run(work / "timage", b"BUG!"))
    assert crash["status"]["status"] == "crashed", crash["status"]
    assert crash["status"]["crash"]["addr"] == 0x60000000

    report = json.loads(rg.fuzz(work / "timage", [b"foo"], 200_000, 180))
    assert report["crash_groups"] >= 1, report

    tri = json.loads(rg.triage(work / "timage", b"BUG!"))
    assert tri["fault"].startswith("mem_write_60000000"), tri
    assert tri["pc_symbol"] == "main"

    print("smoke test passed:", json.dumps({
        "fuzz_execs": report["execs"],
        "crash": tri["dedup_key"],
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main())
