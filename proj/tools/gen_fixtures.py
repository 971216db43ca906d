#!/usr/bin/env python3
# Copyright (C) 2026 The cwasi-cpp Authors
#
# SPDX-License-Identifier: Apache-2.0
"""Compile every .wat fixture to its .wasm twin.

The binaries are checked in, so this only needs to run after a .wat changes.
Requires the `wasmtime` Python package (used solely for its wat2wasm).
"""

import argparse
import pathlib
import sys

import wasmtime


def main() -> int:
    default_dir = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "wasm"
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", nargs="?", type=pathlib.Path, default=default_dir)
    args = parser.parse_args()

    sources = sorted(args.directory.glob("*.wat"))
    if not sources:
        print(f"no .wat files in {args.directory}", file=sys.stderr)
        return 1

    for source in sources:
        binary = wasmtime.wat2wasm(source.read_text(encoding="utf-8"))
        target = source.with_suffix(".wasm")
        target.write_bytes(bytes(binary))
        print(f"{source.name} -> {target.name} ({len(binary)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
