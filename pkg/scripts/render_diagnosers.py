#!/usr/bin/env python3
"""Materialize diagnosers for every bundled model.

For each bundled plant/spec pair this synthesizes the diagnoser and writes
two artifacts next to each other: the diagnoser as a plant-format text file
(loadable back through ``fdikit verify --diagnoser``) and a Graphviz dot
rendering of its belief automaton with alarm annotations.

Usage:
    python scripts/render_diagnosers.py [-o OUTDIR] [model ...]
"""

import argparse
import time
from pathlib import Path

from fdikit.cli import format_model, parse_model, parse_specs
from fdikit.models import model_path
from fdikit.synth import emit_diagnoser, synthesize, to_dot

BUNDLED = ("toy", "battery_simple", "delay", "twin", "bss")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("models", nargs="*", default=list(BUNDLED),
                    help=f"bundled model names (default: all of {', '.join(BUNDLED)})")
    ap.add_argument("-o", "--outdir", type=Path, default=Path("out"))
    args = ap.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    for stem in args.models:
        model_text = model_path(f"{stem}.fml").read_text()
        plant = parse_model(model_text, f"{stem}.fml")
        specs = parse_specs(
            model_path(f"{stem}.aslk").read_text(), plant, f"{stem}.aslk"
        )
        t0 = time.monotonic()
        diag = synthesize(plant, specs)
        d_lts = emit_diagnoser(diag, name=f"{stem}_diagnoser")
        dt = time.monotonic() - t0
        fml = args.outdir / f"{stem}_diagnoser.fml"
        dot = args.outdir / f"{stem}_diagnoser.dot"
        fml.write_text(format_model(d_lts))
        dot.write_text(to_dot(diag))
        print(f"{stem:<16} {len(diag.automaton.beliefs):>5} beliefs  "
              f"[{dt:.2f}s]  -> {fml}, {dot}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
