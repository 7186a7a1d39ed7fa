"""Regenerate the BENCHMARKS.md seed panel and noise sweep.

Runs the file-based ablation pipeline for the canonical spec across the
pre-registered seeds, then sweeps the noise level on the pinned seed.

Usage:
    python scripts/seed_panel.py
"""

import sys
import tempfile
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rerankit.pipeline import PipelineConfig, run_pipeline
from rerankit.synthetic import SynthSpec

PANEL_SEEDS = (7, 8, 9, 10, 11)
NOISE_LEVELS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35)


def baseline_and_full(spec: SynthSpec) -> tuple[float, float]:
    with tempfile.TemporaryDirectory() as td:
        rows = run_pipeline(spec, PipelineConfig(), td, ablation=True)
    by_variant = {r["variant"]: r["mAP"] for r in rows}
    return by_variant["baseline"], by_variant["+DMON+ARO"]


def main() -> int:
    canonical = SynthSpec()
    print("seed panel (canonical spec):")
    improving = 0
    for seed in PANEL_SEEDS:
        base, full = baseline_and_full(replace(canonical, seed=seed))
        improved = full >= base
        improving += improved
        print(f"  seed {seed}: baseline {base:.6f}  +DMON+ARO {full:.6f}  "
              f"{'improved' if improved else 'degraded'}")
    print(f"  -> {improving}/{len(PANEL_SEEDS)} seeds improving\n")

    print("noise sweep (seed 7):")
    for noise in NOISE_LEVELS:
        base, full = baseline_and_full(replace(canonical, intra_noise=noise))
        print(f"  intra_noise {noise:.2f}: baseline {base:.4f}  "
              f"+DMON+ARO {full:.4f}  delta {full - base:+.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
