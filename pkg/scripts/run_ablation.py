"""Four-variant ablation on the canonical synthetic spec.

Writes runs/ablation/ablation.csv plus per-variant distance matrices,
manifests, and reports. Re-running produces identical bytes.

Usage:
    python scripts/run_ablation.py [out_dir] [seed]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from rerankit.pipeline import PipelineConfig, run_pipeline
from rerankit.synthetic import SynthSpec


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "runs/ablation"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 7
    spec = SynthSpec(seed=seed)
    rows = run_pipeline(spec, PipelineConfig(), out_dir, ablation=True)
    print(f"{'variant':<10} {'mAP':>10} {'rank1':>10}")
    for row in rows:
        print(f"{row['variant']:<10} {row['mAP']:>10.6f} {row['rank1']:>10.6f}")
    print(f"\ntable written to {Path(out_dir) / 'ablation.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
