"""Objective and feasibility gap per outer iteration of one noiseless solve; writes trace.csv and a dual-axis plot."""
import math
from pathlib import Path

from _common import parse

from jadedoa.harness import emit_plot, run_convergence_trace

if __name__ == "__main__":
    cfg, out = parse(__doc__, str(Path(__file__).parent.parent / "configs" / "default.yaml"))
    path = run_convergence_trace(cfg, snr_db=math.inf, out_dir=out)
    rows = path.read_text().splitlines()
    print(f"{len(rows) - 1} outer iterations; last row: {rows[-1]}")
    print(emit_plot(path, "trace", Path(out) / "convergence.svg"))
