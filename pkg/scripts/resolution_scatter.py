"""Per-trial estimates of two closely spaced sources; writes scatter.csv and a scatter plot."""
from pathlib import Path

from _common import parse

from jadedoa.harness import emit_plot, run_resolution_scatter

if __name__ == "__main__":
    cfg, out = parse(__doc__, str(Path(__file__).parent.parent / "configs" / "resolution.yaml"))
    path = run_resolution_scatter(cfg, out_dir=out)
    print(path)
    print(emit_plot(path, "scatter", Path(out) / "resolution.svg"))
