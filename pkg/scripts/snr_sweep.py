"""RMSAE versus SNR for every configured method against the CRB; writes CSVs and a line plot."""
from pathlib import Path

from _common import parse

from jadedoa.harness import emit_plot, run_snr_sweep

if __name__ == "__main__":
    cfg, out = parse(__doc__, str(Path(__file__).parent.parent / "configs" / "default.yaml"))
    summary = run_snr_sweep(cfg, out)
    print(summary.read_text())
    print(emit_plot(summary, "line", Path(out) / "rmsae_vs_snr.svg"))
