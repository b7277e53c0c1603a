"""Where does the slow fixed point lose stability as epsilon varies?

Sweeps epsilon over [0.25, 0.40], prints each grid point, then the bisected
window edges next to the reference range (0.29, 0.32].

    python3 demos/stability_window.py
"""
from sleepwake import default_parameters, find_fixed_point, stability_report
from sleepwake.analysis import epsilon_stability_sweep

params = default_parameters()

rep = stability_report(params)
fp = find_fixed_point(params)
print(f"baseline epsilon {params.mu}: GABA_VLPO={fp.gaba_vlpo:.4f} AD={fp.ad:.4f} "
      f"-> {rep.classification.value} (trace {rep.trace:+.4f})")

sweep = epsilon_stability_sweep(params)
for p in sweep.points:
    mark = "*" if p.oscillatory else " "
    print(f" {mark} eps={p.epsilon:.3f}  {p.classification.value:<14} trace={p.trace:+.4f} "
          f"bounded={p.bounded}")

lo, hi = sweep.window
print(f"oscillatory for epsilon in ({lo.epsilon:.5f}, {hi.epsilon:.5f})")
print(f"  lower edge: {lo.kind}, trace {lo.trace:+.1e}")
print(f"  upper edge: {hi.kind}, trace {hi.trace:+.3f} (orbit reaches the phase-box floor)")
print("reference   (0.29, 0.32]")
