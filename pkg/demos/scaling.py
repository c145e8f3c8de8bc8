"""
How GLCM cost grows
===================

Hard counting is linear in the number of pixel pairs; the soft matrix adds
an n x n outer product per pair.  Small sweeps, single BLAS thread.
"""
from texloss.bench import SOFT_BINS, SOFT_SIDE, fit_slope, run_scaling, soft_hard_ratios

res = run_scaling([s * s for s in (64, 128, 256, 512)], [8], repeats=3, modes=("hard",))
rows = res.select("hard")
print("hard, n=8:", [(r.N, f"{r.seconds * 1e3:.2f} ms") for r in rows])
print("slope vs N:", round(fit_slope([r.N for r in rows], [r.seconds for r in rows]), 3))

# a tiny image and thousands of bins, so the n x n term is what gets measured
res = run_scaling([SOFT_SIDE ** 2], SOFT_BINS, repeats=5, modes=("soft",))
rows = res.select("soft")
print(f"soft, {SOFT_SIDE}x{SOFT_SIDE}:", [(r.n, f"{r.seconds * 1e3:.1f} ms") for r in rows])
print("slope vs n:", round(fit_slope([r.n for r in rows], [r.seconds for r in rows]), 3))

# at a few bins the linear weight pass hides the quadratic term
res = run_scaling([128 * 128], [4, 16, 64], repeats=3)
print("soft/hard time ratio at n = 4, 16, 64:", [round(r, 1) for r in soft_hard_ratios(res, 128 * 128)])
