"""
Evaluation toolkit: template matching and the perception-distortion plane
=========================================================================
"""
import numpy as np

from texloss.analysis import PdPoint, equispaced_templates, kde, matching_scores, pd_rank, ranked_csv
from texloss.metrics import cnr, paired_metrics
from texloss.optimize import checkerboard_benchmark, denoise_pixels, golden_config

clean, noisy = checkerboard_benchmark()
out, _ = denoise_pixels(noisy, clean, golden_config())

# nine 32x32 templates cut from the noisy image
print("template origins:", [t.origin for t in equispaced_templates(noisy)])

self_scores = matching_scores(noisy, noisy)
scores = matching_scores(noisy, out)
print("noisy vs itself:", np.round(self_scores, 6))
print("noisy vs denoised:", np.round(scores, 4))

dist = kde(scores)
print(f"KDE bandwidth {dist.bandwidth:.2e}, mean {dist.mean:.4f}, "
      f"integral {np.trapezoid(dist.density, dist.grid):.6f}")
# a mean below one says the denoiser changed structure the templates can see

print(paired_metrics(out, clean))
print("CNR of the two checker levels at the benchmark noise:", cnr(0.8, 0.2, 0.2))

# ranking methods by distance from the origin of (perception, distortion)
points = [PdPoint("sharp but noisy", 5.2, 0.0116), PdPoint("smooth", 6.1, 0.0104),
          PdPoint("plain L2", 6.5, 0.0105)]
print(ranked_csv(pd_rank(points)))
