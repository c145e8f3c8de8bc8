"""
Checking the analytic texture-loss gradient
===========================================

The loss compares descriptor grids of two images and reduces the absolute
differences with one of four rules.  Every piece is differentiated by hand;
here we hold those gradients up against central differences.
"""
import numpy as np

from texloss import BinGrid, TextureLoss, finite_diff_check
from texloss.aggregation import AttentionParams, init_attention
from texloss.mste import OffsetGrid
from texloss.synthetic import rng_for

gen = rng_for(3)
x = gen.uniform(-1, 1, (8, 8))
ref = gen.uniform(-1, 1, (8, 8))
bins = BinGrid.uniform(-1, 1, 8)

p = init_attention(1, seed=3)
attention = AttentionParams(p.wq, p.wk, p.wv, 0.7)   # nonzero gamma so the layer matters

print(f"{'rule':10s} {'kind':12s} {'loss':>10s} {'max rel err':>12s}")
for rule in ("max", "average", "frobenius", "attention"):
    for kind in ("contrast", "homogeneity", "asm", "correlation"):
        loss = TextureLoss(OffsetGrid(), bins, kind, rule, attention if rule == "attention" else None)
        targets = loss.targets(ref)
        value = loss.evaluate(x, targets).value

        def objective(a):
            r = loss.evaluate(a, targets)
            return r.value, r.grad

        report = finite_diff_check(x, objective, step=1e-4)
        print(f"{rule:10s} {kind:12s} {value:10.4f} {report.max_rel_err:12.2e}")

# The relative error is measured against the gradient's scale.  Pointwise, tiny
# gradient entries carry central-difference truncation that shrinks like h^2:
loss = TextureLoss(OffsetGrid(), bins, "contrast", "average")
targets = loss.targets(ref)
for h in (4e-4, 2e-4, 1e-4):
    r = finite_diff_check(x, lambda a: (loss.evaluate(a, targets).value, loss.evaluate(a, targets).grad), h)
    print(f"h={h:.0e}  max abs err {r.max_abs_err:.2e}")

# the loss of an image against its own target is exactly stationary
same = loss.evaluate(x, loss.targets(x))
print("self loss", same.value, "max |grad|", np.abs(same.grad).max())
