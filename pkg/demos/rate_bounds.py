"""Rates implied by polynomial memory loss and mixing, and the S(0, m) sandwich.

    python3 demos/rate_bounds.py
"""
from quenched_clt.rates import BoundModel, sandwich_audit
from quenched_clt.runner import rate_rows

for psi, gamma in ((3.0, 1.0), (1.5, 5.0), (2.0, 0.5)):
    model = BoundModel.polynomial(psi, gamma)
    print(f"psi={psi}, gamma={gamma}")
    for name, desc in rate_rows(model):
        print(f"    {name:20s} {desc}")
    for lo, hi in ((1, 10), (4, 12)):
        audit = sandwich_audit(model, [2 ** e for e in range(lo, hi + 1)])
        print(f"    S(0,m) slope on m=2^{lo}..2^{hi}: {audit.fit.slope:.3f} (target {audit.target_slope:g})")
