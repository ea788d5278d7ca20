"""How fast does sigma_n^2(omega) settle down for a sticky Markov environment?

Slopes 2 and 3 are chosen by a two-state chain that stays put with
probability 0.9. The median spread of sigma_n^2 across environments should
shrink roughly like n^(-1/2).

    python3 demos/fluctuation_decay.py [realizations]
"""
import sys

from quenched_clt.maps import Ensemble, MapSystem
from quenched_clt.observables import Cosine
from quenched_clt.quenched import fluctuation_decay
from quenched_clt.selection import SelectionProcess

R = int(sys.argv[1]) if len(sys.argv) > 1 else 24
T = MapSystem.beta((2.0, 3.0))
chain = SelectionProcess.markov(((0.9, 0.1), (0.1, 0.9)))
sched = [2 ** e for e in range(6, 12)]

fd = fluctuation_decay(T, chain, Cosine(1), Ensemble.sample(4096, seed=5), sched, R, seed=5,
                       estimator="windowed", window=8)
for n, spread in zip(sched, fd.median):
    print(f"n={n:5d}  median |sigma_n^2 - mean| = {spread:.5f}")
print(f"fitted slope {fd.fit.slope:.3f}  (95% CI {fd.fit.ci_low:.3f} .. {fd.fit.ci_high:.3f})")
