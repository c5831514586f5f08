"""
Checking the discrete adjoint
=============================

Finite differences, the duality pairing, and the Taylor remainder with both
friction Jacobians.
"""

import numpy as np

from tidalopt.adjoint import AdjointSources, duality_check, taylor_test
from tidalopt.cost import CostSpec, smooth_random_field
from tidalopt.forward import solve_forward
from tidalopt.scenarios import default_model
from tidalopt.verify import gradient_fd_check

model = default_model()
g, n = model.grid, model.time.steps
rng = np.random.default_rng(0)

# tangent and adjoint are exact transposes, so the pairing identity holds to rounding
base = solve_forward(model)
sources = AdjointSources(rng.standard_normal((n + 1, 2) + g.shape), rng.standard_normal((n + 1,) + g.shape))
print("duality defect:", duality_check(model, base, rng.standard_normal((n + 1, 2) + g.shape), sources))

# adjoint directional derivatives against central differences
control = smooth_random_field(g, rng, count=n + 1)
directions = [smooth_random_field(g, rng, count=n + 1) for _ in range(3)]
for kind in ("tracking", "dissipation", "general"):
    err = gradient_fd_check(model, CostSpec(kind, u_target=0.05), control, directions)
    print(f"{kind:12s} relative FD error {err:.2e}")

# exact Jacobian: second-order remainder; the scalar 2*gamma*|z| multiplier loses an order
v = smooth_random_field(g, rng, count=n + 1)
for mode in ("exact", "paper"):
    res = taylor_test(model, control, v, mode=mode)
    print(f"{mode:6s} Taylor slope {res.slope:.3f}  residuals {np.array2string(res.residual_linf_l2, precision=2)}")
