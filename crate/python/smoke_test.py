"""Smoke test for the Python bindings.

Build the extension first, then run this script:

    cargo build -p liftlab-py
    python3 python/smoke_test.py

The script stages the built cdylib under the module name the interpreter
expects, so no packaging tooling is involved.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

root = Path(__file__).resolve().parents[1]
candidates = [
    root / "target" / "debug" / "libliftlab.so",
    root / "target" / "release" / "libliftlab.so",
]
src = next((p for p in candidates if p.exists()), None)
if src is None:
    sys.exit("build the bindings first: cargo build -p liftlab-py")

stage = Path(tempfile.mkdtemp(prefix="liftlab-py-"))
shutil.copy2(src, stage / "liftlab.so")
sys.path.insert(0, str(stage))

import liftlab  # noqa: E402

assert liftlab.version().startswith("liftlab ")
assert "oscillator" in liftlab.builtin_names()

# The canonical involution squares to the identity (pure permutation, so
# exact equality is expected).
p = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8]
assert liftlab.kappa(3, 1, liftlab.kappa(3, 1, p)) == p

# Harmonic oscillator: x(t) = sin(t) from (0, 1).
osc = liftlab.builtin("oscillator")
times, points, status = osc.geodesic([0.0], [1.0])
assert status == "completed"
assert abs(times[-1] - 1.0) < 1e-9
assert abs(points[-1][0] - math.sin(1.0)) < 1e-9

# Its Jacobi field from J0=0, Jdot0=1 is also sin(t).
jt, jp, jstatus = osc.jacobi([0.0], [1.0], [0.0], [1.0])
assert jstatus == "completed"
assert abs(jp[-1][1] - math.sin(1.0)) < 1e-9

# Lifting doubles the level; the lifted coefficients have known values.
lifted = osc.complete_lift()
assert lifted.level == 2
vals = lifted.coefficients([1.0, 2.0, 3.0, 4.0])
assert abs(vals[0] - 0.5) < 1e-12
assert abs(vals[1] - 1.0) < 1e-12

# A custom homogeneous model passes the spray check, downstairs and up.
funk = liftlab.Semispray(2, ["sqrt(y1^2 + y2^2) * y1", "sqrt(y1^2 + y2^2) * y2"])
assert funk.is_spray()["pass"]
assert funk.complete_lift().is_spray()["pass"]

# One cheap criterion from the compiled-in battery.
res = liftlab.run_criterion("kappa-identities")
assert res is not None and res["passed"], res
assert liftlab.run_criterion("no-such-criterion") is None
assert len(liftlab.criterion_names()) == 11

print("smoke test passed")
