import json
import os
import subprocess
import sys

import numpy as np
import pytest

from thermoray import _jit, kernels

PROBE = r"""
import json, sys
import numpy as np
from thermoray import _jit, flow as fl, riccati as rc
from thermoray.geometry import ChartFunction, ConformalSurface, ThermostatParams, homogeneous_thermostat
s = ConformalSurface("torus", ChartFunction.cos_product(0.2))
p = ThermostatParams(s, ChartFunction.trig([(1, 0, 0.3, 0)]), ChartFunction.trig([(0, 1, 0, 0.2)]))
traj = fl.integrate_flow(p, (0.1, 0.2, 0.3), 2.0, dt=0.01)
jd = fl.integrate_jacobi(traj, 0.1, 1.0, 0.2)
b = rc.orbit_bundles(homogeneous_thermostat(0.5), (0.0, 1.0, 0.3), 0.5, warmup=20.0, dt=0.01)
json.dump({"backend": _jit.backend(), "end": traj.states[-1].tolist(), "jy": float(jd.jy[-1]),
           "q": traj.quantities()[-1].tolist(), "cu": float(b.cu[0])}, sys.stdout)
"""


def _probe(no_jit):
    env = dict(os.environ)
    env.pop("THERMORAY_NO_JIT", None)
    if no_jit:
        env["THERMORAY_NO_JIT"] = "1"
    env["THERMORAY_THREADS"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@pytest.mark.slow
def test_numpy_fallback_matches_numba():
    a, b = _probe(False), _probe(True)
    assert a["backend"] == "numba" and b["backend"] == "python"
    assert np.allclose(a["end"], b["end"], rtol=0, atol=1e-12)
    assert np.allclose(a["q"], b["q"], rtol=0, atol=1e-12)
    assert a["jy"] == pytest.approx(b["jy"], abs=1e-12)
    assert a["cu"] == pytest.approx(b["cu"], abs=1e-12)


def test_njit_decorator_forms():
    f = _jit.njit(lambda x: x + 1)
    g = _jit.njit(cache=False)(lambda x: x * 2)
    assert f(1) == 2 and g(3) == 6


def test_jet_matches_direct_evaluation():
    from thermoray.geometry import ChartFunction

    fn = ChartFunction.trig([(1, 2, 0.3, -0.1)]) + ChartFunction(log_y=0.5, log_r=0.2)
    m, logs = fn.packed()
    x, y = 0.4, 1.3
    jet = kernels.jet2(m, logs, x, y)
    assert np.allclose(jet, fn.jet(x, y), atol=1e-13)


def test_status_codes_distinct():
    codes = {kernels.STATUS_OK, kernels.STATUS_CHART_EXIT, kernels.STATUS_BLOWUP, kernels.STATUS_NONFINITE}
    assert len(codes) == 4
