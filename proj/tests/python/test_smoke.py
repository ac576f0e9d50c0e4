# SPDX-License-Identifier: MIT
"""Smoke tests of the python bindings and the CLI."""

import json
import os
import subprocess

import numpy as np
import pytest

import emdelay


def test_grid_and_noise():
    g = emdelay.make_grid(0.0, 1.0, 100, 0.1)
    assert g.n_steps == 100
    assert g.delay_steps == 10
    assert g.dt == pytest.approx(0.01)

    dw = emdelay.brownian_increments(g, 50, 42)
    assert dw.shape == (50, 100)
    # Determinism: same seed reproduces bit-identical increments.
    assert np.array_equal(dw, emdelay.brownian_increments(g, 50, 42))
    # Increment variance ~ dt.
    assert np.var(dw) == pytest.approx(g.dt, rel=0.2)


def test_grid_validation():
    with pytest.raises(emdelay.NonCommensurateDelay):
        emdelay.make_grid(0.0, 1.0, 100, 0.015)
    with pytest.raises(emdelay.InvalidHorizon):
        emdelay.make_grid(1.0, 0.0, 10, 0.0)


def test_kernels_and_e1():
    g = emdelay.make_grid(0.0, 1.0, 50, 0.1)
    const = json.dumps({"form": "constant", "c": 2.0})
    assert emdelay.kernel_eval(const, 0.7, 0.2, 0.0, 1.0) == 2.0
    e1 = emdelay.e1_field(const, g)
    # E1(t, s) = c (t - s) exactly for a constant kernel.
    assert e1[30, 10] == pytest.approx(2.0 * (0.6 - 0.2))
    assert np.allclose(np.triu(e1, 1), 0.0)


def test_lq_closed_form_benchmark():
    g = emdelay.make_grid(0.0, 1.0, 100, 0.1)
    u = emdelay.lq_benchmark_closed_form(g)
    assert u.shape == (101,)
    # Negative on the whole horizon, with the magnitude drop past T - delta
    # where the delayed-control terms leave the window.
    assert np.all(u < 0.0)
    assert abs(u[95]) < abs(u[0])


def test_cost_and_verify():
    g = emdelay.make_grid(0.0, 1.0, 50, 0.1)
    spec = json.dumps({"f": 1.0, "r1": 1.0})
    cfg = json.dumps(
        {
            "system": {"type": "lq", "f": 1.0, "r1": 1.0},
            "control": {"type": "constant", "value": 0.0},
        }
    )
    j0, _ = emdelay.cost(cfg, g, 2000, 3)
    assert j0 == pytest.approx(0.0, abs=1e-12)

    rep = emdelay.lq_verify(spec, g, 2000, 3)
    assert rep["pass"]
    # u* = -1/2, J* = -T/4 for f = r1 = 1 and no other terms.
    assert rep["u_star"][0] == pytest.approx(-0.5)
    assert rep["j_star"] == pytest.approx(-0.25, abs=1e-10)


def test_clark_ocone():
    g = emdelay.make_grid(0.0, 1.0, 100, 0.0)
    rep = emdelay.clark_ocone_wT_squared(g, 2000, 11)
    assert rep["rel_l2_error"] < 0.2


@pytest.mark.skipif("EMDELAY_CLI" not in os.environ, reason="CLI not built")
def test_cli_lq_verify():
    cfg_dir = os.environ.get("EMDELAY_CONFIGS")
    assert cfg_dir, "EMDELAY_CONFIGS must point at the configs directory"
    out = subprocess.run(
        [
            os.environ["EMDELAY_CLI"],
            "lq-verify",
            "--config",
            os.path.join(cfg_dir, "lq_benchmark.json"),
            "--paths",
            "2000",
        ],
        capture_output=True,
        text=True,
        check=True,
    )
    rep = json.loads(out.stdout)
    assert rep["pass"] is True
    assert rep["j_gap"] > 0.0
