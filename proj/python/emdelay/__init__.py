# SPDX-License-Identifier: MIT
"""Stochastic delay systems: simulation, adjoints and optimality checks."""

try:
    from ._emdelay import (  # noqa: F401
        ConfigError,
        InvalidHorizon,
        NonCommensurateDelay,
        TimeGrid,
        UnsupportedRegime,
        brownian_increments,
        clark_ocone_wT_squared,
        cost,
        e1_field,
        kernel_eval,
        lq_benchmark_closed_form,
        lq_closed_form,
        lq_verify,
        make_grid,
    )
except ImportError:  # in-tree runs: the extension sits on sys.path directly
    from _emdelay import (  # noqa: F401
        ConfigError,
        InvalidHorizon,
        NonCommensurateDelay,
        TimeGrid,
        UnsupportedRegime,
        brownian_increments,
        clark_ocone_wT_squared,
        cost,
        e1_field,
        kernel_eval,
        lq_benchmark_closed_form,
        lq_closed_form,
        lq_verify,
        make_grid,
    )

__all__ = [
    "ConfigError",
    "InvalidHorizon",
    "NonCommensurateDelay",
    "TimeGrid",
    "UnsupportedRegime",
    "brownian_increments",
    "clark_ocone_wT_squared",
    "cost",
    "e1_field",
    "kernel_eval",
    "lq_benchmark_closed_form",
    "lq_closed_form",
    "lq_verify",
    "make_grid",
]
