"""Bulk-synchronous farm toolkit: cost model, simulator, farm runs and calibration."""

import json

from ._core import (
    CostParams,
    Error,
    InvalidParameter,
    TransportFailure,
    UnboundedScalability,
    UndefinedRatio,
    argmax_speedup_grid,
    bsp_superstep_time,
    bsp_total_time,
    classify_scaling,
    decode_frame,
    efficiency_approx,
    efficiency_exact,
    emit_curve,
    encode_frame,
    iteration_time,
    iteration_time_single,
    scalability_bound,
    simulated_speedup_sweep,
    speedup,
    speedup_derivative,
    ts_to_v,
    v_to_ts,
)
from . import _core

__version__ = "0.1.0"


def simulate(params, K, iterations=1, mode="phase-seq", noise=0.0, seed=0):
    """Virtual-clock simulation; returns the report as a dict."""
    return json.loads(_core.simulate_json(params, K, iterations, mode, noise, seed))


def adequacy_report(params, observed, threshold=0.3):
    """observed: iterable of (K, time) pairs."""
    return json.loads(_core.adequacy_report_json(params, list(observed), threshold))


def run_quadratic(fixture="small64x16", K=1, backend="inproc"):
    """Least-squares gradient descent on the farm; returns x, grad_norm, iterations."""
    return json.loads(_core.run_quadratic_json(fixture, K, backend))


def calibrate(backend="inproc", sizes=(1000, 10000, 100000), repetitions=5, L=0.0, seconds_per_byte=0.0):
    """Ping-pong calibration. L and seconds_per_byte plant the virtual backend's link cost."""
    return json.loads(_core.calibrate_json(backend, list(sizes), repetitions, L, seconds_per_byte))
