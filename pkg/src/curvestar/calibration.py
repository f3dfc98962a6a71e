"""One-shot calibration of every convention-dependent constant.

Runs the flat, kernel and deformation-formula stages in order and returns a
single :class:`CalibrationRecord`.  All inputs are fixed, so reruns produce
byte-identical records.
"""
from __future__ import annotations

import logging
from dataclasses import replace

from .flatcore import calibrate_flat_phase
from .starprod import PREFACTOR_CANDIDATES, CalibrationRecord, calibrate_kernel, snap_constant
from .udf import calibrate_udf

log = logging.getLogger(__name__)

FLAT_CANDIDATES = {"1/pi^2": PREFACTOR_CANDIDATES["1/pi^2"], "1/(4pi^2)": PREFACTOR_CANDIDATES["1/(4pi^2)"],
                   "1/(2pi)": PREFACTOR_CANDIDATES["1/(2pi)"], "1": 1.0}


def calibrate(seed: int = 0) -> CalibrationRecord:
    flat = calibrate_flat_phase()
    c = float(round(flat["phase_constant"] * 2) / 2)     # nearest half-integer
    _, coef, gap = snap_constant(flat["prefactor_coefficient"], FLAT_CANDIDATES)
    log.info("flat phase constant %.8f -> %s, prefactor gap %.2e", flat["phase_constant"], c, gap)
    kern = calibrate_kernel(seed=seed)
    res = dict(kern.residuals)
    res["flat_phase_constant_gap"] = abs(flat["phase_constant"] - c)
    res["flat_prefactor_gap"] = gap
    res["flat_oracle"] = flat["residual"]
    rec = replace(kern, flat_phase_constant=c, flat_prefactor=coef, residuals=tuple(sorted(res.items())))
    rec = calibrate_udf(rec)
    return replace(rec, status="calibrated")
