"""Expected numbers of critical points of locally isotropic Gaussian random fields."""

import json as _json

from . import _core
from ._core import ConditionError, NumericError, closed_form_n2, eta_prime, eval_structure

__all__ = [
    "ConditionError",
    "NumericError",
    "catalog",
    "check",
    "closed_form_n2",
    "count",
    "eta_prime",
    "eval_structure",
    "rmt_sample",
    "simulate",
]


def catalog():
    """Built-in structure functions as a list of dicts."""
    return _json.loads(_core.catalog())


def count(request=None, **fields):
    """Evaluate a count request, given as a dict and/or keyword fields.

    >>> count(field="exp1", N=2, method="er", volume=1, index=0)["result"]["estimate"]
    """
    req = dict(request or {})
    req.update(fields)
    return _json.loads(_core.evaluate(_json.dumps(req)))


def check(field, N, r_grid="default"):
    """Smoothness, nondegeneracy and the radial conditions as ConditionReport dicts."""
    return _json.loads(_core.check(field, N, r_grid))


def simulate(field, N, shell, reps, h=0.06, seed=20240917, E="all", threads=1):
    """Average counts over sampled fields on a lattice; shell is (R1, R2)."""
    return _json.loads(_core.simulate(field, N, shell[0], shell[1], reps, h, seed, E, threads))


def rmt_sample(spec, count, seed=20240917):
    """Ascending eigenvalues, one row per sampled matrix."""
    return _core.rmt_sample(_json.dumps(spec), count, seed)
