"""Mid-circuit measurement tomography: gadget crunching, FOMGI extraction,
gate-set fits and model selection.

Gate sets and datasets cross the boundary as JSON strings; matrices as NumPy
arrays. ``fit`` returns a parsed report with gauge-aligned strengths.
"""

import json

from . import _mcm
from ._mcm import (
    ValidationError,
    circuit_probability,
    crunch,
    design_circuits,
    evidence_ratio,
    extract,
    fomgi_labels,
    ideal_gateset,
    loglikelihood,
    n_sigma,
    saturated_loglikelihood,
    selftest,
    simulate,
    truth_gateset,
)

__all__ = [
    "ValidationError",
    "circuit_probability",
    "crunch",
    "design_circuits",
    "evidence_ratio",
    "extract",
    "fit",
    "fomgi_labels",
    "ideal_gateset",
    "loglikelihood",
    "n_sigma",
    "saturated_loglikelihood",
    "selftest",
    "simulate",
    "truth_gateset",
]


def fit(dataset, model="CPTP", starts=5, seed=0):
    """Fit `model` to a dataset (JSON string) and return the report as a dict."""
    return json.loads(_mcm.fit(dataset, model, starts, seed))
