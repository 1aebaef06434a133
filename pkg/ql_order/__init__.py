"""
Quasi-likelihood estimation of the number of sinusoids measured with errors.

The most used entry points are re-exported here.
"""

from ql_order.likelihood import likelihood_profile, ql_estimate  # noqa: F401
from ql_order.signal_model import ComponentParams, Envelope, Observation, ParamErrors, SignalSpec  # noqa: F401
from ql_order.theory import abridged_error, decision_stats  # noqa: F401


VERSION = "0.1.0"
