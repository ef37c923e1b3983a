"""Shared test configuration: deterministic hypothesis profile and the
environment switch that widens the slowest reproduction runs."""
import os

from hypothesis import settings

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")


def full_runs_enabled() -> bool:
    """True when the FORCHFLOW_FULL environment flag asks for the long
    time-step ladder (the tau=1e-3 transient) in the acceptance gates."""
    return os.environ.get("FORCHFLOW_FULL", "") not in ("", "0")
