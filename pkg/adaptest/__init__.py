"""Public API for the adaptest package."""

from importlib import import_module
from typing import TYPE_CHECKING, Any

__all__ = [
    "Dist",
    "DistError",
    "Family",
    "FnTable",
    "LogValidation",
    "ModelSpec",
    "ModelViolation",
    "QueryLog",
    "Session",
    "SymString",
    "SystematicCode",
    "TESTERS",
    "Verdict",
    "dist_from_file",
    "dist_to_file",
    "emd",
    "estimate_acceptance",
    "generate",
    "make_systematic_code",
    "open_session",
    "run_experiment",
    "run_tester",
    "uniform",
    "validate_log",
    "variation",
]

_LAZY_IMPORTS = {
    "SymString": ("bitcore", "SymString"),
    "SystematicCode": ("bitcore", "SystematicCode"),
    "make_systematic_code": ("bitcore", "make_systematic_code"),
    "Dist": ("dists", "Dist"),
    "DistError": ("dists", "DistError"),
    "FnTable": ("dists", "FnTable"),
    "uniform": ("dists", "uniform"),
    "emd": ("metrics", "emd"),
    "variation": ("metrics", "variation"),
    "LogValidation": ("access", "LogValidation"),
    "ModelSpec": ("access", "ModelSpec"),
    "ModelViolation": ("access", "ModelViolation"),
    "QueryLog": ("access", "QueryLog"),
    "Session": ("access", "Session"),
    "Verdict": ("access", "Verdict"),
    "open_session": ("access", "open_session"),
    "validate_log": ("access", "validate_log"),
    "TESTERS": ("testers", "TESTERS"),
    "run_tester": ("testers", "run_tester"),
    "Family": ("lab", "Family"),
    "generate": ("lab", "generate"),
    "estimate_acceptance": ("harness", "estimate_acceptance"),
    "run_experiment": ("harness", "run_experiment"),
    "dist_from_file": ("records", "dist_from_file"),
    "dist_to_file": ("records", "dist_to_file"),
}

if TYPE_CHECKING:  # pragma: no cover - import side effects for type checkers only
    from .access import (
        LogValidation,
        ModelSpec,
        ModelViolation,
        QueryLog,
        Session,
        Verdict,
        open_session,
        validate_log,
    )
    from .bitcore import SymString, SystematicCode, make_systematic_code
    from .dists import Dist, DistError, FnTable, uniform
    from .harness import estimate_acceptance, run_experiment
    from .lab import Family, generate
    from .metrics import emd, variation
    from .records import dist_from_file, dist_to_file
    from .testers import TESTERS, run_tester


def __getattr__(name: str) -> Any:
    try:
        module_name, attribute = _LAZY_IMPORTS[name]
    except KeyError as exc:  # pragma: no cover - fall back to default behaviour
        raise AttributeError(f"module 'adaptest' has no attribute '{name}'") from exc
    module = import_module(f"{__name__}.{module_name}")
    value = getattr(module, attribute)
    globals()[name] = value
    return value


def __dir__() -> list[str]:  # pragma: no cover - simple static listing
    return sorted(set(__all__ + list(globals().keys())))
