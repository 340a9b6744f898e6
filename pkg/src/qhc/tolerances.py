"""Central tolerance profile used for certificate verdicts."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace

from .errors import InputError

ENV_VAR = "QHC_TOL"


@dataclass(frozen=True)
class ToleranceProfile:
    """Thresholds for equality-type, inequality-type and PSD tests."""

    eq: float = 1e-7
    ineq: float = 1e-8
    psd: float = 1e-9

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def parse(cls, text: str, base: "ToleranceProfile | None" = None) -> "ToleranceProfile":
        """Parse ``"eq=1e-7,ineq=1e-8,psd=1e-9"``; a bare number sets ``psd``."""
        base = base or cls()
        text = text.strip()
        if not text:
            return base
        try:
            return replace(base, psd=float(text))
        except ValueError:
            pass
        updates = {}
        for part in text.split(","):
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in ("eq", "ineq", "psd"):
                raise InputError(f"bad tolerance entry {part!r}")
            try:
                updates[key] = float(value)
            except ValueError as exc:
                raise InputError(f"bad tolerance value {value!r}") from exc
        for key, value in updates.items():
            if not value > 0:
                raise InputError(f"tolerance {key} must be positive")
        return replace(base, **updates)

    @classmethod
    def from_env(cls) -> "ToleranceProfile":
        return cls.parse(os.environ.get(ENV_VAR, ""))


DEFAULT = ToleranceProfile()
