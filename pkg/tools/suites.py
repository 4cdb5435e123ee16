"""Load experiment suites from YAML."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog
import yaml
from pydantic import ValidationError

from polynewt.errors import ConfigError
from schemas.experiment import ExperimentSpec, SuiteSpec

log = structlog.get_logger("polynewt.suites")


class SuiteRegistry:
    def __init__(self, suites: Dict[str, SuiteSpec]):
        self.suites = suites

    @classmethod
    def from_yaml(cls, path: Path | str) -> "SuiteRegistry":
        target = Path(path)
        if not target.is_file():
            raise ConfigError(f"suite file not found: {target}")
        try:
            data = yaml.safe_load(target.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{target}: {exc}") from exc
        version = str(data.get("schema_version", "1.0"))
        suites: Dict[str, SuiteSpec] = {}
        for name, body in (data.get("suites") or {}).items():
            body = dict(body or {})
            try:
                suites[name] = SuiteSpec.model_validate(
                    {"schema_version": version, "name": name, **body}
                )
            except ValidationError as exc:
                raise ConfigError(f"{target}: suite {name!r}: {exc}") from exc
        log.info("suites loaded", path=str(target), suites=sorted(suites))
        return cls(suites)

    def names(self) -> List[str]:
        return sorted(self.suites)

    def get(self, name: str) -> SuiteSpec:
        try:
            return self.suites[name]
        except KeyError:
            raise ConfigError(
                f"unknown suite {name!r}; available: {', '.join(self.names()) or 'none'}"
            ) from None

    def experiments(self, name: str, *, seed: Optional[int] = None) -> List[ExperimentSpec]:
        """Experiments of ``name``, with every seed replaced when ``seed`` is given."""
        specs = self.get(name).experiments
        if seed is None:
            return list(specs)
        return [spec.model_copy(update={"seed": seed}) for spec in specs]


def load_suites(path: Path | str | None = None) -> SuiteRegistry:
    if path is None:
        from polynewt.config import get_settings

        path = get_settings().suites_path
    return SuiteRegistry.from_yaml(path)


def describe(registry: SuiteRegistry) -> List[Dict[str, Any]]:
    return [
        {
            "name": name,
            "description": registry.suites[name].description,
            "experiments": [spec.id for spec in registry.suites[name].experiments],
        }
        for name in registry.names()
    ]


__all__ = ["SuiteRegistry", "describe", "load_suites"]
