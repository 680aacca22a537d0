"""Run manifests: the resolved inputs of a command, written next to its
artifacts so the run can be reproduced exactly by re-invoking the command
with the recorded arguments."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from . import __version__, jsonio


@dataclass
class RunManifest:
    command: str
    dataset: str | None
    dataset_format: str | None
    model: str | None
    config: dict | None
    seed: int | None
    split: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path):
        jsonio.dump(self.to_dict(), path)

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(**data)
