"""Stage reports and their key=value text form.

Each line is a record type followed by space-separated key=value pairs:

    stage name=coarse iters=1000
    checkpoint step=100 count=5123 loss=0.0812 ...
    densify step=100 before=5000 splits=80 clones=43 pruned=0 after=5123
    final step=1000 count=5400

Only deterministic values are written; wall-clock time stays in memory and
goes to the JSON results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

from core.errors import DatasetError
from pipeline.density import DensifyEvent


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def _parse(value: str):
    try:
        return int(value)
    except ValueError:
        try:
            return float(value)
        except ValueError:
            return value


@dataclass
class Checkpoint:
    step: int
    count: int
    values: Dict[str, float] = field(default_factory=dict)

    def as_fields(self):
        return {"step": self.step, "count": self.count, **self.values}


@dataclass
class StageReport:
    stage: str
    iters: int = 0
    checkpoints: List[Checkpoint] = field(default_factory=list)
    events: List[DensifyEvent] = field(default_factory=list)
    final_count: int = 0
    wall_clock: float = 0.0

    def add_checkpoint(self, step: int, count: int, values: Dict[str, float]) -> Checkpoint:
        if self.checkpoints and step <= self.checkpoints[-1].step:
            raise ValueError(f"checkpoint step {step} does not follow {self.checkpoints[-1].step}")
        cp = Checkpoint(step, count, dict(values))
        self.checkpoints.append(cp)
        return cp

    def last(self) -> Checkpoint:
        return self.checkpoints[-1]

    def to_text(self) -> str:
        lines = [f"stage name={self.stage} iters={self.iters}"]
        records = [(cp.step, 0, "checkpoint", cp.as_fields()) for cp in self.checkpoints]
        records += [(ev.step, 1, "densify", ev.as_fields()) for ev in self.events]
        for _, _, kind, fields in sorted(records, key=lambda r: (r[0], r[1])):
            lines.append(kind + " " + " ".join(f"{k}={_fmt(v)}" for k, v in fields.items()))
        lines.append(f"final step={self.iters} count={self.final_count}")
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "StageReport":
        report = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            kind, *pairs = line.split()
            fields = {}
            for pair in pairs:
                key, sep, value = pair.partition("=")
                if not sep:
                    raise DatasetError(f"report line {lineno}: malformed field {pair!r}")
                fields[key] = _parse(value)
            if kind == "stage":
                report = cls(stage=str(fields.get("name")), iters=int(fields.get("iters", 0)))
            elif report is None:
                raise DatasetError("report does not start with a stage line")
            elif kind == "checkpoint":
                step, count = int(fields.pop("step")), int(fields.pop("count"))
                # appended unchecked so a checker can report ordering problems
                report.checkpoints.append(Checkpoint(step, count, fields))
            elif kind == "densify":
                report.events.append(DensifyEvent(**{k: int(v) for k, v in fields.items()}))
            elif kind == "final":
                report.final_count = int(fields["count"])
            else:
                raise DatasetError(f"report line {lineno}: unknown record {kind!r}")
        if report is None:
            raise DatasetError("empty report")
        return report

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StageReport":
        return cls.from_text(Path(path).read_text())
