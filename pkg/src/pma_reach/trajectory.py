"""Trajectory log container and its CSV form.

Row ``k`` holds the time stamp ``t_k = k*h``, the state reached at that step,
the reference sampled at ``t_k``, the control and disturbance that produced the
state (zero on row 0) and the tracking error ``ref - xi``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

SIG_DIGITS = 9


def fmt(x: float) -> str:
    return f"{x:.{SIG_DIGITS}g}"


def csv_header(d: int) -> list[str]:
    return (
        ["t"]
        + [f"xi_{i}" for i in range(d)]
        + [f"ref_{i}" for i in range(d)]
        + [f"u_{i}" for i in range(d)]
        + ["udist"]
        + [f"eps_{i}" for i in range(d)]
    )


@dataclass
class TrajectoryLog:
    t: np.ndarray
    xi: np.ndarray
    xi_ref: np.ndarray
    u: np.ndarray
    u_dist: np.ndarray
    udist: np.ndarray
    eps: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.xi.shape[1]

    @property
    def rows(self) -> int:
        return self.t.shape[0]

    @property
    def final_error(self) -> float:
        return float(np.linalg.norm(self.eps[-1]))

    def header(self) -> list[str]:
        return csv_header(self.dim)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        for k in range(self.rows):
            row = [self.t[k], *self.xi[k], *self.xi_ref[k], *self.u[k], self.udist[k], *self.eps[k]]
            writer.writerow([fmt(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv_text(), encoding="utf-8")
        return path


def read_csv(source: str | Path) -> TrajectoryLog:
    """Parse a trajectory CSV written by :meth:`TrajectoryLog.write_csv`.

    ``source`` is a path or the CSV text itself. Raises ConfigurationError when
    the header does not follow the ``t,xi_*,ref_*,u_*,udist,eps_*`` layout.
    """
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text(encoding="utf-8")
    metadata = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            metadata[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ConfigurationError("empty trajectory file")
    header, data = rows[0], rows[1:]
    if (len(header) - 2) % 4 or len(header) < 6:
        raise ConfigurationError(f"bad trajectory header: {header}")
    d = (len(header) - 2) // 4
    if header != csv_header(d):
        raise ConfigurationError(f"bad trajectory header: {header}")
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return TrajectoryLog(
        t=arr[:, 0],
        xi=arr[:, 1 : 1 + d],
        xi_ref=arr[:, 1 + d : 1 + 2 * d],
        u=arr[:, 1 + 2 * d : 1 + 3 * d],
        u_dist=np.outer(arr[:, 1 + 3 * d], np.ones(d)),
        udist=arr[:, 1 + 3 * d],
        eps=arr[:, 2 + 3 * d :],
        metadata=metadata,
    )
