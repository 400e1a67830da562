"""Longitudinal survey data: loading, validation, normalization and synthesis.

Dataset files are long-form CSV with header ``participant_id,timestep,concept_id,value``,
one row per (participant, wave, concept). An optional JSON schema lists each
concept's ``id``, ``label``, ``domain``, ``raw_min`` and ``raw_max``; without a
schema (or with ``"prenormalized": true``) values must already lie in [0, 1].
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DimensionError
from .fcm import ActivationSpec, SimulationSpec, simulate_fcm

__all__ = [
    "Participant",
    "LongitudinalDataset",
    "Concept",
    "ConceptSchema",
    "SyntheticSpec",
    "IncompleteParticipantWarning",
    "load_longitudinal",
    "save_longitudinal",
    "load_schema",
    "save_schema",
    "normalize",
    "generate_synthetic",
    "read_matrix",
    "write_matrix",
    "read_vector",
    "write_trajectory",
    "format_float",
]

HEADER = ["participant_id", "timestep", "concept_id", "value"]


class IncompleteParticipantWarning(UserWarning):
    pass


def format_float(x: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


@dataclass
class Participant:
    participant_id: str
    waves: np.ndarray  # (T + 1, n); row 0 is the baseline

    @property
    def baseline(self) -> np.ndarray:
        return self.waves[0]


@dataclass
class LongitudinalDataset:
    concept_labels: list
    participants: list = field(default_factory=list)

    def __post_init__(self):
        ids = [p.participant_id for p in self.participants]
        if len(set(ids)) != len(ids):
            raise DataError("participant ids must be unique")
        n = len(self.concept_labels)
        shapes = {p.waves.shape for p in self.participants}
        if len(shapes) > 1:
            raise DataError(f"participants have differing wave shapes: {sorted(shapes)}")
        for s in shapes:
            if len(s) != 2 or s[1] != n or s[0] < 1:
                raise DimensionError("participant waves", n, s)

    @property
    def n(self) -> int:
        return len(self.concept_labels)

    @property
    def p(self) -> int:
        return len(self.participants)

    @property
    def T(self) -> int:
        return self.participants[0].waves.shape[0] - 1 if self.participants else 0

    def ids(self) -> list:
        return [p.participant_id for p in self.participants]

    def get(self, participant_id: str) -> Participant:
        for p in self.participants:
            if p.participant_id == participant_id:
                return p
        raise KeyError(participant_id)

    def array(self) -> np.ndarray:
        """All waves stacked as ``(p, T + 1, n)``."""
        return np.stack([p.waves for p in self.participants])

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(list(self.concept_labels)).encode())
        for p in self.participants:
            h.update(p.participant_id.encode() + b"\x00")
            h.update(np.ascontiguousarray(p.waves, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Concept:
    id: int
    label: str
    domain: str = ""
    raw_min: float = 0.0
    raw_max: float = 1.0


@dataclass(frozen=True)
class ConceptSchema:
    concepts: tuple
    prenormalized: bool = False

    def __post_init__(self):
        ids = [c.id for c in self.concepts]
        if ids != list(range(len(ids))):
            raise DataError(f"schema concept ids must be 0..n-1 in order, got {ids}")
        for c in self.concepts:
            if not c.raw_min < c.raw_max:
                raise DataError(f"concept {c.id}: raw_min must be < raw_max")

    @property
    def n(self) -> int:
        return len(self.concepts)

    @property
    def labels(self) -> list:
        return [c.label for c in self.concepts]

    def bounds(self):
        if self.prenormalized:
            return np.zeros(self.n), np.ones(self.n)
        return (
            np.array([c.raw_min for c in self.concepts], dtype=np.float64),
            np.array([c.raw_max for c in self.concepts], dtype=np.float64),
        )

    @classmethod
    def unit(cls, labels) -> "ConceptSchema":
        return cls(tuple(Concept(i, str(lab)) for i, lab in enumerate(labels)), prenormalized=True)


def load_schema(path) -> ConceptSchema:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON: {e}", path=path) from e
    if isinstance(doc, list):
        doc = {"concepts": doc}
    try:
        concepts = sorted(
            (
                Concept(
                    id=int(c["id"]),
                    label=str(c["label"]),
                    domain=str(c.get("domain", "")),
                    raw_min=float(c["raw_min"]),
                    raw_max=float(c["raw_max"]),
                )
                for c in doc["concepts"]
            ),
            key=lambda c: c.id,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed schema entry: {e}", path=path) from e
    return ConceptSchema(tuple(concepts), prenormalized=bool(doc.get("prenormalized", False)))


def save_schema(schema: ConceptSchema, path) -> None:
    doc = {
        "prenormalized": schema.prenormalized,
        "concepts": [
            {"id": c.id, "label": c.label, "domain": c.domain, "raw_min": c.raw_min, "raw_max": c.raw_max}
            for c in schema.concepts
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_longitudinal(path, schema: ConceptSchema | None = None) -> LongitudinalDataset:
    """Parse a long-form dataset file.

    Values are checked against the schema's raw range (or [0, 1] without a
    schema) but not rescaled; see :func:`normalize`. Participants missing any
    (timestep, concept) cell are dropped with an :class:`IncompleteParticipantWarning`.
    """
    path = Path(path)
    if schema is not None:
        lo, hi = schema.bounds()
    cells = {}  # pid -> {(t, c): value}
    first_row = {}
    order = []
    max_t = -1
    max_c = -1
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != HEADER:
            raise DataError(f"expected header {','.join(HEADER)}, got {header}", row=1, path=path)
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != 4:
                raise DataError(f"expected 4 fields, got {len(row)}", row=row_no, path=path)
            pid = row[0].strip()
            if not pid:
                raise DataError("empty participant_id", row=row_no, path=path)
            try:
                t = int(row[1])
                c = int(row[2])
                v = float(row[3])
            except ValueError as e:
                raise DataError(f"unparseable field: {e}", row=row_no, path=path) from e
            if t < 0 or c < 0:
                raise DataError("timestep and concept_id must be >= 0", row=row_no, path=path)
            if not math.isfinite(v):
                raise DataError(f"non-finite value {row[3]!r}", row=row_no, path=path)
            if schema is not None:
                if c >= schema.n:
                    raise DataError(
                        f"concept_id {c} outside schema (n={schema.n})", row=row_no, path=path
                    )
                vmin, vmax = lo[c], hi[c]
            else:
                vmin, vmax = 0.0, 1.0
            if not vmin <= v <= vmax:
                raise DataError(
                    f"value {v} for participant {pid}, timestep {t}, concept {c} "
                    f"outside [{vmin}, {vmax}]",
                    row=row_no,
                    path=path,
                )
            if pid not in cells:
                cells[pid] = {}
                first_row[pid] = {}
                order.append(pid)
            if (t, c) in cells[pid]:
                raise DataError(
                    f"duplicate cell (participant {pid}, timestep {t}, concept {c}); "
                    f"first seen on line {first_row[pid][(t, c)]}",
                    row=row_no,
                    path=path,
                )
            cells[pid][(t, c)] = v
            first_row[pid][(t, c)] = row_no
            max_t = max(max_t, t)
            max_c = max(max_c, c)

    if not order:
        raise DataError("no data rows", path=path)
    n = schema.n if schema is not None else max_c + 1
    labels = schema.labels if schema is not None else [f"c{i}" for i in range(n)]
    n_waves = max_t + 1
    participants = []
    for pid in order:
        got = cells[pid]
        if len(got) != n_waves * n:
            missing = sorted({t for t in range(n_waves) for c in range(n) if (t, c) not in got})
            warnings.warn(
                f"participant {pid} dropped: incomplete data at timestep(s) {missing}",
                IncompleteParticipantWarning,
                stacklevel=2,
            )
            continue
        waves = np.empty((n_waves, n))
        for (t, c), v in got.items():
            waves[t, c] = v
        participants.append(Participant(pid, waves))
    if not participants:
        raise DataError("no participant has complete data", path=path)
    return LongitudinalDataset(list(labels), participants)


def save_longitudinal(data: LongitudinalDataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for p in data.participants:
            for t in range(p.waves.shape[0]):
                for c in range(p.waves.shape[1]):
                    w.writerow([p.participant_id, t, c, format_float(p.waves[t, c])])


def normalize(data: LongitudinalDataset, schema: ConceptSchema) -> LongitudinalDataset:
    """Min-max scale every concept from its schema range onto [0, 1]."""
    if schema.n != data.n:
        raise DimensionError("schema", data.n, schema.n)
    lo, hi = schema.bounds()
    out = []
    for p in data.participants:
        bad = np.argwhere((p.waves < lo) | (p.waves > hi))
        if bad.size:
            t, c = bad[0]
            raise DataError(
                f"participant {p.participant_id}, timestep {t}, concept {c}: value "
                f"{p.waves[t, c]} outside [{lo[c]}, {hi[c]}]"
            )
        out.append(Participant(p.participant_id, (p.waves - lo) / (hi - lo)))
    return LongitudinalDataset(list(schema.labels), out)


@dataclass(frozen=True)
class SyntheticSpec:
    p: int
    n: int
    T: int
    density: float = 1.0
    noise_sd: float = 0.0
    seed: int = 0
    activation: ActivationSpec = ActivationSpec()

    def __post_init__(self):
        if min(self.p, self.n, self.T) < 1:
            raise ConfigError("p, n and T must all be >= 1")
        if not 0.0 < self.density <= 1.0:
            raise ConfigError("density must lie in (0, 1]")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")


def generate_synthetic(spec: SyntheticSpec):
    """Draw a ground-truth map per participant and simulate its waves.

    Returns ``(dataset, truth)`` where ``truth`` maps participant id to the
    hidden weight matrix. Noise, if any, is added to waves 1..T and clipped.
    """
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.p - 1))
    sim = SimulationSpec(max_iterations=spec.T)
    participants = []
    truth = {}
    for i in range(spec.p):
        pid = f"p{i:0{width}d}"
        mask = rng.random((spec.n, spec.n)) < spec.density
        w = np.where(mask, rng.uniform(-1.0, 1.0, size=(spec.n, spec.n)), 0.0)
        baseline = rng.random(spec.n)
        waves = simulate_fcm(baseline, w, spec.activation, sim)
        if spec.noise_sd > 0:
            waves[1:] = np.clip(waves[1:] + rng.normal(0.0, spec.noise_sd, size=waves[1:].shape), 0.0, 1.0)
        participants.append(Participant(pid, waves))
        truth[pid] = w
    labels = [f"c{i}" for i in range(spec.n)]
    return LongitudinalDataset(labels, participants), truth


def write_matrix(path, weights, labels=None) -> None:
    """Write ``n`` header labels then ``n`` rows of ``n`` values."""
    w = np.asarray(weights, dtype=np.float64)
    labels = labels if labels is not None else [f"c{i}" for i in range(w.shape[0])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(labels)
        for row in w:
            out.writerow([format_float(x) for x in row])


def _read_table(path):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError("empty file", path=path)
    labels = [s.strip() for s in rows[0]]
    body = []
    for row_no, r in enumerate(rows[1:], start=2):
        if len(r) != len(labels):
            raise DataError(f"expected {len(labels)} fields, got {len(r)}", row=row_no, path=path)
        try:
            body.append([float(x) for x in r])
        except ValueError as e:
            raise DataError(str(e), row=row_no, path=path) from e
    return labels, np.array(body, dtype=np.float64).reshape(len(body), len(labels))


def read_matrix(path):
    """Return ``(weights, labels)`` from a matrix file."""
    labels, w = _read_table(path)
    if w.shape[0] != len(labels):
        raise DimensionError(f"matrix rows in {path}", len(labels), w.shape[0])
    if np.any(w < -1) or np.any(w > 1):
        raise DataError("weights must lie in [-1, 1]", path=path)
    return w, labels


def read_vector(path):
    """Return ``(values, labels)`` from a one-row table (header + values)."""
    labels, v = _read_table(path)
    if v.shape[0] != 1:
        raise DataError(f"expected exactly one value row, got {v.shape[0]}", path=path)
    return v[0], labels


def write_trajectory(fh, trajectory, labels) -> None:
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(["step", *labels])
    for s, row in enumerate(np.asarray(trajectory)):
        out.writerow([s, *(format_float(x) for x in row)])
