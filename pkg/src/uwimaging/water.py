"""Jerlov water-type coefficient tables and random type pairing."""

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._validation import DataError

WAVELENGTHS = (650, 525, 450)
FIELDS = ("name",) + tuple(f"beta_d_{w}" for w in WAVELENGTHS) + tuple(
    f"beta_b_{w}" for w in WAVELENGTHS
)
N_TYPES = 10


@dataclass(frozen=True)
class WaterType:
    name: str
    beta_d: tuple
    beta_b: tuple

    def __post_init__(self):
        for label, triple in (("beta_d", self.beta_d), ("beta_b", self.beta_b)):
            values = tuple(float(v) for v in triple)
            if len(values) != 3:
                raise DataError(f"water type {self.name!r}: {label} needs 3 values")
            if not all(np.isfinite(v) and v > 0 for v in values):
                raise DataError(
                    f"water type {self.name!r}: {label} coefficients must be positive "
                    f"and finite, got {list(values)}"
                )
            object.__setattr__(self, label, values)


class WaterTypeTable:
    """Immutable, validated collection of exactly ten water types."""

    def __init__(self, entries):
        entries = tuple(entries)
        if len(entries) != N_TYPES:
            raise DataError(f"water-type table needs {N_TYPES} entries, found {len(entries)}")
        seen = set()
        for entry in entries:
            if entry.name in seen:
                raise DataError(f"duplicate water type name {entry.name!r}")
            seen.add(entry.name)
        self._entries = entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, key):
        if isinstance(key, str):
            for entry in self._entries:
                if entry.name == key:
                    return entry
            raise KeyError(key)
        return self._entries[key]

    def __eq__(self, other):
        return isinstance(other, WaterTypeTable) and self._entries == other._entries

    @property
    def names(self):
        return [e.name for e in self._entries]

    def index(self, name):
        return self.names.index(name)

    def beta_d_array(self):
        return np.array([e.beta_d for e in self._entries])

    def beta_b_array(self):
        return np.array([e.beta_b for e in self._entries])


def _parse_record(line, lineno):
    record = {}
    for chunk in line.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        key, sep, value = chunk.partition("=")
        if not sep:
            raise DataError(f"line {lineno}: expected key=value, got {chunk!r}")
        record[key.strip()] = value.strip()
    name = record.get("name", f"<line {lineno}>")
    missing = [f for f in FIELDS if f not in record]
    if missing:
        raise DataError(f"water type {name!r} (line {lineno}) is missing {', '.join(missing)}")
    try:
        beta_d = [float(record[f"beta_d_{w}"]) for w in WAVELENGTHS]
        beta_b = [float(record[f"beta_b_{w}"]) for w in WAVELENGTHS]
    except ValueError:
        raise DataError(f"water type {name!r} (line {lineno}) has a non-numeric coefficient") from None
    return WaterType(name, tuple(beta_d), tuple(beta_b))


def parse_table(text):
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            entries.append(_parse_record(line, lineno))
    return WaterTypeTable(entries)


def format_table(table):
    lines = []
    for e in table:
        parts = [f"name={e.name}"]
        parts += [f"beta_d_{w}={v!r}" for w, v in zip(WAVELENGTHS, e.beta_d)]
        parts += [f"beta_b_{w}={v!r}" for w, v in zip(WAVELENGTHS, e.beta_b)]
        lines.append(", ".join(parts))
    return "\n".join(lines) + "\n"


def default_table_text():
    return resources.files("uwimaging").joinpath("data/jerlov_default.txt").read_text()


def load_table(source=None):
    """Load a water-type table from ``source`` or the bundled default."""
    if source is None:
        return parse_table(default_table_text())
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read water-type table {path}: {exc.strerror}") from None
    return parse_table(text)


def save_table(table, path):
    Path(path).write_text(format_table(table))


def sample_type_pair(table, rng_seed):
    """Draw (attenuation source, scattering source) uniformly and independently."""
    rng = np.random.default_rng(rng_seed)
    i, j = rng.integers(0, len(table), size=2)
    return table[int(i)], table[int(j)]
