"""Multi-domain structural-equation data.

Each domain draws a causal block ``zc``, builds the label mechanism
``ye = gamma * zc + noise`` with the noise projected off ``zc``, and exposes a
spurious block ``ze = ye + extra noise``. The response is the row-sum of ``ye``.
Features are laid out as ``[zc | ze]`` (``2d`` columns).
"""
from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateProjectionError,
    GenerationError,
    InvalidDimensionError,
    ParseError,
    ValidationError,
)
from .seeding import rng_for

STREAM_ZC, STREAM_LABEL_NOISE, STREAM_SPURIOUS_NOISE = 0, 1, 2

PRESET_ENVS = {
    "D1": [1.0, 2.0, 3.0],
    "D2": [float(e) for e in range(1, 31)],
}
SCALINGS = ("paper-text", "listing1")
DEFAULT_N = 10_000


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GammaVector:
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.atleast_1d(self.values))
        if v.ndim != 1 or v.size < 1:
            raise InvalidDimensionError("gamma must be a non-empty vector")
        if not np.all(np.isfinite(v)):
            raise ValidationError("gamma has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.size

    def padded(self) -> np.ndarray:
        """Ground-truth weights over all ``2d`` features (spurious block zero)."""
        return np.concatenate([self.values, np.zeros(self.d)])


@dataclass(frozen=True)
class EnvSpec:
    """Standard-deviation multipliers for one domain."""

    env_id: int
    sa: float
    sb: float
    sc: float

    def __post_init__(self):
        for name in ("sa", "sb", "sc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be a nonnegative finite number, got {v}")


@dataclass(frozen=True)
class DomainDataset:
    env_id: int
    X: np.ndarray
    Y: np.ndarray
    # populated only when sampled with debug=True
    label_noise: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y).reshape(-1)
        if X.ndim != 2 or X.shape[1] % 2:
            raise ValidationError("X must be a 2-D matrix with an even column count")
        if X.shape[0] < 1 or X.shape[0] != Y.size:
            raise ValidationError("X and Y must share a positive row count")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise GenerationError(f"domain {self.env_id} contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1] // 2

    @property
    def zc(self) -> np.ndarray:
        return self.X[:, : self.d]

    @property
    def ze(self) -> np.ndarray:
        return self.X[:, self.d:]


@dataclass(frozen=True)
class MultiDomainDataset:
    gamma: GammaVector
    domains: tuple

    def __post_init__(self):
        doms = tuple(self.domains)
        ids = [dom.env_id for dom in doms]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate env ids: {ids}")
        for dom in doms:
            if dom.d != self.gamma.d:
                raise InvalidDimensionError(
                    f"domain {dom.env_id} has d={dom.d}, gamma has d={self.gamma.d}")
        object.__setattr__(self, "domains", doms)

    @property
    def env_ids(self) -> list:
        return [dom.env_id for dom in self.domains]

    def stacked(self):
        X = np.vstack([dom.X for dom in self.domains])
        Y = np.concatenate([dom.Y for dom in self.domains])
        return X, Y


def make_gamma(d: int, seed: int) -> GammaVector:
    if d < 1:
        raise InvalidDimensionError(f"d must be >= 1, got {d}")
    return GammaVector(np.random.default_rng(int(seed)).standard_normal(d))


def orthogonalize(noise, zc) -> np.ndarray:
    """Remove the projection of ``noise`` onto ``zc``.

    The projection coefficient is the scalar inner product over the flattened
    matrices, not a per-column one, so only the total ``sum(R * zc)`` vanishes.
    """
    noise = np.asarray(noise, dtype=float)
    zc = np.asarray(zc, dtype=float)
    if noise.shape != zc.shape:
        raise InvalidDimensionError(f"shape mismatch {noise.shape} vs {zc.shape}")
    norm2 = np.sum(zc * zc)
    if norm2 == 0.0:
        raise DegenerateProjectionError("cannot project onto an all-zero zc")
    return noise - np.sum(zc * noise) * zc / norm2


def sample_domain(gamma: GammaVector, n: int, spec: EnvSpec, seed: int,
                  debug: bool = False) -> DomainDataset:
    if n < 1:
        raise InvalidDimensionError(f"n must be >= 1, got {n}")
    d = gamma.d
    g1 = rng_for(seed, spec.env_id, STREAM_ZC).standard_normal((n, d))
    g2 = rng_for(seed, spec.env_id, STREAM_LABEL_NOISE).standard_normal((n, d))
    g3 = rng_for(seed, spec.env_id, STREAM_SPURIOUS_NOISE).standard_normal((n, d))

    zc = spec.sa * g1
    raw = spec.sb * g2
    # zc == 0 leaves nothing to project out
    eps = orthogonalize(raw, zc) if spec.sa > 0 else raw
    ye = gamma.values * zc + eps
    ze = ye + spec.sc * g3
    Y = ye.sum(axis=1)
    X = np.hstack([zc, ze])
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise GenerationError(f"non-finite values generated for env {spec.env_id}")
    return DomainDataset(spec.env_id, X, Y, label_noise=_frozen(eps) if debug else None)


def env_specs(env_values: Sequence[float], scaling: str = "paper-text") -> list:
    """Turn per-domain shift levels ``e`` into ``EnvSpec`` objects.

    ``paper-text``: variances of zc and of the spurious noise equal ``e``,
    label-noise std fixed at 1.  ``listing1``: every std multiplier equals ``e``.
    Env ids are 1-based positions.
    """
    specs = []
    for i, e in enumerate(env_values, start=1):
        e = float(e)
        if e < 0:
            raise ValidationError(f"shift level must be >= 0, got {e}")
        if scaling == "paper-text":
            specs.append(EnvSpec(i, math.sqrt(e), 1.0, math.sqrt(e)))
        elif scaling == "listing1":
            specs.append(EnvSpec(i, e, e, e))
        else:
            raise ValidationError(f"unknown scaling {scaling!r}; expected one of {SCALINGS}")
    return specs


def preset_specs(preset: str, scaling: str = "paper-text") -> list:
    try:
        envs = PRESET_ENVS[preset]
    except KeyError:
        raise ValidationError(f"unknown preset {preset!r}; expected D1 or D2") from None
    return env_specs(envs, scaling)


def sample_dataset(gamma: GammaVector, specs: Sequence[EnvSpec], n: int, seed: int,
                   debug: bool = False) -> MultiDomainDataset:
    return MultiDomainDataset(gamma, tuple(sample_domain(gamma, n, s, seed, debug) for s in specs))


def sample_example1(a, b, c, gamma, n, seed, p=0.0, q=0.0):
    """Scalar version of the two-feature model with optional noise correlations.

    ``p = Cov(z1, eps2)`` and ``q = Cov(eps1, eps2)``; ``z1`` and ``eps1`` stay
    independent.  Returns ``(X, y)`` with ``X = [z1, z2]``.
    """
    cov = np.array([[a, 0.0, p], [0.0, b, q], [p, q, c]], dtype=float)
    if np.min(np.linalg.eigvalsh(cov)) < -1e-12:
        raise ValidationError("(a, b, c, p, q) do not form a valid covariance")
    draws = rng_for(seed, 0, 3).multivariate_normal(np.zeros(3), cov, size=n, method="eigh")
    z1, e1, e2 = draws.T
    y = gamma * z1 + e1
    return np.column_stack([z1, y + e2]), y


# -- CSV persistence ---------------------------------------------------------

_ENV_FILE = re.compile(r"^env(\d+)\.csv$")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_gamma(gamma: GammaVector, path) -> None:
    _write_rows(Path(path), ["0"], [[_fmt(v)] for v in gamma.padded()])


def write_dataset(ds: MultiDomainDataset, directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    header = [str(i) for i in range(2 * ds.gamma.d + 1)]
    for dom in ds.domains:
        path = directory / f"env{dom.env_id}.csv"
        rows = ([_fmt(v) for v in x] + [_fmt(y)] for x, y in zip(dom.X, dom.Y))
        _write_rows(path, header, rows)
        written.append(path)
    gpath = directory / "true_gamma.csv"
    write_gamma(ds.gamma, gpath)
    written.append(gpath)
    return written


def _read_matrix(path: Path, ncols: Optional[int] = None) -> np.ndarray:
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ParseError(path, 0, "file not found") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, 1, "empty file")
        width = len(header)
        if header != [str(i) for i in range(width)] or (ncols is not None and width != ncols):
            raise ParseError(path, 1, f"malformed header {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ParseError(path, lineno, f"expected {width} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    if not rows:
        raise ParseError(path, 2, "no data rows")
    return np.array(rows, dtype=float)


def read_gamma(path) -> GammaVector:
    path = Path(path)
    col = _read_matrix(path, ncols=1)[:, 0]
    if col.size % 2:
        raise ParseError(path, col.size + 1, "true_gamma.csv must have an even row count")
    return GammaVector(col[: col.size // 2])


def read_dataset(directory) -> MultiDomainDataset:
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(directory, 0, "not a directory")
    gamma = read_gamma(directory / "true_gamma.csv")
    env_files = sorted(
        ((int(m.group(1)), name) for name in os.listdir(directory)
         if (m := _ENV_FILE.match(name))),
    )
    if not env_files:
        raise ParseError(directory, 0, "no env*.csv files")
    domains = []
    for env_id, name in env_files:
        mat = _read_matrix(directory / name, ncols=2 * gamma.d + 1)
        domains.append(DomainDataset(env_id, mat[:, :-1], mat[:, -1]))
    return MultiDomainDataset(gamma, tuple(domains))
