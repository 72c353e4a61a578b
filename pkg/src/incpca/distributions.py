"""Data sources for the incremental PCA experiments.

All sources emit mean-zero samples with a hard norm bound B (the coordinate
distribution by construction, Gaussian sources via rejection at a clip
radius) and expose exact or oracle-computed ground truth.

Randomness contract: every trial owns a counter-based stream derived from
(master_seed, trial_id) via `trial_rng`, so sample sequences are a pure
function of those two integers regardless of execution schedule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg

__all__ = [
    "GroundTruth",
    "CoordinateDistribution",
    "GaussianSpectrum",
    "DatasetStream",
    "trial_rng",
    "random_unit_vector",
    "random_unit_vectors",
    "empirical_ground_truth",
    "save_ground_truth",
    "load_ground_truth",
]


def trial_rng(master_seed: int, trial_id: int) -> np.random.Generator:
    """Independent, reproducible per-trial generator."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_id),))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class GroundTruth:
    """Target eigenvector, top two eigenvalues, and the norm-squared bound B."""

    v_star: np.ndarray
    lambda1: float
    lambda2: float
    B: float
    degenerate_gap: bool = False
    rank_deficient: bool = False

    def __post_init__(self):
        v = np.asarray(self.v_star, dtype=float)
        object.__setattr__(self, "v_star", v)
        if abs(float(v @ v) - 1.0) > 1e-10:
            raise ValueError("v_star must be a unit vector")
        if self.lambda1 < self.lambda2:
            raise ValueError("need lambda1 >= lambda2")
        if self.B <= 0:
            raise ValueError("B must be positive")

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda2


@dataclass(frozen=True)
class CoordinateDistribution:
    """Discrete source supported on +-e_1 and +-sigma*e_i for i > 1.

    P(+-e_1) = p/2 each; the remaining mass 1-p spreads evenly over the
    2(d-1) scaled coordinate directions.  Covariance is
    diag(p, s, ..., s) with s = sigma^2 (1-p)/(d-1), and |X|^2 <= 1.
    """

    p: float
    sigma: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must be in (0, 1)")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must be in (0, 1)")
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.p <= self.lambda2:
            raise ValueError("need p > sigma^2 (1-p)/(d-1) for an eigengap")

    @property
    def lambda2(self) -> float:
        return self.sigma**2 * (1.0 - self.p) / (self.d - 1)

    @property
    def B(self) -> float:
        return 1.0

    def covariance(self) -> np.ndarray:
        diag = np.full(self.d, self.lambda2)
        diag[0] = self.p
        return np.diag(diag)

    def ground_truth(self) -> GroundTruth:
        v = np.zeros(self.d)
        v[0] = 1.0
        return GroundTruth(v_star=v, lambda1=self.p, lambda2=self.lambda2, B=1.0)

    def sample_block(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """(m, d) block of i.i.d. draws."""
        coords, signs = self._draw_support(rng, m)
        x = np.zeros((m, self.d))
        val = np.where(coords == 0, 1.0, self.sigma) * signs
        x[np.arange(m), coords] = val
        return x

    def _draw_support(self, rng: np.random.Generator, m: int):
        """Compact draw: coordinate indices (0-based) and signs."""
        u = rng.random(m)
        coords = np.empty(m, dtype=np.intp)
        head = u < self.p
        coords[head] = 0
        # spread the tail mass uniformly over coordinates 1..d-1
        tail = ~head
        frac = (u[tail] - self.p) / (1.0 - self.p)
        coords[tail] = 1 + np.minimum((frac * (self.d - 1)).astype(np.intp), self.d - 2)
        signs = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        return coords, signs

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_block(rng, 1)[0]


@dataclass(frozen=True)
class GaussianSpectrum:
    """N(0, Q diag(eigenvalues) Q') with samples rejected above a norm bound.

    Rejection at |X|^2 > clip_radius makes the bound B = clip_radius exact.
    The default radius (10 * trace) makes rejections rare; the observed
    rejection rate is reported by sample_block(..., return_rejections=True)
    rather than silently ignored.
    """

    eigenvalues: np.ndarray
    rotation: np.ndarray | None = None
    clip_radius: float = 0.0  # 0 means "use the 10 * trace default"

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", lam)
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("need at least two eigenvalues")
        if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be positive and descending")
        if lam[0] <= lam[1]:
            raise ValueError("need a strict gap lambda1 > lambda2")
        if self.rotation is not None:
            Q = np.asarray(self.rotation, dtype=float)
            object.__setattr__(self, "rotation", Q)
            if Q.shape != (lam.size, lam.size):
                raise ValueError("rotation has wrong shape")
            if np.abs(Q.T @ Q - np.eye(lam.size)).max() > 1e-10:
                raise ValueError("rotation is not orthogonal")
        if self.clip_radius == 0.0:
            object.__setattr__(self, "clip_radius", 10.0 * float(lam.sum()))
        if self.clip_radius <= 0:
            raise ValueError("clip_radius must be positive")

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def B(self) -> float:
        return float(self.clip_radius)

    def ground_truth(self) -> GroundTruth:
        if self.rotation is None:
            v = np.zeros(self.d)
            v[0] = 1.0
        else:
            v = self.rotation[:, 0].copy()
        return GroundTruth(
            v_star=v,
            lambda1=float(self.eigenvalues[0]),
            lambda2=float(self.eigenvalues[1]),
            B=self.B,
        )

    def sample_block(self, rng, m, return_rejections: bool = False):
        scale = np.sqrt(self.eigenvalues)
        x = rng.standard_normal((m, self.d)) * scale
        rejected = 0
        while True:
            bad = np.einsum("ij,ij->i", x, x) > self.clip_radius
            nbad = int(bad.sum())
            if nbad == 0:
                break
            rejected += nbad
            x[bad] = rng.standard_normal((nbad, self.d)) * scale
        if self.rotation is not None:
            x = x @ self.rotation.T
        if return_rejections:
            return x, rejected
        return x

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_block(rng, 1)[0]


@dataclass
class DatasetStream:
    """CSV-backed sample stream: one sample per row, d columns.

    An optional header row is skipped.  With center=True a preliminary pass
    computes the column means, which are then subtracted from every sample.
    """

    source: str | Path
    d: int | None = None
    center: bool = False
    _mean: np.ndarray | None = field(default=None, repr=False)

    def _parse_row(self, row, lineno: int) -> np.ndarray:
        try:
            x = np.array([float(c) for c in row], dtype=float)
        except ValueError as exc:
            raise ValueError(f"{self.source}: line {lineno}: {exc}") from None
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{self.source}: line {lineno}: non-finite value")
        if self.d is not None and x.size != self.d:
            raise ValueError(
                f"{self.source}: line {lineno}: expected {self.d} values, got {x.size}"
            )
        return x

    def _raw_rows(self):
        with open(self.source, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if lineno == 1:
                    try:
                        [float(c) for c in row]
                    except ValueError:
                        continue  # header
                yield lineno, row

    def mean(self) -> np.ndarray:
        if self._mean is None:
            total, count = None, 0
            for lineno, row in self._raw_rows():
                x = self._parse_row(row, lineno)
                if self.d is None:
                    self.d = x.size
                total = x if total is None else total + x
                count += 1
            if count == 0:
                raise ValueError(f"{self.source}: empty stream")
            self._mean = total / count
        return self._mean

    def __iter__(self):
        offset = self.mean() if self.center else None
        count = 0
        for lineno, row in self._raw_rows():
            x = self._parse_row(row, lineno)
            if self.d is None:
                self.d = x.size
            count += 1
            yield x - offset if offset is not None else x
        if count == 0:
            raise ValueError(f"{self.source}: empty stream")


def random_unit_vectors(d: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """(m, d) block of vectors uniform on the unit sphere."""
    if d < 1:
        raise ValueError("d must be >= 1")
    z = rng.standard_normal((m, d))
    norms = np.linalg.norm(z, axis=1)
    while True:
        bad = norms < 1e-200
        if not bad.any():
            break
        z[bad] = rng.standard_normal((int(bad.sum()), d))
        norms[bad] = np.linalg.norm(z[bad], axis=1)
    return z / norms[:, None]


def random_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_unit_vectors(d, 1, rng)[0]


def empirical_ground_truth(stream: DatasetStream, pass_budget: int = 2) -> GroundTruth:
    """Ground truth for file data: empirical covariance + batch eigensolve.

    One pass accumulates the (uncentered or centered) second-moment matrix
    and max |X|^2; the top-2 eigenpairs then come from linalg.top_eigs.
    """
    if pass_budget < 2:
        raise ValueError("need pass_budget >= 2 (mean pass + covariance pass)")
    second = None
    b_max = 0.0
    count = 0
    for x in stream:
        if second is None:
            second = np.zeros((x.size, x.size))
        second += np.outer(x, x)
        b_max = max(b_max, float(x @ x))
        count += 1
    cov = second / count
    rank_deficient = count < cov.shape[0] + 1
    if b_max == 0.0:
        raise ValueError("all records are zero; no principal direction")
    try:
        vals, vecs = linalg.top_eigs(cov, k=min(2, cov.shape[0]))
        lam1 = float(vals[0])
        lam2 = float(vals[1]) if vals.size > 1 else 0.0
        v1 = vecs[0]
        # flag both a vanishing top gap and a vanishing second eigenvalue
        # (rank-1 data): either way the second direction is not identified
        degenerate = (lam1 - lam2 <= 1e-12 * max(1.0, lam1)) or (
            lam2 <= 1e-12 * max(1.0, lam1)
        )
    except linalg.EigenConvergenceError:
        # near-equal top eigenvalues: fall back on the dominant pair only
        vals, vecs = linalg.top_eigs(cov, k=1, tol=1e-8)
        lam1, lam2, v1 = float(vals[0]), float(vals[0]), vecs[0]
        degenerate = True
    return GroundTruth(
        v_star=v1,
        lambda1=lam1,
        lambda2=lam2,
        B=b_max,
        degenerate_gap=degenerate,
        rank_deficient=rank_deficient,
    )


def save_ground_truth(path, gt: GroundTruth) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda1", "lambda2", "B", "degenerate_gap", "rank_deficient"])
        w.writerow(
            [
                repr(gt.lambda1),
                repr(gt.lambda2),
                repr(gt.B),
                int(gt.degenerate_gap),
                int(gt.rank_deficient),
            ]
        )
        w.writerow([repr(float(c)) for c in gt.v_star])


def load_ground_truth(path) -> GroundTruth:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[1]
    v = np.array([float(c) for c in rows[2]])
    return GroundTruth(
        v_star=v,
        lambda1=float(head[0]),
        lambda2=float(head[1]),
        B=float(head[2]),
        degenerate_gap=bool(int(head[3])),
        rank_deficient=bool(int(head[4])),
    )
