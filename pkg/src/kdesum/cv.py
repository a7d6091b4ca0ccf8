"""Leave-one-out cross-validation scores and bandwidth sweeps over any engine."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import PointSet, gaussian_normalizer
from .engine import EngineConfig, ReferenceModel, naive_kde, run_engine, verify_relative_error

__all__ = [
    "CvResult",
    "CONVOLUTION_RULES",
    "pilot_bandwidth",
    "lkcv_score",
    "lscv_score",
    "bandwidth_sweep",
    "log_scales",
]

# bandwidth of the convolution kernel as a multiple of h
CONVOLUTION_RULES = {"2x": 2.0, "sqrt2": math.sqrt(2.0)}
SCORE_KINDS = ("lscv", "lkcv")


@dataclass(frozen=True)
class CvResult:
    scale: float
    h: float
    score: float
    seconds: float
    engine: str
    max_rel_err: float = math.nan


def pilot_bandwidth(refs) -> float:
    """Silverman-style rule: mean per-dimension std times N^(-1/(D+4))."""
    refs = refs if isinstance(refs, PointSet) else PointSet(refs)
    if refs.n < 2:
        raise ValueError("pilot bandwidth needs at least 2 points")
    sigma = float(refs.data.std(axis=0, ddof=1).mean())
    if not sigma > 0:
        raise ValueError("pilot bandwidth undefined: all points coincide")
    return sigma * refs.n ** (-1.0 / (refs.d + 4))


def log_scales(count: int = 7, lo: float = 1e-3, hi: float = 1e3) -> list[float]:
    return [float(s) for s in np.logspace(math.log10(lo), math.log10(hi), count)]


class _Runner:
    """Q = R engine calls sharing one reference tree; optionally checks against brute force."""

    def __init__(self, refs, engine: str, config: EngineConfig, verify: bool):
        self.points = refs if isinstance(refs, PointSet) else PointSet(refs)
        if self.points.n < 2:
            raise ValueError("cross-validation needs at least 2 reference points")
        self.engine = engine
        self.config = config
        self.verify = verify
        self.model = ReferenceModel(self.points, config.leaf_threshold) if engine in ("dfd", "dfgt") else None
        self.max_err = 0.0

    def sums(self, h: float) -> np.ndarray:
        src = self.model if self.model is not None else self.points
        out = run_engine(self.engine, src, src, h, self.config)
        if self.verify:
            exact = naive_kde(self.points, self.points, h)
            self.max_err = max(self.max_err, verify_relative_error(out, exact)[0])
        return out


def _leave_one_out(sums: np.ndarray, clamp: bool) -> np.ndarray:
    loo = sums - 1.0
    if clamp and np.any(loo <= 0):
        bad = int(np.count_nonzero(loo <= 0))
        warnings.warn(
            f"{bad} leave-one-out sums are <= 0; clamped to the smallest positive double",
            RuntimeWarning,
            stacklevel=3,
        )
        loo = np.where(loo > 0, loo, np.finfo(np.float64).tiny * np.finfo(np.float64).eps)
    return loo


def _lkcv(run: _Runner, h: float) -> float:
    n, d = run.points.n, run.points.d
    loo = _leave_one_out(run.sums(h), clamp=True)
    return float(np.mean(np.log(loo)) - math.log((n - 1) * gaussian_normalizer(d, h)))


def _lscv(run: _Runner, h: float, convolution: str) -> float:
    n, d = run.points.n, run.points.d
    hc = CONVOLUTION_RULES[convolution] * h
    p = _leave_one_out(run.sums(h), clamp=False) / ((n - 1) * gaussian_normalizer(d, h))
    pc = _leave_one_out(run.sums(hc), clamp=False) / ((n - 1) * gaussian_normalizer(d, hc))
    return float(np.mean(pc - 2.0 * p))


def _check(kind: str, convolution: str) -> None:
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}")
    if convolution not in CONVOLUTION_RULES:
        raise ValueError(f"unknown convolution bandwidth rule {convolution!r}")


def lkcv_score(refs, h: float, engine: str = "dfgt", epsilon: float = 0.01,
               config: EngineConfig | None = None) -> float:
    """Mean log leave-one-out density (likelihood CV; larger is better)."""
    config = config or EngineConfig(epsilon=epsilon, algorithm=engine)
    return _lkcv(_Runner(refs, engine, config, False), h)


def lscv_score(refs, h: float, engine: str = "dfgt", epsilon: float = 0.01,
               config: EngineConfig | None = None, convolution: str = "2x") -> float:
    """Least-squares CV score (smaller is better), with the convolution-kernel pass at
    ``2h`` or, with ``convolution="sqrt2"``, the analytic ``sqrt(2) h``."""
    _check("lscv", convolution)
    config = config or EngineConfig(epsilon=epsilon, algorithm=engine)
    return _lscv(_Runner(refs, engine, config, False), h, convolution)


def bandwidth_sweep(refs, scales, base_h: float | None = None, kind: str = "lscv", engine: str = "dfgt",
                    epsilon: float = 0.01, config: EngineConfig | None = None, convolution: str = "2x",
                    verify: bool = False) -> list[CvResult]:
    """Score at each ``scale * base_h``. ``base_h`` defaults to :func:`pilot_bandwidth`.

    With ``verify`` every engine pass is also run by brute force and the worst
    relative error of the row is recorded.
    """
    _check(kind, convolution)
    scales = [float(s) for s in scales]
    if not scales or any(b <= a for a, b in zip(scales, scales[1:])) or scales[0] <= 0:
        raise ValueError("scales must be positive and strictly increasing")
    if base_h is None:
        base_h = pilot_bandwidth(refs)
    if not base_h > 0:
        raise ValueError("base_h must be positive")
    config = config or EngineConfig(epsilon=epsilon, algorithm=engine)
    run = _Runner(refs, engine, config, verify)
    rows = []
    for s in scales:
        h = s * base_h
        run.max_err = 0.0
        t0 = time.perf_counter()
        score = _lkcv(run, h) if kind == "lkcv" else _lscv(run, h, convolution)
        rows.append(CvResult(s, h, score, time.perf_counter() - t0, engine, run.max_err if verify else math.nan))
    return rows
