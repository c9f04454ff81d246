"""Ten multiscale features per recording.

Monofractal features come from non-overlapping 1024-sample windows (mean
spectral slope, coefficient of variation of wavelet entropy); the eight
multifractal descriptors come from one analysis of the whole recording,
truncated to a power-of-two length.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .monofractal import EstimationError, spectrum_slope, wavelet_entropy, wavelet_spectrum
from .multifractal import DegenerateSpectrumError, SpectrumDescriptors, multifractal_analysis, q_grid
from .wavelets import dwt_forward, make_filter

__all__ = [
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureVector",
    "FeatureMatrix",
    "SignalTooShort",
    "FeatureExtractionError",
    "window_signal",
    "truncate_dyadic",
    "extract_features",
    "build_feature_matrix",
]

FEATURE_NAMES = (
    "slope",
    "entropy_cv",
    "spectral_mode",
    "left_slope",
    "right_slope",
    "left_tangent",
    "right_tangent",
    "left_tangent_point",
    "right_tangent_point",
    "broadness",
)


class SignalTooShort(ValueError):
    pass


class FeatureExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    wavelet: str = "db6"
    window_len: int = 1024
    slope_range: tuple[int, int] = (6, 9)
    whole_slope_range: tuple[int, int] = (9, 14)
    slope_source: str = "windows"  # or "whole"
    entropy_levels: tuple[int, ...] | None = None  # None: levels outside slope_range
    entropy_mode: str = "cross"
    entropy_normalized: bool = False
    q_preset: str = "two-sided"
    mf_range: tuple[int, int] = (9, 14)
    level_a: float = -0.2
    boundary: str = "periodic"
    mf_boundary: str = "interior"
    extrapolate: bool = True
    truncation: str = "prefix"  # or "center"
    moment_convention: str = "mean"

    def validate(self) -> "FeatureConfig":
        wl = self.window_len
        if wl < 4 or wl & (wl - 1):
            raise ValueError(f"window_len must be a power of two >= 4, got {wl}")
        J = wl.bit_length() - 1
        lo, hi = self.slope_range
        if not 1 <= lo < hi <= J:
            raise ValueError(f"slope_range {self.slope_range} must satisfy 1 <= lo < hi <= {J}")
        if self.slope_source not in ("windows", "whole"):
            raise ValueError(f"slope_source must be 'windows' or 'whole', got {self.slope_source!r}")
        if self.entropy_mode not in ("cross", "within"):
            raise ValueError(f"entropy_mode must be 'cross' or 'within', got {self.entropy_mode!r}")
        if self.truncation not in ("prefix", "center"):
            raise ValueError(f"truncation must be 'prefix' or 'center', got {self.truncation!r}")
        for b in (self.boundary, self.mf_boundary):
            if b not in ("periodic", "interior"):
                raise ValueError(f"boundary must be 'periodic' or 'interior', got {b!r}")
        q_grid(self.q_preset)
        make_filter(self.wavelet)
        if self.mf_range[1] - self.mf_range[0] < 2:
            raise ValueError(f"mf_range {self.mf_range} must span at least 3 levels")
        return self

    @property
    def window_entropy_levels(self) -> tuple[int, ...]:
        if self.entropy_levels is not None:
            return tuple(self.entropy_levels)
        J = self.window_len.bit_length() - 1
        lo, hi = self.slope_range
        return tuple(j for j in range(1, J + 1) if j < lo or j > hi)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        d = dict(d)
        for key in ("slope_range", "whole_slope_range", "mf_range", "entropy_levels"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d).validate()


@dataclass
class FeatureVector:
    slope: float | None = None
    entropy_cv: float | None = None
    spectral_mode: float | None = None
    left_slope: float | None = None
    right_slope: float | None = None
    left_tangent: float | None = None
    right_tangent: float | None = None
    left_tangent_point: float | None = None
    right_tangent_point: float | None = None
    broadness: float | None = None
    recording_id: str = ""
    label: int | None = None
    n_windows: int = 0
    n_failed_windows: int = 0
    notes: list = field(default_factory=list)

    @property
    def availability(self) -> dict[str, bool]:
        return {k: getattr(self, k) is not None for k in FEATURE_NAMES}

    def values(self) -> np.ndarray:
        return np.array([np.nan if getattr(self, k) is None else getattr(self, k)
                         for k in FEATURE_NAMES], dtype=float)


def window_signal(signal, window_len: int = 1024) -> list[np.ndarray]:
    """Consecutive non-overlapping windows; a trailing partial window is dropped."""
    x = np.asarray(signal, dtype=float)
    if len(x) < window_len:
        raise SignalTooShort(f"signal has {len(x)} samples; at least {window_len} are required")
    n = len(x) // window_len
    return [x[i * window_len:(i + 1) * window_len] for i in range(n)]


def truncate_dyadic(signal, mode: str = "prefix") -> np.ndarray:
    """Largest power-of-two stretch of ``signal`` (its prefix, or its centre)."""
    x = np.asarray(signal, dtype=float)
    if len(x) < 2:
        raise SignalTooShort("need at least 2 samples")
    n = 1 << (len(x).bit_length() - 1)
    start = 0 if mode == "prefix" else (len(x) - n) // 2
    return x[start:start + n]


def _window_features(windows, filt, cfg: FeatureConfig):
    slopes, entropies = [], []
    failed = 0
    levels = cfg.window_entropy_levels
    for w in windows:
        dec = dwt_forward(w, filt)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fit = spectrum_slope(wavelet_spectrum(dec, cfg.boundary), *cfg.slope_range)
            ent = wavelet_entropy(dec, levels, cfg.entropy_mode, cfg.entropy_normalized).value
        except EstimationError:
            failed += 1
            continue
        slopes.append(fit.slope)
        entropies.append(ent)
    return np.array(slopes), np.array(entropies), failed


def extract_features(signal, config: FeatureConfig | None = None, recording_id: str = "",
                     label: int | None = None) -> FeatureVector:
    cfg = (config or FeatureConfig()).validate()
    x = np.asarray(signal, dtype=float)
    if not np.all(np.isfinite(x)):
        raise FeatureExtractionError("signal contains non-finite samples")
    filt = make_filter(cfg.wavelet)
    fv = FeatureVector(recording_id=recording_id, label=label)

    windows = window_signal(x, cfg.window_len)
    slopes, entropies, failed = _window_features(windows, filt, cfg)
    fv.n_windows, fv.n_failed_windows = len(windows), failed
    if len(slopes) == 0:
        raise FeatureExtractionError(f"all {len(windows)} windows failed the slope fit")
    if len(entropies) >= 2 and entropies.mean() > 0:
        fv.entropy_cv = float(entropies.std(ddof=1) / entropies.mean())
    else:
        fv.notes.append("entropy_cv undefined (fewer than 2 windows or zero mean entropy)")

    whole = truncate_dyadic(x, cfg.truncation)
    dec = dwt_forward(whole, filt)
    if cfg.slope_source == "windows":
        fv.slope = float(slopes.mean())
    else:
        try:
            fv.slope = spectrum_slope(wavelet_spectrum(dec, cfg.boundary), *cfg.whole_slope_range).slope
        except EstimationError as exc:
            fv.notes.append(f"whole-signal slope failed: {exc}")

    try:
        if dec.J < cfg.mf_range[1]:
            raise ValueError(f"{len(whole)} samples do not reach scale {cfg.mf_range[1]}")
        _, _, desc = multifractal_analysis(
            dec, q_grid(cfg.q_preset), cfg.mf_range, level_a=cfg.level_a,
            convention=cfg.moment_convention, boundary=cfg.mf_boundary,
            extrapolate=cfg.extrapolate,
        )
    except (DegenerateSpectrumError, ValueError) as exc:
        fv.notes.append(f"multifractal analysis failed: {exc}")
        desc = SpectrumDescriptors()
    for name in SpectrumDescriptors.FIELDS:
        setattr(fv, name, getattr(desc, name))
    if desc.effectively_monofractal:
        fv.notes.append("effectively monofractal spectrum")
    if desc.extrapolated:
        fv.notes.append(f"extrapolated crossings: {','.join(desc.extrapolated)}")
    return fv


@dataclass
class FeatureMatrix:
    rows: list[FeatureVector]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    failures: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def ids(self) -> list[str]:
        return [r.recording_id for r in self.rows]

    def X(self, names=None) -> np.ndarray:
        names = tuple(names or self.feature_names)
        idx = [FEATURE_NAMES.index(n) for n in names]
        if not self.rows:
            return np.zeros((0, len(idx)))
        return np.vstack([r.values()[idx] for r in self.rows])

    def y(self) -> np.ndarray:
        return np.array([-1 if r.label is None else r.label for r in self.rows])

    def labeled(self) -> "FeatureMatrix":
        return FeatureMatrix([r for r in self.rows if r.label in (0, 1)], self.feature_names,
                             self.failures)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.feature_names) + ["label", "id"])
            for r in self.rows:
                vals = [getattr(r, k) for k in self.feature_names]
                w.writerow(["" if v is None else repr(float(v)) for v in vals]
                           + ["" if r.label is None else r.label, r.recording_id])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            missing = [c for c in ("label", "id") if c not in header]
            unknown = [c for c in header if c not in FEATURE_NAMES + ("label", "id")]
            if missing or unknown:
                raise ValueError(f"feature CSV header problem: missing {missing}, unknown {unknown}")
            names = tuple(c for c in header if c in FEATURE_NAMES)
            rows = []
            for line in reader:
                rec = dict(zip(header, line))
                fv = FeatureVector(recording_id=rec["id"],
                                   label=int(rec["label"]) if rec["label"] != "" else None)
                for n in names:
                    setattr(fv, n, float(rec[n]) if rec[n] != "" else None)
                rows.append(fv)
        return cls(rows, names)

    def manifest(self, config: FeatureConfig | None = None) -> dict:
        return {
            "n_rows": len(self.rows),
            "feature_names": list(self.feature_names),
            "config": None if config is None else config.to_dict(),
            "failures": self.failures,
        }


def _extract_one(args):
    signal, label, rid, cfg = args
    try:
        return extract_features(signal, cfg, rid, label), None
    except (SignalTooShort, FeatureExtractionError, ValueError) as exc:
        return None, {"id": rid, "error": f"{type(exc).__name__}: {exc}"}


def build_feature_matrix(recordings, config: FeatureConfig | None = None,
                         workers: int = 1) -> FeatureMatrix:
    """One row per usable recording, in input order; failures go to the manifest.

    ``recordings`` is an iterable of ``(signal, label, id)``.
    """
    cfg = (config or FeatureConfig()).validate()
    jobs = [(np.asarray(s, dtype=float), lab, str(rid), cfg) for s, lab, rid in recordings]
    if not jobs:
        raise ValueError("no recordings given")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    rows = [fv for fv, _ in results if fv is not None]
    failures = [err for _, err in results if err is not None]
    return FeatureMatrix(rows, FEATURE_NAMES, failures)


def write_manifest(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
