"""Kernel support vector machines trained by sequential minimal optimisation.

Everything here is deterministic: training visits working pairs chosen
by the maximal violating pair rule with ties resolved by lowest index,
so the same inputs always give the same model.  Multiclass problems are
handled one against one with majority voting.

The dual problem solved for each binary machine is

    max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K(x_i, x_j)
    s.t. 0 <= alpha_i <= C,   sum_i alpha_i y_i = 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, TrainingError
from .metrics import map_score
from .util import atomic_write_bytes, rng_from

__all__ = [
    "KernelSpec",
    "Standardizer",
    "BinarySvm",
    "SvmModel",
    "default_c_grid",
    "default_sigma_grid",
    "kernel_matrix",
    "fit_standardizer",
    "train_binary",
    "train_one_vs_one",
    "decision_values",
    "predict",
    "model_select",
    "save_model",
    "load_model",
]

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its parameter.

    kind   "linear" (dot product) or "gaussian"
           (exp(-||x - z||^2 / (2 sigma^2)))
    sigma  bandwidth, required positive for the gaussian kernel
    """

    kind: str = "linear"
    sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "gaussian"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ConfigError("gaussian kernel needs sigma > 0")


def kernel_matrix(x: np.ndarray, z: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Dense kernel matrix K[i, j] = k(x_i, z_j)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if x.shape[1] != z.shape[1]:
        raise ConfigError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    if spec.kind == "linear":
        return x @ z.T
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(z * z, axis=1)[None, :]
        - 2.0 * (x @ z.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma**2))


# ---------------------------------------------------------------------------
# Standardisation
# ---------------------------------------------------------------------------


@dataclass
class Standardizer:
    """Per feature affine map to zero mean and unit variance.

    Uses the population standard deviation; features whose deviation
    falls below STD_FLOOR divide by 1 instead so constant columns pass
    through centred but unscaled.
    """

    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.mean.size:
            raise ConfigError(
                f"standardizer fitted on {self.mean.size} features, got {x.shape[1]}"
            )
        return (x - self.mean) / self.std


def fit_standardizer(x: np.ndarray) -> Standardizer:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] < 1:
        raise TrainingError("cannot standardize an empty matrix")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return Standardizer(mean, std)


# ---------------------------------------------------------------------------
# Binary machine
# ---------------------------------------------------------------------------


@dataclass
class BinarySvm:
    """One trained two class machine.

    support_vectors  (n_sv, dim) rows with nonzero dual weight
    alpha_signed     alpha_i * y_i for each support vector
    bias             intercept; decision f(x) = sum alpha_signed K(sv, x) + bias
    """

    support_vectors: np.ndarray
    alpha_signed: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.alpha_signed.size == 0:
            return np.full(x.shape[0], self.bias)
        k = kernel_matrix(self.support_vectors, x, self.kernel)
        return self.alpha_signed @ k + self.bias


def _smo(
    k: np.ndarray, y: np.ndarray, c: float, tol: float, max_iter: int
) -> tuple[np.ndarray, float, int]:
    """Core solver on a precomputed kernel matrix.

    Maintains the dual gradient g = Q alpha - 1 (Q = yy' * K) and at
    each step updates the pair (i, j) maximising the KKT violation
    m - M, where m = max(-y g) over indices free to increase and
    M = min(-y g) over indices free to decrease.  Stops when
    m - M <= tol.  Returns (alpha, bias, iterations).
    """
    n = y.size
    atol = 1e-12 * max(c, 1.0)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0

    it = 0
    while True:
        y_grad = y * grad
        up = (pos & (alpha < c - atol)) | (~pos & (alpha > atol))
        low = (~pos & (alpha < c - atol)) | (pos & (alpha > atol))
        if not up.any() or not low.any():
            break
        viol = -y_grad
        i = int(np.flatnonzero(up)[np.argmax(viol[up])])
        j = int(np.flatnonzero(low)[np.argmin(viol[low])])
        m, mm = viol[i], viol[j]
        if m - mm <= tol:
            break
        if it >= max_iter:
            raise TrainingError(
                f"solver did not reach tolerance {tol} in {max_iter} iterations"
            )
        it += 1

        sign = y[i] * y[j]
        if sign < 0:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        eta = max(eta, 1e-12)
        # y*grad is the bias-free prediction error, so this is the classic
        # Platt step for the second variable.
        a_j = alpha[j] + y[j] * (y_grad[i] - y_grad[j]) / eta
        a_j = min(max(a_j, lo), hi)
        if a_j < atol:
            a_j = 0.0
        elif a_j > c - atol:
            a_j = c
        delta_j = a_j - alpha[j]
        if delta_j == 0.0:
            # pair is pinned at the box; no progress possible on it
            break
        delta_i = -sign * delta_j
        alpha[i] += delta_i
        alpha[j] += delta_j
        grad += y * (y[i] * delta_i * k[i] + y[j] * delta_j * k[j])

    # Bias from the free support vectors; midpoint of the violation
    # bracket when every multiplier sits at a box bound.
    y_grad = y * grad
    free = (alpha > atol) & (alpha < c - atol)
    if free.any():
        bias = float(np.mean(-y_grad[free]))
    else:
        up = (pos & (alpha < c - atol)) | (~pos & (alpha > atol))
        low = (~pos & (alpha < c - atol)) | (pos & (alpha > atol))
        hi = (-y_grad[up]).max() if up.any() else 0.0
        lo = (-y_grad[low]).min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it


def train_binary(
    x: np.ndarray,
    y: np.ndarray,
    c: float,
    kernel: KernelSpec,
    *,
    tol: float = 1e-3,
    max_iter: int = 0,
) -> BinarySvm:
    """Train one soft margin machine on labels in {-1, +1}.

    The kernel matrix is computed once and held in memory.  max_iter of
    0 picks a generous default proportional to the training size.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.size:
        raise ConfigError(f"{x.shape[0]} rows but {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("labels must be -1 or +1")
    if np.all(y > 0) or np.all(y < 0):
        raise TrainingError("training set contains a single class")
    if c <= 0:
        raise ConfigError(f"C must be positive, got {c}")
    if max_iter <= 0:
        max_iter = max(100_000, 1_000 * y.size)

    k = kernel_matrix(x, x, kernel)
    alpha, bias, _ = _smo(k, y, c, tol, max_iter)

    atol = 1e-12 * max(c, 1.0)
    sv = alpha > atol
    return BinarySvm(
        support_vectors=x[sv].copy(),
        alpha_signed=(alpha * y)[sv],
        bias=bias,
        kernel=kernel,
        c=c,
    )


# ---------------------------------------------------------------------------
# One against one multiclass
# ---------------------------------------------------------------------------


@dataclass
class SvmModel:
    """A one against one ensemble over an ordered class list.

    machines[(i, j)] with i < j separates classes[i] (+1) from
    classes[j] (-1).  The standardizer that produced the training
    features travels with the model so persisted models are self
    contained.
    """

    classes: list[str]
    machines: dict[tuple[int, int], BinarySvm]
    standardizer: Standardizer | None = None
    c: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)


def train_one_vs_one(
    x: np.ndarray,
    labels: np.ndarray,
    c: float,
    kernel: KernelSpec,
    *,
    classes: list[str] | None = None,
    standardizer: Standardizer | None = None,
    tol: float = 1e-3,
) -> SvmModel:
    """Train all class pair machines on already standardized features."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray([str(v) for v in labels])
    if classes is None:
        classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError("training set contains a single class")
    machines = {}
    for a in range(len(classes)):
        for b in range(a + 1, len(classes)):
            take_a = labels == classes[a]
            take_b = labels == classes[b]
            if not take_a.any() or not take_b.any():
                raise TrainingError(
                    f"no examples for pair ({classes[a]}, {classes[b]})"
                )
            rows = take_a | take_b
            y = np.where(take_a[rows], 1.0, -1.0)
            machines[(a, b)] = train_binary(x[rows], y, c, kernel, tol=tol)
    return SvmModel(list(classes), machines, standardizer, c, kernel)


def decision_values(model: SvmModel, x: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Raw pairwise decision values for each test row (no standardisation)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return {pair: svm.decision(x) for pair, svm in model.machines.items()}


def predict(model: SvmModel, x: np.ndarray, *, standardized: bool = False) -> np.ndarray:
    """Predicted class names for the rows of x.

    Each pairwise machine votes for the class favoured by the sign of
    its decision value (ties at exactly zero go to the lower indexed
    class).  The class with most votes wins; vote ties are broken by
    the larger sum of |decision| over the machines involving the class,
    and any remaining tie by class order.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not standardized and model.standardizer is not None:
        x = model.standardizer.apply(x)
    n = x.shape[0]
    n_classes = len(model.classes)
    votes = np.zeros((n, n_classes), dtype=np.int64)
    weight = np.zeros((n, n_classes))
    for (a, b), values in decision_values(model, x).items():
        pick_a = values >= 0
        votes[:, a] += pick_a
        votes[:, b] += ~pick_a
        weight[:, a] += np.abs(values)
        weight[:, b] += np.abs(values)
    out = []
    for row in range(n):
        best = np.flatnonzero(votes[row] == votes[row].max())
        if best.size > 1:
            top = weight[row, best].max()
            best = best[weight[row, best] == top]
        out.append(model.classes[int(best[0])])
    return np.asarray(out)


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------


def default_c_grid() -> np.ndarray:
    """Ten cost values spaced logarithmically from 1e-3 to 1e2 inclusive."""
    return 10.0 ** np.linspace(-3.0, 2.0, 10)


def default_sigma_grid() -> tuple[float, ...]:
    return (1.0, 5.0, 10.0, 20.0, 50.0, 100.0)


def _halve_stratified(
    labels: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into equal halves per class; odd counts and single
    example classes leave the extra example in the learning half."""
    learn, val = [], []
    for name in sorted(set(labels)):
        idx = np.flatnonzero(labels == name)
        idx = idx[rng.permutation(idx.size)]
        cut = (idx.size + 1) // 2
        learn.append(idx[:cut])
        val.append(idx[cut:])
    return np.sort(np.concatenate(learn)), np.sort(np.concatenate(val))


def model_select(
    x: np.ndarray,
    labels: np.ndarray,
    kernel_kind: str = "linear",
    *,
    c_grid: np.ndarray | None = None,
    sigma_grid: tuple[float, ...] | None = None,
    n_resample: int = 5,
    seed: int = 0,
) -> tuple[float, float | None, float]:
    """Pick (C, sigma) by averaged validation score over random halves.

    The training set is split n_resample times into equal stratified
    learning and validation halves (the same splits are reused for
    every candidate).  Each candidate trains one against one machines
    on the learning half and is scored by mean average precision on the
    validation half; the candidate with the best average wins.  Ties go
    to the smaller C, then the smaller sigma.  For the linear kernel the
    sigma grid is ignored.  Returns (c, sigma_or_None, best_score).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray([str(v) for v in labels])
    if c_grid is None:
        c_grid = default_c_grid()
    if sigma_grid is None:
        sigma_grid = default_sigma_grid()
    if n_resample < 1:
        raise ConfigError("n_resample must be >= 1")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError("model selection needs at least two classes")

    if kernel_kind == "linear":
        candidates = [(float(c), None) for c in c_grid]
    elif kernel_kind == "gaussian":
        candidates = [(float(c), float(s)) for c in c_grid for s in sigma_grid]
    else:
        raise ConfigError(f"unknown kernel kind {kernel_kind!r}")
    candidates.sort(key=lambda cs: (cs[0], cs[1] if cs[1] is not None else 0.0))

    halves = [
        _halve_stratified(labels, rng_from(seed, r)) for r in range(n_resample)
    ]
    # validation halves may be empty when every class has one example
    halves = [(le, va) for le, va in halves if va.size > 0]
    if not halves:
        return candidates[0][0], candidates[0][1], 0.0

    best_c, best_sigma, best_score = candidates[0][0], candidates[0][1], -1.0
    for c, sigma in candidates:
        spec = KernelSpec("linear") if sigma is None else KernelSpec("gaussian", sigma)
        total = 0.0
        for learn_idx, val_idx in halves:
            model = train_one_vs_one(
                x[learn_idx], labels[learn_idx], c, spec, classes=classes
            )
            pred = predict(model, x[val_idx], standardized=True)
            total += map_score(labels[val_idx], pred, classes=classes)
        score = total / len(halves)
        if score > best_score:
            best_c, best_sigma, best_score = c, sigma, score
    return best_c, best_sigma, best_score


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

_MODEL_MAGIC = b"HSVM"
_MODEL_VERSION = 1
_KERNEL_CODES = {"linear": 0, "gaussian": 1}
_KERNEL_NAMES = {v: k for k, v in _KERNEL_CODES.items()}


def save_model(path: str | Path, model: SvmModel) -> None:
    """Serialize a model; all floats are little endian float64.

    The write goes through a temporary file in the destination
    directory followed by an atomic rename, so a crash cannot leave a
    half written model behind.
    """
    if model.standardizer is None:
        raise ConfigError("only models carrying a standardizer can be saved")
    dim = model.standardizer.mean.size
    parts = [
        _MODEL_MAGIC,
        struct.pack(
            "<IIdd",
            _MODEL_VERSION,
            _KERNEL_CODES[model.kernel.kind],
            model.kernel.sigma,
            model.c,
        ),
        struct.pack("<IQ", len(model.classes), dim),
    ]
    for name in model.classes:
        blob = name.encode("utf-8")
        parts.append(struct.pack("<I", len(blob)) + blob)
    parts.append(np.asarray(model.standardizer.mean, "<f8").tobytes())
    parts.append(np.asarray(model.standardizer.std, "<f8").tobytes())
    parts.append(struct.pack("<I", len(model.machines)))
    for (a, b) in sorted(model.machines):
        svm = model.machines[(a, b)]
        parts.append(
            struct.pack(
                "<IIIddd",
                a,
                b,
                _KERNEL_CODES[svm.kernel.kind],
                svm.kernel.sigma,
                svm.c,
                svm.bias,
            )
        )
        parts.append(struct.pack("<Q", svm.alpha_signed.size))
        parts.append(np.asarray(svm.alpha_signed, "<f8").tobytes())
        parts.append(np.ascontiguousarray(svm.support_vectors, "<f8").tobytes())
    atomic_write_bytes(Path(path), b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.what}: truncated at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def load_model(path: str | Path) -> SvmModel:
    """Read a model written by save_model; bit exact round trip."""
    path = Path(path)
    r = _Reader(path.read_bytes(), str(path))
    if r.take(4) != _MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    version, kernel_code, sigma, c = r.unpack("<IIdd")
    if version != _MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    if kernel_code not in _KERNEL_NAMES:
        raise FormatError(f"{path}: unknown kernel code {kernel_code}")
    n_classes, dim = r.unpack("<IQ")
    classes = []
    for _ in range(n_classes):
        (n_bytes,) = r.unpack("<I")
        classes.append(r.take(n_bytes).decode("utf-8"))
    standardizer = Standardizer(r.floats(dim), r.floats(dim))
    (n_pairs,) = r.unpack("<I")
    machines = {}
    for _ in range(n_pairs):
        a, b, pair_code, pair_sigma, pair_c, bias = r.unpack("<IIIddd")
        if pair_code not in _KERNEL_NAMES:
            raise FormatError(f"{path}: unknown kernel code {pair_code}")
        (n_sv,) = r.unpack("<Q")
        alpha = r.floats(n_sv)
        sv = r.floats(n_sv * dim).reshape(n_sv, dim)
        spec = KernelSpec(_KERNEL_NAMES[pair_code], pair_sigma)
        machines[(a, b)] = BinarySvm(sv, alpha, bias, spec, pair_c)
    kernel = KernelSpec(_KERNEL_NAMES[kernel_code], sigma)
    return SvmModel(classes, machines, standardizer, c, kernel)
