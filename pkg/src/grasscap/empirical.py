"""Subspace classification of labelled images through random features.

Pipeline: load (or synthesize) a labelled image set, split each class in
half, fit a rank-k Gaussian model per class from the training half, then for
each feature count M draw a Haar feature matrix, estimate the noise power
from test-image residuals and classify the test images of the first L
classes.  The largest L whose error stays below a threshold is compared with
the closed-form class-count prediction.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .bounds import predicted_classes
from .ensemble import FeatureMatrix, InvalidDimensionError, RngStream, draw_feature_matrix
from .estimates import ErrorEstimate
from .gauss_classifier import ClassBank

__all__ = [
    "PgmError",
    "CorpusError",
    "LabeledImageSet",
    "EstimatedClassModel",
    "FaceExperimentResult",
    "read_pgm",
    "write_pgm",
    "load_image_dir",
    "split",
    "estimate_subspace",
    "estimate_noise_power",
    "run_face_experiment",
    "synthetic_corpus",
]

PathLike = Union[str, os.PathLike]
# relative floor on the noise estimate; the residual is exactly zero when M <= k_model
NOISE_FLOOR = 1e-8


class PgmError(ValueError):
    pass


class CorpusError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledImageSet:
    """Image vectors (one per row) with contiguous integer labels 0..L-1."""

    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if vectors.ndim != 2 or labels.shape != (vectors.shape[0],):
            raise CorpusError("need a 2-D vector array and one label per row")
        if vectors.shape[0] == 0:
            raise CorpusError("image set is empty")
        present = np.unique(labels)
        if present[0] != 0 or present[-1] != len(present) - 1:
            raise CorpusError("labels must be contiguous from 0")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def class_count(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in np.bincount(self.labels, minlength=self.class_count))

    def of_class(self, label: int) -> np.ndarray:
        return self.vectors[self.labels == label]


@dataclass(frozen=True, eq=False)
class EstimatedClassModel:
    """Rank-k zero-mean (or, with ``mean``, affine) Gaussian fitted to one class.

    ``directions`` are orthonormal; ``basis`` folds in ``scales`` so that
    basis @ basis.T approximates the class second moment.
    """

    directions: np.ndarray
    scales: np.ndarray
    mean: Optional[np.ndarray] = None

    @property
    def k_model(self) -> int:
        return self.directions.shape[1]

    @property
    def basis(self) -> np.ndarray:
        return self.directions * self.scales


_WHITESPACE = b" \t\n\r\v\f"


def _pgm_fields(data: bytes, path) -> Tuple[int, int, int, int]:
    # returns width, height, maxval, offset of the raster
    if data[:2] != b"P5":
        raise PgmError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        start = pos
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        if pos == start:
            raise PgmError(f"{path}: malformed header")
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE:
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise PgmError(f"{path}: malformed header field {token!r}")
        fields.append(int(token))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PgmError(f"{path}: missing separator after maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"{path}: only maxval 255 is supported, got {maxval}")
    return width, height, maxval, pos + 1


def read_pgm(path: PathLike) -> np.ndarray:
    """Binary P5 greyscale image as a (height, width) float array scaled to [0, 1]."""
    data = Path(path).read_bytes()
    width, height, maxval, offset = _pgm_fields(data, path)
    raster = data[offset:]
    if len(raster) != width * height:
        raise PgmError(f"{path}: expected {width * height} pixel bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width) / float(maxval)


def write_pgm(path: PathLike, image: np.ndarray) -> None:
    """Write a [0, 1]-valued (height, width) array as an 8-bit P5 file."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    pixels = np.clip(np.rint(image * 255), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def load_image_dir(path: PathLike) -> LabeledImageSet:
    """Load ``path/<class>/*.pgm``; classes are labelled in lexicographic order of their directories."""
    root = Path(path)
    if not root.is_dir():
        raise CorpusError(f"{root}: not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise CorpusError(f"{root}: no class subdirectories")
    vectors, labels = [], []
    shape = None
    for label, d in enumerate(class_dirs):
        files = sorted(f for f in d.iterdir() if f.is_file() and f.suffix.lower() == ".pgm")
        if not files:
            raise CorpusError(f"{d}: empty class (no .pgm files)")
        for f in files:
            img = read_pgm(f)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise CorpusError(f"{f}: image size {img.shape} differs from {shape}")
            vectors.append(img.ravel())
            labels.append(label)
    return LabeledImageSet(np.stack(vectors), np.array(labels))


def split(images: LabeledImageSet, seed: int) -> Tuple[LabeledImageSet, LabeledImageSet]:
    """Per-class random half split; odd counts put the extra image in training."""
    counts = images.counts
    if min(counts) < 2:
        bad = counts.index(min(counts))
        raise CorpusError(f"class {bad} has {counts[bad]} image(s); need >= 2 to split")
    stream = RngStream(seed, stream_id=3)
    train_idx, test_idx = [], []
    for label in range(images.class_count):
        idx = np.flatnonzero(images.labels == label)
        perm = stream.substream(label).generator().permutation(idx)
        cut = len(idx) - len(idx) // 2
        train_idx.append(np.sort(perm[:cut]))
        test_idx.append(np.sort(perm[cut:]))
    tr, te = np.concatenate(train_idx), np.concatenate(test_idx)
    return (LabeledImageSet(images.vectors[tr], images.labels[tr]),
            LabeledImageSet(images.vectors[te], images.labels[te]))


def estimate_subspace(train: np.ndarray, k_model: int = 9, energy_scaled: bool = True,
                      center: bool = False) -> EstimatedClassModel:
    """Top-``k_model`` principal directions of the class's uncentered second moment.

    With ``center=True`` the class mean is removed first and kept on the model.
    """
    x = np.atleast_2d(np.asarray(train, dtype=float))
    count, n = x.shape
    if count < 1:
        raise ValueError("need at least one training vector")
    if not 1 <= k_model <= min(n, count):
        raise InvalidDimensionError(f"k_model={k_model} exceeds min(N={n}, samples={count})")
    mean = x.mean(axis=0) if center else None
    if mean is not None:
        x = x - mean
    u, s, _ = np.linalg.svd(x.T, full_matrices=False)
    directions = u[:, :k_model]
    scales = s[:k_model] / math.sqrt(count) if energy_scaled else np.ones(k_model)
    return EstimatedClassModel(directions, scales, mean)


def _projected(model: EstimatedClassModel, phi: FeatureMatrix) -> Tuple[np.ndarray, np.ndarray]:
    g = phi.rows @ model.basis
    mu = np.zeros(phi.m) if model.mean is None else phi.rows @ model.mean
    return g, mu


def estimate_noise_power(test: LabeledImageSet, models: Sequence[EstimatedClassModel],
                         phi: FeatureMatrix) -> float:
    """Mean over test images of ||residual||^2 / M after projecting Phi x onto its class's feature span."""
    if test.n != phi.n:
        raise InvalidDimensionError(f"images have N={test.n}, feature matrix expects N={phi.n}")
    if test.class_count > len(models):
        raise ValueError("missing class models")
    total = 0.0
    for label in range(test.class_count):
        x = test.of_class(label)
        if len(x) == 0:
            continue
        g, mu = _projected(models[label], phi)
        f = x @ phi.rows.T - mu
        q, _ = np.linalg.qr(g)
        rank = np.linalg.matrix_rank(g)
        q = q[:, :rank]
        resid = f - (f @ q) @ q.T
        total += float(np.sum(resid * resid))
    return total / (len(test.labels) * phi.m)


@dataclass(frozen=True)
class FaceExperimentResult:
    m_grid: Tuple[int, ...]
    l_grid: Tuple[int, ...]
    errors: Tuple[Tuple[ErrorEstimate, ...], ...]  # indexed [m][l]
    sigma2_hat: Tuple[float, ...]
    max_l_empirical: Tuple[int, ...]
    predicted: Tuple[int, ...]
    tau: float
    k_model: int
    seed: int

    def p_hat(self) -> np.ndarray:
        return np.array([[e.p_hat for e in row] for row in self.errors])


def run_face_experiment(images: LabeledImageSet, m_grid: Sequence[int], l_grid: Sequence[int],
                        k_model: int = 9, seed: int = 0, tau: float = 0.2, l_max: Optional[int] = None,
                        energy_scaled: bool = True, affine: bool = False) -> FaceExperimentResult:
    """Error matrix over (M, L) plus the empirical and predicted class-count curves.

    The noise power is re-estimated at every M from the test residuals, and
    the first L classes (by label) form each L-class problem.  ``l_max``
    caps the prediction and defaults to the number of classes.
    """
    m_grid, l_grid = tuple(int(m) for m in m_grid), tuple(int(l) for l in l_grid)
    if not m_grid or not l_grid:
        raise ValueError("m_grid and l_grid must be non-empty")
    if max(l_grid) > images.class_count or min(l_grid) < 1:
        raise ValueError(f"l_grid must lie in [1, {images.class_count}]")
    if max(m_grid) > images.n or min(m_grid) < 1:
        raise ValueError(f"m_grid must lie in [1, N={images.n}]")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    l_max = images.class_count if l_max is None else int(l_max)
    train, test = split(images, seed)
    models = [estimate_subspace(train.of_class(c), k_model, energy_scaled, affine) for c in range(images.class_count)]
    stream = RngStream(seed, stream_id=2)

    errors, sig, best, pred = [], [], [], []
    for i, m in enumerate(m_grid):
        phi = draw_feature_matrix(m, images.n, stream.substream(i))
        power = float(np.mean(np.sum((test.vectors @ phi.rows.T) ** 2, axis=1))) / m
        sigma2 = max(estimate_noise_power(test, models, phi), NOISE_FLOOR * power)
        projected = [_projected(mod, phi) for mod in models]
        feats = test.vectors @ phi.rows.T
        row = []
        for l in l_grid:
            mask = test.labels < l
            bank = ClassBank.stacked(np.stack([g for g, _ in projected[:l]]),
                                     np.stack([mu for _, mu in projected[:l]]), sigma2)
            chosen = bank.classify(feats[mask])
            row.append(ErrorEstimate.from_counts(np.count_nonzero(chosen != test.labels[mask]), int(mask.sum())))
        ok = [l for l, e in zip(l_grid, row) if e.p_hat < tau]
        errors.append(tuple(row))
        sig.append(sigma2)
        best.append(max(ok) if ok else 0)
        pred.append(predicted_classes(sigma2, m, k_model, l_max))
    return FaceExperimentResult(m_grid, l_grid, tuple(errors), tuple(sig), tuple(best), tuple(pred), tau,
                                k_model, seed)


def synthetic_corpus(n_classes: int = 10, n: int = 1024, k: int = 9, sigma2: float = 1e-3,
                     per_class: int = 60, seed: int = 0) -> LabeledImageSet:
    """Images x = U h + noise from random rank-k classes (U entries N(0, 1/k), noise N(0, sigma2))."""
    if not 1 <= k <= n:
        raise InvalidDimensionError(f"need 1 <= k <= n, got n={n}, k={k}")
    if n_classes < 1 or per_class < 1:
        raise ValueError("n_classes and per_class must be >= 1")
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be nonnegative")
    stream = RngStream(seed, stream_id=4)
    vectors = []
    for c in range(n_classes):
        gen = stream.substream(c).generator()
        basis = gen.standard_normal((n, k)) / math.sqrt(k)
        h = gen.standard_normal((per_class, k))
        vectors.append(h @ basis.T + math.sqrt(sigma2) * gen.standard_normal((per_class, n)))
    return LabeledImageSet(np.concatenate(vectors), np.repeat(np.arange(n_classes), per_class))
