"""Fixed-length feature vectors from per-domain orbit count matrices.

Stages: drop orbit columns that are zero across the corpus, correlate the
surviving columns within each domain (rank correlation by default), flatten
the strictly-upper triangle, stack all domains, and reduce with PCA keeping
the smallest number of leading components reaching the retained-variance
target (default 90%).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import DynpsnError


class FeatureError(DynpsnError):
    pass


@dataclass
class ColumnFilter:
    kept_indices: list[int]
    source: str = ""

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        return matrix[:, self.kept_indices]


def fit_column_filter(matrices, source: str = "") -> ColumnFilter:
    """Keep columns that are non-zero in at least one matrix of the corpus."""
    mask = None
    count = 0
    for m in matrices:
        hit = (m != 0).any(axis=0)
        mask = hit if mask is None else (mask | hit)
        count += 1
    if mask is None or count == 0:
        raise FeatureError("empty corpus")
    if not mask.any():
        raise FeatureError("all orbit columns are zero across the corpus")
    return ColumnFilter(kept_indices=[int(i) for i in np.nonzero(mask)[0]], source=source)


def _average_ranks(col: np.ndarray) -> np.ndarray:
    """Fractional ranks with ties averaged, 1-based."""
    order = np.argsort(col, kind="stable")
    ranks = np.empty(len(col), dtype=np.float64)
    i = 0
    while i < len(col):
        j = i
        while j + 1 < len(col) and col[order[j + 1]] == col[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def compute_gcm(matrix: np.ndarray, method: str = "spearman") -> np.ndarray:
    """Pairwise column correlations; symmetric, unit diagonal, entries in
    [-1, 1]. Constant columns correlate at 0 off-diagonal."""
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise FeatureError("need at least 2 rows to correlate columns")
    if method == "spearman":
        data = np.column_stack([_average_ranks(matrix[:, j]) for j in range(matrix.shape[1])])
    elif method == "pearson":
        data = matrix.astype(np.float64)
    else:
        raise FeatureError(f"unknown correlation method {method!r}")
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    safe = np.where(norms > 0, norms, 1.0)
    unit = centered / safe
    gcm = unit.T @ unit
    constant = norms == 0
    gcm[constant, :] = 0.0
    gcm[:, constant] = 0.0
    np.clip(gcm, -1.0, 1.0, out=gcm)
    gcm = np.triu(gcm, 1)
    gcm = gcm + gcm.T
    np.fill_diagonal(gcm, 1.0)
    return gcm


def flatten_upper(gcm: np.ndarray) -> np.ndarray:
    """Row-major strictly-upper triangle; length c*(c-1)/2."""
    c = gcm.shape[0]
    iu = np.triu_indices(c, k=1)
    return gcm[iu]


@dataclass
class PCAModel:
    mean: np.ndarray                 # (D,)
    components: np.ndarray           # (d, D), orthonormal rows
    explained_variance_ratio: np.ndarray  # (d,)
    d: int
    input_dim: int

    def transform(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.input_dim:
            raise FeatureError(f"dimension mismatch: {X.shape[1]} != {self.input_dim}")
        return (X - self.mean) @ self.components.T


def fit_pca(X: np.ndarray, retain: float = 0.90) -> PCAModel:
    """Centered SVD; d = fewest leading components reaching the retained
    variance. Eigenvalues below 1e-12 of the trace count as zero."""
    if X.ndim != 2 or X.shape[0] < 2:
        raise FeatureError("need at least 2 stacked vectors for PCA")
    if not (0.0 < retain <= 1.0):
        raise FeatureError(f"retain must be in (0, 1], got {retain}")
    mean = X.mean(axis=0)
    centered = X - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eig = svals * svals
    total = eig.sum()
    if total <= 0.0:
        raise FeatureError("zero total variance")
    eig = np.where(eig < 1e-12 * total, 0.0, eig)
    nonzero = int((eig > 0).sum())
    ratios = eig / eig.sum()
    cum = np.cumsum(ratios)
    d = int(np.searchsorted(cum, retain - 1e-12) + 1)
    d = min(d, nonzero)
    components = vt[:d].copy()
    # deterministic sign: largest-magnitude entry of each component positive
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PCAModel(mean=mean, components=components,
                    explained_variance_ratio=ratios[:d].copy(),
                    d=d, input_dim=X.shape[1])


@dataclass
class PipelineArtifacts:
    column_filter: ColumnFilter
    pca: PCAModel
    method: str
    ids: list[str]


def build_gcm_vectors(gdvms: dict[str, np.ndarray], column_filter: ColumnFilter,
                      method: str = "spearman") -> tuple[list[str], np.ndarray]:
    """Filtered-GCM upper-triangle vector per domain, rows sorted by id."""
    ids = sorted(gdvms)
    rows = []
    for did in ids:
        filtered = column_filter.apply(gdvms[did])
        rows.append(flatten_upper(compute_gcm(filtered, method=method)))
    return ids, np.array(rows, dtype=np.float64)


def apply_pipeline(gdvms: dict[str, np.ndarray], method: str = "spearman",
                   retain: float = 0.90, source: str = "") -> tuple[np.ndarray, PipelineArtifacts]:
    """Full transform: filter -> correlate -> flatten -> stack -> PCA.

    Returns the (i x d) feature matrix with rows sorted by domain id plus
    the fitted artifacts. Pure function of its inputs.
    """
    column_filter = fit_column_filter((m for m in gdvms.values()), source=source)
    ids, vectors = build_gcm_vectors(gdvms, column_filter, method=method)
    pca = fit_pca(vectors, retain=retain)
    features = pca.transform(vectors)
    return features, PipelineArtifacts(column_filter=column_filter, pca=pca,
                                       method=method, ids=ids)


# ---------------------------------------------------------------------------
# file formats (17 significant digits for floats)

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_feature_matrix(ids: list[str], X: np.ndarray, path: str | Path) -> None:
    rows, cols = X.shape
    lines = [f"FEAT v1 {rows} {cols}"]
    for did, row in zip(ids, X):
        lines.append(did + " " + " ".join(_fmt(x) for x in row))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_feature_matrix(path: str | Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("FEAT v1 "):
        raise FeatureError(f"{path}: missing FEAT v1 header")
    _, _, rows, cols = lines[0].split()
    rows, cols = int(rows), int(cols)
    ids = []
    X = np.zeros((rows, cols), dtype=np.float64)
    if len(lines) != rows + 1:
        raise FeatureError(f"{path}: expected {rows} rows")
    for i, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != cols + 1:
            raise FeatureError(f"{path}: row {i} has {len(parts) - 1} values")
        ids.append(parts[0])
        X[i] = [float(x) for x in parts[1:]]
    return ids, X


def write_column_filter(cf: ColumnFilter, path: str | Path) -> None:
    lines = [f"COLS v1 {len(cf.kept_indices)}"]
    lines.extend(str(i) for i in cf.kept_indices)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_column_filter(path: str | Path) -> ColumnFilter:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("COLS v1 "):
        raise FeatureError(f"{path}: missing COLS v1 header")
    count = int(lines[0].split()[2])
    idx = [int(x) for x in lines[1:] if x.strip()]
    if len(idx) != count:
        raise FeatureError(f"{path}: expected {count} indices")
    return ColumnFilter(kept_indices=idx)


def write_pca_model(model: PCAModel, path: str | Path) -> None:
    lines = [f"PCA v1 {model.d} {model.input_dim}"]
    lines.append("MEAN " + " ".join(_fmt(x) for x in model.mean))
    lines.append("RATIOS " + " ".join(_fmt(x) for x in model.explained_variance_ratio))
    for row in model.components:
        lines.append("C " + " ".join(_fmt(x) for x in row))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_pca_model(path: str | Path) -> PCAModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("PCA v1 "):
        raise FeatureError(f"{path}: missing PCA v1 header")
    _, _, d, input_dim = lines[0].split()
    d, input_dim = int(d), int(input_dim)
    mean = np.array([float(x) for x in lines[1].split()[1:]])
    ratios = np.array([float(x) for x in lines[2].split()[1:]])
    comps = np.array([[float(x) for x in ln.split()[1:]] for ln in lines[3:3 + d]])
    return PCAModel(mean=mean, components=comps, explained_variance_ratio=ratios,
                    d=d, input_dim=input_dim)
