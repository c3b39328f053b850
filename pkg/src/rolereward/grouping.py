"""Role grouping: k-means over character-profile embeddings.

Lloyd's algorithm with seeded k-means++ initialization, plus inertia and
silhouette diagnostics and a cluster-count sweep. Embeddings are inputs;
a deterministic hashed n-gram embedder is provided only so tests and the
toy trainer need no external embedding service.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CharacterProfile",
    "GroupModel",
    "SweepRow",
    "DEFAULT_CLUSTER_COUNT",
    "fit_kmeans",
    "assign_group",
    "inertia",
    "silhouette",
    "sweep_cluster_counts",
    "fallback_embedding",
    "load_profiles",
    "save_group_model",
    "load_group_model",
]

DEFAULT_CLUSTER_COUNT = 7
FALLBACK_EMBEDDING_DIM = 64


@dataclass(frozen=True, eq=False)
class CharacterProfile:
    character_id: str
    profile_text: str
    embedding: np.ndarray

    def __post_init__(self) -> None:
        embedding = np.asarray(self.embedding, dtype=float)
        if embedding.ndim != 1 or embedding.size < 1:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(embedding)):
            raise ValueError(
                f"embedding for {self.character_id!r} contains non-finite values"
            )
        object.__setattr__(self, "embedding", embedding)


@dataclass(frozen=True, eq=False)
class GroupModel:
    """Fitted centroids with the assignment of every training character.

    cluster_count is the number of role groups (distinct from any sampling
    group size used by the optimizer)."""

    centroids: np.ndarray
    assignments: dict[str, int]
    cluster_count: int
    seed: int
    inertia_history: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])


@dataclass(frozen=True)
class SweepRow:
    cluster_count: int
    inertia: float
    silhouette: float | None


def _stack_embeddings(profiles: Sequence[CharacterProfile]) -> np.ndarray:
    if not profiles:
        raise ValueError("profiles must be non-empty")
    dim = profiles[0].embedding.shape[0]
    for profile in profiles:
        if profile.embedding.shape[0] != dim:
            raise ValueError(
                "inconsistent embedding dimensions: "
                f"{profile.character_id!r} has {profile.embedding.shape[0]}, expected {dim}"
            )
    ids = [p.character_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate character_id in profiles")
    return np.stack([p.embedding for p in profiles])


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_plus_plus(
    points: np.ndarray, cluster_count: int, rng: np.random.Generator
) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((cluster_count, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, cluster_count):
        total = closest.sum()
        if total > 0:
            probabilities = closest / total
        else:
            probabilities = np.full(n, 1.0 / n)
        index = int(rng.choice(n, p=probabilities))
        centroids[j] = points[index]
        closest = np.minimum(closest, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def fit_kmeans(
    profiles: Sequence[CharacterProfile],
    cluster_count: int,
    seed: int = 0,
    max_iters: int = 100,
) -> GroupModel:
    """Lloyd's algorithm with k-means++ initialization, deterministic given
    (profile order, cluster_count, seed). Stops when assignments stabilize
    or after max_iters. An emptied cluster is reseeded to the point
    farthest from its assigned centroid."""
    points = _stack_embeddings(profiles)
    n = points.shape[0]
    if cluster_count < 1:
        raise ValueError("cluster_count must be >= 1")
    if n < cluster_count:
        raise ValueError(
            f"need at least cluster_count={cluster_count} profiles, got {n}"
        )

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plus_plus(points, cluster_count, rng)

    assignment: np.ndarray | None = None
    history: list[float] = []
    for _ in range(max_iters):
        distances = _squared_distances(points, centroids)
        new_assignment = distances.argmin(axis=1)

        # Reseed empty clusters (lowest index first) onto the point farthest
        # from its assigned centroid; the point is stolen outright so that
        # duplicate points cannot tie the cluster empty again. Inertia never
        # increases: the stolen point moves to a zero-distance centroid.
        for _pass in range(cluster_count):
            empty = [j for j in range(cluster_count) if not np.any(new_assignment == j)]
            if not empty:
                break
            j = empty[0]
            counts = np.bincount(new_assignment, minlength=cluster_count)
            own_distance = distances[np.arange(n), new_assignment]
            own_distance = np.where(counts[new_assignment] > 1, own_distance, -1.0)
            farthest = int(own_distance.argmax())
            centroids[j] = points[farthest]
            distances = _squared_distances(points, centroids)
            new_assignment = distances.argmin(axis=1)
            new_assignment[farthest] = j

        history.append(float(distances[np.arange(n), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(cluster_count):
            members = points[assignment == j]
            if len(members):
                centroids[j] = members.mean(axis=0)

    assert assignment is not None
    assignments = {
        profile.character_id: int(group)
        for profile, group in zip(profiles, assignment)
    }
    return GroupModel(
        centroids=centroids,
        assignments=assignments,
        cluster_count=cluster_count,
        seed=seed,
        inertia_history=tuple(history),
    )


def assign_group(model: GroupModel, embedding: np.ndarray) -> int:
    """Index of the nearest centroid (Euclidean); ties pick the lowest index."""
    embedding = np.asarray(embedding, dtype=float)
    if embedding.shape != (model.dim,):
        raise ValueError(
            f"embedding dimension {embedding.shape} does not match model ({model.dim},)"
        )
    distances = ((model.centroids - embedding) ** 2).sum(axis=1)
    return int(distances.argmin())


def _group_of(model: GroupModel, profile: CharacterProfile) -> int:
    known = model.assignments.get(profile.character_id)
    if known is not None:
        return known
    return assign_group(model, profile.embedding)


def inertia(model: GroupModel, profiles: Sequence[CharacterProfile]) -> float:
    """Sum of squared distances from each point to its assigned centroid."""
    total = 0.0
    for profile in profiles:
        if profile.embedding.shape[0] != model.dim:
            raise ValueError("embedding dimension does not match model")
        group = _group_of(model, profile)
        total += float(((profile.embedding - model.centroids[group]) ** 2).sum())
    return total


def silhouette(model: GroupModel, profiles: Sequence[CharacterProfile]) -> float:
    """Mean silhouette coefficient over all points, in [-1, 1].

    a = mean intra-cluster distance (excluding self), b = smallest mean
    distance to another cluster; singletons and zero-spread points
    contribute 0."""
    if model.cluster_count < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    points = _stack_embeddings(profiles)
    n = points.shape[0]
    if n < 2:
        raise ValueError("silhouette requires at least 2 profiles")
    labels = np.array([_group_of(model, p) for p in profiles])
    for j in range(model.cluster_count):
        if not np.any(labels == j):
            raise ValueError(f"cluster {j} is empty")

    diff = points[:, None, :] - points[None, :, :]
    pairwise = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        own_size = int(own.sum())
        if own_size == 1:
            continue
        a = pairwise[i, own].sum() / (own_size - 1)
        b = min(
            pairwise[i, labels == j].mean()
            for j in range(model.cluster_count)
            if j != labels[i]
        )
        denom = max(a, b)
        if denom > 0:
            scores[i] = (b - a) / denom
    return float(scores.mean())


def sweep_cluster_counts(
    profiles: Sequence[CharacterProfile],
    cluster_counts: Iterable[int],
    seeds: Iterable[int],
    max_iters: int = 100,
) -> list[SweepRow]:
    """For each cluster count, fit once per seed, keep the best model by
    inertia, and report its inertia and silhouette (None when undefined)."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    rows: list[SweepRow] = []
    for count in cluster_counts:
        best_model = None
        best_inertia = float("inf")
        for seed in seeds:
            model = fit_kmeans(profiles, count, seed=seed, max_iters=max_iters)
            value = inertia(model, profiles)
            if value < best_inertia:
                best_inertia = value
                best_model = model
        assert best_model is not None
        sil = (
            silhouette(best_model, profiles)
            if count >= 2 and len(profiles) >= 2
            else None
        )
        rows.append(SweepRow(count, best_inertia, sil))
    return rows


def fallback_embedding(text: str, dim: int = FALLBACK_EMBEDDING_DIM) -> np.ndarray:
    """Deterministic embedding: hashed character trigram counts, L2-normalized.

    Stable across runs and platforms (crc32 bucketing, no salted hashing);
    texts shorter than three characters hash as a single gram."""
    vector = np.zeros(dim)
    grams = [text[i : i + 3] for i in range(len(text) - 2)]
    if not grams and text:
        grams = [text]
    for gram in grams:
        vector[zlib.crc32(gram.encode("utf-8")) % dim] += 1.0
    norm = float(np.linalg.norm(vector))
    return vector / norm if norm > 0 else vector


def load_profiles(path: str | Path) -> list[CharacterProfile]:
    """Read line-delimited JSON records with character_id, profile_text and
    embedding; records without an embedding get the fallback embedding of
    their profile_text."""
    profiles: list[CharacterProfile] = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_number}: invalid JSON: {exc}") from exc
            try:
                character_id = record["character_id"]
                profile_text = record["profile_text"]
            except KeyError as exc:
                raise ValueError(f"line {line_number}: missing field {exc}") from exc
            embedding = record.get("embedding")
            if embedding is None:
                embedding = fallback_embedding(profile_text)
            profiles.append(
                CharacterProfile(character_id, profile_text, np.asarray(embedding))
            )
    return profiles


def save_group_model(model: GroupModel, path: str | Path) -> None:
    document = {
        "cluster_count": model.cluster_count,
        "seed": model.seed,
        "centroids": model.centroids.tolist(),
        "assignments": model.assignments,
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def load_group_model(path: str | Path) -> GroupModel:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return GroupModel(
            centroids=np.asarray(document["centroids"], dtype=float),
            assignments={k: int(v) for k, v in document["assignments"].items()},
            cluster_count=int(document["cluster_count"]),
            seed=int(document["seed"]),
        )
    except KeyError as exc:
        raise ValueError(f"group model file missing field {exc}") from exc
