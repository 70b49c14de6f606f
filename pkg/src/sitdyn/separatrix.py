"""Extinction/persistence separatrix: fate tests and certified clouds.

The reduced model is monotone, so the basin of attraction of the empty
state is a lower set: any state componentwise below a certified-extinct
state is itself extinction-bound.  This module classifies individual
states by simulation, locates the basin boundary along rays through the
origin, and assembles an antichain of certified-extinct states (a
"cloud") equipped with a dominance search tree for fast membership
queries.  Clouds can be saved to a stable text format and cached on
disk keyed by a parameter fingerprint.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from sitdyn import _backend
from sitdyn.dynamics import NsfdScheme, nsfd_scheme, pack_params
from sitdyn.equilibria import NoPositiveEquilibriumError, steady_states
from sitdyn.params import InvalidParameterError, ModelParams

__all__ = [
    "FateKind",
    "Fate",
    "BisectionStalledError",
    "CloudFormatError",
    "FingerprintMismatchError",
    "SeparatrixCloud",
    "fate",
    "ray_bisection",
    "build_cloud",
    "build_tree",
    "reduce_to_maxima",
    "save_cloud",
    "load_cloud",
    "get_or_build_cloud",
    "default_cache_dir",
]

CACHE_DIR_ENV = "SITDYN_CACHE_DIR"

_CLOUD_MEMO: dict[tuple[str, int, float], "SeparatrixCloud"] = {}


class FateKind(Enum):
    """Classification of a trajectory's long-run behaviour."""

    EXTINCTION = "extinction"
    SURVIVAL = "survival"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Fate:
    """Outcome of a fate classification.

    Attributes:
        kind: The verdict.
        steps: Scheme steps taken to reach it (budget size when
            indeterminate).
    """

    kind: FateKind
    steps: int


class BisectionStalledError(RuntimeError):
    """A ray bisection hit an indeterminate state it cannot step past.

    Attributes:
        point: The offending state ``(eggs, males, females)``.
        steps: Step budget that was exhausted there.
    """

    def __init__(self, point: np.ndarray, steps: int):
        self.point = np.asarray(point, dtype=float)
        self.steps = steps
        super().__init__(
            f"fate of {self.point.tolist()} undecided after {steps} steps"
        )


class CloudFormatError(ValueError):
    """A cloud file does not conform to the stored text format."""


class FingerprintMismatchError(ValueError):
    """A cloud file was built for different parameters or release level."""


# ══════════════════════════════════════════════════════════════════════
# Fate classification
# ══════════════════════════════════════════════════════════════════════


def _threshold_reference(p: ModelParams, level: float) -> np.ndarray | None:
    """Threshold steady state at a frozen level, or None if absent."""
    states = steady_states(p, level)
    if states.threshold is None:
        return None
    return states.threshold.triple


def fate(
    state,
    p: ModelParams,
    level: float = 0.0,
    scheme: NsfdScheme | None = None,
    *,
    reference: np.ndarray | None = None,
) -> Fate:
    """Classify a reduced-model state as extinction- or persistence-bound.

    Simulates from ``state`` at a frozen released-male level and compares
    each iterate with the threshold steady state: strictly below in every
    compartment certifies extinction, strictly above certifies
    persistence.  When no threshold state exists at this level the empty
    state is globally attracting and extinction is immediate.

    Args:
        state: Initial ``(eggs, males, females)``, componentwise ≥ 0.
        p: Model rates.
        level: Frozen released-male population.
        scheme: Scheme configuration; defaults to step 0.1 with the
            released-male pool held frozen.
        reference: Precomputed threshold steady state (skips its
            recomputation in tight loops).

    Returns:
        The :class:`Fate`.
    """
    s = np.asarray(state, dtype=np.float64).copy()
    if s.shape != (3,):
        raise InvalidParameterError(f"state must have 3 components, got {s.shape}")
    if scheme is None:
        scheme = nsfd_scheme(p, dynamic_release_pool=False)
    if reference is None:
        reference = _threshold_reference(p, level)
        if reference is None:
            return Fate(FateKind.EXTINCTION, 0)
    ref = np.asarray(reference, dtype=np.float64)
    if bool(np.all(s < ref)):
        return Fate(FateKind.EXTINCTION, 0)
    if bool(np.all(s > ref)):
        return Fate(FateKind.SURVIVAL, 0)
    verdict, steps = _backend.classify_fate(
        s, level, scheme.step_weight, pack_params(p), scheme.max_steps, ref
    )
    kind = {
        1: FateKind.EXTINCTION,
        2: FateKind.SURVIVAL,
        0: FateKind.INDETERMINATE,
    }[verdict]
    return Fate(kind, int(steps))


# ══════════════════════════════════════════════════════════════════════
# Ray bisection
# ══════════════════════════════════════════════════════════════════════

_MAX_BRACKET_STEPS = 400


def ray_bisection(
    direction,
    p: ModelParams,
    level: float = 0.0,
    eps: float = 1e-2,
    scheme: NsfdScheme | None = None,
    *,
    reference: np.ndarray | None = None,
) -> float:
    """Largest certified-extinct radius along a ray from the origin.

    Brackets the basin boundary along ``radius·direction/‖direction‖₁``
    by doubling/halving from the threshold state's total size, then
    shrinks the bracket through geometric midpoints until its ends are
    within a relative factor ``1 + eps``.

    Args:
        direction: Ray direction, componentwise ≥ 0, not all zero.
        p: Model rates.
        level: Frozen released-male population.
        eps: Relative bracket width at which to stop.
        scheme: Scheme configuration; defaults to step 0.1 with the
            released-male pool held frozen.
        reference: Precomputed threshold steady state.

    Returns:
        The certified-extinct radius (lower bracket end); the matched
        survival radius is at most ``(1 + eps)`` times larger.

    Raises:
        NoPositiveEquilibriumError: If no threshold state exists at this
            level (the basin has no boundary to locate).
        BisectionStalledError: If an indeterminate state blocks the
            bisection.
    """
    v = np.asarray(direction, dtype=np.float64)
    if v.shape != (3,) or np.any(v < 0.0) or not np.any(v > 0.0):
        raise InvalidParameterError(
            f"direction must be a nonnegative, nonzero 3-vector, got {v!r}"
        )
    if eps <= 0.0:
        raise InvalidParameterError(f"eps must be > 0, got {eps!r}")
    if scheme is None:
        scheme = nsfd_scheme(p, dynamic_release_pool=False)
    if reference is None:
        reference = _threshold_reference(p, level)
        if reference is None:
            raise NoPositiveEquilibriumError(
                "no threshold state at this level: every state is "
                "extinction-bound"
            )
    unit = v / float(np.sum(v))

    def fate_at(radius: float) -> FateKind:
        result = fate(
            radius * unit, p, level, scheme, reference=reference
        )
        if result.kind is FateKind.INDETERMINATE:
            raise BisectionStalledError(radius * unit, result.steps)
        return result.kind

    start = float(np.sum(np.asarray(reference)))
    lo = hi = None
    radius = start
    first = fate_at(radius)
    if first is FateKind.EXTINCTION:
        lo = radius
        for _ in range(_MAX_BRACKET_STEPS):
            radius *= 2.0
            if fate_at(radius) is FateKind.SURVIVAL:
                hi = radius
                break
            lo = radius
        else:
            raise RuntimeError(
                f"no survival radius found along {unit.tolist()} within "
                f"{_MAX_BRACKET_STEPS} doublings"
            )
    else:
        hi = radius
        for _ in range(_MAX_BRACKET_STEPS):
            radius /= 2.0
            if fate_at(radius) is FateKind.EXTINCTION:
                lo = radius
                break
            hi = radius
        else:
            raise RuntimeError(
                f"no extinct radius found along {unit.tolist()} within "
                f"{_MAX_BRACKET_STEPS} halvings"
            )

    while hi > (1.0 + eps) * lo:
        mid = math.sqrt(lo * hi)
        if fate_at(mid) is FateKind.EXTINCTION:
            lo = mid
        else:
            hi = mid
    return lo


# ══════════════════════════════════════════════════════════════════════
# Dominance search tree
# ══════════════════════════════════════════════════════════════════════


def reduce_to_maxima(points: np.ndarray) -> np.ndarray:
    """Componentwise maxima of a point set, sorted lexicographically.

    Discards every point dominated by (componentwise ≤ and not equal
    to) another point, leaving an antichain.

    Args:
        points: ``(n, 3)`` array.

    Returns:
        The ``(m, 3)`` antichain of maxima, deduplicated and sorted.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    keep = np.ones(len(pts), dtype=bool)
    for i in range(len(pts)):
        dominated = np.all(pts[i] <= pts, axis=1) & np.any(pts[i] < pts, axis=1)
        if bool(dominated.any()):
            keep[i] = False
    return pts[keep]


def build_tree(points: np.ndarray) -> tuple[np.ndarray, int]:
    """Dominance search tree over an antichain of points.

    Each node's children are partitioned by the strict-excess bit
    pattern of their coordinates relative to the node (high bit: first
    component strictly greater); in an antichain the all-zero and
    all-one patterns cannot occur, so the six mixed patterns suffice.
    Pivots minimize the sum of Euclidean distances to their subset,
    with lexicographic tie-breaking, which keeps the tree balanced.

    Args:
        points: ``(n, 3)`` antichain.

    Returns:
        Pair ``(children, root)``: an ``(n, 8)`` int32 array of child
        links indexed by bit pattern (−1 for absent) and the root index
        (−1 for an empty tree).

    Raises:
        ValueError: If the input is not an antichain.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = len(pts)
    children = np.full((n, 8), -1, dtype=np.int32)
    if n == 0:
        return children, -1

    def pick_pivot(sub: np.ndarray) -> int:
        group = pts[sub]
        dists = np.sqrt(
            ((group[:, None, :] - group[None, :, :]) ** 2).sum(axis=-1)
        ).sum(axis=1)
        cand = sub[dists == dists.min()]
        if len(cand) > 1:
            g = pts[cand]
            order = np.lexsort((g[:, 2], g[:, 1], g[:, 0]))
            return int(cand[order[0]])
        return int(cand[0])

    root = -1
    stack: list[tuple[np.ndarray, int, int]] = [
        (np.arange(n, dtype=np.int64), -1, -1)
    ]
    while stack:
        sub, parent, slot = stack.pop()
        pivot = pick_pivot(sub)
        if parent < 0:
            root = pivot
        else:
            children[parent, slot] = pivot
        rest = sub[sub != pivot]
        if len(rest) == 0:
            continue
        rel = pts[rest]
        ref = pts[pivot]
        mask = (
            ((rel[:, 0] > ref[0]).astype(np.int64) << 2)
            | ((rel[:, 1] > ref[1]).astype(np.int64) << 1)
            | (rel[:, 2] > ref[2]).astype(np.int64)
        )
        if bool(np.any(mask == 0)) or bool(np.any(mask == 7)):
            raise ValueError("points are not an antichain (comparable pair found)")
        for m in range(1, 7):
            group = rest[mask == m]
            if len(group):
                stack.append((group, pivot, m))
    return children, root


# ══════════════════════════════════════════════════════════════════════
# Cloud construction
# ══════════════════════════════════════════════════════════════════════


@dataclass(frozen=True)
class SeparatrixCloud:
    """Antichain of certified-extinct states with a dominance tree.

    Every point in the cloud is certified extinction-bound at the given
    released-male level; by monotonicity, so is everything componentwise
    below one.  Membership queries are sound (no false positives) but
    approximate from below: states outside the stored antichain's lower
    set may still be extinction-bound.

    Attributes:
        points: ``(n, 3)`` antichain of ``(eggs, males, females)``.
        children: ``(n, 8)`` search-tree child links.
        root: Search-tree root index.
        level: Released-male level the certification holds at.
        epsilon: Relative ray-bisection tolerance used when building.
        mesh_n: Simplex mesh refinement used when building.
        fingerprint: Hash binding the cloud to its parameters and level.
        skipped: Directions abandoned because their bisection stalled.
    """

    points: np.ndarray
    children: np.ndarray
    root: int
    level: float
    epsilon: float
    mesh_n: int
    fingerprint: str
    skipped: int = 0

    def contains(self, state) -> bool:
        """Whether a state is inside the certified extinction set."""
        s = np.asarray(state, dtype=np.float64)
        return bool(
            _backend.query_below(
                self.points, self.children, self.root, s[0], s[1], s[2]
            )
        )

    def contains_many(self, states) -> np.ndarray:
        """Vectorized :meth:`contains` over rows of ``states``."""
        xs = np.ascontiguousarray(states, dtype=np.float64)
        return np.asarray(
            _backend.query_many(self.points, self.children, self.root, xs)
        )


def cloud_fingerprint(p: ModelParams, level: float) -> str:
    """Hash binding a cloud to its model rates and released level."""
    parts = []
    for f in dataclasses.fields(p):
        value = getattr(p, f.name)
        parts.append(f"{f.name}={'none' if value is None else repr(float(value))}")
    parts.append(f"level={repr(float(level))}")
    return hashlib.sha256(";".join(parts).encode("ascii")).hexdigest()


def _simplex_directions(mesh_n: int) -> np.ndarray:
    """All mesh directions on the unit simplex, boundary-nudged.

    Vertices ``(i, j, k)/mesh_n`` with ``i + j + k = mesh_n``; zero
    components are nudged to 1e-6 and the direction renormalized so
    every ray enters the open positive octant.
    """
    dirs = []
    for i in range(mesh_n + 1):
        for j in range(mesh_n + 1 - i):
            k = mesh_n - i - j
            v = np.array([i, j, k], dtype=np.float64) / mesh_n
            v = np.maximum(v, 1e-6)
            dirs.append(v / v.sum())
    return np.array(dirs)


def _ray_task(
    payload: tuple[ModelParams, float, float, float, int, np.ndarray, np.ndarray],
) -> float | None:
    """Worker: one ray bisection, with stalls mapped to None."""
    p, level, eps, dt, max_steps, reference, unit = payload
    scheme = nsfd_scheme(p, dt=dt, max_steps=max_steps, dynamic_release_pool=False)
    try:
        return ray_bisection(
            unit, p, level, eps, scheme, reference=reference
        )
    except BisectionStalledError:
        return None


def build_cloud(
    p: ModelParams,
    level: float = 0.0,
    mesh_n: int = 40,
    eps: float = 1e-2,
    scheme: NsfdScheme | None = None,
    jobs: int = 1,
) -> SeparatrixCloud:
    """Certified-extinct cloud over the simplex mesh of ray directions.

    Runs one ray bisection per mesh direction, keeps the certified
    radii, reduces the resulting points to their componentwise maxima,
    and builds the dominance tree.  Directions whose bisection stalls
    are skipped with a warning.

    Args:
        p: Model rates.
        level: Frozen released-male population (must admit a threshold
            state).
        mesh_n: Simplex refinement; the mesh has
            ``(mesh_n+1)(mesh_n+2)/2`` directions.
        eps: Relative ray-bisection tolerance.
        scheme: Scheme configuration; defaults to step 0.1 with the
            released-male pool held frozen.
        jobs: Worker processes (1 = in-process).

    Returns:
        The :class:`SeparatrixCloud`.

    Raises:
        NoPositiveEquilibriumError: If no threshold state exists at this
            level.
    """
    if mesh_n < 1:
        raise InvalidParameterError(f"mesh_n must be ≥ 1, got {mesh_n!r}")
    if scheme is None:
        scheme = nsfd_scheme(p, dynamic_release_pool=False)
    reference = _threshold_reference(p, level)
    if reference is None:
        raise NoPositiveEquilibriumError(
            "no threshold state at this level: every state is extinction-bound"
        )
    units = _simplex_directions(mesh_n)
    if jobs > 1:
        payloads = [
            (p, level, eps, scheme.dt, scheme.max_steps, reference, unit)
            for unit in units
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            radii = list(pool.map(_ray_task, payloads, chunksize=16))
    else:
        radii = []
        for unit in units:
            try:
                radii.append(
                    ray_bisection(unit, p, level, eps, scheme, reference=reference)
                )
            except BisectionStalledError:
                radii.append(None)

    skipped = sum(1 for r in radii if r is None)
    if skipped:
        warnings.warn(
            f"skipped {skipped} of {len(units)} ray directions "
            "(bisection stalled)",
            RuntimeWarning,
            stacklevel=2,
        )
    kept = np.array(
        [r * u for r, u in zip(radii, units) if r is not None]
    ).reshape(-1, 3)
    points = reduce_to_maxima(kept)
    children, root = build_tree(points)
    return SeparatrixCloud(
        points=points,
        children=children,
        root=root,
        level=level,
        epsilon=eps,
        mesh_n=mesh_n,
        fingerprint=cloud_fingerprint(p, level),
        skipped=skipped,
    )


# ══════════════════════════════════════════════════════════════════════
# Persistence and caching
# ══════════════════════════════════════════════════════════════════════


def save_cloud(cloud: SeparatrixCloud, path) -> None:
    """Write a cloud to its stable text format.

    Four header lines (format version, fingerprint, bisection tolerance,
    mesh refinement) followed by one full-precision
    ``eggs males females`` row per stored point.

    Args:
        cloud: The cloud to store.
        path: Destination file path.
    """
    lines = [
        "#version 1",
        f"#fingerprint {cloud.fingerprint}",
        f"#epsilon {cloud.epsilon:.17g}",
        f"#mesh_n {cloud.mesh_n:d}",
    ]
    for row in cloud.points:
        lines.append(f"{row[0]:.17g} {row[1]:.17g} {row[2]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_cloud(path, p: ModelParams, level: float = 0.0) -> SeparatrixCloud:
    """Read a cloud back and verify it matches the requesting context.

    The dominance tree is rebuilt from the stored points; the stored
    fingerprint must match the hash of the supplied rates and level.

    Args:
        path: Source file path.
        p: Model rates the cloud must have been built for.
        level: Released-male level the cloud must have been built for.

    Returns:
        The reconstructed :class:`SeparatrixCloud`.

    Raises:
        CloudFormatError: If the file is malformed.
        FingerprintMismatchError: If the stored fingerprint differs.
    """
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise CloudFormatError(f"cannot read cloud file {path}: {exc}") from exc
    lines = text.splitlines()
    if len(lines) < 4:
        raise CloudFormatError(f"cloud file {path} is truncated")
    if lines[0] != "#version 1":
        raise CloudFormatError(
            f"unsupported cloud format line {lines[0]!r} in {path}"
        )
    headers = {}
    for key in ("fingerprint", "epsilon", "mesh_n"):
        line = lines[len(headers) + 1]
        prefix = f"#{key} "
        if not line.startswith(prefix):
            raise CloudFormatError(f"missing header {prefix!r} in {path}")
        headers[key] = line[len(prefix):].strip()
    try:
        epsilon = float(headers["epsilon"])
        mesh_n = int(headers["mesh_n"])
    except ValueError as exc:
        raise CloudFormatError(f"bad numeric header in {path}: {exc}") from exc
    rows = []
    for line in lines[4:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CloudFormatError(f"bad point row {line!r} in {path}")
        try:
            rows.append([float(x) for x in parts])
        except ValueError as exc:
            raise CloudFormatError(f"bad point row {line!r} in {path}") from exc
    expected = cloud_fingerprint(p, level)
    if headers["fingerprint"] != expected:
        raise FingerprintMismatchError(
            f"cloud file {path} was built for different parameters "
            f"(stored {headers['fingerprint'][:12]}…, expected {expected[:12]}…)"
        )
    points = np.ascontiguousarray(rows, dtype=np.float64)
    children, root = build_tree(points)
    return SeparatrixCloud(
        points=points,
        children=children,
        root=root,
        level=level,
        epsilon=epsilon,
        mesh_n=mesh_n,
        fingerprint=expected,
        skipped=0,
    )


def default_cache_dir() -> Path:
    """Directory used for cached clouds (overridable by environment)."""
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "sitdyn"


def get_or_build_cloud(
    p: ModelParams,
    level: float = 0.0,
    mesh_n: int = 40,
    eps: float = 1e-2,
    scheme: NsfdScheme | None = None,
    jobs: int = 1,
    cache_dir=None,
) -> SeparatrixCloud:
    """Load a cached cloud, building and caching it on a miss.

    Cache files are keyed by the parameter/level fingerprint together
    with the mesh refinement and tolerance; an in-process memo avoids
    re-reading within one session.  Cached clouds assume the default
    scheme configuration.

    Args:
        p: Model rates.
        level: Frozen released-male population.
        mesh_n: Simplex refinement.
        eps: Relative ray-bisection tolerance.
        scheme: Scheme configuration override (bypasses stale-cache
            concerns only if consistent across calls).
        jobs: Worker processes for a cache-miss build.
        cache_dir: Cache directory override.

    Returns:
        The :class:`SeparatrixCloud`.
    """
    fp = cloud_fingerprint(p, level)
    memo_key = (fp, mesh_n, eps)
    hit = _CLOUD_MEMO.get(memo_key)
    if hit is not None:
        return hit
    directory = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"cloud-{fp[:16]}-n{mesh_n}-eps{eps:g}.txt"
    if path.exists():
        cloud = load_cloud(path, p, level)
    else:
        cloud = build_cloud(p, level, mesh_n, eps, scheme, jobs)
        # Write-then-rename so concurrent builders of the same cloud
        # never expose a half-written cache file.
        tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
        save_cloud(cloud, tmp)
        os.replace(tmp, path)
    _CLOUD_MEMO[memo_key] = cloud
    return cloud
