"""
Planar Delaunay generative model: atoms, their triangulation, and points drawn as
convex combinations of the vertices of one triangle.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from domain.kds.errors import DimensionError, InvalidInputError
from kds_cfg import DELAUNAY_TOL

# directions of the three vertices at infinity bounding the initial triangulation
GHOST_ANGLES = 1.0 + 2.0 * np.pi / 3.0 * np.arange(3)
GHOST_DIRS = np.column_stack([np.cos(GHOST_ANGLES), np.sin(GHOST_ANGLES)])


@dataclass
class DelaunayModel:
    atoms: np.ndarray         # 2 x m
    triangles: np.ndarray     # t x 3 vertex indices, counter-clockwise
    atom_cluster: np.ndarray  # cluster id per atom
    noise_sigma: float = 0.0


@dataclass
class GroundTruth:
    labels: np.ndarray
    true_codes: np.ndarray        # m x n
    triangle_of_point: np.ndarray


@dataclass
class ConnectivityReport:
    cluster_connected: dict = field(default_factory=dict)
    cross_cluster_path: bool = False
    n_components: int = 0

    @property
    def delaunay_connected(self):
        return all(self.cluster_connected.values())


@dataclass
class SeparationStats:
    delta: float
    R: float

    @property
    def separated(self):
        return self.delta > 2 * self.R


def orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def incircle(a, b, c, p):
    """Positive when p is strictly inside the circumcircle of the counter-clockwise triangle abc."""
    rows = np.array([a, b, c], dtype=float) - np.asarray(p, dtype=float)
    lifted = np.column_stack([rows, np.sum(rows ** 2, axis=1)])
    return float(np.linalg.det(lifted))


def _barycentric(a, b, c, p):
    area = orient(a, b, c)
    return np.array([orient(p, b, c), orient(a, p, c), orient(a, b, p)]) / area


def _normalize(points):
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] != 2:
        raise DimensionError(f"points must be a 2 x m matrix, got shape {P.shape}")
    if P.shape[1] < 3:
        raise InvalidInputError(f"triangulation needs at least 3 points, got {P.shape[1]}")
    if not np.all(np.isfinite(P)):
        raise InvalidInputError("points contain non-finite entries")
    low, high = P.min(axis=1), P.max(axis=1)
    scale = float(np.max(high - low))
    if scale == 0:
        raise InvalidInputError("all points coincide")
    return ((P - ((low + high) / 2)[:, np.newaxis]) / scale).T


class BowyerWatson:
    """
    Incremental Delaunay triangulation started from three vertices at infinity.

    Ties (four co-circular points) are decided as if each lifted point |p|^2 were
    lowered by an amount that dominates all later indices, so the lowest index wins.
    """

    def __init__(self, points, tol=DELAUNAY_TOL):
        self.P = _normalize(points)
        self.m = len(self.P)
        self.tol = tol
        self._check_degenerate()

    def _check_degenerate(self):
        dist = cdist(self.P, self.P)
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) < 1e-12:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            raise InvalidInputError(f"duplicate points {min(i, j)} and {max(i, j)}")
        far = int(np.argmax(np.sum((self.P - self.P[0]) ** 2, axis=1)))
        if max(abs(orient(self.P[0], self.P[far], q)) for q in self.P) <= self.tol:
            raise InvalidInputError("points are collinear, no triangle can be formed")

    def _is_ghost(self, v):
        return v >= self.m

    def _tie_inside(self, tri, p):
        a, b, c = (self.P[v] for v in tri)
        beta = dict(zip(tri, _barycentric(a, b, c, self.P[p])))
        for v in sorted((*tri, p)):
            if v == p:
                return True
            if beta[v] > self.tol:
                return False
            if beta[v] < -self.tol:
                return True
        return False

    def in_circumcircle(self, tri, p):
        ghosts = [self._is_ghost(v) for v in tri]
        n_ghosts = sum(ghosts)
        q = self.P[p]
        if n_ghosts == 3:
            return True
        if n_ghosts == 0:
            det = incircle(*(self.P[v] for v in tri), q)
            if det > self.tol:
                return True
            if det < -self.tol:
                return False
            return self._tie_inside(tri, p)

        # rotate so that the finite vertices come first, keeping orientation
        k = next(i for i in range(3) if not ghosts[i] and ghosts[(i - 1) % 3])
        tri = tri[k:] + tri[:k]
        if n_ghosts == 1:
            # circumcircle degenerates to the open half-plane left of a -> b
            a, b = self.P[tri[0]], self.P[tri[1]]
            side = orient(a, b, q)
            if abs(side) > self.tol:
                return side > 0
            return float(np.dot(q - a, b - a)) > 0 and float(np.dot(q - b, a - b)) > 0

        # one finite vertex: half-plane through it facing the two ghosts
        a = self.P[tri[0]]
        normal = GHOST_DIRS[tri[1] - self.m] + GHOST_DIRS[tri[2] - self.m]
        return float(np.dot(q - a, normal)) > self.tol

    def run(self):
        m = self.m
        triangles = [(m, m + 1, m + 2)]
        for p in range(m):
            bad = [tri for tri in triangles if self.in_circumcircle(tri, p)]
            directed = [(tri[i], tri[(i + 1) % 3]) for tri in bad for i in range(3)]
            counts = Counter(frozenset(edge) for edge in directed)
            boundary = [edge for edge in directed if counts[frozenset(edge)] == 1]
            bad_set = set(bad)
            triangles = [tri for tri in triangles if tri not in bad_set]
            triangles.extend((a, b, p) for a, b in boundary)

        finite = [tri for tri in triangles if max(tri) < m]
        canonical = []
        for tri in finite:
            k = tri.index(min(tri))
            canonical.append(tri[k:] + tri[:k])
        return np.array(sorted(canonical), dtype=int).reshape(-1, 3)


def delaunay_triangulate(points, tol=DELAUNAY_TOL):
    return BowyerWatson(points, tol).run()


def make_delaunay_model(atoms, atom_cluster, noise_sigma=0.0):
    """Triangulate the atoms and keep the triangles whose vertices share one cluster."""
    atoms = np.asarray(atoms, dtype=float)
    atom_cluster = np.asarray(atom_cluster, dtype=int)
    if atom_cluster.shape != (atoms.shape[1],):
        raise DimensionError(f"need one cluster id per atom, got {atom_cluster.shape} for {atoms.shape[1]} atoms")
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    triangles = delaunay_triangulate(atoms)
    same = np.all(atom_cluster[triangles] == atom_cluster[triangles[:, :1]], axis=1)
    if not np.all(same):
        logging.info(f"Dropped {int((~same).sum())} triangles spanning two clusters")
    return DelaunayModel(atoms=atoms, triangles=triangles[same], atom_cluster=atom_cluster,
                         noise_sigma=float(noise_sigma))


def check_delaunay_model(model, tol=DELAUNAY_TOL):
    """List of violated model invariants; empty when the model is valid."""
    problems = []
    P = _normalize(model.atoms)
    for tri in model.triangles:
        if len(set(model.atom_cluster[tri])) != 1:
            problems.append(f"triangle {tuple(tri)} spans several clusters")
        a, b, c = P[tri]
        for q in range(len(P)):
            if q in tri:
                continue
            det = incircle(a, b, c, P[q])
            if det > tol:
                problems.append(f"atom {q} lies inside the circumcircle of {tuple(tri)}")
            elif abs(det) <= tol:
                problems.append(f"atom {q} is co-circular with {tuple(tri)}")
    return problems


def sample_delaunay_model(model, n, seed=0, weighting="uniform"):
    """
    Draw n points: pick a triangle, draw uniform barycentric weights, add Gaussian noise.

    weighting="area" picks triangles proportionally to their area.
    """
    if n < 1:
        raise InvalidInputError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    tris = model.triangles
    if len(tris) == 0:
        raise InvalidInputError("model has no triangles to sample from")
    if weighting == "uniform":
        probs = None
    elif weighting == "area":
        areas = np.array([abs(orient(*model.atoms[:, tri].T)) for tri in tris])
        probs = areas / areas.sum()
    else:
        raise InvalidInputError(f"weighting must be 'uniform' or 'area', got {weighting!r}")

    chosen = rng.choice(len(tris), size=n, p=probs)
    weights = rng.dirichlet(np.ones(3), size=n)
    codes = np.zeros((model.atoms.shape[1], n))
    cols = np.arange(n)
    for k in range(3):
        codes[tris[chosen, k], cols] = weights[:, k]
    Y = model.atoms @ codes
    if model.noise_sigma > 0:
        Y = Y + rng.normal(scale=model.noise_sigma, size=Y.shape)
    labels = model.atom_cluster[tris[chosen, 0]]
    return Y, GroundTruth(labels=labels, true_codes=codes, triangle_of_point=chosen)


def _triangle_adjacency(triangles):
    by_edge = defaultdict(list)
    for t, tri in enumerate(triangles):
        for i in range(3):
            by_edge[frozenset((tri[i], tri[(i + 1) % 3]))].append(t)
    rows, cols = [], []
    for owners in by_edge.values():
        for s in owners:
            for t in owners:
                rows.append(s)
                cols.append(t)
    size = len(triangles)
    adj = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size)).tocsr()
    return adj + sparse.identity(size, format='csr')


def delaunay_connectivity(model, truth):
    """
    Point graph with A_ij = 1 when points i and j lie in the same or edge-adjacent triangles.

    Returns the sparse adjacency and a ConnectivityReport.
    """
    tri_of = np.asarray(truth.triangle_of_point, dtype=int)
    n_tri = len(model.triangles)
    outside = np.flatnonzero((tri_of < 0) | (tri_of >= n_tri))
    if len(outside):
        raise InvalidInputError(f"{len(outside)} points lie outside every triangle (first: {int(outside[0])})")
    n = len(tri_of)
    occupancy = sparse.csr_matrix((np.ones(n), (np.arange(n), tri_of)), shape=(n, n_tri))
    adjacency = ((occupancy @ _triangle_adjacency(model.triangles) @ occupancy.T) > 0).astype(int)

    labels = np.asarray(truth.labels)
    n_components, component = connected_components(adjacency, directed=False)
    report = ConnectivityReport(n_components=n_components)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        sub_components, _ = connected_components(adjacency[members][:, members], directed=False)
        report.cluster_connected[int(c)] = sub_components == 1
    report.cross_cluster_path = any(len(np.unique(labels[component == comp])) > 1 for comp in range(n_components))
    return adjacency, report


def separation_stats(model, Y, truth):
    """Minimum cross-cluster point distance and maximum diameter of an occupied triangle."""
    Y = np.asarray(Y, dtype=float)
    labels = np.asarray(truth.labels)
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise InvalidInputError("separation (Delta) is undefined for a single cluster")
    delta = np.inf
    for i, c1 in enumerate(clusters):
        for c2 in clusters[i + 1:]:
            delta = min(delta, float(cdist(Y[:, labels == c1].T, Y[:, labels == c2].T).min()))
    R = 0.0
    for t in np.unique(truth.triangle_of_point):
        R = max(R, float(cdist(model.atoms[:, model.triangles[t]].T, model.atoms[:, model.triangles[t]].T).max()))
    return SeparationStats(delta=delta, R=R)
