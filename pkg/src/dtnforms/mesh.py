"""Oriented simplicial manifolds with boundary.

Meshes are read from a small ASCII format that lists only the top-dimensional
simplices; every lower face is generated here in canonical (increasing vertex)
order.  The boundary complex is extracted as a mesh of its own together with
inclusion maps back into the parent.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np
import scipy.sparse as sp

GRAM_TOL = 1e-12


class MeshFormatError(ValueError):
    """Malformed mesh file.  Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshValidationError(ValueError):
    """Mesh data that does not describe an oriented manifold with boundary."""


def _perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _encode(rows: np.ndarray, base: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    key = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(rows.shape[1]):
        key = key * base + rows[:, j]
    return key


@dataclass(eq=False)
class SimplicialMesh:
    """An oriented simplicial manifold, possibly with boundary.

    ``simplices[q]`` is an ``(N_q, q + 1)`` integer array of increasing vertex
    tuples in lexicographic order.  Cochains of every degree are expressed in
    this canonical orientation; ``top_orientation`` records, for each
    n-simplex, the sign of the manifold orientation relative to its sorted
    vertex order.
    """

    dim: int
    vertices: np.ndarray
    simplices: list[np.ndarray]
    top_orientation: np.ndarray
    name: str = ""
    _index: list[dict] = field(default_factory=list, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if not self._index:
            self._index = [
                {tuple(int(v) for v in s): i for i, s in enumerate(simp)}
                for simp in self.simplices
            ]

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    def count(self, q: int) -> int:
        return len(self.simplices[q])

    @property
    def counts(self) -> list[int]:
        return [len(s) for s in self.simplices]

    def index_of(self, simplex) -> int:
        return self._index[len(simplex) - 1][tuple(sorted(int(v) for v in simplex))]

    def euler_characteristic(self) -> int:
        return sum((-1) ** q * c for q, c in enumerate(self.counts))

    def cofaces(self) -> np.ndarray:
        """Number of n-simplices containing each (n-1)-simplex."""
        if "cofaces" not in self._cache:
            b = boundary_operator(self, self.dim)
            self._cache["cofaces"] = np.asarray(abs(b).sum(axis=1)).ravel().astype(int)
        return self._cache["cofaces"]

    def is_closed(self) -> bool:
        return self.dim == 0 or bool(np.all(self.cofaces() == 2))

    def boundary_face_mask(self) -> np.ndarray:
        return self.cofaces() == 1

    def edge_vectors(self, q: int) -> np.ndarray:
        """``(N_q, ambient, q)`` array of edge vectors ``v_i - v_0``."""
        s = self.simplices[q]
        x = self.vertices[s]
        return np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))

    def volumes(self, q: int | None = None) -> np.ndarray:
        q = self.dim if q is None else q
        if q == 0:
            return np.ones(self.count(0))
        e = self.edge_vectors(q)
        g = np.einsum("kai,kaj->kij", e, e)
        return np.sqrt(np.abs(np.linalg.det(g))) / float(np.prod(np.arange(1, q + 1)))

    def components(self) -> int:
        """Number of connected components (through shared vertices)."""
        if self.count(0) == 0:
            return 0
        g = boundary_operator(self, 1) if self.dim >= 1 else sp.csr_matrix((self.count(0), 0))
        adj = abs(g) @ abs(g).T
        ncomp, _ = sp.csgraph.connected_components(adj, directed=False)
        return int(ncomp)


@dataclass(eq=False)
class BoundaryMesh:
    """The boundary complex of a mesh with inclusion maps into the parent.

    ``inclusion[q][i]`` is the parent index of boundary q-simplex ``i``.
    ``outward_normal[i]`` is the unit outward normal (ambient coordinates) of
    boundary facet ``i``.
    """

    mesh: SimplicialMesh
    parent: SimplicialMesh
    inclusion: list[np.ndarray]
    outward_normal: np.ndarray

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def components(self) -> int:
        return self.mesh.components()


def build_mesh(vertices, top_simplices, name: str = "", line_numbers=None) -> SimplicialMesh:
    """Validate top simplices, orient them, and generate the face lattice.

    ``top_simplices`` may list vertices in any order; the listed order of the
    first simplex in each connected component seeds the orientation.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2:
        raise MeshValidationError("vertex array must be two-dimensional")
    nv = vertices.shape[0]
    top = [tuple(int(v) for v in s) for s in top_simplices]
    if not top:
        raise MeshValidationError("mesh has no simplices")
    n = len(top[0]) - 1
    lines = line_numbers or [None] * len(top)

    def where(i):
        return f" (line {lines[i]})" if lines[i] is not None else ""

    seen = {}
    for i, s in enumerate(top):
        if len(s) != n + 1:
            raise MeshValidationError(f"simplex {s}{where(i)} has {len(s)} vertices, expected {n + 1}")
        if min(s) < 0 or max(s) >= nv:
            raise MeshValidationError(f"simplex {s}{where(i)} references a vertex outside 0..{nv - 1}")
        if len(set(s)) != len(s):
            raise MeshValidationError(f"simplex {s}{where(i)} repeats a vertex")
        key = tuple(sorted(s))
        if key in seen:
            raise MeshValidationError(f"duplicate simplex {key}{where(i)} (first listed{where(seen[key])})")
        seen[key] = i
    if vertices.shape[1] < n:
        raise MeshValidationError(f"ambient dimension {vertices.shape[1]} is below manifold dimension {n}")

    used = np.zeros(nv, dtype=bool)
    used[np.array(top).ravel()] = True
    if not used.all():
        raise MeshValidationError(f"vertex {int(np.flatnonzero(~used)[0])} belongs to no simplex")

    file_sign = np.array([_perm_sign(s) for s in top], dtype=int)
    top_sorted = np.sort(np.array(top, dtype=np.int64), axis=1)
    order = np.lexsort(top_sorted.T[::-1])
    top_sorted = top_sorted[order]
    file_sign = file_sign[order]
    src_line = [lines[i] for i in order]

    simplices = [np.arange(nv, dtype=np.int64).reshape(-1, 1)]
    for q in range(1, n):
        faces = np.concatenate([top_sorted[:, list(c)] for c in itertools.combinations(range(n + 1), q + 1)])
        faces = np.unique(faces, axis=0)
        simplices.append(faces)
    if n >= 1:
        simplices.append(top_sorted)

    mesh = SimplicialMesh(dim=n, vertices=vertices, simplices=simplices,
                          top_orientation=np.ones(len(top_sorted), dtype=int), name=name)

    # degenerate elements
    if n >= 1:
        e = mesh.edge_vectors(n)
        g = np.einsum("kai,kaj->kij", e, e)
        scale = np.max(np.einsum("kai,kai->ki", e, e), axis=1) ** n
        rel = np.abs(np.linalg.det(g)) / scale
        bad = np.flatnonzero(rel < GRAM_TOL)
        if bad.size:
            s = tuple(int(v) for v in top_sorted[bad[0]])
            loc = f" (line {src_line[bad[0]]})" if src_line[bad[0]] is not None else ""
            raise MeshValidationError(f"degenerate simplex {s}{loc}: Gram determinant below {GRAM_TOL:g}")

    if n >= 1:
        cof = mesh.cofaces()
        bad = np.flatnonzero(cof > 2)
        if bad.size:
            s = tuple(int(v) for v in simplices[n - 1][bad[0]])
            raise MeshValidationError(f"non-manifold face {s} has {cof[bad[0]]} cofaces")
        mesh.top_orientation = _orient(mesh, file_sign)
    _check_orientable(mesh)
    return mesh


def _orient(mesh: SimplicialMesh, seed_sign: np.ndarray) -> np.ndarray:
    """Propagate a consistent orientation across each component by BFS."""
    n = mesh.dim
    b = boundary_operator(mesh, n).tocsr()
    bt = b.T.tocsr()
    ntop = mesh.count(n)
    orient = np.zeros(ntop, dtype=int)
    if mesh.ambient_dim == n:
        seed_sign = np.sign(np.linalg.det(mesh.edge_vectors(n))).astype(int)
    for start in range(ntop):
        if orient[start]:
            continue
        orient[start] = seed_sign[start]
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for k in range(bt.indptr[t], bt.indptr[t + 1]):
                f, s_tf = bt.indices[k], bt.data[k]
                for kk in range(b.indptr[f], b.indptr[f + 1]):
                    u, s_uf = b.indices[kk], b.data[kk]
                    if u == t:
                        continue
                    # neighbours induce opposite signs on the shared face
                    want = -orient[t] * s_tf * s_uf
                    if orient[u] == 0:
                        orient[u] = want
                        queue.append(u)
                    elif orient[u] != want:
                        face = tuple(int(v) for v in mesh.simplices[n - 1][f])
                        raise MeshValidationError(f"non-orientable: inconsistent orientation across face {face}")
    return orient


def _check_orientable(mesh: SimplicialMesh) -> None:
    n = mesh.dim
    if n == 0:
        return
    b = boundary_operator(mesh, n)
    induced = b @ mesh.top_orientation
    cof = mesh.cofaces()
    bad = np.flatnonzero((cof == 2) & (induced != 0))
    if bad.size:
        face = tuple(int(v) for v in mesh.simplices[n - 1][bad[0]])
        raise MeshValidationError(f"non-orientable: inconsistent orientation across face {face}")


def boundary_operator(mesh: SimplicialMesh, q: int) -> sp.csr_matrix:
    """Signed incidence matrix from q-chains to (q-1)-chains."""
    if not 1 <= q <= mesh.dim:
        raise ValueError(f"boundary operator degree {q} outside 1..{mesh.dim}")
    key = ("bd", q)
    if key in mesh._cache:
        return mesh._cache[key]
    s = mesh.simplices[q]
    faces = mesh.simplices[q - 1]
    base = mesh.count(0) + 1
    fkey = _encode(faces, base)
    order = np.argsort(fkey)
    fkey_sorted = fkey[order]
    rows, cols, vals = [], [], []
    for j in range(q + 1):
        sub = np.delete(s, j, axis=1)
        pos = order[np.searchsorted(fkey_sorted, _encode(sub, base))]
        rows.append(pos)
        cols.append(np.arange(len(s)))
        vals.append(np.full(len(s), (-1) ** j, dtype=np.int64))
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(len(faces), len(s)), dtype=np.int64)
    mesh._cache[key] = mat
    return mat


def extract_boundary(mesh: SimplicialMesh) -> BoundaryMesh:
    if "boundary" in mesh._cache:
        return mesh._cache["boundary"]
    n = mesh.dim
    if n < 1:
        raise MeshValidationError("a 0-dimensional mesh has no boundary")
    mask = mesh.boundary_face_mask()
    if not mask.any():
        raise MeshValidationError("empty boundary: the mesh is closed")
    facets = mesh.simplices[n - 1][mask]
    facet_parent = np.flatnonzero(mask)

    bverts = np.unique(facets.ravel())
    local = -np.ones(mesh.count(0), dtype=np.int64)
    local[bverts] = np.arange(len(bverts))

    # induced orientation: the alternating-face rule applied to the oriented coface
    b = boundary_operator(mesh, n).tocsr()
    induced = b @ mesh.top_orientation
    facet_sign = induced[facet_parent].astype(int)

    if n == 1:
        bmesh = SimplicialMesh(dim=0, vertices=mesh.vertices[bverts],
                               simplices=[np.arange(len(bverts), dtype=np.int64).reshape(-1, 1)],
                               top_orientation=facet_sign, name=f"{mesh.name}:boundary")
        inclusion = [bverts.astype(np.int64)]
    else:
        local_facets = local[facets]
        bmesh = build_mesh(mesh.vertices[bverts], local_facets, name=f"{mesh.name}:boundary")
        # build_mesh orders facets lexicographically in local indices, which is
        # the same order as the parent facets since the relabelling is monotone
        bmesh.top_orientation = facet_sign
        _check_orientable(bmesh)
        inclusion = []
        for q in range(n):
            parent_rows = bverts[bmesh.simplices[q]]
            inclusion.append(np.array([mesh.index_of(r) for r in parent_rows], dtype=np.int64))
        if not bmesh.is_closed():
            raise MeshValidationError("boundary complex is not closed")
    normals = _outward_normals(mesh, facet_parent)
    bnd = BoundaryMesh(mesh=bmesh, parent=mesh, inclusion=inclusion, outward_normal=normals)
    _check_normal_orientation(bnd, facet_parent, facet_sign)
    mesh._cache["boundary"] = bnd
    bmesh._cache["boundary_of"] = bnd
    return bnd


def _coface_of(mesh: SimplicialMesh, facet_parent: np.ndarray):
    b = boundary_operator(mesh, mesh.dim).tocsr()
    tops, opposite = [], []
    for f in facet_parent:
        t = b.indices[b.indptr[f]]
        tops.append(t)
        face = set(mesh.simplices[mesh.dim - 1][f].tolist())
        opposite.append(next(v for v in mesh.simplices[mesh.dim][t] if v not in face))
    return np.array(tops), np.array(opposite)


def _outward_normals(mesh: SimplicialMesh, facet_parent: np.ndarray) -> np.ndarray:
    n = mesh.dim
    facets = mesh.simplices[n - 1][facet_parent]
    _, opp = _coface_of(mesh, facet_parent)
    x = mesh.vertices
    normals = np.zeros((len(facets), mesh.ambient_dim))
    for i, f in enumerate(facets):
        base = x[f[0]]
        w = x[f].mean(axis=0) - x[opp[i]]
        if n > 1:
            e = (x[f[1:]] - base).T
            coef, *_ = np.linalg.lstsq(e, w, rcond=None)
            w = w - e @ coef
        normals[i] = w / np.linalg.norm(w)
    return normals


def _check_normal_orientation(bnd: BoundaryMesh, facet_parent, facet_sign) -> None:
    """Outward-normal-first convention: [normal, facet edges] is positively oriented."""
    mesh = bnd.parent
    n = mesh.dim
    tops, _ = _coface_of(mesh, facet_parent)
    et = mesh.edge_vectors(n)
    x = mesh.vertices
    for i, f in enumerate(mesh.simplices[n - 1][facet_parent]):
        cols = [bnd.outward_normal[i]] + [x[v] - x[f[0]] for v in f[1:]]
        coef, *_ = np.linalg.lstsq(et[tops[i]], np.array(cols).T, rcond=None)
        sign = int(np.sign(np.linalg.det(coef))) * int(mesh.top_orientation[tops[i]])
        if sign != facet_sign[i]:
            raise MeshValidationError(
                f"boundary facet {tuple(int(v) for v in f)}: induced orientation disagrees with outward normal")


def parse_mesh(text: str, name: str = "") -> SimplicialMesh:
    """Parse the mesh file format (see README)."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if content:
            entries.append((lineno, content.split()))
    it = iter(entries)

    def take(expect: str):
        try:
            lineno, tok = next(it)
        except StopIteration:
            raise MeshFormatError(f"unexpected end of file, expected '{expect}'") from None
        return lineno, tok

    lineno, tok = take("dim n ambient m")
    if len(tok) != 4 or tok[0] != "dim" or tok[2] != "ambient":
        raise MeshFormatError("header must read 'dim <n> ambient <m>'", lineno)
    try:
        n, m = int(tok[1]), int(tok[3])
    except ValueError:
        raise MeshFormatError("dimensions must be integers", lineno) from None
    if n < 1 or m < n:
        raise MeshFormatError(f"invalid dimensions n={n}, ambient={m}", lineno)

    lineno, tok = take("vertices V")
    if len(tok) != 2 or tok[0] != "vertices":
        raise MeshFormatError("expected 'vertices <V>'", lineno)
    try:
        nv = int(tok[1])
    except ValueError:
        raise MeshFormatError("vertex count must be an integer", lineno) from None
    verts = []
    for _ in range(nv):
        lineno, tok = take("vertex coordinates")
        if len(tok) != m:
            raise MeshFormatError(f"vertex needs {m} coordinates, got {len(tok)}", lineno)
        try:
            verts.append([float(t) for t in tok])
        except ValueError:
            raise MeshFormatError("vertex coordinates must be real numbers", lineno) from None

    lineno, tok = take("simplices T")
    if len(tok) != 2 or tok[0] != "simplices":
        raise MeshFormatError("expected 'simplices <T>'", lineno)
    try:
        nt = int(tok[1])
    except ValueError:
        raise MeshFormatError("simplex count must be an integer", lineno) from None
    simps, where = [], []
    for _ in range(nt):
        lineno, tok = take("simplex vertex indices")
        if len(tok) != n + 1:
            raise MeshFormatError(f"simplex needs {n + 1} vertex indices, got {len(tok)}", lineno)
        try:
            simps.append([int(t) for t in tok])
        except ValueError:
            raise MeshFormatError("vertex indices must be integers", lineno) from None
        where.append(lineno)
    rest = next(it, None)
    if rest is not None:
        raise MeshFormatError("trailing content after simplices", rest[0])
    if not simps:
        raise MeshFormatError("mesh has no simplices", lineno)
    return build_mesh(np.array(verts).reshape(nv, m), simps, name=name, line_numbers=where)


def load_mesh(path: str | PathLike) -> SimplicialMesh:
    path = Path(path)
    return parse_mesh(path.read_text(encoding="utf-8"), name=path.stem)


def format_mesh(mesh: SimplicialMesh, comment: str | None = None) -> str:
    """Serialize a mesh; top simplices are written in their oriented order."""
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"dim {mesh.dim} ambient {mesh.ambient_dim}")
    out.append(f"vertices {mesh.count(0)}")
    out.extend(" ".join(repr(float(c)) for c in v) for v in mesh.vertices)
    top = mesh.simplices[mesh.dim]
    out.append(f"simplices {len(top)}")
    for s, o in zip(top, mesh.top_orientation):
        s = [int(v) for v in s]
        if o < 0:
            s[0], s[1] = s[1], s[0]
        out.append(" ".join(str(v) for v in s))
    return "\n".join(out) + "\n"


def write_mesh(mesh: SimplicialMesh, path: str | PathLike, comment: str | None = None) -> None:
    Path(path).write_text(format_mesh(mesh, comment), encoding="utf-8")
