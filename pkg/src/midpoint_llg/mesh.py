"""Structured tetrahedral meshes of axis-aligned boxes.

Each of the ``N**3`` subcubes is split into six tetrahedra sharing the
subcube's main diagonal (Kuhn/Freudenthal split). All tetrahedra of a mesh are
congruent, so the family is quasi-uniform with an ``N``-independent constant.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "build_unit_cube_mesh",
    "build_box_mesh",
    "element_volume",
    "signed_volumes",
    "mesh_stats",
    "boundary_faces",
    "write_vtk_mesh",
]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable tetrahedral mesh.

    ``vertices`` is ``(n_nodes, 3)``, ``tetrahedra`` is ``(n_tets, 4)`` with
    positive orientation, ``volumes`` holds ``|K|`` per tetrahedron.
    """

    vertices: np.ndarray
    tetrahedra: np.ndarray
    volumes: np.ndarray
    box: tuple[tuple[float, float, float], tuple[float, float, float]]
    subdivision: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.vertices, self.tetrahedra, self.volumes):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_tets(self) -> int:
        return self.tetrahedra.shape[0]

    @property
    def volume(self) -> float:
        lo, hi = np.asarray(self.box[0]), np.asarray(self.box[1])
        return float(np.prod(hi - lo))

    @property
    def h_max(self) -> float:
        return mesh_stats(self)["h_max"]

    @property
    def h_min(self) -> float:
        return mesh_stats(self)["h_min"]


def _kuhn_local_tets() -> list[tuple[int, ...]]:
    # local corner index c = bx + 2*by + 4*bz; each permutation of the axes
    # gives a monotone lattice path from corner 0 to corner 7
    tets = []
    for perm in itertools.permutations(range(3)):
        corner = 0
        path = [corner]
        for axis in perm:
            corner += 1 << axis
            path.append(corner)
        tets.append(tuple(path))
    return tets


def build_box_mesh(lower, upper, N: int) -> Mesh:
    """Kuhn-split structured mesh of the box ``[lower, upper]`` with N cells per axis."""
    if int(N) != N or N < 1:
        raise ValueError(f"subdivision N must be a positive integer, got {N!r}")
    N = int(N)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != (3,) or upper.shape != (3,) or np.any(upper <= lower):
        raise ValueError("box corners must be 3-vectors with lower < upper")

    n1 = N + 1
    # lexicographic numbering, x fastest
    ii, jj, ll = np.meshgrid(np.arange(n1), np.arange(n1), np.arange(n1), indexing="ij")
    ijk = np.stack([ii.ravel(order="F"), jj.ravel(order="F"), ll.ravel(order="F")], axis=1)
    vertices = lower + (upper - lower) * ijk / N

    def node(i, j, l):
        return i + n1 * (j + n1 * l)

    ci, cj, cl = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    ci, cj, cl = ci.ravel(order="F"), cj.ravel(order="F"), cl.ravel(order="F")
    corners = np.stack(
        [node(ci + (c & 1), cj + ((c >> 1) & 1), cl + ((c >> 2) & 1)) for c in range(8)],
        axis=1,
    )
    local = np.array(_kuhn_local_tets())
    tets = corners[:, local].reshape(-1, 4)

    vols = signed_volumes(vertices, tets)
    flip = vols < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()
    vols = np.abs(vols)

    return Mesh(
        vertices=vertices,
        tetrahedra=tets.astype(np.int64),
        volumes=vols,
        box=(tuple(lower.tolist()), tuple(upper.tolist())),
        subdivision=N,
    )


def build_unit_cube_mesh(N: int, centered: bool = True) -> Mesh:
    """Unit cube with ``(N+1)**3`` vertices and ``6 N**3`` tetrahedra.

    With ``centered=True`` the cube is ``[-1/2, 1/2]**3``.
    """
    shift = 0.5 if centered else 0.0
    return build_box_mesh((-shift,) * 3, (1.0 - shift,) * 3, N)


def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    edges = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(edges) / 6.0


def element_volume(mesh: Mesh, tet_index: int) -> float:
    if not 0 <= tet_index < mesh.n_tets:
        raise IndexError(f"tetrahedron index {tet_index} out of range [0, {mesh.n_tets})")
    p = mesh.vertices[mesh.tetrahedra[tet_index]]
    return abs(float(np.linalg.det(p[1:] - p[0]))) / 6.0


def _edge_lengths(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.tetrahedra]
    pairs = list(itertools.combinations(range(4), 2))
    return np.stack([np.linalg.norm(p[:, a] - p[:, b], axis=1) for a, b in pairs], axis=1)


def mesh_stats(mesh: Mesh) -> dict:
    """Mesh size ``h_max`` (largest diameter), shortest edge ``h_min`` and
    the quasi-uniformity estimate ``h_max / min vol(K)**(1/3)``."""
    if "stats" not in mesh._cache:
        lengths = _edge_lengths(mesh)
        h_max = float(lengths.max())
        mesh._cache["stats"] = {
            "h_max": h_max,
            "h_min": float(lengths.min()),
            "kappa_estimate": h_max / float(np.min(mesh.volumes) ** (1.0 / 3.0)),
        }
    return dict(mesh._cache["stats"])


def boundary_faces(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Return (faces, counts): every distinct triangular face and how many
    tetrahedra contain it."""
    t = mesh.tetrahedra
    faces = np.concatenate([np.delete(t, i, axis=1) for i in range(4)])
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    return uniq, counts


def write_vtk_mesh(mesh: Mesh, path, point_vectors: dict | None = None, title: str = "mesh") -> None:
    """Legacy ASCII VTK unstructured grid, tetrahedra as cell type 10."""
    path = Path(path)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines += ["4 " + " ".join(str(int(i)) for i in t) for t in mesh.tetrahedra]
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines += ["10"] * mesh.n_tets
    if point_vectors:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_vectors.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_nodes, 3):
                raise ValueError(f"point data {name!r} must have shape ({mesh.n_nodes}, 3)")
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(repr(float(c)) for c in v) for v in values]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
