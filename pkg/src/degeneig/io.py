"""Text formats: degenmesh / degenfield files, matrix dumps, CSV tables, xyz."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidMesh, MissingArtifact
from .mesh import Mesh

MESH_HEADER = "degenmesh 1"
FIELD_HEADER = "degenfield 1"


def _lines(path):
    p = Path(path)
    if not p.is_file():
        raise MissingArtifact(f"no such file: {p}")
    return p.read_text().splitlines()


def write_mesh(path, mesh):
    out = [MESH_HEADER, f"{mesh.nv} {mesh.nt}"]
    out += [f"{x:.17g} {y:.17g} {int(b)}" for (x, y), b in zip(mesh.vertices, mesh.boundary_flags)]
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(out) + "\n")


def read_mesh(path):
    lines = _lines(path)
    if not lines or lines[0].strip() != MESH_HEADER:
        raise InvalidMesh(f"{path}: missing '{MESH_HEADER}' header")
    try:
        nv, nt = map(int, lines[1].split())
        vb = np.array([l.split() for l in lines[2:2 + nv]], dtype=float).reshape(nv, 3)
        tri = np.array([l.split() for l in lines[2 + nv:2 + nv + nt]], dtype=np.int64).reshape(nt, 3)
    except (ValueError, IndexError) as exc:
        raise InvalidMesh(f"{path}: malformed mesh file") from exc
    mesh = Mesh.from_arrays(vb[:, :2], tri)
    if not np.array_equal(mesh.boundary_flags, vb[:, 2].astype(bool)):
        raise InvalidMesh(f"{path}: boundary flags disagree with the topology")
    return mesh


def write_field(path, values):
    v = np.asarray(values, dtype=float)
    Path(path).write_text(f"{FIELD_HEADER} {len(v)}\n" + "".join(f"{x:.17g}\n" for x in v))


def read_field(path, nv=None):
    lines = _lines(path)
    head = lines[0].split() if lines else []
    if len(head) != 3 or " ".join(head[:2]) != FIELD_HEADER:
        raise InvalidMesh(f"{path}: missing '{FIELD_HEADER}' header")
    n = int(head[2])
    vals = np.array([float(l) for l in lines[1:1 + n]])
    if len(vals) != n or (nv is not None and n != nv):
        raise InvalidMesh(f"{path}: expected {nv if nv is not None else n} values, found {len(vals)}")
    return vals


def write_matrix(path, A):
    """Lower triangle of a symmetric sparse matrix, one `i j value` per line."""
    L = sp.tril(A).tocoo()
    order = np.lexsort((L.col, L.row))
    rows = [f"{L.row[i]} {L.col[i]} {L.data[i]:.17g}" for i in order]
    Path(path).write_text(f"sym {A.shape[0]} {L.nnz}\n" + "".join(r + "\n" for r in rows))


def read_matrix(path):
    lines = _lines(path)
    tag, dim, nnz = lines[0].split()
    if tag != "sym":
        raise InvalidMesh(f"{path}: not a symmetric matrix dump")
    dim, nnz = int(dim), int(nnz)
    data = np.array([l.split() for l in lines[1:1 + nnz]], dtype=float).reshape(nnz, 3)
    r, c, v = data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2]
    L = sp.coo_matrix((v, (r, c)), shape=(dim, dim)).tocsr()
    return (L + sp.triu(L.T, k=1)).tocsr()


def write_eigen_csv(path, decomp, cluster_ids):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "lambda", "residual", "cluster_id"])
        for i, (lam, res, cid) in enumerate(zip(decomp.lambdas, decomp.residuals, cluster_ids)):
            w.writerow([i + 1, f"{lam:.17g}", f"{res:.6e}", int(cid)])


def read_eigen_csv(path):
    lines = _lines(path)
    rows = list(csv.DictReader(lines))
    return np.array([float(r["lambda"]) for r in rows])


def write_xyz(path, mesh, values, fmt="%.17g"):
    data = np.column_stack([mesh.vertices, np.asarray(values, dtype=float)])
    np.savetxt(path, data, fmt=fmt)
