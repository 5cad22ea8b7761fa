"""Conic Benchmark Format export and solution import.

Scalar variables keep their internal order (nonnegative part, then the
second-order cones). Each PSD block becomes one ``PSDVAR``; an svec entry
``a`` on slot ``(i, j)`` becomes the symmetric CBF coefficient ``a`` on the
diagonal and ``a / sqrt(2)`` off it. Equalities ``Ax = b`` are written as
``Ax - b in L=``. The objective offset goes into ``OBJBCOORD``.

Solution files are JSON (optionally gzip-compressed)::

    {"status": "optimal", "x": [...], "y": [...], "s": [...]}

with ``x`` and ``s`` in file order (scalar variables, then every PSD block in
svec order) and ``y`` the multipliers of ``Ax = b``.
"""

from __future__ import annotations

import gzip
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .conesolve import Solution, Status
from .relax import SQRT2, ConeLP, ConeSpec, svec_index

__all__ = [
    "CbfError",
    "ExportManifest",
    "SolutionFileError",
    "read_cbf",
    "read_solution",
    "save_cbf",
    "write_cbf",
    "write_solution",
]

CBF_VERSION = 2
MANIFEST_VERSION = 1


class CbfError(ValueError):
    pass


class SolutionFileError(ValueError):
    pass


@dataclass
class ExportManifest:
    """Cross-reference between internal columns and file coordinates.

    ``scalar_cols[k]`` is the internal column of CBF scalar variable ``k``;
    PSD block ``p`` occupies internal columns ``psd_offsets[p]`` onwards in
    svec order.
    """

    format_version: int
    n_scalar: int
    nonneg: int
    soc: list[int]
    psd: list[int]
    psd_offsets: list[int]
    scalar_cols: list[int]
    n_rows: int
    offset: float
    index_map: dict[str, list[int]] = field(default_factory=dict)
    scaling: str = "unscaled physical data"
    manifest_version: int = MANIFEST_VERSION

    @property
    def n_vars(self) -> int:
        return self.n_scalar + sum(r * (r + 1) // 2 for r in self.psd)

    def file_order(self) -> np.ndarray:
        """Internal column of every file-order entry."""
        parts = [np.asarray(self.scalar_cols, dtype=np.int64)]
        for off, r in zip(self.psd_offsets, self.psd):
            parts.append(off + np.arange(r * (r + 1) // 2, dtype=np.int64))
        return np.concatenate(parts)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExportManifest:
        doc = json.loads(text)
        if doc.get("manifest_version") != MANIFEST_VERSION:
            raise CbfError(f"unsupported manifest version {doc.get('manifest_version')!r}")
        return cls(**doc)


def _num(v: float) -> str:
    return repr(float(v))


def _psd_entries(r: int):
    """``(slot, i, j)`` for every svec slot of an order-``r`` block."""
    i, j = np.tril_indices(r)
    order = np.argsort(svec_index(i, j, r), kind="stable")
    return svec_index(i, j, r)[order], i[order], j[order]


def _locate(cones: ConeSpec, N: int):
    """Per internal column: PSD block (``-1`` if scalar), row, column, svec scale."""
    block = np.full(N, -1, dtype=np.int64)
    row = np.zeros(N, dtype=np.int64)
    col = np.zeros(N, dtype=np.int64)
    for p, (off, r) in enumerate(zip(cones.psd_offsets, cones.psd)):
        slots, i, j = _psd_entries(r)
        block[off + slots] = p
        row[off + slots] = i
        col[off + slots] = j
    return block, row, col


def write_cbf(lp: ConeLP) -> tuple[str, ExportManifest]:
    """CBF text and manifest for a cone LP with real symmetric PSD blocks."""
    cones = lp.cones
    if cones.hermitian and cones.psd:
        raise CbfError("Hermitian PSD blocks present; apply herm_to_sym first")
    N, M = lp.N, lp.M
    n_scalar = cones.nonneg + sum(cones.soc)
    block, prow, pcol = _locate(cones, N)
    scale = np.where(prow != pcol, 1.0 / SQRT2, 1.0)

    out = io.StringIO()
    w = out.write
    w(f"VER\n{CBF_VERSION}\n\nOBJSENSE\nMIN\n\n")
    if cones.psd:
        w(f"PSDVAR\n{len(cones.psd)}\n")
        for r in cones.psd:
            w(f"{r}\n")
        w("\n")
    if n_scalar:
        doms = ([f"L+ {cones.nonneg}"] if cones.nonneg else []) + [f"Q {m}" for m in cones.soc]
        w(f"VAR\n{n_scalar} {len(doms)}\n" + "\n".join(doms) + "\n\n")
    w(f"CON\n{M} {1 if M else 0}\n")
    if M:
        w(f"L= {M}\n")
    w("\n")

    c = np.asarray(lp.c, dtype=float)
    nz = np.flatnonzero(c)
    ps, sc = nz[block[nz] >= 0], nz[block[nz] < 0]
    if ps.size:
        w(f"OBJFCOORD\n{ps.size}\n")
        for k in ps:
            w(f"{block[k]} {prow[k]} {pcol[k]} {_num(c[k] * scale[k])}\n")
        w("\n")
    if sc.size:
        w(f"OBJACOORD\n{sc.size}\n")
        for k in sc:
            w(f"{k} {_num(c[k])}\n")
        w("\n")
    if lp.offset != 0:
        w(f"OBJBCOORD\n{_num(lp.offset)}\n\n")

    A = sp.csr_matrix(lp.A)
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    rows = np.repeat(np.arange(M, dtype=np.int64), np.diff(A.indptr))
    cols, vals = A.indices, A.data
    is_psd = block[cols] >= 0
    if np.any(is_psd):
        w(f"FCOORD\n{int(is_psd.sum())}\n")
        for r_, k, v in zip(rows[is_psd], cols[is_psd], vals[is_psd]):
            w(f"{r_} {block[k]} {prow[k]} {pcol[k]} {_num(v * scale[k])}\n")
        w("\n")
    if np.any(~is_psd):
        w(f"ACOORD\n{int((~is_psd).sum())}\n")
        for r_, k, v in zip(rows[~is_psd], cols[~is_psd], vals[~is_psd]):
            w(f"{r_} {k} {_num(v)}\n")
        w("\n")
    bnz = np.flatnonzero(lp.b)
    if bnz.size:
        w(f"BCOORD\n{bnz.size}\n")
        for r_ in bnz:
            w(f"{r_} {_num(-lp.b[r_])}\n")
        w("\n")

    manifest = ExportManifest(
        format_version=CBF_VERSION,
        n_scalar=n_scalar,
        nonneg=cones.nonneg,
        soc=list(cones.soc),
        psd=list(cones.psd),
        psd_offsets=[int(o) for o in cones.psd_offsets[: len(cones.psd)]],
        scalar_cols=list(range(n_scalar)),
        n_rows=M,
        offset=float(lp.offset),
        index_map={k: np.asarray(v).astype(int).ravel().tolist() for k, v in lp.index_map.items()},
    )
    return out.getvalue().rstrip("\n") + "\n", manifest


def save_cbf(lp: ConeLP, path: str | Path) -> tuple[Path, Path]:
    """Write ``path`` and ``path + '.manifest.json'``."""
    path = Path(path)
    text, manifest = write_cbf(lp)
    path.write_text(text, encoding="ascii")
    mpath = path.with_name(path.name + ".manifest.json")
    mpath.write_text(manifest.to_json(), encoding="utf-8")
    return path, mpath


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def read_cbf(text: str) -> ConeLP:
    """Parse the CBF subset produced by :func:`write_cbf`."""
    lines = list(_tokens(text))
    pos = 0

    def take() -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(lines):
            raise CbfError("unexpected end of file")
        lineno, line = lines[pos]
        pos += 1
        return lineno, line.split()

    psd: list[int] = []
    nonneg, soc, n_scalar, M = 0, [], 0, 0
    obj, offset = {}, 0.0
    entries: list[tuple[int, int, int, int, float]] = []  # row, block, i, j, value (block -1: scalar)
    brhs: dict[int, float] = {}
    while pos < len(lines):
        lineno, (key, *_) = take()
        if key == "VER":
            ver = int(take()[1][0])
            if ver > 3:
                raise CbfError(f"line {lineno}: unsupported CBF version {ver}")
        elif key == "OBJSENSE":
            if take()[1][0] != "MIN":
                raise CbfError(f"line {lineno}: only minimisation is supported")
        elif key == "PSDVAR":
            psd = [int(take()[1][0]) for _ in range(int(take()[1][0]))]
        elif key == "VAR":
            n_scalar, k = map(int, take()[1])
            for _ in range(k):
                ln, (dom, m) = take()
                if dom == "L+" and not soc:
                    nonneg += int(m)
                elif dom == "Q":
                    soc.append(int(m))
                else:
                    raise CbfError(f"line {ln}: unsupported variable domain {dom}")
        elif key == "CON":
            M, k = map(int, take()[1])
            for _ in range(k):
                ln, (dom, _m) = take()
                if dom != "L=":
                    raise CbfError(f"line {ln}: unsupported constraint domain {dom}")
        elif key == "OBJFCOORD":
            for _ in range(int(take()[1][0])):
                _, (b, i, j, v) = take()
                obj[(int(b), int(i), int(j))] = float(v)
        elif key == "OBJACOORD":
            for _ in range(int(take()[1][0])):
                _, (k, v) = take()
                obj[(-1, int(k), 0)] = float(v)
        elif key == "OBJBCOORD":
            offset = float(take()[1][0])
        elif key == "FCOORD":
            for _ in range(int(take()[1][0])):
                _, (r, b, i, j, v) = take()
                entries.append((int(r), int(b), int(i), int(j), float(v)))
        elif key == "ACOORD":
            for _ in range(int(take()[1][0])):
                _, (r, k, v) = take()
                entries.append((int(r), -1, int(k), 0, float(v)))
        elif key == "BCOORD":
            for _ in range(int(take()[1][0])):
                _, (r, v) = take()
                brhs[int(r)] = -float(v)
        else:
            raise CbfError(f"line {lineno}: unsupported section {key}")
    if n_scalar != nonneg + sum(soc):
        raise CbfError("scalar variable count does not match its domains")

    cones = ConeSpec(nonneg=nonneg, soc=tuple(soc), psd=tuple(psd), hermitian=False)
    N = cones.size

    def column(b: int, i: int, j: int) -> tuple[int, float]:
        if b < 0:
            return i, 1.0
        i, j = max(i, j), min(i, j)
        return int(cones.psd_offsets[b]) + int(svec_index(i, j, psd[b])), (SQRT2 if i != j else 1.0)

    c = np.zeros(N)
    for (b, i, j), v in obj.items():
        k, s = column(b, i, j)
        c[k] += v * s
    rows, cols, vals = [], [], []
    for r, b, i, j, v in entries:
        k, s = column(b, i, j)
        rows.append(r)
        cols.append(k)
        vals.append(v * s)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(M, N))
    A.sum_duplicates()
    b = np.zeros(M)
    for r, v in brhs.items():
        b[r] = v
    return ConeLP(c=c, A=A, b=b, cones=cones, offset=offset)


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_solution(sol: Solution, path: str | Path, manifest: ExportManifest | None = None) -> None:
    """Write ``sol`` in the JSON schema; ``.gz`` paths are compressed."""
    path = Path(path)
    order = manifest.file_order() if manifest is not None else np.arange(sol.x.size)
    doc = {
        "status": sol.status.value,
        "x": np.asarray(sol.x)[order].tolist(),
        "y": np.asarray(sol.y).tolist(),
        "s": np.asarray(sol.s)[order].tolist(),
    }
    with _open(path, "w") as fh:
        json.dump(doc, fh)


def read_solution(path: str | Path, lp: ConeLP, manifest: ExportManifest | None = None) -> Solution:
    """Load a solution file and route it to internal columns.

    Objectives are recomputed from ``lp``; values stored in the file are
    ignored.
    """
    path = Path(path)
    try:
        with _open(path, "r") as fh:
            doc = json.load(fh)
    except (OSError, EOFError, json.JSONDecodeError) as exc:
        raise SolutionFileError(f"{path}: {exc}") from exc
    try:
        status = Status(doc.get("status"))
    except ValueError:
        raise SolutionFileError(f"{path}: unknown status {doc.get('status')!r}") from None
    if manifest is not None and (manifest.n_vars != lp.N or manifest.n_rows != lp.M):
        raise SolutionFileError("manifest does not match the rebuilt problem")
    expect = {"x": lp.N, "y": lp.M, "s": lp.N}
    vec = {}
    for key, n in expect.items():
        if key not in doc:
            raise SolutionFileError(f"{path}: missing section {key!r}")
        v = np.asarray(doc[key], dtype=float)
        if v.shape != (n,):
            raise SolutionFileError(f"{path}: section {key!r} has length {v.size}, expected {n}")
        vec[key] = v
    x, s = vec["x"], vec["s"]
    if manifest is not None:
        order = manifest.file_order()
        x, s = np.empty(lp.N), np.empty(lp.N)
        x[order], s[order] = vec["x"], vec["s"]
    y = vec["y"]
    by = float(lp.b @ y)
    return Solution(
        x=x,
        y=y,
        s=s,
        status=status,
        objective_primal=lp.objective(x),
        objective_dual=by + lp.offset if math.isfinite(by) else float("nan"),
        info={"source": str(path)},
    )
