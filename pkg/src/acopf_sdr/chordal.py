"""Chordal conversion of the PSD block and the Hermitian-to-real map.

The aggregate sparsity pattern of the ``X`` block is extended to a chordal
graph by symbolic elimination under a fill-reducing ordering; the maximal
cliques of the extension become the new PSD blocks. Entries shared between
blocks are tied by two-nonzero coupling rows (owner slot minus duplicate).
"""

from __future__ import annotations

import dataclasses
import heapq
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree, reverse_cuthill_mckee

from .relax import ConeLP, ConeSpec, hvec_index, hvec_slots, svec_index

__all__ = [
    "ChordalDecomposition",
    "ConvertedConeLP",
    "SparsityPattern",
    "chordal_extension",
    "clique_tree",
    "convert",
    "herm_to_sym",
    "herm_to_sym_matrix",
    "merge_cliques",
    "minimum_degree_order",
    "pattern_from_lp",
    "sym_to_herm_matrix",
]


@dataclass(frozen=True)
class SparsityPattern:
    """Undirected graph on ``n`` vertices; ``edges`` holds pairs ``i > j``.

    Diagonal entries are implicit.
    """

    n: int
    edges: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges) -> SparsityPattern:
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        e = e[e[:, 0] != e[:, 1]]
        e = np.sort(e, axis=1)[:, ::-1]  # i > j
        e = np.unique(e, axis=0) if e.size else e
        return cls(n=n, edges=e)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edges:
            adj[int(i)].add(int(j))
            adj[int(j)].add(int(i))
        return adj

    def matrix(self) -> sp.csr_matrix:
        i, j = self.edges[:, 0], self.edges[:, 1]
        m = sp.coo_matrix((np.ones(i.size), (i, j)), shape=(self.n, self.n))
        return (m + m.T).tocsr()


def pattern_from_lp(lp: ConeLP) -> SparsityPattern:
    """Aggregate pattern of the ``X`` coefficients in ``A`` and ``c``."""
    x0 = lp.x_start
    n = lp.cones.psd[0]
    A = lp.A.tocsc()
    used = np.flatnonzero(np.diff(A.indptr)[x0:]) + x0
    used = np.union1d(used, np.flatnonzero(lp.c[x0:]) + x0)
    i, j, _ = hvec_slots(used - x0, n)
    return SparsityPattern.from_edges(n, np.c_[i, j])


# ---------------------------------------------------------------------------
# Orderings and symbolic elimination


def _eliminate(adj: list[set[int]], order: np.ndarray | None):
    """Symbolic elimination; returns (order, higher-neighbour sets).

    With ``order=None`` the next vertex is always one of minimum current
    degree (ties to the lowest index).
    """
    n = len(adj)
    adj = [set(a) for a in adj]
    done = np.zeros(n, dtype=bool)
    higher: list[frozenset[int]] = [frozenset()] * n
    out = []
    if order is None:
        heap = [(len(a), v) for v, a in enumerate(adj)]
        heapq.heapify(heap)

        def nxt():
            while True:
                d, v = heapq.heappop(heap)
                if not done[v] and d == len(adj[v]):
                    return v

    else:
        it = iter(int(v) for v in order)

        def nxt():
            return next(it)

    for _ in range(n):
        v = nxt()
        nb = adj[v]
        higher[v] = frozenset(nb)
        for u in nb:
            au = adj[u]
            au.discard(v)
            au |= nb
            au.discard(u)
            if order is None:
                heapq.heappush(heap, (len(au), u))
        adj[v] = set()
        done[v] = True
        out.append(v)
    return np.asarray(out, dtype=np.int64), higher


def minimum_degree_order(pattern: SparsityPattern) -> np.ndarray:
    """Greedy minimum-degree elimination ordering."""
    order, _ = _eliminate(pattern.adjacency(), None)
    return order


def _ordering(pattern: SparsityPattern, rule: str) -> np.ndarray | None:
    if rule in ("amd", "mindegree"):
        return None
    if rule == "natural":
        return np.arange(pattern.n, dtype=np.int64)
    if rule == "rcm":
        return np.asarray(reverse_cuthill_mckee(pattern.matrix(), symmetric_mode=True), dtype=np.int64)
    raise ValueError(f"unknown ordering rule {rule!r}")


@dataclass
class ChordalDecomposition:
    """Cliques of a chordal extension arranged in a clique tree.

    ``cliques[k]`` is a sorted vertex array; ``parent[k]`` is the parent clique
    (-1 for a root) and ``separators[k] = cliques[k] & cliques[parent[k]]``.
    """

    n: int
    ordering: np.ndarray
    cliques: list[np.ndarray]
    parent: np.ndarray
    edges: np.ndarray  # original pattern edges (i > j)
    separators: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.separators:
            self.separators = [
                np.intersect1d(c, self.cliques[p]) if p >= 0 else np.zeros(0, dtype=np.int64)
                for c, p in zip(self.cliques, self.parent)
            ]

    @property
    def fill(self) -> np.ndarray:
        """Edges of the extension that are not in the original pattern."""
        ext = set()
        for c in self.cliques:
            ii, jj = np.tril_indices(c.size, -1)
            ext.update(zip(c[ii].tolist(), c[jj].tolist()))
        ext.difference_update(map(tuple, self.edges.tolist()))
        return np.array(sorted(ext), dtype=np.int64).reshape(-1, 2)

    @property
    def coupling_rows(self) -> int:
        """Real coupling equations: ``sum |S|^2`` over separators."""
        return int(sum(s.size**2 for s in self.separators))

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.cliques], dtype=np.int64)

    def check_running_intersection(self) -> bool:
        """Every vertex's cliques form a connected subtree, and separators
        are contained in the parent clique."""
        m = len(self.cliques)
        holders: list[list[int]] = [[] for _ in range(self.n)]
        for k, c in enumerate(self.cliques):
            for v in c.tolist():
                holders[v].append(k)
        for k in range(m):
            p = self.parent[k]
            if p >= 0 and not np.all(np.isin(self.separators[k], self.cliques[p])):
                return False
        for v, hs in enumerate(holders):
            if not hs:
                return False
            hset = set(hs)
            # in a subtree exactly one holder has its parent outside the set
            tops = sum(1 for k in hs if self.parent[k] < 0 or self.parent[k] not in hset)
            if tops != 1:
                return False
            for k in hs:
                p = self.parent[k]
                if p >= 0 and p in hset and v not in self.separators[k]:
                    return False
        return True

    def covers_edges(self) -> bool:
        holders: list[set[int]] = [set() for _ in range(self.n)]
        for k, c in enumerate(self.cliques):
            for v in c.tolist():
                holders[v].add(k)
        return all(holders[i] & holders[j] for i, j in self.edges.tolist())

    def is_clique_tree(self) -> bool:
        roots = int(np.sum(self.parent < 0))
        return roots >= 1 and self.check_running_intersection()

    def ledger(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Shared lower-triangle entries: ``(i, j, owner, duplicate)`` arrays.

        The owner of an entry is the lowest-index clique holding it; one row
        per duplicate holder.
        """
        gi, gj, blk = _clique_entries(self.cliques)[:3]
        key = gi * self.n + gj
        order = np.lexsort((blk, key))
        key, blk = key[order], blk[order]
        first = np.r_[True, key[1:] != key[:-1]]
        owner = np.maximum.accumulate(np.where(first, np.arange(key.size), 0))
        dup = ~first
        k = key[dup]
        return k // self.n, k % self.n, blk[owner[dup]], blk[dup]


def _clique_entries(cliques: list[np.ndarray]):
    """All lower-triangle entries of all cliques: global (i, j), clique, local (li, lj)."""
    gi, gj, blk, li, lj = [], [], [], [], []
    for k, c in enumerate(cliques):
        r = c.size
        jj, ii = np.triu_indices(r)
        gi.append(c[ii])
        gj.append(c[jj])
        blk.append(np.full(ii.size, k, dtype=np.int64))
        li.append(ii)
        lj.append(jj)
    cat = np.concatenate
    return cat(gi), cat(gj), cat(blk), cat(li).astype(np.int64), cat(lj).astype(np.int64)


def clique_tree(cliques: list[np.ndarray], n: int) -> np.ndarray:
    """Parent pointers of a maximum-weight spanning tree of the clique
    intersection graph, rooted at clique 0 (one root per component)."""
    m = len(cliques)
    if m == 1:
        return np.array([-1], dtype=np.int64)
    rows = np.concatenate([np.full(c.size, k) for k, c in enumerate(cliques)])
    cols = np.concatenate(cliques)
    B = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(m, n))
    W = sp.triu(B @ B.T, k=1).tocoo()
    big = W.data.max() + 1.0 if W.nnz else 1.0
    G = sp.csr_matrix((big - W.data, (W.row, W.col)), shape=(m, m))
    T = minimum_spanning_tree(G)
    T = T + T.T
    parent = np.full(m, -1, dtype=np.int64)
    seen = np.zeros(m, dtype=bool)
    for root in range(m):
        if seen[root]:
            continue
        nodes, pred = breadth_first_order(T, root, directed=False, return_predecessors=True)
        seen[nodes] = True
        parent[nodes] = pred[nodes]
        parent[root] = -1
    parent[parent < 0] = -1
    return parent


def chordal_extension(pattern: SparsityPattern, ordering: str = "amd") -> ChordalDecomposition:
    """Chordal extension, maximal cliques and clique tree of ``pattern``.

    ``ordering`` is ``"amd"`` (minimum degree, default), ``"rcm"`` or
    ``"natural"``.
    """
    n = pattern.n
    order, higher = _eliminate(pattern.adjacency(), _ordering(pattern, ordering))
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    maximal = np.ones(n, dtype=bool)
    for u in order.tolist():
        hu = higher[u]
        if not hu:
            continue
        p = min(hu, key=lambda w: pos[w])
        if len(hu) - 1 == len(higher[p]):
            maximal[p] = False
    cliques = [
        np.array(sorted(higher[v] | {v}), dtype=np.int64) for v in order.tolist() if maximal[v]
    ]
    return ChordalDecomposition(
        n=n,
        ordering=order,
        cliques=cliques,
        parent=clique_tree(cliques, n),
        edges=pattern.edges,
    )


def merge_cliques(
    dec: ChordalDecomposition, max_block: int, fill_budget: float | None = None
) -> ChordalDecomposition:
    """Greedy parent-child merges in the clique tree.

    A merge is admissible when the union has at most ``max_block`` vertices,
    or, with ``fill_budget`` set, when the growth in block entries minus the
    coupling rows saved does not exceed it. Smallest unions merge first.
    ``max_block <= 0`` disables merging.
    """
    if max_block <= 0 and fill_budget is None:
        return dec
    sets = [set(c.tolist()) for c in dec.cliques]
    parent = dec.parent.copy()
    alive = [True] * len(sets)
    version = [0] * len(sets)
    children: list[set[int]] = [set() for _ in sets]
    for k, p in enumerate(parent):
        if p >= 0:
            children[p].add(k)

    def entry(ch):
        p = int(parent[ch])
        a, b = sets[ch], sets[p]
        s = len(a & b)
        u = len(a) + len(b) - s
        growth = u * u - len(a) ** 2 - len(b) ** 2
        ok = (max_block > 0 and u <= max_block) or (fill_budget is not None and growth - s * s <= fill_budget)
        if not ok:
            return None
        return (u, growth - s * s, min(ch, p), max(ch, p), ch, p, version[ch], version[p])

    heap = [e for k in range(len(sets)) if parent[k] >= 0 and (e := entry(k))]
    heapq.heapify(heap)

    def absorb(ch):
        # fold clique ch into its parent
        p = int(parent[ch])
        sets[p] |= sets[ch]
        for g in children[ch]:
            parent[g] = p
            children[p].add(g)
        children[p].discard(ch)
        alive[ch] = False
        version[p] += 1
        return p

    while heap:
        _, _, _, _, ch, p, vc, vp = heapq.heappop(heap)
        if not alive[ch] or parent[ch] != p:
            continue
        if version[ch] != vc or version[p] != vp:
            continue
        p = absorb(ch)
        # neighbours swallowed by the union are no longer maximal
        changed = True
        while changed:
            changed = False
            for g in list(children[p]):
                if sets[g] <= sets[p]:
                    absorb(g)
                    changed = True
            q = int(parent[p])
            if q >= 0 and sets[q] <= sets[p]:
                # keep p's contents under q's slot so the root is stable
                sets[q] = sets[p]
                for g in children[p]:
                    parent[g] = q
                    children[q].add(g)
                children[q].discard(p)
                alive[p] = False
                version[q] += 1
                p = q
                changed = True
        for k in list(children[p]) + [p]:
            if parent[k] >= 0 and (e := entry(k)):
                heapq.heappush(heap, e)

    keep = [k for k in range(len(sets)) if alive[k]]
    new_id = {k: m for m, k in enumerate(keep)}
    cliques = [np.array(sorted(sets[k]), dtype=np.int64) for k in keep]
    new_parent = np.array(
        [new_id[int(parent[k])] if parent[k] >= 0 else -1 for k in keep], dtype=np.int64
    )
    return ChordalDecomposition(
        n=dec.n, ordering=dec.ordering, cliques=cliques, parent=new_parent, edges=dec.edges
    )


# ---------------------------------------------------------------------------
# Conversion


@dataclass
class ConvertedConeLP(ConeLP):
    """Cone LP whose single PSD block was split into clique blocks.

    ``owner_cols[k]`` is the new column carrying original ``X`` slot
    ``orig_slots[k]``; ``coupling`` is the row slice of the tie equations.
    ``herm_map`` (set by :func:`herm_to_sym`) maps real-symmetric variables
    back to Hermitian ones: ``x_herm = herm_map @ x``.
    """

    decomposition: ChordalDecomposition | None = None
    n_order: int = 0
    orig_slots: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    owner_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    coupling: slice = slice(0, 0)
    herm_map: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_coupling(self) -> int:
        return self.coupling.stop - self.coupling.start

    @property
    def cliques(self) -> list[np.ndarray]:
        return self.decomposition.cliques if self.decomposition else []

    def to_hermitian(self, x: np.ndarray) -> np.ndarray:
        """Map a real-symmetric-form vector to Hermitian (hvec) block form."""
        return x if self.herm_map is None else self.herm_map @ x

    def from_hermitian(self, xh: np.ndarray) -> np.ndarray:
        """Exact real embedding of a Hermitian-form vector."""
        if self.herm_map is None:
            return xh
        x0 = self.x_start
        out = np.asarray(self.herm_map[x0:, x0:].T @ xh[x0:]) * 2.0
        return np.r_[xh[:x0], out]

    def original_x(self, x: np.ndarray) -> np.ndarray:
        """Original-size ``hvec(X)`` entries carried by owner slots (others 0)."""
        xh = self.to_hermitian(x)
        out = np.zeros(self.n_order**2)
        out[self.orig_slots] = xh[self.owner_cols]
        return out

    def lift(self, x_orig: np.ndarray) -> np.ndarray:
        """Map a point of the original (unconverted, Hermitian) cone LP into this one."""
        from .relax import hvec, hvec_inv

        x0 = self.x_start
        if self.decomposition is None:
            return self.from_hermitian(np.asarray(x_orig))
        X = hvec_inv(x_orig[x0:])
        parts = [hvec(X[np.ix_(c, c)]) for c in self.cliques]
        return self.from_hermitian(np.concatenate([x_orig[:x0], *parts]))

    def clique_matrices(self, x: np.ndarray) -> list[np.ndarray]:
        """Hermitian clique blocks of a (possibly real-symmetric-form) vector."""
        from .relax import hvec_inv

        xh = self.to_hermitian(x)
        start = self.x_start
        if self.decomposition is None:
            return [hvec_inv(xh[start : start + self.n_order**2])]
        out = []
        for c in self.cliques:
            r = c.size
            out.append(hvec_inv(xh[start : start + r * r]))
            start += r * r
        return out


def convert(lp: ConeLP, dec: ChordalDecomposition) -> ConvertedConeLP:
    """Replace the ``X`` block by clique blocks plus coupling rows."""
    x0 = lp.x_start
    n = lp.cones.psd[0]
    if len(lp.cones.psd) != 1 or not lp.cones.hermitian:
        raise ValueError("convert needs a cone LP with a single Hermitian PSD block")
    if dec.n != n:
        raise ValueError("decomposition order does not match the PSD block")
    cliques = dec.cliques
    sizes = np.array([c.size for c in cliques], dtype=np.int64)
    block_start = x0 + np.r_[0, np.cumsum(sizes**2)].astype(np.int64)

    gi, gj, blk, li, lj = _clique_entries(cliques)
    lslot = hvec_index(li, lj, sizes[blk]) if sizes.size else li
    newcol = block_start[blk] + lslot
    key = gi * n + gj
    order = np.lexsort((blk, key))
    key_s, blk_s, col_s, gi_s, gj_s = key[order], blk[order], newcol[order], gi[order], gj[order]
    first = np.r_[True, key_s[1:] != key_s[:-1]] if key_s.size else np.zeros(0, bool)
    owner_key = key_s[first]
    owner_col = col_s[first]

    # remap data columns of X to owner slots
    A = lp.A.tocoo()
    Nnew = int(block_start[-1])

    def remap(cols):
        cols = np.asarray(cols, dtype=np.int64)
        out = cols.copy()
        xs = cols >= x0
        if np.any(xs):
            i, j, part = hvec_slots(cols[xs] - x0, n)
            k = i * n + j
            pos = np.searchsorted(owner_key, k)
            bad = (pos >= owner_key.size) | (owner_key[np.minimum(pos, owner_key.size - 1)] != k)
            if np.any(bad):
                raise ValueError("X entry outside every clique (pattern and decomposition disagree)")
            out[xs] = owner_col[pos] + part
        return out

    rows = [A.row]
    cols = [remap(A.col)]
    vals = [A.data]

    c_new = np.zeros(Nnew)
    cnz = np.flatnonzero(lp.c)
    c_new[remap(cnz)] = lp.c[cnz]

    # coupling rows: owner - duplicate == 0, real and imaginary parts separately
    dup = ~first
    owner_idx = np.maximum.accumulate(np.where(first, np.arange(key_s.size), 0))
    d_own = col_s[owner_idx[dup]]
    d_dup = col_s[dup]
    offd = gi_s[dup] != gj_s[dup]
    e_own = np.r_[d_own, d_own[offd] + 1]
    e_dup = np.r_[d_dup, d_dup[offd] + 1]
    # interleave so each shared entry's rows are adjacent: sort by owner column
    perm = np.lexsort((e_dup, e_own))
    e_own, e_dup = e_own[perm], e_dup[perm]
    m0 = lp.M
    ne = e_own.size
    er = m0 + np.arange(ne)
    rows += [er, er]
    cols += [e_own, e_dup]
    vals += [np.ones(ne), -np.ones(ne)]
    Anew = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m0 + ne, Nnew)
    )
    Anew.sum_duplicates()

    # provenance for every original slot that survives in some clique
    oi, oj = owner_key // n, owner_key % n
    base = hvec_index(oi, oj, n)
    od = oi != oj
    orig_slots = np.r_[base, base[od] + 1]
    owner_cols = np.r_[owner_col, owner_col[od] + 1]

    index_map = dict(lp.index_map)
    index_map["X"] = np.array([x0, Nnew], dtype=np.int64)
    row_map = dict(lp.row_map)
    row_map["coupling"] = slice(m0, m0 + ne)
    return ConvertedConeLP(
        c=c_new,
        A=Anew,
        b=np.r_[lp.b, np.zeros(ne)],
        cones=ConeSpec(nonneg=lp.cones.nonneg, soc=lp.cones.soc, psd=tuple(int(s) for s in sizes)),
        offset=lp.offset,
        index_map=index_map,
        row_map=row_map,
        counts=lp.counts,
        case=lp.case,
        model=lp.model,
        decomposition=dec,
        n_order=n,
        orig_slots=orig_slots,
        owner_cols=owner_cols,
        coupling=slice(m0, m0 + ne),
    )


# ---------------------------------------------------------------------------
# Hermitian -> real symmetric


def herm_to_sym_matrix(X: np.ndarray) -> np.ndarray:
    """``P + jQ -> [[P, -Q], [Q, P]]``."""
    X = np.asarray(X, dtype=complex)
    P, Q = X.real, X.imag
    return np.block([[P, -Q], [Q, P]])


def sym_to_herm_matrix(Z: np.ndarray) -> np.ndarray:
    """Hermitian matrix whose real embedding is the structured part of ``Z``."""
    r = Z.shape[0] // 2
    Z11, Z12, Z21, Z22 = Z[:r, :r], Z[:r, r:], Z[r:, :r], Z[r:, r:]
    return (Z11 + Z22) / 2 + 1j * (Z21 - Z12) / 2


_MAP_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _block_map(r: int):
    """COO triplets of the (r**2 x r(2r+1)) matrix sending svec(Z) to hvec(X)."""
    if r in _MAP_CACHE:
        return _MAP_CACHE[r]
    m = 2 * r
    jj, ii = np.triu_indices(r)
    diag = ii == jj
    hd = hvec_index(ii[diag], jj[diag], r)
    ho = hvec_index(ii[~diag], jj[~diag], r)
    io, jo = ii[~diag], jj[~diag]
    idg = ii[diag]
    hrows = np.r_[hd, hd, ho, ho, ho + 1, ho + 1]
    scols = np.r_[
        svec_index(idg, idg, m),
        svec_index(idg + r, idg + r, m),
        svec_index(io, jo, m),
        svec_index(io + r, jo + r, m),
        svec_index(io + r, jo, m),
        svec_index(jo + r, io, m),
    ]
    vals = np.r_[
        np.full(2 * hd.size, 0.5),
        np.full(2 * ho.size, 0.5),
        np.full(ho.size, 0.5),
        np.full(ho.size, -0.5),
    ]
    _MAP_CACHE[r] = (hrows, scols, vals)
    return _MAP_CACHE[r]


def herm_to_sym(lp: ConeLP) -> ConeLP:
    """Replace each Hermitian block of order r by a real symmetric block of order 2r.

    Data are mapped with a factor 1/2 so every row and objective value is
    unchanged at ``Z = [[P, -Q], [Q, P]]``.
    """
    if not lp.cones.hermitian:
        raise ValueError("cone LP already has real symmetric blocks")
    x0 = lp.x_start
    rows, cols, vals = [np.arange(x0)], [np.arange(x0)], [np.ones(x0)]
    hoff, soff = x0, x0
    for r in lp.cones.psd:
        hr, sc, v = _block_map(r)
        rows.append(hr + hoff)
        cols.append(sc + soff)
        vals.append(v)
        hoff += r * r
        soff += r * (2 * r + 1)
    P = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(hoff, soff)
    )
    A = (lp.A @ P).tocsr()
    A.eliminate_zeros()
    c = np.asarray(P.T @ lp.c).ravel()
    cones = ConeSpec(
        nonneg=lp.cones.nonneg, soc=lp.cones.soc, psd=tuple(2 * r for r in lp.cones.psd), hermitian=False
    )
    index_map = dict(lp.index_map)
    index_map["X"] = np.array([x0, soff], dtype=np.int64)
    if isinstance(lp, ConvertedConeLP):
        return dataclasses.replace(lp, A=A, c=c, cones=cones, index_map=index_map, herm_map=P)
    return ConvertedConeLP(
        c=c,
        A=A,
        b=lp.b.copy(),
        cones=cones,
        offset=lp.offset,
        index_map=index_map,
        row_map=dict(lp.row_map),
        counts=lp.counts,
        case=lp.case,
        model=lp.model,
        herm_map=P,
        n_order=lp.cones.psd[0] if len(lp.cones.psd) == 1 else 0,
    )


def clique_stats(dec: ChordalDecomposition) -> dict:
    """Counts, size histogram, largest clique and coupling-row total."""
    sizes = dec.sizes()
    hist = Counter(sizes.tolist())
    return {
        "count": int(sizes.size),
        "max": int(sizes.max()) if sizes.size else 0,
        "mean": float(sizes.mean()) if sizes.size else 0.0,
        "histogram": {str(k): hist[k] for k in sorted(hist)},
        "coupling_rows": dec.coupling_rows,
        "fill_edges": int(dec.fill.shape[0]),
    }
