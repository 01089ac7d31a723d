"""Tiles: regions of a term tree, their static classification, and the
interaction of tiles with game plays.

A simple tile is a non-lambda node together with its lambda successors
(its atomic leaves); composing tiles at leaves gives composite tiles.  A
basic tile has exactly one free-variable occurrence and no constants, or
one constant and no free variables.  Plays on tiles, b-partitions and
the staged p-partition of a whole play connect this static structure to
game dynamics; the p-partition is what the tree-of-tiles machinery in
`treetiles` consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from . import game as G
from .game import Play, correspond, is_ri, parent_of, similar_except
from .problem import Problem
from .terms import ConstLabel, LamLabel, TermTree, VarLabel


@dataclass(frozen=True)
class Tile:
    """A rooted partial subtree: root head node, open lambda leaves (in
    document order) and the full member node set."""

    root: int
    leaves: tuple[int, ...]
    nodes: frozenset[int]

    @property
    def is_simple(self) -> bool:
        return len(self.nodes) == 1 + len(self.leaves)

    def leaf_index(self, nid: int) -> int:
        return self.leaves.index(nid) + 1


@dataclass
class TileClass:
    is_basic: bool
    is_top: bool
    is_constant: bool
    j_end: set[int]
    is_end: bool
    is_embedded: bool
    level: Optional[int]


def simple_tile(tree: TermTree, nid: int) -> Tile:
    """The simple tile headed by a non-lambda node."""
    assert not tree.is_lambda(nid)
    kids = tree.succ(nid)
    return Tile(nid, kids, frozenset((nid,) + kids))


def simple_tiles(tree: TermTree) -> list[Tile]:
    return [simple_tile(tree, n) for n in tree.nodes() if not tree.is_lambda(n)]


def compose(tree: TermTree, tile: Tile, leaf: int) -> Tile:
    """Place the simple tile directly beneath `leaf` into the tile."""
    assert leaf in tile.leaves
    below = simple_tile(tree, tree.succ(leaf)[0])
    leaves = tuple(sorted(set(tile.leaves) - {leaf} | set(below.leaves)))
    return Tile(tile.root, leaves, tile.nodes | below.nodes)


def tile_paths(tree: TermTree, tile: Tile) -> list[list[tuple[int, int]]]:
    """Per atomic leaf, the chain of (head node, lambda node) pairs from
    the tile's root to that leaf."""
    out = []
    for leaf in tile.leaves:
        chain = []
        nid = leaf
        while True:
            head = tree.parent[nid]
            assert head is not None and head in tile.nodes
            chain.append((head, nid))
            if head == tile.root:
                break
            nid = tree.parent[head]
        chain.reverse()
        out.append(chain)
    return out


def free_var_occurrences(tree: TermTree, tile: Tile) -> list[int]:
    binder = tree.binder_node
    out = []
    for n in sorted(tile.nodes):
        lab = tree.label(n)
        if isinstance(lab, VarLabel) and binder.get(lab.name) not in tile.nodes:
            out.append(n)
    return out


def constant_occurrences(tree: TermTree, tile: Tile) -> list[int]:
    return [n for n in sorted(tile.nodes)
            if isinstance(tree.label(n), ConstLabel)]


def is_basic(tree: TermTree, tile: Tile) -> bool:
    fv = free_var_occurrences(tree, tile)
    cs = constant_occurrences(tree, tile)
    return (len(fv) == 1 and not cs) or (len(cs) == 1 and not fv)


def head_label(tree: TermTree, tile: Tile):
    return tree.label(tile.root)


def j_below(tree: TermTree, gamma: Tile, tau: Tile) -> Optional[int]:
    """1-based leaf index j of tau below which gamma's root sits, if any."""
    nid = gamma.root
    while tree.parent[nid] is not None:
        nid = tree.parent[nid]
        if nid in tau.leaves:
            return tau.leaf_index(nid)
        if nid in tau.nodes:
            return None  # inside tau, not below a leaf
    return None


def is_below(tree: TermTree, gamma: Tile, tau: Tile) -> bool:
    return j_below(tree, gamma, tau) is not None


def immediate_j_dependent(tree: TermTree, gamma: Tile, tau: Tile) -> Optional[int]:
    """Leaf index when gamma is an immediate j-dependent of tau: below
    leaf j and containing a free variable bound inside tau."""
    j = j_below(tree, gamma, tau)
    if j is None:
        return None
    binder = tree.binder_node
    for occ in free_var_occurrences(tree, gamma):
        lab = tree.label(occ)
        if binder.get(lab.name) in tau.nodes:
            return j
    return None


def dependents(tree: TermTree, tau: Tile,
               universe: list[Tile] | None = None) -> list[Tile]:
    """Transitive dependents of tau among `universe` (simple tiles by
    default)."""
    universe = universe if universe is not None else simple_tiles(tree)
    out: dict[int, Tile] = {}
    frontier = [tau]
    while frontier:
        cur = frontier.pop()
        for g in universe:
            if g.root in out or g.root == tau.root:
                continue
            if immediate_j_dependent(tree, g, cur) is not None:
                out[g.root] = g
                frontier.append(g)
    return [out[r] for r in sorted(out)]


def family(tree: TermTree, tau: Tile,
           universe: list[Tile] | None = None) -> list[Tile]:
    """tau plus every tile in the same family: one a dependent of the
    other, or both dependents of a common tile."""
    universe = universe if universe is not None else simple_tiles(tree)
    fam: dict[int, Tile] = {tau.root: tau}
    for g in dependents(tree, tau, universe):
        fam[g.root] = g
    for g in universe:
        deps_g = {x.root for x in dependents(tree, g, universe)}
        if tau.root in deps_g:
            fam[g.root] = g
            for m in universe:
                if m.root in deps_g:
                    fam[m.root] = m
    return [fam[r] for r in sorted(fam)]


def family_roots(tree: TermTree, tau: Tile) -> set[int]:
    return {g.root for g in family(tree, tau)}


def dependent_variables(tree: TermTree, tau: Tile) -> set[str]:
    """Variables heading tiles that are dependents of tau; the exempt set
    for table similarity `~_tau`."""
    out: set[str] = set()
    # lambda nodes whose binders start dependent chains: tau's own binders
    frontier: list[int] = [n for n in tau.nodes if tree.is_lambda(n)]
    seen: set[int] = set()
    while frontier:
        ln = frontier.pop()
        if ln in seen:
            continue
        seen.add(ln)
        lab = tree.label(ln)
        assert isinstance(lab, LamLabel)
        for name, _ in lab.binders:
            if name in out:
                continue
            out.add(name)
            for occ, olab in tree.labels.items():
                if isinstance(olab, VarLabel) and olab.name == name:
                    frontier.extend(tree.succ(occ))
    return out


# ---------------------------------------------------------------------------
# equivalence, classification


def tile_key(tree: TermTree, tile: Tile):
    """Canonical shape of a tile: bound variables numbered in preorder,
    free variables and constants literal, leaves as typed holes."""
    index: dict[str, int] = {}

    def go(nid: int):
        lab = tree.label(nid)
        if isinstance(lab, LamLabel):
            if nid in tile.leaves:
                return ("hole", tuple(ty for _, ty in lab.binders))
            for n, _ in lab.binders:
                index[n] = len(index)
            return ("lam", tuple(ty for _, ty in lab.binders),
                    go(tree.succ(nid)[0]))
        if isinstance(lab, VarLabel):
            head = ("bv", index[lab.name]) if lab.name in index else ("fv", lab.name)
        else:
            head = ("c", lab.name)
        return (head, tuple(go(k) for k in tree.succ(nid)))

    return go(tile.root)


def tile_equiv(tree: TermTree, t1: Tile, t2: Tile) -> bool:
    """Basic tiles with a free variable are equivalent when alpha-equal
    with the same free variable."""
    if not (is_basic(tree, t1) and is_basic(tree, t2)):
        return False
    if constant_occurrences(tree, t1) or constant_occurrences(tree, t2):
        return False
    return tile_key(tree, t1) == tile_key(tree, t2)


def matching_tile_at(tree: TermTree, root: int, tile: Tile) -> Optional[Tile]:
    """Grow a tile rooted at `root` mirroring the composition structure of
    `tile` (same leaf/compose pattern), if the tree shape allows it."""

    def mirror(nt: int, nc: int):
        kt, kc = tree.succ(nt), tree.succ(nc)
        if len(kt) != len(kc):
            return None
        nodes = {nc}
        leaves: list[int] = []
        for lt, lc in zip(kt, kc):
            nodes.add(lc)
            if lt in tile.leaves:
                leaves.append(lc)
            else:
                if not tree.succ(lc):
                    return None
                sub = mirror(tree.succ(lt)[0], tree.succ(lc)[0])
                if sub is None:
                    return None
                nodes |= set(sub.nodes)
                leaves.extend(sub.leaves)
        return Tile(nc, tuple(sorted(leaves)), frozenset(nodes))

    return mirror(tile.root, root)


def is_embedded(tree: TermTree, tile: Tile,
                universe: list[Tile] | None = None) -> bool:
    """Embedded: an equivalent tile occurs above it in the tree."""
    if not is_basic(tree, tile) or constant_occurrences(tree, tile):
        return False
    if tile.is_simple:
        universe = universe if universe is not None else simple_tiles(tree)
        return any(g.root != tile.root and is_below(tree, tile, g)
                   and tile_equiv(tree, g, tile) for g in universe)
    nid = tree.parent[tile.root]
    while nid is not None:
        if not tree.is_lambda(nid):
            cand = matching_tile_at(tree, nid, tile)
            if cand is not None and is_below(tree, tile, cand) and \
                    tile_equiv(tree, cand, tile):
                return True
        nid = tree.parent[nid]
    return False


def _constant_tile_roots(tree: TermTree) -> set[int]:
    universe = simple_tiles(tree)
    direct = [t for t in universe if constant_occurrences(tree, t)]
    roots = {t.root for t in direct}
    for t in direct:
        for g in dependents(tree, t, universe):
            roots.add(g.root)
    return roots


def level_of(tree: TermTree, tile: Tile) -> Optional[int]:
    """Level of a non-constant tile: 1 for top tiles, else one more than
    the tile binding its free variable."""
    const_roots = _constant_tile_roots(tree)

    def go(t: Tile, seen: frozenset[int]) -> Optional[int]:
        if t.root in const_roots:
            return None
        occs = free_var_occurrences(tree, t)
        if not occs:
            return None
        binder = tree.binder_node
        levels = []
        for occ in occs:
            name = tree.label(occ).name
            bn = binder.get(name)
            if bn == tree.root:
                levels.append(1)
                continue
            if bn is None or bn in seen:
                return None
            parent_head = tree.parent[bn]
            up = go(simple_tile(tree, parent_head), seen | {t.root})
            if up is None:
                return None
            levels.append(up + 1)
        return max(levels)

    return go(tile, frozenset())


def classify(tree: TermTree, tile: Tile) -> TileClass:
    binder = tree.binder_node
    const_roots = _constant_tile_roots(tree)
    basic = is_basic(tree, tile)
    top = any(binder.get(tree.label(o).name) == tree.root
              for o in free_var_occurrences(tree, tile))
    is_const = tile.root in const_roots or bool(constant_occurrences(tree, tile))
    universe = simple_tiles(tree)
    j_end = set()
    for j in range(1, len(tile.leaves) + 1):
        if not any(immediate_j_dependent(tree, g, tile) == j for g in universe
                   if g.root not in tile.nodes):
            j_end.add(j)
    return TileClass(
        is_basic=basic,
        is_top=top,
        is_constant=is_const,
        j_end=j_end,
        is_end=len(j_end) == len(tile.leaves),
        is_embedded=is_embedded(tree, tile, universe),
        level=None if is_const else level_of(tree, tile),
    )


# ---------------------------------------------------------------------------
# plays on tiles


def _parents(play: Play, tree: TermTree) -> dict[int, int]:
    return {j: parent_of(play, j, tree) for j in range(2, len(play))}


def plays_on(play: Play, tree: TermTree, tile: Tile,
             parents: dict[int, int] | None = None) -> list[tuple[int, int, int]]:
    """All plays (i, j, m) on the tile: from its root at position i to
    its m-th atomic leaf at position j, with position j a child of the
    segment starts, chained through the tile for composite tiles."""
    parents = parents if parents is not None else _parents(play, tree)
    n = len(play)
    by_node: dict[int, list[int]] = {}
    for idx in range(1, n + 1):
        by_node.setdefault(play.pos(idx).node, []).append(idx)

    def simple_plays_from(i: int, head: int, leaf: int) -> list[int]:
        return [j for j in by_node.get(leaf, ())
                if i < j < n and parents.get(j) == i]

    out = []
    for m, chain in enumerate(tile_paths(tree, tile), start=1):
        def chase(i: int, seg: int) -> list[int]:
            head, leaf = chain[seg]
            ends = []
            for j in simple_plays_from(i, head, leaf):
                if seg + 1 == len(chain):
                    ends.append(j)
                elif j + 1 <= n and play.pos(j + 1).node == chain[seg + 1][0]:
                    ends.extend(chase(j + 1, seg + 1))
            return ends

        for i in by_node.get(tile.root, ()):
            if i >= n:
                continue
            for j in chase(i, 0):
                out.append((i, j, m))
    out.sort()
    return out


def shortest_play_from(play: Play, tree: TermTree, tile: Tile, i: int,
                       parents=None) -> Optional[tuple[int, int]]:
    """The shortest play (j, m) on the tile from position i, if any."""
    all_plays = plays_on(play, tree, tile, parents)
    cands = [(j, m) for (i0, j, m) in all_plays if i0 == i]
    return min(cands) if cands else None


def shortest_j_play_from(play: Play, tree: TermTree, tile: Tile, i: int,
                         leaf_m: int, parents=None) -> Optional[int]:
    all_plays = plays_on(play, tree, tile, parents)
    cands = [j for (i0, j, m) in all_plays if i0 == i and m == leaf_m]
    return min(cands) if cands else None


def is_internal(play: Play, tile: Tile, i: int, j: int) -> bool:
    return all(play.pos(k).node in tile.nodes for k in range(i, j + 1))


def is_j_directed(tree: TermTree, prob: Problem, tile: Tile, leaf_m: int,
                  plays: list[Play] | None = None,
                  budget: int = G.DEFAULT_BUDGET) -> bool:
    """Every time a play visits the tile's root it opens a shortest
    ri play to leaf `leaf_m`, recursively along the play."""
    if plays is None:
        plays = [p for ps in G.all_plays(tree, prob, budget) for p in ps]
    for play in plays:
        parents = _parents(play, tree)
        start = 1
        n = len(play)
        while True:
            first = None
            for idx in range(start, n + 1):
                if play.pos(idx).node == tile.root:
                    first = idx
                    break
            if first is None:
                break
            j_end = shortest_j_play_from(play, tree, tile, first, leaf_m,
                                         parents)
            if j_end is None or not is_ri(play, first, j_end):
                return False
            start = j_end + 1
    return True


# ---------------------------------------------------------------------------
# p-partition


@dataclass
class Stage:
    k: int
    tile: Tile
    i: int
    j: int
    parent_leaf: Optional[int]      # lambda node the stage hangs beneath
    parent_stage: Optional[int]     # stage number owning that leaf (0 = root)
    ri: bool
    final: bool
    end_node: Optional[int]         # node of position j (the leaf reached)


@dataclass
class PPartition:
    play: Play
    stages: list[Stage]
    tags: dict[int, int]            # position -> stage occurrence tag
    corr: dict[int, int]            # replayed position -> earlier position


def _table_descendent(play: Play, tree: TermTree, parents: dict[int, int],
                      p: int, lprime: int) -> bool:
    """Is p reachable from lprime by a child chain whose first step (the
    child of lprime itself) is an A3 or C4 child?"""
    n = len(play)
    while p > lprime:
        if p >= n:
            return False
        pa = parents.get(p)
        if pa is None:
            return False
        if pa == lprime:
            return play.pos(p).move in ("A3", "C4")
        p = pa
    return False


def p_partition(play: Play, tree: TermTree, prob: Problem) -> PPartition:
    """Staged decomposition of a play into intervals on simple tiles with
    control edges, valid at every order."""
    n = len(play)
    parents = _parents(play, tree)
    fam_cache: dict[int, set[int]] = {}

    def fam_roots(root: int) -> set[int]:
        if root not in fam_cache:
            fam_cache[root] = family_roots(tree, simple_tile(tree, root))
        return fam_cache[root]

    depvar_cache: dict[int, set[str]] = {}

    def dep_vars(root: int) -> set[str]:
        if root not in depvar_cache:
            depvar_cache[root] = dependent_variables(tree, simple_tile(tree, root))
        return depvar_cache[root]

    by_node: dict[int, list[int]] = {}
    for idx in range(1, n + 1):
        by_node.setdefault(play.pos(idx).node, []).append(idx)

    tags: dict[int, int] = {1: 0}
    corr: dict[int, int] = {}
    boundary: set[int] = set()

    def assign_tags(upto: int):
        for p in range(max(tags) + 1, upto + 1):
            pos = play.pos(p)
            if p in boundary:
                continue  # set by the stage loop
            if pos.move in ("B1", "C2", "C1", "C3"):
                tags[p] = tags[p - 1]
            elif pos.move == "C4":
                tags[p] = tags[parents[p]]
            else:  # A1 / A2 / A3 descents from a paired lambda
                prev = p - 1
                assert prev in corr, f"untracked lambda position {prev}"
                tags[p] = tags[corr[prev] + 1]

    stages: list[Stage] = []
    j_prev = 1
    while j_prev < n:
        k = len(stages) + 1
        i_k = j_prev + 1
        boundary.add(i_k)
        tags[i_k] = k
        tile_k = simple_tile(tree, play.pos(i_k).node)
        k_fam = fam_roots(tile_k.root)
        parent_leaf = play.pos(j_prev).node if k > 1 else None
        parent_stage = tags[j_prev] if k > 1 else None
        j = i_k
        while True:
            while j != n and not tree.is_lambda(play.pos(j).node):
                assign_tags(j + 1)
                j += 1
            if j == n:
                break
            if tags[j] == k:  # an atomic leaf of the current stage's tile
                break
            node_j = play.pos(j).node
            best: Optional[tuple[int, int]] = None  # (h, j')
            for j2 in reversed([x for x in by_node.get(node_j, ()) if x < j]):
                try:
                    _, l, l2, vroot = G.vary_at(play, j, j2, tree)
                except G.GameError:
                    continue
                if vroot not in k_fam:
                    continue
                theta_a = play.pos(j + 1).theta
                theta_b = play.pos(j2 + 1).theta
                if not similar_except(theta_a, theta_b, dep_vars(vroot)):
                    continue
                h = 0
                while True:
                    cand = h + 1
                    if j + cand >= n or j2 + cand >= n:
                        break
                    if not _pair_corresponds(play, j + cand, j2 + cand):
                        break
                    if h >= 1 and _table_descendent(play, tree, parents,
                                                   j2 + h, l2):
                        break
                    h = cand
                if best is None or h > best[0]:
                    best = (h, j2)
            if best is None:
                break
            h, j2 = best
            for d in range(0, h + 1):
                corr[j + d] = j2 + d
            assign_tags(j + h + 1)
            j = j + h + 1
        j_k = j
        final = j_k == n
        stages.append(Stage(
            k=k, tile=tile_k, i=i_k, j=j_k,
            parent_leaf=parent_leaf, parent_stage=parent_stage,
            ri=is_ri(play, i_k, j_k),
            final=final,
            end_node=play.pos(j_k).node,
        ))
        j_prev = j_k
    return PPartition(play, stages, tags, corr)


def _pair_corresponds(play: Play, a: int, b: int) -> bool:
    return correspond(play, a, a, b, b)
