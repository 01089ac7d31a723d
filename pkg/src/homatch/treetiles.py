"""The tree of tiles: merged p-partitions of all plays, unfolding, the
subterm property, and extraction back to a term.

Occurrences are keyed by stage and shared play prefix, not by node
address, because the same simple tile can occur at several stages.  An
unfold replaces a dependent tile by the composition of its binder tile
above it, re-targeting later edges; the companion plays keep their stage
structure, so special flags carry over, and the result is re-validated
against the structural conditions for a tree with associated plays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from . import game as G
from . import tiles as TL
from .problem import Problem
from .terms import (
    Abs,
    App,
    Const,
    ConstLabel,
    LamLabel,
    SimpleType,
    Term,
    TermTree,
    Var,
    VarLabel,
    app,
)


class NotUnfoldable(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SubtermPropertyFailure(Exception):
    def __init__(self, a: int, b: int):
        super().__init__(f"occurrences {a} and {b} must merge but differ "
                         "syntactically")
        self.witness = (a, b)


class ValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# tile syntax: a term region with open lambda leaves


@dataclass(frozen=True)
class TSlot:
    """One argument slot of a tile node: a lambda (binders) that is either
    an open leaf (key set, inner None) or filled with a subnode."""

    binders: tuple[tuple[str, SimpleType], ...]
    key: Optional[int]            # stable leaf key when open
    inner: Optional["TNode"]      # subnode when filled

    @property
    def is_open(self) -> bool:
        return self.inner is None


@dataclass(frozen=True)
class TNode:
    head: str
    is_const: bool
    head_ty: SimpleType
    slots: tuple[TSlot, ...]


def tsyntax_of_tile(tree: TermTree, tile: TL.Tile) -> TNode:
    def build(nid: int) -> TNode:
        lab = tree.label(nid)
        assert not isinstance(lab, LamLabel)
        slots = []
        for kid in tree.succ(nid):
            klab = tree.label(kid)
            assert isinstance(klab, LamLabel)
            if kid in tile.leaves:
                slots.append(TSlot(klab.binders, kid, None))
            else:
                slots.append(TSlot(klab.binders, None, build(tree.succ(kid)[0])))
        return TNode(lab.name, isinstance(lab, ConstLabel), lab.ty, tuple(slots))

    return build(tile.root)


def open_leaves(node: TNode) -> list[TSlot]:
    out = []
    for s in node.slots:
        if s.is_open:
            out.append(s)
        else:
            out.extend(open_leaves(s.inner))
    return out


def leaf_keys(node: TNode) -> list[int]:
    return [s.key for s in open_leaves(node)]


def fill_leaf(node: TNode, key: int, sub: TNode) -> TNode:
    """Compose `sub` beneath the open leaf with the given key."""

    def go(n: TNode) -> TNode:
        slots = []
        for s in n.slots:
            if s.is_open and s.key == key:
                slots.append(TSlot(s.binders, None, sub))
            elif s.is_open:
                slots.append(s)
            else:
                slots.append(TSlot(s.binders, None, go(s.inner)))
        return TNode(n.head, n.is_const, n.head_ty, tuple(slots))

    return go(node)


def tsyntax_key(node: TNode):
    """Alpha-canonical value: bound names numbered in preorder, free
    variables and constants literal, leaves typed holes."""
    index: dict[str, int] = {}

    def go(n: TNode):
        head = (("c", n.head) if n.is_const else
                ("bv", index[n.head]) if n.head in index else ("fv", n.head))
        parts = []
        for s in n.slots:
            tys = tuple(ty for _, ty in s.binders)
            if s.is_open:
                parts.append(("hole", tys))
            else:
                for b, _ in s.binders:
                    index[b] = len(index)
                parts.append(("lam", tys, go(s.inner)))
        return (head, tuple(parts))

    return go(node)


def tsyntax_str(node: TNode) -> str:
    def lam(s: TSlot) -> str:
        bs = "\\" + " ".join(n for n, _ in s.binders) if s.binders else "\\"
        if s.is_open:
            return bs
        return f"{bs}.{go(s.inner)}"

    def go(n: TNode) -> str:
        if not n.slots:
            return n.head
        return f"{n.head}(" + ",".join(lam(s) for s in n.slots) + ")"

    return go(node)


def binders_in(node: TNode) -> set[str]:
    out: set[str] = set()

    def go(n: TNode):
        for s in n.slots:
            out.update(b for b, _ in s.binders)
            if not s.is_open:
                go(s.inner)

    go(node)
    return out


def head_free_var(node: TNode) -> Optional[str]:
    return None if node.is_const else node.head


def contains_const(node: TNode) -> bool:
    if node.is_const:
        return True
    return any(not s.is_open and contains_const(s.inner) for s in node.slots)


# ---------------------------------------------------------------------------
# the tree of tiles


@dataclass
class Occurrence:
    oid: int
    stage: int                    # stage index shared by its plays
    syntax: TNode
    parent: Optional[tuple[int, int]]   # (parent oid, leaf key in parent)
    plays: set[int]
    nri: bool
    final: bool
    end_nodes: dict[int, Optional[int]]  # play -> end node of its interval
    interval: dict[int, tuple[int, int]]
    unfolded_from: Optional[int] = None  # oid of the tile that was unfolded
    companion_note: Optional[str] = None

    @property
    def keys(self) -> list[int]:
        return leaf_keys(self.syntax)


@dataclass
class TreeOfTiles:
    prob: Problem
    tree: TermTree
    root_binders: tuple[tuple[str, SimpleType], ...]
    occs: dict[int, Occurrence]
    play_stages: dict[int, list[int]]   # play id -> occurrence ids by stage
    next_oid: int = 0
    next_key: int = 0

    def fresh_key(self) -> int:
        # synthetic leaf keys live outside the node-id range of `tree`
        self.next_key += 1
        return -self.next_key

    def children_at(self, oid: int, key: int) -> list[int]:
        return [o.oid for o in self.occs.values()
                if o.parent == (oid, key)]

    def children_of(self, oid: int) -> list[int]:
        return [o.oid for o in self.occs.values()
                if o.parent is not None and o.parent[0] == oid]

    def path_of(self, oid: int) -> list[int]:
        """Occurrence ids from the root occurrence down to oid."""
        out = [oid]
        while self.occs[out[-1]].parent is not None:
            out.append(self.occs[out[-1]].parent[0])
        out.reverse()
        return out

    def binder_occurrence(self, name: str, oid: int) -> Optional[int]:
        """The occurrence on oid's path binding `name`, if any."""
        for anc in self.path_of(oid):
            if name in binders_in(self.occs[anc].syntax):
                return anc
        return None

    def is_dependent(self, m: int, k: int) -> bool:
        """Is occurrence m a (transitive) dependent of occurrence k?"""
        occ = self.occs[m]
        if k not in self.path_of(m)[:-1]:
            return False
        head = head_free_var(occ.syntax)
        if head is None:
            return False
        b = self.binder_occurrence(head, m)
        if b == k:
            return True
        if b is None or b == m:
            return False
        return self.is_dependent(b, k)

    def same_family(self, a: int, b: int) -> bool:
        if a == b or self.is_dependent(a, b) or self.is_dependent(b, a):
            return True
        for c in self.occs:
            if self.is_dependent(a, c) and self.is_dependent(b, c):
                return True
        return False

    def is_top(self, oid: int) -> bool:
        head = head_free_var(self.occs[oid].syntax)
        if head is None:
            return False
        return self.binder_occurrence(head, oid) is None and \
            head in {n for n, _ in self.root_binders}

    def is_embedded(self, oid: int) -> bool:
        occ = self.occs[oid]
        if occ.syntax.is_const or contains_const(occ.syntax):
            return False
        key = tsyntax_key(occ.syntax)
        return any(tsyntax_key(self.occs[a].syntax) == key
                   for a in self.path_of(oid)[:-1])

    def level(self, oid: int) -> Optional[int]:
        occ = self.occs[oid]
        if contains_const(occ.syntax):
            return None
        head = head_free_var(occ.syntax)
        if head is None:
            return None
        b = self.binder_occurrence(head, oid)
        if b is None:
            return 1 if self.is_top(oid) else None
        up = self.level(b)
        return None if up is None else up + 1

    def later_same_family(self, oid: int) -> list[int]:
        """Occurrences at later stages of plays through oid, in its
        family."""
        out = []
        for pid in self.occs[oid].plays:
            seq = self.play_stages[pid]
            idx = seq.index(oid)
            for later in seq[idx + 1:]:
                if later != oid and self.same_family(later, oid):
                    out.append(later)
        return sorted(set(out))


def tree_of_tiles(tree: TermTree, prob: Problem,
                  plays: list[G.Play] | None = None,
                  budget: int = G.DEFAULT_BUDGET) -> TreeOfTiles:
    """Merge the p-partitions of all plays into one tree of tiles."""
    if plays is None:
        plays = [p for ps in G.all_plays(tree, prob, budget) for p in ps]
    partitions = [TL.p_partition(p, tree, prob) for p in plays]

    root_lab = tree.label(tree.root)
    assert isinstance(root_lab, LamLabel)
    T = TreeOfTiles(prob, tree, root_lab.binders, {}, {})
    T.play_stages = {pid: [] for pid in range(len(plays))}

    # group plays stage by stage on shared prefixes
    def build(group: list[int], stage: int, parent: Optional[tuple[int, int]]):
        sub: dict[tuple, list[int]] = {}
        for pid in group:
            stages = partitions[pid].stages
            if stage - 1 >= len(stages):
                continue
            st = stages[stage - 1]
            sub.setdefault((st.tile.root,), []).append(pid)
        for (_,), pids in sub.items():
            st0 = partitions[pids[0]].stages[stage - 1]
            oid = T.next_oid
            T.next_oid += 1
            occ = Occurrence(
                oid=oid,
                stage=stage,
                syntax=tsyntax_of_tile(tree, st0.tile),
                parent=parent,
                plays=set(pids),
                nri=False,
                final=False,
                end_nodes={},
                interval={},
            )
            for pid in pids:
                st = partitions[pid].stages[stage - 1]
                occ.interval[pid] = (st.i, st.j)
                occ.end_nodes[pid] = st.end_node if not st.final else None
                rt_i = G.right_term(plays[pid].pos(st.i).state)
                rt_j = G.right_term(plays[pid].pos(st.j).state)
                if rt_j is not None and rt_i != rt_j:
                    occ.nri = True
                if st.final:
                    occ.final = True
                T.play_stages[pid].append(oid)
            T.occs[oid] = occ
            # children: group further by the leaf each play continues at
            by_leaf: dict[int, list[int]] = {}
            for pid in pids:
                stages = partitions[pid].stages
                if stage < len(stages):
                    nxt = stages[stage]
                    by_leaf.setdefault(nxt.parent_leaf, []).append(pid)
            for leaf, pids2 in by_leaf.items():
                # the leaf must belong to an occurrence on this play's
                # path; by construction it is the p-partition's edge
                target_stage = partitions[pids2[0]].stages[stage].parent_stage
                target_oid = T.play_stages[pids2[0]][target_stage - 1]
                build(pids2, stage + 1, (target_oid, leaf))

    build(list(range(len(plays))), 1, None)
    return T


def mark_special(T: TreeOfTiles) -> dict[int, dict[str, bool]]:
    """Per occurrence: nri / final / separator and the derived special
    and x-special flags."""
    out = {}
    for oid, occ in T.occs.items():
        ends = {occ.end_nodes[p] for p in occ.plays}
        separator = len({e for e in ends if e is not None}) > 1
        x_special = occ.nri or occ.final
        out[oid] = dict(
            nri=occ.nri,
            final=occ.final,
            separator=separator,
            x_special=x_special,
            special=x_special or separator,
        )
    return out


# ---------------------------------------------------------------------------
# unfolding


def unfoldable_at(T: TreeOfTiles, k: int, m: int) -> bool:
    try:
        _check_unfoldable(T, k, m)
        return True
    except NotUnfoldable:
        return False


def _check_unfoldable(T: TreeOfTiles, k: int, m: int):
    if k not in T.occs or m not in T.occs:
        raise NotUnfoldable("no such occurrence")
    if not (T.is_top(k) or T.is_embedded(k)):
        raise NotUnfoldable(f"occurrence {k} is neither top nor embedded")
    if not T.is_dependent(m, k):
        raise NotUnfoldable(f"occurrence {m} is not a dependent of {k}")
    # m must be the first dependent after k along its plays
    for pid in T.occs[m].plays:
        seq = T.play_stages[pid]
        if k not in seq:
            raise NotUnfoldable(f"play {pid} does not pass through {k}")
        for mid in seq[seq.index(k) + 1:seq.index(m)]:
            if T.is_dependent(mid, k):
                raise NotUnfoldable(
                    f"occurrence {mid} is an earlier dependent of {k}")
    specials = mark_special(T)
    if specials[k]["x_special"]:
        raise NotUnfoldable(f"occurrence {k} is x-special")
    for later in T.later_same_family(k):
        if specials[later]["x_special"]:
            raise NotUnfoldable(
                f"later family occurrence {later} is x-special")
    _unfold_leaf(T, k, m)  # raises if the stage-(k+1) edge is not into k


def _unfold_leaf(T: TreeOfTiles, k: int, m: int) -> int:
    """The leaf of k beneath which plays through m continue after k."""
    leaves = set()
    for pid in T.occs[m].plays:
        seq = T.play_stages[pid]
        nxt = seq[seq.index(k) + 1]
        par = T.occs[nxt].parent
        if par is None or par[0] != k:
            raise NotUnfoldable(
                f"stage after {k} does not continue beneath a leaf of {k}")
        leaves.add(par[1])
    if len(leaves) != 1:
        raise NotUnfoldable(f"plays continue beneath different leaves of {k}")
    return leaves.pop()


def unfold(T: TreeOfTiles, k: int, m: int) -> TreeOfTiles:
    """The unfolding of occurrence k at its first dependent m: m's tile is
    replaced by k's tile with m composed beneath the continuation leaf;
    edges from occurrences at or below m into k's leaves are re-targeted
    to the copies in the new tile."""
    _check_unfoldable(T, k, m)
    lam_key = _unfold_leaf(T, k, m)

    import copy
    T2 = TreeOfTiles(T.prob, T.tree, T.root_binders,
                     {oid: copy.copy(o) for oid, o in T.occs.items()},
                     {p: list(s) for p, s in T.play_stages.items()},
                     T.next_oid, T.next_key)
    for o in T2.occs.values():
        o.end_nodes = dict(o.end_nodes)
        o.interval = dict(o.interval)

    occ_k = T2.occs[k]
    occ_m = T2.occs[m]

    # copy k's syntax with fresh leaf keys except the continuation leaf,
    # which gets filled with m's tile
    key_map: dict[int, int] = {}

    def recopy(n: TNode) -> TNode:
        slots = []
        for s in n.slots:
            if s.is_open and s.key == lam_key:
                slots.append(TSlot(s.binders, None, occ_m.syntax))
            elif s.is_open:
                nk = T2.fresh_key()
                key_map[s.key] = nk
                slots.append(TSlot(s.binders, nk, None))
            else:
                slots.append(TSlot(s.binders, None, recopy(s.inner)))
        return TNode(n.head, n.is_const, n.head_ty, tuple(slots))

    occ_m.syntax = recopy(occ_k.syntax)
    occ_m.unfolded_from = k
    occ_m.companion_note = (
        f"stage interval gains a prefix corresponding to the interval on "
        f"occurrence {k}; later jumps into {k} land in the copy")

    # re-target edges: occurrences whose previous stage is m or below m and
    # whose parent is a leaf of k move to the corresponding copied leaf
    for c in list(T2.occs.values()):
        if c.parent is None or c.parent[0] != k:
            continue
        retarget = False
        for pid in c.plays:
            seq = T2.play_stages[pid]
            idx = seq.index(c.oid)
            prev = seq[idx - 1] if idx > 0 else None
            if prev is not None and (prev == m or m in T2.path_of(prev)):
                retarget = True
        if retarget and c.parent[1] in key_map:
            c.parent = (m, key_map[c.parent[1]])
    # plays through m: their stage-end leaves at k's leaves move likewise
    for o in T2.occs.values():
        for pid, end in list(o.end_nodes.items()):
            if end in key_map and pid in T2.occs[m].plays and \
                    m in T2.path_of(o.oid) + [o.oid] and o.oid != k:
                o.end_nodes[pid] = key_map[end]
    return T2


def validate_associated_plays(T: TreeOfTiles) -> list[str]:
    """Check the structural conditions for a tree of basic tiles with
    associated plays; returns human-readable violations."""
    problems: list[str] = []
    for pid, seq in T.play_stages.items():
        for idx, oid in enumerate(seq):
            occ = T.occs[oid]
            if idx == 0:
                if occ.parent is not None:
                    problems.append(f"play {pid}: stage 1 has a parent")
                continue
            par = occ.parent
            if par is None:
                problems.append(f"play {pid}: stage {idx + 1} unrooted")
                continue
            if par[0] not in seq[:idx]:
                problems.append(
                    f"play {pid}: stage {idx + 1} hangs beneath an occurrence "
                    f"not earlier in the play")
            prev = T.occs[seq[idx - 1]]
            prev_top_or_const = contains_const(prev.syntax) or \
                T.is_top(seq[idx - 1])
            if prev_top_or_const and par[0] != seq[idx - 1]:
                problems.append(
                    f"play {pid}: stage {idx} is top/constant but stage "
                    f"{idx + 1} does not continue beneath it")
            prev_ri = not prev.nri and not prev.final
            if prev_ri and not T.same_family(par[0], seq[idx - 1]):
                problems.append(
                    f"play {pid}: ri stage {idx} followed outside its family")
            if prev_ri and T.is_embedded(seq[idx - 1]) and par[0] != seq[idx - 1]:
                problems.append(
                    f"play {pid}: ri stage {idx} on an embedded tile not "
                    f"followed beneath itself")
            if prev_ri:
                path_pairs = set()
                cur = seq[idx - 1]
                while T.occs[cur].parent is not None:
                    path_pairs.add(T.occs[cur].parent)
                    cur = T.occs[cur].parent[0]
                if par in path_pairs:
                    problems.append(
                        f"play {pid}: ri stage {idx} edge re-enters its own "
                        f"path")
    return problems


# ---------------------------------------------------------------------------
# subterm property and extraction


def subterm_property(T: TreeOfTiles) -> bool:
    try:
        _congruence(T)
        return True
    except SubtermPropertyFailure:
        return False


def _congruence(T: TreeOfTiles) -> dict[int, int]:
    """Smallest equivalence forced by shared-leaf children; fails when it
    would identify syntactically different tiles."""
    rep = {oid: oid for oid in T.occs}

    def find(x: int) -> int:
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    keys = {oid: tsyntax_key(o.syntax) for oid, o in T.occs.items()}
    pending: list[tuple[int, int]] = []
    for oid, occ in T.occs.items():
        for key in occ.keys:
            kids = T.children_at(oid, key)
            pending.extend(zip(kids, kids[1:]))

    def union(a: int, b: int):
        ra, rb = find(a), find(b)
        if ra == rb:
            return
        if keys[ra] != keys[rb]:
            raise SubtermPropertyFailure(ra, rb)
        rep[rb] = ra
        # children at corresponding leaves must merge too
        ka = T.occs[ra].keys
        kb = T.occs[rb].keys
        for la, lb in zip(ka, kb):
            for ca in T.children_at(ra, la):
                for cb in T.children_at(rb, lb):
                    pending.append((ca, cb))

    while pending:
        a, b = pending.pop()
        union(a, b)
    return {oid: find(oid) for oid in T.occs}


def extract(T: TreeOfTiles, prob: Problem | None = None) -> Term:
    """Read the tree of tiles back as a closed term: edges become the
    subtree relation, the initial lambda goes on top, and open leaves are
    filled with the ground constant d."""
    prob = prob or T.prob
    classes = _congruence(T)
    roots = {classes[T.play_stages[pid][0]] for pid in T.play_stages
             if T.play_stages[pid]}
    if len(roots) != 1:
        raise ValidationFailure("plays do not share the initial tile")
    root = roots.pop()

    members: dict[int, list[int]] = {}
    for oid, c in classes.items():
        members.setdefault(c, []).append(oid)

    fresh = itertools.count()

    def build(cls: int, depth: int, ren: dict[str, str]) -> Term:
        if depth > 4 * len(T.occs) + 16:
            raise ValidationFailure("edge relation is not tree-like")
        occ = T.occs[cls]

        def node_term(n: TNode, ren: dict[str, str]) -> Term:
            head: Term = (Const(n.head, n.head_ty) if n.is_const
                          else Var(ren.get(n.head, n.head)))
            args = []
            lk = leaf_keys(n)
            for s in n.slots:
                ren2 = dict(ren)
                binders = []
                for b, ty in s.binders:
                    nb = f"{b}~{next(fresh)}"
                    ren2[b] = nb
                    binders.append((nb, ty))
                if s.is_open:
                    kids = []
                    for m in members[cls]:
                        # the member's leaf at the same index
                        mk = T.occs[m].keys[lk.index(s.key)]
                        kids.extend(T.children_at(m, mk))
                    kid_classes = {classes[c] for c in kids}
                    if len(kid_classes) > 1:
                        raise ValidationFailure(
                            f"leaf has incompatible children {kid_classes}")
                    if kid_classes:
                        body = build(kid_classes.pop(), depth + 1, ren2)
                    else:
                        body = Const(prob.d.name, prob.d.ty)
                else:
                    body = node_term(s.inner, ren2)
                args.append(Abs(tuple(binders), body) if binders else body)
            return app(head, args) if args else head

        return node_term(occ.syntax, ren)

    ren0 = {}
    binders0 = []
    for b, ty in T.root_binders:
        nb = f"{b}~{next(fresh)}"
        ren0[b] = nb
        binders0.append((nb, ty))
    body = build(root, 0, ren0)
    term = Abs(tuple(binders0), body) if binders0 else body
    from .terms import freshen

    return freshen(term)


# ---------------------------------------------------------------------------
# saturation


def _unfold_candidates(T: TreeOfTiles) -> list[tuple[int, int]]:
    out = []
    for k in T.occs:
        if not (T.is_top(k) or T.is_embedded(k)):
            continue
        # first dependent per shared play order
        for pid in sorted(T.occs[k].plays):
            seq = T.play_stages[pid]
            idx = seq.index(k)
            for m in seq[idx + 1:]:
                if T.is_dependent(m, k):
                    if unfoldable_at(T, k, m):
                        out.append((k, m))
                    break
    return sorted(set(out))


def saturate_unfolding(T: TreeOfTiles, max_steps: int = 200,
                       excluded: set[int] | None = None,
                       max_exclusions: int | None = None) -> TreeOfTiles:
    """Repeat: unfold a highest-level unfoldable tile closest to the root,
    until none remain.  When the result lacks the subterm property, the
    binder tile of a failing unfolded occurrence is excluded and the
    whole sequence restarts (bounded); the last property-satisfying tree
    wins if the bound is hit."""
    excluded = set(excluded or ())
    if max_exclusions is None:
        max_exclusions = 8 * len(T.occs) + 8
    best = T if subterm_property(T) else None

    for _attempt in range(max_exclusions + 1):
        cur = T
        for _step in range(max_steps):
            cands = [(k, m) for (k, m) in _unfold_candidates(cur)
                     if k not in excluded]
            if not cands:
                break
            def rank(km):
                k, _ = km
                lvl = cur.level(k) or 0
                return (-lvl, len(cur.path_of(k)), k)
            k, m = min(cands, key=rank)
            cur = unfold(cur, k, m)
        try:
            _congruence(cur)
            return cur
        except SubtermPropertyFailure as e:
            a, b = e.witness
            culprit = None
            for oid in (a, b):
                if cur.occs[oid].unfolded_from is not None:
                    culprit = cur.occs[oid].unfolded_from
                    break
            if culprit is None or culprit in excluded:
                break
            excluded.add(culprit)
    if best is not None:
        return best
    raise ValidationFailure("no unfolding order satisfies the subterm "
                            "property")
