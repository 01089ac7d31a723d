"""The tree-checking game G(t, P).

One player, the refuter, walks the candidate term tree carrying a state
(left terms applied to the current subtree, and the right term still to
be matched) plus two nested look-up tables: theta sends tree variables to
left terms, xi sends left-term variables to tree nodes.  Table entries
record the position index at which they were created; those indices
drive the child / descendent relations used by all later analyses.

Moves follow the label at the current node:

  A (lambda):   bind the state's left terms into theta, descend; then
                A1 at a ground constant decides the play, A2 at a higher
                constant keeps or refutes the right term, A3 at a
                variable calls its theta entry.
  B1 (constant): the refuter picks an argument direction of the right
                term; forbidden constants replace its bound variables.
  C (variable): bind the left term's binders into xi, then by the head
                of the left term: C1 ground constant decides, C2 bare
                forbidden constant branches like B1, C3 constant-headed
                application steps into an argument (stationary), C4 head
                variable jumps to the node stored in xi.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from . import terms as T
from .problem import Metrics, Problem
from .terms import (
    Abs,
    App,
    Const,
    ConstLabel,
    LamLabel,
    Term,
    TermTree,
    Var,
    VarLabel,
    subst_consts,
)


class GameError(Exception):
    pass


class ArityMismatch(GameError):
    pass


class IllegalChoice(GameError):
    def __init__(self, d, k):
        super().__init__(f"choice {d} out of range 1..{k}")


class BudgetExceeded(GameError):
    """A play outran the step budget; the theorem guarantees termination,
    so this signals an engine bug (or an absurdly small budget)."""

    def __init__(self, partial):
        super().__init__(f"step budget exceeded after {len(partial)} positions")
        self.partial = partial


# ---------------------------------------------------------------------------
# states and tables


@dataclass(frozen=True)
class ArgumentState:
    lefts: tuple[Term, ...]
    right: Term


@dataclass(frozen=True)
class ValueState:
    left: Term
    right: Term


@dataclass(frozen=True)
class EmptyState:
    right: Term


@dataclass(frozen=True)
class FinalState:
    forall_wins: bool  # True: q[A] (refuter wins), False: q[E]


State = ArgumentState | ValueState | EmptyState | FinalState


def right_term(state: State) -> Optional[Term]:
    if isinstance(state, FinalState):
        return None
    return state.right


def state_str(state: State) -> str:
    if isinstance(state, ArgumentState):
        inner = ",".join(T.term_str(l) for l in state.lefts)
        return f"q[({inner}), {T.term_str(state.right)}]"
    if isinstance(state, ValueState):
        return f"q[{T.term_str(state.left)}, {T.term_str(state.right)}]"
    if isinstance(state, EmptyState):
        return f"q[-, {T.term_str(state.right)}]"
    return "q[A]" if state.forall_wins else "q[E]"


@dataclass(frozen=True)
class ThetaEntry:
    left: Term
    xi: "Table"
    pos: int


@dataclass(frozen=True)
class XiEntry:
    node: int
    theta: "Table"
    pos: int


class Table:
    """Immutable look-up table; updates produce copies sharing entries."""

    __slots__ = ("entries",)

    def __init__(self, entries: dict | None = None):
        self.entries = entries or {}

    def get(self, name: str):
        return self.entries.get(name)

    def updated(self, new: dict) -> "Table":
        if not new:
            return self
        merged = dict(self.entries)
        merged.update(new)
        return Table(merged)

    def extends(self, other: "Table") -> bool:
        for k, v in other.entries.items():
            if self.entries.get(k) != v:
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Table) and self.entries == other.entries

    def __hash__(self):
        raise TypeError("tables are not hashable")

    def __repr__(self):
        return "{" + ", ".join(sorted(self.entries)) + "}"


EMPTY_TABLE = Table()


@dataclass(frozen=True)
class Position:
    index: int              # 1-based position in the play
    node: int               # term tree node id
    state: State
    theta: Table
    xi: Table
    move: str               # Init | A1 | A2 | A3 | B1 | C1 | C2 | C3 | C4
    choice: Optional[int] = None  # refuter direction, when the move offered one


@dataclass
class Play:
    positions: list[Position]
    item: int               # equation index, 0-based
    choices: list[tuple[int, int]]  # (position index produced, chosen d)

    def __len__(self):
        return len(self.positions)

    def pos(self, i: int) -> Position:
        return self.positions[i - 1]

    @property
    def final(self) -> FinalState:
        st = self.positions[-1].state
        assert isinstance(st, FinalState)
        return st

    def node_sequence(self) -> list[int]:
        return [p.node for p in self.positions]


# ---------------------------------------------------------------------------
# moves


def _decompose_right(r: Term):
    """Split a ground right term into (head constant, args)."""
    if isinstance(r, Const):
        return r, ()
    if isinstance(r, App) and isinstance(r.fun, Const):
        return r.fun, r.args
    if isinstance(r, App) and isinstance(r.fun, Var):
        # bound right-term variables are replaced before they can head a
        # state, so this indicates a malformed problem
        raise GameError(f"right term with variable head: {r}")
    raise GameError(f"unexpected right term: {r}")


def _arg_state_for(s_d: Term, item_forbidden: dict[str, Const]) -> ArgumentState | None:
    """State entered when the refuter descends into right-term argument
    s_d; higher-type arguments introduce the forbidden constants of their
    binders."""
    if isinstance(s_d, Abs):
        consts = []
        for n, _ in s_d.binders:
            if n not in item_forbidden:
                raise GameError(f"no forbidden constant for right binder {n}")
            consts.append(item_forbidden[n])
        body = subst_consts(s_d.body, {n: c for (n, _), c in zip(s_d.binders, consts)})
        return ArgumentState(tuple(consts), body)
    return ArgumentState((), s_d)


def initial_position(tree: TermTree, prob: Problem, item: int) -> Position:
    it = prob.items[item]
    root_lab = tree.label(tree.root)
    assert isinstance(root_lab, LamLabel)
    if len(root_lab.binders) != len(it.args):
        raise ArityMismatch(
            f"root binds {len(root_lab.binders)} variables, item has "
            f"{len(it.args)} arguments"
        )
    return Position(1, tree.root, ArgumentState(tuple(it.args), it.rhs),
                    EMPTY_TABLE, EMPTY_TABLE, "Init")


def _branching(pos: Position, tree: TermTree) -> int:
    """Number of refuter directions at `pos` (0 = deterministic move)."""
    st = pos.state
    lab = tree.label(pos.node)
    if isinstance(lab, ConstLabel) and isinstance(st, EmptyState):
        _, s_args = _decompose_right(st.right)
        return len(s_args)
    if isinstance(lab, VarLabel) and isinstance(st, ValueState):
        l = st.left
        body = l.body if isinstance(l, Abs) else l
        if isinstance(body, Const) and not body.ty.is_base():
            head, s_args = _decompose_right(st.right)
            return len(s_args) if head == body else 0
        if isinstance(body, App) and isinstance(body.fun, Const):
            head, s_args = _decompose_right(st.right)
            return len(s_args) if head == body.fun else 0
    return 0


def step(pos: Position, tree: TermTree, prob: Problem, item: int,
         choice: Optional[int] = None) -> list[Position]:
    """Successor positions per the move table.  Deterministic moves give a
    singleton; at a refuter choice, `choice` fixes the direction, else all
    directions are returned in order."""
    st = pos.state
    if isinstance(st, FinalState):
        raise GameError("no moves from a final state")
    lab = tree.label(pos.node)
    m = pos.index
    it = prob.items[item]

    # ---- group A: lambda node ------------------------------------------
    if isinstance(lab, LamLabel):
        assert isinstance(st, ArgumentState)
        if len(lab.binders) != len(st.lefts):
            raise ArityMismatch(
                f"lambda node {pos.node} binds {len(lab.binders)}, state has "
                f"{len(st.lefts)} left terms"
            )
        theta2 = pos.theta.updated({
            n: ThetaEntry(l, pos.xi, m)
            for (n, _), l in zip(lab.binders, st.lefts)
        })
        child = tree.succ(pos.node)[0]
        clab = tree.label(child)
        r = st.right
        if isinstance(clab, ConstLabel):
            if clab.ty.is_base():  # A1
                win = r != Const(clab.name, clab.ty)
                return [Position(m + 1, child, FinalState(win), theta2, pos.xi, "A1")]
            head, _ = _decompose_right(r)  # A2
            if head == Const(clab.name, clab.ty):
                nxt: State = EmptyState(r)
            else:
                nxt = FinalState(True)
            return [Position(m + 1, child, nxt, theta2, pos.xi, "A2")]
        assert isinstance(clab, VarLabel)  # A3
        entry = theta2.get(clab.name)
        if entry is None:
            raise GameError(f"theta undefined on {clab.name}")
        return [Position(m + 1, child, ValueState(entry.left, r), theta2,
                         entry.xi, "A3")]

    # ---- group B: higher-type constant ---------------------------------
    if isinstance(lab, ConstLabel):
        assert isinstance(st, EmptyState)
        _, s_args = _decompose_right(st.right)
        k = len(s_args)
        out = []
        for d in _directions(choice, k):
            child = tree.succ(pos.node)[d - 1]
            nxt = _arg_state_for(s_args[d - 1], it.forbidden)
            out.append(Position(m + 1, child, nxt, pos.theta, pos.xi, "B1",
                                d if k > 1 else None))
        return out

    # ---- group C: variable ---------------------------------------------
    assert isinstance(lab, VarLabel)
    assert isinstance(st, ValueState)
    l = st.left
    r = st.right
    if isinstance(l, Abs):
        kids = tree.succ(pos.node)
        if len(l.binders) != len(kids):
            raise ArityMismatch(
                f"left term binds {len(l.binders)}, node {pos.node} has "
                f"{len(kids)} successors"
            )
        xi2 = pos.xi.updated({
            n: XiEntry(kid, pos.theta, m)
            for (n, _), kid in zip(l.binders, kids)
        })
        w = l.body
    else:
        xi2 = pos.xi
        w = l

    # C1: ground constant head (possibly forbidden)
    if isinstance(w, Const) and w.ty.is_base():
        return [Position(m + 1, pos.node, FinalState(r != w), pos.theta, xi2, "C1")]

    # C2: bare higher-type constant (a forbidden constant)
    if isinstance(w, Const):
        head, s_args = _decompose_right(r)
        if head != w:
            return [Position(m + 1, pos.node, FinalState(True), pos.theta,
                             xi2, "C2")]
        k = len(s_args)
        out = []
        for d in _directions(choice, k):
            child = tree.succ(pos.node)[d - 1]
            nxt = _arg_state_for(s_args[d - 1], it.forbidden)
            out.append(Position(m + 1, child, nxt, pos.theta, xi2, "C2",
                                d if k > 1 else None))
        return out

    # C3: constant-headed application
    if isinstance(w, App) and isinstance(w.fun, Const):
        head, s_args = _decompose_right(r)
        if head != w.fun:
            return [Position(m + 1, pos.node, FinalState(True), pos.theta,
                             xi2, "C3")]
        k = len(s_args)
        out = []
        for d in _directions(choice, k):
            s_d = s_args[d - 1]
            w_d = w.args[d - 1]
            if isinstance(s_d, Abs):
                if not isinstance(w_d, Abs) or len(w_d.binders) != len(s_d.binders):
                    raise GameError("left/right argument arity mismatch in C3")
                consts = [it.forbidden[n] for n, _ in s_d.binders]
                new_l = subst_consts(
                    w_d.body, {n: c for (n, _), c in zip(w_d.binders, consts)})
                new_r = subst_consts(
                    s_d.body, {n: c for (n, _), c in zip(s_d.binders, consts)})
            else:
                new_l, new_r = w_d, s_d
            out.append(Position(m + 1, pos.node, ValueState(new_l, new_r),
                                pos.theta, xi2, "C3", d if k > 1 else None))
        return out

    # C4: variable head; jump to the node stored in xi
    if isinstance(w, Var) or (isinstance(w, App) and isinstance(w.fun, Var)):
        head = w if isinstance(w, Var) else w.fun
        args = () if isinstance(w, Var) else w.args
        entry = xi2.get(head.name)
        if entry is None:
            raise GameError(f"xi undefined on {head.name}")
        return [Position(m + 1, entry.node, ArgumentState(tuple(args), r),
                         entry.theta, xi2, "C4")]
    raise GameError(f"unhandled left term {w}")


def _directions(choice: Optional[int], k: int) -> list[int]:
    if k == 0:
        raise GameError("zero-direction branch")
    if choice is not None:
        if not 1 <= choice <= k:
            raise IllegalChoice(choice, k)
        return [choice]
    return list(range(1, k + 1))


# ---------------------------------------------------------------------------
# play enumeration and verdict

DEFAULT_BUDGET = 10 ** 6


def enumerate_plays(tree: TermTree, prob: Problem, item: int,
                    budget: int = DEFAULT_BUDGET) -> list[Play]:
    """All maximal plays for one item, ordered by refuter choice sequence."""
    out: list[Play] = []

    def run(prefix: list[Position], choices: list[tuple[int, int]]):
        base = len(prefix)
        try:
            while True:
                pos = prefix[-1]
                if isinstance(pos.state, FinalState):
                    out.append(Play(list(prefix), item, list(choices)))
                    return
                if len(prefix) >= budget:
                    raise BudgetExceeded(list(prefix))
                nxt = step(pos, tree, prob, item)
                if len(nxt) == 1:
                    prefix.append(nxt[0])
                    continue
                for p in nxt:
                    prefix.append(p)
                    choices.append((p.index, p.choice))
                    run(prefix, choices)
                    choices.pop()
                    prefix.pop()
                return
        finally:
            del prefix[base:]

    run([initial_position(tree, prob, item)], [])
    return out


def replay(tree: TermTree, prob: Problem, item: int,
           choices: list[int], budget: int = DEFAULT_BUDGET) -> Play:
    """Deterministic replay of one play given its refuter choice sequence."""
    prefix = [initial_position(tree, prob, item)]
    used: list[tuple[int, int]] = []
    pending = list(choices)
    while not isinstance(prefix[-1].state, FinalState):
        if len(prefix) >= budget:
            raise BudgetExceeded(prefix)
        pos = prefix[-1]
        k = _branching(pos, tree)
        if k > 1:
            if not pending:
                raise IllegalChoice(None, k)
            d = pending.pop(0)
            nxt = step(pos, tree, prob, item, choice=d)
            used.append((nxt[0].index, d))
        else:
            nxt = step(pos, tree, prob, item)
        assert len(nxt) == 1
        prefix.append(nxt[0])
    if pending:
        raise IllegalChoice(pending[0], 0)
    return Play(prefix, item, used)


def all_plays(tree: TermTree, prob: Problem,
              budget: int = DEFAULT_BUDGET) -> list[list[Play]]:
    return [enumerate_plays(tree, prob, i, budget) for i in range(len(prob.items))]


def verdict(tree: TermTree, prob: Problem, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff the refuter loses G(t, P): every play of every equation
    ends q[E] and each disequation has a play ending q[A]."""
    for i, it in enumerate(prob.items):
        plays = enumerate_plays(tree, prob, i, budget)
        if it.is_eq:
            if any(p.final.forall_wins for p in plays):
                return False
        else:
            if not any(p.final.forall_wins for p in plays):
                return False
    return True


def verdict_term(t: Term, prob: Problem, budget: int = DEFAULT_BUDGET) -> bool:
    from .oracle import check_constants

    check_constants(t)
    return verdict(to_game_tree(t, prob), prob, budget)


def to_game_tree(t: Term, prob: Problem) -> TermTree:
    """Term tree of a candidate solution, binders renamed apart from the
    problem's variables."""
    taken = {prob.var_name}
    for it in prob.items:
        for a in it.args:
            taken |= set(T.binder_names(a))
        taken |= set(it.bound_vars)
    t = T.freshen(t, taken)
    ty = T.type_of(t, prob.env())
    if ty != prob.var_type:
        raise GameError(f"term has type {ty}, problem wants {prob.var_type}")
    return T.to_tree(t, prob.env())


# ---------------------------------------------------------------------------
# structural relations on positions


def parent_of(play: Play, j: int, tree: TermTree) -> int:
    """Unique i < j of which position j is a child (1 < j < |play|)."""
    if not 1 < j < len(play):
        raise GameError(f"position {j} has no parent (play length {len(play)})")
    pos = play.pos(j)
    if pos.move in ("A2", "B1", "C2", "C3"):
        return j - 1
    if pos.move == "A3":
        lab = tree.label(pos.node)
        assert isinstance(lab, VarLabel)
        entry = pos.theta.get(lab.name)
        assert entry is not None
        return entry.pos
    if pos.move == "C4":
        prev = play.pos(j - 1)
        assert isinstance(prev.state, ValueState)
        head = _head_var(prev.state.left)
        entry = pos.xi.get(head)
        assert entry is not None
        return entry.pos
    raise GameError(f"no parent for move {pos.move}")


def child_of(play: Play, j: int, tree: TermTree) -> int:
    """Spec name for parent lookup: the i such that position j is a child
    of position i."""
    return parent_of(play, j, tree)


def _head_var(l: Term) -> str:
    body = l.body if isinstance(l, Abs) else l
    if isinstance(body, Var):
        return body.name
    if isinstance(body, App) and isinstance(body.fun, Var):
        return body.fun.name
    raise GameError(f"left term {l} has no variable head")


def is_descendent(play: Play, i: int, j: int, tree: TermTree) -> bool:
    """Reflexive-transitive closure of the child relation: is j a
    descendent of i?"""
    while j > i:
        if j >= len(play):  # the final position has no parent
            return False
        j = parent_of(play, j, tree)
    return j == i


def is_ri(play: Play, i: int, j: int) -> bool:
    """Right-term invariant: positions i and j share one right term."""
    ri_ = right_term(play.pos(i).state)
    rj = right_term(play.pos(j).state)
    return ri_ is not None and rj is not None and ri_ == rj


def is_nri(play: Play, i: int, j: int) -> bool:
    rj = right_term(play.pos(j).state)
    return rj is not None and not is_ri(play, i, j)


def extends(tbl1: Table, tbl2: Table) -> bool:
    """Does tbl1 extend tbl2 (agree on tbl2's whole domain)?"""
    return tbl1.extends(tbl2)


# -- b-partitions -----------------------------------------------------------


def b_partition(play: Play, j: int, tree: TermTree) -> list[tuple[int, int]]:
    """Unique partition of play(1, j) into plays on the simple tiles along
    the branch from the root to the (lambda) node of position j.  Returns
    [(1,1), (i_1, j_1), ..., (i_n, j_n)]."""
    if not tree.is_lambda(play.pos(j).node):
        raise NotAtLambda(j)
    stages = []
    jk = j
    while jk > 1:
        ik = parent_of(play, jk, tree)
        stages.append((ik, jk))
        jk = ik - 1
    stages.append((1, 1))
    stages.reverse()
    return stages


class NotAtLambda(GameError):
    def __init__(self, j):
        super().__init__(f"position {j} is not at a lambda node")


# -- correspondence and similarity -------------------------------------------


def correspond(play: Play, i: int, j: int, i2: int, j2: int) -> bool:
    """Intervals (i,j) and (i2,j2) correspond: equal length, same nodes,
    same state kinds and left terms position-for-position."""
    if j >= len(play) or j2 >= len(play):
        return False
    if j - i != j2 - i2:
        return False
    for k in range(j - i + 1):
        a = play.pos(i + k)
        b = play.pos(i2 + k)
        if a.node != b.node:
            return False
        if type(a.state) is not type(b.state):
            return False
        if isinstance(a.state, ValueState):
            if a.state.left != b.state.left:
                return False
        elif isinstance(a.state, ArgumentState):
            if a.state.lefts != b.state.lefts:
                return False
    return True


def similar_except(tbl1: Table, tbl2: Table, dependent_vars: set[str],
                   _memo=None) -> bool:
    """Bisimulation-like table similarity: entries must agree everywhere
    except on variables heading tiles dependent on the distinguished
    tile; embedded tables are compared recursively."""
    if _memo is None:
        _memo = set()
    key = (id(tbl1), id(tbl2))
    if key in _memo:
        return True
    _memo.add(key)
    e1, e2 = tbl1.entries, tbl2.entries
    if e1.keys() != e2.keys():
        return False
    for name, v1 in e1.items():
        v2 = e2[name]
        if isinstance(v1, ThetaEntry):
            if name in dependent_vars:
                continue
            if not isinstance(v2, ThetaEntry) or v1.left != v2.left:
                return False
            if not similar_except(v1.xi, v2.xi, dependent_vars, _memo):
                return False
        else:
            assert isinstance(v1, XiEntry)
            if not isinstance(v2, XiEntry) or v1.node != v2.node:
                return False
            if not similar_except(v1.theta, v2.theta, dependent_vars, _memo):
                return False
    return True


class SamePosition(GameError):
    pass


def vary_at(play: Play, j: int, j2: int, tree: TermTree):
    """First b-partition stage where plays to two positions at the same
    lambda node differ: returns (stage index k, l, l2, head node of the
    varying tile)."""
    if j == j2:
        raise SamePosition(f"positions {j} and {j2} coincide")
    if play.pos(j).node != play.pos(j2).node:
        raise GameError("positions are at different nodes")
    b1 = b_partition(play, j, tree)
    b2 = b_partition(play, j2, tree)
    assert len(b1) == len(b2)
    for k in range(1, len(b1)):
        (i1, l1), (i2, l2) = b1[k], b2[k]
        assert i1 == i2
        if l1 != l2:
            return k, l1, l2, play.pos(i1).node
    raise GameError("b-partitions do not differ")
