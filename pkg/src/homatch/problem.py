"""Dual interpolation problems and their derived sets and metrics.

A problem is a finite family x v_1 ... v_n ~ u of equations and
disequations over a single free variable x.  From it we compute, per
item, the forbidden constants standing for the right term's bound
variables, the ground closure of the right term, the relative subterms
of the left terms, and the global metrics: right size, arity, and the
play-count bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import terms as T
from .terms import (
    BASE,
    Abs,
    App,
    Const,
    SimpleType,
    Term,
    Var,
    alpha_key,
    app,
    normalize,
    order,
    subst_consts,
    subtypes,
    type_of,
)

FORBIDDEN_PREFIX = "#c"
GROUND_D = "#d"
LOWERING_PREFIX = "#e"


@dataclass
class Item:
    args: list[Term]
    is_eq: bool
    rhs: Term
    bound_vars: dict[str, SimpleType]      # bound variables of rhs
    forbidden: dict[str, Const]            # bound var name -> its constant

    @property
    def forbidden_consts(self) -> list[Const]:
        return list(self.forbidden.values())


@dataclass
class Problem:
    var_name: str
    var_type: SimpleType
    constants: dict[str, SimpleType]       # user constants
    items: list[Item]
    excluded: set[str] = field(default_factory=set)  # lowering constants

    @property
    def d(self) -> Const:
        return Const(GROUND_D, BASE)

    def allowed_constants(self) -> dict[str, SimpleType]:
        """Solution alphabet: constants of right terms plus d, minus any
        constants introduced by type lowering."""
        out: dict[str, SimpleType] = {GROUND_D: BASE}
        for it in self.items:
            for c in T.constants(it.rhs):
                if not c.name.startswith("#") and c.name not in self.excluded:
                    out[c.name] = c.ty
        return out

    def env(self) -> dict[str, SimpleType]:
        env = dict(self.constants)
        env[GROUND_D] = BASE
        for it in self.items:
            for c in it.forbidden.values():
                env[c.name] = c.ty
        return env


@dataclass
class ProblemSets:
    R: list[Term]
    L: list[Term]
    Ts: set[SimpleType]
    R_by_item: list[list[Term]]
    L_by_item: list[list[Term]]


@dataclass
class Metrics:
    delta: int
    alpha: int
    p: int


@dataclass
class Diagnostic:
    code: str
    item: int | None
    detail: str

    def __str__(self):
        where = f" (item {self.item})" if self.item is not None else ""
        return f"{self.code}{where}: {self.detail}"


def _bound_vars(t: Term) -> dict[str, SimpleType]:
    out: dict[str, SimpleType] = {}

    def go(s: Term):
        if isinstance(s, Abs):
            for n, ty in s.binders:
                out[n] = ty
            go(s.body)
        elif isinstance(s, App):
            go(s.fun)
            for a in s.args:
                go(a)

    go(t)
    return out


def make_problem(var_name: str, var_type: SimpleType,
                 constants: dict[str, SimpleType],
                 raw_items: list[tuple[list[Term], bool, Term]],
                 excluded: set[str] | None = None) -> Problem:
    """Build a Problem, generating forbidden constants per item."""
    items = []
    for idx, (args, is_eq, rhs) in enumerate(raw_items):
        bound = _bound_vars(rhs)
        forb = {
            name: Const(f"{FORBIDDEN_PREFIX}{idx + 1}_{name}", ty)
            for name, ty in bound.items()
        }
        items.append(Item(list(args), is_eq, rhs, bound, forb))
    return Problem(var_name, var_type, dict(constants), items,
                   set(excluded or ()))


def from_raw(raw) -> Problem:
    """Build from syntax.RawProblem, normalizing terms to eta-long form."""
    env = dict(raw.consts)
    items = []
    for it in raw.items:
        args = [normalize(a, env) for a in it.args]
        rhs = normalize(it.rhs, env)
        items.append((args, it.is_eq, rhs))
    prob = make_problem(raw.var_name, raw.var_type, raw.consts, items)
    _make_well_named(prob)
    return prob


def _make_well_named(prob: Problem) -> None:
    """Freshen argument/right terms so no two items share bound names."""
    taken: set[str] = {prob.var_name}
    for idx, it in enumerate(prob.items):
        new_args = []
        for a in it.args:
            a2 = T.freshen(a, taken)
            taken |= set(T.binder_names(a2))
            new_args.append(a2)
        it.args = new_args
        rhs2 = T.freshen(it.rhs, taken)
        taken |= set(T.binder_names(rhs2))
        if rhs2 is not it.rhs:
            it.rhs = rhs2
            bound = _bound_vars(rhs2)
            it.bound_vars = bound
            it.forbidden = {
                name: Const(f"{FORBIDDEN_PREFIX}{idx + 1}_{name}", ty)
                for name, ty in bound.items()
            }


# ---------------------------------------------------------------------------
# derived sets


def ground_closure(w: Term, X: dict[str, SimpleType],
                   C: dict[str, Const]) -> list[Term]:
    """Ground closure Cl(w, X, C): the base-type pieces of a right term,
    with bound variables replaced by their forbidden constants."""
    seen: dict = {}

    def add(t: Term):
        key = alpha_key(t)
        if key not in seen:
            seen[key] = t

    def go(t: Term):
        if isinstance(t, (Const, Var)):
            add(t)
            return
        if isinstance(t, App):
            add(t)
            for a in t.args:
                go(a)
            return
        if isinstance(t, Abs):
            sub = {n: C[n] for n, _ in t.binders if n in C}
            go(subst_consts(t.body, sub))
            return
        raise TypeError(t)

    go(w)
    return list(seen.values())


def subterms_rel(w: Term, C: list[Const]) -> list[Term]:
    """Subterms of a left term relative to the forbidden constants C:
    binders directly beneath a constant are replaced, in every same-typed
    way, by constants from C."""
    seen: dict = {}

    def add(t: Term):
        key = alpha_key(t)
        if key not in seen:
            seen[key] = t

    def sub(t: Term):
        if isinstance(t, (Var, Const)):
            add(t)
            return
        if isinstance(t, App):
            add(t)
            if isinstance(t.fun, Const):
                for a in t.args:
                    subp(a)
            else:
                for a in t.args:
                    sub(a)
            return
        if isinstance(t, Abs):
            add(t)
            sub(t.body)
            return
        raise TypeError(t)

    def subp(t: Term):
        if isinstance(t, Abs):
            choices = []
            for n, ty in t.binders:
                cands = [c for c in C if c.ty == ty]
                choices.append([(n, c) for c in cands])
            for combo in itertools.product(*choices):
                sub(subst_consts(t.body, dict(combo)))
            return
        sub(t)

    sub(w)
    return list(seen.values())


def right_size(u: Term, C: dict[str, Const] | None = None) -> int:
    """delta(u): number of constant applications in a right term."""
    C = C or {}
    if isinstance(u, (Const, Var)):
        return 0
    if isinstance(u, App):
        return 1 + sum(right_size(a, C) for a in u.args)
    if isinstance(u, Abs):
        sub = {n: C[n] for n, _ in u.binders if n in C}
        return right_size(subst_consts(u.body, sub), C)
    raise TypeError(u)


def branch_count(u: Term) -> int:
    """Number of root-to-leaf branches of a right term; a bare atom has
    one branch (one play)."""
    if isinstance(u, (Const, Var)):
        return 1
    if isinstance(u, App):
        return sum(branch_count(a) for a in u.args)
    if isinstance(u, Abs):
        return branch_count(u.body)
    raise TypeError(u)


def right_size_of(prob: Problem) -> int:
    return sum(right_size(it.rhs, it.forbidden) for it in prob.items)


def _subterm_types(t: Term, env: dict[str, SimpleType]) -> set[SimpleType]:
    out: set[SimpleType] = set()

    def go(s: Term, env):
        out.add(type_of(s, env))
        if isinstance(s, Abs):
            inner = dict(env)
            inner.update(dict(s.binders))
            for _, ty in s.binders:
                out.add(ty)
            go(s.body, inner)
        elif isinstance(s, App):
            go(s.fun, env)
            for a in s.args:
                go(a, env)

    go(t, env)
    return out


def build_sets(prob: Problem) -> tuple[ProblemSets, Metrics]:
    env = prob.env()
    R_by, L_by = [], []
    Rseen: dict = {}
    Lseen: dict = {}
    for it in prob.items:
        ri = ground_closure(it.rhs, it.bound_vars, it.forbidden)
        li = list(it.forbidden.values())
        lkeys = {alpha_key(c) for c in li}
        for v in it.args:
            for s in subterms_rel(v, it.forbidden_consts):
                k = alpha_key(s)
                if k not in lkeys:
                    lkeys.add(k)
                    li.append(s)
        R_by.append(ri)
        L_by.append(li)
        for t in ri:
            Rseen.setdefault(alpha_key(t), t)
        for t in li:
            Lseen.setdefault(alpha_key(t), t)

    tys = subtypes(prob.var_type)
    for it in prob.items:
        for ty in _subterm_types(it.rhs, env):
            tys |= subtypes(ty)
    metrics = Metrics(
        delta=right_size_of(prob),
        alpha=max(ty.width for ty in tys),
        p=sum(branch_count(it.rhs) for it in prob.items),
    )
    return ProblemSets(list(Rseen.values()), list(Lseen.values()), tys,
                       R_by, L_by), metrics


# ---------------------------------------------------------------------------
# validation and type lowering


def validate(prob: Problem) -> list[Diagnostic]:
    """Structural diagnostics; empty list iff the problem is well-formed."""
    out: list[Diagnostic] = []
    env = prob.env()
    if order(prob.var_type) <= 1:
        out.append(Diagnostic("FirstOrderProblem", None,
                              "the problem variable must have order > 1"))
    if prob.var_name.startswith("#"):
        out.append(Diagnostic("ReservedName", None, prob.var_name))
    for name in prob.constants:
        if name.startswith("#"):
            out.append(Diagnostic("ReservedName", None, name))

    seen_binders: dict[str, int] = {}
    for idx, it in enumerate(prob.items):
        if len(it.args) != prob.var_type.width:
            out.append(Diagnostic("ArityMismatch", idx,
                                  f"{len(it.args)} args for type of width "
                                  f"{prob.var_type.width}"))
            continue
        for j, (a, want) in enumerate(zip(it.args, prob.var_type.args)):
            if T.free_vars(a):
                out.append(Diagnostic("OpenArgument", idx, f"arg {j + 1}"))
                continue
            try:
                got = type_of(a, env)
            except T.TypeMismatch as e:
                out.append(Diagnostic("IllTyped", idx, f"arg {j + 1}: {e}"))
                continue
            if got != want:
                out.append(Diagnostic("ArgTypeMismatch", idx,
                                      f"arg {j + 1} has type {got}, wants {want}"))
            if not T.alpha_equal(a, normalize(a, env)):
                out.append(Diagnostic("NotEtaLong", idx, f"arg {j + 1}"))
        if T.free_vars(it.rhs):
            out.append(Diagnostic("OpenRhs", idx, ""))
        else:
            try:
                rty = type_of(it.rhs, env)
                if rty != BASE:
                    out.append(Diagnostic("NonGroundRhs", idx, f"type {rty}"))
                elif not T.alpha_equal(it.rhs, normalize(it.rhs, env)):
                    out.append(Diagnostic("NotEtaLong", idx, "right term"))
            except T.TypeMismatch as e:
                out.append(Diagnostic("IllTyped", idx, f"rhs: {e}"))
        names = T.binder_names(it.rhs)
        for a in it.args:
            names.extend(T.binder_names(a))
        if len(names) != len(set(names)):
            out.append(Diagnostic("RepeatedBoundVars", idx, ""))
        for n in set(names):
            if n in seen_binders:
                out.append(Diagnostic("SharedBoundVars", idx,
                                      f"{n} also bound in item {seen_binders[n]}"))
            else:
                seen_binders[n] = idx
    return out


def lower_item(var_type: SimpleType, args: list[Term], is_eq: bool,
               rhs: Term, env: dict[str, SimpleType],
               next_id: itertools.count) -> tuple[list[Term], bool, Term, dict[str, SimpleType]]:
    """Apply the type-lowering trick to an item whose right term has arrow
    type: extend the application with fresh constants (excluded from
    solutions) until the right term is ground."""
    rty = type_of(rhs, env)
    fresh: dict[str, SimpleType] = {}
    extra = []
    for aty in rty.args:
        name = f"{LOWERING_PREFIX}{next(next_id)}"
        fresh[name] = aty
        extra.append(Const(name, aty))
    if not extra:
        return args, is_eq, rhs, {}
    new_rhs = normalize(app(rhs, extra), {**env, **fresh})
    return args + list(extra), is_eq, new_rhs, fresh


def lower_problem(var_name: str, var_type: SimpleType,
                  constants: dict[str, SimpleType],
                  raw_items: list[tuple[list[Term], bool, Term]]) -> Problem:
    """make_problem plus type lowering for non-ground right terms."""
    env = dict(constants)
    counter = itertools.count(1)
    lowered = []
    excluded: set[str] = set()
    for args, is_eq, rhs in raw_items:
        args2, is_eq, rhs2, fresh = lower_item(var_type, args, is_eq, rhs,
                                               env, counter)
        constants = {**constants, **fresh}
        excluded |= set(fresh)
        lowered.append((args2, is_eq, rhs2))
    prob = make_problem(var_name, var_type, constants, lowered, excluded)
    _make_well_named(prob)
    return prob
