"""Simply typed lambda terms over a single base type, and their tree view.

Terms are kept in a small algebraic form (Var / Const / Abs / App).  Most
of the library works with closed, well-named terms in eta-long normal
form; `beta_normalize` and `eta_long` bring arbitrary well-typed terms
into that shape.  `TermTree` is the game-facing view: a numbered tree in
which every even level is a lambda node and ground-type arguments sit
under a dummy lambda.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional


# ---------------------------------------------------------------------------
# simple types


@dataclass(frozen=True)
class SimpleType:
    """Flattened simple type (A1,...,An,o); args == () means the base type."""

    args: tuple["SimpleType", ...] = ()

    def is_base(self) -> bool:
        return not self.args

    @property
    def width(self) -> int:
        return len(self.args)

    def __repr__(self) -> str:
        return type_str(self)


BASE = SimpleType()


def arrow(args, result: SimpleType = BASE) -> SimpleType:
    """Build (args..., result) in flattened form; absorbs an arrow result."""
    args = tuple(args)
    return SimpleType(args + result.args)


def order(ty: SimpleType) -> int:
    if ty.is_base():
        return 1
    return 1 + max(order(a) for a in ty.args)


def type_str(ty: SimpleType) -> str:
    if ty.is_base():
        return "o"
    parts = []
    for a in ty.args:
        s = type_str(a)
        parts.append(f"({s})" if not a.is_base() else s)
    return " -> ".join(parts) + " -> o"


def subtypes(ty: SimpleType) -> set[SimpleType]:
    out = {ty}
    for a in ty.args:
        out |= subtypes(a)
    if not ty.is_base():
        out.add(BASE)
    return out


# ---------------------------------------------------------------------------
# terms


class TypeMismatch(Exception):
    """Ill-typed term; `path` locates the offending subterm (child indices)."""

    def __init__(self, msg: str, path: tuple[int, ...] = ()):
        super().__init__(f"{msg} at path {list(path)}")
        self.path = path


class Term:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Const(Term):
    name: str
    ty: SimpleType

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Abs(Term):
    binders: tuple[tuple[str, SimpleType], ...]  # nonempty
    body: Term

    def __repr__(self):
        return term_str(self)


@dataclass(frozen=True)
class App(Term):
    fun: Term
    args: tuple[Term, ...]  # nonempty

    def __repr__(self):
        return term_str(self)


def app(fun: Term, args) -> Term:
    """Apply, flattening nested applications; identity on empty args."""
    args = tuple(args)
    if not args:
        return fun
    if isinstance(fun, App):
        return App(fun.fun, fun.args + args)
    return App(fun, args)


def abs_(binders, body: Term) -> Term:
    binders = tuple(binders)
    if not binders:
        return body
    if isinstance(body, Abs):
        return Abs(binders + body.binders, body.body)
    return Abs(binders, body)


def term_str(t: Term, annotate: bool = False) -> str:
    """Render a term; with annotate=True binders carry `:type` and the
    output re-parses to an alpha-equal term."""

    def atom(s: Term) -> str:
        txt = go(s)
        if isinstance(s, (Abs, App)):
            return f"({txt})"
        return txt

    def go(s: Term) -> str:
        if isinstance(s, (Var, Const)):
            return s.name
        if isinstance(s, Abs):
            if annotate:
                bs = " ".join(f"{n}:{type_str(ty)}" for n, ty in s.binders)
            else:
                bs = " ".join(n for n, _ in s.binders)
            return f"\\{bs}. {go(s.body)}"
        if isinstance(s, App):
            return " ".join([atom(s.fun)] + [atom(a) for a in s.args])
        raise TypeError(s)

    return go(t)


def type_of(term: Term, env: dict[str, SimpleType]) -> SimpleType:
    """Type of `term` with free names typed by `env`; raises TypeMismatch."""

    def go(t: Term, env: dict[str, SimpleType], path: tuple[int, ...]) -> SimpleType:
        if isinstance(t, Var):
            if t.name not in env:
                raise TypeMismatch(f"unbound variable {t.name}", path)
            return env[t.name]
        if isinstance(t, Const):
            return t.ty
        if isinstance(t, Abs):
            inner = dict(env)
            inner.update(dict(t.binders))
            body_ty = go(t.body, inner, path + (0,))
            return arrow([ty for _, ty in t.binders], body_ty)
        if isinstance(t, App):
            fty = go(t.fun, env, path + (0,))
            for i, a in enumerate(t.args):
                if fty.is_base():
                    raise TypeMismatch("base type applied", path + (i + 1,))
                aty = go(a, env, path + (i + 1,))
                if aty != fty.args[0]:
                    raise TypeMismatch(
                        f"argument type {aty} != expected {fty.args[0]}",
                        path + (i + 1,),
                    )
                fty = SimpleType(fty.args[1:])
            return fty
        raise TypeError(t)

    return go(term, env, ())


def free_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Const):
        return set()
    if isinstance(t, Abs):
        return free_vars(t.body) - {n for n, _ in t.binders}
    if isinstance(t, App):
        out = free_vars(t.fun)
        for a in t.args:
            out |= free_vars(a)
        return out
    raise TypeError(t)


def constants(t: Term) -> set[Const]:
    if isinstance(t, Var):
        return set()
    if isinstance(t, Const):
        return {t}
    if isinstance(t, Abs):
        return constants(t.body)
    if isinstance(t, App):
        out = constants(t.fun)
        for a in t.args:
            out |= constants(a)
        return out
    raise TypeError(t)


def binder_names(t: Term) -> list[str]:
    out: list[str] = []
    if isinstance(t, Abs):
        out.extend(n for n, _ in t.binders)
        out.extend(binder_names(t.body))
    elif isinstance(t, App):
        out.extend(binder_names(t.fun))
        for a in t.args:
            out.extend(binder_names(a))
    return out


class _NameGen:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        name = base
        for i in itertools.count(1):
            if name not in self.taken:
                break
            name = f"{base}_{i}"
        self.taken.add(name)
        return name


def freshen(t: Term, taken: set[str] | None = None) -> Term:
    """Rename binders so the term is well-named (each binder unique) and
    avoids the names in `taken`; surface names are kept when possible."""
    gen = _NameGen((taken or set()) | free_vars(t))

    def go(s: Term, sub: dict[str, str]) -> Term:
        if isinstance(s, Var):
            return Var(sub.get(s.name, s.name))
        if isinstance(s, Const):
            return s
        if isinstance(s, Abs):
            new = []
            inner = dict(sub)
            for n, ty in s.binders:
                n2 = gen.fresh(n)
                inner[n] = n2
                new.append((n2, ty))
            return Abs(tuple(new), go(s.body, inner))
        if isinstance(s, App):
            return App(go(s.fun, sub), tuple(go(a, sub) for a in s.args))
        raise TypeError(s)

    return go(t, {})


def is_well_named(t: Term) -> bool:
    names = binder_names(t)
    return len(names) == len(set(names))


def subst(t: Term, sub: dict[str, Term]) -> Term:
    """Capture-avoiding substitution of terms for free variables."""
    if not sub:
        return t
    if isinstance(t, Var):
        return sub.get(t.name, t)
    if isinstance(t, Const):
        return t
    if isinstance(t, App):
        return app(subst(t.fun, sub), [subst(a, sub) for a in t.args])
    if isinstance(t, Abs):
        inner = {k: v for k, v in sub.items() if k not in {n for n, _ in t.binders}}
        if not inner:
            return t
        captured = set()
        for v in inner.values():
            captured |= free_vars(v)
        if captured & {n for n, _ in t.binders}:
            # rename the colliding binders first
            gen = _NameGen(captured | free_vars(t.body) | set(inner))
            ren = {}
            new = []
            for n, ty in t.binders:
                if n in captured:
                    n2 = gen.fresh(n)
                    ren[n] = Var(n2)
                    new.append((n2, ty))
                else:
                    new.append((n, ty))
            body = subst(t.body, ren)
            return Abs(tuple(new), subst(body, inner))
        return Abs(t.binders, subst(t.body, inner))
    raise TypeError(t)


def subst_consts(t: Term, sub: dict[str, Const]) -> Term:
    """Substitute constants for variables by name (no capture possible)."""
    return subst(t, {k: v for k, v in sub.items()})


# ---------------------------------------------------------------------------
# beta reduction


def _head_redex(t: Term) -> Optional[Term]:
    """One normal-order (leftmost-outermost) step, or None if beta-normal."""
    if isinstance(t, App):
        if isinstance(t.fun, Abs):
            fun = t.fun
            k = min(len(fun.binders), len(t.args))
            sub = {fun.binders[i][0]: t.args[i] for i in range(k)}
            body = abs_(fun.binders[k:], fun.body)
            return app(subst(body, sub), t.args[k:])
        step = _head_redex(t.fun)
        if step is not None:
            return app(step, t.args)
        for i, a in enumerate(t.args):
            step = _head_redex(a)
            if step is not None:
                return App(t.fun, t.args[:i] + (step,) + t.args[i + 1 :])
        return None
    if isinstance(t, Abs):
        step = _head_redex(t.body)
        if step is None:
            return None
        return Abs(t.binders, step)
    return None


def beta_normalize(t: Term) -> Term:
    """Normal-order beta normal form; terminates on all well-typed terms."""
    while True:
        nxt = _head_redex(t)
        if nxt is None:
            return t
        t = nxt


def beta_normalize_applicative(t: Term) -> Term:
    """Arguments-first reduction; used to cross-check confluence in tests."""
    if isinstance(t, (Var, Const)):
        return t
    if isinstance(t, Abs):
        return Abs(t.binders, beta_normalize_applicative(t.body))
    if isinstance(t, App):
        fun = beta_normalize_applicative(t.fun)
        args = tuple(beta_normalize_applicative(a) for a in t.args)
        if isinstance(fun, Abs):
            k = min(len(fun.binders), len(args))
            sub = {fun.binders[i][0]: args[i] for i in range(k)}
            body = abs_(fun.binders[k:], fun.body)
            return beta_normalize_applicative(app(subst(body, sub), args[k:]))
        return app(fun, args)
    raise TypeError(t)


# ---------------------------------------------------------------------------
# eta-long normal form


def eta_long(t: Term, env: dict[str, SimpleType] | None = None) -> Term:
    """Eta-long normal form of a beta-normal term (fully applied heads,
    every functional argument abstracted)."""
    env = dict(env or {})
    counter = itertools.count()
    taken = set(binder_names(t)) | free_vars(t)

    def fresh(base: str) -> str:
        name = base
        while name in taken:
            name = f"{base}{next(counter)}"
        taken.add(name)
        return name

    def expand(s: Term, ty: SimpleType, env: dict[str, SimpleType]) -> Term:
        if ty.is_base():
            return go_ground(s, env)
        if isinstance(s, Abs):
            k = len(s.binders)
            inner = dict(env)
            inner.update(dict(s.binders))
            rest = SimpleType(ty.args[k:])
            return Abs(s.binders, expand(s.body, rest, inner))
        # head form of arrow type: wrap in fresh binders
        names = [(fresh("z"), a) for a in ty.args]
        inner = dict(env)
        inner.update(dict(names))
        body = app(s, [Var(n) for n, _ in names])
        return Abs(tuple(names), go_ground(body, inner))

    def go_ground(s: Term, env: dict[str, SimpleType]) -> Term:
        if isinstance(s, (Var, Const)):
            hty = type_of(s, env)
            if hty.is_base():
                return s
            names = [(fresh("z"), a) for a in hty.args]
            inner = dict(env)
            inner.update(dict(names))
            return Abs(
                tuple(names), go_ground(app(s, [Var(n) for n, _ in names]), inner)
            )
        if isinstance(s, App):
            hty = type_of(s.fun, env)
            have = len(s.args)
            need = hty.width
            if have < need:
                names = [(fresh("z"), a) for a in hty.args[have:]]
                inner = dict(env)
                inner.update(dict(names))
                full = app(s, [Var(n) for n, _ in names])
                return Abs(tuple(names), go_ground(full, inner))
            new_args = tuple(
                expand(a, hty.args[i], env) for i, a in enumerate(s.args)
            )
            return App(s.fun, new_args)
        if isinstance(s, Abs):
            raise TypeMismatch("abstraction at ground position")
        raise TypeError(s)

    ty = type_of(t, env)
    return expand(t, ty, env)


def normalize(t: Term, env: dict[str, SimpleType] | None = None) -> Term:
    """Beta-normalize then eta-long-expand; result is well-named."""
    return freshen(eta_long(beta_normalize(t), env))


# ---------------------------------------------------------------------------
# alpha equivalence


def alpha_key(t: Term):
    """Canonical de-Bruijn-level key; equal keys iff alpha-equal terms."""

    def go(s: Term, depth: dict[str, int], level: int):
        if isinstance(s, Var):
            if s.name in depth:
                return ("b", depth[s.name])
            return ("f", s.name)
        if isinstance(s, Const):
            return ("c", s.name)
        if isinstance(s, Abs):
            inner = dict(depth)
            for i, (n, _) in enumerate(s.binders):
                inner[n] = level + i
            tys = tuple(ty for _, ty in s.binders)
            return ("l", tys, go(s.body, inner, level + len(s.binders)))
        if isinstance(s, App):
            return (
                "a",
                go(s.fun, depth, level),
                tuple(go(a, depth, level) for a in s.args),
            )
        raise TypeError(s)

    return go(t, {}, 0)


def alpha_equal(t1: Term, t2: Term) -> bool:
    return alpha_key(t1) == alpha_key(t2)


# ---------------------------------------------------------------------------
# term trees


@dataclass(frozen=True)
class LamLabel:
    binders: tuple[tuple[str, SimpleType], ...]  # may be empty (dummy lambda)

    def __repr__(self):
        return "\\" + " ".join(n for n, _ in self.binders) if self.binders else "\\"


@dataclass(frozen=True)
class VarLabel:
    name: str
    ty: SimpleType

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class ConstLabel:
    name: str
    ty: SimpleType

    def __repr__(self):
        return self.name


Label = LamLabel | VarLabel | ConstLabel


@dataclass
class TermTree:
    """Tree view of a closed eta-long abstraction.

    Nodes are numbered in depth-first preorder starting at 1 (the root
    lambda), children left to right, matching the figures used in traces.
    """

    labels: dict[int, Label]
    children: dict[int, tuple[int, ...]]
    parent: dict[int, Optional[int]]
    root: int = 1

    def label(self, nid: int) -> Label:
        return self.labels[nid]

    def succ(self, nid: int) -> tuple[int, ...]:
        return self.children[nid]

    def nodes(self) -> list[int]:
        return sorted(self.labels)

    def is_lambda(self, nid: int) -> bool:
        return isinstance(self.labels[nid], LamLabel)

    @property
    def binder_node(self) -> dict[str, int]:
        """Lambda node binding each variable name (terms are well-named)."""
        out = {}
        for nid, lab in self.labels.items():
            if isinstance(lab, LamLabel):
                for n, _ in lab.binders:
                    out[n] = nid
        return out

    def subtree_nodes(self, nid: int) -> list[int]:
        out = []
        stack = [nid]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.children[n]))
        return out

    def depth(self, nid: int) -> int:
        d = 0
        while self.parent[nid] is not None:
            nid = self.parent[nid]
            d += 1
        return d


def to_tree(t: Term, consts: dict[str, SimpleType] | None = None) -> TermTree:
    """Tree of a closed eta-long abstraction, with dummy lambdas above
    ground-type arguments."""
    if not isinstance(t, Abs):
        # allow ground closed terms by treating them as a dummy-rooted tree
        t = Abs((), t) if False else t
    if not is_well_named(t):
        t = freshen(t)
    env = dict(consts or {})

    labels: dict[int, Label] = {}
    children: dict[int, tuple[int, ...]] = {}
    parent: dict[int, Optional[int]] = {}
    counter = itertools.count(1)

    def new_node(lab: Label, par: Optional[int]) -> int:
        nid = next(counter)
        labels[nid] = lab
        parent[nid] = par
        children[nid] = ()
        return nid

    def head_label(s: Term, env) -> Label:
        if isinstance(s, Var):
            return VarLabel(s.name, env[s.name])
        if isinstance(s, Const):
            return ConstLabel(s.name, s.ty)
        raise TypeMismatch(f"head is not atomic: {s}")

    def build_lambda(s: Term, par: Optional[int], env) -> int:
        # s has arrow type (an Abs) or is a ground argument (dummy lambda)
        if isinstance(s, Abs):
            nid = new_node(LamLabel(s.binders), par)
            inner = dict(env)
            inner.update(dict(s.binders))
            body = build_ground(s.body, nid, inner)
            children[nid] = (body,)
            return nid
        nid = new_node(LamLabel(()), par)
        body = build_ground(s, nid, env)
        children[nid] = (body,)
        return nid

    def build_ground(s: Term, par: int, env) -> int:
        if isinstance(s, (Var, Const)):
            lab = head_label(s, env)
            if not lab.ty.is_base():
                raise TypeMismatch(f"under-applied head {s}")
            return new_node(lab, par)
        if isinstance(s, App):
            lab = head_label(s.fun, env)
            if lab.ty.width != len(s.args):
                raise TypeMismatch(f"head {s.fun} not fully applied")
            nid = new_node(lab, par)
            kids = tuple(build_lambda(a, nid, env) for a in s.args)
            children[nid] = kids
            return nid
        raise TypeMismatch(f"not eta-long at {s}")

    if isinstance(t, Abs):
        root = build_lambda(t, None, env)
    else:
        if type_of(t, env) != BASE:
            raise TypeMismatch("top-level term must be an abstraction or ground")
        root = new_node(LamLabel(()), None)
        body = build_ground(t, root, env)
        children[root] = (body,)
    return TermTree(labels, children, parent, root)


def from_tree(tree: TermTree, nid: int | None = None) -> Term:
    """Reconstruct the term; inverse of `to_tree` up to alpha-equality."""

    def go(n: int) -> Term:
        lab = tree.labels[n]
        if isinstance(lab, LamLabel):
            body = go(tree.children[n][0])
            return Abs(lab.binders, body) if lab.binders else body
        head: Term = (
            Var(lab.name) if isinstance(lab, VarLabel) else Const(lab.name, lab.ty)
        )
        kids = tree.children[n]
        if not kids:
            return head
        return App(head, tuple(go(k) for k in kids))

    return go(tree.root if nid is None else nid)


def tree_replace(tree: TermTree, target: int, replacement: Term,
                 consts: dict[str, SimpleType] | None = None) -> TermTree:
    """Replace the subtree rooted at `target` (a head node) by a term and
    renumber.  `replacement` must be ground and eta-long."""
    term = _rebuild_with(tree, target, replacement)
    return to_tree(term, consts)


def _rebuild_with(tree: TermTree, target: int, replacement: Term) -> Term:
    def go(n: int) -> Term:
        if n == target:
            return replacement
        lab = tree.labels[n]
        if isinstance(lab, LamLabel):
            body = go(tree.children[n][0])
            return Abs(lab.binders, body) if lab.binders else body
        head: Term = (
            Var(lab.name) if isinstance(lab, VarLabel) else Const(lab.name, lab.ty)
        )
        kids = tree.children[n]
        if not kids:
            return head
        return App(head, tuple(go(k) for k in kids))

    return go(tree.root)
