"""Ground-truth solution checking by direct beta-normalization.

Independent of the game engine; used for differential testing.  Both
sides of each item are brought to eta-long normal form before comparing,
so beta and beta-eta verdicts coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import terms as T
from .problem import Problem
from .terms import Term, alpha_equal, app, normalize


class ForbiddenConstant(Exception):
    def __init__(self, name: str):
        super().__init__(f"term uses reserved constant {name}")
        self.name = name


@dataclass
class ItemReport:
    normal_form: Term
    holds: bool


@dataclass
class OracleReport:
    items: list[ItemReport]
    overall: bool


def check_constants(t: Term) -> None:
    """Reject terms that use '#'-reserved constants (forbidden constants
    and lowering constants may not appear in candidate solutions; the
    ground filler d is allowed)."""
    from .problem import GROUND_D

    for c in T.constants(t):
        if c.name.startswith("#") and c.name != GROUND_D:
            raise ForbiddenConstant(c.name)


def solves(t: Term, prob: Problem) -> OracleReport:
    """Decide t |= P by normalizing each application t v_1 ... v_n."""
    check_constants(t)
    env = prob.env()
    reports = []
    overall = True
    for it in prob.items:
        nf = normalize(app(t, it.args), env)
        same = alpha_equal(nf, it.rhs)
        holds = same if it.is_eq else not same
        reports.append(ItemReport(nf, holds))
        overall = overall and holds
    return OracleReport(reports, overall)
