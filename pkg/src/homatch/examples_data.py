"""The three worked interpolation problems and their solution terms.

Used by the demos and the test suite as curated instances: a 4th-order
problem with two equations, a 3rd-order problem, and a 5th-order problem
(the h/g equation), together with the solution terms whose trees are
traced in the literature-derived golden tests.
"""

from __future__ import annotations

from .problem import Problem, from_raw
from .syntax import parse_problem_text, parse_term
from .terms import Term, normalize

PROBLEM_4TH = """\
base o
const f : o -> o
const a : o
const b : o
var x : ((o -> o) -> o -> o) -> o
eq (\\y1:o->o y2:o. y1 y2) = f a
eq (\\y3:o->o y4:o. y3 (y3 y4)) = f (f a)
"""

# a known solution; its tree has 20 nodes
TERM_4TH = """\
\\z:(o->o)->o->o.
  z (\\x:o. f (z (\\u:o. x) b))
    (z (\\y:o. z (\\s:o. s) y) a)
"""

# the small solution the shrinker should be able to reach
TERM_4TH_SMALL = "\\z:(o->o)->o->o. z (\\x:o. f x) a"

PROBLEM_3RD = """\
base o
const f : ((o -> o) -> o -> o -> o) -> o -> o
const a : o
var x : (o -> o) -> o
eq (\\z:o. z) = f (\\x1:o->o x2:o x3:o. x1 x3) a
"""

TERM_3RD = """\
\\y:o->o. y (y (f (\\x:o->o z1:o z2:o. x (y z2)) (y a)))
"""

TERM_3RD_SMALL = "\\y:o->o. f (\\x:o->o z1:o z2:o. x z2) a"

PROBLEM_5TH = """\
base o
const g : o -> o
const h : o -> o
const a : o
var x : (((o -> o) -> o) -> (o -> o) -> o) -> o
eq (\\y1:(o->o)->o y2:o->o. y1 (\\y3:o. y2 (y1 (\\y4:o. y3)))) = h (g (h (h a)))
"""

TERM_5TH = """\
\\z:((o->o)->o)->(o->o)->o.
  z (\\z1:o->o. z (\\x1:o->o. z1 (x1 (z1 a))) (\\x2:o. g x2))
    (\\z2:o. h z2)
"""


def problem_4th() -> Problem:
    return from_raw(parse_problem_text(PROBLEM_4TH))


def problem_3rd() -> Problem:
    return from_raw(parse_problem_text(PROBLEM_3RD))


def problem_5th() -> Problem:
    return from_raw(parse_problem_text(PROBLEM_5TH))


def _term(src: str, prob: Problem) -> Term:
    t = parse_term(src, prob.constants)
    return normalize(t, prob.env())


def term_4th() -> Term:
    return _term(TERM_4TH, problem_4th())


def term_4th_small() -> Term:
    return _term(TERM_4TH_SMALL, problem_4th())


def term_3rd() -> Term:
    return _term(TERM_3RD, problem_3rd())


def term_3rd_small() -> Term:
    return _term(TERM_3RD_SMALL, problem_3rd())


def term_5th() -> Term:
    return _term(TERM_5TH, problem_5th())
