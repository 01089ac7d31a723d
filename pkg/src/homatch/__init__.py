"""Higher-order matching via dual interpolation and tree-checking games.

The library verifies candidate solutions of dual interpolation problems
with a one-player tree-checking game, cross-checks against direct
beta-normalization, analyzes solution terms as trees of tiles (plays,
partitions, unfolding, extraction), applies solution-preserving
transformations, and searches for small solutions under explicit bounds.
"""

from .terms import (
    BASE,
    Abs,
    App,
    Const,
    SimpleType,
    Term,
    TermTree,
    Var,
    alpha_equal,
    arrow,
    beta_normalize,
    eta_long,
    from_tree,
    normalize,
    order,
    to_tree,
    type_of,
)
from .syntax import parse_problem_file, parse_problem_text, parse_term, parse_type, print_term
from .problem import (
    Metrics,
    Problem,
    ProblemSets,
    build_sets,
    from_raw,
    ground_closure,
    lower_problem,
    make_problem,
    right_size,
    right_size_of,
    subterms_rel,
    validate,
)
from .game import (
    Play,
    Position,
    all_plays,
    b_partition,
    child_of,
    correspond,
    enumerate_plays,
    initial_position,
    is_descendent,
    is_ri,
    replay,
    similar_except,
    step,
    to_game_tree,
    vary_at,
    verdict,
    verdict_term,
)
from .oracle import OracleReport, solves
from .tiles import (
    Tile,
    TileClass,
    classify,
    dependents,
    family,
    is_embedded,
    is_j_directed,
    p_partition,
    plays_on,
    simple_tiles,
    tile_equiv,
)
from .treetiles import (
    TreeOfTiles,
    extract,
    mark_special,
    saturate_unfolding,
    subterm_property,
    tree_of_tiles,
    unfold,
    unfoldable_at,
)
from .transforms import (
    BoundReport,
    SizeMeasures,
    bounds,
    depth_tiles,
    shrink,
    t1_apply,
    t2_apply,
    total_tiles,
)
from .solver import SearchConfig, enumerate_terms, fuzz, solve

__all__ = [n for n in dir() if not n.startswith("_")]
