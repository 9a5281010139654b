"""Mother groups of polynomial automata and their fractal Schreier graphs."""

from .automata import (
    CapExceeded,
    EXPONENTIAL,
    Generator,
    GroupWord,
    LetterWord,
    MooreDiagram,
    Perm,
    WreathElem,
    act,
    activity_count,
    activity_degree,
    build_moore_diagram,
    equal,
    is_identity,
    parse_generator,
    parse_perm,
    parse_word,
    root_perm,
    section,
)
from .mother import (
    GeneratorMultiset,
    ModelParams,
    direct_action,
    enumerate_generating_multiset,
    enumerate_subgroup_elements,
    make_alpha,
    make_beta,
    make_lambda,
    mother_state_count,
    multiset_size,
    sample_level_subgroup,
)

__version__ = "0.1.0"
