"""Generating families of the degree-d mother group on m letters.

The group is generated, per activity degree k, by triggered wreath
elements: for each word w of length k over the nonzero letters and each
element of Sym(m) wr Sym(m-1) there is one generator that waits until
the first k nonzero letters of the input spell w and then permutes the
next nonzero letter together with the letter following it.  Degree -1
is the plain symmetric group acting on the first letter.

``direct_action`` implements this prose description by scanning the
word; it is deliberately independent of the wreath-recursion engine in
:mod:`mothergroups.automata` and serves as its cross-validation oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .automata import (
    Generator,
    GroupWord,
    LetterWord,
    Perm,
    WreathElem,
    all_perms,
)


@dataclass(frozen=True)
class ModelParams:
    """Activity-degree bound d and alphabet size m."""

    d: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("alphabet size m must be >= 2")
        if self.d < 0:
            raise ValueError("degree bound d must be >= 0")


def make_alpha(k: int, sigma: Perm) -> Generator:
    """Letter-flip family: after k+1 leading nonzero letters all equal to 1,
    permute the following letter by sigma.  k = -1 permutes the first letter."""
    m = sigma.m
    if k == -1:
        return Generator(m, perm=sigma)
    if k < -1:
        raise ValueError("k must be >= -1")
    taus = tuple(sigma if a == 1 else Perm.identity(m) for a in range(1, m))
    elem = WreathElem(Perm.identity(m), taus)
    return Generator(m, trigger=(1,) * k, elem=elem)


def make_beta(k: int, rho: Perm) -> Generator:
    """Nonzero-relabel family: after k leading nonzero letters all equal to 1,
    permute the next nonzero letter by rho (which must fix 0)."""
    m = rho.m
    if k < 0:
        raise ValueError("k must be >= 0")
    if not rho.fixes(0):
        raise ValueError("rho must fix 0")
    taus = tuple(Perm.identity(m) for _ in range(m - 1))
    elem = WreathElem(rho, taus)
    return Generator(m, trigger=(1,) * k, elem=elem)


def make_lambda(trigger: tuple[int, ...], elem: WreathElem) -> Generator:
    """General triggered generator for an explicit trigger word."""
    return Generator(elem.m, trigger=trigger, elem=elem)


def direct_action(g: Generator, v: LetterWord) -> LetterWord:
    """Prose semantics: scan for nonzero letters in reading order, check the
    trigger, then permute the matched letter and its follower.

    Must agree with :func:`mothergroups.automata.act` on every input.
    """
    if g.m != v.m:
        raise ValueError("alphabet mismatch")
    digits = list(v.digits)
    if g.is_root_perm:
        if digits:
            digits[0] = g.perm(digits[0])
        return LetterWord(v.m, tuple(digits))

    nonzero = [i for i, d in enumerate(digits) if d != 0]
    k = len(g.trigger)
    if len(nonzero) < k + 1:
        return v  # target nonzero letter never read
    for t in range(k):
        if digits[nonzero[t]] != g.trigger[t]:
            return v
    target = nonzero[k]
    u = digits[target]
    digits[target] = g.elem.pi(u)
    follower = target + 1
    if follower < len(digits):
        digits[follower] = g.elem.tau(u)(digits[follower])
    return LetterWord(v.m, tuple(digits))


# ---------------------------------------------------------------------------
# The generating multiset
# ---------------------------------------------------------------------------

def all_wreath_elems(m: int) -> list[WreathElem]:
    """All (m-1)! * (m!)^(m-1) elements, in a fixed lexicographic order."""
    # perms of {1..m-1} embedded in Sym(m): exactly those fixing 0
    pis = [p for p in all_perms(m) if p.fixes(0)]
    taus_choices = list(itertools.product(all_perms(m), repeat=m - 1))
    return [WreathElem(pi, taus) for pi in pis for taus in taus_choices]


def all_triggers(k: int, m: int) -> list[tuple[int, ...]]:
    """All length-k words over the nonzero letters, lexicographic."""
    return [tuple(w) for w in itertools.product(range(1, m), repeat=k)]


@dataclass
class GeneratorMultiset:
    """The generating multiset: every root permutation plus, for each
    degree k <= d and trigger word w, every triggered wreath element.
    Identity elements are kept; they become loops in the Schreier graph."""

    params: ModelParams
    generators: list[Generator] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self) -> Iterator[Generator]:
        return iter(self.generators)

    def blocks(self) -> Iterator[tuple[int, Optional[tuple[int, ...]], list[Generator]]]:
        """Yield (degree, trigger, generators) groups in enumeration order."""
        root = [g for g in self.generators if g.is_root_perm]
        yield (-1, None, root)
        rest = [g for g in self.generators if not g.is_root_perm]
        for (k, w), group in itertools.groupby(rest, key=lambda g: (g.degree, g.trigger)):
            yield (k, w, list(group))

    def dump(self) -> str:
        """One token per line with a comment header per block."""
        lines = []
        for k, w, gens in self.blocks():
            if w is None:
                lines.append(f"# degree={k} trigger=")
            else:
                disp = "".join(str(a) for a in reversed(w))
                lines.append(f"# degree={k} trigger={disp}")
            lines.extend(g.token() for g in gens)
        return "\n".join(lines) + "\n"


def multiset_size(p: ModelParams) -> int:
    """m! + sum_{k=0}^{d} (m-1)^k (m-1)! (m!)^(m-1)."""
    m, d = p.m, p.d
    block = math.factorial(m - 1) * math.factorial(m) ** (m - 1)
    return math.factorial(m) + sum((m - 1) ** k * block for k in range(d + 1))


def mother_state_count(p: ModelParams) -> int:
    """Number of automaton states in the standard presentation."""
    return math.factorial(p.m) * (p.d + 1) + math.factorial(p.m - 1) * p.d


def enumerate_generating_multiset(p: ModelParams) -> GeneratorMultiset:
    gens: list[Generator] = []
    gens.extend(Generator(p.m, perm=s) for s in all_perms(p.m))
    elems = all_wreath_elems(p.m)
    for k in range(p.d + 1):
        for w in all_triggers(k, p.m):
            gens.extend(Generator(p.m, trigger=w, elem=e) for e in elems)
    ms = GeneratorMultiset(p, gens)
    assert len(ms) == multiset_size(p)
    return ms


# ---------------------------------------------------------------------------
# Level subgroups
# ---------------------------------------------------------------------------

def _uniform_perm(m: int, rng: np.random.Generator) -> Perm:
    return Perm(tuple(int(x) for x in rng.permutation(m)))


def _uniform_nonzero_perm(m: int, rng: np.random.Generator) -> Perm:
    """Uniform permutation of {1..m-1}, embedded in Sym(m) fixing 0."""
    images = [0] + [int(x) for x in rng.permutation(np.arange(1, m))]
    return Perm(tuple(images))


def uniform_wreath_elem(m: int, rng: np.random.Generator) -> WreathElem:
    pi = _uniform_nonzero_perm(m, rng)
    taus = tuple(_uniform_perm(m, rng) for _ in range(m - 1))
    return WreathElem(pi, taus)


def sample_level_subgroup(k: int, p: ModelParams, rng: np.random.Generator) -> GroupWord:
    """Uniform element of the level-k subgroup.

    For k = -1 this is a uniform root permutation; for k >= 0 the
    subgroup is the direct product over all length-k triggers, so one
    independent uniform wreath element is drawn per trigger.
    """
    if not -1 <= k <= p.d:
        raise ValueError(f"k={k} outside -1..{p.d}")
    if k == -1:
        return GroupWord(p.m, (Generator(p.m, perm=_uniform_perm(p.m, rng)),))
    letters = tuple(
        Generator(p.m, trigger=w, elem=uniform_wreath_elem(p.m, rng))
        for w in all_triggers(k, p.m)
    )
    return GroupWord(p.m, letters)


def enumerate_subgroup_elements(trigger: tuple[int, ...], p: ModelParams,
                                depth: Optional[int] = None) -> list[GroupWord]:
    """All distinct elements triggered by one word, as single-letter words.

    Distinctness is certified by the action on every word of length
    ``depth`` (default: trigger length + 2, enough to expose both the
    permuted letter and its follower).
    """
    if p.m > 3:
        raise ValueError("enumeration is only supported for m <= 3")
    if depth is None:
        depth = len(trigger) + 2
    from .automata import act  # local import to keep module deps one-way

    seen: dict[tuple[int, ...], GroupWord] = {}
    for e in all_wreath_elems(p.m):
        word = GroupWord(p.m, (Generator(p.m, trigger=trigger, elem=e),))
        sig = tuple(
            act(word, LetterWord.from_value(v, depth, p.m)).value
            for v in range(p.m**depth)
        )
        if sig in seen:
            raise AssertionError("wreath parameterization collided; raise depth")
        seen[sig] = word
    return list(seen.values())
