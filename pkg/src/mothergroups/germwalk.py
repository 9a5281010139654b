"""Germs, lamps, and random-walk diagnostics.

Every element of the mother group has an eventually constant section
along the all-zero ray; that stable section (the germ) is a product of
triggered generators only.  Its class modulo the subgroup generated by
the lower-degree triggered generators is the lamp.  Along a transient
walk the lamp changes only while the walk fixes the zero ray, which
happens finitely often, so the lamp stabilizes; estimating the hitting
law of the trivial lamp from two starting points exhibits a nonconstant
bounded harmonic function.

Lamp values are never composed in the coset space: all reasoning routes
through germ words and a three-valued certificate (the trivial side is
certified by the exact word problem or a low-degree letter scan, the
nontrivial side by an exact activity-degree witness, and Unknown is an
honest answer).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .automata import (
    CapExceeded,
    Generator,
    GroupWord,
    build_moore_diagram,
    activity_degree,
    equal,
    is_identity,
)
from .mother import ModelParams, enumerate_generating_multiset, sample_level_subgroup
from .resistance import DEFAULT_TOL, resistance_profile
from .schreier import BoundaryPoint

DEFAULT_GERM_CAP = 100_000
DEFAULT_MOORE_CAP = 50_000
DEFAULT_IDENTITY_CAP = 50_000


# ---------------------------------------------------------------------------
# Germ computation
# ---------------------------------------------------------------------------

@dataclass
class GermResult:
    word: GroupWord           # stable section; triggered letters only
    level: int                # sections at this level and deeper all equal word
    ray_digits: tuple[int, ...]  # image of the zero ray (zeros from `level` on)

    def fixes_zero_ray(self) -> bool:
        return all(d == 0 for d in self.ray_digits)


def _section_step(letters: tuple[Generator, ...], digit: int
                  ) -> tuple[tuple[Generator, ...], int]:
    out = []
    d = digit
    for g in letters:
        s = g.section(d)
        if s is not None and not s.is_trivial():
            out.append(s)
        d = g.root_perm()(d)
    return tuple(out), d


def germ(g: GroupWord, cap: Optional[int] = None) -> GermResult:
    """Iterate sections along the zero ray to the stable word.

    The iteration reaches a syntactic fixed point: a root-permutation
    letter survives at most one level, a triggered letter either reads a
    zero (and stays itself) or strictly shrinks, so a conserved weight
    strictly decreases until every letter is triggered and reads zero.
    """
    letters = g.canonical().letters
    if cap is None:
        slack = max((len(x.trigger) for x in letters if not x.is_root_perm),
                    default=0)
        cap = (slack + 4) * max(len(letters), 1) + 8
    digits = []
    level = 0
    while True:
        nxt, d = _section_step(letters, 0)
        if nxt == letters:
            # fixed now and forever: identical input gives identical output
            return GermResult(GroupWord(g.m, letters), level, tuple(digits))
        digits.append(d)
        letters = nxt
        level += 1
        if level > cap:
            raise CapExceeded(f"germ did not stabilize within {cap} levels")


def fixes_zero_ray(g: GroupWord, cap: Optional[int] = None) -> bool:
    """True iff every level's first-letter action fixes 0."""
    return germ(g, cap).fixes_zero_ray()


def stationary_section(s: Generator, ray_digits: Sequence[int]) -> Optional[Generator]:
    """Limit of the sections of a generator along ``ray_digits`` + zeros.

    Triggered states are stable on trailing zeros; a root-permutation
    state dies on the next zero.  None means the identity.
    """
    state: Optional[Generator] = s
    for d in ray_digits:
        if state is None:
            return None
        state = state.section(d)
    if state is None or state.is_root_perm or state.is_trivial():
        return None
    return state


# ---------------------------------------------------------------------------
# Lamp certificates
# ---------------------------------------------------------------------------

VERDICT_TRIVIAL = "trivial"
VERDICT_NONTRIVIAL = "nontrivial"
VERDICT_UNKNOWN = "unknown"


@dataclass(frozen=True)
class LampCertificate:
    verdict: str
    evidence: str  # identity-word | low-degree-letters | activity-degree-d | cap

    def __str__(self) -> str:
        return f"{self.verdict} ({self.evidence})"


def merge_adjacent(letters: Iterable[Generator]) -> tuple[Generator, ...]:
    """Multiply adjacent letters sharing a variant: same-trigger wreath
    elements compose inside their subgroup, adjacent root permutations
    compose in the symmetric group.  Sound, not a full normal form."""
    stack: list[Generator] = []
    for g in letters:
        if g.is_trivial():
            continue
        if stack:
            top = stack[-1]
            if top.is_root_perm and g.is_root_perm:
                merged = Generator(g.m, perm=top.perm * g.perm)
                stack.pop()
                if not merged.is_trivial():
                    stack.append(merged)
                continue
            if (not top.is_root_perm and not g.is_root_perm
                    and top.trigger == g.trigger):
                merged = Generator(g.m, trigger=g.trigger, elem=top.elem * g.elem)
                stack.pop()
                if not merged.is_trivial():
                    stack.append(merged)
                continue
        stack.append(g)
    return tuple(stack)


def lamp_certificate(g: GroupWord, p: ModelParams,
                     moore_cap: int = DEFAULT_MOORE_CAP,
                     germ_word: Optional[GroupWord] = None) -> LampCertificate:
    """Three-valued position of germ(g) in the lamp coset space.

    Trivial is certified by the exact word problem or by every letter
    having degree below d (such words lie in the low-degree subgroup by
    definition).  Nontrivial is certified by exact activity degree d:
    activity counts are subadditive under products, so any product of
    lower-degree generators has activity degree at most d-1.
    """
    word = germ_word if germ_word is not None else germ(g).word
    letters = merge_adjacent(word.letters)
    if any(x.degree > p.d for x in letters):
        raise ValueError("germ word contains letters above the degree bound")
    if not letters:
        return LampCertificate(VERDICT_TRIVIAL, "identity-word")
    if all(x.degree < p.d for x in letters):
        return LampCertificate(VERDICT_TRIVIAL, "low-degree-letters")
    try:
        dg = build_moore_diagram(GroupWord(p.m, letters), cap=moore_cap)
    except CapExceeded:
        return LampCertificate(VERDICT_UNKNOWN, "cap")
    if not dg.active[dg.start]:
        return LampCertificate(VERDICT_TRIVIAL, "identity-word")
    if activity_degree(dg) == p.d:
        return LampCertificate(VERDICT_NONTRIVIAL, "activity-degree-d")
    return LampCertificate(VERDICT_UNKNOWN, "degree-drop")


def lamp_update_check(g: GroupWord, s: Generator,
                      cap: int = DEFAULT_IDENTITY_CAP) -> bool:
    """Verify germ(g*s) = germ(g) * germ(y) with y the stationary section
    of s along the image of the zero ray under g."""
    base = germ(g)
    y = stationary_section(s, base.ray_digits)
    lhs = germ(g * GroupWord(g.m, (s,))).word
    rhs_letters = base.word.letters + ((y,) if y is not None else ())
    return equal(lhs, GroupWord(g.m, rhs_letters), cap)


# ---------------------------------------------------------------------------
# Walk configuration and step sampling
# ---------------------------------------------------------------------------

@dataclass
class WalkConfig:
    """Step distribution and run shape for the random walks.

    ``weights[i]`` is the probability of picking degree k = i - 1; the
    subgroup-uniform mode then draws a uniform element of that level
    subgroup, while multiset-uniform ignores the weights and draws a
    uniform generator of the Schreier multiset.
    """

    steps: int
    trials: int
    seed: int
    weights: Optional[tuple[float, ...]] = None
    mode: str = "subgroup-uniform"
    word_cap: int = 1_000_000
    moore_cap: int = DEFAULT_MOORE_CAP

    def normalized_weights(self, d: int) -> tuple[float, ...]:
        w = self.weights if self.weights is not None else tuple([1.0] * (d + 2))
        if len(w) != d + 2:
            raise ValueError(f"need d+2 = {d + 2} weights, got {len(w)}")
        if any(x < 0 for x in w):
            raise ValueError("weights must be nonnegative")
        total = sum(w)
        if total <= 0:
            raise ValueError("weights must have positive sum")
        return tuple(x / total for x in w)

    def config_hash(self, p: ModelParams, extra: Optional[dict] = None) -> str:
        payload = {
            "d": p.d, "m": p.m, "steps": self.steps, "trials": self.trials,
            "seed": self.seed, "weights": self.weights, "mode": self.mode,
        }
        if extra:
            payload.update(extra)
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _trial_rng(seed: int, trial: int, salt: int = 0) -> np.random.Generator:
    # independent substream per trial: parallel order cannot change results
    return np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=(salt, trial)))


def step_words(p: ModelParams, cfg: WalkConfig, rng: np.random.Generator,
               count: int) -> Iterable[GroupWord]:
    if cfg.mode == "multiset-uniform":
        ms = list(enumerate_generating_multiset(p))
        for _ in range(count):
            g = ms[int(rng.integers(len(ms)))]
            yield GroupWord(p.m, (g,))
    elif cfg.mode == "subgroup-uniform":
        weights = np.array(cfg.normalized_weights(p.d))
        ks = rng.choice(np.arange(-1, p.d + 1), size=count, p=weights)
        for k in ks:
            yield sample_level_subgroup(int(k), p, rng)
    else:
        raise ValueError(f"unknown walk mode {cfg.mode!r}")


# ---------------------------------------------------------------------------
# Walk on the boundary Schreier graph
# ---------------------------------------------------------------------------

def _apply_to_digits(g: Generator, digits: list[int]) -> list[int]:
    """Image of digits + enough trailing zeros; trailing zeros trimmed."""
    work = list(digits) + [0, 0]
    state: Optional[Generator] = g
    for i, d in enumerate(work):
        if state is None:
            break
        work[i] = state.root_perm()(d)
        state = state.section(d)
    while work and work[-1] == 0:
        work.pop()
    return work


def walk_schreier(p: ModelParams, start: BoundaryPoint, cfg: WalkConfig) -> dict:
    """Trajectory statistics for the walk on the zero-ray component."""
    start_digits = [0] * start.max_support()
    for pos, d in start.entries:
        start_digits[pos - 1] = d
    trials = []
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        digits = list(start_digits)
        returns = 0
        last_return = 0
        max_sup = len(digits)
        for step, w in enumerate(step_words(p, cfg, rng, cfg.steps), start=1):
            for g in w.letters:
                digits = _apply_to_digits(g, digits)
            max_sup = max(max_sup, len(digits))
            if digits == start_digits:
                returns += 1
                last_return = step
        trials.append({
            "trial": t,
            "steps": cfg.steps,
            "returns": returns,
            "lastReturn": last_return,
            "maxSupport": max_sup,
            "finalSupport": len(digits),
        })
    return {
        "mode": "schreier",
        "configHash": cfg.config_hash(p, {"kind": "schreier"}),
        "seed": cfg.seed,
        "trials": trials,
        "meanReturns": float(np.mean([t["returns"] for t in trials])) if trials else 0.0,
        "meanLastReturn": float(np.mean([t["lastReturn"] for t in trials])) if trials else 0.0,
    }


# ---------------------------------------------------------------------------
# Walk on the group with incremental germ tracking
# ---------------------------------------------------------------------------

class GroupWalkState:
    """Incrementally maintained germ of a product of steps.

    Appending a step letter s multiplies the germ by the stationary
    section of s along the current image of the zero ray; the image
    itself advances by the action of s.  This is the single-lamp update
    law, applied letter by letter, and is cross-checked against the
    from-scratch germ in the test suite.
    """

    def __init__(self, p: ModelParams, start: Optional[GroupWord] = None,
                 moore_cap: int = DEFAULT_MOORE_CAP):
        self.p = p
        self.moore_cap = moore_cap
        self.digits: list[int] = []
        self.stack: tuple[Generator, ...] = ()
        if start is not None and start.letters:
            base = germ(start)
            self.stack = merge_adjacent(base.word.letters)
            self.digits = list(base.ray_digits)
            while self.digits and self.digits[-1] == 0:
                self.digits.pop()
        self._verdict: Optional[LampCertificate] = None

    def fixes_zero_ray(self) -> bool:
        return not self.digits

    def push_letter(self, s: Generator) -> None:
        y = stationary_section(s, self.digits)
        if y is not None:
            new_stack = merge_adjacent(self.stack + (y,))
            if new_stack != self.stack:
                self.stack = new_stack
                self._verdict = None
        self.digits = _apply_to_digits(s, self.digits)

    def push_word(self, w: GroupWord) -> None:
        for g in w.letters:
            self.push_letter(g)

    def germ_word(self) -> GroupWord:
        return GroupWord(self.p.m, self.stack)

    def certificate(self) -> LampCertificate:
        if self._verdict is None:
            self._verdict = lamp_certificate(
                GroupWord(self.p.m, ()), self.p, moore_cap=self.moore_cap,
                germ_word=self.germ_word())
        return self._verdict


def walk_group(p: ModelParams, cfg: WalkConfig,
               start: Optional[GroupWord] = None,
               step_source: Optional[Callable[[np.random.Generator, int],
                                              Iterable[GroupWord]]] = None,
               rng_salt: int = 1) -> dict:
    """Lamp-certificate trajectories of the group walk.

    Per trial: the verdict after every step (stored as change points),
    the stabilization time (last step whose verdict differs from the
    final one), and the count of times the walk fixes the zero ray.
    """
    trials = []
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t, salt=rng_salt)
        state = GroupWalkState(p, start, moore_cap=cfg.moore_cap)
        if step_source is None:
            steps = step_words(p, cfg, rng, cfg.steps)
        else:
            steps = step_source(rng, cfg.steps)
        verdict = state.certificate().verdict
        changes = [(0, verdict)]
        ray_fix_count = 0
        for step, w in enumerate(steps, start=1):
            state.push_word(w)
            if state.fixes_zero_ray():
                ray_fix_count += 1
            v = state.certificate().verdict
            if v != verdict:
                verdict = v
                changes.append((step, v))
        trials.append({
            "trial": t,
            "steps": cfg.steps,
            "verdictTrace": changes,
            "finalVerdict": verdict,
            "stabilizationTime": changes[-1][0],
            "returns": ray_fix_count,
            "germLength": len(state.stack),
        })
    tallies = {VERDICT_TRIVIAL: 0, VERDICT_NONTRIVIAL: 0, VERDICT_UNKNOWN: 0}
    for tr in trials:
        tallies[tr["finalVerdict"]] += 1
    return {
        "mode": "group",
        "configHash": cfg.config_hash(p, {"kind": "group"}),
        "seed": cfg.seed,
        "trials": trials,
        "finalTallies": tallies,
    }


def estimate_harmonic(p: ModelParams, starts: Sequence[GroupWord],
                      cfg: WalkConfig) -> list[dict]:
    """Monte Carlo estimate of P(final lamp certificate = trivial) per
    start, with binomial standard errors; Unknown verdicts are reported
    separately and never folded into either side."""
    if len(starts) < 2:
        raise ValueError("need at least two starting elements")
    out = []
    for idx, start in enumerate(starts):
        run = walk_group(p, cfg, start=start, rng_salt=1000 + idx)
        tal = run["finalTallies"]
        n = cfg.trials
        p_hat = tal[VERDICT_TRIVIAL] / n if n else 0.0
        stderr = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n) if n else 0.0
        out.append({
            "start": start.token() or "<identity>",
            "trials": n,
            "pTrivial": p_hat,
            "stderr": stderr,
            "pNontrivial": tal[VERDICT_NONTRIVIAL] / n if n else 0.0,
            "pUnknown": tal[VERDICT_UNKNOWN] / n if n else 0.0,
        })
    return out


def separation_sigmas(est_a: dict, est_b: dict) -> float:
    gap = abs(est_a["pTrivial"] - est_b["pTrivial"])
    se = math.hypot(est_a["stderr"], est_b["stderr"])
    return gap / se if se > 0 else math.inf


# ---------------------------------------------------------------------------
# Transience diagnostic
# ---------------------------------------------------------------------------

def transience_report(p: ModelParams, n_list: Sequence[int],
                      tol: float = DEFAULT_TOL) -> dict:
    """Root-to-antiroot resistances across levels, with a boundedness
    verdict: consistent with transience iff the sequence has flattened
    (last value within 5% of the value at the median level)."""
    n_list = sorted(set(n_list))
    prof = resistance_profile(p, "root-antiroot", n_list, tol)
    values = prof.values()
    if len(n_list) < 2:
        verdict = "undetermined"
    else:
        med = n_list[len(n_list) // 2]
        verdict = ("transience-consistent"
                   if values[n_list[-1]] <= 1.05 * values[med]
                   else "not-transience-consistent")
    return {"d": p.d, "m": p.m, "levels": n_list, "values": values,
            "verdict": verdict}
