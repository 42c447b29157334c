"""Scoring functions: weighted Fennel gain, LDG score, block selection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

# least-squares fits on [0, 1]: log2(1 + t) and 2**t, highest degree first
_LOG2_POLY = (-0.08001247860645327, 0.31547361131736107, -0.6729404938364197, 1.4373044220650293,
              9.99828090035387e-05)
_EXP2_POLY = (0.013683996540552692, 0.051717826459022266, 0.24162116313584772, 0.6929696205999832,
              1.0000035900178335)


def alpha(n: int, m: int, k: int, gamma: float = 1.5) -> float:
    """Fennel's penalty scale m * k**(gamma-1) / n**gamma (sqrt(k) m / n^1.5 for gamma = 3/2)."""
    if n < 1:
        raise ValueError("alpha needs n >= 1")
    if k < 1:
        raise ValueError("alpha needs k >= 1")
    if gamma == 1.5:
        return math.sqrt(k) * m / (n * math.sqrt(n))
    return m * k ** (gamma - 1) / n ** gamma


@dataclass(frozen=True)
class FennelParams:
    alpha: float
    l_max: int
    gamma: float = 1.5
    tuning: float = 1.0
    use_approx_pow: bool = False

    def __post_init__(self):
        if self.gamma <= 1 or self.tuning <= 0 or self.alpha < 0:
            raise ValueError("need gamma > 1, tuning > 0, alpha >= 0")

    @property
    def coef(self) -> float:
        """tuning * alpha * gamma, the factor in front of c(V_i)**(gamma - 1)."""
        return self.tuning * self.alpha * self.gamma

    @property
    def exponent(self) -> float:
        return self.gamma - 1.0


@numba.njit(cache=True)
def fast_pow(x, p):
    """x**p for x > 0 from the float's exponent plus polynomial log2/exp2 of the mantissa.

    Relative error stays below 1e-4 for p <= 1.
    """
    mant, e = math.frexp(x)
    t = 2.0 * mant - 1.0
    lg = _LOG2_POLY[0]
    for c in _LOG2_POLY[1:]:
        lg = lg * t + c
    y = p * ((e - 1) + lg)
    i = math.floor(y)
    f = y - i
    ex = _EXP2_POLY[0]
    for c in _EXP2_POLY[1:]:
        ex = ex * f + c
    return math.ldexp(ex, int(i))


@numba.njit(cache=True)
def penalty(block_weight, coef, exponent, approx):
    if block_weight <= 0:
        return 0.0
    if approx:
        return coef * fast_pow(float(block_weight), exponent)
    return coef * float(block_weight) ** exponent


def fennel_penalty(block_weight: int, params: FennelParams) -> float:
    return penalty(block_weight, params.coef, params.exponent, params.use_approx_pow)


def fennel_gain(connectivity: float, node_weight: int, block_weight: int, params: FennelParams) -> float:
    """Edge weight from u into block i minus c(u) * f(c(V_i))."""
    return connectivity - node_weight * fennel_penalty(block_weight, params)


def ldg_score(shared_neighbors: float, block_weight: int, l_max: int) -> float:
    return shared_neighbors * (1.0 - block_weight / l_max)


@numba.njit(cache=True)
def select_block(scores, feasible, block_weights, rng, prefer_light=False):
    """Argmax over feasible blocks, ties broken uniformly at random.

    Exactly one draw is taken from ``rng`` per call, whatever the outcome. With
    ``prefer_light`` ties are first narrowed to the lightest maximizers. When
    no block is feasible the lightest block (lowest id on ties) is returned.
    Returns ``(block, fell_back)``.
    """
    k = scores.shape[0]
    best = -np.inf
    light = np.iinfo(np.int64).max
    count = 0
    for i in range(k):
        if not feasible[i]:
            continue
        s = scores[i]
        w = block_weights[i] if prefer_light else 0
        if s > best or (s == best and w < light):
            best = s
            light = w
            count = 1
        elif s == best and w == light:
            count += 1
    # a single uniform double per call; integers() skips the draw for a range of one
    r = int(rng.random() * max(count, 1))
    if count == 0:
        return np.argmin(block_weights), True
    for i in range(k):
        if feasible[i] and scores[i] == best and (not prefer_light or block_weights[i] == light):
            if r == 0:
                return i, False
            r -= 1
    return -1, False  # unreachable
