"""Birth-death Markov chain primitives

This module defines the immutable numerical types used everywhere else:

1. :py:class:`BirthDeathChain`, a tridiagonal stochastic matrix stored as its
   up- and down-probabilities,
2. :py:class:`Arm`, a chain with a reward per state,
3. :py:class:`RestlessInstance`, a set of arms sharing a state space plus the
   initial state of each arm.

States are 0-based, state 0 is the one with the highest reward.  Arms are
referred to by action index, ``1, ..., N``, action 0 being the default arm
that is never stored on an instance.
"""

from __future__ import annotations

import threading
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh_tridiagonal

from .exceptions import DegenerateChainError, InvalidInstanceError, LengthMismatchError

ProbVector = NDArray[np.float64]

COMPARISON_SLACK = 1e-12

DEFAULT_CACHE_CAP = 4096

ASSUMPTION_NAMES = ["A1", "A2", "A3", "A4"]


def _frozen(values: Any) -> NDArray[np.float64]:
    the_array = np.array(values, dtype=np.float64).ravel()
    the_array.setflags(write=False)
    return the_array


class BirthDeathChain:
    """A birth-death chain on ``num_states`` states

    Parameters
    ----------
    up:
        ``up[k] = P(k, k+1)``, length ``num_states - 1``

    down:
        ``down[k] = P(k+1, k)``, length ``num_states - 1``

    cache_cap:
        Largest power cached by :py:meth:`row_power`; beyond it the
        stationary distribution is returned

    Notes
    -----
    The stay probabilities are implied, ``P(k, k) = 1 - P(k, k+1) - P(k, k-1)``,
    so every row sums to one by construction.

    The object is immutable apart from the row-power cache, which is guarded
    by a lock, so a chain can be shared between threads.  Pickling drops the
    cache and the lock.
    """

    def __init__(
        self,
        up: Sequence[float] | NDArray[np.float64],
        down: Sequence[float] | NDArray[np.float64],
        cache_cap: int = DEFAULT_CACHE_CAP,
    ) -> None:
        self._up = _frozen(up)
        self._down = _frozen(down)
        if self._up.size != self._down.size:
            raise LengthMismatchError(
                f"up has {self._up.size} entries but down has {self._down.size}"
            )
        for label, values in [("up", self._up), ("down", self._down)]:
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise ValueError(f"{label} probabilities must lie in [0, 1]: {values}")
        self._num_states = self._up.size + 1
        stay = np.ones(self._num_states)
        stay[:-1] -= self._up
        stay[1:] -= self._down
        if np.any(stay < -COMPARISON_SLACK):
            raise ValueError(
                f"up and down probabilities leave a negative stay probability: {stay}"
            )
        self._stay = _frozen(np.clip(stay, 0.0, 1.0))
        self._cache_cap = cache_cap
        self._matrix: NDArray[np.float64] | None = None
        self._stationary: ProbVector | None = None
        self._cache: dict[tuple[int, int], ProbVector] = {}
        self._lock = threading.Lock()

    def __getstate__(self) -> dict[str, Any]:
        return dict(up=self._up, down=self._down, cache_cap=self._cache_cap)

    def __setstate__(self, state: dict[str, Any]) -> None:
        self.__init__(state["up"], state["down"], state["cache_cap"])  # type: ignore[misc]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BirthDeathChain):
            return NotImplemented
        return bool(
            np.array_equal(self._up, other._up) and np.array_equal(self._down, other._down)
        )

    def __hash__(self) -> int:
        return hash((self._up.tobytes(), self._down.tobytes()))

    def __repr__(self) -> str:
        return f"BirthDeathChain(up={self._up.tolist()}, down={self._down.tolist()})"

    @property
    def num_states(self) -> int:
        """Number of states M"""
        return self._num_states

    @property
    def up(self) -> NDArray[np.float64]:
        """Up-probabilities, ``up[k] = P(k, k+1)``"""
        return self._up

    @property
    def down(self) -> NDArray[np.float64]:
        """Down-probabilities, ``down[k] = P(k+1, k)``"""
        return self._down

    @property
    def stay(self) -> NDArray[np.float64]:
        """Diagonal of the transition matrix"""
        return self._stay

    @property
    def cache_cap(self) -> int:
        return self._cache_cap

    @property
    def matrix(self) -> NDArray[np.float64]:
        """Dense transition matrix"""
        if self._matrix is None:
            matrix = np.diag(self._stay)
            idx = np.arange(self._num_states - 1)
            matrix[idx, idx + 1] = self._up
            matrix[idx + 1, idx] = self._down
            matrix.setflags(write=False)
            self._matrix = matrix
        return self._matrix

    def row(self, state: int) -> ProbVector:
        """Return row ``state`` of the transition matrix"""
        return self.matrix[state].copy()

    def stationary_distribution(self) -> ProbVector:
        """Return the stationary distribution from detailed balance

        ``d[k+1] / d[k] = up[k] / down[k]``

        Raises
        ------
        DegenerateChainError
            If any down-probability of a multi-state chain is zero
        """
        if self._stationary is not None:
            return self._stationary.copy()
        if self._num_states == 1:
            dist = np.ones(1)
        else:
            if np.any(self._down <= 0.0):
                raise DegenerateChainError(
                    f"Chain has a zero down-probability, down={self._down.tolist()}"
                )
            ratios = np.concatenate([[1.0], np.cumprod(self._up / self._down)])
            dist = ratios / ratios.sum()
        dist.setflags(write=False)
        self._stationary = dist
        return dist.copy()

    def slem(self) -> float:
        """Return the second largest eigenvalue modulus

        The chain is reversible, so ``V^-1 P V`` is symmetric for the diagonal
        ``V`` built from detailed balance.  The symmetric matrix keeps the
        diagonal of ``P`` and has ``sqrt(up[k] * down[k])`` off the diagonal.
        """
        if self._num_states == 1:
            return 0.0
        if np.any(self._down <= 0.0):
            raise DegenerateChainError(
                f"Chain has a zero down-probability, down={self._down.tolist()}"
            )
        off_diagonal = np.sqrt(self._up * self._down)
        eigenvalues = eigh_tridiagonal(
            np.array(self._stay), off_diagonal, eigvals_only=True
        )
        # ascending order, the last one is the unit eigenvalue
        return float(np.max(np.abs(eigenvalues[:-1])))

    def _advance(self, vector: ProbVector) -> ProbVector:
        return np.dot(vector, self.matrix)

    def row_power(self, state: int, tau: int, use_cache: bool = True) -> ProbVector:
        """Return ``e_state P^tau``

        Parameters
        ----------
        state:
            Starting state

        tau:
            Number of steps, must be >= 0

        use_cache:
            If False, recompute from scratch, the result is bit-identical

        Notes
        -----
        For ``tau`` beyond ``cache_cap`` the stationary distribution is
        returned.
        """
        if not 0 <= state < self._num_states:
            raise IndexError(f"State {state} not in [0, {self._num_states})")
        if tau < 0:
            raise ValueError(f"tau must be >= 0, got {tau}")
        if self._num_states == 1:
            return np.ones(1)
        if tau > self._cache_cap:
            try:
                return self.stationary_distribution()
            except DegenerateChainError:
                tau = self._cache_cap
        if not use_cache:
            vector = np.zeros(self._num_states)
            vector[state] = 1.0
            for _ in range(tau):
                vector = self._advance(vector)
            return vector
        with self._lock:
            cached = self._cache.get((state, tau))
            if cached is not None:
                return cached.copy()
            start = tau
            while start > 0 and (state, start) not in self._cache:
                start -= 1
            if start == 0:
                vector = np.zeros(self._num_states)
                vector[state] = 1.0
                self._cache[(state, 0)] = vector
            else:
                vector = self._cache[(state, start)]
            for step in range(start + 1, tau + 1):
                vector = self._advance(vector)
                self._cache[(state, step)] = vector
            return vector.copy()


class Arm:
    """A chain together with its reward vector

    Parameters
    ----------
    chain:
        The arm's birth-death chain

    rewards:
        ``rewards[k]`` is the mean reward for pulling the arm in state k,
        values in [0, 1]
    """

    def __init__(self, chain: BirthDeathChain, rewards: Sequence[float] | NDArray[np.float64]):
        self._chain = chain
        self._rewards = _frozen(rewards)
        if self._rewards.size != chain.num_states:
            raise LengthMismatchError(
                f"Arm has {self._rewards.size} rewards for {chain.num_states} states"
            )
        if np.any(self._rewards < 0.0) or np.any(self._rewards > 1.0):
            raise ValueError(f"Rewards must lie in [0, 1]: {self._rewards.tolist()}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Arm):
            return NotImplemented
        return self._chain == other._chain and bool(
            np.array_equal(self._rewards, other._rewards)
        )

    def __hash__(self) -> int:
        return hash((hash(self._chain), self._rewards.tobytes()))

    def __repr__(self) -> str:
        return f"Arm({self._chain!r}, rewards={self._rewards.tolist()})"

    @property
    def chain(self) -> BirthDeathChain:
        return self._chain

    @property
    def rewards(self) -> NDArray[np.float64]:
        return self._rewards

    @property
    def num_states(self) -> int:
        return self._chain.num_states

    def stationary_reward(self) -> float:
        """Long-run average reward of always pulling this arm"""
        return float(np.dot(self._chain.stationary_distribution(), self._rewards))


class RestlessInstance:
    """A restless bandit problem: N arms and their initial states

    Parameters
    ----------
    arms:
        The arms, all with the same number of states

    initial_states:
        Initial state of each arm
    """

    def __init__(self, arms: Sequence[Arm], initial_states: Sequence[int]) -> None:
        self._arms = tuple(arms)
        if not self._arms:
            raise InvalidInstanceError("An instance needs at least one arm")
        num_states = {arm_.num_states for arm_ in self._arms}
        if len(num_states) != 1:
            raise InvalidInstanceError(
                f"All arms must share the number of states, got {sorted(num_states)}"
            )
        self._num_states = num_states.pop()
        self._initial_states = tuple(int(state_) for state_ in initial_states)
        if len(self._initial_states) != len(self._arms):
            raise InvalidInstanceError(
                f"{len(self._initial_states)} initial states given for {len(self._arms)} arms"
            )
        for state_ in self._initial_states:
            if not 0 <= state_ < self._num_states:
                raise InvalidInstanceError(
                    f"Initial state {state_} not in [0, {self._num_states})"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RestlessInstance):
            return NotImplemented
        return self._arms == other._arms and self._initial_states == other._initial_states

    def __hash__(self) -> int:
        return hash((self._arms, self._initial_states))

    def __repr__(self) -> str:
        return f"RestlessInstance(N={self.num_arms}, M={self.num_states}, s0={self._initial_states})"

    @property
    def arms(self) -> tuple[Arm, ...]:
        return self._arms

    @property
    def initial_states(self) -> tuple[int, ...]:
        return self._initial_states

    @property
    def num_arms(self) -> int:
        return len(self._arms)

    @property
    def num_states(self) -> int:
        return self._num_states

    def arm(self, action: int) -> Arm:
        """Return the arm pulled by ``action``, in 1..N"""
        if not 1 <= action <= len(self._arms):
            raise IndexError(f"Arm {action} not in [1, {len(self._arms)}]")
        return self._arms[action - 1]

    def reward_matrix(self) -> NDArray[np.float64]:
        """Return the (N, M) array of mean rewards"""
        return np.vstack([arm_.rewards for arm_ in self._arms])

    def replace_rewards(self, rewards: NDArray[np.float64]) -> RestlessInstance:
        """Return a copy with the (N, M) reward array swapped"""
        return RestlessInstance(
            [Arm(arm_.chain, rewards[i]) for i, arm_ in enumerate(self._arms)],
            self._initial_states,
        )


class AssumptionCheck:
    """Outcome of one assumption for one arm

    ``state`` and ``value`` give the first violation, ``note`` any remark
    """

    def __init__(
        self,
        passed: bool,
        state: tuple[int, ...] | None = None,
        value: float | None = None,
        note: str = "",
    ) -> None:
        self.passed = passed
        self.state = state
        self.value = value
        self.note = note

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = dict(passed=self.passed)
        if self.state is not None:
            out["state"] = list(self.state)
            out["value"] = self.value
        if self.note:
            out["note"] = self.note
        return out


class AssumptionReport:
    """Per-arm, per-assumption validation results"""

    def __init__(self, c1: float, checks: list[dict[str, AssumptionCheck]]) -> None:
        self.c1 = c1
        self.checks = checks

    @property
    def passed(self) -> bool:
        """True iff all four assumptions hold for every arm"""
        return all(check_.passed for arm_ in self.checks for check_ in arm_.values())

    def assumption_passed(self, assumption: str) -> bool:
        """True iff ``assumption`` holds for every arm"""
        return all(arm_[assumption].passed for arm_ in self.checks)

    def failures(self) -> list[tuple[int, str, AssumptionCheck]]:
        """List of (arm, assumption, check) for every failed check, arms are 1-based"""
        return [
            (i + 1, key, check_)
            for i, arm_ in enumerate(self.checks)
            for key, check_ in arm_.items()
            if not check_.passed
        ]

    def to_dict(self) -> dict[str, Any]:
        return dict(
            c1=self.c1,
            passed=self.passed,
            arms=[
                {key: check_.to_dict() for key, check_ in arm_.items()}
                for arm_ in self.checks
            ],
        )


def _check_arm(arm: Arm, c1: float) -> dict[str, AssumptionCheck]:
    chain = arm.chain
    checks: dict[str, AssumptionCheck] = {}

    rising = np.nonzero(arm.rewards[:-1] < arm.rewards[1:] - COMPARISON_SLACK)[0]
    if rising.size:
        k = int(rising[0])
        checks["A1"] = AssumptionCheck(
            False, (k, k + 1), float(arm.rewards[k + 1] - arm.rewards[k])
        )
    else:
        checks["A1"] = AssumptionCheck(True)

    checks["A2"] = AssumptionCheck(True, note="tridiagonal by representation")

    pair_sums = chain.up + chain.down
    too_big = np.nonzero(pair_sums > 1.0 + COMPARISON_SLACK)[0]
    if too_big.size:
        k = int(too_big[0])
        checks["A3"] = AssumptionCheck(False, (k, k + 1), float(pair_sums[k]))
    else:
        checks["A3"] = AssumptionCheck(True)

    a4 = AssumptionCheck(
        True, note="boundary rows only constrain their existing neighbours"
    )
    matrix = chain.matrix
    for j in range(chain.num_states):
        for k in range(max(0, j - 1), min(chain.num_states, j + 2)):
            if matrix[j, k] < c1 - COMPARISON_SLACK:
                a4 = AssumptionCheck(False, (j, k), float(matrix[j, k]), a4.note)
                break
        if not a4.passed:
            break
    checks["A4"] = a4
    return checks


def validate_assumptions(instance: RestlessInstance, c1: float) -> AssumptionReport:
    """Check the four modelling assumptions on every arm

    A1: rewards nonincreasing in the state index.
    A2: tridiagonal transitions.
    A3: ``P(k, k+1) + P(k+1, k) <= 1``.
    A4: every entry with ``|j - k| <= 1`` is at least ``c1``.

    Violations are reported, never raised.
    """
    if not 0.0 < c1 < 1.0:
        raise ValueError(f"c1 must be in (0, 1), got {c1}")
    return AssumptionReport(c1, [_check_arm(arm_, c1) for arm_ in instance.arms])


def stationary_distribution(chain: BirthDeathChain) -> ProbVector:
    """Return the stationary distribution of ``chain``"""
    return chain.stationary_distribution()


def slem(chain: BirthDeathChain) -> float:
    """Return the second largest eigenvalue modulus of ``chain``"""
    return chain.slem()


def row_power(chain: BirthDeathChain, state: int, tau: int) -> ProbVector:
    """Return ``e_state P^tau`` for ``chain``"""
    return chain.row_power(state, tau)


def transition_matrix(chain: BirthDeathChain) -> NDArray[np.float64]:
    """Return a writable copy of the dense transition matrix"""
    return np.array(chain.matrix)


def prefix_dominates(
    v: Sequence[float] | ProbVector,
    w: Sequence[float] | ProbVector,
    slack: float = COMPARISON_SLACK,
) -> bool:
    """Return True if every prefix sum of v is at least that of w

    ``v`` dominating ``w`` means v puts more mass on the better, lower, states.

    Raises
    ------
    LengthMismatchError
        If the vectors have different lengths
    """
    v_array = np.asarray(v, dtype=np.float64)
    w_array = np.asarray(w, dtype=np.float64)
    if v_array.shape != w_array.shape:
        raise LengthMismatchError(f"Lengths differ: {v_array.shape} vs {w_array.shape}")
    return bool(np.all(np.cumsum(v_array) >= np.cumsum(w_array) - slack))


def rows_dominate(chain: BirthDeathChain, other: BirthDeathChain) -> bool:
    """True if every row of ``chain`` prefix-dominates the same row of ``other``"""
    return all(
        prefix_dominates(chain.matrix[k], other.matrix[k]) for k in range(chain.num_states)
    )


def d_min(instance: RestlessInstance) -> float:
    """Smallest stationary probability over all arms and states"""
    return float(
        min(np.min(arm_.chain.stationary_distribution()) for arm_ in instance.arms)
    )


def lambda_max(instance: RestlessInstance) -> float:
    """Largest SLEM over the arms"""
    return float(max(arm_.chain.slem() for arm_ in instance.arms))


def shift_toward_lower(chain: BirthDeathChain, delta: float) -> BirthDeathChain:
    """Move ``delta`` of probability one step down in every row

    Interior row k loses ``delta_k = min(delta, P(k, k+1))`` on its up entry and
    gains it on its down entry.  Row 0 moves the mass from ``P(0, 1)`` to
    ``P(0, 0)`` and the last row from ``P(M-1, M-1)`` to ``P(M-1, M-2)``, with
    the same clamping, so every row of the result prefix-dominates the
    corresponding input row.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    num_states = chain.num_states
    if num_states == 1:
        return BirthDeathChain([], [], chain.cache_cap)
    up = np.array(chain.up)
    down = np.array(chain.down)
    shifts = np.minimum(delta, chain.up)
    up -= shifts
    # row k, k >= 1, adds its own shift to P(k, k-1) = down[k-1]
    down[:-1] += shifts[1:]
    down[-1] += min(delta, chain.stay[-1])
    return BirthDeathChain(np.clip(up, 0.0, 1.0), np.clip(down, 0.0, 1.0), chain.cache_cap)


def shift_instance(
    instance: RestlessInstance, delta: float, reward_bonus: float = 0.0
) -> RestlessInstance:
    """Apply :py:func:`shift_toward_lower` to every arm and raise the rewards

    Rewards become ``min(r + reward_bonus, 1)``.
    """
    return RestlessInstance(
        [
            Arm(
                shift_toward_lower(arm_.chain, delta),
                np.minimum(arm_.rewards + reward_bonus, 1.0),
            )
            for arm_ in instance.arms
        ],
        instance.initial_states,
    )


def random_chain(
    num_states: int, c1: float, rng: np.random.Generator
) -> BirthDeathChain:
    """Draw a chain satisfying A2-A4 with constant ``c1``

    Up and down probabilities are uniform on ``[c1, (1 - c1) / 2]``, which
    needs ``c1 <= 1/3``.
    """
    if not 0.0 < c1 <= 1.0 / 3.0:
        raise ValueError(f"random_chain needs c1 in (0, 1/3], got {c1}")
    high = (1.0 - c1) / 2.0
    up = rng.uniform(c1, high, size=num_states - 1)
    down = rng.uniform(c1, high, size=num_states - 1)
    return BirthDeathChain(up, down)


def random_instance(
    num_arms: int, num_states: int, c1: float, rng: np.random.Generator
) -> RestlessInstance:
    """Draw an instance satisfying A1-A4 with constant ``c1``"""
    arms = []
    for _ in range(num_arms):
        rewards = np.sort(rng.uniform(0.0, 1.0, size=num_states))[::-1]
        arms.append(Arm(random_chain(num_states, c1, rng), rewards))
    initial_states = rng.integers(0, num_states, size=num_arms)
    return RestlessInstance(arms, initial_states.tolist())
