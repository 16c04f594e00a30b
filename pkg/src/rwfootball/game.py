"""Random walk football.

The ball sits on yardlines ``1..L-1`` between plays and moves one yardline
left or right per play.  Reaching yardline 0 is a touchdown for team one
(+1), reaching ``L`` a touchdown for team two (-1); either way the ball
goes back to midfield.  After ``T`` plays a tie is settled by a fair coin.

Randomness convention: a game consumes ``T + 1`` uniform doubles from its
stream, one per play (``u < 0.5`` moves the ball right, toward team two's
end zone) followed by the overtime coin (``u < 0.5`` means team one wins).
Because doubles are drawn in row-major order, :func:`simulate_games` with
``n`` games reproduces ``n`` consecutive calls of :func:`simulate_game` on
the same generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GameConfig",
    "GameState",
    "GameTrace",
    "GameBatch",
    "step",
    "step_arrays",
    "outcome",
    "draws_to_steps",
    "simulate_game",
    "simulate_games",
    "play_out",
]


@dataclass(frozen=True)
class GameConfig:
    """Rule parameters: field length ``L`` (even) and plays per game ``T``."""

    L: int = 4
    T: int = 56

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2 or self.L % 2:
            raise ValueError(f"L must be an even integer >= 2, got {self.L}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")

    @property
    def midfield(self) -> int:
        return self.L // 2


@dataclass(frozen=True)
class GameState:
    """Situation at the start of play ``t``."""

    t: int
    x: int
    s: int


@dataclass(frozen=True)
class GameTrace:
    config: GameConfig
    plays: tuple[GameState, ...]
    final_s: int
    y: int


@dataclass(frozen=True)
class GameBatch:
    """Many games at once; ``x`` and ``s`` have shape ``(n, T)``.

    Column ``j`` holds the state at the start of play ``t = j + 1``.
    """

    config: GameConfig
    x: np.ndarray
    s: np.ndarray
    final_s: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def trace(self, g: int) -> GameTrace:
        plays = tuple(
            GameState(j + 1, int(self.x[g, j]), int(self.s[g, j]))
            for j in range(self.config.T)
        )
        return GameTrace(self.config, plays, int(self.final_s[g]), int(self.y[g]))


def step(state: GameState, xi: int, config: GameConfig) -> GameState:
    """Apply one play with ball movement ``xi`` in {-1, +1}."""
    if xi not in (-1, 1):
        raise ValueError(f"xi must be -1 or +1, got {xi!r}")
    if not 1 <= state.x <= config.L - 1:
        raise ValueError(f"field position {state.x} outside 1..{config.L - 1}")
    pos = state.x + xi
    if pos == 0:
        return GameState(state.t + 1, config.midfield, state.s + 1)
    if pos == config.L:
        return GameState(state.t + 1, config.midfield, state.s - 1)
    return GameState(state.t + 1, pos, state.s)


def step_arrays(x: np.ndarray, s: np.ndarray, xi: np.ndarray, L: int):
    """Vectorized :func:`step` over arrays of positions and scores."""
    pos = x + xi
    td = pos == 0
    opp_td = pos == L
    s_new = s + td.astype(s.dtype) - opp_td.astype(s.dtype)
    x_new = np.where(td | opp_td, L // 2, pos)
    return x_new, s_new


def outcome(final_s: int, coin: int) -> int:
    """Win indicator for team one; ``coin`` settles a tie."""
    if final_s > 0:
        return 1
    if final_s < 0:
        return 0
    if coin not in (0, 1):
        raise ValueError(f"coin must be 0 or 1, got {coin!r}")
    return int(coin)


def draws_to_steps(u: np.ndarray) -> np.ndarray:
    return np.where(u < 0.5, 1, -1).astype(np.int64)


def _coin(u):
    return (np.asarray(u) < 0.5).astype(np.int64)


def simulate_game(
    config: GameConfig, rng: np.random.Generator | None = None, xi=None, coin: int | None = None
) -> GameTrace:
    """Simulate one game from kickoff.

    Either pass a generator, or an explicit ``xi`` sequence of length ``T``
    (and a ``coin`` if the game could end tied).
    """
    if xi is None:
        u = rng.random(config.T + 1)
        xi = draws_to_steps(u[:-1])
        coin = int(_coin(u[-1]))
    elif len(xi) != config.T:
        raise ValueError(f"need {config.T} steps, got {len(xi)}")
    state = GameState(1, config.midfield, 0)
    plays = []
    for d in xi:
        plays.append(state)
        state = step(state, int(d), config)
    if state.s == 0 and coin is None:
        raise ValueError("tied game needs an overtime coin")
    y = outcome(state.s, 0 if coin is None else coin)
    return GameTrace(config, tuple(plays), state.s, y)


def simulate_games(config: GameConfig, n: int, rng: np.random.Generator) -> GameBatch:
    """Simulate ``n`` independent games from kickoff, vectorized over games."""
    T, L = config.T, config.L
    u = rng.random((n, T + 1))
    xi = draws_to_steps(u[:, :T])
    xs = np.empty((n, T), dtype=np.int64)
    ss = np.empty((n, T), dtype=np.int64)
    x = np.full(n, config.midfield, dtype=np.int64)
    s = np.zeros(n, dtype=np.int64)
    for j in range(T):
        xs[:, j] = x
        ss[:, j] = s
        x, s = step_arrays(x, s, xi[:, j], L)
    coin = _coin(u[:, T])
    y = np.where(s > 0, 1, np.where(s < 0, 0, coin)).astype(np.int64)
    return GameBatch(config, xs, ss, s, y)


def play_out(
    config: GameConfig, state: GameState, n: int, rng: np.random.Generator,
    chunk: int = 200_000,
) -> np.ndarray:
    """Win indicators of ``n`` independent completions starting at ``state``.

    ``state.t`` may be ``T + 1`` (game over, only the coin remains).
    """
    if not 1 <= state.t <= config.T + 1:
        raise ValueError(f"t={state.t} outside 1..{config.T + 1}")
    if not 1 <= state.x <= config.L - 1:
        raise ValueError(f"field position {state.x} outside 1..{config.L - 1}")
    remaining = config.T + 1 - state.t
    out = np.empty(n, dtype=np.int64)
    for lo in range(0, n, chunk):
        m = min(chunk, n - lo)
        u = rng.random((m, remaining + 1))
        x = np.full(m, state.x, dtype=np.int64)
        s = np.full(m, state.s, dtype=np.int64)
        for j in range(remaining):
            x, s = step_arrays(x, s, draws_to_steps(u[:, j]), config.L)
        coin = _coin(u[:, remaining])
        out[lo:lo + m] = np.where(s > 0, 1, np.where(s < 0, 0, coin))
    return out
