"""Win probability estimation under clustered outcomes, on a random walk game.

The package simulates a toy football game whose win probability is known
exactly, fits gradient boosted win probability models to play-by-play data
with a controlled number of plays per game, and measures how outcome
clustering degrades accuracy and bootstrap interval coverage.
"""

__version__ = "0.1.0"

from .game import GameConfig, GameState, simulate_game, simulate_games
from .oracle import WpTable, build_wp_table

__all__ = [
    "__version__",
    "GameConfig",
    "GameState",
    "simulate_game",
    "simulate_games",
    "WpTable",
    "build_wp_table",
]
