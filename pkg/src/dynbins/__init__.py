"""dynbins: a simulation laboratory for dynamic two-choice balls-and-bins.

Core pieces: an insert/delete state machine with pluggable placement
strategies (engine, strategies), the stone-game coupling harness
(stonegame), oblivious adversary constructions (adversaries), and the
experiment/statistics layer (harness, cli).
"""

from . import adversaries, engine, harness, rng, scripts, stonegame, strategies  # noqa: F401

__version__ = "0.1.0"
