"""Oblivious adversary constructions: anti-Greedy scripts, equalization
probes, the marble-splitting game, and the reinsertion-model attack."""

from . import greedy_attack, marbles, reinsertion  # noqa: F401
