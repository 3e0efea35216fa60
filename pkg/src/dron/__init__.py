"""Opponent-aware deep Q-learning: DQN, DRON-concat, and DRON-MoE agents
trained against mode-switching opponents in grid soccer and a synthetic
quiz-bowl buzzing game."""

__version__ = "0.1.0"
