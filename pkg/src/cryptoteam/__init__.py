"""Multi-agent cryptocurrency investment research toolkit.

Data ingestion, factor and chart inputs, prompt rendering, expert agents with
team ensembles, quintile portfolios, evaluation and an offline-capable CLI.
"""

__version__ = "0.1.0"
