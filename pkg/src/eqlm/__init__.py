"""Q-learning with extreme-learning-machine output-weight updates.

Submodules: ``linalg`` (pseudoinverse), ``elm`` (SLFN and incremental ridge
solver), ``cartpole`` (benchmark task), ``agents`` (Q-network and EQLM
agents), ``metrics`` (learning-curve statistics) and ``runner`` (campaigns).
"""

__version__ = "0.1.0"
