"""Feldman-Katok, Bowen, mean and mistake-ball orbit metrics, and the
mean-dimension and entropy estimators built on them."""

import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
