"""Open-set recognition with hyperspherical label embeddings, in plain numpy.

Submodules: ``numerics`` (stable primitives, vMF sampling), ``datagen``
(synthetic vMF-mixture benchmarks), ``augment``, ``model``, ``losses``,
``training``, ``scoring``, ``metrics``, ``experiment`` (pipeline glue),
``config`` and ``cli``.
"""
__version__ = "0.1.0"
