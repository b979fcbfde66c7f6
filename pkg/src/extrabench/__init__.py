"""extrabench: desk-scale extrapolation benchmarks.

Three experiment families, all deterministic per seed:

- ``identity``: learning the identity map on 5-bit codes from even numbers
  only, with five model parameterizations that succeed or fail at
  extrapolating to the odd numbers.
- ``relation``: a toy premise/hypothesis classifier comparing a plain
  concatenation head against a symmetrized two-stage head on reversed
  contradictions.
- ``embeddings``: CBOW word vectors with a linear score versus a
  broken-stick score, evaluated on offset analogies.
"""

__version__ = "0.1.0"
