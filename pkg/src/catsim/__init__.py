"""catsim: desk-scale simulator for complex-action quantum dynamics.

Library modules:

- spectral: non-normal eigendecomposition and the proper inner product Q
- model: particle models on a 1D grid, toy and random Hamiltonians
- evolution: forward/backward/normalized time propagation
- observables: normalized matrix elements and their exact identities
- pathsel: imaginary-action path selection
- cli: command-line front end emitting CSV/JSON/figure artifacts
"""

__version__ = "0.1.0"
