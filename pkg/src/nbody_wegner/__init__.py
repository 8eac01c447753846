"""N-body random Schrodinger operators: discretization, disorder ensembles, Wegner and IDS statistics."""

__version__ = "0.1.0"
