"""Distribution-shift experiments: SEM data, ERM fits, KL shift, Fano-type bounds."""

__version__ = "0.1.0"
