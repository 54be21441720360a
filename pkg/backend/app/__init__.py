# Embezzlement and LOCC conversion diagnostics

__version__ = "1.0.0"
