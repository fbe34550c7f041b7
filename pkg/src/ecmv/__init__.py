"""Extended CMV operators, quantum-walk transport and the almost-ballistic
frequency construction for the unitary almost-Mathieu family."""

__version__ = "0.1.0"
