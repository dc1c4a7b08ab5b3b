"""Reference worker adapters: wrap models behind the harness wire protocol."""

__version__ = "0.1.0"
