"""Topic-aware secure multiparty session calculus: interpreter, safety oracle
and session type checker."""

__version__ = "0.1.0"
