"""Co-existing schema versions over one shared physical database."""

__version__ = "0.1.0"
