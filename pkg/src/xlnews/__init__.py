"""Cross-lingual document similarity, mate retrieval and news event linking."""

__version__ = "0.1.0"
