"""Clinical note error detection: source-partitioned hybrid retrieval feeding
a two-expert debate with a blinded judge and a rule-based safety cascade."""

__version__ = "0.1.0"
