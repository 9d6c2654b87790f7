"""Privacy-preserving vaccination registry mirrored onto an embedded
proof-of-work ledger."""

__version__ = "0.1.0"
