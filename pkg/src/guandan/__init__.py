"""GuanDan: rules engine, self-play training stack, arena and table service."""

__version__ = "0.1.0"
