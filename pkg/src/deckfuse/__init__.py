"""deckfuse: fuse multi-scale bridge-deck inspection imagery into geo-anchored
surface maps with a queryable two-layer defect catalog."""

__version__ = "0.1.0"
