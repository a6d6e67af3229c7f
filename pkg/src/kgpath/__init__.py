"""Knowledge-graph link prediction with attention-weighted Lie-group embeddings, rule evaluation from embeddings, and path-feature softmax regression."""

__version__ = "0.1.0"
