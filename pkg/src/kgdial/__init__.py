"""Knowledge-graph grounded dialogue generation toolkit.

Pipeline: detect the query entity, decode an intermediate response whose
object mentions are relation placeholder tokens, gate the decoder
distribution with a Laplacian encoding of the entity's k-hop sub-graph,
and resolve the placeholders by KG lookup.
"""

__version__ = "0.1.0"
