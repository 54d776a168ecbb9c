"""Latent user similarity from private text histories.

Signatures are top-k tf-idf words mapped to embedding vectors with
normalized weights; users are compared by the exact Word Mover's Distance.
"""

__version__ = "0.1.0"
