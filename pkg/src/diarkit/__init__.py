"""Speaker diarization back-end on precomputed speaker embeddings."""

__version__ = "0.1.0"
