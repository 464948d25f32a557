"""Image-text claim verification harness.

Subpackages cover the shared data model, knowledge-store construction,
sparse/dense retrieval, the baseline QA pipeline, conditional scoring,
human-rating analysis, and the CLI/HTTP operational surface.
"""

__version__ = "0.1.0"
