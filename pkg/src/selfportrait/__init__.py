"""Editable natural-language interest profiles for movie raters.

Generates three-section "self-portrait" summaries from rating histories,
tracks and classifies user edits to them, and analyzes the resulting
behavioral logs.
"""

__version__ = "0.1.0"
