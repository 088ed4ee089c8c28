"""secondpass: measure single-annotator NER data quality and target second annotation."""

__version__ = "0.1.0"
