"""Pain-mention detection pipeline for clinical-style free text.

Lexicon matching, span windows, annotator agreement and adjudication,
TF-IDF features, linear SVM / KNN / baseline classifiers, and k-fold
evaluation with confidence intervals.
"""

__version__ = "0.1.0"
