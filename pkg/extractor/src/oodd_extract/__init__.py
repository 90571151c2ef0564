"""Feature extraction front end for the streaming OOD detector.

Turns image datasets plus a classifier checkpoint into the detector's
binary inputs: multi-view crop features with confidences for dictionary
building, and plain per-image features for scoring streams.
"""

__version__ = "0.1.0"
