"""Multiview pseudo-labeling for semi-supervised video classification.

A single shared 3D-CNN classifier consumes three aligned views of every
clip (RGB, converted optical flow, converted temporal gradients).
Pseudo-labels for unlabeled clips come from ensembling weak-augmentation
predictions across the views and supervise strongly augmented versions
of each view. Everything is float64, single-process and deterministic.
"""

__version__ = "0.1.0"
