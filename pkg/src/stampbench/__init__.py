"""Desk-scale workbench for sheet-metal stamping surrogates.

Pipeline: synthetic material curves and panel geometries -> deterministic
forming-field generator -> multimodal field-prediction network -> training,
evaluation, 3D post-processing, and an HTTP inference service.
"""

__version__ = "0.1.0"
