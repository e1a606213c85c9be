"""Wavelet co-occurrence texture (WCT) classification of image blocks.

Pipeline: two-level db2 wavelet decomposition, co-occurrence matrices on the
second-level detail subbands, nine Haralick features per subband, genetic
feature selection, then an SVM or back-propagation network, evaluated with
cross-validation and ROC analysis.
"""

__version__ = "0.1.0"
