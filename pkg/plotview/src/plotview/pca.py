"""Top-2 principal components with a deterministic sign convention."""

import numpy as np


def pca_top2(vectors):
    """Projects rows onto their top-2 principal components.

    Sign convention: each component is flipped until its
    largest-magnitude loading is positive, so repeated runs (and
    different SVD backends) agree on orientation.

    Returns (projected (n, 2), components (2, d)).
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(
            f"need a 2-D array with >= 2 rows and >= 2 columns, "
            f"got shape {x.shape}"
        )
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2].copy()
    for i in range(2):
        lead = np.argmax(np.abs(components[i]))
        if components[i, lead] < 0:
            components[i] = -components[i]
    return centered @ components.T, components
