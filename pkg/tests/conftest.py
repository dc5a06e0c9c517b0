import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from crpshape import generate_shape
from crpshape.evaluation import LabeledDataset
from crpshape.spectral import descriptor_for_mesh

TETRAHEDRON_OFF = """OFF
4 4 0
1 1 1
1 -1 -1
-1 1 -1
-1 -1 1
3 0 1 2
3 0 2 3
3 0 3 1
3 1 3 2
"""

SINGLE_TRIANGLE_OFF = """OFF
3 1 0
0 0 0
1 0 0
0 1 0
3 0 1 2
"""


@pytest.fixture
def tetrahedron_off():
    return TETRAHEDRON_OFF


@pytest.fixture
def single_triangle_off():
    return SINGLE_TRIANGLE_OFF


ELLIPSOID_ECCENTRICITIES = (1.0, 1.5, 2.2)
ELLIPSOID_PER_CLASS = 30
ELLIPSOID_GPS_DIM = 40


def build_ellipsoid_dataset(per_class=ELLIPSOID_PER_CLASS, p=ELLIPSOID_GPS_DIM):
    """Three ellipsoid families (GPS descriptors), the desk-scale benchmark."""
    columns = []
    labels = []
    names = []
    for class_idx, ecc in enumerate(ELLIPSOID_ECCENTRICITIES):
        for member in range(per_class):
            mesh = generate_shape(
                "ellipsoid",
                (1.0, 1.0, ecc),
                subdiv=2,
                noise=0.01,
                seed=class_idx * per_class + member,
            )
            descriptor = descriptor_for_mesh(mesh, "gps", p=p)
            columns.append(descriptor.values)
            labels.append(f"ecc{ecc}")
            names.append(mesh.name)
    return LabeledDataset(
        descriptors=np.stack(columns, axis=1),
        labels=tuple(labels),
        names=tuple(names),
        descriptor_kind="gps",
    )


@pytest.fixture(scope="session")
def ellipsoid_dataset():
    return build_ellipsoid_dataset()
