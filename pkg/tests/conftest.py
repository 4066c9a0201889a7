import numpy as np
import pytest

from mvtrace.mesh import Mesh, build_laplacian


@pytest.fixture
def triangle_mesh():
    """Smallest valid mesh: one triangle (complete graph K3)."""
    return Mesh(np.eye(3), [(0, 1, 2)])


@pytest.fixture
def path_mesh():
    """Two triangles sharing edge (1,2): edges {01,02,12,13,23}."""
    positions = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    return Mesh(positions, [(0, 1, 2), (1, 3, 2)])


@pytest.fixture
def triangle_laplacian(triangle_mesh):
    return build_laplacian(triangle_mesh)


def random_views(n, d_task, d_rest, seed, latent_dim=None):
    """Two view matrices sharing a low-dimensional latent when requested."""
    rng = np.random.default_rng(seed)
    if latent_dim is None:
        return rng.standard_normal((n, d_task)), rng.standard_normal((n, d_rest))
    h = rng.standard_normal((n, latent_dim))
    a_t = rng.standard_normal((latent_dim, d_task))
    a_r = rng.standard_normal((latent_dim, d_rest))
    x_t = h @ a_t + 0.1 * rng.standard_normal((n, d_task))
    x_r = h @ a_r + 0.1 * rng.standard_normal((n, d_rest))
    return x_t, x_r
