"""numpy fallback for the curvature kernel."""
import numpy as np


def curvature_arrays(g, ginv, dg, d2g):
    """Christoffel, Riemann, Ricci and scalar curvature from metric jets.

    Index layout (batch axis first, omitted below):
    ``dg[i, j, k] = d_k g_ij``, ``d2g[i, j, k, l] = d_k d_l g_ij``.
    Returns ``gamma[k, i, j] = Gamma^k_ij``, ``riemann[l, k, i, j] = R^l_kij``
    with ``R(d_i, d_j) d_k = R^l_kij d_l``, ``ricci[j, k] = R^i_kij`` and the
    scalar curvature.
    """
    g = np.asarray(g, dtype=float)
    low = 0.5 * (
        np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    )
    gamma = np.einsum("...kl,...lij->...kij", ginv, low)
    dlow = 0.5 * (
        np.einsum("...jlim->...lijm", d2g)
        + np.einsum("...iljm->...lijm", d2g)
        - np.einsum("...ijlm->...lijm", d2g)
    )
    dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv, optimize=True)
    dgamma = np.einsum("...klm,...lij->...kijm", dginv, low) + np.einsum("...kl,...lijm->...kijm", ginv, dlow)
    riemann = (
        np.einsum("...ljki->...lkij", dgamma)
        - np.einsum("...likj->...lkij", dgamma)
        + np.einsum("...lia,...ajk->...lkij", gamma, gamma)
        - np.einsum("...lja,...aik->...lkij", gamma, gamma)
    )
    ricci = np.einsum("...ikij->...jk", riemann)
    scalar = np.einsum("...jk,...jk->...", ginv, ricci)
    return gamma, riemann, ricci, scalar
