"""Pure-numpy kernel implementations (fallback backend).

Must stay numerically equivalent to the compiled versions in
`_core.pyx`; the backend test asserts agreement to 1e-13 relative
(summation order may differ at the last ulp).
"""

import numpy as np


def tls_susceptibility(freqs, nu, geff2, gamma):
    """Sum of defect Lorentzians chi(f) = sum_k geff2_k / (i (f - nu_k) + gamma_k / 2).

    freqs : (n_f,) float64, probe frequencies (Hz)
    nu    : (n_t,) float64, current defect frequencies (Hz)
    geff2 : (n_t,) float64, squared effective couplings (Hz^2), already
            saturation-scaled
    gamma : (n_t,) float64, full defect linewidths (Hz)

    Returns (n_f,) complex128.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    geff2 = np.asarray(geff2, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if nu.size == 0:
        return np.zeros(freqs.shape, dtype=np.complex128)
    denom = 1j * (freqs[:, None] - nu[None, :]) + gamma[None, :] / 2.0
    return (geff2[None, :] / denom).sum(axis=1)
