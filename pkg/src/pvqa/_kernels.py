"""Compiled inner loops for state-vector propagation.

The driving Hamiltonian is H(s) = s * diag(E) - (1 - s) * sum_m P_m where each
P_m permutes basis states by ``j -> j ^ mask_m``. With one mask per spin this is
the transverse-field mixer; the reduced even-parity sector uses a modified set.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def apply_h(diag, masks, s, psi, out):
    a = 1.0 - s
    for j in range(psi.shape[0]):
        acc = 0j
        for m in masks:
            acc += psi[j ^ m]
        out[j] = s * diag[j] * psi[j] - a * acc


@njit(cache=True)
def apply_k(diag, masks, psi, out):
    # dH/ds = diag(E) + sum_m P_m
    for j in range(psi.shape[0]):
        acc = 0j
        for m in masks:
            acc += psi[j ^ m]
        out[j] = diag[j] * psi[j] + acc


@njit(cache=True)
def rk4_forward(diag, masks, svals, dts, psi, states):
    """Classical RK4 for d psi/dt = -i H(s(t)) psi, in place.

    ``svals[k]`` holds s at the start, midpoint and end of step k. When
    ``states`` has a row per step plus one, the state before every step and
    the final state are recorded.
    """
    dim = psi.shape[0]
    k1 = np.empty(dim, np.complex128)
    k2 = np.empty(dim, np.complex128)
    k3 = np.empty(dim, np.complex128)
    k4 = np.empty(dim, np.complex128)
    tmp = np.empty(dim, np.complex128)
    record = states.shape[0] == dts.shape[0] + 1
    for step in range(dts.shape[0]):
        if record:
            states[step, :] = psi
        dt = dts[step]
        apply_h(diag, masks, svals[step, 0], psi, k1)
        for j in range(dim):
            tmp[j] = psi[j] - 0.5j * dt * k1[j]
        apply_h(diag, masks, svals[step, 1], tmp, k2)
        for j in range(dim):
            tmp[j] = psi[j] - 0.5j * dt * k2[j]
        apply_h(diag, masks, svals[step, 1], tmp, k3)
        for j in range(dim):
            tmp[j] = psi[j] - 1j * dt * k3[j]
        apply_h(diag, masks, svals[step, 2], tmp, k4)
        for j in range(dim):
            psi[j] = psi[j] - 1j * dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    if record:
        states[dts.shape[0], :] = psi
    return psi


@njit(cache=True)
def _vdot(u, v):
    acc = 0j
    for j in range(u.shape[0]):
        acc += u[j].conjugate() * v[j]
    return acc


@njit(cache=True)
def rk4_adjoint(diag, masks, s_steps, dts, states, lam):
    """Exact derivative of a final quadratic form with respect to each step's s.

    Valid when s is constant within every step, so that a step applies the
    degree-4 Taylor polynomial R = sum_m (-i h H)^m / m!. ``lam`` enters as
    W psi_N for the observable W and is overwritten with the backpropagated
    adjoint. Returns d(psi_N^H W psi_N)/ds_k for every step k.
    """
    n_steps = dts.shape[0]
    dim = lam.shape[0]
    grad = np.zeros(n_steps)
    u = np.empty((5, dim), np.complex128)
    w = np.empty((4, dim), np.complex128)
    kw = np.empty((4, dim), np.complex128)
    fact = np.array([1.0, 1.0, 2.0, 6.0, 24.0])
    for step in range(n_steps - 1, -1, -1):
        s = s_steps[step]
        h = dts[step]
        u[0, :] = lam
        w[0, :] = states[step]
        for a in range(1, 5):
            apply_h(diag, masks, s, u[a - 1], u[a])
        for b in range(1, 4):
            apply_h(diag, masks, s, w[b - 1], w[b])
        for b in range(4):
            apply_k(diag, masks, w[b], kw[b])
        total = 0j
        for m in range(1, 5):
            coef = (-1j * h) ** m / fact[m]
            inner = 0j
            for l in range(m):
                inner += _vdot(u[l], kw[m - 1 - l])
            total += coef * inner
        grad[step] = 2.0 * total.real
        for j in range(dim):
            acc = 0j
            for m in range(5):
                acc += (1j * h) ** m / fact[m] * u[m, j]
            lam[j] = acc
    return grad


@njit(cache=True)
def qaoa_layers(diag, masks, durations, psi):
    """Alternate exp(-i E t_ising) phases and exact single-spin mixers."""
    dim = psi.shape[0]
    tmp = np.empty(dim, np.complex128)
    for layer in range(durations.shape[0]):
        g = durations[layer, 0]
        for j in range(dim):
            psi[j] *= np.exp(-1j * diag[j] * g)
        b = durations[layer, 1]
        c = np.cos(b)
        sn = 1j * np.sin(b)
        # exp(-i H_q b) = prod_m (cos b + i sin b P_m); the P_m commute
        for m in masks:
            for j in range(dim):
                tmp[j] = c * psi[j] + sn * psi[j ^ m]
            for j in range(dim):
                psi[j] = tmp[j]
    return psi
