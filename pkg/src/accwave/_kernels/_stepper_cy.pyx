# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled upwind stepper kernel (hot path of training rollouts)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def max_wave_speed(double[::1] rho, double[::1] v, double[::1] h_acc,
                   double alpha, double tau_acc, double tau_m, double h_m):
    cdef Py_ssize_t n = rho.shape[0]
    cdef double kappa = tau_acc / tau_m
    cdef double num = alpha + (1.0 - alpha) * kappa
    cdef double hm, lam1, lam2, s, smax = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        hm = num / (alpha + (1.0 - alpha) * kappa * h_acc[i] / h_m) * h_acc[i]
        lam1 = v[i]
        lam2 = v[i] - 1.0 / (hm * rho[i])
        s = (lam1 if lam1 >= 0.0 else -lam1) + (lam2 if lam2 >= 0.0 else -lam2)
        if s > smax:
            smax = s
    return smax


def step_kernel(double[::1] rho, double[::1] v, double[::1] h_acc,
                double dt, double dx, double l, double q_in,
                double alpha, double tau_acc, double tau_m, double h_m):
    cdef Py_ssize_t M = rho.shape[0] - 1
    cdef double kappa = tau_acc / tau_m
    cdef double num = alpha + (1.0 - alpha) * kappa
    cdef double tau = 1.0 / (alpha / tau_acc + (1.0 - alpha) / tau_m)
    cdef double r = dt / dx

    rho_n_arr = np.empty(M + 1, dtype=np.float64)
    v_n_arr = np.empty(M + 1, dtype=np.float64)
    cdef double[::1] rho_n = rho_n_arr
    cdef double[::1] v_n = v_n_arr

    cdef Py_ssize_t i
    cdef double hm, V, lam1, lam2, d_rho, d_v1, d_v2, hm_M, V_M
    for i in range(1, M):
        hm = num / (alpha + (1.0 - alpha) * kappa * h_acc[i] / h_m) * h_acc[i]
        V = (1.0 / hm) * (1.0 / rho[i] - l)
        lam1 = v[i]
        lam2 = v[i] - 1.0 / (hm * rho[i])
        if lam1 >= 0.0:
            d_rho = rho[i] - rho[i - 1]
            d_v1 = v[i] - v[i - 1]
        else:
            d_rho = rho[i + 1] - rho[i]
            d_v1 = v[i + 1] - v[i]
        if lam2 >= 0.0:
            d_v2 = v[i] - v[i - 1]
        else:
            d_v2 = v[i + 1] - v[i]
        rho_n[i] = rho[i] - r * (lam1 * d_rho + rho[i] * d_v1)
        v_n[i] = v[i] - r * (lam2 * d_v2) + (dt / tau) * (V - v[i])

    rho_n[0] = rho_n[1]
    rho_n[M] = rho_n[M - 1]
    v_n[0] = q_in / rho_n[0]
    hm_M = num / (alpha + (1.0 - alpha) * kappa * h_acc[M] / h_m) * h_acc[M]
    V_M = (1.0 / hm_M) * (1.0 / rho_n[M] - l)
    v_n[M] = v[M] + (dt / tau) * (V_M - v[M])
    return rho_n_arr, v_n_arr


from libc.math cimport sqrt as c_sqrt


def adam_fused(double[::1] theta, double[::1] m, double[::1] v,
               double[::1] grad, double lr, double beta1, double beta2,
               double eps, double bc1, double bc2):
    """Single-pass Adam update: moments and parameters in one sweep.

    bc1, bc2 are the bias-correction denominators (1 - beta^t).
    """
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t i
    cdef double g, mi, vi
    cdef double s1 = 1.0 - beta1
    cdef double s2 = 1.0 - beta2
    cdef double lr_c = lr / bc1
    cdef double inv_bc2 = 1.0 / bc2
    for i in range(n):
        g = grad[i]
        mi = beta1 * m[i] + s1 * g
        vi = beta2 * v[i] + s2 * g * g
        m[i] = mi
        v[i] = vi
        theta[i] -= lr_c * mi / (c_sqrt(vi * inv_bc2) + eps)
