"""Pure-numpy upwind stepper kernel (fallback backend).

Mirrors the arithmetic of the compiled kernel expression for expression so
both backends produce identical floating-point results.
"""

import numpy as np

BACKEND = "numpy"


def max_wave_speed(rho, v, h_acc, alpha, tau_acc, tau_m, h_m):
    """Max over nodes of |lam1| + |lam2| for the CFL guard."""
    kappa = tau_acc / tau_m
    num = alpha + (1.0 - alpha) * kappa
    hm = num / (alpha + (1.0 - alpha) * kappa * h_acc / h_m) * h_acc
    lam1 = v
    lam2 = v - 1.0 / (hm * rho)
    return float(np.max(np.abs(lam1) + np.abs(lam2)))


def step_kernel(rho, v, h_acc, dt, dx, l, q_in, alpha, tau_acc, tau_m, h_m):
    """One explicit upwind update of the interior plus boundary closure.

    rho, v, h_acc: arrays of length M+1 (h_acc is the delayed applied input).
    Returns (rho_new, v_new).
    """
    M = rho.shape[0] - 1
    kappa = tau_acc / tau_m
    num = alpha + (1.0 - alpha) * kappa
    tau = 1.0 / (alpha / tau_acc + (1.0 - alpha) / tau_m)

    hm = num / (alpha + (1.0 - alpha) * kappa * h_acc / h_m) * h_acc
    V = (1.0 / hm) * (1.0 / rho - l)
    lam1 = v
    lam2 = v - 1.0 / (hm * rho)

    rho_n = np.empty_like(rho)
    v_n = np.empty_like(v)

    c = slice(1, M)
    d_rho_b = rho[1:M] - rho[0:M - 1]
    d_rho_f = rho[2:M + 1] - rho[1:M]
    d_v_b = v[1:M] - v[0:M - 1]
    d_v_f = v[2:M + 1] - v[1:M]

    up1 = lam1[c] >= 0.0
    d_rho = np.where(up1, d_rho_b, d_rho_f)
    d_v1 = np.where(up1, d_v_b, d_v_f)
    d_v2 = np.where(lam2[c] >= 0.0, d_v_b, d_v_f)

    r = dt / dx
    rho_n[c] = rho[c] - r * (lam1[c] * d_rho + rho[c] * d_v1)
    v_n[c] = v[c] - r * (lam2[c] * d_v2) + (dt / tau) * (V[c] - v[c])

    rho_n[0] = rho_n[1]
    rho_n[M] = rho_n[M - 1]
    v_n[0] = q_in / rho_n[0]
    hm_M = num / (alpha + (1.0 - alpha) * kappa * h_acc[M] / h_m) * h_acc[M]
    V_M = (1.0 / hm_M) * (1.0 / rho_n[M] - l)
    v_n[M] = v[M] + (dt / tau) * (V_M - v[M])
    return rho_n, v_n


def adam_fused(theta, m, v, grad, lr, beta1, beta2, eps, bc1, bc2):
    """Vectorized Adam update matching the compiled kernel's semantics."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    theta -= (lr / bc1) * m / (np.sqrt(v / bc2) + eps)
