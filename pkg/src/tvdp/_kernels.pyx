# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled water-fill kernel.

Bit-identical twin of tvdp._kernels_py (same operations in the same order;
built without fp contraction). See that module for the algorithm notes.
"""

import numpy as np

BACKEND_NAME = "compiled"


def waterfill(double[::1] mu, double[::1] levels, double radius, double tie_tol):
    """Water-fill maximization over the TV ball; see tvdp._kernels_py.waterfill."""
    cdef Py_ssize_t n = mu.shape[0]
    cdef Py_ssize_t i, j, k, key, top, a, b, n_groups, g
    cdef double anchor, lv, bound, mass_top, r_max, alpha, half
    cdef double scale, add, budget, mass, take, value

    order_arr = np.empty(n, dtype=np.intp)
    starts_arr = np.empty(n, dtype=np.intp)
    nu_arr = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] order = order_arr
    cdef Py_ssize_t[::1] starts = starts_arr
    cdef double[::1] nu = nu_arr

    # stable insertion sort of indices by level (ascending)
    for i in range(n):
        order[i] = i
    for k in range(1, n):
        key = order[k]
        lv = levels[key]
        j = k - 1
        while j >= 0 and levels[order[j]] > lv:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key

    # ascending level-set boundaries, anchored at each group's smallest member
    n_groups = 1
    starts[0] = 0
    anchor = levels[order[0]]
    for k in range(1, n):
        lv = levels[order[k]]
        bound = anchor if anchor >= 0.0 else -anchor
        if bound < 1.0:
            bound = 1.0
        if lv - anchor > tie_tol * bound:
            starts[n_groups] = k
            n_groups += 1
            anchor = lv

    for i in range(n):
        nu[i] = mu[i]

    if n_groups == 1:
        value = 0.0
        for i in range(n):
            value += levels[i] * nu[i]
        return nu_arr, value, 0.0, 0.0

    top = starts[n_groups - 1]
    mass_top = 0.0
    for k in range(top, n):
        mass_top += mu[order[k]]
    r_max = 2.0 * (1.0 - mass_top)
    if r_max < 0.0:
        r_max = 0.0
    alpha = radius if radius < r_max else r_max
    half = 0.5 * alpha

    if mass_top > 0.0:
        scale = half / mass_top
        for k in range(top, n):
            i = order[k]
            nu[i] = mu[i] + mu[i] * scale
    else:
        add = half / (n - top)
        for k in range(top, n):
            nu[order[k]] = mu[order[k]] + add

    budget = half
    for g in range(n_groups - 1):
        if budget <= 0.0:
            break
        a = starts[g]
        b = starts[g + 1]
        mass = 0.0
        for k in range(a, b):
            mass += mu[order[k]]
        take = budget if budget < mass else mass
        if take > 0.0:
            if take == mass:
                for k in range(a, b):
                    nu[order[k]] = 0.0
            else:
                scale = take / mass
                for k in range(a, b):
                    i = order[k]
                    nu[i] = mu[i] - mu[i] * scale
        budget -= take

    value = 0.0
    for i in range(n):
        value += levels[i] * nu[i]
    return nu_arr, value, alpha, r_max
