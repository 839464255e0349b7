"""Compiled inner loop of the hypersphere random walk.

The chain state is kept in two redundant forms: the hypersphere coordinates
``y`` (length 2*d*d, see statespace for the layout) and a real-valued
representation ``r`` of the induced density matrix with layout

    r = [rho_00 .. rho_(d-1)(d-1),  Re rho_ij (i<j, row-major),  Im rho_ij]

so that ``tr(E rho)`` is a plain dot product against a matching row built
from the Hermitian effect ``E`` (diagonal entries, then doubled real and
imaginary upper-triangle entries).

All functions release the GIL; RNG state is numba's per-thread Mersenne
Twister, seeded at kernel entry, so a walker's output depends only on its
seed regardless of which thread runs it.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _fill_real_rep(y, d, out):
    # rho = T T^dag with T read column-major from y.
    dd = d * d
    n_off = (d * (d - 1)) // 2
    for i in range(d):
        acc = 0.0
        for l in range(d):
            tr_il = y[l * d + i]
            ti_il = y[dd + l * d + i]
            acc += tr_il * tr_il + ti_il * ti_il
        out[i] = acc
    pos = 0
    for i in range(d):
        for j in range(i + 1, d):
            re_acc = 0.0
            im_acc = 0.0
            for l in range(d):
                tri = y[l * d + i]
                tii = y[dd + l * d + i]
                trj = y[l * d + j]
                tij = y[dd + l * d + j]
                re_acc += tri * trj + tii * tij
                im_acc += tii * trj - tri * tij
            out[d + pos] = re_acc
            out[d + n_off + pos] = im_acc
            pos += 1


@njit(cache=True, nogil=True)
def _complex_from_rep(r, d):
    n_off = (d * (d - 1)) // 2
    rho = np.empty((d, d), dtype=np.complex128)
    for i in range(d):
        rho[i, i] = r[i]
    pos = 0
    for i in range(d):
        for j in range(i + 1, d):
            re = r[d + pos]
            im = r[d + n_off + pos]
            rho[i, j] = complex(re, im)
            rho[j, i] = complex(re, -im)
            pos += 1
    return rho


@njit(cache=True, nogil=True)
def _lambda_of_rep(r, a_rows, counts):
    # Returns (lam, ok); ok is False when an observed effect has p <= 0.
    lam = 0.0
    for k in range(a_rows.shape[0]):
        p = 0.0
        for m in range(a_rows.shape[1]):
            p += a_rows[k, m] * r[m]
        if p <= 0.0:
            return np.inf, False
        lam -= 2.0 * counts[k] * np.log(p)
    return lam, True


@njit(cache=True, nogil=True)
def _mh_step(y, y_cand, r, r_cand, lam, a_rows, counts, eta, d):
    m2 = y.shape[0]
    for i in range(m2):
        y_cand[i] = y[i] + eta * np.random.standard_normal()
    nrm = 0.0
    for i in range(m2):
        nrm += y_cand[i] * y_cand[i]
    nrm = np.sqrt(nrm)
    if nrm == 0.0:
        return lam, False
    inv = 1.0 / nrm
    for i in range(m2):
        y_cand[i] *= inv
    _fill_real_rep(y_cand, d, r_cand)
    lam_cand, ok = _lambda_of_rep(r_cand, a_rows, counts)
    if not ok:
        return lam, False
    if lam == np.inf:
        accept = True
    else:
        delta = lam_cand - lam
        if delta <= 0.0:
            accept = True
        else:
            accept = np.random.random() < np.exp(-0.5 * delta)
    if accept:
        y[:] = y_cand
        r[:] = r_cand
        return lam_cand, True
    return lam, False


@njit(cache=True, nogil=True)
def _figure_value(r, d, fom_code, fom_mat, fom_vec):
    if fom_code == 0:
        # Expectation value of a Hermitian observable: dot in the real rep.
        acc = 0.0
        for i in range(r.shape[0]):
            acc += fom_vec[i] * r[i]
        return acc
    rho = _complex_from_rep(r, d)
    if fom_code == 1:
        w = np.linalg.eigvalsh(rho - fom_mat)
        total = 0.0
        for i in range(d):
            total += abs(w[i])
        return 0.5 * total
    # fom_code == 2: purified distance, fom_mat = Hermitian root of reference.
    inner = fom_mat @ rho @ fom_mat
    inner = 0.5 * (inner + np.conj(inner.T))
    w = np.linalg.eigvalsh(inner)
    fid = 0.0
    for i in range(d):
        if w[i] > 0.0:
            fid += np.sqrt(w[i])
    rest = 1.0 - fid * fid
    return np.sqrt(rest) if rest > 0.0 else 0.0


@njit(cache=True, nogil=True)
def run_chain(
    a_rows,
    counts,
    d,
    eta,
    n_therm_steps,
    n_record,
    n_sweep,
    seed,
    fom_code,
    fom_mat,
    fom_vec,
):
    """One full walker: thermalize, then record one figure value per sweep.

    Returns ``(figure_series, accepted_steps, total_steps)``.
    """
    np.random.seed(seed)
    m2 = 2 * d * d
    y = np.empty(m2)
    y_cand = np.empty(m2)
    r = np.empty(d * d)
    r_cand = np.empty(d * d)

    nrm = 0.0
    while nrm == 0.0:
        for i in range(m2):
            y[i] = np.random.standard_normal()
        nrm = 0.0
        for i in range(m2):
            nrm += y[i] * y[i]
        nrm = np.sqrt(nrm)
    for i in range(m2):
        y[i] /= nrm
    _fill_real_rep(y, d, r)
    lam, ok = _lambda_of_rep(r, a_rows, counts)
    if not ok:
        lam = np.inf

    accepted = 0
    for _ in range(n_therm_steps):
        lam, acc = _mh_step(y, y_cand, r, r_cand, lam, a_rows, counts, eta, d)
        if acc:
            accepted += 1
    series = np.empty(n_record)
    for rec in range(n_record):
        for _ in range(n_sweep):
            lam, acc = _mh_step(y, y_cand, r, r_cand, lam, a_rows, counts, eta, d)
            if acc:
                accepted += 1
        series[rec] = _figure_value(r, d, fom_code, fom_mat, fom_vec)
    return series, accepted, n_therm_steps + n_record * n_sweep
