"""Regenerate tests/frozen_oracles.py from independent mpmath computations.

Nothing here imports dynakernel: every value is built from mpmath special
functions and textbook series so that the frozen numbers can referee the
package.  Run ``python tests/oracle_tools/generate.py > tests/frozen_oracles.py``.
"""

import mpmath as mp

mp.mp.dps = 30


def disk_heat(x, y, t, lmax=14, kmax=14):
    # Dirichlet heat kernel of the unit disk by its Fourier-Bessel series
    rx, ry = mp.norm(x), mp.norm(y)
    cos = (x[0] * y[0] + x[1] * y[1]) / (rx * ry) if rx * ry else mp.mpf(1)
    th = mp.acos(max(-1, min(1, cos)))
    out = mp.mpf(0)
    for l in range(lmax + 1):
        eps = 1 if l == 0 else 2
        for k in range(1, kmax + 1):
            j = mp.besseljzero(l, k)
            out += (eps * mp.cos(l * th) * mp.besselj(l, j * rx) * mp.besselj(l, j * ry)
                    * mp.exp(-j * j * t) / (mp.pi * mp.besselj(l + 1, j) ** 2))
    return out


def sph_j(l, z):
    return mp.sqrt(mp.pi / (2 * z)) * mp.besselj(l + mp.mpf(1) / 2, z) if z else (1 if l == 0 else 0)


def ball_heat(x, y, t, lmax=12, kmax=12):
    rx, ry = mp.norm(x), mp.norm(y)
    cos = sum(a * b for a, b in zip(x, y)) / (rx * ry) if rx * ry else mp.mpf(1)
    out = mp.mpf(0)
    for l in range(lmax + 1):
        for k in range(1, kmax + 1):
            z = mp.besseljzero(l + mp.mpf(1) / 2, k)
            out += ((2 * l + 1) / (4 * mp.pi) * mp.legendre(l, cos)
                    * 2 * sph_j(l, z * rx) * sph_j(l, z * ry) / sph_j(l + 1, z) ** 2
                    * mp.exp(-z * z * t))
    return out


def wentzell_root_l0():
    # J1(mu) + mu J0(mu) = 0 on (2.405, 3): sign change then bisection
    f = lambda m: mp.besselj(1, m) + m * mp.besselj(0, m)
    a, b = mp.mpf("2.405"), mp.mpf(3)
    assert f(a) * f(b) < 0
    return mp.findroot(f, (a, b), solver="bisect")


def main():
    vals = {
        "J0_ZERO_1": mp.besseljzero(0, 1),
        "J0_ZERO_2": mp.besseljzero(0, 2),
        "J1_ZERO_1": mp.besseljzero(1, 1),
        "DIRICHLET_LAMBDA1_N2": mp.besseljzero(0, 1) ** 2,
        "DIRICHLET_LAMBDA1_N3": mp.pi ** 2,
        "WENTZELL_MU_L0_N2": wentzell_root_l0(),
        "GAMMA1_N2_X03_Y0102_T05": disk_heat([mp.mpf("0.3"), 0], [mp.mpf("0.1"), mp.mpf("0.2")],
                                            mp.mpf("0.5")),
        "GAMMA1_N2_X0_Y0_T02": disk_heat([0, 0], [0, 0], mp.mpf("0.2")),
        "GAMMA1_N3_X03_Y01_T03": ball_heat([mp.mpf("0.3"), 0, 0], [0, mp.mpf("0.1"), 0],
                                          mp.mpf("0.3")),
        "GREEN_BALL_N2_X0_Y05": -mp.log(mp.mpf("0.5")) / (2 * mp.pi),
        "GREEN_HALF_N3": 1 / (4 * mp.pi) - 1 / (12 * mp.pi),
        "EXIT_TIME_ORIGIN_N2": mp.mpf(1) / 4,
        "G1DYN_LIMIT_N2": 1 / (mp.pi + 2 * mp.pi),
        "G1DYN_LIMIT_N3": 1 / (4 * mp.pi / 3 + 4 * mp.pi),
    }
    print('"""Frozen reference values (generated by oracle_tools/generate.py; do not edit)."""\n')
    for k, v in vals.items():
        print(f"{k} = {mp.nstr(v, 17)}")


if __name__ == "__main__":
    main()
