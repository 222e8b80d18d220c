"""Quick check that the extension module loads and agrees with known values."""

import math

import zeno_py


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    ff = zeno_py.FormFactor.lorentzian(0.1, 1.0)
    assert ff.family == "lorentzian"
    close(ff.zeno_time(), 10.0, 1e-12)
    close(ff.g2(0.0), 0.01 / math.pi, 1e-15)

    m = zeno_py.DecayModel(ff, 2.0)
    close(m.survival(0.0), 1.0, 1e-15)
    p = m.pole
    assert p.gamma0 > 0 and 0 < p.z_renorm < 1.1
    close(p.gamma0, 2 * math.pi * ff.g2(2.0), 5e-3 * p.gamma0)

    closed = zeno_py.lorentzian_amplitudes(0.1, 1.0, 2.0, [0.0, 5.0, 10.0])
    for t, x in zip([0.0, 5.0, 10.0], closed):
        close(abs(x) ** 2, m.survival(t), 1e-12)

    sigma, _ = zeno_py.self_energy(ff, 1.0 + 1.0j)
    close(abs(sigma - 0.01 / (1.0 + 2.0j)), 0.0, 1e-12)

    r = m.transition()
    assert r["tau_star"] is not None and r["tau_star"] > 0
    assert m.classify(1e-3) == "zeno"

    close(zeno_py.repeated_survival(0.5, 3), 0.125, 1e-16)

    pl = zeno_py.FormFactor.threshold_power_law(0.1, 1.0, 1.0, 4.0)
    mp = zeno_py.DecayModel(pl, 1.0, tolerance=1e-8)
    assert 0.0 <= mp.survival(5.0) <= 1.0

    try:
        zeno_py.FormFactor.lorentzian(0.1, -1.0)
    except ValueError as e:
        assert "invalid" in str(e)
    else:
        raise AssertionError("negative bandwidth accepted")

    try:
        zeno_py.DecayModel(zeno_py.FormFactor.lorentzian(0.0, 1.0), 1.0)
    except zeno_py.NoDecayError:
        pass
    else:
        raise AssertionError("zero coupling accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
