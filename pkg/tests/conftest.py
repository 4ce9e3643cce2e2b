import mpmath
import pytest

from divisor_moments.mainterm import residue_main_poly, zeta_laurent
from divisor_moments.multivar import local_coefficients
from divisor_moments.sieve import build_factor_sieve, build_tau_table


@pytest.fixture(scope="session")
def sieve():
    return build_factor_sieve(10**5)


@pytest.fixture(scope="session")
def tau3(sieve):
    return build_tau_table(10**5, 3, sieve)


@pytest.fixture(scope="session")
def tau4(sieve):
    return build_tau_table(10**5, 4, sieve)


@pytest.fixture(scope="session")
def zl():
    return zeta_laurent(6, 50)


@pytest.fixture(scope="session")
def p2(zl):
    return residue_main_poly(3, zl)


@pytest.fixture(scope="session")
def lct23():
    return local_coefficients(2, 3, 40)


@pytest.fixture(scope="session")
def lct24():
    return local_coefficients(2, 4, 40)


@pytest.fixture(scope="session")
def lct33():
    return local_coefficients(3, 3, 20)


@pytest.fixture(autouse=True)
def _default_precision():
    dps = mpmath.mp.dps
    mpmath.mp.dps = 50
    yield
    mpmath.mp.dps = dps


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per criterion, then assert."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
