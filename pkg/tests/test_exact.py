import functools
import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagfib.context import DomainError, InconsistentResidues, MemoryBudgetExceeded, PrecisionContext
from lagfib.exact import (
    MEMORY_BUDGET_ENV,
    SequenceWindow,
    a_at_kn,
    compute_a,
    compute_a_mod,
    crt_reconstruct,
    exact_ratios,
    ln_a,
    log_size_estimate,
    memory_budget,
    plan_moduli,
    primes_below,
    ratio_c,
)

CTX = PrecisionContext(40)

# binary partitions of 2n (OEIS A000123), n = 0..20
A000123 = [1, 2, 4, 6, 10, 14, 20, 26, 36, 46, 60, 74, 94, 114, 140, 166, 202, 238, 284, 330, 390]


@functools.lru_cache(maxsize=None)
def naive_a(k, n):
    if n == 0:
        return 1
    return naive_a(k, n - 1) + naive_a(k, n // k)


def partitions_into_powers(m, k):
    """Count partitions of m into powers of k by enumerating the multiplicity of each part."""
    parts = [1]
    while parts[-1] * k <= m:
        parts.append(parts[-1] * k)

    @functools.lru_cache(maxsize=None)
    def count(rest, i):
        if i == 0:
            return 1  # the remainder is filled with ones
        return sum(count(rest - c * parts[i], i - 1) for c in range(rest // parts[i] + 1))

    return count(m, len(parts) - 1)


def exact_list(k, n):
    a = [1]
    for i in range(1, n + 1):
        a.append(a[-1] + a[i // k])
    return a


def test_small_values():
    assert compute_a(2, 0) == 1
    assert compute_a(2, 1) == 2
    assert compute_a(2, 10) == 60
    assert compute_a(3, 9) == naive_a(3, 9) == partitions_into_powers(27, 3)
    assert [compute_a(2, n) for n in range(21)] == A000123


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_oracles_up_to_200(k):
    values = exact_list(k, 200)
    win = SequenceWindow(k, 200)
    got = win.advance(200, record=range(1, 201))
    for n in range(1, 201):
        assert got[n] == naive_a(k, n) == values[n]
    for n in range(0, 201, 7):
        assert values[n] == partitions_into_powers(k * n, k)


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_prefix_identity_up_to_10000(k):
    n_max = 10**4
    a = exact_list(k, k * n_max)
    prefix = 0
    for n in range(n_max + 1):
        assert a[k * n] == a[n] + k * prefix
        prefix += a[n]


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_residue_path_matches_exact(k):
    n_max = 10**4
    a = exact_list(k, n_max)
    moduli = primes_below(2**32, 3)
    win = SequenceWindow(k, n_max, moduli)
    got = win.advance(n_max, record=range(1, n_max + 1))
    for n in range(1, n_max + 1):
        assert list(got[n]) == [a[n] % p for p in moduli]
    full = SequenceWindow(k, n_max, plan_moduli(k, n_max))
    full.advance(n_max)
    assert full.to_int(full.current) == a[n_max]
    assert a_at_kn(k, n_max, full) == compute_a(k, k * n_max)


def test_residue_blocks_cross_boundaries():
    # several vectorised blocks (2^20 indices each) and a value that needs many primes
    n = 3 * 2**20 + 12345
    moduli = plan_moduli(2, n)
    win = SequenceWindow(2, n, moduli)
    win.advance(n)
    assert win.to_int(win.current) == compute_a(2, n)


def test_compute_a_mod():
    p = 10**9 + 7
    cur, pre = compute_a_mod(2, 10, [p])
    assert cur == [compute_a(2, 10) % p]
    assert pre == [sum(exact_list(2, 10)[:10]) % p]
    cur, pre = compute_a_mod(2, 0, [5, 7, 11])
    assert cur == [1, 1, 1] and pre == [0, 0, 0]
    moduli = primes_below(2**31, 5)
    cur, _ = compute_a_mod(3, 100, moduli)
    assert crt_reconstruct(cur, moduli) == compute_a(3, 100)
    with pytest.raises(ValueError):
        compute_a_mod(2, 10, [6, 9])


def test_crt():
    assert crt_reconstruct([1, 1], [3, 5]) == 1
    assert crt_reconstruct([2, 3], [3, 5]) == 8
    with pytest.raises(InconsistentResidues):
        crt_reconstruct([1, 2], [4, 6])
    value = compute_a(2, 10**4)
    moduli = primes_below(2**32, 8)
    assert math.prod(moduli) > 2 * value
    assert crt_reconstruct([value % p for p in moduli], moduli) == value


@given(st.integers(min_value=0, max_value=10**30), st.lists(st.sampled_from(primes_below(2**20, 30)), min_size=1, max_size=8, unique=True))
def test_crt_round_trip(value, moduli):
    value %= math.prod(moduli)
    assert crt_reconstruct([value % p for p in moduli], moduli) == value


def test_a_at_kn():
    for k, n in ((2, 1), (2, 10), (5, 7), (3, 1000)):
        win = SequenceWindow(k, n)
        win.advance(n)
        assert a_at_kn(k, n, win) == compute_a(k, k * n)
    win = SequenceWindow(2, 1)
    win.advance(1)
    assert a_at_kn(2, 1, win) == 4
    with pytest.raises(ValueError):
        a_at_kn(3, 1, win)


def test_ratio_c_values():
    got = exact_ratios(2, [100, 10**4, 10**6], CTX)
    assert f"{float(got[100][2]):.5f}" == "1.65470"
    assert f"{float(got[10**4][2]):.5f}" == "1.63881"
    assert f"{float(got[10**6][2]):.5f}" == "1.59883"
    assert abs(ratio_c(2, 100, CTX) - got[100][2]) < 1e-35
    with pytest.raises(DomainError):
        ratio_c(2, 1, CTX)


def test_exact_ratios_residue_mode_matches():
    ns = [10, 1000, 50000]
    plain = exact_ratios(3, ns, CTX)
    res = exact_ratios(3, ns, CTX, moduli=plan_moduli(3, ns[-1]))
    for n in ns:
        assert plain[n][:2] == res[n][:2]


def test_ln_a():
    assert ln_a(2, 0, CTX) == 0
    with mpmath.workdps(50):
        assert abs(ln_a(2, 10, CTX) - mpmath.log(60)) < mpmath.mpf(10) ** -38


@given(st.integers(min_value=2, max_value=6), st.integers(min_value=1, max_value=3000))
def test_monotone(k, n):
    a = exact_list(k, n)
    assert a[n] > a[n - 1] > 0


def _lead_ratio(k, n):
    L = math.log(n)
    return float(ln_a(k, n, CTX)) / ((L - math.log(L)) ** 2 / (2 * math.log(k)))


def test_size_estimate_against_leading_term():
    for k, n in ((2, 10**4), (2, 10**5), (2, 10**6), (3, 10**5), (3, 10**6)):
        assert 1 / 1.5 < _lead_ratio(k, n) < 1.5
    for k in (2, 3, 5):
        for n in (10**4, 10**6):
            actual = float(ln_a(k, n, CTX))
            assert abs(log_size_estimate(k, n) - actual) < 0.05 * actual


def test_leading_term_alone_is_too_coarse_for_k3_at_10000():
    # lower-order terms push the ratio just past 1.5; the planner uses the full estimate instead
    assert 1.50 < _lead_ratio(3, 10**4) < 1.51


def test_plan_moduli_margin():
    for k, n in ((2, 10**5), (3, 10**6), (5, 12345)):
        moduli = plan_moduli(k, n)
        assert math.prod(moduli) > 4 * 2 * compute_a(k, k * n)
        assert all(p < 2**32 for p in moduli) and len(set(moduli)) == len(moduli)


def test_memory_budget_refusal(monkeypatch):
    with pytest.raises(MemoryBudgetExceeded) as info:
        SequenceWindow(2, 10**9)
    assert info.value.required > info.value.budget
    monkeypatch.setenv(MEMORY_BUDGET_ENV, "1000")
    assert memory_budget() == 1000
    with pytest.raises(MemoryBudgetExceeded):
        compute_a(2, 10**5)
    assert compute_a(2, 10**5, memory_budget_bytes=10**9) > 0


def test_window_bounds():
    win = SequenceWindow(2, 100)
    win.advance(10)
    with pytest.raises(DomainError):
        win.advance(101)
    with pytest.raises(IndexError):
        win.value(60)
    assert win.value(5) == compute_a(2, 5)


@pytest.mark.parametrize("residue", [False, True], ids=["exact", "residue"])
def test_checkpoint_restart_is_byte_identical(tmp_path, residue):
    n = 10**6
    moduli = plan_moduli(2, n) if residue else None
    straight = SequenceWindow(2, n, moduli)
    straight.advance(n)

    path = tmp_path / "win.ckpt"
    first = SequenceWindow(2, n, moduli)
    first.advance(n // 2 + 17, checkpoint_path=path, checkpoint_every=200_000)
    del first
    resumed = SequenceWindow.load(path)
    assert resumed.upto == n // 2 + 17
    resumed.advance(n)
    assert resumed.to_bytes() == straight.to_bytes()
    assert resumed.to_int(resumed.current) == straight.to_int(straight.current)


def test_checkpoint_rejects_corruption(tmp_path):
    win = SequenceWindow(3, 1000)
    win.advance(500)
    path = tmp_path / "w"
    win.save(path)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError, match="corrupt"):
        SequenceWindow.load(path)
    path.write_bytes(b"garbage" * 4)
    with pytest.raises(ValueError, match="not a lagfib checkpoint"):
        SequenceWindow.load(path)
