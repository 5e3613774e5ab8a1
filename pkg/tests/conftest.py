from fractions import Fraction

from hypothesis import settings, strategies as st

from optmct.core import SystemType, Test
from optmct.linalg import QMatrix

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

fractions = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 5))
probabilities = st.builds(Fraction, st.integers(0, 4), st.just(4))


def matrices(rows=st.integers(1, 4), cols=st.integers(1, 4), entries=fractions):
    return st.tuples(rows, cols).flatmap(
        lambda rc: st.lists(st.lists(entries, min_size=rc[1], max_size=rc[1]),
                            min_size=rc[0], max_size=rc[0]).map(QMatrix.from_rows))


systems = st.lists(st.integers(1, 3), min_size=0, max_size=3).map(lambda f: SystemType(tuple(f)))
nonempty_systems = st.lists(st.integers(2, 3), min_size=1, max_size=2).map(
    lambda f: SystemType(tuple(f)))


@st.composite
def distributions(draw, n):
    """A probability vector of length n with entries on a grid of 1/4, renormalised."""
    w = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n).filter(any))
    total = sum(w)
    return [Fraction(x, total) for x in w]


@st.composite
def stochastic(draw, a: SystemType, b: SystemType):
    cols = [draw(distributions(b.dim)) for _ in range(a.dim)]
    return QMatrix.from_rows([[cols[j][i] for j in range(a.dim)] for i in range(b.dim)])


@st.composite
def valid_tests(draw, a, b, max_outcomes=3):
    """A valid test: a stochastic matrix split entrywise into outcome events."""
    total = draw(stochastic(a, b))
    k = draw(st.integers(1, max_outcomes))
    rows = total.rows()
    parts = [[[Fraction(0)] * a.dim for _ in range(b.dim)] for _ in range(k)]
    for i in range(b.dim):
        for j in range(a.dim):
            w = draw(distributions(k))
            for x in range(k):
                parts[x][i][j] = rows[i][j] * w[x]
    return Test(a, b, [(str(x), QMatrix.from_rows(p)) for x, p in enumerate(parts)])
