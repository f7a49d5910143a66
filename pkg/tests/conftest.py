import random

from hypothesis import HealthCheck, settings, strategies as st

from pbihs.core import GE, LE, EQ, Instance, Objective, normalize

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def raw_constraints(draw, max_vars=8, max_coef=10):
    n = draw(st.integers(1, max_vars))
    k = draw(st.integers(1, n))
    vs = draw(st.lists(st.integers(1, n), min_size=1, max_size=k))
    terms = [(draw(st.integers(-max_coef, max_coef)), draw(st.sampled_from([1, -1])) * v) for v in vs]
    rel = draw(st.sampled_from([GE, LE, EQ]))
    rhs = draw(st.integers(-2 * max_coef, 2 * max_coef))
    return n, terms, rel, rhs


@st.composite
def instances(draw, max_vars=8, max_cons=8, max_coef=6):
    """Small random instances (feasible or not)."""
    n = draw(st.integers(1, max_vars))
    cons = []
    for _ in range(draw(st.integers(0, max_cons))):
        vs = draw(st.lists(st.integers(1, n), min_size=1, max_size=min(n, 5), unique=True))
        terms = [(draw(st.integers(-max_coef, max_coef).filter(bool)), v) for v in vs]
        rel = draw(st.sampled_from([GE, GE, LE, EQ]))
        cons += normalize(terms, rel, draw(st.integers(-max_coef, max_coef)))
    ovars = draw(st.lists(st.integers(1, n), max_size=n, unique=True))
    obj = Objective.from_raw(
        [(draw(st.integers(1, max_coef)), draw(st.sampled_from([1, -1])) * v) for v in ovars],
        draw(st.integers(-3, 3)),
    )
    return Instance(cons, obj, n)


def rng_instances(seed, count, **kw):
    from pbihs.gen import random_instance

    rng = random.Random(seed)
    return [random_instance(rng, **kw) for _ in range(count)]
