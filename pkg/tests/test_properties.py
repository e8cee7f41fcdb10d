import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_groups.design import ModelSpec
from latent_groups.posterior import posterior_probs
from latent_groups.schemes import GroupingScheme, enumerate_schemes, scheme_count

SPECS = [ModelSpec("ancova", "I")] + [ModelSpec("ancova", "IV", s) for s in enumerate_schemes(4, 1)]

finite = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)


@given(st.lists(finite, min_size=len(SPECS), max_size=len(SPECS)), st.floats(-500, 500))
@settings(max_examples=60, deadline=None)
def test_posterior_normalized_and_shift_invariant(log_q, shift):
    priors = [0.5] + [0.5 / 7] * 7
    t = posterior_probs(SPECS, log_q, priors)
    post = np.array([e.posterior for e in t.entries])
    assert np.all((post >= 0) & (post <= 1))
    assert math.isclose(post.sum(), 1.0, abs_tol=1e-12)
    shifted = posterior_probs(SPECS, [v + shift for v in log_q], priors)
    np.testing.assert_allclose([e.posterior for e in shifted.entries], post, atol=1e-12)
    assert math.isclose(sum(t.scheme_aggregates.values()), 1 - post[0], abs_tol=1e-12)


@given(st.integers(2, 9), st.integers(1, 2))
def test_scheme_count_matches_enumeration(K, m):
    assert len(enumerate_schemes(K, m)) == scheme_count(K, m)


@given(st.integers(2, 8).flatmap(lambda K: st.tuples(st.just(K), st.permutations(range(1, K + 1)))))
@settings(max_examples=40)
def test_relabeling_is_a_bijection(args):
    K, perm = args
    schemes = enumerate_schemes(K, 1)
    mapped = {GroupingScheme.from_groups(K, [perm[k - 1] for k in s.group1]).label for s in schemes}
    assert mapped == {s.label for s in schemes}
