import math

import hypothesis as hyp
import hypothesis.strategies as hyp_st
import numpy as np
import pytest

from branching.candidates import computational_family
from branching.weingarten import QConfig, b_sweep, is_coarse_graining, minimize_q, q_functional
from lattice.corpus import ghz_pairs, plus_product
from lattice.decomposition import Decomposition, basis_projectors, make_decomposition
from lattice.errors import OracleError
from lattice.state import StateVector
from oracle.service import OracleConfig

B_VALUES = [0.5, 1.0, 2.0, 2.8, 3.0, 4.0, 6.0]


@pytest.fixture
def q_config(exact_oracle):
    return QConfig(b=1.0, oracle=exact_oracle)


def test_q_of_ghz_split(q_config, ghz2):
    split = q_functional(make_decomposition(ghz2, basis_projectors(2, [0])), q_config)
    assert [c.value for c in split.complexities] == [0, 2]
    assert split.q_value == pytest.approx(2 + math.log(2))
    assert split.recompute() == pytest.approx(split.q_value)
    assert split.certified
    trivial = q_functional(Decomposition.trivial(ghz2), q_config)
    assert trivial.q_value == pytest.approx(4.0)
    assert trivial.entropy == 0.0


def test_small_b_splits_and_large_b_does_not(q_config, ghz2):
    family = computational_family(2)
    assert minimize_q(ghz2, q_config, family).best.branch_count == 2
    assert minimize_q(ghz2, q_config.with_b(6.0), family).best.decomposition.is_trivial


def test_b_sweep_crossover(q_config, ghz2):
    sweep = b_sweep(ghz2, q_config, B_VALUES, computational_family(2))
    assert [row["branch_count"] for row in sweep.rows] == [2, 2, 2, 2, 1, 1, 1]
    assert len(sweep.crossovers) == 1
    crossover = sweep.crossovers[0]
    assert crossover["between"] == [2.8, 3.0]
    assert crossover["b_star"] == pytest.approx(2 / math.log(2), abs=1e-10)
    assert (crossover["from_branches"], crossover["to_branches"]) == (2, 1)
    assert sweep.nested


def test_b_sweep_rejects_bad_grids(q_config, ghz2):
    with pytest.raises(OracleError):
        b_sweep(ghz2, q_config, [2.0, 1.0], computational_family(2))
    with pytest.raises(OracleError):
        b_sweep(ghz2, q_config, [], computational_family(2))


def test_negative_b_is_rejected():
    with pytest.raises(OracleError):
        QConfig(b=-0.5)


def test_independent_pairs_split_fully(q_config):
    result = minimize_q(ghz_pairs(2), q_config, computational_family(4))
    best = result.best
    assert best.branch_count == 4
    assert sorted(c.value for c in best.complexities) == [0, 2, 2, 4]
    assert best.q_value == pytest.approx(6 + math.log(4))


def test_q_adds_with_cross_term(q_config, ghz2):
    single = minimize_q(ghz2, q_config, computational_family(2)).best
    joint = minimize_q(ghz_pairs(2), q_config, computational_family(4)).best
    cross = 2 * single.expected_complexity * single.expected_complexity
    assert joint.q_value == pytest.approx(2 * single.q_value + cross)


def test_product_state_depends_on_b(q_config, plus2):
    fine = minimize_q(plus2, q_config, computational_family(2)).best
    assert fine.branch_count == 4
    assert fine.q_value == pytest.approx(1.5 + math.log(4))
    assert minimize_q(plus2, q_config.with_b(6.0), computational_family(2)).best.decomposition.is_trivial


def test_greedy_refinement_reaches_the_finest_split(q_config, plus2):
    result = minimize_q(plus2, q_config, computational_family(2, subset_sizes=[1]))
    assert result.best.branch_count == 4
    assert result.q_gap > 0
    assert not result.near_degenerate


def test_complexities_are_memoized(q_config, ghz2):
    family = computational_family(2)
    minimize_q(ghz2, q_config, family)
    cached = len(q_config.memo)
    assert cached >= 2
    minimize_q(ghz2, q_config.with_b(3.0), family)
    assert len(q_config.memo) == cached


def test_coarse_graining(ghz2, plus2):
    fine = make_decomposition(plus2, basis_projectors(2, [0, 1]))
    coarse = make_decomposition(plus2, basis_projectors(2, [0]))
    assert is_coarse_graining(fine, coarse)
    assert not is_coarse_graining(coarse, fine)
    assert is_coarse_graining(coarse, Decomposition.trivial(plus2))


@hyp.given(weights=hyp_st.lists(hyp_st.floats(0.01, 1.0), min_size=4, max_size=4))
@hyp.settings(max_examples=25, deadline=None)
def test_entropy_is_largest_at_equal_weights(weights):
    cfg = QConfig(b=1.0, oracle=OracleConfig(mode="exact", budget=4))
    projectors = basis_projectors(2, [0, 1])
    state = StateVector.from_amplitudes(np.sqrt(np.asarray(weights)))
    report = q_functional(make_decomposition(state, projectors), cfg)
    uniform = q_functional(make_decomposition(plus_product(2), projectors), cfg)
    assert report.branch_count == uniform.branch_count == 4
    assert uniform.entropy == pytest.approx(math.log(4), abs=1e-12)
    assert report.entropy <= uniform.entropy + 1e-12
