import pytest

from dualkit.pairings import PAIRINGS, run_pairing


def test_registry_is_complete():
    assert len(PAIRINGS) == 14
    for pair_id, pairing in PAIRINGS.items():
        assert pairing.pair_id == pair_id
        assert pairing.description


@pytest.mark.parametrize("pair_id", sorted(PAIRINGS))
def test_each_pairing_verifies_on_one_seed(pair_id):
    report = run_pairing(pair_id, seed=0, iters=12, tol=1e-8)
    assert report.passed, (pair_id, report.max_residual)
    assert report.iterations == 12


def test_unknown_pairing_rejected():
    with pytest.raises(KeyError):
        run_pairing("no-such-pairing", seed=0, iters=5)
