import numpy as np
import pytest

from pkg.core.errors import ConfigError, ContractError, ShapeError
from pkg.model.params import ParamSet
from pkg.service.federation_service import ClientStats, ClientUpdate, fedavg_aggregate, sample_clients

STATS = ClientStats(rec_loss=1.0, cl_loss=0.0, steps=1)


def _update(index, params):
    return ClientUpdate(index, params, STATS)


def _random_updates(rng, n, kind="gru"):
    return [
        _update(i, ParamSet.initialize(kind, 8, dim=3, seed=int(rng.integers(1 << 30)), init_scale=1.0))
        for i in range(n)
    ]


class TestFedAvg:
    def test_single_update_is_identity(self):
        params = ParamSet.initialize("attention", 8, dim=3, seed=1)
        assert fedavg_aggregate([_update(0, params)]).array_equal(params)

    def test_identical_updates_are_exact(self):
        params = ParamSet.initialize("gru", 8, dim=3, seed=2)
        updates = [_update(i, params.clone()) for i in range(7)]
        assert fedavg_aggregate(updates).array_equal(params)

    def test_two_constant_updates_average(self):
        a = ParamSet.initialize("gru", 4, dim=2, seed=0).map(lambda name, v: np.full_like(v, 1.0))
        b = a.map(lambda name, v: np.full_like(v, 3.0))
        out = fedavg_aggregate([_update(0, a), _update(1, b)])
        np.testing.assert_array_equal(out["gru.W_z"], np.full((2, 2), 2.0))

    @pytest.mark.parametrize("seed", range(100))
    def test_permutation_invariant_and_within_bounds(self, seed):
        rng = np.random.default_rng(seed)
        updates = _random_updates(rng, int(rng.integers(1, 7)))
        out = fedavg_aggregate(updates)
        shuffled = [updates[i] for i in rng.permutation(len(updates))]
        assert fedavg_aggregate(shuffled).array_equal(out)
        for name in out:
            stacked = np.stack([u.params[name] for u in updates])
            assert np.all(out[name] >= stacked.min(axis=0))
            assert np.all(out[name] <= stacked.max(axis=0))
            np.testing.assert_allclose(out[name], stacked.mean(axis=0), atol=1e-12)

    def test_empty(self):
        with pytest.raises(ContractError):
            fedavg_aggregate([])

    def test_duplicate_indices(self):
        params = ParamSet.initialize("gru", 4, dim=2)
        with pytest.raises(ContractError):
            fedavg_aggregate([_update(1, params), _update(1, params)])

    def test_layout_mismatch(self):
        with pytest.raises(ShapeError):
            fedavg_aggregate([
                _update(0, ParamSet.initialize("gru", 4, dim=2)),
                _update(1, ParamSet.initialize("gru", 5, dim=2)),
            ])

    def test_rejects_raw_data(self):
        with pytest.raises(TypeError):
            fedavg_aggregate([{"train": [1, 2, 3]}])


class TestSampleClients:
    def test_size_and_order(self):
        rng = np.random.default_rng(0)
        picked = sample_clients(100, 0.1, rng)
        assert len(picked) == 10
        assert picked == sorted(set(picked))
        assert all(0 <= i < 100 for i in picked)

    def test_at_least_one(self):
        assert len(sample_clients(3, 0.01, np.random.default_rng(0))) == 1

    def test_full_fraction(self):
        assert sample_clients(5, 1.0, np.random.default_rng(0)) == [0, 1, 2, 3, 4]

    def test_explicit_count_capped(self):
        assert len(sample_clients(5, 0.1, np.random.default_rng(0), count=3)) == 3
        assert sample_clients(5, 0.1, np.random.default_rng(0), count=50) == [0, 1, 2, 3, 4]

    def test_same_rng_same_sample(self):
        assert sample_clients(50, 0.2, np.random.default_rng(4)) == sample_clients(50, 0.2, np.random.default_rng(4))

    def test_no_clients(self):
        with pytest.raises(ContractError):
            sample_clients(0, 0.5, np.random.default_rng(0))

    @pytest.mark.parametrize("fraction", [0.0, 1.5, -0.2])
    def test_bad_fraction(self, fraction):
        with pytest.raises(ConfigError):
            sample_clients(10, fraction, np.random.default_rng(0))
