import numpy as np
import pytest

from pkg.core.config import RunConfig, SynthConfig
from pkg.model.items import ItemCatalog, ItemMeta
from pkg.service.synthetic_service import generate_synthetic


def make_catalog(n_items: int = 20, n_categories: int = 4, latent_dim: int = 4, seed: int = 0) -> ItemCatalog:
    """带隐向量的小目录，类别按 id 取模"""
    rng = np.random.default_rng(seed)
    latents = rng.standard_normal((n_items, latent_dim))
    return ItemCatalog([
        ItemMeta(
            item_id=i,
            title=f"Item {i}",
            category=f"cat-{i % n_categories}",
            latent=tuple(float(v) for v in latents[i]),
        )
        for i in range(n_items)
    ])


@pytest.fixture
def catalog() -> ItemCatalog:
    return make_catalog()


@pytest.fixture
def tiny_synth() -> SynthConfig:
    return SynthConfig(
        n_users=24,
        n_items=40,
        latent_dim=8,
        n_categories=4,
        seq_len_min=6,
        seq_len_max=10,
        seed=3,
    )


@pytest.fixture
def tiny_dataset(tiny_synth):
    return generate_synthetic(tiny_synth)


@pytest.fixture
def tiny_config(tmp_path, tiny_synth) -> RunConfig:
    """几秒内跑完的训练配置"""
    return RunConfig.model_validate({
        "model": {"dim": 8, "backbone": "attention"},
        "federation": {
            "rounds": 2,
            "local_epochs": 1,
            "client_fraction": 0.25,
            "eval_every": 1,
            "learning_rate": 0.01,
        },
        "run": {"seed": 7, "output_dir": str(tmp_path / "run"), "k": 10},
        "synth": tiny_synth.model_dump(),
    })
